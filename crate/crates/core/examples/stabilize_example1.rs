//! The steep drift `-x e^{|x|}` from x0 = 3: the plain iteration explodes in
//! a handful of steps, the scaled one settles at 0.

use sastab::{registry, rng_stream, BoxRegion, Engine, RealVector, StabilizerConfig};

fn main() -> sastab::Result<()> {
    let problem = registry::example1();
    let x0 = RealVector::scalar(3.0);

    let vanilla = Engine::vanilla(problem.clone()).run(&x0, 50, 1)?;
    println!("vanilla:");
    for row in vanilla.rows.iter().take(6) {
        println!("  n = {:>2}  y = {:>12.4e}", row.n, row.y[0]);
    }
    println!(
        "  overflowed = {} after {} steps (y = {})",
        vanilla.overflowed(),
        vanilla.len(),
        vanilla.terminal.y
    );

    let (stab, est) = StabilizerConfig::calibrate(
        &problem,
        4,
        1.05,
        10_000,
        BoxRegion::interval(-5.0, 5.0)?,
        &mut rng_stream(0, 1),
    )?;
    println!("\nc_N = {:.4} (sampled sup {:.4} at {:?})", est.c_n, est.sampled_sup, est.worst_point);

    let adaptive = Engine::adaptive(problem, stab).run(&x0, 10_000, 1)?;
    println!("adaptive:");
    for row in adaptive.rows.iter().take(4) {
        println!(
            "  n = {:>2}  y = {:>8.4}  g = {:>8.3}  a = {:.4}  a/g = {:.5}",
            row.n, row.y[0], row.g, row.a, row.a_eff
        );
    }
    println!(
        "  sup |y| = {}, last scaled step = {:?}, y_10000 = {:.5}",
        sastab::sup_norm(&adaptive),
        sastab::last_scaled_index(&adaptive),
        adaptive.terminal.y[0]
    );
    Ok(())
}
