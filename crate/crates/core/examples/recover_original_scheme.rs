//! When the growth of `h` and the noise is already controlled the scaling
//! never engages and the scaled iteration is the original one, bit for bit.

use sastab::{
    check_c_infinity, registry, rng_stream, Engine, RealVector, StabilizerConfig,
};

fn main() -> sastab::Result<()> {
    let problem = registry::example2();
    let region = problem.region.clone();

    let c_inf = check_c_infinity(&problem, 10_000, &region, &mut rng_stream(0, 2))?;
    // Additive noise keeps f > 0 at the minimum of W, so this bound is
    // infinite; the finite level N = 2 is what certifies g = 1 here.
    println!(
        "sup (|h|^2 + f) / min(1, W): {} ({:?})",
        c_inf.estimate, c_inf.verdict
    );

    let (stab, _) =
        StabilizerConfig::calibrate(&problem, 2, 1.05, 10_000, region, &mut rng_stream(0, 1))?;
    let adaptive = Engine::adaptive(problem.clone(), stab);
    let vanilla = Engine::vanilla(problem);
    let x0 = RealVector::scalar(3.0);
    for seed in 0..5 {
        let a = adaptive.run(&x0, 1000, seed)?;
        let v = vanilla.run(&x0, 1000, seed)?;
        let scaled = a.rows.iter().filter(|r| r.scaled()).count();
        println!(
            "seed {seed}: scaled steps {scaled}, identical {}, y_1000 = {:+.5}",
            a.rows == v.rows && a.terminal == v.terminal,
            a.terminal.y[0]
        );
    }
    Ok(())
}
