//! The limiting o.d.e. `u' = h(u)`: integrate it, locate its equilibria, and
//! measure how closely a scaled trajectory tracks it in algorithmic time.

use sastab::ode::{flow_compare, integrate, DEFAULT_ABS_TOL, DEFAULT_REL_TOL};
use sastab::{equilibria_1d, registry, rng_stream, BoxRegion, Engine, RealVector, StabilizerConfig};

fn main() -> sastab::Result<()> {
    let p = registry::example1();
    let flow = integrate(&p.drift, &RealVector::scalar(3.0), 2.0, DEFAULT_REL_TOL, DEFAULT_ABS_TOL)?;
    println!(
        "u(2) from u(0) = 3: {:.6e} ({} accepted, {} rejected steps)",
        flow.endpoint[0], flow.accepted_steps, flow.rejected_steps
    );
    for (t, u) in flow.times.iter().zip(&flow.states).step_by(flow.times.len().div_ceil(8)) {
        println!("  t = {t:.5}  u = {:.6}", u[0]);
    }

    println!("equilibria of h on [-10, 10]: {:?}", equilibria_1d(&p.drift, -10.0, 10.0, 2001)?);

    let (stab, _) = StabilizerConfig::calibrate(
        &p,
        4,
        1.05,
        10_000,
        BoxRegion::interval(-5.0, 5.0)?,
        &mut rng_stream(0, 1),
    )?;
    let traj = Engine::adaptive(p.clone(), stab).run(&RealVector::scalar(3.0), 10_000, 3)?;
    for start in [100, 1000, 5000] {
        let dev = flow_compare(&traj, &p, (start, start + 500), 1e-8)?;
        println!("max |y_j - u(t_j)| over steps {start}..{}: {dev:.3e}", start + 500);
    }
    Ok(())
}
