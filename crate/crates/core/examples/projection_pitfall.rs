//! Projecting onto a ball that misses the root of `h` manufactures a fixed
//! point on the boundary. Drift `5 - x`, ball of radius 3.

use sastab::{
    registry, rng_stream, run_ensemble, BoxRegion, Engine, Mode, RealVector, StabilizerConfig,
};

fn main() -> sastab::Result<()> {
    let problem = registry::shifted_linear();
    let x0 = RealVector::scalar(0.0);
    let seeds: Vec<u64> = (0..100).collect();

    let projected = Engine::new(problem.clone(), Mode::Projection { radius: 3.0 }, None)?;
    let (stab, _) = StabilizerConfig::calibrate(
        &problem,
        4,
        1.05,
        10_000,
        BoxRegion::interval(-10.0, 10.0)?,
        &mut rng_stream(0, 1),
    )?;
    let adaptive = Engine::adaptive(problem, stab);

    for (name, engine) in [("projection", &projected), ("adaptive", &adaptive)] {
        let runs = run_ensemble(engine, &x0, 10_000, &seeds, 4)?;
        let ends: Vec<f64> = runs.iter().map(|s| s.terminal_y[0]).collect();
        let mean = ends.iter().sum::<f64>() / ends.len() as f64;
        let (lo, hi) = ends
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
        println!("{name:>10}: y_10000 mean {mean:.4}, range [{lo:.4}, {hi:.4}]");
    }
    println!("h(3) = {} != 0: the projected limit is not an equilibrium", 5.0 - 3.0);
    Ok(())
}
