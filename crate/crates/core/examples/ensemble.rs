//! Many seeds in parallel, a JSON summary, and a CSV trace of one run.
//! Results are independent of the number of worker threads.

use sastab::trace::EnsembleSummary;
use sastab::{
    read_trace, registry, rng_stream, run_ensemble, write_trace, BoxRegion, Engine, RealVector,
    StabilizerConfig,
};

fn main() -> sastab::Result<()> {
    let p = registry::example1();
    let (stab, _) = StabilizerConfig::calibrate(
        &p,
        4,
        1.05,
        10_000,
        BoxRegion::interval(-5.0, 5.0)?,
        &mut rng_stream(0, 1),
    )?;
    let engine = Engine::adaptive(p, stab);
    let x0 = RealVector::scalar(3.0);
    let seeds: Vec<u64> = (0..200).collect();

    let serial = run_ensemble(&engine, &x0, 5_000, &seeds, 1)?;
    let parallel = run_ensemble(&engine, &x0, 5_000, &seeds, 8)?;
    println!("1 worker == 8 workers: {}", serial == parallel);

    let summary = EnsembleSummary::new(&parallel, None)?;
    println!("{}", serde_json::to_string_pretty(&summary.aggregates)?);

    let dir = std::env::temp_dir();
    let path = dir.join("sastab-example1-seed0.csv");
    let traj = engine.run(&x0, 1_000, 0)?;
    write_trace(&traj, &path)?;
    let back = read_trace(&path)?;
    println!("trace {} round-trips: {}", path.display(), back.rows == traj.rows);
    Ok(())
}
