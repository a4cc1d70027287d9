//! Reading stability off recorded runs: hitting times, windows of
//! algorithmic time, per-window descent of `W`, the gated martingale and the
//! stopped Lyapunov moments of an ensemble.

use sastab::engine::run_ensemble_trajectories;
use sastab::{
    analyze, ensemble_lyapunov_moment, hitting_time, martingale_partial_sums, registry, rng_stream,
    window_indices, BoxRegion, DiagnosticsConfig, Engine, RealVector, StabilizerConfig,
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
    let engine = Engine::adaptive(p.clone(), stab);
    let traj = engine.run(&RealVector::scalar(3.0), 10_000, 7)?;

    let k = sastab::lipschitz_estimate(&p.drift, &BoxRegion::interval(-2.0, 2.0)?, 2_000, &mut rng_stream(0, 4))?;
    let diag = DiagnosticsConfig::new(1.0, 4, 0.05, 0.05)?.with_lipschitz(k);

    println!("first n with W < 4: {:?}, with W < 1: {:?}", hitting_time(&traj, 0, 4.0), hitting_time(&traj, 0, 1.0));
    println!("T = 1 windows: {:?}", window_indices(&traj, 0, 1.0));

    let report = analyze(&traj, &p, &diag)?;
    for ((a, b), v) in report.windows.iter().zip(&report.window_verdicts) {
        println!("  [{a:>5}, {b:>5}]  W {:.4} -> {:.4}  {v:?}", traj.rows[*a].w, traj.rows[*b].w);
    }

    let m = martingale_partial_sums(&traj, &p, &diag)?;
    let budget = diag.tail_budget().unwrap_or(f64::NAN);
    println!(
        "martingale tail: {:.3e} at 0, {:.3e} at 1000, {:.3e} at 5000; below {budget:.2e} from n = {:?}",
        m.sup_tail[0],
        m.sup_tail[1000],
        m.sup_tail[5000],
        m.settled_after(budget)
    );

    let seeds: Vec<u64> = (0..100).collect();
    let runs: Vec<_> = run_ensemble_trajectories(&engine, &RealVector::scalar(3.0), 2_000, &seeds, 4)
        .into_iter()
        .collect::<Result<_, _>>()?;
    let moment = ensemble_lyapunov_moment(&runs, 0, 1);
    for n in [0, 1, 2, 5, 10, 100, 1999] {
        println!("E W(y_(n ^ tau)) at n = {n:>4}: {:.4}", moment[n]);
    }
    Ok(())
}
