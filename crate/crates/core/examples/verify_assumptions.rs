//! Numeric audits of a problem before running it: the gradient of `W`,
//! descent of `W` along `h`, the growth bound `c_N` and the inequality it is
//! meant to guarantee under scaled steps.

use sastab::stabilizer::choose_threshold_n;
use sastab::{
    check_c_infinity, check_descent, estimate_c_n, gradient_check, lipschitz_estimate, registry,
    rng_stream, verify_wgc, BoxRegion, StabilizerConfig,
};

fn main() -> sastab::Result<()> {
    let mut rng = rng_stream(2024, 0);
    for name in registry::NAMES {
        let p = registry::builtin(name)?;
        let region = BoxRegion::interval(-5.0, 5.0)?;
        println!("== {name}");

        let pts: Vec<_> = (0..100).map(|_| region.sample(&mut rng)).collect();
        let grad = gradient_check(&p.lyapunov, &pts, 1e-5);
        println!("  gradient check: passed {} (worst rel err {:.1e})", grad.passed, grad.worst_rel_error());

        let d = check_descent(&p, 1, u32::MAX, 10_000, &region, &mut rng)?;
        println!("  sup h.grad W on W >= 1: {:.4} at {:?} -> {:?}", d.sup_wdot, d.worst_point, d.verdict);

        let n = choose_threshold_n(&p, 5_000, &region, 64, &mut rng)?;
        let est = estimate_c_n(&p, 1, n, 10_000, 1.05, &region, &mut rng)?;
        println!("  N = {n}: c_N = {:.4} from {} annulus samples", est.c_n, est.hits);

        let stab = StabilizerConfig::new(1, sastab::UpperLevel::Finite(n), 1.05, est.c_n, 10_000, region.clone())?;
        let wgc = verify_wgc(&stab, &p, 10_000, &mut rng)?;
        println!("  growth inequality: {} violations, worst ratio {:.4}", wgc.violations, wgc.worst_ratio);

        let ci = check_c_infinity(&p, 10_000, &region, &mut rng)?;
        println!("  unscaled bound: {:.4e} ({:?})", ci.estimate, ci.verdict);

        let k = lipschitz_estimate(&p.drift, &BoxRegion::interval(-2.0, 2.0)?, 2_000, &mut rng)?;
        println!("  Lipschitz constant of h on [-2, 2] >= {k:.4}");
    }

    let flipped = registry::sign_flipped();
    let d = check_descent(&flipped, 1, u32::MAX, 1_000, &flipped.region, &mut rng)?;
    println!("== sign-flipped drift: sup h.grad W = {:.3} -> {:?}", d.sup_wdot, d.verdict);
    Ok(())
}
