//! Problems outside the registry: one from an experiment file with inline
//! expressions, one built directly from closures in two dimensions.

use sastab::{
    parse_config, parse_expression, rng_stream, AdditiveDist, BoxRegion, DriftField, Engine,
    LyapunovSpec, NoiseModel, RealVector, SAProblem, StabilizerConfig, StepSchedule,
};

const CUBIC: &str = r#"
[problem]
name = "cubic"
h = "-x^3 - x"
W = "x^2"
grad_W = "2*x"
region = [-10.0, 10.0]
[problem.noise]
kind = "multiplicative"
scale = "x"
f = "x^2"

[stabilizer]
M = 1
N = 4
box = [-10.0, 10.0]

[run]
mode = "adaptive"
x0 = 8.0
horizon = 5000
seed = 1
"#;

fn main() -> sastab::Result<()> {
    let e = parse_expression("-(x*exp(abs(x)))")?;
    println!("{e}  at x = 1: {}", e.eval(&[1.0])?);

    // grad_W and the descent of W are audited while loading
    let cfg = parse_config(CUBIC)?;
    let t = cfg.engine()?.run(&cfg.run.x0, cfg.run.horizon, cfg.run.seed)?;
    println!(
        "{}: first step g = {:.2}, y_5000 = {:.5}",
        cfg.problem.name, t.rows[0].g, t.terminal.y[0]
    );
    match parse_config(&CUBIC.replace("2*x", "3*x")) {
        Err(err) => println!("inconsistent gradient rejected: {err}"),
        Ok(_) => println!("unexpectedly accepted"),
    }

    // a rotating, contracting drift in the plane with W = |x|^2
    let drift = DriftField::new(2, |x| RealVector::new(vec![-x[0] - 2.0 * x[1], 2.0 * x[0] - x[1]]));
    let noise = NoiseModel::additive(2, AdditiveDist::Gaussian { mean: 0.0, sd: 0.5 })?;
    let problem = SAProblem::new(
        "spiral",
        drift,
        noise,
        LyapunovSpec::squared_distance(RealVector::zeros(2), 1),
        StepSchedule::polynomial(1.0, 1.0, 0.75)?,
        BoxRegion::cube(2, 20.0)?,
    )?;
    let (stab, _) = StabilizerConfig::calibrate(
        &problem,
        4,
        1.05,
        10_000,
        problem.region.clone(),
        &mut rng_stream(0, 1),
    )?;
    let t = Engine::adaptive(problem, stab).run(&RealVector::new(vec![15.0, -10.0]), 20_000, 9)?;
    println!("spiral: y_20000 = {}, last scaled step {:?}", t.terminal.y, sastab::last_scaled_index(&t));
    Ok(())
}
