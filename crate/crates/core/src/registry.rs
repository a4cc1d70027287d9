//! Builtin problems.
//!
//! | name             | drift `h(x)`     | noise `M`                | `W(x)`      | `M` level |
//! |------------------|------------------|--------------------------|-------------|-----------|
//! | `example1`       | `-x e^{|x|}`     | `-x e^{|x|} xi`, xi~N(0,1) | `x^2`     | 1 |
//! | `example2`       | `-tanh(x)`       | uniform(-1, 1)           | `x^2`       | 1 |
//! | `shifted-linear` | `5 - x`          | N(0, 1)                  | `(x - 5)^2` | 1 |
//!
//! All use the harmonic schedule `a(n) = 1/(n+1)` and sample on `[-10, 10]`.

use crate::error::{Error, Result};
use crate::model::{AdditiveDist, DriftField, LyapunovSpec, NoiseModel, SAProblem, StepSchedule};
use crate::vector::{BoxRegion, RealVector};

pub const NAMES: [&str; 3] = ["example1", "example2", "shifted-linear"];

pub fn builtin(name: &str) -> Result<SAProblem> {
    match name {
        "example1" => Ok(example1()),
        "example2" => Ok(example2()),
        "shifted-linear" => Ok(shifted_linear()),
        other => Err(Error::UnknownProblem(other.to_string())),
    }
}

fn default_region() -> BoxRegion {
    BoxRegion::interval(-10.0, 10.0).expect("static region")
}

/// `x_{n+1} = x_n - a(n) x_n e^{|x_n|} (1 + xi_{n+1})`
pub fn example1() -> SAProblem {
    let drift = DriftField::scalar(|x| -x * x.abs().exp());
    let noise = NoiseModel::multiplicative(
        1,
        |x| RealVector::scalar(-x[0] * x[0].abs().exp()),
        |x| x[0] * x[0] * (2.0 * x[0].abs()).exp(),
    );
    SAProblem::new(
        "example1",
        drift,
        noise,
        LyapunovSpec::squared_distance(RealVector::zeros(1), 1),
        StepSchedule::Harmonic,
        default_region(),
    )
    .expect("static problem")
}

/// Bounded drift with limits -1 and +1 at the two ends, uniform noise.
pub fn example2() -> SAProblem {
    let noise = NoiseModel::additive(1, AdditiveDist::Uniform { lo: -1.0, hi: 1.0 })
        .expect("static noise");
    SAProblem::new(
        "example2",
        DriftField::scalar(|x| -x.tanh()),
        noise,
        LyapunovSpec::squared_distance(RealVector::zeros(1), 1),
        StepSchedule::Harmonic,
        default_region(),
    )
    .expect("static problem")
}

/// Linear drift towards 5; used to show the fixed point a projection creates.
pub fn shifted_linear() -> SAProblem {
    let noise = NoiseModel::additive(1, AdditiveDist::Gaussian { mean: 0.0, sd: 1.0 })
        .expect("static noise");
    SAProblem::new(
        "shifted-linear",
        DriftField::scalar(|x| 5.0 - x),
        noise,
        LyapunovSpec::squared_distance(RealVector::scalar(5.0), 1),
        StepSchedule::Harmonic,
        default_region(),
    )
    .expect("static problem")
}

/// `h(x) = +x` with `W = x^2`: W increases along the flow everywhere.
/// Not registered; a fixture for descent checks that must fail.
pub fn sign_flipped() -> SAProblem {
    SAProblem::new(
        "sign-flipped",
        DriftField::scalar(|x| x),
        NoiseModel::zero(1),
        LyapunovSpec::squared_distance(RealVector::zeros(1), 1),
        StepSchedule::Harmonic,
        default_region(),
    )
    .expect("static problem")
}
