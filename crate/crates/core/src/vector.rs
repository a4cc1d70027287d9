//! State vectors and axis-aligned sampling regions.

use std::fmt;
use std::ops::{Index, IndexMut};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RealVector(Vec<f64>);

impl RealVector {
    pub fn new(coords: Vec<f64>) -> Self {
        RealVector(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        RealVector(vec![0.0; dim])
    }

    pub fn scalar(x: f64) -> Self {
        RealVector(vec![x])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn dot(&self, other: &RealVector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    /// Euclidean norm, accumulated with `hypot` so it stays finite whenever
    /// the true norm is.
    pub fn norm(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, c| acc.hypot(*c))
    }

    pub fn distance(&self, other: &RealVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// `self + alpha * other`
    pub fn add_scaled(&self, alpha: f64, other: &RealVector) -> RealVector {
        RealVector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        )
    }

    pub fn add(&self, other: &RealVector) -> RealVector {
        self.add_scaled(1.0, other)
    }

    pub fn sub(&self, other: &RealVector) -> RealVector {
        self.add_scaled(-1.0, other)
    }

    pub fn scale(&self, alpha: f64) -> RealVector {
        RealVector(self.0.iter().map(|a| alpha * a).collect())
    }
}

impl From<Vec<f64>> for RealVector {
    fn from(v: Vec<f64>) -> Self {
        RealVector(v)
    }
}

impl From<f64> for RealVector {
    fn from(x: f64) -> Self {
        RealVector::scalar(x)
    }
}

impl Index<usize> for RealVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for RealVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl fmt::Display for RealVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Axis-aligned box `[lo_0, hi_0] x ... x [lo_{d-1}, hi_{d-1}]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRegion {
    /// Fails with `InvalidRegion` unless every side has positive finite width.
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidRegion(format!(
                "bounds have dimensions {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        for (i, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && h > l) {
                return Err(Error::InvalidRegion(format!(
                    "side {i} is [{l}, {h}], expected finite lo < hi"
                )));
            }
        }
        Ok(BoxRegion { lo, hi })
    }

    /// The cube `[-half_width, half_width]^dim`.
    pub fn cube(dim: usize, half_width: f64) -> Result<Self> {
        BoxRegion::new(vec![-half_width; dim], vec![half_width; dim])
    }

    /// The interval `[lo, hi]` as a one-dimensional box.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        BoxRegion::new(vec![lo], vec![hi])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> RealVector {
        RealVector::new(
            self.lo
                .iter()
                .zip(&self.hi)
                .map(|(l, h)| 0.5 * (l + h))
                .collect(),
        )
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).collect()
    }

    pub fn contains(&self, x: &RealVector) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(c, (l, h))| *c >= *l && *c <= *h)
    }

    /// Shrink (factor < 1) or grow about the center.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let c = self.center();
        let lo = self
            .lo
            .iter()
            .enumerate()
            .map(|(i, l)| c[i] + factor * (l - c[i]))
            .collect();
        let hi = self
            .hi
            .iter()
            .enumerate()
            .map(|(i, h)| c[i] + factor * (h - c[i]))
            .collect();
        BoxRegion::new(lo, hi)
    }

    /// Uniform draw from the box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> RealVector {
        RealVector::new(
            self.lo
                .iter()
                .zip(&self.hi)
                .map(|(l, h)| l + (h - l) * rng.random::<f64>())
                .collect(),
        )
    }

    /// Center and all `2^d` corners (capped at d = 10).
    pub fn landmarks(&self) -> Vec<RealVector> {
        let mut pts = vec![self.center()];
        let d = self.dim();
        if d <= 10 {
            for mask in 0u32..(1 << d) {
                pts.push(RealVector::new(
                    (0..d)
                        .map(|i| if mask & (1 << i) != 0 { self.hi[i] } else { self.lo[i] })
                        .collect(),
                ));
            }
        }
        pts
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn arithmetic() {
        let a = RealVector::new(vec![1.0, 2.0, 2.0]);
        let b = RealVector::new(vec![0.0, 1.0, -1.0]);
        assert!((a.norm() - 3.0).abs() < 1e-15);
        assert_eq!(a.dot(&b), 0.0);
        assert_eq!(a.add_scaled(2.0, &b), RealVector::new(vec![1.0, 4.0, 0.0]));
        assert_eq!(a.sub(&a), RealVector::zeros(3));
    }

    #[test]
    fn degenerate_box_rejected() {
        assert!(matches!(BoxRegion::interval(1.0, 1.0), Err(Error::InvalidRegion(_))));
        assert!(BoxRegion::new(vec![0.0], vec![1.0, 2.0]).is_err());
        assert!(BoxRegion::interval(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn samples_stay_inside() {
        let b = BoxRegion::new(vec![-1.0, 2.0], vec![1.0, 5.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            assert!(b.contains(&b.sample(&mut rng)));
        }
        assert_eq!(b.landmarks().len(), 5);
        assert_eq!(b.scaled(0.5).unwrap().lo, vec![-0.5, 2.75]);
    }
}
