use std::fmt;
use std::ops::{Deref, Index};

use crate::error::{Error, Result};

/// A dense real vector: a position, a velocity or a gradient.
///
/// Points built through [`Point::new`] are validated (non-empty, finite).
/// Points produced by arithmetic on iterates are not, since overflow is a
/// legitimate outcome that callers inspect with [`Point::is_finite`].
#[derive(Clone, PartialEq, Default)]
pub struct Point(pub(crate) Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("point", "dimension must be at least 1"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("point coordinate"));
        }
        Ok(Point(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn splat(dim: usize, value: f64) -> Self {
        Point(vec![value; dim])
    }

    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        Point(coords)
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

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.0, &self.0)
    }

    pub fn dot(&self, other: &Point) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn distance(&self, other: &Point) -> f64 {
        distance(&self.0, &other.0)
    }

    pub fn sub(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, factor: f64) -> Point {
        Point(self.0.iter().map(|a| a * factor).collect())
    }

    /// `self + factor * other`.
    pub fn axpy(&self, factor: f64, other: &Point) -> Point {
        Point(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + factor * b)
                .collect(),
        )
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for Point {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Point").field(&self.0).finish()
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl TryFrom<&[f64]> for Point {
    type Error = Error;

    fn try_from(v: &[f64]) -> Result<Self> {
        Point::new(v.to_vec())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm, rescaled when the plain sum of squares would underflow
/// into subnormals or overflow.
#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    scaled_norm(a.iter().copied())
}

#[inline]
pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    scaled_norm(a.iter().zip(b).map(|(x, y)| x - y))
}

#[inline]
fn scaled_norm<I: Iterator<Item = f64> + Clone>(it: I) -> f64 {
    let sq: f64 = it.clone().map(|v| v * v).sum();
    if (1e-280..=1e280).contains(&sq) || sq == 0.0 && it.clone().all(|v| v == 0.0) {
        return sq.sqrt();
    }
    let m = it.clone().fold(0.0f64, |m, v| m.max(v.abs()));
    if m == 0.0 || !m.is_finite() {
        return sq.sqrt();
    }
    m * it.map(|v| (v / m) * (v / m)).sum::<f64>().sqrt()
}

#[inline]
pub(crate) fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|c| c.is_finite())
}
