//! Black-box cost oracles and the benchmark zoo.
//!
//! Algorithms only ever query `f(x)` (zeroth order) and `grad f(x)` (first
//! order). Benchmarks additionally advertise what is known about them: the
//! minimiser, the optimal value, the gradient Lipschitz constant `L` and the
//! Polyak-Lojasiewicz constant, which the diagnostics need.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::point::Point;

/// Zeroth- and first-order access to a cost function.
///
/// `value` and `gradient` are unchecked fast paths used inside iteration
/// loops; the free functions [`eval`] and [`grad`] validate dimensions.
/// Implementations must be pure.
pub trait CostOracle: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64], out: &mut [f64]);

    fn optimum(&self) -> Option<Point> {
        None
    }

    fn optimum_value(&self) -> Option<f64> {
        None
    }

    fn lipschitz(&self) -> Option<f64> {
        None
    }

    fn pl_constant(&self) -> Option<f64> {
        None
    }

    fn is_convex(&self) -> bool {
        false
    }
}

fn check_dim<O: CostOracle + ?Sized>(oracle: &O, x: &Point) -> Result<()> {
    if x.dim() != oracle.dim() {
        return Err(Error::DimensionMismatch {
            expected: oracle.dim(),
            got: x.dim(),
        });
    }
    Ok(())
}

pub fn eval<O: CostOracle + ?Sized>(oracle: &O, x: &Point) -> Result<f64> {
    check_dim(oracle, x)?;
    Ok(oracle.value(x))
}

pub fn grad<O: CostOracle + ?Sized>(oracle: &O, x: &Point) -> Result<Point> {
    check_dim(oracle, x)?;
    let mut g = vec![0.0; x.dim()];
    oracle.gradient(x, &mut g);
    Ok(Point::from_raw(g))
}

/// Central-difference gradient, used to cross-check the analytic gradients.
pub fn finite_diff_grad<O: CostOracle + ?Sized>(oracle: &O, x: &Point, h: f64) -> Result<Point> {
    check_dim(oracle, x)?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("h", "must be a positive finite real"));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("finite-difference base point"));
    }
    let mut probe = x.as_slice().to_vec();
    let g = (0..x.dim())
        .map(|i| {
            let xi = probe[i];
            probe[i] = xi + h;
            let fp = oracle.value(&probe);
            probe[i] = xi - h;
            let fm = oracle.value(&probe);
            probe[i] = xi;
            (fp - fm) / (2.0 * h)
        })
        .collect();
    Ok(Point::from_raw(g))
}

#[derive(Debug, Clone, PartialEq)]
pub enum BenchmarkKind {
    /// `f(x) = lambda/2 |x|^2`.
    ScaledQuadratic { lambda: f64 },
    /// `f(x, y) = (x^2 + kappa y^2) / 2`.
    EllipticQuadratic { kappa: f64 },
    /// `f(x) = lambda/4 |x - center|^4`.
    Quartic { lambda: f64, center: Point },
    /// `f(x, y) = (1 - x)^2 + 100 (y - x^2)^2`.
    Rosenbrock,
    /// `J(x, y) = (x^2 - y^2) / 2`, a saddle at the origin.
    SaddleQuadratic,
}

/// A named benchmark cost with its known constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    kind: BenchmarkKind,
    dim: usize,
}

impl Benchmark {
    pub fn scaled_quadratic(lambda: f64, dim: usize) -> Result<Self> {
        positive("lambda", lambda)?;
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        Ok(Benchmark {
            kind: BenchmarkKind::ScaledQuadratic { lambda },
            dim,
        })
    }

    pub fn elliptic(kappa: f64) -> Result<Self> {
        positive("kappa", kappa)?;
        Ok(Benchmark {
            kind: BenchmarkKind::EllipticQuadratic { kappa },
            dim: 2,
        })
    }

    /// Quartic bowl centred at `center` (the origin of dimension `dim` when `None`).
    pub fn quartic(lambda: f64, dim: usize, center: Option<Point>) -> Result<Self> {
        positive("lambda", lambda)?;
        let center = match center {
            Some(c) if c.dim() != dim => {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: c.dim(),
                })
            }
            Some(c) => c,
            None if dim == 0 => return Err(Error::invalid("dim", "must be at least 1")),
            None => Point::zeros(dim),
        };
        Ok(Benchmark {
            kind: BenchmarkKind::Quartic { lambda, center },
            dim,
        })
    }

    pub fn rosenbrock() -> Self {
        Benchmark {
            kind: BenchmarkKind::Rosenbrock,
            dim: 2,
        }
    }

    pub fn saddle() -> Self {
        Benchmark {
            kind: BenchmarkKind::SaddleQuadratic,
            dim: 2,
        }
    }

    pub fn kind(&self) -> &BenchmarkKind {
        &self.kind
    }

    pub fn name(&self) -> BenchmarkName {
        match self.kind {
            BenchmarkKind::ScaledQuadratic { .. } => BenchmarkName::ScaledQuadratic,
            BenchmarkKind::EllipticQuadratic { .. } => BenchmarkName::Elliptic,
            BenchmarkKind::Quartic { .. } => BenchmarkName::Quartic,
            BenchmarkKind::Rosenbrock => BenchmarkName::Rosenbrock,
            BenchmarkKind::SaddleQuadratic => BenchmarkName::Saddle,
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

impl CostOracle for Benchmark {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            BenchmarkKind::ScaledQuadratic { lambda } => {
                0.5 * lambda * x.iter().map(|v| v * v).sum::<f64>()
            }
            BenchmarkKind::EllipticQuadratic { kappa } => 0.5 * (x[0] * x[0] + kappa * x[1] * x[1]),
            BenchmarkKind::Quartic { lambda, center } => {
                let r2: f64 = x
                    .iter()
                    .zip(center.iter())
                    .map(|(a, c)| (a - c) * (a - c))
                    .sum();
                0.25 * lambda * r2 * r2
            }
            BenchmarkKind::Rosenbrock => {
                let a = 1.0 - x[0];
                let b = x[1] - x[0] * x[0];
                a * a + 100.0 * b * b
            }
            BenchmarkKind::SaddleQuadratic => 0.5 * (x[0] * x[0] - x[1] * x[1]),
        }
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            BenchmarkKind::ScaledQuadratic { lambda } => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = lambda * v;
                }
            }
            BenchmarkKind::EllipticQuadratic { kappa } => {
                out[0] = x[0];
                out[1] = kappa * x[1];
            }
            BenchmarkKind::Quartic { lambda, center } => {
                let r2: f64 = x
                    .iter()
                    .zip(center.iter())
                    .map(|(a, c)| (a - c) * (a - c))
                    .sum();
                for ((o, v), c) in out.iter_mut().zip(x).zip(center.iter()) {
                    *o = lambda * r2 * (v - c);
                }
            }
            BenchmarkKind::Rosenbrock => {
                let b = x[1] - x[0] * x[0];
                out[0] = -2.0 * (1.0 - x[0]) - 400.0 * x[0] * b;
                out[1] = 200.0 * b;
            }
            BenchmarkKind::SaddleQuadratic => {
                out[0] = x[0];
                out[1] = -x[1];
            }
        }
    }

    fn optimum(&self) -> Option<Point> {
        match &self.kind {
            BenchmarkKind::ScaledQuadratic { .. } | BenchmarkKind::EllipticQuadratic { .. } => {
                Some(Point::zeros(self.dim))
            }
            BenchmarkKind::Quartic { center, .. } => Some(center.clone()),
            BenchmarkKind::Rosenbrock => Some(Point::splat(2, 1.0)),
            BenchmarkKind::SaddleQuadratic => None,
        }
    }

    fn optimum_value(&self) -> Option<f64> {
        match self.kind {
            BenchmarkKind::SaddleQuadratic => None,
            _ => Some(0.0),
        }
    }

    fn lipschitz(&self) -> Option<f64> {
        match self.kind {
            BenchmarkKind::ScaledQuadratic { lambda } => Some(lambda),
            BenchmarkKind::EllipticQuadratic { kappa } => Some(kappa.max(1.0)),
            BenchmarkKind::SaddleQuadratic => Some(1.0),
            // not globally L-smooth
            BenchmarkKind::Quartic { .. } | BenchmarkKind::Rosenbrock => None,
        }
    }

    fn pl_constant(&self) -> Option<f64> {
        match self.kind {
            BenchmarkKind::ScaledQuadratic { lambda } => Some(lambda),
            BenchmarkKind::EllipticQuadratic { kappa } => Some(kappa.min(1.0)),
            _ => None,
        }
    }

    fn is_convex(&self) -> bool {
        matches!(
            self.kind,
            BenchmarkKind::ScaledQuadratic { .. }
                | BenchmarkKind::EllipticQuadratic { .. }
                | BenchmarkKind::Quartic { .. }
        )
    }
}

/// Command-line names of the benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkName {
    ScaledQuadratic,
    Elliptic,
    Quartic,
    Rosenbrock,
    Saddle,
}

impl BenchmarkName {
    pub const ALL: [BenchmarkName; 5] = [
        BenchmarkName::ScaledQuadratic,
        BenchmarkName::Elliptic,
        BenchmarkName::Quartic,
        BenchmarkName::Rosenbrock,
        BenchmarkName::Saddle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BenchmarkName::ScaledQuadratic => "scaled-quadratic",
            BenchmarkName::Elliptic => "elliptic",
            BenchmarkName::Quartic => "quartic",
            BenchmarkName::Rosenbrock => "rosenbrock",
            BenchmarkName::Saddle => "saddle",
        }
    }
}

impl fmt::Display for BenchmarkName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchmarkName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BenchmarkName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::invalid("benchmark", format!("unknown benchmark `{s}`")))
    }
}
