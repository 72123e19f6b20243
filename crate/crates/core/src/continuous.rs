//! Fixed-step simulation of closed-loop inertial gradient flows
//! `x'' + gamma(t, x, x') x' + grad f(x) = 0`.
//!
//! The integrator is explicit forward Euler on the first-order system
//! `(x, v)`, with `gamma` evaluated at the pre-step state:
//!
//! ```text
//! x_{n+1} = x_n + h v_n
//! v_{n+1} = v_n + h (-gamma(t_n, x_n, v_n) v_n - grad f(x_n))
//! ```

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::format::{indexed, sci, sci_opt};
use crate::oracle::CostOracle;
use crate::point::{all_finite, distance, dot, Point};

/// Any coordinate beyond this magnitude ends a simulation as divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Stored traces keep at most roughly this many samples.
pub const SAMPLE_LIMIT: usize = 100_000;

pub type CustomControl = Arc<dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync>;

/// Velocity damping `gamma(t, x, v)`.
#[derive(Clone)]
pub enum DampingLaw {
    /// `gamma = 1 + t |v|^2`.
    Whiplash,
    /// `gamma = r |v|^(p-2)`.
    PowerLaw { r: f64, p: f64 },
    /// `gamma = 1 + alpha(t, x, v)` for a user control law `alpha`.
    Custom(CustomControl),
}

impl fmt::Debug for DampingLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DampingLaw::Whiplash => f.write_str("Whiplash"),
            DampingLaw::PowerLaw { r, p } => f
                .debug_struct("PowerLaw")
                .field("r", r)
                .field("p", p)
                .finish(),
            DampingLaw::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl DampingLaw {
    pub fn gamma(&self, t: f64, x: &[f64], v: &[f64]) -> f64 {
        match self {
            DampingLaw::Whiplash => 1.0 + t * dot(v, v),
            DampingLaw::PowerLaw { r, p } => r * dot(v, v).sqrt().powf(p - 2.0),
            DampingLaw::Custom(alpha) => 1.0 + alpha(t, x, v),
        }
    }
}

pub fn damping_gamma(law: &DampingLaw, t: f64, x: &[f64], v: &[f64]) -> f64 {
    law.gamma(t, x, v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeParams {
    pub h: f64,
    pub horizon: f64,
    pub x0: Point,
    pub v0: Point,
}

impl OdeParams {
    /// Step `h = 0.001`, zero initial velocity.
    pub fn new(x0: Point, horizon: f64) -> Self {
        let v0 = Point::zeros(x0.dim());
        OdeParams {
            h: 1e-3,
            horizon,
            x0,
            v0,
        }
    }

    pub fn with_step(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    pub fn with_velocity(mut self, v0: Point) -> Self {
        self.v0 = v0;
        self
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.h).round() as usize
    }

    pub fn validate<O: CostOracle + ?Sized>(&self, oracle: &O) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::invalid("h", "must be positive"));
        }
        if !(self.horizon >= self.h && self.horizon.is_finite()) {
            return Err(Error::invalid(
                "horizon",
                "must be finite and at least one step",
            ));
        }
        for p in [&self.x0, &self.v0] {
            if p.dim() != oracle.dim() {
                return Err(Error::DimensionMismatch {
                    expected: oracle.dim(),
                    got: p.dim(),
                });
            }
            if !p.is_finite() {
                return Err(Error::NonFinite("initial state"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub gamma: f64,
    /// `|v|^2/2 + f(x) - f*`, when `f*` is known.
    pub w: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousTrace {
    pub dim: usize,
    pub h: f64,
    /// Every `stride`-th integration step is stored (plus the last one).
    pub stride: usize,
    pub samples: Vec<Sample>,
    /// Time of the first state beyond [`DIVERGENCE_LIMIT`] or non-finite.
    pub diverged_at: Option<f64>,
}

impl ContinuousTrace {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    /// `alpha(t) = gamma(t) - 1`, the closed-loop part of the damping.
    pub fn alpha_series(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.gamma - 1.0).collect()
    }

    pub fn header(&self) -> String {
        let mut cols = vec!["t".to_string()];
        cols.extend(indexed("x_", self.dim));
        cols.extend(indexed("v_", self.dim));
        cols.push("gamma".into());
        cols.push("W".into());
        cols.join(",")
    }

    /// CSV with header `t,x_0..x_{d-1},v_0..v_{d-1},gamma,W`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", self.header())?;
        for s in &self.samples {
            let mut line = sci(s.t);
            for c in s.x.iter().chain(&s.v) {
                line.push(',');
                line.push_str(&sci(*c));
            }
            line.push(',');
            line.push_str(&sci(s.gamma));
            line.push(',');
            line.push_str(&sci_opt(s.w));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

pub fn lyapunov_w<O: CostOracle + ?Sized>(oracle: &O, x: &Point, v: &Point) -> Result<f64> {
    let f_star = oracle
        .optimum_value()
        .ok_or(Error::Unsupported("W needs the optimal value f*"))?;
    if x.dim() != oracle.dim() || v.dim() != oracle.dim() {
        return Err(Error::DimensionMismatch {
            expected: oracle.dim(),
            got: if x.dim() != oracle.dim() {
                x.dim()
            } else {
                v.dim()
            },
        });
    }
    Ok(0.5 * v.norm_sq() + oracle.value(x) - f_star)
}

pub fn simulate<O: CostOracle + ?Sized>(
    oracle: &O,
    law: &DampingLaw,
    params: &OdeParams,
) -> Result<ContinuousTrace> {
    let stride = params.steps().div_ceil(SAMPLE_LIMIT).max(1);
    simulate_with_stride(oracle, law, params, stride)
}

pub fn simulate_with_stride<O: CostOracle + ?Sized>(
    oracle: &O,
    law: &DampingLaw,
    params: &OdeParams,
    stride: usize,
) -> Result<ContinuousTrace> {
    params.validate(oracle)?;
    let stride = stride.max(1);
    let h = params.h;
    let n = params.steps();
    let d = oracle.dim();
    let f_star = oracle.optimum_value();

    let mut x = params.x0.as_slice().to_vec();
    let mut v = params.v0.as_slice().to_vec();
    let mut g = vec![0.0; d];
    let mut samples = Vec::with_capacity(n / stride + 2);
    let mut diverged_at = None;

    let sample = |t: f64, x: &[f64], v: &[f64], gamma: f64| Sample {
        t,
        x: x.to_vec(),
        v: v.to_vec(),
        gamma,
        w: f_star.map(|fs| 0.5 * dot(v, v) + oracle.value(x) - fs),
    };

    for i in 0..=n {
        let t = i as f64 * h;
        let gamma = law.gamma(t, &x, &v);
        if i % stride == 0 || i == n {
            samples.push(sample(t, &x, &v, gamma));
        }
        if i == n {
            break;
        }
        oracle.gradient(&x, &mut g);
        for j in 0..d {
            let vj = v[j];
            v[j] = vj + h * (-gamma * vj - g[j]);
            x[j] += h * vj;
        }
        if !within_limit(&x) || !within_limit(&v) || !gamma.is_finite() {
            diverged_at = Some((i + 1) as f64 * h);
            break;
        }
    }

    Ok(ContinuousTrace {
        dim: d,
        h,
        stride,
        samples,
        diverged_at,
    })
}

fn within_limit(a: &[f64]) -> bool {
    all_finite(a) && a.iter().all(|c| c.abs() <= DIVERGENCE_LIMIT)
}

/// Outcome of a "nonincreasing up to `C dt^2`" check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotoneCheck {
    pub ok: bool,
    /// Largest `y_{n+1} - y_n - C dt^2` (negative when every step passes).
    pub max_violation: f64,
    pub slack_constant: f64,
    pub violations: usize,
}

/// Checks `y_{n+1} <= y_n + C (t_{n+1} - t_n)^2` along a sampled series.
pub fn check_nonincreasing(t: &[f64], y: &[f64], slack_constant: f64) -> MonotoneCheck {
    let mut max_violation = f64::NEG_INFINITY;
    let mut violations = 0;
    for i in 1..t.len().min(y.len()) {
        let dt = t[i] - t[i - 1];
        let excess = y[i] - y[i - 1] - slack_constant * dt * dt;
        if excess.is_nan() || excess > 0.0 {
            violations += 1;
        }
        if excess.is_nan() {
            max_violation = f64::INFINITY;
        } else {
            max_violation = max_violation.max(excess);
        }
    }
    MonotoneCheck {
        ok: violations == 0,
        max_violation,
        slack_constant,
        violations,
    }
}

/// `W` nonincreasing up to the local error of explicit Euler.
///
/// One Euler step changes `W` by `-h gamma |v|^2 + h^2/2 (|a|^2 + v' H v)`
/// up to higher order, with `a` the acceleration. The slack constant is
/// `C = 10 max(1, max_n (|a_n|^2 + c_n |v_n|^2) / 2)` with `a_n` and the
/// secant curvature `c_n` measured on the trace itself.
pub fn check_w_monotone<O: CostOracle + ?Sized>(
    trace: &ContinuousTrace,
    oracle: &O,
) -> Result<MonotoneCheck> {
    let w: Vec<f64> = trace
        .samples
        .iter()
        .map(|s| {
            s.w.ok_or(Error::Unsupported("W needs the optimal value f*"))
        })
        .collect::<Result<_>>()?;
    let t = trace.times();
    let d = trace.dim;
    let mut g0 = vec![0.0; d];
    let mut g1 = vec![0.0; d];
    let mut scale: f64 = 1.0;
    for pair in trace.samples.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let dt = b.t - a.t;
        let acc_sq: f64 =
            a.v.iter()
                .zip(&b.v)
                .map(|(p, q)| ((q - p) / dt).powi(2))
                .sum();
        let dx_sq = distance(&a.x, &b.x).powi(2);
        let curvature = if dx_sq > 0.0 {
            oracle.gradient(&a.x, &mut g0);
            oracle.gradient(&b.x, &mut g1);
            let num: f64 = g1
                .iter()
                .zip(&g0)
                .zip(b.x.iter().zip(&a.x))
                .map(|((p, q), (r, s))| (p - q) * (r - s))
                .sum();
            (num / dx_sq).abs()
        } else {
            0.0
        };
        scale = scale.max(0.5 * (acc_sq + curvature * dot(&a.v, &a.v)));
    }
    Ok(check_nonincreasing(&t, &w, 10.0 * scale))
}

/// The eight unit velocities at angles `k * 45` degrees in the plane.
pub fn compass_velocities(speed: f64) -> Vec<Point> {
    (0..8)
        .map(|k| {
            let a = (k as f64) * std::f64::consts::FRAC_PI_4;
            Point(vec![speed * a.cos(), speed * a.sin()])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::Benchmark;

    fn p(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    #[test]
    fn gamma_examples() {
        let law = DampingLaw::Whiplash;
        assert_eq!(damping_gamma(&law, 0.0, &[1.0], &[3.0]), 1.0);
        assert_eq!(damping_gamma(&law, 2.0, &[1.0], &[0.5]), 1.5);
        assert_eq!(damping_gamma(&law, 7.0, &[1.0], &[0.0]), 1.0);
    }

    #[test]
    fn other_laws() {
        let pl = DampingLaw::PowerLaw { r: 2.0, p: 4.0 };
        assert_eq!(pl.gamma(0.0, &[0.0], &[3.0]), 18.0);
        let custom = DampingLaw::Custom(Arc::new(|t, _x, _v| t));
        assert_eq!(custom.gamma(3.0, &[0.0], &[0.0]), 4.0);
    }

    #[test]
    fn w_examples() {
        let q1 = Benchmark::scaled_quadratic(1.0, 1).unwrap();
        assert_eq!(lyapunov_w(&q1, &p(&[0.0]), &p(&[0.0])).unwrap(), 0.0);
        assert_eq!(lyapunov_w(&q1, &p(&[1.0]), &p(&[1.0])).unwrap(), 1.0);
        let q2 = Benchmark::scaled_quadratic(2.0, 1).unwrap();
        assert_eq!(lyapunov_w(&q2, &p(&[0.0]), &p(&[2.0])).unwrap(), 2.0);
        assert!(lyapunov_w(&Benchmark::saddle(), &p(&[0.0, 0.0]), &p(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn equilibrium_stays_put() {
        let e = Benchmark::elliptic(10.0).unwrap();
        let tr = simulate(
            &e,
            &DampingLaw::Whiplash,
            &OdeParams::new(p(&[0.0, 0.0]), 5.0),
        )
        .unwrap();
        assert!(tr
            .samples
            .iter()
            .all(|s| s.x == [0.0, 0.0] && s.v == [0.0, 0.0]));
        assert_eq!(tr.samples.len(), 5001);
    }

    #[test]
    fn single_euler_step_by_hand() {
        let q = Benchmark::scaled_quadratic(1.0, 1).unwrap();
        let tr = simulate(&q, &DampingLaw::Whiplash, &OdeParams::new(p(&[1.0]), 0.001)).unwrap();
        assert_eq!(tr.samples.len(), 2);
        let last = tr.last().unwrap();
        assert_eq!(last.x, vec![1.0]);
        assert!((last.v[0] + 0.001).abs() < 1e-18);
        assert!((last.t - 0.001).abs() < 1e-18);
    }

    #[test]
    fn converges_on_quadratic() {
        let q = Benchmark::scaled_quadratic(1.0, 1).unwrap();
        let tr = simulate(&q, &DampingLaw::Whiplash, &OdeParams::new(p(&[1.0]), 50.0)).unwrap();
        let last = tr.last().unwrap();
        assert!(last.x[0].abs() <= 1e-3);
        assert!(last.v[0].abs() <= 1e-3);
        assert!(tr.samples.iter().all(|s| s.gamma >= 1.0));
        assert!(check_w_monotone(&tr, &q).unwrap().ok);
    }

    #[test]
    fn halving_step_is_first_order_consistent() {
        let q = Benchmark::scaled_quadratic(1.0, 1).unwrap();
        let h = 1e-2;
        let a = simulate(
            &q,
            &DampingLaw::Whiplash,
            &OdeParams::new(p(&[1.0]), 10.0).with_step(h),
        )
        .unwrap();
        let b = simulate(
            &q,
            &DampingLaw::Whiplash,
            &OdeParams::new(p(&[1.0]), 10.0).with_step(h / 2.0),
        )
        .unwrap();
        let xa = a.last().unwrap().x[0];
        let xb = b.last().unwrap().x[0];
        assert!((xa - xb).abs() <= 10.0 * h);
    }

    #[test]
    fn divergence_marker() {
        // negative damping pumps energy in until the state leaves the limit
        let q = Benchmark::scaled_quadratic(1.0, 1).unwrap();
        let law = DampingLaw::Custom(Arc::new(|_, _, _| -3.0));
        let tr = simulate(&q, &law, &OdeParams::new(p(&[1.0]), 100.0)).unwrap();
        assert!(tr.diverged());
        assert!(tr
            .samples
            .iter()
            .all(|s| s.x.iter().all(|c| c.abs() <= DIVERGENCE_LIMIT)));
        assert!(tr.last().unwrap().t < 100.0);
    }

    #[test]
    fn decimates_long_runs() {
        let q = Benchmark::scaled_quadratic(1.0, 1).unwrap();
        let tr = simulate(
            &q,
            &DampingLaw::Whiplash,
            &OdeParams::new(p(&[1.0]), 50.0).with_step(1e-4),
        )
        .unwrap();
        assert_eq!(tr.stride, 5);
        assert_eq!(tr.samples.len(), 100_001);
        assert!((tr.last().unwrap().t - 50.0).abs() < 1e-9);
    }

    #[test]
    fn monotone_check_detects_increase() {
        let t = [0.0, 0.1, 0.2];
        assert!(check_nonincreasing(&t, &[1.0, 0.9, 0.8], 1.0).ok);
        let bad = check_nonincreasing(&t, &[1.0, 1.5, 0.8], 1.0);
        assert!(!bad.ok);
        assert!((bad.max_violation - (0.5 - 0.01)).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        let q = Benchmark::scaled_quadratic(1.0, 2).unwrap();
        assert!(simulate(&q, &DampingLaw::Whiplash, &OdeParams::new(p(&[1.0]), 1.0)).is_err());
        assert!(simulate(
            &q,
            &DampingLaw::Whiplash,
            &OdeParams::new(p(&[1.0, 0.0]), 1e-4)
        )
        .is_err());
    }

    #[test]
    fn compass() {
        let vs = compass_velocities(1.0);
        assert_eq!(vs.len(), 8);
        assert!(vs.iter().all(|v| (v.norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn csv_header() {
        let q = Benchmark::scaled_quadratic(1.0, 2).unwrap();
        let tr = simulate(
            &q,
            &DampingLaw::Whiplash,
            &OdeParams::new(p(&[1.0, 0.0]), 0.002),
        )
        .unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,x_0,x_1,v_0,v_1,gamma,W");
        assert_eq!(text.lines().count(), 4);
    }
}
