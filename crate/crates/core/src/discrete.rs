//! The discrete whiplash scheme.
//!
//! Starting from a plain gradient step `x_1 = x_0 - s grad f(x_0)`, every
//! iteration computes the closed-loop damping
//!
//! ```text
//! alpha_k = 1 - sqrt(s) - k s |z_k|^2,        z_k = x_k - x_{k-1}
//! x_{k+1} = x_k + alpha_k z_k - s grad f(x_k)
//! ```
//!
//! The only tuning parameter is the step size `s`. Overflow of the iterate is
//! reported through [`RunStatus::Overflow`] instead of an error so that the
//! trace collected so far survives (the explorer restarts on it).
//!
//! Per-step diagnostics (momentum bounds, distance relaxation, the
//! Polyak-Lojasiewicz telescoped bound) run on-line through
//! [`StepObserver`]s because stored traces are decimated on long runs.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::format::{indexed, sci, sci_opt};
use crate::oracle::CostOracle;
use crate::point::{all_finite, distance, dot, norm, Point};

/// Stored traces keep at most roughly this many records.
pub const TRACE_RECORD_LIMIT: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WhiplashParams {
    pub step: f64,
    pub max_iters: usize,
    pub stop_eps: f64,
}

impl WhiplashParams {
    pub fn new(step: f64, max_iters: usize) -> Self {
        WhiplashParams {
            step,
            max_iters,
            stop_eps: 0.0,
        }
    }

    pub fn with_stop_eps(mut self, eps: f64) -> Self {
        self.stop_eps = eps;
        self
    }

    /// `0 < s <= 1`, and `s <= 1/L` whenever the oracle knows its `L`.
    pub fn validate<O: CostOracle + ?Sized>(&self, oracle: &O) -> Result<()> {
        validate_step(self.step, oracle)?;
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters", "must be at least 1"));
        }
        if !(self.stop_eps >= 0.0 && self.stop_eps.is_finite()) {
            return Err(Error::invalid("stop_eps", "must be a nonnegative real"));
        }
        Ok(())
    }
}

pub(crate) fn validate_step<O: CostOracle + ?Sized>(step: f64, oracle: &O) -> Result<()> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::invalid(
            "step",
            format!("must lie in (0, 1], got {step}"),
        ));
    }
    if let Some(l) = oracle.lipschitz() {
        // relative allowance so that s = 1/L computed in floating point passes
        if step > (1.0 / l) * (1.0 + 1e-12) {
            return Err(Error::invalid(
                "step",
                format!(
                    "must not exceed 1/L = {} for this oracle, got {step}",
                    1.0 / l
                ),
            ));
        }
    }
    Ok(())
}

/// Closed-loop damping `1 - sqrt(s) - k s |z|^2`. May be negative.
#[inline]
pub fn damping(step: f64, k: usize, z_norm_sq: f64) -> f64 {
    1.0 - step.sqrt() - (k as f64) * step * z_norm_sq
}

/// Rolling state `(k, x_{k-1}, x_k, z_k, alpha)` of the scheme.
#[derive(Debug, Clone)]
pub struct WhiplashState {
    k: usize,
    x_prev: Point,
    x_curr: Point,
    z: Point,
    alpha: Option<f64>,
    grad: Vec<f64>,
    x_next: Vec<f64>,
    z_next: Vec<f64>,
}

/// The iterate left the representable range at iteration `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Overflow {
    pub k: usize,
}

/// Everything a diagnostic may need about the move from `x_k` to `x_{k+1}`.
#[derive(Debug, Clone, Copy)]
pub struct Transition<'a> {
    pub k: usize,
    pub step: f64,
    pub alpha: f64,
    pub x_prev: &'a [f64],
    pub x_k: &'a [f64],
    pub z_k: &'a [f64],
    pub grad_k: &'a [f64],
    pub x_next: &'a [f64],
    pub z_next: &'a [f64],
}

pub trait StepObserver {
    fn observe(&mut self, t: &Transition<'_>);
}

impl StepObserver for () {
    fn observe(&mut self, _: &Transition<'_>) {}
}

impl<F: FnMut(&Transition<'_>)> StepObserver for F {
    fn observe(&mut self, t: &Transition<'_>) {
        self(t)
    }
}

impl<A: StepObserver, B: StepObserver> StepObserver for (A, B) {
    fn observe(&mut self, t: &Transition<'_>) {
        self.0.observe(t);
        self.1.observe(t);
    }
}

impl<A: StepObserver, B: StepObserver, C: StepObserver> StepObserver for (A, B, C) {
    fn observe(&mut self, t: &Transition<'_>) {
        self.0.observe(t);
        self.1.observe(t);
        self.2.observe(t);
    }
}

/// Gradient step `x_1 = x_0 - s grad f(x_0)`; the state starts at `k = 1`.
pub fn init_step<O: CostOracle + ?Sized>(
    oracle: &O,
    x0: &Point,
    step: f64,
) -> Result<WhiplashState> {
    if x0.dim() != oracle.dim() {
        return Err(Error::DimensionMismatch {
            expected: oracle.dim(),
            got: x0.dim(),
        });
    }
    if !x0.is_finite() {
        return Err(Error::NonFinite("start point"));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid("step", "must be positive"));
    }
    let d = x0.dim();
    let mut grad = vec![0.0; d];
    oracle.gradient(x0, &mut grad);
    if !all_finite(&grad) {
        return Err(Error::InitializationFailure);
    }
    let x1: Vec<f64> = x0.iter().zip(&grad).map(|(x, g)| x - step * g).collect();
    if !all_finite(&x1) {
        return Err(Error::InitializationFailure);
    }
    let z: Vec<f64> = x1.iter().zip(x0.iter()).map(|(a, b)| a - b).collect();
    Ok(WhiplashState {
        k: 1,
        x_prev: x0.clone(),
        x_curr: Point(x1),
        z: Point(z),
        alpha: None,
        grad,
        x_next: vec![0.0; d],
        z_next: vec![0.0; d],
    })
}

impl WhiplashState {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn x_prev(&self) -> &Point {
        &self.x_prev
    }

    pub fn x_curr(&self) -> &Point {
        &self.x_curr
    }

    pub fn z(&self) -> &Point {
        &self.z
    }

    /// Damping used by the most recent step; `None` right after [`init_step`].
    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn z_norm(&self) -> f64 {
        self.z.norm()
    }

    /// Damping the next step would use.
    pub fn pending_alpha(&self, step: f64) -> f64 {
        damping(step, self.k, self.z.norm_sq())
    }

    pub fn step<O: CostOracle + ?Sized>(
        &mut self,
        oracle: &O,
        step: f64,
    ) -> std::result::Result<(), Overflow> {
        self.step_observed(oracle, step, &mut ())
    }

    /// One iteration. On overflow the state is left untouched.
    pub fn step_observed<O, S>(
        &mut self,
        oracle: &O,
        step: f64,
        observer: &mut S,
    ) -> std::result::Result<(), Overflow>
    where
        O: CostOracle + ?Sized,
        S: StepObserver + ?Sized,
    {
        let k = self.k;
        let alpha = damping(step, k, self.z.norm_sq());
        oracle.gradient(&self.x_curr, &mut self.grad);
        for i in 0..self.x_next.len() {
            self.x_next[i] = self.x_curr.0[i] + alpha * self.z.0[i] - step * self.grad[i];
        }
        if !all_finite(&self.x_next) {
            return Err(Overflow { k });
        }
        for i in 0..self.z_next.len() {
            self.z_next[i] = self.x_next[i] - self.x_curr.0[i];
        }
        observer.observe(&Transition {
            k,
            step,
            alpha,
            x_prev: &self.x_prev,
            x_k: &self.x_curr,
            z_k: &self.z,
            grad_k: &self.grad,
            x_next: &self.x_next,
            z_next: &self.z_next,
        });
        std::mem::swap(&mut self.x_prev.0, &mut self.x_curr.0);
        std::mem::swap(&mut self.x_curr.0, &mut self.x_next);
        std::mem::swap(&mut self.z.0, &mut self.z_next);
        self.alpha = Some(alpha);
        self.k = k + 1;
        Ok(())
    }
}

/// One stored iteration of a run.
///
/// Record `k` describes state `k` (`x_k`, `|z_k|`, `k |z_k|^3`) and the
/// damping `alpha_k` of its outgoing step. `delta` is the distance
/// relaxation term of that step; it is absent for the final state and
/// whenever the minimiser is unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub k: usize,
    pub x: Vec<f64>,
    pub f: f64,
    pub z_norm: f64,
    pub alpha: f64,
    pub momentum_stat: f64,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterTrace {
    pub dim: usize,
    /// Every `stride`-th iteration is stored (plus the final state).
    pub stride: usize,
    pub records: Vec<IterRecord>,
}

impl IterTrace {
    pub fn new(dim: usize, stride: usize) -> Self {
        IterTrace {
            dim,
            stride: stride.max(1),
            records: Vec::new(),
        }
    }

    pub fn stride_for(max_iters: usize) -> usize {
        max_iters.div_ceil(TRACE_RECORD_LIMIT).max(1)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, k: usize) -> Option<&IterRecord> {
        self.records
            .binary_search_by_key(&k, |r| r.k)
            .ok()
            .map(|i| &self.records[i])
    }

    pub fn last(&self) -> Option<&IterRecord> {
        self.records.last()
    }

    pub fn header(&self) -> String {
        let mut cols = vec!["k".to_string()];
        cols.extend(indexed("x_", self.dim));
        cols.extend(["f", "z_norm", "alpha", "momentum_stat", "delta"].map(String::from));
        cols.join(",")
    }

    /// CSV with header `k,x_0..x_{d-1},f,z_norm,alpha,momentum_stat,delta`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", self.header())?;
        for r in &self.records {
            let mut line = r.k.to_string();
            for x in &r.x {
                line.push(',');
                line.push_str(&sci(*x));
            }
            for v in [r.f, r.z_norm, r.alpha, r.momentum_stat] {
                line.push(',');
                line.push_str(&sci(v));
            }
            line.push(',');
            line.push_str(&sci_opt(r.delta));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// All `max_iters` iterations were performed.
    Completed,
    /// The momentum criterion `|z_k| <= eps` fired.
    StoppedEarly,
    Overflow {
        k: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    /// Run exactly `max_iters` iterations.
    Naive,
    /// Stop as soon as `|z_k| <= stop_eps`.
    Momentum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub x_final: Point,
    pub trace: IterTrace,
    pub status: RunStatus,
    /// Counter of the final state.
    pub final_k: usize,
}

impl RunOutput {
    pub fn stopped_early(&self) -> bool {
        self.status == RunStatus::StoppedEarly
    }

    pub fn overflowed(&self) -> bool {
        matches!(self.status, RunStatus::Overflow { .. })
    }
}

pub fn run_naive<O: CostOracle + ?Sized>(
    oracle: &O,
    x0: &Point,
    params: &WhiplashParams,
) -> Result<RunOutput> {
    run(oracle, x0, params, StopRule::Naive, &mut ())
}

pub fn run_momentum_stop<O: CostOracle + ?Sized>(
    oracle: &O,
    x0: &Point,
    params: &WhiplashParams,
) -> Result<RunOutput> {
    if params.stop_eps <= 0.0 {
        return Err(Error::invalid(
            "stop_eps",
            "momentum stopping needs eps > 0",
        ));
    }
    run(oracle, x0, params, StopRule::Momentum, &mut ())
}

/// Generic driver behind [`run_naive`] and [`run_momentum_stop`].
pub fn run<O, S>(
    oracle: &O,
    x0: &Point,
    params: &WhiplashParams,
    rule: StopRule,
    observer: &mut S,
) -> Result<RunOutput>
where
    O: CostOracle + ?Sized,
    S: StepObserver + ?Sized,
{
    params.validate(oracle)?;
    let s = params.step;
    let mut state = init_step(oracle, x0, s)?;
    let optimum = oracle.optimum();
    let mut trace = IterTrace::new(oracle.dim(), IterTrace::stride_for(params.max_iters));
    let stride = trace.stride;

    let mut status = RunStatus::Completed;
    while state.k <= params.max_iters {
        if rule == StopRule::Momentum && state.z.norm() <= params.stop_eps {
            status = RunStatus::StoppedEarly;
            break;
        }
        let k = state.k;
        let keep = (k - 1) % stride == 0;
        let mut pending: Option<IterRecord> = None;
        let mut rec = |t: &Transition<'_>| {
            if keep {
                let zn = norm(t.z_k);
                pending = Some(IterRecord {
                    k: t.k,
                    x: t.x_k.to_vec(),
                    f: oracle.value(t.x_k),
                    z_norm: zn,
                    alpha: t.alpha,
                    momentum_stat: t.k as f64 * zn * zn * zn,
                    delta: optimum.as_ref().map(|xs| transition_delta(t, xs)),
                });
            }
            observer.observe(t);
        };
        match state.step_observed(oracle, s, &mut rec) {
            Ok(()) => {
                if let Some(r) = pending {
                    trace.records.push(r);
                }
            }
            Err(Overflow { k }) => {
                status = RunStatus::Overflow { k };
                break;
            }
        }
    }

    let zn = state.z.norm();
    trace.records.push(IterRecord {
        k: state.k,
        x: state.x_curr.0.clone(),
        f: oracle.value(&state.x_curr),
        z_norm: zn,
        alpha: state.pending_alpha(s),
        momentum_stat: state.k as f64 * zn * zn * zn,
        delta: None,
    });
    Ok(RunOutput {
        x_final: state.x_curr.clone(),
        final_k: state.k,
        trace,
        status,
    })
}

// ---------------------------------------------------------------------------
// Relaxation diagnostics
// ---------------------------------------------------------------------------

/// Rounding allowance for the on-line inequality checks. The momentum lower
/// bound is attained with equality whenever `z_k` and `x_k` are collinear.
#[inline]
fn slack(a: f64, b: f64) -> f64 {
    1e-12 * (a.abs() + b.abs()) + 1e-300
}

/// `Delta_k = 3 alpha_k^2 |z_k|^2 + 2 alpha_k |x_{k+1} - x*| |z_k|`.
#[inline]
pub fn relaxation_delta(alpha: f64, z_norm: f64, dist_next: f64) -> f64 {
    3.0 * alpha * alpha * z_norm * z_norm + 2.0 * alpha * dist_next * z_norm
}

pub fn transition_delta(t: &Transition<'_>, x_star: &[f64]) -> f64 {
    relaxation_delta(t.alpha, norm(t.z_k), distance(t.x_next, x_star))
}

/// `xi_i = (1 - lambda/L)^i (1 - 1/sqrt(L) - (k-i)/L |z_{k-i}|^2)^2 |z_{k-i}|^2`.
pub fn relaxation_xi(lipschitz: f64, pl: f64, i: usize, k: usize, z_norm_sq: f64) -> f64 {
    let q = 1.0 - pl / lipschitz;
    let j = k.saturating_sub(i) as f64;
    let a = 1.0 - 1.0 / lipschitz.sqrt() - j / lipschitz * z_norm_sq;
    q.powi(i as i32) * a * a * z_norm_sq
}

/// [`relaxation_xi`] with `|z_{k-i}|` read from a stored trace. `z_0` is
/// taken as zero.
pub fn relaxation_xi_from_trace<O: CostOracle + ?Sized>(
    trace: &IterTrace,
    oracle: &O,
    i: usize,
    k: usize,
) -> Result<f64> {
    let (l, pl) = match (oracle.lipschitz(), oracle.pl_constant()) {
        (Some(l), Some(pl)) => (l, pl),
        _ => return Err(Error::Unsupported("xi needs both L and the PL constant")),
    };
    if i == 0 || i > k {
        return Err(Error::invalid("i", format!("must lie in 1..={k}")));
    }
    let j = k - i;
    let zn = if j == 0 {
        0.0
    } else {
        trace
            .get(j)
            .ok_or(Error::Unsupported(
                "iteration not present in the stored trace",
            ))?
            .z_norm
    };
    Ok(relaxation_xi(l, pl, i, k, zn * zn))
}

/// Momentum envelope for `f = lambda/2 |x|^2`:
/// `| |alpha| |z_k| - lambda |x_k| | <= |z_{k+1}| <= |alpha| |z_k| + lambda |x_k| + sqrt(2 |alpha| lambda |x_k| |z_k|)`.
///
/// `lambda` is the coefficient multiplying `x_k` in the momentum update,
/// i.e. `s * curvature` for a run with step `s`. Comparisons carry a
/// `1e-12` rounding allowance relative to `|x_k|` and the compared terms,
/// since `z_{k+1}` is formed as a difference of iterates.
pub fn momentum_bounds_check(
    lambda: f64,
    x_k: &[f64],
    z_k: &[f64],
    alpha: f64,
    z_next: &[f64],
) -> bool {
    let (lo, hi, zn) = momentum_bounds(lambda, x_k, z_k, alpha, z_next);
    let scale = norm(x_k) + alpha.abs() * norm(z_k) + lambda * norm(x_k);
    lo <= zn + slack(lo + scale, zn) && zn <= hi + slack(hi + scale, zn)
}

fn momentum_bounds(
    lambda: f64,
    x_k: &[f64],
    z_k: &[f64],
    alpha: f64,
    z_next: &[f64],
) -> (f64, f64, f64) {
    let a = alpha.abs();
    let nz = norm(z_k);
    let nx = norm(x_k);
    let lo = (a * nz - lambda * nx).abs();
    let hi = a * nz + lambda * nx + (2.0 * a * lambda).sqrt() * nx.sqrt() * nz.sqrt();
    (lo, hi, norm(z_next))
}

/// `k |z_k|^3` from a stored trace.
pub fn momentum_rate_stat(trace: &IterTrace, k: usize) -> Result<f64> {
    trace
        .get(k)
        .map(|r| r.momentum_stat)
        .ok_or(Error::Unsupported(
            "iteration not present in the stored trace",
        ))
}

/// Counts violations of [`momentum_bounds_check`] along a run on a scaled
/// quadratic with curvature `curvature`.
#[derive(Debug, Clone, Default)]
pub struct MomentumBoundsMonitor {
    pub curvature: f64,
    pub checked: usize,
    pub violations: usize,
    pub first_violation: Option<usize>,
}

impl MomentumBoundsMonitor {
    pub fn new(curvature: f64) -> Self {
        MomentumBoundsMonitor {
            curvature,
            ..Default::default()
        }
    }
}

impl StepObserver for MomentumBoundsMonitor {
    fn observe(&mut self, t: &Transition<'_>) {
        self.checked += 1;
        if !momentum_bounds_check(t.step * self.curvature, t.x_k, t.z_k, t.alpha, t.z_next) {
            self.violations += 1;
            self.first_violation.get_or_insert(t.k);
        }
    }
}

/// Checks `|x_{k+1} - x*|^2 <= |x_k - x*|^2 + Delta_k` at every step and
/// tracks the partial sums of `Delta_k`.
#[derive(Debug, Clone)]
pub struct DistanceMonitor {
    x_star: Vec<f64>,
    pub checked: usize,
    pub violations: usize,
    pub first_violation: Option<usize>,
    pub delta_sum: f64,
    pub max_delta_sum: f64,
    pub abs_delta_sum: f64,
}

impl DistanceMonitor {
    pub fn new(x_star: &Point) -> Self {
        DistanceMonitor {
            x_star: x_star.as_slice().to_vec(),
            checked: 0,
            violations: 0,
            first_violation: None,
            delta_sum: 0.0,
            max_delta_sum: f64::NEG_INFINITY,
            abs_delta_sum: 0.0,
        }
    }
}

impl StepObserver for DistanceMonitor {
    fn observe(&mut self, t: &Transition<'_>) {
        let delta = transition_delta(t, &self.x_star);
        let before = distance(t.x_k, &self.x_star).powi(2);
        let after = distance(t.x_next, &self.x_star).powi(2);
        self.checked += 1;
        let rhs = before + delta;
        if after > rhs + slack(after, before) + slack(delta, 0.0) {
            self.violations += 1;
            self.first_violation.get_or_insert(t.k);
        }
        self.delta_sum += delta;
        self.abs_delta_sum += delta.abs();
        self.max_delta_sum = self.max_delta_sum.max(self.delta_sum);
    }
}

/// Checks the telescoped Polyak-Lojasiewicz bound
/// `|f(x_{k+1}) - f*| <= (1 - lambda/L)^k |f(x_0) - f*| + (L/2) sum_{i=1..k} |xi_i|`
/// at every step of a run with `s = 1/L`.
///
/// The sum is carried by the recurrence `S_k = q (S_{k-1} + a_{k-1})` with
/// `q = 1 - lambda/L` and `a_j = (1 - 1/sqrt(L) - j/L |z_j|^2)^2 |z_j|^2`,
/// `a_0 = 0`, which makes the check O(1) per step.
pub struct PlBoundMonitor<'a, O: CostOracle + ?Sized> {
    oracle: &'a O,
    lipschitz: f64,
    q: f64,
    f_star: f64,
    initial_gap: f64,
    sum: f64,
    prev_term: f64,
    pub checked: usize,
    pub violations: usize,
    pub first_violation: Option<usize>,
    /// Largest `|f(x_{k+1}) - f*| / bound` seen.
    pub worst_ratio: f64,
}

impl<'a, O: CostOracle + ?Sized> PlBoundMonitor<'a, O> {
    pub fn new(oracle: &'a O, x0: &Point) -> Result<Self> {
        let (l, pl, f_star) = match (
            oracle.lipschitz(),
            oracle.pl_constant(),
            oracle.optimum_value(),
        ) {
            (Some(l), Some(pl), Some(fs)) => (l, pl, fs),
            _ => {
                return Err(Error::Unsupported(
                    "PL bound needs L, the PL constant and f*",
                ))
            }
        };
        Ok(PlBoundMonitor {
            oracle,
            lipschitz: l,
            q: 1.0 - pl / l,
            f_star,
            initial_gap: (oracle.value(x0) - f_star).abs(),
            sum: 0.0,
            prev_term: 0.0,
            checked: 0,
            violations: 0,
            first_violation: None,
            worst_ratio: 0.0,
        })
    }
}

impl<O: CostOracle + ?Sized> StepObserver for PlBoundMonitor<'_, O> {
    fn observe(&mut self, t: &Transition<'_>) {
        let l = self.lipschitz;
        self.sum = self.q * (self.sum + self.prev_term);
        let zsq = dot(t.z_k, t.z_k);
        let a = 1.0 - 1.0 / l.sqrt() - (t.k as f64) / l * zsq;
        self.prev_term = a * a * zsq;

        let gap = (self.oracle.value(t.x_next) - self.f_star).abs();
        let bound =
            self.q.powi(t.k.min(i32::MAX as usize) as i32) * self.initial_gap + 0.5 * l * self.sum;
        self.checked += 1;
        if gap > bound + slack(gap, bound) {
            self.violations += 1;
            self.first_violation.get_or_insert(t.k);
        }
        if bound > 0.0 {
            self.worst_ratio = self.worst_ratio.max(gap / bound);
        }
    }
}
