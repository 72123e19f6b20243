//! Envelope convergence: certify a rate by checking that a trajectory,
//! scaled by a converger `P(t)`, stays bounded.
//!
//! A scan increases the strength `eta` of `P` on a coarse grid until the
//! scaled signal stops being bounded, then refines the bracketing interval.
//! The largest refined strength still judged bounded is the certified rate.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use crate::continuous::{
    check_nonincreasing, simulate, ContinuousTrace, DampingLaw, MonotoneCheck, OdeParams,
};
use crate::error::{Error, Result};
use crate::format::sci;
use crate::oracle::CostOracle;
use crate::parallel::{chunk_width, Execution};
use crate::point::{distance, dot, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// `P(t) = t^eta`
    Polynomial,
    /// `P(t) = e^(eta t)`
    Exponential,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Polynomial => "poly",
            Family::Exponential => "exp",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poly" | "polynomial" => Ok(Family::Polynomial),
            "exp" | "exponential" => Ok(Family::Exponential),
            other => Err(Error::invalid(
                "family",
                format!("unknown family `{other}` (expected exp or poly)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Converger {
    pub family: Family,
    pub eta: f64,
}

impl Converger {
    pub fn new(family: Family, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::invalid("eta", "must be positive and finite"));
        }
        Ok(Converger { family, eta })
    }

    pub fn p(&self, t: f64) -> f64 {
        match self.family {
            Family::Polynomial => t.powf(self.eta),
            Family::Exponential => (self.eta * t).exp(),
        }
    }

    pub fn p_dot(&self, t: f64) -> f64 {
        match self.family {
            Family::Polynomial => self.eta * t.powf(self.eta - 1.0),
            Family::Exponential => self.eta * (self.eta * t).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DivergenceThreshold {
    /// `factor * (1 + signal(0))`
    Relative(f64),
    Absolute(f64),
}

impl DivergenceThreshold {
    pub fn resolve(self, first_sample: f64) -> f64 {
        match self {
            DivergenceThreshold::Relative(k) => k * (1.0 + first_sample.abs()),
            DivergenceThreshold::Absolute(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSchedule {
    pub family: Family,
    pub start_eta: f64,
    pub coarse_step: f64,
    pub fine_step: f64,
    pub horizon: f64,
    pub threshold: DivergenceThreshold,
    /// Largest coarse strength tried before giving up on finding a transition.
    pub max_eta: f64,
}

impl ScanSchedule {
    pub fn exponential() -> Self {
        ScanSchedule {
            family: Family::Exponential,
            start_eta: 0.1,
            coarse_step: 0.05,
            fine_step: 0.001,
            horizon: 50.0,
            threshold: DivergenceThreshold::Relative(1e6),
            max_eta: 5.0,
        }
    }

    pub fn polynomial() -> Self {
        ScanSchedule {
            family: Family::Polynomial,
            start_eta: 0.5,
            coarse_step: 0.1,
            fine_step: 0.01,
            horizon: 50.0,
            threshold: DivergenceThreshold::Relative(1e6),
            max_eta: 10.0,
        }
    }

    pub fn for_family(family: Family) -> Self {
        match family {
            Family::Polynomial => Self::polynomial(),
            Family::Exponential => Self::exponential(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, "must be positive and finite"))
            }
        };
        positive("start_eta", self.start_eta)?;
        positive("coarse_step", self.coarse_step)?;
        positive("fine_step", self.fine_step)?;
        positive("horizon", self.horizon)?;
        if self.fine_step > self.coarse_step {
            return Err(Error::invalid("fine_step", "must not exceed coarse_step"));
        }
        if !(self.max_eta >= self.start_eta && self.max_eta.is_finite()) {
            return Err(Error::invalid(
                "max_eta",
                "must be finite and at least start_eta",
            ));
        }
        match self.threshold {
            DivergenceThreshold::Relative(v) | DivergenceThreshold::Absolute(v) => {
                positive("threshold", v)
            }
        }
    }

    /// Coarse strengths `start + i * coarse` up to `max_eta`.
    pub fn coarse_grid(&self) -> Vec<f64> {
        let n = ((self.max_eta - self.start_eta) / self.coarse_step + 1e-9).floor() as usize;
        (0..=n)
            .map(|i| self.start_eta + i as f64 * self.coarse_step)
            .collect()
    }

    /// Fine strengths strictly between `lo` and `hi`.
    pub fn fine_grid(&self, lo: f64, hi: f64) -> Vec<f64> {
        let n = ((hi - lo) / self.fine_step).round() as usize;
        (1..n).map(|j| lo + j as f64 * self.fine_step).collect()
    }
}

/// A sampled real-valued time series.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Series {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
}

impl Series {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stable,
    Marginal,
    Divergent,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::Marginal => "marginal",
            Verdict::Divergent => "divergent",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateVerdict {
    pub verdict: Verdict,
    pub peak_scaled: f64,
    pub eta_tested: f64,
}

/// `|P(t)(x(t) - x*)|` at every stored sample.
pub fn scaled_signal(trace: &ContinuousTrace, conv: &Converger, x_star: &Point) -> Series {
    let mut out = Series {
        t: Vec::with_capacity(trace.samples.len()),
        y: Vec::with_capacity(trace.samples.len()),
    };
    for s in &trace.samples {
        out.t.push(s.t);
        out.y.push(conv.p(s.t) * distance(&s.x, x_star));
    }
    out
}

/// Half-interval rule: divergent past the threshold, stable when the late
/// supremum does not exceed the early one, marginal otherwise.
pub fn classify(signal: &Series, schedule: &ScanSchedule) -> Verdict {
    let first = signal.y.first().copied().unwrap_or(0.0);
    classify_with_threshold(signal, schedule.threshold.resolve(first))
}

pub fn classify_with_threshold(signal: &Series, threshold: f64) -> Verdict {
    if signal.y.iter().any(|v| !v.is_finite() || *v >= threshold) {
        return Verdict::Divergent;
    }
    let Some(&t_end) = signal.t.last() else {
        return Verdict::Stable;
    };
    let t_start = signal.t[0];
    let mid = 0.5 * (t_start + t_end);
    let mut early = f64::NEG_INFINITY;
    let mut late = f64::NEG_INFINITY;
    for (&t, &y) in signal.t.iter().zip(&signal.y) {
        if t <= mid {
            early = early.max(y);
        }
        if t >= mid {
            late = late.max(y);
        }
    }
    if late <= early {
        Verdict::Stable
    } else {
        Verdict::Marginal
    }
}

pub fn rate_verdict(signal: &Series, schedule: &ScanSchedule, eta: f64) -> RateVerdict {
    RateVerdict {
        verdict: classify(signal, schedule),
        peak_scaled: signal.y.iter().copied().fold(0.0, |m: f64, v| {
            if v.is_nan() {
                f64::NAN
            } else {
                m.max(v)
            }
        }),
        eta_tested: eta,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanEnd {
    /// A stable-to-unstable transition was bracketed and refined.
    Transition,
    /// Already unstable at the first strength.
    BelowStart,
    /// Stable on the whole coarse grid.
    ReachedLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    pub family: Family,
    pub h: f64,
    pub end: ScanEnd,
    /// Certified strength; `None` when unstable already at the start.
    pub eta_star: Option<f64>,
    pub coarse: Vec<RateVerdict>,
    pub fine: Vec<RateVerdict>,
}

impl ScanReport {
    pub fn verdicts(&self) -> impl Iterator<Item = &RateVerdict> {
        self.coarse.iter().chain(&self.fine)
    }

    /// First coarse strength that was not stable.
    pub fn coarse_transition(&self) -> Option<f64> {
        self.coarse
            .iter()
            .find(|v| v.verdict != Verdict::Stable)
            .map(|v| v.eta_tested)
    }

    /// CSV with header `family,eta,verdict,peak_scaled`, coarse rows then fine rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "family,eta,verdict,peak_scaled")?;
        for v in self.verdicts() {
            writeln!(
                w,
                "{},{},{},{}",
                self.family,
                sci(v.eta_tested),
                v.verdict,
                sci(v.peak_scaled)
            )?;
        }
        Ok(())
    }
}

/// Coarse-to-fine scan over converger strengths.
///
/// The trajectory does not depend on `eta`, so it is simulated once and
/// only the classification runs per strength. The coarse grid is evaluated
/// in chunks sized to the worker pool and truncated at the first unstable
/// verdict, so the report is identical for every execution mode.
pub fn scan_rate<O: CostOracle + ?Sized>(
    oracle: &O,
    law: &DampingLaw,
    params: &OdeParams,
    schedule: &ScanSchedule,
    exec: Execution,
) -> Result<ScanReport> {
    schedule.validate()?;
    let x_star = oracle
        .optimum()
        .ok_or(Error::Unsupported("rate scan needs a known minimizer"))?;
    let mut params = params.clone();
    params.horizon = schedule.horizon;
    let trace = simulate(oracle, law, &params)?;
    scan_trace(&trace, &x_star, schedule, exec)
}

/// [`scan_rate`] on an existing trajectory.
pub fn scan_trace(
    trace: &ContinuousTrace,
    x_star: &Point,
    schedule: &ScanSchedule,
    exec: Execution,
) -> Result<ScanReport> {
    schedule.validate()?;
    let judge = |eta: &f64| {
        let conv = Converger {
            family: schedule.family,
            eta: *eta,
        };
        rate_verdict(&scaled_signal(trace, &conv, x_star), schedule, *eta)
    };

    let grid = schedule.coarse_grid();
    let width = chunk_width(exec).max(1);
    let mut coarse = Vec::new();
    let mut broke = false;
    for chunk in grid.chunks(width) {
        for v in exec.map(chunk, judge) {
            let stop = v.verdict != Verdict::Stable;
            coarse.push(v);
            if stop {
                broke = true;
                break;
            }
        }
        if broke {
            break;
        }
    }

    let report = |end, eta_star, coarse, fine| ScanReport {
        family: schedule.family,
        h: trace.h,
        end,
        eta_star,
        coarse,
        fine,
    };

    if !broke {
        let top = coarse.last().map(|v: &RateVerdict| v.eta_tested);
        return Ok(report(ScanEnd::ReachedLimit, top, coarse, Vec::new()));
    }
    if coarse.len() == 1 {
        return Ok(report(ScanEnd::BelowStart, None, coarse, Vec::new()));
    }
    let lo = coarse[coarse.len() - 2].eta_tested;
    let hi = coarse[coarse.len() - 1].eta_tested;
    let fine = exec.map(&schedule.fine_grid(lo, hi), judge);
    let eta_star = fine
        .iter()
        .filter(|v| v.verdict == Verdict::Stable)
        .map(|v| v.eta_tested)
        .fold(lo, f64::max);
    Ok(report(ScanEnd::Transition, Some(eta_star), coarse, fine))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorReport {
    pub t: Vec<f64>,
    pub integral: Vec<f64>,
    pub inf_integral: f64,
    pub required_c: f64,
    pub energy: Vec<f64>,
    pub monotone_ok: bool,
}

impl AnchorReport {
    /// CSV with header `t,I_t,E_t`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,I_t,E_t")?;
        for ((t, i), e) in self.t.iter().zip(&self.integral).zip(&self.energy) {
            writeln!(w, "{},{},{}", sci(*t), sci(*i), sci(*e))?;
        }
        Ok(())
    }

    pub fn min_energy(&self) -> f64 {
        self.energy.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Cumulative trapezoid integral of
/// `alpha P <v, x - x*> - P <grad f, v> - (P'/2) |x - x* + v|^2`
/// together with the anchored energy
/// `E = P (f - f*) + (P/2) |x - x* + v|^2 + I + c`, `c = max(0, -inf I)`.
///
/// `alpha` is sampled alongside the trace (for the whiplash law, `gamma - 1`).
pub fn integral_anchor<O: CostOracle + ?Sized>(
    trace: &ContinuousTrace,
    conv: &Converger,
    alpha: &[f64],
    oracle: &O,
    x_star: &Point,
) -> Result<AnchorReport> {
    if alpha.len() != trace.samples.len() {
        return Err(Error::DimensionMismatch {
            expected: trace.samples.len(),
            got: alpha.len(),
        });
    }
    if x_star.dim() != trace.dim {
        return Err(Error::DimensionMismatch {
            expected: trace.dim,
            got: x_star.dim(),
        });
    }
    if conv.family == Family::Polynomial && conv.eta < 1.0 {
        return Err(Error::Unsupported(
            "polynomial anchor needs eta >= 1 (P' is unbounded at t = 0)",
        ));
    }
    let f_star = oracle.value(x_star);
    let n = trace.samples.len();
    let mut g = vec![0.0; trace.dim];
    let mut e = vec![0.0; trace.dim];
    let mut integrand = Vec::with_capacity(n);
    let mut stored = Vec::with_capacity(n);
    for (s, &a) in trace.samples.iter().zip(alpha) {
        oracle.gradient(&s.x, &mut g);
        for j in 0..trace.dim {
            e[j] = s.x[j] - x_star[j];
        }
        let p = conv.p(s.t);
        let mixed_sq: f64 = e.iter().zip(&s.v).map(|(a, b)| (a + b) * (a + b)).sum();
        integrand
            .push(a * p * dot(&s.v, &e) - p * dot(&g, &s.v) - 0.5 * conv.p_dot(s.t) * mixed_sq);
        stored.push(p * (oracle.value(&s.x) - f_star) + 0.5 * p * mixed_sq);
    }

    let t = trace.times();
    let mut integral = Vec::with_capacity(n);
    let mut acc = 0.0;
    for i in 0..n {
        if i > 0 {
            acc += 0.5 * (t[i] - t[i - 1]) * (integrand[i] + integrand[i - 1]);
        }
        integral.push(acc);
    }
    let inf_integral = integral.iter().copied().fold(f64::INFINITY, f64::min);
    let required_c = (-inf_integral).max(0.0);
    let energy: Vec<f64> = stored
        .iter()
        .zip(&integral)
        .map(|(s, i)| s + i + required_c)
        .collect();
    let monotone_ok = energy_monotone(&t, &energy).ok;
    Ok(AnchorReport {
        t,
        integral,
        inf_integral,
        required_c,
        energy,
        monotone_ok,
    })
}

fn energy_monotone(t: &[f64], energy: &[f64]) -> MonotoneCheck {
    let mut rate: f64 = 0.0;
    for i in 1..t.len().min(energy.len()) {
        let dt = t[i] - t[i - 1];
        if dt > 0.0 {
            rate = rate.max(((energy[i] - energy[i - 1]) / dt).abs());
        }
    }
    check_nonincreasing(t, energy, 10.0 * rate.max(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyCheck {
    /// Nonincreasing up to `C dt^2` with `C = 10 max(1, max |dE/dt|)`.
    pub monotone: MonotoneCheck,
    pub min_energy: f64,
}

impl EnergyCheck {
    pub fn nonnegative(&self) -> bool {
        self.min_energy >= 0.0
    }

    pub fn ok(&self) -> bool {
        self.monotone.ok && self.nonnegative()
    }
}

pub fn energy_check(anchor: &AnchorReport) -> EnergyCheck {
    EnergyCheck {
        monotone: energy_monotone(&anchor.t, &anchor.energy),
        min_energy: anchor.min_energy(),
    }
}

/// `theta > eta / 2`, strict.
pub fn critical_condition(eta: f64, theta: f64) -> bool {
    theta > eta / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuous::Sample;
    use crate::oracle::Benchmark;

    fn p(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    fn series(t: Vec<f64>, f: impl Fn(f64) -> f64) -> Series {
        let y = t.iter().map(|&t| f(t)).collect();
        Series { t, y }
    }

    fn grid(t_end: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|i| t_end * i as f64 / n as f64).collect()
    }

    fn trace_of(samples: Vec<(f64, Vec<f64>, Vec<f64>)>) -> ContinuousTrace {
        let dim = samples[0].1.len();
        ContinuousTrace {
            dim,
            h: samples.get(1).map(|s| s.0 - samples[0].0).unwrap_or(1.0),
            stride: 1,
            samples: samples
                .into_iter()
                .map(|(t, x, v)| Sample {
                    t,
                    x,
                    v,
                    gamma: 1.0,
                    w: None,
                })
                .collect(),
            diverged_at: None,
        }
    }

    #[test]
    fn converger_values() {
        let c = Converger::new(Family::Polynomial, 2.0).unwrap();
        assert_eq!(c.p(3.0), 9.0);
        assert_eq!(c.p_dot(3.0), 6.0);
        let e = Converger::new(Family::Exponential, 0.5).unwrap();
        assert_eq!(e.p(0.0), 1.0);
        assert_eq!(e.p_dot(0.0), 0.5);
        assert!(Converger::new(Family::Exponential, 0.0).is_err());
    }

    #[test]
    fn scaled_signal_examples() {
        let tr = trace_of(vec![(3.0, vec![0.5], vec![0.0])]);
        let c = Converger::new(Family::Polynomial, 2.0).unwrap();
        assert_eq!(scaled_signal(&tr, &c, &p(&[0.0])).y, vec![4.5]);

        let tr = trace_of(vec![(0.0, vec![3.0, 4.0], vec![0.0, 0.0])]);
        let e = Converger::new(Family::Exponential, 0.5).unwrap();
        assert_eq!(scaled_signal(&tr, &e, &p(&[0.0, 0.0])).y, vec![5.0]);

        let tr = trace_of(vec![
            (0.0, vec![1.0], vec![0.0]),
            (1.0, vec![1.0], vec![0.0]),
        ]);
        assert_eq!(scaled_signal(&tr, &e, &p(&[1.0])).y, vec![0.0, 0.0]);
    }

    #[test]
    fn classify_examples() {
        let t = grid(50.0, 5000);
        let sched = ScanSchedule::exponential();
        assert_eq!(
            classify(&series(t.clone(), |_| 1.0), &sched),
            Verdict::Stable
        );
        assert_eq!(
            classify(&series(t.clone(), |_| 0.0), &sched),
            Verdict::Stable
        );
        let growing = series(t, |t| (0.1 * t).exp());
        assert_eq!(classify_with_threshold(&growing, 1e6), Verdict::Marginal);
        assert_eq!(classify_with_threshold(&growing, 100.0), Verdict::Divergent);
        let nan = Series {
            t: vec![0.0, 1.0],
            y: vec![0.0, f64::NAN],
        };
        assert_eq!(classify_with_threshold(&nan, 1e6), Verdict::Divergent);
    }

    #[test]
    fn default_threshold_is_relative() {
        assert_eq!(DivergenceThreshold::Relative(1e6).resolve(1.0), 2e6);
        assert_eq!(DivergenceThreshold::Absolute(5.0).resolve(1.0), 5.0);
    }

    #[test]
    fn classify_ignores_positive_scaling() {
        let t = grid(10.0, 100);
        for f in [|t: f64| (-t).exp(), |t: f64| 1.0 + (t * 0.3).sin()] {
            let s = series(t.clone(), f);
            let base = classify_with_threshold(&s, 1e6);
            for k in [1e-3, 0.5, 7.0, 1e4] {
                let scaled = Series {
                    t: s.t.clone(),
                    y: s.y.iter().map(|v| v * k).collect(),
                };
                assert_eq!(classify_with_threshold(&scaled, 1e6), base);
            }
        }
    }

    #[test]
    fn grids() {
        let s = ScanSchedule::exponential();
        let g = s.coarse_grid();
        assert_eq!(g.len(), 99);
        assert!((g[98] - 5.0).abs() < 1e-12);
        let f = s.fine_grid(0.5, 0.55);
        assert_eq!(f.len(), 49);
        assert!((f[0] - 0.501).abs() < 1e-12);
    }

    #[test]
    fn degenerate_start_reaches_limit() {
        let q = Benchmark::scaled_quadratic(1.0, 1).unwrap();
        let mut sched = ScanSchedule::exponential();
        sched.horizon = 2.0;
        let params = OdeParams::new(p(&[0.0]), 2.0);
        let rep = scan_rate(
            &q,
            &DampingLaw::Whiplash,
            &params,
            &sched,
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(rep.end, ScanEnd::ReachedLimit);
        assert_eq!(rep.eta_star, rep.coarse.last().map(|v| v.eta_tested));
        assert!((rep.eta_star.unwrap() - 5.0).abs() < 1e-12);
        assert!(rep.verdicts().all(|v| v.verdict == Verdict::Stable));
    }

    #[test]
    fn unstable_from_start() {
        let q = Benchmark::scaled_quadratic(1.0, 1).unwrap();
        let mut sched = ScanSchedule::exponential();
        sched.start_eta = 3.0;
        let params = OdeParams::new(p(&[1.0]), 50.0);
        let rep = scan_rate(
            &q,
            &DampingLaw::Whiplash,
            &params,
            &sched,
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(rep.end, ScanEnd::BelowStart);
        assert_eq!(rep.eta_star, None);
        assert_eq!(rep.coarse.len(), 1);
    }

    #[test]
    fn critical_examples() {
        assert!(!critical_condition(0.495, 0.2475));
        assert!(critical_condition(2.0, 1.5));
        assert!(!critical_condition(2.0, 1.0));
    }

    #[test]
    fn anchor_at_equilibrium() {
        let q = Benchmark::scaled_quadratic(1.0, 1).unwrap();
        let tr = trace_of(
            (0..100)
                .map(|i| (i as f64 * 0.01, vec![0.0], vec![0.0]))
                .collect(),
        );
        let c = Converger::new(Family::Polynomial, 2.0).unwrap();
        let rep = integral_anchor(&tr, &c, &vec![0.0; 100], &q, &p(&[0.0])).unwrap();
        assert!(rep.integral.iter().all(|&i| i == 0.0));
        assert_eq!(rep.required_c, 0.0);
        let chk = energy_check(&rep);
        assert!(chk.ok());
        assert!(rep.energy.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn trapezoid_single_interval() {
        // f = x^2/2, x = 0, v = 1 held fixed, P = e^{eta t}:
        // integrand = -(P'/2) |v|^2 = -(eta/2) e^{eta t}, endpoint average over [0, h]
        let q = Benchmark::scaled_quadratic(1.0, 1).unwrap();
        let h = 0.001;
        let tr = trace_of(vec![(0.0, vec![0.0], vec![1.0]), (h, vec![0.0], vec![1.0])]);
        let c = Converger::new(Family::Exponential, 0.2).unwrap();
        let rep = integral_anchor(&tr, &c, &[0.0, 0.0], &q, &p(&[0.0])).unwrap();
        let g0 = -0.1;
        let g1 = -0.1 * (0.2 * h).exp();
        assert!((rep.integral[1] - 0.5 * h * (g0 + g1)).abs() < 1e-18);
        assert_eq!(rep.required_c, -rep.integral[1]);
    }

    #[test]
    fn corrupted_trace_fails_energy_check() {
        let q = Benchmark::scaled_quadratic(1.0, 1).unwrap();
        let tr = trace_of(
            (0..200)
                .map(|i| {
                    let x = if i == 120 { 5.0 } else { 0.0 };
                    (1.0 + i as f64 * 0.001, vec![x], vec![0.0])
                })
                .collect(),
        );
        let c = Converger::new(Family::Polynomial, 2.0).unwrap();
        let rep = integral_anchor(&tr, &c, &vec![0.0; 200], &q, &p(&[0.0])).unwrap();
        let chk = energy_check(&rep);
        assert!(!chk.monotone.ok);
        assert!(chk.monotone.max_violation > 0.0);
        assert!(!rep.monotone_ok);
    }

    #[test]
    fn anchor_nonnegative_on_reference_run() {
        let q = Benchmark::scaled_quadratic(1.0, 1).unwrap();
        let tr = simulate(&q, &DampingLaw::Whiplash, &OdeParams::new(p(&[1.0]), 50.0)).unwrap();
        let c = Converger::new(Family::Polynomial, 2.0).unwrap();
        let rep = integral_anchor(&tr, &c, &tr.alpha_series(), &q, &p(&[0.0])).unwrap();
        assert!(rep.inf_integral.is_finite());
        assert!(rep.required_c.is_finite());
        assert!(rep.min_energy() >= 0.0);
    }

    #[test]
    fn family_parse() {
        assert_eq!("exp".parse::<Family>().unwrap(), Family::Exponential);
        assert_eq!("poly".parse::<Family>().unwrap(), Family::Polynomial);
        assert!("cubic".parse::<Family>().is_err());
    }
}
