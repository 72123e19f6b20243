//! Whiplash exploration: momentum-stopped batches with deterministic restarts.
//!
//! Each batch runs the discrete scheme from a batch origin `x_i` while
//! tracking the largest distance `R` reached from it. A batch ends when
//!
//! - the momentum converges (`|z| <= eps`) after exploring at least
//!   `explore_factor * R_ref`: the run finishes;
//! - the momentum converges inside that radius: the point is kept as a
//!   stationary candidate and the search restarts;
//! - the batch exceeds `batch_cap` iterations or the iterate overflows: the
//!   search restarts.
//!
//! Restarts move the batch origin by `2R` along the unit direction `u`
//! (scaled by the projection of the final gradient on `u`), then update `u`
//! deterministically. After `restarts` restarts the run gives up.

use std::io::{self, Write};

use crate::discrete::{init_step, validate_step};
use crate::error::{Error, Result};
use crate::format::{indexed, sci};
use crate::oracle::CostOracle;
use crate::point::{distance, Point};

#[derive(Debug, Clone, PartialEq)]
pub struct ExploreParams {
    pub x_init: Point,
    pub step: f64,
    /// Exploration factor `lambda > 1`.
    pub explore_factor: f64,
    /// Maximum iterations per batch `N`.
    pub batch_cap: usize,
    /// Number of restarts `r`.
    pub restarts: usize,
    pub stop_eps: f64,
}

impl ExploreParams {
    /// `s = 1e-4`, `lambda = 2`, `N = 100000`, `r = 20`, `eps = 1e-6`.
    pub fn with_defaults(x_init: Point) -> Self {
        ExploreParams {
            x_init,
            step: 1e-4,
            explore_factor: 2.0,
            batch_cap: 100_000,
            restarts: 20,
            stop_eps: 1e-6,
        }
    }

    pub fn validate<O: CostOracle + ?Sized>(&self, oracle: &O) -> Result<()> {
        if self.x_init.dim() != oracle.dim() {
            return Err(Error::DimensionMismatch {
                expected: oracle.dim(),
                got: self.x_init.dim(),
            });
        }
        validate_step(self.step, oracle)?;
        if !(self.explore_factor > 1.0 && self.explore_factor.is_finite()) {
            return Err(Error::invalid(
                "explore_factor",
                "must be a finite real greater than 1",
            ));
        }
        if self.batch_cap == 0 {
            return Err(Error::invalid("batch_cap", "must be at least 1"));
        }
        if !(self.stop_eps >= 0.0 && self.stop_eps.is_finite()) {
            return Err(Error::invalid("stop_eps", "must be a nonnegative real"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchEnd {
    IterationCap,
    NonFinite,
    /// Momentum converged inside the exploration radius.
    Candidate,
    Finished,
}

impl BatchEnd {
    pub fn as_str(self) -> &'static str {
        match self {
            BatchEnd::IterationCap => "iteration-cap",
            BatchEnd::NonFinite => "non-finite",
            BatchEnd::Candidate => "candidate",
            BatchEnd::Finished => "finished",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchRecord {
    pub batch: usize,
    pub end: BatchEnd,
    pub iters: usize,
    /// Largest distance from the batch origin.
    pub radius: f64,
    pub origin: Point,
    pub candidate: Option<(Point, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExploreStatus {
    Found { point: Point, value: f64 },
    FailNoMinimum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExploreOutcome {
    pub status: ExploreStatus,
    /// Stationary candidates with their costs, in discovery order.
    pub candidates: Vec<(Point, f64)>,
    pub restarts_used: usize,
    pub reference_radius: f64,
    pub batches: Vec<BatchRecord>,
}

impl ExploreOutcome {
    pub fn is_found(&self) -> bool {
        matches!(self.status, ExploreStatus::Found { .. })
    }

    pub fn total_iters(&self) -> usize {
        self.batches.iter().map(|b| b.iters).sum()
    }

    /// One row per batch, `batch,restart_reason,iters,R,candidate_x..,candidate_f`,
    /// then a `summary` row carrying status, total iterations, restarts used
    /// and the returned point.
    pub fn write_csv<W: Write>(&self, mut w: W, dim: usize) -> io::Result<()> {
        let mut header = vec![
            "batch".to_string(),
            "restart_reason".into(),
            "iters".into(),
            "R".into(),
        ];
        header.extend(indexed("candidate_x", dim));
        header.push("candidate_f".into());
        writeln!(w, "{}", header.join(","))?;

        let point_cols = |p: Option<(&Point, f64)>| -> String {
            match p {
                Some((x, f)) => x
                    .iter()
                    .map(|v| sci(*v))
                    .chain([sci(f)])
                    .collect::<Vec<_>>()
                    .join(","),
                None => vec![""; dim + 1].join(","),
            }
        };
        for b in &self.batches {
            writeln!(
                w,
                "{},{},{},{},{}",
                b.batch,
                b.end.as_str(),
                b.iters,
                sci(b.radius),
                point_cols(b.candidate.as_ref().map(|(x, f)| (x, *f)))
            )?;
        }
        let (status, found) = match &self.status {
            ExploreStatus::Found { point, value } => ("found", Some((point, *value))),
            ExploreStatus::FailNoMinimum => ("fail-no-minimum", None),
        };
        writeln!(
            w,
            "summary,{},{},{},{}",
            status,
            self.total_iters(),
            self.restarts_used,
            point_cols(found)
        )
    }
}

/// `x_init + 2R (<grad_t, u> / |grad_t|) u/|u|`; falls back to `x_init + 2R u/|u|`
/// when the gradient vanishes or is not finite.
pub fn restart_point(x_init: &Point, radius: f64, grad_t: &Point, u: &Point) -> Point {
    let un = u.norm();
    let gn = grad_t.norm();
    let scale = if gn > 0.0 && gn.is_finite() {
        2.0 * radius * grad_t.dot(u) / gn
    } else {
        2.0 * radius
    };
    x_init.axpy(scale / un, u)
}

/// `(u + c 1) / |u + c 1|` with `c = |d / (1 - d)|^d`, using `0^0 = 1` and the
/// `c -> inf` limit `1/sqrt(n)` at `d = 1`.
pub fn update_direction(u: &Point, d: usize) -> Point {
    let n = u.dim();
    let uniform = || Point::splat(n, 1.0 / (n as f64).sqrt());
    if d == 1 {
        return uniform();
    }
    let c = if d == 0 {
        1.0
    } else {
        let df = d as f64;
        (df / (1.0 - df)).abs().powi(d as i32)
    };
    let shifted = Point(u.iter().map(|v| v + c).collect());
    let len = shifted.norm();
    if len > 0.0 && len.is_finite() {
        shifted.scale(1.0 / len)
    } else {
        uniform()
    }
}

/// Lowest cost over the candidates followed by `t_final`; the first one
/// wins ties. Non-finite points and costs are skipped.
pub fn select_candidate<O: CostOracle + ?Sized>(
    candidates: &[Point],
    t_final: &Point,
    oracle: &O,
) -> Option<(Point, f64)> {
    let mut best: Option<(Point, f64)> = None;
    for p in candidates.iter().chain(std::iter::once(t_final)) {
        if !p.is_finite() || p.dim() != oracle.dim() {
            continue;
        }
        let f = oracle.value(p);
        if !f.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|(_, bf)| f < *bf) {
            best = Some((p.clone(), f));
        }
    }
    best
}

pub fn run_explore<O: CostOracle + ?Sized>(
    oracle: &O,
    params: &ExploreParams,
) -> Result<ExploreOutcome> {
    params.validate(oracle)?;
    let s = params.step;
    let dim = oracle.dim();

    let first = init_step(oracle, &params.x_init, s)?;
    let reference_radius = distance(first.x_curr(), &params.x_init);
    if reference_radius == 0.0 {
        return Err(Error::DegenerateStart);
    }

    let mut u = Point::splat(dim, 1.0);
    let mut origin = params.x_init.clone();
    let mut candidates: Vec<Point> = Vec::new();
    let mut batches = Vec::new();
    let mut grad_buf = vec![0.0; dim];
    let mut pending_first = Some(first);

    for batch in 0..=params.restarts {
        let state = match pending_first.take() {
            Some(st) => Ok(st),
            None => init_step(oracle, &origin, s),
        };
        let (end, iters, radius, t_last) = match state {
            Ok(mut st) => {
                let mut radius = reference_radius.max(distance(st.x_curr(), &origin));
                let mut iters = 0;
                let end = loop {
                    if iters >= params.batch_cap {
                        break BatchEnd::IterationCap;
                    }
                    iters += 1;
                    if st.step(oracle, s).is_err() {
                        break BatchEnd::NonFinite;
                    }
                    radius = radius.max(distance(st.x_curr(), &origin));
                    if st.z_norm() <= params.stop_eps {
                        if radius >= params.explore_factor * reference_radius {
                            break BatchEnd::Finished;
                        }
                        break BatchEnd::Candidate;
                    }
                };
                (end, iters, radius, st.x_curr().clone())
            }
            Err(_) => (BatchEnd::NonFinite, 0, reference_radius, origin.clone()),
        };

        let candidate = match end {
            BatchEnd::Candidate | BatchEnd::Finished => {
                Some((t_last.clone(), oracle.value(&t_last)))
            }
            _ => None,
        };
        batches.push(BatchRecord {
            batch,
            end,
            iters,
            radius,
            origin: origin.clone(),
            candidate,
        });

        if end == BatchEnd::Finished {
            let status = match select_candidate(&candidates, &t_last, oracle) {
                Some((point, value)) => ExploreStatus::Found { point, value },
                None => ExploreStatus::FailNoMinimum,
            };
            return Ok(finish(
                oracle,
                status,
                candidates,
                batch,
                reference_radius,
                batches,
            ));
        }
        if end == BatchEnd::Candidate {
            candidates.push(t_last.clone());
        }
        if batch == params.restarts {
            break;
        }

        let restart_index = batch + 1;
        oracle.gradient(&t_last, &mut grad_buf);
        let grad_t = Point(grad_buf.clone());
        origin = restart_point(&origin, radius, &grad_t, &u);
        u = update_direction(&u, restart_index);
    }

    let restarts_used = params.restarts;
    Ok(finish(
        oracle,
        ExploreStatus::FailNoMinimum,
        candidates,
        restarts_used,
        reference_radius,
        batches,
    ))
}

fn finish<O: CostOracle + ?Sized>(
    oracle: &O,
    status: ExploreStatus,
    candidates: Vec<Point>,
    restarts_used: usize,
    reference_radius: f64,
    batches: Vec<BatchRecord>,
) -> ExploreOutcome {
    let candidates = candidates
        .into_iter()
        .map(|p| {
            let f = oracle.value(&p);
            (p, f)
        })
        .collect();
    ExploreOutcome {
        status,
        candidates,
        restarts_used,
        reference_radius,
        batches,
    }
}
