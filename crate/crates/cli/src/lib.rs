//! Named, reproducible experiments on top of `whiplash-core`.
//!
//! [`run_experiment`] computes everything in memory and returns a
//! [`Report`]; [`emit_report`] writes its CSV files and a `manifest.txt`
//! with the resolved parameters and SHA-256 checksums.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use sha2::{Digest, Sha256};

use whiplash_core::continuous::{
    check_w_monotone, compass_velocities, simulate, ContinuousTrace, DampingLaw, OdeParams,
};
use whiplash_core::discrete::{run, run_naive, IterRecord, RunOutput, StopRule, WhiplashParams};
use whiplash_core::envelope::{
    energy_check, integral_anchor, rate_verdict, scaled_signal, scan_rate, Converger, Family,
    ScanSchedule,
};
use whiplash_core::explorer::{run_explore, ExploreParams};
use whiplash_core::format::sci;
use whiplash_core::oracle::BenchmarkName;
use whiplash_core::{Benchmark, CostOracle, Execution, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    ConditionStudy,
    Rosenbrock,
    Saddle,
    Explore,
    VelocityStudy,
    MomentumRate,
    EnvelopeScan,
    AnchorCheck,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::ConditionStudy,
        Experiment::Rosenbrock,
        Experiment::Saddle,
        Experiment::Explore,
        Experiment::VelocityStudy,
        Experiment::MomentumRate,
        Experiment::EnvelopeScan,
        Experiment::AnchorCheck,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::ConditionStudy => "condition-study",
            Experiment::Rosenbrock => "rosenbrock",
            Experiment::Saddle => "saddle",
            Experiment::Explore => "explore",
            Experiment::VelocityStudy => "velocity-study",
            Experiment::MomentumRate => "momentum-rate",
            Experiment::EnvelopeScan => "envelope-scan",
            Experiment::AnchorCheck => "anchor-check",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| anyhow!("unknown experiment `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Exp,
    Poly,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Exp => Family::Exponential,
            FamilyArg::Poly => Family::Polynomial,
        }
    }
}

/// Flags shared by every experiment. Unset values fall back to the
/// experiment's defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    /// Cost function: scaled-quadratic, elliptic, quartic, rosenbrock, saddle
    #[arg(long)]
    pub benchmark: Option<BenchmarkName>,
    /// Curvature of the scaled quadratic / quartic
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Condition numbers of the elliptic quadratic, comma separated
    #[arg(long, value_delimiter = ',')]
    pub kappa: Option<Vec<f64>>,
    /// Dimension of the scaled quadratic / quartic
    #[arg(long)]
    pub dim: Option<usize>,
    /// Starting point, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub start: Option<Vec<f64>>,
    /// Step size: s for discrete runs, h for continuous ones
    #[arg(long, alias = "h")]
    pub step: Option<f64>,
    /// Iteration budget for discrete runs
    #[arg(long)]
    pub iters: Option<usize>,
    /// Momentum stopping tolerance
    #[arg(long)]
    pub eps: Option<f64>,
    /// Restart budget of the explorer
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Restart radius multiplier of the explorer
    #[arg(long)]
    pub explore_factor: Option<f64>,
    /// Iterations per explorer batch
    #[arg(long)]
    pub batch_cap: Option<usize>,
    /// Converger strength; for envelope-scan, classifies this single strength
    #[arg(long)]
    pub eta: Option<f64>,
    /// Converger family
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    /// Simulation horizon T
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Run independent simulations one after another
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub experiment: Experiment,
    pub options: Options,
    pub out: PathBuf,
}

/// Output of one experiment, not yet written to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub experiment: Experiment,
    /// Resolved parameters, echoed into the manifest.
    pub params: Vec<(String, String)>,
    /// `(file name, CSV bytes)` in emission order.
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: String,
}

fn exec(o: &Options) -> Execution {
    if o.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn point(coords: Vec<f64>) -> Result<Point> {
    Point::new(coords).context("invalid --start")
}

fn csv<F>(write: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn list(v: &[f64]) -> String {
    v.iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

struct Params(Vec<(String, String)>);

impl Params {
    fn new() -> Self {
        Params(Vec::new())
    }

    fn put(&mut self, k: &str, v: impl ToString) -> &mut Self {
        self.0.push((k.to_string(), v.to_string()));
        self
    }
}

/// Builds the benchmark selected by `--benchmark` (or `default`).
fn benchmark(o: &Options, default: BenchmarkName, p: &mut Params) -> Result<Benchmark> {
    let name = o.benchmark.unwrap_or(default);
    p.put("benchmark", name);
    let b = match name {
        BenchmarkName::ScaledQuadratic => {
            let (l, d) = (o.lambda.unwrap_or(1.0), o.dim.unwrap_or(1));
            p.put("lambda", l).put("dim", d);
            Benchmark::scaled_quadratic(l, d)?
        }
        BenchmarkName::Elliptic => {
            let k = match o.kappa.as_deref() {
                None => 1.0,
                Some([k]) => *k,
                Some(_) => bail!("--kappa: this experiment takes a single value"),
            };
            p.put("kappa", k);
            Benchmark::elliptic(k)?
        }
        BenchmarkName::Quartic => {
            let (l, d) = (o.lambda.unwrap_or(1.0), o.dim.unwrap_or(1));
            p.put("lambda", l).put("dim", d);
            Benchmark::quartic(l, d, None)?
        }
        BenchmarkName::Rosenbrock => Benchmark::rosenbrock(),
        BenchmarkName::Saddle => Benchmark::saddle(),
    };
    Ok(b)
}

fn start(o: &Options, default: Vec<f64>, p: &mut Params) -> Result<Point> {
    let s = o.start.clone().unwrap_or(default);
    p.put("start", list(&s));
    point(s)
}

/// `(1, .., 1) / sqrt(d)`, a unit-norm start in any dimension.
fn unit_diagonal(d: usize) -> Vec<f64> {
    vec![1.0 / (d as f64).sqrt(); d]
}

fn trace_csv(t: &ContinuousTrace) -> Result<Vec<u8>> {
    csv(|b| t.write_csv(b))
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<Report> {
    let o = &spec.options;
    let mut p = Params::new();
    p.put("experiment", spec.experiment);
    let (files, summary) = match spec.experiment {
        Experiment::ConditionStudy => condition_study(o, &mut p)?,
        Experiment::Rosenbrock => rosenbrock(o, &mut p)?,
        Experiment::Saddle => saddle(o, &mut p)?,
        Experiment::Explore => explore(o, &mut p)?,
        Experiment::VelocityStudy => velocity_study(o, &mut p)?,
        Experiment::MomentumRate => momentum_rate(o, &mut p)?,
        Experiment::EnvelopeScan => envelope_scan(o, &mut p)?,
        Experiment::AnchorCheck => anchor_check(o, &mut p)?,
    };
    Ok(Report {
        experiment: spec.experiment,
        params: p.0,
        files,
        summary,
    })
}

type Outcome = (Vec<(String, Vec<u8>)>, String);

fn condition_study(o: &Options, p: &mut Params) -> Result<Outcome> {
    let kappas = o
        .kappa
        .clone()
        .unwrap_or_else(|| vec![1.0, 10.0, 100.0, 1000.0]);
    let h = o.step.unwrap_or(1e-4);
    let horizon = o.horizon.unwrap_or(50.0);
    p.put("benchmark", BenchmarkName::Elliptic)
        .put("kappa", list(&kappas));
    let x0 = start(o, vec![1.0, -1.0], p)?;
    p.put("step", h).put("horizon", horizon);
    let runs = exec(o).map(&kappas, |&k| -> Result<ContinuousTrace> {
        let e = Benchmark::elliptic(k)?;
        Ok(simulate(
            &e,
            &DampingLaw::Whiplash,
            &OdeParams::new(x0.clone(), horizon).with_step(h),
        )?)
    });
    let mut files = Vec::new();
    let mut parts = Vec::new();
    for (k, tr) in kappas.iter().zip(runs) {
        let tr = tr?;
        let last = tr.last().ok_or_else(|| anyhow!("empty trace"))?;
        let err = Point::new(last.x.clone())?.norm();
        let envelope = tr
            .samples
            .iter()
            .map(|s| {
                s.t * s.t
                    * Point::new(s.x.clone())
                        .map(|x| x.norm())
                        .unwrap_or(f64::INFINITY)
            })
            .fold(0.0, f64::max);
        parts.push(format!(
            "kappa={k} err={} max_t2_err={}",
            sci(err),
            sci(envelope)
        ));
        files.push((format!("trace_kappa_{k}.csv"), trace_csv(&tr)?));
    }
    Ok((files, format!("condition-study: {}", parts.join("; "))))
}

fn discrete_outcome(name: &str, out: &RunOutput, extra: &str) -> Result<Outcome> {
    let rec: &IterRecord = out.trace.last().ok_or_else(|| anyhow!("empty trace"))?;
    let files = vec![("trace.csv".to_string(), csv(|b| out.trace.write_csv(b))?)];
    let status = match out.status {
        whiplash_core::discrete::RunStatus::Completed => "completed".to_string(),
        whiplash_core::discrete::RunStatus::StoppedEarly => "stopped-early".to_string(),
        whiplash_core::discrete::RunStatus::Overflow { k } => format!("overflow@{k}"),
    };
    Ok((
        files,
        format!(
            "{name}: k={} status={status} f={} x=[{}]{extra}",
            out.final_k,
            sci(rec.f),
            out.x_final
                .iter()
                .map(|c| sci(*c))
                .collect::<Vec<_>>()
                .join(",")
        ),
    ))
}

fn rosenbrock(o: &Options, p: &mut Params) -> Result<Outcome> {
    let b = Benchmark::rosenbrock();
    p.put("benchmark", BenchmarkName::Rosenbrock);
    let x0 = start(o, vec![0.0, 0.0], p)?;
    let (s, n) = (o.step.unwrap_or(1e-5), o.iters.unwrap_or(2_000_000));
    p.put("step", s).put("iters", n);
    let out = run_naive(&b, &x0, &WhiplashParams::new(s, n))?;
    let err = out.x_final.distance(&Point::splat(2, 1.0));
    discrete_outcome("rosenbrock", &out, &format!(" err={}", sci(err)))
}

fn saddle(o: &Options, p: &mut Params) -> Result<Outcome> {
    let b = Benchmark::saddle();
    p.put("benchmark", BenchmarkName::Saddle);
    let x0 = start(o, vec![-0.01, -0.01], p)?;
    let (s, n) = (o.step.unwrap_or(1e-4), o.iters.unwrap_or(1_000_000));
    p.put("step", s).put("iters", n);
    let mut closest = f64::INFINITY;
    let mut escape: Option<usize> = None;
    let mut watch = |t: &whiplash_core::discrete::Transition<'_>| {
        if escape.is_none() {
            closest = closest.min(
                Point::new(t.x_next.to_vec())
                    .map(|x| x.norm())
                    .unwrap_or(f64::INFINITY),
            );
            if b.value(t.x_next) < -10.0 {
                escape = Some(t.k + 1);
            }
        }
    };
    let out = run(
        &b,
        &x0,
        &WhiplashParams::new(s, n),
        StopRule::Naive,
        &mut watch,
    )?;
    let extra = format!(
        " closest={} escape_k={}",
        sci(closest),
        escape.map_or("none".to_string(), |k| k.to_string())
    );
    discrete_outcome("saddle", &out, &extra)
}

fn explore(o: &Options, p: &mut Params) -> Result<Outcome> {
    let b = benchmark(o, BenchmarkName::Saddle, p)?;
    let default_start = if b.dim() == 2 {
        vec![-0.01, -0.01]
    } else {
        vec![1.0; b.dim()]
    };
    let x0 = start(o, default_start, p)?;
    let mut params = ExploreParams::with_defaults(x0);
    if let Some(s) = o.step {
        params.step = s;
    }
    if let Some(v) = o.explore_factor {
        params.explore_factor = v;
    }
    if let Some(v) = o.batch_cap {
        params.batch_cap = v;
    }
    if let Some(v) = o.restarts {
        params.restarts = v;
    }
    if let Some(v) = o.eps {
        params.stop_eps = v;
    }
    p.put("step", params.step)
        .put("explore-factor", params.explore_factor)
        .put("batch-cap", params.batch_cap)
        .put("restarts", params.restarts)
        .put("eps", params.stop_eps);
    let out = run_explore(&b, &params)?;
    let files = vec![(
        "explore.csv".to_string(),
        csv(|w| out.write_csv(w, b.dim()))?,
    )];
    let status = match &out.status {
        whiplash_core::explorer::ExploreStatus::Found { point, value } => {
            format!(
                "found f={} x=[{}]",
                sci(*value),
                point.iter().map(|c| sci(*c)).collect::<Vec<_>>().join(",")
            )
        }
        whiplash_core::explorer::ExploreStatus::FailNoMinimum => "fail-no-minimum".to_string(),
    };
    Ok((
        files,
        format!(
            "explore: {status} restarts={} iters={}",
            out.restarts_used,
            out.total_iters()
        ),
    ))
}

fn velocity_study(o: &Options, p: &mut Params) -> Result<Outcome> {
    let b = benchmark(o, BenchmarkName::Elliptic, p)?;
    if b.dim() != 2 {
        bail!("--benchmark: velocity-study needs a two-dimensional cost");
    }
    let x0 = start(o, vec![1.0, -1.0], p)?;
    let (h, horizon) = (o.step.unwrap_or(1e-3), o.horizon.unwrap_or(50.0));
    p.put("step", h).put("horizon", horizon);
    let velocities = compass_velocities(1.0);
    let runs = exec(o).map(&velocities, |v| {
        simulate(
            &b,
            &DampingLaw::Whiplash,
            &OdeParams::new(x0.clone(), horizon)
                .with_step(h)
                .with_velocity(v.clone()),
        )
    });
    let x_star = b.optimum();
    let mut files = Vec::new();
    let mut worst: f64 = 0.0;
    for (i, tr) in runs.into_iter().enumerate() {
        let tr = tr?;
        if let (Some(xs), Some(last)) = (&x_star, tr.last()) {
            worst = worst.max(xs.distance(&Point::new(last.x.clone())?));
        }
        files.push((format!("velocity_{}.csv", i * 45), trace_csv(&tr)?));
    }
    Ok((
        files,
        format!("velocity-study: runs=8 worst_final_err={}", sci(worst)),
    ))
}

fn momentum_rate(o: &Options, p: &mut Params) -> Result<Outcome> {
    let b = benchmark(o, BenchmarkName::ScaledQuadratic, p)?;
    let d = b.dim();
    let x0 = start(o, unit_diagonal(d), p)?;
    let (s, n) = (o.step.unwrap_or(0.01), o.iters.unwrap_or(100_000));
    p.put("step", s).put("iters", n);
    let out = run_naive(&b, &x0, &WhiplashParams::new(s, n))?;
    let stat = |k: usize| {
        out.trace
            .get(k)
            .map(|r| sci(r.momentum_stat))
            .unwrap_or_else(|| "n/a".into())
    };
    let alpha = out
        .trace
        .last()
        .map(|r| sci(r.alpha))
        .unwrap_or_else(|| "n/a".into());
    let extra = format!(" stat@100={} stat@{n}={} alpha={alpha}", stat(100), stat(n));
    discrete_outcome("momentum-rate", &out, &extra)
}

fn envelope_scan(o: &Options, p: &mut Params) -> Result<Outcome> {
    let b = benchmark(o, BenchmarkName::ScaledQuadratic, p)?;
    let x_star = b
        .optimum()
        .ok_or_else(|| anyhow!("--benchmark: rate scans need a known minimizer"))?;
    let x0 = start(o, unit_diagonal(b.dim()), p)?;
    let family: Family = o.family.unwrap_or(FamilyArg::Exp).into();
    let mut schedule = ScanSchedule::for_family(family);
    if let Some(t) = o.horizon {
        schedule.horizon = t;
    }
    let h = o.step.unwrap_or(1e-3);
    p.put("family", family)
        .put("step", h)
        .put("horizon", schedule.horizon);
    let params = OdeParams::new(x0, schedule.horizon).with_step(h);

    if let Some(eta) = o.eta {
        p.put("eta", eta);
        let conv = Converger::new(family, eta)?;
        let tr = simulate(&b, &DampingLaw::Whiplash, &params)?;
        let v = rate_verdict(&scaled_signal(&tr, &conv, &x_star), &schedule, eta);
        let body = format!(
            "family,eta,verdict,peak_scaled\n{},{},{},{}\n",
            family,
            sci(eta),
            v.verdict,
            sci(v.peak_scaled)
        );
        return Ok((
            vec![("scan.csv".into(), body.into_bytes())],
            format!(
                "envelope-scan: family={family} eta={eta} verdict={}",
                v.verdict
            ),
        ));
    }

    let rep = scan_rate(&b, &DampingLaw::Whiplash, &params, &schedule, exec(o))?;
    let files = vec![("scan.csv".to_string(), csv(|w| rep.write_csv(w))?)];
    let star = rep
        .eta_star
        .map_or("none".to_string(), |e| format!("{e:.3}"));
    let brk = rep
        .coarse_transition()
        .map_or("none".to_string(), |e| format!("{e:.3}"));
    Ok((
        files,
        format!("envelope-scan: family={family} transition eta*={star} first_unstable_coarse={brk} rows={}", rep.verdicts().count()),
    ))
}

fn anchor_check(o: &Options, p: &mut Params) -> Result<Outcome> {
    let b = benchmark(o, BenchmarkName::ScaledQuadratic, p)?;
    let x_star = b
        .optimum()
        .ok_or_else(|| anyhow!("--benchmark: the anchor needs a known minimizer"))?;
    let x0 = start(o, unit_diagonal(b.dim()), p)?;
    let family: Family = o.family.unwrap_or(FamilyArg::Poly).into();
    let eta = o.eta.unwrap_or(2.0);
    let (h, horizon) = (o.step.unwrap_or(1e-3), o.horizon.unwrap_or(50.0));
    p.put("family", family)
        .put("eta", eta)
        .put("step", h)
        .put("horizon", horizon);
    let tr = simulate(
        &b,
        &DampingLaw::Whiplash,
        &OdeParams::new(x0, horizon).with_step(h),
    )?;
    let anchor = integral_anchor(
        &tr,
        &Converger::new(family, eta)?,
        &tr.alpha_series(),
        &b,
        &x_star,
    )?;
    let check = energy_check(&anchor);
    let w = check_w_monotone(&tr, &b)?;
    let files = vec![
        ("anchor.csv".to_string(), csv(|wr| anchor.write_csv(wr))?),
        ("trace.csv".to_string(), trace_csv(&tr)?),
    ];
    Ok((
        files,
        format!(
            "anchor-check: inf_I={} c={} min_E={} E_monotone={} E_max_violation={} W_monotone={}",
            sci(anchor.inf_integral),
            sci(anchor.required_c),
            sci(check.min_energy),
            check.monotone.ok,
            sci(check.monotone.max_violation),
            w.ok
        ),
    ))
}

/// Writes the report's CSV files and `manifest.txt` into `dir`.
pub fn emit_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    let mut manifest = String::new();
    for (k, v) in &report.params {
        writeln!(manifest, "{k}={v}").unwrap();
    }
    for (name, body) in &report.files {
        let path = dir.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        writeln!(
            manifest,
            "file.{name}.sha256={}",
            hex::encode(Sha256::digest(body))
        )
        .unwrap();
        written.push(path);
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest).with_context(|| format!("writing {}", path.display()))?;
    written.push(path);
    Ok(written)
}

/// Reads back the `key=value` lines of a manifest.
pub fn parse_manifest(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}
