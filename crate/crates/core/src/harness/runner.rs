//! Monte-Carlo execution of an [`ExperimentConfig`] and CSV persistence.
//!
//! Every trial draws its geometry and channels from its own seed, shared by
//! all sweep points and architectures of that trial, so comparisons along a
//! sweep use common random numbers.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::channel::{generate_channels, stream_rng, Geometry, Point};
use crate::error::{Error, Result};
use crate::harness::config::{Architecture, ExperimentConfig, Scenario};
use crate::powermin::{run_power_min, PmOptions, PmRunTrace};
use crate::solver::SolverOptions;
use crate::sumrate::{run_sum_rate_max, RunTrace, SumRateOptions};

pub const RESULT_HEADER: [&str; 9] = [
    "preset",
    "architecture",
    "sweep",
    "trial",
    "seed",
    "metric",
    "value",
    "status",
    "wall_ms",
];
pub const AGGREGATE_HEADER: [&str; 8] = [
    "preset",
    "architecture",
    "sweep",
    "metric",
    "count",
    "mean",
    "std_err",
    "excluded",
];
pub const TRACE_HEADER: [&str; 6] = ["sweep", "architecture", "outer", "inner", "metric", "value"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrialStatus {
    Ok,
    /// Static RIS draw exceeds the budget; the rate is the direct-link rate.
    RisOff,
    /// SINR targets unreachable.
    Infeasible,
    Error,
    Panic,
}

impl TrialStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TrialStatus::Ok => "ok",
            TrialStatus::RisOff => "ris_off",
            TrialStatus::Infeasible => "infeasible",
            TrialStatus::Error => "error",
            TrialStatus::Panic => "panic",
        }
    }

    /// Whether the trial's metrics enter the averages.
    pub fn counts(self) -> bool {
        matches!(self, TrialStatus::Ok | TrialStatus::RisOff)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub preset: String,
    pub architecture: String,
    pub sweep: f64,
    pub trial: usize,
    pub seed: u64,
    pub metric: String,
    pub value: Option<f64>,
    pub status: TrialStatus,
    pub wall_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub sweep: f64,
    pub architecture: String,
    pub outer: usize,
    pub inner: Option<usize>,
    pub metric: &'static str,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub preset: String,
    pub architecture: String,
    pub sweep: f64,
    pub metric: String,
    pub count: usize,
    pub mean: f64,
    pub std_err: f64,
    /// Trials left out of the mean (infeasible, errors, panics).
    pub excluded: usize,
}

/// Outcome of one (trial, sweep point, architecture) job.
#[derive(Clone, Debug, PartialEq)]
pub struct JobResult {
    pub trial: usize,
    pub sweep_index: usize,
    pub rows: Vec<ResultRow>,
    pub trace: Vec<TraceRow>,
    pub message: Option<String>,
}

impl JobResult {
    pub fn status(&self) -> TrialStatus {
        self.rows.first().map_or(TrialStatus::Error, |r| r.status)
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.metric == name).and_then(|r| r.value)
    }
}

/// Seed of trial `t`, decorrelated from neighbouring base seeds.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ (trial as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sum_rate_options(cfg: &ExperimentConfig) -> SumRateOptions {
    SumRateOptions {
        outer_tol: cfg.outer_tol,
        max_outer: cfg.max_outer,
        inner_tol: cfg.inner_tol,
        max_inner: cfg.max_inner,
        rho: cfg.rho,
        reset_admm: false,
        solver: SolverOptions::default(),
    }
}

fn power_min_options(cfg: &ExperimentConfig) -> PmOptions {
    PmOptions {
        outer_tol: cfg.outer_tol,
        max_outer: cfg.max_outer,
        inner_tol: cfg.inner_tol,
        max_inner: cfg.max_inner,
        rho: cfg.rho,
        ..PmOptions::default()
    }
}

fn fraction(flags: impl Iterator<Item = bool>) -> f64 {
    let (mut hit, mut all) = (0usize, 0usize);
    for f in flags {
        all += 1;
        hit += f as usize;
    }
    if all == 0 {
        1.0
    } else {
        hit as f64 / all as f64
    }
}

fn sum_rate_metrics(t: &RunTrace) -> Vec<(&'static str, f64)> {
    vec![
        ("sum_rate", t.final_sum_rate()),
        ("initial_sum_rate", t.initial_sum_rate),
        ("outer_iterations", t.outer.len() as f64),
        ("converged", t.converged as u8 as f64),
        (
            "inner_converged_frac",
            fraction(t.outer.iter().map(|o| o.inner_converged)),
        ),
    ]
}

fn sum_rate_trace(t: &RunTrace, sweep: f64, arch: &str) -> Vec<TraceRow> {
    let row = |outer, inner, metric, value| TraceRow {
        sweep,
        architecture: arch.to_string(),
        outer,
        inner,
        metric,
        value,
    };
    let mut out = vec![row(0, None, "sum_rate", t.initial_sum_rate)];
    for (i, o) in t.outer.iter().enumerate() {
        let it = i + 1;
        out.push(row(it, None, "sum_rate", o.sum_rate));
        out.push(row(it, None, "f2", o.f2));
        out.push(row(it, None, "bs_residual", o.bs_residual));
        out.push(row(it, None, "ris_residual", o.ris_residual));
        for (j, r) in o.inner.iter().enumerate() {
            out.push(row(it, Some(j + 1), "al_objective", r.al_objective));
            out.push(row(it, Some(j + 1), "primal_residual", r.primal_residual));
        }
    }
    out
}

fn power_metrics(t: &PmRunTrace) -> Vec<(&'static str, f64)> {
    let last = t.outer.last();
    vec![
        ("total_power", t.final_power()),
        ("initial_power", t.initial_power),
        ("bs_power", last.map_or(f64::NAN, |o| o.bs_power)),
        ("ris_power", last.map_or(f64::NAN, |o| o.ris_power)),
        ("min_sinr_slack", last.map_or(f64::NAN, |o| o.min_sinr_slack)),
        ("outer_iterations", t.outer.len() as f64),
        ("converged", t.converged as u8 as f64),
        (
            "inner_converged_frac",
            fraction(t.outer.iter().map(|o| o.inner_converged)),
        ),
    ]
}

const POWER_METRICS: [&str; 8] = [
    "total_power",
    "initial_power",
    "bs_power",
    "ris_power",
    "min_sinr_slack",
    "outer_iterations",
    "converged",
    "inner_converged_frac",
];

const SUM_RATE_METRICS: [&str; 5] = [
    "sum_rate",
    "initial_sum_rate",
    "outer_iterations",
    "converged",
    "inner_converged_frac",
];

fn power_trace(t: &PmRunTrace, sweep: f64, arch: &str) -> Vec<TraceRow> {
    let row = |outer, inner, metric, value| TraceRow {
        sweep,
        architecture: arch.to_string(),
        outer,
        inner,
        metric,
        value,
    };
    let mut out = vec![row(0, None, "total_power", t.initial_power)];
    for (i, o) in t.outer.iter().enumerate() {
        let it = i + 1;
        out.push(row(it, None, "total_power", o.total_power));
        out.push(row(it, None, "bs_power", o.bs_power));
        out.push(row(it, None, "ris_power", o.ris_power));
        out.push(row(it, None, "min_sinr_slack", o.min_sinr_slack));
        for (j, r) in o.inner.iter().enumerate() {
            out.push(row(it, Some(j + 1), "al_objective", r.al_objective));
            out.push(row(it, Some(j + 1), "primal_residual", r.primal_residual));
        }
    }
    out
}

type Simulated = (Vec<(&'static str, f64)>, Vec<TraceRow>, TrialStatus);

fn simulate(cfg: &ExperimentConfig, sc: &Scenario, seed: u64, sweep: f64, arch: &str) -> Result<Simulated> {
    let mut rng = stream_rng(seed, 0);
    let geom = Geometry::random(
        sc.dims.k,
        Point::zeros(),
        Point::new(0.0, 50.0),
        sc.user_x,
        cfg.user_radius,
        &mut rng,
    );
    let ch = generate_channels(&sc.dims, &geom, &cfg.path_loss, &mut rng)?;
    if cfg.preset.is_power_min() {
        match run_power_min(&ch, &sc.dims, &sc.params, &power_min_options(cfg)) {
            Ok((_, _, t)) => Ok((power_metrics(&t), power_trace(&t, sweep, arch), TrialStatus::Ok)),
            Err(Error::Infeasible(_)) => Ok((Vec::new(), Vec::new(), TrialStatus::Infeasible)),
            Err(e) => Err(e),
        }
    } else {
        let (_, _, t) = run_sum_rate_max(&ch, &sc.dims, &sc.params, &sum_rate_options(cfg))?;
        let status = if t.ris_off {
            TrialStatus::RisOff
        } else {
            TrialStatus::Ok
        };
        Ok((sum_rate_metrics(&t), sum_rate_trace(&t, sweep, arch), status))
    }
}

fn metric_names(cfg: &ExperimentConfig) -> &'static [&'static str] {
    if cfg.preset.is_power_min() {
        &POWER_METRICS
    } else {
        &SUM_RATE_METRICS
    }
}

/// Runs one job; panics inside the algorithms become `Panic` rows.
pub fn run_job(cfg: &ExperimentConfig, trial: usize, sweep_index: usize, arch: Architecture) -> JobResult {
    let sweep = cfg.sweep[sweep_index];
    let label = cfg.architecture_label(sweep, arch);
    let seed = trial_seed(cfg.seed, trial);
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(|| {
        let sc = cfg.scenario(sweep, arch)?;
        simulate(cfg, &sc, seed, sweep, &label)
    }));
    let wall_ms = cfg.timing.then(|| start.elapsed().as_secs_f64() * 1e3);
    let (values, trace, status, message) = match outcome {
        Ok(Ok((v, t, s))) => (v, t, s, None),
        Ok(Err(e)) => (Vec::new(), Vec::new(), TrialStatus::Error, Some(e.to_string())),
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            (Vec::new(), Vec::new(), TrialStatus::Panic, Some(msg))
        }
    };
    let rows = metric_names(cfg)
        .iter()
        .map(|&name| ResultRow {
            preset: cfg.preset.name().to_string(),
            architecture: label.clone(),
            sweep,
            trial,
            seed,
            metric: name.to_string(),
            value: values.iter().find(|(n, _)| *n == name).map(|(_, v)| *v),
            status,
            wall_ms,
        })
        .collect();
    JobResult {
        trial,
        sweep_index,
        rows,
        trace,
        message,
    }
}

/// All jobs in deterministic order: trial, then sweep point, then
/// architecture. The result does not depend on `cfg.workers`.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<Vec<JobResult>> {
    cfg.validate()?;
    let archs = cfg.architectures_at();
    let mut jobs = Vec::with_capacity(cfg.trials * cfg.sweep.len() * archs.len());
    for t in 0..cfg.trials {
        for s in 0..cfg.sweep.len() {
            for &a in &archs {
                jobs.push((t, s, a));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Io(format!("worker pool: {e}")))?;
    Ok(pool.install(|| jobs.par_iter().map(|&(t, s, a)| run_job(cfg, t, s, a)).collect()))
}

/// Mean and standard error per (architecture, sweep, metric), in first-seen
/// order.
pub fn aggregate(rows: &[ResultRow]) -> Vec<AggregateRow> {
    let mut groups: Vec<(AggregateRow, Vec<f64>)> = Vec::new();
    for r in rows {
        let idx = groups.iter().position(|(g, _)| {
            g.architecture == r.architecture && g.sweep.to_bits() == r.sweep.to_bits() && g.metric == r.metric
        });
        let idx = idx.unwrap_or_else(|| {
            groups.push((
                AggregateRow {
                    preset: r.preset.clone(),
                    architecture: r.architecture.clone(),
                    sweep: r.sweep,
                    metric: r.metric.clone(),
                    count: 0,
                    mean: f64::NAN,
                    std_err: f64::NAN,
                    excluded: 0,
                },
                Vec::new(),
            ));
            groups.len() - 1
        });
        match r.value {
            Some(v) if r.status.counts() && v.is_finite() => groups[idx].1.push(v),
            _ => groups[idx].0.excluded += 1,
        }
    }
    groups
        .into_iter()
        .map(|(mut g, vals)| {
            let (mean, se) = mean_and_std_err(&vals);
            g.count = vals.len();
            g.mean = mean;
            g.std_err = se;
            g
        })
        .collect()
}

/// Sample mean and `s/√n`; the error is zero for a single sample.
pub fn mean_and_std_err(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULT_HEADER)?;
    for r in rows {
        w.write_record([
            r.preset.clone(),
            r.architecture.clone(),
            r.sweep.to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            r.metric.clone(),
            fmt_opt(r.value),
            r.status.as_str().to_string(),
            fmt_opt(r.wall_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(AGGREGATE_HEADER)?;
    for r in rows {
        w.write_record([
            r.preset.clone(),
            r.architecture.clone(),
            r.sweep.to_string(),
            r.metric.clone(),
            r.count.to_string(),
            r.mean.to_string(),
            r.std_err.to_string(),
            r.excluded.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRACE_HEADER)?;
    for r in rows {
        w.write_record([
            r.sweep.to_string(),
            r.architecture.clone(),
            r.outer.to_string(),
            r.inner.map_or(String::new(), |i| i.to_string()),
            r.metric.to_string(),
            r.value.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub jobs: usize,
    pub infeasible: usize,
    pub errors: usize,
    pub panicked: usize,
    pub aggregate: Vec<AggregateRow>,
    /// First error or panic messages, for reporting.
    pub messages: Vec<String>,
}

/// Runs the experiment and writes `results.csv`, `aggregate.csv` and one
/// `trace_<trial>.csv` per trial into `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let jobs = run_trials(cfg)?;
    std::fs::create_dir_all(&cfg.out)?;
    let rows: Vec<ResultRow> = jobs.iter().flat_map(|j| j.rows.iter().cloned()).collect();
    write_results(&cfg.out.join("results.csv"), &rows)?;
    let agg = aggregate(&rows);
    write_aggregate(&cfg.out.join("aggregate.csv"), &agg)?;
    for t in 0..cfg.trials {
        let trace: Vec<TraceRow> = jobs
            .iter()
            .filter(|j| j.trial == t)
            .flat_map(|j| j.trace.iter().cloned())
            .collect();
        write_trace(&cfg.out.join(format!("trace_{t}.csv")), &trace)?;
    }
    let count = |s: TrialStatus| jobs.iter().filter(|j| j.status() == s).count();
    Ok(RunSummary {
        out_dir: cfg.out.clone(),
        jobs: jobs.len(),
        infeasible: count(TrialStatus::Infeasible),
        errors: count(TrialStatus::Error),
        panicked: count(TrialStatus::Panic),
        aggregate: agg,
        messages: jobs.iter().filter_map(|j| j.message.clone()).take(5).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::parse_config;

    #[test]
    fn mean_and_error() {
        let (m, s) = mean_and_std_err(&[1.0, 2.0, 3.0, 4.0]);
        assert!((m - 2.5).abs() < 1e-15);
        assert!((s - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_and_std_err(&[7.0]), (7.0, 0.0));
        assert!(mean_and_std_err(&[]).0.is_nan());
    }

    #[test]
    fn trial_seeds_differ() {
        let s: Vec<u64> = (0..100).map(|t| trial_seed(1, t)).collect();
        let mut d = s.clone();
        d.sort_unstable();
        d.dedup();
        assert_eq!(d.len(), s.len());
        assert_ne!(trial_seed(1, 0), trial_seed(2, 0));
    }

    #[test]
    fn aggregate_excludes_infeasible() {
        let row = |trial, value, status| ResultRow {
            preset: "p".into(),
            architecture: "a".into(),
            sweep: 1.0,
            trial,
            seed: 0,
            metric: "m".into(),
            value,
            status,
            wall_ms: None,
        };
        let agg = aggregate(&[
            row(0, Some(1.0), TrialStatus::Ok),
            row(1, Some(3.0), TrialStatus::RisOff),
            row(2, None, TrialStatus::Infeasible),
        ]);
        assert_eq!(agg.len(), 1);
        assert_eq!((agg[0].count, agg[0].excluded), (2, 1));
        assert!((agg[0].mean - 2.0).abs() < 1e-15);
    }

    #[test]
    fn job_order_and_worker_independence() {
        let text = "preset = sumrate_vs_pbs\nN = 2\nK = 2\nM = 4\nL = 2\ntrials = 3\nsweep = 20 dBm, 30 dBm\n\
                    architectures = sub, fully\nP_RIS_tot = 0.1\nW_PS = 1 mW\nW_PA = 1 mW\nmax_outer = 3";
        let mut cfg = parse_config(text).unwrap();
        cfg.workers = 1;
        let a = run_trials(&cfg).unwrap();
        cfg.workers = 3;
        let b = run_trials(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 12);
        let order: Vec<(usize, usize, String)> = a
            .iter()
            .map(|j| (j.trial, j.sweep_index, j.rows[0].architecture.clone()))
            .collect();
        assert_eq!(order[0], (0, 0, "sub(2)".into()));
        assert_eq!(order[1], (0, 0, "fully".into()));
        assert_eq!(order[2], (0, 1, "sub(2)".into()));
        assert!(a.iter().all(|j| j.status() == TrialStatus::Ok));
    }
}
