//! Simulation harness for the top-K sweep and the cluster-sampling study,
//! plus graph diagnostics.
//!
//! Within a trial the graph, the adversary and the reweighting are shared by
//! every score gap in the grid, and each edge draws its comparisons from a
//! stream keyed by `(seed, trial, edge)`. Results therefore differ across
//! gaps only through the scores.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::{is_connected, Graph, WeightVector, DEFAULT_CONNECTIVITY_TOL};
use crate::io::fmt_g17;
use crate::mle::{error_metrics, solve_mle, ErrorMetrics, SolveOptions};
use crate::mmwu::{reweight, MmwuParams, OracleKind};
use crate::rng::{derive_seed, Domain};
use crate::sampling::{apply_clique_adversary, gen_btl_scores, gen_cluster_graph, gen_er, sample_comparisons};
use crate::spectral::{spectral_report, SpectralReport};

/// Environment variable capping the worker count (0 or unset: automatic).
pub const THREADS_ENV: &str = "SEMIRANK_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Adversary {
    None,
    Clique,
    Cluster { sizes: Vec<usize>, p_within: Vec<f64>, q: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Unweighted MLE on the hidden ER edges only.
    VanillaEr,
    /// Unweighted MLE on every observed edge.
    VanillaSr,
    /// MLE on every observed edge with the MMWU weights.
    WeightedSr,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::VanillaEr => "vanilla_er",
            Method::VanillaSr => "vanilla_sr",
            Method::WeightedSr => "weighted_sr",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "vanilla_er" => Ok(Method::VanillaEr),
            "vanilla_sr" => Ok(Method::VanillaSr),
            "weighted_sr" => Ok(Method::WeightedSr),
            other => Err(invalid(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k_top: usize,
    pub reps: usize,
    /// Nominal ER edge probability; sets the feasible set of the reweighting.
    pub p: f64,
    pub delta_grid: Vec<f64>,
    pub trials: usize,
    pub eps: f64,
    pub seed: u64,
    pub adversary: Adversary,
    pub methods: Vec<Method>,
    pub oracle: OracleKind,
    /// Values of `q` swept by the cluster study; empty means the
    /// adversary's own `q`.
    pub q_grid: Vec<f64>,
    /// Records wall-clock time per solve. Off by default so that output is
    /// reproducible byte for byte.
    pub timing: bool,
}

/// `count` evenly spaced values from `lo` to `hi`.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| if i + 1 == count { hi } else { lo + (hi - lo) * i as f64 / (count - 1) as f64 })
            .collect(),
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 200,
            k_top: 10,
            reps: 10,
            p: 0.25,
            delta_grid: linspace(0.02, 0.62, 31),
            trials: 50,
            eps: 0.25,
            seed: 0,
            adversary: Adversary::Clique,
            methods: vec![Method::VanillaEr, Method::WeightedSr],
            oracle: OracleKind::Greedy,
            q_grid: Vec::new(),
            timing: false,
        }
    }
}

/// Flat JSON form of [`ExperimentConfig`]. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub n: Option<usize>,
    #[serde(rename = "K", alias = "k")]
    pub k_top: Option<usize>,
    #[serde(rename = "L", alias = "l")]
    pub reps: Option<usize>,
    pub p: Option<f64>,
    pub delta_grid: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub eps: Option<f64>,
    pub seed: Option<u64>,
    /// `none`, `clique` or `cluster`.
    pub adversary: Option<String>,
    pub cluster_sizes: Option<Vec<usize>>,
    pub cluster_p_within: Option<Vec<f64>>,
    pub cluster_q: Option<f64>,
    pub q_grid: Option<Vec<f64>>,
    pub methods: Option<Vec<String>>,
    pub oracle: Option<OracleKind>,
    pub timing: Option<bool>,
}

impl ConfigOverrides {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Keys set in `other` replace keys set here.
    pub fn merge(mut self, other: ConfigOverrides) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(n, k_top, reps, p, delta_grid, trials, eps, seed, adversary, cluster_sizes, cluster_p_within, cluster_q, q_grid, methods, oracle, timing);
        self
    }
}

impl ExperimentConfig {
    /// Defaults overridden by `o`. Experiment-level constraints are checked
    /// by [`ExperimentConfig::validate`], which the runners call.
    pub fn from_overrides(o: &ConfigOverrides) -> Result<Self> {
        let mut c = Self::default();
        if let Some(v) = o.n {
            c.n = v;
        }
        if let Some(v) = o.k_top {
            c.k_top = v;
        }
        if let Some(v) = o.reps {
            c.reps = v;
        }
        if let Some(v) = o.p {
            c.p = v;
        }
        if let Some(v) = &o.delta_grid {
            c.delta_grid = v.clone();
        }
        if let Some(v) = o.trials {
            c.trials = v;
        }
        if let Some(v) = o.eps {
            c.eps = v;
        }
        if let Some(v) = o.seed {
            c.seed = v;
        }
        if let Some(v) = o.oracle {
            c.oracle = v;
        }
        if let Some(v) = o.timing {
            c.timing = v;
        }
        if let Some(v) = &o.q_grid {
            c.q_grid = v.clone();
        }
        if let Some(ms) = &o.methods {
            c.methods = ms.iter().map(|m| Method::parse(m)).collect::<Result<_>>()?;
        }
        let kind = o.adversary.as_deref().unwrap_or(if o.cluster_sizes.is_some() { "cluster" } else { "clique" });
        c.adversary = match kind {
            "none" => Adversary::None,
            "clique" => Adversary::Clique,
            "cluster" => {
                let sizes = o.cluster_sizes.clone().ok_or_else(|| invalid("cluster adversary needs cluster_sizes"))?;
                let p_within = o
                    .cluster_p_within
                    .clone()
                    .ok_or_else(|| invalid("cluster adversary needs cluster_p_within"))?;
                let q = o.cluster_q.unwrap_or(c.p);
                Adversary::Cluster { sizes, p_within, q }
            }
            other => return Err(invalid(format!("unknown adversary '{other}'"))),
        };
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("trials must be >= 1"));
        }
        if self.reps == 0 {
            return Err(invalid("L must be >= 1"));
        }
        if self.n < 2 || self.k_top == 0 || self.k_top >= self.n {
            return Err(invalid(format!("need n >= 2 and 1 <= K < n, got n={}, K={}", self.n, self.k_top)));
        }
        if self.delta_grid.is_empty() || self.delta_grid.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(invalid("delta_grid must be non-empty and positive"));
        }
        if self.delta_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("delta_grid must be strictly increasing"));
        }
        if self.methods.is_empty() {
            return Err(invalid("at least one method is required"));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(invalid(format!("p must lie in (0, 1], got {}", self.p)));
        }
        if let Adversary::Cluster { sizes, p_within, q } = &self.adversary {
            if sizes.iter().sum::<usize>() != self.n {
                return Err(invalid(format!(
                    "cluster sizes sum to {}, expected n = {}",
                    sizes.iter().sum::<usize>(),
                    self.n
                )));
            }
            if sizes.len() != p_within.len() {
                return Err(invalid("cluster_sizes and cluster_p_within differ in length"));
            }
            for &qq in self.q_grid.iter().chain(std::iter::once(q)) {
                if let Some(&pt) = p_within.iter().find(|&&pt| qq > pt) {
                    return Err(invalid(format!("q = {qq} exceeds within-cluster probability {pt}")));
                }
            }
        }
        if self.methods.contains(&Method::WeightedSr) {
            MmwuParams::new(self.n, self.p, self.eps, 0)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub delta_k: f64,
    pub trial: usize,
    /// Method name, suffixed with `:failed` when the solve failed. Failed
    /// rows carry NaN error metrics.
    pub method: String,
    pub topk_accuracy: f64,
    pub linf: f64,
    pub pairwise_linf: f64,
    /// Spectral gap and maximum weighted degree of the weighting used.
    pub lambda_gap: f64,
    pub d_max: f64,
    pub wall_ms: f64,
}

impl TrialRecord {
    pub fn failed(&self) -> bool {
        self.method.ends_with(":failed")
    }
}

pub const TRIAL_CSV_HEADER: &str = "delta_k,trial,method,topk_accuracy,linf,pairwise_linf,lambda_gap,d_max,wall_ms";

pub fn records_to_csv(records: &[TrialRecord]) -> String {
    let mut out = format!("{TRIAL_CSV_HEADER}\n");
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            fmt_g17(r.delta_k),
            r.trial,
            r.method,
            fmt_g17(r.topk_accuracy),
            fmt_g17(r.linf),
            fmt_g17(r.pairwise_linf),
            fmt_g17(r.lambda_gap),
            fmt_g17(r.d_max),
            fmt_g17(r.wall_ms)
        )
        .unwrap();
    }
    out
}

/// Runs `f` on a worker pool sized by [`THREADS_ENV`].
pub fn with_worker_pool<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map_err(|_| invalid(format!("{THREADS_ENV} must be a non-negative integer, got '{v}'")))?,
        _ => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Weighting used by one method plus its spectral summary.
struct Weighting {
    method: Method,
    weights: std::result::Result<WeightVector, String>,
    report: Option<SpectralReport>,
    setup_ms: f64,
}

fn summarize(g: &Graph, w: &WeightVector) -> Option<SpectralReport> {
    spectral_report(g, w).ok()
}

fn trial_graph(cfg: &ExperimentConfig, seed: u64, q_override: Option<f64>) -> Result<Graph> {
    match &cfg.adversary {
        Adversary::None => gen_er(cfg.n, cfg.p, seed),
        Adversary::Clique => apply_clique_adversary(&gen_er(cfg.n, cfg.p, seed)?, seed),
        Adversary::Cluster { sizes, p_within, q } => gen_cluster_graph(sizes, p_within, q_override.unwrap_or(*q), seed),
    }
}

fn elapsed_ms(cfg: &ExperimentConfig, start: Instant) -> f64 {
    if cfg.timing {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    }
}

fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<Vec<TrialRecord>> {
    let seed = derive_seed(cfg.seed, Domain::Trial, &[trial as u64]);
    let g = trial_graph(cfg, seed, None)?;
    let mut methods = cfg.methods.clone();
    methods.sort();
    methods.dedup();

    let weightings: Vec<Weighting> = methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let weights = match method {
                Method::VanillaEr => g.er_indicator().ok_or_else(|| "graph has no ER flags".to_string()),
                Method::VanillaSr => Ok(WeightVector::ones(g.m())),
                Method::WeightedSr => MmwuParams::new(cfg.n, cfg.p, cfg.eps, seed)
                    .map(|p| p.with_oracle(cfg.oracle))
                    .and_then(|p| reweight(&g, &p))
                    .map(|r| r.w_out)
                    .map_err(|e| e.to_string()),
            };
            let report = weights.as_ref().ok().and_then(|w| summarize(&g, w));
            Weighting {
                method,
                weights,
                report,
                setup_ms: elapsed_ms(cfg, start),
            }
        })
        .collect();

    let mut records = Vec::new();
    for &delta in &cfg.delta_grid {
        let b = gen_btl_scores(cfg.n, cfg.k_top, delta)?;
        let data = sample_comparisons(&g, &b, cfg.reps, seed)?;
        for wt in &weightings {
            let start = Instant::now();
            let metrics: Option<ErrorMetrics> = wt
                .weights
                .as_ref()
                .ok()
                .and_then(|w| solve_mle(&g, &data, w, &SolveOptions::default()).ok())
                .filter(|s| s.converged)
                .and_then(|s| error_metrics(&s.theta, &b, cfg.k_top).ok());
            let (name, m) = match metrics {
                Some(m) => (wt.method.name().to_string(), m),
                None => (
                    format!("{}:failed", wt.method.name()),
                    ErrorMetrics {
                        linf: f64::NAN,
                        pairwise_linf: f64::NAN,
                        topk_accuracy: f64::NAN,
                    },
                ),
            };
            records.push(TrialRecord {
                delta_k: delta,
                trial,
                method: name,
                topk_accuracy: m.topk_accuracy,
                linf: m.linf,
                pairwise_linf: m.pairwise_linf,
                lambda_gap: wt.report.map_or(f64::NAN, |r| r.lambda_gap),
                d_max: wt.report.map_or(f64::NAN, |r| r.d_max),
                wall_ms: if cfg.timing { wt.setup_ms + elapsed_ms(cfg, start) } else { 0.0 },
            });
        }
    }
    Ok(records)
}

fn sort_records(records: &mut [TrialRecord]) {
    records.sort_by(|a, b| {
        a.delta_k
            .total_cmp(&b.delta_k)
            .then(a.trial.cmp(&b.trial))
            .then(a.method.cmp(&b.method))
    });
}

/// The top-K sweep: every trial draws a graph, applies the adversary,
/// reweights it without looking at comparisons, then fits every method at
/// every score gap.
pub fn run_topk_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let per_trial: Vec<Result<Vec<TrialRecord>>> =
        with_worker_pool(|| (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, t)).collect())?;
    let mut records = Vec::new();
    for r in per_trial {
        records.extend(r?);
    }
    sort_records(&mut records);
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterRecord {
    pub q: f64,
    pub delta_k: f64,
    pub trial: usize,
    pub failed: bool,
    pub topk_accuracy: f64,
    pub linf: f64,
    pub pairwise_linf: f64,
    pub lambda_gap: f64,
    pub d_max: f64,
}

pub const CLUSTER_CSV_HEADER: &str = "q,delta_k,trial,method,topk_accuracy,linf,pairwise_linf,lambda_gap,d_max";

pub fn cluster_records_to_csv(records: &[ClusterRecord]) -> String {
    let mut out = format!("{CLUSTER_CSV_HEADER}\n");
    for r in records {
        let method = if r.failed { "vanilla:failed" } else { "vanilla" };
        writeln!(
            out,
            "{},{},{},{method},{},{},{},{},{}",
            fmt_g17(r.q),
            fmt_g17(r.delta_k),
            r.trial,
            fmt_g17(r.topk_accuracy),
            fmt_g17(r.linf),
            fmt_g17(r.pairwise_linf),
            fmt_g17(r.lambda_gap),
            fmt_g17(r.d_max)
        )
        .unwrap();
    }
    out
}

/// Unweighted MLE on cluster-sampled graphs for every `q` in the grid (or
/// the adversary's own `q`), every score gap and every trial.
pub fn run_cluster_experiment(cfg: &ExperimentConfig) -> Result<Vec<ClusterRecord>> {
    cfg.validate()?;
    let Adversary::Cluster { q, .. } = &cfg.adversary else {
        return Err(invalid("cluster experiment needs a cluster adversary"));
    };
    let qs = if cfg.q_grid.is_empty() { vec![*q] } else { cfg.q_grid.clone() };
    let jobs: Vec<(usize, usize)> = (0..qs.len()).flat_map(|qi| (0..cfg.trials).map(move |t| (qi, t))).collect();
    let per_job: Vec<Result<Vec<ClusterRecord>>> = with_worker_pool(|| {
        jobs.par_iter()
            .map(|&(qi, trial)| {
                let seed = derive_seed(cfg.seed, Domain::Trial, &[trial as u64, qi as u64]);
                let g = trial_graph(cfg, seed, Some(qs[qi]))?;
                let w = WeightVector::ones(g.m());
                let report = summarize(&g, &w);
                let mut out = Vec::new();
                for &delta in &cfg.delta_grid {
                    let b = gen_btl_scores(cfg.n, cfg.k_top, delta)?;
                    let data = sample_comparisons(&g, &b, cfg.reps, seed)?;
                    let m = solve_mle(&g, &data, &w, &SolveOptions::default())
                        .ok()
                        .filter(|s| s.converged)
                        .and_then(|s| error_metrics(&s.theta, &b, cfg.k_top).ok());
                    out.push(ClusterRecord {
                        q: qs[qi],
                        delta_k: delta,
                        trial,
                        failed: m.is_none(),
                        topk_accuracy: m.map_or(f64::NAN, |m| m.topk_accuracy),
                        linf: m.map_or(f64::NAN, |m| m.linf),
                        pairwise_linf: m.map_or(f64::NAN, |m| m.pairwise_linf),
                        lambda_gap: report.map_or(f64::NAN, |r| r.lambda_gap),
                        d_max: report.map_or(f64::NAN, |r| r.d_max),
                    });
                }
                Ok(out)
            })
            .collect()
    })?;
    let mut records = Vec::new();
    for r in per_job {
        records.extend(r?);
    }
    records.sort_by(|a, b| {
        a.q.total_cmp(&b.q)
            .then(a.delta_k.total_cmp(&b.delta_k))
            .then(a.trial.cmp(&b.trial))
    });
    Ok(records)
}

/// Targets checked by [`diagnose`]: `w_max ≤ 1`, `d_max ≤ 2np` and
/// `λ_{n-1} ≥ gap_factor·np`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub p: f64,
    pub gap_factor: f64,
}

impl Thresholds {
    pub fn new(p: f64) -> Self {
        Self { p, gap_factor: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnoseReport {
    pub n: usize,
    pub m: usize,
    pub spectral: SpectralReport,
    pub connected: bool,
    pub unit_weights_assumed: bool,
    pub checks: Vec<Check>,
}

impl DiagnoseReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// `key=value` lines.
    pub fn render(&self) -> String {
        let s = &self.spectral;
        let mut out = String::new();
        writeln!(out, "n={}", self.n).unwrap();
        writeln!(out, "m={}", self.m).unwrap();
        if self.unit_weights_assumed {
            writeln!(out, "weights=unit (no weights file given)").unwrap();
        }
        for (k, v) in [
            ("lambda_gap", s.lambda_gap),
            ("d_max", s.d_max),
            ("d_min", s.d_min),
            ("w_max", s.w_max),
            ("conductance_lb", s.conductance_lb),
        ] {
            writeln!(out, "{k}={}", fmt_g17(v)).unwrap();
        }
        writeln!(out, "connected={}", self.connected).unwrap();
        for c in &self.checks {
            writeln!(
                out,
                "check.{}={} (value {}, bound {})",
                c.name,
                if c.pass { "pass" } else { "fail" },
                fmt_g17(c.value),
                fmt_g17(c.bound)
            )
            .unwrap();
        }
        writeln!(out, "overall={}", if self.passed() { "pass" } else { "fail" }).unwrap();
        out
    }
}

/// Spectral summary of `(g, w)` against the targets; unit weights when `w`
/// is absent.
pub fn diagnose(g: &Graph, w: Option<&WeightVector>, t: &Thresholds) -> Result<DiagnoseReport> {
    if !(t.p > 0.0 && t.p <= 1.0) {
        return Err(invalid(format!("p must lie in (0, 1], got {}", t.p)));
    }
    let unit = WeightVector::ones(g.m());
    let w = w.unwrap_or(&unit);
    g.check_weights(w)?;
    let spectral = spectral_report(g, w)?;
    let np = g.n() as f64 * t.p;
    let connected = is_connected(g, w, DEFAULT_CONNECTIVITY_TOL);
    let checks = vec![
        Check {
            name: "w_max",
            value: spectral.w_max,
            bound: 1.0,
            pass: spectral.w_max <= 1.0 + 1e-9,
        },
        Check {
            name: "d_max",
            value: spectral.d_max,
            bound: 2.0 * np,
            pass: spectral.d_max <= 2.0 * np + 1e-9,
        },
        Check {
            name: "lambda_gap",
            value: spectral.lambda_gap,
            bound: t.gap_factor * np,
            pass: spectral.lambda_gap >= t.gap_factor * np,
        },
        Check {
            name: "connected",
            value: connected as u8 as f64,
            bound: 1.0,
            pass: connected,
        },
    ];
    Ok(DiagnoseReport {
        n: g.n(),
        m: g.m(),
        spectral,
        connected,
        unit_weights_assumed: std::ptr::eq(w, &unit),
        checks,
    })
}
