use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use semirank::experiment::{
    cluster_records_to_csv, records_to_csv, with_worker_pool, ConfigOverrides, ExperimentConfig,
};
use semirank::io::{
    fmt_g17, parse_comparisons, parse_edge_list, parse_theta_csv, write_comparisons, write_edge_list,
    write_theta_csv, EdgeList,
};
use semirank::{
    apply_clique_adversary, diagnose, gen_btl_scores, gen_cluster_graph, gen_er, reweight, run_cluster_experiment,
    run_topk_experiment, sample_comparisons, solve_mle, top_k, BtlInstance, Error, MmwuParams, OracleKind,
    SketchMode, SolveMethod, SolveOptions, Thresholds,
};

#[derive(Parser, Debug)]
#[command(name = "semirank", version, about = "Spectral reweighting and weighted BTL ranking on semi-random graphs")]
struct Cli {
    /// Master seed; every random draw derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat JSON file with default parameter values; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress the summary printed on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a comparison graph and write it as an edge list.
    Generate(GenerateArgs),
    /// Draw BTL comparison outcomes on a graph.
    Sample(SampleArgs),
    /// Reweight a graph with MMWU and write the weights as an edge list.
    Reweight(ReweightArgs),
    /// Fit the (weighted) BTL maximum-likelihood scores.
    Solve(SolveArgs),
    /// Run the top-K sweep or the cluster study and write a CSV.
    Experiment(ExperimentArgs),
    /// Print spectral diagnostics of a (weighted) graph.
    Diagnose(DiagnoseArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum AdversaryArg {
    None,
    Clique,
    Cluster,
}

impl AdversaryArg {
    fn name(self) -> &'static str {
        match self {
            AdversaryArg::None => "none",
            AdversaryArg::Clique => "clique",
            AdversaryArg::Cluster => "cluster",
        }
    }
}

#[derive(Args, Debug, Default)]
struct ModelArgs {
    #[arg(long)]
    n: Option<usize>,
    /// ER edge probability.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, value_enum)]
    adversary: Option<AdversaryArg>,
    #[arg(long, value_delimiter = ',')]
    cluster_sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    cluster_p_within: Option<Vec<f64>>,
    #[arg(long)]
    cluster_q: Option<f64>,
}

impl ModelArgs {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            n: self.n,
            p: self.p,
            adversary: self.adversary.map(|a| a.name().to_string()),
            cluster_sizes: self.cluster_sizes.clone(),
            cluster_p_within: self.cluster_p_within.clone(),
            cluster_q: self.cluster_q,
            ..ConfigOverrides::default()
        }
    }
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args, Debug)]
struct SampleArgs {
    /// Edge-list file.
    #[arg(long)]
    graph: PathBuf,
    /// Number of top items.
    #[arg(long = "k", alias = "K")]
    k_top: Option<usize>,
    /// Comparisons per edge.
    #[arg(long = "l", alias = "L")]
    reps: Option<usize>,
    /// Score gap between ranks K and K+1 (default: the largest grid value).
    #[arg(long)]
    delta: Option<f64>,
    /// Use these scores (vertex,theta CSV) instead of the two-level profile.
    #[arg(long)]
    theta: Option<PathBuf>,
    /// Also write the true scores to this CSV.
    #[arg(long)]
    theta_out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum OracleArg {
    Greedy,
    Lp,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum SketchArg {
    Auto,
    Jl,
    Exact,
}

#[derive(Args, Debug)]
struct ReweightArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, value_enum)]
    oracle: Option<OracleArg>,
    #[arg(long, value_enum, default_value = "auto")]
    sketch: SketchArg,
    /// Override the number of MMWU iterations.
    #[arg(long)]
    iterations: Option<usize>,
    /// Constant in the sketch dimension k = ceil(c·ln n / eps²).
    #[arg(long)]
    c_jl: Option<f64>,
    /// Write the key=value report here instead of stderr.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Include wall-clock time in the report.
    #[arg(long)]
    timing: bool,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum MethodArg {
    Newton,
    Gd,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    comparisons: PathBuf,
    /// Weighted edge list over the same edges (unit weights when absent).
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "newton")]
    method: MethodArg,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Also report the top-k set on stderr.
    #[arg(long = "k", alias = "K")]
    k_top: Option<usize>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum KindArg {
    Topk,
    Cluster,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(long, value_enum, default_value = "topk")]
    kind: KindArg,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long = "k", alias = "K")]
    k_top: Option<usize>,
    #[arg(long = "l", alias = "L")]
    reps: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    delta_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    q_grid: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    /// Comma-separated subset of vanilla_er, vanilla_sr, weighted_sr.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long, value_enum)]
    oracle: Option<OracleArg>,
    /// Record wall-clock time per row (breaks byte-reproducibility).
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Weighted edge list over the same edges.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// ER edge probability the thresholds refer to.
    #[arg(long)]
    p: Option<f64>,
    /// Required spectral gap as a multiple of n·p.
    #[arg(long, default_value_t = 0.5)]
    gap_factor: f64,
}

/// Failure with its exit status: 1 for usage and input errors, 2 when a
/// solver fails on valid input.
struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Disconnected { .. }
            | Error::IsolatedVertex(_)
            | Error::ExpActionNotConverged { .. }
            | Error::PackingBudgetExceeded(_)
            | Error::Divergence { .. }
            | Error::NoFiniteMinimizer { .. } => 2,
            _ => 1,
        };
        Failure { code, msg: e.to_string() }
    }
}

fn input_error(msg: impl Into<String>) -> Failure {
    Failure { code: 1, msg: msg.into() }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn with_path<T>(path: &Path, r: semirank::Result<T>) -> CliResult<T> {
    r.map_err(|e| {
        let mut f = Failure::from(e);
        f.msg = format!("{}: {}", path.display(), f.msg);
        f
    })
}

fn load_graph(path: &Path) -> CliResult<EdgeList> {
    with_path(path, parse_edge_list(&read(path)?))
}

/// Weights from a separate edge list, checked to cover the same edges.
fn load_weights(graph: &EdgeList, path: Option<&Path>) -> CliResult<semirank::WeightVector> {
    let Some(path) = path else {
        return Ok(graph.weights.clone());
    };
    let wl = load_graph(path)?;
    if wl.graph.n() != graph.graph.n() || wl.graph.edges() != graph.graph.edges() {
        return Err(input_error(format!("{}: edges differ from the graph file", path.display())));
    }
    Ok(wl.weights)
}

struct Ctx {
    seed: u64,
    out: Option<PathBuf>,
    quiet: bool,
    file: ConfigOverrides,
}

impl Ctx {
    fn emit(&self, text: &str) -> CliResult<()> {
        match &self.out {
            Some(p) => std::fs::write(p, text).map_err(|e| input_error(format!("{}: {e}", p.display()))),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn note(&self, text: &str) {
        if !self.quiet {
            eprint!("{text}");
        }
    }

    /// Config file values overridden by flags, then by `--seed`.
    fn config(&self, flags: ConfigOverrides) -> CliResult<ExperimentConfig> {
        let mut merged = self.file.clone().merge(flags);
        merged.seed = Some(self.seed);
        Ok(ExperimentConfig::from_overrides(&merged)?)
    }
}

fn oracle(o: Option<OracleArg>) -> Option<OracleKind> {
    o.map(|o| match o {
        OracleArg::Greedy => OracleKind::Greedy,
        OracleArg::Lp => OracleKind::Lp,
    })
}

fn generate(ctx: &Ctx, a: &GenerateArgs) -> CliResult<()> {
    let cfg = ctx.config(a.model.overrides())?;
    let g = match &cfg.adversary {
        semirank::Adversary::None => gen_er(cfg.n, cfg.p, cfg.seed)?,
        semirank::Adversary::Clique => apply_clique_adversary(&gen_er(cfg.n, cfg.p, cfg.seed)?, cfg.seed)?,
        semirank::Adversary::Cluster { sizes, p_within, q } => gen_cluster_graph(sizes, p_within, *q, cfg.seed)?,
    };
    ctx.emit(&write_edge_list(&g, None)?)?;
    ctx.note(&format!("n={} m={}\n", g.n(), g.m()));
    Ok(())
}

fn sample(ctx: &Ctx, a: &SampleArgs) -> CliResult<()> {
    let el = load_graph(&a.graph)?;
    let g = &el.graph;
    let cfg = ctx.config(ConfigOverrides {
        n: Some(g.n()),
        k_top: a.k_top,
        reps: a.reps,
        adversary: Some("none".into()),
        ..ConfigOverrides::default()
    })?;
    let b = match &a.theta {
        Some(path) => BtlInstance::new(with_path(path, parse_theta_csv(&read(path)?))?, cfg.k_top)?,
        None => {
            let delta = a.delta.unwrap_or(*cfg.delta_grid.last().expect("validated non-empty"));
            gen_btl_scores(g.n(), cfg.k_top, delta)?
        }
    };
    if b.n() != g.n() {
        return Err(input_error(format!("scores cover {} items, graph has {} vertices", b.n(), g.n())));
    }
    let data = sample_comparisons(g, &b, cfg.reps, cfg.seed)?;
    ctx.emit(&write_comparisons(g, &data)?)?;
    if let Some(path) = &a.theta_out {
        std::fs::write(path, write_theta_csv(b.theta_star()))
            .map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    }
    ctx.note(&format!("edges={} L={} delta_k={}\n", g.m(), cfg.reps, fmt_g17(b.delta_k())));
    Ok(())
}

fn reweight_cmd(ctx: &Ctx, a: &ReweightArgs) -> CliResult<()> {
    let el = load_graph(&a.graph)?;
    let g = &el.graph;
    let p = a.p.or(ctx.file.p).ok_or_else(|| input_error("reweight needs --p"))?;
    let eps = a.eps.or(ctx.file.eps).unwrap_or(ExperimentConfig::default().eps);
    let mut params = MmwuParams::new(g.n(), p, eps, ctx.seed)?
        .with_oracle(oracle(a.oracle).or(ctx.file.oracle).unwrap_or(OracleKind::Greedy))
        .with_sketch(match a.sketch {
            SketchArg::Auto => SketchMode::Auto,
            SketchArg::Jl => SketchMode::Jl,
            SketchArg::Exact => SketchMode::Exact,
        });
    if let Some(c) = a.c_jl {
        params = params.with_c_jl(c);
    }
    if let Some(t) = a.iterations {
        params = params.with_iterations(t);
    }
    params.validate()?;
    let r = reweight(g, &params)?;
    ctx.emit(&write_edge_list(g, Some(&r.w_out))?)?;

    let mut report = String::new();
    for (k, v) in [
        ("lambda_gap", fmt_g17(r.lambda_gap)),
        ("feasible", r.feasible.to_string()),
        ("iterations", r.iterations.to_string()),
        ("eta", fmt_g17(params.eta)),
        ("k", params.k.to_string()),
        ("budget", params.budget().to_string()),
        ("exact_density", r.exact_density.to_string()),
        ("oracle_fallbacks", r.oracle_fallbacks.to_string()),
        ("w_max", fmt_g17(r.w_out.max())),
    ] {
        writeln!(report, "{k}={v}").unwrap();
    }
    if a.timing {
        writeln!(report, "wall_ms={}", fmt_g17(r.wall_time.as_secs_f64() * 1e3)).unwrap();
    }
    match &a.report {
        Some(path) => std::fs::write(path, report).map_err(|e| input_error(format!("{}: {e}", path.display())))?,
        None => ctx.note(&report),
    }
    Ok(())
}

fn solve(ctx: &Ctx, a: &SolveArgs) -> CliResult<()> {
    let el = load_graph(&a.graph)?;
    let g = &el.graph;
    let w = load_weights(&el, a.weights.as_deref())?;
    let data = with_path(&a.comparisons, parse_comparisons(&read(&a.comparisons)?, g))?;
    let mut opts = SolveOptions {
        method: match a.method {
            MethodArg::Newton => SolveMethod::DampedNewton,
            MethodArg::Gd => SolveMethod::PrecondGd,
        },
        ..SolveOptions::default()
    };
    if let Some(m) = a.max_iters {
        opts.max_iters = m;
    }
    let sol = solve_mle(g, &data, &w, &opts)?;
    if !sol.converged {
        return Err(Failure {
            code: 2,
            msg: format!(
                "MLE did not converge in {} iterations (gradient norm {})",
                sol.iters,
                fmt_g17(sol.grad_norm)
            ),
        });
    }
    ctx.emit(&write_theta_csv(&sol.theta))?;
    let mut note = format!("converged=true iters={} grad_norm={}\n", sol.iters, fmt_g17(sol.grad_norm));
    if let Some(k) = a.k_top {
        let top: Vec<String> = top_k(&sol.theta, k).iter().map(|v| v.to_string()).collect();
        writeln!(note, "top_k={}", top.join(",")).unwrap();
    }
    ctx.note(&note);
    Ok(())
}

fn experiment(ctx: &Ctx, a: &ExperimentArgs) -> CliResult<()> {
    let mut flags = a.model.overrides();
    flags.k_top = a.k_top;
    flags.reps = a.reps;
    flags.delta_grid = a.delta_grid.clone();
    flags.q_grid = a.q_grid.clone();
    flags.trials = a.trials;
    flags.eps = a.eps;
    flags.methods = a.methods.clone();
    flags.oracle = oracle(a.oracle);
    if a.timing {
        flags.timing = Some(true);
    }
    let cfg = ctx.config(flags)?;
    let csv = match a.kind {
        KindArg::Topk => {
            let recs = run_topk_experiment(&cfg)?;
            let failed = recs.iter().filter(|r| r.failed()).count();
            ctx.note(&format!("rows={} failed={failed}\n", recs.len()));
            records_to_csv(&recs)
        }
        KindArg::Cluster => {
            let recs = run_cluster_experiment(&cfg)?;
            let failed = recs.iter().filter(|r| r.failed).count();
            ctx.note(&format!("rows={} failed={failed}\n", recs.len()));
            cluster_records_to_csv(&recs)
        }
    };
    ctx.emit(&csv)
}

fn diagnose_cmd(ctx: &Ctx, a: &DiagnoseArgs) -> CliResult<()> {
    let el = load_graph(&a.graph)?;
    let p = a.p.or(ctx.file.p).ok_or_else(|| input_error("diagnose needs --p"))?;
    let w = match &a.weights {
        Some(path) => Some(load_weights(&el, Some(path))?),
        None => None,
    };
    let t = Thresholds {
        p,
        gap_factor: a.gap_factor,
    };
    let report = diagnose(&el.graph, w.as_ref(), &t)?;
    ctx.emit(&report.render())
}

fn run(cli: Cli) -> CliResult<()> {
    let file = match &cli.config {
        Some(path) => with_path(path, ConfigOverrides::from_json(&read(path)?))?,
        None => ConfigOverrides::default(),
    };
    let ctx = Ctx {
        seed: cli.seed.or(file.seed).unwrap_or(0),
        out: cli.out,
        quiet: cli.quiet,
        file,
    };
    let command = cli.command;
    let result = with_worker_pool(|| match &command {
        Command::Generate(a) => generate(&ctx, a),
        Command::Sample(a) => sample(&ctx, a),
        Command::Reweight(a) => reweight_cmd(&ctx, a),
        Command::Solve(a) => solve(&ctx, a),
        Command::Experiment(a) => experiment(&ctx, a),
        Command::Diagnose(a) => diagnose_cmd(&ctx, a),
    })?;
    result
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
