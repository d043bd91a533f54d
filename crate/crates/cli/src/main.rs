use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use pgk_core::complexity::{self, ComplexityBudget};
use pgk_core::experiments::{self, ExperimentConfig, ExperimentOutput, Task};
use pgk_core::kernels::verify_pgk;
use pgk_core::rkhs::{
    empirical_error, expected_error_estimate, generalization_bound, BoundVariant, RkhsBoundInputs,
};
use pgk_core::{Error, FejerSeries, KernelKind, KernelSpec, ParamPoint, ParamSpace, TrainingSet};

const EXIT_CONFIG: u8 = 2;
const EXIT_CHECK: u8 = 3;

#[derive(Parser)]
#[command(
    name = "pgk",
    version,
    about = "Positive-good-kernel learning on the quantum XY chain"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check positivity, normalization and tail decay of kernels.
    VerifyKernels(VerifyArgs),
    /// Learn the ground-state energy per site over the field axis.
    LearnEnergy(ExperimentArgs),
    /// Learn the long-range XX order over the field axis (m = 1) or field and anisotropy (m = 2).
    LearnCorrelation(ExperimentArgs),
    /// Learn ground-state density matrices of a small chain.
    LearnDensity(ExperimentArgs),
    /// Run the experiment described by a config file, whatever its task.
    Scaling(ExperimentArgs),
    /// Print the sample-complexity table for one budget.
    Complexity(ComplexityArgs),
    /// Compare measured errors against the RKHS generalization bounds.
    RkhsBound(RkhsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelName {
    Fejer,
    Dirichlet,
    Gaussian,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON file with the experiment fields; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    kernel: Option<KernelName>,
    #[arg(long)]
    lambda: Option<u32>,
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Box dimension.
    #[arg(long)]
    m: Option<usize>,
    /// Box side length.
    #[arg(long)]
    side: Option<f64>,
    /// Number of qubits.
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long)]
    coupling: Option<f64>,
    /// Anisotropy used when it is not a box axis.
    #[arg(long)]
    gamma: Option<f64>,
    /// Field range as `lo,hi`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    h_range: Option<Vec<f64>>,
    /// Anisotropy range as `lo,hi` (m = 2).
    #[arg(long, value_delimiter = ',', num_args = 2)]
    gamma_range: Option<Vec<f64>>,
    /// Training-set sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    sweep: Option<Vec<usize>>,
    #[arg(long)]
    runs: Option<usize>,
    /// Evaluation grid points per dimension.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Divide predictions by their trace.
    #[arg(long)]
    renormalize: bool,
    /// Leave grid points with `lo <= |h/J| <= hi` out of the error, as `lo,hi`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    exclude_abs_h: Option<Vec<f64>>,
    /// Training-set size of the comparison curve.
    #[arg(long)]
    curve_n: Option<usize>,
    /// Output stem for `<stem>.csv`, `<stem>.json` and `<stem>.curve.csv`.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Exit with status 3 when the run misses its acceptance thresholds.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "fejer")]
    kernel: KernelName,
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long, default_value_t = 2.0)]
    side: f64,
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64,128,256")]
    lambdas: Vec<u32>,
    /// Gaussian bandwidths as fractions of the side length.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1,0.2")]
    bandwidths: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5")]
    etas: Vec<f64>,
    /// Quadrature cells per dimension (raised automatically for large indices).
    #[arg(long, default_value_t = 4096)]
    quadrature: usize,
    /// Exit with status 3 unless positive kernels pass and the Dirichlet kernel fails.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct ComplexityArgs {
    #[arg(long, default_value_t = 2)]
    m: usize,
    /// Bound `B` on the labels (the comparison uses `B = M`).
    #[arg(long, default_value_t = 100.0)]
    b: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Failure probability; ignored while `--log-factor` is set.
    #[arg(long)]
    delta: Option<f64>,
    /// Value replacing `ln(2/delta)`; defaults to 1 unless `--delta` is given.
    #[arg(long)]
    log_factor: Option<f64>,
    #[arg(long)]
    side: Option<f64>,
    #[arg(long)]
    c_l: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    /// Number of local terms; defaults to `B`.
    #[arg(long)]
    terms: Option<usize>,
    #[arg(long)]
    json: bool,
    /// Exit with status 3 unless the kernel bounds beat the prior bound.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct RkhsArgs {
    #[arg(long, default_value_t = 50)]
    lambda: u32,
    /// Training-set size.
    #[arg(long, default_value_t = 10_000)]
    n_train: usize,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 30)]
    runs: usize,
    /// Fresh points per run for the expected-error estimate.
    #[arg(long, default_value_t = 2000)]
    test_points: usize,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// Exit with status 3 if a measured error exceeds the main bound.
    #[arg(long)]
    check: bool,
}

/// Run failure with its exit status.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let code = match error.downcast_ref::<Error>() {
            Some(Error::Config(_)) => EXIT_CONFIG,
            _ => 1,
        };
        Failure { code, error }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

fn config_error(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        error: Error::Config(msg.into()).into(),
    }
}

type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::VerifyKernels(a) => verify_kernels(&a),
        Command::LearnEnergy(a) => learn(&a, Some(Task::Energy)),
        Command::LearnCorrelation(a) => learn(&a, Some(Task::Correlation)),
        Command::LearnDensity(a) => learn(&a, Some(Task::Density)),
        Command::Scaling(a) => learn(&a, None),
        Command::Complexity(a) => complexity_table(&a),
        Command::RkhsBound(a) => rkhs_bound(&a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("check failed");
            ExitCode::from(EXIT_CHECK)
        }
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn base_config(args: &ExperimentArgs, task: Option<Task>) -> Result<ExperimentConfig, Failure> {
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        if let Some(t) = task {
            if cfg.task != t {
                return Err(config_error(format!(
                    "config task is {:?}, expected {t:?}",
                    cfg.task
                )));
            }
        }
        return Ok(cfg);
    }
    Ok(match task {
        Some(Task::Energy) => ExperimentConfig::energy_default(),
        Some(Task::Correlation) if args.m == Some(2) => ExperimentConfig::correlation_2d_default(),
        Some(Task::Correlation) => ExperimentConfig::correlation_1d_default(),
        Some(Task::Density) => ExperimentConfig::density_default(),
        None => return Err(config_error("scaling needs --config")),
    })
}

fn pair(v: &[f64]) -> (f64, f64) {
    (v[0], v[1])
}

fn apply_overrides(cfg: &mut ExperimentConfig, a: &ExperimentArgs) -> Result<(), Failure> {
    if let Some(m) = a.m {
        if m != cfg.m {
            match m {
                1 => cfg.axes.truncate(1),
                2 => cfg.axes.push(experiments::Axis::mirror(0.0, 1.0)),
                _ => return Err(config_error(format!("m must be 1 or 2, got {m}"))),
            }
            cfg.m = m;
        }
    }
    let kernel = match (a.kernel, &cfg.kernel) {
        (Some(KernelName::Gaussian), _) | (None, KernelKind::GaussianPeriodic { .. }) => {
            let current = match cfg.kernel {
                KernelKind::GaussianPeriodic { bandwidth } => bandwidth,
                _ => 0.01 * cfg.side,
            };
            KernelKind::GaussianPeriodic {
                bandwidth: a.bandwidth.unwrap_or(current),
            }
        }
        (name, kind) => {
            let lambda = a.lambda.or_else(|| kind_lambda(kind)).unwrap_or(50);
            match name.unwrap_or(match kind {
                KernelKind::Dirichlet { .. } => KernelName::Dirichlet,
                _ => KernelName::Fejer,
            }) {
                KernelName::Dirichlet => KernelKind::Dirichlet { lambda },
                _ => KernelKind::Fejer { lambda },
            }
        }
    };
    cfg.kernel = kernel;
    if let Some(v) = a.side {
        cfg.side = v;
    }
    if let Some(v) = a.qubits {
        cfg.model.n = v;
    }
    if let Some(v) = a.coupling {
        cfg.model.j = v;
    }
    if let Some(v) = a.gamma {
        cfg.model.gamma = v;
    }
    if let Some(v) = &a.h_range {
        cfg.axes[0].range = pair(v);
    }
    if let Some(v) = &a.gamma_range {
        let axis = cfg
            .axes
            .get_mut(1)
            .ok_or_else(|| config_error("--gamma-range needs m = 2"))?;
        axis.range = pair(v);
    }
    if let Some(v) = &a.sweep {
        cfg.sweep = v.clone();
    }
    if let Some(v) = a.runs {
        cfg.runs = v;
    }
    if let Some(v) = a.grid {
        cfg.grid = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if a.renormalize {
        cfg.renormalize = true;
    }
    if let Some(v) = &a.exclude_abs_h {
        cfg.exclude_abs_h = Some(pair(v));
    }
    if let Some(v) = a.curve_n {
        cfg.curve_n = Some(v);
    }
    if let Some(v) = &a.output {
        cfg.output = Some(v.clone());
    }
    Ok(())
}

fn kind_lambda(kind: &KernelKind) -> Option<u32> {
    match kind {
        KernelKind::Fejer { lambda } | KernelKind::Dirichlet { lambda } => Some(*lambda),
        KernelKind::Weighted { base } => kind_lambda(base),
        KernelKind::GaussianPeriodic { .. } => None,
    }
}

fn learn(args: &ExperimentArgs, task: Option<Task>) -> Outcome {
    let mut cfg = base_config(args, task)?;
    apply_overrides(&mut cfg, args)?;
    cfg.validate()?;
    let out = experiments::run_experiment(&cfg)?;
    print_summary(&out);
    if let Some(stem) = &cfg.output {
        let files = experiments::write_outputs(&out, stem)?;
        println!("wrote {}", files.rows.display());
        println!("wrote {}", files.sidecar.display());
        if let Some(c) = files.curve {
            println!("wrote {}", c.display());
        }
    }
    Ok(!args.check || meets_thresholds(&out))
}

fn print_summary(out: &ExperimentOutput) {
    println!(
        "{:>10} {:>12} {:>12} {:>12} {:>12}",
        "N", "mean_sup", "std_err", "median_sup", "trace_dev"
    );
    for s in &out.result.summary {
        println!(
            "{:>10} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
            s.n, s.mean_sup_error, s.std_error, s.median_sup_error, s.mean_trace_max_dev
        );
    }
    if let Some(f) = out.result.fit {
        println!(
            "fit: slope {:.4}, intercept {:.4}, r2 {:.4}",
            f.slope, f.intercept, f.r_squared
        );
    }
}

/// Thresholds of the reference runs for each task.
fn meets_thresholds(out: &ExperimentOutput) -> bool {
    let cfg = &out.config;
    let summary = &out.result.summary;
    let slope_ok = |r2: f64| {
        out.result
            .fit
            .is_some_and(|f| (0.35..=0.55).contains(&f.slope) && f.r_squared >= r2)
    };
    match cfg.task {
        Task::Energy => slope_ok(0.95),
        Task::Correlation if cfg.m == 2 => slope_ok(0.90),
        Task::Correlation => summary.last().is_some_and(|s| s.mean_sup_error <= 0.02),
        Task::Density => {
            let med: Vec<f64> = summary.iter().map(|s| s.median_sup_error).collect();
            let tr: Vec<f64> = summary.iter().map(|s| s.median_trace_max_dev).collect();
            med.windows(2).all(|w| w[1] <= w[0]) && tr.windows(2).all(|w| w[1] <= w[0])
        }
    }
}

fn verify_kernels(a: &VerifyArgs) -> Outcome {
    let space = ParamSpace::uniform(a.m, a.side).map_err(|e| config_error(e.to_string()))?;
    let kinds: Vec<KernelKind> = match a.kernel {
        KernelName::Fejer => a
            .lambdas
            .iter()
            .map(|&lambda| KernelKind::Fejer { lambda })
            .collect(),
        KernelName::Dirichlet => a
            .lambdas
            .iter()
            .map(|&lambda| KernelKind::Dirichlet { lambda })
            .collect(),
        KernelName::Gaussian => a
            .bandwidths
            .iter()
            .map(|&f| KernelKind::GaussianPeriodic {
                bandwidth: f * a.side,
            })
            .collect(),
    };
    let mut ok = true;
    for kind in kinds {
        let spec = KernelSpec::new(kind.clone(), space.clone())
            .map_err(|e| config_error(e.to_string()))?;
        let report = verify_pgk(&spec, &a.etas, a.quadrature)?;
        ok &= report.passed == spec.is_positive();
        let line =
            serde_json::json!({ "kernel": kind, "m": a.m, "side": a.side, "report": report });
        println!("{line}");
    }
    Ok(!a.check || ok)
}

fn complexity_table(a: &ComplexityArgs) -> Outcome {
    let mut budget = ComplexityBudget::comparison(a.m, a.b, a.epsilon);
    if let Some(d) = a.delta {
        budget.delta = d;
        budget.log_factor = None;
    }
    if let Some(f) = a.log_factor {
        budget.log_factor = Some(f);
    }
    if let Some(v) = a.side {
        budget.side = v;
    }
    if let Some(v) = a.c_l {
        budget.c_l = v;
    }
    if let Some(v) = a.k {
        budget.k = v;
    }
    if let Some(v) = a.terms {
        budget.m_terms = v;
    }
    budget.check().map_err(|e| config_error(e.to_string()))?;
    let r = complexity::report(&budget)?;
    if a.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&r).context("serializing report")?
        );
    } else {
        println!("{:<24} {:>14}", "quantity", "value");
        let row = |name: &str, v: String| println!("{name:<24} {v:>14}");
        row("eta", format!("{:.6e}", r.eta));
        row("C", format!("{:.6e}", r.c));
        row("lambda_min", r.lambda_min.to_string());
        row("log10 N_fejer", format!("{:.3}", r.n_fejer.log10));
        row(
            "log10 N_fejer (M terms)",
            format!("{:.3}", r.n_fejer_multi.log10),
        );
        if let (Some(c), Some(n)) = (r.c_gaussian, r.n_gaussian) {
            row("C_gaussian", format!("{c:.6e}"));
            row("log10 N_gaussian", format!("{:.3}", n.log10));
        }
        row("log10 N_prior", format!("{:.3}", r.n_prior.log10));
        row("log10 ratio fejer", format!("{:.3}", r.ratio_fejer.log10));
        if let Some(g) = r.ratio_gaussian {
            row("log10 ratio gaussian", format!("{:.3}", g.log10));
        }
    }
    let beats = r.ratio_fejer.log10 < 0.0 && r.ratio_gaussian.is_none_or(|g| g.log10 < 0.0);
    Ok(!a.check || beats)
}

fn rkhs_bound(a: &RkhsArgs) -> Outcome {
    let mut cfg = ExperimentConfig::energy_default();
    cfg.kernel = KernelKind::Fejer { lambda: a.lambda };
    cfg.seed = a.seed;
    cfg.validate()?;
    if a.runs == 0 || a.n_train == 0 || a.test_points == 0 {
        return Err(config_error(
            "runs, n-train and test-points must be positive",
        ));
    }
    let space = cfg.space()?;
    let spec = cfg.kernel_spec()?;
    let truth = |x: &ParamPoint| cfg.scalar_truth(x.coords());
    let sup = space
        .grid(2000)?
        .iter()
        .map(|x| truth(x).map(f64::abs))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let inputs = RkhsBoundInputs::for_kernel(&spec, 2.0 * sup, a.n_train, a.delta)
        .map_err(|e| config_error(e.to_string()))?;
    println!(
        "B = {:.4}, R^2 = {:.1}, lambda_f = {:.4}, beta = {:.4}, tr K = {:.1}",
        2.0 * sup,
        inputs.r * inputs.r,
        inputs.lambda_f,
        inputs.beta,
        inputs.trace_k
    );
    println!(
        "{:>4} {:>12} {:>12} {:>12} {:>12}",
        "run", "E_t", "E_p", "main", "appendix"
    );
    let mut ok = true;
    for run in 0..a.runs {
        let seed = experiments::derive_seed(a.seed, 0, run);
        let set = TrainingSet::sample(&space, a.n_train, seed, truth)?;
        let series = FejerSeries::fit(&spec, set.points(), &[set.labels().to_vec()])?;
        let predictor = |x: &ParamPoint| Ok(series.eval(x.coords())?[0]);
        let e_t = empirical_error(&set, predictor)?;
        let test = space.sample(a.test_points, seed ^ 0x5bd1_e995)?;
        let e_p = expected_error_estimate(&test, predictor, |x| truth(x).unwrap_or(f64::NAN))?;
        let main = generalization_bound(&inputs, e_t, BoundVariant::MainText);
        let appendix = generalization_bound(&inputs, e_t, BoundVariant::Appendix);
        ok &= e_p <= main;
        println!("{run:>4} {e_t:>12.6} {e_p:>12.6} {main:>12.6} {appendix:>12.6}");
    }
    Ok(!a.check || ok)
}
