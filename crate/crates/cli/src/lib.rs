//! The `adaspider` command line: `run`, `sweep`, `verify` and `gradcheck`.
//!
//! Exit codes: 0 success, 1 a check failed, 2 usage or configuration
//! error, 3 runtime failure. Standard output carries only data.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use adaspider::harness::{
    emit_records, run_on, sweep_on, write_records, Budget, ExperimentConfig, Format, DEFAULT_SWEEP_GRID,
};
use adaspider::optimizers::{Algorithm, AlgorithmId};
use adaspider::verify::{gradcheck, run_suite, GradFault, Rhs, Suite, DEFAULT_GRADCHECK_POINTS};
use adaspider::Error;
use clap::{Args, Parser, Subcommand};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Default directory for output files when neither `--out` nor the config
/// names one.
pub const OUT_DIR_ENV: &str = "ADASPIDER_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "adaspider",
    version,
    about = "Adaptive SPIDER and variance-reduced baselines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every configured algorithm over all seeds and emit records.
    Run(RunArgs),
    /// Tune one algorithm's step scale over a grid.
    Sweep(SweepArgs),
    /// Check the analysis inequalities numerically.
    Verify(VerifyArgs),
    /// Compare analytic gradients with central differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// Experiment config (JSON); the bundled synthetic problem otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Fixed number of steps per run.
    #[arg(long, conflicts_with = "epochs")]
    steps: Option<usize>,
    /// Oracle budget in full passes per run.
    #[arg(long)]
    epochs: Option<f64>,
    #[arg(long)]
    beta0: Option<f64>,
    #[arg(long)]
    g0: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    smoothness: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    format: Option<Format>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Algorithms to run (comma separated), replacing the config's list.
    #[arg(long, value_delimiter = ',')]
    algo: Vec<String>,
    #[command(flatten)]
    common: ExperimentArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    algo: String,
    /// Comma-separated scales; `1e-3,…,1e3` by default.
    #[arg(long, value_delimiter = ',')]
    grid: Vec<f64>,
    #[command(flatten)]
    common: ExperimentArgs,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Negate every right-hand side; every inequality suite must then fail.
    #[arg(long, hide = true)]
    mutate_rhs: bool,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = DEFAULT_GRADCHECK_POINTS)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Corrupt the regularizer gradient; the check must then fail.
    #[arg(long, hide = true)]
    fault_regularizer: bool,
}

/// Failure with its exit code and one-line diagnostic.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn runtime(e: Error) -> Self {
        Failure {
            code: EXIT_RUNTIME,
            message: e.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::usage(e.to_string())
    }
}

type Outcome = Result<i32, Failure>;

fn write_out(w: &mut dyn Write, text: &str) -> Result<(), Failure> {
    w.write_all(text.as_bytes()).map_err(|e| {
        Failure::runtime(Error::Io {
            context: "standard output".into(),
            source: e,
        })
    })
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run_with_io<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args, stdout, stderr),
        Command::Sweep(args) => cmd_sweep(args, stdout, stderr),
        Command::Verify(args) => cmd_verify(args, stdout, stderr),
        Command::Gradcheck(args) => cmd_gradcheck(args, stdout, stderr),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message.replace('\n', " "));
            f.code
        }
    }
}

fn base_config(args: &ExperimentArgs) -> Result<ExperimentConfig, Failure> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(repeats) = args.repeats {
        config.repeats = repeats;
    }
    if let Some(steps) = args.steps {
        config.budget = Budget::Steps(steps);
    }
    if let Some(epochs) = args.epochs {
        config.budget = Budget::Epochs(epochs);
    }
    if let Some(format) = args.format {
        config.format = format;
    }
    if let Some(out) = &args.out {
        config.output = Some(out.clone());
    }
    Ok(config)
}

/// The config's entry for `id`, or one built from the flags; Spider needs
/// `--eps` and `--smoothness`, SpiderBoost `--smoothness`, SVRG `--eta`.
fn algorithm_for(
    id: AlgorithmId,
    config: &ExperimentConfig,
    args: &ExperimentArgs,
) -> Result<Algorithm, Failure> {
    if let Some(a) = config.algorithms.iter().find(|a| a.id() == id) {
        return Ok(a.clone());
    }
    let missing = |flag: &str| Failure::usage(format!("{id} needs --{flag} (or a config entry)"));
    match id {
        AlgorithmId::Spider => {
            args.eps.ok_or_else(|| missing("eps"))?;
            args.smoothness.ok_or_else(|| missing("smoothness"))?;
        }
        AlgorithmId::SpiderBoost => {
            args.smoothness.ok_or_else(|| missing("smoothness"))?;
        }
        AlgorithmId::Svrg => {
            args.eta.ok_or_else(|| missing("eta"))?;
        }
        _ => {}
    }
    Ok(Algorithm::default_for(id, 1))
}

fn apply_overrides(alg: &mut Algorithm, args: &ExperimentArgs) {
    match alg {
        Algorithm::AdaSpider(c) => {
            c.beta0 = args.beta0.unwrap_or(c.beta0);
            c.g0 = args.g0.unwrap_or(c.g0);
        }
        Algorithm::Spider(c) => {
            c.epsilon = args.eps.unwrap_or(c.epsilon);
            c.smoothness = args.smoothness.unwrap_or(c.smoothness);
        }
        Algorithm::SpiderBoost(c) => c.smoothness = args.smoothness.unwrap_or(c.smoothness),
        Algorithm::Svrg(c) => c.eta = args.eta.unwrap_or(c.eta),
        Algorithm::Sgd(c) => c.eta = args.eta.unwrap_or(c.eta),
        Algorithm::AdaGradNorm(c) => c.eta = args.eta.unwrap_or(c.eta),
    }
}

fn parse_id(name: &str) -> Result<AlgorithmId, Failure> {
    Ok(name.parse::<AlgorithmId>()?)
}

/// `--out`, else the config's `output`, else `$ADASPIDER_OUT_DIR/<stem>.<ext>`.
fn output_path(config: &ExperimentConfig, stem: &str) -> Option<PathBuf> {
    config.output.clone().or_else(|| {
        std::env::var_os(OUT_DIR_ENV)
            .filter(|d| !d.is_empty())
            .map(|d| Path::new(&d).join(format!("{stem}.{}", config.format.extension())))
    })
}

fn cmd_run(args: RunArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Outcome {
    let mut config = base_config(&args.common)?;
    if !args.algo.is_empty() {
        config.algorithms = args
            .algo
            .iter()
            .map(|name| algorithm_for(parse_id(name)?, &config, &args.common))
            .collect::<Result<_, _>>()?;
    }
    for alg in &mut config.algorithms {
        apply_overrides(alg, &args.common);
    }
    config.validate()?;
    let instance = config.problem.build()?;

    let records = run_on(&instance, &config).map_err(Failure::runtime)?;
    match output_path(&config, "run") {
        Some(path) => {
            emit_records(&records, config.format, &path).map_err(Failure::runtime)?;
            let _ = writeln!(stderr, "wrote {} records to {}", records.len(), path.display());
        }
        None => {
            let mut buf = Vec::new();
            write_records(&records, config.format, &mut buf).map_err(Failure::runtime)?;
            write_out(stdout, &String::from_utf8_lossy(&buf))?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_sweep(args: SweepArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Outcome {
    let config = base_config(&args.common)?;
    let id = parse_id(&args.algo)?;
    // the swept scale replaces L or η, so defaults are fine here
    let mut template = config
        .algorithms
        .iter()
        .find(|a| a.id() == id)
        .cloned()
        .unwrap_or_else(|| Algorithm::default_for(id, 1));
    apply_overrides(&mut template, &args.common);
    let grid = if args.grid.is_empty() {
        DEFAULT_SWEEP_GRID.to_vec()
    } else {
        args.grid
    };
    if let Some(bad) = grid.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
        return Err(Failure::usage(format!("grid values must be positive, got {bad}")));
    }
    let check = ExperimentConfig {
        algorithms: vec![template.clone()],
        ..config.clone()
    };
    check.validate()?;
    let instance = config.problem.build()?;

    let outcome = sweep_on(&instance, &config, template, &grid).map_err(Failure::runtime)?;
    if let Some(path) = output_path(&config, "sweep") {
        emit_records(&outcome.records, config.format, &path).map_err(Failure::runtime)?;
        let _ = writeln!(
            stderr,
            "wrote {} records to {}",
            outcome.records.len(),
            path.display()
        );
    }
    let score = |v: f64| {
        if v.is_finite() {
            serde_json::json!(v)
        } else {
            serde_json::json!(format!("{v:?}"))
        }
    };
    let summary = serde_json::json!({
        "algorithm": outcome.algorithm,
        "best": outcome.best,
        "scores": outcome
            .scores
            .iter()
            .map(|(s, v)| serde_json::json!({"scale": s, "mean_final_grad_norm": score(*v)}))
            .collect::<Vec<_>>(),
    });
    write_out(stdout, &format!("{summary:#}\n"))?;
    let _ = writeln!(stderr, "best scale for {}: {}", outcome.algorithm, outcome.best);
    Ok(EXIT_OK)
}

fn cmd_verify(args: VerifyArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Outcome {
    let suite: Suite = args.suite.parse()?;
    let rhs = if args.mutate_rhs {
        Rhs::Negated
    } else {
        Rhs::Stated
    };
    let reports = run_suite(suite, args.seed, rhs).map_err(Failure::runtime)?;
    let json = serde_json::to_string_pretty(&reports).map_err(|e| Failure::runtime(e.into()))?;
    write_out(stdout, &format!("{json}\n"))?;
    for r in &reports {
        let _ = writeln!(stderr, "{}", r.summary());
    }
    Ok(if reports.iter().all(|r| r.pass) {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}

fn cmd_gradcheck(args: GradcheckArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Outcome {
    let fault = if args.fault_regularizer {
        GradFault::RegularizerGradient
    } else {
        GradFault::None
    };
    let results = gradcheck(args.points, args.seed, fault)?;
    let json = serde_json::to_string_pretty(&results).map_err(|e| Failure::runtime(e.into()))?;
    write_out(stdout, &format!("{json}\n"))?;
    for r in &results {
        let verdict = if r.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(
            stderr,
            "{verdict} {}: max relative error {:.3e}",
            r.target, r.max_rel_error
        );
    }
    Ok(if results.iter().all(|r| r.pass) {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}
