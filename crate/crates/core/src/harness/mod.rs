//! Experiment configuration, seeded multi-run execution, step-size sweeps
//! and record serialization.

mod records;

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use records::{
    emit_records, parse_records, read_records, write_records, Format, RecordRow, RunRecord, CSV_HEADER,
};

use crate::data::{generate_synthetic, load_libsvm, SyntheticKind};
use crate::error::{Error, Result};
use crate::optimizers::{Algorithm, AlgorithmId};
use crate::oracle::FiniteSumProblem;
use crate::problems::{
    kaiming_uniform_scaled_init, LossKind, MlpClassification, MlpLayout, RegularizedErm, DEFAULT_LAMBDA,
    DEFAULT_MLP_DIMS,
};

pub const DEFAULT_REPEATS: usize = 5;
pub const DEFAULT_SWEEP_GRID: [f64; 7] = [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3];
/// Size `(n, d)` of the bundled synthetic logistic problem.
pub const DEFAULT_PROBLEM_SIZE: (usize, usize) = (500, 20);
pub const DEFAULT_C_INIT: f64 = 0.03;

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

fn default_loss() -> LossKind {
    LossKind::Logistic
}

fn default_mlp_dims() -> Vec<usize> {
    DEFAULT_MLP_DIMS.to_vec()
}

fn default_c_init() -> f64 {
    DEFAULT_C_INIT
}

fn default_repeats() -> usize {
    DEFAULT_REPEATS
}

/// Where the objective comes from. ERM problems start at zero, MLPs at a
/// seeded scaled Kaiming initialization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProblemSpec {
    /// Gaussian features; sign labels for logistic loss, noisy linear
    /// targets for squared loss.
    Synthetic {
        #[serde(default = "default_loss")]
        loss: LossKind,
        n: usize,
        d: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
    Libsvm {
        path: PathBuf,
        #[serde(default = "default_loss")]
        loss: LossKind,
        #[serde(default = "default_lambda")]
        lambda: f64,
        /// Feature dimension, when wider than the largest index in the file.
        #[serde(default)]
        dim: Option<usize>,
        /// Rescale every feature to `[0, 1]`.
        #[serde(default)]
        scale_features: bool,
    },
    /// Cross-entropy MLP on Gaussian clusters, one class per output.
    Mlp {
        n: usize,
        #[serde(default = "default_mlp_dims")]
        dims: Vec<usize>,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_c_init")]
        c_init: f64,
    },
}

impl Default for ProblemSpec {
    fn default() -> Self {
        ProblemSpec::Synthetic {
            loss: LossKind::Logistic,
            n: DEFAULT_PROBLEM_SIZE.0,
            d: DEFAULT_PROBLEM_SIZE.1,
            seed: 0,
            lambda: DEFAULT_LAMBDA,
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("lambda", format!("must be >= 0, got {lambda}")))
    }
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ProblemSpec::Synthetic { n, d, lambda, .. } => {
                if *n == 0 || *d == 0 {
                    return Err(Error::invalid("problem", "synthetic n and d must be >= 1"));
                }
                check_lambda(*lambda)
            }
            ProblemSpec::Libsvm { lambda, dim, .. } => {
                if *dim == Some(0) {
                    return Err(Error::invalid("dim", "must be >= 1"));
                }
                check_lambda(*lambda)
            }
            ProblemSpec::Mlp { n, dims, c_init, .. } => {
                if *n == 0 {
                    return Err(Error::invalid("problem", "mlp n must be >= 1"));
                }
                if !(*c_init > 0.0) || !c_init.is_finite() {
                    return Err(Error::invalid(
                        "c_init",
                        format!("must be positive, got {c_init}"),
                    ));
                }
                MlpLayout::new(dims.clone()).map(|_| ())
            }
        }
    }

    pub fn build(&self) -> Result<Instance> {
        self.validate()?;
        match self {
            ProblemSpec::Synthetic {
                loss,
                n,
                d,
                seed,
                lambda,
            } => {
                let kind = match loss {
                    LossKind::Logistic => SyntheticKind::SeparableLogistic,
                    LossKind::Squared => SyntheticKind::Quadratic,
                };
                let data = generate_synthetic(kind, *n, *d, *seed)?;
                Ok(Instance::erm(RegularizedErm::new(data, *loss, *lambda)?))
            }
            ProblemSpec::Libsvm {
                path,
                loss,
                lambda,
                dim,
                scale_features,
            } => {
                let mut data = load_libsvm(path)?;
                if let Some(dim) = dim {
                    data = data.with_dim(*dim)?;
                }
                if *scale_features {
                    data = data.scaled_to_unit_range();
                }
                Ok(Instance::erm(RegularizedErm::new(data, *loss, *lambda)?))
            }
            ProblemSpec::Mlp {
                n,
                dims,
                seed,
                c_init,
            } => {
                let layout = MlpLayout::new(dims.clone())?;
                let classes = layout.num_classes();
                let data =
                    generate_synthetic(SyntheticKind::Clusters { classes }, *n, layout.input_dim(), *seed)?;
                Ok(Instance {
                    problem: Box::new(MlpClassification::new(layout, &data)?),
                    init: Init::Kaiming {
                        dims: dims.clone(),
                        c_init: *c_init,
                    },
                })
            }
        }
    }
}

#[derive(Clone, Debug)]
enum Init {
    Zero,
    Kaiming { dims: Vec<usize>, c_init: f64 },
}

/// A built problem together with its initialization rule.
pub struct Instance {
    problem: Box<dyn FiniteSumProblem>,
    init: Init,
}

impl Instance {
    fn erm(problem: RegularizedErm) -> Self {
        Instance {
            problem: Box::new(problem),
            init: Init::Zero,
        }
    }

    pub fn problem(&self) -> &dyn FiniteSumProblem {
        self.problem.as_ref()
    }

    /// The shared starting point of every algorithm for `seed`.
    pub fn initial_point(&self, seed: u64) -> Result<Vec<f64>> {
        match &self.init {
            Init::Zero => Ok(vec![0.0; self.problem.dim()]),
            Init::Kaiming { dims, c_init } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok(kaiming_uniform_scaled_init(dims, *c_init, &mut rng)?
                    .into_params()
                    .into_vec())
            }
        }
    }
}

/// Run length: a fixed number of steps, or a number of full passes worth
/// of oracle calls converted per algorithm with its closed-form cost.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Budget {
    Steps(usize),
    Epochs(f64),
}

impl Budget {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Budget::Steps(0) => Err(Error::invalid("budget", "need at least one step")),
            Budget::Epochs(e) if !(e > 0.0) || !e.is_finite() => Err(Error::invalid(
                "budget",
                format!("epochs must be positive, got {e}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn steps_for(&self, algorithm: &Algorithm, n: usize) -> usize {
        match *self {
            Budget::Steps(t) => t,
            Budget::Epochs(e) => algorithm.steps_within_budget(n, (e * n as f64).floor() as u64),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub problem: ProblemSpec,
    /// Per-algorithm parameters; their `steps` fields are ignored in favor
    /// of `budget`.
    pub algorithms: Vec<Algorithm>,
    pub budget: Budget,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    /// Repeat `k` runs with seed `seed + k`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: ProblemSpec::default(),
            algorithms: vec![Algorithm::default_for(AlgorithmId::AdaSpider, 1)],
            budget: Budget::Epochs(50.0),
            repeats: DEFAULT_REPEATS,
            seed: 0,
            output: None,
            format: Format::Csv,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::invalid("repeats", "must be >= 1"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::invalid("algorithms", "list is empty"));
        }
        self.budget.validate()?;
        for alg in &self.algorithms {
            alg.clone().with_steps(1).validate()?;
        }
        self.problem.validate()
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.repeats as u64)
            .map(|k| self.seed.wrapping_add(k))
            .collect()
    }
}

/// Sampling stream of `id` for `seed`; stream 0 is reserved for the
/// initialization.
pub fn algorithm_rng(seed: u64, id: AlgorithmId) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let index = AlgorithmId::ALL
        .iter()
        .position(|a| *a == id)
        .expect("listed in ALL");
    rng.set_stream(1 + index as u64);
    rng
}

/// Runs every `(algorithm, seed)` pair, in parallel, returning records in
/// job order.
fn run_jobs(
    instance: &Instance,
    budget: Budget,
    algorithms: &[Algorithm],
    seeds: &[u64],
) -> Result<Vec<RunRecord>> {
    let problem = instance.problem();
    let n = problem.num_components();
    let starts: Vec<Vec<f64>> = seeds
        .iter()
        .map(|&s| instance.initial_point(s))
        .collect::<Result<_>>()?;
    let jobs: Vec<(Algorithm, usize)> = algorithms
        .iter()
        .flat_map(|alg| {
            let alg = alg.clone().with_steps(budget.steps_for(alg, n));
            (0..seeds.len()).map(move |k| (alg.clone(), k))
        })
        .collect();
    jobs.par_iter()
        .map(|(alg, k)| {
            let seed = seeds[*k];
            let trace = alg.run(problem, &starts[*k], &mut algorithm_rng(seed, alg.id()))?;
            Ok(RunRecord::from_trace(&trace, seed))
        })
        .collect()
}

/// One record per `(algorithm, seed)`, ordered by algorithm as listed and
/// then by seed.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let instance = config.problem.build()?;
    run_on(&instance, config)
}

/// [`run_experiment`] on an already built problem.
pub fn run_on(instance: &Instance, config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    run_jobs(instance, config.budget, &config.algorithms, &config.seeds())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutcome {
    pub algorithm: AlgorithmId,
    /// Winning scale.
    pub best: f64,
    /// `(scale, mean final gradient norm)` for every grid value.
    pub scores: Vec<(f64, f64)>,
    /// Records of the whole grid, grid-major.
    pub records: Vec<RunRecord>,
}

impl SweepOutcome {
    pub fn best_records(&self) -> &[RunRecord] {
        let k = self
            .scores
            .iter()
            .position(|(s, _)| *s == self.best)
            .expect("best is on the grid");
        let per = self.records.len() / self.scores.len();
        &self.records[k * per..(k + 1) * per]
    }
}

/// Mean final gradient norm over seeds, infinite when any run diverged.
pub fn sweep_score(records: &[RunRecord]) -> f64 {
    let total: f64 = records.iter().map(RunRecord::final_grad_norm).sum();
    let mean = total / records.len() as f64;
    if mean.is_nan() {
        f64::INFINITY
    } else {
        mean
    }
}

/// Runs `id` at every scale of `grid` (see [`Algorithm::with_step_scale`])
/// over the config's seeds and budget and keeps the scale with the lowest
/// [`sweep_score`], earliest on ties. Parameters other than the scale come
/// from the config's entry for `id`, or the defaults when it has none.
pub fn sweep_step_size(config: &ExperimentConfig, id: AlgorithmId, grid: &[f64]) -> Result<SweepOutcome> {
    let template = config
        .algorithms
        .iter()
        .find(|a| a.id() == id)
        .cloned()
        .unwrap_or_else(|| Algorithm::default_for(id, 1));
    sweep_on(&config.problem.build()?, config, template, grid)
}

/// [`sweep_step_size`] on a built problem with an explicit template.
pub fn sweep_on(
    instance: &Instance,
    config: &ExperimentConfig,
    template: Algorithm,
    grid: &[f64],
) -> Result<SweepOutcome> {
    if grid.is_empty() {
        return Err(Error::invalid("grid", "empty step-size grid"));
    }
    let candidates: Vec<Algorithm> = grid
        .iter()
        .map(|&s| template.clone().with_step_scale(s))
        .collect::<Result<_>>()?;
    let swept = ExperimentConfig {
        algorithms: candidates,
        ..config.clone()
    };
    let records = run_on(instance, &swept)?;
    let seeds = config.repeats;
    let scores: Vec<(f64, f64)> = grid
        .iter()
        .zip(records.chunks(seeds))
        .map(|(&s, chunk)| (s, sweep_score(chunk)))
        .collect();
    let mut best = scores[0];
    for &(s, score) in &scores[1..] {
        if score < best.1 {
            best = (s, score);
        }
    }
    Ok(SweepOutcome {
        algorithm: template.id(),
        best: best.0,
        scores,
        records,
    })
}
