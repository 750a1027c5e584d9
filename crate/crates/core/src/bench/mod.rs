//! Experiment harness: toy and tabular problems, multi-seed sweeps over
//! methods, families and measurement-set sizes, and result persistence.

mod data;
mod metrics;

pub use data::{
    generate_toy, load_and_split, split_dataset, Split, Standardization, ToyProblem, TOY_NOISE_VARIANCE,
    TOY_NUM_FEATURES,
};
pub use metrics::{emit_predictive_curve, format_curve_csv, kl_to_posterior, linspace, write_curve_csv, CurveRow};

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::blr::{BlrModel, Dataset};
use crate::error::{Error, Result};
use crate::features::{FeatureMap, LookupFeatureMap, RbfFeatureMap};
use crate::gaussian::{kl_divergence_from_factor, GaussianDist};
use crate::io;
use crate::optimize::{self, AdamConfig};
use crate::ssge::SsgeConfig;
use crate::variational::{sample_measurement_set, Family, MeasurementPolicy, Objective, ObjectiveKind, Problem, VariationalState};

pub const SCHEMA_VERSION: u32 = 1;
const CURVE_GRID: (f64, f64, usize) = (-2.5, 2.5, 201);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    Exact,
    FixedA,
    RandA,
    Ssge,
}

impl MethodKind {
    pub const ALL: [MethodKind; 4] = [MethodKind::Exact, MethodKind::FixedA, MethodKind::RandA, MethodKind::Ssge];

    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Exact => "exact",
            MethodKind::FixedA => "fixed-a",
            MethodKind::RandA => "rand-a",
            MethodKind::Ssge => "ssge",
        }
    }

    pub fn uses_measurements(self) -> bool {
        self != MethodKind::Exact
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method {s:?}, expected one of: exact, fixed-a, rand-a, ssge")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Toy,
    Tabular {
        dataset: PathBuf,
        /// Precomputed features, one row per dataset row.
        features: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub methods: Vec<MethodKind>,
    pub families: Vec<Family>,
    pub seeds: Vec<u64>,
    pub measure_sizes: Vec<usize>,
    pub data_fraction: f64,
    pub optimizer: AdamConfig,
    pub split_fraction: f64,
    pub minibatch_size: Option<usize>,
    pub ssge: SsgeConfig,
    pub noise_variance: f64,
    /// RBF features fitted by k-means on tabular training inputs.
    pub num_features: usize,
    pub standardize: bool,
    /// Write predictive curves for the first seed (1-D inputs only).
    pub emit_curves: bool,
}

impl ExperimentConfig {
    pub fn toy() -> Self {
        Self {
            experiment: Experiment::Toy,
            methods: MethodKind::ALL.to_vec(),
            families: vec![Family::Full, Family::Ffg],
            seeds: (0..20).collect(),
            measure_sizes: vec![10],
            data_fraction: 0.5,
            optimizer: AdamConfig::default(),
            split_fraction: 0.9,
            minibatch_size: None,
            ssge: SsgeConfig::default(),
            noise_variance: TOY_NOISE_VARIANCE,
            num_features: TOY_NUM_FEATURES,
            standardize: false,
            emit_curves: true,
        }
    }

    pub fn tabular(dataset: PathBuf) -> Self {
        Self {
            experiment: Experiment::Tabular { dataset, features: None },
            measure_sizes: vec![80],
            optimizer: AdamConfig {
                max_steps: 15_000,
                ..AdamConfig::default()
            },
            num_features: 100,
            standardize: true,
            emit_curves: false,
            ..Self::toy()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let empty = |what: &str| Error::InvalidParameter(format!("at least one {what} is required"));
        if self.methods.is_empty() {
            return Err(empty("method"));
        }
        if self.families.is_empty() {
            return Err(empty("family"));
        }
        if self.seeds.is_empty() {
            return Err(empty("seed"));
        }
        if self.methods.iter().any(|m| m.uses_measurements()) && self.measure_sizes.is_empty() {
            return Err(empty("measurement size"));
        }
        if self.measure_sizes.contains(&0) {
            return Err(Error::InvalidParameter("measurement sizes must be >= 1".into()));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "split fraction must lie in (0, 1), got {}",
                self.split_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.data_fraction) {
            return Err(Error::InvalidParameter(format!(
                "data fraction must lie in [0, 1], got {}",
                self.data_fraction
            )));
        }
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::InvalidParameter("noise variance must be positive".into()));
        }
        if self.minibatch_size == Some(0) {
            return Err(Error::InvalidParameter("minibatch size must be >= 1".into()));
        }
        if self.num_features == 0 {
            return Err(Error::InvalidParameter("number of features must be >= 1".into()));
        }
        self.optimizer.validate()?;
        if self.methods.contains(&MethodKind::Ssge) {
            self.ssge.validate()?;
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the config's JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes())[..8]
            .iter()
            .fold(String::new(), |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            })
    }

    pub fn dataset_name(&self) -> String {
        match &self.experiment {
            Experiment::Toy => "toy".into(),
            Experiment::Tabular { dataset, .. } => dataset
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "tabular".into()),
        }
    }

    fn cells(&self) -> Vec<(MethodKind, Family, Option<usize>)> {
        let mut cells = Vec::new();
        for &method in &self.methods {
            for &family in &self.families {
                if method.uses_measurements() {
                    cells.extend(self.measure_sizes.iter().map(|&m| (method, family, Some(m))));
                } else {
                    // the exact objective does not depend on the measurement size
                    cells.push((method, family, None));
                }
            }
        }
        cells
    }
}

/// Deterministic 64-bit seed for a named stream of a sweep seed.
pub fn derive_seed(seed: u64, stream: &str) -> u64 {
    let digest = Sha256::digest(format!("{seed}/{stream}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub kl_to_posterior: f64,
    pub train_nlpd: f64,
    pub test_nlpd: f64,
    pub final_elbo_estimate: f64,
}

impl RunMetrics {
    pub const NAMES: [&'static str; 4] = ["kl_to_posterior", "train_nlpd", "test_nlpd", "final_elbo_estimate"];

    pub fn values(&self) -> [f64; 4] {
        [self.kl_to_posterior, self.train_nlpd, self.test_nlpd, self.final_elbo_estimate]
    }

    fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub steps_taken: usize,
    pub records: usize,
    pub initial_elbo: Option<f64>,
    pub last_logged_elbo: Option<f64>,
    pub last_grad_norm: Option<f64>,
    pub monotone_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub schema: u32,
    pub fingerprint: String,
    pub dataset: String,
    pub seed: u64,
    pub method: MethodKind,
    pub family: Family,
    pub measure_size: Option<usize>,
    pub metrics: Option<RunMetrics>,
    /// Set when the run did not produce finite metrics.
    pub failed: Option<String>,
    pub trace: TraceSummary,
    pub jitter_events: usize,
    pub dropped_rows: usize,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub method: MethodKind,
    pub family: Family,
    pub measure_size: Option<usize>,
    pub metric: String,
    pub mean: f64,
    pub stderr: f64,
    pub n_seeds: usize,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub results: Vec<RunResult>,
    pub summary: Vec<SummaryRow>,
}

impl SweepOutcome {
    pub fn failures(&self) -> usize {
        self.results.iter().filter(|r| r.failed.is_some()).count()
    }
}

/// One seed's problem, shared by every cell of the sweep.
struct SeedProblem {
    problem: Problem,
    test: Dataset,
    posterior: GaussianDist,
    /// Added to NLPDs to report them on the original target scale.
    nlpd_offset: f64,
    /// Lookup features cannot be evaluated off the data, so measurement
    /// points come from training inputs only.
    data_only_measurements: bool,
    curve_model: Option<BlrModel>,
}

/// Raw tabular data loaded once per sweep.
struct TabularSource {
    data: Dataset,
    features: Option<DMatrix<f64>>,
}

/// Runs the full Cartesian product of the config on a `jobs`-thread pool
/// (all logical processors when `None`) and, when `output` is set, writes
/// `results.jsonl`, `summary.csv` and predictive curves there.
///
/// Failed runs are recorded with their error and do not stop the sweep.
pub fn run_sweep(config: &ExperimentConfig, output: Option<&Path>, jobs: Option<usize>) -> Result<SweepOutcome> {
    config.validate()?;
    let source = match &config.experiment {
        Experiment::Toy => None,
        Experiment::Tabular { dataset, features } => {
            let data = Dataset::load_csv(dataset)?;
            let features = match features {
                Some(p) => {
                    let f = io::read_matrix_csv(p)?;
                    crate::error::check_dim("feature csv rows", data.len(), f.nrows())?;
                    Some(f)
                }
                None => None,
            };
            Some(TabularSource { data, features })
        }
    };

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().map_err(|e| Error::InvalidParameter(e.to_string()))?;

    let fingerprint = config.fingerprint();
    let dataset = config.dataset_name();
    let cells = config.cells();

    let (problems, outputs): (Vec<Result<SeedProblem>>, Vec<(RunResult, Option<VariationalState>)>) = pool.install(|| {
        let problems: Vec<Result<SeedProblem>> = config
            .seeds
            .par_iter()
            .map(|&seed| build_problem(config, source.as_ref(), seed))
            .collect();
        let tasks: Vec<(usize, u64, (MethodKind, Family, Option<usize>))> = config
            .seeds
            .iter()
            .enumerate()
            .flat_map(|(i, &seed)| cells.iter().map(move |&c| (i, seed, c)))
            .collect();
        let outputs = tasks
            .par_iter()
            .map(|&(i, seed, (method, family, size))| {
                let start = Instant::now();
                let (mut result, state) = match &problems[i] {
                    Ok(p) => run_one(config, p, seed, method, family, size),
                    Err(e) => (failed_result(format!("problem setup failed: {e}")), None),
                };
                result.fingerprint = fingerprint.clone();
                result.dataset = dataset.clone();
                result.seed = seed;
                result.method = method;
                result.family = family;
                result.measure_size = size;
                result.wall_time = start.elapsed().as_secs_f64();
                log::info!(
                    "{dataset} seed={seed} method={method} family={family} size={} {}",
                    size.map_or("-".to_string(), |m| m.to_string()),
                    match (&result.metrics, &result.failed) {
                        (_, Some(e)) => format!("FAILED: {e}"),
                        (Some(m), None) => format!("kl={:.4e} test_nlpd={:.4}", m.kl_to_posterior, m.test_nlpd),
                        (None, None) => String::new(),
                    }
                );
                // only the first seed's states are kept, for curves
                (result, if i == 0 { state } else { None })
            })
            .collect();
        (problems, outputs)
    });

    let num_cells = cells.len();
    let mut results = Vec::with_capacity(outputs.len());
    let mut first_seed_states = Vec::with_capacity(num_cells);
    for (i, (result, state)) in outputs.into_iter().enumerate() {
        if i < num_cells {
            first_seed_states.push((cells[i], state));
        }
        results.push(result);
    }

    let summary = summarize(&results);
    if let Some(dir) = output {
        fs::create_dir_all(dir)?;
        write_results(&dir.join("results.jsonl"), &results)?;
        fs::write(dir.join("summary.csv"), format_summary_csv(&summary))?;
        if let (true, Ok(sp)) = (config.emit_curves, &problems[0]) {
            write_curves(sp, config.seeds[0], &first_seed_states, &dir.join("curves"))?;
        }
    }
    Ok(SweepOutcome { results, summary })
}

fn build_problem(config: &ExperimentConfig, source: Option<&TabularSource>, seed: u64) -> Result<SeedProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "data"));
    let (model, train, test, nlpd_offset, data_only) = match source {
        None => {
            let toy = generate_toy(&mut rng)?;
            let model = BlrModel::new(toy.model.feature_map.clone(), config.noise_variance)?;
            (model, toy.train, toy.test, 0.0, false)
        }
        Some(src) => {
            let split = split_dataset(&src.data, config.split_fraction, derive_seed(seed, "split"), config.standardize)?;
            let offset = split
                .standardization
                .as_ref()
                .map_or(0.0, |s| s.destandardize_nlpd(0.0));
            let (map, data_only) = match &src.features {
                Some(values) => {
                    let rows: Vec<usize> = split.train_rows.iter().chain(&split.test_rows).copied().collect();
                    let inputs = DMatrix::from_fn(rows.len(), split.train.input_dim(), |i, d| {
                        if i < split.train.len() {
                            split.train.inputs[(i, d)]
                        } else {
                            split.test.inputs[(i - split.train.len(), d)]
                        }
                    });
                    let vals = crate::linalg::select_rows(values, &rows);
                    (FeatureMap::Lookup(LookupFeatureMap::new(inputs, vals)?), true)
                }
                None => {
                    let k = config.num_features.min(split.train.len());
                    (FeatureMap::Rbf(RbfFeatureMap::from_kmeans(&split.train.inputs, k, &mut rng)?), false)
                }
            };
            let model = BlrModel::new(map, config.noise_variance)?;
            (model, split.train, split.test, offset, data_only)
        }
    };
    let posterior = model.exact_posterior(&train)?;
    let curve_model = (config.emit_curves && model.feature_map.input_dim() == 1 && !data_only).then(|| model.clone());
    Ok(SeedProblem {
        problem: Problem::new(model, train)?,
        test,
        posterior,
        nlpd_offset,
        data_only_measurements: data_only,
        curve_model,
    })
}

fn failed_result(message: String) -> RunResult {
    RunResult {
        schema: SCHEMA_VERSION,
        fingerprint: String::new(),
        dataset: String::new(),
        seed: 0,
        method: MethodKind::Exact,
        family: Family::Full,
        measure_size: None,
        metrics: None,
        failed: Some(message),
        trace: TraceSummary {
            steps_taken: 0,
            records: 0,
            initial_elbo: None,
            last_logged_elbo: None,
            last_grad_norm: None,
            monotone_fraction: 0.0,
        },
        jitter_events: 0,
        dropped_rows: 0,
        wall_time: 0.0,
    }
}

fn measurement_policy(sp: &SeedProblem, config: &ExperimentConfig, size: usize, resample: bool) -> Result<MeasurementPolicy> {
    if sp.data_only_measurements {
        return MeasurementPolicy::new(size, 1.0, Vec::new(), resample);
    }
    let inputs = &sp.problem.data.inputs;
    let bounds = (0..inputs.ncols())
        .map(|d| {
            let (lo, hi) = (inputs.column(d).min(), inputs.column(d).max());
            if lo < hi {
                (lo, hi)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        })
        .collect();
    MeasurementPolicy::new(size, config.data_fraction, bounds, resample)
}

/// Trains one cell and returns the record, with metadata fields left blank,
/// and the final state when training finished.
fn run_one(
    config: &ExperimentConfig,
    sp: &SeedProblem,
    seed: u64,
    method: MethodKind,
    family: Family,
    size: Option<usize>,
) -> (RunResult, Option<VariationalState>) {
    match try_run_one(config, sp, seed, method, family, size) {
        Ok(r) => r,
        Err(e) => (failed_result(e.to_string()), None),
    }
}

fn try_run_one(
    config: &ExperimentConfig,
    sp: &SeedProblem,
    seed: u64,
    method: MethodKind,
    family: Family,
    size: Option<usize>,
) -> Result<(RunResult, Option<VariationalState>)> {
    let stream = format!("run/{method}/{family}/{}", size.unwrap_or(0));
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &stream));
    let m = size.unwrap_or(0);
    let kind = match method {
        MethodKind::Exact => ObjectiveKind::Exact,
        MethodKind::FixedA => {
            let policy = measurement_policy(sp, config, m, false)?;
            ObjectiveKind::FixedA(sample_measurement_set(&policy, &sp.problem.data, &mut rng)?)
        }
        MethodKind::RandA => ObjectiveKind::RandA(measurement_policy(sp, config, m, true)?),
        MethodKind::Ssge => ObjectiveKind::Ssge(measurement_policy(sp, config, m, true)?, config.ssge.clone()),
    };
    let mut objective = Objective::new(&sp.problem, kind, config.minibatch_size)?;
    let initial = VariationalState::prior_init(family, sp.problem.num_features());

    let mut result = failed_result(String::new());
    let trace = match optimize::run(&mut objective, &initial, &config.optimizer, &mut rng) {
        Ok(t) => t,
        Err(aborted) => {
            result.trace = summarize_trace(&aborted.trace);
            result.jitter_events = aborted.trace.total_jitter_events;
            result.dropped_rows = aborted.trace.total_dropped_rows;
            result.failed = Some(aborted.to_string());
            return Ok((result, None));
        }
    };
    result.trace = summarize_trace(&trace);
    result.jitter_events = trace.total_jitter_events;
    result.dropped_rows = trace.total_dropped_rows;

    let fin = &trace.final_state;
    let q = fin.to_gaussian()?;
    let final_eval = objective.evaluate(fin, &mut rng, trace.steps_taken)?;
    let metrics = RunMetrics {
        kl_to_posterior: kl_divergence_from_factor(&fin.mean, &fin.scale_matrix(), &sp.posterior)?,
        train_nlpd: sp.problem.model.nlpd(&q, &sp.problem.data)? + sp.nlpd_offset,
        test_nlpd: sp.problem.model.nlpd(&q, &sp.test)? + sp.nlpd_offset,
        final_elbo_estimate: final_eval.elbo_estimate,
    };
    result.failed = (!metrics.is_finite()).then(|| "non-finite metrics".to_string());
    result.metrics = Some(metrics);
    Ok((result, Some(trace.final_state)))
}

fn summarize_trace(trace: &optimize::TrainTrace) -> TraceSummary {
    TraceSummary {
        steps_taken: trace.steps_taken,
        records: trace.records.len(),
        initial_elbo: trace.records.first().map(|r| r.elbo_estimate),
        last_logged_elbo: trace.records.last().map(|r| r.elbo_estimate),
        last_grad_norm: trace.records.last().map(|r| r.grad_norm),
        monotone_fraction: optimize::elbo_monotone_fraction(trace, 0),
    }
}

/// Mean and standard error of each metric per (dataset, method, family,
/// size) cell over successful runs, in order of first appearance.
pub fn summarize(results: &[RunResult]) -> Vec<SummaryRow> {
    type Key = (String, MethodKind, Family, Option<usize>);
    let mut order: Vec<Key> = Vec::new();
    let mut groups: BTreeMap<Key, Vec<&RunMetrics>> = BTreeMap::new();
    for r in results {
        let key = (r.dataset.clone(), r.method, r.family, r.measure_size);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        let entry = groups.entry(key).or_default();
        if let (Some(m), None) = (&r.metrics, &r.failed) {
            entry.push(m);
        }
    }
    let mut rows = Vec::new();
    for key in order {
        let runs = &groups[&key];
        if runs.is_empty() {
            continue;
        }
        for (j, name) in RunMetrics::NAMES.iter().enumerate() {
            let values: Vec<f64> = runs.iter().map(|m| m.values()[j]).collect();
            let (mean, stderr) = mean_stderr(&values);
            rows.push(SummaryRow {
                dataset: key.0.clone(),
                method: key.1,
                family: key.2,
                measure_size: key.3,
                metric: name.to_string(),
                mean,
                stderr,
                n_seeds: values.len(),
            });
        }
    }
    rows
}

/// Sample mean and `s / sqrt(n)`; the standard error of one value is 0.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn format_results_jsonl(results: &[RunResult]) -> Result<String> {
    let mut out = String::new();
    for r in results {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

fn write_results(path: &Path, results: &[RunResult]) -> Result<()> {
    fs::write(path, format_results_jsonl(results)?).map_err(Error::from)
}

pub fn read_results(path: &Path) -> Result<Vec<RunResult>> {
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

pub fn format_summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("dataset,method,family,measure_size,metric,mean,stderr,n_seeds\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:?},{:?},{}",
            r.dataset,
            r.method,
            r.family,
            r.measure_size.map_or(String::new(), |m| m.to_string()),
            r.metric,
            r.mean,
            r.stderr,
            r.n_seeds
        );
    }
    out
}

/// One curve per finished cell of the first seed, plus the exact posterior's.
fn write_curves(
    sp: &SeedProblem,
    seed: u64,
    states: &[((MethodKind, Family, Option<usize>), Option<VariationalState>)],
    dir: &Path,
) -> Result<()> {
    let Some(model) = &sp.curve_model else {
        return Ok(());
    };
    fs::create_dir_all(dir)?;
    let grid = linspace(CURVE_GRID.0, CURVE_GRID.1, CURVE_GRID.2);
    write_curve_csv(
        &dir.join(format!("seed{seed}_posterior.csv")),
        &emit_predictive_curve(&sp.posterior, model, &grid)?,
    )?;
    for ((method, family, size), state) in states {
        let Some(state) = state else { continue };
        let name = match size {
            Some(m) => format!("seed{seed}_{method}_{family}_m{m}.csv"),
            None => format!("seed{seed}_{method}_{family}.csv"),
        };
        write_curve_csv(&dir.join(name), &emit_predictive_curve(&state.to_gaussian()?, model, &grid)?)?;
    }
    Ok(())
}
