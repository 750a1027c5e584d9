//! Merges command-line flags, an optional JSON config file and defaults
//! into an experiment config.

use std::path::{Path, PathBuf};

use fsvi_core::bench::{Experiment, ExperimentConfig, MethodKind};
use fsvi_core::ssge::SsgeConfig;
use fsvi_core::variational::Family;
use serde::Deserialize;

use crate::args::{SweepArgs, TabularArgs};

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

/// Keys mirror the long flag names.
#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct FileConfig {
    method: Option<OneOrMany<String>>,
    family: Option<OneOrMany<String>>,
    measure_size: Option<OneOrMany<usize>>,
    data_fraction: Option<f64>,
    steps: Option<usize>,
    lr: Option<f64>,
    seed: Option<u64>,
    seeds: Option<u64>,
    minibatch: Option<usize>,
    ssge_samples: Option<usize>,
    noise_variance: Option<f64>,
    output: Option<PathBuf>,
    jobs: Option<usize>,
    dataset: Option<PathBuf>,
    features: Option<PathBuf>,
    split_fraction: Option<f64>,
    num_features: Option<usize>,
}

fn read_file_config(path: Option<&Path>) -> Result<FileConfig, String> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
}

pub struct Resolved {
    pub config: ExperimentConfig,
    pub output: PathBuf,
    pub jobs: Option<usize>,
}

fn pick_list<T>(flag: Vec<T>, file: Option<OneOrMany<T>>) -> Option<Vec<T>> {
    if !flag.is_empty() {
        Some(flag)
    } else {
        file.map(OneOrMany::into_vec)
    }
}

fn parse_all<T: std::str::FromStr<Err = fsvi_core::Error>>(values: Vec<String>) -> Result<Vec<T>, String> {
    values.iter().map(|s| s.parse::<T>().map_err(|e| e.to_string())).collect()
}

fn apply_sweep(mut config: ExperimentConfig, args: SweepArgs, file: &mut FileConfig) -> Result<Resolved, String> {
    if let Some(m) = pick_list(args.methods, file.method.take()) {
        config.methods = parse_all::<MethodKind>(m)?;
    }
    if let Some(f) = pick_list(args.families, file.family.take()) {
        config.families = parse_all::<Family>(f)?;
    }
    if let Some(sizes) = pick_list(args.measure_sizes, file.measure_size.take()) {
        config.measure_sizes = sizes;
    }
    if let Some(v) = args.data_fraction.or(file.data_fraction) {
        config.data_fraction = v;
    }
    if let Some(v) = args.steps.or(file.steps) {
        config.optimizer.max_steps = v;
    }
    if let Some(v) = args.lr.or(file.lr) {
        config.optimizer.learning_rate = v;
    }
    config.seeds = match (args.seed, args.seeds, file.seed, file.seeds) {
        (Some(s), _, _, _) => vec![s],
        (None, Some(n), _, _) => (0..n).collect(),
        (None, None, Some(_), Some(_)) => return Err("config sets both seed and seeds".into()),
        (None, None, Some(s), None) => vec![s],
        (None, None, None, Some(n)) => (0..n).collect(),
        (None, None, None, None) => config.seeds,
    };
    config.minibatch_size = args.minibatch.or(file.minibatch);
    if let Some(v) = args.ssge_samples.or(file.ssge_samples) {
        config.ssge = SsgeConfig::with_samples(v);
    }
    if let Some(v) = args.noise_variance.or(file.noise_variance) {
        config.noise_variance = v;
    }
    config.validate().map_err(|e| e.to_string())?;
    Ok(Resolved {
        config,
        output: args.output.or(file.output.take()).unwrap_or_else(|| PathBuf::from("output")),
        jobs: args.jobs.or(file.jobs),
    })
}

pub fn resolve_toy(args: SweepArgs) -> Result<Resolved, String> {
    let mut file = read_file_config(args.config.as_deref())?;
    if file.dataset.is_some() || file.features.is_some() || file.split_fraction.is_some() || file.num_features.is_some() {
        return Err("dataset, features, split-fraction and num-features only apply to tabular runs".into());
    }
    apply_sweep(ExperimentConfig::toy(), args, &mut file)
}

pub fn resolve_tabular(args: TabularArgs) -> Result<Resolved, String> {
    let mut file = read_file_config(args.sweep.config.as_deref())?;
    let dataset = args
        .dataset
        .or(file.dataset.take())
        .ok_or("tabular runs need --dataset")?;
    let mut config = ExperimentConfig::tabular(dataset.clone());
    config.experiment = Experiment::Tabular {
        dataset,
        features: args.features.or(file.features.take()),
    };
    if let Some(v) = args.split_fraction.or(file.split_fraction) {
        config.split_fraction = v;
    }
    if let Some(v) = args.num_features.or(file.num_features) {
        config.num_features = v;
    }
    apply_sweep(config, args.sweep, &mut file)
}
