use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "fsvi", version, about = "Function-space variational inference benchmark on Bayesian linear regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep methods on the 1-D toy problem.
    Toy(SweepArgs),
    /// Sweep methods on a CSV regression dataset.
    Tabular(TabularArgs),
    /// Singularity and KL diagnostics.
    #[command(subcommand)]
    Theory(TheoryCommand),
    /// Oracle checks.
    #[command(subcommand)]
    Check(CheckCommand),
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Objective to train (repeatable) [default: all]
    #[arg(long = "method", value_name = "METHOD", value_parser = ["exact", "fixed-a", "rand-a", "ssge"])]
    pub methods: Vec<String>,
    /// Variational family (repeatable) [default: both]
    #[arg(long = "family", value_name = "FAMILY", value_parser = ["full", "ffg"])]
    pub families: Vec<String>,
    /// Measurement set size (repeatable) [default: 10 toy, 80 tabular]
    #[arg(long = "measure-size", value_name = "INT")]
    pub measure_sizes: Vec<usize>,
    /// Fraction of measurement points drawn from training inputs [default: 0.5]
    #[arg(long, value_name = "FLOAT")]
    pub data_fraction: Option<f64>,
    /// Adam steps [default: 5000 toy, 15000 tabular]
    #[arg(long, value_name = "INT")]
    pub steps: Option<usize>,
    /// Adam learning rate [default: 0.01]
    #[arg(long, value_name = "FLOAT")]
    pub lr: Option<f64>,
    /// Run this single seed
    #[arg(long, value_name = "INT", conflicts_with = "seeds")]
    pub seed: Option<u64>,
    /// Run seeds 0..N [default: 20]
    #[arg(long, value_name = "INT")]
    pub seeds: Option<u64>,
    /// Minibatch size for the likelihood term [default: full batch]
    #[arg(long, value_name = "INT")]
    pub minibatch: Option<usize>,
    /// Samples per SSGE gradient estimate [default: 100]
    #[arg(long, value_name = "INT")]
    pub ssge_samples: Option<usize>,
    /// Observation noise variance [default: 0.01]
    #[arg(long, value_name = "FLOAT")]
    pub noise_variance: Option<f64>,
    /// Output directory [default: output]
    #[arg(long, value_name = "DIR")]
    pub output: Option<PathBuf>,
    /// Worker threads [default: number of logical processors]
    #[arg(long, value_name = "INT")]
    pub jobs: Option<usize>,
    /// JSON file of flag values; flags given on the command line win
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TabularArgs {
    /// CSV dataset, last column is the target
    #[arg(long, value_name = "PATH")]
    pub dataset: Option<PathBuf>,
    /// Precomputed feature CSV with one row per dataset row
    #[arg(long, value_name = "PATH")]
    pub features: Option<PathBuf>,
    /// Fraction of rows used for training [default: 0.9]
    #[arg(long, value_name = "FLOAT")]
    pub split_fraction: Option<f64>,
    /// Number of k-means RBF features when no feature file is given [default: 100]
    #[arg(long, value_name = "INT")]
    pub num_features: Option<usize>,
    #[command(flatten)]
    pub sweep: SweepArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Number of RBF features, evenly spaced on [-2, 2]
    #[arg(long, value_name = "INT", default_value_t = 10)]
    pub num_features: usize,
    /// RBF feature lengthscale
    #[arg(long, value_name = "FLOAT", default_value_t = 0.4)]
    pub lengthscale: f64,
    /// Random seed
    #[arg(long, value_name = "INT", default_value_t = 0)]
    pub seed: u64,
    /// Also write the JSON report to this directory
    #[arg(long, value_name = "DIR")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum TheoryCommand {
    /// Ranks of the model and GP marginals at random points.
    Rank {
        #[command(flatten)]
        model: ModelArgs,
        /// Number of points [default: features + 1]
        #[arg(long, value_name = "INT")]
        num_points: Option<usize>,
        /// GP lengthscale
        #[arg(long, value_name = "FLOAT", default_value_t = 0.5)]
        gp_lengthscale: f64,
        /// Number of random point sets
        #[arg(long, value_name = "INT", default_value_t = 1)]
        trials: usize,
    },
    /// KL between jittered model marginals and a GP as the jitter shrinks.
    Blowup {
        #[command(flatten)]
        model: ModelArgs,
        /// Number of points [default: features + 1]
        #[arg(long, value_name = "INT")]
        num_points: Option<usize>,
        /// GP lengthscale
        #[arg(long, value_name = "FLOAT", default_value_t = 0.5)]
        gp_lengthscale: f64,
        /// Largest jitter
        #[arg(long, value_name = "FLOAT", default_value_t = 1e-2)]
        eps_max: f64,
        /// Smallest jitter
        #[arg(long, value_name = "FLOAT", default_value_t = 1e-12)]
        eps_min: f64,
        /// Number of log-spaced jitters
        #[arg(long, value_name = "INT", default_value_t = 21)]
        eps_count: usize,
        /// Fit the slope over jitters at or below this value
        #[arg(long, value_name = "FLOAT", default_value_t = 1e-8)]
        fit_below: f64,
    },
    /// Linear-piece counts of random one-hidden-layer ReLU networks.
    Pieces {
        /// First width
        #[arg(long, value_name = "INT", default_value_t = 3)]
        width_a: usize,
        /// Second width
        #[arg(long, value_name = "INT", default_value_t = 5)]
        width_b: usize,
        /// Networks drawn per width
        #[arg(long, value_name = "INT", default_value_t = 100)]
        draws: usize,
        /// Zero each output weight with this probability
        #[arg(long, value_name = "FLOAT")]
        zero_prob: Option<f64>,
        /// Random seed
        #[arg(long, value_name = "INT", default_value_t = 0)]
        seed: u64,
        /// Also write the JSON report to this directory
        #[arg(long, value_name = "DIR")]
        output: Option<PathBuf>,
    },
    /// Weight-space KL against the marginal KL at the feature centers.
    KlEquality {
        #[command(flatten)]
        model: ModelArgs,
        /// Number of random variational states
        #[arg(long, value_name = "INT", default_value_t = 50)]
        states: usize,
        /// Variational family
        #[arg(long, value_name = "FAMILY", value_parser = ["full", "ffg"], default_value = "full")]
        family: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum CheckCommand {
    /// Finite-difference checks of every analytic gradient.
    Gradients {
        /// Random instances per suite
        #[arg(long, value_name = "INT", default_value_t = 100)]
        instances: usize,
        /// Maximum relative error
        #[arg(long, value_name = "FLOAT", default_value_t = 1e-5)]
        tolerance: f64,
        /// Random seed
        #[arg(long, value_name = "INT", default_value_t = 0)]
        seed: u64,
        /// Also write the JSON report to this directory
        #[arg(long, value_name = "DIR")]
        output: Option<PathBuf>,
    },
}
