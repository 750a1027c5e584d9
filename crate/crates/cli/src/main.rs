mod args;
mod config;

use std::path::Path;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use fsvi_core::bench::{self, SummaryRow};
use fsvi_core::blr::BlrModel;
use fsvi_core::features::{FeatureMap, RbfFeatureMap};
use fsvi_core::gradcheck::{self, random_state};
use fsvi_core::theory::{self, GpPrior, WeightPrior};
use fsvi_core::variational::Family;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use args::{CheckCommand, Cli, Command, ModelArgs, TheoryCommand};

const USAGE: u8 = 1;
const FAILURE: u8 = 2;

/// Inputs of random theory diagnostics are drawn from this interval.
const POINT_RANGE: (f64, f64) = (-2.5, 2.5);

enum Failure {
    Usage(String),
    Run(String),
}

impl From<fsvi_core::Error> for Failure {
    fn from(e: fsvi_core::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(USAGE),
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(USAGE)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(FAILURE)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Toy(args) => sweep(config::resolve_toy(args).map_err(Failure::Usage)?),
        Command::Tabular(args) => sweep(config::resolve_tabular(args).map_err(Failure::Usage)?),
        Command::Theory(cmd) => run_theory(cmd),
        Command::Check(CheckCommand::Gradients {
            instances,
            tolerance,
            seed,
            output,
        }) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let reports = gradcheck::run_gradient_suites(instances, tolerance, &mut rng)?;
            for r in &reports {
                println!(
                    "{} {:<24} instances={} max_rel_error={:.3e} tolerance={:.1e}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.instances,
                    r.max_rel_error,
                    r.tolerance
                );
            }
            write_report(output.as_deref(), "check_gradients.json", &reports)?;
            if reports.iter().all(|r| r.passed) {
                Ok(())
            } else {
                Err(Failure::Run("gradient check failed".into()))
            }
        }
    }
}

fn sweep(resolved: config::Resolved) -> Result<(), Failure> {
    let out = &resolved.output;
    let outcome = bench::run_sweep(&resolved.config, Some(out), resolved.jobs)?;
    print_summary(&outcome.summary);
    println!("wrote {}", out.join("results.jsonl").display());
    match outcome.failures() {
        0 => Ok(()),
        n => Err(Failure::Run(format!("{n} of {} runs failed", outcome.results.len()))),
    }
}

fn print_summary(rows: &[SummaryRow]) {
    println!(
        "{:<10} {:<8} {:<6} {:>5} {:>14} {:>12} {:>12} {:>6}",
        "dataset", "method", "family", "|A|", "kl_to_post", "train_nlpd", "test_nlpd", "seeds"
    );
    for cell in rows.chunks(4) {
        let get = |name: &str| cell.iter().find(|r| r.metric == name).map_or(f64::NAN, |r| r.mean);
        let r = &cell[0];
        println!(
            "{:<10} {:<8} {:<6} {:>5} {:>14.4e} {:>12.4} {:>12.4} {:>6}",
            r.dataset,
            r.method.name(),
            r.family.to_string(),
            r.measure_size.map_or("-".to_string(), |m| m.to_string()),
            get("kl_to_posterior"),
            get("train_nlpd"),
            get("test_nlpd"),
            r.n_seeds
        );
    }
}

fn write_report<T: Serialize>(dir: Option<&Path>, name: &str, value: &T) -> Result<(), Failure> {
    let json = serde_json::to_string_pretty(value).map_err(|e| Failure::Run(e.to_string()))?;
    match dir {
        Some(d) => {
            std::fs::create_dir_all(d).map_err(|e| Failure::Run(e.to_string()))?;
            std::fs::write(d.join(name), json + "\n").map_err(|e| Failure::Run(e.to_string()))
        }
        None => Ok(()),
    }
}

fn model_for(args: &ModelArgs) -> Result<BlrModel, Failure> {
    if args.num_features == 0 {
        return Err(Failure::Usage("--num-features must be >= 1".into()));
    }
    let map = RbfFeatureMap::linspace_1d(args.num_features, -2.0, 2.0, args.lengthscale)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    BlrModel::new(FeatureMap::Rbf(map), 1.0).map_err(|e| Failure::Usage(e.to_string()))
}

fn random_points<R: Rng + ?Sized>(count: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(count, 1, |_, _| rng.random_range(POINT_RANGE.0..POINT_RANGE.1))
}

fn gp_for(lengthscale: f64) -> Result<GpPrior, Failure> {
    GpPrior::squared_exponential(DVector::from_element(1, lengthscale), 1.0).map_err(|e| Failure::Usage(e.to_string()))
}

#[derive(Serialize)]
struct BlowupReport {
    num_features: usize,
    num_points: usize,
    q_rank: usize,
    deficient_dims: usize,
    fit_below: f64,
    slope: Option<f64>,
    slope_per_deficient_dim: Option<f64>,
    curve: Vec<theory::BlowupPoint>,
}

#[derive(Serialize)]
struct KlEqualitySummary {
    num_features: usize,
    family: Family,
    max_rel_diff: f64,
    reports: Vec<theory::KlEqualityReport>,
}

fn run_theory(cmd: TheoryCommand) -> Result<(), Failure> {
    match cmd {
        TheoryCommand::Rank {
            model,
            num_points,
            gp_lengthscale,
            trials,
        } => {
            let blr = model_for(&model)?;
            let gp = gp_for(gp_lengthscale)?;
            let m = num_points.unwrap_or(model.num_features + 1);
            let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
            let mut reports = Vec::with_capacity(trials);
            for _ in 0..trials {
                let pts = random_points(m, &mut rng);
                let r = theory::marginal_rank_diagnostic(&blr, blr.prior(), &gp, &pts)?;
                println!("points={} features={} q_rank={} p_rank={}", r.num_points, r.num_features, r.q_rank, r.p_rank);
                reports.push(r);
            }
            write_report(model.output.as_deref(), "theory_rank.json", &reports)
        }
        TheoryCommand::Blowup {
            model,
            num_points,
            gp_lengthscale,
            eps_max,
            eps_min,
            eps_count,
            fit_below,
        } => {
            if !(eps_min > 0.0 && eps_min < eps_max) || eps_count < 2 {
                return Err(Failure::Usage("need 0 < --eps-min < --eps-max and --eps-count >= 2".into()));
            }
            let blr = model_for(&model)?;
            let gp = gp_for(gp_lengthscale)?;
            let m = num_points.unwrap_or(model.num_features + 1);
            let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
            let pts = random_points(m, &mut rng);
            let rank = theory::marginal_rank_diagnostic(&blr, blr.prior(), &gp, &pts)?;
            let (hi, lo) = (eps_max.ln(), eps_min.ln());
            let jitters: Vec<f64> = (0..eps_count)
                .map(|i| (hi + (lo - hi) * i as f64 / (eps_count - 1) as f64).exp())
                .collect();
            let curve = theory::kl_blowup_curve(&blr, &gp, &pts, &jitters)?;
            for p in &curve {
                println!("eps={:.3e} forward_kl={:.6} reverse_kl={:.6e}", p.epsilon, p.forward_kl, p.reverse_kl);
            }
            let slope = theory::blowup_slope(&curve, fit_below);
            let deficient = m - rank.q_rank;
            let per_dim = slope.filter(|_| deficient > 0).map(|s| s / deficient as f64);
            println!(
                "deficient_dims={deficient} slope={} per_dim={}",
                slope.map_or("n/a".into(), |s| format!("{s:.4}")),
                per_dim.map_or("n/a".into(), |s| format!("{s:.4}"))
            );
            let report = BlowupReport {
                num_features: model.num_features,
                num_points: m,
                q_rank: rank.q_rank,
                deficient_dims: deficient,
                fit_below,
                slope,
                slope_per_deficient_dim: per_dim,
                curve,
            };
            write_report(model.output.as_deref(), "theory_blowup.json", &report)
        }
        TheoryCommand::Pieces {
            width_a,
            width_b,
            draws,
            zero_prob,
            seed,
            output,
        } => {
            let prior = match zero_prob {
                None => WeightPrior::StandardNormal,
                Some(p) if (0.0..=1.0).contains(&p) => WeightPrior::SpikeOutput { zero_prob: p },
                Some(_) => return Err(Failure::Usage("--zero-prob must lie in [0, 1]".into())),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let report = theory::width_singularity_report(width_a, width_b, draws, prior, &mut rng)
                .map_err(|e| Failure::Usage(e.to_string()))?;
            println!("width {width_a}: pieces {:?}", report.pieces_a);
            println!("width {width_b}: pieces {:?}", report.pieces_b);
            println!("overlap={}", report.overlap);
            write_report(output.as_deref(), "theory_pieces.json", &report)
        }
        TheoryCommand::KlEquality { model, states, family } => {
            let family: Family = family.parse().map_err(|e: fsvi_core::Error| Failure::Usage(e.to_string()))?;
            let blr = model_for(&model)?;
            let FeatureMap::Rbf(map) = &blr.feature_map else {
                unreachable!("theory models use RBF features")
            };
            let witness = map.centers().clone();
            let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
            let mut reports = Vec::with_capacity(states);
            for _ in 0..states {
                let st = random_state(family, model.num_features, &mut rng);
                reports.push(theory::kl_equality_check(&blr, &st, &witness)?);
            }
            let max_rel_diff = reports.iter().map(|r| r.rel_diff).fold(0.0, f64::max);
            println!("states={states} max_rel_diff={max_rel_diff:.3e}");
            let summary = KlEqualitySummary {
                num_features: model.num_features,
                family,
                max_rel_diff,
                reports,
            };
            write_report(model.output.as_deref(), "theory_kl_equality.json", &summary)
        }
    }
}
