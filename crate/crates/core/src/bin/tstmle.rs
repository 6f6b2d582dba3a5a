//! Command-line interface: truth computation, trial simulation, single-trial
//! analysis, and the full benchmark table.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use two_stage_tmle::data::{load_trial_csv, validate, write_trial_csv};
use two_stage_tmle::harness::{
    aggregate_metrics, analyze_trial, format_table1, run_replicates, trial_checksum,
    write_replicates_csv, write_summary_csv, EstimatorConfig, RunConfig,
};
use two_stage_tmle::seeds::{derive_seed, tag};
use two_stage_tmle::simgen::{compute_truth, generate_trial};
use two_stage_tmle::stage1::Stage1Method;
use two_stage_tmle::stage2::Stage2Method;

#[derive(Parser)]
#[command(
    name = "tstmle",
    about = "Two-stage TMLE for counterfactual strata effects in cluster-randomized trials",
    version
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the true effect under the configured data-generating process.
    Truth {
        #[command(flatten)]
        common: ConfigArgs,
    },
    /// Simulate trial CSV files.
    Simulate {
        #[command(flatten)]
        common: ConfigArgs,
        /// Output CSV path (with --count > 1, files get a numeric suffix).
        #[arg(long)]
        out: PathBuf,
        /// Number of trials to emit.
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Analyze one trial CSV and print the effect estimate as JSON.
    Analyze {
        /// Trial CSV file.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "tmle")]
        stage1: Stage1ArgValue,
        #[arg(long, value_enum, default_value = "tmle-aps")]
        stage2: Stage2ArgValue,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Adjust for the post-baseline covariate l in Stage 1.
        #[arg(long)]
        adjust_l: bool,
        /// Write the JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full benchmark: every estimator over many replicates.
    Table1 {
        #[command(flatten)]
        common: ConfigArgs,
        /// Replicates (overrides the config).
        #[arg(long)]
        reps: Option<usize>,
        /// Summary CSV output path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-replicate CSV output path.
        #[arg(long)]
        per_rep: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Stage1ArgValue {
    Screened,
    Eligible,
    Unadjusted,
    Tmle,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Stage2ArgValue {
    Unadjusted,
    TmleAps,
}

impl From<Stage1ArgValue> for Stage1Method {
    fn from(v: Stage1ArgValue) -> Self {
        match v {
            Stage1ArgValue::Screened => Stage1Method::Screened,
            Stage1ArgValue::Eligible => Stage1Method::Eligible,
            Stage1ArgValue::Unadjusted => Stage1Method::Unadjusted,
            Stage1ArgValue::Tmle => Stage1Method::Tmle,
        }
    }
}

impl From<Stage2ArgValue> for Stage2Method {
    fn from(v: Stage2ArgValue) -> Self {
        match v {
            Stage2ArgValue::Unadjusted => Stage2Method::Unadjusted,
            Stage2ArgValue::TmleAps => Stage2Method::TmleAps,
        }
    }
}

fn load_run_config(common: &ConfigArgs) -> two_stage_tmle::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> two_stage_tmle::Result<()> {
    let quiet = cli.quiet;
    match cli.command {
        Command::Truth { common } => {
            let cfg = load_run_config(&common)?;
            let truth = compute_truth(&cfg.sim, cfg.seed)?;
            println!("psi_star = {:.6} ({:.2}%)", truth.psi_star, 100.0 * truth.psi_star);
            println!(
                "Yc*(1) = {:.6}  Yc*(0) = {:.6}  clusters used = {}  dropped = {}",
                truth.yc1_mean, truth.yc0_mean, truth.clusters_used, truth.clusters_dropped
            );
        }
        Command::Simulate { common, out, count } => {
            let cfg = load_run_config(&common)?;
            for i in 0..count {
                let trial_seed = derive_seed(cfg.seed, &[tag::REPLICATE, i as u64]);
                let trial = generate_trial(&cfg.sim, trial_seed)?;
                let report = validate(&trial);
                if !report.is_empty() {
                    return Err(two_stage_tmle::Error::Validation(format!(
                        "generated trial failed validation:\n{report}"
                    )));
                }
                let path = if count == 1 {
                    out.clone()
                } else {
                    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("trial");
                    let ext = out.extension().and_then(|s| s.to_str()).unwrap_or("csv");
                    out.with_file_name(format!("{stem}-{i:04}.{ext}"))
                };
                write_trial_csv(&trial, &path)?;
                if !quiet {
                    eprintln!(
                        "wrote {} (J = {}, checksum {:016x})",
                        path.display(),
                        trial.j(),
                        trial_checksum(&trial)
                    );
                }
            }
        }
        Command::Analyze { data, stage1, stage2, seed, adjust_l, out } => {
            let trial = load_trial_csv(&data)?;
            let mut config = EstimatorConfig::new(stage1.into(), stage2.into());
            config.adjust_l = adjust_l;
            let analyzed = analyze_trial(&trial, &config, seed)?;
            let e = &analyzed.estimate;
            let selection = e.selection.as_ref().map(|s| {
                serde_json::json!({
                    "q_spec": s.q_spec.describe(),
                    "g_spec": s.g_spec.describe(),
                    "cv_risk": s.cv_risk,
                    "candidate_risks": s.candidate_risks,
                })
            });
            let json = serde_json::json!({
                "method": config.name(),
                "psi": e.psi,
                "se": e.se,
                "df": e.df,
                "ci_lo": e.ci_lo,
                "ci_hi": e.ci_hi,
                "p_value": e.p_value,
                "dropped_clusters": analyzed.dropped_clusters,
                "selection": selection,
            });
            let text = serde_json::to_string_pretty(&json)
                .map_err(|err| two_stage_tmle::Error::Computation(err.to_string()))?;
            match out {
                Some(path) => {
                    let mut f = BufWriter::new(File::create(path)?);
                    writeln!(f, "{text}")?;
                }
                None => println!("{text}"),
            }
        }
        Command::Table1 { common, reps, out, per_rep } => {
            let mut cfg = load_run_config(&common)?;
            if let Some(r) = reps {
                cfg.reps = r;
            }
            if !quiet {
                eprintln!(
                    "computing truth over {} clusters...",
                    cfg.sim.truth_clusters
                );
            }
            let truth = compute_truth(&cfg.sim, cfg.seed)?;
            if !quiet {
                eprintln!("psi_star = {:.6}; running {} replicates...", truth.psi_star, cfg.reps);
            }
            let results = run_replicates(&cfg.sim, &cfg.estimators, cfg.reps, cfg.seed)?;
            let metrics = aggregate_metrics(&results, &cfg.estimators, &truth, 0.05);
            print!("{}", format_table1(&metrics, &truth));
            if let Some(path) = out {
                write_summary_csv(&metrics, &truth, BufWriter::new(File::create(&path)?))?;
                if !quiet {
                    eprintln!("summary written to {}", path.display());
                }
            }
            if let Some(path) = per_rep {
                write_replicates_csv(
                    &results,
                    &cfg.estimators,
                    BufWriter::new(File::create(&path)?),
                )?;
                if !quiet {
                    eprintln!("per-replicate results written to {}", path.display());
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
