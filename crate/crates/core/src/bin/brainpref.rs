use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use brainpref::config::PipelineConfig;
use brainpref::evaluation::Task;
use brainpref::pipeline::{self, Layout, Stage, StageError};
use brainpref::preprocess::RejectionPolicy;
use brainpref::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_STAGE: u8 = 3;
const EXIT_INVARIANT: u8 = 4;

#[derive(Parser)]
#[command(name = "brainpref", version, about = "Single-trial ERP preference decoding pipeline")]
struct Cli {
    /// TOML configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// master seed; overrides the config file
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// worker threads (default: all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// work directory; overrides the config file
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate recordings and ground-truth ratings
    Simulate {
        /// cohort size; overrides the config file
        #[arg(long)]
        n_participants: Option<usize>,
    },
    /// Filter, epoch, baseline-correct and reject artifacts
    Preprocess(PreprocessArgs),
    /// Attach explicit and group labels to epochs
    Label,
    /// Write windowed-mean feature vectors
    Featurize,
    /// Leave-one-out AUC with a permutation test
    Evaluate {
        #[arg(long, value_enum, default_value = "explicit")]
        task: TaskArg,
        /// label permutations per participant
        #[arg(long)]
        n_perm: Option<usize>,
    },
    /// ERP curves, repeated-measures ANOVA, post hoc and signed-rank tests
    Stats,
    /// Every stage in order, then the artifact manifest
    Run,
}

#[derive(Args)]
struct PreprocessArgs {
    /// lower band edge (Hz)
    #[arg(long)]
    low_hz: Option<f64>,
    /// upper band edge (Hz)
    #[arg(long)]
    high_hz: Option<f64>,
    /// Butterworth band-pass order
    #[arg(long)]
    order: Option<usize>,
    /// artifact rejection rule
    #[arg(long, value_enum)]
    rejection_mode: Option<RejectionMode>,
    /// threshold in uV, or the target rejection fraction
    #[arg(long)]
    rejection_value: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Explicit,
    Group,
}

#[derive(Clone, Copy, ValueEnum)]
enum RejectionMode {
    FixedThreshold,
    TargetFraction,
}

fn load_config(cli: &Cli) -> brainpref::Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if let Some(w) = &cli.workdir {
        cfg.paths.workdir = w.clone();
    }
    match &cli.command {
        Command::Simulate { n_participants: Some(n) } => cfg.simulation.n_participants = *n,
        Command::Evaluate { n_perm: Some(n), .. } => cfg.evaluation.n_perm = *n,
        Command::Preprocess(a) => {
            if let Some(v) = a.low_hz {
                cfg.filter.low_hz = v;
            }
            if let Some(v) = a.high_hz {
                cfg.filter.high_hz = v;
            }
            if let Some(v) = a.order {
                cfg.filter.order = v;
            }
            let (mode, value) = match cfg.rejection {
                RejectionPolicy::FixedThreshold(v) => (RejectionMode::FixedThreshold, v),
                RejectionPolicy::TargetFraction(v) => (RejectionMode::TargetFraction, v),
            };
            let mode = a.rejection_mode.unwrap_or(mode);
            let value = a.rejection_value.unwrap_or(match (mode, cfg.rejection) {
                (RejectionMode::FixedThreshold, RejectionPolicy::TargetFraction(_)) => 100.0,
                (RejectionMode::TargetFraction, RejectionPolicy::FixedThreshold(_)) => 0.122,
                _ => value,
            });
            cfg.rejection = match mode {
                RejectionMode::FixedThreshold => RejectionPolicy::FixedThreshold(value),
                RejectionMode::TargetFraction => RejectionPolicy::TargetFraction(value),
            };
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_stage(cfg: &PipelineConfig, command: &Command) -> Result<(), StageError> {
    let layout = Layout::new(&cfg.paths.workdir);
    let at = |stage: Stage| move |source: Error| StageError { stage, source };
    std::fs::create_dir_all(&layout.root)
        .map_err(Error::from)
        .map_err(at(Stage::Simulate))?;
    match command {
        Command::Simulate { .. } => {
            pipeline::simulate(cfg, &layout).map_err(at(Stage::Simulate))?;
            println!(
                "simulated {} participants into {}",
                cfg.simulation.n_participants,
                layout.recordings().display()
            );
        }
        Command::Preprocess(_) => {
            let summaries = pipeline::preprocess(cfg, &layout).map_err(at(Stage::Preprocess))?;
            for s in summaries {
                println!("{}", serde_json::to_string(&s).expect("summary serializes"));
            }
        }
        Command::Label => {
            for s in pipeline::label(&layout).map_err(at(Stage::Label))? {
                let group = match s.group {
                    pipeline::GroupStatus::Ok { histogram } => format!("group {histogram:?}"),
                    pipeline::GroupStatus::NotApplicable { reason } => format!("group not applicable: {reason}"),
                };
                println!("{} explicit {:?} {group}", s.participant_id, s.explicit_histogram);
            }
        }
        Command::Featurize => {
            pipeline::featurize(&layout).map_err(at(Stage::Featurize))?;
            println!("features written to {}", layout.features_dir().display());
        }
        Command::Evaluate { task, .. } => {
            let task = match task {
                TaskArg::Explicit => Task::Explicit,
                TaskArg::Group => Task::Group,
            };
            let file = pipeline::evaluate(cfg, &layout, task).map_err(at(Stage::Evaluate(task)))?;
            match &file.summary {
                Some(s) => {
                    for p in &s.participants {
                        println!(
                            "{} auc {:.3} p {:.4}{}",
                            p.participant_id,
                            p.auc,
                            p.p_value,
                            if p.significant { " *" } else { "" }
                        );
                    }
                    println!(
                        "{}: {}/{} significant at alpha {}, mean auc {:.3} (sd {:.3})",
                        task.name(),
                        s.significant_count,
                        s.n_participants,
                        s.alpha,
                        s.mean_auc,
                        s.sd_auc
                    );
                }
                None => println!("{}: no participant could be evaluated", task.name()),
            }
            for e in &file.not_applicable {
                println!("{} not applicable: {}", e.participant_id, e.reason);
            }
        }
        Command::Stats => {
            let report = pipeline::stats(cfg, &layout).map_err(at(Stage::Stats))?;
            for t in &report.tasks {
                for c in &t.channels {
                    match (&c.anova, c.peak_center_ms) {
                        (Some(a), Some(peak)) => {
                            let bin = a.bins.iter().find(|b| b.center_ms == peak).expect("peak bin");
                            println!(
                                "{} {}: peak F({}, {}) = {:.2} at {peak} ms, adjusted p {:.4}",
                                t.task.name(),
                                c.channel,
                                bin.stat.df1,
                                bin.stat.df2,
                                bin.stat.f,
                                bin.p_adjusted
                            );
                        }
                        _ => println!(
                            "{} {}: {}",
                            t.task.name(),
                            c.channel,
                            c.note.as_deref().unwrap_or("no ANOVA")
                        ),
                    }
                }
            }
            println!("note: {}", report.caveat);
        }
        Command::Run => {
            let manifest = pipeline::run_pipeline(cfg)?;
            println!(
                "{} artifacts listed in {}",
                manifest.artifacts.len(),
                layout.manifest().display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run_stage(&cfg, &cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e.source {
                Error::Invariant(_) => ExitCode::from(EXIT_INVARIANT),
                _ => ExitCode::from(EXIT_STAGE),
            }
        }
    }
}
