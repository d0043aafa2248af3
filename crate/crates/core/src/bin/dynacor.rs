use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dynacor::config::RunConfig;
use dynacor::eval::Method;
use dynacor::pipeline::{self, artifacts, EvalSummary};
use dynacor::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_STAGE: u8 = 3;

#[derive(Parser)]
#[command(name = "dynacor", version, about = "Label-noise detection from training dynamics")]
struct Cli {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate clean blobs.
    Synth,
    /// Apply the noise process to the clean blobs.
    Inject,
    /// Build the corrupted companion set.
    Corrupt,
    /// Train the classifier and record dynamics.
    Train,
    /// Fit the dynamics encoder and write a report.
    Detect {
        #[arg(long)]
        dynamics: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the configured baselines.
    Baseline {
        #[arg(long)]
        dynamics: Option<PathBuf>,
    },
    /// Score a report against the dynamics truth column.
    Eval {
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        dynamics: Option<PathBuf>,
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Every stage in order.
    Pipeline,
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidConfig(_)
            | Error::InvalidNoiseSpec(_)
            | Error::InvalidCorruptionConfig(_)
            | Error::InvalidClassCount(_)
    )
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| match e {
            Error::Io(io) => Error::InvalidConfig(format!("{}: {io}", path.display())),
            other => other,
        })?,
        None => RunConfig::from_json("{}")?,
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn print_eval(s: &EvalSummary) {
    println!(
        "{:<12} precision {:.4}  recall {:.4}  f1 {:.4}  flagged {}/{}",
        s.method.name(),
        s.precision,
        s.recall,
        s.f1,
        s.flagged,
        s.instances
    );
}

fn run(cli: &Cli, cfg: &RunConfig) -> Result<(), Error> {
    let dir = cfg.out_dir.as_path();
    let _lock = pipeline::RunLock::acquire(dir)?;
    match &cli.command {
        Command::Synth => drop(pipeline::synth(cfg, dir)?),
        Command::Inject => drop(pipeline::inject(cfg, dir)?),
        Command::Corrupt => drop(pipeline::corrupt_stage(cfg, dir)?),
        Command::Train => drop(pipeline::train(cfg, dir)?),
        Command::Detect { dynamics, report } => {
            let dynamics = dynamics.clone().unwrap_or_else(|| dir.join(artifacts::DYNAMICS));
            let report_path = report
                .clone()
                .unwrap_or_else(|| dir.join(artifacts::report(Method::Dynacor)));
            let model = report_path.with_file_name(artifacts::MODEL);
            let r = pipeline::detect_file(&dynamics, &cfg.encoder, &report_path, Some(&model))?;
            if !cli.quiet {
                println!("flagged {} of {}", r.flagged(), r.verdicts.len());
            }
        }
        Command::Baseline { dynamics } => {
            let dynamics = dynamics
                .clone()
                .unwrap_or_else(|| dir.join(artifacts::MARGIN_DYNAMICS));
            for &m in cfg.eval.methods.iter().filter(|m| **m != Method::Dynacor) {
                let r = pipeline::baseline_file(&dynamics, m, cfg.classifier.seed, &dir.join(artifacts::report(m)))?;
                if !cli.quiet {
                    println!("{:<12} flagged {} of {}", m.name(), r.flagged(), r.verdicts.len());
                }
            }
        }
        Command::Eval {
            report,
            dynamics,
            summary,
        } => {
            let dynamics = dynamics.clone().unwrap_or_else(|| dir.join(artifacts::DYNAMICS));
            let reports: Vec<(PathBuf, PathBuf)> = match report {
                Some(r) => vec![(r.clone(), summary.clone().unwrap_or_else(|| r.with_extension("eval.json")))],
                None => cfg
                    .eval
                    .methods
                    .iter()
                    .map(|&m| (dir.join(artifacts::report(m)), dir.join(artifacts::eval(m))))
                    .collect(),
            };
            for (r, s) in reports {
                let e = pipeline::eval_file(&r, &dynamics, &s)?;
                print_eval(&e);
                match e.flag_all_f1 {
                    Some(f) => println!("{:<12} f1 {f:.4}  (noise rate {:.4})", "flag-all", e.noise_rate),
                    None => println!("{:<12} undefined at zero noise", "flag-all"),
                }
            }
        }
        Command::Pipeline => unreachable!("handled by main"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("DYNA_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Command::Pipeline = cli.command {
        return match pipeline::run_pipeline(&cfg) {
            Ok(summary) => {
                if !cli.quiet {
                    for m in &summary.methods {
                        print_eval(m);
                    }
                    if let Some(f) = summary.flag_all_f1 {
                        println!("{:<12} f1 {f:.4}", "flag-all");
                    }
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(EXIT_STAGE)
            }
        };
    }
    match run(&cli, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_config_error(&e) { EXIT_CONFIG } else { EXIT_STAGE })
        }
    }
}
