//! End to end: every stage writes its artifact into a run directory, then
//! each method is scored against the truth column.
//!
//! `cargo run --release --example pipeline -- [out_dir] [seed]`

use std::path::PathBuf;

use dynacor::config::RunConfig;
use dynacor::pipeline::run_pipeline;

fn main() {
    let mut args = std::env::args().skip(1);
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("dynacor-pipeline-example"));
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);

    let mut cfg = RunConfig::default().with_seed(seed);
    cfg.out_dir = out.clone();
    match run_pipeline(&cfg) {
        Ok(summary) => {
            println!("artifacts in {}", out.display());
            println!("measured noise rate {:.4}", summary.measured_noise_rate);
            for m in &summary.methods {
                println!(
                    "{:<12} precision {:.4} recall {:.4} f1 {:.4} flagged {}/{}",
                    m.method.name(),
                    m.precision,
                    m.recall,
                    m.f1,
                    m.flagged,
                    m.instances
                );
            }
            if let Some(f) = summary.flag_all_f1 {
                println!("{:<12} f1 {f:.4}", "flag-all");
            }
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(3);
        }
    }
}
