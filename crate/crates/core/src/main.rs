use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use lrvlab::cluster_model::{block_model, build_structure};
use lrvlab::graphs::{graph_stats, DependencyGraph};
use lrvlab::harness::{env_seed, run_suite, RunOptions, SuiteConfig};

#[derive(Parser)]
#[command(name = "lrvlab", version, about = "Long-run variance Monte Carlo lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment suite and write report.csv / report.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides LRVLAB_SEED and the config's master seeds.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        /// Write only this format (both by default).
        #[arg(long, value_enum)]
        format: Option<OutFormat>,
    },
    /// Closed-form spectrum and long-run variance of a block model.
    Spectral {
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        deltas: Vec<f64>,
    },
    /// Degree and clique statistics of a graph given as {"n", "edges"}.
    Stats {
        #[arg(long)]
        graph: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            seed,
            threads,
            format,
        } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let suite = SuiteConfig::from_json(&text)?;
            let seed_override = match seed {
                Some(s) => Some(s),
                None => env_seed()?,
            };
            let report = run_suite(
                &suite,
                &RunOptions {
                    seed_override,
                    threads,
                },
            )?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            if !matches!(format, Some(OutFormat::Json)) {
                fs::write(out.join("report.csv"), report.to_csv())?;
            }
            if !matches!(format, Some(OutFormat::Csv)) {
                fs::write(out.join("report.json"), report.to_json()?)?;
            }
            let failed: Vec<_> = report.cells.iter().filter(|c| c.error.is_some()).collect();
            for c in &failed {
                eprintln!(
                    "cell {}/{} n={} failed: {}",
                    c.experiment,
                    c.design_id,
                    c.n,
                    c.error.as_deref().unwrap_or("")
                );
            }
            eprintln!(
                "{} cells ({} failed) written to {}",
                report.cells.len(),
                failed.len(),
                out.display()
            );
        }
        Command::Spectral { sizes, deltas } => {
            let cs = build_structure(&sizes)?;
            let model = block_model(&cs, &deltas, None)?;
            let value = json!({
                "spectrum": model.spectrum(),
                "log_det": model.spectrum().log_det(),
                "sigma_lr": model.long_run_variance(),
                "n": cs.n(),
                "n_star": cs.n_star(),
                "h": cs.heterogeneity(),
                "max_share": cs.max_cluster_share(),
            });
            println!("{}", serde_json::to_string_pretty(&value)?);
        }
        Command::Stats { graph } => {
            let text = fs::read_to_string(&graph)
                .with_context(|| format!("reading {}", graph.display()))?;
            let g: DependencyGraph = serde_json::from_str(&text)?;
            println!("{}", serde_json::to_string_pretty(&graph_stats(&g))?);
        }
    }
    Ok(())
}
