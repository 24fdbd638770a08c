//! Command-line front end for the Monte Carlo harness and EXIT tooling.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use tdmr_sim::config::ExperimentConfig;
use tdmr_sim::exit_sweep::{curve_csv, run_exit_sweep, WEIGHT_CANDIDATES};
use tdmr_sim::harness::{emit_report, read_baseline, run_ber_point, search_max_rate};

#[derive(Parser)]
#[command(name = "tdmr-sim", about = "TDMR read-channel Monte Carlo harness", version)]
struct Cli {
    /// Experiment config file (flat key = value text).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in preset: "desk" or "full"; the base a config file overrides.
    #[arg(long, global = true, default_value = "desk")]
    preset: String,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Parallel worker count (default: all cores). Outputs do not depend on
    /// this.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search the maximum feasible code rate over the config's p2/SNR grids
    /// and emit points.csv, diagnostics, and report.txt.
    Run {
        /// No-ISI baseline rates for the penalty column: "p2,rate" CSV.
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Measure a single (p2, snr, rate) point.
    BerPoint {
        #[arg(long)]
        p2: f64,
        #[arg(long)]
        snr: f64,
        #[arg(long)]
        rate: f64,
    },
    /// Trace EXIT curves and select the exchange weight at one operating
    /// point.
    ExitSweep {
        #[arg(long)]
        p2: f64,
        #[arg(long)]
        snr: f64,
        #[arg(long)]
        rate: f64,
        /// Comma-separated candidate weights.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        weights: Option<Vec<f64>>,
    },
    /// Dump the grain-process trellis as text.
    Trellis {
        #[arg(long)]
        p2: f64,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            let mut base = format!("preset = {}\n", cli.preset);
            base.push_str(&text);
            ExperimentConfig::from_text(&base)?
        }
        None => ExperimentConfig::preset(&cli.preset)?,
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn ensure_on_grid(grid: &mut Vec<f64>, v: f64) {
    if !grid.contains(&v) {
        grid.push(v);
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if n == 0 {
            bail!("--workers must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker pool")?;
    }
    let mut cfg = load_config(&cli)?;
    fs::create_dir_all(&cli.out)?;

    match &cli.command {
        Command::Run { baseline } => {
            let baseline = baseline
                .as_ref()
                .map(|p| -> Result<_> {
                    let text = fs::read_to_string(p)
                        .with_context(|| format!("reading baseline {}", p.display()))?;
                    Ok(read_baseline(&text)?)
                })
                .transpose()?;
            let mut runs = Vec::new();
            for &p2 in &cfg.p2_grid.clone() {
                for &snr in &cfg.snr_db_grid.clone() {
                    eprintln!("searching max rate at p2 {p2}, snr {snr} dB ...");
                    let search = search_max_rate(&cfg, p2, snr)?;
                    let p = &search.best.point;
                    eprintln!(
                        "  rate {} ({} user bits/grain), BER {}, {:.1} s, {} points evaluated",
                        p.code_rate,
                        p.user_bits_per_grain,
                        p.measured_ber,
                        search.evaluated.iter().map(|e| e.wall_time).sum::<f64>(),
                        search.evaluated.len()
                    );
                    runs.push(search.best);
                }
            }
            emit_report(&runs, baseline.as_deref(), &cli.out)?;
            eprintln!("wrote {}", cli.out.join("points.csv").display());
        }
        Command::BerPoint { p2, snr, rate } => {
            ensure_on_grid(&mut cfg.p2_grid, *p2);
            ensure_on_grid(&mut cfg.snr_db_grid, *snr);
            let run = run_ber_point(&cfg, *p2, *snr, *rate)?;
            let p = &run.point;
            eprintln!(
                "p2 {} snr {} dB rate {}: BER {} ({} errors / {} blocks), {} in {:.1} s",
                p.p2,
                p.snr_db,
                p.code_rate,
                p.measured_ber,
                p.total_errors,
                p.blocks_run,
                if p.passed { "pass" } else { "fail" },
                p.wall_time
            );
            emit_report(&[run], None, &cli.out)?;
        }
        Command::ExitSweep {
            p2,
            snr,
            rate,
            weights,
        } => {
            let candidates = weights.clone().unwrap_or_else(|| WEIGHT_CANDIDATES.to_vec());
            let sweep = run_exit_sweep(&cfg, *p2, *snr, *rate, &candidates)?;
            let dir = cli.out.join("exit");
            fs::create_dir_all(&dir)?;
            fs::write(dir.join("sccc_curve.csv"), curve_csv(&sweep.sccc_curve))?;
            for (w, curve) in &sweep.detector_curves {
                fs::write(dir.join(format!("detector_w_{w}.csv")), curve_csv(curve))?;
            }
            let mut summary = String::new();
            for (w, d) in &sweep.distances {
                summary.push_str(&format!(
                    "w = {w}: second-point distance {}, touch = {}\n",
                    d.distance, d.touch
                ));
            }
            summary.push_str(&format!("selected weight: {}\n", sweep.selected_weight));
            fs::write(dir.join("selection.txt"), &summary)?;
            eprint!("{summary}");
        }
        Command::Trellis { p2 } => {
            let probs = tdmr_core::dgm::derive_grain_probs(*p2)?;
            let trellis = tdmr_core::detector::build_trellis(&probs)?;
            let path = cli.out.join(format!("trellis_p2_{p2}.txt"));
            fs::write(&path, trellis.to_text())?;
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}
