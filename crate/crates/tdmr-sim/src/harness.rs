//! Monte Carlo harness: seeded block batches, rate search, and report
//! emission.
//!
//! Every block job's seed is `derive_seed(master_seed, [p2_index, snr_index,
//! rate_step, block_index])` where the indices address the config grids and
//! `rate_step = round(rate / 0.01)`; the mix is the splitmix-style 64-bit
//! finalizer in `tdmr_core::rng`. Jobs run in parallel but results are
//! reduced in block-index order, so worker count never changes any output.
//! Wall times are reported to the console only — output files are a pure
//! function of (config, master_seed).

use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use tdmr_core::dgm::derive_grain_probs;
use tdmr_core::exit::{MI_BINS, MI_RANGE};
use tdmr_core::isi::IsiMask;
use tdmr_core::pipeline::{ChainConfig, ChainContext, ReadDiagnostics};
use tdmr_core::rng::derive_seed;

use crate::config::ExperimentConfig;
use crate::Error;

/// Granularity of the rate search grid; also defines the seed-word encoding
/// of a rate.
pub const RATE_STEP: f64 = 0.01;
/// Inclusive rate-search bounds, in `RATE_STEP` units.
pub const RATE_MIN_STEPS: u64 = 5;
pub const RATE_MAX_STEPS: u64 = 95;

/// One measured operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    pub p2: f64,
    pub snr_db: f64,
    pub code_rate: f64,
    /// Exactly `2 * code_rate`: one grain carries two coded bits.
    pub user_bits_per_grain: f64,
    pub measured_ber: f64,
    pub total_errors: usize,
    pub blocks_run: usize,
    /// Seconds spent measuring this point; console diagnostics only, never
    /// written to output files.
    pub wall_time: f64,
    /// Whether the point met the error budget.
    pub passed: bool,
}

/// A measured point plus its per-block read diagnostics (block order).
#[derive(Debug, Clone)]
pub struct BerPointRun {
    pub point: RatePoint,
    pub diagnostics: Vec<ReadDiagnostics>,
}

fn rate_steps(rate: f64) -> u64 {
    (rate / RATE_STEP).round() as u64
}

fn grid_index(grid: &[f64], v: f64, what: &str) -> Result<u64, Error> {
    grid.iter()
        .position(|&g| g == v)
        .map(|i| i as u64)
        .ok_or_else(|| Error::Config(format!("{what} value {v} is not in the config grid")))
}

/// Seed of one block job.
pub fn block_seed(cfg: &ExperimentConfig, p2: f64, snr_db: f64, rate: f64, block: usize) -> Result<u64, Error> {
    let p2_idx = grid_index(&cfg.p2_grid, p2, "p2")?;
    let snr_idx = grid_index(&cfg.snr_db_grid, snr_db, "snr_db")?;
    Ok(derive_seed(
        cfg.master_seed,
        &[p2_idx, snr_idx, rate_steps(rate), block as u64],
    ))
}

fn chain_config(cfg: &ExperimentConfig, p2: f64, snr_db: f64, rate: f64) -> Result<ChainConfig, Error> {
    Ok(ChainConfig {
        info_len: cfg.info_len,
        target_rate: rate,
        probs: derive_grain_probs(p2)?,
        mask: IsiMask::averaging_2x2(),
        snr_db,
        cols: cfg.cols,
        master_seed: cfg.master_seed,
        schedule: cfg.schedule,
    })
}

/// Measures one (p2, snr, rate) point: `min_blocks` seeded blocks through
/// the full write/read chain, errors accumulated in block order.
pub fn run_ber_point(
    cfg: &ExperimentConfig,
    p2: f64,
    snr_db: f64,
    rate: f64,
) -> Result<BerPointRun, Error> {
    cfg.validate()?;
    let start = Instant::now();
    let ctx = ChainContext::new(chain_config(cfg, p2, snr_db, rate)?)?;
    let seeds: Vec<u64> = (0..cfg.min_blocks)
        .map(|b| block_seed(cfg, p2, snr_db, rate, b))
        .collect::<Result<_, _>>()?;

    // Parallel over blocks; `collect` keeps block order, so the reduction is
    // independent of the worker count.
    let results: Vec<Result<(usize, ReadDiagnostics), Error>> = seeds
        .par_iter()
        .enumerate()
        .map(|(b, &seed)| {
            let run = || -> Result<(usize, ReadDiagnostics), tdmr_core::Error> {
                let blk = ctx.write_block(seed)?;
                let out = ctx.run_read_chain(&blk.received, blk.sigma, Some(&blk.info_bits))?;
                let errors = out
                    .info_bits
                    .iter()
                    .zip(&blk.info_bits)
                    .filter(|(a, b)| a != b)
                    .count();
                Ok((errors, out.diagnostics))
            };
            run().map_err(|e| Error::Config(format!("block {b}: {e}")))
        })
        .collect();

    let mut total_errors = 0usize;
    let mut diagnostics = Vec::with_capacity(cfg.min_blocks);
    for r in results {
        let (errors, diag) = r?;
        total_errors += errors;
        diagnostics.push(diag);
    }
    let bits = cfg.min_blocks * cfg.info_len;
    let point = RatePoint {
        p2,
        snr_db,
        code_rate: rate,
        user_bits_per_grain: 2.0 * rate,
        measured_ber: total_errors as f64 / bits as f64,
        total_errors,
        blocks_run: cfg.min_blocks,
        wall_time: start.elapsed().as_secs_f64(),
        passed: total_errors <= cfg.max_errors,
    };
    Ok(BerPointRun { point, diagnostics })
}

/// Result of a maximum-rate search.
#[derive(Debug, Clone)]
pub struct RateSearch {
    /// Highest measured rate meeting the error budget.
    pub best: BerPointRun,
    /// Every point measured during the search, in evaluation order.
    pub evaluated: Vec<RatePoint>,
}

/// Bisects the rate grid for the highest rate whose measured point passes
/// the error budget. On return either `best` sits at the search upper bound
/// or the next grid rate above it was measured and failed (bracketing).
pub fn search_max_rate(cfg: &ExperimentConfig, p2: f64, snr_db: f64) -> Result<RateSearch, Error> {
    let mut evaluated = Vec::new();
    let mut measure = |steps: u64| -> Result<BerPointRun, Error> {
        let run = run_ber_point(cfg, p2, snr_db, steps as f64 * RATE_STEP)?;
        evaluated.push(run.point.clone());
        Ok(run)
    };

    let lo_run = measure(RATE_MIN_STEPS)?;
    if !lo_run.point.passed {
        return Err(Error::Config(format!(
            "no feasible rate at p2 {p2}, snr {snr_db} dB: rate {} failed with {} errors over {} blocks (budget {})",
            lo_run.point.code_rate, lo_run.point.total_errors, lo_run.point.blocks_run, cfg.max_errors
        )));
    }
    let hi_run = measure(RATE_MAX_STEPS)?;
    if hi_run.point.passed {
        return Ok(RateSearch {
            best: hi_run,
            evaluated,
        });
    }

    // Invariant: lo passes, hi fails.
    let (mut lo, mut hi) = (RATE_MIN_STEPS, RATE_MAX_STEPS);
    let mut best = lo_run;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        let run = measure(mid)?;
        if run.point.passed {
            best = run;
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(RateSearch { best, evaluated })
}

/// SNR per information bit, in dB: `snr_db + 10 log10(1 / code_rate)`.
pub fn snr_per_info_bit(snr_db: f64, code_rate: f64) -> f64 {
    snr_db + 10.0 * (1.0 / code_rate).log10()
}

/// Reads a no-ISI baseline file: `p2, max_rate` CSV lines (header allowed).
pub fn read_baseline(text: &str) -> Result<Vec<(f64, f64)>, Error> {
    let mut out = Vec::new();
    for line in text.lines() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with("p2") {
            continue;
        }
        let mut it = t.split(',').map(str::trim);
        let (Some(p2), Some(rate), None) = (it.next(), it.next(), it.next()) else {
            return Err(Error::Format(format!("bad baseline line {t:?}")));
        };
        let parse = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| Error::Format(format!("bad baseline value {v:?}")))
        };
        out.push((parse(p2)?, parse(rate)?));
    }
    Ok(out)
}

fn point_tag(p: &RatePoint) -> String {
    format!("p2_{}_snr_{}_rate_{}", p.p2, p.snr_db, p.code_rate)
}

/// Writes `points.csv`, `report.txt`, and per-point diagnostics CSVs under
/// `outdir`. `baseline` supplies no-ISI maximum rates per p2 for the rate
/// penalty column; points without a baseline entry leave it blank.
pub fn emit_report(
    runs: &[BerPointRun],
    baseline: Option<&[(f64, f64)]>,
    outdir: &Path,
) -> Result<(), Error> {
    if runs.is_empty() {
        return Err(Error::Config("emit_report needs at least one point".into()));
    }
    fs::create_dir_all(outdir)?;
    let diag_dir = outdir.join("diagnostics");
    fs::create_dir_all(&diag_dir)?;

    let mut points = String::from(
        "p2,snr_db,code_rate,user_bits_per_grain,measured_ber,total_errors,blocks_run,passed\n",
    );
    for run in runs {
        let p = &run.point;
        points.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            p.p2,
            p.snr_db,
            p.code_rate,
            p.user_bits_per_grain,
            p.measured_ber,
            p.total_errors,
            p.blocks_run,
            p.passed
        ));
    }
    fs::write(outdir.join("points.csv"), points)?;

    let mut report = String::from(
        "TDMR Monte Carlo report\n\
         =======================\n\
         Conventions:\n\
         - user bits per grain = 2 * code_rate (two coded bits per grain).\n\
         - SNR per information bit = snr_db + 10*log10(1/code_rate); this\n\
         convention folds only the code rate into the electronic SNR and is\n\
         what the penalty comparison below assumes.\n\
         - rate penalty = (baseline_rate - code_rate) / baseline_rate, against\n\
         the supplied no-ISI baseline rate for the same p2.\n\n",
    );
    for run in runs {
        let p = &run.point;
        let penalty = baseline
            .and_then(|b| b.iter().find(|(bp2, _)| *bp2 == p.p2))
            .map(|&(_, brate)| format!("{:.2}%", 100.0 * (brate - p.code_rate) / brate))
            .unwrap_or_else(|| "n/a".into());
        report.push_str(&format!(
            "p2 {} snr {} dB: rate {} ({} user bits/grain), BER {} over {} blocks ({} errors, {}), SNR/info bit {:.2} dB, rate penalty {}\n",
            p.p2,
            p.snr_db,
            p.code_rate,
            p.user_bits_per_grain,
            p.measured_ber,
            p.blocks_run,
            p.total_errors,
            if p.passed { "pass" } else { "fail" },
            snr_per_info_bit(p.snr_db, p.code_rate),
            penalty
        ));
    }
    fs::write(outdir.join("report.txt"), report)?;

    for run in runs {
        let tag = point_tag(&run.point);
        // Iteration traces of the first block (representative diagnostics).
        if let Some(diag) = run.diagnostics.first() {
            let mut csv = String::from("iteration,ber,mi,mean_abs_llr\n");
            for i in 0..diag.mean_abs_llr_trace.len() {
                let get = |v: &Vec<f64>| v.get(i).map(|x| x.to_string()).unwrap_or_default();
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    i + 1,
                    get(&diag.ber_trace),
                    get(&diag.mi_trace),
                    get(&diag.mean_abs_llr_trace)
                ));
            }
            fs::write(diag_dir.join(format!("{tag}.csv")), csv)?;
            if let Some((minus, plus)) = &diag.llr_histogram {
                let mut csv = String::from("bin,count_true_minus,count_true_plus\n");
                let width = 2.0 * MI_RANGE / MI_BINS as f64;
                for (i, (m, p)) in minus.iter().zip(plus).enumerate() {
                    let center = -MI_RANGE + (i as f64 + 0.5) * width;
                    csv.push_str(&format!("{center},{m},{p}\n"));
                }
                fs::write(diag_dir.join(format!("{tag}_hist.csv")), csv)?;
            }
        }
    }
    Ok(())
}
