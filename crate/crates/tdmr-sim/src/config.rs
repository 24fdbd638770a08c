//! Experiment configuration: presets, validation, and the flat key-value
//! file format.
//!
//! A config names the operating-point grids (grain probability `p2` and
//! SNR), the Monte Carlo stopping rule (block count, target BER, error
//! budget), the image geometry, the iteration schedule, and the master seed
//! from which every block seed derives. Two presets ship: `full` mirrors the
//! headline experiment (100 blocks of 32768 info bits to BER 1e-5 with at
//! most 32 errors, 512-column images) and `desk` is the scaled-down profile
//! for local runs (10 blocks of 8192 info bits to BER 1e-3).

use tdmr_core::pipeline::IterationSchedule;

use crate::formats::parse_kv;
use crate::Error;

pub const DEFAULT_MASTER_SEED: u64 = 0x7d3a_11c5_0de5_c001;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Horizontal-grain probabilities to sweep.
    pub p2_grid: Vec<f64>,
    /// Electronic SNRs (dB) to sweep.
    pub snr_db_grid: Vec<f64>,
    /// Decoded-BER goal of the rate search.
    pub target_ber: f64,
    /// Blocks per rate point.
    pub min_blocks: usize,
    /// A rate point passes with at most this many total bit errors.
    pub max_errors: usize,
    /// Information bits per block.
    pub info_len: usize,
    /// Image width in pixels.
    pub cols: usize,
    pub schedule: IterationSchedule,
    pub master_seed: u64,
}

impl ExperimentConfig {
    /// Full-scale profile: the headline Monte Carlo protocol.
    pub fn full() -> Self {
        Self {
            p2_grid: vec![0.2, 0.275, 0.35],
            snr_db_grid: vec![9.0, 10.0],
            target_ber: 1e-5,
            min_blocks: 100,
            max_errors: 32,
            info_len: 32768,
            cols: 512,
            schedule: IterationSchedule::nominal(),
            master_seed: DEFAULT_MASTER_SEED,
        }
    }

    /// Desk-scale profile: same chain, reduced block size/count and a
    /// correspondingly coarser BER goal. The error budget keeps the full
    /// profile's ratio: floor(target_ber * min_blocks * info_len).
    pub fn desk() -> Self {
        Self {
            p2_grid: vec![0.2],
            snr_db_grid: vec![10.0],
            target_ber: 1e-3,
            min_blocks: 10,
            max_errors: 81,
            info_len: 8192,
            cols: 512,
            schedule: IterationSchedule::nominal(),
            master_seed: DEFAULT_MASTER_SEED,
        }
    }

    pub fn preset(name: &str) -> Result<Self, Error> {
        match name {
            "full" => Ok(Self::full()),
            "desk" => Ok(Self::desk()),
            other => Err(Error::Config(format!("unknown preset {other:?}"))),
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.p2_grid.is_empty() || self.snr_db_grid.is_empty() {
            return Err(Error::Config("p2 and snr grids must be nonempty".into()));
        }
        if !(self.target_ber > 0.0) {
            return Err(Error::Config("target_ber must be positive".into()));
        }
        if self.info_len == 0 || self.min_blocks == 0 {
            return Err(Error::Config("info_len and min_blocks must be positive".into()));
        }
        // Feasibility: the run must contain at least one expected error at
        // the target BER, otherwise the pass rule cannot resolve it.
        if (self.info_len * self.min_blocks) as f64 * self.target_ber < 1.0 {
            return Err(Error::Config(
                "info_len * min_blocks * target_ber must be at least 1".into(),
            ));
        }
        if self.cols == 0 || self.cols % 2 != 0 {
            return Err(Error::Config("cols must be positive and even".into()));
        }
        self.schedule.validate()?;
        Ok(())
    }

    /// Parses key-value text over the `full` preset's defaults.
    pub fn from_text(text: &str) -> Result<Self, Error> {
        let mut cfg = Self::full();
        for (k, v) in parse_kv(text)? {
            cfg.apply(&k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), Error> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, Error> {
            v.parse()
                .map_err(|_| Error::Config(format!("bad value {v:?} for key {key}")))
        }
        fn grid(key: &str, v: &str) -> Result<Vec<f64>, Error> {
            v.split(',')
                .map(|t| num(key, t.trim()))
                .collect::<Result<Vec<f64>, _>>()
        }
        match key {
            "preset" => *self = Self::preset(value)?,
            "p2_grid" => self.p2_grid = grid(key, value)?,
            "snr_db_grid" => self.snr_db_grid = grid(key, value)?,
            "target_ber" => self.target_ber = num(key, value)?,
            "min_blocks" => self.min_blocks = num(key, value)?,
            "max_errors" => self.max_errors = num(key, value)?,
            "info_len" => self.info_len = num(key, value)?,
            "cols" => self.cols = num(key, value)?,
            "master_seed" => self.master_seed = num(key, value)?,
            "n_global" => self.schedule.n_global = num(key, value)?,
            "n_rc_iters" => self.schedule.n_rc_iters = num(key, value)?,
            "n_tdmr_sccc" => self.schedule.n_tdmr_sccc = num(key, value)?,
            "n_inner_sccc" => self.schedule.n_inner_sccc = num(key, value)?,
            "weight_w" => self.schedule.weight_w = num(key, value)?,
            "stop_early" => self.schedule.stop_on_crc_or_zero_error = num(key, value)?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Emits the config as parseable key-value text with every key present.
    pub fn to_text(&self) -> String {
        let grid = |g: &[f64]| {
            g.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        let s = &self.schedule;
        format!(
            "# TDMR Monte Carlo experiment configuration\n\
             p2_grid = {}\n\
             snr_db_grid = {}\n\
             target_ber = {}\n\
             min_blocks = {}\n\
             max_errors = {}\n\
             info_len = {}\n\
             cols = {}\n\
             master_seed = {}\n\
             n_global = {}\n\
             n_rc_iters = {}\n\
             n_tdmr_sccc = {}\n\
             n_inner_sccc = {}\n\
             weight_w = {}\n\
             stop_early = {}\n",
            grid(&self.p2_grid),
            grid(&self.snr_db_grid),
            self.target_ber,
            self.min_blocks,
            self.max_errors,
            self.info_len,
            self.cols,
            self.master_seed,
            s.n_global,
            s.n_rc_iters,
            s.n_tdmr_sccc,
            s.n_inner_sccc,
            s.weight_w,
            s.stop_on_crc_or_zero_error,
        )
    }
}
