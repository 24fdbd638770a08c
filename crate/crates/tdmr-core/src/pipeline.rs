//! Full write/read chain: coding, grain overwrite, ISI, and the iterative
//! equalizer / grain detector / SCCC decoder exchange.
//!
//! A [`ChainContext`] freezes everything derived from a [`ChainConfig`]
//! (codec, tiling sampler, detector trellis, plane interleaver) so that many
//! blocks can be written and read with per-block seeds. The read side follows
//! the schedule: equalize, weight, then alternate detector and decoder with a
//! final detector pass feeding soft block beliefs back to the equalizer for
//! the next global iteration.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::dgm::{write_bits, GrainImage, GrainProbs, TilingSampler};
use crate::detector::{build_trellis, detect, DetectorExchange, GrainTrellis};
use crate::equalizer::equalize;
use crate::exit;
use crate::isi::{add_awgn, calibrate_sigma, convolve2d, IsiMask};
use crate::plane::{BitPlane, Llr16Plane, RealPlane};
use crate::rng::{derive_seed, rng_from_seed};

use crate::sccc::{self, make_permutation, ScccConfig};
use crate::{Error, LLR_CLAMP};

/// Iteration counts and exchange weighting for one read.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationSchedule {
    /// Outer equalizer-refresh iterations.
    pub n_global: usize,
    /// Row/column sweeps inside each equalizer call.
    pub n_rc_iters: usize,
    /// Detector/decoder exchanges per global iteration.
    pub n_tdmr_sccc: usize,
    /// Inner/outer loops inside each SCCC decode.
    pub n_inner_sccc: usize,
    /// Scale applied to equalizer LLRs before detection; in `(0, 1]`.
    pub weight_w: f64,
    /// Stop early once decisions stabilize or truth shows zero errors.
    pub stop_on_crc_or_zero_error: bool,
}

impl IterationSchedule {
    /// The nominal operating schedule.
    pub fn nominal() -> Self {
        Self {
            n_global: 4,
            n_rc_iters: 3,
            n_tdmr_sccc: 6,
            n_inner_sccc: 10,
            weight_w: 0.26,
            stop_on_crc_or_zero_error: true,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.n_global == 0 || self.n_rc_iters == 0 || self.n_tdmr_sccc == 0
            || self.n_inner_sccc == 0
        {
            return Err(Error::Config("iteration counts must be positive"));
        }
        if !(self.weight_w > 0.0 && self.weight_w <= 1.0) {
            return Err(Error::Config("weight_w must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Static description of one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    /// Information bits per block.
    pub info_len: usize,
    /// Overall code rate.
    pub target_rate: f64,
    /// Grain type distribution of the medium.
    pub probs: GrainProbs,
    /// ISI response.
    pub mask: IsiMask,
    /// Electronic SNR of the read waveform, in dB.
    pub snr_db: f64,
    /// Image width in pixels; even. Height is derived from the codeword
    /// length (rounded up to an even row count; surplus cells carry -1).
    pub cols: usize,
    /// Root of all codec/interleaver seed derivation.
    pub master_seed: u64,
    pub schedule: IterationSchedule,
}

/// Scales every block LLR by `w`; the all-(-1) reference entry stays zero.
///
/// The weight applies only in the equalizer-to-detector direction.
pub fn weight_llrs(llrs: &Llr16Plane, w: f64) -> Result<Llr16Plane, Error> {
    if !(w > 0.0 && w <= 1.0) {
        return Err(Error::Domain("weight must lie in (0, 1]"));
    }
    let mut out = llrs.clone();
    for block in out.blocks_mut() {
        for v in block.iter_mut() {
            *v *= w;
        }
    }
    Ok(out)
}

/// One written block and every intermediate plane, for diagnostics.
#[derive(Debug, Clone)]
pub struct WrittenBlock {
    pub info_bits: Vec<u8>,
    /// Adjusted codeword in ±1 levels.
    pub codeword: Vec<i8>,
    /// Codeword after plane interleaving plus -1 surplus fill.
    pub coded_plane: BitPlane,
    pub image: GrainImage,
    /// Coded plane after grain overwrite.
    pub written: BitPlane,
    pub noiseless: RealPlane,
    pub received: RealPlane,
    pub sigma: f64,
}

/// Per-read traces; BER and mutual-information traces stay empty when no
/// ground truth is supplied. Trace lengths equal the number of executed
/// detector/decoder iterations.
#[derive(Debug, Clone, Default)]
pub struct ReadDiagnostics {
    pub ber_trace: Vec<f64>,
    pub mi_trace: Vec<f64>,
    pub mean_abs_llr_trace: Vec<f64>,
    /// 1-based executed-iteration index at which decisions first stabilized
    /// (or truth showed zero errors).
    pub convergence_iteration: Option<usize>,
    /// Final info-LLR histogram counts conditioned on the true bit,
    /// `(counts for bit 0, counts for bit 1)`; requires truth.
    pub llr_histogram: Option<(Vec<u64>, Vec<u64>)>,
}

/// Result of one read.
#[derive(Debug, Clone)]
pub struct ReadOutcome {
    pub info_bits: Vec<u8>,
    pub info_llrs: Vec<f64>,
    pub diagnostics: ReadDiagnostics,
}

/// Everything derived from a [`ChainConfig`], built once per operating point.
pub struct ChainContext {
    cfg: ChainConfig,
    sccc: ScccConfig,
    sampler: TilingSampler,
    trellis: GrainTrellis,
    /// Plane interleaver: raster cell `i` carries codeword position `pi3[i]`.
    pi3: Vec<usize>,
    rows: usize,
}

impl ChainContext {
    pub fn new(cfg: ChainConfig) -> Result<Self, Error> {
        cfg.schedule.validate()?;
        if cfg.cols == 0 || cfg.cols % 2 != 0 {
            return Err(Error::Config("cols must be even and positive"));
        }
        let mut sccc = ScccConfig::nominal(cfg.target_rate, cfg.info_len, cfg.master_seed);
        sccc.n_inner_loops = cfg.schedule.n_inner_sccc;
        sccc.validate()?;
        let n = sccc.adjusted_len();
        let mut rows = n.div_ceil(cfg.cols);
        if rows % 2 != 0 {
            rows += 1;
        }
        if rows == 0 {
            return Err(Error::Config("empty codeword"));
        }
        let sampler = TilingSampler::new(&cfg.probs)?;
        let trellis = build_trellis(&cfg.probs)?;
        let pi3 = make_permutation(n, derive_seed(cfg.master_seed, &[4]));
        Ok(Self { cfg, sccc, sampler, trellis, pi3, rows })
    }

    pub fn config(&self) -> &ChainConfig {
        &self.cfg
    }

    pub fn sccc_config(&self) -> &ScccConfig {
        &self.sccc
    }

    pub fn trellis(&self) -> &GrainTrellis {
        &self.trellis
    }

    /// Image dimensions `(rows, cols)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cfg.cols)
    }

    /// Adjusted codeword length.
    pub fn codeword_len(&self) -> usize {
        self.pi3.len()
    }

    /// Spreads codeword-ordered values over the image plane; surplus cells
    /// get `filler`.
    pub fn codeword_to_plane(&self, values: &[f64], filler: f64) -> Result<RealPlane, Error> {
        if values.len() != self.pi3.len() {
            return Err(Error::Dimension {
                what: "codeword length",
                expected: self.pi3.len(),
                got: values.len(),
            });
        }
        let mut cells = vec![filler; self.rows * self.cfg.cols];
        for (i, &j) in self.pi3.iter().enumerate() {
            cells[i] = values[j];
        }
        RealPlane::from_values(self.rows, self.cfg.cols, cells)
    }

    /// Collects codeword-ordered values back out of the image plane.
    pub fn plane_to_codeword(&self, plane: &RealPlane) -> Result<Vec<f64>, Error> {
        if plane.rows() != self.rows || plane.cols() != self.cfg.cols {
            return Err(Error::Dimension {
                what: "plane cells",
                expected: self.rows * self.cfg.cols,
                got: plane.rows() * plane.cols(),
            });
        }
        let mut out = vec![0.0; self.pi3.len()];
        for (i, &j) in self.pi3.iter().enumerate() {
            out[j] = plane.values()[i];
        }
        Ok(out)
    }

    /// Encodes fresh random info bits and pushes them through overwrite, ISI,
    /// and noise. All randomness derives from `block_seed`.
    pub fn write_block(&self, block_seed: u64) -> Result<WrittenBlock, Error> {
        let mut rng = rng_from_seed(derive_seed(block_seed, &[0]));
        let info_bits: Vec<u8> = (0..self.cfg.info_len).map(|_| rng.random_range(0..2u8)).collect();
        self.write_block_with_info(&info_bits, block_seed)
    }

    /// As [`Self::write_block`] but with caller-supplied info bits.
    pub fn write_block_with_info(
        &self,
        info_bits: &[u8],
        block_seed: u64,
    ) -> Result<WrittenBlock, Error> {
        let codeword = sccc::encode(info_bits, &self.sccc)?;
        let mut cells = vec![-1i8; self.rows * self.cfg.cols];
        for (i, &j) in self.pi3.iter().enumerate() {
            cells[i] = codeword[j];
        }
        let coded_plane = BitPlane::from_values(self.rows, self.cfg.cols, cells)?;
        let image = self
            .sampler
            .sample(self.rows, self.cfg.cols, derive_seed(block_seed, &[1]))?;
        let written = write_bits(&image, &coded_plane)?;
        let noiseless = convolve2d(&written, &self.cfg.mask);
        let sigma = calibrate_sigma(&noiseless, self.cfg.snr_db)?;
        let received = add_awgn(&noiseless, sigma, derive_seed(block_seed, &[2]))?;
        Ok(WrittenBlock {
            info_bits: info_bits.to_vec(),
            codeword,
            coded_plane,
            image,
            written,
            noiseless,
            received,
            sigma,
        })
    }

    /// Runs the iterative read chain on one received plane.
    ///
    /// Per global iteration: equalize (with detector feedback after the
    /// first), weight, then `n_tdmr_sccc` detector/decoder exchanges, and a
    /// final detector pass that recomputes the equalizer feedback from the
    /// last decoder output. Returns hard decisions on the final info LLRs.
    pub fn run_read_chain(
        &self,
        received: &RealPlane,
        sigma: f64,
        truth: Option<&[u8]>,
    ) -> Result<ReadOutcome, Error> {
        let sched = &self.cfg.schedule;
        let (rows, cols) = self.dims();
        if received.rows() != rows || received.cols() != cols {
            return Err(Error::Dimension {
                what: "received cells",
                expected: rows * cols,
                got: received.rows() * received.cols(),
            });
        }
        if let Some(bits) = truth {
            if bits.len() != self.cfg.info_len {
                return Err(Error::Dimension {
                    what: "truth bits",
                    expected: self.cfg.info_len,
                    got: bits.len(),
                });
            }
        }
        let n = self.pi3.len();
        // Priors on the written plane; surplus cells are known to be -1.
        let surplus_prior = |plane: &mut RealPlane| {
            for i in n..rows * cols {
                plane.values_mut()[i] = -LLR_CLAMP;
            }
        };
        let mut priors = RealPlane::zeros(rows, cols);
        surplus_prior(&mut priors);

        let mut feedback: Option<Llr16Plane> = None;
        let mut diag = ReadDiagnostics::default();
        let mut info_llrs = vec![0.0; self.cfg.info_len];
        let mut prev_hard: Option<Vec<u8>> = None;
        let mut executed = 0usize;
        let mut done = false;

        'outer: for _g in 0..sched.n_global {
            let eq = equalize(
                received,
                &self.cfg.mask,
                sigma,
                feedback.as_ref(),
                sched.n_rc_iters,
            )?;
            let evidence = weight_llrs(&eq, sched.weight_w)?;

            for _it in 0..sched.n_tdmr_sccc {
                let ex = DetectorExchange::new(evidence.clone(), priors.clone())?;
                let ex = detect(ex, &self.trellis)?;
                let toward_sccc = ex.sccc_llrs.expect("detector output");
                let cw_llrs = self.plane_to_codeword(&toward_sccc)?;
                let dec = sccc::decode(&cw_llrs, &self.sccc)?;
                priors = self.codeword_to_plane(&dec.extrinsic_llrs, -LLR_CLAMP)?;
                surplus_prior(&mut priors);
                info_llrs = dec.info_llrs;
                executed += 1;

                let hard: Vec<u8> = info_llrs.iter().map(|&l| (l > 0.0) as u8).collect();
                let mean_abs =
                    info_llrs.iter().map(|l| l.abs()).sum::<f64>() / info_llrs.len() as f64;
                diag.mean_abs_llr_trace.push(mean_abs);
                if let Some(bits) = truth {
                    let errors = hard.iter().zip(bits).filter(|(a, b)| a != b).count();
                    let ber = errors as f64 / bits.len() as f64;
                    diag.ber_trace.push(ber);
                    let signs: Vec<i8> = bits.iter().map(|&b| if b == 1 { 1 } else { -1 }).collect();
                    diag.mi_trace
                        .push(exit::mutual_information(&info_llrs, &signs).unwrap_or(0.0));
                }
                // Self-contained convergence check: re-encoding the hard
                // info decisions must reproduce the hard decisions of the
                // codeword posterior, and the decisions must have stopped
                // changing. Consistency alone can be hit transiently by a
                // near-codeword, so it is confirmed by stability; truth is
                // diagnostics-only and never steers the chain.
                let reenc = sccc::encode(&hard, &self.sccc)?;
                let consistent = reenc
                    .iter()
                    .zip(cw_llrs.iter().zip(&dec.extrinsic_llrs))
                    .all(|(&c, (&l, &e))| (l + e > 0.0) == (c > 0));
                let stable = prev_hard.as_deref() == Some(hard.as_slice());
                prev_hard = Some(hard);
                if (stable && consistent) && diag.convergence_iteration.is_none() {
                    diag.convergence_iteration = Some(executed);
                }
                if (stable && consistent) && sched.stop_on_crc_or_zero_error {
                    done = true;
                    break;
                }
            }
            if done || _g + 1 == sched.n_global {
                break 'outer;
            }
            // Refresh the soft block feedback with the latest decoder priors.
            let ex = DetectorExchange::new(evidence.clone(), priors.clone())?;
            let ex = detect(ex, &self.trellis)?;
            feedback = ex.feedback;
        }

        if let Some(bits) = truth {
            let signs: Vec<i8> = bits.iter().map(|&b| if b == 1 { 1 } else { -1 }).collect();
            diag.llr_histogram = exit::conditional_counts(&info_llrs, &signs).ok();
        }
        let info_bits: Vec<u8> = info_llrs.iter().map(|&l| (l > 0.0) as u8).collect();
        Ok(ReadOutcome { info_bits, info_llrs, diagnostics: diag })
    }
}
