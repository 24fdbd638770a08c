//! EXIT-chart sweeps: measured transfer curves for the grain detector and
//! the SCCC decoder, and curve-distance weight selection.
//!
//! A sweep fixes an operating point (p2, SNR, rate) and traces 13 curve
//! points by injecting synthetic prior LLRs drawn from the location-coupled
//! GEV family at increasing location `mu`. The detector curve feeds each
//! injection (sign-coupled to the true coded bits) as the detector's prior
//! plane alongside real equalizer evidence and measures extrinsic mutual
//! information; the SCCC curve feeds the injection as the decoder's codeword
//! input. The SCCC curve is reported transposed into the detector's axes
//! (x = decoder output, y = decoder input), so an open tunnel between the
//! two plotted curves predicts turbo convergence; the candidate weight whose
//! detector curve sits farthest from the decoder curve (second-point
//! distance) is selected.

use tdmr_core::detector::{detect, DetectorExchange};
use tdmr_core::dgm::derive_grain_probs;
use tdmr_core::equalizer::equalize;
use tdmr_core::exit::{
    curve_distance, mutual_information, sample_injected_llrs, CurveDistance, ExitCurve,
    CURVE_POINTS,
};
use tdmr_core::isi::IsiMask;
use tdmr_core::pipeline::{weight_llrs, ChainConfig, ChainContext};
use tdmr_core::rng::derive_seed;
use tdmr_core::sccc::{self, ScccConfig};
use tdmr_core::LLR_CLAMP;

use crate::config::ExperimentConfig;
use crate::Error;

/// Weight candidates the selection procedure compares.
pub const WEIGHT_CANDIDATES: [f64; 3] = [0.2, 0.26, 0.32];

/// Injection locations of the 13 curve points.
pub fn mu_grid() -> [f64; CURVE_POINTS] {
    core::array::from_fn(|i| 0.5 * i as f64)
}

/// One full sweep at an operating point.
#[derive(Debug, Clone)]
pub struct ExitSweep {
    pub p2: f64,
    pub snr_db: f64,
    pub rate: f64,
    /// Detector transfer curve per candidate weight.
    pub detector_curves: Vec<(f64, ExitCurve)>,
    /// Decoder transfer curve, transposed into the detector's axes.
    pub sccc_curve: ExitCurve,
    pub distances: Vec<(f64, CurveDistance)>,
    pub selected_weight: f64,
}

/// Measurement guard: drops points whose x does not strictly increase over
/// the last retained point, so small-sample ties at the saturated end
/// cannot invalidate the curve.
fn monotone_curve(mut points: Vec<(f64, f64)>) -> Result<ExitCurve, Error> {
    points.dedup_by(|next, prev| next.0 <= prev.0);
    for p in points.iter_mut() {
        p.0 = p.0.clamp(0.0, 1.0);
        p.1 = p.1.clamp(0.0, 1.0);
    }
    Ok(ExitCurve::new(points)?)
}

/// Detector EXIT curve at one weight; injections and blocks are shared
/// across weights (seeds do not depend on `w`), so candidate curves are
/// paired measurements.
pub fn detector_exit_curve(
    cfg: &ExperimentConfig,
    p2: f64,
    snr_db: f64,
    rate: f64,
    w: f64,
) -> Result<ExitCurve, Error> {
    let ctx = ChainContext::new(ChainConfig {
        info_len: cfg.info_len,
        target_rate: rate,
        probs: derive_grain_probs(p2)?,
        mask: IsiMask::averaging_2x2(),
        snr_db,
        cols: cfg.cols,
        master_seed: cfg.master_seed,
        schedule: cfg.schedule,
    })?;
    let mut points = Vec::with_capacity(CURVE_POINTS);
    for (i, mu) in mu_grid().into_iter().enumerate() {
        let block_seed = derive_seed(cfg.master_seed, &[0xe1, i as u64]);
        let inj_seed = derive_seed(cfg.master_seed, &[0xe2, i as u64]);
        let blk = ctx.write_block(block_seed)?;
        let evidence = equalize(
            &blk.received,
            &IsiMask::averaging_2x2(),
            blk.sigma,
            None,
            cfg.schedule.n_rc_iters,
        )?;
        let weighted = weight_llrs(&evidence, w)?;
        let inj = sample_injected_llrs(mu, &blk.codeword, inj_seed)?;
        let priors = ctx.codeword_to_plane(&inj, -LLR_CLAMP)?;
        let out = detect(DetectorExchange::new(weighted, priors)?, ctx.trellis())?;
        let ext = ctx.plane_to_codeword(out.sccc_llrs.as_ref().expect("detect fills outputs"))?;
        let ia = mutual_information(&inj, &blk.codeword)?;
        let ie = mutual_information(&ext, &blk.codeword)?;
        points.push((ia, ie));
    }
    monotone_curve(points)
}

/// Decoder EXIT curve, transposed into the detector's axes.
pub fn sccc_exit_curve(cfg: &ExperimentConfig, rate: f64) -> Result<ExitCurve, Error> {
    let sccc_cfg = ScccConfig {
        n_inner_loops: cfg.schedule.n_inner_sccc,
        ..ScccConfig::nominal(rate, cfg.info_len, cfg.master_seed)
    };
    let mut points = Vec::with_capacity(CURVE_POINTS);
    for (i, mu) in mu_grid().into_iter().enumerate() {
        let bit_seed = derive_seed(cfg.master_seed, &[0xe3, i as u64]);
        let inj_seed = derive_seed(cfg.master_seed, &[0xe4, i as u64]);
        let mut rng = tdmr_core::rng::rng_from_seed(bit_seed);
        let info: Vec<u8> = (0..cfg.info_len)
            .map(|_| (rand::Rng::random::<bool>(&mut rng)) as u8)
            .collect();
        let codeword = sccc::encode(&info, &sccc_cfg)?;
        let inj = sample_injected_llrs(mu, &codeword, inj_seed)?;
        let dec = sccc::decode(&inj, &sccc_cfg)?;
        let ia = mutual_information(&inj, &codeword)?;
        let ie = mutual_information(&dec.extrinsic_llrs, &codeword)?;
        // Transposed axes: the decoder's output feeds the detector's input.
        points.push((ie, ia));
    }
    monotone_curve(points)
}

/// Full sweep: one decoder curve, one detector curve per candidate weight,
/// and the argmax-distance selection.
pub fn run_exit_sweep(
    cfg: &ExperimentConfig,
    p2: f64,
    snr_db: f64,
    rate: f64,
    candidates: &[f64],
) -> Result<ExitSweep, Error> {
    if candidates.is_empty() {
        return Err(Error::Config("weight candidates must be nonempty".into()));
    }
    let sccc_curve = sccc_exit_curve(cfg, rate)?;
    let mut detector_curves = Vec::new();
    let mut distances = Vec::new();
    for &w in candidates {
        let curve = detector_exit_curve(cfg, p2, snr_db, rate, w)?;
        let d = curve_distance(&curve, &sccc_curve)?;
        detector_curves.push((w, curve));
        distances.push((w, d));
    }
    let selected_weight = distances
        .iter()
        .max_by(|a, b| a.1.distance.partial_cmp(&b.1.distance).expect("finite"))
        .expect("nonempty candidates")
        .0;
    Ok(ExitSweep {
        p2,
        snr_db,
        rate,
        detector_curves,
        sccc_curve,
        distances,
        selected_weight,
    })
}

/// CSV form of one curve.
pub fn curve_csv(curve: &ExitCurve) -> String {
    let mut s = String::from("I_A,I_E\n");
    for &(ia, ie) in curve.points() {
        s.push_str(&format!("{ia},{ie}\n"));
    }
    s
}
