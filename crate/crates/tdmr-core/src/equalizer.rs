//! Iterative row/column BCJR equalizer for the 2x2 read-head mask, producing
//! 16-configuration block LLRs.
//!
//! Each pass processes the image in strips of two adjacent rows with one
//! trellis stage per column: the state is the strip's pixel pair in the
//! previous column (4 states) and the input is the pair in the current
//! column, so the 2x2 block `{s0, s1, i0, i1}` determines the bottom-row
//! received sample exactly while the top-row sample additionally involves
//! two out-of-strip neighbors that are marginalized over the cross pass's
//! per-pixel beliefs. Feedback from the other pass and from the grain
//! detector enters each stage as an independent multiplicative factor,
//! marginalized onto the stage's input pixels; no LLR subtraction happens
//! between passes or toward the detector. The column pass is the row pass on
//! the transposed image.

use alloc::vec;
use alloc::vec::Vec;

use crate::isi::IsiMask;
use crate::num::{self, logsumexp2};
use crate::plane::{Llr16Plane, RealPlane, NUM_CONFIGS};
use crate::{Error, PROB_FLOOR};

/// Working state of one equalize call: received samples, channel model, and
/// the two passes' latest extrinsic planes plus detector feedback (all in
/// row orientation).
#[derive(Debug, Clone)]
pub struct EqualizerState {
    r: RealPlane,
    mask: IsiMask,
    sigma: f64,
    row_ext: Llr16Plane,
    col_ext: Llr16Plane,
    tdmr: Llr16Plane,
}

impl EqualizerState {
    pub fn new(
        r: RealPlane,
        mask: IsiMask,
        sigma: f64,
        tdmr_feedback: Option<&Llr16Plane>,
    ) -> Result<Self, Error> {
        if sigma <= 0.0 {
            return Err(Error::Domain("sigma must be positive"));
        }
        if r.rows() < 2 || r.cols() < 2 || r.rows() % 2 != 0 || r.cols() % 2 != 0 {
            return Err(Error::Domain("received plane dimensions must be even"));
        }
        if mask.rows() != 2 || mask.cols() != 2 {
            return Err(Error::Config("equalizer trellis supports 2x2 masks only"));
        }
        let (brows, bcols) = (r.rows() / 2, r.cols() / 2);
        let tdmr = match tdmr_feedback {
            Some(p) => {
                if p.block_rows() != brows || p.block_cols() != bcols {
                    return Err(Error::Dimension {
                        what: "tdmr feedback blocks",
                        expected: brows * bcols,
                        got: p.block_rows() * p.block_cols(),
                    });
                }
                p.clone()
            }
            None => Llr16Plane::uniform(brows, bcols),
        };
        Ok(Self {
            row_ext: Llr16Plane::uniform(brows, bcols),
            col_ext: Llr16Plane::uniform(brows, bcols),
            r,
            mask,
            sigma,
            tdmr,
        })
    }

    pub fn row_ext(&self) -> &Llr16Plane {
        &self.row_ext
    }

    pub fn col_ext(&self) -> &Llr16Plane {
        &self.col_ext
    }
}

/// Sums a normalized 16-ary block distribution over the pixels not listed;
/// the result is indexed by the listed positions' bits in the given order.
pub fn marginalize_block(block16: &[f64; NUM_CONFIGS], positions: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; 1 << positions.len()];
    for (c, &p) in block16.iter().enumerate() {
        let mut idx = 0usize;
        for (j, &pos) in positions.iter().enumerate() {
            if c & (1 << pos) != 0 {
                idx |= 1 << j;
            }
        }
        out[idx] += p;
    }
    out
}

#[inline]
fn val(bit: usize) -> f64 {
    if bit != 0 {
        1.0
    } else {
        -1.0
    }
}

/// One directional pass over row strips; `cross` and `tdmr` are in the same
/// orientation as `r`. Returns the pass's block posteriors.
fn directional_pass(
    r: &RealPlane,
    cross: &Llr16Plane,
    tdmr: &Llr16Plane,
    mask: &IsiMask,
    sigma: f64,
) -> Llr16Plane {
    let (rows, cols) = (r.rows(), r.cols());
    let mut out = Llr16Plane::for_pixels(rows, cols).expect("even dims checked");
    let inv2s2 = 1.0 / (2.0 * sigma * sigma);

    for t in 0..rows / 2 {
        // Stage feedback: cross and detector block beliefs marginalized onto
        // the stage's input pixels (the block's left column at even stages,
        // right column at odd stages), applied as independent factors.
        let mut f_log = vec![[0.0f64; 4]; cols];
        for (k, f) in f_log.iter_mut().enumerate() {
            let positions: [usize; 2] = if k % 2 == 0 { [0, 1] } else { [2, 3] };
            let mc = marginalize_block(&cross.block_probs(t, k / 2), &positions);
            let mt = marginalize_block(&tdmr.block_probs(t, k / 2), &positions);
            for ii in 0..4 {
                f[ii] = num::ln(mc[ii].max(PROB_FLOOR)) + num::ln(mt[ii].max(PROB_FLOOR));
            }
        }

        // P(w = +1) for the out-of-strip pixel above each column; the row
        // above the first strip is the -1 padding.
        let mut q_plus = vec![0.0f64; cols];
        if t > 0 {
            for (k, q) in q_plus.iter_mut().enumerate() {
                let pos = [1 + 2 * (k % 2)];
                let qc = marginalize_block(&cross.block_probs(t - 1, k / 2), &pos);
                let qt = marginalize_block(&tdmr.block_probs(t - 1, k / 2), &pos);
                let plus = qc[1].max(PROB_FLOOR) * qt[1].max(PROB_FLOOR);
                let minus = qc[0].max(PROB_FLOOR) * qt[0].max(PROB_FLOOR);
                *q = plus / (plus + minus);
            }
        }

        // Branch metrics gamma[k][s][i] in the log domain. P(s|s') is a
        // constant over the full 4x4 transition set and is omitted.
        let mut gamma = vec![[[0.0f64; 4]; 4]; cols];
        for k in 0..cols {
            let r0 = r.get(2 * t, k);
            let r1 = r.get(2 * t + 1, k);
            let (qw1, qw0) = (q_plus[k], if k == 0 { 0.0 } else { q_plus[k - 1] });
            for s in 0..4usize {
                let (s0, s1) = (val(s & 1), val((s >> 1) & 1));
                for i in 0..4usize {
                    let (i0, i1) = (val(i & 1), val((i >> 1) & 1));
                    let mu1 = mask.tap(0, 0) * i1
                        + mask.tap(0, 1) * s1
                        + mask.tap(1, 0) * i0
                        + mask.tap(1, 1) * s0;
                    let d1 = r1 - mu1;
                    let mut top = f64::NEG_INFINITY;
                    for w in 0..4usize {
                        let (w0, w1) = ((w & 1) != 0, (w >> 1) & 1 != 0);
                        let lq = num::ln(if w0 { qw0 } else { 1.0 - qw0 })
                            + num::ln(if w1 { qw1 } else { 1.0 - qw1 });
                        if lq == f64::NEG_INFINITY {
                            continue;
                        }
                        let mu0 = mask.tap(0, 0) * i0
                            + mask.tap(0, 1) * s0
                            + mask.tap(1, 0) * val(w1 as usize)
                            + mask.tap(1, 1) * val(w0 as usize);
                        let d0 = r0 - mu0;
                        top = logsumexp2(top, lq - d0 * d0 * inv2s2);
                    }
                    gamma[k][s][i] = top - d1 * d1 * inv2s2 + f_log[k][i];
                }
            }
        }

        // Forward from the all-(-1) state (the -1 padding left of the image);
        // backward uniform. Next state equals the stage input.
        let mut alpha = vec![[f64::NEG_INFINITY; 4]; cols + 1];
        alpha[0][0] = 0.0;
        for k in 0..cols {
            let mut nxt = [f64::NEG_INFINITY; 4];
            for s in 0..4 {
                if alpha[k][s] == f64::NEG_INFINITY {
                    continue;
                }
                for (i, n) in nxt.iter_mut().enumerate() {
                    *n = logsumexp2(*n, alpha[k][s] + gamma[k][s][i]);
                }
            }
            let max = nxt.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for v in nxt.iter_mut() {
                *v -= max;
            }
            alpha[k + 1] = nxt;
        }
        let mut beta = vec![[0.0f64; 4]; cols + 1];
        for k in (0..cols).rev() {
            let mut cur = [f64::NEG_INFINITY; 4];
            for (s, c) in cur.iter_mut().enumerate() {
                for i in 0..4 {
                    *c = logsumexp2(*c, gamma[k][s][i] + beta[k + 1][i]);
                }
            }
            let max = cur.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for v in cur.iter_mut() {
                *v -= max;
            }
            beta[k] = cur;
        }

        // Block posteriors from the odd stages, whose (state, input) pair is
        // exactly the block's four pixels.
        for bn in 0..cols / 2 {
            let k = 2 * bn + 1;
            let mut logp = [f64::NEG_INFINITY; NUM_CONFIGS];
            for s in 0..4 {
                for i in 0..4 {
                    logp[s | (i << 2)] = alpha[k][s] + gamma[k][s][i] + beta[k + 1][i];
                }
            }
            let max = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut probs = [0.0f64; NUM_CONFIGS];
            let mut sum = 0.0;
            for c in 0..NUM_CONFIGS {
                probs[c] = num::exp(logp[c] - max);
                sum += probs[c];
            }
            for p in probs.iter_mut() {
                *p /= sum;
            }
            out.set_block_from_probs(t, bn, &probs);
        }
    }
    out
}

/// Row pass: updates the row-pass extrinsic plane from the received samples,
/// the column pass's latest plane, and the detector feedback.
pub fn row_pass(state: &mut EqualizerState) {
    state.row_ext = directional_pass(&state.r, &state.col_ext, &state.tdmr, &state.mask, state.sigma);
}

/// Column pass: the row pass applied to the transposed image (mask and
/// feedback planes transposed accordingly); the result is stored back in row
/// orientation.
pub fn column_pass(state: &mut EqualizerState) {
    let rt = state.r.transposed();
    let mask_t = IsiMask::new(
        2,
        2,
        vec![
            state.mask.tap(0, 0),
            state.mask.tap(1, 0),
            state.mask.tap(0, 1),
            state.mask.tap(1, 1),
        ],
    )
    .expect("2x2 transpose");
    let cross = state.row_ext.transposed();
    let tdmr_t = state.tdmr.transposed();
    state.col_ext = directional_pass(&rt, &cross, &tdmr_t, &mask_t, state.sigma).transposed();
}

/// Full equalization: alternates row and column passes `n_rc_iters` times
/// and returns the final block LLRs.
pub fn equalize(
    r: &RealPlane,
    mask: &IsiMask,
    sigma: f64,
    tdmr_feedback: Option<&Llr16Plane>,
    n_rc_iters: usize,
) -> Result<Llr16Plane, Error> {
    if n_rc_iters == 0 {
        return Err(Error::Config("n_rc_iters must be positive"));
    }
    let mut state = EqualizerState::new(r.clone(), mask.clone(), sigma, tdmr_feedback)?;
    for _ in 0..n_rc_iters {
        row_pass(&mut state);
        column_pass(&mut state);
    }
    Ok(state.col_ext)
}

/// Per-pixel hard decisions from block LLR argmaxes.
pub fn hard_decisions(llrs: &Llr16Plane) -> crate::plane::BitPlane {
    let mut out = crate::plane::BitPlane::filled(2 * llrs.block_rows(), 2 * llrs.block_cols(), -1);
    for bm in 0..llrs.block_rows() {
        for bn in 0..llrs.block_cols() {
            let block = llrs.block(bm, bn);
            let best = (0..NUM_CONFIGS)
                .max_by(|&a, &b| block[a].partial_cmp(&block[b]).expect("finite LLRs"))
                .unwrap();
            let px = crate::plane::config_pixels(best);
            out.set(2 * bm, 2 * bn, px[0]);
            out.set(2 * bm + 1, 2 * bn, px[1]);
            out.set(2 * bm, 2 * bn + 1, px[2]);
            out.set(2 * bm + 1, 2 * bn + 1, px[3]);
        }
    }
    out
}
