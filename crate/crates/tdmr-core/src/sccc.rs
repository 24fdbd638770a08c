//! Rate-1/4 serially concatenated convolutional code with seeded rate
//! adjustment, and the matching iterative soft-in/soft-out decoder.
//!
//! The encoder chain is: eight-state rate-1/2 non-recursive outer code with
//! generator pair `[1 + X, 1 + X + X^3]`, interleaver pi1, eight-state
//! rate-1/2 recursive systematic inner code `[1, (1 + X + X^3)/(1 + X)]`,
//! seeded puncturing/repetition to the target rate, interleaver pi2, and the
//! level shift (0, 1) -> (-1, +1). The decoder exchanges extrinsic LLRs
//! between exact log-domain BCJR passes over the two constituent trellises.
//!
//! LLR convention throughout: `llr = ln P(bit = 1) / P(bit = 0)`; both
//! trellises are left unterminated (forward recursion starts in state 0,
//! backward recursion starts uniform).

use alloc::vec;
use alloc::vec::Vec;

use crate::num::{self, logsumexp2};
use crate::rng::rng_from_seed;
use crate::{Error, LLR_CLAMP};

/// Outer generator taps `[1 + X, 1 + X + X^3]` as bit masks over
/// `(x_k, x_{k-1}, x_{k-2}, x_{k-3})`.
pub const OUTER_GENERATORS: [u8; 2] = [0b0011, 0b1011];
/// Inner feedback tap mask `1 + X` and feedforward mask `1 + X + X^3`.
pub const INNER_GENERATORS: [u8; 2] = [0b0011, 0b1011];

const N_STATES: usize = 8;

/// Full codec configuration; encoder and decoder share one value.
#[derive(Debug, Clone, PartialEq)]
pub struct ScccConfig {
    /// Tap masks of the outer non-recursive code.
    pub outer_generators: [u8; 2],
    /// `[feedback, feedforward]` tap masks of the inner recursive code.
    pub inner_generators: [u8; 2],
    /// Overall code rate in `(0, 1)`; 1/4 is the unadjusted chain.
    pub target_rate: f64,
    /// Number of information bits per block.
    pub info_len: usize,
    pub interleaver_seed_1: u64,
    pub interleaver_seed_2: u64,
    pub rate_adjust_seed: u64,
    /// Inner/outer decoder exchange iterations.
    pub n_inner_loops: usize,
}

impl ScccConfig {
    /// The nominal codec at a given rate and block length.
    pub fn nominal(target_rate: f64, info_len: usize, master_seed: u64) -> Self {
        Self {
            outer_generators: OUTER_GENERATORS,
            inner_generators: INNER_GENERATORS,
            target_rate,
            info_len,
            interleaver_seed_1: crate::rng::derive_seed(master_seed, &[1]),
            interleaver_seed_2: crate::rng::derive_seed(master_seed, &[2]),
            rate_adjust_seed: crate::rng::derive_seed(master_seed, &[3]),
            n_inner_loops: 10,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.outer_generators != OUTER_GENERATORS {
            return Err(Error::Config("unsupported outer generator taps"));
        }
        if self.inner_generators != INNER_GENERATORS {
            return Err(Error::Config("unsupported inner generator taps"));
        }
        if !(self.target_rate > 0.0 && self.target_rate < 1.0) {
            return Err(Error::Config("target_rate must lie in (0, 1)"));
        }
        if self.info_len == 0 {
            return Err(Error::Config("info_len must be positive"));
        }
        if self.n_inner_loops == 0 {
            return Err(Error::Config("n_inner_loops must be positive"));
        }
        Ok(())
    }

    /// Codeword length after rate adjustment.
    pub fn adjusted_len(&self) -> usize {
        num::round(self.info_len as f64 / self.target_rate) as usize
    }
}

/// Source index of every adjusted-codeword position in the nominal rate-1/4
/// codeword. Punctured nominal positions appear in no entry; repeated ones
/// appear more than once. Entries are sorted so the adjusted sequence keeps
/// the nominal ordering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RateAdjustMap {
    n_nominal: usize,
    src: Vec<usize>,
}

impl RateAdjustMap {
    pub fn n_nominal(&self) -> usize {
        self.n_nominal
    }

    pub fn adjusted_len(&self) -> usize {
        self.src.len()
    }

    pub fn src(&self) -> &[usize] {
        &self.src
    }
}

/// Builds the seeded puncture/repetition map from the nominal rate-1/4
/// codeword length to the target rate. Deterministic in `(n_nominal,
/// target_rate, seed)`.
pub fn make_rate_adjust_map(
    n_nominal: usize,
    target_rate: f64,
    seed: u64,
) -> Result<RateAdjustMap, Error> {
    if !(target_rate > 0.0 && target_rate < 1.0) {
        return Err(Error::Config("target_rate must lie in (0, 1)"));
    }
    let n_adj = num::round(n_nominal as f64 * 0.25 / target_rate) as usize;
    if n_adj == 0 {
        return Err(Error::Config("adjusted codeword length is zero"));
    }
    let mut src: Vec<usize>;
    if n_adj == n_nominal {
        src = (0..n_nominal).collect();
    } else if n_adj < n_nominal {
        // Puncture: keep a uniformly random n_adj-subset.
        let mut idx: Vec<usize> = (0..n_nominal).collect();
        let mut rng = rng_from_seed(seed);
        for i in 0..n_adj {
            let j = i + rand::Rng::random_range(&mut rng, 0..(n_nominal - i));
            idx.swap(i, j);
        }
        src = idx[..n_adj].to_vec();
        src.sort_unstable();
    } else {
        // Repeat: every nominal position once plus uniform extra draws.
        src = (0..n_nominal).collect();
        let mut rng = rng_from_seed(seed);
        for _ in 0..(n_adj - n_nominal) {
            src.push(rand::Rng::random_range(&mut rng, 0..n_nominal));
        }
        src.sort_unstable();
    }
    Ok(RateAdjustMap {
        n_nominal,
        src,
    })
}

/// Seeded uniform permutation (Fisher-Yates); `perm[i]` is the source index
/// of output position `i`.
pub fn make_permutation(len: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..len).collect();
    let mut rng = rng_from_seed(seed);
    for i in (1..len).rev() {
        let j = rand::Rng::random_range(&mut rng, 0..=i);
        perm.swap(i, j);
    }
    perm
}

/// One rate-1/2 constituent trellis: per (state, input bit) the successor
/// state and the two output bits.
struct Trellis {
    next: [[usize; 2]; N_STATES],
    out: [[[u8; 2]; 2]; N_STATES],
}

#[inline]
fn parity(x: u8) -> u8 {
    (x.count_ones() & 1) as u8
}

/// Outer non-recursive code: state is the shift register
/// `(x_{k-1}, x_{k-2}, x_{k-3})`.
fn outer_trellis() -> Trellis {
    let mut next = [[0usize; 2]; N_STATES];
    let mut out = [[[0u8; 2]; 2]; N_STATES];
    for s in 0..N_STATES {
        for u in 0..2usize {
            let a = (u as u8) | ((s as u8) << 1);
            next[s][u] = (a & 7) as usize;
            out[s][u] = [parity(a & OUTER_GENERATORS[0]), parity(a & OUTER_GENERATORS[1])];
        }
    }
    Trellis { next, out }
}

/// Inner recursive systematic code: state is the recursion register
/// `(w_{k-1}, w_{k-2}, w_{k-3})` with `w_k = c_k + w_{k-1}` and parity
/// `w_k + w_{k-1} + w_{k-3}`; the first output is the systematic bit.
fn inner_trellis() -> Trellis {
    let mut next = [[0usize; 2]; N_STATES];
    let mut out = [[[0u8; 2]; 2]; N_STATES];
    for s in 0..N_STATES {
        for u in 0..2usize {
            let w = parity(((u as u8) | ((s as u8) << 1)) & INNER_GENERATORS[0]);
            let a = w | ((s as u8) << 1);
            next[s][u] = (a & 7) as usize;
            out[s][u] = [u as u8, parity(a & INNER_GENERATORS[1])];
        }
    }
    Trellis { next, out }
}

/// Encodes one rate-1/2 constituent; input and output are 0/1 bits, output
/// interleaves the two generator outputs per step.
fn encode_constituent(tr: &Trellis, bits: &[u8]) -> Vec<u8> {
    let mut s = 0usize;
    let mut out = Vec::with_capacity(2 * bits.len());
    for &b in bits {
        let u = b as usize;
        out.push(tr.out[s][u][0]);
        out.push(tr.out[s][u][1]);
        s = tr.next[s][u];
    }
    out
}

/// Exact log-domain BCJR over one constituent trellis.
///
/// `in_llrs` are priors on the input bits, `out_llrs` channel/extrinsic LLRs
/// on the output bits (two per step, generator order). Returns posterior
/// LLRs on the input bits and on the output bits; both include the
/// corresponding input terms, so extrinsics are posterior minus prior.
fn siso(tr: &Trellis, in_llrs: &[f64], out_llrs: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let k_steps = in_llrs.len();
    assert_eq!(out_llrs.len(), 2 * k_steps);

    let gamma = |k: usize, s: usize, u: usize| -> f64 {
        let mut g = if u == 1 { in_llrs[k] * 0.5 } else { -in_llrs[k] * 0.5 };
        for j in 0..2 {
            let l = out_llrs[2 * k + j];
            g += if tr.out[s][u][j] == 1 { l * 0.5 } else { -l * 0.5 };
        }
        g
    };

    // Forward: alpha[0] concentrated on state 0 (encoder start).
    let mut alpha = vec![[f64::NEG_INFINITY; N_STATES]; k_steps + 1];
    alpha[0][0] = 0.0;
    for k in 0..k_steps {
        let (head, tail) = alpha.split_at_mut(k + 1);
        let cur = &head[k];
        let nxt = &mut tail[0];
        for s in 0..N_STATES {
            if cur[s] == f64::NEG_INFINITY {
                continue;
            }
            for u in 0..2 {
                let t = tr.next[s][u];
                nxt[t] = logsumexp2(nxt[t], cur[s] + gamma(k, s, u));
            }
        }
        let max = nxt.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for v in nxt.iter_mut() {
            *v -= max;
        }
    }

    // Backward: beta at the final stage uniform (unterminated trellis).
    let mut beta = vec![[0.0f64; N_STATES]; k_steps + 1];
    for k in (0..k_steps).rev() {
        let mut cur = [f64::NEG_INFINITY; N_STATES];
        for s in 0..N_STATES {
            for u in 0..2 {
                let t = tr.next[s][u];
                cur[s] = logsumexp2(cur[s], beta[k + 1][t] + gamma(k, s, u));
            }
        }
        let max = cur.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for v in cur.iter_mut() {
            *v -= max;
        }
        beta[k] = cur;
    }

    let mut post_in = vec![0.0f64; k_steps];
    let mut post_out = vec![0.0f64; 2 * k_steps];
    for k in 0..k_steps {
        let mut num_in = [f64::NEG_INFINITY; 2];
        let mut num_out = [[f64::NEG_INFINITY; 2]; 2];
        for s in 0..N_STATES {
            if alpha[k][s] == f64::NEG_INFINITY {
                continue;
            }
            for u in 0..2 {
                let m = alpha[k][s] + gamma(k, s, u) + beta[k + 1][tr.next[s][u]];
                num_in[u] = logsumexp2(num_in[u], m);
                for j in 0..2 {
                    let b = tr.out[s][u][j] as usize;
                    num_out[j][b] = logsumexp2(num_out[j][b], m);
                }
            }
        }
        post_in[k] = num_in[1] - num_in[0];
        for j in 0..2 {
            post_out[2 * k + j] = num_out[j][1] - num_out[j][0];
        }
    }
    (post_in, post_out)
}

/// Encodes an info-bit block (0/1 values) to the level-shifted +/-1 codeword.
pub fn encode(info_bits: &[u8], cfg: &ScccConfig) -> Result<Vec<i8>, Error> {
    cfg.validate()?;
    if info_bits.is_empty() || info_bits.len() != cfg.info_len {
        return Err(Error::Dimension {
            what: "encode info bits",
            expected: cfg.info_len,
            got: info_bits.len(),
        });
    }
    if info_bits.iter().any(|&b| b > 1) {
        return Err(Error::Domain("info bits must be 0/1"));
    }
    let outer = encode_constituent(&outer_trellis(), info_bits);
    let p1 = make_permutation(outer.len(), cfg.interleaver_seed_1);
    let inner_in: Vec<u8> = p1.iter().map(|&i| outer[i]).collect();
    let inner = encode_constituent(&inner_trellis(), &inner_in);
    let map = make_rate_adjust_map(inner.len(), cfg.target_rate, cfg.rate_adjust_seed)?;
    let adjusted: Vec<u8> = map.src().iter().map(|&i| inner[i]).collect();
    let p2 = make_permutation(adjusted.len(), cfg.interleaver_seed_2);
    Ok(p2
        .iter()
        .map(|&i| if adjusted[i] == 1 { 1i8 } else { -1i8 })
        .collect())
}

/// Selects one of the two constituent codes for the standalone entry
/// points below.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constituent {
    Outer,
    Inner,
}

fn constituent_trellis(which: Constituent) -> Trellis {
    match which {
        Constituent::Outer => outer_trellis(),
        Constituent::Inner => inner_trellis(),
    }
}

/// Encodes one constituent code over 0/1 input bits; the output interleaves
/// the two generator outputs per step.
pub fn constituent_encode(which: Constituent, bits: &[u8]) -> Result<Vec<u8>, Error> {
    if bits.iter().any(|&b| b > 1) {
        return Err(Error::Domain("constituent input bits must be 0/1"));
    }
    Ok(encode_constituent(&constituent_trellis(which), bits))
}

/// One exact forward-backward pass over a single constituent trellis.
///
/// `in_llrs` are priors on the input bits and `out_llrs` LLRs on the output
/// bits (two per step, generator order). Returns posterior LLRs on the input
/// and output bits; both include the corresponding input terms. Exposed so
/// external harnesses can cross-check the pass against exhaustive
/// enumeration on short blocks.
pub fn constituent_siso(
    which: Constituent,
    in_llrs: &[f64],
    out_llrs: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), Error> {
    if in_llrs.is_empty() {
        return Err(Error::Domain("constituent siso needs at least one step"));
    }
    if out_llrs.len() != 2 * in_llrs.len() {
        return Err(Error::Dimension {
            what: "constituent output llrs",
            expected: 2 * in_llrs.len(),
            got: out_llrs.len(),
        });
    }
    Ok(siso(&constituent_trellis(which), in_llrs, out_llrs))
}

/// Decoder output: extrinsic LLRs on the (adjusted, interleaved) codeword
/// and posterior LLRs on the information bits.
#[derive(Debug, Clone, PartialEq)]
pub struct ScccDecode {
    pub extrinsic_llrs: Vec<f64>,
    pub info_llrs: Vec<f64>,
}

/// Iterative SISO decode from codeword LLRs (same arrangement as the encoder
/// output). Runs `n_inner_loops` inner/outer exchanges plus a final inner
/// pass for the codeword posteriors.
pub fn decode(input_llrs: &[f64], cfg: &ScccConfig) -> Result<ScccDecode, Error> {
    cfg.validate()?;
    let n_nominal = 4 * cfg.info_len;
    let map = make_rate_adjust_map(n_nominal, cfg.target_rate, cfg.rate_adjust_seed)?;
    if input_llrs.len() != map.adjusted_len() {
        return Err(Error::Dimension {
            what: "decode input LLRs",
            expected: map.adjusted_len(),
            got: input_llrs.len(),
        });
    }

    // Undo pi2, then fold the rate adjustment: repeated-bit LLRs add,
    // punctured positions stay at zero.
    let p2 = make_permutation(input_llrs.len(), cfg.interleaver_seed_2);
    let mut adj = vec![0.0f64; input_llrs.len()];
    for (i, &src) in p2.iter().enumerate() {
        adj[src] = input_llrs[i];
    }
    let mut nominal = vec![0.0f64; n_nominal];
    for (i, &s) in map.src().iter().enumerate() {
        nominal[s] += adj[i];
    }
    for v in nominal.iter_mut() {
        *v = num::clamp(*v, LLR_CLAMP);
    }

    let inner_tr = inner_trellis();
    let outer_tr = outer_trellis();
    let k_inner = 2 * cfg.info_len;
    let p1 = make_permutation(k_inner, cfg.interleaver_seed_1);

    let mut prior_inner = vec![0.0f64; k_inner];
    let mut outer_ch = vec![0.0f64; k_inner];
    let mut info_llrs = vec![0.0f64; cfg.info_len];
    for _ in 0..cfg.n_inner_loops {
        let (post_in, _) = siso(&inner_tr, &prior_inner, &nominal);
        for i in 0..k_inner {
            outer_ch[p1[i]] = num::clamp(post_in[i] - prior_inner[i], LLR_CLAMP);
        }
        let zeros = vec![0.0f64; cfg.info_len];
        let (post_info, post_out) = siso(&outer_tr, &zeros, &outer_ch);
        info_llrs = post_info;
        for i in 0..k_inner {
            prior_inner[i] = num::clamp(post_out[p1[i]] - outer_ch[p1[i]], LLR_CLAMP);
        }
    }
    for v in info_llrs.iter_mut() {
        *v = num::clamp(*v, LLR_CLAMP);
    }

    // Final inner pass with the freshest outer extrinsics gives the codeword
    // posteriors; extrinsic toward the channel subtracts each adjusted
    // position's own input.
    let (_, post_cw) = siso(&inner_tr, &prior_inner, &nominal);
    let mut ext_adj = vec![0.0f64; adj.len()];
    for (i, &s) in map.src().iter().enumerate() {
        ext_adj[i] = num::clamp(post_cw[s] - adj[i], LLR_CLAMP);
    }
    let extrinsic_llrs: Vec<f64> = p2.iter().map(|&i| ext_adj[i]).collect();

    Ok(ScccDecode {
        extrinsic_llrs,
        info_llrs,
    })
}
