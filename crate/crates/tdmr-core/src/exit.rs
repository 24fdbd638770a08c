//! Extrinsic-information-transfer (EXIT) analysis tools.
//!
//! Mutual information is estimated from paired (LLR, true bit) samples via
//! conditional histograms. Synthetic a-priori LLRs are injected from a
//! generalized-extreme-value (GEV) family whose scale is coupled to the
//! location parameter; curve comparison uses the distance between the second
//! points of two EXIT curves plus an intersection test.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::num;
use crate::rng::rng_from_seed;
use crate::Error;

/// Number of histogram bins used by the mutual-information estimator.
pub const MI_BINS: usize = 200;
/// Half-width of the symmetric LLR range covered by the histograms.
pub const MI_RANGE: f64 = 40.0;
/// Per-bin additive regularization applied before normalization.
pub const MI_REGULARIZER: f64 = 1e-12;
/// Shape parameter used for GEV LLR injection.
pub const INJECTION_K: f64 = -0.065_877_3;
/// Number of points sampled along each EXIT curve.
pub const CURVE_POINTS: usize = 13;

/// Parameters of the generalized extreme value density.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GevParams {
    /// Shape; `k = 0` selects the Gumbel (exponential) branch.
    pub k: f64,
    /// Scale; must be positive.
    pub sigma: f64,
    /// Location.
    pub mu: f64,
}

impl GevParams {
    /// Injection family: fixed shape, scale coupled to the location.
    pub fn coupled(mu: f64) -> Self {
        let sigma = (2.7170 * mu + 0.5586).min(4.37);
        GevParams { k: INJECTION_K, sigma, mu }
    }
}

/// GEV probability density at `x`; zero outside the support.
pub fn gev_pdf(x: f64, p: &GevParams) -> f64 {
    if p.sigma <= 0.0 {
        return 0.0;
    }
    let z = (x - p.mu) / p.sigma;
    let t = if p.k == 0.0 {
        num::exp(-z)
    } else {
        let base = 1.0 + p.k * z;
        if base <= 0.0 {
            return 0.0;
        }
        num::powf(base, -1.0 / p.k)
    };
    num::powf(t, p.k + 1.0) * num::exp(-t) / p.sigma
}

/// Conditional histogram counts of `llrs` split by the sign of `bits`.
///
/// Returns `(counts_minus, counts_plus)` over [`MI_BINS`] bins spanning
/// `[-MI_RANGE, MI_RANGE]`; out-of-range samples land in the edge bins.
pub fn conditional_counts(llrs: &[f64], bits: &[i8]) -> Result<(Vec<u64>, Vec<u64>), Error> {
    if llrs.len() != bits.len() {
        return Err(Error::Dimension {
            what: "llr/bit sample count",
            expected: llrs.len(),
            got: bits.len(),
        });
    }
    if llrs.is_empty() {
        return Err(Error::Domain("empty sample set"));
    }
    let mut minus = vec![0u64; MI_BINS];
    let mut plus = vec![0u64; MI_BINS];
    let scale = MI_BINS as f64 / (2.0 * MI_RANGE);
    for (&l, &b) in llrs.iter().zip(bits) {
        let mut idx = ((l + MI_RANGE) * scale) as isize;
        if idx < 0 {
            idx = 0;
        }
        if idx >= MI_BINS as isize {
            idx = MI_BINS as isize - 1;
        }
        match b {
            1 => plus[idx as usize] += 1,
            -1 => minus[idx as usize] += 1,
            _ => return Err(Error::Domain("bits must be +/-1")),
        }
    }
    Ok((minus, plus))
}

/// Mutual information between LLR samples and their true bits, in bits.
///
/// Estimated from 200-bin conditional histograms and clamped to `[0, 1]`.
/// Errors when only one bit class is present.
pub fn mutual_information(llrs: &[f64], bits: &[i8]) -> Result<f64, Error> {
    let (minus, plus) = conditional_counts(llrs, bits)?;
    let n_minus: u64 = minus.iter().sum();
    let n_plus: u64 = plus.iter().sum();
    if n_minus == 0 || n_plus == 0 {
        return Err(Error::Domain("both bit classes required"));
    }
    let mut p_minus = vec![0.0f64; MI_BINS];
    let mut p_plus = vec![0.0f64; MI_BINS];
    let mut sum_minus = 0.0;
    let mut sum_plus = 0.0;
    for i in 0..MI_BINS {
        p_minus[i] = minus[i] as f64 / n_minus as f64 + MI_REGULARIZER;
        p_plus[i] = plus[i] as f64 / n_plus as f64 + MI_REGULARIZER;
        sum_minus += p_minus[i];
        sum_plus += p_plus[i];
    }
    let mut info = 0.0;
    for i in 0..MI_BINS {
        let pm = p_minus[i] / sum_minus;
        let pp = p_plus[i] / sum_plus;
        let denom = pm + pp;
        info += 0.5 * pm * num::log2(2.0 * pm / denom);
        info += 0.5 * pp * num::log2(2.0 * pp / denom);
    }
    Ok(info.clamp(0.0, 1.0))
}

/// Draw sign-coupled a-priori LLRs from the coupled GEV family.
///
/// Samples are drawn for the +1 class by inverse-CDF transform and mirrored
/// for the -1 class. `mu` must be nonnegative.
pub fn sample_injected_llrs(mu: f64, bits: &[i8], seed: u64) -> Result<Vec<f64>, Error> {
    if !(mu >= 0.0) {
        return Err(Error::Domain("injection location must be nonnegative"));
    }
    let p = GevParams::coupled(mu);
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(bits.len());
    for &b in bits {
        if b != 1 && b != -1 {
            return Err(Error::Domain("bits must be +/-1"));
        }
        let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
        let x = p.mu + p.sigma * (num::powf(-num::ln(u), -p.k) - 1.0) / p.k;
        out.push(b as f64 * x);
    }
    Ok(out)
}

/// One detector's EXIT characteristic: ordered (I_A, I_E) points.
#[derive(Clone, Debug, PartialEq)]
pub struct ExitCurve {
    points: Vec<(f64, f64)>,
}

impl ExitCurve {
    /// Validates coordinates in `[0, 1]` and strictly increasing I_A.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, Error> {
        for &(ia, ie) in &points {
            if !(0.0..=1.0).contains(&ia) || !(0.0..=1.0).contains(&ie) {
                return Err(Error::Domain("curve coordinates must lie in [0,1]"));
            }
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Domain("I_A must be strictly increasing"));
            }
        }
        Ok(ExitCurve { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }
}

/// Result of comparing two EXIT curves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurveDistance {
    /// Euclidean distance between the curves' second points.
    pub distance: f64,
    /// Whether the curves intersect or touch over their common I_A span.
    pub touch: bool,
}

/// Distance between the second points of two curves, with intersection check.
///
/// The intersection test linearly interpolates both curves on the union of
/// their I_A grids restricted to the common span and looks for a sign change
/// or near-zero gap in `I_E(c1) - I_E(c2)`.
pub fn curve_distance(c1: &ExitCurve, c2: &ExitCurve) -> Result<CurveDistance, Error> {
    if c1.points.len() < 2 || c2.points.len() < 2 {
        return Err(Error::Domain("curves need at least two points"));
    }
    let (a1, e1) = c1.points[1];
    let (a2, e2) = c2.points[1];
    let distance = num::sqrt((a1 - a2) * (a1 - a2) + (e1 - e2) * (e1 - e2));

    let lo = c1.points[0].0.max(c2.points[0].0);
    let hi = c1.points[c1.points.len() - 1].0.min(c2.points[c2.points.len() - 1].0);
    let mut touch = false;
    if hi >= lo {
        let mut grid: Vec<f64> = c1
            .points
            .iter()
            .chain(c2.points.iter())
            .map(|p| p.0)
            .filter(|&a| a >= lo && a <= hi)
            .collect();
        grid.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut prev_sign = 0i8;
        for &a in &grid {
            let d = interp(&c1.points, a) - interp(&c2.points, a);
            if d.abs() <= 1e-9 {
                touch = true;
                break;
            }
            let s = if d > 0.0 { 1 } else { -1 };
            if prev_sign != 0 && s != prev_sign {
                touch = true;
                break;
            }
            prev_sign = s;
        }
    }
    Ok(CurveDistance { distance, touch })
}

fn interp(points: &[(f64, f64)], a: f64) -> f64 {
    if a <= points[0].0 {
        return points[0].1;
    }
    for w in points.windows(2) {
        if a <= w[1].0 {
            let t = (a - w[0].0) / (w[1].0 - w[0].0);
            return w[0].1 + t * (w[1].1 - w[0].1);
        }
    }
    points[points.len() - 1].1
}
