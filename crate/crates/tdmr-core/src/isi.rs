//! 2D read-head blur and additive white Gaussian noise, with SNR calibration.
//!
//! The received image is `r(m,n) = sum_{k,l} h(k,l) y(m-k, n-l) + w(m,n)`;
//! pixels outside the written image are taken as −1 (the level-shifted zero
//! bit), a convention shared by every detector in the chain.

use alloc::vec::Vec;

use crate::num;
use crate::plane::{BitPlane, RealPlane};
use crate::rng::{rng_from_seed, standard_normal};
use crate::Error;

/// Finite-support read-head impulse response, anchored at offset (0, 0).
#[derive(Debug, Clone, PartialEq)]
pub struct IsiMask {
    rows: usize,
    cols: usize,
    taps: Vec<f64>,
}

impl IsiMask {
    /// The nominal 2x2 averaging mask, `h(k, l) = 0.25` on `{0,1} x {0,1}`.
    pub fn averaging_2x2() -> Self {
        Self {
            rows: 2,
            cols: 2,
            taps: alloc::vec![0.25; 4],
        }
    }

    /// Arbitrary finite-support mask from row-major taps.
    pub fn new(rows: usize, cols: usize, taps: Vec<f64>) -> Result<Self, Error> {
        if rows == 0 || cols == 0 || taps.len() != rows * cols {
            return Err(Error::Dimension {
                what: "IsiMask taps",
                expected: rows * cols,
                got: taps.len(),
            });
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::Domain("mask taps must be finite"));
        }
        Ok(Self { rows, cols, taps })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn tap(&self, k: usize, l: usize) -> f64 {
        self.taps[k * self.cols + l]
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }
}

/// Noiseless read: 2D convolution of the written bits with the mask over the
/// output grid aligned with `y`, padding out-of-image pixels with −1.
pub fn convolve2d(y: &BitPlane, mask: &IsiMask) -> RealPlane {
    let mut out = RealPlane::zeros(y.rows(), y.cols());
    for m in 0..y.rows() {
        for n in 0..y.cols() {
            let mut acc = 0.0;
            for k in 0..mask.rows() {
                for l in 0..mask.cols() {
                    acc += mask.tap(k, l)
                        * y.get_padded(m as isize - k as isize, n as isize - l as isize) as f64;
                }
            }
            out.set(m, n, acc);
        }
    }
    out
}

/// Noise standard deviation realizing `snr_db` against the empirical
/// (population) variance of the noiseless plane.
pub fn calibrate_sigma(noiseless: &RealPlane, snr_db: f64) -> Result<f64, Error> {
    if noiseless.values().len() < 2 {
        return Err(Error::Domain("need at least 2 samples to calibrate"));
    }
    let var = noiseless.variance();
    if var <= 0.0 {
        return Err(Error::Domain("noiseless plane has zero variance"));
    }
    Ok(num::sqrt(var / num::powf(10.0, snr_db / 10.0)))
}

/// Adds i.i.d. zero-mean Gaussian noise of standard deviation `sigma`.
pub fn add_awgn(noiseless: &RealPlane, sigma: f64, seed: u64) -> Result<RealPlane, Error> {
    if sigma < 0.0 {
        return Err(Error::Domain("sigma must be nonnegative"));
    }
    let mut out = noiseless.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let mut rng = rng_from_seed(seed);
    for v in out.values_mut() {
        *v += sigma * standard_normal(&mut rng);
    }
    Ok(out)
}

/// Measured SNR in dB of a received plane against its noiseless counterpart.
pub fn measure_snr_db(noiseless: &RealPlane, received: &RealPlane) -> Result<f64, Error> {
    if noiseless.rows() != received.rows() || noiseless.cols() != received.cols() {
        return Err(Error::Dimension {
            what: "measure_snr_db planes",
            expected: noiseless.values().len(),
            got: received.values().len(),
        });
    }
    let n = noiseless.values().len() as f64;
    let noise_var: f64 = noiseless
        .values()
        .iter()
        .zip(received.values())
        .map(|(&a, &b)| (b - a) * (b - a))
        .sum::<f64>()
        / n;
    if noise_var <= 0.0 {
        return Err(Error::Domain("received plane carries no noise"));
    }
    Ok(10.0 * num::log10(noiseless.variance() / noise_var))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn averaging_mask_preserves_constant_planes() {
        let mask = IsiMask::averaging_2x2();
        let plus = convolve2d(&BitPlane::filled(4, 4, 1), &mask);
        let minus = convolve2d(&BitPlane::filled(4, 4, -1), &mask);
        // Interior of the +1 plane is +1; the first row/column feel the −1
        // padding.
        assert!((plus.get(2, 2) - 1.0).abs() < 1e-12);
        assert!((plus.get(0, 0) - (-0.5)).abs() < 1e-12);
        assert!(minus.values().iter().all(|&v| (v + 1.0).abs() < 1e-12));
    }

    #[test]
    fn checkerboard_interior_is_zero() {
        let mut y = BitPlane::filled(6, 6, 1);
        for m in 0..6 {
            for n in 0..6 {
                if (m + n) % 2 == 1 {
                    y.set(m, n, -1);
                }
            }
        }
        let r = convolve2d(&y, &IsiMask::averaging_2x2());
        for m in 1..6 {
            for n in 1..6 {
                assert!(r.get(m, n).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn convolution_is_linear_in_the_mask() {
        let probs = crate::dgm::derive_grain_probs(0.2).unwrap();
        let img = crate::dgm::generate_tiling(8, 8, &probs, 2).unwrap();
        let mut y = BitPlane::filled(8, 8, 1);
        for m in 0..8 {
            for n in 0..8 {
                y.set(m, n, if img.grain_id(m, n) % 2 == 0 { 1 } else { -1 });
            }
        }
        let full = IsiMask::new(2, 2, alloc::vec![0.4, 0.1, 0.2, 0.3]).unwrap();
        let a = IsiMask::new(2, 2, alloc::vec![0.4, 0.0, 0.2, 0.0]).unwrap();
        let b = IsiMask::new(2, 2, alloc::vec![0.0, 0.1, 0.0, 0.3]).unwrap();
        let rf = convolve2d(&y, &full);
        let ra = convolve2d(&y, &a);
        let rb = convolve2d(&y, &b);
        for (f, (x, z)) in rf.values().iter().zip(ra.values().iter().zip(rb.values())) {
            assert!((f - (x + z)).abs() < 1e-12);
        }
    }

    #[test]
    fn sigma_calibration_formula() {
        let vals: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 0.5 } else { -0.5 }).collect();
        let plane = RealPlane::from_values(10, 100, vals).unwrap();
        assert!((plane.variance() - 0.25).abs() < 1e-12);
        let sigma = calibrate_sigma(&plane, 10.0).unwrap();
        assert!((sigma * sigma - 0.025).abs() < 1e-12);
        let sigma0 = calibrate_sigma(&plane, 0.0).unwrap();
        assert!((sigma0 * sigma0 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_plane_rejected() {
        let plane = RealPlane::zeros(2, 2);
        assert!(calibrate_sigma(&plane, 10.0).is_err());
    }

    #[test]
    fn awgn_statistics_and_determinism() {
        let plane = RealPlane::zeros(1000, 1000);
        let sigma = 0.3;
        let noisy = add_awgn(&plane, sigma, 11).unwrap();
        let n = 1_000_000.0;
        let mean: f64 = noisy.values().iter().sum::<f64>() / n;
        let var: f64 = noisy.values().iter().map(|&v| v * v).sum::<f64>() / n - mean * mean;
        // CLT bound: 5 sigma / sqrt(N).
        assert!(mean.abs() < 5.0 * sigma / n.sqrt(), "mean {mean}");
        assert!((var / (sigma * sigma) - 1.0).abs() < 0.01, "var {var}");
        let again = add_awgn(&plane, sigma, 11).unwrap();
        assert_eq!(noisy, again);
        assert_eq!(add_awgn(&plane, 0.0, 11).unwrap(), plane);
        assert!(add_awgn(&plane, -1.0, 11).is_err());
    }

    #[test]
    fn iid_field_variance_approaches_quarter() {
        // i.i.d. equiprobable +/-1 bits through the averaging mask: variance
        // tends to 4 * 0.25^2 = 0.25.
        use rand::Rng;
        let mut rng = crate::rng::rng_from_seed(23);
        let (rows, cols) = (500, 500);
        let mut y = BitPlane::filled(rows, cols, 1);
        for m in 0..rows {
            for n in 0..cols {
                y.set(m, n, if rng.random::<bool>() { 1 } else { -1 });
            }
        }
        let r = convolve2d(&y, &IsiMask::averaging_2x2());
        assert!((r.variance() - 0.25).abs() < 0.005, "{}", r.variance());
    }
}
