//! Rectangular sample planes exchanged between the chain's modules.
//!
//! Three layouts appear on module boundaries: per-pixel ±1 symbols
//! ([`BitPlane`]), per-pixel reals ([`RealPlane`]), and per-2x2-block 16-ary
//! LLR vectors ([`Llr16Plane`]). Blocks tile the pixel grid on a 2-pixel
//! stride; block `(bm, bn)` covers pixels `(2bm..2bm+2, 2bn..2bn+2)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::num;
use crate::{Error, LLR16_CLAMP, PROB_FLOOR};

/// Rectangular array of ±1 symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitPlane {
    rows: usize,
    cols: usize,
    data: Vec<i8>,
}

impl BitPlane {
    /// A plane filled with `value` (must be ±1).
    pub fn filled(rows: usize, cols: usize, value: i8) -> Self {
        assert!(value == 1 || value == -1, "BitPlane values are +/-1");
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Builds a plane from row-major ±1 values.
    pub fn from_values(rows: usize, cols: usize, values: Vec<i8>) -> Result<Self, Error> {
        if values.len() != rows * cols {
            return Err(Error::Dimension {
                what: "BitPlane payload",
                expected: rows * cols,
                got: values.len(),
            });
        }
        if values.iter().any(|&v| v != 1 && v != -1) {
            return Err(Error::Domain("BitPlane values must be +/-1"));
        }
        Ok(Self { rows, cols, data: values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize) -> i8 {
        self.data[m * self.cols + n]
    }

    /// Value at `(m, n)`, or −1 outside the image (the chain-wide boundary
    /// convention).
    #[inline]
    pub fn get_padded(&self, m: isize, n: isize) -> i8 {
        if m < 0 || n < 0 || m as usize >= self.rows || n as usize >= self.cols {
            -1
        } else {
            self.data[m as usize * self.cols + n as usize]
        }
    }

    #[inline]
    pub fn set(&mut self, m: usize, n: usize, value: i8) {
        debug_assert!(value == 1 || value == -1);
        self.data[m * self.cols + n] = value;
    }

    pub fn values(&self) -> &[i8] {
        &self.data
    }
}

/// Rectangular array of real samples.
#[derive(Debug, Clone, PartialEq)]
pub struct RealPlane {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealPlane {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_values(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, Error> {
        if values.len() != rows * cols {
            return Err(Error::Dimension {
                what: "RealPlane payload",
                expected: rows * cols,
                got: values.len(),
            });
        }
        Ok(Self { rows, cols, data: values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.data[m * self.cols + n]
    }

    #[inline]
    pub fn set(&mut self, m: usize, n: usize, value: f64) {
        self.data[m * self.cols + n] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Population variance over all samples.
    pub fn variance(&self) -> f64 {
        let n = self.data.len() as f64;
        let mean: f64 = self.data.iter().sum::<f64>() / n;
        self.data.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n
    }

    pub fn transposed(&self) -> RealPlane {
        let mut out = RealPlane::zeros(self.cols, self.rows);
        for m in 0..self.rows {
            for n in 0..self.cols {
                out.set(n, m, self.get(m, n));
            }
        }
        out
    }
}

/// Index of a 2x2 block configuration.
///
/// Pixels are ordered column-major within the block: `y1 = (2bm, 2bn)`,
/// `y2 = (2bm+1, 2bn)`, `y3 = (2bm, 2bn+1)`, `y4 = (2bm+1, 2bn+1)`. Bit `j`
/// of the index is set when `y(j+1) = +1`, so index 0 is the all-(−1)
/// reference configuration.
pub const NUM_CONFIGS: usize = 16;

/// Packs four ±1 pixels (column-major block order) into a configuration index.
#[inline]
pub fn config_index(y1: i8, y2: i8, y3: i8, y4: i8) -> usize {
    (((y1 > 0) as usize))
        | (((y2 > 0) as usize) << 1)
        | (((y3 > 0) as usize) << 2)
        | (((y4 > 0) as usize) << 3)
}

/// Unpacks a configuration index into the four ±1 pixels.
#[inline]
pub fn config_pixels(idx: usize) -> [i8; 4] {
    [
        if idx & 1 != 0 { 1 } else { -1 },
        if idx & 2 != 0 { 1 } else { -1 },
        if idx & 4 != 0 { 1 } else { -1 },
        if idx & 8 != 0 { 1 } else { -1 },
    ]
}

/// Configuration index after transposing the block (swaps `y2` and `y3`).
#[inline]
pub fn config_transposed(idx: usize) -> usize {
    (idx & 0b1001) | ((idx & 0b0010) << 1) | ((idx & 0b0100) >> 1)
}

/// Per-2x2-block 16-ary LLR vectors against the all-(−1) reference.
#[derive(Debug, Clone, PartialEq)]
pub struct Llr16Plane {
    block_rows: usize,
    block_cols: usize,
    data: Vec<[f64; NUM_CONFIGS]>,
}

impl Llr16Plane {
    /// A plane of uniform (all-zero-LLR) blocks.
    pub fn uniform(block_rows: usize, block_cols: usize) -> Self {
        Self {
            block_rows,
            block_cols,
            data: vec![[0.0; NUM_CONFIGS]; block_rows * block_cols],
        }
    }

    /// Block grid covering a `rows` x `cols` pixel plane (both even).
    pub fn for_pixels(rows: usize, cols: usize) -> Result<Self, Error> {
        if rows % 2 != 0 || cols % 2 != 0 {
            return Err(Error::Domain("pixel dimensions must be even"));
        }
        Ok(Self::uniform(rows / 2, cols / 2))
    }

    pub fn block_rows(&self) -> usize {
        self.block_rows
    }

    pub fn block_cols(&self) -> usize {
        self.block_cols
    }

    #[inline]
    pub fn block(&self, bm: usize, bn: usize) -> &[f64; NUM_CONFIGS] {
        &self.data[bm * self.block_cols + bn]
    }

    #[inline]
    pub fn block_mut(&mut self, bm: usize, bn: usize) -> &mut [f64; NUM_CONFIGS] {
        &mut self.data[bm * self.block_cols + bn]
    }

    pub fn blocks(&self) -> &[[f64; NUM_CONFIGS]] {
        &self.data
    }

    pub fn blocks_mut(&mut self) -> &mut [[f64; NUM_CONFIGS]] {
        &mut self.data
    }

    /// Writes a block from raw probabilities: floors, normalizes, converts to
    /// LLRs against configuration 0, and clamps.
    pub fn set_block_from_probs(&mut self, bm: usize, bn: usize, probs: &[f64; NUM_CONFIGS]) {
        let mut floored = [0.0; NUM_CONFIGS];
        let mut sum = 0.0;
        for i in 0..NUM_CONFIGS {
            floored[i] = probs[i].max(PROB_FLOOR);
            sum += floored[i];
        }
        let log_ref = num::ln(floored[0] / sum);
        let block = self.block_mut(bm, bn);
        for i in 0..NUM_CONFIGS {
            block[i] = num::clamp(num::ln(floored[i] / sum) - log_ref, LLR16_CLAMP);
        }
        block[0] = 0.0;
    }

    /// Normalized probability vector for one block (softmax of its LLRs).
    pub fn block_probs(&self, bm: usize, bn: usize) -> [f64; NUM_CONFIGS] {
        llrs_to_probs(self.block(bm, bn))
    }

    /// The same plane with rows and columns of the underlying pixel grid
    /// exchanged.
    pub fn transposed(&self) -> Llr16Plane {
        let mut out = Llr16Plane::uniform(self.block_cols, self.block_rows);
        for bm in 0..self.block_rows {
            for bn in 0..self.block_cols {
                let src = self.block(bm, bn);
                let dst = out.block_mut(bn, bm);
                for idx in 0..NUM_CONFIGS {
                    dst[config_transposed(idx)] = src[idx];
                }
            }
        }
        out
    }
}

/// Softmax of a 16-ary LLR vector.
pub fn llrs_to_probs(llrs: &[f64; NUM_CONFIGS]) -> [f64; NUM_CONFIGS] {
    let max = llrs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs = [0.0; NUM_CONFIGS];
    let mut sum = 0.0;
    for i in 0..NUM_CONFIGS {
        probs[i] = num::exp(llrs[i] - max);
        sum += probs[i];
    }
    for p in probs.iter_mut() {
        *p /= sum;
    }
    probs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_roundtrip() {
        for idx in 0..NUM_CONFIGS {
            let [y1, y2, y3, y4] = config_pixels(idx);
            assert_eq!(config_index(y1, y2, y3, y4), idx);
        }
        assert_eq!(config_index(-1, -1, -1, -1), 0);
    }

    #[test]
    fn config_transpose_is_involution() {
        for idx in 0..NUM_CONFIGS {
            assert_eq!(config_transposed(config_transposed(idx)), idx);
            let [y1, y2, y3, y4] = config_pixels(idx);
            assert_eq!(config_transposed(idx), config_index(y1, y3, y2, y4));
        }
    }

    #[test]
    fn block_probs_normalized() {
        let mut plane = Llr16Plane::uniform(1, 1);
        let mut raw = [0.0; NUM_CONFIGS];
        for (i, r) in raw.iter_mut().enumerate() {
            *r = (i as f64 + 1.0) * 0.01;
        }
        plane.set_block_from_probs(0, 0, &raw);
        let probs = plane.block_probs(0, 0);
        let sum: f64 = probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert_eq!(plane.block(0, 0)[0], 0.0);
        // Probabilities are recovered up to normalization.
        let total: f64 = raw.iter().sum();
        for i in 0..NUM_CONFIGS {
            assert!((probs[i] - raw[i] / total).abs() < 1e-9);
        }
    }

    #[test]
    fn bitplane_padding_is_minus_one() {
        let plane = BitPlane::filled(2, 2, 1);
        assert_eq!(plane.get_padded(-1, 0), -1);
        assert_eq!(plane.get_padded(0, -1), -1);
        assert_eq!(plane.get_padded(2, 0), -1);
        assert_eq!(plane.get_padded(1, 1), 1);
    }

    #[test]
    fn real_plane_variance() {
        let plane = RealPlane::from_values(1, 4, alloc::vec![1.0, -1.0, 1.0, -1.0]).unwrap();
        assert!((plane.variance() - 1.0).abs() < 1e-12);
    }
}
