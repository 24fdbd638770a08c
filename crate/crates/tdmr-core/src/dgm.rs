//! Four-grain rectangular discrete grain media model and the raster-scan
//! write process with grain over-write.
//!
//! The medium is an exact tiling of the pixel grid by four rectangular grain
//! shapes: 1x1, 1x2 (one row, two columns), 2x1 (two rows, one column), and
//! 2x2. Writing proceeds in row-major raster order and a multi-pixel grain
//! keeps only the polarity of the last bit raster-written onto it; the
//! quadrant offset of each cell points at that last-written cell.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::num;
use crate::plane::BitPlane;
use crate::rng::rng_from_seed;
use crate::Error;

/// The four grain shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrainType {
    /// 1x1.
    Single,
    /// One row, two columns.
    Horizontal,
    /// Two rows, one column.
    Vertical,
    /// 2x2.
    Quad,
}

impl GrainType {
    pub const ALL: [GrainType; 4] = [
        GrainType::Single,
        GrainType::Horizontal,
        GrainType::Vertical,
        GrainType::Quad,
    ];

    /// (rows, cols) footprint.
    pub fn shape(self) -> (usize, usize) {
        match self {
            GrainType::Single => (1, 1),
            GrainType::Horizontal => (1, 2),
            GrainType::Vertical => (2, 1),
            GrainType::Quad => (2, 2),
        }
    }

    pub fn index(self) -> usize {
        match self {
            GrainType::Single => 0,
            GrainType::Horizontal => 1,
            GrainType::Vertical => 2,
            GrainType::Quad => 3,
        }
    }
}

/// Cell labels of the quadrant notation.
///
/// `A` is the 1x1 grain; `B`/`C` are the top/bottom of a vertical grain;
/// `D`/`E` are the left/right of a horizontal grain; `F`/`G`/`H`/`I` are the
/// top-left/bottom-left/top-right/bottom-right of a 2x2 grain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellRole {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
    I,
}

impl CellRole {
    /// Offset `(dm, dn)` from this cell to its grain's last-written cell.
    pub fn quadrant_offset(self) -> (usize, usize) {
        match self {
            CellRole::A | CellRole::C | CellRole::E | CellRole::I => (0, 0),
            CellRole::B | CellRole::H => (1, 0),
            CellRole::D | CellRole::G => (0, 1),
            CellRole::F => (1, 1),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            CellRole::A => 'A',
            CellRole::B => 'B',
            CellRole::C => 'C',
            CellRole::D => 'D',
            CellRole::E => 'E',
            CellRole::F => 'F',
            CellRole::G => 'G',
            CellRole::H => 'H',
            CellRole::I => 'I',
        }
    }

    pub fn from_char(c: char) -> Option<CellRole> {
        Some(match c {
            'A' => CellRole::A,
            'B' => CellRole::B,
            'C' => CellRole::C,
            'D' => CellRole::D,
            'E' => CellRole::E,
            'F' => CellRole::F,
            'G' => CellRole::G,
            'H' => CellRole::H,
            'I' => CellRole::I,
            _ => return None,
        })
    }
}

/// Occurrence probabilities of the four grain types.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrainProbs {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
}

impl GrainProbs {
    /// Validates the simplex, bits-per-grain, and isotropy constraints.
    pub fn new(p1: f64, p2: f64, p3: f64, p4: f64) -> Result<Self, Error> {
        let probs = Self { p1, p2, p3, p4 };
        if [p1, p2, p3, p4].iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::Domain("grain probabilities must lie in [0, 1]"));
        }
        if ((p1 + p2 + p3 + p4) - 1.0).abs() > 1e-12 {
            return Err(Error::Domain("grain probabilities must sum to 1"));
        }
        if ((p1 + 2.0 * p2 + 2.0 * p3 + 4.0 * p4) - 2.0).abs() > 1e-12 {
            return Err(Error::Domain("average coded bits per grain must be 2"));
        }
        if (p2 - p3).abs() > 1e-12 {
            return Err(Error::Domain("isotropy requires p2 = p3"));
        }
        Ok(probs)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.p1, self.p2, self.p3, self.p4]
    }
}

/// Solves the two linear constraints plus isotropy for a given probability
/// of two-bit grains.
///
/// Closed form: `p4 = (1 - 2 p2) / 3`, `p1 = (2/3)(1 - 2 p2)`.
pub fn derive_grain_probs(p2: f64) -> Result<GrainProbs, Error> {
    if !(0.0..=0.5).contains(&p2) {
        return Err(Error::Domain("p2 must lie in [0, 0.5]"));
    }
    let p4 = (1.0 - 2.0 * p2) / 3.0;
    let p1 = 2.0 * (1.0 - 2.0 * p2) / 3.0;
    GrainProbs::new(p1, p2, p2, p4)
}

/// An exact rectangular tiling with per-pixel grain membership and roles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrainImage {
    rows: usize,
    cols: usize,
    cell_role: Vec<CellRole>,
    grain_id: Vec<u32>,
    grain_types: Vec<GrainType>,
}

impl GrainImage {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn role(&self, m: usize, n: usize) -> CellRole {
        self.cell_role[m * self.cols + n]
    }

    #[inline]
    pub fn grain_id(&self, m: usize, n: usize) -> u32 {
        self.grain_id[m * self.cols + n]
    }

    /// Number of grains in the tiling.
    pub fn grain_count(&self) -> usize {
        self.grain_types.len()
    }

    /// Type of grain `id`.
    pub fn grain_type(&self, id: u32) -> GrainType {
        self.grain_types[id as usize]
    }

    /// Quadrant offset `G_(m,n)` of the cell at `(m, n)`.
    pub fn quadrant_offset(&self, m: usize, n: usize) -> Result<(usize, usize), Error> {
        if m >= self.rows || n >= self.cols {
            return Err(Error::OutOfBounds);
        }
        Ok(self.role(m, n).quadrant_offset())
    }

    /// Fraction of grains of each type.
    pub fn type_frequencies(&self) -> [f64; 4] {
        let mut counts = [0usize; 4];
        for &t in &self.grain_types {
            counts[t.index()] += 1;
        }
        let total = self.grain_types.len() as f64;
        counts.map(|c| c as f64 / total)
    }

    /// Rebuilds an image from per-pixel roles and grain ids (used by the file
    /// format decoder); validates grain geometry.
    pub fn from_parts(
        rows: usize,
        cols: usize,
        cell_role: Vec<CellRole>,
        grain_id: Vec<u32>,
    ) -> Result<Self, Error> {
        if cell_role.len() != rows * cols || grain_id.len() != rows * cols {
            return Err(Error::Dimension {
                what: "GrainImage payload",
                expected: rows * cols,
                got: cell_role.len().min(grain_id.len()),
            });
        }
        let n_grains = grain_id.iter().map(|&g| g as usize + 1).max().unwrap_or(0);
        let mut grain_types = vec![None; n_grains];
        for m in 0..rows {
            for n in 0..cols {
                let idx = m * cols + n;
                let ty = match cell_role[idx] {
                    CellRole::A => GrainType::Single,
                    CellRole::D | CellRole::E => GrainType::Horizontal,
                    CellRole::B | CellRole::C => GrainType::Vertical,
                    _ => GrainType::Quad,
                };
                let slot = &mut grain_types[grain_id[idx] as usize];
                match slot {
                    None => *slot = Some(ty),
                    Some(prev) if *prev == ty => {}
                    Some(_) => return Err(Error::Domain("inconsistent roles within a grain")),
                }
            }
        }
        let grain_types = grain_types
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or(Error::Domain("grain ids are not contiguous"))?;
        Ok(Self {
            rows,
            cols,
            cell_role,
            grain_id,
            grain_types,
        })
    }
}

/// Seeded tiling generator with a calibrated placement distribution.
///
/// Raster-scan first-fit placement restricts draws to the grain types that
/// fit at each pixel, which suppresses wide grains whenever the pixel to the
/// right is already covered from the row above. Drawing straight from the
/// nominal [`GrainProbs`] therefore over-produces small grains by several
/// percent. The sampler corrects for this at construction: it repeatedly
/// tiles a fixed-seed calibration image, measures the empirical type
/// frequencies, and adjusts the internal draw distribution multiplicatively
/// until the frequencies match the nominal probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct TilingSampler {
    probs: GrainProbs,
    draw: [f64; 4],
}

const CALIB_ROWS: usize = 600;
const CALIB_COLS: usize = 600;
const CALIB_TOL: f64 = 0.002;
const CALIB_MAX_ITERS: usize = 80;

impl TilingSampler {
    /// Calibrates a sampler for the given nominal type probabilities.
    ///
    /// Deterministic: the calibration images use internal fixed seeds.
    pub fn new(probs: &GrainProbs) -> Result<Self, Error> {
        let target = probs.as_array();
        let mut draw = target;
        let mut best = (f64::INFINITY, draw);
        for iter in 0..CALIB_MAX_ITERS {
            let seed = crate::rng::derive_seed(0xd61a_11b8_ca11_b8a7, &[iter as u64]);
            let img = tile_with_draw(CALIB_ROWS, CALIB_COLS, &draw, seed);
            let freq = img.type_frequencies();
            let dev = target
                .iter()
                .zip(&freq)
                .map(|(t, f)| (t - f).abs())
                .fold(0.0, f64::max);
            if dev < best.0 {
                best = (dev, draw);
            }
            if dev < CALIB_TOL {
                break;
            }
            let mut sum = 0.0;
            for i in 0..4 {
                if target[i] > 0.0 {
                    draw[i] *= num::powf(target[i] / freq[i].max(1e-6), 0.5);
                } else {
                    draw[i] = 0.0;
                }
                sum += draw[i];
            }
            for d in draw.iter_mut() {
                *d /= sum;
            }
        }
        if best.0 > 0.005 {
            return Err(Error::Infeasible("tiling frequency calibration did not converge"));
        }
        Ok(Self {
            probs: *probs,
            draw: best.1,
        })
    }

    pub fn probs(&self) -> &GrainProbs {
        &self.probs
    }

    /// Calibrated internal draw distribution whose restricted-renormalized
    /// first-fit draws realize the nominal type frequencies.
    pub fn draw_probs(&self) -> [f64; 4] {
        self.draw
    }

    /// Generates one tiling; deterministic for a fixed seed.
    pub fn sample(&self, rows: usize, cols: usize, seed: u64) -> Result<GrainImage, Error> {
        if rows < 2 || cols < 2 || rows % 2 != 0 || cols % 2 != 0 {
            return Err(Error::Domain("tiling dimensions must be even and >= 2"));
        }
        Ok(tile_with_draw(rows, cols, &self.draw, seed))
    }
}

/// Generates a random exact tiling by raster-scan first-fit placement.
///
/// Convenience wrapper that calibrates a [`TilingSampler`] and draws one
/// image; callers generating many images should build the sampler once.
pub fn generate_tiling(
    rows: usize,
    cols: usize,
    probs: &GrainProbs,
    seed: u64,
) -> Result<GrainImage, Error> {
    TilingSampler::new(probs)?.sample(rows, cols, seed)
}

/// Raster-scan first-fit tiling with an explicit draw distribution.
///
/// Pixels are scanned in row-major order; at the first uncovered pixel a
/// grain type is drawn from `draw` restricted to the types that fit, i.e.
/// stay within the image bounds and do not overlap already-placed grains
/// (candidate order `Single`, `Horizontal`, `Vertical`, `Quad`; the
/// restricted distribution is renormalized). If every fitting type has zero
/// weight the draw falls back to uniform over the fitting types, which
/// always include 1x1.
fn tile_with_draw(rows: usize, cols: usize, draw: &[f64; 4], seed: u64) -> GrainImage {
    let p = *draw;
    let mut rng = rng_from_seed(seed);
    let mut cell_role = vec![CellRole::A; rows * cols];
    let mut grain_id = vec![u32::MAX; rows * cols];
    let mut grain_types = Vec::new();

    for m in 0..rows {
        for n in 0..cols {
            if grain_id[m * cols + n] != u32::MAX {
                continue;
            }
            let fits = |t: GrainType| {
                let (h, w) = t.shape();
                if m + h > rows || n + w > cols {
                    return false;
                }
                for dm in 0..h {
                    for dn in 0..w {
                        if grain_id[(m + dm) * cols + (n + dn)] != u32::MAX {
                            return false;
                        }
                    }
                }
                true
            };
            let candidates: Vec<GrainType> =
                GrainType::ALL.iter().copied().filter(|&t| fits(t)).collect();
            let mass: f64 = candidates.iter().map(|&t| p[t.index()]).sum();
            let draw = rng.random::<f64>();
            let chosen = if mass > 0.0 {
                let mut acc = 0.0;
                let mut chosen = *candidates.last().unwrap();
                for &t in &candidates {
                    acc += p[t.index()] / mass;
                    if draw < acc {
                        chosen = t;
                        break;
                    }
                }
                chosen
            } else {
                candidates[(draw * candidates.len() as f64) as usize % candidates.len()]
            };
            let id = grain_types.len() as u32;
            grain_types.push(chosen);
            let roles: &[(usize, usize, CellRole)] = match chosen {
                GrainType::Single => &[(0, 0, CellRole::A)],
                GrainType::Horizontal => &[(0, 0, CellRole::D), (0, 1, CellRole::E)],
                GrainType::Vertical => &[(0, 0, CellRole::B), (1, 0, CellRole::C)],
                GrainType::Quad => &[
                    (0, 0, CellRole::F),
                    (0, 1, CellRole::H),
                    (1, 0, CellRole::G),
                    (1, 1, CellRole::I),
                ],
            };
            for &(dm, dn, role) in roles {
                let idx = (m + dm) * cols + (n + dn);
                debug_assert_eq!(grain_id[idx], u32::MAX, "grain overlap");
                grain_id[idx] = id;
                cell_role[idx] = role;
            }
        }
    }

    GrainImage {
        rows,
        cols,
        cell_role,
        grain_id,
        grain_types,
    }
}

/// Applies the over-write shift: `y(m, n) = u((m, n) + G_(m,n))`, so every
/// cell of a grain carries the bit raster-written last onto that grain.
pub fn write_bits(image: &GrainImage, coded: &BitPlane) -> Result<BitPlane, Error> {
    if coded.rows() != image.rows {
        return Err(Error::Dimension {
            what: "write_bits rows",
            expected: image.rows,
            got: coded.rows(),
        });
    }
    if coded.cols() != image.cols {
        return Err(Error::Dimension {
            what: "write_bits cols",
            expected: image.cols,
            got: coded.cols(),
        });
    }
    let mut written = BitPlane::filled(image.rows, image.cols, -1);
    for m in 0..image.rows {
        for n in 0..image.cols {
            let (dm, dn) = image.role(m, n).quadrant_offset();
            written.set(m, n, coded.get(m + dm, n + dn));
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_probs_examples() {
        // Independently solved from the linear system in the tests below;
        // p2 = 0.2 gives (0.4, 0.2, 0.2, 0.2).
        let p = derive_grain_probs(0.2).unwrap();
        assert!((p.p1 - 0.4).abs() < 1e-12);
        assert!((p.p2 - 0.2).abs() < 1e-12);
        assert!((p.p3 - 0.2).abs() < 1e-12);
        assert!((p.p4 - 0.2).abs() < 1e-12);

        let p = derive_grain_probs(0.5).unwrap();
        assert!((p.p1).abs() < 1e-12 && (p.p4).abs() < 1e-12);

        let p = derive_grain_probs(0.0).unwrap();
        assert!((p.p1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((p.p4 - 1.0 / 3.0).abs() < 1e-12);

        assert!(derive_grain_probs(0.6).is_err());
        assert!(derive_grain_probs(-0.1).is_err());
    }

    #[test]
    fn degenerate_quad_tiling() {
        let probs = GrainProbs {
            p1: 0.0,
            p2: 0.0,
            p3: 0.0,
            p4: 1.0,
        };
        // Bypasses the bits-per-grain validation on purpose (degenerate input).
        let img = generate_tiling(2, 2, &probs, 1).unwrap();
        assert_eq!(img.grain_count(), 1);
        assert_eq!(img.grain_type(0), GrainType::Quad);
        assert_eq!(img.role(0, 0), CellRole::F);
        assert_eq!(img.role(1, 1), CellRole::I);
    }

    #[test]
    fn tiling_is_deterministic() {
        let probs = derive_grain_probs(0.2).unwrap();
        let a = generate_tiling(16, 16, &probs, 99).unwrap();
        let b = generate_tiling(16, 16, &probs, 99).unwrap();
        assert_eq!(a, b);
        let c = generate_tiling(16, 16, &probs, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn quadrant_offset_points_at_bottom_right_of_grain() {
        let probs = derive_grain_probs(0.3).unwrap();
        let img = generate_tiling(16, 16, &probs, 5).unwrap();
        for m in 0..16 {
            for n in 0..16 {
                let (dm, dn) = img.quadrant_offset(m, n).unwrap();
                let id = img.grain_id(m, n);
                // Target cell is in the same grain.
                assert_eq!(img.grain_id(m + dm, n + dn), id);
                // And it is the grain's maximal (row, col) cell.
                for mm in 0..16 {
                    for nn in 0..16 {
                        if img.grain_id(mm, nn) == id {
                            assert!(mm <= m + dm && nn <= n + dn);
                        }
                    }
                }
            }
        }
        assert!(img.quadrant_offset(16, 0).is_err());
    }

    #[test]
    fn write_bits_on_single_quad() {
        let probs = GrainProbs {
            p1: 0.0,
            p2: 0.0,
            p3: 0.0,
            p4: 1.0,
        };
        let img = generate_tiling(2, 2, &probs, 1).unwrap();
        let coded = BitPlane::from_values(2, 2, alloc::vec![1, -1, 1, -1]).unwrap();
        let written = write_bits(&img, &coded).unwrap();
        // The bit at the bottom-right cell wins.
        assert!(written.values().iter().all(|&v| v == -1));
    }

    #[test]
    fn write_bits_identity_on_singles() {
        let probs = GrainProbs {
            p1: 1.0,
            p2: 0.0,
            p3: 0.0,
            p4: 0.0,
        };
        let img = generate_tiling(4, 4, &probs, 3).unwrap();
        let coded = BitPlane::from_values(
            4,
            4,
            alloc::vec![1, -1, 1, 1, -1, -1, 1, -1, 1, 1, -1, 1, -1, 1, 1, -1],
        )
        .unwrap();
        assert_eq!(write_bits(&img, &coded).unwrap(), coded);
    }

    #[test]
    fn tiling_frequencies_converge() {
        for (i, p2) in [0.0, 0.2, 0.35, 0.5].into_iter().enumerate() {
            let probs = derive_grain_probs(p2).unwrap();
            let sampler = TilingSampler::new(&probs).unwrap();
            let img = sampler.sample(256, 512, 17 + i as u64).unwrap();
            let freq = img.type_frequencies();
            for (f, p) in freq.iter().zip(probs.as_array()) {
                assert!((f - p).abs() < 0.01, "p2 {p2}: freq {f} vs prob {p}");
            }
        }
    }
}
