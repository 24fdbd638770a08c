//! BCJR detector over grain/data states for two-row strips.
//!
//! The detector walks each pair of image rows with one trellis stage per
//! column. A state describes the boundary between two columns: which cells of
//! the next column are already claimed by grains extending across the
//! boundary, plus the previous column's two written pixel values, carried
//! exactly so that the 16-ary block evidence (applied once per block, at its
//! right column) and the deferred over-write resolution of straddling grains
//! are handled without approximation inside the strip.
//!
//! Grains are not confined to a strip: a vertical or 2x2 grain may hang from
//! the previous row pair into the current one, or from the current pair into
//! the next. Strips are processed top to bottom; each strip's posterior over
//! the grains it hangs downward is passed to the next strip as per-column
//! soft placement priors (with the shared coded-bit prior divided out so it
//! is applied exactly once), and the written value of a downward grain is
//! tied to the coded bit of the row below through that bit's prior.
//!
//! Placements carry calibrated weights so that tilings sampled from the
//! trellis reproduce the requested grain-type frequencies; each placed
//! grain's value is hypothesized on placement and reconciled with the coded
//! bit written at its final (bottom-right) cell, while over-written coded
//! bits stay unconstrained and are summed over their priors. Inputs are one
//! coded bit per row per column stage.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::dgm::{CellRole, GrainImage, GrainProbs, GrainType};
use crate::num::{self, logsumexp2};
use crate::plane::{config_index, Llr16Plane, RealPlane, NUM_CONFIGS};
use crate::rng::rng_from_seed;
use crate::{Error, LLR_CLAMP};

/// Cross-boundary claim on the next column's top cell. The two unclaimed
/// variants record whether the previous column's top cell was a fresh menu
/// draw: the raster-scan law renormalizes a draw's menu when its right
/// neighbour turns out to be covered, and that correction is applied one
/// column late, where the neighbour's coverage is decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopCov {
    /// Unclaimed; the previous column's top cell was a fresh draw.
    NoneDrew,
    /// Unclaimed; the previous column's top cell was covered (no draw).
    NoneCov,
    /// Claimed by an in-strip horizontal continuing in the top row.
    H,
    /// Claimed by a 2x2 grain hanging from the previous strip (kept apart
    /// from `H` so upward messages can tell hang events from in-strip ones).
    QAbove,
}

/// Cross-boundary claim on the next column's bottom cell; unclaimed variants
/// as in [`TopCov`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BotCov {
    NoneDrew,
    NoneCov,
    /// Claimed by an in-strip horizontal continuing in the bottom row.
    H,
    /// Claimed by a 2x2 grain hanging into the next strip.
    QBelow,
}

impl TopCov {
    fn is_none(self) -> bool {
        matches!(self, TopCov::NoneDrew | TopCov::NoneCov)
    }
}

impl BotCov {
    fn is_none(self) -> bool {
        matches!(self, BotCov::NoneDrew | BotCov::NoneCov)
    }
}

/// Which cells of the column boundary are crossed by grains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coverage {
    /// Top and bottom claims are independent.
    Split(TopCov, BotCov),
    /// An in-strip 2x2 grain claims both cells.
    QuadIn,
}

impl Coverage {
    /// No grain crosses the boundary (a strip may end here).
    pub fn is_open(self) -> bool {
        matches!(self, Coverage::Split(t, b) if t.is_none() && b.is_none())
    }
}

/// One trellis state: boundary coverage plus the previous column's written
/// values (equal for `QuadIn`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrellisState {
    pub cov: Coverage,
    pub py_top: i8,
    pub py_bot: i8,
}

/// Constraint a transition places on one of the stage's two coded bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UCon {
    /// The bit is over-written by a later bit of the same grain; its prior
    /// sums out.
    Free,
    /// The bit is the final bit of some grain and must equal this value.
    Must(i8),
}

/// How a branch places a grain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// Fully inside the strip.
    InStrip(GrainType),
    /// Vertical or 2x2 hanging into the next strip; its value is the coded
    /// bit of the row below.
    Below(GrainType),
    /// Vertical or 2x2 hanging from the previous strip; weighted by that
    /// strip's soft feedback.
    Above(GrainType),
}

/// One trellis transition.
#[derive(Debug, Clone, Copy)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    /// Menu-numerator weight of the write law: the product of the drawn
    /// grain types' probabilities (1 for pure continuations and for grains
    /// accepted from the previous strip). Context-dependent menu
    /// renormalizations multiply in separately.
    pub weight: f64,
    /// Contract transition probability under uniform coded bits and no
    /// hang-down feedback, normalized per source state. Zero for branches
    /// that accept a grain from the previous strip (those are driven by
    /// feedback).
    pub prob: f64,
    pub u_top: UCon,
    pub u_bot: UCon,
    /// Placements for the top (index 0) and bottom (index 1) cell.
    pub placed: [Option<Placement>; 2],
}

/// The grain/data trellis shared by every strip.
#[derive(Debug, Clone)]
pub struct GrainTrellis {
    probs: GrainProbs,
    /// The writer's calibrated draw distribution; the trellis law's menu
    /// numerators, so that random walks reproduce the writer's tilings.
    draw: [f64; 4],
    states: Vec<TrellisState>,
    branches: Vec<Branch>,
    /// Branch indices grouped by source state.
    by_from: Vec<Vec<usize>>,
    init_state: usize,
}

const VALS: [i8; 2] = [1, -1];

/// Down/up boundary-message sweep pairs per detect call.
const DETECT_SWEEP_PAIRS: usize = 1;

fn enumerate_states() -> Vec<TrellisState> {
    let mut states = Vec::new();
    for top in [TopCov::NoneDrew, TopCov::NoneCov, TopCov::H, TopCov::QAbove] {
        for bot in [BotCov::NoneDrew, BotCov::NoneCov, BotCov::H, BotCov::QBelow] {
            for &pt in &VALS {
                for &pb in &VALS {
                    states.push(TrellisState {
                        cov: Coverage::Split(top, bot),
                        py_top: pt,
                        py_bot: pb,
                    });
                }
            }
        }
    }
    for &v in &VALS {
        states.push(TrellisState {
            cov: Coverage::QuadIn,
            py_top: v,
            py_bot: v,
        });
    }
    states
}

fn state_index(states: &[TrellisState], s: &TrellisState) -> usize {
    states.iter().position(|x| x == s).expect("known state")
}

fn build_branches(states: &[TrellisState], probs: [f64; 4]) -> Vec<Branch> {
    let idx = |cov, pt, pb| {
        state_index(
            states,
            &TrellisState {
                cov,
                py_top: pt,
                py_bot: pb,
            },
        )
    };
    let mut branches = Vec::new();
    let mut push = |from: usize,
                    to: usize,
                    weight: f64,
                    u_top: UCon,
                    u_bot: UCon,
                    placed: [Option<Placement>; 2]| {
        branches.push(Branch {
            from,
            to,
            weight,
            prob: 0.0,
            u_top,
            u_bot,
            placed,
        });
    };
    let [p1, p2, p3, p4] = probs;
    const COV_NN: Coverage = Coverage::Split(TopCov::NoneCov, BotCov::NoneCov);
    use GrainType::*;
    use Placement::*;
    for (si, s) in states.iter().enumerate() {
        match s.cov {
            Coverage::QuadIn => {
                // Final bit of an in-strip 2x2 grain is its bottom-right cell.
                push(
                    si,
                    idx(COV_NN, s.py_top, s.py_top),
                    1.0,
                    UCon::Free,
                    UCon::Must(s.py_top),
                    [None, None],
                );
            }
            Coverage::Split(top, bot) => {
                let bot_cov_ucon = match bot {
                    BotCov::H => Some(UCon::Must(s.py_bot)),
                    // The hanging 2x2's value bit lives in the next strip;
                    // this strip's bit is over-written.
                    BotCov::QBelow => Some(UCon::Free),
                    BotCov::NoneDrew | BotCov::NoneCov => None,
                };
                let top_free = top.is_none();
                match (top_free, bot_cov_ucon) {
                    (false, Some(ub)) => {
                        push(
                            si,
                            idx(COV_NN, s.py_top, s.py_bot),
                            1.0,
                            UCon::Must(s.py_top),
                            ub,
                            [None, None],
                        );
                    }
                    (false, None) => {
                        for &vb in &VALS {
                            let ut = UCon::Must(s.py_top);
                            push(
                                si,
                                idx(Coverage::Split(TopCov::NoneCov, BotCov::NoneDrew), s.py_top, vb),
                                p1,
                                ut,
                                UCon::Must(vb),
                                [None, Some(InStrip(Single))],
                            );
                            push(
                                si,
                                idx(Coverage::Split(TopCov::NoneCov, BotCov::H), s.py_top, vb),
                                p2,
                                ut,
                                UCon::Free,
                                [None, Some(InStrip(Horizontal))],
                            );
                            push(
                                si,
                                idx(Coverage::Split(TopCov::NoneCov, BotCov::NoneDrew), s.py_top, vb),
                                p3,
                                ut,
                                UCon::Free,
                                [None, Some(Below(Vertical))],
                            );
                            push(
                                si,
                                idx(Coverage::Split(TopCov::NoneCov, BotCov::QBelow), s.py_top, vb),
                                p4,
                                ut,
                                UCon::Free,
                                [None, Some(Below(Quad))],
                            );
                        }
                    }
                    (true, Some(ub)) => {
                        // The write law draws the top row before the bottom
                        // row, so an in-strip vertical/quad here is excluded
                        // jointly with the bottom grain that claimed this
                        // cell; the remaining menu stays unnormalized.
                        for &vt in &VALS {
                            push(
                                si,
                                idx(Coverage::Split(TopCov::NoneDrew, BotCov::NoneCov), vt, s.py_bot),
                                p1,
                                UCon::Must(vt),
                                ub,
                                [Some(InStrip(Single)), None],
                            );
                            push(
                                si,
                                idx(Coverage::Split(TopCov::H, BotCov::NoneCov), vt, s.py_bot),
                                p2,
                                UCon::Free,
                                ub,
                                [Some(InStrip(Horizontal)), None],
                            );
                            push(
                                si,
                                idx(COV_NN, vt, s.py_bot),
                                1.0,
                                UCon::Must(vt),
                                ub,
                                [Some(Above(Vertical)), None],
                            );
                            push(
                                si,
                                idx(Coverage::Split(TopCov::QAbove, BotCov::NoneCov), vt, s.py_bot),
                                1.0,
                                UCon::Free,
                                ub,
                                [Some(Above(Quad)), None],
                            );
                        }
                    }
                    (true, None) => {
                        let top_opts: [(f64, TopCov, bool, Placement); 4] = [
                            (p1, TopCov::NoneDrew, true, InStrip(Single)),
                            (p2, TopCov::H, false, InStrip(Horizontal)),
                            (1.0, TopCov::NoneCov, true, Above(Vertical)),
                            (1.0, TopCov::QAbove, false, Above(Quad)),
                        ];
                        let bot_opts: [(f64, BotCov, bool, Placement); 4] = [
                            (p1, BotCov::NoneDrew, true, InStrip(Single)),
                            (p2, BotCov::H, false, InStrip(Horizontal)),
                            (p3, BotCov::NoneDrew, false, Below(Vertical)),
                            (p4, BotCov::QBelow, false, Below(Quad)),
                        ];
                        for &vt in &VALS {
                            for &vb in &VALS {
                                for &(wt, tnext, tmust, pt) in &top_opts {
                                    for &(wb, bnext, bmust, pb) in &bot_opts {
                                        push(
                                            si,
                                            idx(Coverage::Split(tnext, bnext), vt, vb),
                                            wt * wb,
                                            if tmust { UCon::Must(vt) } else { UCon::Free },
                                            if bmust { UCon::Must(vb) } else { UCon::Free },
                                            [Some(pt), Some(pb)],
                                        );
                                    }
                                }
                            }
                        }
                        for &v in &VALS {
                            push(
                                si,
                                idx(Coverage::Split(TopCov::NoneDrew, BotCov::NoneCov), v, v),
                                p3,
                                UCon::Free,
                                UCon::Must(v),
                                [Some(InStrip(Vertical)), None],
                            );
                            push(
                                si,
                                idx(Coverage::QuadIn, v, v),
                                p4,
                                UCon::Free,
                                UCon::Free,
                                [Some(InStrip(Quad)), None],
                            );
                        }
                    }
                }
            }
        }
    }
    branches
}

/// Context-dependent menu renormalization of the raster-scan write law for
/// one branch at stage `k`. The writer draws a grain type from the subset of
/// types that fit at the scan cell, renormalized; restrictions caused by the
/// next column's coverage resolve one stage later, where the source state
/// records whether the previous cell was a fresh draw. Returns a
/// multiplicative factor, or 0 when the context is impossible.
fn law_correction(probs: [f64; 4], b: &Branch, from: &TrellisState, k: usize, cols: usize, last_strip: bool) -> f64 {
    let [p1, p2, p3, p4] = probs;
    let _ = p4;
    let div = |c: f64, d: f64| if d > 0.0 { c / d } else { 0.0 };
    let mut c = 1.0;
    let (from_top, from_bot) = match from.cov {
        Coverage::Split(t, bb) => (Some(t), Some(bb)),
        Coverage::QuadIn => (None, None),
    };
    // A grain hanging into this column's top cell means the previous top
    // draw's horizontal/quad options did not fit.
    if placed_above(b).is_some() && from_top == Some(TopCov::NoneDrew) {
        c = div(c, p1 + p3);
    }
    // An in-strip vertical/quad covering this column's bottom cell means the
    // previous bottom draw's horizontal/quad options did not fit.
    if matches!(
        b.placed[0],
        Some(Placement::InStrip(GrainType::Vertical)) | Some(Placement::InStrip(GrainType::Quad))
    ) && from_bot == Some(BotCov::NoneDrew)
    {
        c = if last_strip {
            div(c * (p1 + p2), p1)
        } else {
            div(c, p1 + p3)
        };
    }
    // Draws in the last column lose their horizontal/quad options.
    let top_draw = matches!(b.placed[0], Some(Placement::InStrip(_)));
    let bot_draw = b.placed[1].is_some();
    if k + 1 == cols && top_draw {
        c = div(c, p1 + p3);
    }
    if bot_draw {
        // Bottom draws lose vertical/quad on the last strip and
        // horizontal/quad in the last column.
        let d = match (last_strip, k + 1 == cols) {
            (false, false) => 1.0,
            (false, true) => p1 + p3,
            (true, false) => p1 + p2,
            (true, true) => p1,
        };
        c = div(c, d);
    }
    c
}

/// Grain hanging into a strip's top row at one column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum HangEvt {
    None,
    /// A vertical grain ends in this column's top cell.
    V,
    /// A 2x2 grain covers this and the next column's top cells.
    QStart,
}

fn placed_above(b: &Branch) -> Option<GrainType> {
    match b.placed[0] {
        Some(Placement::Above(t)) => Some(t),
        _ => None,
    }
}

fn placed_below(b: &Branch) -> Option<GrainType> {
    match b.placed[1] {
        Some(Placement::Below(t)) => Some(t),
        _ => None,
    }
}

/// Whether the branch's destination claims the next column's top cell for an
/// in-strip grain (such a claim asserts that nothing hangs into that cell).
fn claims_next_top(b: &Branch) -> bool {
    matches!(
        b.placed[0],
        Some(Placement::InStrip(GrainType::Horizontal)) | Some(Placement::InStrip(GrainType::Quad))
    )
}

/// Walks one strip of the trellis conditioned on the previous strip's
/// hang-down pattern, returning this strip's own hang-downs.
fn walk_strip<R: rand::Rng>(
    tr: &GrainTrellis,
    cols: usize,
    above: &[HangEvt],
    allow_below: bool,
    rng: &mut R,
    visit: &mut dyn FnMut(usize, &Branch),
) -> Vec<HangEvt> {
    let probs = tr.draw;
    let last_strip = !allow_below;
    let admissible = |k: usize, b: &Branch| -> bool {
        let ok_above = match above[k] {
            HangEvt::None => placed_above(b).is_none(),
            HangEvt::V => placed_above(b) == Some(GrainType::Vertical),
            HangEvt::QStart => placed_above(b) == Some(GrainType::Quad),
        };
        if !ok_above || b.weight <= 0.0 {
            return false;
        }
        if !allow_below && placed_below(b).is_some() {
            return false;
        }
        if k + 1 == cols {
            if !tr.states[b.to].cov.is_open() {
                return false;
            }
        } else if above[k + 1] != HangEvt::None && claims_next_top(b) {
            // The next column's top cell may not be claimed in-strip if a
            // grain hangs into it.
            return false;
        }
        true
    };
    let bweight = |k: usize, b: &Branch| -> f64 {
        let n = b.placed.iter().flatten().count() as f64;
        b.weight
            * law_correction(probs, b, &tr.states[b.from], k, cols, last_strip)
            * num::powf(0.5, n)
    };
    // Backward partition sums: menu corrections resolve one stage late, so
    // an exact draw at stage k must weigh each successor by its remaining
    // mass (this also steers the walk away from dead ends). Normalized per
    // stage to avoid underflow on long strips.
    let mut zsum = vec![vec![0.0f64; tr.states.len()]; cols + 1];
    for (s, st) in tr.states.iter().enumerate() {
        zsum[cols][s] = if st.cov.is_open() { 1.0 } else { 0.0 };
    }
    for k in (0..cols).rev() {
        for b in &tr.branches {
            if zsum[k + 1][b.to] > 0.0 && admissible(k, b) {
                zsum[k][b.from] += bweight(k, b) * zsum[k + 1][b.to];
            }
        }
        let scale = zsum[k].iter().fold(0.0f64, |m, &z| m.max(z));
        if scale > 0.0 {
            for z in zsum[k].iter_mut() {
                *z /= scale;
            }
        }
    }
    let mut below = vec![HangEvt::None; cols];
    let mut s = tr.init_state;
    for k in 0..cols {
        let mut cands: Vec<(usize, f64)> = Vec::new();
        for &bi in &tr.by_from[s] {
            let b = &tr.branches[bi];
            if !admissible(k, b) || zsum[k + 1][b.to] <= 0.0 {
                continue;
            }
            cands.push((bi, bweight(k, b) * zsum[k + 1][b.to]));
        }
        let mass: f64 = cands.iter().map(|&(_, w)| w).sum();
        let draw: f64 = rand::Rng::random::<f64>(rng) * mass;
        let mut acc = 0.0;
        let mut chosen = cands.last().expect("strip walk dead end").0;
        for &(bi, w) in &cands {
            acc += w;
            if draw < acc {
                chosen = bi;
                break;
            }
        }
        let b = &tr.branches[chosen];
        visit(k, b);
        match placed_below(b) {
            Some(GrainType::Vertical) => below[k] = HangEvt::V,
            Some(GrainType::Quad) => below[k] = HangEvt::QStart,
            _ => {}
        }
        s = b.to;
    }
    below
}

/// Grain-type frequencies of tilings sampled from the current parameters,
/// over `strips` stacked strips of `cols` columns.
fn sampled_frequencies(tr: &GrainTrellis, strips: usize, cols: usize, seed: u64) -> [f64; 4] {
    let mut rng = rng_from_seed(seed);
    let mut counts = [0usize; 4];
    let mut above = vec![HangEvt::None; cols];
    for _ in 0..strips {
        let mut count = |_k: usize, b: &Branch| {
            for pl in b.placed.iter().flatten() {
                match pl {
                    Placement::InStrip(t) | Placement::Below(t) => counts[t.index()] += 1,
                    Placement::Above(_) => {}
                }
            }
        };
        above = walk_strip(tr, cols, &above, true, &mut rng, &mut count);
    }
    let total: f64 = counts.iter().sum::<usize>() as f64;
    if total == 0.0 {
        return [0.0; 4];
    }
    counts.map(|c| c as f64 / total)
}

/// Builds the trellis for the given type probabilities. Branch weights are
/// the menu numerators of the raster-scan write law — the writer's
/// calibrated draw distribution — so random walks on the trellis reproduce
/// the writer's tilings, and hence the nominal grain-type frequencies.
pub fn build_trellis(probs: &GrainProbs) -> Result<GrainTrellis, Error> {
    let arr = probs.as_array();
    if arr.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(Error::Domain("grain probabilities must lie in [0, 1]"));
    }
    if (arr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Domain("grain probabilities must sum to 1"));
    }
    let p = crate::dgm::TilingSampler::new(probs)?.draw_probs();
    let states = enumerate_states();
    let init_state = state_index(
        &states,
        &TrellisState {
            cov: Coverage::Split(TopCov::NoneCov, BotCov::NoneCov),
            py_top: -1,
            py_bot: -1,
        },
    );
    let mut branches = build_branches(&states, p);
    // Contract transition probabilities: uniform-bit marginals of the
    // interior law, normalized per source state (hang-accepting branches are
    // feedback-driven and carry none of the mass).
    let mut row_mass = vec![0.0f64; states.len()];
    for b in branches.iter_mut() {
        let fed = b
            .placed
            .iter()
            .flatten()
            .any(|pl| matches!(pl, Placement::Above(_)));
        let n = b.placed.iter().flatten().count() as f64;
        b.prob = if fed { 0.0 } else { b.weight * num::powf(0.5, n) };
        row_mass[b.from] += b.prob;
    }
    for b in branches.iter_mut() {
        if row_mass[b.from] > 0.0 {
            b.prob /= row_mass[b.from];
        }
    }
    let mut by_from = vec![Vec::new(); states.len()];
    for (i, b) in branches.iter().enumerate() {
        by_from[b.from].push(i);
    }
    Ok(GrainTrellis {
        probs: *probs,
        draw: p,
        states,
        branches,
        by_from,
        init_state,
    })
}

impl GrainTrellis {
    pub fn probs(&self) -> &GrainProbs {
        &self.probs
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[TrellisState] {
        &self.states
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    /// Contract transition matrix P(s'|s) under uniform coded bits and no
    /// hang-down feedback.
    pub fn transition_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.states.len();
        let mut m = vec![vec![0.0f64; n]; n];
        for b in &self.branches {
            m[b.from][b.to] += b.prob;
        }
        m
    }

    /// Human-readable dump of states, transitions, and probabilities.
    pub fn to_text(&self) -> String {
        use core::fmt::Write as _;
        let mut s = String::new();
        let _ = writeln!(s, "grain trellis: {} states; inputs: one coded bit per row per column stage", self.states.len());
        let _ = writeln!(
            s,
            "grain-type probabilities {:?}; menu numerators (writer draw distribution) {:?}",
            self.probs.as_array(),
            self.draw
        );
        for (i, st) in self.states.iter().enumerate() {
            let _ = writeln!(
                s,
                "state {i}: {:?} py=({:+}, {:+})",
                st.cov, st.py_top, st.py_bot
            );
        }
        for b in &self.branches {
            let _ = writeln!(
                s,
                "branch {} -> {} w={:.6} p={:.6} u_top={:?} u_bot={:?} placed={:?}",
                b.from, b.to, b.weight, b.prob, b.u_top, b.u_bot, b.placed
            );
        }
        s
    }
}

/// Logistic probability pair `(P(+1), P(-1))` of a bit with the given LLR.
pub fn prior_from_llr(llr: f64) -> (f64, f64) {
    if llr >= 0.0 {
        let e = num::exp(-llr);
        (1.0 / (1.0 + e), e / (1.0 + e))
    } else {
        let e = num::exp(llr);
        (e / (1.0 + e), 1.0 / (1.0 + e))
    }
}

/// Planes exchanged with the detector: 16-ary evidence plus coded-bit
/// priors in, coded-bit LLRs plus 16-ary feedback out.
#[derive(Debug, Clone)]
pub struct DetectorExchange {
    /// Weighted block LLRs from the equalizer.
    pub equalizer_llrs: Llr16Plane,
    /// Per-pixel prior LLRs from the SCCC decoder.
    pub sccc_priors: RealPlane,
    /// Per-pixel LLRs toward the SCCC (posterior minus prior), filled by
    /// [`detect`].
    pub sccc_llrs: Option<RealPlane>,
    /// Block LLR feedback toward the equalizer (no subtraction), filled by
    /// [`detect`].
    pub feedback: Option<Llr16Plane>,
}

impl DetectorExchange {
    pub fn new(equalizer_llrs: Llr16Plane, sccc_priors: RealPlane) -> Result<Self, Error> {
        if sccc_priors.rows() != 2 * equalizer_llrs.block_rows()
            || sccc_priors.cols() != 2 * equalizer_llrs.block_cols()
        {
            return Err(Error::Dimension {
                what: "detector priors vs evidence blocks",
                expected: 4 * equalizer_llrs.block_rows() * equalizer_llrs.block_cols(),
                got: sccc_priors.rows() * sccc_priors.cols(),
            });
        }
        Ok(Self {
            equalizer_llrs,
            sccc_priors,
            sccc_llrs: None,
            feedback: None,
        })
    }
}

/// Log-domain soft feedback about grains hanging into a strip's top row, per
/// column: no hang, a vertical with each value, a 2x2 starting here with
/// each value (value index 0 is +1).
#[derive(Clone)]
struct HangBelief {
    lnone: f64,
    lv: [f64; 2],
    lq: [f64; 2],
}

impl HangBelief {
    /// Hard knowledge that nothing hangs in (used above the first strip).
    fn free() -> Self {
        HangBelief {
            lnone: 0.0,
            lv: [f64::NEG_INFINITY; 2],
            lq: [f64::NEG_INFINITY; 2],
        }
    }

    /// Uninformative multiplicative factor.
    fn flat() -> Self {
        HangBelief {
            lnone: 0.0,
            lv: [0.0; 2],
            lq: [0.0; 2],
        }
    }
}

fn vidx(v: i8) -> usize {
    if v > 0 {
        0
    } else {
        1
    }
}

/// Precomputed per-strip inputs: logistic priors for the strip's two rows,
/// the next strip's top-row priors (for grains hanging down), and per-block
/// evidence.
struct StripData {
    lp: Vec<[(f64, f64); 2]>,
    lp_below: Option<Vec<(f64, f64)>>,
    evidence: Vec<[f64; NUM_CONFIGS]>,
}

impl StripData {
    fn lbelow(&self, cols: usize, col: usize, v: i8) -> f64 {
        match &self.lp_below {
            None => f64::NEG_INFINITY,
            Some(lpb) => {
                if col >= cols {
                    f64::NEG_INFINITY
                } else {
                    let (p_plus, p_minus) = lpb[col];
                    num::ln(if v > 0 { p_plus } else { p_minus })
                }
            }
        }
    }

    fn ltop(&self, cols: usize, col: usize, v: i8) -> f64 {
        if col >= cols {
            return f64::NEG_INFINITY;
        }
        let (p_plus, p_minus) = self.lp[col][0];
        num::ln(if v > 0 { p_plus } else { p_minus })
    }
}

/// Messages and (optionally) per-column outputs of one strip pass.
struct StripResult {
    /// Hang-down message toward the next strip, with the downward influence
    /// `nu` divided out so the message carries only top-side information.
    mu_out: Vec<HangBelief>,
    /// Hang-acceptance message toward the previous strip, with the downward
    /// message `mu` and the hanging bit's own prior divided out.
    nu_out: Vec<HangBelief>,
    /// Posterior bit log-masses `[col][row][value index]`.
    bit_mass: Option<Vec<[[f64; 2]; 2]>>,
    /// Per-block 16-ary configuration probabilities.
    cfg_probs: Option<Vec<[f64; NUM_CONFIGS]>>,
}

/// One BCJR pass over a strip given the hang message `mu` from above and the
/// acceptance message `nu` from below, returning the refreshed messages in
/// both directions.
fn strip_pass(
    trellis: &GrainTrellis,
    d: &StripData,
    cols: usize,
    mu: &[HangBelief],
    nu: &[HangBelief],
    want_outputs: bool,
) -> StripResult {
    let n_states = trellis.states.len();
    let probs = trellis.draw;
    let last_strip = d.lp_below.is_none();
    let lgamma = |k: usize, b: &Branch| -> f64 {
        let mut g = if b.weight > 0.0 {
            num::ln(b.weight)
        } else {
            return f64::NEG_INFINITY;
        };
        let corr = law_correction(probs, b, &trellis.states[b.from], k, cols, last_strip);
        if corr > 0.0 {
            g += num::ln(corr);
        } else {
            return f64::NEG_INFINITY;
        }
        for (row, con) in [(0usize, b.u_top), (1usize, b.u_bot)] {
            if let UCon::Must(v) = con {
                let (p_plus, p_minus) = d.lp[k][row];
                g += num::ln(if v > 0 { p_plus } else { p_minus });
            }
        }
        // Bottom side: a grain hanging down ties its value to the row below
        // and is weighed by the next strip's acceptance; otherwise the column
        // asserts "no hang here" unless it is covered by a hanging 2x2's
        // second cell (whose acceptance was counted at its start column).
        match placed_below(b) {
            Some(ty) => {
                let vb = trellis.states[b.to].py_bot;
                let col = k + (ty == GrainType::Quad) as usize;
                g += d.lbelow(cols, col, vb);
                g += match ty {
                    GrainType::Quad => nu[k].lq[vidx(vb)],
                    _ => nu[k].lv[vidx(vb)],
                };
            }
            None => {
                if !matches!(
                    trellis.states[b.from].cov,
                    Coverage::Split(_, BotCov::QBelow)
                ) {
                    g += nu[k].lnone;
                }
            }
        }
        // Top side: accept or reject the previous strip's hang-down belief.
        let top_free = matches!(
            trellis.states[b.from].cov,
            Coverage::Split(t, _) if t.is_none()
        );
        if top_free {
            g += match placed_above(b) {
                Some(GrainType::Vertical) => mu[k].lv[vidx(trellis.states[b.to].py_top)],
                Some(GrainType::Quad) => mu[k].lq[vidx(trellis.states[b.to].py_top)],
                _ => mu[k].lnone,
            };
        }
        if claims_next_top(b) {
            if k + 1 >= cols {
                return f64::NEG_INFINITY;
            }
            g += mu[k + 1].lnone;
        }
        if g == f64::NEG_INFINITY {
            return g;
        }
        if k % 2 == 1 {
            let from = &trellis.states[b.from];
            let to = &trellis.states[b.to];
            let cfg = config_index(from.py_top, from.py_bot, to.py_top, to.py_bot);
            g += num::ln(d.evidence[k / 2][cfg]);
        }
        g
    };

    let mut alpha = vec![vec![f64::NEG_INFINITY; n_states]; cols + 1];
    alpha[0][trellis.init_state] = 0.0;
    for k in 0..cols {
        let mut nxt = vec![f64::NEG_INFINITY; n_states];
        for b in &trellis.branches {
            if alpha[k][b.from] == f64::NEG_INFINITY {
                continue;
            }
            let g = lgamma(k, b);
            if g == f64::NEG_INFINITY {
                continue;
            }
            nxt[b.to] = logsumexp2(nxt[b.to], alpha[k][b.from] + g);
        }
        let max = nxt.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for v in nxt.iter_mut() {
            *v -= max;
        }
        alpha[k + 1] = nxt;
    }

    // Backward recursion ends with no claim on a column past the last.
    let mut beta = vec![vec![f64::NEG_INFINITY; n_states]; cols + 1];
    for (s, st) in trellis.states.iter().enumerate() {
        if st.cov.is_open() {
            beta[cols][s] = 0.0;
        }
    }
    for k in (0..cols).rev() {
        let mut cur = vec![f64::NEG_INFINITY; n_states];
        for b in &trellis.branches {
            if beta[k + 1][b.to] == f64::NEG_INFINITY {
                continue;
            }
            let g = lgamma(k, b);
            if g == f64::NEG_INFINITY {
                continue;
            }
            cur[b.from] = logsumexp2(cur[b.from], beta[k + 1][b.to] + g);
        }
        let max = cur.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for v in cur.iter_mut() {
            *v -= max;
        }
        beta[k] = cur;
    }

    let mut mu_out: Vec<HangBelief> = vec![HangBelief::free(); cols];
    let mut nu_out: Vec<HangBelief> = vec![HangBelief::free(); cols];
    let mut bit_mass = want_outputs.then(|| vec![[[f64::NEG_INFINITY; 2]; 2]; cols]);
    let mut cfg_probs = want_outputs.then(|| vec![[0.0f64; NUM_CONFIGS]; cols / 2]);
    for k in 0..cols {
        // Coded-bit posteriors: branches constraining the bit contribute to
        // that value; branches over-writing it contribute through the bit's
        // own prior. Hang masses in both directions become the neighbouring
        // strips' soft feedback.
        let mut num_bit = [[f64::NEG_INFINITY; 2]; 2]; // [row][value +1/-1]
        let mut cfg_mass = [f64::NEG_INFINITY; NUM_CONFIGS];
        let mut m_total = f64::NEG_INFINITY;
        let mut m_none = f64::NEG_INFINITY;
        let mut m_v = [f64::NEG_INFINITY; 2];
        let mut m_q = [f64::NEG_INFINITY; 2];
        let mut ma_none = f64::NEG_INFINITY;
        let mut ma_v = [f64::NEG_INFINITY; 2];
        let mut ma_q = [f64::NEG_INFINITY; 2];
        for b in &trellis.branches {
            if alpha[k][b.from] == f64::NEG_INFINITY || beta[k + 1][b.to] == f64::NEG_INFINITY {
                continue;
            }
            let g = lgamma(k, b);
            if g == f64::NEG_INFINITY {
                continue;
            }
            let lam = alpha[k][b.from] + g + beta[k + 1][b.to];
            if want_outputs {
                for (row, con) in [(0usize, b.u_top), (1usize, b.u_bot)] {
                    match con {
                        UCon::Must(v) => {
                            let vi = vidx(v);
                            num_bit[row][vi] = logsumexp2(num_bit[row][vi], lam);
                        }
                        UCon::Free => {
                            let (p_plus, p_minus) = lp_pair(&d.lp[k][row]);
                            num_bit[row][0] = logsumexp2(num_bit[row][0], lam + p_plus);
                            num_bit[row][1] = logsumexp2(num_bit[row][1], lam + p_minus);
                        }
                    }
                }
                if k % 2 == 1 {
                    let from = &trellis.states[b.from];
                    let to = &trellis.states[b.to];
                    let cfg = config_index(from.py_top, from.py_bot, to.py_top, to.py_bot);
                    cfg_mass[cfg] = logsumexp2(cfg_mass[cfg], lam);
                }
            }
            m_total = logsumexp2(m_total, lam);
            match placed_below(b) {
                Some(GrainType::Vertical) => {
                    let vi = vidx(trellis.states[b.to].py_bot);
                    m_v[vi] = logsumexp2(m_v[vi], lam);
                }
                Some(GrainType::Quad) => {
                    let vi = vidx(trellis.states[b.to].py_bot);
                    m_q[vi] = logsumexp2(m_q[vi], lam);
                }
                _ => {
                    if !matches!(
                        trellis.states[b.from].cov,
                        Coverage::Split(_, BotCov::QBelow)
                    ) {
                        m_none = logsumexp2(m_none, lam);
                    }
                }
            }
            match placed_above(b) {
                Some(GrainType::Vertical) => {
                    let vi = vidx(trellis.states[b.to].py_top);
                    ma_v[vi] = logsumexp2(ma_v[vi], lam);
                }
                Some(GrainType::Quad) => {
                    let vi = vidx(trellis.states[b.to].py_top);
                    ma_q[vi] = logsumexp2(ma_q[vi], lam);
                }
                _ => {
                    if !matches!(
                        trellis.states[b.from].cov,
                        Coverage::Split(TopCov::QAbove, _)
                    ) {
                        ma_none = logsumexp2(ma_none, lam);
                    }
                }
            }
        }
        if let Some(bm) = bit_mass.as_mut() {
            bm[k] = num_bit;
        }
        if k % 2 == 1 {
            if let Some(cp) = cfg_probs.as_mut() {
                let max = cfg_mass.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut probs = [0.0f64; NUM_CONFIGS];
                let mut sum = 0.0;
                for c in 0..NUM_CONFIGS {
                    probs[c] = num::exp(cfg_mass[c] - max);
                    sum += probs[c];
                }
                for p in probs.iter_mut() {
                    *p /= sum;
                }
                cp[k / 2] = probs;
            }
        }
        // Extrinsic messages: every factor the receiving strip re-applies
        // (the shared bit's prior, the receiver's own previous message) is
        // divided out so it counts exactly once.
        let ext = |mass: f64, sub: f64| {
            if mass == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                mass - m_total - sub
            }
        };
        mu_out[k].lnone = ext(m_none, nu[k].lnone);
        nu_out[k].lnone = ext(ma_none, mu[k].lnone);
        for (vi, &v) in VALS.iter().enumerate() {
            mu_out[k].lv[vi] = ext(m_v[vi], d.lbelow(cols, k, v) + nu[k].lv[vi]);
            mu_out[k].lq[vi] = ext(m_q[vi], d.lbelow(cols, k + 1, v) + nu[k].lq[vi]);
            nu_out[k].lv[vi] = ext(ma_v[vi], d.ltop(cols, k, v) + mu[k].lv[vi]);
            nu_out[k].lq[vi] = ext(ma_q[vi], d.ltop(cols, k + 1, v) + mu[k].lq[vi]);
        }
    }
    StripResult {
        mu_out,
        nu_out,
        bit_mass,
        cfg_probs,
    }
}

fn lp_pair(p: &(f64, f64)) -> (f64, f64) {
    (num::ln(p.0), num::ln(p.1))
}

/// Runs the detector over every strip, filling the exchange outputs.
///
/// Strips exchange soft information about grains crossing their shared row
/// boundary in both directions: a downward sweep propagates each strip's
/// hang-down beliefs top to bottom, then an upward sweep propagates
/// acceptance beliefs bottom to top and emits each strip's posteriors with
/// both sides combined.
pub fn detect(
    mut exchange: DetectorExchange,
    trellis: &GrainTrellis,
) -> Result<DetectorExchange, Error> {
    let brows = exchange.equalizer_llrs.block_rows();
    let bcols = exchange.equalizer_llrs.block_cols();
    let cols = 2 * bcols;
    let mut sccc_llrs = RealPlane::zeros(2 * brows, cols);
    let mut feedback = Llr16Plane::uniform(brows, bcols);

    let data: Vec<StripData> = (0..brows)
        .map(|t| StripData {
            lp: (0..cols)
                .map(|k| {
                    [
                        prior_from_llr(num::clamp(exchange.sccc_priors.get(2 * t, k), LLR_CLAMP)),
                        prior_from_llr(num::clamp(
                            exchange.sccc_priors.get(2 * t + 1, k),
                            LLR_CLAMP,
                        )),
                    ]
                })
                .collect(),
            lp_below: (t + 1 < brows).then(|| {
                (0..cols)
                    .map(|k| {
                        prior_from_llr(num::clamp(exchange.sccc_priors.get(2 * t + 2, k), LLR_CLAMP))
                    })
                    .collect()
            }),
            evidence: (0..bcols)
                .map(|bn| exchange.equalizer_llrs.block_probs(t, bn))
                .collect(),
        })
        .collect();

    let flat = vec![HangBelief::flat(); cols];
    // Downward sweep: hang-down messages carrying only top-side information.
    let mut mu: Vec<Vec<HangBelief>> = vec![vec![HangBelief::free(); cols]];
    for t in 0..brows.saturating_sub(1) {
        let r = strip_pass(trellis, &data[t], cols, &mu[t], &flat, false);
        mu.push(r.mu_out);
    }
    // Alternating upward/downward sweeps refine the boundary messages (they
    // are per-column factorizations, so a second pass sharpens them); the
    // last upward sweep emits each strip's posteriors with both directions
    // in hand.
    let mut nus: Vec<Vec<HangBelief>> = vec![flat; brows];
    for pair in 0..DETECT_SWEEP_PAIRS {
        let last = pair + 1 == DETECT_SWEEP_PAIRS;
        for t in (0..brows).rev() {
            let r = strip_pass(trellis, &data[t], cols, &mu[t], &nus[t], last);
            if t > 0 {
                nus[t - 1] = r.nu_out;
            }
            if !last {
                continue;
            }
            let bit_mass = r.bit_mass.as_ref().expect("outputs requested");
            let cfg_probs = r.cfg_probs.as_ref().expect("outputs requested");
            for k in 0..cols {
                for row in 0..2 {
                    let post = bit_mass[k][row][0] - bit_mass[k][row][1];
                    let prior = exchange.sccc_priors.get(2 * t + row, k);
                    sccc_llrs.set(2 * t + row, k, num::clamp(post - prior, LLR_CLAMP));
                }
            }
            for bn in 0..bcols {
                feedback.set_block_from_probs(t, bn, &cfg_probs[bn]);
            }
        }
        if last {
            break;
        }
        for t in 0..brows.saturating_sub(1) {
            let r = strip_pass(trellis, &data[t], cols, &mu[t], &nus[t], false);
            mu[t + 1] = r.mu_out;
        }
    }
    exchange.sccc_llrs = Some(sccc_llrs);
    exchange.feedback = Some(feedback);
    Ok(exchange)
}

/// Samples the grain-type frequencies of an n-column-step random walk over
/// stacked strips of the contract process.
pub fn random_walk_frequencies(trellis: &GrainTrellis, steps: usize, seed: u64) -> [f64; 4] {
    let cols = 1024.min(steps.max(2));
    let strips = steps.div_ceil(cols);
    sampled_frequencies(trellis, strips, cols, seed)
}

/// Samples a tiling from the trellis's contract distribution; strips are
/// coupled through grains hanging across row-pair boundaries. Deterministic
/// for a fixed seed.
pub fn sample_tiling(
    trellis: &GrainTrellis,
    rows: usize,
    cols: usize,
    seed: u64,
) -> Result<GrainImage, Error> {
    if rows < 2 || cols < 2 || rows % 2 != 0 || cols % 2 != 0 {
        return Err(Error::Domain("tiling dimensions must be even and >= 2"));
    }
    let mut rng = rng_from_seed(seed);
    let mut roles = vec![CellRole::A; rows * cols];
    let mut ids = vec![u32::MAX; rows * cols];
    let mut next_id = 0u32;
    let mut above = vec![HangEvt::None; cols];
    for t in 0..rows / 2 {
        let allow_below = t + 1 < rows / 2;
        let mut place = |k: usize, b: &Branch| {
            for (slot, placed) in b.placed.iter().enumerate() {
                let Some(pl) = placed else { continue };
                let (ty, row0) = match pl {
                    // Cells of a hanging grain were assigned when it was
                    // placed by the previous strip.
                    Placement::Above(_) => continue,
                    Placement::InStrip(ty) => (*ty, 2 * t + slot),
                    Placement::Below(ty) => (*ty, 2 * t + 1),
                };
                let id = next_id;
                next_id += 1;
                let cells: &[(usize, usize, CellRole)] = match ty {
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
                for &(dm, dn, role) in cells {
                    let i = (row0 + dm) * cols + (k + dn);
                    roles[i] = role;
                    ids[i] = id;
                }
            }
        };
        above = walk_strip(trellis, cols, &above, allow_below, &mut rng, &mut place);
    }
    GrainImage::from_parts(rows, cols, roles, ids)
}
