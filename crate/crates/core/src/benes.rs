//! Benes-network permutation of bits or blocks inside a word.
//!
//! A network of size `b` has `2 log b - 1` stages of `b` two-way switches.
//! Stage `s` pairs positions `i` and `i ^ d_s`, where the distances run
//! `b/2, b/4, .., 1, .., b/4, b/2`. Routing uses the looping algorithm:
//! every input switch sends one mate to the upper half-network and one to
//! the lower, and the output switches are forced from there.
//!
//! Two control matrices, `C` (switch crossed) and `Dir` (partner lies to the
//! right), are packed into two words each. Applying a stage costs a handful
//! of AND/XOR/shift instructions, so a whole permutation is `O(log b)`.

use thiserror::Error;

use crate::machine::counters::reg;
use crate::machine::{Width, Word};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BenesError {
    #[error("targets are not a bijection on 0..{0}")]
    NotBijection(usize),
    #[error("network size {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("network size {size} not allowed for {granularity:?} routing at w={width}")]
    BadSize {
        size: usize,
        granularity: Granularity,
        width: usize,
    },
    #[error("plan granularity is {0:?}")]
    GranularityMismatch(Granularity),
    #[error("plan built for w={plan}, word has w={word}")]
    WidthMismatch { plan: usize, word: usize },
    #[error("control index {j} outside 1..={max}")]
    ControlIndex { j: usize, max: usize },
}

/// A bijection on `0..size`; `targets[i]` is where source `i` goes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    targets: Vec<usize>,
}

impl Permutation {
    pub fn new(targets: Vec<usize>) -> Result<Permutation, BenesError> {
        let n = targets.len();
        let mut seen = vec![false; n];
        for &t in &targets {
            if t >= n || std::mem::replace(&mut seen[t], true) {
                return Err(BenesError::NotBijection(n));
            }
        }
        Ok(Permutation { targets })
    }

    pub fn identity(n: usize) -> Permutation {
        Permutation {
            targets: (0..n).collect(),
        }
    }

    /// The permutation whose output slot `j` receives source `order[j]`.
    pub fn from_order(order: &[usize]) -> Result<Permutation, BenesError> {
        let mut targets = vec![usize::MAX; order.len()];
        for (j, &src) in order.iter().enumerate() {
            if src >= order.len() || targets[src] != usize::MAX {
                return Err(BenesError::NotBijection(order.len()));
            }
            targets[src] = j;
        }
        Ok(Permutation { targets })
    }

    pub fn size(&self) -> usize {
        self.targets.len()
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn target(&self, i: usize) -> usize {
        self.targets[i]
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.size()];
        for (i, &t) in self.targets.iter().enumerate() {
            inv[t] = i;
        }
        Permutation { targets: inv }
    }

    /// Extends with fixed points up to `n` entries.
    pub fn padded(&self, n: usize) -> Permutation {
        assert!(n >= self.size());
        let mut targets = self.targets.clone();
        targets.extend(self.size()..n);
        Permutation { targets }
    }

    pub fn is_identity(&self) -> bool {
        self.targets.iter().enumerate().all(|(i, &t)| i == t)
    }

    /// Direct shuffle: `out[targets[i]] = items[i]`.
    pub fn apply_to<T: Clone>(&self, items: &[T]) -> Vec<T> {
        assert_eq!(items.len(), self.size());
        let mut out = items.to_vec();
        for (i, item) in items.iter().enumerate() {
            out[self.targets[i]] = item.clone();
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Granularity {
    /// Permutes the leftmost `b` bits.
    Bit,
    /// Permutes the `w / log w` blocks of `log w` bits.
    Block,
}

/// Number of switching stages for a network of `size` inputs.
pub fn stage_count(size: usize) -> usize {
    if size <= 1 {
        0
    } else {
        2 * size.trailing_zeros() as usize - 1
    }
}

/// Partner distance of stage `s` in a network with `log_b` levels.
fn stage_distance(size: usize, s: usize) -> usize {
    let log_b = size.trailing_zeros() as usize;
    if s < log_b {
        size >> (s + 1)
    } else {
        size >> (2 * log_b - 1 - s)
    }
}

/// Looping-algorithm routing. Returns one column of `n` crossed-switch flags
/// per stage; both mates of a switch carry the same flag.
pub fn route(targets: &[usize]) -> Vec<Vec<bool>> {
    let n = targets.len();
    debug_assert!(n.is_power_of_two());
    if n == 1 {
        return Vec::new();
    }
    if n == 2 {
        let crossed = targets[0] != 0;
        return vec![vec![crossed, crossed]];
    }
    let h = n / 2;
    let mut inverse = vec![0; n];
    for (i, &t) in targets.iter().enumerate() {
        inverse[t] = i;
    }

    // upper[i]: input i is routed through the upper half-network.
    let mut upper: Vec<Option<bool>> = vec![None; n];
    for start in 0..n {
        if upper[start].is_some() {
            continue;
        }
        // Cycles open at the smallest unrouted input, which goes up.
        let mut a = start;
        upper[a] = Some(true);
        upper[a ^ h] = Some(false);
        loop {
            // a's output is reached from above, so its output mate comes from below.
            let b = inverse[targets[a] ^ h];
            if let Some(up) = upper[b] {
                debug_assert!(!up, "looping algorithm closed inconsistently");
                break;
            }
            upper[b] = Some(false);
            upper[b ^ h] = Some(true);
            a = b ^ h;
        }
    }
    let upper: Vec<bool> = upper.into_iter().map(|u| u.unwrap()).collect();

    let mut first = vec![false; n];
    for i in 0..h {
        // Input i sits in the upper half; it crosses when routed down.
        let crossed = !upper[i];
        first[i] = crossed;
        first[i + h] = crossed;
    }
    let mut last = vec![false; n];
    for o in 0..h {
        let crossed = !upper[inverse[o]];
        last[o] = crossed;
        last[o + h] = crossed;
    }

    let mut up_targets = vec![0; h];
    let mut down_targets = vec![0; h];
    for i in 0..n {
        if upper[i] {
            up_targets[i % h] = targets[i] % h;
        } else {
            down_targets[i % h] = targets[i] % h;
        }
    }
    let up_cols = route(&up_targets);
    let down_cols = route(&down_targets);

    let mut cols = Vec::with_capacity(stage_count(n));
    cols.push(first);
    for (u, d) in up_cols.into_iter().zip(down_cols) {
        let mut col = u;
        col.extend(d);
        cols.push(col);
    }
    cols.push(last);
    cols
}

/// Simulates routed columns on a slice, for checking `route` independently of word packing.
pub fn simulate_columns<T: Clone>(columns: &[Vec<bool>], items: &[T]) -> Vec<T> {
    let n = items.len();
    let mut cur = items.to_vec();
    for (s, col) in columns.iter().enumerate() {
        let d = stage_distance(n, s);
        cur = (0..n)
            .map(|i| if col[i] { cur[i ^ d].clone() } else { cur[i].clone() })
            .collect();
    }
    cur
}

/// Packed control words for one permutation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenesPlan {
    size: usize,
    granularity: Granularity,
    width: Width,
    /// `C1`, `C2`
    c_words: [Word; 2],
    /// `Dir1`, `Dir2`
    dir_words: [Word; 2],
}

impl BenesPlan {
    /// Routes `perm` and packs its control matrices.
    ///
    /// Bit plans pack column by column (stage `s < log b` at bits `s*b..`
    /// of `C1`, later stages in `C2`). Block plans left-pad the matrices to
    /// `2 log w` columns and pack row by row, so block `i` of `C1` holds the
    /// left `log w` control bits of row `i`.
    pub fn build(perm: &Permutation, granularity: Granularity, width: Width) -> Result<BenesPlan, BenesError> {
        let b = perm.size();
        if !b.is_power_of_two() {
            return Err(BenesError::NotPowerOfTwo(b));
        }
        let size_ok = match granularity {
            Granularity::Bit => b <= width.blocks(),
            Granularity::Block => b == width.blocks(),
        };
        if !size_ok {
            return Err(BenesError::BadSize {
                size: b,
                granularity,
                width: width.bits(),
            });
        }
        let cols = route(perm.targets());
        let stages = cols.len();
        let log_b = b.trailing_zeros() as usize;
        let mut c_words = [Word::zero(width), Word::zero(width)];
        let mut dir_words = [Word::zero(width), Word::zero(width)];
        let lw = width.log();
        let pad = 2 * lw - stages;
        for (s, col) in cols.iter().enumerate() {
            let d = stage_distance(b, s);
            for (i, &crossed) in col.iter().enumerate() {
                let dir = i & d == 0;
                let (word, pos) = match granularity {
                    Granularity::Bit if s < log_b => (0, s * b + i),
                    Granularity::Bit => (1, (s - log_b) * b + i),
                    Granularity::Block => {
                        let c = pad + s;
                        if c < lw {
                            (0, i * lw + c)
                        } else {
                            (1, i * lw + c - lw)
                        }
                    }
                };
                c_words[word].set_bit(pos, crossed);
                dir_words[word].set_bit(pos, dir);
            }
        }
        Ok(BenesPlan {
            size: b,
            granularity,
            width,
            c_words,
            dir_words,
        })
    }

    /// Bit plan for the leftmost `perm.size()` bits, padding with fixed points
    /// up to the next power of two.
    pub fn for_prefix(perm: &Permutation, width: Width) -> Result<BenesPlan, BenesError> {
        let n = perm.size().max(1).next_power_of_two();
        BenesPlan::build(&perm.padded(n), Granularity::Bit, width)
    }

    pub fn from_words(size: usize, granularity: Granularity, width: Width, words: [Word; 4]) -> BenesPlan {
        let [c1, c2, d1, d2] = words;
        BenesPlan {
            size,
            granularity,
            width,
            c_words: [c1, c2],
            dir_words: [d1, d2],
        }
    }

    /// `[C1, C2, Dir1, Dir2]`
    pub fn words(&self) -> [&Word; 4] {
        [
            &self.c_words[0],
            &self.c_words[1],
            &self.dir_words[0],
            &self.dir_words[1],
        ]
    }

    pub fn words_mut(&mut self) -> [&mut Word; 4] {
        let [c1, c2] = &mut self.c_words;
        let [d1, d2] = &mut self.dir_words;
        [c1, c2, d1, d2]
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn width(&self) -> Width {
        self.width
    }

    pub fn stages(&self) -> usize {
        stage_count(self.size)
    }

    /// `C_{i,s}` as stored, for inspection.
    pub fn control(&self, i: usize, s: usize) -> bool {
        let (word, pos) = self.locate(i, s);
        self.c_words[word].bit(pos)
    }

    pub fn direction(&self, i: usize, s: usize) -> bool {
        let (word, pos) = self.locate(i, s);
        self.dir_words[word].bit(pos)
    }

    fn locate(&self, i: usize, s: usize) -> (usize, usize) {
        let b = self.size;
        let log_b = b.trailing_zeros() as usize;
        match self.granularity {
            Granularity::Bit if s < log_b => (0, s * b + i),
            Granularity::Bit => (1, (s - log_b) * b + i),
            Granularity::Block => {
                let lw = self.width.log();
                let c = 2 * lw - self.stages() + s;
                if c < lw {
                    (0, i * lw + c)
                } else {
                    (1, i * lw + c - lw)
                }
            }
        }
    }

    fn check(&self, x: &Word, granularity: Granularity) -> Result<(), BenesError> {
        if self.granularity != granularity {
            return Err(BenesError::GranularityMismatch(self.granularity));
        }
        if x.width() != self.width {
            return Err(BenesError::WidthMismatch {
                plan: self.width.bits(),
                word: x.bits(),
            });
        }
        Ok(())
    }

    /// Permutes the leftmost `b` bits of `x`; the other bits pass through.
    pub fn apply_bits(&self, x: &Word) -> Result<Word, BenesError> {
        self.check(x, Granularity::Bit)?;
        Ok(self.apply_bits_unchecked(x))
    }

    pub(crate) fn apply_bits_unchecked(&self, x: &Word) -> Word {
        self.run_bits(x, true)
    }

    /// Bit application for words that are zero beyond the network's `b`
    /// inputs; the per-stage lead mask is then unnecessary.
    pub(crate) fn apply_bits_zero_tail(&self, x: &Word) -> Word {
        self.run_bits(x, false)
    }

    fn run_bits(&self, x: &Word, clip: bool) -> Word {
        let b = self.size;
        let stages = self.stages();
        if stages == 0 {
            return x.clone();
        }
        let log_b = b.trailing_zeros() as usize;
        let lead = if clip {
            Some(Word::lead_mask(self.width, b))
        } else {
            None
        };
        let mut x = x.clone();
        let mut right = &self.c_words[0] & &self.dir_words[0];
        for s in 0..stages {
            if s == log_b {
                right = &self.c_words[1] & &self.dir_words[1];
            }
            let d = stage_distance(b, s);
            x = match &lead {
                Some(lead) => swap_stage(&x, &(&right & lead), d),
                None => swap_stage(&x, &right, d),
            };
            right = &right << b;
        }
        x
    }

    /// Permutes the `w / log w` blocks of `x`.
    pub fn apply_blocks(&self, x: &Word) -> Result<Word, BenesError> {
        self.check(x, Granularity::Block)?;
        let lanes = BlockLanes::new(self.width);
        Ok(self.apply_blocks_with(&lanes, x))
    }

    pub(crate) fn apply_blocks_with(&self, lanes: &BlockLanes, x: &Word) -> Word {
        let lw = self.width.log();
        let stages = self.stages();
        let pad = 2 * lw - stages;
        let mut x = x.clone();
        let mut column = Word::zero(self.width);
        for s in 0..stages {
            let col = pad + s;
            if s == 0 || col == lw {
                // Align the stage's control column with the block heads.
                let half = col / lw;
                let right = &self.c_words[half] & &self.dir_words[half];
                column = &right << (col % lw);
            } else {
                column = &column << 1;
            }
            let control = lanes.spread_heads(&(lanes.block_starts() & &column));
            let d = stage_distance(self.size, s) * lw;
            x = swap_stage(&x, &control, d);
        }
        x
    }
}

/// One network stage as a delta swap: every bit flagged in `right` trades
/// places with the bit `d` positions to its right. This is the masked-shift
/// stage `(x & !C) | ((x & C & Dir) >> d) | ((x & C & !Dir) << d)` with
/// `right = C & Dir`, since a crossed switch always moves both of its bits.
fn swap_stage(x: &Word, right: &Word, d: usize) -> Word {
    let t = &(x ^ &(x << d)) & right;
    &(x ^ &t) ^ &(&t >> d)
}

/// The block-start pattern `Z_1` (a one at position 0 of every block),
/// built once so that per-stage control replication is `O(1)`.
#[derive(Debug, Clone)]
pub struct BlockLanes {
    width: Width,
    z1: Word,
}

impl BlockLanes {
    /// Doubling construction, `O(log w)` instructions.
    pub fn new(width: Width) -> BlockLanes {
        let lw = width.log();
        let mut z = Word::unit(width, 0);
        let mut span = lw;
        for _ in 0..width.blocks().trailing_zeros() {
            z = &z | &(&z >> span);
            span = reg::shl(span, 1);
        }
        BlockLanes { width, z1: z }
    }

    /// One at position `j - 1` of every block (`1 <= j <= log w`).
    pub fn column(&self, j: usize) -> Word {
        &self.z1 >> (j - 1)
    }

    pub fn block_starts(&self) -> &Word {
        &self.z1
    }

    /// Every bit of block `B` of the result equals `z[B[j]]` (1-based `j`).
    pub fn replicate(&self, z: &Word, j: usize) -> Word {
        self.spread_heads(&(&(z << (j - 1)) & &self.z1))
    }

    /// Fills every block whose head bit is set; `heads` must lie on block heads.
    pub fn spread_heads(&self, heads: &Word) -> Word {
        let tail = heads >> (self.width.log() - 1);
        &heads.wrapping_sub(&tail) | heads
    }
}

/// Standalone control replication, building the lane pattern on the fly.
pub fn replicate_control(z: &Word, j: usize) -> Result<Word, BenesError> {
    let lw = z.width().log();
    if j == 0 || j > lw {
        return Err(BenesError::ControlIndex { j, max: lw });
    }
    Ok(BlockLanes::new(z.width()).replicate(z, j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::scoped_counts;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn all_perms(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in all_perms(n - 1) {
            for pos in 0..n {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    fn random_word(rng: &mut impl Rng, width: Width) -> Word {
        Word::from_bits(width, (0..width.bits()).map(|_| rng.gen::<bool>()))
    }

    // Direct bit-shuffle oracle for the leftmost b bits.
    fn shuffle_bits(perm: &Permutation, x: &Word) -> Word {
        let mut out = x.clone();
        for i in 0..perm.size() {
            out.set_bit(perm.target(i), x.bit(i));
        }
        out
    }

    fn shuffle_blocks(perm: &Permutation, x: &Word) -> Word {
        let lw = x.width().log();
        let mut out = Word::zero(x.width());
        for i in 0..perm.size() {
            let t = perm.target(i);
            for o in 0..lw {
                out.set_bit(t * lw + o, x.bit(i * lw + o));
            }
        }
        out
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(Permutation::new(vec![0, 0]), Err(BenesError::NotBijection(2)));
        assert_eq!(Permutation::new(vec![0, 2]), Err(BenesError::NotBijection(2)));
        let p = Permutation::identity(3);
        assert_eq!(
            BenesPlan::build(&p, Granularity::Bit, Width::W256),
            Err(BenesError::NotPowerOfTwo(3))
        );
        let p = Permutation::identity(8);
        assert!(matches!(
            BenesPlan::build(&p, Granularity::Block, Width::W256),
            Err(BenesError::BadSize { .. })
        ));
        assert!(matches!(
            BenesPlan::build(&p, Granularity::Bit, Width::W16),
            Err(BenesError::BadSize { .. })
        ));
        let plan = BenesPlan::build(&Permutation::identity(4), Granularity::Bit, Width::W16).unwrap();
        assert_eq!(
            plan.apply_blocks(&Word::zero(Width::W16)),
            Err(BenesError::GranularityMismatch(Granularity::Bit))
        );
    }

    #[test]
    fn identity_routes_straight() {
        let plan = BenesPlan::build(&Permutation::identity(4), Granularity::Bit, Width::W16).unwrap();
        assert_eq!(plan.stages(), 3);
        for s in 0..3 {
            for i in 0..4 {
                assert!(!plan.control(i, s));
            }
        }
        let x = Word::from_bin_str(Width::W16, "1011 0110 0001 1110");
        assert_eq!(plan.apply_bits(&x).unwrap(), x);
    }

    #[test]
    fn two_swap_is_one_crossed_stage() {
        let p = Permutation::new(vec![1, 0]).unwrap();
        let plan = BenesPlan::build(&p, Granularity::Bit, Width::W16).unwrap();
        assert_eq!(plan.stages(), 1);
        assert!(plan.control(0, 0) && plan.control(1, 0));
        let x = Word::from_bin_str(Width::W16, "1000 0000 0000 0000");
        assert_eq!(plan.apply_bits(&x).unwrap(), Word::from_bin_str(Width::W16, "0100"));
    }

    #[test]
    fn dir_marks_right_partner() {
        let p = Permutation::new(vec![3, 1, 0, 2]).unwrap();
        let plan = BenesPlan::build(&p, Granularity::Bit, Width::W16).unwrap();
        // distances 2, 1, 2
        for (s, d) in [(0, 2), (1, 1), (2, 2)] {
            for i in 0..4 {
                assert_eq!(plan.direction(i, s), (i ^ d) > i);
            }
        }
    }

    #[test]
    fn route_is_exhaustively_correct_up_to_8() {
        for n in [2, 4, 8] {
            for t in all_perms(n) {
                let cols = route(&t);
                assert_eq!(cols.len(), stage_count(n));
                for (s, col) in cols.iter().enumerate() {
                    let d = stage_distance(n, s);
                    for i in 0..n {
                        assert_eq!(col[i], col[i ^ d], "switch mates disagree");
                    }
                }
                let items: Vec<usize> = (0..n).collect();
                let out = simulate_columns(&cols, &items);
                let p = Permutation::new(t).unwrap();
                assert_eq!(out, p.apply_to(&items));
            }
        }
    }

    #[test]
    fn all_40320_size_8_plans_realize_their_permutation() {
        let width = Width::W256;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for t in all_perms(8) {
            let p = Permutation::new(t).unwrap();
            let plan = BenesPlan::build(&p, Granularity::Bit, width).unwrap();
            let x = random_word(&mut rng, width);
            assert_eq!(plan.apply_bits(&x).unwrap(), shuffle_bits(&p, &x));
        }
    }

    #[test]
    fn one_hot_probe_lands_on_target() {
        let width = Width::W256;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for b in [2, 4, 8, 16, 32] {
            let mut t: Vec<usize> = (0..b).collect();
            t.shuffle(&mut rng);
            let p = Permutation::new(t).unwrap();
            let plan = BenesPlan::build(&p, Granularity::Bit, width).unwrap();
            for i in 0..b {
                let y = plan.apply_bits(&Word::unit(width, i)).unwrap();
                assert_eq!(y, Word::unit(width, p.target(i)));
            }
        }
    }

    #[test]
    fn bits_past_b_are_untouched_and_inverse_restores() {
        let width = Width::W256;
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..200 {
            let b = 1 << rng.gen_range(1..=5);
            let mut t: Vec<usize> = (0..b).collect();
            t.shuffle(&mut rng);
            let p = Permutation::new(t).unwrap();
            let fwd = BenesPlan::build(&p, Granularity::Bit, width).unwrap();
            let back = BenesPlan::build(&p.inverse(), Granularity::Bit, width).unwrap();
            let x = random_word(&mut rng, width);
            let y = fwd.apply_bits(&x).unwrap();
            for i in b..256 {
                assert_eq!(y.bit(i), x.bit(i));
            }
            assert_eq!(back.apply_bits(&y).unwrap(), x);
        }
    }

    #[test]
    fn bit_apply_cost_is_logarithmic_without_multiplication() {
        let width = Width::W256;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for b in [2usize, 4, 8, 16, 32] {
            let mut t: Vec<usize> = (0..b).collect();
            t.shuffle(&mut rng);
            let plan = BenesPlan::build(&Permutation::new(t).unwrap(), Granularity::Bit, width).unwrap();
            let x = random_word(&mut rng, width);
            let (_, c) = scoped_counts(|| plan.apply_bits(&x).unwrap());
            let stages = 2 * b.trailing_zeros() as u64 - 1;
            assert!(c.operations() <= 12 * stages + 4, "b={b}: {c:?}");
            assert_eq!(c.multiplications, 0);
        }
    }

    #[test]
    fn replicate_examples() {
        let w = Width::W16;
        assert_eq!(replicate_control(&Word::zero(w), 3).unwrap(), Word::zero(w));
        for j in 1..=4 {
            assert_eq!(replicate_control(&Word::ones(w), j).unwrap(), Word::ones(w));
        }
        let z = Word::from_bin_str(w, "0100 0000 0000 0000");
        assert_eq!(
            replicate_control(&z, 2).unwrap(),
            Word::from_bin_str(w, "1111 0000 0000 0000")
        );
        assert_eq!(replicate_control(&z, 5), Err(BenesError::ControlIndex { j: 5, max: 4 }));
    }

    #[test]
    fn replicate_matches_per_block_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for width in [Width::W16, Width::W256] {
            let lanes = BlockLanes::new(width);
            let lw = width.log();
            for _ in 0..200 {
                let z = random_word(&mut rng, width);
                let j = rng.gen_range(1..=lw);
                let (got, c) = scoped_counts(|| lanes.replicate(&z, j));
                assert_eq!(c.multiplications, 0);
                assert!(c.operations() <= 6);
                for blk in 0..width.blocks() {
                    for o in 0..lw {
                        assert_eq!(got.bit(blk * lw + o), z.bit(blk * lw + j - 1));
                    }
                }
            }
        }
    }

    #[test]
    fn block_examples() {
        let w = Width::W16;
        let x = Word::from_bin_str(w, "1000 0100 0010 0001");
        let id = BenesPlan::build(&Permutation::identity(4), Granularity::Block, w).unwrap();
        assert_eq!(id.apply_blocks(&x).unwrap(), x);
        let swap = BenesPlan::build(&Permutation::new(vec![1, 0, 3, 2]).unwrap(), Granularity::Block, w).unwrap();
        assert_eq!(
            swap.apply_blocks(&x).unwrap(),
            Word::from_bin_str(w, "0100 1000 0001 0010")
        );
        // Output order: source blocks 3, 0, 1, 2.
        let sort = Permutation::from_order(&[3, 0, 1, 2]).unwrap();
        let plan = BenesPlan::build(&sort, Granularity::Block, w).unwrap();
        let x = Word::from_bin_str(w, "1000 0000 0000 0100");
        assert_eq!(
            plan.apply_blocks(&x).unwrap(),
            Word::from_bin_str(w, "0100 1000 0000 0000")
        );
    }

    #[test]
    fn block_apply_matches_shuffle_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for width in [Width::W16, Width::W256] {
            for _ in 0..2000 {
                let mut t: Vec<usize> = (0..width.blocks()).collect();
                t.shuffle(&mut rng);
                let p = Permutation::new(t).unwrap();
                let plan = BenesPlan::build(&p, Granularity::Block, width).unwrap();
                let x = random_word(&mut rng, width);
                let (y, c) = scoped_counts(|| plan.apply_blocks(&x).unwrap());
                assert_eq!(y, shuffle_blocks(&p, &x));
                assert_eq!(c.multiplications, 0);
            }
        }
    }
}
