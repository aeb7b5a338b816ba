//! Randomized succinct rank structures built from prefix partitions.
//!
//! [`BStructure`] is the plain tree: every inner node stores a prefix `p`
//! that splits its key set between a third and two thirds, every leaf
//! stores at most three keys. [`BetaStructure`] keeps the same tree shape
//! but replaces each prefix by its length and a short hash signature, and
//! each leaf by its key ranks. A hash collision can send a query down the
//! wrong branch, so answers are verified against the keys and a binary
//! search takes over when the check fails.
//!
//! Ranks: `rank(x)` is the number of keys `<= x`, i.e. the 1-based rank of
//! the predecessor of `x`, and 0 when `x` is below every key.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gamma::KeyStore;
use crate::machine::counters::{bump, record_index_probes, record_multiplications, reg, Counter};
use crate::machine::{Width, Word};
use crate::packed::{bits_for, PackedInts, RankBits};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BetaError {
    #[error("key set is empty")]
    Empty,
    #[error("a partition needs at least two keys, got {0}")]
    TooFew(usize),
    #[error("keys must be strictly ascending (position {at})")]
    Unsorted { at: usize },
    #[error("key of width {got}, structure width {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("key store holds {got} keys, structure was built over {expected}")]
    KeyCount { expected: usize, got: usize },
}

fn validate(keys: &[Word]) -> Result<Width, BetaError> {
    let first = keys.first().ok_or(BetaError::Empty)?;
    let width = first.width();
    if let Some(bad) = keys.iter().find(|k| k.width() != width) {
        return Err(BetaError::WidthMismatch {
            expected: width.bits(),
            got: bad.bits(),
        });
    }
    if let Some(at) = keys.windows(2).position(|p| p[0] >= p[1]) {
        return Err(BetaError::Unsorted { at: at + 1 });
    }
    Ok(width)
}

/// A prefix `p` splitting a key set, with the two side sizes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixPartition {
    /// `p` left-aligned, zero past `len`.
    pub prefix: Word,
    pub len: usize,
    /// Keys starting with `p`; they form the index range `first..first + inside`.
    pub inside: usize,
    pub outside: usize,
    pub first: usize,
}

/// Greedy extension: while more than two thirds of the keys start with `p`,
/// append the bit taken by the larger half.
pub fn prefix_partition(keys: &[Word]) -> Result<PrefixPartition, BetaError> {
    if keys.len() < 2 {
        return Err(BetaError::TooFew(keys.len()));
    }
    let width = validate(keys)?;
    let n = keys.len();
    let (mut lo, mut hi) = (0, n);
    let mut prefix = Word::zero(width);
    let mut len = 0;
    while 3 * (hi - lo) > 2 * n {
        let split = lo + keys[lo..hi].partition_point(|y| !y.bit(len));
        if split - lo >= hi - split {
            hi = split;
        } else {
            lo = split;
            prefix.set_bit(len, true);
        }
        len += 1;
    }
    Ok(PrefixPartition {
        prefix,
        len,
        inside: hi - lo,
        outside: n - (hi - lo),
        first: lo,
    })
}

/// The sorted keys with `0^w` in front when it is not already a key.
#[derive(Debug, Clone)]
struct Augmented {
    keys: Vec<Word>,
    virtual_zero: bool,
}

impl Augmented {
    fn new(keys: &[Word]) -> Result<Augmented, BetaError> {
        let width = validate(keys)?;
        let virtual_zero = !keys[0].is_zero_raw();
        let mut aug = Vec::with_capacity(keys.len() + 1);
        if virtual_zero {
            aug.push(Word::zero(width));
        }
        aug.extend_from_slice(keys);
        Ok(Augmented {
            keys: aug,
            virtual_zero,
        })
    }

    /// Rank over the real keys of augmented index `i`.
    fn rank(&self, i: usize) -> usize {
        i + 1 - self.virtual_zero as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BNode {
    /// Right child: keys starting with the prefix, plus the key just before them.
    /// Left child: the other keys, plus the largest key starting with the prefix.
    Inner {
        prefix: Word,
        len: usize,
        left: usize,
        right: usize,
    },
    /// Augmented key indices, ascending.
    Leaf { keys: Vec<usize> },
}

/// Prefix-partition tree with explicit prefixes and keys.
#[derive(Debug, Clone)]
pub struct BStructure {
    aug: Augmented,
    nodes: Vec<BNode>,
    root: usize,
}

impl BStructure {
    pub fn build(keys: &[Word]) -> Result<BStructure, BetaError> {
        let aug = Augmented::new(keys)?;
        let mut nodes = Vec::new();
        let all: Vec<usize> = (0..aug.keys.len()).collect();
        let root = Self::build_set(&aug.keys, all, &mut nodes);
        Ok(BStructure { aug, nodes, root })
    }

    fn build_set(keys: &[Word], set: Vec<usize>, nodes: &mut Vec<BNode>) -> usize {
        if set.len() <= 3 {
            nodes.push(BNode::Leaf { keys: set });
            return nodes.len() - 1;
        }
        let words: Vec<Word> = set.iter().map(|&i| keys[i].clone()).collect();
        let part = prefix_partition(&words).expect("sets of four or more split");
        let (a, b) = (part.first, part.first + part.inside);
        let before = if a == 0 { set[0] } else { set[a - 1] };
        let mut right: Vec<usize> = set[a..b].to_vec();
        if a > 0 {
            right.insert(0, before);
        }
        let mut left: Vec<usize> = set[..a].to_vec();
        left.push(set[b - 1]);
        left.extend_from_slice(&set[b..]);
        let l = Self::build_set(keys, left, nodes);
        let r = Self::build_set(keys, right, nodes);
        nodes.push(BNode::Inner {
            prefix: part.prefix,
            len: part.len,
            left: l,
            right: r,
        });
        nodes.len() - 1
    }

    pub fn nodes(&self) -> &[BNode] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn virtual_zero(&self) -> bool {
        self.aug.virtual_zero
    }

    /// Edges on the longest root-to-leaf path.
    pub fn height(&self) -> usize {
        fn depth(nodes: &[BNode], at: usize) -> usize {
            match &nodes[at] {
                BNode::Leaf { .. } => 0,
                BNode::Inner { left, right, .. } => 1 + depth(nodes, *left).max(depth(nodes, *right)),
            }
        }
        depth(&self.nodes, self.root)
    }

    /// Exact descent with full prefix comparisons. Uncounted reference.
    pub fn rank(&self, x: &Word) -> usize {
        let mut at = self.root;
        loop {
            match &self.nodes[at] {
                BNode::Inner {
                    prefix,
                    len,
                    left,
                    right,
                } => {
                    let starts = (0..*len).all(|i| x.bit(i) == prefix.bit(i));
                    at = if starts { *right } else { *left };
                }
                BNode::Leaf { keys } => {
                    let pick = keys
                        .iter()
                        .rev()
                        .find(|&&i| self.aug.keys[i] <= *x)
                        .expect("the predecessor survives into the leaf");
                    return self.aug.rank(*pick);
                }
            }
        }
    }
}

/// Multiply-add-shift hashing of a left-aligned prefix and its length,
/// keyed by 128-bit multipliers drawn from the seed.
#[derive(Debug, Clone, PartialEq, Eq)]
struct PrefixHash {
    limb_mult: Vec<u128>,
    len_mult: u128,
    add: u128,
    out_bits: u32,
}

impl PrefixHash {
    fn new(width: Width, seed: u64, out_bits: u32) -> PrefixHash {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let limbs = width.bits().div_ceil(64);
        PrefixHash {
            limb_mult: (0..limbs).map(|_| rng.gen()).collect(),
            len_mult: rng.gen(),
            add: rng.gen(),
            out_bits,
        }
    }

    /// `prefix` must already be masked to its first `len` bits.
    fn hash(&self, prefix: &Word, len: usize) -> u64 {
        let mut acc = self.add.wrapping_add(self.len_mult.wrapping_mul(len as u128));
        let mut products = 1;
        for (limb, mult) in prefix.limbs().iter().zip(&self.limb_mult) {
            if *limb != 0 {
                acc = acc.wrapping_add(mult.wrapping_mul(*limb as u128));
                products += 1;
            }
        }
        record_multiplications(products);
        bump(Counter::Arith, products);
        bump(Counter::Shift, 1);
        if self.out_bits == 0 {
            0
        } else {
            (acc >> (128 - self.out_bits)) as u64
        }
    }
}

fn choose(n: u128, k: u32) -> u128 {
    match k {
        1 => n,
        2 => n * n.saturating_sub(1) / 2,
        3 => n * n.saturating_sub(1) * n.saturating_sub(2) / 6,
        _ => unreachable!("leaves hold at most three keys"),
    }
}

/// Numbers every ascending set of at most three indices below `n` with a
/// single integer (combinatorial number system, sizes 3, 2, 1 in turn).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LeafCodec {
    n: u128,
}

impl LeafCodec {
    fn base(&self, size: usize) -> u128 {
        match size {
            3 => 0,
            2 => choose(self.n, 3),
            1 => choose(self.n, 3) + choose(self.n, 2),
            _ => unreachable!("leaves hold one to three keys"),
        }
    }

    fn limit(&self) -> u128 {
        self.base(1) + self.n
    }

    fn encode(&self, set: &[usize]) -> u64 {
        let mut code = self.base(set.len());
        for (t, &i) in set.iter().enumerate() {
            code += choose(i as u128, t as u32 + 1);
        }
        code as u64
    }

    fn decode(&self, code: u64) -> Vec<usize> {
        let code = code as u128;
        let size = if code < self.base(2) {
            3
        } else if code < self.base(1) {
            2
        } else {
            1
        };
        let mut rest = code - self.base(size);
        let mut out = vec![0; size];
        for t in (0..size).rev() {
            // Largest i with C(i, t+1) <= rest.
            let (mut lo, mut hi) = (0u128, self.n);
            while lo < hi {
                let mid = (lo + hi).div_ceil(2);
                if choose(mid, t as u32 + 1) <= rest {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            rest -= choose(lo, t as u32 + 1);
            out[t] = lo as usize;
        }
        out
    }
}

/// Result of one β query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BetaOutcome {
    pub rank: usize,
    /// The tree answer failed verification and binary search supplied it.
    pub fell_back: bool,
    pub nodes_visited: usize,
}

/// The succinct variant: tree shape in level order, `(|p|, h(p))` per inner
/// node, one combinatorial code per leaf.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BetaStructure {
    width: Width,
    n: usize,
    virtual_zero: bool,
    seed: u64,
    hash: PrefixHash,
    /// Level-order shape, one bit per node (set for inner nodes). The
    /// children of the `i`-th inner node sit at positions `2i+1`, `2i+2`.
    shape: RankBits,
    len_bits: u32,
    sig_bits: u32,
    inner: PackedInts,
    codec: LeafCodec,
    leaves: PackedInts,
    height: usize,
}

const HEADER_BITS: usize = 64;

impl BetaStructure {
    pub fn build(keys: &[Word], seed: u64) -> Result<BetaStructure, BetaError> {
        let b = BStructure::build(keys)?;
        let width = keys[0].width();
        let n = keys.len();
        let sig_bits = 2 * bits_for(n as u64).min(if n <= 1 { 0 } else { 64 });
        let sig_bits = if n <= 1 { 0 } else { sig_bits };
        let hash = PrefixHash::new(width, seed, sig_bits);
        let len_bits = width.log() as u32;
        let codec = LeafCodec {
            n: b.aug.keys.len() as u128,
        };
        let mut inner = PackedInts::new(len_bits + sig_bits);
        let mut leaves = PackedInts::new(bits_for(codec.limit() as u64));
        let mut shape = Vec::new();
        let mut queue = std::collections::VecDeque::from([b.root]);
        while let Some(at) = queue.pop_front() {
            match &b.nodes[at] {
                BNode::Inner {
                    prefix,
                    len,
                    left,
                    right,
                } => {
                    shape.push(true);
                    let sig = hash.hash(prefix, *len);
                    inner.push(((*len as u64) << sig_bits) | sig);
                    queue.push_back(*left);
                    queue.push_back(*right);
                }
                BNode::Leaf { keys } => {
                    shape.push(false);
                    leaves.push(codec.encode(keys));
                }
            }
        }
        Ok(BetaStructure {
            width,
            n,
            virtual_zero: b.aug.virtual_zero,
            seed,
            hash,
            shape: RankBits::from_bits(shape),
            len_bits,
            sig_bits,
            inner,
            codec,
            leaves,
            height: b.height(),
        })
    }

    pub fn width(&self) -> Width {
        self.width
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn node_count(&self) -> usize {
        self.shape.len()
    }

    pub fn signature_bits(&self) -> u32 {
        self.sig_bits
    }

    /// Bits of one inner-node record: `|p|` then the signature.
    pub fn inner_node_bits(&self) -> u32 {
        self.len_bits + self.sig_bits
    }

    /// Shape with rank directory, inner records, leaf codes and a header
    /// word holding the seed (the hash multipliers are derived from it).
    pub fn index_bits(&self) -> usize {
        self.shape.bits() + self.inner.bits() + self.leaves.bits() + HEADER_BITS
    }

    fn aug_key<'a>(&self, keys: KeyStore<'a>, i: usize, zero: &'a Word) -> &'a Word {
        if self.virtual_zero && i == 0 {
            zero
        } else {
            keys.get(i + 1 - self.virtual_zero as usize)
        }
    }

    pub fn rank(&self, keys: KeyStore<'_>, x: &Word) -> Result<usize, BetaError> {
        Ok(self.query(keys, x)?.rank)
    }

    pub fn query(&self, keys: KeyStore<'_>, x: &Word) -> Result<BetaOutcome, BetaError> {
        if x.width() != self.width {
            return Err(BetaError::WidthMismatch {
                expected: self.width.bits(),
                got: x.bits(),
            });
        }
        if keys.len() != self.n {
            return Err(BetaError::KeyCount {
                expected: self.n,
                got: keys.len(),
            });
        }
        Ok(self.query_unchecked(keys, x))
    }

    pub(crate) fn query_unchecked(&self, keys: KeyStore<'_>, x: &Word) -> BetaOutcome {
        let zero = Word::zero(self.width);
        let mut at = 0;
        let mut visited = 0;
        let sig_mask = (1u64 << self.sig_bits) - 1;
        while self.shape.get(at) {
            visited += 1;
            record_index_probes(1);
            let i = self.shape.rank1(at);
            let record = self.inner.get(i);
            let len = (record >> self.sig_bits) as usize;
            let head = x & &Word::lead_mask(self.width, len);
            let matches = self.hash.hash(&head, len) == record & sig_mask;
            bump(Counter::Compare, 1);
            at = reg::add(reg::shl(i, 1), if matches { 2 } else { 1 });
        }
        visited += 1;
        record_index_probes(1);
        let leaf = self.shape.rank1(at);
        let set = self.codec.decode(self.leaves.get(at - leaf));

        // Largest leaf key <= x, then check that the next key is > x.
        let mut pick = None;
        for &i in set.iter().rev() {
            if self.aug_key(keys, i, &zero).compare(x).is_le() {
                pick = Some(i);
                break;
            }
        }
        let total = self.n + self.virtual_zero as usize;
        let verified = pick.filter(|&i| {
            let next = reg::add(i, 1);
            reg::ge(next, total) || x.compare(self.aug_key(keys, next, &zero)).is_lt()
        });
        match verified {
            Some(i) => BetaOutcome {
                rank: i + 1 - self.virtual_zero as usize,
                fell_back: false,
                nodes_visited: visited,
            },
            None => BetaOutcome {
                rank: predecessor_search(keys, x),
                fell_back: true,
                nodes_visited: visited,
            },
        }
    }
}

/// Number of keys `<= x`, by binary search with counted key probes.
pub fn predecessor_search(keys: KeyStore<'_>, x: &Word) -> usize {
    let (mut lo, mut hi) = (0, keys.len());
    while reg::lt(lo, hi) {
        let mid = reg::shr(reg::add(lo, hi), 1);
        if keys.get(mid + 1).compare(x).is_le() {
            lo = reg::add(mid, 1);
        } else {
            hi = mid;
        }
    }
    lo
}

/// Number of keys `<= x`. Uncounted oracle.
pub fn rank_oracle(keys: &[Word], x: &Word) -> usize {
    keys.partition_point(|y| y <= x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::scoped_counts;

    fn random_word(rng: &mut impl Rng, width: Width) -> Word {
        Word::from_bits(width, (0..width.bits()).map(|_| rng.gen::<bool>()))
    }

    fn random_keys(rng: &mut impl Rng, width: Width, n: usize) -> Vec<Word> {
        let mut keys: Vec<Word> = (0..n).map(|_| random_word(rng, width)).collect();
        if rng.gen_bool(0.2) {
            keys.push(Word::zero(width));
        }
        keys.sort();
        keys.dedup();
        keys
    }

    fn w16(v: u64) -> Word {
        Word::from_u64(Width::W16, v)
    }

    #[test]
    fn partition_of_two_keys() {
        let p = prefix_partition(&[w16(0), w16(0x8000)]).unwrap();
        assert_eq!((p.inside, p.outside), (1, 1));
        assert_eq!(prefix_partition(&[w16(1)]), Err(BetaError::TooFew(1)));
    }

    #[test]
    fn partition_of_four_equal_groups() {
        let keys: Vec<Word> = [0x0000, 0x1000, 0x4000, 0x5000, 0x8000, 0x9000, 0xc000, 0xd000]
            .into_iter()
            .map(w16)
            .collect();
        let p = prefix_partition(&keys).unwrap();
        assert!(p.len <= 2);
        assert!(3 * p.inside >= keys.len() && 3 * p.inside <= 2 * keys.len());
    }

    #[test]
    fn partition_bounds_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for _ in 0..2000 {
            let width = if rng.gen_bool(0.5) { Width::W16 } else { Width::W256 };
            let n = rng.gen_range(2..=200);
            let keys = random_keys(&mut rng, width, n);
            if keys.len() < 2 {
                continue;
            }
            let p = prefix_partition(&keys).unwrap();
            let s = keys.len();
            for side in [p.inside, p.outside] {
                assert!(3 * side >= s && 3 * side <= 2 * s, "{side} of {s}");
            }
            assert!((p.first..p.first + p.inside).all(|i| (0..p.len).all(|b| keys[i].bit(b) == p.prefix.bit(b))));
        }
    }

    #[test]
    fn small_trees() {
        let three = BStructure::build(&[w16(0), w16(5), w16(9)]).unwrap();
        assert_eq!(three.nodes().len(), 1);
        assert_eq!(three.nodes()[three.root()], BNode::Leaf { keys: vec![0, 1, 2] });

        let four = BStructure::build(&[w16(0), w16(5), w16(9), w16(700)]).unwrap();
        assert_eq!(four.nodes().len(), 3);
        for node in four.nodes() {
            if let BNode::Leaf { keys } = node {
                assert!(3 * keys.len() <= 2 * 4 + 3);
            }
        }
    }

    #[test]
    fn b_structure_matches_oracle_and_height_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let bound = (256f64.ln() / 1.5f64.ln()).ceil() as usize + 2;
        for _ in 0..100 {
            let keys = random_keys(&mut rng, Width::W256, 256);
            let b = BStructure::build(&keys).unwrap();
            assert!(b.height() <= bound, "height {} > {bound}", b.height());
            for _ in 0..50 {
                let x = random_word(&mut rng, Width::W256);
                assert_eq!(b.rank(&x), rank_oracle(&keys, &x));
            }
            for y in &keys {
                assert_eq!(b.rank(y), rank_oracle(&keys, y));
            }
        }
    }

    #[test]
    fn leaf_codec_round_trips() {
        for n in [1usize, 2, 3, 7, 40] {
            let codec = LeafCodec { n: n as u128 };
            let mut seen = std::collections::HashSet::new();
            for a in 0..n {
                let mut sets = vec![vec![a]];
                for b in a + 1..n {
                    sets.push(vec![a, b]);
                    for c in b + 1..n {
                        sets.push(vec![a, b, c]);
                    }
                }
                for s in sets {
                    let code = codec.encode(&s);
                    assert!((code as u128) < codec.limit());
                    assert!(seen.insert(code));
                    assert_eq!(codec.decode(code), s);
                }
            }
        }
    }

    #[test]
    fn rank_examples() {
        let keys: Vec<Word> = [4u64, 10, 11, 300, 301, 5000].into_iter().map(w16).collect();
        let beta = BetaStructure::build(&keys, 7).unwrap();
        let ks = KeyStore::new(&keys);
        for (q, y) in keys.iter().enumerate() {
            assert_eq!(beta.rank(ks, y).unwrap(), q + 1);
        }
        assert_eq!(beta.rank(ks, &w16(3)).unwrap(), 0);
        assert_eq!(beta.rank(ks, &w16(0)).unwrap(), 0);
        assert_eq!(beta.rank(ks, &w16(0xffff)).unwrap(), 6);
    }

    #[test]
    fn beta_matches_oracle_with_rare_fallback() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 1024;
        let keys = random_keys(&mut rng, Width::W256, n);
        let beta = BetaStructure::build(&keys, 99).unwrap();
        let ks = KeyStore::new(&keys);
        let queries = 20_000;
        let mut fallbacks = 0;
        for i in 0..queries {
            let x = if i % 4 == 0 {
                keys[rng.gen_range(0..keys.len())].clone()
            } else {
                random_word(&mut rng, Width::W256)
            };
            let out = beta.query(ks, &x).unwrap();
            assert_eq!(out.rank, rank_oracle(&keys, &x));
            assert!(out.nodes_visited <= beta.height() + 1);
            fallbacks += out.fell_back as usize;
        }
        assert!(fallbacks as f64 / queries as f64 <= 5.0 / n as f64);
    }

    #[test]
    fn tiny_signatures_still_answer_correctly() {
        // One-bit hashes collide constantly; verification plus fallback keeps answers exact.
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let keys = random_keys(&mut rng, Width::W16, 200);
        let mut beta = BetaStructure::build(&keys, 1).unwrap();
        let b = BStructure::build(&keys).unwrap();
        beta.sig_bits = 1;
        beta.hash.out_bits = 1;
        let mut inner = PackedInts::new(beta.len_bits + 1);
        let mut queue = std::collections::VecDeque::from([b.root()]);
        while let Some(at) = queue.pop_front() {
            if let BNode::Inner {
                prefix,
                len,
                left,
                right,
            } = &b.nodes()[at]
            {
                inner.push(((*len as u64) << 1) | beta.hash.hash(prefix, *len));
                queue.push_back(*left);
                queue.push_back(*right);
            }
        }
        beta.inner = inner;
        let ks = KeyStore::new(&keys);
        let mut fallbacks = 0;
        for _ in 0..3000 {
            let x = random_word(&mut rng, Width::W16);
            let out = beta.query(ks, &x).unwrap();
            assert_eq!(out.rank, rank_oracle(&keys, &x));
            fallbacks += out.fell_back as usize;
        }
        assert!(fallbacks > 0);
    }

    #[test]
    fn node_payload_and_bit_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for width in [Width::W16, Width::W256] {
            for n in [100usize, 1024] {
                let keys = random_keys(&mut rng, width, n);
                let n = keys.len();
                let beta = BetaStructure::build(&keys, 5).unwrap();
                let log_n = (n as f64).log2();
                assert_eq!(beta.inner_node_bits(), width.log() as u32 + 2 * bits_for(n as u64));
                let c = beta.index_bits() as f64 / (n as f64 * (width.log() as f64 + log_n));
                assert!(c <= 4.0, "w={width} n={n} c={c:.2}");
                assert!(beta.node_count() <= 3 * n);
            }
        }
    }

    #[test]
    fn query_counts_key_probes() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let keys = random_keys(&mut rng, Width::W256, 500);
        let beta = BetaStructure::build(&keys, 3).unwrap();
        let ks = KeyStore::new(&keys);
        for _ in 0..500 {
            let x = random_word(&mut rng, Width::W256);
            let (out, c) = scoped_counts(|| beta.query(ks, &x).unwrap());
            if !out.fell_back {
                assert!(c.key_probes <= 4);
            }
            assert_eq!(c.index_probes, out.nodes_visited as u64);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(BetaStructure::build(&[], 1).unwrap_err(), BetaError::Empty);
        assert_eq!(
            BetaStructure::build(&[w16(5), w16(2)], 1).unwrap_err(),
            BetaError::Unsorted { at: 1 }
        );
        let keys = [w16(5)];
        let beta = BetaStructure::build(&keys, 1).unwrap();
        assert_eq!(beta.rank(KeyStore::new(&keys), &w16(5)).unwrap(), 1);
        assert_eq!(beta.rank(KeyStore::new(&keys), &w16(4)).unwrap(), 0);
        assert!(beta.rank(KeyStore::new(&keys), &Word::zero(Width::W256)).is_err());
    }
}
