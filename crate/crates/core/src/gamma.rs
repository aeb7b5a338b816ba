//! γ-nodes: successor search over at most `w / log w` sorted keys with a
//! constant number of index words.
//!
//! A [`BlindTrie`] over the keys gives the slow reference search. A
//! [`GammaNode`] replaces the top-down walk by a binary search over key
//! ranks: rank `q` is compared with the query through the edge string
//! `ζ_q` and the bits `x[I_q]` along its root-to-leaf path. Each rank
//! stores only the part of its path below the deepest common ancestor
//! with the ranks already probed before it, so all stored path pieces are
//! disjoint and one bit-selector extracts every needed query bit at once.

use std::cmp::Ordering;
use std::fmt::Write as _;

use thiserror::Error;

use crate::machine::counters::{record_index_probes, record_key_probes, reg};
use crate::machine::{Width, Word, WordError};
use crate::selector::{IndexSequence, SelectorError, SelectorPlan};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GammaError {
    #[error("key set is empty")]
    Empty,
    #[error("{k} keys; a node holds at most {max} at w={width}")]
    TooMany { k: usize, max: usize, width: usize },
    #[error("keys must be strictly ascending (position {at})")]
    Unsorted { at: usize },
    #[error("key of width {got}, node width {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("malformed node: {0}")]
    Malformed(&'static str),
    #[error(transparent)]
    Selector(#[from] SelectorError),
    #[error(transparent)]
    Word(#[from] WordError),
}

fn validate(keys: &[Word]) -> Result<Width, GammaError> {
    let first = keys.first().ok_or(GammaError::Empty)?;
    let width = first.width();
    if keys.len() > width.blocks() {
        return Err(GammaError::TooMany {
            k: keys.len(),
            max: width.blocks(),
            width: width.bits(),
        });
    }
    if let Some(bad) = keys.iter().find(|k| k.width() != width) {
        return Err(GammaError::WidthMismatch {
            expected: width.bits(),
            got: bad.bits(),
        });
    }
    if let Some(at) = keys.windows(2).position(|p| p[0] >= p[1]) {
        return Err(GammaError::Unsorted { at: at + 1 });
    }
    Ok(width)
}

/// Sorted key payload. Every read is one key probe.
#[derive(Debug, Clone, Copy)]
pub struct KeyStore<'a> {
    keys: &'a [Word],
}

impl<'a> KeyStore<'a> {
    pub fn new(keys: &'a [Word]) -> KeyStore<'a> {
        KeyStore { keys }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Key of 1-based `rank`.
    pub fn get(&self, rank: usize) -> &'a Word {
        record_key_probes(1);
        &self.keys[rank - 1]
    }

    pub fn as_slice(&self) -> &'a [Word] {
        self.keys
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrieNode {
    /// `bit` is the length of the longest common prefix of the subtree's keys.
    Internal { bit: usize, left: usize, right: usize },
    /// 1-based rank of the key.
    Leaf { rank: usize },
}

/// Compacted binary trie storing only branching bit positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlindTrie {
    width: Width,
    nodes: Vec<TrieNode>,
    root: usize,
    k: usize,
}

impl BlindTrie {
    pub fn build(keys: &[Word]) -> Result<BlindTrie, GammaError> {
        let width = validate(keys)?;
        let mut nodes = Vec::with_capacity(2 * keys.len());
        let root = Self::build_range(keys, 0, keys.len() - 1, &mut nodes);
        Ok(BlindTrie {
            width,
            nodes,
            root,
            k: keys.len(),
        })
    }

    fn build_range(keys: &[Word], a: usize, b: usize, nodes: &mut Vec<TrieNode>) -> usize {
        if a == b {
            nodes.push(TrieNode::Leaf { rank: a + 1 });
            return nodes.len() - 1;
        }
        let bit = keys[a].lcp_raw(&keys[b]);
        let split = a + keys[a..=b].partition_point(|y| !y.bit(bit));
        let left = Self::build_range(keys, a, split - 1, nodes);
        let right = Self::build_range(keys, split, b, nodes);
        nodes.push(TrieNode::Internal { bit, left, right });
        nodes.len() - 1
    }

    pub fn width(&self) -> Width {
        self.width
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    pub fn root(&self) -> &TrieNode {
        &self.nodes[self.root]
    }

    pub fn nodes(&self) -> &[TrieNode] {
        &self.nodes
    }

    /// Top-down descent, one node per step. Uncounted reference search.
    pub fn blind_search_slow(&self, x: &Word) -> usize {
        let mut at = self.root;
        loop {
            match self.nodes[at] {
                TrieNode::Leaf { rank } => return rank,
                TrieNode::Internal { bit, left, right } => {
                    at = if x.bit(bit) { right } else { left };
                }
            }
        }
    }

    /// `(I_q, ζ_q)` for every rank: branching bits and turn directions
    /// (`true` = right) along the root-to-leaf path.
    pub fn paths(&self) -> Vec<(Vec<usize>, Vec<bool>)> {
        let mut out = vec![(Vec::new(), Vec::new()); self.k];
        let mut stack = vec![(self.root, Vec::new(), Vec::new())];
        while let Some((at, bits, turns)) = stack.pop() {
            match self.nodes[at] {
                TrieNode::Leaf { rank } => out[rank - 1] = (bits, turns),
                TrieNode::Internal { bit, left, right } => {
                    for (child, dir) in [(left, false), (right, true)] {
                        let mut b = bits.clone();
                        let mut t: Vec<bool> = turns.clone();
                        b.push(bit);
                        t.push(dir);
                        stack.push((child, b, t));
                    }
                }
            }
        }
        out
    }
}

/// Per-rank binary-search anchors: the nearest ranks probed before `q` on
/// its left and right, under the midpoint rule `q = (lo + hi) / 2`.
fn search_anchors(k: usize) -> Vec<(Option<usize>, Option<usize>)> {
    fn walk(lo: usize, hi: usize, l: Option<usize>, r: Option<usize>, out: &mut [(Option<usize>, Option<usize>)]) {
        if lo > hi {
            return;
        }
        let q = (lo + hi) / 2;
        out[q - 1] = (l, r);
        if q > lo {
            walk(lo, q - 1, l, Some(q), out);
        }
        walk(q + 1, hi, Some(q), r, out);
    }
    let mut out = vec![(None, None); k];
    walk(1, k, None, None, &mut out);
    out
}

/// Number of internal nodes shared by two distinct root-to-leaf paths.
fn shared_depth(a: &[bool], b: &[bool]) -> usize {
    a.iter()
        .zip(b)
        .position(|(x, y)| x != y)
        .expect("distinct leaves diverge")
        + 1
}

/// Result of one fast blind search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOutcome {
    pub rank: usize,
    pub iterations: usize,
}

const HEADER_K: usize = 0;
const HEADER_TOTAL: usize = 1;
const DUMP_MAGIC: &str = "gamma";
const DUMP_VERSION: u32 = 1;

/// The constant words of one γ-node. Keys are held by the caller.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GammaNode {
    width: Width,
    k: usize,
    /// Length of the concatenated stored path pieces.
    total: usize,
    header: Word,
    /// Field `q-1`: internal nodes shared with the left anchor of `q` (0 if none).
    jl: Word,
    /// Same for the right anchor.
    jr: Word,
    /// Field `q-1`: start of rank `q`'s piece in `Z` and in the selected bits.
    starts: Word,
    /// Concatenated turn strings below each rank's deepest anchor ancestor.
    z: Word,
    plan: Option<SelectorPlan>,
}

impl GammaNode {
    pub fn build(keys: &[Word]) -> Result<GammaNode, GammaError> {
        let trie = BlindTrie::build(keys)?;
        let width = trie.width();
        let lw = width.log();
        let k = keys.len();
        let paths = trie.paths();
        let anchors = search_anchors(k);

        let mut jl = Word::zero(width);
        let mut jr = Word::zero(width);
        let mut starts = Word::zero(width);
        let mut z = Word::zero(width);
        let mut indices = Vec::new();
        for q in 0..k {
            let (l, r) = anchors[q];
            let depth = |a: Option<usize>| a.map_or(0, |a| shared_depth(&paths[q].1, &paths[a - 1].1));
            let (dl, dr) = (depth(l), depth(r));
            jl.set_field(q * lw, lw, dl as u64);
            jr.set_field(q * lw, lw, dr as u64);
            starts.set_field(q * lw, lw, indices.len() as u64);
            let c = dl.max(dr);
            for (&bit, &turn) in paths[q].0[c..].iter().zip(&paths[q].1[c..]) {
                z.set_bit(indices.len(), turn);
                indices.push(bit);
            }
        }
        let total = indices.len();
        debug_assert!(total < k.max(2));
        let plan = if indices.is_empty() {
            None
        } else {
            Some(SelectorPlan::preprocess(&IndexSequence::new(indices, width)?)?)
        };
        let mut header = Word::zero(width);
        header.set_field(HEADER_K * lw, lw, k as u64);
        header.set_field(HEADER_TOTAL * lw, lw, total as u64);
        Ok(GammaNode {
            width,
            k,
            total,
            header,
            jl,
            jr,
            starts,
            z,
            plan,
        })
    }

    pub fn width(&self) -> Width {
        self.width
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    /// Total length of the stored path pieces (the selector's `k`).
    pub fn piece_total(&self) -> usize {
        self.total
    }

    pub fn plan(&self) -> Option<&SelectorPlan> {
        self.plan.as_ref()
    }

    pub fn plan_mut(&mut self) -> Option<&mut SelectorPlan> {
        self.plan.as_mut()
    }

    /// Mutable access to the turn-string word, for fault injection.
    pub fn z_mut(&mut self) -> &mut Word {
        &mut self.z
    }

    pub fn word_count(&self) -> usize {
        5 + self.plan.as_ref().map_or(0, |p| p.word_count())
    }

    pub fn index_bits(&self) -> usize {
        self.word_count() * self.width.bits()
    }

    /// `header, JL, JR, S, Z`, then the selector plan words.
    pub fn to_words(&self) -> Vec<Word> {
        let mut out = vec![
            self.header.clone(),
            self.jl.clone(),
            self.jr.clone(),
            self.starts.clone(),
            self.z.clone(),
        ];
        if let Some(p) = &self.plan {
            out.extend(p.words().into_iter().cloned());
        }
        out
    }

    pub fn from_words(width: Width, words: &[Word]) -> Result<GammaNode, GammaError> {
        let lw = width.log();
        if words.len() < 5 {
            return Err(GammaError::Malformed("fewer than five words"));
        }
        if let Some(bad) = words.iter().find(|w| w.width() != width) {
            return Err(GammaError::WidthMismatch {
                expected: width.bits(),
                got: bad.bits(),
            });
        }
        let header = words[0].clone();
        let k = header.field_raw(HEADER_K * lw, lw) as usize;
        let total = header.field_raw(HEADER_TOTAL * lw, lw) as usize;
        if k == 0 || k > width.blocks() {
            return Err(GammaError::Malformed("key count out of range"));
        }
        if total >= k.max(2) {
            return Err(GammaError::Malformed("path pieces longer than the trie"));
        }
        let (jl, jr, starts) = (words[1].clone(), words[2].clone(), words[3].clone());
        let mut prev = 0;
        for q in 0..k {
            let s = starts.field_raw(q * lw, lw) as usize;
            if s < prev || s > total {
                return Err(GammaError::Malformed("piece starts not ascending"));
            }
            prev = s;
            for j in [&jl, &jr] {
                if j.field_raw(q * lw, lw) as usize >= k {
                    return Err(GammaError::Malformed("anchor depth exceeds trie height"));
                }
            }
        }
        let plan = if total == 0 {
            if words.len() != 5 {
                return Err(GammaError::Malformed("unexpected selector words"));
            }
            None
        } else {
            let plan = SelectorPlan::from_words(width, &words[5..])?;
            if plan.k() != total {
                return Err(GammaError::Malformed("selector length differs from piece total"));
            }
            Some(plan)
        };
        Ok(GammaNode {
            width,
            k,
            total,
            header,
            jl,
            jr,
            starts,
            z: words[4].clone(),
            plan,
        })
    }

    /// Versioned text dump: a header line, then one hex word per line.
    pub fn to_hex_dump(&self) -> String {
        let words = self.to_words();
        let mut s = format!(
            "{DUMP_MAGIC} {DUMP_VERSION} {} {} {}\n",
            self.width.bits(),
            self.k,
            words.len()
        );
        for w in &words {
            let _ = writeln!(s, "{}", w.to_hex());
        }
        s
    }

    pub fn from_hex_dump(text: &str) -> Result<GammaNode, GammaError> {
        let mut lines = text.lines();
        let head: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
        if head.len() != 5 || head[0] != DUMP_MAGIC {
            return Err(GammaError::Malformed("missing dump header"));
        }
        if head[1] != DUMP_VERSION.to_string() {
            return Err(GammaError::Malformed("unsupported dump version"));
        }
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| GammaError::Malformed("bad header number"))
        };
        let width = Width::from_bits(num(head[2])?)?;
        let count = num(head[4])?;
        let words = lines
            .take(count)
            .map(|l| Word::from_hex(width, l))
            .collect::<Result<Vec<_>, _>>()?;
        if words.len() != count {
            return Err(GammaError::Malformed("truncated dump"));
        }
        let node = GammaNode::from_words(width, &words)?;
        if node.k != num(head[3])? {
            return Err(GammaError::Malformed("header key count disagrees"));
        }
        Ok(node)
    }

    fn check(&self, x: &Word) -> Result<(), GammaError> {
        if x.width() != self.width {
            Err(GammaError::WidthMismatch {
                expected: self.width.bits(),
                got: x.bits(),
            })
        } else {
            Ok(())
        }
    }

    /// Rank of `bkey(x)`, the key sharing the longest prefix with `x`.
    pub fn blind_search_fast(&self, x: &Word) -> Result<usize, GammaError> {
        Ok(self.search(x)?.rank)
    }

    pub fn search(&self, x: &Word) -> Result<SearchOutcome, GammaError> {
        self.check(x)?;
        Ok(self.search_unchecked(x))
    }

    pub(crate) fn search_unchecked(&self, x: &Word) -> SearchOutcome {
        let plan = match &self.plan {
            Some(p) => p,
            None => return SearchOutcome { rank: 1, iterations: 0 },
        };
        record_index_probes(5);
        let lw = self.width.log();
        let ll = self.width.log_log();
        let k = self.header.field(HEADER_K, lw);
        let total = self.header.field(lw, lw);
        let selected = plan.select_unchecked(x);
        let top = Word::lead_mask(self.width, 1);

        let (mut lo, mut hi) = (1, k);
        let mut left: Option<(Word, Word)> = None;
        let mut right: Option<(Word, Word)> = None;
        let mut iterations = 0;
        let mut q = reg::shr(reg::add(lo, hi), 1);
        while reg::ge(hi, lo) {
            iterations += 1;
            q = reg::shr(reg::add(lo, hi), 1);
            let at = reg::shl(reg::sub(q, 1), ll);
            let dl = self.jl.field(at, lw);
            let dr = self.jr.field(at, lw);
            let start = self.starts.field(at, lw);
            let end = if reg::eq(q, k) {
                total
            } else {
                self.starts.field(reg::add(at, lw), lw)
            };
            let len = reg::sub(end, start);
            let piece = Word::lead_mask(self.width, len);
            let x_tail = &(&selected << start) & &piece;
            let z_tail = &(&self.z << start) & &piece;

            let (depth, anchor) = if reg::ge(dl, dr) { (dl, &left) } else { (dr, &right) };
            let (xq, zq) = match anchor {
                Some((ax, az)) if depth > 0 => {
                    let shared = Word::lead_mask(self.width, depth);
                    let xq = &(ax & &shared) | &(&x_tail >> depth);
                    // The paths split at the shared depth, so the last shared turn flips.
                    let turn = &top >> reg::sub(depth, 1);
                    let zq = &(&(az & &shared) ^ &turn) | &(&z_tail >> depth);
                    (xq, zq)
                }
                _ => (x_tail, z_tail),
            };
            match zq.compare(&xq) {
                Ordering::Equal => return SearchOutcome { rank: q, iterations },
                Ordering::Less => {
                    lo = reg::add(q, 1);
                    left = Some((xq, zq));
                }
                Ordering::Greater => {
                    if reg::eq(q, lo) {
                        break;
                    }
                    hi = reg::sub(q, 1);
                    right = Some((xq, zq));
                }
            }
        }
        // Only reachable with corrupted node words.
        SearchOutcome {
            rank: q.clamp(1, self.k),
            iterations,
        }
    }

    /// Smallest key `>= x` with its 1-based rank, or `None` past the maximum.
    pub fn successor(&self, keys: KeyStore<'_>, x: &Word) -> Result<Option<(usize, Word)>, GammaError> {
        self.check(x)?;
        if keys.len() != self.k {
            return Err(GammaError::Malformed("key store size differs from node"));
        }
        Ok(self.successor_unchecked(keys, x))
    }

    pub(crate) fn successor_unchecked(&self, keys: KeyStore<'_>, x: &Word) -> Option<(usize, Word)> {
        let w = self.width.bits();
        let first = self.search_unchecked(x).rank;
        let bkey = keys.get(first);
        let lcp = (x ^ bkey).leading_zeros_counted();
        if reg::eq(lcp, w) {
            return Some((first, bkey.clone()));
        }
        // No key extends the common prefix by x's next bit, so every key under
        // that prefix lies on one side of x; pad with that bit and search again.
        let next_one = !(&(x << lcp) >> (w - 1)).is_zero();
        let prefix = Word::lead_mask(self.width, lcp);
        let z = if next_one { x | &!&prefix } else { x & &prefix };
        let edge = self.search_unchecked(&z).rank;
        let rank = if next_one { reg::add(edge, 1) } else { edge };
        if reg::lt(self.k, rank) {
            return None;
        }
        Some((rank, keys.get(rank).clone()))
    }
}

/// Successor by binary search over the sorted keys. Uncounted oracle.
pub fn successor_oracle(keys: &[Word], x: &Word) -> Option<(usize, Word)> {
    let i = keys.partition_point(|y| y < x);
    keys.get(i).map(|y| (i + 1, y.clone()))
}

/// Rank of a key with the longest common prefix with `x`. Uncounted oracle.
pub fn max_lcp(keys: &[Word], x: &Word) -> usize {
    keys.iter().map(|y| y.lcp_raw(x)).max().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::scoped_counts;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_key(rng: &mut impl Rng, width: Width) -> Word {
        Word::from_bits(width, (0..width.bits()).map(|_| rng.gen::<bool>()))
    }

    /// Sorted distinct keys, sometimes sharing long prefixes.
    fn random_keys(rng: &mut impl Rng, width: Width, k: usize) -> Vec<Word> {
        let base = random_key(rng, width);
        let mut keys = Vec::new();
        while keys.len() < k {
            let mut y = random_key(rng, width);
            if rng.gen_bool(0.5) {
                let keep = rng.gen_range(0..width.bits());
                for i in 0..keep {
                    y.set_bit(i, base.bit(i));
                }
            }
            keys.push(y);
            keys.sort();
            keys.dedup();
        }
        keys
    }

    /// Queries near the keys as well as uniform ones.
    fn random_query(rng: &mut impl Rng, keys: &[Word]) -> Word {
        let width = keys[0].width();
        let mut x = random_key(rng, width);
        if rng.gen_bool(0.5) {
            let y = &keys[rng.gen_range(0..keys.len())];
            let keep = rng.gen_range(0..=width.bits());
            for i in 0..keep {
                x.set_bit(i, y.bit(i));
            }
        }
        x
    }

    fn w16(v: u64) -> Word {
        Word::from_u64(Width::W16, v)
    }

    #[test]
    fn rejects_bad_key_sets() {
        assert_eq!(BlindTrie::build(&[]), Err(GammaError::Empty));
        assert_eq!(BlindTrie::build(&[w16(3), w16(3)]), Err(GammaError::Unsorted { at: 1 }));
        assert_eq!(BlindTrie::build(&[w16(4), w16(3)]), Err(GammaError::Unsorted { at: 1 }));
        let five: Vec<Word> = (0..5).map(w16).collect();
        assert!(matches!(GammaNode::build(&five), Err(GammaError::TooMany { k: 5, .. })));
        let mixed = [w16(1), Word::from_u64(Width::W256, 2)];
        assert!(matches!(
            BlindTrie::build(&mixed),
            Err(GammaError::WidthMismatch { .. })
        ));
    }

    #[test]
    fn two_keys_differing_at_the_top() {
        let t = BlindTrie::build(&[w16(0x0000), w16(0x8000)]).unwrap();
        match *t.root() {
            TrieNode::Internal { bit, left, right } => {
                assert_eq!(bit, 0);
                assert_eq!(t.nodes()[left], TrieNode::Leaf { rank: 1 });
                assert_eq!(t.nodes()[right], TrieNode::Leaf { rank: 2 });
            }
            leaf => panic!("expected an internal root, got {leaf:?}"),
        }
        let g = GammaNode::build(&[w16(0x0000), w16(0x8000)]).unwrap();
        assert!(g.piece_total() <= 2);
    }

    #[test]
    fn single_key() {
        let t = BlindTrie::build(&[w16(77)]).unwrap();
        assert_eq!(*t.root(), TrieNode::Leaf { rank: 1 });
        let g = GammaNode::build(&[w16(77)]).unwrap();
        assert_eq!(g.piece_total(), 0);
        assert!(g.plan().is_none());
        assert_eq!(g.search(&w16(5)).unwrap(), SearchOutcome { rank: 1, iterations: 0 });
        let keys = [w16(77)];
        let ks = KeyStore::new(&keys);
        assert_eq!(g.successor(ks, &w16(77)).unwrap(), Some((1, w16(77))));
        assert_eq!(g.successor(ks, &w16(0)).unwrap(), Some((1, w16(77))));
        assert_eq!(g.successor(ks, &w16(78)).unwrap(), None);
    }

    #[test]
    fn trie_structure_matches_pairwise_lcp() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..300 {
            let keys = random_keys(&mut rng, Width::W16, 4);
            let t = BlindTrie::build(&keys).unwrap();
            let mut leaves = Vec::new();
            fn walk(t: &BlindTrie, at: usize, keys: &[Word], leaves: &mut Vec<usize>) -> (usize, usize) {
                match t.nodes()[at] {
                    TrieNode::Leaf { rank } => {
                        leaves.push(rank);
                        (rank, rank)
                    }
                    TrieNode::Internal { bit, left, right } => {
                        let (a, m) = walk(t, left, keys, leaves);
                        let (m2, b) = walk(t, right, keys, leaves);
                        assert_eq!(m + 1, m2);
                        assert_eq!(bit, keys[a - 1].lcp_raw(&keys[b - 1]));
                        assert!((a..=m).all(|r| !keys[r - 1].bit(bit)));
                        assert!((m2..=b).all(|r| keys[r - 1].bit(bit)));
                        (a, b)
                    }
                }
            }
            walk(&t, t.root, &keys, &mut leaves);
            assert_eq!(leaves, vec![1, 2, 3, 4]);
            for (bits, _) in t.paths() {
                assert!(bits.windows(2).all(|p| p[0] < p[1]));
            }
        }
    }

    #[test]
    fn slow_search_finds_exact_keys_and_max_lcp() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for width in [Width::W16, Width::W256] {
            for _ in 0..300 {
                let k = rng.gen_range(1..=width.blocks());
                let keys = random_keys(&mut rng, width, k);
                let t = BlindTrie::build(&keys).unwrap();
                for (q, y) in keys.iter().enumerate() {
                    assert_eq!(t.blind_search_slow(y), q + 1);
                }
                let x = random_query(&mut rng, &keys);
                let r = t.blind_search_slow(&x);
                assert_eq!(keys[r - 1].lcp_raw(&x), max_lcp(&keys, &x));
            }
        }
    }

    #[test]
    fn rank_order_trichotomy() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..300 {
            let k = rng.gen_range(1..=4);
            let keys = random_keys(&mut rng, Width::W16, k);
            let t = BlindTrie::build(&keys).unwrap();
            let paths = t.paths();
            for _ in 0..8 {
                let x = random_query(&mut rng, &keys);
                let b = t.blind_search_slow(&x);
                for (q, (bits, turns)) in paths.iter().enumerate() {
                    let xq: Vec<bool> = bits.iter().map(|&i| x.bit(i)).collect();
                    assert_eq!(turns.cmp(&xq), (q + 1).cmp(&b));
                }
            }
        }
    }

    #[test]
    fn anchors_follow_the_midpoint_rule() {
        let a = search_anchors(7);
        assert_eq!(a[3], (None, None));
        assert_eq!(a[1], (None, Some(4)));
        assert_eq!(a[5], (Some(4), None));
        assert_eq!(a[4], (Some(4), Some(6)));
        assert_eq!(a[0], (None, Some(2)));
        assert_eq!(a[2], (Some(2), Some(4)));
    }

    #[test]
    fn pieces_are_disjoint_and_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for width in [Width::W16, Width::W256] {
            for _ in 0..200 {
                let k = rng.gen_range(1..=width.blocks());
                let keys = random_keys(&mut rng, width, k);
                let g = GammaNode::build(&keys).unwrap();
                assert!(g.piece_total() < k.max(2));
                assert!(g.word_count() <= 24);
                assert!(g.index_bits() <= 24 * width.bits());
            }
        }
    }

    #[test]
    fn fast_search_matches_slow_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for (width, sets) in [(Width::W16, 1500), (Width::W256, 400)] {
            for _ in 0..sets {
                let k = rng.gen_range(1..=width.blocks());
                let keys = random_keys(&mut rng, width, k);
                let t = BlindTrie::build(&keys).unwrap();
                let g = GammaNode::build(&keys).unwrap();
                let bound = (k as f64).log2().ceil() as usize + 1;
                for (q, y) in keys.iter().enumerate() {
                    assert_eq!(g.blind_search_fast(y).unwrap(), q + 1);
                }
                for _ in 0..5 {
                    let x = random_query(&mut rng, &keys);
                    let (out, c) = scoped_counts(|| g.search(&x).unwrap());
                    assert_eq!(out.rank, t.blind_search_slow(&x));
                    assert!(out.iterations <= bound, "{} > {bound}", out.iterations);
                    assert_eq!(c.multiplications, 0);
                    assert_eq!(c.key_probes, 0);
                }
            }
        }
    }

    #[test]
    fn successor_matches_sorted_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        for (width, sets) in [(Width::W16, 1500), (Width::W256, 400)] {
            for _ in 0..sets {
                let k = rng.gen_range(1..=width.blocks());
                let keys = random_keys(&mut rng, width, k);
                let g = GammaNode::build(&keys).unwrap();
                let ks = KeyStore::new(&keys);
                let mut queries: Vec<Word> = (0..5).map(|_| random_query(&mut rng, &keys)).collect();
                let one = Word::from_u64(width, 1);
                for y in &keys {
                    queries.push(y.clone());
                    queries.push(y.wrapping_add(&one));
                    queries.push(y.wrapping_sub(&one));
                }
                for x in &queries {
                    let (got, c) = scoped_counts(|| g.successor(ks, x).unwrap());
                    assert_eq!(got, successor_oracle(&keys, x), "x={x}");
                    assert!(c.key_probes <= 3);
                    assert_eq!(c.multiplications, 0);
                }
            }
        }
    }

    #[test]
    fn successor_edges() {
        let keys: Vec<Word> = [3u64, 40, 41, 900].into_iter().map(w16).collect();
        let g = GammaNode::build(&keys).unwrap();
        let ks = KeyStore::new(&keys);
        assert_eq!(g.successor(ks, &w16(3)).unwrap(), Some((1, w16(3))));
        assert_eq!(g.successor(ks, &w16(0)).unwrap(), Some((1, w16(3))));
        assert_eq!(g.successor(ks, &w16(901)).unwrap(), None);
        assert_eq!(g.successor(ks, &w16(42)).unwrap(), Some((4, w16(900))));
    }

    #[test]
    fn words_and_dump_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        for width in [Width::W16, Width::W256] {
            for _ in 0..50 {
                let k = rng.gen_range(1..=width.blocks());
                let keys = random_keys(&mut rng, width, k);
                let g = GammaNode::build(&keys).unwrap();
                assert_eq!(GammaNode::from_words(width, &g.to_words()).unwrap(), g);
                assert_eq!(GammaNode::from_hex_dump(&g.to_hex_dump()).unwrap(), g);
            }
        }
        assert!(GammaNode::from_hex_dump("gamma 2 16 1 5\n").is_err());
        assert!(GammaNode::from_hex_dump("").is_err());
    }

    #[test]
    fn corrupted_words_never_panic() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let keys = random_keys(&mut rng, Width::W256, 32);
        let g = GammaNode::build(&keys).unwrap();
        let words = g.to_words();
        for _ in 0..200 {
            let mut bad = words.clone();
            let i = rng.gen_range(0..bad.len());
            let pos = rng.gen_range(0..Width::W256.bits());
            let flipped = !bad[i].bit(pos);
            bad[i].set_bit(pos, flipped);
            if let Ok(node) = GammaNode::from_words(Width::W256, &bad) {
                let x = random_query(&mut rng, &keys);
                let r = node.blind_search_fast(&x).unwrap();
                assert!((1..=node.len()).contains(&r));
            }
        }
    }
}
