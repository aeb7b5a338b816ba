//! The `(k,k)` bit-selector.
//!
//! For a fixed index sequence `I` (length `k <= w / log w`, repetitions
//! allowed) preprocessing builds a constant set of words `D(I)`. A query
//! then turns any `x` into `x[I] ‖ 0^(w-k)` in `O(log w)` instructions,
//! without multiplication, by running seven phases over the word:
//!
//! 0. keep only the selected positions (`x AND M`);
//! 1. pack the selected bits of every block to the block's left end;
//! 2. sort the blocks by occupancy, descending (block Benes network);
//! 3. disperse so each distinct bit heads its own block;
//! 4. gather the block heads into positions `0..r`;
//! 5. space the bits apart to make room for duplicates (bit Benes network);
//! 6. duplicate bits by halving shifts;
//! 7. final positioning (bit Benes network).
//!
//! Phases 5 and 6 are omitted when `I` has no repeated index.
//!
//! Preprocessing derives each phase's constants by following every distinct
//! selected bit through the phases, i.e. by tracking the sequences `I_t`
//! with `x_t[I_t[j]] = x_0[I[j]]`.

use std::cmp::Reverse;

use thiserror::Error;

use crate::benes::{BenesError, BenesPlan, BlockLanes, Granularity, Permutation};
use crate::machine::counters::{record_index_probes, reg};
use crate::machine::{Width, Word};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SelectorError {
    #[error("index sequence is empty")]
    Empty,
    #[error("index sequence has {k} entries; at most {max} fit w={width}")]
    TooLong { k: usize, max: usize, width: usize },
    #[error("bit index {index} out of range for w={width}")]
    IndexOutOfRange { index: usize, width: usize },
    #[error("plan built for w={plan}, word has w={word}")]
    WidthMismatch { plan: usize, word: usize },
    #[error("malformed plan words: {0}")]
    Malformed(&'static str),
    #[error(transparent)]
    Benes(#[from] BenesError),
}

/// A validated sequence of bit positions, repetitions allowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSequence {
    entries: Vec<usize>,
    width: Width,
}

impl IndexSequence {
    pub fn new(entries: Vec<usize>, width: Width) -> Result<IndexSequence, SelectorError> {
        if entries.is_empty() {
            return Err(SelectorError::Empty);
        }
        if entries.len() > width.blocks() {
            return Err(SelectorError::TooLong {
                k: entries.len(),
                max: width.blocks(),
                width: width.bits(),
            });
        }
        if let Some(&bad) = entries.iter().find(|&&i| i >= width.bits()) {
            return Err(SelectorError::IndexOutOfRange {
                index: bad,
                width: width.bits(),
            });
        }
        Ok(IndexSequence { entries, width })
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn width(&self) -> Width {
        self.width
    }

    pub fn distinct(&self) -> usize {
        let mut v = self.entries.clone();
        v.sort_unstable();
        v.dedup();
        v.len()
    }

    /// Reference extraction, one bit read per entry.
    pub fn extract_naive(&self, x: &Word) -> Word {
        Word::from_bits(self.width, self.entries.iter().map(|&i| x.bit(i)))
    }
}

/// Snapshots of `x` and of the selected-position mask after phases 0 through 7.
/// A skipped phase repeats the previous snapshot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectorTrace {
    pub x: Vec<Word>,
    pub mask: Vec<Word>,
}

impl SelectorTrace {
    pub fn output(&self) -> &Word {
        self.x.last().expect("trace has eight snapshots")
    }
}

/// `D(I)`: the constant words for one index sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectorPlan {
    width: Width,
    k: usize,
    r: usize,
    /// One at every position appearing in `I`.
    mask: Word,
    /// Blocks sorted by descending occupancy.
    phase2: BenesPlan,
    /// Field `i-1` (of `log w` bits) holds `A_i`, the number of blocks with
    /// occupancy at least 1, .., at least `i` summed.
    offsets: Word,
    /// `k`, `r`, and the phase 5 / phase 7 network sizes, `log w` bits each.
    params: Word,
    phase5: Option<BenesPlan>,
    /// Duplication masks `M_1..M_{log w}`, `w / log w` bits each.
    phase6: Option<Word>,
    phase7: BenesPlan,
}

const PARAM_K: usize = 0;
const PARAM_R: usize = 1;
const PARAM_SIZE5: usize = 2;
const PARAM_SIZE7: usize = 3;

impl SelectorPlan {
    pub fn preprocess(seq: &IndexSequence) -> Result<SelectorPlan, SelectorError> {
        let width = seq.width();
        let lw = width.log();
        let m = width.blocks();
        let entries = seq.entries();
        let k = entries.len();

        let mut mask = Word::zero(width);
        let mut mult = vec![0usize; width.bits()];
        for &v in entries {
            mask.set_bit(v, true);
            mult[v] += 1;
        }
        let distinct: Vec<usize> = (0..width.bits()).filter(|&v| mult[v] > 0).collect();
        let r = distinct.len();

        // Phase 1: within each block the selected bits keep their order.
        let mut occupancy = vec![0usize; m];
        let mut pos = vec![0usize; width.bits()];
        for &v in &distinct {
            let blk = v / lw;
            pos[v] = blk * lw + occupancy[blk];
            occupancy[blk] += 1;
        }

        // Phase 2: stable sort of blocks by occupancy, descending.
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&b| Reverse(occupancy[b]));
        let perm2 = Permutation::from_order(&order)?;
        let phase2 = BenesPlan::build(&perm2, Granularity::Block, width)?;
        for &v in &distinct {
            pos[v] = perm2.target(pos[v] / lw) * lw + pos[v] % lw;
        }
        let sorted_occ: Vec<usize> = order.iter().map(|&b| occupancy[b]).collect();

        // Phase 3: offset o of block t moves to the head of block A_o + t.
        let mut cumulative = vec![0usize; lw + 1];
        for i in 1..=lw {
            let a_i = sorted_occ.iter().filter(|&&c| c >= i).count();
            cumulative[i] = cumulative[i - 1] + a_i;
        }
        debug_assert_eq!(cumulative[lw], r);
        let mut offsets = Word::zero(width);
        for (i, &a) in cumulative[1..].iter().enumerate() {
            offsets.set_field(i * lw, lw, a as u64);
        }
        // `head[v]`: index of the block whose head holds v after phase 3.
        let mut head = vec![0usize; width.bits()];
        for &v in &distinct {
            let (t, o) = (pos[v] / lw, pos[v] % lw);
            head[v] = if o == 0 { t } else { cumulative[o] + t };
        }

        // Phase 4: with q = r / log w, head u < q log w lands at (u mod q) log w + u / q;
        // the remaining heads are copied one by one after position q log w.
        let q = r / lw;
        for &v in &distinct {
            let u = head[v];
            pos[v] = if u < q * lw {
                (u % q) * lw + u / q
            } else {
                q * lw + (u - q * lw)
            };
        }

        let mut params = Word::zero(width);
        params.set_field(PARAM_K * lw, lw, k as u64);
        params.set_field(PARAM_R * lw, lw, r as u64);

        // Positions of each entry's bit after phase 6 (all distinct).
        let mut final_pos = vec![0usize; k];
        let (phase5, phase6) = if r < k {
            // Phase 5: the bit at position p goes to the sum of the multiplicities
            // of the bits before it; unused sources fill the gaps in order.
            let mut at = vec![0usize; r];
            for &v in &distinct {
                at[pos[v]] = v;
            }
            let mut start = vec![0usize; width.bits()];
            let mut targets = Vec::with_capacity(k);
            let mut is_start = vec![false; k];
            let mut acc = 0;
            for &v in &at {
                start[v] = acc;
                is_start[acc] = true;
                targets.push(acc);
                acc += mult[v];
            }
            targets.extend((0..k).filter(|&s| !is_start[s]));
            let perm5 = Permutation::new(targets)?;
            let plan5 = BenesPlan::for_prefix(&perm5, width)?;
            params.set_field(PARAM_SIZE5 * lw, lw, plan5.size() as u64);

            // Phase 6: a copy at p owning `rest` slots splits when rest > Δ_i,
            // handing slots p+Δ_i.. to a new copy at p+Δ_i.
            let mut masks = Word::zero(width);
            let mut copies: Vec<(usize, usize)> = at.iter().map(|&v| (start[v], mult[v])).collect();
            for i in 1..=lw {
                let delta = 1usize << (lw - i);
                let mut spawned = Vec::new();
                for (p, rest) in copies.iter_mut() {
                    if *rest > delta {
                        masks.set_bit((i - 1) * m + *p, true);
                        spawned.push((*p + delta, *rest - delta));
                        *rest = delta;
                    }
                }
                copies.extend(spawned);
            }
            debug_assert!(copies.iter().all(|&(_, rest)| rest == 1));

            let mut next = start.clone();
            for (j, &v) in entries.iter().enumerate() {
                final_pos[j] = next[v];
                next[v] += 1;
            }
            (Some(plan5), Some(masks))
        } else {
            for (j, &v) in entries.iter().enumerate() {
                final_pos[j] = pos[v];
            }
            (None, None)
        };

        // Phase 7: the bit at final_pos[j] moves to j.
        let mut targets7 = vec![0usize; k];
        for (j, &p) in final_pos.iter().enumerate() {
            targets7[p] = j;
        }
        let phase7 = BenesPlan::for_prefix(&Permutation::new(targets7)?, width)?;
        params.set_field(PARAM_SIZE7 * lw, lw, phase7.size() as u64);

        Ok(SelectorPlan {
            width,
            k,
            r,
            mask,
            phase2,
            offsets,
            params,
            phase5,
            phase6,
            phase7,
        })
    }

    /// Rebuilds a plan from the word list produced by [`SelectorPlan::words`].
    pub fn from_words(width: Width, words: &[Word]) -> Result<SelectorPlan, SelectorError> {
        let lw = width.log();
        if words.len() < 11 || words.iter().any(|w| w.width() != width) {
            return Err(SelectorError::Malformed("expected at least 11 words of the plan width"));
        }
        let params = words[6].clone();
        let field = |f: usize| params.field_raw(f * lw, lw) as usize;
        let (k, r) = (field(PARAM_K), field(PARAM_R));
        if k == 0 || r == 0 || r > k || k > width.blocks() {
            return Err(SelectorError::Malformed("bad k/r parameters"));
        }
        let expected = if r < k { 16 } else { 11 };
        if words.len() != expected {
            return Err(SelectorError::Malformed("word count does not match k/r"));
        }
        let four = |at: usize| -> [Word; 4] {
            [
                words[at].clone(),
                words[at + 1].clone(),
                words[at + 2].clone(),
                words[at + 3].clone(),
            ]
        };
        let size_ok = |s: usize| s.is_power_of_two() && s <= width.blocks() && s >= k;
        let size7 = field(PARAM_SIZE7);
        if !size_ok(size7) {
            return Err(SelectorError::Malformed("bad phase 7 size"));
        }
        // A_i: non-decreasing with non-increasing steps, starting at one or more and ending at r.
        let cum: Vec<usize> = (0..lw).map(|i| words[5].field_raw(i * lw, lw) as usize).collect();
        let steps: Vec<usize> = (0..lw)
            .map(|i| cum[i] - if i == 0 { 0 } else { cum[i - 1].min(cum[i]) })
            .collect();
        if cum[0] == 0
            || cum[lw - 1] != r
            || cum.windows(2).any(|p| p[0] > p[1])
            || steps.windows(2).any(|p| p[0] < p[1])
        {
            return Err(SelectorError::Malformed("bad phase 3 offsets"));
        }
        let phase2 = BenesPlan::from_words(width.blocks(), Granularity::Block, width, four(1));
        let (phase5, phase6, p7_at) = if r < k {
            let size5 = field(PARAM_SIZE5);
            if !size_ok(size5) {
                return Err(SelectorError::Malformed("bad phase 5 size"));
            }
            (
                Some(BenesPlan::from_words(size5, Granularity::Bit, width, four(7))),
                Some(words[11].clone()),
                12,
            )
        } else {
            (None, None, 7)
        };
        let phase7 = BenesPlan::from_words(size7, Granularity::Bit, width, four(p7_at));
        Ok(SelectorPlan {
            width,
            k,
            r,
            mask: words[0].clone(),
            phase2,
            offsets: words[5].clone(),
            params,
            phase5,
            phase6,
            phase7,
        })
    }

    /// The stored words in a fixed order:
    /// `M, phase-2 network (4), offsets, params, [phase-5 network (4), phase-6 masks], phase-7 network (4)`.
    pub fn words(&self) -> Vec<&Word> {
        let mut out = vec![&self.mask];
        out.extend(self.phase2.words());
        out.push(&self.offsets);
        out.push(&self.params);
        if let (Some(p5), Some(m6)) = (&self.phase5, &self.phase6) {
            out.extend(p5.words());
            out.push(m6);
        }
        out.extend(self.phase7.words());
        out
    }

    /// Mutable access to the stored words, in [`SelectorPlan::words`] order.
    pub fn words_mut(&mut self) -> Vec<&mut Word> {
        let mut out = vec![&mut self.mask];
        out.extend(self.phase2.words_mut());
        out.push(&mut self.offsets);
        out.push(&mut self.params);
        if let (Some(p5), Some(m6)) = (&mut self.phase5, &mut self.phase6) {
            out.extend(p5.words_mut());
            out.push(m6);
        }
        out.extend(self.phase7.words_mut());
        out
    }

    pub fn word_count(&self) -> usize {
        if self.phase5.is_some() {
            16
        } else {
            11
        }
    }

    pub fn width(&self) -> Width {
        self.width
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn distinct(&self) -> usize {
        self.r
    }

    pub fn mask(&self) -> &Word {
        &self.mask
    }

    pub fn has_duplication(&self) -> bool {
        self.phase5.is_some()
    }

    /// `A_i · log w` for `i = 1..=log w`.
    pub fn phase3_offsets(&self) -> Vec<usize> {
        let lw = self.width.log();
        (0..lw)
            .map(|i| self.offsets.field_raw(i * lw, lw) as usize * lw)
            .collect()
    }

    /// `a_i`: how many blocks hold at least `i` selected bits after phase 2.
    pub fn level_counts(&self) -> Vec<usize> {
        let lw = self.width.log();
        let cum: Vec<usize> = self.phase3_offsets().iter().map(|a| a / lw).collect();
        (0..lw).map(|i| cum[i] - if i == 0 { 0 } else { cum[i - 1] }).collect()
    }

    /// Duplication mask of phase-6 subphase `i` (1-based), as positions.
    pub fn phase6_mask(&self, i: usize) -> Vec<usize> {
        let m = self.width.blocks();
        match &self.phase6 {
            Some(word) => (0..m).filter(|&p| word.bit((i - 1) * m + p)).collect(),
            None => Vec::new(),
        }
    }

    fn check(&self, x: &Word) -> Result<(), SelectorError> {
        if x.width() != self.width {
            Err(SelectorError::WidthMismatch {
                plan: self.width.bits(),
                word: x.bits(),
            })
        } else {
            Ok(())
        }
    }

    /// `x[I] ‖ 0^(w-k)`.
    pub fn select(&self, x: &Word) -> Result<Word, SelectorError> {
        self.check(x)?;
        Ok(self.select_unchecked(x))
    }

    pub(crate) fn select_unchecked(&self, x: &Word) -> Word {
        record_index_probes(self.word_count() as u64);
        let lanes = BlockLanes::new(self.width);
        let mut x = x & &self.mask;
        for phase in 1..=7 {
            if let Some(next) = self.run_phase(phase, &lanes, &x) {
                x = next;
            }
        }
        x
    }

    /// Like [`SelectorPlan::select`], recording `x` and the mask after every phase.
    pub fn select_traced(&self, x: &Word) -> Result<SelectorTrace, SelectorError> {
        self.check(x)?;
        record_index_probes(self.word_count() as u64);
        let lanes = BlockLanes::new(self.width);
        let mut cur_x = x & &self.mask;
        let mut cur_m = self.mask.clone();
        let mut trace = SelectorTrace {
            x: vec![cur_x.clone()],
            mask: vec![cur_m.clone()],
        };
        for phase in 1..=7 {
            if let Some(next) = self.run_phase(phase, &lanes, &cur_x) {
                cur_x = next;
                cur_m = self.run_phase(phase, &lanes, &cur_m).unwrap();
            }
            trace.x.push(cur_x.clone());
            trace.mask.push(cur_m.clone());
        }
        Ok(trace)
    }

    /// Runs one phase; `None` when the phase is compiled out.
    fn run_phase(&self, phase: usize, lanes: &BlockLanes, x: &Word) -> Option<Word> {
        match phase {
            1 => Some(self.pack_blocks(lanes, x, |_| {})),
            2 => Some(self.phase2.apply_blocks_with(lanes, x)),
            3 => Some(self.disperse(lanes, x)),
            4 => Some(self.gather(x)),
            5 => self.phase5.as_ref().map(|p| p.apply_bits_zero_tail(x)),
            6 => self.phase6.as_ref().map(|m| self.duplicate(m, x)),
            7 => Some(self.phase7.apply_bits_zero_tail(x)),
            _ => unreachable!("phases run 1..=7"),
        }
    }

    /// Phase 1. Subphase `i` shifts the length-`(i-1)` suffix of each block
    /// left by one wherever the block's `i`-th largest position is unselected.
    /// That position is still empty, so the shift is an addition of the
    /// moving bits to themselves.
    fn pack_blocks(&self, lanes: &BlockLanes, x: &Word, mut observe: impl FnMut(&Word)) -> Word {
        let lw = self.width.log();
        let unselected = !&self.mask;
        let mut z = lanes.column(lw);
        let mut x = x.clone();
        for i in 2..=lw {
            z = &z << 1;
            let l = &unselected & &z;
            let s = l.wrapping_sub(&(&l >> (i - 1)));
            x = x.wrapping_add(&(&x & &s));
            observe(&x);
        }
        x
    }

    /// Phase 3. Subphase `i` moves offset `i-1` of blocks `0..a_i` to the heads
    /// of blocks `A_{i-1}..A_i`: one right shift by `A_{i-1} log w - (i-1)`.
    /// Blocks past `a_i` hold nothing at offset `i-1`, so the whole column moves.
    fn disperse(&self, lanes: &BlockLanes, x: &Word) -> Word {
        let lw = self.width.log();
        let ll = self.width.log_log();
        let mut col = lanes.block_starts().clone();
        let mut out = x & &col;
        let mut prev = self.offsets.field(0, lw);
        let mut at = 0;
        for i in 2..=lw {
            at = reg::add(at, lw);
            let cum = self.offsets.field(at, lw);
            if reg::eq(cum, prev) {
                // a_i = 0, and every later level is empty too.
                break;
            }
            col = &col >> 1;
            let shift = reg::sub(reg::shl(prev, ll), i - 1);
            out = &out | &(&(x & &col) >> shift);
            prev = cum;
        }
        out
    }

    /// Phase 4. With `q = r / log w`, subphase `i < log w` moves the heads of
    /// blocks `iq..(i+1)q` to offset `i` of blocks `0..q`; the last subphase
    /// copies the leftover heads one at a time.
    fn gather(&self, x: &Word) -> Word {
        let lw = self.width.log();
        let ll = self.width.log_log();
        let r = self.params.field(PARAM_R * lw, lw);
        let q = reg::shr(r, ll);
        let placed = reg::shl(q, ll);
        let lead = Word::lead_mask(self.width, placed);
        let mut out = x & &lead;
        if q > 0 {
            let mut from = 0;
            for i in 1..lw {
                from = reg::add(from, placed);
                out = &out | &(&(&(x << from) & &lead) >> i);
            }
        }
        let leftover = reg::sub(r, placed);
        if leftover > 0 {
            let top = Word::lead_mask(self.width, 1);
            let mut rest = x << reg::shl(placed, ll);
            for t in 0..leftover {
                out = &out | &(&(&rest & &top) >> reg::add(placed, t));
                rest = &rest << lw;
            }
        }
        out
    }

    /// Phase 6. Subphase `i` ORs in a copy, `Δ_i = 2^(log w - i)` to the right,
    /// of every bit flagged in `M_i`.
    fn duplicate(&self, masks: &Word, x: &Word) -> Word {
        let lw = self.width.log();
        let m = self.width.blocks();
        let lead = Word::lead_mask(self.width, m);
        let mut masks = masks.clone();
        let mut x = x.clone();
        for i in 1..=lw {
            let delta = reg::shl(1, (lw - i) as u32);
            let flagged = &masks & &lead;
            x = &x | &(&(&x & &flagged) >> delta);
            masks = &masks << m;
        }
        x
    }
}
