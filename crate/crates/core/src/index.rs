//! Chunked successor index and weak prefix search.
//!
//! Keys are cut into chunks of `w / log w` consecutive ranks. Each chunk gets
//! a [`GammaNode`]; the first key of every chunk is copied into a heads array
//! held in index storage and searched by plain binary search.

use std::fmt::Write as _;
use std::ops::RangeInclusive;

use thiserror::Error;

use crate::gamma::{GammaError, GammaNode, KeyStore};
use crate::machine::counters::{record_index_probes, reg};
use crate::machine::{Width, Word, WordError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IndexError {
    #[error("key set is empty")]
    Empty,
    #[error("keys must be strictly ascending (position {at})")]
    Unsorted { at: usize },
    #[error("key of width {got}, index width {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("prefix of {len} bits is longer than the word ({width} bits)")]
    PrefixTooLong { len: usize, width: usize },
    #[error("malformed index: {0}")]
    Malformed(String),
    #[error("chunk {chunk}: {source}")]
    Gamma { chunk: usize, source: GammaError },
    #[error(transparent)]
    Word(#[from] WordError),
}

fn malformed(msg: impl Into<String>) -> IndexError {
    IndexError::Malformed(msg.into())
}

const MAGIC_TEXT: &str = "wordidx-index";
const MAGIC_BIN: &[u8; 4] = b"WIDX";
const VERSION: u32 = 1;

/// On-disk encoding of words.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    /// Text: header line, then one hex word per line.
    Hex,
    /// Raw big-endian words after a binary header.
    Bin,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuccessorIndex {
    width: Width,
    chunk: usize,
    keys: Vec<Word>,
    heads: Vec<Word>,
    gammas: Vec<GammaNode>,
}

impl SuccessorIndex {
    pub fn build(keys: &[Word]) -> Result<SuccessorIndex, IndexError> {
        let first = keys.first().ok_or(IndexError::Empty)?;
        let width = first.width();
        if let Some(bad) = keys.iter().find(|k| k.width() != width) {
            return Err(IndexError::WidthMismatch {
                expected: width.bits(),
                got: bad.bits(),
            });
        }
        if let Some(at) = keys.windows(2).position(|p| p[0] >= p[1]) {
            return Err(IndexError::Unsorted { at: at + 1 });
        }
        let chunk = width.blocks();
        let gammas = keys
            .chunks(chunk)
            .enumerate()
            .map(|(c, part)| GammaNode::build(part).map_err(|source| IndexError::Gamma { chunk: c, source }))
            .collect::<Result<Vec<_>, _>>()?;
        let heads = keys.chunks(chunk).map(|part| part[0].clone()).collect();
        Ok(SuccessorIndex {
            width,
            chunk,
            keys: keys.to_vec(),
            heads,
            gammas,
        })
    }

    pub fn width(&self) -> Width {
        self.width
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Keys per chunk, `w / log w`.
    pub fn chunk_size(&self) -> usize {
        self.chunk
    }

    pub fn keys(&self) -> &[Word] {
        &self.keys
    }

    pub fn heads(&self) -> &[Word] {
        &self.heads
    }

    pub fn gammas(&self) -> &[GammaNode] {
        &self.gammas
    }

    /// For fault injection.
    pub fn gamma_mut(&mut self, chunk: usize) -> &mut GammaNode {
        &mut self.gammas[chunk]
    }

    /// Bits beyond the key payload: the heads plus every γ-node word.
    pub fn extra_bits(&self) -> usize {
        self.heads.len() * self.width.bits() + self.gammas.iter().map(|g| g.index_bits()).sum::<usize>()
    }

    fn chunk_keys(&self, c: usize) -> KeyStore<'_> {
        let start = c * self.chunk;
        let end = (start + self.chunk).min(self.keys.len());
        KeyStore::new(&self.keys[start..end])
    }

    fn check(&self, x: &Word) -> Result<(), IndexError> {
        if x.width() != self.width {
            Err(IndexError::WidthMismatch {
                expected: self.width.bits(),
                got: x.bits(),
            })
        } else {
            Ok(())
        }
    }

    /// Chunk of the last head `<= x`, or chunk 0 when `x` precedes every head.
    fn locate(&self, x: &Word) -> usize {
        let (mut lo, mut hi) = (0, self.heads.len());
        while reg::lt(lo, hi) {
            let mid = reg::shr(reg::add(lo, hi), 1);
            record_index_probes(1);
            if self.heads[mid].compare(x).is_le() {
                lo = reg::add(mid, 1);
            } else {
                hi = mid;
            }
        }
        lo.saturating_sub(1)
    }

    /// Smallest key `>= x` with its 1-based global rank.
    pub fn successor(&self, x: &Word) -> Result<Option<(usize, Word)>, IndexError> {
        self.check(x)?;
        Ok(self.successor_unchecked(x))
    }

    pub(crate) fn successor_unchecked(&self, x: &Word) -> Option<(usize, Word)> {
        let c = self.locate(x);
        let offset = c * self.chunk;
        if let Some((r, key)) = self.gammas[c].successor_unchecked(self.chunk_keys(c), x) {
            return Some((reg::add(offset, r), key));
        }
        let next = reg::add(c, 1);
        if reg::lt(next, self.heads.len()) {
            record_index_probes(1);
            return Some((reg::add(offset, self.chunk) + 1, self.heads[next].clone()));
        }
        None
    }

    /// Largest key `<= x` with its 1-based rank.
    pub fn predecessor(&self, x: &Word) -> Result<Option<(usize, Word)>, IndexError> {
        self.check(x)?;
        Ok(self.predecessor_unchecked(x))
    }

    fn predecessor_unchecked(&self, x: &Word) -> Option<(usize, Word)> {
        let rank = match self.successor_unchecked(x) {
            Some((r, key)) if key.compare(x).is_eq() => return Some((r, key)),
            Some((r, _)) => r - 1,
            None => self.keys.len(),
        };
        (rank > 0).then(|| (rank, KeyStore::new(&self.keys).get(rank).clone()))
    }

    /// Number of keys `<= x`.
    pub fn rank(&self, x: &Word) -> Result<usize, IndexError> {
        Ok(self.predecessor(x)?.map_or(0, |(r, _)| r))
    }

    /// Ranks of the keys starting with the first `len` bits of `prefix`, or
    /// `None` when no key does.
    pub fn weak_prefix_search(&self, prefix: &Word, len: usize) -> Result<Option<RangeInclusive<usize>>, IndexError> {
        self.check(prefix)?;
        if len > self.width.bits() {
            return Err(IndexError::PrefixTooLong {
                len,
                width: self.width.bits(),
            });
        }
        let lead = Word::lead_mask(self.width, len);
        let low = prefix & &lead;
        let high = &low | &!&lead;
        let (first, key) = match self.successor_unchecked(&low) {
            Some(hit) => hit,
            None => return Ok(None),
        };
        if !(&(&key ^ &low) & &lead).is_zero() {
            return Ok(None);
        }
        let last = self.predecessor_unchecked(&high).map_or(0, |(r, _)| r);
        Ok((first <= last).then_some(first..=last))
    }

    pub fn to_bytes(&self, format: Format) -> Vec<u8> {
        match format {
            Format::Hex => self.to_hex().into_bytes(),
            Format::Bin => self.to_bin(),
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<SuccessorIndex, IndexError> {
        if bytes.starts_with(MAGIC_BIN) {
            SuccessorIndex::from_bin(bytes)
        } else {
            let text = std::str::from_utf8(bytes).map_err(|_| malformed("neither binary nor text"))?;
            SuccessorIndex::from_hex(text)
        }
    }

    fn to_hex(&self) -> String {
        let mut s = format!(
            "{MAGIC_TEXT} {VERSION} {} {} {}\n",
            self.width.bits(),
            self.keys.len(),
            self.chunk
        );
        for h in &self.heads {
            let _ = writeln!(s, "{}", h.to_hex());
        }
        for g in &self.gammas {
            s.push_str(&g.to_hex_dump());
        }
        for k in &self.keys {
            let _ = writeln!(s, "{}", k.to_hex());
        }
        s
    }

    fn from_hex(text: &str) -> Result<SuccessorIndex, IndexError> {
        let lines: Vec<&str> = text.lines().collect();
        let head: Vec<&str> = lines.first().copied().unwrap_or("").split_whitespace().collect();
        if head.len() != 5 || head[0] != MAGIC_TEXT {
            return Err(malformed("missing index header"));
        }
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| malformed(format!("bad header number {s:?}")))
        };
        if num(head[1])? != VERSION as usize {
            return Err(malformed("unsupported version"));
        }
        let width = Width::from_bits(num(head[2])?)?;
        let (n, chunk) = (num(head[3])?, num(head[4])?);
        check_shape(width, n, chunk)?;
        let chunks = n.div_ceil(chunk);
        let mut at = 1;
        let take_words = |count: usize, at: &mut usize| -> Result<Vec<Word>, IndexError> {
            let part = lines
                .get(*at..*at + count)
                .ok_or_else(|| malformed("truncated index"))?;
            *at += count;
            Ok(part
                .iter()
                .map(|l| Word::from_hex(width, l))
                .collect::<Result<Vec<_>, _>>()?)
        };
        let heads = take_words(chunks, &mut at)?;
        let mut gammas = Vec::with_capacity(chunks);
        for c in 0..chunks {
            let header = lines.get(at).ok_or_else(|| malformed("truncated index"))?;
            let count = header
                .split_whitespace()
                .nth(4)
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| malformed(format!("bad node header for chunk {c}")))?;
            let end = at + 1 + count;
            let dump = lines
                .get(at..end)
                .ok_or_else(|| malformed("truncated index"))?
                .join("\n");
            gammas.push(GammaNode::from_hex_dump(&dump).map_err(|source| IndexError::Gamma { chunk: c, source })?);
            at = end;
        }
        let keys = take_words(n, &mut at)?;
        if lines[at..].iter().any(|l| !l.trim().is_empty()) {
            return Err(malformed("trailing data"));
        }
        SuccessorIndex::assemble(width, chunk, keys, heads, gammas)
    }

    fn to_bin(&self) -> Vec<u8> {
        let mut out = MAGIC_BIN.to_vec();
        out.extend(VERSION.to_be_bytes());
        out.extend((self.width.bits() as u32).to_be_bytes());
        out.extend((self.keys.len() as u64).to_be_bytes());
        out.extend((self.chunk as u32).to_be_bytes());
        for h in &self.heads {
            out.extend(h.to_be_bytes());
        }
        for g in &self.gammas {
            let words = g.to_words();
            out.extend((words.len() as u32).to_be_bytes());
            for w in &words {
                out.extend(w.to_be_bytes());
            }
        }
        for k in &self.keys {
            out.extend(k.to_be_bytes());
        }
        out
    }

    fn from_bin(bytes: &[u8]) -> Result<SuccessorIndex, IndexError> {
        let mut r = Reader {
            bytes,
            at: MAGIC_BIN.len(),
        };
        if r.u32()? != VERSION {
            return Err(malformed("unsupported version"));
        }
        let width = Width::from_bits(r.u32()? as usize)?;
        let n = usize::try_from(r.u64()?).map_err(|_| malformed("key count overflows"))?;
        let chunk = r.u32()? as usize;
        check_shape(width, n, chunk)?;
        let chunks = n.div_ceil(chunk);
        let heads = (0..chunks).map(|_| r.word(width)).collect::<Result<Vec<_>, _>>()?;
        let mut gammas = Vec::with_capacity(chunks);
        for c in 0..chunks {
            let count = r.u32()? as usize;
            if count > 64 {
                return Err(malformed(format!("chunk {c} claims {count} words")));
            }
            let words = (0..count).map(|_| r.word(width)).collect::<Result<Vec<_>, _>>()?;
            gammas.push(GammaNode::from_words(width, &words).map_err(|source| IndexError::Gamma { chunk: c, source })?);
        }
        let keys = (0..n).map(|_| r.word(width)).collect::<Result<Vec<_>, _>>()?;
        if r.at != bytes.len() {
            return Err(malformed("trailing data"));
        }
        SuccessorIndex::assemble(width, chunk, keys, heads, gammas)
    }

    fn assemble(
        width: Width,
        chunk: usize,
        keys: Vec<Word>,
        heads: Vec<Word>,
        gammas: Vec<GammaNode>,
    ) -> Result<SuccessorIndex, IndexError> {
        if let Some(at) = keys.windows(2).position(|p| p[0] >= p[1]) {
            return Err(IndexError::Unsorted { at: at + 1 });
        }
        for (c, part) in keys.chunks(chunk).enumerate() {
            if heads[c] != part[0] {
                return Err(malformed(format!("head {c} is not the chunk minimum")));
            }
            if gammas[c].len() != part.len() {
                return Err(malformed(format!(
                    "chunk {c} node holds {} keys, chunk has {}",
                    gammas[c].len(),
                    part.len()
                )));
            }
        }
        Ok(SuccessorIndex {
            width,
            chunk,
            keys,
            heads,
            gammas,
        })
    }
}

fn check_shape(width: Width, n: usize, chunk: usize) -> Result<(), IndexError> {
    if n == 0 {
        return Err(IndexError::Empty);
    }
    if chunk != width.blocks() {
        return Err(malformed(format!("chunk size {chunk}, expected {}", width.blocks())));
    }
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], IndexError> {
        let part = self
            .bytes
            .get(self.at..self.at + n)
            .ok_or_else(|| malformed("truncated index"))?;
        self.at += n;
        Ok(part)
    }

    fn u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, IndexError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn word(&mut self, width: Width) -> Result<Word, IndexError> {
        let bytes = self.take(width.bits() / 8)?;
        Ok(Word::from_be_bytes(width, bytes).expect("length checked"))
    }
}

/// Ranks of keys starting with the first `len` bits of `prefix`. Uncounted oracle.
pub fn prefix_scan(keys: &[Word], prefix: &Word, len: usize) -> Option<RangeInclusive<usize>> {
    let hits: Vec<usize> = keys
        .iter()
        .enumerate()
        .filter(|(_, k)| k.lcp_raw(prefix) >= len)
        .map(|(i, _)| i + 1)
        .collect();
    Some(*hits.first()?..=*hits.last()?)
}

/// Same answer as [`prefix_scan`] by two binary searches. Uncounted oracle.
pub fn prefix_range(keys: &[Word], prefix: &Word, len: usize) -> Option<RangeInclusive<usize>> {
    let first = keys.partition_point(|k| k < prefix && k.lcp_raw(prefix) < len);
    let end = keys.partition_point(|k| k <= prefix || k.lcp_raw(prefix) >= len);
    (first < end).then(|| first + 1..=end)
}
