//! Fixed-width words with MSB-first bit indexing.
//!
//! Bit 0 is the most significant bit. A left shift moves bits towards
//! index 0, which coincides with an unsigned integer left shift, so the
//! payload is kept as little-endian `u64` limbs of the integer value.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{BitAnd, BitOr, BitXor, Not, Shl, Shr};

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use super::counters::{bump, Counter};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WordError {
    #[error("word width mismatch: {0} vs {1} bits")]
    WidthMismatch(usize, usize),
    #[error("shift amount {amount} exceeds word width {width}")]
    ShiftOutOfRange { amount: usize, width: usize },
    #[error("unsupported word width {0}; expected 16, 256 or 65536")]
    UnsupportedWidth(usize),
    #[error("hex word must have {expected} digits, got {got}")]
    HexLength { expected: usize, got: usize },
    #[error("invalid hex digit {0:?}")]
    HexDigit(char),
}

/// Supported word widths. Each has `log2(w) | w` and a power-of-two block count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Width {
    W16,
    W256,
    W65536,
}

impl Width {
    pub const ALL: [Width; 3] = [Width::W16, Width::W256, Width::W65536];

    pub fn from_bits(bits: usize) -> Result<Width, WordError> {
        match bits {
            16 => Ok(Width::W16),
            256 => Ok(Width::W256),
            65536 => Ok(Width::W65536),
            other => Err(WordError::UnsupportedWidth(other)),
        }
    }

    /// `w`
    pub fn bits(self) -> usize {
        match self {
            Width::W16 => 16,
            Width::W256 => 256,
            Width::W65536 => 65536,
        }
    }

    /// `log2(w)`, which is also the block length.
    pub fn log(self) -> usize {
        match self {
            Width::W16 => 4,
            Width::W256 => 8,
            Width::W65536 => 16,
        }
    }

    /// `log2(log2(w))`
    pub fn log_log(self) -> u32 {
        self.log().trailing_zeros()
    }

    /// `w / log2(w)`: the number of blocks, and the largest selector length.
    pub fn blocks(self) -> usize {
        self.bits() / self.log()
    }

    fn limbs(self) -> usize {
        self.bits().div_ceil(64)
    }

    fn top_mask(self) -> u64 {
        match self.bits() % 64 {
            0 => u64::MAX,
            r => (1u64 << r) - 1,
        }
    }
}

impl fmt::Display for Width {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.bits())
    }
}

/// Binary word instructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    And,
    Or,
    Xor,
    Add,
    Sub,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftDir {
    Left,
    Right,
}

type Limbs = SmallVec<[u64; 4]>;

/// A `w`-bit word. Immutable value; every instruction returns a new word.
///
/// Instructions (the operator impls, [`Word::wrapping_add`], shifts,
/// comparisons) are counted. Constructors and bit accessors are not: they
/// stand for preprocessing work or loading immediates.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Word {
    width: Width,
    limbs: Limbs,
}

impl Word {
    pub fn zero(width: Width) -> Word {
        Word {
            width,
            limbs: SmallVec::from_elem(0, width.limbs()),
        }
    }

    pub fn ones(width: Width) -> Word {
        let mut w = Word {
            width,
            limbs: SmallVec::from_elem(u64::MAX, width.limbs()),
        };
        w.normalize();
        w
    }

    /// Word holding the unsigned integer `v` (truncated to `w` bits).
    pub fn from_u64(width: Width, v: u64) -> Word {
        let mut w = Word::zero(width);
        w.limbs[0] = v;
        w.normalize();
        w
    }

    /// Single one at MSB-first position `i`.
    pub fn unit(width: Width, i: usize) -> Word {
        let mut w = Word::zero(width);
        w.set_bit(i, true);
        w
    }

    /// Ones at positions `0..n`, zeros elsewhere.
    pub fn leading_ones(width: Width, n: usize) -> Word {
        let mut w = Word::zero(width);
        for i in 0..n.min(width.bits()) {
            w.set_bit(i, true);
        }
        w
    }

    /// Builds a word from bits in MSB-first order; missing trailing bits are zero.
    pub fn from_bits<I: IntoIterator<Item = bool>>(width: Width, bits: I) -> Word {
        let mut w = Word::zero(width);
        for (i, b) in bits.into_iter().enumerate() {
            if b {
                w.set_bit(i, true);
            }
        }
        w
    }

    /// Parses a string of `0`/`1` characters, ignoring whitespace and `_`.
    pub fn from_bin_str(width: Width, s: &str) -> Word {
        Word::from_bits(
            width,
            s.chars().filter(|c| !c.is_whitespace() && *c != '_').map(|c| c == '1'),
        )
    }

    pub fn width(&self) -> Width {
        self.width
    }

    pub fn bits(&self) -> usize {
        self.width.bits()
    }

    fn locate(&self, i: usize) -> (usize, u32) {
        assert!(i < self.bits(), "bit index {i} out of range for w={}", self.bits());
        let p = self.bits() - 1 - i;
        (p / 64, (p % 64) as u32)
    }

    /// Reads bit `i` (MSB-first). Uncounted.
    pub fn bit(&self, i: usize) -> bool {
        let (limb, off) = self.locate(i);
        (self.limbs[limb] >> off) & 1 == 1
    }

    pub fn set_bit(&mut self, i: usize, value: bool) {
        let (limb, off) = self.locate(i);
        if value {
            self.limbs[limb] |= 1 << off;
        } else {
            self.limbs[limb] &= !(1 << off);
        }
    }

    pub fn with_bit(mut self, i: usize, value: bool) -> Word {
        self.set_bit(i, value);
        self
    }

    pub fn count_ones(&self) -> usize {
        self.limbs.iter().map(|l| l.count_ones() as usize).sum()
    }

    pub fn is_zero_raw(&self) -> bool {
        self.limbs.iter().all(|&l| l == 0)
    }

    /// MSB-first iterator over all bits.
    pub fn iter_bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.bits()).map(move |i| self.bit(i))
    }

    /// Positions of set bits, ascending.
    pub fn ones_positions(&self) -> Vec<usize> {
        (0..self.bits()).filter(|&i| self.bit(i)).collect()
    }

    /// Low 64 bits of the integer value. Uncounted register read.
    pub fn low_u64(&self) -> u64 {
        self.limbs[0]
    }

    /// Length of the longest common prefix with `other`. Uncounted.
    pub fn lcp_raw(&self, other: &Word) -> usize {
        assert_eq!(self.width, other.width, "lcp of words of different widths");
        let pad = 64 * self.limbs.len() - self.bits();
        for (idx, (a, b)) in self.limbs.iter().zip(other.limbs.iter()).enumerate().rev() {
            let d = a ^ b;
            if d != 0 {
                let from_top = 64 * (self.limbs.len() - 1 - idx) + d.leading_zeros() as usize;
                return from_top - pad;
            }
        }
        self.bits()
    }

    /// Raw limbs, least significant first.
    pub fn limbs(&self) -> &[u64] {
        &self.limbs
    }

    /// Unsigned value of the bits at positions `start..start+len` (`len <= 64`). Uncounted.
    pub fn field_raw(&self, start: usize, len: usize) -> u64 {
        debug_assert!(len <= 64 && start + len <= self.bits());
        let mut v = 0u64;
        for i in start..start + len {
            v = (v << 1) | self.bit(i) as u64;
        }
        v
    }

    /// Writes the low `len` bits of `value` at positions `start..start+len`.
    pub fn set_field(&mut self, start: usize, len: usize, value: u64) {
        assert!(len <= 64 && start + len <= self.bits());
        assert!(
            len == 64 || value >> len == 0,
            "value {value} does not fit in {len} bits"
        );
        for j in 0..len {
            let b = (value >> (len - 1 - j)) & 1 == 1;
            self.set_bit(start + j, b);
        }
    }

    fn normalize(&mut self) {
        let top = self.width.top_mask();
        if let Some(last) = self.limbs.last_mut() {
            *last &= top;
        }
    }

    fn check_width(&self, other: &Word) -> Result<(), WordError> {
        if self.width != other.width {
            Err(WordError::WidthMismatch(self.bits(), other.bits()))
        } else {
            Ok(())
        }
    }

    fn zip_limbs(&self, other: &Word, f: impl Fn(u64, u64) -> u64) -> Word {
        let limbs = self
            .limbs
            .iter()
            .zip(other.limbs.iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Word {
            width: self.width,
            limbs,
        }
    }

    /// Checked binary instruction.
    pub fn binary(&self, kind: BinaryOp, other: &Word) -> Result<Word, WordError> {
        self.check_width(other)?;
        Ok(match kind {
            BinaryOp::And => self & other,
            BinaryOp::Or => self | other,
            BinaryOp::Xor => self ^ other,
            BinaryOp::Add => self.wrapping_add(other),
            BinaryOp::Sub => self.wrapping_sub(other),
        })
    }

    /// Checked shift instruction.
    pub fn shift(&self, amount: usize, dir: ShiftDir) -> Result<Word, WordError> {
        if amount > self.bits() {
            return Err(WordError::ShiftOutOfRange {
                amount,
                width: self.bits(),
            });
        }
        Ok(match dir {
            ShiftDir::Left => self.shl_raw(amount),
            ShiftDir::Right => self.shr_raw(amount),
        }
        .counted(Counter::Shift))
    }

    fn counted(self, c: Counter) -> Word {
        bump(c, 1);
        self
    }

    /// Addition mod `2^w`.
    pub fn wrapping_add(&self, other: &Word) -> Word {
        assert_eq!(self.width, other.width, "word width mismatch");
        let mut out = Word::zero(self.width);
        let mut carry = false;
        for (i, (&a, &b)) in self.limbs.iter().zip(other.limbs.iter()).enumerate() {
            let (s1, c1) = a.overflowing_add(b);
            let (s2, c2) = s1.overflowing_add(carry as u64);
            out.limbs[i] = s2;
            carry = c1 || c2;
        }
        out.normalize();
        out.counted(Counter::Arith)
    }

    /// Subtraction mod `2^w`.
    pub fn wrapping_sub(&self, other: &Word) -> Word {
        assert_eq!(self.width, other.width, "word width mismatch");
        let mut out = Word::zero(self.width);
        let mut borrow = false;
        for (i, (&a, &b)) in self.limbs.iter().zip(other.limbs.iter()).enumerate() {
            let (d1, b1) = a.overflowing_sub(b);
            let (d2, b2) = d1.overflowing_sub(borrow as u64);
            out.limbs[i] = d2;
            borrow = b1 || b2;
        }
        out.normalize();
        out.counted(Counter::Arith)
    }

    /// Unsigned (equivalently: MSB-first lexicographic) comparison. Counted.
    pub fn compare(&self, other: &Word) -> Ordering {
        assert_eq!(self.width, other.width, "word width mismatch");
        bump(Counter::Compare, 1);
        self.cmp_raw(other)
    }

    /// Zero test. Counted as a comparison.
    pub fn is_zero(&self) -> bool {
        bump(Counter::Compare, 1);
        self.is_zero_raw()
    }

    fn cmp_raw(&self, other: &Word) -> Ordering {
        self.limbs.iter().rev().cmp(other.limbs.iter().rev())
    }

    fn shl_raw(&self, n: usize) -> Word {
        let w = self.bits();
        assert!(n <= w, "shift amount {n} exceeds word width {w}");
        let mut out = Word::zero(self.width);
        if n == w {
            return out;
        }
        let (ls, bs) = (n / 64, (n % 64) as u32);
        let len = self.limbs.len();
        for i in (ls..len).rev() {
            let src = i - ls;
            let mut v = self.limbs[src] << bs;
            if bs > 0 && src > 0 {
                v |= self.limbs[src - 1] >> (64 - bs);
            }
            out.limbs[i] = v;
        }
        out.normalize();
        out
    }

    fn shr_raw(&self, n: usize) -> Word {
        let w = self.bits();
        assert!(n <= w, "shift amount {n} exceeds word width {w}");
        let mut out = Word::zero(self.width);
        if n == w {
            return out;
        }
        let (ls, bs) = (n / 64, (n % 64) as u32);
        let len = self.limbs.len();
        for i in 0..len - ls {
            let src = i + ls;
            let mut v = self.limbs[src] >> bs;
            if bs > 0 && src + 1 < len {
                v |= self.limbs[src + 1] << (64 - bs);
            }
            out.limbs[i] = v;
        }
        out
    }

    /// Counted `w`-bit mask with ones at positions `0..n`: `NOT(ones >> n)`.
    pub fn lead_mask(width: Width, n: usize) -> Word {
        !&(&Word::ones(width) >> n)
    }

    /// Unsigned value of bits `start..start+len` via two counted shifts.
    pub fn field(&self, start: usize, len: usize) -> usize {
        if len == 0 {
            return 0;
        }
        let t = &(self << start) >> (self.bits() - len);
        t.low_u64() as usize
    }

    /// Number of leading zero bits, by halving search: `O(log w)` counted instructions.
    pub fn leading_zeros_counted(&self) -> usize {
        let w = self.bits();
        if self.is_zero() {
            return w;
        }
        let mut cur = self.clone();
        let mut zeros = 0;
        let mut span = w / 2;
        while span >= 1 {
            let top = &cur >> (w - span);
            if top.is_zero() {
                zeros += span;
                cur = &cur << span;
            }
            span /= 2;
        }
        zeros
    }

    pub fn to_hex(&self) -> String {
        let digits = self.bits() / 4;
        let mut s = String::with_capacity(digits);
        for d in 0..digits {
            let v = self.field_raw(d * 4, 4);
            s.push(char::from_digit(v as u32, 16).unwrap());
        }
        s
    }

    pub fn from_hex(width: Width, s: &str) -> Result<Word, WordError> {
        let s = s.trim();
        let expected = width.bits() / 4;
        let got = s.chars().count();
        if got != expected {
            return Err(WordError::HexLength { expected, got });
        }
        let mut w = Word::zero(width);
        for (d, c) in s.chars().enumerate() {
            let v = c.to_digit(16).ok_or(WordError::HexDigit(c))?;
            w.set_field(d * 4, 4, v as u64);
        }
        Ok(w)
    }

    /// Big-endian bytes, `w/8` of them.
    pub fn to_be_bytes(&self) -> Vec<u8> {
        self.limbs
            .iter()
            .rev()
            .flat_map(|l| l.to_be_bytes())
            .skip(self.limbs.len() * 8 - self.bits() / 8)
            .collect()
    }

    pub fn from_be_bytes(width: Width, bytes: &[u8]) -> Option<Word> {
        if bytes.len() != width.bits() / 8 {
            return None;
        }
        let mut w = Word::zero(width);
        for (i, &byte) in bytes.iter().enumerate() {
            w.set_field(i * 8, 8, byte as u64);
        }
        Some(w)
    }

    /// Binary digits grouped by `group` characters, for traces.
    pub fn to_bin_string(&self, group: usize) -> String {
        let mut s = String::new();
        for i in 0..self.bits() {
            if group > 0 && i > 0 && i % group == 0 {
                s.push(' ');
            }
            s.push(if self.bit(i) { '1' } else { '0' });
        }
        s
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bits() <= 64 {
            write!(f, "Word({})", self.to_bin_string(self.width.log()))
        } else {
            write!(f, "Word({})", self.to_hex())
        }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Uncounted order, for sorting and oracles. Query paths use [`Word::compare`].
impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.width.cmp(&other.width).then_with(|| self.cmp_raw(other))
    }
}

macro_rules! bool_op {
    ($tr:ident, $f:ident, $op:tt) => {
        impl $tr<&Word> for &Word {
            type Output = Word;

            fn $f(self, rhs: &Word) -> Word {
                assert_eq!(self.width, rhs.width, "word width mismatch");
                self.zip_limbs(rhs, |a, b| a $op b).counted(Counter::Boolean)
            }
        }
    };
}

bool_op!(BitAnd, bitand, &);
bool_op!(BitOr, bitor, |);
bool_op!(BitXor, bitxor, ^);

impl Not for &Word {
    type Output = Word;

    fn not(self) -> Word {
        let mut out = Word {
            width: self.width,
            limbs: self.limbs.iter().map(|l| !l).collect(),
        };
        out.normalize();
        out.counted(Counter::Boolean)
    }
}

impl Shl<usize> for &Word {
    type Output = Word;

    /// Counted logical left shift. Panics if the amount exceeds `w`.
    fn shl(self, n: usize) -> Word {
        self.shl_raw(n).counted(Counter::Shift)
    }
}

impl Shr<usize> for &Word {
    type Output = Word;

    /// Counted logical right shift. Panics if the amount exceeds `w`.
    fn shr(self, n: usize) -> Word {
        self.shr_raw(n).counted(Counter::Shift)
    }
}
