//! Fixed-width packed integer arrays and a bit vector with rank support.

/// Bits needed to store values `0..n` (at least 1).
pub fn bits_for(n: u64) -> u32 {
    if n <= 1 {
        1
    } else {
        64 - (n - 1).leading_zeros()
    }
}

/// `len` unsigned integers of `width` bits each, stored back to back.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PackedInts {
    width: u32,
    len: usize,
    data: Vec<u64>,
}

impl PackedInts {
    pub fn new(width: u32) -> PackedInts {
        assert!((1..=64).contains(&width), "field width {width} out of range");
        PackedInts {
            width,
            len: 0,
            data: Vec::new(),
        }
    }

    pub fn from_values(width: u32, values: impl IntoIterator<Item = u64>) -> PackedInts {
        let mut p = PackedInts::new(width);
        for v in values {
            p.push(v);
        }
        p
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Payload size in bits (`len * width`).
    pub fn bits(&self) -> usize {
        self.len * self.width as usize
    }

    fn mask(&self) -> u64 {
        if self.width == 64 {
            u64::MAX
        } else {
            (1 << self.width) - 1
        }
    }

    pub fn push(&mut self, value: u64) {
        assert!(value & !self.mask() == 0, "{value} does not fit in {} bits", self.width);
        let at = self.len * self.width as usize;
        let end = at + self.width as usize;
        while self.data.len() * 64 < end {
            self.data.push(0);
        }
        self.len += 1;
        self.write(at, value);
    }

    fn write(&mut self, at: usize, value: u64) {
        let (word, off) = (at / 64, at % 64);
        let mask = self.mask();
        self.data[word] = (self.data[word] & !(mask << off)) | (value << off);
        let spill = off + self.width as usize;
        if spill > 64 {
            let hi = spill - 64;
            let hi_mask = (1u64 << hi) - 1;
            self.data[word + 1] = (self.data[word + 1] & !hi_mask) | (value >> (64 - off));
        }
    }

    pub fn get(&self, i: usize) -> u64 {
        assert!(i < self.len, "index {i} out of bounds for {} values", self.len);
        let at = i * self.width as usize;
        let (word, off) = (at / 64, at % 64);
        let mut v = self.data[word] >> off;
        if off + self.width as usize > 64 {
            v |= self.data[word + 1] << (64 - off);
        }
        v & self.mask()
    }

    pub fn set(&mut self, i: usize, value: u64) {
        assert!(i < self.len, "index {i} out of bounds for {} values", self.len);
        assert!(value & !self.mask() == 0, "{value} does not fit in {} bits", self.width);
        self.write(i * self.width as usize, value);
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn raw(&self) -> &[u64] {
        &self.data
    }
}

const RANK_BLOCK: usize = 64;

/// Bit vector with `rank1` through a directory of cumulative counts,
/// one entry per 64 bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankBits {
    len: usize,
    words: Vec<u64>,
    directory: PackedInts,
}

impl RankBits {
    pub fn from_bits(bits: impl IntoIterator<Item = bool>) -> RankBits {
        let mut words: Vec<u64> = Vec::new();
        let mut len = 0;
        for b in bits {
            if len % 64 == 0 {
                words.push(0);
            }
            if b {
                words[len / 64] |= 1 << (len % 64);
            }
            len += 1;
        }
        let total: u64 = words.iter().map(|w| w.count_ones() as u64).sum();
        let mut directory = PackedInts::new(bits_for(total + 1));
        let mut acc = 0;
        for w in &words {
            directory.push(acc);
            acc += w.count_ones() as u64;
        }
        RankBits { len, words, directory }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of bounds for {}", self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    /// Ones strictly before position `i`.
    pub fn rank1(&self, i: usize) -> usize {
        assert!(i <= self.len, "rank position {i} past {}", self.len);
        let block = i / RANK_BLOCK;
        if block == self.words.len() {
            return self.directory.iter().last().unwrap_or(0) as usize
                + self.words.last().map_or(0, |w| w.count_ones() as usize);
        }
        let within = self.words[block] & ((1u64 << (i % 64)) - 1);
        self.directory.get(block) as usize + within.count_ones() as usize
    }

    /// Bits including the rank directory.
    pub fn bits(&self) -> usize {
        self.len + self.directory.bits()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bits_for_small_ranges() {
        assert_eq!(bits_for(0), 1);
        assert_eq!(bits_for(1), 1);
        assert_eq!(bits_for(2), 1);
        assert_eq!(bits_for(3), 2);
        assert_eq!(bits_for(1024), 10);
        assert_eq!(bits_for(1025), 11);
    }

    #[test]
    fn packed_round_trip_every_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        for width in 1..=64u32 {
            let mask = if width == 64 { u64::MAX } else { (1 << width) - 1 };
            let values: Vec<u64> = (0..200).map(|_| rng.gen::<u64>() & mask).collect();
            let mut p = PackedInts::from_values(width, values.iter().copied());
            assert_eq!(p.iter().collect::<Vec<_>>(), values);
            assert_eq!(p.bits(), 200 * width as usize);
            let v = rng.gen::<u64>() & mask;
            p.set(77, v);
            assert_eq!(p.get(77), v);
            assert_eq!(p.get(76), values[76]);
            assert_eq!(p.get(78), values[78]);
        }
    }

    #[test]
    #[should_panic(expected = "does not fit")]
    fn oversized_value_rejected() {
        PackedInts::new(3).push(8);
    }

    #[test]
    fn rank_matches_prefix_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for len in [0, 1, 63, 64, 65, 500] {
            let bits: Vec<bool> = (0..len).map(|_| rng.gen()).collect();
            let r = RankBits::from_bits(bits.iter().copied());
            for i in 0..=len {
                assert_eq!(r.rank1(i), bits[..i].iter().filter(|&&b| b).count());
            }
            for (i, &b) in bits.iter().enumerate() {
                assert_eq!(r.get(i), b);
            }
        }
    }
}
