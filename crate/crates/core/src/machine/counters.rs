//! Per-thread instruction and probe counters.
//!
//! Every counted word instruction bumps a thread-local [`OpCounts`]. A scope
//! is measured by diffing two snapshots, so nested scopes compose and a
//! scope only ever sees the work done on its own thread.

use std::cell::Cell;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

/// Instruction and memory-probe tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub shifts: u64,
    pub boolean_ops: u64,
    pub arith_ops: u64,
    pub comparisons: u64,
    pub multiplications: u64,
    /// Word reads from index storage (plan words, γ-node words, chunk heads).
    pub index_probes: u64,
    /// Word reads from the sorted key payload.
    pub key_probes: u64,
}

impl OpCounts {
    pub const ZERO: OpCounts = OpCounts {
        shifts: 0,
        boolean_ops: 0,
        arith_ops: 0,
        comparisons: 0,
        multiplications: 0,
        index_probes: 0,
        key_probes: 0,
    };

    /// Executed instructions, excluding probes.
    pub fn operations(&self) -> u64 {
        self.shifts + self.boolean_ops + self.arith_ops + self.comparisons + self.multiplications
    }

    pub fn probes(&self) -> u64 {
        self.index_probes + self.key_probes
    }

    /// Field-wise maximum, used for worst-case columns in reports.
    pub fn max(&self, other: &OpCounts) -> OpCounts {
        OpCounts {
            shifts: self.shifts.max(other.shifts),
            boolean_ops: self.boolean_ops.max(other.boolean_ops),
            arith_ops: self.arith_ops.max(other.arith_ops),
            comparisons: self.comparisons.max(other.comparisons),
            multiplications: self.multiplications.max(other.multiplications),
            index_probes: self.index_probes.max(other.index_probes),
            key_probes: self.key_probes.max(other.key_probes),
        }
    }
}

impl Add for OpCounts {
    type Output = OpCounts;

    fn add(self, o: OpCounts) -> OpCounts {
        OpCounts {
            shifts: self.shifts + o.shifts,
            boolean_ops: self.boolean_ops + o.boolean_ops,
            arith_ops: self.arith_ops + o.arith_ops,
            comparisons: self.comparisons + o.comparisons,
            multiplications: self.multiplications + o.multiplications,
            index_probes: self.index_probes + o.index_probes,
            key_probes: self.key_probes + o.key_probes,
        }
    }
}

impl AddAssign for OpCounts {
    fn add_assign(&mut self, o: OpCounts) {
        *self = *self + o;
    }
}

impl Sub for OpCounts {
    type Output = OpCounts;

    fn sub(self, o: OpCounts) -> OpCounts {
        OpCounts {
            shifts: self.shifts - o.shifts,
            boolean_ops: self.boolean_ops - o.boolean_ops,
            arith_ops: self.arith_ops - o.arith_ops,
            comparisons: self.comparisons - o.comparisons,
            multiplications: self.multiplications - o.multiplications,
            index_probes: self.index_probes - o.index_probes,
            key_probes: self.key_probes - o.key_probes,
        }
    }
}

thread_local! {
    static TOTALS: Cell<OpCounts> = const { Cell::new(OpCounts::ZERO) };
}

#[derive(Clone, Copy)]
pub(crate) enum Counter {
    Shift,
    Boolean,
    Arith,
    Compare,
    Multiply,
    IndexProbe,
    KeyProbe,
}

#[inline]
pub(crate) fn bump(counter: Counter, n: u64) {
    if cfg!(feature = "instrument") {
        TOTALS.with(|t| {
            let mut c = t.get();
            match counter {
                Counter::Shift => c.shifts += n,
                Counter::Boolean => c.boolean_ops += n,
                Counter::Arith => c.arith_ops += n,
                Counter::Compare => c.comparisons += n,
                Counter::Multiply => c.multiplications += n,
                Counter::IndexProbe => c.index_probes += n,
                Counter::KeyProbe => c.key_probes += n,
            }
            t.set(c);
        });
    }
}

/// Running totals for the current thread.
pub fn snapshot() -> OpCounts {
    TOTALS.with(|t| t.get())
}

/// Runs `f` and returns its result with the counts it generated on this thread.
pub fn scoped_counts<T>(f: impl FnOnce() -> T) -> (T, OpCounts) {
    let before = snapshot();
    let out = f();
    (out, snapshot() - before)
}

pub fn record_index_probes(n: u64) {
    bump(Counter::IndexProbe, n);
}

pub fn record_key_probes(n: u64) {
    bump(Counter::KeyProbe, n);
}

pub fn record_multiplications(n: u64) {
    bump(Counter::Multiply, n);
}

/// Register arithmetic on small scalars (field offsets, loop bounds).
pub mod reg {
    use super::{bump, Counter};

    #[inline]
    pub fn add(a: usize, b: usize) -> usize {
        bump(Counter::Arith, 1);
        a + b
    }

    #[inline]
    pub fn sub(a: usize, b: usize) -> usize {
        bump(Counter::Arith, 1);
        a - b
    }

    #[inline]
    pub fn shl(a: usize, s: u32) -> usize {
        bump(Counter::Shift, 1);
        a << s
    }

    #[inline]
    pub fn shr(a: usize, s: u32) -> usize {
        bump(Counter::Shift, 1);
        a >> s
    }

    #[inline]
    pub fn and(a: usize, b: usize) -> usize {
        bump(Counter::Boolean, 1);
        a & b
    }

    #[inline]
    pub fn lt(a: usize, b: usize) -> bool {
        bump(Counter::Compare, 1);
        a < b
    }

    #[inline]
    pub fn ge(a: usize, b: usize) -> bool {
        bump(Counter::Compare, 1);
        a >= b
    }

    #[inline]
    pub fn eq(a: usize, b: usize) -> bool {
        bump(Counter::Compare, 1);
        a == b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_scope_is_zero() {
        let ((), c) = scoped_counts(|| ());
        assert_eq!(c, OpCounts::ZERO);
    }

    #[test]
    fn nested_scopes_sum_to_outer() {
        let ((inner_a, inner_b), outer) = scoped_counts(|| {
            let (_, a) = scoped_counts(|| reg::add(1, 2));
            let (_, b) = scoped_counts(|| {
                reg::shl(1, 3);
                record_key_probes(2);
            });
            (a, b)
        });
        assert_eq!(inner_a + inner_b, outer);
        assert_eq!(outer.arith_ops, 1);
        assert_eq!(outer.shifts, 1);
        assert_eq!(outer.key_probes, 2);
    }

    #[test]
    fn scopes_are_thread_confined() {
        let (_, c) = scoped_counts(|| {
            std::thread::spawn(|| {
                for _ in 0..10 {
                    reg::add(1, 1);
                }
            })
            .join()
            .unwrap();
        });
        assert_eq!(c, OpCounts::ZERO);
    }
}
