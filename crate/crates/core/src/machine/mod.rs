//! Simulated word RAM: `w`-bit words, the restricted instruction set, and
//! per-thread operation/probe accounting.

pub mod counters;
mod word;

pub use counters::{scoped_counts, OpCounts};
pub use word::{BinaryOp, ShiftDir, Width, Word, WordError};
