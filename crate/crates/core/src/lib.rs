//! Succinct successor search over `w`-bit keys on a simulated word RAM.
//!
//! The building blocks, bottom-up:
//!
//! - [`machine`]: instrumented `w`-bit words (AND/OR/XOR/ADD/SUB/shift/compare only).
//! - [`benes`]: Benes-network routing of bits or `log w`-bit blocks inside a word.
//! - [`selector`]: the `(k,k)` bit-selector, extracting `x[I]` in `O(log w)` instructions.
//! - [`gamma`]: γ-nodes, a blind trie over `w/log w` keys searched through the selector.
//! - [`beta`]: β-structures, a hashed prefix-partition tree with verified answers.
//! - [`index`]: chunked successor index and weak prefix search.
//! - [`harness`]: key generation, oracle verification and benchmark reports.

pub mod benes;
pub mod beta;
pub mod gamma;
pub mod harness;
pub mod index;
pub mod machine;
pub mod packed;
pub mod rng;
pub mod selector;

pub use machine::{OpCounts, Width, Word};
