//! Acceptance suite for `netchoice`. The checks live in `tests/acceptance.rs`
//! and print one PASS/FAIL line per criterion:
//!
//! ```text
//! cargo test -p netchoice-validation --test acceptance
//! ```
