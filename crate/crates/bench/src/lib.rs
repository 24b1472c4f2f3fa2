//! Criterion benchmarks for the policy ledger pipeline live in
//! `benches/pipeline.rs`; this crate carries no library code.
