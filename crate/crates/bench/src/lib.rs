//! Criterion benchmarks for `oqcv`; see `benches/`.
//!
//! `cargo bench -p oqcv-bench`
