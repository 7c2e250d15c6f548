//! Criterion benchmarks for the index pipeline live in `benches/`.
