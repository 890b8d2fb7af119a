//! Criterion benchmarks for the sensing pipeline live in `benches/`.
