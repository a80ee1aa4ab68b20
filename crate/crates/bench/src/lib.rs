//! Criterion benchmarks for the probability oracle and the pipeline live in `benches/`.
