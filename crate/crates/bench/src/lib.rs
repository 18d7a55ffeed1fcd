//! Criterion benchmarks for the `earlystop` crate live in `benches/`.
