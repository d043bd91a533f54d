//! Criterion benchmarks for `pgk-core`; see `benches/`.
