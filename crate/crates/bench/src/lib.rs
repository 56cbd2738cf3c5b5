//! Criterion benchmarks for the thermocert pipelines; see `benches/`.
