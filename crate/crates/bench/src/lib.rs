//! Benchmarks for cdkit kernels live under `benches/`.
