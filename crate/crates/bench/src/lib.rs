//! Criterion benchmarks for the feature and fusion kernels; see `benches/`.
