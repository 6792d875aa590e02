//! Benchmark-only package; see `benches/bootstrap.rs`.
