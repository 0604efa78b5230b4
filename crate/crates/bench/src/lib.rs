//! Benchmark support crate; see `benches/` and `tests/`.
