//! Criterion benchmarks for the pulsepair hot paths live under `benches/`.
