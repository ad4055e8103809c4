//! Criterion benchmarks for the occupancy solver and ERM live under `benches/`.
