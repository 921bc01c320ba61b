//! Toolkit for synthesizing dynamic, heterogeneous audio-corruption
//! benchmarks and for running and scoring test-time adaptation on them.

pub mod audio;
pub mod benchmark;
pub mod corruption;
pub mod metrics;
pub mod toymodel;
pub mod tta;
