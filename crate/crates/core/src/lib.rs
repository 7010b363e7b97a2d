//! Benchmark toolkit for fingerprint presentation attack detection (PAD)
//! in the short-wave-infrared domain.
//!
//! The crate covers the whole evaluation flow: manifest ingestion,
//! baseline and leave-one-group-out partitions, ISO/IEC 30107-3 error
//! rates, weighted score fusion, a synthetic data generator and a one-class
//! reconstruction detector.

pub mod cli;
pub mod cube;
pub mod fusion;
pub mod io;
pub mod manifest;
pub mod metrics;
pub mod oneclass;
pub mod partition;
pub mod report;
pub mod rng;
pub mod scores;
pub mod synth;

/// Set of sample ids, always iterated in ascending order.
pub type IdSet = std::collections::BTreeSet<String>;
