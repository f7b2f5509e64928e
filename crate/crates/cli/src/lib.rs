//! Pipeline orchestration for the surface-scan + wavepacket toolchain.
//!
//! The binary in `main.rs` is a thin argument layer; everything it does goes
//! through this library so the stages stay testable. A run is driven by a
//! declarative config file naming a geometry manifest, and produces a chain
//! of text artifacts (raw surfaces, couplings, fine-grid bundle, population
//! series, density snapshots) that later stages and external plotting tools
//! read back. Every artifact carries a provenance header: config hash, seed
//! and package version, never a timestamp, so identical runs are
//! byte-identical.

pub mod config;
pub mod io;
pub mod manifest;
pub mod pipeline;

pub use config::RunConfig;
pub use manifest::Manifest;
pub use pipeline::{run_stages, Stage};
