//! Spectral model of exhaled-aerosol diffusion in a box-shaped room with
//! partially absorbing walls, together with extended-source integration,
//! air-sampler detection analysis and independent numerical oracles.
//!
//! The crate is organised bottom-up:
//!
//! * [`eigenspectrum`] solves the per-axis Robin eigenproblems;
//! * [`greens`] evaluates instantaneous point-source fields;
//! * [`source`] integrates continuous disc and square exhalation sources;
//! * [`detection`] integrates over a sampler and computes miss-detection
//!   probabilities;
//! * [`oracle`] holds finite-difference, quadrature and Monte Carlo checks;
//! * [`scenario`] parses configuration files and writes CSV tables.

pub mod detection;
pub mod eigenspectrum;
pub mod error;
pub mod greens;
pub mod oracle;
pub mod quadrature;
pub mod scenario;
pub mod source;

pub use eigenspectrum::{AxisSpec, EigenSpectrum, SpectrumSettings};
pub use error::{Error, Result};
pub use greens::{AxisKernel, NegativeModeDynamics, PointSource, Room, RoomModel, SeriesSettings, Truncation};
pub use quadrature::QuadratureConfig;
