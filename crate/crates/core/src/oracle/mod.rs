//! Independent checks for the spectral solution.
//!
//! * [`fdm`]: Crank–Nicolson evolution in one dimension and Douglas–Gunn
//!   ADI in three, with ghost-node Robin closures.
//! * [`simpson`]: adaptive Simpson quadrature with an error estimate.
//! * [`monte_carlo`]: direct simulation of the detector decision rule.
//! * [`scan`]: dense sign scans for the characteristic equations.
//!
//! None of these share numerical code with the production modules.

pub mod fdm;
pub mod monte_carlo;
pub mod scan;
pub mod simpson;

pub use fdm::{fdm_evolve_1d, fdm_evolve_3d, richardson, Grid1d, Grid3d, RobinClosure, StepConfig};
pub use monte_carlo::{monte_carlo_pmd, McEstimate};
pub use scan::{negative_scan_window, scan_negative_roots, scan_positive_roots, scan_positive_roots_below};
pub use simpson::{quad_adaptive, quad_adaptive_with};
