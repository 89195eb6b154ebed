//! Numerical toolbox for linear quantum (Gaussian bosonic) control systems.
//!
//! The crate models open linear quantum systems in the doubled-up
//! annihilation/creation picture and the real quadrature picture, and provides:
//!
//! - structured matrix algebra (♭/♯ adjoints, Bogoliubov/symplectic tests),
//! - state-space construction from physical parameters and physical
//!   realizability checks,
//! - stability/controllability/observability analysis and the quantum Kalman
//!   canonical decomposition with DFS/QND/QMFS labeling and back-action
//!   evasion tests,
//! - Gaussian state propagation, uncertainty relations (Heisenberg and
//!   skew-information based), and pure-state generation by environment
//!   engineering,
//! - the quantum Kalman filter (Riccati covariance + conditioned-mean SDE),
//! - steady-state responses to single-photon, photon-Gaussian and
//!   multi-photon field states,
//! - coherent feedback network composition (concatenation/series products,
//!   direct couplings, closed-loop assembly).

pub mod algebra;
pub mod analysis;
pub mod error;
pub mod filter;
pub mod gaussian;
pub mod io;
pub mod linalg;
pub mod model;
pub mod network;
pub mod photon;
pub mod synth;

pub use error::{Error, Result};
pub use linalg::{C64, CMat, CVec, RMat, RVec};
