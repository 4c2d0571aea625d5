//! Spectral numerical laboratory for a fourth-order front equation on a
//! periodic strip and its Kuramoto–Sivashinsky (K–S) limit.
//!
//! The front equation is a one-parameter family (parameter `eps`) of
//! semilinear parabolic equations that are diagonal in the periodic Fourier
//! basis up to a single quadratic nonlinearity.  Everything reduces to
//! per-mode scalar multipliers ("symbols") that are rational functions of
//! `X = sqrt(1 + 4*eps*lambda)`, where `lambda = (2*pi*m/ell0)^2` is the
//! eigenvalue of `-d^2/d_eta^2` on mode `m`.
//!
//! Module map:
//! - [`spectral_grid`]: periodic collocation grid, FFT, differentiation,
//!   dealiasing, norms.
//! - [`symbol_engine`]: closed-form multiplier symbols, dispersion and
//!   stability thresholds, asymptotic checks.
//! - [`resolvent_lab`]: the transverse operator on the line, exact
//!   poly-exponential profiles, the projection functional, and two
//!   independent oracles (closed-form quadrature and a finite-difference
//!   boundary-value solve) validating every trace symbol.
//! - [`ks_solver`]: ETDRK4 pseudo-spectral solver for K–S.
//! - [`front_solver`]: the same solver driven by the eps-family multipliers,
//!   remainder extraction, variable rescaling, and the two-term ansatz in
//!   the transverse variable.
//! - [`diagnostics`]: energy reports, quadratic-form bounds, the Riccati
//!   comparison envelope, and the eps-convergence harness.
//! - [`cli`]: command-line front end with reproducible CSV/JSON outputs.

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod front_solver;
pub mod ks_solver;
pub mod resolvent_lab;
pub mod spectral_grid;
pub mod symbol_engine;

pub use error::Error;
