//! Numerical laboratory for second-order parabolic evolution operators with
//! time-periodic, possibly unbounded coefficients on truncated boxes.
//!
//! The crate discretizes `u_t = A(t)u` with
//! `A(t)φ = Tr(Q(t,x) D²φ) + <b(t,x), ∇φ>`, realizes the two-parameter
//! propagator as a chain of positivity-preserving implicit factors, extracts
//! transition kernels, checks Lyapunov-type confinement conditions, computes
//! periodic families of measures, measures Floquet spectra and decay rates,
//! and cross-validates everything against exact Ornstein–Uhlenbeck solutions
//! and an independent Monte Carlo oracle.

pub mod bench;
pub mod config;
pub mod error;
pub mod evolution;
pub mod expr;
pub mod field;
pub mod grid;
pub mod lyapunov;
pub mod measures;
pub mod montecarlo;
pub mod ou;
pub mod quad;
pub mod report;
pub mod runner;
pub mod spectral;
pub mod svg;

pub use error::{Error, Result};
pub use evolution::{FactorChain, Propagator};
pub use expr::{parse_expr, Expr};
pub use field::{CoefficientField, TestFunction};
pub use grid::Grid;
pub use measures::{EvolutionMeasureFamily, TransitionRow};
pub use ou::OuParams;
