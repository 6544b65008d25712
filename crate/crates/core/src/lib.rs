//! Hamilton-Jacobi picture of wave mechanics on a grid.
//!
//! The crate propagates wavefunctions ([`tdse`]), splits them into amplitude
//! and action ([`madelung`]), integrates the classical characteristics and
//! their smoothed counterparts ([`hj_classical`]), advects ensembles of
//! trajectories along ∇S/m ([`multiverse`]), and checks the branch-counting
//! statistics ([`born`]) and the position-momentum bound ([`uncertainty`]).
//! [`grid`] supplies the lattice, quadrature and spectral observables that act
//! as the reference for everything else.

pub mod born;
pub mod error;
pub mod grid;
pub mod hj_classical;
mod interp;
pub mod madelung;
pub mod multiverse;
pub mod spectral;
pub mod states;
mod stencil;
pub mod tdse;
pub mod uncertainty;

pub use error::{Error, Result};
pub use grid::{inner_product, observables, Boundary, Grid, Observables, Wavefunction};

/// Crate version, echoed into result manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
