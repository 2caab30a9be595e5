//! Periodic orbits of magnetic Lagrangian systems on flat and conformally
//! flat tori.
//!
//! The crate discretizes the free loop space of `𝕋ⁿ`, minimizes and
//! refines the magnetic action `S_L + δ𝒜_σ`, computes Morse indices from
//! the discrete second variation, integrates the magnetic Hamiltonian flow
//! to cross-check critical loops, and evaluates the explicit isoperimetric
//! and growth constants that govern when the action functional is well
//! behaved.
//!
//! ```
//! use magflow_core::geometry::MagneticForm;
//! use magflow_core::loopspace::{action_sigma, DiscreteLoop};
//!
//! let circle = DiscreteLoop::circle(&[0.5, 0.5], (0, 1), 0.1, 1, 1.0, 256).unwrap();
//! let area = action_sigma(&MagneticForm::area(1.0), &circle).unwrap();
//! assert!((area - std::f64::consts::PI * 0.01).abs() < 1e-5);
//! ```

pub mod constants;
pub mod error;
pub mod fourier;
pub mod geometry;
pub mod hamiltonian;
pub mod lagrangian;
pub mod linalg;
pub mod loopspace;
pub mod scenario;
pub mod variational;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/loops.md")]
    mod loops {}
    #[doc = include_str!("../../../book/src/constants.md")]
    mod constants {}
    #[doc = include_str!("../../../book/src/critical-points.md")]
    mod critical_points {}
    #[doc = include_str!("../../../book/src/flow.md")]
    mod flow {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/conventions.md")]
    mod conventions {}
}
