//! Discrete-time quantum walks on a periodic 1+1 dimensional lattice.
//!
//! The crate evaluates the walk action and its variational consequences:
//! local conservation of charge, energy and momentum, an extended action
//! with space-time coordinates, its frame-covariant form, the continuum
//! limit towards the Dirac equation, and a small toolbox of discrete
//! mechanics integrators.

pub mod continuum;
pub mod error;
pub mod extended;
pub mod lattice;
pub mod linalg;
pub mod lorentz;
pub mod mechanics;
pub mod observables;
pub mod par;
pub mod stencil;

pub use error::{Result, WalkError};
pub use lattice::{
    action_s, action_velocity_form, apply_translation, evolve, stationarity_residual, step, step_adjoint, CoinField,
    CoinSchedule, CoinSource, Component, SpinorField, Trajectory,
};
pub use linalg::{Mat2, Spinor, C64};
