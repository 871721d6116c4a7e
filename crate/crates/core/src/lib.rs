//! Double-step Rothe scheme for parabolic hemivariational inequalities
//! `u' + A u + ι*∂J(ι u) ∋ f` on a Galerkin evolution triple.
//!
//! The crate is organized around [`galerkin::GalerkinSpace`] (Gram matrices
//! and trace of a finite-dimensional `V ⊂ H ⊂ V*`), the scalar potentials in
//! [`potentials`], the per-step inclusion solver in [`inclusion`] and the
//! time stepper in [`stepper`]. [`fem1d`] provides a P1 instance on `(0, 1)`.

pub mod diagnostics;
pub mod error;
pub mod fem1d;
pub mod galerkin;
pub mod inclusion;
pub mod oracle;
pub mod potentials;
pub mod quadrature;
pub mod stepper;

pub use error::{Error, Result};
pub use galerkin::{DualVector, GalerkinSpace, LinearOperatorA, Matrix, OperatorConstants, Vector};
pub use inclusion::{SolveReport, SolverSettings, StepOperator, StepSolution};
pub use potentials::{BoundaryFunctional, PotentialKind, ScalarPotential};
pub use stepper::{run_rothe, EulerForcing, LoadSource, RotheProblem, RotheTrajectory, Scheme, TimeGrid};
