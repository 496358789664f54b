//! Regularized evolution of `∂ₜu − Δₚu + |∇u|^q = 0` and the tools to
//! measure its large-time behaviour.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` rejects NaN too

pub mod battery;
pub mod bernstein;
pub mod error;
pub mod exponents;
pub mod fit;
pub mod grid;
pub mod model;
pub mod observe;
pub mod solver;

pub use error::{Error, Result};
pub use exponents::{
    classify_regime, compute_exponents, predicted_laws, ExponentSet, PredictedLaws, ProblemParams, Regime,
};
pub use fit::{fit_log_growth, fit_power, plateau_test, verdict, FitResult, Verdict};
pub use grid::{Geometry, Grid};
pub use model::{BarenblattSolution, InitialProfile, RegularizedCoefficients};
pub use observe::{mass_balance_residual, observe, support_radius, Observables, TimeSeries};
pub use solver::{comparison_run, run, run_with, stable_dt, step, RunConfig, State, StepStats, Stepper};
