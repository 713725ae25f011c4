//! Hopf bifurcation analysis for reaction-diffusion-advection equations with
//! a delayed growth term,
//!
//! ```text
//! u_t = ∇·[d(x)∇u − b(x)u] + λ u f(x, u(x, t − τ)),   u = 0 on ∂Ω,
//! ```
//!
//! discretized by finite volumes on an interval or a masked planar lattice.
//!
//! The pipeline runs in the order of the modules:
//! [`spectral::principal_eigenpair`] gives `λ*` with its eigenfunctions,
//! [`steady`] builds the positive branch `u_λ` near `λ*`,
//! [`spectral::find_hopf_crossing`] finds `iν` and the delays `τ_n`,
//! [`normalform::normal_form`] decides direction and orbit stability, and
//! [`dde::simulate`] checks the prediction by direct integration.
//!
//! Everything is generic over [`scalar::Real`] (`f32` or `f64`); the aliases
//! below fix `f64`.
//!
//! ```
//! use delayhopf::{assemble, build_interval_grid, principal_eigenpair, CoefficientFields};
//!
//! let g = build_interval_grid(0.0, std::f64::consts::PI, 199).unwrap();
//! let op = assemble(&g, &CoefficientFields::constant(1.0, &[0.0], 1.0)).unwrap();
//! let ep = principal_eigenpair(&op).unwrap();
//! assert!((ep.lambda_star - 1.0).abs() < 1e-4);
//! ```

// `!(x > 0)` style tests are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dde;
pub mod dense;
pub mod error;
pub mod exprlang;
pub mod grid;
pub mod linalg;
pub mod models;
pub mod normalform;
pub mod operators;
pub mod scalar;
pub mod spectral;
pub mod steady;

pub use dde::{diagnose_oscillation, simulate, threshold_scan, Observation, SimConfig, TimeScheme, Verdict};
pub use error::{Error, Result};
pub use grid::{build_interval_grid, build_masked_grid_2d};
pub use models::GrowthModel;
pub use normalform::{normal_form, Direction, NormalFormReport, OrbitStability};
pub use operators::{assemble, Coefficient, CoefficientFields};
pub use scalar::{Real, Scalar};
pub use spectral::{find_hopf_crossing, principal_eigenpair, CrossingOptions, Linearization};
pub use steady::{bifurcation_scalars, continue_branch, steady_point, HOrdering, Regime};

pub type Grid = grid::Grid<f64>;
pub type DiscreteOperator = operators::DiscreteOperator<f64>;
pub type EigenPair = spectral::EigenPair<f64>;
pub type HopfCrossing = spectral::HopfCrossing<f64>;
pub type NormalForm = normalform::NormalForm<f64>;
pub type BifurcationScalars = steady::BifurcationScalars<f64>;
pub type SteadyBranchPoint = steady::SteadyBranchPoint<f64>;
pub type Simulation = dde::Simulation<f64>;
