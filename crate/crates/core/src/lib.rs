//! Numerical laboratory for the planar Kepler problem with power-law drag
//!
//! ```text
//! ü = -u/|u|³ - δ |u|^(-β) |u̇|^α u̇
//! ```
//!
//! The drag exponents `(α, β)` enter the asymptotics only through
//! `γ = α + 2β - 3`. Orbits falling into the center circularize when
//! `-3 < γ < 0`, become parabolic-like (`|ℰ| → 1`) when `γ > 0`, and at
//! `γ = 0` the eccentricity settles at `2δ` (for `δ < ½`) or `1`.
//!
//! Modules, bottom up:
//!
//! * [`model`]: parameters, Cartesian and rotation-reduced fields, observables.
//! * [`charts`]: desingularized blowup charts around collision.
//! * [`equilibria`]: equilibria of the chart fields and their linearizations.
//! * [`integrator`]: adaptive Dormand–Prince 5(4) with dense output and events.
//! * [`regime`], [`fit`], [`sweep`]: predicted vs observed asymptotics.
//! * [`verification`]: named numerical checks with pinned tolerances.
//!
//! The model, chart, equilibrium and integrator layers are generic over
//! [`Scalar`] (`f32` or `f64`); the aliases below fix `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod charts;
pub mod equilibria;
pub mod error;
pub mod fit;
pub mod integrator;
pub mod model;
pub mod output;
pub mod regime;
pub mod scalar;
pub mod sweep;
pub mod verification;

pub use charts::{ChartId, HamiltonianValue};
pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Params = model::DampingParams<f64>;
pub type Params32 = model::DampingParams<f32>;
pub type Cartesian = model::CartesianState<f64>;
pub type Reduced = model::ReducedState<f64>;
pub type Reduced32 = model::ReducedState<f32>;
pub type ChartPoint = charts::ChartState<f64>;

pub type Config = integrator::IntegrationConfig<f64>;
