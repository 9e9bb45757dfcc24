//! Feedback control of the lid-driven cavity through a POD/DEIM reduced
//! model and a semi-Lagrangian solver for the discounted HJB equation.
//!
//! Pipeline: [`flow`] produces trajectories and steady states,
//! [`snapshot`] and [`pod`] turn them into a reduced basis, [`deim`] and
//! [`rom`] build the reduced dynamics, [`hjb`] computes the value function and
//! feedback on a box in coefficient space, and [`closed_loop`] runs the
//! feedback on the reduced and full models.

// `!(x > 0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod closed_loop;
pub mod deim;
pub mod error;
pub mod flow;
pub mod grid;
pub mod hjb;
pub mod io;
pub mod linalg;
pub mod pod;
pub mod rom;
mod scalar;
pub mod snapshot;

pub use error::{Error, Result};
pub use grid::CavityGrid;
pub use scalar::Real;

pub type FlowModel = flow::FlowModel<f64>;
pub type StaggeredState = flow::StaggeredState<f64>;
pub type SnapshotSet = snapshot::SnapshotSet<f64>;
pub type PodBasis = pod::PodBasis<f64>;
pub type DeimInterpolant = deim::DeimInterpolant<f64>;
pub type RomSystem = rom::RomSystem<f64>;
pub type ValueGrid = hjb::ValueGrid<f64>;
pub type FeedbackPolicy = hjb::FeedbackPolicy<f64>;
