//! Numerical toolkit for the Hermitian curvature flow `∂_t g = −S(g)` on flat
//! complex tori: Chern connection and curvature on periodic grids, curvature
//! conditions, the flow integrator with its monitors, and verification suites.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod chern;
pub mod conditions;
pub mod error;
pub mod flow;
pub mod grid;
pub mod linalg;
pub mod presets;
pub mod probe;
pub mod symbolic;
pub mod tensor;
pub mod verify;

pub use error::{HcfError, Result};
pub use grid::{DerivativeMode, GridSpec, TorusGrid};
pub use tensor::{MetricField, Slot, TensorField};
