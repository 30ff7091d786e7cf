// NaN-rejecting `!(a > b)` guards and index loops over coupled arrays are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

pub mod ambient;
pub mod curve_lab;
pub mod error;
pub mod fd;
pub mod formats;
pub mod geodesic_flow;
pub mod immersion;
pub mod spectral;
pub mod variation;

pub use error::{Error, Result};
