//! Probing heads for frozen backbone features: a single Kolmogorov-Arnold
//! layer with B-spline edge functions, the linear-probe baseline, training
//! with Adam and early stopping, and a sweep harness over grid size and
//! spline degree with metric export and SVG figures.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod experiments;
pub mod figures;
pub mod heads;
pub mod kan;
pub mod matrix;
pub mod optim;
pub mod spline;

pub use error::{Error, Result};
pub use matrix::Matrix;
