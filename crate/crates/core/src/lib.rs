//! Microhub meal-delivery modelling kit.

pub mod ca_model;
pub mod calibration;
pub mod error;
pub mod geometry;
pub mod optimizer;
pub mod simplex;
pub mod simulator;
pub mod tsp;

pub use error::{Error, Result};
