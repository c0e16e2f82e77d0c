//! Bubble-tree decomposition of degenerating harmonic map sequences and the
//! metric comparison machinery on neck regions.

pub mod app;
pub mod bubble;
pub mod config;
pub mod decomposition;
pub mod distance;
pub mod emit;
pub mod error;
pub mod family;
pub mod geometry;
pub mod metrics;
pub mod neck_ode;
pub mod quadrature;
pub mod rates;
pub mod report;

pub use error::{Error, Result};
