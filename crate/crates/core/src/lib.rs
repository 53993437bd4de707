//! Double-IRS aided MIMO under line-of-sight propagation: geometry-driven
//! channel synthesis, capacity maximization over the transmit covariance and
//! the two IRS phase configurations, closed-form capacity results and a sweep
//! harness.

pub mod analysis;
pub mod capacity;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod optimizer;

pub use error::{Error, Result};

pub type C64 = nalgebra::Complex<f64>;
pub type CMatrix = nalgebra::DMatrix<C64>;
pub type CVector = nalgebra::DVector<C64>;
