pub mod bifurcation;
pub mod error;
pub mod export;
pub mod model;
pub mod ode;
pub mod profile;
pub mod quadrature;
pub mod solver;
pub mod spectrum;
pub mod specfun;

pub use error::{Error, GSample, Result};
pub use model::{ActiveForce, ModelParams};
