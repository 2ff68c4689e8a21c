//! Controlled semi-linear SPDEs on uniform grids and feedback policies
//! trained with an importance-weighted variational loss.

pub mod error;
pub mod experiment;
pub mod field;
pub mod linalg;
pub mod policy;
pub mod spde;
pub mod train;

pub use error::{Error, Result};
