//! Numerical checks of Pohozaev-type obstructions to bubbling of
//! four-dimensional Yang–Mills connections.

pub mod annulus;
pub mod error;
pub mod exec;
pub mod exterior;
pub mod fd;
pub mod gauge;
pub mod geometry;
pub mod lie;
pub mod obstruction;
pub mod pohozaev;
pub mod poly;
pub mod quadrature;
pub mod stress;

pub use error::{Error, Result};
pub use exec::Exec;
