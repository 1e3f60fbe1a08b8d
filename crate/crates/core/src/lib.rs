pub mod adaptivity;
pub mod assembly;
pub mod error;
pub mod hierarchy;
pub mod io;
pub mod physics;
pub mod quadrature;
pub mod spline;
pub mod verify;

pub use error::{Error, Result};
