pub mod analysis;
pub mod cell;
pub mod cli;
pub mod darcy;
pub mod error;
pub mod epsweep;
pub mod fem;
pub mod forcing;
pub mod geom;
pub mod mesh;
pub mod sparse;

pub use error::{Error, Result};
