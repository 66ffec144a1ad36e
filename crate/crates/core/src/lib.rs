pub mod error;
pub mod linalg;
pub mod lp;
pub mod certify;
pub mod constants;
pub mod solvers;
pub mod compare;
pub mod io;
pub mod generate;
pub mod sweep;

pub use error::{Error, Result};
pub use linalg::DenseMatrix;
