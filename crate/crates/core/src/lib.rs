//! Green functions, first-return kernels and transfer operators for random
//! walks on free products of finite and free abelian groups.

pub mod budget;
pub mod coding;
pub mod config;
pub mod error;
pub mod group;
pub mod numeric;
pub mod parabolic;
pub mod report;
pub mod thermo;
pub mod green;
pub mod verify;
pub mod walk;

pub use budget::Budget;
pub use error::{Error, Result};
