pub mod common_grid;
pub mod design;
pub mod diagnostics;
pub mod emulator;
pub mod doe;
pub mod error;
pub mod field;
pub mod kriging;
pub mod optim;
pub mod oracle;
pub mod pod;
pub mod sobol;
pub mod store;
pub mod tree;

pub use error::{Error, Result};
