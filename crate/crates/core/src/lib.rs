pub mod error;
pub mod linalg;
pub mod omc;
pub mod osdp;
pub mod sampling;
pub mod similarity;
pub mod synth;
pub mod verify;

pub use error::{Error, Result};
