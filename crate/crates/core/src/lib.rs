pub mod config;
pub mod dg_core;
pub mod error;
pub mod experiments;
pub mod leapfrog;
pub mod materials;
pub mod mesh;
pub mod reference_element;
pub mod stability_theory;

pub use error::{DgError, Result};
