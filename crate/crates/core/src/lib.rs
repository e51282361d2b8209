//! Numerical laboratory for Witten-Morse theory on planar surfaces with
//! boundary.
//!
//! The pipeline meshes a domain ([`geometry`]), assembles the deformed de
//! Rham complex ([`dec`]), computes its low spectrum ([`spectral`]), builds
//! the Thom-Smale complex of the Morse function ([`morse`]) and compares the
//! two through integration over unstable cells ([`chainmap`]). The [`model`]
//! module holds closed-form and one-dimensional reference operators, and
//! [`cli`] wires everything into reproducible experiment runs.

pub mod chainmap;
pub mod cli;
pub mod dec;
pub mod error;
pub mod geometry;
pub mod model;
pub mod morse;
pub mod sparse;
pub mod spectral;

pub use error::{Error, Result};
