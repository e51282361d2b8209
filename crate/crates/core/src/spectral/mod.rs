//! Low spectrum of the discrete Witten Laplacian: eigensolver, threshold
//! counts and gap scans over T.

mod eigen;
mod scan;

pub use eigen::{lowest_eigenpairs, lowest_eigenpairs_pencil, Eigenpairs, Pencil, SparsePencil};
pub use scan::*;
