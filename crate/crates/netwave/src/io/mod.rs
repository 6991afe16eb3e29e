//! File formats: network files (text and binary), vector snapshots,
//! multiscale basis archives, and MatrixMarket export for debugging.

mod basis;
mod matrix_market;
mod netfmt;
mod vecfmt;

pub use basis::{load_basis, save_basis, BasisData};
pub use matrix_market::{read_matrix_market, write_matrix_market};
pub use netfmt::{load_network, load_network_bytes, save_network, save_network_binary, load_network_binary_bytes};
pub use vecfmt::{load_vector, load_vector_str, save_vector};
