//! Exact simulation of the Pauli self-testing protocols: the BLR linearity
//! test, the two-player Pauli braiding test and the multi-player Hamiltonian
//! self-test, together with the constructive steps used in their analysis.

pub mod acgame;
pub mod bits;
pub mod braiding;
pub mod code;
pub mod error;
pub mod game;
pub mod hamiltonian;
pub mod linalg;
pub mod linearity;
pub mod pauli;
pub mod random;
pub mod state;

pub use bits::BitString;
pub use error::{Error, Result};
pub use pauli::{conjugating_clifford, pauli_apply, pauli_dense, pauli_multiply, PauliWord, Sign};
