//! Dense complex linear algebra, Pauli bases and random ensembles.

pub mod matrix;
pub mod pauli;
pub mod random;
pub mod state;

pub use matrix::{eigh, ground_energy_power_iteration, kron, qr, ComplexMatrix, C64, I, ONE, ZERO};
pub use pauli::{embed, pauli, pauli_basis, pauli_string, sigma_x, sigma_y, sigma_z, PauliBasis};
pub use random::{haar_random_state, haar_random_unitary, random_hermitian};
pub use state::{inner, norm, outer, QuantumState};
