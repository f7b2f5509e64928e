//! Electronic-structure input layer: FCIDUMP parsing, second-quantized
//! Hamiltonian assembly, and the Jordan-Wigner map onto qubit operators.
//!
//! Spin-orbital convention used everywhere downstream: spatial orbital `p`
//! occupies qubits `2p` (spin up) and `2p + 1` (spin down); qubit 0 is the
//! least significant bit of a basis index.

mod fcidump;
mod fermion;
mod pauli;

pub use fcidump::{parse_fcidump, parse_fcidump_str, ActiveSpaceIntegrals};
pub use fermion::{build_fermionic_hamiltonian, fermion_to_matrix, FermionOperator};
pub use pauli::{
    hamiltonian_derivative, jordan_wigner, number_operator, pauli_mul, pauli_sum_to_matrix,
    spin_z_operator, PauliString, PauliSum, DENSE_QUBIT_LIMIT, MERGE_THRESHOLD,
};

#[cfg(test)]
pub(crate) mod testutil {
    use super::ActiveSpaceIntegrals;
    use crate::scalar::Real;
    use rand::Rng;

    /// Random hermitian active space: symmetric h1, 8-fold symmetric h2.
    pub fn random_integrals<R: Real>(
        rng: &mut impl Rng,
        n_orbitals: usize,
        n_electrons: usize,
        with_h2: bool,
    ) -> ActiveSpaceIntegrals<R> {
        let mut ints = ActiveSpaceIntegrals::new(n_orbitals, n_electrons);
        ints.core_energy = R::of(rng.gen_range(-2.0..2.0));
        for p in 0..n_orbitals {
            for q in 0..=p {
                ints.set_h1(p, q, R::of(rng.gen_range(-1.0..1.0)));
            }
        }
        if with_h2 {
            for p in 0..n_orbitals {
                for q in 0..n_orbitals {
                    for r in 0..n_orbitals {
                        for s in 0..n_orbitals {
                            ints.set_h2(p, q, r, s, R::of(rng.gen_range(-0.3..0.3)));
                        }
                    }
                }
            }
        }
        ints
    }
}
