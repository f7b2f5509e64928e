//! Dense statevector simulation of the hardware-efficient ansatz.
//!
//! The circuit is a brick-wall of two-qubit Givens rotations. Each block
//! mixes only the {|01>, |10>} subspace of its qubit pair, so the circuit
//! conserves Hamming weight exactly: a basis state with k excitations stays
//! inside the k-excitation sector, with amplitudes outside it bitwise zero.
//! All gates are real orthogonal, so real inputs keep real amplitudes.

use crate::error::{CoreError, Result};
use crate::scalar::{c_zero, Real, C};

#[derive(Debug, Clone)]
pub struct Statevector<R> {
    pub n_qubits: usize,
    pub amps: Vec<C<R>>,
}

impl<R: Real> Statevector<R> {
    /// Computational basis state from a ket label; the leftmost character is
    /// the highest qubit.
    pub fn basis_state(n_qubits: usize, bitstring: &str) -> Result<Self> {
        if bitstring.len() != n_qubits {
            return Err(CoreError::Bitstring {
                value: bitstring.to_string(),
                msg: format!("expected {} characters", n_qubits),
            });
        }
        let mut index = 0u64;
        for ch in bitstring.chars() {
            index <<= 1;
            match ch {
                '0' => {}
                '1' => index |= 1,
                _ => {
                    return Err(CoreError::Bitstring {
                        value: bitstring.to_string(),
                        msg: format!("invalid character {ch:?}"),
                    })
                }
            }
        }
        let mut amps = vec![c_zero::<R>(); 1usize << n_qubits];
        amps[index as usize] = C::new(R::one(), R::zero());
        Ok(Statevector { n_qubits, amps })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sqr(&self) -> R {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>` with conjugation on `self`.
    pub fn inner(&self, other: &Self) -> C<R> {
        self.amps
            .iter()
            .zip(other.amps.iter())
            .fold(c_zero(), |acc, (a, b)| acc + a.conj() * *b)
    }

    /// `<self| op |other>`.
    pub fn matrix_element(&self, op: &crate::hamiltonian_io::PauliSum<R>, other: &Self) -> C<R> {
        let mut applied = vec![c_zero::<R>(); other.dim()];
        op.accumulate_apply(&other.amps, &mut applied);
        self.amps
            .iter()
            .zip(applied.iter())
            .fold(c_zero(), |acc, (a, b)| acc + a.conj() * *b)
    }

    /// `<self| op |self>`, reported as the real part; the imaginary part of a
    /// hermitian expectation is rounding noise.
    pub fn expectation(&self, op: &crate::hamiltonian_io::PauliSum<R>) -> R {
        self.matrix_element(op, self).re
    }
}

/// Givens rotation on the `{|01>, |10>}` subspace of a qubit pair, using the
/// half-angle convention: at `phi = pi` the lower-qubit excitation maps onto
/// the higher-qubit one with a plus sign.
fn apply_givens<R: Real>(amps: &mut [C<R>], lo_qubit: usize, hi_qubit: usize, phi: R) {
    let half = phi * R::of(0.5);
    let (s, c) = half.sin_cos();
    let lo_bit = 1usize << lo_qubit;
    let hi_bit = 1usize << hi_qubit;
    for i in 0..amps.len() {
        // Visit each pair once, from the lower-qubit-excited member.
        if i & lo_bit != 0 && i & hi_bit == 0 {
            let j = i ^ lo_bit ^ hi_bit;
            let a_lo = amps[i];
            let a_hi = amps[j];
            amps[i] = a_lo.scale(c) - a_hi.scale(s);
            amps[j] = a_lo.scale(s) + a_hi.scale(c);
        }
    }
}

/// Fixed gate layout; parameters are the rotation angles, one per block,
/// applied in layout order.
#[derive(Debug, Clone)]
pub struct AnsatzCircuit {
    pub n_qubits: usize,
    pub layout: Vec<(usize, usize)>,
}

impl AnsatzCircuit {
    pub fn new(n_qubits: usize, layout: Vec<(usize, usize)>) -> Result<Self> {
        for &(a, b) in &layout {
            if a >= n_qubits || b >= n_qubits || a == b {
                return Err(CoreError::Config(format!(
                    "gate pair ({a}, {b}) invalid for {n_qubits} qubits"
                )));
            }
        }
        Ok(AnsatzCircuit { n_qubits, layout })
    }

    /// Alternating even/odd nearest-neighbour sublayers; one depth unit is
    /// one even plus one odd sublayer.
    pub fn brick_wall(n_qubits: usize, depth: usize) -> Self {
        let mut layout = Vec::new();
        for _ in 0..depth {
            for start in [0usize, 1] {
                let mut q = start;
                while q + 1 < n_qubits {
                    layout.push((q, q + 1));
                    q += 2;
                }
            }
        }
        AnsatzCircuit { n_qubits, layout }
    }

    pub fn n_parameters(&self) -> usize {
        self.layout.len()
    }

    pub fn apply<R: Real>(&self, params: &[R], state: &mut Statevector<R>) -> Result<()> {
        if params.len() != self.layout.len() {
            return Err(CoreError::Arity {
                expected: self.layout.len(),
                got: params.len(),
            });
        }
        if state.n_qubits != self.n_qubits {
            return Err(CoreError::Dimension(format!(
                "state has {} qubits, circuit expects {}",
                state.n_qubits, self.n_qubits
            )));
        }
        for (&(a, b), &phi) in self.layout.iter().zip(params.iter()) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            apply_givens(&mut state.amps, lo, hi, phi);
        }
        Ok(())
    }

    /// Prepare `circuit |bitstring>`.
    pub fn prepare<R: Real>(&self, params: &[R], bitstring: &str) -> Result<Statevector<R>> {
        let mut state = Statevector::basis_state(self.n_qubits, bitstring)?;
        self.apply(params, &mut state)?;
        Ok(state)
    }
}
