//! Pauli-string algebra and the Jordan-Wigner transform.
//!
//! A string is stored as an (x, z) bit-mask pair over up to 64 qubits: bit q
//! set in `x` only means X on qubit q, in `z` only means Z, in both means Y.
//! The stored operator is the plain tensor product of those single-qubit
//! Paulis; coefficients live in the enclosing `PauliSum`.

use super::fermion::FermionOperator;
use crate::error::{CoreError, Result};
use crate::scalar::{i_pow, Real, C};
use std::collections::BTreeMap;

/// Coefficients with magnitude below this are dropped when terms merge.
pub const MERGE_THRESHOLD: f64 = 1e-12;

/// Dense 2^n x 2^n construction is refused above this qubit count.
pub const DENSE_QUBIT_LIMIT: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliString {
    pub x: u64,
    pub z: u64,
}

impl PauliString {
    pub const IDENTITY: PauliString = PauliString { x: 0, z: 0 };

    pub fn from_label(label: &str) -> Result<PauliString> {
        let mut x = 0u64;
        let mut z = 0u64;
        // Leftmost character is the highest qubit, matching ket notation.
        let n = label.len();
        for (i, ch) in label.chars().enumerate() {
            let q = n - 1 - i;
            match ch {
                'I' => {}
                'X' => x |= 1 << q,
                'Y' => {
                    x |= 1 << q;
                    z |= 1 << q;
                }
                'Z' => z |= 1 << q,
                _ => {
                    return Err(CoreError::Bitstring {
                        value: label.to_string(),
                        msg: format!("invalid Pauli letter {ch:?}"),
                    })
                }
            }
        }
        Ok(PauliString { x, z })
    }

    pub fn label(&self, n_qubits: usize) -> String {
        (0..n_qubits)
            .rev()
            .map(|q| {
                let bit = 1u64 << q;
                match (self.x & bit != 0, self.z & bit != 0) {
                    (false, false) => 'I',
                    (true, false) => 'X',
                    (true, true) => 'Y',
                    (false, true) => 'Z',
                }
            })
            .collect()
    }

    /// Number of non-identity sites.
    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// Action on a computational basis ket: `P |b> = phase |b ^ x>`.
    #[inline]
    pub fn apply_to_basis<R: Real>(&self, b: u64) -> (u64, C<R>) {
        let flips = (self.z & b).count_ones();
        let phase = i_pow::<R>(self.y_count() + 2 * flips);
        (b ^ self.x, phase)
    }
}

/// Product of two strings with the accumulated scalar phase:
/// `a * b = phase * result`.
pub fn pauli_mul<R: Real>(a: PauliString, b: PauliString) -> (PauliString, C<R>) {
    let out = PauliString {
        x: a.x ^ b.x,
        z: a.z ^ b.z,
    };
    // Written over the X^x Z^z normal form: commuting Z^za past X^xb gives
    // (-1)^{za & xb}; each Y contributes one factor of i in the normal form.
    // The +256 (= 0 mod 4) keeps the exponent non-negative: the Y count of
    // the product can exceed the inputs' combined count by up to 64.
    let k = a.y_count() + b.y_count() + 256 - out.y_count() + 2 * (a.z & b.x).count_ones();
    (out, i_pow::<R>(k))
}

/// Canonicalized linear combination of Pauli strings: terms sorted by mask,
/// duplicates merged, magnitudes below `MERGE_THRESHOLD` dropped.
#[derive(Debug, Clone)]
pub struct PauliSum<R> {
    pub n_qubits: usize,
    terms: Vec<(C<R>, PauliString)>,
}

impl<R: Real> PauliSum<R> {
    pub fn zero(n_qubits: usize) -> Self {
        PauliSum {
            n_qubits,
            terms: Vec::new(),
        }
    }

    pub fn from_terms(
        n_qubits: usize,
        terms: impl IntoIterator<Item = (C<R>, PauliString)>,
    ) -> Result<Self> {
        let mut map: BTreeMap<(u64, u64), C<R>> = BTreeMap::new();
        let qubit_mask = if n_qubits == 64 {
            u64::MAX
        } else {
            (1u64 << n_qubits) - 1
        };
        for (c, p) in terms {
            if (p.x | p.z) & !qubit_mask != 0 {
                return Err(CoreError::Dimension(format!(
                    "Pauli string {} exceeds {} qubits",
                    p.label(64).trim_start_matches('I'),
                    n_qubits
                )));
            }
            let e = map.entry((p.x, p.z)).or_insert_with(crate::scalar::c_zero);
            *e = *e + c;
        }
        let eps = R::of(MERGE_THRESHOLD);
        let terms = map
            .into_iter()
            .filter(|(_, c)| c.norm_sqr().sqrt() > eps)
            .map(|((x, z), c)| (c, PauliString { x, z }))
            .collect();
        Ok(PauliSum { n_qubits, terms })
    }

    pub fn terms(&self) -> &[(C<R>, PauliString)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scaled(&self, factor: C<R>) -> Self {
        PauliSum {
            n_qubits: self.n_qubits,
            terms: self.terms.iter().map(|(c, p)| (*c * factor, *p)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        PauliSum::from_terms(
            self.n_qubits,
            self.terms.iter().chain(other.terms.iter()).copied(),
        )
    }

    /// Operator product, expanded term by term.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = Vec::with_capacity(self.terms.len() * other.terms.len());
        for &(ca, pa) in &self.terms {
            for &(cb, pb) in &other.terms {
                let (p, phase) = pauli_mul::<R>(pa, pb);
                out.push((ca * cb * phase, p));
            }
        }
        PauliSum::from_terms(self.n_qubits, out)
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            return Err(CoreError::Dimension(format!(
                "operators act on {} vs {} qubits",
                self.n_qubits, other.n_qubits
            )));
        }
        Ok(())
    }

    /// Largest |Im c| over all terms; a hermitian sum keeps this at rounding
    /// level because every stored string is itself hermitian.
    pub fn max_imag(&self) -> R {
        self.terms
            .iter()
            .fold(R::zero(), |m, (c, _)| m.max(c.im.abs()))
    }

    /// Sum of coefficient magnitudes (an upper bound on the operator norm).
    pub fn coefficient_norm(&self) -> R {
        self.terms.iter().map(|(c, _)| c.norm_sqr().sqrt()).sum()
    }

    /// `out += H |psi>` over dense amplitudes.
    pub fn accumulate_apply(&self, input: &[C<R>], out: &mut [C<R>]) {
        debug_assert_eq!(input.len(), out.len());
        for &(c, p) in &self.terms {
            for (b, amp) in input.iter().enumerate() {
                if amp.norm_sqr() == R::zero() {
                    continue;
                }
                let (b2, phase) = p.apply_to_basis::<R>(b as u64);
                out[b2 as usize] = out[b2 as usize] + c * phase * *amp;
            }
        }
    }
}

/// Jordan-Wigner image of a ladder-operator sum:
/// `a†_p = (X_p - iY_p)/2 ⊗ Z_{p-1} ... Z_0` and the conjugate for `a_p`.
/// Products expand term by term and merge canonically.
pub fn jordan_wigner<R: Real>(op: &FermionOperator<R>) -> Result<PauliSum<R>> {
    if op.n_modes > 64 {
        return Err(CoreError::Dimension(format!(
            "{} fermionic modes exceed 64 qubits",
            op.n_modes
        )));
    }
    let half = R::of(0.5);
    let mut all_terms: Vec<(C<R>, PauliString)> = Vec::new();
    for (coeff, ops) in &op.terms {
        let mut acc: Vec<(C<R>, PauliString)> =
            vec![(C::new(*coeff, R::zero()), PauliString::IDENTITY)];
        for &(p, create) in ops.iter() {
            let tail = (1u64 << p) - 1;
            let x_part = PauliString { x: 1 << p, z: tail };
            let y_part = PauliString {
                x: 1 << p,
                z: tail | (1 << p),
            };
            // a† gets -i/2 on the Y branch, a gets +i/2.
            let y_coeff = if create {
                C::new(R::zero(), -half)
            } else {
                C::new(R::zero(), half)
            };
            let x_coeff = C::new(half, R::zero());
            let mut next = Vec::with_capacity(acc.len() * 2);
            for &(c, pstr) in &acc {
                for (branch_c, branch_p) in [(x_coeff, x_part), (y_coeff, y_part)] {
                    let (prod, phase) = pauli_mul::<R>(pstr, branch_p);
                    next.push((c * branch_c * phase, prod));
                }
            }
            acc = next;
        }
        all_terms.extend(acc);
    }
    PauliSum::from_terms(op.n_modes, all_terms)
}

/// Symmetric finite-difference derivative `(H_plus - H_minus) / (2 delta)`.
pub fn hamiltonian_derivative<R: Real>(
    plus: &PauliSum<R>,
    minus: &PauliSum<R>,
    delta: R,
) -> Result<PauliSum<R>> {
    if delta <= R::zero() {
        return Err(CoreError::Config(format!(
            "displacement must be positive, got {delta}"
        )));
    }
    let inv = C::new(R::one() / (R::of(2.0) * delta), R::zero());
    plus.add(&minus.scaled(C::new(-R::one(), R::zero())))
        .map(|d| d.scaled(inv))
}

/// Dense row-major matrix of dimension `2^n_qubits`.
pub fn pauli_sum_to_matrix<R: Real>(sum: &PauliSum<R>) -> Result<Vec<C<R>>> {
    if sum.n_qubits > DENSE_QUBIT_LIMIT {
        return Err(CoreError::DenseCapacity {
            n_qubits: sum.n_qubits,
            max: DENSE_QUBIT_LIMIT,
        });
    }
    let dim = 1usize << sum.n_qubits;
    let mut mat = vec![crate::scalar::c_zero::<R>(); dim * dim];
    for &(c, p) in sum.terms() {
        for b in 0..dim as u64 {
            let (b2, phase) = p.apply_to_basis::<R>(b);
            let idx = b2 as usize * dim + b as usize;
            mat[idx] = mat[idx] + c * phase;
        }
    }
    Ok(mat)
}

/// Total particle number `sum_q (I - Z_q) / 2`.
pub fn number_operator<R: Real>(n_qubits: usize) -> PauliSum<R> {
    let half = R::of(0.5);
    let mut terms = vec![(
        C::new(half * R::of(n_qubits as f64), R::zero()),
        PauliString::IDENTITY,
    )];
    for q in 0..n_qubits {
        terms.push((C::new(-half, R::zero()), PauliString { x: 0, z: 1 << q }));
    }
    PauliSum::from_terms(n_qubits, terms).expect("masks within range")
}

/// z-projection of total spin under the even-up/odd-down qubit convention:
/// `S_z = 1/4 sum_p (Z_{2p+1} - Z_{2p})`.
pub fn spin_z_operator<R: Real>(n_qubits: usize) -> Result<PauliSum<R>> {
    if n_qubits % 2 != 0 {
        return Err(CoreError::Dimension(format!(
            "spin projection needs an even qubit count, got {n_qubits}"
        )));
    }
    let quarter = R::of(0.25);
    let mut terms = Vec::new();
    for p in 0..n_qubits / 2 {
        terms.push((
            C::new(quarter, R::zero()),
            PauliString {
                x: 0,
                z: 1 << (2 * p + 1),
            },
        ));
        terms.push((
            C::new(-quarter, R::zero()),
            PauliString {
                x: 0,
                z: 1 << (2 * p),
            },
        ));
    }
    PauliSum::from_terms(n_qubits, terms)
}
