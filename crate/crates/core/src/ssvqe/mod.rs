//! Subspace-search variational eigensolver.
//!
//! One parameter set drives one circuit applied to several mutually
//! orthogonal reference bitstrings; the cost is the weighted sum of the
//! resulting energies with strictly decreasing weights, so the minimizer
//! orders the states by energy while unitarity keeps them orthogonal.
//!
//! Spin-summed Hamiltonians carry an exact twofold degeneracy between the
//! up-hole and down-hole sectors. Left alone, the weighted objective would
//! happily fill its lowest slots with both partners of one doublet. An
//! optional penalty `zeta * (S_z - s)^2`, zero on the sector the reference
//! states span, removes the other sector from competition; reported energies
//! are always expectation values of the physical Hamiltonian alone.

mod bfgs;

pub use bfgs::{minimize, BfgsOptions, BfgsResult};

use crate::error::{CoreError, Result};
use crate::hamiltonian_io::{pauli_sum_to_matrix, spin_z_operator, PauliString, PauliSum};
use crate::qsim::{AnsatzCircuit, Statevector};
use crate::scalar::{Real, C};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SsvqeConfig<R> {
    /// Strictly decreasing positive weights, one per tracked state.
    pub weights: Vec<R>,
    /// Reference bitstrings, leftmost character = highest qubit. Must be
    /// distinct and share one Hamming weight and one spin projection.
    pub initial_states: Vec<String>,
    /// Brick-wall depth units (each is an even plus an odd sublayer).
    pub depth: usize,
    /// Spin-sector penalty strength; zero disables the device. Must exceed
    /// what the weighted objective gains by swapping a tracked state for a
    /// lower doublet partner, so size it above the spectral spread of the
    /// tracked states (the penalty is exactly zero inside the sector, so a
    /// generous value costs nothing).
    pub spin_penalty: R,
    /// Source of the cold-start angles; orchestration layers overwrite it.
    #[serde(default)]
    pub seed: u64,
    pub grad_tol: R,
    pub max_iters: usize,
}

impl<R: Real> SsvqeConfig<R> {
    pub fn standard(seed: u64) -> Self {
        SsvqeConfig {
            weights: vec![R::of(9.0), R::of(4.0), R::of(1.0)],
            initial_states: vec!["101111".into(), "111011".into(), "111110".into()],
            depth: 5,
            spin_penalty: R::of(5.0),
            seed,
            grad_tol: R::of(1e-7),
            max_iters: 500,
        }
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        if self.weights.is_empty() || self.weights.len() != self.initial_states.len() {
            return Err(CoreError::Config(format!(
                "{} weights for {} reference states",
                self.weights.len(),
                self.initial_states.len()
            )));
        }
        for w in self.weights.windows(2) {
            if w[1] >= w[0] {
                return Err(CoreError::Config("weights must strictly decrease".into()));
            }
        }
        if self.weights[self.weights.len() - 1] <= R::zero() {
            return Err(CoreError::Config("weights must be positive".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.initial_states {
            if s.len() != n_qubits {
                return Err(CoreError::Bitstring {
                    value: s.clone(),
                    msg: format!("expected {} characters", n_qubits),
                });
            }
            if !seen.insert(s.as_str()) {
                return Err(CoreError::Config(format!("duplicate reference state {s}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SsvqeSolution<R> {
    /// Physical energies sorted ascending.
    pub energies: Vec<R>,
    /// `order[k]` = index of the reference state sitting at energy rank k.
    pub order: Vec<usize>,
    /// Optimal rotation angles, in circuit layout order.
    pub params: Vec<R>,
    /// Final weighted objective (penalty included).
    pub objective: R,
    pub grad_norm: R,
    pub iterations: usize,
    pub converged: bool,
}

/// Spin projection of a computational basis label under the even-up /
/// odd-down qubit convention.
pub fn spin_z_of_label<R: Real>(bits: &str) -> R {
    let n = bits.len();
    let mut acc = 0i64;
    for (i, ch) in bits.chars().enumerate() {
        if ch == '1' {
            let q = n - 1 - i;
            acc += if q % 2 == 0 { 1 } else { -1 };
        }
    }
    R::of(acc as f64 * 0.5)
}

/// Dense real-symmetric matrix of a hermitian Pauli sum; the qubit map of a
/// real-integral Hamiltonian has no imaginary entries left after merging.
pub fn dense_real_matrix<R: Real>(h: &PauliSum<R>) -> Result<Vec<R>> {
    let m = pauli_sum_to_matrix(h)?;
    let tol = R::of(1e-9);
    let mut out = vec![R::zero(); m.len()];
    for (i, v) in m.iter().enumerate() {
        if v.im.abs() > tol {
            return Err(CoreError::Numeric(format!(
                "dense matrix entry {} has imaginary part {:e}",
                i, v.im
            )));
        }
        out[i] = v.re;
    }
    Ok(out)
}

/// `H + zeta (S_z - s)^2` with `s` read off the first reference state.
fn objective_operator<R: Real>(h: &PauliSum<R>, cfg: &SsvqeConfig<R>) -> Result<PauliSum<R>> {
    if cfg.spin_penalty == R::zero() {
        return Ok(h.clone());
    }
    let target = spin_z_of_label::<R>(&cfg.initial_states[0]);
    let sz = spin_z_operator::<R>(h.n_qubits)?;
    let shifted = sz.add(&PauliSum::from_terms(
        h.n_qubits,
        [(C::new(-target, R::zero()), PauliString::IDENTITY)],
    )?)?;
    let squared = shifted.mul(&shifted)?;
    h.add(&squared.scaled(C::new(cfg.spin_penalty, R::zero())))
}

fn quadratic_form<R: Real>(matrix: &[R], dim: usize, state: &Statevector<R>) -> R {
    // The circuit is real orthogonal on real references, so imaginary parts
    // are identically zero and the form reduces to a real one.
    let mut acc = R::zero();
    for i in 0..dim {
        let ai = state.amps[i].re;
        if ai == R::zero() {
            continue;
        }
        let row = &matrix[i * dim..(i + 1) * dim];
        let mut inner = R::zero();
        for j in 0..dim {
            inner += row[j] * state.amps[j].re;
        }
        acc += ai * inner;
    }
    acc
}

/// One optimization run. `warm_start` seeds the angles when given; otherwise
/// they are drawn small and random from the configured seed.
pub fn solve<R: Real>(
    h: &PauliSum<R>,
    cfg: &SsvqeConfig<R>,
    warm_start: Option<&[R]>,
) -> Result<SsvqeSolution<R>> {
    cfg.validate(h.n_qubits)?;
    let circuit = AnsatzCircuit::brick_wall(h.n_qubits, cfg.depth);
    let n_params = circuit.n_parameters();
    if let Some(w) = warm_start {
        if w.len() != n_params {
            return Err(CoreError::Arity {
                expected: n_params,
                got: w.len(),
            });
        }
    }

    let obj_matrix = dense_real_matrix(&objective_operator(h, cfg)?)?;
    let phys_matrix = dense_real_matrix(h)?;
    let dim = 1usize << h.n_qubits;

    let x0: Vec<R> = match warm_start {
        Some(w) => w.to_vec(),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            (0..n_params)
                .map(|_| R::of(rng.gen_range(-0.1..0.1)))
                .collect()
        }
    };

    let refs = &cfg.initial_states;
    let weights = &cfg.weights;
    let objective = |params: &[R]| -> R {
        let mut total = R::zero();
        for (bits, &w) in refs.iter().zip(weights.iter()) {
            let state = circuit
                .prepare(params, bits)
                .expect("reference states validated against circuit width");
            total += w * quadratic_form(&obj_matrix, dim, &state);
        }
        total
    };

    let opts = BfgsOptions {
        grad_tol: cfg.grad_tol,
        max_iters: cfg.max_iters,
        fd_step: R::of(1e-4),
    };
    let fit = minimize(objective, &x0, &opts);

    // Rank the optimized states by physical energy.
    let mut ranked: Vec<(R, usize)> = refs
        .iter()
        .enumerate()
        .map(|(k, bits)| {
            let state = circuit.prepare(&fit.x, bits).expect("validated");
            (quadratic_form(&phys_matrix, dim, &state), k)
        })
        .collect();
    ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("energies are finite"));

    Ok(SsvqeSolution {
        energies: ranked.iter().map(|&(e, _)| e).collect(),
        order: ranked.iter().map(|&(_, k)| k).collect(),
        params: fit.x,
        objective: fit.value,
        grad_norm: fit.grad_norm,
        iterations: fit.iterations,
        converged: fit.converged,
    })
}

/// Best of several seeded runs; restart seeds are consecutive so results are
/// reproducible. A warm start, when given, is tried first and kept if no
/// restart beats it by more than stagnation noise.
pub fn solve_multistart<R: Real>(
    h: &PauliSum<R>,
    cfg: &SsvqeConfig<R>,
    warm_start: Option<&[R]>,
    restarts: usize,
) -> Result<SsvqeSolution<R>> {
    let mut best = solve(h, cfg, warm_start)?;
    for k in 0..restarts {
        let mut alt = cfg.clone();
        alt.seed = cfg.seed.wrapping_add(1 + k as u64);
        let trial = solve(h, &alt, None)?;
        if trial.objective < best.objective {
            best = trial;
        }
    }
    Ok(best)
}

/// Optimized states in ascending-energy order, re-prepared from a solution.
pub fn sorted_states<R: Real>(
    h_qubits: usize,
    cfg: &SsvqeConfig<R>,
    solution: &SsvqeSolution<R>,
) -> Result<Vec<Statevector<R>>> {
    let circuit = AnsatzCircuit::brick_wall(h_qubits, cfg.depth);
    solution
        .order
        .iter()
        .map(|&k| circuit.prepare(&solution.params, &cfg.initial_states[k]))
        .collect()
}
