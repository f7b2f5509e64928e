//! First-order derivative couplings between adiabatic states.
//!
//! Off-diagonal Hellmann-Feynman form: `F_pq = <p| dH/dx |q> / (E_q - E_p)`,
//! with `dH/dx` from symmetric finite differences of the electronic
//! Hamiltonian at displaced geometries.
//!
//! Geometry convention: the oxygen sits at the origin, hydrogen 1 at
//! `r1 (-sin(t/2), -cos(t/2))` and hydrogen 2 at `r2 (+sin(t/2), -cos(t/2))`
//! in the (y, z) plane, `t` the bond angle. Each hydrogen's Cartesian
//! elements are rotated onto that atom's bond and arc directions, giving an
//! independent per-atom estimate of the radial (1/bohr) and angular (1/rad)
//! coupling. The stored `F_r` and `F_t` are the means of the two estimates;
//! their disagreement is reported as a residual and vanishes identically
//! for mirror-symmetric electronic structure.

use crate::error::{CoreError, Result};
use crate::hamiltonian_io::{hamiltonian_derivative, PauliSum};
use crate::qsim::Statevector;
use crate::scalar::Real;

/// State pairs with an energy gap below this are masked instead of divided.
pub const GAP_FLOOR: f64 = 1e-5;

/// Hydrogen-disagreement level above which a point is flagged as suspect.
pub const RESIDUAL_TOLERANCE: f64 = 1e-3;

/// `<p| dH/dc |q>` for the four Cartesian displacement directions, before
/// division by the gap.
#[derive(Debug, Clone, Copy)]
pub struct CartesianElements<R> {
    pub y1: R,
    pub z1: R,
    pub y2: R,
    pub z2: R,
}

/// Internal-coordinate couplings for one ordered state pair (p < q).
#[derive(Debug, Clone, Copy)]
pub struct PairNac<R> {
    pub states: (usize, usize),
    pub f_r: R,
    pub f_theta: R,
    /// Disagreement between the two hydrogens' estimates, in 1/bohr.
    pub residual_r: R,
    pub residual_theta: R,
    pub gap: R,
    pub masked: bool,
}

impl<R: Real> PairNac<R> {
    fn masked_pair(states: (usize, usize), gap: R) -> Self {
        PairNac {
            states,
            f_r: R::zero(),
            f_theta: R::zero(),
            residual_r: R::zero(),
            residual_theta: R::zero(),
            gap,
            masked: true,
        }
    }
}

/// All state pairs at one geometry.
#[derive(Debug, Clone)]
pub struct PointNac<R> {
    pub pairs: Vec<PairNac<R>>,
}

impl<R: Real> PointNac<R> {
    pub fn pair(&self, p: usize, q: usize) -> Option<&PairNac<R>> {
        self.pairs
            .iter()
            .find(|x| x.states == (p, q) || x.states == (q, p))
    }

    pub fn max_residual(&self) -> R {
        self.pairs
            .iter()
            .fold(R::zero(), |m, p| m.max(p.residual_r).max(p.residual_theta))
    }

    pub fn any_masked(&self) -> bool {
        self.pairs.iter().any(|p| p.masked)
    }
}

/// Project per-hydrogen Cartesian matrix elements onto the grid coordinates
/// and divide by the gap. `theta` locates the undisplaced geometry.
pub fn assemble_internal<R: Real>(
    m: &CartesianElements<R>,
    theta: R,
    gap: R,
    states: (usize, usize),
) -> PairNac<R> {
    let (s, c) = (theta * R::of(0.5)).sin_cos();
    // Rotate each hydrogen's in-plane components onto its bond and opening
    // directions. The mirror symmetry makes the two atoms redundant; the
    // reported value is their mean and the residual their disagreement.
    let fr1 = (-s * m.y1 - c * m.z1) / gap;
    let fr2 = (s * m.y2 - c * m.z2) / gap;
    let ft1 = (-c * m.y1 + s * m.z1) / gap;
    let ft2 = (c * m.y2 + s * m.z2) / gap;
    let half = R::of(0.5);
    PairNac {
        states,
        f_r: half * (fr1 + fr2),
        f_theta: half * (ft1 + ft2),
        residual_r: (fr1 - fr2).abs(),
        residual_theta: (ft1 - ft2).abs(),
        gap,
        masked: false,
    }
}

/// The eight displaced Hamiltonians around one geometry, as (plus, minus)
/// per Cartesian direction.
pub struct DisplacedSet<'a, R> {
    pub y1: (&'a PauliSum<R>, &'a PauliSum<R>),
    pub z1: (&'a PauliSum<R>, &'a PauliSum<R>),
    pub y2: (&'a PauliSum<R>, &'a PauliSum<R>),
    pub z2: (&'a PauliSum<R>, &'a PauliSum<R>),
}

/// Couplings among all state pairs at one geometry. `states` and `energies`
/// come from the electronic solve at the undisplaced point, sorted ascending.
pub fn point_nac<R: Real>(
    states: &[Statevector<R>],
    energies: &[R],
    displaced: &DisplacedSet<R>,
    delta: R,
    theta: R,
) -> Result<PointNac<R>> {
    if states.len() != energies.len() {
        return Err(CoreError::Dimension(format!(
            "{} states with {} energies",
            states.len(),
            energies.len()
        )));
    }
    let d_y1 = hamiltonian_derivative(displaced.y1.0, displaced.y1.1, delta)?;
    let d_z1 = hamiltonian_derivative(displaced.z1.0, displaced.z1.1, delta)?;
    let d_y2 = hamiltonian_derivative(displaced.y2.0, displaced.y2.1, delta)?;
    let d_z2 = hamiltonian_derivative(displaced.z2.0, displaced.z2.1, delta)?;

    let floor = R::of(GAP_FLOOR);
    let mut pairs = Vec::new();
    for p in 0..states.len() {
        for q in p + 1..states.len() {
            let gap = energies[q] - energies[p];
            if gap.abs() < floor {
                pairs.push(PairNac::masked_pair((p, q), gap));
                continue;
            }
            let m = CartesianElements {
                y1: states[p].matrix_element(&d_y1, &states[q]).re,
                z1: states[p].matrix_element(&d_z1, &states[q]).re,
                y2: states[p].matrix_element(&d_y2, &states[q]).re,
                z2: states[p].matrix_element(&d_z2, &states[q]).re,
            };
            pairs.push(assemble_internal(&m, theta, gap, (p, q)));
        }
    }
    Ok(PointNac { pairs })
}

/// Resolve the arbitrary per-point signs of the electronic states so pair
/// couplings vary continuously across the grid.
///
/// Each point carries hidden state signs `s_k`; pair (p, q) scales by
/// `s_p s_q`, so the reachable corrections form four classes generated by
/// flipping `(s0 s1, s0 s2)`. A breadth-first sweep from the first unmasked
/// point picks, per point, the class that best matches the already-fixed
/// unmasked neighbours. Masked points are traversed but never used as a
/// reference.
pub fn fix_sign_continuity<R: Real>(grid: &mut [PointNac<R>], n_r: usize, n_theta: usize) {
    assert_eq!(
        grid.len(),
        n_r * n_theta,
        "grid buffer does not match its shape"
    );
    let n_pairs = match grid.first() {
        Some(p) => p.pairs.len(),
        None => return,
    };
    // Class = sign per pair channel; with three states the channel signs are
    // (a, b, a*b), with fewer than three each channel flips freely.
    let classes: Vec<Vec<R>> = if n_pairs == 3 {
        [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
            .iter()
            .map(|&(a, b)| vec![R::of(a), R::of(b), R::of(a * b)])
            .collect()
    } else {
        let mut out = Vec::new();
        for mask in 0..(1u32 << n_pairs) {
            out.push(
                (0..n_pairs)
                    .map(|k| {
                        if mask >> k & 1 == 0 {
                            R::one()
                        } else {
                            -R::one()
                        }
                    })
                    .collect(),
            );
        }
        out
    };

    let start = match grid.iter().position(|p| !p.any_masked()) {
        Some(i) => i,
        None => return,
    };
    let mut visited = vec![false; grid.len()];
    let mut finalized = vec![false; grid.len()];
    let mut queue = std::collections::VecDeque::new();
    visited[start] = true;
    queue.push_back(start);
    while let Some(idx) = queue.pop_front() {
        let (ir, it) = (idx / n_theta, idx % n_theta);
        let mut neighbours = Vec::new();
        if ir > 0 {
            neighbours.push(idx - n_theta);
        }
        if ir + 1 < n_r {
            neighbours.push(idx + n_theta);
        }
        if it > 0 {
            neighbours.push(idx - 1);
        }
        if it + 1 < n_theta {
            neighbours.push(idx + 1);
        }

        if idx != start && !grid[idx].any_masked() {
            // Score each class against every finalized unmasked neighbour;
            // merely enqueued points may still flip and cannot be trusted.
            let mut best = (R::infinity(), 0usize);
            for (ci, class) in classes.iter().enumerate() {
                let mut score = R::zero();
                let mut any = false;
                for &nb in &neighbours {
                    if !finalized[nb] || grid[nb].any_masked() {
                        continue;
                    }
                    any = true;
                    for k in 0..n_pairs {
                        let dr = grid[nb].pairs[k].f_r - class[k] * grid[idx].pairs[k].f_r;
                        let dt = grid[nb].pairs[k].f_theta - class[k] * grid[idx].pairs[k].f_theta;
                        score += dr * dr + dt * dt;
                    }
                }
                if any && score < best.0 {
                    best = (score, ci);
                }
            }
            if best.0.is_finite() {
                let class = &classes[best.1];
                for k in 0..n_pairs {
                    grid[idx].pairs[k].f_r *= class[k];
                    grid[idx].pairs[k].f_theta *= class[k];
                }
            }
        }

        finalized[idx] = true;
        for &nb in &neighbours {
            if !visited[nb] {
                visited[nb] = true;
                queue.push_back(nb);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian_io::{pauli_sum_to_matrix, PauliString};
    use crate::linalg::eigh_symmetric;
    use crate::scalar::C;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c64(re: f64, im: f64) -> C<f64> {
        C::new(re, im)
    }

    fn two_level(x: f64, cpl: f64) -> PauliSum<f64> {
        PauliSum::from_terms(
            1,
            [
                (c64(x, 0.0), PauliString::from_label("Z").unwrap()),
                (c64(cpl, 0.0), PauliString::from_label("X").unwrap()),
            ],
        )
        .unwrap()
    }

    fn eigenstates(h: &PauliSum<f64>) -> (Vec<Statevector<f64>>, Vec<f64>) {
        let dim = 1usize << h.n_qubits;
        let m = pauli_sum_to_matrix(h).unwrap();
        let mut real = vec![0.0; dim * dim];
        for i in 0..dim * dim {
            real[i] = m[i].re;
        }
        let eig = eigh_symmetric(&real, dim).unwrap();
        let states = (0..dim)
            .map(|j| Statevector {
                n_qubits: h.n_qubits,
                amps: eig.vector(j).map(|v| c64(v, 0.0)).collect(),
            })
            .collect();
        (states, eig.values)
    }

    #[test]
    fn two_level_coupling_has_the_closed_form() {
        // H(x) = x Z + c X: <0| dH/dx |1> / gap = c / (2 (x^2 + c^2)).
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let x: f64 = rng.gen_range(-1.0..1.0);
            let cpl: f64 = rng.gen_range(0.05..0.5);
            let delta = 1e-4;
            let (states, energies) = eigenstates(&two_level(x, cpl));
            let dh = hamiltonian_derivative(
                &two_level(x + delta, cpl),
                &two_level(x - delta, cpl),
                delta,
            )
            .unwrap();
            let fd = states[0].matrix_element(&dh, &states[1]).re / (energies[1] - energies[0]);
            let exact = cpl / (2.0 * (x * x + cpl * cpl));
            assert!(
                (fd.abs() - exact.abs()).abs() < 1e-6,
                "x={x} c={cpl}: {fd} vs {exact}"
            );
        }
    }

    #[test]
    fn finite_difference_error_shrinks_second_order() {
        // Nonlinear family H(l) = a sin(l) Z + b cos(l) X, so the symmetric
        // difference carries a genuine third-derivative error term.
        let (a, b, l0) = (0.8f64, 0.35f64, 0.6f64);
        let at = |l: f64| {
            PauliSum::<f64>::from_terms(
                1,
                [
                    (c64(a * l.sin(), 0.0), PauliString::from_label("Z").unwrap()),
                    (c64(b * l.cos(), 0.0), PauliString::from_label("X").unwrap()),
                ],
            )
            .unwrap()
        };
        let exact_dh = PauliSum::<f64>::from_terms(
            1,
            [
                (
                    c64(a * l0.cos(), 0.0),
                    PauliString::from_label("Z").unwrap(),
                ),
                (
                    c64(-b * l0.sin(), 0.0),
                    PauliString::from_label("X").unwrap(),
                ),
            ],
        )
        .unwrap();
        let (states, energies) = eigenstates(&at(l0));
        let gap = energies[1] - energies[0];
        let exact = states[0].matrix_element(&exact_dh, &states[1]).re / gap;
        let err = |d: f64| {
            let dh = hamiltonian_derivative(&at(l0 + d), &at(l0 - d), d).unwrap();
            (states[0].matrix_element(&dh, &states[1]).re / gap - exact).abs()
        };
        let (e1, e2) = (err(0.1), err(0.05));
        let slope = (e1 / e2).log2();
        assert!(
            (slope - 2.0).abs() < 0.2,
            "slope {slope} from errors {e1}, {e2}"
        );
    }

    #[test]
    fn mirror_symmetric_elements_give_zero_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..30 {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: f64 = rng.gen_range(-1.0..1.0);
            let theta: f64 = rng.gen_range(0.6..3.0);
            let gap: f64 = rng.gen_range(0.01..0.5);
            let m = CartesianElements {
                y1: a,
                z1: b,
                y2: -a,
                z2: b,
            };
            let out = assemble_internal(&m, theta, gap, (0, 1));
            assert!(out.residual_r.abs() < 1e-14);
            assert!(out.residual_theta.abs() < 1e-14);
            // With exact mirror elements the mean reduces to either atom's
            // projection.
            let (s, c) = (theta / 2.0).sin_cos();
            let fr1 = (-s * a - c * b) / gap;
            let ft1 = (-c * a + s * b) / gap;
            assert!((out.f_r - fr1).abs() < 1e-13);
            assert!((out.f_theta - ft1).abs() < 1e-13);
        }
    }

    #[test]
    fn asymmetric_elements_are_flagged_by_the_residual() {
        let m = CartesianElements {
            y1: 0.4,
            z1: 0.1,
            y2: -0.4,
            z2: 0.1 + 0.02,
        };
        let out = assemble_internal(&m, 1.8, 0.1, (0, 1));
        assert!(out.residual_r > RESIDUAL_TOLERANCE);
    }

    #[test]
    fn near_degenerate_pairs_are_masked() {
        let h = two_level(0.3, 0.1);
        let (states, _) = eigenstates(&h);
        let energies = vec![-1.0, -1.0 + 0.5 * GAP_FLOOR];
        let d = two_level(0.3, 0.1);
        let set = DisplacedSet {
            y1: (&d, &d),
            z1: (&d, &d),
            y2: (&d, &d),
            z2: (&d, &d),
        };
        let out = point_nac(&states, &energies, &set, 1e-3, 1.8).unwrap();
        assert!(out.pairs[0].masked);
        assert_eq!(out.pairs[0].f_r, 0.0);
    }

    #[test]
    fn point_nac_is_antisymmetric_in_the_state_order() {
        // Swapping bra and ket flips the gap and conjugates the (real)
        // matrix element, so F_qp = -F_pq by construction; check that the
        // stored p < q pair equals minus the recomputed reversed pair.
        let h = two_level(0.2, 0.15);
        let (states, energies) = eigenstates(&h);
        let delta = 1e-3;
        let hp = two_level(0.2 + delta, 0.15);
        let hm = two_level(0.2 - delta, 0.15);
        let dh = hamiltonian_derivative(&hp, &hm, delta).unwrap();
        let fwd = states[0].matrix_element(&dh, &states[1]).re / (energies[1] - energies[0]);
        let rev = states[1].matrix_element(&dh, &states[0]).re / (energies[0] - energies[1]);
        assert!((fwd + rev).abs() < 1e-12);
    }

    fn smooth_grid(n_r: usize, n_t: usize) -> Vec<PointNac<f64>> {
        let mut grid = Vec::new();
        for i in 0..n_r {
            for j in 0..n_t {
                let (x, y) = (i as f64 / n_r as f64, j as f64 / n_t as f64);
                let pairs = (0..3)
                    .map(|k| PairNac {
                        states: match k {
                            0 => (0, 1),
                            1 => (0, 2),
                            _ => (1, 2),
                        },
                        f_r: (1.0 + x + 0.3 * y) * (k + 1) as f64,
                        f_theta: (0.5 - 0.2 * x + y) * (k + 1) as f64,
                        residual_r: 0.0,
                        residual_theta: 0.0,
                        gap: 0.1,
                        masked: false,
                    })
                    .collect();
                grid.push(PointNac { pairs });
            }
        }
        grid
    }

    #[test]
    fn sign_fixing_recovers_a_smooth_field_after_random_flips() {
        let (n_r, n_t) = (5, 4);
        let reference = smooth_grid(n_r, n_t);
        let mut scrambled = reference.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in scrambled.iter_mut() {
            // Random hidden state signs; pair k feels the product of its two.
            let s: Vec<f64> = (0..3)
                .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
                .collect();
            for pair in p.pairs.iter_mut() {
                let (a, b) = pair.states;
                pair.f_r *= s[a] * s[b];
                pair.f_theta *= s[a] * s[b];
            }
        }
        fix_sign_continuity(&mut scrambled, n_r, n_t);
        // The result must equal the reference up to one global class.
        let classes = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];
        let matches = classes.iter().any(|&(a, b)| {
            let sign = [a, b, a * b];
            scrambled.iter().zip(reference.iter()).all(|(got, want)| {
                (0..3).all(|k| {
                    (got.pairs[k].f_r - sign[k] * want.pairs[k].f_r).abs() < 1e-12
                        && (got.pairs[k].f_theta - sign[k] * want.pairs[k].f_theta).abs() < 1e-12
                })
            })
        });
        assert!(matches, "field not continuous after fixing");
    }

    #[test]
    fn sign_fixing_traverses_masked_rows() {
        let (n_r, n_t) = (5, 3);
        let mut grid = smooth_grid(n_r, n_t);
        // Mask an entire interior row; the far side must still be fixed.
        for j in 0..n_t {
            for pair in grid[2 * n_t + j].pairs.iter_mut() {
                pair.masked = true;
                pair.f_r = 0.0;
                pair.f_theta = 0.0;
            }
        }
        let reference = grid.clone();
        for pair in grid[4 * n_t + 1].pairs.iter_mut() {
            let (a, b) = pair.states;
            let s = [1.0, -1.0, 1.0];
            pair.f_r *= s[a] * s[b];
            pair.f_theta *= s[a] * s[b];
        }
        fix_sign_continuity(&mut grid, n_r, n_t);
        for (got, want) in grid.iter().zip(reference.iter()) {
            for k in 0..3 {
                assert!((got.pairs[k].f_r - want.pairs[k].f_r).abs() < 1e-12);
            }
        }
    }
}
