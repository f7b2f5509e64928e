//! Closed-form two-surface test model with a conical seam.
//!
//! Three electronic levels over the internal coordinates `(s, theta)`
//! (symmetric stretch and bond angle): a well-separated ground bowl for
//! preparing the initial packet, and a diabatic pair whose gap changes
//! sign along the line `theta = seam_theta` under a small constant-sign
//! coupling. Adiabatic energies, derivative couplings, and the one-body
//! integral files that reproduce them through the electronic solver are
//! all available in closed form, which makes the model an end-to-end
//! oracle for the solver, the coupling extraction, and the propagation.

use crate::error::{CoreError, Result};
use crate::hamiltonian_io::ActiveSpaceIntegrals;
use crate::scalar::Real;

/// Model constants. `standard()` places the seam inside the default grid
/// window with a passage probability around 40 percent for a packet
/// released from the ground-state geometry on the upper surface.
#[derive(Debug, Clone)]
pub struct TwoSurfaceModel<R> {
    /// Ground bowl: center and curvatures.
    pub ground_center: (R, R),
    pub ground_k: (R, R),
    /// Reference stretch for all state-specific terms.
    pub stretch_ref: R,
    /// Lower diabat: offset, curvatures, angular center.
    pub a_offset: R,
    pub a_k: (R, R),
    pub a_theta: R,
    /// Gap function `(slope + tilt (s - ref)) (seam_theta - theta)`.
    pub seam_theta: R,
    pub seam_slope: R,
    pub seam_tilt: R,
    /// Diabatic coupling `w0 (1 + w1 (s - ref))`.
    pub w0: R,
    pub w1: R,
}

impl<R: Real> TwoSurfaceModel<R> {
    pub fn standard() -> Self {
        TwoSurfaceModel {
            ground_center: (R::of(1.90), R::of(1.85)),
            ground_k: (R::of(0.20), R::of(0.08)),
            stretch_ref: R::of(2.0),
            a_offset: R::of(0.98),
            a_k: (R::of(0.20), R::of(0.030)),
            a_theta: R::of(2.90),
            seam_theta: R::of(2.45),
            seam_slope: R::of(0.075),
            seam_tilt: R::of(0.004),
            w0: R::of(0.002),
            w1: R::of(0.15),
        }
    }

    /// Ground-state potential, the bowl the initial packet is drawn from.
    pub fn v_ground(&self, s: R, theta: R) -> R {
        let ds = s - self.ground_center.0;
        let dt = theta - self.ground_center.1;
        self.ground_k.0 * ds * ds + self.ground_k.1 * dt * dt
    }

    /// Diabatic pair `(v_a, v_b, w)` at one geometry.
    pub fn diabats(&self, s: R, theta: R) -> (R, R, R) {
        let ds = s - self.stretch_ref;
        let dt = theta - self.a_theta;
        let va = self.a_offset + self.a_k.0 * ds * ds + self.a_k.1 * dt * dt;
        let g = (self.seam_slope + self.seam_tilt * ds) * (self.seam_theta - theta);
        let w = self.w0 * (R::one() + self.w1 * ds);
        (va, va + g, w)
    }

    /// Adiabatic data at one geometry: the three level energies, the
    /// derivative coupling between the upper pair, and their gap.
    ///
    /// The couplings are reported in the convention the extraction stage
    /// produces: the mean over the two hydrogens of per-unit-displacement
    /// projections. Moving one atom radially changes `s` by half the
    /// displacement, and moving it along its arc changes `theta` by the
    /// displacement over the bond length, so `f_s` is half the plain
    /// `d/ds` coupling and `f_theta` is the plain `d/dtheta` coupling
    /// divided by `s`.
    pub fn eval(&self, s: R, theta: R) -> ModelPoint<R> {
        let (va, vb, w) = self.diabats(s, theta);
        let ds = s - self.stretch_ref;
        let half = R::of(0.5);
        let delta = (vb - va) * half;
        let d_delta_s = self.seam_tilt * (self.seam_theta - theta) * half;
        let d_delta_t = -(self.seam_slope + self.seam_tilt * ds) * half;
        let dw_s = self.w0 * self.w1;
        let dw_t = R::zero();
        let root = (delta * delta + w * w).sqrt();
        let vbar = (va + vb) * half;
        let denom = R::of(2.0) * (delta * delta + w * w);
        ModelPoint {
            v_ground: self.v_ground(s, theta),
            v_lower: vbar - root,
            v_upper: vbar + root,
            f_s: half * (w * d_delta_s - delta * dw_s) / denom,
            f_theta: (w * d_delta_t - delta * dw_t) / (denom * s),
            gap: R::of(2.0) * root,
        }
    }

    /// The three-level electronic matrix in the diabatic orbital basis,
    /// row-major: ground decoupled, the pair mixed by `w`.
    pub fn hole_matrix(&self, s: R, theta: R) -> [R; 9] {
        let (va, vb, w) = self.diabats(s, theta);
        let vx = self.v_ground(s, theta);
        let z = R::zero();
        [vx, z, z, z, va, w, z, w, vb]
    }

    /// One-body integrals whose single-hole sector realizes `hole_matrix`
    /// at the internals of the given geometry. With every orbital doubly
    /// occupied, removing one electron from orbital `p` costs `h1(p, p)`
    /// against the full-shell energy, and hole hopping picks up the
    /// off-diagonal elements, so `h1 = E_full I - M` elementwise with
    /// `E_full = (2/5) tr M` once the scalar core term is set to zero.
    pub fn integrals(&self, r1: R, r2: R, theta: R) -> ActiveSpaceIntegrals<R> {
        let s = (r1 + r2) * R::of(0.5);
        let m = self.hole_matrix(s, theta);
        let e_full = R::of(0.4) * (m[0] + m[4] + m[8]);
        let mut ints = ActiveSpaceIntegrals::new(3, 5);
        for p in 0..3 {
            for q in 0..3 {
                let v = if p == q {
                    e_full - m[4 * p]
                } else {
                    -m[3 * p + q]
                };
                ints.set_h1(p, q, v);
            }
        }
        ints
    }

    /// Integral file text for one geometry, parseable back by the reader.
    pub fn fcidump_text(&self, r1: R, r2: R, theta: R) -> String {
        let ints = self.integrals(r1, r2, theta);
        let mut out = String::from("&FCI NORB=3,NELEC=5,MS2=-1,\n ORBSYM=1,1,1,\n ISYM=1,\n&END\n");
        for p in 0..3 {
            for q in 0..=p {
                let v: R = ints.h1(p, q);
                if v != R::zero() {
                    out.push_str(&format!("{:.17e} {} {} 0 0\n", v.as_f64(), p + 1, q + 1));
                }
            }
        }
        out.push_str("0.0 0 0 0 0\n");
        out
    }

    /// Surface and coupling fields on a rectangular grid, r-major, with
    /// the grid's radial coordinate read as the symmetric stretch.
    pub fn fields_on_grid(&self, rs: &[R], thetas: &[R]) -> GridFields<R> {
        let n = rs.len() * thetas.len();
        let mut f = GridFields {
            v_ground: Vec::with_capacity(n),
            v_lower: Vec::with_capacity(n),
            v_upper: Vec::with_capacity(n),
            f_r: Vec::with_capacity(n),
            f_theta: Vec::with_capacity(n),
        };
        for &s in rs {
            for &t in thetas {
                let p = self.eval(s, t);
                f.v_ground.push(p.v_ground);
                f.v_lower.push(p.v_lower);
                f.v_upper.push(p.v_upper);
                f.f_r.push(p.f_s);
                f.f_theta.push(p.f_theta);
            }
        }
        f
    }
}

/// Everything the model knows at one geometry.
#[derive(Debug, Clone, Copy)]
pub struct ModelPoint<R> {
    pub v_ground: R,
    pub v_lower: R,
    pub v_upper: R,
    /// Coupling between the two upper adiabats along the stretch, 1/bohr,
    /// in the per-atom mean convention (half the plain `d/ds` value).
    pub f_s: R,
    /// Same along the bond angle: the plain `d/dtheta` value over `s`.
    pub f_theta: R,
    pub gap: R,
}

/// Model fields evaluated over a grid, r-major.
#[derive(Debug, Clone)]
pub struct GridFields<R> {
    pub v_ground: Vec<R>,
    pub v_lower: Vec<R>,
    pub v_upper: Vec<R>,
    pub f_r: Vec<R>,
    pub f_theta: Vec<R>,
}

/// Hydrogen positions in the molecular (y, z) plane, oxygen at the origin.
#[derive(Debug, Clone, Copy)]
pub struct Geometry<R> {
    pub h1: (R, R),
    pub h2: (R, R),
}

/// Symmetric placement: the angle bisector points down the z axis and the
/// two hydrogens open by `theta` between the bonds.
pub fn place_atoms<R: Real>(r1: R, r2: R, theta: R) -> Geometry<R> {
    let (sn, cs) = (theta * R::of(0.5)).sin_cos();
    Geometry {
        h1: (-r1 * sn, -r1 * cs),
        h2: (r2 * sn, -r2 * cs),
    }
}

/// Bond lengths and bond angle of an arbitrary planar geometry.
pub fn internals<R: Real>(g: &Geometry<R>) -> (R, R, R) {
    let r1 = (g.h1.0 * g.h1.0 + g.h1.1 * g.h1.1).sqrt();
    let r2 = (g.h2.0 * g.h2.0 + g.h2.1 * g.h2.1).sqrt();
    let cos = (g.h1.0 * g.h2.0 + g.h1.1 * g.h2.1) / (r1 * r2);
    (r1, r2, cos.min(R::one()).max(-R::one()).acos())
}

/// Displacement labels in the order the coupling extraction expects.
pub const DISPLACEMENT_LABELS: [&str; 9] = [
    "center", "y1_plus", "y1_minus", "z1_plus", "z1_minus", "y2_plus", "y2_minus", "z2_plus",
    "z2_minus",
];

/// The undisplaced geometry followed by the eight single-atom Cartesian
/// displacements, in `DISPLACEMENT_LABELS` order.
pub fn displaced_geometries<R: Real>(r: R, theta: R, delta: R) -> Result<Vec<Geometry<R>>> {
    if !(delta > R::zero()) || !delta.is_finite() {
        return Err(CoreError::Config(format!(
            "displacement must be positive, got {}",
            delta.as_f64()
        )));
    }
    let base = place_atoms(r, r, theta);
    let mut out = Vec::with_capacity(9);
    out.push(base);
    for (atom, axis) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        for sign in [R::one(), -R::one()] {
            let mut g = base;
            let target = if atom == 0 { &mut g.h1 } else { &mut g.h2 };
            if axis == 0 {
                target.0 += sign * delta;
            } else {
                target.1 += sign * delta;
            }
            out.push(g);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::GridSpec;
    use crate::hamiltonian_io::{build_fermionic_hamiltonian, fermion_to_matrix, jordan_wigner};
    use crate::linalg::eigh_symmetric;
    use crate::nac::{point_nac, DisplacedSet};
    use crate::qsim::Statevector;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const N_QUBITS: usize = 6;
    const DIM: usize = 1 << N_QUBITS;

    /// Basis indices of the three spin-up hole states: all six spin
    /// orbitals filled except qubit 2k.
    fn hole_indices() -> [usize; 3] {
        let full = DIM - 1;
        [full ^ 1, full ^ 4, full ^ 16]
    }

    fn hole_block(dense: &[f64]) -> [f64; 9] {
        let idx = hole_indices();
        let mut block = [0.0; 9];
        for p in 0..3 {
            for q in 0..3 {
                block[3 * p + q] = dense[idx[p] * DIM + idx[q]];
            }
        }
        block
    }

    fn dense_from_text(model: &TwoSurfaceModel<f64>, r1: f64, r2: f64, theta: f64) -> Vec<f64> {
        let text = model.fcidump_text(r1, r2, theta);
        let ints = crate::hamiltonian_io::parse_fcidump_str::<f64>(&text, "model").unwrap();
        let op = build_fermionic_hamiltonian(&ints);
        fermion_to_matrix(&op).unwrap()
    }

    #[test]
    fn levels_stay_ordered_and_gapped_on_the_standard_grid() {
        let model = TwoSurfaceModel::<f64>::standard();
        let grid = GridSpec::<f64>::standard();
        let floor = 2.0 * model.w0 * (1.0 + model.w1 * (grid.r_min - model.stretch_ref));
        assert!(floor > crate::nac::GAP_FLOOR * 10.0);
        for &s in &grid.rs() {
            for &t in &grid.thetas() {
                let p = model.eval(s, t);
                assert!(
                    p.v_ground < p.v_lower - 0.05,
                    "ground level reaches the pair at ({s}, {t})"
                );
                assert!(p.gap >= floor - 1e-12, "gap {} at ({s}, {t})", p.gap);
                assert!(p.f_s.is_finite() && p.f_theta.is_finite());
            }
        }
    }

    #[test]
    fn adiabats_are_the_spectrum_of_the_three_level_matrix() {
        let model = TwoSurfaceModel::<f64>::standard();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let s = rng.gen_range(1.0..3.5);
            let t = rng.gen_range(0.6..3.1);
            let eig = eigh_symmetric(&model.hole_matrix(s, t), 3).unwrap();
            let p = model.eval(s, t);
            for (have, want) in eig.values.iter().zip([p.v_ground, p.v_lower, p.v_upper]) {
                assert!(
                    (have - want).abs() < 1e-12,
                    "{have} vs {want} at ({s}, {t})"
                );
            }
        }
    }

    #[test]
    fn closed_form_couplings_match_state_differentiation() {
        // Differentiate the mixed pair's lower eigenvector numerically and
        // project onto the upper one; the closed form must match in both
        // coordinates, including through the seam.
        let model = TwoSurfaceModel::<f64>::standard();
        let h = 1e-5;
        let states_at = |s: f64, t: f64| -> ([f64; 2], [f64; 2]) {
            let (va, vb, w) = model.diabats(s, t);
            let eig = eigh_symmetric(&[va, w, w, vb], 2).unwrap();
            let col = |k: usize| [eig.vectors[k], eig.vectors[2 + k]];
            let (mut lo, up) = (col(0), col(1));
            // Continuity gauge: keep the coupled component positive.
            if lo[1] < 0.0 {
                lo = [-lo[0], -lo[1]];
            }
            (lo, up)
        };
        for s in [1.5, 2.0, 2.6] {
            for t in [1.9, 2.3, 2.44, 2.6, 3.0] {
                let p = model.eval(s, t);
                // The reported values use the per-atom mean convention, so
                // the plain eigenvector derivatives are `2 f_s` and
                // `s f_theta`.
                for (axis, want) in [(0, 2.0 * p.f_s), (1, s * p.f_theta)] {
                    let (sp, tp) = if axis == 0 { (s + h, t) } else { (s, t + h) };
                    let (sm, tm) = if axis == 0 { (s - h, t) } else { (s, t - h) };
                    let (lo_p, _) = states_at(sp, tp);
                    let (lo_m, _) = states_at(sm, tm);
                    let (_, up) = states_at(s, t);
                    let fd =
                        (up[0] * (lo_p[0] - lo_m[0]) + up[1] * (lo_p[1] - lo_m[1])) / (2.0 * h);
                    let err = (fd.abs() - want.abs()).abs();
                    assert!(
                        err < 1e-6,
                        "axis {axis} at ({s}, {t}): fd {fd} vs closed {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn integral_files_reproduce_the_adiabatic_spectrum() {
        let model = TwoSurfaceModel::<f64>::standard();
        for (r1, r2, theta) in [(1.9, 1.9, 1.85), (2.1, 2.1, 2.45), (2.05, 1.95, 2.7)] {
            let dense = dense_from_text(&model, r1, r2, theta);
            let s = 0.5 * (r1 + r2);
            // Full shell sits at the designed total energy.
            let m = model.hole_matrix(s, theta);
            let e_full = 0.4 * (m[0] + m[4] + m[8]);
            let full = DIM - 1;
            assert!((dense[full * DIM + full] - e_full).abs() < 1e-12);
            // The spin-up hole block carries the three surface energies.
            let eig = eigh_symmetric(&hole_block(&dense), 3).unwrap();
            let p = model.eval(s, theta);
            for (have, want) in eig.values.iter().zip([p.v_ground, p.v_lower, p.v_upper]) {
                assert!(
                    (have - want).abs() < 1e-10,
                    "{have} vs {want} at ({r1}, {r2}, {theta})"
                );
            }
        }
    }

    #[test]
    fn displaced_geometries_recover_their_internals() {
        let gs = displaced_geometries::<f64>(2.1, 2.4, 1e-3).unwrap();
        let (r1, r2, theta) = internals(&gs[0]);
        assert!((r1 - 2.1).abs() < 1e-12 && (r2 - 2.1).abs() < 1e-12);
        assert!((theta - 2.4).abs() < 1e-12);
        // Each displacement moves exactly one coordinate of one hydrogen.
        for (k, g) in gs.iter().enumerate().skip(1) {
            let moved = [
                (g.h1.0 - gs[0].h1.0).abs(),
                (g.h1.1 - gs[0].h1.1).abs(),
                (g.h2.0 - gs[0].h2.0).abs(),
                (g.h2.1 - gs[0].h2.1).abs(),
            ];
            let nonzero: Vec<usize> = (0..4).filter(|&i| moved[i] > 0.0).collect();
            assert_eq!(nonzero, vec![(k - 1) / 2], "displacement {k}");
            assert!((moved[(k - 1) / 2] - 1e-3).abs() < 1e-15);
        }
        assert!(displaced_geometries::<f64>(2.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn released_packet_crosses_the_seam_and_transfers() {
        use crate::dynamics::{
            ground_wavepacket, propagate, CapSpec, DynamicsSetup, PropagationConfig, AU_TIME_FS,
            MASS_HYDROGEN,
        };
        let model = TwoSurfaceModel::<f64>::standard();
        let grid = GridSpec::<f64>::standard();
        let f = model.fields_on_grid(&grid.rs(), &grid.thetas());
        let (_e0, psi) = ground_wavepacket(&grid, MASS_HYDROGEN, &f.v_ground).unwrap();
        let setup = DynamicsSetup {
            grid,
            mass: MASS_HYDROGEN,
            v_lower: f.v_lower,
            v_upper: f.v_upper,
            f_r: f.f_r,
            f_theta: f.f_theta,
            cap: CapSpec::standard(),
        };
        let dt = 0.35;
        let n_steps = (16.0 / AU_TIME_FS / dt) as usize;
        let config = PropagationConfig {
            dt: Some(dt),
            n_steps,
            record_stride: n_steps / 100,
            snapshot_steps: Vec::new(),
        };
        let out = propagate(&setup, &psi, &config).unwrap();
        let fs = |s: &crate::dynamics::PopulationSample<f64>| s.time_au * AU_TIME_FS;
        for s in &out.series {
            assert!(
                (s.total - 1.0).abs() < 1e-8,
                "budget {} at {}",
                s.total,
                fs(s)
            );
            // Upper population holds until the packet reaches the seam.
            if fs(s) < 2.0 {
                assert!(
                    s.p_upper > 0.995,
                    "early decay {} at {}fs",
                    s.p_upper,
                    fs(s)
                );
            }
        }
        // Through the crossing window the de-excitation is monotone.
        let window: Vec<f64> = out
            .series
            .iter()
            .filter(|s| fs(s) >= 3.0 && fs(s) <= 9.5)
            .map(|s| s.p_upper)
            .collect();
        assert!(window.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        assert!(window[0] - window[window.len() - 1] > 0.9);
        // By the end the grid is drained and a substantial transferred
        // fraction has left through the lower surface's edge.
        let last = out.series.last().unwrap();
        assert!(last.p_upper < 0.05 && last.p_lower < 0.05);
        assert!(
            last.absorbed_lower > 0.3,
            "absorbed {}",
            last.absorbed_lower
        );
        assert!(last.absorbed_lower + last.absorbed_upper > 0.93);
    }

    #[test]
    fn cartesian_displacements_recover_the_internal_couplings() {
        // Run the full extraction chain on model-generated integral files
        // and compare against the closed form, up to the overall state
        // sign the extraction is free to choose.
        let model = TwoSurfaceModel::<f64>::standard();
        let (r, theta, delta) = (2.0, 2.30, 1e-3);
        let geoms = displaced_geometries::<f64>(r, theta, delta).unwrap();
        let sums: Vec<_> = geoms
            .iter()
            .map(|g| {
                let (r1, r2, th) = internals(g);
                let ints = model.integrals(r1, r2, th);
                let op = build_fermionic_hamiltonian(&ints);
                jordan_wigner(&op).unwrap()
            })
            .collect();

        let dense = dense_from_text(&model, r, r, theta);
        let eig = eigh_symmetric(&hole_block(&dense), 3).unwrap();
        let idx = hole_indices();
        let states: Vec<Statevector<f64>> = (0..3)
            .map(|k| {
                let mut sv = Statevector::basis_state(N_QUBITS, "111111").unwrap();
                sv.amps[DIM - 1].re = 0.0;
                for p in 0..3 {
                    sv.amps[idx[p]].re = eig.vectors[3 * p + k];
                }
                sv
            })
            .collect();

        let displaced = DisplacedSet {
            y1: (&sums[1], &sums[2]),
            z1: (&sums[3], &sums[4]),
            y2: (&sums[5], &sums[6]),
            z2: (&sums[7], &sums[8]),
        };
        let point = point_nac(&states, &eig.values, &displaced, delta, theta).unwrap();

        let want = model.eval(r, theta);
        let pair = point.pair(1, 2).unwrap();
        assert!(!pair.masked);
        let direct = ((pair.f_r - want.f_s).powi(2) + (pair.f_theta - want.f_theta).powi(2)).sqrt();
        let flipped =
            ((pair.f_r + want.f_s).powi(2) + (pair.f_theta + want.f_theta).powi(2)).sqrt();
        assert!(
            direct.min(flipped) < 5e-4,
            "couplings ({}, {}) vs closed form ({}, {})",
            pair.f_r,
            pair.f_theta,
            want.f_s,
            want.f_theta
        );
        // The mirror symmetry of the placement makes both hydrogens agree.
        assert!(pair.residual_r < 1e-9 && pair.residual_theta < 1e-9);
        // The ground level is built decoupled from the pair.
        for other in [point.pair(0, 1).unwrap(), point.pair(0, 2).unwrap()] {
            assert!(other.f_r.abs() < 1e-9 && other.f_theta.abs() < 1e-9);
        }
    }
}
