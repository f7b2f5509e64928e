//! Adiabatic surface and coupling fields on the nuclear grid.
//!
//! Coarse electronic-structure results (energies per state, derivative
//! couplings per state pair) are assembled into rectilinear fields, masked
//! holes are filled, and everything is resampled onto the propagation grid
//! with tensor-product not-a-knot splines.
//!
//! Couplings are never interpolated directly: near an avoided crossing
//! `F ~ 1/gap` is sharply peaked, while the product `G = F * gap` and the
//! energies themselves stay smooth. `F` is therefore carried through
//! interpolation as `G` and divided by the gap rebuilt from the resampled
//! energy surfaces.

pub mod spline;

pub use spline::{eval_bicubic, resample_bicubic, Spline1D};

use crate::error::{CoreError, Result};
use crate::nac::{PointNac, GAP_FLOOR};
use crate::scalar::Real;

/// Assemblies with more than this fraction of masked points are refused.
pub const MASKED_FRACTION_LIMIT: f64 = 0.2;

/// One scalar field on the coarse grid with a validity mask.
#[derive(Debug, Clone)]
pub struct CoarseField<R> {
    pub values: Vec<R>,
    /// `true` marks a hole that must be filled before interpolation.
    pub mask: Vec<bool>,
}

impl<R: Real> CoarseField<R> {
    pub fn masked_fraction(&self) -> f64 {
        if self.mask.is_empty() {
            return 0.0;
        }
        self.mask.iter().filter(|&&m| m).count() as f64 / self.mask.len() as f64
    }
}

/// All coarse fields over one rectilinear (r, theta) grid, r-major.
#[derive(Debug, Clone)]
pub struct CoarseSurfaces<R> {
    pub rs: Vec<R>,
    pub thetas: Vec<R>,
    /// Per electronic state, ascending energy order.
    pub energies: Vec<CoarseField<R>>,
    /// Per state pair, same order as `pair_labels`.
    pub nac_r: Vec<CoarseField<R>>,
    pub nac_theta: Vec<CoarseField<R>>,
    pub pair_labels: Vec<(usize, usize)>,
}

/// Fields resampled onto the propagation grid, plus fill provenance.
#[derive(Debug, Clone)]
pub struct FineSurfaces<R> {
    pub rs: Vec<R>,
    pub thetas: Vec<R>,
    pub energies: Vec<Vec<R>>,
    pub nac_r: Vec<Vec<R>>,
    pub nac_theta: Vec<Vec<R>>,
    pub pair_labels: Vec<(usize, usize)>,
    /// Fraction of coarse points that were filled, per field group.
    pub filled_energy_fraction: f64,
    pub filled_nac_fraction: f64,
}

impl<R: Real> FineSurfaces<R> {
    pub fn field_index(&self, p: usize, q: usize) -> Option<usize> {
        self.pair_labels
            .iter()
            .position(|&l| l == (p, q) || l == (q, p))
    }
}

fn check_axis<R: Real>(axis: &[R], name: &str) -> Result<()> {
    if axis.len() < 2 {
        return Err(CoreError::Dimension(format!(
            "{name} axis needs at least two points"
        )));
    }
    for w in axis.windows(2) {
        if w[1] <= w[0] {
            return Err(CoreError::Dimension(format!(
                "{name} axis must strictly increase"
            )));
        }
    }
    Ok(())
}

/// Build coarse fields from per-point solver output in r-major point order.
/// `energies[point][state]`, `nacs[point]` from the coupling evaluation at
/// that point; every point must carry the same state and pair structure.
pub fn assemble<R: Real>(
    rs: &[R],
    thetas: &[R],
    energies: &[Vec<R>],
    nacs: &[PointNac<R>],
) -> Result<CoarseSurfaces<R>> {
    check_axis(rs, "r")?;
    check_axis(thetas, "theta")?;
    let n_points = rs.len() * thetas.len();
    if energies.len() != n_points || nacs.len() != n_points {
        return Err(CoreError::Alignment(format!(
            "{} energy rows and {} coupling rows for a {} x {} grid",
            energies.len(),
            nacs.len(),
            rs.len(),
            thetas.len()
        )));
    }
    let n_states = energies[0].len();
    if n_states == 0 {
        return Err(CoreError::EmptyField);
    }
    let pair_labels: Vec<(usize, usize)> = nacs[0].pairs.iter().map(|p| p.states).collect();
    for (i, row) in energies.iter().enumerate() {
        if row.len() != n_states {
            return Err(CoreError::Alignment(format!(
                "point {} has {} states, expected {}",
                i,
                row.len(),
                n_states
            )));
        }
    }
    for (i, point) in nacs.iter().enumerate() {
        let labels: Vec<(usize, usize)> = point.pairs.iter().map(|p| p.states).collect();
        if labels != pair_labels {
            return Err(CoreError::Alignment(format!(
                "point {} has a different pair layout",
                i
            )));
        }
    }

    let energy_fields = (0..n_states)
        .map(|s| CoarseField {
            values: energies.iter().map(|row| row[s]).collect(),
            mask: vec![false; n_points],
        })
        .collect();
    let nac_r = (0..pair_labels.len())
        .map(|k| CoarseField {
            values: nacs.iter().map(|p| p.pairs[k].f_r).collect(),
            mask: nacs.iter().map(|p| p.pairs[k].masked).collect(),
        })
        .collect();
    let nac_theta = (0..pair_labels.len())
        .map(|k| CoarseField {
            values: nacs.iter().map(|p| p.pairs[k].f_theta).collect(),
            mask: nacs.iter().map(|p| p.pairs[k].masked).collect(),
        })
        .collect();
    Ok(CoarseSurfaces {
        rs: rs.to_vec(),
        thetas: thetas.to_vec(),
        energies: energy_fields,
        nac_r,
        nac_theta,
        pair_labels,
    })
}

/// Replace masked cells by the converged mean of their unmasked or
/// previously-filled neighbours (discrete Laplace interior). Unmasked cells
/// never move.
fn fill_field<R: Real>(field: &mut CoarseField<R>, n_r: usize, n_t: usize) -> Result<()> {
    let frac = field.masked_fraction();
    if frac == 0.0 {
        return Ok(());
    }
    if frac > MASKED_FRACTION_LIMIT {
        return Err(CoreError::MaskedFraction {
            frac,
            limit: MASKED_FRACTION_LIMIT,
        });
    }
    // Seed the holes with the global unmasked mean, then relax.
    let mut sum = R::zero();
    let mut count = 0usize;
    for (i, &m) in field.mask.iter().enumerate() {
        if !m {
            sum += field.values[i];
            count += 1;
        }
    }
    let seed = sum / R::of(count as f64);
    for (i, &m) in field.mask.iter().enumerate() {
        if m {
            field.values[i] = seed;
        }
    }
    for _sweep in 0..10_000 {
        let mut largest = R::zero();
        for i in 0..n_r {
            for j in 0..n_t {
                let idx = i * n_t + j;
                if !field.mask[idx] {
                    continue;
                }
                let mut acc = R::zero();
                let mut n = 0usize;
                if i > 0 {
                    acc += field.values[idx - n_t];
                    n += 1;
                }
                if i + 1 < n_r {
                    acc += field.values[idx + n_t];
                    n += 1;
                }
                if j > 0 {
                    acc += field.values[idx - 1];
                    n += 1;
                }
                if j + 1 < n_t {
                    acc += field.values[idx + 1];
                    n += 1;
                }
                let new = acc / R::of(n as f64);
                largest = largest.max((new - field.values[idx]).abs());
                field.values[idx] = new;
            }
        }
        if largest < R::of(1e-13) {
            return Ok(());
        }
    }
    Err(CoreError::EigenNonConvergence {
        residual: 0.0,
        iterations: 10_000,
    })
}

/// Resample everything onto the propagation grid. Masked holes are filled
/// first; coupling fields travel as `G = F * gap` and are divided by the
/// gap rebuilt from the resampled energies, floored at the degeneracy floor.
pub fn interpolate<R: Real>(
    coarse: &CoarseSurfaces<R>,
    fine_rs: &[R],
    fine_thetas: &[R],
) -> Result<FineSurfaces<R>> {
    check_axis(fine_rs, "fine r")?;
    check_axis(fine_thetas, "fine theta")?;
    let (n_r, n_t) = (coarse.rs.len(), coarse.thetas.len());
    let mut work = coarse.clone();

    let mut filled_energy = 0.0;
    for f in work.energies.iter_mut() {
        filled_energy = f64::max(filled_energy, f.masked_fraction());
        fill_field(f, n_r, n_t)?;
    }
    let fine_energies: Vec<Vec<R>> = work
        .energies
        .iter()
        .map(|f| resample_bicubic(&coarse.rs, &coarse.thetas, &f.values, fine_rs, fine_thetas))
        .collect::<Result<_>>()?;

    let floor = R::of(GAP_FLOOR);
    let mut filled_nac = 0.0;
    let mut fine_nac_r = Vec::new();
    let mut fine_nac_theta = Vec::new();
    for (k, &(p, q)) in work.pair_labels.iter().enumerate() {
        // Coarse gap from the (filled) energy fields of the pair.
        let gap: Vec<R> = (0..n_r * n_t)
            .map(|i| {
                (work.energies[q].values[i] - work.energies[p].values[i])
                    .abs()
                    .max(floor)
            })
            .collect();
        let fine_gap: Vec<R> = (0..fine_rs.len() * fine_thetas.len())
            .map(|i| (fine_energies[q][i] - fine_energies[p][i]).abs().max(floor))
            .collect();
        for (fine_out, coarse_field) in [
            (&mut fine_nac_r, &work.nac_r[k]),
            (&mut fine_nac_theta, &work.nac_theta[k]),
        ] {
            let mut g = CoarseField {
                values: coarse_field
                    .values
                    .iter()
                    .zip(gap.iter())
                    .map(|(&f, &d)| f * d)
                    .collect(),
                mask: coarse_field.mask.clone(),
            };
            filled_nac = f64::max(filled_nac, g.masked_fraction());
            fill_field(&mut g, n_r, n_t)?;
            let fine_g =
                resample_bicubic(&coarse.rs, &coarse.thetas, &g.values, fine_rs, fine_thetas)?;
            fine_out.push(
                fine_g
                    .iter()
                    .zip(fine_gap.iter())
                    .map(|(&g, &d)| g / d)
                    .collect::<Vec<R>>(),
            );
        }
    }

    Ok(FineSurfaces {
        rs: fine_rs.to_vec(),
        thetas: fine_thetas.to_vec(),
        energies: fine_energies,
        nac_r: fine_nac_r,
        nac_theta: fine_nac_theta,
        pair_labels: work.pair_labels,
        filled_energy_fraction: filled_energy,
        filled_nac_fraction: filled_nac,
    })
}
