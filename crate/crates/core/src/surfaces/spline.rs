//! Cubic spline interpolation with not-a-knot end conditions.
//!
//! Moment (second-derivative) formulation: the two end conditions demand a
//! continuous third derivative across the first and last interior knots,
//! which folds into the interior tridiagonal system after eliminating the
//! boundary moments. Degenerate sizes fall back to the unique interpolant:
//! a line through two points, a parabola through three.

use crate::error::{CoreError, Result};
use crate::linalg::solve_tridiagonal;
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct Spline1D<R> {
    xs: Vec<R>,
    ys: Vec<R>,
    moments: Vec<R>,
}

impl<R: Real> Spline1D<R> {
    pub fn fit(xs: &[R], ys: &[R]) -> Result<Self> {
        let n = xs.len();
        if n != ys.len() {
            return Err(CoreError::Alignment(format!(
                "{} knots with {} values",
                n,
                ys.len()
            )));
        }
        if n < 2 {
            return Err(CoreError::Dimension(
                "a spline needs at least two knots".into(),
            ));
        }
        for w in xs.windows(2) {
            if w[1] <= w[0] {
                return Err(CoreError::Dimension(format!(
                    "knots must strictly increase, got {} then {}",
                    w[0], w[1]
                )));
            }
        }

        let moments = match n {
            2 => vec![R::zero(); 2],
            3 => {
                // The unique parabola: constant second derivative equal to
                // twice the second divided difference.
                let d01 = (ys[1] - ys[0]) / (xs[1] - xs[0]);
                let d12 = (ys[2] - ys[1]) / (xs[2] - xs[1]);
                let m = R::of(2.0) * (d12 - d01) / (xs[2] - xs[0]);
                vec![m; 3]
            }
            _ => {
                let h: Vec<R> = xs.windows(2).map(|w| w[1] - w[0]).collect();
                let d: Vec<R> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
                let six = R::of(6.0);
                let three = R::of(3.0);

                // Interior unknowns M_1 .. M_{n-2}; boundary moments are
                // eliminated through the third-derivative continuity at the
                // first and last interior knots, which modifies the first
                // and last rows of the classical tridiagonal system.
                let m = n - 2;
                let mut lower = vec![R::zero(); m - 1];
                let mut diag = vec![R::zero(); m];
                let mut upper = vec![R::zero(); m - 1];
                let mut rhs = vec![R::zero(); m];
                for k in 0..m {
                    rhs[k] = d[k + 1] - d[k];
                }
                for k in 1..m - 1 {
                    let i = k + 1;
                    lower[k - 1] = h[i - 1] / six;
                    diag[k] = (h[i - 1] + h[i]) / three;
                    upper[k] = h[i] / six;
                }
                diag[0] = (h[0] + h[1]) * (h[0] + R::of(2.0) * h[1]) / (six * h[1]);
                upper[0] = (h[1] * h[1] - h[0] * h[0]) / (six * h[1]);
                let (ha, hb) = (h[n - 3], h[n - 2]);
                diag[m - 1] = (ha + hb) * (R::of(2.0) * ha + hb) / (six * ha);
                lower[m - 2] = (ha * ha - hb * hb) / (six * ha);
                let inner = solve_tridiagonal(&lower, &diag, &upper, &rhs)?;
                let mut moments = vec![R::zero(); n];
                moments[1..n - 1].copy_from_slice(&inner);
                // Recover the eliminated boundary moments.
                moments[0] = ((h[0] + h[1]) * moments[1] - h[0] * moments[2]) / h[1];
                moments[n - 1] =
                    ((h[n - 2] + h[n - 3]) * moments[n - 2] - h[n - 2] * moments[n - 3]) / h[n - 3];
                moments
            }
        };
        Ok(Spline1D {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            moments,
        })
    }

    /// Evaluate at `x`; outside the knot range the boundary cubic extends,
    /// callers that must not extrapolate check the hull first.
    pub fn eval(&self, x: R) -> R {
        let n = self.xs.len();
        let mut i = self.xs.partition_point(|&k| k < x);
        i = i.clamp(1, n - 1) - 1;
        let h = self.xs[i + 1] - self.xs[i];
        let a = self.xs[i + 1] - x;
        let b = x - self.xs[i];
        let six = R::of(6.0);
        self.moments[i] * a * a * a / (six * h)
            + self.moments[i + 1] * b * b * b / (six * h)
            + (self.ys[i] - self.moments[i] * h * h / six) * a / h
            + (self.ys[i + 1] - self.moments[i + 1] * h * h / six) * b / h
    }
}

fn check_hull<R: Real>(knots: &[R], targets: &[R], axis: &str) -> Result<()> {
    let lo = knots[0];
    let hi = knots[knots.len() - 1];
    let eps = R::of(1e-12) * (hi - lo).abs();
    for &t in targets {
        if t < lo - eps || t > hi + eps {
            return Err(CoreError::Extrapolation(format!(
                "{axis} = {t} outside the sampled range [{lo}, {hi}]"
            )));
        }
    }
    Ok(())
}

/// Tensor-product resampling of a rectilinear field. `values` is row-major
/// with the x index outermost. Refuses to extrapolate.
pub fn resample_bicubic<R: Real>(
    xs: &[R],
    ys: &[R],
    values: &[R],
    fine_xs: &[R],
    fine_ys: &[R],
) -> Result<Vec<R>> {
    let (nx, ny) = (xs.len(), ys.len());
    if values.len() != nx * ny {
        return Err(CoreError::Alignment(format!(
            "field of {} values on a {} x {} grid",
            values.len(),
            nx,
            ny
        )));
    }
    check_hull(xs, fine_xs, "x")?;
    check_hull(ys, fine_ys, "y")?;

    // Pass 1: along y within each coarse row.
    let mut inter = vec![R::zero(); nx * fine_ys.len()];
    for i in 0..nx {
        let row = &values[i * ny..(i + 1) * ny];
        let sp = Spline1D::fit(ys, row)?;
        for (j, &fy) in fine_ys.iter().enumerate() {
            inter[i * fine_ys.len() + j] = sp.eval(fy);
        }
    }
    // Pass 2: along x within each fine column.
    let mut out = vec![R::zero(); fine_xs.len() * fine_ys.len()];
    let mut column = vec![R::zero(); nx];
    for j in 0..fine_ys.len() {
        for i in 0..nx {
            column[i] = inter[i * fine_ys.len() + j];
        }
        let sp = Spline1D::fit(xs, &column)?;
        for (i, &fx) in fine_xs.iter().enumerate() {
            out[i * fine_ys.len() + j] = sp.eval(fx);
        }
    }
    Ok(out)
}

/// Single-point convenience over [`resample_bicubic`].
pub fn eval_bicubic<R: Real>(xs: &[R], ys: &[R], values: &[R], x: R, y: R) -> Result<R> {
    Ok(resample_bicubic(xs, ys, values, &[x], &[y])?[0])
}
