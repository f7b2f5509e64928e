//! Small dense/iterative linear algebra kit: cyclic Jacobi eigensolver for
//! real symmetric matrices, Lanczos ground-state solver for large symmetric
//! operators, and a Thomas solver for tridiagonal systems. Sizes here are
//! modest (matrices up to a few hundred, Lanczos spaces up to a few hundred
//! vectors), so robustness wins over asymptotics.

use crate::error::{CoreError, Result};
use crate::scalar::Real;

/// Eigendecomposition of a real symmetric matrix. `values` ascending;
/// `vectors` row-major with eigenvector `j` in column `j`.
#[derive(Debug, Clone)]
pub struct SymEig<R> {
    pub values: Vec<R>,
    pub vectors: Vec<R>,
    pub n: usize,
}

impl<R: Real> SymEig<R> {
    /// Component `i` of eigenvector `j`.
    pub fn vector(&self, j: usize) -> impl Iterator<Item = R> + '_ {
        (0..self.n).map(move |i| self.vectors[i * self.n + j])
    }
}

const MAX_JACOBI_SWEEPS: usize = 64;

/// Cyclic Jacobi diagonalization. `a` is row-major `n x n` and must be
/// symmetric; only symmetry to rounding is assumed (the upper triangle drives
/// the rotations).
pub fn eigh_symmetric<R: Real>(a_in: &[R], n: usize) -> Result<SymEig<R>> {
    if a_in.len() != n * n {
        return Err(CoreError::Dimension(format!(
            "eigh: matrix buffer holds {} entries, expected {}",
            a_in.len(),
            n * n
        )));
    }
    let mut a = a_in.to_vec();
    let mut v = vec![R::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = R::one();
    }
    if n == 0 {
        return Ok(SymEig {
            values: vec![],
            vectors: v,
            n,
        });
    }

    let scale = a.iter().fold(R::zero(), |m, x| m.max(x.abs()));
    if scale == R::zero() {
        return Ok(SymEig {
            values: vec![R::zero(); n],
            vectors: v,
            n,
        });
    }
    let stop = R::epsilon() * scale * R::of(n as f64);

    let mut converged = false;
    for _sweep in 0..MAX_JACOBI_SWEEPS {
        let mut off = R::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off + a[p * n + q].abs();
            }
        }
        if off <= stop {
            converged = true;
            break;
        }
        for p in 0..(n - 1) {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= R::epsilon() * scale {
                    a[p * n + q] = R::zero();
                    a[q * n + p] = R::zero();
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (R::of(2.0) * apq);
                let t = {
                    let abs_t = R::one() / (theta.abs() + (theta * theta + R::one()).sqrt());
                    if theta < R::zero() {
                        -abs_t
                    } else {
                        abs_t
                    }
                };
                let c = R::one() / (t * t + R::one()).sqrt();
                let s = t * c;
                let tau = s / (R::one() + c);

                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = R::zero();
                a[q * n + p] = R::zero();
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    let new_rp = arp - s * (arq + tau * arp);
                    let new_rq = arq + s * (arp - tau * arq);
                    a[r * n + p] = new_rp;
                    a[p * n + r] = new_rp;
                    a[r * n + q] = new_rq;
                    a[q * n + r] = new_rq;
                }
                for r in 0..n {
                    let vrp = v[r * n + p];
                    let vrq = v[r * n + q];
                    v[r * n + p] = vrp - s * (vrq + tau * vrp);
                    v[r * n + q] = vrq + s * (vrp - tau * vrq);
                }
            }
        }
    }
    if !converged {
        let mut off = R::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off + a[p * n + q].abs();
            }
        }
        return Err(CoreError::EigenNonConvergence {
            residual: off.as_f64(),
            iterations: MAX_JACOBI_SWEEPS,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<R> = (0..n).map(|i| a[i * n + i]).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).expect("eigenvalue NaN"));
    let values: Vec<R> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = vec![R::zero(); n * n];
    for (new_j, &old_j) in order.iter().enumerate() {
        for i in 0..n {
            vectors[i * n + new_j] = v[i * n + old_j];
        }
    }
    Ok(SymEig { values, vectors, n })
}

/// Lowest eigenpair of a large real symmetric operator via Lanczos with full
/// reorthogonalization. `apply` must implement `out = A x`. The start vector
/// fixes the run deterministically; it must have nonzero norm.
pub fn lanczos_ground<R: Real>(
    dim: usize,
    mut apply: impl FnMut(&[R], &mut [R]),
    start: &[R],
    max_space: usize,
    tol: R,
) -> Result<(R, Vec<R>)> {
    if start.len() != dim {
        return Err(CoreError::Dimension(format!(
            "lanczos: start vector length {} does not match operator dimension {}",
            start.len(),
            dim
        )));
    }
    let norm0 = norm(start);
    if norm0 == R::zero() {
        return Err(CoreError::Numeric("lanczos: zero start vector".into()));
    }

    let max_space = max_space.min(dim).max(2);
    let mut basis: Vec<Vec<R>> = Vec::with_capacity(max_space);
    let mut alphas: Vec<R> = Vec::new();
    let mut betas: Vec<R> = Vec::new();

    let mut q: Vec<R> = start.iter().map(|&x| x / norm0).collect();
    basis.push(q.clone());
    let mut w = vec![R::zero(); dim];

    let mut best: Option<(R, Vec<R>, R)> = None;

    for j in 0..max_space {
        apply(&q, &mut w);
        let alpha = dot(&q, &w);
        alphas.push(alpha);
        for (wi, qi) in w.iter_mut().zip(q.iter()) {
            *wi = *wi - alpha * *qi;
        }
        if j > 0 {
            let beta_prev = betas[j - 1];
            for (wi, pi) in w.iter_mut().zip(basis[j - 1].iter()) {
                *wi = *wi - beta_prev * *pi;
            }
        }
        // Full reorthogonalization keeps the basis clean for long runs.
        for b in &basis {
            let ov = dot(b, &w);
            for (wi, bi) in w.iter_mut().zip(b.iter()) {
                *wi = *wi - ov * *bi;
            }
        }

        let check_now = j + 1 == max_space || (j >= 8 && (j + 1) % 10 == 0);
        if check_now {
            let m = alphas.len();
            let mut t = vec![R::zero(); m * m];
            for i in 0..m {
                t[i * m + i] = alphas[i];
                if i + 1 < m {
                    t[i * m + i + 1] = betas[i];
                    t[(i + 1) * m + i] = betas[i];
                }
            }
            let eig = eigh_symmetric(&t, m)?;
            let lam = eig.values[0];
            let mut y = vec![R::zero(); dim];
            for (k, b) in basis.iter().enumerate() {
                let coef = eig.vectors[k * m];
                for (yi, bi) in y.iter_mut().zip(b.iter()) {
                    *yi = *yi + coef * *bi;
                }
            }
            let ny = norm(&y);
            for yi in y.iter_mut() {
                *yi = *yi / ny;
            }
            let mut ay = vec![R::zero(); dim];
            apply(&y, &mut ay);
            let mut res = R::zero();
            for (ai, yi) in ay.iter().zip(y.iter()) {
                let d = *ai - lam * *yi;
                res = res + d * d;
            }
            let res = res.sqrt();
            let threshold = tol * lam.abs().max(R::one());
            let better = best.as_ref().map(|(_, _, r)| res < *r).unwrap_or(true);
            if better {
                best = Some((lam, y, res));
            }
            if res <= threshold {
                let (lam, y, _) = best.unwrap();
                return Ok((lam, y));
            }
        }

        let beta = norm(&w);
        if beta <= R::epsilon() * alpha.abs().max(R::one()) {
            // Invariant subspace found; the Ritz pair above is exact.
            break;
        }
        if j + 1 < max_space {
            betas.push(beta);
            q = w.iter().map(|&x| x / beta).collect();
            basis.push(q.clone());
        }
    }

    match best {
        Some((lam, y, res)) => {
            let threshold = tol * lam.abs().max(R::one());
            if res <= threshold {
                Ok((lam, y))
            } else {
                Err(CoreError::EigenNonConvergence {
                    residual: res.as_f64(),
                    iterations: alphas.len(),
                })
            }
        }
        None => Err(CoreError::EigenNonConvergence {
            residual: f64::NAN,
            iterations: 0,
        }),
    }
}

/// Thomas algorithm. `lower` has length n-1 (subdiagonal), `diag` n, `upper`
/// n-1. Fails on a vanishing pivot (the spline systems solved here are
/// strictly diagonally dominant, so this indicates malformed input).
pub fn solve_tridiagonal<R: Real>(
    lower: &[R],
    diag: &[R],
    upper: &[R],
    rhs: &[R],
) -> Result<Vec<R>> {
    let n = diag.len();
    if lower.len() + 1 != n || upper.len() + 1 != n || rhs.len() != n {
        return Err(CoreError::Dimension(
            "tridiagonal: band lengths inconsistent".into(),
        ));
    }
    let mut c = vec![R::zero(); n];
    let mut d = vec![R::zero(); n];
    let tiny = R::epsilon() * R::epsilon();
    if diag[0].abs() <= tiny {
        return Err(CoreError::Numeric(
            "tridiagonal: zero pivot at row 0".into(),
        ));
    }
    c[0] = upper.first().copied().unwrap_or(R::zero()) / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - lower[i - 1] * c[i - 1];
        if denom.abs() <= tiny {
            return Err(CoreError::Numeric(format!(
                "tridiagonal: zero pivot at row {i}"
            )));
        }
        c[i] = if i + 1 < n {
            upper[i] / denom
        } else {
            R::zero()
        };
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / denom;
    }
    let mut x = vec![R::zero(); n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

pub fn dot<R: Real>(a: &[R], b: &[R]) -> R {
    a.iter().zip(b.iter()).map(|(&x, &y)| x * y).sum()
}

pub fn norm<R: Real>(a: &[R]) -> R {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eigh_2x2_closed_form() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let a = [2.0f64, 1.0, 1.0, 2.0];
        let eig = eigh_symmetric(&a, 2).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-14);
        assert!((eig.values[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn eigh_random_matrices_reconstruct() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1usize, 2, 3, 8, 24] {
            let mut a = vec![0.0f64; n * n];
            for i in 0..n {
                for j in 0..=i {
                    let x: f64 = rng.gen_range(-1.0..1.0);
                    a[i * n + j] = x;
                    a[j * n + i] = x;
                }
            }
            let eig = eigh_symmetric(&a, n).unwrap();
            // residual ||A v - lambda v|| per pair, and orthonormality
            for j in 0..n {
                let vj: Vec<f64> = eig.vector(j).collect();
                let mut av = vec![0.0; n];
                for i in 0..n {
                    av[i] = (0..n).map(|k| a[i * n + k] * vj[k]).sum();
                }
                let res: f64 = av
                    .iter()
                    .zip(vj.iter())
                    .map(|(x, v)| (x - eig.values[j] * v).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert!(res < 1e-12, "n={n} j={j} res={res}");
                for j2 in 0..n {
                    let vj2: Vec<f64> = eig.vector(j2).collect();
                    let ov = dot(&vj, &vj2);
                    let expect = if j == j2 { 1.0 } else { 0.0 };
                    assert!((ov - expect).abs() < 1e-12);
                }
            }
            // ascending order
            for j in 1..n {
                assert!(eig.values[j] >= eig.values[j - 1]);
            }
        }
    }

    #[test]
    fn eigh_rejects_bad_buffer() {
        assert!(eigh_symmetric(&[1.0, 2.0, 3.0], 2).is_err());
    }

    #[test]
    fn lanczos_matches_dense_on_random_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 60usize;
        let mut a = vec![0.0f64; n * n];
        for i in 0..n {
            for j in 0..=i {
                // banded-ish operator with dominant diagonal
                let x: f64 = if i - j <= 3 {
                    rng.gen_range(-1.0..1.0)
                } else {
                    0.0
                };
                a[i * n + j] = x;
                a[j * n + i] = x;
            }
            a[i * n + i] += i as f64 * 0.5;
        }
        let dense = eigh_symmetric(&a, n).unwrap();
        let start: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.37).sin()).collect();
        let (lam, v) = lanczos_ground(
            n,
            |x, out| {
                for i in 0..n {
                    out[i] = (0..n).map(|k| a[i * n + k] * x[k]).sum();
                }
            },
            &start,
            n,
            1e-10,
        )
        .unwrap();
        assert!(
            (lam - dense.values[0]).abs() < 1e-9,
            "{lam} vs {}",
            dense.values[0]
        );
        let v0: Vec<f64> = dense.vector(0).collect();
        let overlap = dot(&v, &v0).abs();
        assert!((overlap - 1.0).abs() < 1e-7);
    }

    #[test]
    fn tridiagonal_solve_matches_multiplication() {
        let lower = [1.0f64, 2.0, 0.5];
        let diag = [4.0f64, 5.0, 6.0, 5.0];
        let upper = [1.5, 0.5, 1.0];
        let x_ref = [1.0, -2.0, 3.0, 0.25];
        let mut rhs = [0.0; 4];
        for i in 0..4 {
            rhs[i] = diag[i] * x_ref[i];
            if i > 0 {
                rhs[i] += lower[i - 1] * x_ref[i - 1];
            }
            if i < 3 {
                rhs[i] += upper[i] * x_ref[i + 1];
            }
        }
        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        for i in 0..4 {
            assert!((x[i] - x_ref[i]).abs() < 1e-12);
        }
    }
}
