//! Quasi-Newton minimizer with central-difference gradients.
//!
//! Inverse-Hessian BFGS with Armijo backtracking. Curvature updates are
//! skipped when s.y is not safely positive, and the approximation resets to
//! the identity when a search direction stops being a descent direction.

use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct BfgsOptions<R> {
    pub grad_tol: R,
    pub max_iters: usize,
    pub fd_step: R,
}

impl<R: Real> Default for BfgsOptions<R> {
    fn default() -> Self {
        BfgsOptions {
            grad_tol: R::of(1e-7),
            max_iters: 500,
            fd_step: R::of(1e-4),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BfgsResult<R> {
    pub x: Vec<R>,
    pub value: R,
    pub grad_norm: R,
    pub iterations: usize,
    pub converged: bool,
}

fn gradient<R: Real>(f: &mut impl FnMut(&[R]) -> R, x: &[R], h: R, out: &mut [R]) {
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let fp = f(&probe);
        probe[i] = x[i] - h;
        let fm = f(&probe);
        probe[i] = x[i];
        out[i] = (fp - fm) / (R::of(2.0) * h);
    }
}

fn norm2<R: Real>(v: &[R]) -> R {
    v.iter().map(|&a| a * a).sum::<R>().sqrt()
}

pub fn minimize<R: Real>(
    mut f: impl FnMut(&[R]) -> R,
    x0: &[R],
    opts: &BfgsOptions<R>,
) -> BfgsResult<R> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut g = vec![R::zero(); n];
    gradient(&mut f, &x, opts.fd_step, &mut g);

    // Row-major inverse-Hessian approximation.
    let mut h_inv = vec![R::zero(); n * n];
    let reset = |h: &mut [R]| {
        h.fill(R::zero());
        for i in 0..n {
            h[i * n + i] = R::one();
        }
    };
    reset(&mut h_inv);

    let c1 = R::of(1e-4);
    let mut iterations = 0;
    while iterations < opts.max_iters {
        let gnorm = norm2(&g);
        if gnorm <= opts.grad_tol {
            return BfgsResult {
                x,
                value: fx,
                grad_norm: gnorm,
                iterations,
                converged: true,
            };
        }
        iterations += 1;

        let mut p = vec![R::zero(); n];
        for i in 0..n {
            p[i] = -(0..n).map(|j| h_inv[i * n + j] * g[j]).sum::<R>();
        }
        let mut slope: R = p.iter().zip(g.iter()).map(|(&a, &b)| a * b).sum();
        if slope >= R::zero() {
            // Curvature information has gone bad; fall back to steepest descent.
            reset(&mut h_inv);
            for i in 0..n {
                p[i] = -g[i];
            }
            slope = -(gnorm * gnorm);
        }

        let mut t = R::one();
        let mut accepted = None;
        for _ in 0..40 {
            let xt: Vec<R> = x
                .iter()
                .zip(p.iter())
                .map(|(&xi, &pi)| xi + t * pi)
                .collect();
            let ft = f(&xt);
            if ft <= fx + c1 * t * slope {
                accepted = Some((xt, ft));
                break;
            }
            t = t * R::of(0.5);
        }
        let Some((x_new, f_new)) = accepted else {
            // No acceptable step even at tiny scale: the surface is flat at
            // gradient-noise level, so stop where we are.
            return BfgsResult {
                x,
                value: fx,
                grad_norm: gnorm,
                iterations,
                converged: false,
            };
        };

        let mut g_new = vec![R::zero(); n];
        gradient(&mut f, &x_new, opts.fd_step, &mut g_new);
        let s: Vec<R> = x_new.iter().zip(x.iter()).map(|(&a, &b)| a - b).collect();
        let y: Vec<R> = g_new.iter().zip(g.iter()).map(|(&a, &b)| a - b).collect();
        let sy: R = s.iter().zip(y.iter()).map(|(&a, &b)| a * b).sum();

        if sy > R::of(1e-12) * norm2(&s) * norm2(&y) {
            // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
            let rho = R::one() / sy;
            let mut hy = vec![R::zero(); n];
            for i in 0..n {
                hy[i] = (0..n).map(|j| h_inv[i * n + j] * y[j]).sum();
            }
            let yhy: R = y.iter().zip(hy.iter()).map(|(&a, &b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    let upd = rho * rho * yhy * s[i] * s[j] + rho * s[i] * s[j]
                        - rho * (s[i] * hy[j] + hy[i] * s[j]);
                    h_inv[i * n + j] += upd;
                }
            }
        }

        x = x_new;
        fx = f_new;
        g = g_new;
    }

    let gnorm = norm2(&g);
    BfgsResult {
        x,
        value: fx,
        grad_norm: gnorm,
        iterations,
        converged: gnorm <= opts.grad_tol,
    }
}
