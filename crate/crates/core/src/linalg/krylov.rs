//! Preconditioned Krylov iterations over generic scalars.

use super::{axpy, dot, norm2, project_mean, Scalar};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrylovOptions {
    /// Relative residual target `‖b − Ax‖ / ‖b‖`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final relative residual, recomputed from the returned iterate.
    pub residual: f64,
    pub history: Vec<f64>,
}

impl SolveStats {
    pub fn merge(&mut self, other: &SolveStats) {
        self.iterations += other.iterations;
        self.residual = self.residual.max(other.residual);
        self.history.extend_from_slice(&other.history);
    }
}

fn true_residual<T: Scalar>(
    a: &mut impl FnMut(&[T], &mut [T]),
    b: &[T],
    x: &[T],
    r: &mut [T],
) -> f64 {
    a(x, r);
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    norm2(r)
}

/// Preconditioned conjugate gradients for Hermitian positive (semi)definite systems.
///
/// With `mean_free = Some(m)` iterates and residuals are kept orthogonal to the
/// per-component constants, which handles the periodic null space.
pub fn pcg<T: Scalar>(
    mut a: impl FnMut(&[T], &mut [T]),
    mut precond: impl FnMut(&[T], &mut [T]),
    b: &[T],
    x: &mut [T],
    opts: KrylovOptions,
    mean_free: Option<usize>,
) -> Result<SolveStats> {
    let n = b.len();
    let mut rhs = b.to_vec();
    if let Some(m) = mean_free {
        project_mean(&mut rhs, m);
        project_mean(x, m);
    }
    let bnorm = norm2(&rhs);
    let mut stats = SolveStats::default();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = T::zero());
        return Ok(stats);
    }
    let mut r = vec![T::zero(); n];
    let mut z = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];
    let mut q = vec![T::zero(); n];
    let mut res = true_residual(&mut a, &rhs, x, &mut r) / bnorm;
    stats.history.push(res);
    let mut it = 0;
    let mut stalled = 0;
    'outer: while it < opts.max_iter && stalled < 3 {
        if res <= opts.tol {
            break;
        }
        let res_at_restart = res;
        precond(&r, &mut z);
        if let Some(m) = mean_free {
            project_mean(&mut z, m);
        }
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        while it < opts.max_iter {
            a(&p, &mut q);
            let pq = dot(&p, &q);
            if pq.abs2() == 0.0 {
                break 'outer;
            }
            let alpha = rz / pq;
            axpy(alpha, &p, x);
            axpy(-alpha, &q, &mut r);
            it += 1;
            res = norm2(&r) / bnorm;
            stats.history.push(res);
            if res <= opts.tol {
                break;
            }
            precond(&r, &mut z);
            if let Some(m) = mean_free {
                project_mean(&mut z, m);
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for (pi, &zi) in p.iter_mut().zip(&z) {
                *pi = zi + beta * *pi;
            }
        }
        if let Some(m) = mean_free {
            project_mean(x, m);
        }
        // restart from the true residual if the recursion drifted
        res = true_residual(&mut a, &rhs, x, &mut r) / bnorm;
        if res <= opts.tol {
            break;
        }
        if res > 0.5 * res_at_restart {
            stalled += 1;
        }
    }
    if let Some(m) = mean_free {
        project_mean(x, m);
    }
    stats.iterations = it;
    stats.residual = true_residual(&mut a, &rhs, x, &mut r) / bnorm;
    if stats.residual > opts.tol {
        return Err(Error::SolverFailure {
            iterations: it,
            residual: stats.residual,
            history: stats.history,
        });
    }
    Ok(stats)
}

/// Right-preconditioned BiCGSTAB for general (complex symmetric) systems.
pub fn bicgstab<T: Scalar>(
    mut a: impl FnMut(&[T], &mut [T]),
    mut precond: impl FnMut(&[T], &mut [T]),
    b: &[T],
    x: &mut [T],
    opts: KrylovOptions,
) -> Result<SolveStats> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut stats = SolveStats::default();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = T::zero());
        return Ok(stats);
    }
    let mut r = vec![T::zero(); n];
    let mut rhat = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];
    let mut v = vec![T::zero(); n];
    let mut phat = vec![T::zero(); n];
    let mut s = vec![T::zero(); n];
    let mut shat = vec![T::zero(); n];
    let mut t = vec![T::zero(); n];
    let mut res = true_residual(&mut a, b, x, &mut r) / bnorm;
    stats.history.push(res);
    let mut it = 0;
    let mut stalled = 0;
    let mut res_at_restart = res;
    'outer: while it < opts.max_iter && res > opts.tol && stalled < 3 {
        rhat.copy_from_slice(&r);
        p.iter_mut().for_each(|e| *e = T::zero());
        v.iter_mut().for_each(|e| *e = T::zero());
        let mut rho = T::one();
        let mut alpha = T::one();
        let mut omega = T::one();
        while it < opts.max_iter {
            let rho_new = dot(&rhat, &r);
            if rho_new.abs2() == 0.0 || omega.abs2() == 0.0 {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            precond(&p, &mut phat);
            a(&phat, &mut v);
            let rv = dot(&rhat, &v);
            if rv.abs2() == 0.0 {
                break;
            }
            alpha = rho / rv;
            for i in 0..n {
                s[i] = r[i] - alpha * v[i];
            }
            it += 1;
            let sres = norm2(&s) / bnorm;
            if sres <= opts.tol {
                axpy(alpha, &phat, x);
                stats.history.push(sres);
                break;
            }
            precond(&s, &mut shat);
            a(&shat, &mut t);
            let tt = dot(&t, &t);
            if tt.abs2() == 0.0 {
                axpy(alpha, &phat, x);
                break;
            }
            omega = dot(&t, &s) / tt;
            axpy(alpha, &phat, x);
            axpy(omega, &shat, x);
            for i in 0..n {
                r[i] = s[i] - omega * t[i];
            }
            res = norm2(&r) / bnorm;
            stats.history.push(res);
            if res <= opts.tol {
                break;
            }
            if !res.is_finite() {
                break 'outer;
            }
        }
        let restarted = true_residual(&mut a, b, x, &mut r) / bnorm;
        // restarts that no longer halve the true residual mean round-off stagnation
        if restarted > 0.5 * res_at_restart {
            stalled += 1;
        }
        res_at_restart = restarted;
        res = restarted;
    }
    stats.iterations = it;
    stats.residual = true_residual(&mut a, b, x, &mut r) / bnorm;
    if stats.residual > opts.tol || !stats.residual.is_finite() {
        return Err(Error::SolverFailure {
            iterations: it,
            residual: stats.residual,
            history: stats.history,
        });
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn tridiag<T: Scalar>(diag: T, off: f64) -> impl FnMut(&[T], &mut [T]) {
        move |x: &[T], y: &mut [T]| {
            let n = x.len();
            for i in 0..n {
                let mut v = diag * x[i];
                if i > 0 {
                    v += x[i - 1].scale(off);
                }
                if i + 1 < n {
                    v += x[i + 1].scale(off);
                }
                y[i] = v;
            }
        }
    }

    #[test]
    fn pcg_solves_spd_tridiagonal() {
        let n = 50;
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = vec![0.0; n];
        let st = pcg(
            tridiag(2.5, -1.0),
            |r: &[f64], z: &mut [f64]| z.copy_from_slice(r),
            &b,
            &mut x,
            KrylovOptions::default(),
            None,
        )
        .unwrap();
        assert!(st.residual <= 1e-10);
        let mut y = vec![0.0; n];
        tridiag(2.5, -1.0)(&x, &mut y);
        for (u, v) in y.iter().zip(&b) {
            assert!((u - v).abs() < 1e-8);
        }
    }

    #[test]
    fn bicgstab_solves_complex_shifted_system() {
        let n = 60;
        let b: Vec<Complex64> = (0..n).map(|i| Complex64::new((i as f64).cos(), 0.5)).collect();
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        let diag = Complex64::new(2.5, 0.7);
        let st = bicgstab(
            tridiag(diag, -1.0),
            |r: &[Complex64], z: &mut [Complex64]| z.copy_from_slice(r),
            &b,
            &mut x,
            KrylovOptions::default(),
        )
        .unwrap();
        assert!(st.residual <= 1e-10);
    }

    #[test]
    fn failure_carries_history() {
        let n = 40;
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        let err = pcg(
            tridiag(2.0, -1.0),
            |r: &[f64], z: &mut [f64]| z.copy_from_slice(r),
            &b,
            &mut x,
            KrylovOptions {
                tol: 1e-12,
                max_iter: 3,
            },
            None,
        )
        .unwrap_err();
        match err {
            Error::SolverFailure { history, iterations, .. } => {
                assert_eq!(iterations, 3);
                assert!(!history.is_empty());
            }
            e => panic!("unexpected {e:?}"),
        }
    }
}
