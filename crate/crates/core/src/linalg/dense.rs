//! Small dense kernels: block inverses and partially pivoted LU.

use super::Scalar;
use crate::error::{Error, Result};

/// Invert an `m × m` row-major block (destroys `a`). Singular blocks yield zeros.
pub fn invert_small<T: Scalar>(a: &mut [T], m: usize, out: &mut [T]) {
    if m == 1 {
        out[0] = if a[0].abs2() > 0.0 { T::one() / a[0] } else { T::zero() };
        return;
    }
    for v in out.iter_mut() {
        *v = T::zero();
    }
    for i in 0..m {
        out[i * m + i] = T::one();
    }
    for col in 0..m {
        let mut piv = col;
        for r in col + 1..m {
            if a[r * m + col].abs2() > a[piv * m + col].abs2() {
                piv = r;
            }
        }
        if a[piv * m + col].abs2() == 0.0 {
            out.iter_mut().for_each(|v| *v = T::zero());
            return;
        }
        if piv != col {
            for c in 0..m {
                a.swap(piv * m + c, col * m + c);
                out.swap(piv * m + c, col * m + c);
            }
        }
        let inv = T::one() / a[col * m + col];
        for c in 0..m {
            a[col * m + c] *= inv;
            out[col * m + c] *= inv;
        }
        for r in 0..m {
            if r == col {
                continue;
            }
            let f = a[r * m + col];
            if f.abs2() == 0.0 {
                continue;
            }
            for c in 0..m {
                let ac = a[col * m + c];
                let oc = out[col * m + c];
                a[r * m + c] -= f * ac;
                out[r * m + c] -= f * oc;
            }
        }
    }
}

/// LU factorization with partial pivoting of a dense square matrix.
#[derive(Clone, Debug)]
pub struct DenseLu<T> {
    n: usize,
    lu: Vec<T>,
    piv: Vec<usize>,
}

impl<T: Scalar> DenseLu<T> {
    pub fn factor(mut a: Vec<T>, n: usize) -> Result<Self> {
        assert_eq!(a.len(), n * n);
        let mut piv: Vec<usize> = (0..n).collect();
        let scale = a.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].abs2();
            for r in k + 1..n {
                let v = a[r * n + k].abs2();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best.sqrt() <= 1e-14 * scale {
                return Err(Error::Singular(format!("zero pivot in column {k} of {n}")));
            }
            if p != k {
                for c in 0..n {
                    a.swap(p * n + c, k * n + c);
                }
                piv.swap(p, k);
            }
            let inv = T::one() / a[k * n + k];
            for r in k + 1..n {
                let f = a[r * n + k] * inv;
                a[r * n + k] = f;
                if f.abs2() == 0.0 {
                    continue;
                }
                let (top, bottom) = a.split_at_mut(r * n);
                let krow = &top[k * n + k + 1..k * n + n];
                let rrow = &mut bottom[k + 1..n];
                for (x, &y) in rrow.iter_mut().zip(krow) {
                    *x -= f * y;
                }
            }
        }
        Ok(Self { n, lu: a, piv })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x: Vec<T> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn small_inverse() {
        let mut a = vec![4.0, 1.0, 2.0, 3.0];
        let mut out = vec![0.0; 4];
        invert_small(&mut a, 2, &mut out);
        let expect = [0.3, -0.1, -0.2, 0.4];
        for (o, e) in out.iter().zip(expect) {
            assert!((o - e).abs() < 1e-15);
        }
    }

    #[test]
    fn lu_solves_complex_system() {
        let n = 5;
        let a: Vec<Complex64> = (0..n * n)
            .map(|k| {
                let (i, j) = (k / n, k % n);
                let base = 1.0 / (1.0 + (i as f64 - j as f64).abs());
                Complex64::new(base + if i == j { 3.0 } else { 0.0 }, 0.1 * (i + 2 * j) as f64)
            })
            .collect();
        let x: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0 - i as f64)).collect();
        let b: Vec<Complex64> = (0..n)
            .map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum())
            .collect();
        let lu = DenseLu::factor(a, n).unwrap();
        let y = lu.solve(&b);
        for (u, v) in y.iter().zip(&x) {
            assert!((u - v).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = vec![1.0, 2.0, 2.0, 4.0];
        assert!(matches!(DenseLu::factor(a, 2), Err(Error::Singular(_))));
    }
}
