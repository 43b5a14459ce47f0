//! Multidimensional FFTs on the periodic unit cell.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward/inverse FFT over an `n^d` lattice, x fastest.
pub struct FftN {
    d: usize,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftN {
    pub fn new(d: usize, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            d,
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Signed integer frequency of an index; `None` at the Nyquist index.
    pub fn frequency(&self, k: usize) -> Option<f64> {
        let n = self.n;
        if 2 * k == n {
            None
        } else if 2 * k < n {
            Some(k as f64)
        } else {
            Some(k as f64 - n as f64)
        }
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx % n, (idx / n) % n, idx / (n * n)]
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let total = self.len();
        for row in data.chunks_exact_mut(n) {
            plan.process(row);
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for axis in 1..self.d {
            let stride = n.pow(axis as u32);
            let block = stride * n;
            for start in (0..total).step_by(block) {
                for off in 0..stride {
                    for k in 0..n {
                        buf[k] = data[start + off + k * stride];
                    }
                    plan.process(&mut buf);
                    for k in 0..n {
                        data[start + off + k * stride] = buf[k];
                    }
                }
            }
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Normalized inverse.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let s = 1.0 / self.len() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn round_trip_and_single_mode() {
        let f = FftN::new(2, 8);
        let orig: Vec<Complex64> = (0..64)
            .map(|i| {
                let [x, y, _] = f.coords(i);
                Complex64::new((2.0 * PI * (x as f64 + 2.0 * y as f64) / 8.0).cos(), 0.0)
            })
            .collect();
        let mut d = orig.clone();
        f.forward(&mut d);
        // cos → two modes of weight n^d / 2
        let k1 = 1 + 2 * 8;
        let k2 = 7 + 6 * 8;
        assert!((d[k1].re - 32.0).abs() < 1e-10);
        assert!((d[k2].re - 32.0).abs() < 1e-10);
        f.inverse(&mut d);
        for (a, b) in d.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-13);
        }
        assert_eq!(f.frequency(4), None);
        assert_eq!(f.frequency(5), Some(-3.0));
    }
}
