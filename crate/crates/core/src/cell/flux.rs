use std::f64::consts::PI;

use num_complex::Complex64;

use super::fft::FftN;
use super::{FluxDensity, UnitCellGrid};
use crate::error::{Error, Result};

/// Default bound on `|mean(b)|` accepted by [`solve_flux_correctors`].
pub const DEFAULT_FLUX_MEAN_TOL: f64 = 1e-3;

/// Flux potentials and the antisymmetric flux correctors `F_kij^{αβ}`.
#[derive(Clone, Debug)]
pub struct FluxCorrectors {
    grid: UnitCellGrid,
    m: usize,
    /// `F[((k * d + i) * d + j) * m² + α m + β]`
    f: Vec<Vec<f64>>,
    /// Solenoidal, mean-free part of the input density, same indexing as the input.
    projected: Vec<Vec<f64>>,
    /// `max |b − Pb|` over all entries and nodes.
    pub projection_defect: f64,
    /// `max |∂_k F_kij − (Pb)_ij|`, evaluated spectrally.
    pub divergence_residual: f64,
    /// Largest `|mean(b)|` of the raw input.
    pub input_mean: f64,
}

impl FluxCorrectors {
    pub fn grid(&self) -> &UnitCellGrid {
        &self.grid
    }

    #[inline]
    pub fn index(d: usize, m: usize, k: usize, i: usize, j: usize, alpha: usize, beta: usize) -> usize {
        ((k * d + i) * d + j) * m * m + alpha * m + beta
    }

    pub fn get(&self, k: usize, i: usize, j: usize, alpha: usize, beta: usize) -> &[f64] {
        let d = self.grid.dim();
        &self.f[Self::index(d, self.m, k, i, j, alpha, beta)]
    }

    pub fn projected(&self, i: usize, j: usize, alpha: usize, beta: usize) -> &[f64] {
        let d = self.grid.dim();
        &self.projected[crate::tensor::Tensor::index(d, self.m, i, j, alpha, beta)]
    }

    pub fn max_abs(&self) -> f64 {
        self.f
            .iter()
            .flat_map(|v| v.iter())
            .map(|x| x.abs())
            .fold(0.0, f64::max)
    }

    /// `max |∂_k F_kij − (Pb)_ij|` with spectral derivatives of the stored correctors.
    pub fn spectral_divergence_residual(&self) -> f64 {
        let d = self.grid.dim();
        let m = self.m;
        let fft = FftN::new(d, self.grid.cells());
        let len = fft.len();
        let iu = Complex64::new(0.0, 1.0);
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                for a in 0..m {
                    for b in 0..m {
                        let mut acc = vec![Complex64::new(0.0, 0.0); len];
                        for k in 0..d {
                            let mut v = to_complex(&self.f[Self::index(d, m, k, i, j, a, b)]);
                            fft.forward(&mut v);
                            for (idx, x) in v.iter().enumerate() {
                                let c = fft.coords(idx);
                                if let Some(fr) = fft.frequency(c[k]) {
                                    acc[idx] += iu * (2.0 * PI * fr) * x;
                                }
                            }
                        }
                        fft.inverse(&mut acc);
                        let p = &self.projected[crate::tensor::Tensor::index(d, m, i, j, a, b)];
                        for (x, y) in acc.iter().zip(p) {
                            worst = worst.max((x.re - y).abs());
                        }
                    }
                }
            }
        }
        worst
    }

    /// Largest `|F_kij + F_ikj|`.
    pub fn antisymmetry_defect(&self) -> f64 {
        let d = self.grid.dim();
        let m = self.m;
        let mut worst = 0.0f64;
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    for a in 0..m {
                        for b in 0..m {
                            let p = &self.f[Self::index(d, m, k, i, j, a, b)];
                            let q = &self.f[Self::index(d, m, i, k, j, a, b)];
                            for (x, y) in p.iter().zip(q) {
                                worst = worst.max((x + y).abs());
                            }
                        }
                    }
                }
            }
        }
        worst
    }
}

fn to_complex(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

/// Solve `Δ f_ij = (Pb)_ij` spectrally and set `F_kij = ∂_k f_ij − ∂_i f_kj`.
///
/// `P` removes the mean, the Nyquist modes and the gradient part of every
/// column `b_{·j}^{αβ}`, so `∂_k F_kij = (Pb)_ij` holds to rounding.
pub fn solve_flux_correctors(b: &FluxDensity, mean_tol: f64) -> Result<FluxCorrectors> {
    let grid = *b.grid();
    let d = grid.dim();
    let m = b.components();
    let n = grid.cells();
    let mean = b.max_mean();
    if mean > mean_tol {
        return Err(Error::NonZeroMean { mean, tol: mean_tol });
    }
    let fft = FftN::new(d, n);
    let len = fft.len();
    let tidx = |i: usize, j: usize, a: usize, bb: usize| crate::tensor::Tensor::index(d, m, i, j, a, bb);

    // wave vectors 2πξ, None where any component sits on Nyquist
    let waves: Vec<Option<[f64; 3]>> = (0..len)
        .map(|idx| {
            let c = fft.coords(idx);
            let mut w = [0.0; 3];
            for k in 0..d {
                w[k] = 2.0 * PI * fft.frequency(c[k])?;
            }
            Some(w)
        })
        .collect();

    let mut f = vec![vec![0.0; len]; d * d * d * m * m];
    let mut projected = vec![vec![0.0; len]; d * d * m * m];
    let mut projection_defect = 0.0f64;

    for j in 0..d {
        for al in 0..m {
            for be in 0..m {
                let mut col: Vec<Vec<Complex64>> = (0..d)
                    .map(|i| {
                        let mut v = to_complex(b.get(i, j, al, be));
                        fft.forward(&mut v);
                        v
                    })
                    .collect();
                for idx in 0..len {
                    match waves[idx] {
                        Some(w) if w[..d].iter().any(|&x| x != 0.0) => {
                            let k2: f64 = w[..d].iter().map(|x| x * x).sum();
                            let mut div = Complex64::new(0.0, 0.0);
                            for i in 0..d {
                                div += col[i][idx] * w[i];
                            }
                            for i in 0..d {
                                col[i][idx] -= div * (w[i] / k2);
                            }
                        }
                        _ => {
                            for c in col.iter_mut() {
                                c[idx] = Complex64::new(0.0, 0.0);
                            }
                        }
                    }
                }
                // potentials f_ij = −P b̂_ij / |2πξ|²
                let pot: Vec<Vec<Complex64>> = col
                    .iter()
                    .map(|c| {
                        c.iter()
                            .zip(&waves)
                            .map(|(&v, w)| match w {
                                Some(w) => {
                                    let k2: f64 = w[..d].iter().map(|x| x * x).sum();
                                    if k2 > 0.0 {
                                        -v / k2
                                    } else {
                                        Complex64::new(0.0, 0.0)
                                    }
                                }
                                None => Complex64::new(0.0, 0.0),
                            })
                            .collect()
                    })
                    .collect();
                let iu = Complex64::new(0.0, 1.0);
                let mut fhat: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); len]; d * d];
                for k in 0..d {
                    for i in (k + 1)..d {
                        let mut v = vec![Complex64::new(0.0, 0.0); len];
                        for idx in 0..len {
                            if let Some(w) = waves[idx] {
                                v[idx] = iu * (pot[i][idx] * w[k] - pot[k][idx] * w[i]);
                            }
                        }
                        fhat[k * d + i] = v;
                    }
                }
                for i in 0..d {
                    let mut pb = col[i].clone();
                    fft.inverse(&mut pb);
                    let raw = b.get(i, j, al, be);
                    let out = &mut projected[tidx(i, j, al, be)];
                    for (o, (p, r)) in out.iter_mut().zip(pb.iter().zip(raw)) {
                        *o = p.re;
                        projection_defect = projection_defect.max((p.re - r).abs());
                    }
                }
                for k in 0..d {
                    for i in (k + 1)..d {
                        let mut v = fhat[k * d + i].clone();
                        fft.inverse(&mut v);
                        let real: Vec<f64> = v.iter().map(|c| c.re).collect();
                        let neg: Vec<f64> = real.iter().map(|x| -x).collect();
                        f[FluxCorrectors::index(d, m, k, i, j, al, be)] = real;
                        f[FluxCorrectors::index(d, m, i, k, j, al, be)] = neg;
                    }
                }
            }
        }
    }

    let mut out = FluxCorrectors {
        grid,
        m,
        f,
        projected,
        projection_defect,
        divergence_residual: 0.0,
        input_mean: mean,
    };
    out.divergence_residual = out.spectral_divergence_residual();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn density(grid: UnitCellGrid, m: usize, gen: impl Fn(usize, [f64; 3]) -> f64) -> FluxDensity {
        let d = grid.dim();
        let data = (0..d * d * m * m)
            .map(|e| (0..grid.num_nodes()).map(|i| gen(e, grid.node_point(i))).collect())
            .collect();
        FluxDensity::from_entries(grid, m, data).unwrap()
    }

    #[test]
    fn zero_density_gives_zero_correctors() {
        let g = UnitCellGrid::new(2, 16).unwrap();
        let b = density(g, 1, |_, _| 0.0);
        let f = solve_flux_correctors(&b, 1e-8).unwrap();
        assert_eq!(f.max_abs(), 0.0);
    }

    #[test]
    fn nonzero_mean_is_rejected() {
        let g = UnitCellGrid::new(2, 16).unwrap();
        let b = density(g, 1, |_, _| 0.5);
        assert!(matches!(
            solve_flux_correctors(&b, 1e-8),
            Err(Error::NonZeroMean { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn manufactured_smooth_density(c1 in -1.0f64..1.0, c2 in -1.0f64..1.0, k1 in 1usize..4, k2 in 1usize..4) {
            let g = UnitCellGrid::new(2, 32).unwrap();
            // b_{·j} = curl-type columns are solenoidal, plus a gradient part that P removes
            let b = density(g, 1, |e, y| {
                let (s1, s2) = ((2.0 * PI * k1 as f64 * y[0]).sin(), (2.0 * PI * k2 as f64 * y[1]).cos());
                match e {
                    0 => c1 * s2 + c2 * s1,
                    1 => c1 * s1 * s2,
                    2 => c2 * s1,
                    _ => -c1 * s2,
                }
            });
            let f = solve_flux_correctors(&b, 1e-8).unwrap();
            prop_assert!(f.divergence_residual <= 1e-8);
            prop_assert_eq!(f.antisymmetry_defect(), 0.0);
        }
    }
}
