//! Periodic cell problems: correctors, the homogenized tensor, the flux
//! density and its antisymmetric flux correctors.

pub mod fft;
mod flux;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{
    assemble_stiffness, for_each_element, nodal_gradients, physical_point, Coefficients, ElementBasis,
    Rule1d,
};
use crate::linalg::krylov::{pcg, KrylovOptions};
use crate::linalg::stencil::{AxisLayout, Layout};
use crate::linalg::{component_means, Hierarchy, MgOptions, VCycle};
use crate::tensor::{CoefficientField, Tensor};

pub use flux::{solve_flux_correctors, FluxCorrectors, DEFAULT_FLUX_MEAN_TOL};

/// Largest asymmetry of the homogenized tensor accepted without error.
pub const HOMOGENIZED_SYMMETRY_TOL: f64 = 1e-8;

/// Uniform periodic grid on the unit cell with `n` cells per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UnitCellGrid {
    d: usize,
    n: usize,
}

impl UnitCellGrid {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if d != 2 && d != 3 {
            return Err(Error::param(format!("dimension must be 2 or 3, got {d}")));
        }
        if n < 8 || n % 2 != 0 {
            return Err(Error::param(format!("cell grid needs an even N ≥ 8, got {n}")));
        }
        Ok(Self { d, n })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn cells(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn num_nodes(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn layout(&self) -> Layout {
        Layout::new(vec![AxisLayout::periodic(self.n, 1.0); self.d])
    }

    /// Coordinates of node `i` (x fastest).
    pub fn node_point(&self, i: usize) -> [f64; 3] {
        let n = self.n;
        let h = self.h();
        let mut p = [0.0; 3];
        let mut r = i;
        for k in 0..self.d {
            p[k] = (r % n) as f64 * h;
            r /= n;
        }
        p
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellSolveOptions {
    pub krylov: KrylovOptions,
    pub mg: MgOptions,
}

impl Default for CellSolveOptions {
    fn default() -> Self {
        Self {
            krylov: KrylovOptions::default(),
            mg: MgOptions::default(),
        }
    }
}

impl CellSolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        let mut o = Self::default();
        o.krylov.tol = tol;
        o
    }
}

/// Mean-free periodic correctors `χ_j^β`.
#[derive(Clone, Debug)]
pub struct Correctors {
    grid: UnitCellGrid,
    m: usize,
    /// `chi[j * m + β]`, node-major with `m` components per node
    chi: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub iterations: Vec<usize>,
}

impl Correctors {
    pub fn grid(&self) -> &UnitCellGrid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.m
    }

    /// `χ_j^β` as a node-major vector with `m` components per node.
    pub fn get(&self, j: usize, beta: usize) -> &[f64] {
        &self.chi[j * self.m + beta]
    }

    /// Largest absolute per-component mean over all correctors.
    pub fn max_mean(&self) -> f64 {
        self.chi
            .iter()
            .flat_map(|c| component_means(c, self.m))
            .map(f64::abs)
            .fold(0.0, f64::max)
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }
}

fn check_field(field: &CoefficientField, grid: &UnitCellGrid) -> Result<()> {
    if field.dim() != grid.dim() {
        return Err(Error::DomainMismatch(format!(
            "field of dimension {} on a {}-dimensional cell grid",
            field.dim(),
            grid.dim()
        )));
    }
    Ok(())
}

/// Right-hand sides `−∫ a_ij^{αβ} ∂_i v^α` of all cell problems, indexed `[j * m + β]`.
pub fn cell_right_hand_sides(field: &CoefficientField, grid: &UnitCellGrid) -> Vec<Vec<f64>> {
    let d = grid.dim();
    let m = field.components();
    let layout = grid.layout();
    let h = vec![grid.h(); d];
    let basis = ElementBasis::new(d, &h, &Rule1d::gauss(2));
    let nq = basis.num_points();
    let nodes = basis.nodes;
    let len = field.len();
    let nn = grid.num_nodes();
    let mut rhs = vec![vec![0.0; nn * m]; d * m];
    let mut a = vec![0.0; len];
    let mut y = [0.0; 3];
    for_each_element(&layout, |el| {
        for q in 0..nq {
            physical_point(&layout, el.cell, &basis.points[q], &mut y);
            field.sample_into(&y[..d], &mut a);
            let w = basis.weights[q];
            for j in 0..d {
                for be in 0..m {
                    let r = &mut rhs[j * m + be];
                    for nd in 0..nodes {
                        let u = el.unknowns[nd];
                        for al in 0..m {
                            let mut acc = 0.0;
                            for i in 0..d {
                                acc += a[Tensor::index(d, m, i, j, al, be)] * basis.grad(q, nd, i);
                            }
                            r[u * m + al] -= w * acc;
                        }
                    }
                }
            }
        }
    });
    rhs
}

/// Solve every cell problem with multigrid-preconditioned CG on the mean-free subspace.
pub fn solve_correctors(
    field: &CoefficientField,
    grid: &UnitCellGrid,
    opts: CellSolveOptions,
) -> Result<Correctors> {
    check_field(field, grid)?;
    if !(opts.krylov.tol > 0.0) {
        return Err(Error::param("corrector tolerance must be positive"));
    }
    let d = grid.dim();
    let m = field.components();
    let layout = grid.layout();
    let coeffs = Coefficients::Oscillating {
        field: field.clone(),
        eps: 1.0,
    };
    let hierarchy = Hierarchy::new(assemble_stiffness(&layout, &coeffs));
    let rhs = cell_right_hand_sides(field, grid);
    let results: Vec<Result<(Vec<f64>, f64, usize)>> = rhs
        .par_iter()
        .map(|b| {
            let mut x = vec![0.0; b.len()];
            let mut mg = VCycle::new(&hierarchy, 0.0, opts.mg)?;
            let op = hierarchy.finest();
            let st = pcg(
                |x: &[f64], y: &mut [f64]| op.apply(0.0, x, y),
                |r: &[f64], z: &mut [f64]| mg.apply(r, z),
                b,
                &mut x,
                opts.krylov,
                Some(m),
            )?;
            Ok((x, st.residual, st.iterations))
        })
        .collect();
    let mut chi = Vec::with_capacity(d * m);
    let mut residuals = Vec::with_capacity(d * m);
    let mut iterations = Vec::with_capacity(d * m);
    for r in results {
        let (x, res, it) = r?;
        chi.push(x);
        residuals.push(res);
        iterations.push(it);
    }
    Ok(Correctors {
        grid: *grid,
        m,
        chi,
        residuals,
        iterations,
    })
}

/// Cell average of `a_ij^{αβ} + a_ik^{αγ} ∂_k χ_j^{γβ}` with the assembly quadrature.
pub fn homogenize(field: &CoefficientField, chi: &Correctors) -> Result<Tensor> {
    let grid = chi.grid();
    check_field(field, grid)?;
    let d = grid.dim();
    let m = chi.components();
    let layout = grid.layout();
    let h = vec![grid.h(); d];
    let basis = ElementBasis::new(d, &h, &Rule1d::gauss(2));
    let nq = basis.num_points();
    let nodes = basis.nodes;
    let mut acc = vec![0.0; d * d * m * m];
    let mut a = vec![0.0; field.len()];
    let mut y = [0.0; 3];
    // grad[(j*m+β)][γ*d+k] at one quadrature point
    let mut grad = vec![0.0; d * m * m * d];
    for_each_element(&layout, |el| {
        for q in 0..nq {
            physical_point(&layout, el.cell, &basis.points[q], &mut y);
            field.sample_into(&y[..d], &mut a);
            grad.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..d {
                for be in 0..m {
                    let c = chi.get(j, be);
                    let g = &mut grad[(j * m + be) * m * d..(j * m + be + 1) * m * d];
                    for nd in 0..nodes {
                        let u = el.unknowns[nd];
                        for ga in 0..m {
                            let v = c[u * m + ga];
                            for k in 0..d {
                                g[ga * d + k] += v * basis.grad(q, nd, k);
                            }
                        }
                    }
                }
            }
            let w = basis.weights[q];
            for i in 0..d {
                for j in 0..d {
                    for al in 0..m {
                        for be in 0..m {
                            let mut v = a[Tensor::index(d, m, i, j, al, be)];
                            let g = &grad[(j * m + be) * m * d..(j * m + be + 1) * m * d];
                            for k in 0..d {
                                for ga in 0..m {
                                    v += a[Tensor::index(d, m, i, k, al, ga)] * g[ga * d + k];
                                }
                            }
                            acc[Tensor::index(d, m, i, j, al, be)] += w * v;
                        }
                    }
                }
            }
        }
    });
    let t = Tensor::from_vec(d, m, acc)?;
    let asym = t.asymmetry();
    if asym > HOMOGENIZED_SYMMETRY_TOL {
        return Err(Error::Inconsistent(format!(
            "homogenized tensor asymmetry {asym:.3e} exceeds {HOMOGENIZED_SYMMETRY_TOL:.0e}"
        )));
    }
    Ok(t)
}

/// Nodal flux density `b_ij^{αβ}`, one grid function per tensor entry.
#[derive(Clone, Debug)]
pub struct FluxDensity {
    grid: UnitCellGrid,
    m: usize,
    /// indexed by [`Tensor::index`]
    data: Vec<Vec<f64>>,
}

impl FluxDensity {
    pub fn grid(&self) -> &UnitCellGrid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize, alpha: usize, beta: usize) -> &[f64] {
        let d = self.grid.dim();
        &self.data[Tensor::index(d, self.m, i, j, alpha, beta)]
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.data
    }

    pub fn from_entries(grid: UnitCellGrid, m: usize, data: Vec<Vec<f64>>) -> Result<Self> {
        let d = grid.dim();
        if data.len() != d * d * m * m || data.iter().any(|v| v.len() != grid.num_nodes()) {
            return Err(Error::DomainMismatch("flux density does not match the cell grid".into()));
        }
        Ok(Self { grid, m, data })
    }

    /// Largest absolute mean over all entries.
    pub fn max_mean(&self) -> f64 {
        self.data
            .iter()
            .map(|v| (v.iter().sum::<f64>() / v.len() as f64).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data
            .iter()
            .flat_map(|v| v.iter())
            .map(|x| x.abs())
            .fold(0.0, f64::max)
    }
}

/// `b_ij^{αβ} = â_ij^{αβ} − a_ij^{αβ} − a_ik^{αγ} ∂_k χ_j^{γβ}` at the nodes.
pub fn flux_density(field: &CoefficientField, chi: &Correctors, a_hat: &Tensor) -> Result<FluxDensity> {
    let grid = *chi.grid();
    check_field(field, &grid)?;
    let d = grid.dim();
    let m = chi.components();
    let layout = grid.layout();
    let nn = grid.num_nodes();
    let grads: Vec<Vec<f64>> = (0..d * m)
        .map(|jb| nodal_gradients(&layout, m, &chi.chi[jb]))
        .collect();
    let mut data = vec![vec![0.0; nn]; d * d * m * m];
    let mut a = vec![0.0; field.len()];
    for node in 0..nn {
        let y = grid.node_point(node);
        field.sample_into(&y[..d], &mut a);
        for i in 0..d {
            for j in 0..d {
                for al in 0..m {
                    for be in 0..m {
                        let idx = Tensor::index(d, m, i, j, al, be);
                        let g = &grads[j * m + be][node * m * d..(node + 1) * m * d];
                        let mut v = a_hat.as_slice()[idx] - a[idx];
                        for k in 0..d {
                            for ga in 0..m {
                                v -= a[Tensor::index(d, m, i, k, al, ga)] * g[ga * d + k];
                            }
                        }
                        data[idx][node] = v;
                    }
                }
            }
        }
    }
    Ok(FluxDensity { grid, m, data })
}

/// Everything the cell problems produce for one field and grid.
#[derive(Clone, Debug)]
pub struct CorrectorSet {
    pub correctors: Correctors,
    pub homogenized: Tensor,
    pub flux_density: FluxDensity,
    pub flux_correctors: FluxCorrectors,
}

impl CorrectorSet {
    pub fn compute(field: &CoefficientField, grid: &UnitCellGrid, opts: CellSolveOptions) -> Result<Self> {
        let correctors = solve_correctors(field, grid, opts)?;
        let homogenized = homogenize(field, &correctors)?;
        let b = flux_density(field, &correctors, &homogenized)?;
        let flux_correctors = solve_flux_correctors(&b, DEFAULT_FLUX_MEAN_TOL)?;
        Ok(Self {
            correctors,
            homogenized,
            flux_density: b,
            flux_correctors,
        })
    }
}

/// Homogenized tensor only.
pub fn homogenized_tensor(field: &CoefficientField, grid: &UnitCellGrid, opts: CellSolveOptions) -> Result<Tensor> {
    if field.is_constant() {
        return Ok(field.sample(&vec![0.0; field.dim()]));
    }
    let chi = solve_correctors(field, grid, opts)?;
    homogenize(field, &chi)
}
