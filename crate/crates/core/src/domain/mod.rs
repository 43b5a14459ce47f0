//! Bounded rectangular domains, nodal fields and Dirichlet resolvent solves.

mod assembly;
mod correctors;
mod levels;
mod norms;
mod solve;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fem::{nodal_gradients, Coefficients};
use crate::linalg::stencil::{AxisLayout, Layout};

pub use assembly::{assemble_operator, bilinear_form, DiscreteOperator, ShiftedSystem};
pub use correctors::{dirichlet_correctors, dirichlet_correctors_with, operator_corrector_apply, DirichletCorrectors};
pub use levels::{matched_cell_grid, ScaleLevel, FALLBACK_CELL_GRID};
pub use norms::{norms, p_label, NormKind, NormTable};
pub use solve::{solve_boundary_value, solve_dirichlet, solve_interior, ResolventSolution, SolveOptions};

/// Oscillating solves need at least this many cells per period.
pub const CELLS_PER_PERIOD: f64 = 16.0;

/// Rectangle `[0, L₁] × … × [0, L_d]` with a uniform lattice of `n_k` cells per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteDomain {
    lengths: Vec<f64>,
    cells: Vec<usize>,
}

impl DiscreteDomain {
    pub fn new(lengths: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        let d = lengths.len();
        if d != 2 && d != 3 {
            return Err(Error::param(format!("domain dimension must be 2 or 3, got {d}")));
        }
        if cells.len() != d {
            return Err(Error::param("one cell count per axis is required"));
        }
        if lengths.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::param("domain lengths must be positive"));
        }
        if cells.iter().any(|&n| n < 2) {
            return Err(Error::param("at least two cells per axis are required"));
        }
        Ok(Self { lengths, cells })
    }

    /// `[0,1]^d` with `n` cells per axis.
    pub fn unit(d: usize, n: usize) -> Result<Self> {
        Self::new(vec![1.0; d], vec![n; d])
    }

    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn h(&self, k: usize) -> f64 {
        self.lengths[k] / self.cells[k] as f64
    }

    pub fn max_h(&self) -> f64 {
        (0..self.dim()).map(|k| self.h(k)).fold(0.0, f64::max)
    }

    /// Diameter `R₀` (the diagonal length).
    pub fn diameter(&self) -> f64 {
        self.lengths.iter().map(|l| l * l).sum::<f64>().sqrt()
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// Lattice including boundary nodes.
    pub fn full_layout(&self) -> Layout {
        Layout::new(
            (0..self.dim())
                .map(|k| AxisLayout::closed(self.cells[k], self.lengths[k]))
                .collect(),
        )
    }

    /// Lattice of interior unknowns.
    pub fn interior_layout(&self) -> Layout {
        Layout::new(
            (0..self.dim())
                .map(|k| AxisLayout::dirichlet(self.cells[k], self.lengths[k]))
                .collect(),
        )
    }

    pub fn full_counts(&self) -> [usize; 3] {
        let mut c = [1usize; 3];
        for k in 0..self.dim() {
            c[k] = self.cells[k] + 1;
        }
        c
    }

    pub fn num_nodes(&self) -> usize {
        self.full_counts().iter().product()
    }

    pub fn num_interior(&self) -> usize {
        self.cells.iter().map(|n| n - 1).product()
    }

    #[inline]
    pub fn node_coords(&self, i: usize) -> [usize; 3] {
        let c = self.full_counts();
        [i % c[0], (i / c[0]) % c[1], i / (c[0] * c[1])]
    }

    #[inline]
    pub fn node_index(&self, c: [usize; 3]) -> usize {
        let n = self.full_counts();
        (c[2] * n[1] + c[1]) * n[0] + c[0]
    }

    pub fn node_point(&self, i: usize) -> [f64; 3] {
        let c = self.node_coords(i);
        let mut p = [0.0; 3];
        for k in 0..self.dim() {
            p[k] = c[k] as f64 * self.h(k);
        }
        p
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        let c = self.node_coords(i);
        (0..self.dim()).any(|k| c[k] == 0 || c[k] == self.cells[k])
    }

    /// Distance to the boundary, exactly 0 on boundary nodes.
    pub fn boundary_distance(&self, i: usize) -> f64 {
        let c = self.node_coords(i);
        (0..self.dim())
            .map(|k| c[k].min(self.cells[k] - c[k]) as f64 * self.h(k))
            .fold(f64::INFINITY, f64::min)
    }

    /// Full-lattice index of interior unknown `u`.
    pub fn interior_to_full(&self, u: usize) -> usize {
        let d = self.dim();
        let mut c = [0usize; 3];
        let mut r = u;
        for k in 0..d {
            let n = self.cells[k] - 1;
            c[k] = r % n + 1;
            r /= n;
        }
        self.node_index(c)
    }

    /// Interior unknown of a full-lattice node, if it is interior.
    pub fn full_to_interior(&self, i: usize) -> Option<usize> {
        if self.is_boundary(i) {
            return None;
        }
        let c = self.node_coords(i);
        let d = self.dim();
        let mut u = 0usize;
        for k in (0..d).rev() {
            u = u * (self.cells[k] - 1) + (c[k] - 1);
        }
        Some(u)
    }

    /// Node nearest to a point.
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let mut c = [0usize; 3];
        for k in 0..self.dim() {
            let v = (x[k] / self.h(k)).round();
            c[k] = v.clamp(0.0, self.cells[k] as f64) as usize;
        }
        self.node_index(c)
    }

    /// Enforce `h ≤ ε/16` for oscillating coefficients.
    pub fn check_resolution(&self, coeffs: &Coefficients) -> Result<()> {
        if let Some(eps) = coeffs.epsilon() {
            if coeffs.is_constant() {
                return Ok(());
            }
            let h = self.max_h();
            let limit = eps / CELLS_PER_PERIOD;
            if h > limit * (1.0 + 1e-12) {
                return Err(Error::Resolution { h, limit, eps });
            }
        }
        Ok(())
    }
}

/// Complex nodal values on the full lattice of a domain, `comps` values per node.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    domain: DiscreteDomain,
    comps: usize,
    values: Vec<Complex64>,
    /// Oscillation period of the operator that produced this field, if any.
    oscillation: Option<f64>,
}

impl GridField {
    pub fn zeros(domain: &DiscreteDomain, comps: usize) -> Self {
        Self {
            domain: domain.clone(),
            comps,
            values: vec![Complex64::new(0.0, 0.0); domain.num_nodes() * comps],
            oscillation: None,
        }
    }

    /// Sample `f(x, out)` at every node.
    pub fn from_fn(domain: &DiscreteDomain, comps: usize, f: impl Fn(&[f64], &mut [Complex64])) -> Self {
        let mut g = Self::zeros(domain, comps);
        let d = domain.dim();
        for i in 0..domain.num_nodes() {
            let p = domain.node_point(i);
            f(&p[..d], &mut g.values[i * comps..(i + 1) * comps]);
        }
        g
    }

    pub fn from_values(domain: &DiscreteDomain, comps: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != domain.num_nodes() * comps {
            return Err(Error::DomainMismatch(format!(
                "{} values for {} nodes with {comps} components",
                values.len(),
                domain.num_nodes()
            )));
        }
        Ok(Self {
            domain: domain.clone(),
            comps,
            values,
            oscillation: None,
        })
    }

    /// Scatter interior unknowns into a field that vanishes on the boundary.
    pub fn from_interior(domain: &DiscreteDomain, comps: usize, interior: &[Complex64]) -> Self {
        let mut g = Self::zeros(domain, comps);
        for u in 0..domain.num_interior() {
            let i = domain.interior_to_full(u);
            g.values[i * comps..(i + 1) * comps].copy_from_slice(&interior[u * comps..(u + 1) * comps]);
        }
        g
    }

    pub fn domain(&self) -> &DiscreteDomain {
        &self.domain
    }

    pub fn components(&self) -> usize {
        self.comps
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn oscillation(&self) -> Option<f64> {
        self.oscillation
    }

    pub fn with_oscillation(mut self, eps: Option<f64>) -> Self {
        self.oscillation = eps;
        self
    }

    pub fn at(&self, node: usize) -> &[Complex64] {
        &self.values[node * self.comps..(node + 1) * self.comps]
    }

    /// Interior unknowns, node-major.
    pub fn interior(&self) -> Vec<Complex64> {
        let n = self.domain.num_interior();
        let c = self.comps;
        let mut out = Vec::with_capacity(n * c);
        for u in 0..n {
            let i = self.domain.interior_to_full(u);
            out.extend_from_slice(&self.values[i * c..(i + 1) * c]);
        }
        out
    }

    /// Largest magnitude over the boundary nodes.
    pub fn max_boundary_abs(&self) -> f64 {
        let c = self.comps;
        (0..self.domain.num_nodes())
            .filter(|&i| self.domain.is_boundary(i))
            .map(|i| node_norm(&self.values[i * c..(i + 1) * c]))
            .fold(0.0, f64::max)
    }

    /// Largest nodal Euclidean magnitude.
    pub fn max_abs(&self) -> f64 {
        self.values
            .chunks_exact(self.comps)
            .map(node_norm)
            .fold(0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    /// Element-averaged nodal gradient, `comps · d` values per node (`[α * d + k]`).
    pub fn gradient(&self) -> GridField {
        let layout = self.domain.full_layout();
        let g = nodal_gradients(&layout, self.comps, &self.values);
        GridField {
            domain: self.domain.clone(),
            comps: self.comps * self.domain.dim(),
            values: g,
            oscillation: self.oscillation,
        }
    }

    fn check_same(&self, other: &GridField) -> Result<()> {
        if self.domain != other.domain || self.comps != other.comps {
            return Err(Error::DomainMismatch("fields live on different lattices".into()));
        }
        Ok(())
    }

    /// `self − other`.
    pub fn sub(&self, other: &GridField) -> Result<GridField> {
        self.check_same(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(GridField {
            domain: self.domain.clone(),
            comps: self.comps,
            values,
            oscillation: self.oscillation.or(other.oscillation),
        })
    }

    /// `self + other`.
    pub fn add(&self, other: &GridField) -> Result<GridField> {
        self.check_same(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(GridField {
            domain: self.domain.clone(),
            comps: self.comps,
            values,
            oscillation: self.oscillation.or(other.oscillation),
        })
    }

    pub fn scaled(&self, s: Complex64) -> GridField {
        GridField {
            domain: self.domain.clone(),
            comps: self.comps,
            values: self.values.iter().map(|v| v * s).collect(),
            oscillation: self.oscillation,
        }
    }
}

#[inline]
pub(crate) fn node_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::CoefficientField;

    #[test]
    fn domain_metadata() {
        let d = DiscreteDomain::new(vec![1.0, 2.0], vec![4, 8]).unwrap();
        assert_eq!(d.num_nodes(), 45);
        assert_eq!(d.num_interior(), 21);
        assert!((d.diameter() - 5f64.sqrt()).abs() < 1e-15);
        for i in 0..d.num_nodes() {
            let b = d.is_boundary(i);
            assert_eq!(b, d.boundary_distance(i) == 0.0);
            match d.full_to_interior(i) {
                Some(u) => assert_eq!(d.interior_to_full(u), i),
                None => assert!(b),
            }
        }
        let mid = d.nearest_node(&[0.5, 1.0]);
        assert!((d.boundary_distance(mid) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn resolution_rule() {
        let d = DiscreteDomain::unit(2, 256).unwrap();
        let f = CoefficientField::laminate(2, 1, 2.0, 1.0).unwrap();
        let c = Coefficients::Oscillating { field: f.clone(), eps: 1.0 / 64.0 };
        assert!(matches!(d.check_resolution(&c), Err(Error::Resolution { .. })));
        let c = Coefficients::Oscillating { field: f, eps: 1.0 / 16.0 };
        assert!(d.check_resolution(&c).is_ok());
    }

    #[test]
    fn gradient_of_linear_field_is_exact() {
        let d = DiscreteDomain::new(vec![1.0, 2.0], vec![8, 8]).unwrap();
        let u = GridField::from_fn(&d, 1, |x, out| out[0] = Complex64::new(3.0 * x[0] - x[1], 0.0));
        let g = u.gradient();
        for i in 0..d.num_nodes() {
            assert!((g.at(i)[0].re - 3.0).abs() < 1e-12);
            assert!((g.at(i)[1].re + 1.0).abs() < 1e-12);
        }
    }
}
