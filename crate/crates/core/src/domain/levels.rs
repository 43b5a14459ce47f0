use std::sync::Arc;

use super::assembly::DiscreteOperator;
use super::correctors::{dirichlet_correctors_with, DirichletCorrectors};
use super::solve::SolveOptions;
use super::DiscreteDomain;
use crate::cell::{homogenized_tensor, CellSolveOptions, UnitCellGrid};
use crate::error::Result;
use crate::fem::Coefficients;
use crate::tensor::{CoefficientField, Tensor};

/// Cell resolution used when `ε / h` is not an even integer of at least 8.
pub const FALLBACK_CELL_GRID: usize = 256;

/// Everything a comparison at one `ε` needs: both operators and the Dirichlet correctors.
#[derive(Debug)]
pub struct ScaleLevel {
    pub eps: f64,
    pub oscillating: Arc<DiscreteOperator>,
    pub homogenized: Arc<DiscreteOperator>,
    pub a_hat: Tensor,
    /// Cells per period of the cell problem behind `a_hat`.
    pub cell_grid: usize,
    pub correctors: DirichletCorrectors,
}

/// Cell grid whose nodes coincide with the domain lattice scaled by `1/ε`, if one exists.
pub fn matched_cell_grid(domain: &DiscreteDomain, eps: f64) -> Option<usize> {
    let h = domain.h(0);
    if (1..domain.dim()).any(|k| (domain.h(k) - h).abs() > 1e-12 * h) {
        return None;
    }
    let r = eps / h;
    let n = r.round();
    if (r - n).abs() > 1e-9 * r || n < 8.0 || n as usize % 2 != 0 {
        return None;
    }
    Some(n as usize)
}

impl ScaleLevel {
    /// Assemble both operators, the homogenized tensor on the matched cell grid and `Φ_ε`.
    pub fn build(
        domain: &DiscreteDomain,
        field: &CoefficientField,
        eps: f64,
        cell: CellSolveOptions,
        opts: SolveOptions,
    ) -> Result<Self> {
        let oscillating = DiscreteOperator::new(
            domain,
            &Coefficients::Oscillating {
                field: field.clone(),
                eps,
            },
        )?;
        let n = matched_cell_grid(domain, eps).unwrap_or(FALLBACK_CELL_GRID);
        let a_hat = homogenized_tensor(field, &UnitCellGrid::new(field.dim(), n)?, cell)?;
        let homogenized = DiscreteOperator::new(domain, &Coefficients::Homogenized(a_hat.clone()))?;
        let correctors = dirichlet_correctors_with(&oscillating, opts)?;
        Ok(Self {
            eps,
            oscillating,
            homogenized,
            a_hat,
            cell_grid: n,
            correctors,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matched_grid_rules() {
        let dom = DiscreteDomain::unit(2, 1024).unwrap();
        assert_eq!(matched_cell_grid(&dom, 1.0 / 64.0), Some(16));
        assert_eq!(matched_cell_grid(&dom, 1.0 / 256.0), None);
        assert_eq!(matched_cell_grid(&dom, 0.1), None);
        let skew = DiscreteDomain::new(vec![1.0, 2.0], vec![64, 64]).unwrap();
        assert_eq!(matched_cell_grid(&skew, 0.25), None);
    }
}
