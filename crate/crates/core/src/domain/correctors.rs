use std::sync::Arc;

use num_complex::Complex64;

use super::assembly::DiscreteOperator;
use super::norms::{norms, NormKind};
use super::solve::{solve_boundary_value, ResolventSolution, SolveOptions};
use super::{DiscreteDomain, GridField};
use crate::error::{Error, Result};
use crate::fem::Coefficients;
use crate::spectral::SpectralParameter;
use crate::tensor::CoefficientField;

/// Dirichlet correctors `Φ_j^β` with `L Φ = 0` and `Φ = P_j^β = x_j e_β` on the boundary.
#[derive(Clone, Debug)]
pub struct DirichletCorrectors {
    d: usize,
    m: usize,
    eps: Option<f64>,
    /// `phi[j * m + β]`, `m` components per node
    phi: Vec<GridField>,
    /// `‖Φ_j^β − P_j^β‖_∞`
    pub deviation: Vec<f64>,
    /// `‖∇Φ_j^β‖_∞` over element quadrature points
    pub gradient_sup: Vec<f64>,
    pub iterations: usize,
}

impl DirichletCorrectors {
    pub fn get(&self, j: usize, beta: usize) -> &GridField {
        &self.phi[j * self.m + beta]
    }

    pub fn domain(&self) -> &DiscreteDomain {
        self.phi[0].domain()
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.eps
    }

    pub fn components(&self) -> usize {
        self.m
    }

    pub fn max_deviation(&self) -> f64 {
        self.deviation.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_gradient(&self) -> f64 {
        self.gradient_sup.iter().copied().fold(0.0, f64::max)
    }
}

fn affine(domain: &DiscreteDomain, m: usize, j: usize, beta: usize) -> GridField {
    GridField::from_fn(domain, m, |x, o| {
        o.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        o[beta] = Complex64::new(x[j], 0.0);
    })
}

/// Dirichlet correctors of `−div(A(x/ε)∇·)` on a domain.
pub fn dirichlet_correctors(
    domain: &DiscreteDomain,
    field: &CoefficientField,
    eps: f64,
    opts: SolveOptions,
) -> Result<DirichletCorrectors> {
    let coeffs = Coefficients::Oscillating {
        field: field.clone(),
        eps,
    };
    dirichlet_correctors_with(&DiscreteOperator::new(domain, &coeffs)?, opts)
}

/// Dirichlet correctors reusing an assembled operator.
pub fn dirichlet_correctors_with(op: &Arc<DiscreteOperator>, opts: SolveOptions) -> Result<DirichletCorrectors> {
    let dom = op.domain();
    let d = dom.dim();
    let m = op.components();
    let sys = op.shifted(SpectralParameter::zero());
    let mut phi = Vec::with_capacity(d * m);
    let mut deviation = Vec::with_capacity(d * m);
    let mut gradient_sup = Vec::with_capacity(d * m);
    let mut iterations = 0;
    for j in 0..d {
        for beta in 0..m {
            let p = affine(dom, m, j, beta);
            let sol = solve_boundary_value(&sys, &p, opts)?;
            iterations += sol.iterations;
            deviation.push(sol.u.sub(&p)?.max_abs());
            gradient_sup.push(norms(&sol.u, &[NormKind::GradLp(f64::INFINITY)])?.entries[0].1);
            phi.push(sol.u);
        }
    }
    Ok(DirichletCorrectors {
        d,
        m,
        eps: op.coefficients().epsilon(),
        phi,
        deviation,
        gradient_sup,
        iterations,
    })
}

/// `(Φ_j^{αβ} − P_j^{αβ}) ∂_j u₀^β` at every node, with element-averaged gradients of `u₀`.
pub fn operator_corrector_apply(phi: &DirichletCorrectors, u0: &ResolventSolution) -> Result<GridField> {
    let dom = phi.domain();
    let (d, m) = (phi.d, phi.m);
    if u0.u.domain() != dom || u0.u.components() != m {
        return Err(Error::DomainMismatch(
            "homogenized solution and correctors live on different lattices".into(),
        ));
    }
    let grad = u0.gradient.values();
    let mut out = GridField::zeros(dom, m);
    for i in 0..dom.num_nodes() {
        let x = dom.node_point(i);
        for j in 0..d {
            for be in 0..m {
                let g = grad[(i * m + be) * d + j];
                if g == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let ph = phi.get(j, be).at(i);
                for al in 0..m {
                    let p = if al == be { x[j] } else { 0.0 };
                    out.values_mut()[i * m + al] += (ph[al] - p) * g;
                }
            }
        }
    }
    Ok(out.with_oscillation(phi.eps))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::domain::solve_dirichlet;
    use crate::tensor::Tensor;

    #[test]
    fn constant_coefficients_reproduce_affine_data() {
        let dom = DiscreteDomain::new(vec![1.0, 0.75], vec![16, 12]).unwrap();
        let field = CoefficientField::constant(Tensor::identity(2, 2)).unwrap();
        let phi = dirichlet_correctors(&dom, &field, 0.1, SolveOptions::with_tol(1e-12)).unwrap();
        assert!(phi.max_deviation() < 1e-10);
        assert!((phi.max_gradient() - 1.0).abs() < 1e-9);

        let op = DiscreteOperator::new(&dom, &Coefficients::Homogenized(Tensor::identity(2, 2))).unwrap();
        let f = GridField::from_fn(&dom, 2, |x, o| {
            o[0] = Complex64::new(x[0], 1.0);
            o[1] = Complex64::new(1.0, -x[1]);
        });
        let u0 = solve_dirichlet(&op.shifted(SpectralParameter::real(-1.0).unwrap()), &f, None, SolveOptions::default()).unwrap();
        assert!(operator_corrector_apply(&phi, &u0).unwrap().max_abs() < 1e-9);
    }

    #[test]
    fn laminate_corrector_bound() {
        let dom = DiscreteDomain::unit(2, 256).unwrap();
        let field = CoefficientField::laminate(2, 1, 2.0, 1.0).unwrap();
        let eps = 1.0 / 16.0;
        let phi = dirichlet_correctors(&dom, &field, eps, SolveOptions::default()).unwrap();
        // Φ₂ = x₂ for a laminate in x₁
        assert!(phi.deviation[1] < 1e-8);
        assert!(phi.deviation[0] > 1e-4 && phi.deviation[0] < eps);

        let op = DiscreteOperator::new(&dom, &Coefficients::Homogenized(Tensor::identity(2, 1))).unwrap();
        let zero = GridField::zeros(&dom, 1);
        let z = solve_dirichlet(&op.shifted(SpectralParameter::zero()), &zero, None, SolveOptions::default()).unwrap();
        assert_eq!(operator_corrector_apply(&phi, &z).unwrap().max_abs(), 0.0);

        let f = GridField::from_fn(&dom, 1, |x, o| o[0] = Complex64::new((PI * x[0]).sin() * (PI * x[1]).sin(), 0.0));
        let u0 = solve_dirichlet(&op.shifted(SpectralParameter::real(-1.0).unwrap()), &f, None, SolveOptions::default()).unwrap();
        let w = operator_corrector_apply(&phi, &u0).unwrap();
        assert!(w.max_abs() <= phi.max_deviation() * u0.gradient.max_abs() * (1.0 + 1e-12));
        assert!(w.max_abs() > 0.0);

        let other = DiscreteDomain::unit(2, 128).unwrap();
        let op2 = DiscreteOperator::new(&other, &Coefficients::Homogenized(Tensor::identity(2, 1))).unwrap();
        let zero2 = GridField::zeros(&other, 1);
        let u2 = solve_dirichlet(&op2.shifted(SpectralParameter::zero()), &zero2, None, SolveOptions::default()).unwrap();
        assert!(matches!(operator_corrector_apply(&phi, &u2), Err(Error::DomainMismatch(_))));
    }
}
