use std::sync::Arc;

use num_complex::Complex64;

use super::{DiscreteDomain, GridField};
use crate::error::{Error, Result};
use crate::fem::{assemble_stiffness, element_mass, for_each_element, Coefficients, StiffnessKernel};
use crate::linalg::Hierarchy;
use crate::spectral::SpectralParameter;

/// Stiffness of `−div(A∇·)` on the interior unknowns with its multigrid hierarchy.
///
/// The hierarchy does not depend on `λ`, so one operator serves every shift.
pub struct DiscreteOperator {
    domain: DiscreteDomain,
    coeffs: Coefficients,
    hierarchy: Hierarchy,
}

impl std::fmt::Debug for DiscreteOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiscreteOperator")
            .field("domain", &self.domain)
            .field("levels", &self.hierarchy.num_levels())
            .finish()
    }
}

impl DiscreteOperator {
    pub fn new(domain: &DiscreteDomain, coeffs: &Coefficients) -> Result<Arc<Self>> {
        if coeffs.dim() != domain.dim() {
            return Err(Error::DomainMismatch(format!(
                "coefficients in dimension {} on a {}-dimensional domain",
                coeffs.dim(),
                domain.dim()
            )));
        }
        domain.check_resolution(coeffs)?;
        let stiffness = assemble_stiffness(&domain.interior_layout(), coeffs);
        Ok(Arc::new(Self {
            domain: domain.clone(),
            coeffs: coeffs.clone(),
            hierarchy: Hierarchy::new(stiffness),
        }))
    }

    pub fn domain(&self) -> &DiscreteDomain {
        &self.domain
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coeffs
    }

    pub fn components(&self) -> usize {
        self.coeffs.components()
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        &self.hierarchy
    }

    /// Number of interior unknowns (nodes × components).
    pub fn len(&self) -> usize {
        self.hierarchy.finest().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shifted(self: &Arc<Self>, lambda: SpectralParameter) -> ShiftedSystem {
        ShiftedSystem {
            op: Arc::clone(self),
            lambda,
        }
    }

    /// `−Σ_b B[g φ_b, φ_i]` over boundary nodes `b`, for every interior unknown `i`.
    pub(crate) fn lifting_load(&self, lambda: Complex64, g: &GridField) -> Vec<Complex64> {
        let dom = &self.domain;
        let d = dom.dim();
        let m = self.components();
        let n = 1 << d;
        let full = dom.full_layout();
        let mut kernel = StiffnessKernel::new(&full, &self.coeffs);
        let me = element_mass(&full);
        let mut ke = vec![0.0; n * n * m * m];
        let mut out = vec![Complex64::new(0.0, 0.0); dom.num_interior() * m];
        let gv = g.values();
        for_each_element(&full, |el| {
            let mut bnd = [false; 8];
            for a in 0..n {
                bnd[a] = dom.is_boundary(el.unknowns[a]);
            }
            if bnd[..n].iter().all(|&b| b) {
                return;
            }
            let active = (0..n).any(|b| bnd[b] && g.at(el.unknowns[b]).iter().any(|z| z.norm_sqr() > 0.0));
            if !active {
                return;
            }
            kernel.element(&full, el.cell, &mut ke);
            for a in 0..n {
                if bnd[a] {
                    continue;
                }
                let row = dom.full_to_interior(el.unknowns[a]).unwrap();
                for b in 0..n {
                    if !bnd[b] {
                        continue;
                    }
                    let gb = &gv[el.unknowns[b] * m..(el.unknowns[b] + 1) * m];
                    for al in 0..m {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for be in 0..m {
                            let mut kv = Complex64::new(ke[((a * m + al) * n + b) * m + be], 0.0);
                            if al == be {
                                kv -= lambda * me[a * n + b];
                            }
                            acc += kv * gb[be];
                        }
                        out[row * m + al] -= acc;
                    }
                }
            }
        });
        out
    }
}

/// `K − λM` for a fixed spectral parameter.
#[derive(Clone, Debug)]
pub struct ShiftedSystem {
    op: Arc<DiscreteOperator>,
    lambda: SpectralParameter,
}

impl ShiftedSystem {
    pub fn operator(&self) -> &Arc<DiscreteOperator> {
        &self.op
    }

    pub fn lambda(&self) -> SpectralParameter {
        self.lambda
    }

    pub fn domain(&self) -> &DiscreteDomain {
        &self.op.domain
    }

    pub fn len(&self) -> usize {
        self.op.len()
    }

    pub fn is_empty(&self) -> bool {
        self.op.is_empty()
    }

    /// `y = (K − λM) x` on interior unknowns.
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.op.hierarchy.finest().apply(self.lambda.value(), x, y);
    }

    /// Row-major dense matrix; intended for small systems only.
    pub fn to_dense(&self) -> Vec<Complex64> {
        self.op.hierarchy.finest().to_dense(self.lambda.value())
    }
}

/// Assemble `K − λM` for `L − λ` with Dirichlet conditions.
pub fn assemble_operator(
    domain: &DiscreteDomain,
    coeffs: &Coefficients,
    lambda: SpectralParameter,
) -> Result<ShiftedSystem> {
    Ok(DiscreteOperator::new(domain, coeffs)?.shifted(lambda))
}

/// `∫ A∇u · conj(∇v) − λ ∫ u · conj(v)` by element quadrature on the full lattice.
pub fn bilinear_form(
    domain: &DiscreteDomain,
    coeffs: &Coefficients,
    lambda: SpectralParameter,
    u: &GridField,
    v: &GridField,
) -> Result<Complex64> {
    let m = coeffs.components();
    for w in [u, v] {
        if w.domain() != domain || w.components() != m {
            return Err(Error::DomainMismatch("field does not match the domain".into()));
        }
    }
    let d = domain.dim();
    let n = 1 << d;
    let full = domain.full_layout();
    let mut kernel = StiffnessKernel::new(&full, coeffs);
    let me = element_mass(&full);
    let mut ke = vec![0.0; n * n * m * m];
    let (uv, vv) = (u.values(), v.values());
    let lam = lambda.value();
    let mut total = Complex64::new(0.0, 0.0);
    for_each_element(&full, |el| {
        kernel.element(&full, el.cell, &mut ke);
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 0..n {
            let va = &vv[el.unknowns[a] * m..(el.unknowns[a] + 1) * m];
            for b in 0..n {
                let ub = &uv[el.unknowns[b] * m..(el.unknowns[b] + 1) * m];
                for al in 0..m {
                    let cv = va[al].conj();
                    for be in 0..m {
                        let mut kv = Complex64::new(ke[((a * m + al) * n + b) * m + be], 0.0);
                        if al == be {
                            kv -= lam * me[a * n + b];
                        }
                        acc += cv * kv * ub[be];
                    }
                }
            }
        }
        total += acc;
    });
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use crate::tensor::{CoefficientField, Tensor};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dirichlet(dom: &DiscreteDomain, m: usize, seed: u64) -> GridField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vals: Vec<Complex64> = (0..dom.num_interior() * m)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        GridField::from_interior(dom, m, &vals)
    }

    fn laminate(eps: f64) -> Coefficients {
        Coefficients::Oscillating {
            field: CoefficientField::laminate(2, 1, 2.0, 1.0).unwrap(),
            eps,
        }
    }

    #[test]
    fn identity_stencil_on_small_square() {
        let dom = DiscreteDomain::unit(2, 3).unwrap();
        let c = Coefficients::Homogenized(Tensor::identity(2, 1));
        let sys = assemble_operator(&dom, &c, SpectralParameter::zero()).unwrap();
        let a = sys.to_dense();
        assert_eq!(sys.len(), 4);
        for i in 0..4 {
            assert!((a[i * 4 + i].re - 8.0 / 3.0).abs() < 1e-14);
        }
        // edge neighbour and diagonal neighbour both couple with −1/3
        assert!((a[1].re + 1.0 / 3.0).abs() < 1e-14);
        assert!((a[3].re + 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn shift_adds_the_mass_matrix() {
        let dom = DiscreteDomain::unit(2, 6).unwrap();
        let op = DiscreteOperator::new(&dom, &laminate(3.0)).unwrap();
        let a0 = op.shifted(SpectralParameter::zero()).to_dense();
        let a1 = op.shifted(SpectralParameter::real(-1.0).unwrap()).to_dense();
        let n = op.len();
        let mass = crate::linalg::StencilOp::zeros(dom.interior_layout(), 1);
        let mut mx = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            let mut e = vec![Complex64::new(0.0, 0.0); n];
            e[j] = Complex64::new(1.0, 0.0);
            mass.apply_mass(&e, &mut mx);
            for i in 0..n {
                assert!((a1[i * n + j] - a0[i * n + j] - mx[i]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn hermitian_structure() {
        let dom = DiscreteDomain::unit(2, 8).unwrap();
        let c = Coefficients::Oscillating {
            field: CoefficientField::coupled_system(2, 3.0, 0.5, 0.4).unwrap(),
            eps: 2.0,
        };
        let op = DiscreteOperator::new(&dom, &c).unwrap();
        let real = op.shifted(SpectralParameter::real(-2.0).unwrap()).to_dense();
        let lam = SpectralParameter::new(Complex64::new(-1.0, 2.5)).unwrap();
        let a = op.shifted(lam).to_dense();
        let b = op.shifted(lam.conj()).to_dense();
        let n = op.len();
        for i in 0..n {
            for j in 0..n {
                assert!((real[i * n + j] - real[j * n + i]).norm() < 1e-14);
                assert!((a[j * n + i].conj() - b[i * n + j]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn resolution_rule_is_enforced() {
        let dom = DiscreteDomain::unit(2, 64).unwrap();
        let err = assemble_operator(&dom, &laminate(1.0 / 8.0), SpectralParameter::zero()).unwrap_err();
        assert!(matches!(err, Error::Resolution { .. }));
    }

    #[test]
    fn form_matches_matrix_and_energy() {
        let dom = DiscreteDomain::unit(2, 32).unwrap();
        let c = laminate(0.5);
        let lam = SpectralParameter::new(Complex64::new(-3.0, 1.5)).unwrap();
        let sys = assemble_operator(&dom, &c, lam).unwrap();
        let u = random_dirichlet(&dom, 1, 1);
        let v = random_dirichlet(&dom, 1, 2);
        let b = bilinear_form(&dom, &c, lam, &u, &v).unwrap();
        let mut au = vec![Complex64::new(0.0, 0.0); sys.len()];
        sys.apply(&u.interior(), &mut au);
        let vau = dot(&v.interior(), &au);
        assert!((b - vau).norm() <= 1e-12 * vau.norm().max(1.0));

        let id = Coefficients::Homogenized(Tensor::identity(2, 1));
        let one = SpectralParameter::real(-1.0).unwrap();
        let e = bilinear_form(&dom, &id, one, &u, &u).unwrap();
        assert!(e.re > 0.0 && e.im.abs() < 1e-12 * e.re);
    }

    #[test]
    fn imaginary_part_identity() {
        let dom = DiscreteDomain::unit(2, 32).unwrap();
        let c = laminate(0.5);
        let lam = SpectralParameter::new(Complex64::new(-0.5, -4.0)).unwrap();
        let u = random_dirichlet(&dom, 1, 9);
        let b = bilinear_form(&dom, &c, lam, &u, &u).unwrap();
        let mass = bilinear_form(&dom, &c, SpectralParameter::real(-1.0).unwrap(), &u, &u).unwrap()
            - bilinear_form(&dom, &c, SpectralParameter::zero(), &u, &u).unwrap();
        assert!((b.im + lam.value().im * mass.re).abs() < 1e-12 * b.norm());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn adjoint_identity(seed in 0u64..1000, re in -5.0f64..0.0, im in -5.0f64..5.0) {
            let dom = DiscreteDomain::unit(2, 16).unwrap();
            let c = Coefficients::Oscillating {
                field: CoefficientField::coupled_system(2, 3.0, 0.5, 0.4).unwrap(),
                eps: 1.0,
            };
            let lam = SpectralParameter::new(Complex64::new(re, im)).unwrap();
            let u = random_dirichlet(&dom, 2, seed);
            let v = random_dirichlet(&dom, 2, seed + 7919);
            let a = bilinear_form(&dom, &c, lam, &u, &v).unwrap();
            let b = bilinear_form(&dom, &c, lam.conj(), &v, &u).unwrap();
            prop_assert!((a - b.conj()).norm() <= 1e-12 * a.norm().max(1.0));
        }
    }
}
