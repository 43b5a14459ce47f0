use num_complex::Complex64;

use super::assembly::ShiftedSystem;
use super::norms::{norms, NormKind, NormTable};
use super::GridField;
use crate::error::{Error, Result};
use crate::fem::load_vector;
use crate::linalg::{bicgstab, pcg, KrylovOptions, MgOptions, SolveStats, VCycle};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveOptions {
    pub krylov: KrylovOptions,
    pub mg: MgOptions,
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            krylov: KrylovOptions {
                tol,
                ..KrylovOptions::default()
            },
            mg: MgOptions::default(),
        }
    }
}

/// Discrete `R(λ, L)` applied to a right-hand side.
#[derive(Clone, Debug)]
pub struct ResolventSolution {
    pub u: GridField,
    /// Element-averaged nodal gradient, `[α * d + k]` per node.
    pub gradient: GridField,
    /// Relative algebraic residual.
    pub residual: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

impl ResolventSolution {
    pub fn norms(&self, which: &[NormKind]) -> Result<NormTable> {
        norms(&self.u, which)
    }
}

/// Solve `(K − λM) x = rhs` on interior unknowns.
///
/// Real `λ` runs preconditioned CG on the real and imaginary parts separately;
/// other `λ` run BiCGSTAB. Both use the operator's V-cycle.
pub fn solve_interior(sys: &ShiftedSystem, rhs: &[Complex64], opts: SolveOptions) -> Result<(Vec<Complex64>, SolveStats)> {
    if rhs.len() != sys.len() {
        return Err(Error::DomainMismatch(format!(
            "right-hand side of length {} for a system of size {}",
            rhs.len(),
            sys.len()
        )));
    }
    let h = sys.operator().hierarchy();
    let op = h.finest();
    let lam = sys.lambda();
    let n = rhs.len();
    let mut stats = SolveStats::default();
    if lam.is_real() {
        let l = lam.value().re;
        let mut mg = VCycle::new(h, l, opts.mg)?;
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for part in 0..2 {
            let b: Vec<f64> = rhs.iter().map(|z| if part == 0 { z.re } else { z.im }).collect();
            if b.iter().all(|&v| v == 0.0) {
                continue;
            }
            let mut x = vec![0.0; n];
            let st = pcg(
                |x: &[f64], y: &mut [f64]| op.apply(l, x, y),
                |r: &[f64], z: &mut [f64]| mg.apply(r, z),
                &b,
                &mut x,
                opts.krylov,
                None,
            )?;
            stats.merge(&st);
            for (o, v) in out.iter_mut().zip(&x) {
                if part == 0 {
                    o.re = *v;
                } else {
                    o.im = *v;
                }
            }
        }
        Ok((out, stats))
    } else {
        let l = lam.value();
        let mut mg = VCycle::new(h, l, opts.mg)?;
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        let st = bicgstab(
            |x: &[Complex64], y: &mut [Complex64]| op.apply(l, x, y),
            |r: &[Complex64], z: &mut [Complex64]| mg.apply(r, z),
            rhs,
            &mut x,
            opts.krylov,
        )?;
        Ok((x, st))
    }
}

fn finish(sys: &ShiftedSystem, u: GridField, stats: SolveStats) -> ResolventSolution {
    let u = u.with_oscillation(sys.operator().coefficients().epsilon());
    let gradient = u.gradient();
    ResolventSolution {
        u,
        gradient,
        residual: stats.residual,
        iterations: stats.iterations,
        history: stats.history,
    }
}

/// Weak solution of `(L − λ)u = F + div f` with `u = 0` on the boundary.
///
/// `f` carries `m·d` values per node (`[α * d + k]`) and enters through `−∫ f·∇φ`.
pub fn solve_dirichlet(
    sys: &ShiftedSystem,
    source: &GridField,
    flux: Option<&GridField>,
    opts: SolveOptions,
) -> Result<ResolventSolution> {
    let dom = sys.domain();
    let m = sys.operator().components();
    if source.domain() != dom || source.components() != m {
        return Err(Error::DomainMismatch("source does not match the system".into()));
    }
    if let Some(f) = flux {
        if f.domain() != dom || f.components() != m * dom.dim() {
            return Err(Error::DomainMismatch("flux does not match the system".into()));
        }
    }
    let rhs = load_vector(
        &dom.interior_layout(),
        m,
        Some(source.values()),
        flux.map(|f| f.values()),
    );
    let (x, stats) = solve_interior(sys, &rhs, opts)?;
    Ok(finish(sys, GridField::from_interior(dom, m, &x), stats))
}

/// Solution of `(L − λ)u = 0` with `u = g` on boundary nodes (interior values of `g` are ignored).
pub fn solve_boundary_value(sys: &ShiftedSystem, g: &GridField, opts: SolveOptions) -> Result<ResolventSolution> {
    let dom = sys.domain();
    let m = sys.operator().components();
    if g.domain() != dom || g.components() != m {
        return Err(Error::DomainMismatch("boundary data does not match the system".into()));
    }
    let rhs = sys.operator().lifting_load(sys.lambda().value(), g);
    let (x, stats) = solve_interior(sys, &rhs, opts)?;
    let mut u = GridField::from_interior(dom, m, &x);
    for i in 0..dom.num_nodes() {
        if dom.is_boundary(i) {
            u.values_mut()[i * m..(i + 1) * m].copy_from_slice(g.at(i));
        }
    }
    Ok(finish(sys, u, stats))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::domain::{DiscreteDomain, DiscreteOperator};
    use crate::fem::Coefficients;
    use crate::linalg::norm2;
    use crate::spectral::SpectralParameter;
    use crate::tensor::{CoefficientField, Tensor};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn laplace() -> Coefficients {
        Coefficients::Homogenized(Tensor::identity(2, 1))
    }

    fn sin_sin(dom: &DiscreteDomain, s: Complex64) -> GridField {
        GridField::from_fn(dom, 1, |x, o| o[0] = s * (PI * x[0]).sin() * (PI * x[1]).sin())
    }

    #[test]
    fn manufactured_solution_converges_at_second_order() {
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let dom = DiscreteDomain::unit(2, n).unwrap();
            let op = DiscreteOperator::new(&dom, &laplace()).unwrap();
            let sys = op.shifted(SpectralParameter::real(-1.0).unwrap());
            let exact = sin_sin(&dom, c(1.0, 0.0));
            let f = exact.scaled(c(2.0 * PI * PI + 1.0, 0.0));
            let sol = solve_dirichlet(&sys, &f, None, SolveOptions::default()).unwrap();
            assert!(sol.residual <= 1e-10);
            assert_eq!(sol.u.max_boundary_abs(), 0.0);
            errs.push(sol.u.sub(&exact).unwrap().max_abs());
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.9, "{errs:?}");
        }
    }

    #[test]
    fn zero_data_gives_zero() {
        let dom = DiscreteDomain::unit(2, 16).unwrap();
        let op = DiscreteOperator::new(&dom, &laplace()).unwrap();
        let sys = op.shifted(SpectralParameter::new(c(-1.0, 2.0)).unwrap());
        let zero = GridField::zeros(&dom, 1);
        let flux = GridField::zeros(&dom, 2);
        let sol = solve_dirichlet(&sys, &zero, Some(&flux), SolveOptions::default()).unwrap();
        assert_eq!(sol.u.max_abs(), 0.0);
    }

    #[test]
    fn complex_and_real_paths_agree() {
        let dom = DiscreteDomain::unit(2, 32).unwrap();
        let coeffs = Coefficients::Oscillating {
            field: CoefficientField::laminate(2, 1, 2.0, 1.0).unwrap(),
            eps: 0.5,
        };
        let op = DiscreteOperator::new(&dom, &coeffs).unwrap();
        let f = sin_sin(&dom, c(1.0, -2.0));
        let lam = SpectralParameter::real(-3.0).unwrap();
        let a = solve_dirichlet(&op.shifted(lam), &f, None, SolveOptions::with_tol(1e-12)).unwrap();
        let tiny = SpectralParameter::new(c(-3.0, 1e-300)).unwrap();
        assert!(!tiny.is_real());
        let b = solve_dirichlet(&op.shifted(tiny), &f, None, SolveOptions::with_tol(1e-12)).unwrap();
        assert!(a.u.sub(&b.u).unwrap().max_abs() < 1e-9 * a.u.max_abs());
    }

    #[test]
    fn discrete_resolvent_identity() {
        let dom = DiscreteDomain::unit(2, 32).unwrap();
        let coeffs = Coefficients::Oscillating {
            field: CoefficientField::coupled_system(2, 3.0, 0.5, 0.4).unwrap(),
            eps: 0.5,
        };
        let op = DiscreteOperator::new(&dom, &coeffs).unwrap();
        let lam = SpectralParameter::real(-1.0).unwrap();
        let mu = SpectralParameter::new(c(-4.0, 1.0)).unwrap();
        let (sl, sm) = (op.shifted(lam), op.shifted(mu));
        let opts = SolveOptions::with_tol(1e-13);
        let f = GridField::from_fn(&dom, 2, |x, o| {
            o[0] = c(x[0] * (1.0 - x[1]), 0.3);
            o[1] = c((5.0 * x[1]).cos(), -x[0]);
        });
        let mass = |v: &[Complex64]| {
            let mut y = vec![c(0.0, 0.0); v.len()];
            op.hierarchy().finest().apply_mass(v, &mut y);
            y
        };
        let mf = mass(&f.interior());
        let (rl, _) = solve_interior(&sl, &mf, opts).unwrap();
        let (rm, _) = solve_interior(&sm, &mf, opts).unwrap();
        let (rlrm, _) = solve_interior(&sl, &mass(&rm), opts).unwrap();
        let dl = lam.value() - mu.value();
        let diff: Vec<Complex64> = rl.iter().zip(&rm).zip(&rlrm).map(|((a, b), c)| a - b - dl * c).collect();
        assert!(norm2(&diff) <= 1e-9 * norm2(&f.interior()));
    }

    #[test]
    fn constant_boundary_data() {
        let dom = DiscreteDomain::new(vec![1.0, 1.5], vec![32, 48]).unwrap();
        let coeffs = Coefficients::Homogenized(Tensor::identity(2, 2));
        let g = GridField::from_fn(&dom, 2, |_, o| {
            o[0] = c(2.0, 0.0);
            o[1] = c(-1.0, 0.5);
        });
        let op = DiscreteOperator::new(&dom, &coeffs).unwrap();
        let u = solve_boundary_value(&op.shifted(SpectralParameter::zero()), &g, SolveOptions::default()).unwrap();
        assert!(u.u.sub(&g).unwrap().max_abs() < 1e-9);

        let scalar = DiscreteOperator::new(&dom, &laplace()).unwrap();
        let g1 = GridField::from_fn(&dom, 1, |_, o| o[0] = c(1.0, 0.0));
        let sys = scalar.shifted(SpectralParameter::real(-1.0).unwrap());
        let u = solve_boundary_value(&sys, &g1, SolveOptions::default()).unwrap();
        assert!(u.u.max_abs() <= 1.0 + 1e-12);
        assert!(u.u.max_abs() > 0.99);
    }

    #[test]
    fn flux_data_matches_divergence_source() {
        // div f with f = (sin πx sin πy, 0) equals π cos πx sin πy
        let mut errs = Vec::new();
        for n in [16, 32] {
            let dom = DiscreteDomain::unit(2, n).unwrap();
            let op = DiscreteOperator::new(&dom, &laplace()).unwrap();
            let sys = op.shifted(SpectralParameter::real(-2.0).unwrap());
            let flux = GridField::from_fn(&dom, 2, |x, o| {
                o[0] = c((PI * x[0]).sin() * (PI * x[1]).sin(), 0.0);
                o[1] = c(0.0, 0.0);
            });
            let src = GridField::from_fn(&dom, 1, |x, o| o[0] = c(PI * (PI * x[0]).cos() * (PI * x[1]).sin(), 0.0));
            let zero = GridField::zeros(&dom, 1);
            let a = solve_dirichlet(&sys, &zero, Some(&flux), SolveOptions::default()).unwrap();
            let b = solve_dirichlet(&sys, &src, None, SolveOptions::default()).unwrap();
            errs.push(a.u.sub(&b.u).unwrap().max_abs());
        }
        assert!(errs[1] < errs[0] / 3.0, "{errs:?}");
    }
}
