//! Green function columns from mollified point sources and their decay and convergence laws.

mod decay;

use std::sync::Arc;

use num_complex::Complex64;

use crate::cell::CellSolveOptions;
use crate::domain::{
    norms, solve_dirichlet, DiscreteDomain, DiscreteOperator, GridField, NormKind, ResolventSolution, ScaleLevel,
    SolveOptions,
};
use crate::error::{Error, Result};
use crate::fem::load_vector;
use crate::fit::{fit_rate, LogCorrection, RateFit};
use crate::spectral::SpectralParameter;
use crate::tensor::CoefficientField;

pub use decay::{
    check_pointwise_decay, damping_probe, diagonal_samples, mixed_probe_columns, offset_power_fit, DampingProbe, DecayFit,
    DecayRegime, D3_WINDOW, DAMPING_MIN_REDUCTION, GRAD_WINDOW, LOG_LAW_MAX_RESIDUAL, MIXED_WINDOW,
};

/// Slope window of `max |G_ε − G₀| · r^{d−1}`.
pub const VALUE_WINDOW: (f64, f64) = (0.8, 1.2);
/// Slope window of the log-corrected gradient errors.
pub const GRADIENT_WINDOW: (f64, f64) = (0.75, 1.25);

/// Mollifier radius in grid spacings when none is given.
pub const DEFAULT_RHO_CELLS: f64 = 2.0;

/// `e_γ 1_{B(y,ρ)}` on the nodes, scaled so that its consistent-mass load sums to one.
pub fn mollified_source(domain: &DiscreteDomain, y: &[f64], rho: f64, m: usize, gamma: usize) -> Result<GridField> {
    if gamma >= m {
        return Err(Error::param(format!("column index {gamma} out of range for {m} components")));
    }
    let d = domain.dim();
    let mut f = GridField::zeros(domain, m);
    let mut hit = false;
    for i in 0..domain.num_nodes() {
        if domain.is_boundary(i) {
            continue;
        }
        let p = domain.node_point(i);
        let r2: f64 = (0..d).map(|k| (p[k] - y[k]).powi(2)).sum();
        if r2.sqrt() <= rho * (1.0 + 1e-12) {
            f.values_mut()[i * m + gamma] = Complex64::new(1.0, 0.0);
            hit = true;
        }
    }
    if !hit {
        return Err(Error::param(format!("mollifier radius {rho} contains no interior node")));
    }
    let load = load_vector(&domain.interior_layout(), m, Some(f.values()), None);
    let total: f64 = load.iter().map(|z| z.re).sum();
    Ok(f.scaled(Complex64::new(1.0 / total, 0.0)))
}

/// Column `G^{·γ}(·, y)` of the discrete Green function.
#[derive(Clone, Debug)]
pub struct GreenColumn {
    /// Source point, moved to the nearest lattice node.
    pub source: Vec<f64>,
    pub source_node: usize,
    pub rho: f64,
    pub gamma: usize,
    pub lambda: SpectralParameter,
    pub eps: Option<f64>,
    pub solution: ResolventSolution,
}

impl GreenColumn {
    pub fn domain(&self) -> &DiscreteDomain {
        self.solution.u.domain()
    }

    pub fn components(&self) -> usize {
        self.solution.u.components()
    }

    pub fn value(&self, node: usize) -> &[Complex64] {
        self.solution.u.at(node)
    }

    pub fn gradient(&self, node: usize) -> &[Complex64] {
        self.solution.gradient.at(node)
    }

    /// `b_xᵀ G` with `b_x` the mollified load of component `alpha` at `x`.
    pub fn pair(&self, x: &[f64], alpha: usize) -> Result<Complex64> {
        let dom = self.domain();
        let m = self.components();
        let src = mollified_source(dom, x, self.rho, m, alpha)?;
        let b = load_vector(&dom.interior_layout(), m, Some(src.values()), None);
        let u = self.solution.u.interior();
        Ok(b.iter().zip(&u).map(|(a, v)| a * v).sum())
    }

    pub fn scaled(&self, s: f64) -> GreenColumn {
        let mut c = self.clone();
        c.solution.u = c.solution.u.scaled(Complex64::new(s, 0.0));
        c.solution.gradient = c.solution.gradient.scaled(Complex64::new(s, 0.0));
        c
    }
}

/// Solve `(L − λ)G = e_γ 1_{B(y,ρ)} / |B|` with zero Dirichlet data.
///
/// `rho` defaults to two grid spacings and must lie in `[2h, R₀/16]`.
pub fn green_column(
    op: &Arc<DiscreteOperator>,
    lambda: SpectralParameter,
    y: &[f64],
    rho: Option<f64>,
    gamma: usize,
    opts: SolveOptions,
) -> Result<GreenColumn> {
    let dom = op.domain();
    let d = dom.dim();
    if y.len() != d {
        return Err(Error::param(format!("source point needs {d} coordinates")));
    }
    let h = dom.max_h();
    let rho = rho.unwrap_or(DEFAULT_RHO_CELLS * h);
    if rho < 2.0 * h * (1.0 - 1e-12) || rho > dom.diameter() / 16.0 * (1.0 + 1e-12) {
        return Err(Error::param(format!(
            "mollifier radius {rho} outside [2h, R0/16] = [{}, {}]",
            2.0 * h,
            dom.diameter() / 16.0
        )));
    }
    let node = dom.nearest_node(y);
    if dom.boundary_distance(node) <= rho + h {
        return Err(Error::param("source ball touches the boundary"));
    }
    let p = dom.node_point(node);
    let source: Vec<f64> = p[..d].to_vec();
    let f = mollified_source(dom, &source, rho, op.components(), gamma)?;
    let solution = solve_dirichlet(&op.shifted(lambda), &f, None, opts)?;
    Ok(GreenColumn {
        source,
        source_node: node,
        rho,
        gamma,
        lambda,
        eps: op.coefficients().epsilon(),
        solution,
    })
}

/// `|G_λ^{αγ}(x,y) − conj(G_{conj λ}^{γα}(y,x))|` relative to the larger side,
/// for a column at `y` under `λ` and a column at `x` under `conj λ`.
pub fn duality_residual(at_y: &GreenColumn, at_x: &GreenColumn) -> Result<f64> {
    if at_x.lambda.value() != at_y.lambda.value().conj() {
        return Err(Error::param("duality pairs need conjugate spectral parameters"));
    }
    if at_x.rho != at_y.rho || at_x.domain() != at_y.domain() {
        return Err(Error::DomainMismatch("columns use different lattices or mollifiers".into()));
    }
    let g1 = at_y.pair(&at_x.source, at_x.gamma)?;
    let g2 = at_x.pair(&at_y.source, at_y.gamma)?;
    let scale = g1.norm().max(g2.norm());
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok((g1 - g2.conj()).norm() / scale)
}

/// `∫|G(·,y)|` and `∫|∇G(·,y)|` by element quadrature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegralBounds {
    pub g_l1: f64,
    pub grad_l1: f64,
}

impl IntegralBounds {
    /// `(∫|G| (R₀⁻² + |λ|), ∫|∇G| (R₀⁻² + |λ|)^{1/2})`
    pub fn normalized(&self, lambda: SpectralParameter, r0: f64) -> (f64, f64) {
        let s = r0.powi(-2) + lambda.modulus();
        (self.g_l1 * s, self.grad_l1 * s.sqrt())
    }
}

pub fn integral_bounds(column: &GreenColumn) -> Result<IntegralBounds> {
    let t = norms(&column.solution.u, &[NormKind::Lp(1.0), NormKind::GradLp(1.0)])?;
    Ok(IntegralBounds {
        g_l1: t.entries[0].1,
        grad_l1: t.entries[1].1,
    })
}

/// Errors of `G_ε` against `G₀` at one scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceSample {
    pub eps: f64,
    /// `max |G_ε − G₀| · |x − y|^{d−1}`
    pub value: f64,
    /// `max |∇G_ε − ∇Φ_ε ∇G₀| · |x − y|^d`
    pub gradient: f64,
}

#[derive(Clone, Debug)]
pub struct GreenConvergence {
    pub samples: Vec<ConvergenceSample>,
    pub value_fit: RateFit,
    /// Fit of the gradient errors divided by `ln(ε⁻¹ + 2)`.
    pub gradient_fit: RateFit,
}

/// Compare Green columns of the oscillating and homogenized operators of one level.
pub fn convergence_sample(
    level: &ScaleLevel,
    lambda: SpectralParameter,
    y: &[f64],
    eval_points: &[Vec<f64>],
    rho: Option<f64>,
    gamma: usize,
    opts: SolveOptions,
) -> Result<ConvergenceSample> {
    let ge = green_column(&level.oscillating, lambda, y, rho, gamma, opts)?;
    let g0 = green_column(&level.homogenized, lambda, y, rho, gamma, opts)?;
    let dom = level.oscillating.domain();
    let d = dom.dim();
    let m = level.oscillating.components();
    let phi = &level.correctors;
    let grads: Vec<GridField> = (0..d * m).map(|k| phi.get(k / m, k % m).gradient()).collect();
    let mut value = 0.0f64;
    let mut gradient = 0.0f64;
    for x in eval_points {
        let node = dom.nearest_node(x);
        let p = dom.node_point(node);
        let r = (0..d).map(|k| (p[k] - ge.source[k]).powi(2)).sum::<f64>().sqrt();
        if dom.is_boundary(node) || r <= ge.rho + dom.max_h() {
            return Err(Error::param(format!("evaluation point {x:?} is on the boundary or inside the source")));
        }
        let dv: f64 = ge
            .value(node)
            .iter()
            .zip(g0.value(node))
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        value = value.max(dv * r.powi(d as i32 - 1));
        let ge_grad = ge.gradient(node);
        let g0_grad = g0.gradient(node);
        let mut acc = 0.0;
        for al in 0..m {
            for i in 0..d {
                let mut comp = Complex64::new(0.0, 0.0);
                for j in 0..d {
                    for be in 0..m {
                        comp += grads[j * m + be].at(node)[al * d + i] * g0_grad[be * d + j];
                    }
                }
                acc += (ge_grad[al * d + i] - comp).norm_sqr();
            }
        }
        gradient = gradient.max(acc.sqrt() * r.powi(d as i32));
    }
    Ok(ConvergenceSample {
        eps: level.eps,
        value,
        gradient,
    })
}

/// Sweep `ε`, one level at a time, and fit both error laws.
#[allow(clippy::too_many_arguments)]
pub fn green_convergence(
    domain: &DiscreteDomain,
    field: &CoefficientField,
    eps_list: &[f64],
    lambda: SpectralParameter,
    y: &[f64],
    eval_points: &[Vec<f64>],
    rho: Option<f64>,
    gamma: usize,
    opts: SolveOptions,
) -> Result<GreenConvergence> {
    let mut samples = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let level = ScaleLevel::build(domain, field, eps, CellSolveOptions::default(), opts)?;
        samples.push(convergence_sample(&level, lambda, y, eval_points, rho, gamma, opts)?);
    }
    fit_convergence(samples)
}

impl GreenConvergence {
    pub fn passes(&self) -> bool {
        self.value_fit.within(VALUE_WINDOW) && self.gradient_fit.within(GRADIENT_WINDOW)
    }
}

pub fn fit_convergence(samples: Vec<ConvergenceSample>) -> Result<GreenConvergence> {
    let eps: Vec<f64> = samples.iter().map(|s| s.eps).collect();
    let v: Vec<f64> = samples.iter().map(|s| s.value).collect();
    let g: Vec<f64> = samples.iter().map(|s| s.gradient).collect();
    Ok(GreenConvergence {
        value_fit: fit_rate(&eps, &v, None)?,
        gradient_fit: fit_rate(&eps, &g, Some(LogCorrection { r0: 1.0, q: 1.0 }))?,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::fem::Coefficients;
    use crate::tensor::Tensor;

    fn laplace_op(n: usize) -> Arc<DiscreteOperator> {
        let dom = DiscreteDomain::unit(2, n).unwrap();
        DiscreteOperator::new(&dom, &Coefficients::Homogenized(Tensor::identity(2, 1))).unwrap()
    }

    /// `∫ G(x, y) dx` for `−Δ − λ` on the unit square (double sine series).
    fn integral_oracle(y: &[f64], lambda: f64) -> f64 {
        let mut s = 0.0;
        for j in (1..400).step_by(2) {
            for k in (1..400).step_by(2) {
                let (jf, kf) = (j as f64, k as f64);
                s += 16.0 / (PI * PI * jf * kf * (PI * PI * (jf * jf + kf * kf) - lambda))
                    * (jf * PI * y[0]).sin()
                    * (kf * PI * y[1]).sin();
            }
        }
        s
    }

    #[test]
    fn source_load_is_normalized() {
        let dom = DiscreteDomain::unit(2, 64).unwrap();
        let f = mollified_source(&dom, &[0.5, 0.5], 2.0 / 64.0, 1, 0).unwrap();
        let load = load_vector(&dom.interior_layout(), 1, Some(f.values()), None);
        let s: Complex64 = load.iter().sum();
        assert!((s.re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rho_and_source_checks() {
        let op = laplace_op(64);
        let z = SpectralParameter::zero();
        let o = SolveOptions::default();
        assert!(green_column(&op, z, &[0.5, 0.5], Some(1.0 / 64.0), 0, o).is_err());
        assert!(green_column(&op, z, &[0.5, 0.5], Some(0.2), 0, o).is_err());
        assert!(green_column(&op, z, &[0.02, 0.5], None, 0, o).is_err());
    }

    #[test]
    fn real_shift_gives_real_positive_column() {
        let op = laplace_op(64);
        let g = green_column(&op, SpectralParameter::real(-3.0).unwrap(), &[0.4, 0.6], None, 0, SolveOptions::default()).unwrap();
        assert!(g.solution.u.max_imag() <= 1e-10);
        assert!(g.solution.u.values().iter().all(|v| v.re >= -1e-10));
    }

    #[test]
    fn duality_for_complex_shift() {
        let dom = DiscreteDomain::unit(2, 64).unwrap();
        let field = CoefficientField::coupled_system(2, 3.0, 0.5, 0.4).unwrap();
        let op = DiscreteOperator::new(&dom, &Coefficients::Oscillating { field, eps: 0.25 }).unwrap();
        let lam = SpectralParameter::new(Complex64::new(-5.0, 3.0)).unwrap();
        let o = SolveOptions::with_tol(1e-12);
        let a = green_column(&op, lam, &[0.3, 0.4], None, 0, o).unwrap();
        let b = green_column(&op, lam.conj(), &[0.7, 0.55], None, 1, o).unwrap();
        assert!(duality_residual(&a, &b).unwrap() < 1e-8);
        assert!(duality_residual(&a, &a).is_err());
    }

    #[test]
    fn integral_matches_series_and_scales() {
        let op = laplace_op(128);
        let y = [0.5, 0.5];
        let o = SolveOptions::default();
        let mut vals = Vec::new();
        for lam in [0.0, -50.0] {
            let g = green_column(&op, SpectralParameter::real(lam).unwrap(), &y, None, 0, o).unwrap();
            let ib = integral_bounds(&g).unwrap();
            let exact = integral_oracle(&y, lam);
            assert!((ib.g_l1 - exact).abs() < 0.02 * exact, "{} vs {exact}", ib.g_l1);
            let twice = integral_bounds(&g.scaled(2.0)).unwrap();
            assert_eq!(twice.g_l1, 2.0 * ib.g_l1);
            assert_eq!(twice.grad_l1, 2.0 * ib.grad_l1);
            vals.push(ib.g_l1);
        }
        let ratio = vals[0] / vals[1];
        let oracle = integral_oracle(&y, 0.0) / integral_oracle(&y, -50.0);
        assert!((ratio / oracle - 1.0).abs() < 0.02);
    }

    #[test]
    fn constant_coefficients_converge_exactly() {
        let dom = DiscreteDomain::unit(2, 64).unwrap();
        let field = CoefficientField::constant(Tensor::identity(2, 1)).unwrap();
        let eval = vec![vec![0.7, 0.7], vec![0.3, 0.75]];
        let r = green_convergence(
            &dom,
            &field,
            &[0.5, 0.25, 0.125],
            SpectralParameter::real(-0.5).unwrap(),
            &[0.5, 0.5],
            &eval,
            None,
            0,
            SolveOptions::with_tol(1e-12),
        )
        .unwrap();
        assert!(r.samples.iter().all(|s| s.value < 1e-9 && s.gradient < 1e-9));
        assert!(r.value_fit.exact);
    }
}
