//! Sweeps over `(ε, λ)` that turn homogenization errors into fitted rates.

pub mod calibration;
mod report;

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cell::CellSolveOptions;
use crate::domain::{
    norms, operator_corrector_apply, solve_boundary_value, solve_dirichlet, DiscreteDomain, DiscreteOperator,
    GridField, NormKind, ScaleLevel, SolveOptions,
};
use crate::error::{Error, Result};
use crate::fem::Coefficients;
use crate::spectral::{c_of, in_sector, SpectralParameter};
use crate::tensor::CoefficientField;

pub use crate::fit::{fit_rate, LogCorrection, RateFit};
pub use report::{
    l2_h1_report, lp_report, uniformity_report, RateReport, RateRow, UniformityReport, UniformityRow, Window,
    H1_WINDOW, L2_WINDOW, LP_WINDOW, UNIFORMITY_SPREAD, W1P_WINDOW,
};

/// Right-hand side of the sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RhsSelector {
    /// `Π_k sin²(π x_k / L_k)` in every component.
    Bump,
    /// Sine series with `modes` terms per axis and seeded coefficients `~ 1/(j k)`.
    RandomModes { modes: usize },
}

/// A fully resolved sweep: every `ε` and `λ` is absolute.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub field: CoefficientField,
    pub domain: DiscreteDomain,
    pub eps: Vec<f64>,
    pub lambdas: Vec<SpectralParameter>,
    pub theta0: f64,
    pub rhs: RhsSelector,
    /// Exponents of the `L^p`/`W^{1,p}` tables; `p = 2` is always added.
    pub ps: Vec<f64>,
    pub seed: u64,
    pub solve: SolveOptions,
    pub cell: CellSolveOptions,
}

/// `ε` values of the reference sweep.
pub const REFERENCE_EPS: [f64; 4] = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];

/// Shifts of the reference sweep in units of `R₀⁻²`.
pub const REFERENCE_LAMBDAS: [(f64, f64); 5] = [(0.0, 0.0), (-1.0, 0.0), (-100.0, 0.0), (-10.0, 3.0), (-1000.0, 0.0)];

impl ExperimentConfig {
    /// Laminate `2 + sin 2πy₁` on the unit square with `n` cells per axis.
    pub fn reference(n: usize) -> Result<Self> {
        let domain = DiscreteDomain::unit(2, n)?;
        let s = domain.diameter().powi(-2);
        let lambdas = REFERENCE_LAMBDAS
            .iter()
            .map(|&(re, im)| SpectralParameter::new(Complex64::new(re * s, im * s)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            field: CoefficientField::laminate(2, 1, 2.0, 1.0)?,
            domain,
            eps: REFERENCE_EPS.to_vec(),
            lambdas,
            theta0: FRAC_PI_4,
            rhs: RhsSelector::Bump,
            ps: vec![4.0 / 3.0, 2.0, 4.0],
            seed: 0,
            solve: SolveOptions::default(),
            cell: CellSolveOptions::default(),
        })
    }

    /// Resolution rule for every `ε`, sector membership for every `λ`.
    pub fn validate(&self) -> Result<()> {
        if self.field.dim() != self.domain.dim() {
            return Err(Error::config("field", "dimension differs from the domain"));
        }
        if self.eps.is_empty() {
            return Err(Error::config("eps", "at least one value is required"));
        }
        for (i, &e) in self.eps.iter().enumerate() {
            if !(e > 0.0) {
                return Err(Error::config(format!("eps[{i}]"), "must be positive"));
            }
            let c = Coefficients::Oscillating {
                field: self.field.clone(),
                eps: e,
            };
            if let Err(err) = self.domain.check_resolution(&c) {
                return Err(Error::config(format!("eps[{i}]"), err.to_string()));
            }
        }
        if !(self.theta0 > 0.0 && self.theta0 < PI / 2.0) {
            return Err(Error::config("lambda.theta0", "must lie in (0, pi/2)"));
        }
        for (i, l) in self.lambdas.iter().enumerate() {
            if !l.is_zero() && !in_sector(l, self.theta0) {
                return Err(Error::config(
                    format!("lambda[{i}]"),
                    format!("{} lies outside the sector of aperture {}", l.value(), self.theta0),
                ));
            }
        }
        for (i, &p) in self.ps.iter().enumerate() {
            if !(p > 1.0 && p.is_finite()) {
                return Err(Error::config(format!("norms.p[{i}]"), "exponents must lie in (1, inf)"));
            }
        }
        if let RhsSelector::RandomModes { modes: 0 } = self.rhs {
            return Err(Error::config("rhs.modes", "must be positive"));
        }
        Ok(())
    }

    /// Sorted exponents with `p = 2` included.
    pub fn exponents(&self) -> Vec<f64> {
        let mut ps = self.ps.clone();
        ps.push(2.0);
        ps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ps.dedup();
        ps
    }

    pub fn right_hand_side(&self) -> GridField {
        let dom = &self.domain;
        let m = self.field.components();
        let lengths = dom.lengths().to_vec();
        match self.rhs {
            RhsSelector::Bump => GridField::from_fn(dom, m, |x, o| {
                let b: f64 = x.iter().zip(&lengths).map(|(xk, l)| (PI * xk / l).sin().powi(2)).product();
                o.iter_mut().for_each(|v| *v = Complex64::new(b, 0.0));
            }),
            RhsSelector::RandomModes { modes } => {
                let d = dom.dim();
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let terms = modes.pow(d as u32);
                let coef: Vec<f64> = (0..terms * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
                GridField::from_fn(dom, m, |x, o| {
                    for (al, v) in o.iter_mut().enumerate() {
                        let mut s = 0.0;
                        for t in 0..terms {
                            let mut r = t;
                            let mut term = coef[al * terms + t];
                            for k in 0..d {
                                let j = (r % modes + 1) as f64;
                                r /= modes;
                                term *= (j * PI * x[k] / lengths[k]).sin() / j;
                            }
                            s += term;
                        }
                        *v = Complex64::new(s, 0.0);
                    }
                })
            }
        }
    }
}

/// What a sweep cell measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quantity {
    /// `‖u_ε − u₀‖_p`
    LpError,
    /// `‖u_ε − u₀ − (Φ_ε − P)∇u₀‖_{W^{1,p}}`
    CorrectedW1p,
    /// `‖u_ε‖_p (R₀⁻² + |λ|) / (c ‖F‖_p)`
    URatio,
    /// `‖∇u_ε‖_p (R₀⁻² + |λ|)^{1/2} / (c ‖F‖_p)`
    GradRatio,
}

impl Quantity {
    pub const ALL: [Quantity; 4] = [Quantity::LpError, Quantity::CorrectedW1p, Quantity::URatio, Quantity::GradRatio];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::LpError => "lp_error",
            Quantity::CorrectedW1p => "w1p_corrected_error",
            Quantity::URatio => "u_ratio",
            Quantity::GradRatio => "grad_ratio",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|q| q.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CellStatus {
    Ok,
    Failed(String),
}

/// One `(ε, λ, p, quantity)` entry of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub eps: f64,
    pub lambda: SpectralParameter,
    pub p: f64,
    pub quantity: Quantity,
    pub value: f64,
    pub status: CellStatus,
}

#[derive(Clone, Debug)]
pub struct SweepData {
    pub config: ExperimentConfig,
    /// Ordered by `ε`, then `λ`, then `p`, then quantity.
    pub cells: Vec<Cell>,
}

impl SweepData {
    pub fn cell(&self, eps: f64, lambda: SpectralParameter, p: f64, q: Quantity) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.eps == eps && c.lambda == lambda && c.p == p && c.quantity == q)
    }
}

fn lambda_cells(
    level: &ScaleLevel,
    f: &GridField,
    f_norms: &[f64],
    lambda: SpectralParameter,
    ps: &[f64],
    r0: f64,
    opts: SolveOptions,
) -> Result<Vec<(f64, Quantity, f64)>> {
    let ue = solve_dirichlet(&level.oscillating.shifted(lambda), f, None, opts)?;
    let u0 = solve_dirichlet(&level.homogenized.shifted(lambda), f, None, opts)?;
    let e = ue.u.sub(&u0.u)?;
    let k = operator_corrector_apply(&level.correctors, &u0)?;
    let w = e.sub(&k)?;
    let ne = norms(&e, &ps.iter().map(|&p| NormKind::Lp(p)).collect::<Vec<_>>())?;
    let nw = norms(&w, &ps.iter().map(|&p| NormKind::W1p(p)).collect::<Vec<_>>())?;
    let mut kinds: Vec<NormKind> = ps.iter().map(|&p| NormKind::Lp(p)).collect();
    kinds.extend(ps.iter().map(|&p| NormKind::GradLp(p)));
    let nu = norms(&ue.u, &kinds)?;
    let c = c_of(&lambda)?;
    let s = r0.powi(-2) + lambda.modulus();
    let mut out = Vec::with_capacity(ps.len() * 4);
    for (i, &p) in ps.iter().enumerate() {
        out.push((p, Quantity::LpError, ne.entries[i].1));
        out.push((p, Quantity::CorrectedW1p, nw.entries[i].1));
        out.push((p, Quantity::URatio, nu.entries[i].1 * s / (c * f_norms[i])));
        out.push((p, Quantity::GradRatio, nu.entries[ps.len() + i].1 * s.sqrt() / (c * f_norms[i])));
    }
    Ok(out)
}

/// Solve every `(ε, λ)` pair and tabulate errors and normalized resolvent ratios.
///
/// Levels are built one `ε` at a time; the `λ` cells of a level run in parallel.
/// A failed solve marks its cells instead of aborting the sweep.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepData> {
    config.validate()?;
    let ps = config.exponents();
    let f = config.right_hand_side();
    let f_norms: Vec<f64> = norms(&f, &ps.iter().map(|&p| NormKind::Lp(p)).collect::<Vec<_>>())?
        .entries
        .iter()
        .map(|e| e.1)
        .collect();
    let r0 = config.domain.diameter();
    let mut cells = Vec::new();
    for &eps in &config.eps {
        let level = ScaleLevel::build(&config.domain, &config.field, eps, config.cell, config.solve);
        let rows: Vec<Result<Vec<(f64, Quantity, f64)>>> = match &level {
            Ok(level) => config
                .lambdas
                .par_iter()
                .map(|&l| lambda_cells(level, &f, &f_norms, l, &ps, r0, config.solve))
                .collect(),
            Err(e) => config.lambdas.iter().map(|_| Err(Error::Inconsistent(e.to_string()))).collect(),
        };
        for (&lambda, row) in config.lambdas.iter().zip(rows) {
            match row {
                Ok(vals) => cells.extend(vals.into_iter().map(|(p, q, v)| Cell {
                    eps,
                    lambda,
                    p,
                    quantity: q,
                    value: v,
                    status: CellStatus::Ok,
                })),
                Err(err) => {
                    for &p in &ps {
                        for q in Quantity::ALL {
                            cells.push(Cell {
                                eps,
                                lambda,
                                p,
                                quantity: q,
                                value: f64::NAN,
                                status: CellStatus::Failed(err.to_string()),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(SweepData {
        config: config.clone(),
        cells,
    })
}

/// `L²` and corrected `H¹` rates per `λ`.
pub fn run_l2_h1_study(config: &ExperimentConfig) -> Result<RateReport> {
    Ok(l2_h1_report(&run_sweep(config)?))
}

/// `L^p` and log-corrected `W^{1,p}` rates per `(λ, p)`.
pub fn run_lp_study(config: &ExperimentConfig, ps: &[f64]) -> Result<RateReport> {
    let mut c = config.clone();
    c.ps = ps.to_vec();
    Ok(lp_report(&run_sweep(&c)?, ps))
}

/// Spread of the normalized resolvent ratios over the whole `(ε, λ)` grid.
pub fn run_uniformity_study(config: &ExperimentConfig) -> Result<UniformityReport> {
    let sweep = run_sweep(config)?;
    Ok(uniformity_report(&sweep, &config.exponents()))
}

/// `‖u‖_∞ / ‖g‖_∞` for `(L_ε − λ)u = 0`, `u = g` constant on the boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaxPrincipleSample {
    pub eps: f64,
    pub lambda: SpectralParameter,
    pub ratio: f64,
}

pub fn max_principle_probe(
    domain: &DiscreteDomain,
    field: &CoefficientField,
    eps: &[f64],
    lambdas: &[SpectralParameter],
    opts: SolveOptions,
) -> Result<Vec<MaxPrincipleSample>> {
    let m = field.components();
    let g = GridField::from_fn(domain, m, |_, o| {
        o.iter_mut().for_each(|v| *v = Complex64::new(1.0, 0.0));
    });
    let gmax = g.max_abs();
    let mut out = Vec::new();
    for &e in eps {
        let op = DiscreteOperator::new(
            domain,
            &Coefficients::Oscillating {
                field: field.clone(),
                eps: e,
            },
        )?;
        for &l in lambdas {
            let u = solve_boundary_value(&op.shifted(l), &g, opts)?;
            out.push(MaxPrincipleSample {
                eps: e,
                lambda: l,
                ratio: u.u.max_abs() / gmax,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn small(field: CoefficientField) -> ExperimentConfig {
        let mut c = ExperimentConfig::reference(128).unwrap();
        c.field = field;
        c.eps = vec![1.0 / 2.0, 1.0 / 4.0, 1.0 / 8.0];
        c.lambdas.truncate(4);
        c
    }

    #[test]
    fn validation_names_offending_entries() {
        let mut c = ExperimentConfig::reference(1024).unwrap();
        assert!(c.validate().is_ok());
        c.eps.push(1.0 / 128.0);
        match c.validate() {
            Err(Error::Config { path, .. }) => assert_eq!(path, "eps[4]"),
            other => panic!("{other:?}"),
        }
        let mut c = ExperimentConfig::reference(1024).unwrap();
        c.lambdas.push(SpectralParameter::new(Complex64::new(0.0, 1.0)).unwrap());
        match c.validate() {
            Err(Error::Config { path, .. }) => assert_eq!(path, "lambda[5]"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constant_field_has_exact_rates() {
        let field = CoefficientField::constant(Tensor::identity(2, 1)).unwrap();
        let c = small(field);
        let sweep = run_sweep(&c).unwrap();
        for cell in &sweep.cells {
            assert_eq!(cell.status, CellStatus::Ok);
            if matches!(cell.quantity, Quantity::LpError | Quantity::CorrectedW1p) {
                assert!(cell.value < 1e-8, "{cell:?}");
            }
        }
        let r = l2_h1_report(&sweep);
        assert!(r.rows.iter().all(|row| row.fit.map_or(false, |f| f.exact) && row.pass));
    }

    #[test]
    fn lp_study_agrees_with_l2_cells_at_p_two() {
        let field = CoefficientField::laminate(2, 1, 2.0, 1.0).unwrap();
        let c = small(field);
        let sweep = run_sweep(&c).unwrap();
        let a = l2_h1_report(&sweep);
        let b = lp_report(&sweep, &[2.0, 4.0]);
        for row in &a.rows {
            let twin = b
                .rows
                .iter()
                .find(|r| r.lambda == row.lambda && r.p == 2.0 && r.quantity == row.quantity)
                .unwrap();
            assert_eq!(twin.errors, row.errors);
        }
        // monotone refinement in every row
        for row in a.rows.iter().filter(|r| r.quantity == Quantity::LpError) {
            assert!(row.errors.windows(2).all(|w| w[1] < w[0]), "{row:?}");
        }
    }

    #[test]
    fn random_rhs_is_seeded() {
        let mut c = ExperimentConfig::reference(64).unwrap();
        c.rhs = RhsSelector::RandomModes { modes: 3 };
        let a = c.right_hand_side();
        assert_eq!(a, c.right_hand_side());
        c.seed = 1;
        assert_ne!(a, c.right_hand_side());
        assert!(a.max_boundary_abs() < 1e-12);
    }
}
