use std::sync::Arc;

use super::{green_column, GreenColumn};
use crate::domain::{node_norm, DiscreteDomain, DiscreteOperator, SolveOptions};
use crate::error::{Error, Result};
use crate::fit::linear_fit;
use crate::spectral::SpectralParameter;

/// Minimum number of sample radii and their minimum span.
pub const MIN_RADII: usize = 8;
pub const MIN_SPAN: f64 = 10.0;

pub const GRAD_WINDOW: (f64, f64) = (-1.15, -0.85);
pub const MIXED_WINDOW: (f64, f64) = (-2.2, -1.8);
pub const D3_WINDOW: (f64, f64) = (-1.2, -0.8);
/// Largest relative RMS residual accepted for the log law.
pub const LOG_LAW_MAX_RESIDUAL: f64 = 0.1;
/// Smallest accepted `|G|` reduction for a tenfold `|λ|`.
pub const DAMPING_MIN_REDUCTION: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecayRegime {
    /// `|G| ~ r^{2−d}`, `d ≥ 3`
    D3,
    /// `|G| ≈ b + C ln(R₀/r)`, `d = 2`
    D2Log,
    /// `|∇_x G| ~ r^{1−d}`
    Grad,
    /// `|∇_x ∇_y G| ~ r^{−d}` from sources shifted along each axis
    Mixed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayFit {
    pub regime: DecayRegime,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// Power-law exponent, or the coefficient `C` of `ln(R₀/r)` for [`DecayRegime::D2Log`].
    pub exponent: f64,
    /// Power-law prefactor, or the offset `b` of the log law.
    pub constant: f64,
    /// RMS relative residual of the fit.
    pub residual: f64,
    /// Exponent `a` of `|G| ≈ C r^a + b` for [`DecayRegime::D3`], with `b` the smooth part.
    pub offset_exponent: Option<f64>,
}

impl DecayFit {
    pub fn passes(&self) -> bool {
        let inside = |w: (f64, f64)| self.exponent >= w.0 && self.exponent <= w.1;
        match self.regime {
            DecayRegime::D3 => inside(D3_WINDOW),
            DecayRegime::D2Log => self.exponent > 0.0 && self.residual <= LOG_LAW_MAX_RESIDUAL,
            DecayRegime::Grad => inside(GRAD_WINDOW),
            DecayRegime::Mixed => inside(MIXED_WINDOW),
        }
    }
}

/// Fit `v ≈ C r^a + b` with `-20 min v ≤ b < min v` by scanning `b`; returns `(a, C, b)`.
pub fn offset_power_fit(radii: &[f64], values: &[f64]) -> Option<(f64, f64, f64)> {
    let vmin = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(vmin > 0.0) || radii.len() < 3 {
        return None;
    }
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let at = |b: f64| {
        let ys: Vec<f64> = values.iter().map(|v| (v - b).ln()).collect();
        linear_fit(&xs, &ys).ok().map(|l| (l.rms, l.slope, l.intercept.exp(), b))
    };
    let mut best = at(0.0)?;
    for k in -20000..1000 {
        if let Some(c) = at(vmin * k as f64 / 1000.0) {
            if c.0 < best.0 {
                best = c;
            }
        }
    }
    Some((best.1, best.2, best.3))
}

/// Lattice offsets `k·(±1, …, ±1)` from a node; returns `(radius, nodes)` per step.
pub fn diagonal_samples(domain: &DiscreteDomain, center: usize, steps: &[usize]) -> Vec<(f64, Vec<usize>)> {
    let d = domain.dim();
    let c = domain.node_coords(center);
    let diag = (0..d).map(|k| domain.h(k).powi(2)).sum::<f64>().sqrt();
    steps
        .iter()
        .map(|&s| {
            let mut nodes = Vec::new();
            for signs in 0..(1usize << d) {
                let mut p = [0usize; 3];
                let mut ok = true;
                for k in 0..d {
                    let v = c[k] as isize + if signs >> k & 1 == 1 { s as isize } else { -(s as isize) };
                    if v <= 0 || v >= domain.cells()[k] as isize {
                        ok = false;
                    }
                    p[k] = v.max(0) as usize;
                }
                if ok {
                    nodes.push(domain.node_index(p));
                }
            }
            (s as f64 * diag, nodes)
        })
        .collect()
}

fn quantity(columns: &[GreenColumn], regime: DecayRegime, node: usize) -> f64 {
    match regime {
        DecayRegime::D3 | DecayRegime::D2Log => node_norm(columns[0].value(node)),
        DecayRegime::Grad => node_norm(columns[0].gradient(node)),
        DecayRegime::Mixed => {
            let d = columns[0].domain().dim();
            let mut acc = 0.0;
            for k in 0..d {
                let (p, q) = (&columns[2 * k], &columns[2 * k + 1]);
                let delta = p.source[k] - q.source[k];
                for (a, b) in p.gradient(node).iter().zip(q.gradient(node)) {
                    acc += ((a - b) / delta).norm_sqr();
                }
            }
            acc.sqrt()
        }
    }
}

/// Columns at `y ± δ e_k` for each axis, ordered `(+e₁, −e₁, +e₂, −e₂, …)`.
pub fn mixed_probe_columns(
    op: &Arc<DiscreteOperator>,
    lambda: SpectralParameter,
    y: &[f64],
    delta_cells: usize,
    rho: Option<f64>,
    gamma: usize,
    opts: SolveOptions,
) -> Result<Vec<GreenColumn>> {
    let dom = op.domain();
    let mut out = Vec::with_capacity(2 * dom.dim());
    for k in 0..dom.dim() {
        for s in [1.0, -1.0] {
            let mut p = y.to_vec();
            p[k] += s * delta_cells as f64 * dom.h(k);
            out.push(green_column(op, lambda, &p, rho, gamma, opts)?);
        }
    }
    Ok(out)
}

/// Fit a pointwise decay law on diagonal rays from the source.
///
/// Each radius uses the largest value over the rays that stay inside the domain.
pub fn check_pointwise_decay(columns: &[GreenColumn], regime: DecayRegime, steps: &[usize]) -> Result<DecayFit> {
    let first = columns.first().ok_or_else(|| Error::param("no columns given"))?;
    let dom = first.domain();
    let d = dom.dim();
    match regime {
        DecayRegime::D3 if d < 3 => return Err(Error::param("the r^(2-d) law needs d >= 3")),
        DecayRegime::D2Log if d != 2 => return Err(Error::param("the log law needs d = 2")),
        DecayRegime::Mixed if columns.len() != 2 * d => {
            return Err(Error::param(format!("mixed probe needs {} shifted columns", 2 * d)))
        }
        _ => {}
    }
    let center = if regime == DecayRegime::Mixed {
        let mut y = vec![0.0; d];
        for k in 0..d {
            y[k] = 0.5 * (columns[0].source[k] + columns[1].source[k]);
        }
        dom.nearest_node(&y)
    } else {
        first.source_node
    };
    let mut sorted: Vec<usize> = steps.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let samples = diagonal_samples(dom, center, &sorted);
    let mut radii = Vec::new();
    let mut values = Vec::new();
    for (r, nodes) in samples {
        if nodes.is_empty() {
            continue;
        }
        let v = nodes.iter().map(|&n| quantity(columns, regime, n)).fold(0.0, f64::max);
        radii.push(r);
        values.push(v);
    }
    if radii.len() < MIN_RADII {
        return Err(Error::param(format!("{} usable radii, at least {MIN_RADII} required", radii.len())));
    }
    let span = radii.last().unwrap() / radii[0];
    if span < MIN_SPAN * (1.0 - 1e-12) {
        return Err(Error::param(format!("insufficient distance decade: radii span a factor {span:.3}")));
    }
    if values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Fit("decay samples must be positive".into()));
    }
    if regime == DecayRegime::D2Log {
        let r0 = dom.diameter();
        let xs: Vec<f64> = radii.iter().map(|r| (r0 / r).ln()).collect();
        let line = linear_fit(&xs, &values)?;
        let rel = (xs
            .iter()
            .zip(&values)
            .map(|(x, v)| ((v - line.slope * x - line.intercept) / v).powi(2))
            .sum::<f64>()
            / xs.len() as f64)
            .sqrt();
        return Ok(DecayFit {
            regime,
            radii,
            values,
            exponent: line.slope,
            constant: line.intercept,
            residual: rel,
            offset_exponent: None,
        });
    }
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let line = linear_fit(&xs, &ys)?;
    let offset_exponent = if regime == DecayRegime::D3 {
        offset_power_fit(&radii, &values).map(|f| f.0)
    } else {
        None
    };
    Ok(DecayFit {
        regime,
        radii,
        values,
        exponent: line.slope,
        constant: line.intercept.exp(),
        residual: line.rms,
        offset_exponent,
    })
}

/// `|G|` at a fixed radius for `λ` and `factor · λ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DampingProbe {
    pub radius: f64,
    pub lambda_low: SpectralParameter,
    pub lambda_high: SpectralParameter,
    pub g_low: f64,
    pub g_high: f64,
    /// `g_low / g_high`
    pub reduction: f64,
}

impl DampingProbe {
    pub fn passes(&self) -> bool {
        self.reduction >= DAMPING_MIN_REDUCTION
    }
}

/// Damping of `|G|` at `radius = step · |h|_diag` when `|λ|` grows by `factor`.
///
/// The radius must be at least the length scale `|λ|^{-1/2}` of the smaller shift.
#[allow(clippy::too_many_arguments)]
pub fn damping_probe(
    op: &Arc<DiscreteOperator>,
    lambda: SpectralParameter,
    factor: f64,
    y: &[f64],
    step: usize,
    rho: Option<f64>,
    gamma: usize,
    opts: SolveOptions,
) -> Result<DampingProbe> {
    if !(factor > 1.0) {
        return Err(Error::param("damping factor must exceed 1"));
    }
    let high = lambda.scaled(factor);
    let lo = green_column(op, lambda, y, rho, gamma, opts)?;
    let hi = green_column(op, high, y, rho, gamma, opts)?;
    let (r, nodes) = diagonal_samples(op.domain(), lo.source_node, &[step]).remove(0);
    if nodes.is_empty() {
        return Err(Error::param("probe radius leaves the domain"));
    }
    if lambda.modulus() * r * r < 1.0 {
        return Err(Error::param(format!(
            "probe radius {r} is below the length scale |lambda|^(-1/2) = {}",
            lambda.modulus().sqrt().recip()
        )));
    }
    let g_low = nodes.iter().map(|&n| node_norm(lo.value(n))).fold(0.0, f64::max);
    let g_high = nodes.iter().map(|&n| node_norm(hi.value(n))).fold(0.0, f64::max);
    Ok(DampingProbe {
        radius: r,
        lambda_low: lambda,
        lambda_high: high,
        g_low,
        g_high,
        reduction: g_low / g_high,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use num_complex::Complex64;

    use super::*;
    use crate::domain::{GridField, ResolventSolution};
    use crate::fem::Coefficients;
    use crate::tensor::Tensor;

    fn synthetic(n: usize, f: impl Fn(f64) -> f64) -> GreenColumn {
        let dom = DiscreteDomain::unit(2, n).unwrap();
        let c = dom.nearest_node(&[0.5, 0.5]);
        let y = dom.node_point(c);
        let u = GridField::from_fn(&dom, 1, |x, o| {
            let r = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
            o[0] = Complex64::new(f(r), 0.0);
        });
        let gradient = GridField::from_fn(&dom, 2, |x, o| {
            let r = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
            o[0] = Complex64::new(f(r), 0.0);
            o[1] = Complex64::new(0.0, 0.0);
        });
        GreenColumn {
            source: y[..2].to_vec(),
            source_node: c,
            rho: 2.0 / n as f64,
            gamma: 0,
            lambda: SpectralParameter::zero(),
            eps: None,
            solution: ResolventSolution {
                u,
                gradient,
                residual: 0.0,
                iterations: 0,
                history: vec![],
            },
        }
    }

    #[test]
    fn exact_powers_are_recovered() {
        let col = synthetic(256, |r| 0.3 / r);
        let steps: Vec<usize> = (0..10).map(|k| (4.0 * 1.4f64.powi(k)).round() as usize).collect();
        let fit = check_pointwise_decay(&[col.clone()], DecayRegime::Grad, &steps).unwrap();
        assert!((fit.exponent + 1.0).abs() < 1e-10);
        assert!(fit.residual < 1e-10);
        let log = synthetic(256, |r| 0.2 + (2f64.sqrt() / r).ln() / (2.0 * PI));
        let fit = check_pointwise_decay(&[log], DecayRegime::D2Log, &steps).unwrap();
        assert!((fit.exponent - 1.0 / (2.0 * PI)).abs() < 1e-10);
        assert!(check_pointwise_decay(&[col], DecayRegime::Grad, &steps[..5]).is_err());
    }

    #[test]
    fn offset_model_separates_the_smooth_part() {
        let r: Vec<f64> = (0..10).map(|k| 0.02 * 1.3f64.powi(k)).collect();
        let v: Vec<f64> = r.iter().map(|x| 0.08 / x + 0.5).collect();
        let (a, c, b) = offset_power_fit(&r, &v).unwrap();
        assert!((a + 1.0).abs() < 0.02 && (c - 0.08).abs() < 0.01 && (b - 0.5).abs() < 0.05, "{a} {c} {b}");
    }

    #[test]
    fn offset_model_takes_negative_offsets() {
        let r: Vec<f64> = (0..10).map(|k| 0.02 * 1.3f64.powi(k)).collect();
        let v: Vec<f64> = r.iter().map(|x| 0.08 / x - 0.3).collect();
        let (a, _, b) = offset_power_fit(&r, &v).unwrap();
        assert!((a + 1.0).abs() < 0.02 && (b + 0.3).abs() < 0.05, "{a} {b}");
    }

    #[test]
    fn laplace_log_law_in_two_dimensions() {
        let dom = DiscreteDomain::unit(2, 256).unwrap();
        let op = DiscreteOperator::new(&dom, &Coefficients::Homogenized(Tensor::identity(2, 1))).unwrap();
        let g = green_column(&op, SpectralParameter::zero(), &[0.5, 0.5], None, 0, SolveOptions::default()).unwrap();
        let steps: Vec<usize> = (0..9).map(|k| (4.0 * 1.35f64.powi(k)).round() as usize).collect();
        let fit = check_pointwise_decay(&[g.clone()], DecayRegime::D2Log, &steps).unwrap();
        assert!((fit.exponent * 2.0 * PI - 1.0).abs() < 0.1, "{fit:?}");
        let grad = check_pointwise_decay(&[g], DecayRegime::Grad, &steps).unwrap();
        assert!((grad.exponent + 1.0).abs() < 0.15, "{grad:?}");
    }
}
