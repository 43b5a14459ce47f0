use super::{CellStatus, Quantity, SweepData};
use crate::fit::{fit_rate, LogCorrection, RateFit};
use crate::spectral::SpectralParameter;

/// Closed slope window `[lo, hi]`.
pub type Window = (f64, f64);

pub const L2_WINDOW: Window = (0.85, 1.15);
pub const H1_WINDOW: Window = (0.8, 1.2);
pub const LP_WINDOW: Window = (0.8, 1.2);
pub const W1P_WINDOW: Window = (0.75, 1.25);
/// Largest admissible max/min ratio of a normalized resolvent bound.
pub const UNIFORMITY_SPREAD: f64 = 5.0;

/// Errors of one `(λ, p, quantity)` row against `ε` and their fitted rate.
#[derive(Clone, Debug, PartialEq)]
pub struct RateRow {
    pub lambda: SpectralParameter,
    pub p: f64,
    pub quantity: Quantity,
    pub eps: Vec<f64>,
    pub errors: Vec<f64>,
    pub correction: Option<LogCorrection>,
    pub fit: Option<RateFit>,
    pub window: Window,
    pub pass: bool,
    /// Why the row has no fit.
    pub note: Option<String>,
}

impl RateRow {
    /// Label such as `L2`, `H1` or `W1,4/3`.
    pub fn norm_label(&self) -> String {
        let p = crate::domain::p_label(self.p);
        match self.quantity {
            Quantity::LpError => format!("L{p}"),
            Quantity::CorrectedW1p if self.p == 2.0 => "H1".into(),
            Quantity::CorrectedW1p => format!("W1,{p}"),
            Quantity::URatio => format!("uratio{p}"),
            Quantity::GradRatio => format!("gradratio{p}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
}

impl RateReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> Vec<&RateRow> {
        self.rows.iter().filter(|r| !r.pass).collect()
    }

    pub fn row(&self, lambda: SpectralParameter, p: f64, q: Quantity) -> Option<&RateRow> {
        self.rows.iter().find(|r| r.lambda == lambda && r.p == p && r.quantity == q)
    }

    pub fn extend(&mut self, other: RateReport) {
        self.rows.extend(other.rows);
    }
}

fn rate_row(
    sweep: &SweepData,
    lambda: SpectralParameter,
    p: f64,
    quantity: Quantity,
    correction: Option<LogCorrection>,
    window: Window,
) -> RateRow {
    let mut eps = Vec::new();
    let mut errors = Vec::new();
    let mut note = None;
    for &e in &sweep.config.eps {
        match sweep.cell(e, lambda, p, quantity) {
            Some(c) => {
                if let CellStatus::Failed(msg) = &c.status {
                    note.get_or_insert_with(|| format!("solve failed at eps = {e}: {msg}"));
                }
                eps.push(e);
                errors.push(c.value);
            }
            None => {
                note.get_or_insert_with(|| format!("missing cell at eps = {e}"));
            }
        }
    }
    let fit = if note.is_none() {
        match fit_rate(&eps, &errors, correction) {
            Ok(f) if f.exact || f.slope.is_finite() => Some(f),
            Ok(_) => {
                note = Some("non-finite slope".into());
                None
            }
            Err(e) => {
                note = Some(e.to_string());
                None
            }
        }
    } else {
        None
    };
    let pass = fit.is_some_and(|f| f.within(window));
    RateRow {
        lambda,
        p,
        quantity,
        eps,
        errors,
        correction,
        fit,
        window,
        pass,
        note,
    }
}

/// `L²` and corrected `H¹` rows for every `λ` of the sweep.
pub fn l2_h1_report(sweep: &SweepData) -> RateReport {
    let mut rows = Vec::new();
    for &l in &sweep.config.lambdas {
        rows.push(rate_row(sweep, l, 2.0, Quantity::LpError, None, L2_WINDOW));
        rows.push(rate_row(sweep, l, 2.0, Quantity::CorrectedW1p, None, H1_WINDOW));
    }
    RateReport { rows }
}

/// `L^p` rows and `W^{1,p}` rows divided by `(ln(R₀/ε + 2))^{4|1/2 − 1/p|}`.
pub fn lp_report(sweep: &SweepData, ps: &[f64]) -> RateReport {
    let r0 = sweep.config.domain.diameter();
    let mut rows = Vec::new();
    for &l in &sweep.config.lambdas {
        for &p in ps {
            let q = 4.0 * (0.5 - 1.0 / p).abs();
            let corr = (q > 0.0).then_some(LogCorrection { r0, q });
            rows.push(rate_row(sweep, l, p, Quantity::LpError, None, LP_WINDOW));
            rows.push(rate_row(sweep, l, p, Quantity::CorrectedW1p, corr, W1P_WINDOW));
        }
    }
    RateReport { rows }
}

/// Extremes of one normalized ratio over the `(ε, λ)` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformityRow {
    pub p: f64,
    pub quantity: Quantity,
    pub min: f64,
    pub max: f64,
    /// `(ε, λ)` of the minimum and the maximum.
    pub argmin: (f64, SpectralParameter),
    pub argmax: (f64, SpectralParameter),
    pub spread: f64,
    pub pass: bool,
    pub note: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct UniformityReport {
    pub rows: Vec<UniformityRow>,
    pub limit: f64,
}

impl UniformityReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn row(&self, p: f64, q: Quantity) -> Option<&UniformityRow> {
        self.rows.iter().find(|r| r.p == p && r.quantity == q)
    }
}

/// Max/min spread of both ratios per `p`; blow-ups and failed solves name the offending cell.
pub fn uniformity_report(sweep: &SweepData, ps: &[f64]) -> UniformityReport {
    let mut rows = Vec::new();
    for &p in ps {
        for q in [Quantity::URatio, Quantity::GradRatio] {
            let cells: Vec<_> = sweep.cells.iter().filter(|c| c.p == p && c.quantity == q).collect();
            let bad = cells
                .iter()
                .find(|c| c.status != CellStatus::Ok || !(c.value.is_finite() && c.value > 0.0));
            let nan = (f64::NAN, SpectralParameter::zero());
            if cells.is_empty() || bad.is_some() {
                let note = match bad {
                    Some(c) => format!("ratio blow-up at eps = {}, lambda = {}", c.eps, c.lambda.value()),
                    None => "no cells".into(),
                };
                rows.push(UniformityRow {
                    p,
                    quantity: q,
                    min: f64::NAN,
                    max: f64::NAN,
                    argmin: nan,
                    argmax: nan,
                    spread: f64::INFINITY,
                    pass: false,
                    note: Some(note),
                });
                continue;
            }
            let lo = cells.iter().min_by(|a, b| a.value.total_cmp(&b.value)).unwrap();
            let hi = cells.iter().max_by(|a, b| a.value.total_cmp(&b.value)).unwrap();
            let spread = hi.value / lo.value;
            rows.push(UniformityRow {
                p,
                quantity: q,
                min: lo.value,
                max: hi.value,
                argmin: (lo.eps, lo.lambda),
                argmax: (hi.eps, hi.lambda),
                spread,
                pass: spread <= UNIFORMITY_SPREAD,
                note: None,
            });
        }
    }
    UniformityReport {
        rows,
        limit: UNIFORMITY_SPREAD,
    }
}
