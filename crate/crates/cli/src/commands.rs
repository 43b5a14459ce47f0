use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use homlab::cell::{homogenized_tensor, CorrectorSet, UnitCellGrid};
use homlab::domain::{norms, solve_dirichlet, DiscreteOperator, NormKind};
use homlab::fem::Coefficients;
use homlab::green::{
    check_pointwise_decay, damping_probe, green_column, mixed_probe_columns, DecayFit, DecayRegime,
};
use homlab::harness::calibration::{calibrate_max_principle, Calibrated};
use homlab::harness::{
    l2_h1_report, lp_report, max_principle_probe, run_sweep, uniformity_report, RateReport, SweepData,
    UniformityReport,
};
use homlab::spectral::SpectralParameter;
use homlab::tensor::{validate, Tensor, ValidationTolerances};
use homlab::{Error, Result};

use crate::config::{RunConfig, Study};
use crate::output::{self, float, lambda_angle};

/// What a command produced and which checks failed.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub summary: Vec<String>,
    /// `(study, item, detail)`
    pub failures: Vec<(String, String, String)>,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn fail(&mut self, study: &str, item: impl Into<String>, detail: impl Into<String>) {
        self.failures.push((study.to_string(), item.into(), detail.into()));
    }

    /// `failures.csv` next to the other outputs.
    pub fn write_failures(&mut self, dir: &Path) -> Result<()> {
        let mut s = String::from("study,item,detail\n");
        for (a, b, c) in &self.failures {
            let q = |t: &str| format!("\"{}\"", t.replace('"', "\"\""));
            let _ = writeln!(s, "{},{},{}", q(a), q(b), q(c));
        }
        let p = dir.join("failures.csv");
        fs::write(&p, s)?;
        self.files.push(p);
        Ok(())
    }
}

fn lambda_item(l: &SpectralParameter) -> String {
    format!("lambda=({},{})", float(l.modulus()), float(lambda_angle(l)))
}

fn prepare(dir: &Path, cfg: &RunConfig) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let p = dir.join("config.effective.toml");
    fs::write(&p, cfg.echo())?;
    Ok(p)
}

pub fn validate_cmd(cfg: &RunConfig, out: Option<&Path>) -> Result<Outcome> {
    let mut o = Outcome::default();
    let x = &cfg.experiment;
    let rep = validate(&x.field, 32, ValidationTolerances::default())?;
    o.summary.push(format!(
        "field {} (d = {}, m = {}): ellipticity in [{:.6}, {:.6}], symmetry defect {:.3e}, periodicity defect {:.3e}",
        x.field.tag().name(),
        x.field.dim(),
        x.field.components(),
        rep.mu_low,
        rep.mu_high,
        rep.symmetry_defect,
        rep.periodicity_defect
    ));
    for f in &rep.failures {
        o.fail("validate", "field", f.clone());
    }
    o.summary.push(format!(
        "domain {:?} with cells {:?}, h = {:.6e}",
        x.domain.lengths(),
        x.domain.cells(),
        x.domain.max_h()
    ));
    o.summary.push(format!("{} eps values and {} shifts pass the resolution and sector rules", x.eps.len(), x.lambdas.len()));
    if let Some(dir) = out {
        o.files.push(prepare(dir, cfg)?);
    }
    Ok(o)
}

fn tensor_csv(t: &Tensor) -> String {
    let (d, m) = (t.dim(), t.components());
    let mut s = String::from("i,j,alpha,beta,value\n");
    for i in 0..d {
        for j in 0..d {
            for a in 0..m {
                for b in 0..m {
                    let _ = writeln!(s, "{i},{j},{a},{b},{}", float(t.get(i, j, a, b)));
                }
            }
        }
    }
    s
}

fn tensor_summary(t: &Tensor) -> String {
    let (lo, hi) = t.eigen_range();
    format!("homogenized tensor eigenvalues in [{lo:.12}, {hi:.12}]; entries {:?}", t.as_slice())
}

pub fn homogenize_cmd(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let mut o = Outcome::default();
    o.files.push(prepare(dir, cfg)?);
    let x = &cfg.experiment;
    let grid = UnitCellGrid::new(x.field.dim(), cfg.cell_grid)?;
    let t = homogenized_tensor(&x.field, &grid, x.cell)?;
    let p = dir.join("homogenized.csv");
    fs::write(&p, tensor_csv(&t))?;
    o.files.push(p);
    o.summary.push(tensor_summary(&t));
    Ok(o)
}

pub fn cell_cmd(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let mut o = Outcome::default();
    o.files.push(prepare(dir, cfg)?);
    let x = &cfg.experiment;
    let (d, m) = (x.field.dim(), x.field.components());
    let grid = UnitCellGrid::new(d, cfg.cell_grid)?;
    let set = CorrectorSet::compute(&x.field, &grid, x.cell)?;
    let p = dir.join("homogenized.csv");
    fs::write(&p, tensor_csv(&set.homogenized))?;
    o.files.push(p);
    let mut rep = String::new();
    let _ = writeln!(rep, "cell grid {} per axis, d = {d}, m = {m}", cfg.cell_grid);
    let _ = writeln!(rep, "{}", tensor_summary(&set.homogenized));
    let _ = writeln!(rep, "corrector max |mean| {:.3e}", set.correctors.max_mean());
    let _ = writeln!(rep, "corrector max residual {:.3e}", set.correctors.max_residual());
    let _ = writeln!(rep, "flux density max |mean| {:.3e}", set.flux_density.max_mean());
    let _ = writeln!(rep, "flux corrector antisymmetry defect {:.3e}", set.flux_correctors.antisymmetry_defect());
    let _ = writeln!(
        rep,
        "flux corrector divergence residual {:.3e}",
        set.flux_correctors.spectral_divergence_residual()
    );
    let p = dir.join("cell_report.txt");
    fs::write(&p, &rep)?;
    o.files.push(p);
    o.summary.extend(rep.lines().map(String::from));
    // profiles along the first axis through the origin
    let line: Vec<usize> = (0..grid.num_nodes())
        .filter(|&i| (1..d).all(|k| grid.node_point(i)[k] == 0.0))
        .collect();
    for j in 0..d {
        for b in 0..m {
            let chi = set.correctors.get(j, b);
            let p = dir.join(format!("chi_{j}_{b}.dat"));
            output::write_dat(
                &p,
                &format!("y1 chi_{j}^{b}"),
                line.iter().map(|&i| (grid.node_point(i)[0], chi[i])),
            )?;
            o.files.push(p);
        }
    }
    Ok(o)
}

pub fn resolve_cmd(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let mut o = Outcome::default();
    o.files.push(prepare(dir, cfg)?);
    let x = &cfg.experiment;
    let eps = x.eps[0];
    let op = DiscreteOperator::new(
        &x.domain,
        &Coefficients::Oscillating {
            field: x.field.clone(),
            eps,
        },
    )?;
    let f = x.right_hand_side();
    let ps = x.exponents();
    let mut kinds: Vec<NormKind> = ps.iter().map(|&p| NormKind::Lp(p)).collect();
    kinds.extend(ps.iter().map(|&p| NormKind::GradLp(p)));
    let mut csv = String::from("epsilon,lambda_modulus,lambda_angle,norm,value,iterations,residual\n");
    let dom = &x.domain;
    let mid: Vec<usize> = (0..dom.num_nodes())
        .filter(|&i| {
            let c = dom.node_coords(i);
            (1..dom.dim()).all(|k| c[k] == dom.cells()[k] / 2)
        })
        .collect();
    for (k, &l) in x.lambdas.iter().enumerate() {
        let sol = solve_dirichlet(&op.shifted(l), &f, None, x.solve)?;
        let t = norms(&sol.u, &kinds)?;
        for (kind, v) in &t.entries {
            let _ = writeln!(
                csv,
                "{},{},{},{kind},{},{},{}",
                float(eps),
                float(l.modulus()),
                float(lambda_angle(&l)),
                float(*v),
                sol.iterations,
                float(sol.residual)
            );
        }
        let p = dir.join(format!("u_midline_l{k}.dat"));
        output::write_dat(
            &p,
            &format!("x1 |u| (lambda = {}, eps = {eps})", l.value()),
            mid.iter().map(|&i| (dom.node_point(i)[0], sol.u.at(i).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())),
        )?;
        o.files.push(p);
        o.summary.push(format!(
            "lambda = {}: {} iterations, residual {:.3e}, |u|_L2 = {:.6e}",
            l.value(),
            sol.iterations,
            sol.residual,
            t.get(NormKind::Lp(2.0)).unwrap_or(f64::NAN)
        ));
    }
    let p = dir.join("resolve.csv");
    fs::write(&p, csv)?;
    o.files.push(p);
    Ok(o)
}

fn decay_entry(o: &mut Outcome, csv: &mut String, dir: &Path, k: usize, l: &SpectralParameter, fit: &DecayFit) -> Result<()> {
    let name = format!("{:?}", fit.regime).to_lowercase();
    let p = dir.join(format!("green_{name}_l{k}.dat"));
    output::write_dat(&p, &format!("r {name}"), fit.radii.iter().copied().zip(fit.values.iter().copied()))?;
    o.files.push(p);
    let _ = writeln!(
        csv,
        "{},{},{name},{},{},{},{}",
        float(l.modulus()),
        float(lambda_angle(l)),
        float(fit.exponent),
        float(fit.constant),
        float(fit.residual),
        fit.passes()
    );
    o.summary.push(format!(
        "lambda = {}: {name} exponent {:.4} residual {:.3e}{}",
        l.value(),
        fit.exponent,
        fit.residual,
        fit.offset_exponent.map_or(String::new(), |a| format!(" (offset model exponent {a:.4})"))
    ));
    if !fit.passes() {
        o.fail("green", format!("{name} {}", lambda_item(l)), format!("exponent {} residual {}", fit.exponent, fit.residual));
    }
    Ok(())
}

pub fn green_cmd(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let mut o = Outcome::default();
    o.files.push(prepare(dir, cfg)?);
    let x = &cfg.experiment;
    let g = &cfg.green;
    let d = x.domain.dim();
    let op = DiscreteOperator::new(
        &x.domain,
        &Coefficients::Oscillating {
            field: x.field.clone(),
            eps: g.eps,
        },
    )?;
    let mut csv = String::from("lambda_modulus,lambda_angle,regime,exponent,constant,residual,pass\n");
    for (k, &l) in x.lambdas.iter().enumerate() {
        let col = green_column(&op, l, &g.source, g.rho, g.gamma, x.solve)?;
        let regimes: &[DecayRegime] = if d == 2 {
            &[DecayRegime::D2Log, DecayRegime::Grad]
        } else {
            &[DecayRegime::D3, DecayRegime::Grad]
        };
        for &r in regimes {
            let fit = check_pointwise_decay(std::slice::from_ref(&col), r, &g.steps)?;
            decay_entry(&mut o, &mut csv, dir, k, &l, &fit)?;
        }
        let mixed = mixed_probe_columns(&op, l, &g.source, g.mixed_delta, g.rho, g.gamma, x.solve)?;
        let fit = check_pointwise_decay(&mixed, DecayRegime::Mixed, &g.steps)?;
        decay_entry(&mut o, &mut csv, dir, k, &l, &fit)?;
        if !l.is_zero() {
            let diag = (0..d).map(|a| x.domain.h(a).powi(2)).sum::<f64>().sqrt();
            let step = (2.0 / (l.modulus().sqrt() * diag)).ceil() as usize;
            match damping_probe(&op, l, 10.0, &g.source, step, g.rho, g.gamma, x.solve) {
                Ok(p) => {
                    o.summary.push(format!(
                        "lambda = {}: |G| at r = {:.4} drops by {:.3} for a tenfold |lambda|",
                        l.value(),
                        p.radius,
                        p.reduction
                    ));
                    if !p.passes() {
                        o.fail("green", format!("damping {}", lambda_item(&l)), format!("reduction {}", p.reduction));
                    }
                }
                Err(e) => o.summary.push(format!("lambda = {}: damping probe skipped ({e})", l.value())),
            }
        }
    }
    let p = dir.join("green.csv");
    fs::write(&p, csv)?;
    o.files.push(p);
    Ok(o)
}

/// Reports requested by the configuration, built from finished cells.
pub struct StudyReports {
    pub rates: RateReport,
    pub uniformity: Option<UniformityReport>,
}

pub fn build_reports(cfg: &RunConfig, sweep: &SweepData) -> StudyReports {
    let mut rates = RateReport::default();
    let has_l2 = cfg.studies.contains(&Study::L2H1);
    if has_l2 {
        rates.extend(l2_h1_report(sweep));
    }
    if cfg.studies.contains(&Study::Lp) {
        let ps: Vec<f64> = cfg
            .experiment
            .ps
            .iter()
            .copied()
            .filter(|&p| !(has_l2 && p == 2.0))
            .collect();
        rates.extend(lp_report(sweep, &ps));
    }
    let uniformity = cfg
        .studies
        .contains(&Study::Uniformity)
        .then(|| uniformity_report(sweep, &cfg.experiment.exponents()));
    StudyReports { rates, uniformity }
}

fn record_failures(o: &mut Outcome, r: &StudyReports) {
    for row in r.rates.failures() {
        let detail = match (row.fit, &row.note) {
            (_, Some(n)) => n.clone(),
            (Some(f), None) => format!("slope {} outside [{}, {}]", f.slope, row.window.0, row.window.1),
            (None, None) => "no fit".into(),
        };
        o.fail("rates", format!("{} p={} {}", row.norm_label(), row.p, lambda_item(&row.lambda)), detail);
    }
    if let Some(u) = &r.uniformity {
        for row in u.rows.iter().filter(|r| !r.pass) {
            let detail = row.note.clone().unwrap_or_else(|| {
                format!(
                    "spread {} > {} (min at eps={} lambda={}, max at eps={} lambda={})",
                    row.spread,
                    u.limit,
                    row.argmin.0,
                    row.argmin.1.value(),
                    row.argmax.0,
                    row.argmax.1.value()
                )
            });
            o.fail("uniformity", format!("{} p={}", row.quantity.name(), row.p), detail);
        }
    }
}

pub fn render_report(cfg: &RunConfig, r: &StudyReports, calibrated: &[Calibrated], failures: usize) -> String {
    let mut s = String::new();
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let _ = writeln!(s, "generated at unix time {now}");
    let x = &cfg.experiment;
    let _ = writeln!(
        s,
        "field {} on {:?} with cells {:?}; eps {:?}; {} shifts",
        x.field.tag().name(),
        x.domain.lengths(),
        x.domain.cells(),
        x.eps,
        x.lambdas.len()
    );
    let _ = writeln!(s);
    for row in &r.rates.rows {
        let fit = match row.fit {
            Some(f) if f.exact => "exact".to_string(),
            Some(f) => format!(
                "slope {:.4} (95% CI [{:.4}, {:.4}]) constant {:.4e} residual {:.3e}",
                f.slope, f.slope_ci95.0, f.slope_ci95.1, f.constant, f.residual
            ),
            None => format!("no fit: {}", row.note.as_deref().unwrap_or("")),
        };
        let log = row
            .correction
            .map_or(String::new(), |c| format!(" /ln(R0/eps+2)^{:.3}", c.q));
        let _ = writeln!(
            s,
            "{} lambda={:<24} {:<8}{log} {fit} window [{}, {}] {}",
            if row.pass { "PASS" } else { "FAIL" },
            format!("{}", row.lambda.value()),
            row.norm_label(),
            row.window.0,
            row.window.1,
            if row.pass { "" } else { "<--" }
        );
    }
    if let Some(u) = &r.uniformity {
        let _ = writeln!(s);
        for row in &u.rows {
            let _ = writeln!(
                s,
                "{} uniformity {} p={}: min {:.4e} max {:.4e} spread {:.3} limit {}",
                if row.pass { "PASS" } else { "FAIL" },
                row.quantity.name(),
                homlab::domain::p_label(row.p),
                row.min,
                row.max,
                row.spread,
                u.limit
            );
        }
    }
    if !calibrated.is_empty() {
        let _ = writeln!(s);
        for c in calibrated {
            let _ = writeln!(
                s,
                "{} calibration {}: measured {:.10} bound {}",
                if c.holds() { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.bound
            );
        }
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "{failures} failed checks");
    s
}

fn finish(cfg: &RunConfig, dir: &Path, sweep: &SweepData, o: &mut Outcome) -> Result<()> {
    let reports = build_reports(cfg, sweep);
    o.files.extend(output::emit_tables(dir, sweep, &reports.rates, reports.uniformity.as_ref())?);
    record_failures(o, &reports);
    let mut calibrated = Vec::new();
    if cfg.studies.contains(&Study::MaxPrinciple) {
        let x = &cfg.experiment;
        let samples = max_principle_probe(&x.domain, &x.field, &x.eps, &x.lambdas, x.solve)?;
        let c = calibrate_max_principle(&samples)?;
        if !c.holds() {
            o.fail("max-principle", c.name, format!("measured {} above {}", c.measured, c.bound));
        }
        calibrated.push(c);
    }
    let text = render_report(cfg, &reports, &calibrated, o.failures.len());
    let p = dir.join("report.txt");
    fs::write(&p, &text)?;
    o.files.push(p);
    o.summary.extend(text.lines().skip(1).map(String::from));
    o.write_failures(dir)
}

pub fn sweep_cmd(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let mut o = Outcome::default();
    o.files.push(prepare(dir, cfg)?);
    let sweep = run_sweep(&cfg.experiment)?;
    finish(cfg, dir, &sweep, &mut o)?;
    Ok(o)
}

/// Rebuild the reports from an existing `cells.csv` without solving.
pub fn report_cmd(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let path = dir.join("cells.csv");
    if !path.exists() {
        return Err(Error::config("--out", format!("{} not found; run `sweep` first", path.display())));
    }
    let records = output::read_cells(&path)?;
    let cells = output::cells_from_records(&records, &cfg.experiment.lambdas)?;
    let sweep = SweepData {
        config: cfg.experiment.clone(),
        cells,
    };
    let mut o = Outcome::default();
    finish(cfg, dir, &sweep, &mut o)?;
    Ok(o)
}
