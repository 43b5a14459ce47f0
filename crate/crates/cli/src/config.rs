//! TOML configuration: schema, defaults and path-qualified validation.

use std::f64::consts::{FRAC_PI_4, PI};
use std::path::{Path, PathBuf};

use homlab::cell::CellSolveOptions;
use homlab::domain::{DiscreteDomain, SolveOptions};
use homlab::fem::Coefficients;
use homlab::harness::{ExperimentConfig, RhsSelector};
use homlab::spectral::{in_sector, SpectralParameter};
use homlab::tensor::{builtin_family, BuiltinSpec, CoefficientField, Tensor};
use homlab::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub field: FieldSection,
    pub domain: DomainSection,
    pub eps: EpsSection,
    pub lambda: LambdaSection,
    #[serde(default)]
    pub rhs: RhsSection,
    #[serde(default)]
    pub norms: NormsSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub cell: CellSection,
    #[serde(default)]
    pub green: GreenSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Coefficient family; the dimension comes from `[domain]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSection {
    /// `scalar · I`, or a full tensor flattened as `[i][j][α][β]`.
    Constant {
        #[serde(default = "one")]
        components: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scalar: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tensor: Option<Vec<f64>>,
    },
    Laminate {
        #[serde(default = "one")]
        components: usize,
        base: f64,
        amplitude: f64,
    },
    Trig {
        base: Vec<f64>,
        amplitude: f64,
    },
    CoupledSystem {
        base: f64,
        amplitude: f64,
        coupling: f64,
    },
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub cells: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsSection {
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaUnits {
    /// Multiples of `R₀⁻²`.
    InverseDiameterSquared,
    Absolute,
}

/// Shifts: the product `moduli × angles` followed by the explicit `points`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaSection {
    #[serde(default = "default_theta0")]
    pub theta0: f64,
    #[serde(default = "default_units")]
    pub units: LambdaUnits,
    #[serde(default)]
    pub moduli: Vec<f64>,
    #[serde(default)]
    pub angles: Vec<f64>,
    /// `[re, im]` pairs.
    #[serde(default)]
    pub points: Vec<[f64; 2]>,
}

fn default_theta0() -> f64 {
    FRAC_PI_4
}

fn default_units() -> LambdaUnits {
    LambdaUnits::InverseDiameterSquared
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhsKind {
    Bump,
    RandomModes,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhsSection {
    pub kind: RhsKind,
    #[serde(default = "default_modes")]
    pub modes: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_modes() -> usize {
    4
}

impl Default for RhsSection {
    fn default() -> Self {
        Self {
            kind: RhsKind::Bump,
            modes: default_modes(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormsSection {
    pub p: Vec<f64>,
}

impl Default for NormsSection {
    fn default() -> Self {
        Self { p: vec![2.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let o = SolveOptions::default();
        Self {
            tol: o.krylov.tol,
            max_iter: o.krylov.max_iter,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSection {
    pub grid: usize,
    pub tol: f64,
}

impl Default for CellSection {
    fn default() -> Self {
        Self {
            grid: 256,
            tol: CellSolveOptions::default().krylov.tol,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreenSection {
    /// Source point; the domain center when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Vec<f64>>,
    /// Oscillation scale; the first `eps` value when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default)]
    pub gamma: usize,
    /// Diagonal lattice steps of the decay samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<Vec<usize>>,
    #[serde(default = "default_delta")]
    pub mixed_delta: usize,
}

fn default_delta() -> usize {
    2
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    L2H1,
    Lp,
    Uniformity,
    MaxPrinciple,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub studies: Vec<Study>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            studies: vec![Study::L2H1, Study::Lp, Study::Uniformity],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// Green-function settings with defaults resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct GreenSettings {
    pub source: Vec<f64>,
    pub eps: f64,
    pub rho: Option<f64>,
    pub gamma: usize,
    pub steps: Vec<usize>,
    pub mixed_delta: usize,
}

/// A validated configuration ready to run.
#[derive(Clone, Debug)]
pub struct RunConfig {
    /// The configuration as read, with defaults filled in.
    pub raw: RawConfig,
    pub experiment: ExperimentConfig,
    pub cell_grid: usize,
    pub green: GreenSettings,
    pub studies: Vec<Study>,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Effective configuration as TOML.
    pub fn echo(&self) -> String {
        toml::to_string(&self.raw).expect("configuration serializes")
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("<file>", format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let de = toml::de::Deserializer::parse(text).map_err(|e| Error::config("<root>", e.to_string()))?;
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { "<root>".to_string() } else { path };
        Error::config(path, e.into_inner().message().to_string())
    })?;
    resolve(raw)
}

fn build_field(raw: &FieldSection, d: usize) -> Result<CoefficientField> {
    let wrap = |e: Error| Error::config("field", e.to_string());
    let spec = match raw {
        FieldSection::Constant {
            components,
            scalar,
            tensor,
        } => {
            let m = *components;
            let t = match (scalar, tensor) {
                (Some(s), None) => Tensor::scalar(d, m, *s),
                (None, Some(v)) => Tensor::from_vec(d, m, v.clone()).map_err(|e| Error::config("field.tensor", e.to_string()))?,
                (None, None) => Tensor::identity(d, m),
                (Some(_), Some(_)) => return Err(Error::config("field", "give either `scalar` or `tensor`, not both")),
            };
            BuiltinSpec::Constant { tensor: t }
        }
        FieldSection::Laminate {
            components,
            base,
            amplitude,
        } => BuiltinSpec::Laminate {
            dim: d,
            components: *components,
            base: *base,
            amplitude: *amplitude,
        },
        FieldSection::Trig { base, amplitude } => BuiltinSpec::Trig {
            dim: d,
            base: base.clone(),
            amplitude: *amplitude,
        },
        FieldSection::CoupledSystem {
            base,
            amplitude,
            coupling,
        } => BuiltinSpec::CoupledSystem {
            dim: d,
            base: *base,
            amplitude: *amplitude,
            coupling: *coupling,
        },
    };
    builtin_family(spec).map_err(wrap)
}

fn build_lambdas(raw: &LambdaSection, r0: f64) -> Result<Vec<SpectralParameter>> {
    let theta0 = raw.theta0;
    if !(theta0 > 0.0 && theta0 < PI / 2.0) {
        return Err(Error::config("lambda.theta0", format!("{theta0} lies outside (0, pi/2)")));
    }
    let scale = match raw.units {
        LambdaUnits::InverseDiameterSquared => r0.powi(-2),
        LambdaUnits::Absolute => 1.0,
    };
    for (j, &a) in raw.angles.iter().enumerate() {
        let probe = SpectralParameter::from_polar(1.0, a)
            .map_err(|e| Error::config(format!("lambda.angles[{j}]"), e.to_string()))?;
        if !in_sector(&probe, theta0) {
            return Err(Error::config(
                format!("lambda.angles[{j}]"),
                format!("angle {a} lies outside the sector of aperture {theta0}"),
            ));
        }
    }
    let mut out = Vec::new();
    for (i, &r) in raw.moduli.iter().enumerate() {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::config(format!("lambda.moduli[{i}]"), format!("modulus {r} must be finite and non-negative")));
        }
        if r == 0.0 {
            out.push(SpectralParameter::zero());
            continue;
        }
        if raw.angles.is_empty() {
            return Err(Error::config("lambda.angles", "nonzero moduli need at least one angle"));
        }
        for (j, &a) in raw.angles.iter().enumerate() {
            out.push(
                SpectralParameter::from_polar(r * scale, a)
                    .map_err(|e| Error::config(format!("lambda.angles[{j}]"), e.to_string()))?,
            );
        }
    }
    for (i, p) in raw.points.iter().enumerate() {
        let path = format!("lambda.points[{i}]");
        let l = SpectralParameter::new(Complex64::new(p[0] * scale, p[1] * scale))
            .map_err(|e| Error::config(path.clone(), e.to_string()))?;
        if !l.is_zero() && !in_sector(&l, theta0) {
            return Err(Error::config(path, format!("{} + {}i lies outside the sector of aperture {theta0}", p[0], p[1])));
        }
        out.push(l);
    }
    if out.is_empty() {
        return Err(Error::config("lambda", "no shifts given"));
    }
    Ok(out)
}

fn default_steps(n: usize) -> Vec<usize> {
    let start = (n / 128).max(2) as f64;
    let mut steps: Vec<usize> = (0..12).map(|k| (start * 1.3f64.powi(k)).round() as usize).collect();
    steps.dedup();
    steps
}

fn resolve(raw: RawConfig) -> Result<RunConfig> {
    let d = raw.domain.cells.len();
    if d != 2 && d != 3 {
        return Err(Error::config("domain.cells", format!("expected 2 or 3 entries, got {d}")));
    }
    let lengths = raw.domain.lengths.clone().unwrap_or_else(|| vec![1.0; d]);
    if lengths.len() != d {
        return Err(Error::config("domain.lengths", format!("expected {d} entries, got {}", lengths.len())));
    }
    let domain = DiscreteDomain::new(lengths.clone(), raw.domain.cells.clone())
        .map_err(|e| Error::config("domain", e.to_string()))?;
    let field = build_field(&raw.field, d)?;

    if raw.eps.values.is_empty() {
        return Err(Error::config("eps.values", "at least one value is required"));
    }
    for (i, &e) in raw.eps.values.iter().enumerate() {
        let path = format!("eps.values[{i}]");
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::config(path, format!("{e} must be positive")));
        }
        domain
            .check_resolution(&Coefficients::Oscillating {
                field: field.clone(),
                eps: e,
            })
            .map_err(|err| Error::config(path, err.to_string()))?;
    }
    let lambdas = build_lambdas(&raw.lambda, domain.diameter())?;

    let rhs = match raw.rhs.kind {
        RhsKind::Bump => RhsSelector::Bump,
        RhsKind::RandomModes => {
            if raw.rhs.modes == 0 {
                return Err(Error::config("rhs.modes", "must be positive"));
            }
            RhsSelector::RandomModes { modes: raw.rhs.modes }
        }
    };
    if !(raw.solver.tol > 0.0 && raw.solver.tol < 1.0) {
        return Err(Error::config("solver.tol", "must lie in (0, 1)"));
    }
    if raw.solver.max_iter == 0 {
        return Err(Error::config("solver.max_iter", "must be positive"));
    }
    let mut solve = SolveOptions::with_tol(raw.solver.tol);
    solve.krylov.max_iter = raw.solver.max_iter;
    if !(raw.cell.tol > 0.0 && raw.cell.tol < 1.0) {
        return Err(Error::config("cell.tol", "must lie in (0, 1)"));
    }
    let mut cell = CellSolveOptions::with_tol(raw.cell.tol);
    cell.krylov.max_iter = raw.solver.max_iter;

    let experiment = ExperimentConfig {
        field,
        domain: domain.clone(),
        eps: raw.eps.values.clone(),
        lambdas,
        theta0: raw.lambda.theta0,
        rhs,
        ps: raw.norms.p.clone(),
        seed: raw.rhs.seed,
        solve,
        cell,
    };
    experiment.validate()?;

    let g = &raw.green;
    let source = g.source.clone().unwrap_or_else(|| lengths.iter().map(|l| 0.5 * l).collect());
    if source.len() != d {
        return Err(Error::config("green.source", format!("expected {d} coordinates")));
    }
    let green_eps = g.eps.unwrap_or(raw.eps.values[0]);
    domain
        .check_resolution(&Coefficients::Oscillating {
            field: experiment.field.clone(),
            eps: green_eps,
        })
        .map_err(|err| Error::config("green.eps", err.to_string()))?;
    let green = GreenSettings {
        source,
        eps: green_eps,
        rho: g.rho,
        gamma: g.gamma,
        steps: g.steps.clone().unwrap_or_else(|| default_steps(*raw.domain.cells.iter().min().unwrap())),
        mixed_delta: g.mixed_delta,
    };
    if raw.sweep.studies.is_empty() {
        return Err(Error::config("sweep.studies", "at least one study is required"));
    }
    if raw.cell.grid < 8 || raw.cell.grid % 2 != 0 {
        return Err(Error::config("cell.grid", "must be an even number of at least 8"));
    }

    let mut effective = raw.clone();
    effective.domain.lengths = Some(lengths);
    effective.green.source = Some(green.source.clone());
    effective.green.eps = Some(green.eps);
    effective.green.steps = Some(green.steps.clone());
    Ok(RunConfig {
        cell_grid: raw.cell.grid,
        studies: raw.sweep.studies.clone(),
        out_dir: raw.output.dir.clone(),
        raw: effective,
        experiment,
        green,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[field]
family = "laminate"
base = 2.0
amplitude = 1.0

[domain]
cells = [256, 256]

[eps]
values = [0.125, 0.0625]

[lambda]
moduli = [0.0, 1.0]
angles = [3.141592653589793]
"#;

    fn path_of(r: Result<RunConfig>) -> String {
        match r {
            Err(Error::Config { path, .. }) => path,
            Err(e) => panic!("unexpected error {e}"),
            Ok(_) => panic!("accepted"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config_str(MINIMAL).unwrap();
        assert_eq!(c.experiment.lambdas.len(), 2);
        assert_eq!(c.raw.lambda.theta0, FRAC_PI_4);
        assert_eq!(c.raw.domain.lengths, Some(vec![1.0, 1.0]));
        let echoed = parse_config_str(&c.echo()).unwrap();
        assert_eq!(echoed.raw, c.raw);
    }

    #[test]
    fn out_of_sector_angle_is_named() {
        let text = MINIMAL.replace("angles = [3.141592653589793]", "angles = [1.5707963267948966]");
        assert_eq!(path_of(parse_config_str(&text)), "lambda.angles[0]");
    }

    #[test]
    fn resolution_rule_is_named() {
        let text = MINIMAL.replace("values = [0.125, 0.0625]", "values = [0.125, 0.015625]");
        let err = parse_config_str(&text).unwrap_err();
        assert!(matches!(&err, Error::Config { path, .. } if path == "eps.values[1]"), "{err}");
        assert!(err.to_string().contains("resolution"));
    }

    #[test]
    fn unknown_and_missing_keys() {
        let text = MINIMAL.replace("[domain]", "[domain]\nspacing = 0.1");
        assert_eq!(path_of(parse_config_str(&text)), "domain.spacing");
        let text = MINIMAL.replace("values = [0.125, 0.0625]", "");
        assert_eq!(path_of(parse_config_str(&text)), "eps");
        let text = MINIMAL.replace("amplitude = 1.0", "amplitude = 1.0\ncoupling = 0.1");
        assert_eq!(path_of(parse_config_str(&text)), "field");
    }

    #[test]
    fn explicit_points() {
        let text = MINIMAL.replace("angles = [3.141592653589793]", "angles = [3.141592653589793]\npoints = [[-10.0, 3.0], [1.0, 0.0]]");
        assert_eq!(path_of(parse_config_str(&text)), "lambda.points[1]");
    }
}
