//! Periodic coefficient tensors `a_ij^{αβ}(y)` on the unit torus.
//!
//! A [`CoefficientField`] is a pure, 1-periodic sampler together with the
//! structural data (dimension, number of components, ellipticity and Hölder
//! constants) that downstream solvers rely on. Builtin families cover the
//! constant, laminate, trigonometric and coupled-system cases; custom fields
//! can be supplied as closures.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Seed for the direction and pair samples used by [`validate`].
pub const VALIDATION_SEED: u64 = 0x5eed_a11c;
/// Number of pseudo-random unit directions used by [`validate`].
pub const RANDOM_DIRECTIONS: usize = 64;

/// A real tensor `a_ij^{αβ}` with `d² m²` entries.
///
/// Entries are stored at `((i * d + j) * m + α) * m + β`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    d: usize,
    m: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(d: usize, m: usize) -> Self {
        Self {
            d,
            m,
            data: vec![0.0; d * d * m * m],
        }
    }

    /// `δ_ij δ^{αβ}`.
    pub fn identity(d: usize, m: usize) -> Self {
        Self::scalar(d, m, 1.0)
    }

    /// `s δ_ij δ^{αβ}`.
    pub fn scalar(d: usize, m: usize, s: f64) -> Self {
        let mut t = Self::zeros(d, m);
        for i in 0..d {
            for a in 0..m {
                t.set(i, i, a, a, s);
            }
        }
        t
    }

    pub fn from_vec(d: usize, m: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != d * d * m * m {
            return Err(Error::param(format!(
                "tensor of dimension {d} with {m} components needs {} entries, got {}",
                d * d * m * m,
                data.len()
            )));
        }
        Ok(Self { d, m, data })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn components(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn index(d: usize, m: usize, i: usize, j: usize, a: usize, b: usize) -> usize {
        ((i * d + j) * m + a) * m + b
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, a: usize, b: usize) -> f64 {
        self.data[Self::index(self.d, self.m, i, j, a, b)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, a: usize, b: usize, v: f64) {
        let k = Self::index(self.d, self.m, i, j, a, b);
        self.data[k] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `a_ij^{αβ} ξ_i^α ξ_j^β` with `ξ` stored as `ξ[α * d + i]`.
    pub fn quadratic_form(&self, xi: &[f64]) -> f64 {
        quadratic_form(self.d, self.m, &self.data, xi)
    }

    /// Largest `|a_ij^{αβ} − a_ji^{βα}|`.
    pub fn asymmetry(&self) -> f64 {
        asymmetry(self.d, self.m, &self.data)
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// The `(md) × (md)` matrix `M[(α,i),(β,j)] = a_ij^{αβ}`, symmetric iff the tensor is.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let (d, m) = (self.d, self.m);
        DMatrix::from_fn(m * d, m * d, |r, c| {
            let (a, i) = (r / d, r % d);
            let (b, j) = (c / d, c % d);
            self.get(i, j, a, b)
        })
    }

    /// Extremal eigenvalues of the symmetrized [`Tensor::to_matrix`].
    pub fn eigen_range(&self) -> (f64, f64) {
        let mat = self.to_matrix();
        let sym = (&mat + mat.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym).eigenvalues;
        let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

impl fmt::Display for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in 0..self.m {
            for b in 0..self.m {
                for i in 0..self.d {
                    for j in 0..self.d {
                        writeln!(
                            f,
                            "a[{}{}]^[{}{}] = {:.12}",
                            i + 1,
                            j + 1,
                            a + 1,
                            b + 1,
                            self.get(i, j, a, b)
                        )?;
                    }
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn quadratic_form(d: usize, m: usize, data: &[f64], xi: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            for a in 0..m {
                let xa = xi[a * d + i];
                if xa == 0.0 {
                    continue;
                }
                for b in 0..m {
                    acc += data[Tensor::index(d, m, i, j, a, b)] * xa * xi[b * d + j];
                }
            }
        }
    }
    acc
}

pub(crate) fn asymmetry(d: usize, m: usize, data: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            for a in 0..m {
                for b in 0..m {
                    let lhs = data[Tensor::index(d, m, i, j, a, b)];
                    let rhs = data[Tensor::index(d, m, j, i, b, a)];
                    worst = worst.max((lhs - rhs).abs());
                }
            }
        }
    }
    worst
}

/// Which family a field belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyTag {
    Constant,
    Laminate,
    Trig,
    CoupledSystem,
    Custom,
}

impl FamilyTag {
    pub fn name(self) -> &'static str {
        match self {
            FamilyTag::Constant => "constant",
            FamilyTag::Laminate => "laminate",
            FamilyTag::Trig => "trig",
            FamilyTag::CoupledSystem => "coupled-system",
            FamilyTag::Custom => "custom",
        }
    }
}

/// Hölder data `|A(x) − A(y)| ≤ τ |x − y|^ν` (entrywise max norm).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HolderData {
    pub tau: f64,
    pub nu: f64,
}

type CustomSampler = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

#[derive(Clone)]
enum Sampler {
    Constant(Vec<f64>),
    Laminate { base: f64, amplitude: f64 },
    Trig { base: Vec<f64>, amplitude: f64 },
    Coupled { base: f64, amplitude: f64, coupling: f64 },
    Custom(Arc<CustomSampler>),
}

/// A periodic coefficient field. Immutable and cheap to clone.
#[derive(Clone)]
pub struct CoefficientField {
    d: usize,
    m: usize,
    tag: FamilyTag,
    mu: f64,
    holder: Option<HolderData>,
    sampler: Sampler,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("d", &self.d)
            .field("m", &self.m)
            .field("tag", &self.tag)
            .field("mu", &self.mu)
            .field("holder", &self.holder)
            .finish()
    }
}

/// Parameters for [`builtin_family`].
#[derive(Clone, Debug, PartialEq)]
pub enum BuiltinSpec {
    /// Any symmetric, strongly elliptic constant tensor.
    Constant { tensor: Tensor },
    /// `a(y) = base + amplitude · sin(2π y₁)` times the identity.
    Laminate {
        dim: usize,
        components: usize,
        base: f64,
        amplitude: f64,
    },
    /// `a_kk(y) = c_k + α (sin 2πy₁ + sin 2πy₂)`; one `c` gives the scalar case,
    /// `dim` values give a diagonal tensor.
    Trig {
        dim: usize,
        base: Vec<f64>,
        amplitude: f64,
    },
    /// `m = 2` system: laminate diagonal with off-diagonal coupling
    /// `κ(y) = coupling · cos(2π y₂)` between the two components.
    CoupledSystem {
        dim: usize,
        base: f64,
        amplitude: f64,
        coupling: f64,
    },
}

/// Build one of the builtin fields, rejecting parameters that break ellipticity.
pub fn builtin_family(spec: BuiltinSpec) -> Result<CoefficientField> {
    match spec {
        BuiltinSpec::Constant { tensor } => CoefficientField::constant(tensor),
        BuiltinSpec::Laminate {
            dim,
            components,
            base,
            amplitude,
        } => CoefficientField::laminate(dim, components, base, amplitude),
        BuiltinSpec::Trig {
            dim,
            base,
            amplitude,
        } => CoefficientField::trig(dim, base, amplitude),
        BuiltinSpec::CoupledSystem {
            dim,
            base,
            amplitude,
            coupling,
        } => CoefficientField::coupled_system(dim, base, amplitude, coupling),
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 2 || d == 3 {
        Ok(())
    } else {
        Err(Error::param(format!("dimension must be 2 or 3, got {d}")))
    }
}

fn sine_holder(amplitude_sum: f64) -> Option<HolderData> {
    // |sin 2πs − sin 2πt| ≤ min(2, 2π|s−t|) ≤ 2√π |s−t|^{1/2}
    Some(HolderData {
        tau: 2.0 * PI.sqrt() * amplitude_sum.abs(),
        nu: 0.5,
    })
}

impl CoefficientField {
    pub fn constant(tensor: Tensor) -> Result<Self> {
        let (d, m) = (tensor.dim(), tensor.components());
        check_dim(d)?;
        if m == 0 {
            return Err(Error::param("at least one component is required"));
        }
        let asym = tensor.asymmetry();
        if asym > 1e-12 {
            return Err(Error::param(format!(
                "constant tensor is not symmetric (defect {asym:.3e})"
            )));
        }
        let (lo, hi) = tensor.eigen_range();
        if lo <= 0.0 {
            return Err(Error::param(format!(
                "constant tensor is not elliptic (smallest eigenvalue {lo:.3e})"
            )));
        }
        Ok(Self {
            d,
            m,
            tag: FamilyTag::Constant,
            mu: lo.min(1.0 / hi),
            holder: Some(HolderData { tau: 0.0, nu: 0.5 }),
            sampler: Sampler::Constant(tensor.data),
        })
    }

    pub fn laminate(d: usize, m: usize, base: f64, amplitude: f64) -> Result<Self> {
        check_dim(d)?;
        if m == 0 {
            return Err(Error::param("at least one component is required"));
        }
        let lo = base - amplitude.abs();
        if !(lo > 0.0) {
            return Err(Error::param(format!(
                "laminate violates ellipticity: base − |amplitude| = {lo} ≤ 0"
            )));
        }
        let hi = base + amplitude.abs();
        Ok(Self {
            d,
            m,
            tag: FamilyTag::Laminate,
            mu: lo.min(1.0 / hi),
            holder: sine_holder(amplitude),
            sampler: Sampler::Laminate { base, amplitude },
        })
    }

    pub fn trig(d: usize, base: Vec<f64>, amplitude: f64) -> Result<Self> {
        check_dim(d)?;
        let base = match base.len() {
            1 => vec![base[0]; d],
            n if n == d => base,
            n => {
                return Err(Error::param(format!(
                    "trig family needs 1 or {d} base values, got {n}"
                )))
            }
        };
        let cmin = base.iter().cloned().fold(f64::INFINITY, f64::min);
        let cmax = base.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = cmin - 2.0 * amplitude.abs();
        if !(lo > 0.0) {
            return Err(Error::param(format!(
                "trig family violates ellipticity: c − 2|α| = {lo} ≤ 0"
            )));
        }
        let hi = cmax + 2.0 * amplitude.abs();
        Ok(Self {
            d,
            m: 1,
            tag: FamilyTag::Trig,
            mu: lo.min(1.0 / hi),
            holder: sine_holder(2.0 * amplitude),
            sampler: Sampler::Trig { base, amplitude },
        })
    }

    pub fn coupled_system(d: usize, base: f64, amplitude: f64, coupling: f64) -> Result<Self> {
        check_dim(d)?;
        let lo = base - amplitude.abs() - coupling.abs();
        if !(lo > 0.0) {
            return Err(Error::param(format!(
                "coupled system violates ellipticity: base − |amplitude| − |coupling| = {lo} ≤ 0"
            )));
        }
        let hi = base + amplitude.abs() + coupling.abs();
        Ok(Self {
            d,
            m: 2,
            tag: FamilyTag::CoupledSystem,
            mu: lo.min(1.0 / hi),
            holder: sine_holder(amplitude.abs() + coupling.abs()),
            sampler: Sampler::Coupled {
                base,
                amplitude,
                coupling,
            },
        })
    }

    /// A user-supplied sampler. It must be 1-periodic and write `d² m²` entries
    /// in [`Tensor`] order; `mu` is the declared ellipticity constant.
    pub fn custom<S>(d: usize, m: usize, mu: f64, holder: Option<HolderData>, sampler: S) -> Result<Self>
    where
        S: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        check_dim(d)?;
        if !(mu > 0.0) {
            return Err(Error::param("declared ellipticity must be positive"));
        }
        Ok(Self {
            d,
            m,
            tag: FamilyTag::Custom,
            mu,
            holder,
            sampler: Sampler::Custom(Arc::new(sampler)),
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn components(&self) -> usize {
        self.m
    }

    pub fn tag(&self) -> FamilyTag {
        self.tag
    }

    /// Declared ellipticity constant μ.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn holder(&self) -> Option<HolderData> {
        self.holder
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.sampler, Sampler::Constant(_))
    }

    /// Number of tensor entries, `d² m²`.
    pub fn len(&self) -> usize {
        self.d * self.d * self.m * self.m
    }

    /// Fill `out` with `A(y)`; `y` is reduced to `[0,1)^d` first.
    pub fn sample_into(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.len());
        let (d, m) = (self.d, self.m);
        let mut red = [0.0f64; 3];
        for k in 0..d {
            red[k] = y[k] - y[k].floor();
        }
        match &self.sampler {
            Sampler::Constant(data) => out.copy_from_slice(data),
            Sampler::Laminate { base, amplitude } => {
                let a = base + amplitude * (TWO_PI * red[0]).sin();
                out.fill(0.0);
                for i in 0..d {
                    for al in 0..m {
                        out[Tensor::index(d, m, i, i, al, al)] = a;
                    }
                }
            }
            Sampler::Trig { base, amplitude } => {
                let osc = amplitude * ((TWO_PI * red[0]).sin() + (TWO_PI * red[1]).sin());
                out.fill(0.0);
                for i in 0..d {
                    out[Tensor::index(d, 1, i, i, 0, 0)] = base[i] + osc;
                }
            }
            Sampler::Coupled {
                base,
                amplitude,
                coupling,
            } => {
                let a = base + amplitude * (TWO_PI * red[0]).sin();
                let kappa = coupling * (TWO_PI * red[1]).cos();
                out.fill(0.0);
                for i in 0..d {
                    out[Tensor::index(d, 2, i, i, 0, 0)] = a;
                    out[Tensor::index(d, 2, i, i, 1, 1)] = a;
                    out[Tensor::index(d, 2, i, i, 0, 1)] = kappa;
                    out[Tensor::index(d, 2, i, i, 1, 0)] = kappa;
                }
            }
            Sampler::Custom(f) => f(&red[..d], out),
        }
    }

    /// `A(y)` as an owned tensor.
    pub fn sample(&self, y: &[f64]) -> Tensor {
        let mut t = Tensor::zeros(self.d, self.m);
        self.sample_into(y, t.as_mut_slice());
        t
    }
}

/// Thresholds that decide whether a field passes [`validate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidationTolerances {
    pub symmetry: f64,
    pub periodicity: f64,
    /// Required lower bound on the measured ellipticity.
    pub min_ellipticity: f64,
}

impl Default for ValidationTolerances {
    fn default() -> Self {
        Self {
            symmetry: 1e-12,
            periodicity: 1e-12,
            min_ellipticity: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub symmetry_defect: f64,
    pub mu_low: f64,
    pub mu_high: f64,
    pub periodicity_defect: f64,
    /// Largest sampled `|A(x) − A(y)| / |x − y|^ν`; `None` without Hölder data.
    pub holder_quotient: Option<f64>,
    pub passed: bool,
    pub failures: Vec<String>,
}

/// Unit tensors used for Rayleigh quotients: canonical basis, all
/// normalized coordinate pairs, then seeded random unit tensors.
pub fn direction_set(d: usize, m: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = d * m;
    let mut dirs = Vec::new();
    for a in 0..n {
        let mut e = vec![0.0; n];
        e[a] = 1.0;
        dirs.push(e);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for a in 0..n {
        for b in (a + 1)..n {
            let mut e = vec![0.0; n];
            e[a] = s;
            e[b] = s;
            dirs.push(e.clone());
            e[b] = -s;
            dirs.push(e);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut added = 0;
    while added < RANDOM_DIRECTIONS {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-3 {
            continue;
        }
        dirs.push(v.into_iter().map(|x| x / norm).collect());
        added += 1;
    }
    dirs
}

/// Scan the field on a `resolution^d` grid and report its structural defects.
pub fn validate(
    field: &CoefficientField,
    resolution: usize,
    tol: ValidationTolerances,
) -> Result<ValidationReport> {
    if resolution < 4 {
        return Err(Error::param(format!(
            "validation resolution must be at least 4, got {resolution}"
        )));
    }
    let (d, m) = (field.dim(), field.components());
    let dirs = direction_set(d, m, VALIDATION_SEED);
    let len = field.len();
    let mut a = vec![0.0; len];
    let mut shifted = vec![0.0; len];
    let mut y = vec![0.0; d];
    let mut ys = vec![0.0; d];

    let mut symmetry_defect = 0.0f64;
    let mut periodicity_defect = 0.0f64;
    let mut mu_low = f64::INFINITY;
    let mut mu_high = f64::NEG_INFINITY;

    let total = resolution.pow(d as u32);
    for idx in 0..total {
        let mut rem = idx;
        for k in 0..d {
            y[k] = (rem % resolution) as f64 / resolution as f64;
            rem /= resolution;
        }
        field.sample_into(&y, &mut a);
        symmetry_defect = symmetry_defect.max(asymmetry(d, m, &a));
        for xi in &dirs {
            let q = quadratic_form(d, m, &a, xi);
            mu_low = mu_low.min(q);
            mu_high = mu_high.max(q);
        }
        for k in 0..d {
            ys.copy_from_slice(&y);
            ys[k] += 1.0;
            field.sample_into(&ys, &mut shifted);
            let diff = a
                .iter()
                .zip(&shifted)
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max);
            periodicity_defect = periodicity_defect.max(diff);
        }
    }

    let holder_quotient = field.holder().map(|h| {
        let mut rng = ChaCha8Rng::seed_from_u64(VALIDATION_SEED ^ 0x4017);
        let mut x = vec![0.0; d];
        let mut worst = 0.0f64;
        for _ in 0..(64 * resolution) {
            for k in 0..d {
                x[k] = rng.gen_range(0.0..1.0);
                y[k] = rng.gen_range(0.0..1.0);
            }
            let dist = x
                .iter()
                .zip(&y)
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt();
            if dist < 1e-12 {
                continue;
            }
            field.sample_into(&x, &mut a);
            field.sample_into(&y, &mut shifted);
            let diff = a
                .iter()
                .zip(&shifted)
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max);
            worst = worst.max(diff / dist.powf(h.nu));
        }
        worst
    });

    let mut failures = Vec::new();
    if symmetry_defect > tol.symmetry {
        failures.push(format!("symmetry defect {symmetry_defect:.3e} > {:.1e}", tol.symmetry));
    }
    if periodicity_defect > tol.periodicity {
        failures.push(format!(
            "periodicity defect {periodicity_defect:.3e} > {:.1e}",
            tol.periodicity
        ));
    }
    if !(mu_low > tol.min_ellipticity) {
        failures.push(format!(
            "measured ellipticity {mu_low:.3e} ≤ {:.1e}",
            tol.min_ellipticity
        ));
    }
    if let (Some(q), Some(h)) = (holder_quotient, field.holder()) {
        if q > h.tau * (1.0 + 1e-9) + 1e-12 {
            failures.push(format!("Hölder quotient {q:.3e} exceeds declared τ = {:.3e}", h.tau));
        }
    }
    Ok(ValidationReport {
        symmetry_defect,
        mu_low,
        mu_high,
        periodicity_defect,
        holder_quotient,
        passed: failures.is_empty(),
        failures,
    })
}
