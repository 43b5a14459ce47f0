use std::fmt;

use num_complex::Complex64;

use super::{node_norm, GridField};
use crate::error::{Error, Result};
use crate::fem::{for_each_element, ElementBasis, Rule1d};

/// A norm of a nodal field; `p = ∞` is allowed for the Lebesgue kinds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormKind {
    Lp(f64),
    /// `‖∇u‖_p`
    GradLp(f64),
    /// `(‖u‖_p^p + ‖∇u‖_p^p)^{1/p}`
    W1p(f64),
    /// `‖D²u‖₂` by second differences.
    H2Seminorm,
}

pub fn p_label(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else if (p - 4.0 / 3.0).abs() < 1e-12 {
        "4/3".into()
    } else if p.fract() == 0.0 {
        format!("{}", p as i64)
    } else {
        format!("{p}")
    }
}

impl NormKind {
    pub fn exponent(&self) -> f64 {
        match self {
            NormKind::Lp(p) | NormKind::GradLp(p) | NormKind::W1p(p) => *p,
            NormKind::H2Seminorm => 2.0,
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormKind::Lp(p) => write!(f, "L{}", p_label(*p)),
            NormKind::GradLp(p) => write!(f, "gradL{}", p_label(*p)),
            NormKind::W1p(p) => write!(f, "W1,{}", p_label(*p)),
            NormKind::H2Seminorm => write!(f, "H2semi"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NormTable {
    pub entries: Vec<(NormKind, f64)>,
}

impl NormTable {
    pub fn get(&self, kind: NormKind) -> Option<f64> {
        self.entries.iter().find(|(k, _)| *k == kind).map(|(_, v)| *v)
    }
}

/// Quadrature sums of `|u|^p` and `|∇u|^p` with 3-point Gauss per axis, plus the maxima.
struct Sums {
    ps: Vec<f64>,
    u: Vec<f64>,
    g: Vec<f64>,
    u_max: f64,
    g_max: f64,
}

#[inline]
fn pow(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x * x
    } else if p == 4.0 {
        (x * x) * (x * x)
    } else {
        x.powf(p)
    }
}

fn quadrature_sums(u: &GridField, ps: Vec<f64>) -> Sums {
    let dom = u.domain();
    let d = dom.dim();
    let m = u.components();
    let layout = dom.full_layout();
    let h: Vec<f64> = (0..d).map(|k| dom.h(k)).collect();
    let basis = ElementBasis::new(d, &h, &Rule1d::gauss(3));
    let n = basis.nodes;
    let vals = u.values();
    let mut s = Sums {
        u: vec![0.0; ps.len()],
        g: vec![0.0; ps.len()],
        ps,
        u_max: 0.0,
        g_max: 0.0,
    };
    let mut uq = vec![Complex64::new(0.0, 0.0); m];
    let mut gq = vec![Complex64::new(0.0, 0.0); m * d];
    for_each_element(&layout, |el| {
        for q in 0..basis.num_points() {
            uq.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            gq.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            for a in 0..n {
                let node = &vals[el.unknowns[a] * m..(el.unknowns[a] + 1) * m];
                let phi = basis.value(q, a);
                for al in 0..m {
                    uq[al] += node[al] * phi;
                    for k in 0..d {
                        gq[al * d + k] += node[al] * basis.grad(q, a, k);
                    }
                }
            }
            let au = node_norm(&uq);
            let ag = node_norm(&gq);
            let w = basis.weights[q];
            s.g_max = s.g_max.max(ag);
            for (i, &p) in s.ps.iter().enumerate() {
                s.u[i] += w * pow(au, p);
                s.g[i] += w * pow(ag, p);
            }
        }
    });
    s.u_max = u.max_abs();
    s
}

fn h2_seminorm(u: &GridField) -> f64 {
    let dom = u.domain();
    let d = dom.dim();
    let m = u.components();
    let vol: f64 = (0..d).map(|k| dom.h(k)).product();
    let at = |c: [usize; 3], al: usize| u.at(dom.node_index(c))[al];
    let mut total = 0.0;
    for i in 0..dom.num_nodes() {
        if dom.is_boundary(i) {
            continue;
        }
        let c = dom.node_coords(i);
        for al in 0..m {
            for a in 0..d {
                for b in 0..d {
                    let shift = |c: [usize; 3], k: usize, s: isize| {
                        let mut o = c;
                        o[k] = (o[k] as isize + s) as usize;
                        o
                    };
                    let v = if a == b {
                        (at(shift(c, a, 1), al) - at(c, al) * 2.0 + at(shift(c, a, -1), al)) / (dom.h(a) * dom.h(a))
                    } else {
                        let pp = at(shift(shift(c, a, 1), b, 1), al);
                        let pm = at(shift(shift(c, a, 1), b, -1), al);
                        let mp = at(shift(shift(c, a, -1), b, 1), al);
                        let mm = at(shift(shift(c, a, -1), b, -1), al);
                        (pp - pm - mp + mm) / (4.0 * dom.h(a) * dom.h(b))
                    };
                    total += v.norm_sqr() * vol;
                }
            }
        }
    }
    total.sqrt()
}

/// Evaluate the requested norms of a nodal field (Q1 interpolant, Euclidean in components).
///
/// `L∞` is the nodal maximum. The H² seminorm is refused for fields produced by
/// an oscillating operator.
pub fn norms(u: &GridField, which: &[NormKind]) -> Result<NormTable> {
    for k in which {
        let p = k.exponent();
        if !(p >= 1.0) {
            return Err(Error::param(format!("norm exponent must be at least 1, got {p}")));
        }
        if *k == NormKind::H2Seminorm {
            if let Some(eps) = u.oscillation() {
                return Err(Error::Refused(format!(
                    "H2 seminorm of a solution oscillating at scale {eps} is not meaningful"
                )));
            }
        }
    }
    let mut ps: Vec<f64> = which
        .iter()
        .filter(|k| **k != NormKind::H2Seminorm)
        .map(|k| k.exponent())
        .filter(|p| p.is_finite())
        .collect();
    ps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ps.dedup();
    let needs_quadrature = which.iter().any(|k| *k != NormKind::H2Seminorm && !matches!(k, NormKind::Lp(p) if p.is_infinite()));
    let sums = if needs_quadrature {
        Some(quadrature_sums(u, ps))
    } else {
        None
    };
    let lookup = |s: &Sums, p: f64| s.ps.iter().position(|&q| q == p).unwrap();
    let mut table = NormTable::default();
    for &k in which {
        let v = match k {
            NormKind::Lp(p) if p.is_infinite() => u.max_abs(),
            NormKind::Lp(p) => {
                let s = sums.as_ref().unwrap();
                s.u[lookup(s, p)].powf(1.0 / p)
            }
            NormKind::GradLp(p) => {
                let s = sums.as_ref().unwrap();
                if p.is_infinite() {
                    s.g_max
                } else {
                    s.g[lookup(s, p)].powf(1.0 / p)
                }
            }
            NormKind::W1p(p) => {
                let s = sums.as_ref().unwrap();
                if p.is_infinite() {
                    s.u_max.max(s.g_max)
                } else {
                    let i = lookup(s, p);
                    (s.u[i] + s.g[i]).powf(1.0 / p)
                }
            }
            NormKind::H2Seminorm => h2_seminorm(u),
        };
        table.entries.push((k, v));
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::domain::DiscreteDomain;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const PS: [f64; 5] = [1.0, 4.0 / 3.0, 2.0, 4.0, f64::INFINITY];

    #[test]
    fn constant_field_has_unit_norms() {
        let dom = DiscreteDomain::unit(2, 8).unwrap();
        let u = GridField::from_fn(&dom, 1, |_, o| o[0] = Complex64::new(1.0, 0.0));
        let kinds: Vec<NormKind> = PS.iter().map(|&p| NormKind::Lp(p)).collect();
        let t = norms(&u, &kinds).unwrap();
        for (_, v) in &t.entries {
            assert!((v - 1.0).abs() < 1e-14);
        }
        assert!(norms(&u, &[NormKind::GradLp(2.0)]).unwrap().entries[0].1 < 1e-14);
    }

    #[test]
    fn sine_product_l2_norm_converges() {
        let mut errs = Vec::new();
        for n in [8, 16, 32, 64] {
            let dom = DiscreteDomain::unit(2, n).unwrap();
            let u = GridField::from_fn(&dom, 1, |x, o| o[0] = Complex64::new((PI * x[0]).sin() * (PI * x[1]).sin(), 0.0));
            let t = norms(&u, &[NormKind::Lp(2.0), NormKind::GradLp(2.0), NormKind::H2Seminorm]).unwrap();
            errs.push((t.entries[0].1 - 0.5).abs());
            // ‖∇u‖₂ = π/√2 and ‖D²u‖₂ = π²
            assert!((t.entries[1].1 - PI / 2f64.sqrt()).abs() < 2.0 / n as f64);
            assert!((t.entries[2].1 - PI * PI).abs() < 40.0 / n as f64);
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.8, "{errs:?}");
        }
    }

    #[test]
    fn h2_is_refused_for_oscillating_fields() {
        let dom = DiscreteDomain::unit(2, 8).unwrap();
        let u = GridField::zeros(&dom, 1).with_oscillation(Some(0.5));
        assert!(matches!(norms(&u, &[NormKind::H2Seminorm]), Err(Error::Refused(_))));
        assert!(norms(&u, &[NormKind::Lp(2.0)]).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn jensen_ordering(seed in any::<u64>(), lx in 0.5f64..2.0, ly in 0.5f64..2.0) {
            let dom = DiscreteDomain::new(vec![lx, ly], vec![6, 5]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vals: Vec<Complex64> = (0..dom.num_nodes() * 2)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let u = GridField::from_values(&dom, 2, vals).unwrap();
            let kinds: Vec<NormKind> = PS.iter().map(|&p| NormKind::Lp(p)).collect();
            let t = norms(&u, &kinds).unwrap();
            let vol = dom.volume();
            let scaled: Vec<f64> = t.entries.iter().map(|(k, v)| v / vol.powf(1.0 / k.exponent())).collect();
            for w in scaled.windows(2) {
                prop_assert!(w[0] <= w[1] * (1.0 + 1e-12));
            }
        }
    }
}
