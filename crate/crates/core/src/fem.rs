//! Multilinear (Q1) elements on tensor-product lattices.
//!
//! Element loops run over every cell of a lattice; corners that are not
//! unknowns (eliminated Dirichlet nodes) are reported as [`NONE`].

use num_complex::Complex64;

use crate::linalg::stencil::{Layout, StencilOp, NONE};
use crate::tensor::{CoefficientField, Tensor};

/// Coefficients of a divergence-form operator on physical space.
#[derive(Clone, Debug)]
pub enum Coefficients {
    /// `A(x/ε)`.
    Oscillating { field: CoefficientField, eps: f64 },
    /// A constant tensor, usually the homogenized one.
    Homogenized(Tensor),
}

impl Coefficients {
    pub fn dim(&self) -> usize {
        match self {
            Coefficients::Oscillating { field, .. } => field.dim(),
            Coefficients::Homogenized(t) => t.dim(),
        }
    }

    pub fn components(&self) -> usize {
        match self {
            Coefficients::Oscillating { field, .. } => field.components(),
            Coefficients::Homogenized(t) => t.components(),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Coefficients::Oscillating { field, .. } => field.is_constant(),
            Coefficients::Homogenized(_) => true,
        }
    }

    /// Oscillation period, if any.
    pub fn epsilon(&self) -> Option<f64> {
        match self {
            Coefficients::Oscillating { eps, .. } => Some(*eps),
            Coefficients::Homogenized(_) => None,
        }
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Coefficients::Oscillating { field, eps } => {
                let mut y = [0.0; 3];
                for k in 0..x.len() {
                    y[k] = x[k] / eps;
                }
                field.sample_into(&y[..x.len()], out);
            }
            Coefficients::Homogenized(t) => out.copy_from_slice(t.as_slice()),
        }
    }
}

/// Gauss–Legendre rule on `[0, 1]`.
#[derive(Clone, Debug)]
pub struct Rule1d {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1d {
    pub fn gauss(n: usize) -> Self {
        match n {
            1 => Self {
                points: vec![0.5],
                weights: vec![1.0],
            },
            2 => {
                let s = 0.5 / 3f64.sqrt();
                Self {
                    points: vec![0.5 - s, 0.5 + s],
                    weights: vec![0.5, 0.5],
                }
            }
            3 => {
                let s = 0.5 * (0.6f64).sqrt();
                Self {
                    points: vec![0.5 - s, 0.5, 0.5 + s],
                    weights: vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0],
                }
            }
            _ => panic!("unsupported Gauss rule with {n} points"),
        }
    }
}

/// Q1 basis values and physical gradients at the points of a tensor rule.
#[derive(Clone, Debug)]
pub struct ElementBasis {
    pub d: usize,
    pub nodes: usize,
    /// reference points in `[0,1]^d`
    pub points: Vec<[f64; 3]>,
    /// physical weights (include the cell volume)
    pub weights: Vec<f64>,
    /// `values[q * nodes + a]`
    pub values: Vec<f64>,
    /// `grads[(q * nodes + a) * d + k]`, physical
    pub grads: Vec<f64>,
}

#[inline]
pub fn local_bit(a: usize, k: usize) -> usize {
    (a >> k) & 1
}

impl ElementBasis {
    pub fn new(d: usize, h: &[f64], rule: &Rule1d) -> Self {
        let nq1 = rule.points.len();
        let nq = nq1.pow(d as u32);
        let vol: f64 = h[..d].iter().product();
        let mut points = Vec::with_capacity(nq);
        let mut weights = Vec::with_capacity(nq);
        for q in 0..nq {
            let mut p = [0.0; 3];
            let mut w = vol;
            let mut r = q;
            for k in 0..d {
                let i = r % nq1;
                r /= nq1;
                p[k] = rule.points[i];
                w *= rule.weights[i];
            }
            points.push(p);
            weights.push(w);
        }
        Self::at_points(d, h, points, weights)
    }

    /// Basis data at arbitrary reference points with given weights.
    pub fn at_points(d: usize, h: &[f64], points: Vec<[f64; 3]>, weights: Vec<f64>) -> Self {
        let nodes = 1 << d;
        let nq = points.len();
        let mut values = vec![0.0; nq * nodes];
        let mut grads = vec![0.0; nq * nodes * d];
        for (q, p) in points.iter().enumerate() {
            for a in 0..nodes {
                let f: Vec<f64> = (0..d)
                    .map(|k| if local_bit(a, k) == 1 { p[k] } else { 1.0 - p[k] })
                    .collect();
                values[q * nodes + a] = f.iter().product();
                for k in 0..d {
                    let mut g = if local_bit(a, k) == 1 { 1.0 } else { -1.0 } / h[k];
                    for l in 0..d {
                        if l != k {
                            g *= f[l];
                        }
                    }
                    grads[(q * nodes + a) * d + k] = g;
                }
            }
        }
        Self {
            d,
            nodes,
            points,
            weights,
            values,
            grads,
        }
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn grad(&self, q: usize, a: usize, k: usize) -> f64 {
        self.grads[(q * self.nodes + a) * self.d + k]
    }

    #[inline]
    pub fn value(&self, q: usize, a: usize) -> f64 {
        self.values[q * self.nodes + a]
    }
}

/// Element of a lattice: cell coordinates, lattice indices of its corners and their unknowns.
#[derive(Clone, Copy, Debug)]
pub struct Element {
    pub cell: [usize; 3],
    pub unknowns: [usize; 8],
}

impl Element {
    /// Lattice coordinates (0..=cells) of corner `a`.
    #[inline]
    pub fn corner(&self, a: usize, d: usize) -> [usize; 3] {
        let mut c = [0usize; 3];
        for k in 0..d {
            c[k] = self.cell[k] + local_bit(a, k);
        }
        c
    }
}

/// Visit every cell of the lattice.
pub fn for_each_element<F: FnMut(&Element)>(layout: &Layout, mut f: F) {
    let d = layout.dim();
    let mut cells = [1usize; 3];
    for k in 0..d {
        cells[k] = layout.axis(k).cells;
    }
    let nodes = 1 << d;
    for z in 0..cells[2] {
        for y in 0..cells[1] {
            for x in 0..cells[0] {
                let cell = [x, y, z];
                let mut unknowns = [NONE; 8];
                for a in 0..nodes {
                    let mut uc = [0usize; 3];
                    let mut ok = true;
                    for k in 0..d {
                        match layout.axis(k).unknown_of((cell[k] + local_bit(a, k)) as isize) {
                            Some(u) => uc[k] = u,
                            None => ok = false,
                        }
                    }
                    if ok {
                        unknowns[a] = layout.linear(uc);
                    }
                }
                f(&Element { cell, unknowns });
            }
        }
    }
}

/// Physical coordinates of a reference point in a cell.
#[inline]
pub fn physical_point(layout: &Layout, cell: [usize; 3], p: &[f64; 3], out: &mut [f64; 3]) {
    for k in 0..layout.dim() {
        out[k] = (cell[k] as f64 + p[k]) * layout.axis(k).h;
    }
}

/// `G[((q * n + a) * n + b) * d² + i * d + j] = w_q ∂_iφ_a ∂_jφ_b`.
fn gradient_products(basis: &ElementBasis) -> Vec<f64> {
    let (d, n, nq) = (basis.d, basis.nodes, basis.num_points());
    let mut g = vec![0.0; nq * n * n * d * d];
    for q in 0..nq {
        for a in 0..n {
            for b in 0..n {
                for i in 0..d {
                    for j in 0..d {
                        g[((q * n + a) * n + b) * d * d + i * d + j] =
                            basis.weights[q] * basis.grad(q, a, i) * basis.grad(q, b, j);
                    }
                }
            }
        }
    }
    g
}

/// Element stiffness `Ke[((a * m + α) * n + b) * m + β]` from tensors at quadrature points.
fn element_stiffness(
    d: usize,
    m: usize,
    n: usize,
    nq: usize,
    gp: &[f64],
    coef: &[f64],
    out: &mut [f64],
) {
    let len = d * d * m * m;
    out.iter_mut().for_each(|v| *v = 0.0);
    for q in 0..nq {
        let aq = &coef[q * len..(q + 1) * len];
        for a in 0..n {
            for b in 0..n {
                let g = &gp[((q * n + a) * n + b) * d * d..((q * n + a) * n + b + 1) * d * d];
                for al in 0..m {
                    for be in 0..m {
                        let mut acc = 0.0;
                        for i in 0..d {
                            for j in 0..d {
                                acc += aq[Tensor::index(d, m, i, j, al, be)] * g[i * d + j];
                            }
                        }
                        out[((a * m + al) * n + b) * m + be] += acc;
                    }
                }
            }
        }
    }
}

/// Element stiffness matrices, cached when the coefficients are constant.
pub struct StiffnessKernel<'a> {
    coeffs: &'a Coefficients,
    d: usize,
    m: usize,
    basis: ElementBasis,
    gp: Vec<f64>,
    coef: Vec<f64>,
    cached: Option<Vec<f64>>,
}

impl<'a> StiffnessKernel<'a> {
    pub fn new(layout: &Layout, coeffs: &'a Coefficients) -> Self {
        let d = layout.dim();
        let m = coeffs.components();
        let h: Vec<f64> = (0..d).map(|k| layout.axis(k).h).collect();
        let basis = ElementBasis::new(d, &h, &Rule1d::gauss(2));
        let gp = gradient_products(&basis);
        let nq = basis.num_points();
        let n = basis.nodes;
        let mut k = Self {
            coeffs,
            d,
            m,
            coef: vec![0.0; nq * d * d * m * m],
            basis,
            gp,
            cached: None,
        };
        if coeffs.is_constant() {
            let mut ke = vec![0.0; n * n * m * m];
            k.compute(layout, [0, 0, 0], &mut ke);
            k.cached = Some(ke);
        }
        k
    }

    pub fn nodes(&self) -> usize {
        self.basis.nodes
    }

    fn compute(&mut self, layout: &Layout, cell: [usize; 3], out: &mut [f64]) {
        let len = self.d * self.d * self.m * self.m;
        let mut x = [0.0; 3];
        for q in 0..self.basis.num_points() {
            physical_point(layout, cell, &self.basis.points[q], &mut x);
            self.coeffs.eval(&x[..self.d], &mut self.coef[q * len..(q + 1) * len]);
        }
        element_stiffness(
            self.d,
            self.m,
            self.basis.nodes,
            self.basis.num_points(),
            &self.gp,
            &self.coef,
            out,
        );
    }

    /// Element stiffness of a cell.
    pub fn element(&mut self, layout: &Layout, cell: [usize; 3], out: &mut [f64]) {
        if let Some(ke) = &self.cached {
            out.copy_from_slice(ke);
        } else {
            self.compute(layout, cell, out);
        }
    }
}

/// Element mass `∫ φ_a φ_b` on a cell of the lattice (exact, tensor product).
pub fn element_mass(layout: &Layout) -> Vec<f64> {
    let d = layout.dim();
    let n = 1 << d;
    let mut me = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            let mut v = 1.0;
            for k in 0..d {
                let h = layout.axis(k).h;
                v *= if local_bit(a, k) == local_bit(b, k) { h / 3.0 } else { h / 6.0 };
            }
            me[a * n + b] = v;
        }
    }
    me
}

/// Assemble the Q1 stiffness stencil of `−div(A∇·)` on the unknowns of a lattice.
pub fn assemble_stiffness(layout: &Layout, coeffs: &Coefficients) -> StencilOp {
    let m = coeffs.components();
    let d = layout.dim();
    let n = 1 << d;
    let s = layout.stencil_size();
    let mm = m * m;
    let mut kernel = StiffnessKernel::new(layout, coeffs);
    let mut op = StencilOp::zeros(layout.clone(), m);
    let mut ke = vec![0.0; n * n * mm];
    // offset index of corner b seen from corner a
    let mut offs = vec![0usize; n * n];
    for a in 0..n {
        for b in 0..n {
            let mut o = [0isize; 3];
            for k in 0..d {
                o[k] = local_bit(b, k) as isize - local_bit(a, k) as isize;
            }
            offs[a * n + b] = layout.offset_index(o);
        }
    }
    let k = op.stiffness_mut();
    for_each_element(layout, |el| {
        kernel.element(layout, el.cell, &mut ke);
        for a in 0..n {
            let i = el.unknowns[a];
            if i == NONE {
                continue;
            }
            for b in 0..n {
                if el.unknowns[b] == NONE {
                    continue;
                }
                let base = (i * s + offs[a * n + b]) * mm;
                for al in 0..m {
                    for be in 0..m {
                        k[base + al * m + be] += ke[((a * m + al) * n + b) * m + be];
                    }
                }
            }
        }
    });
    op
}

/// Lattice coordinates (0..=cells) of every node of the full lattice, x fastest.
pub fn full_node_count(layout: &Layout) -> [usize; 3] {
    let mut c = [1usize; 3];
    for k in 0..layout.dim() {
        c[k] = layout.axis(k).cells + 1;
    }
    c
}

#[inline]
pub fn full_linear(counts: [usize; 3], c: [usize; 3]) -> usize {
    (c[2] * counts[1] + c[1]) * counts[0] + c[0]
}

/// Load vector `∫ F φ_i + (−∫ f : ∇φ_i)` for nodal data on the full lattice.
///
/// `source` holds `m` values per full-lattice node, `flux` holds `m·d` values
/// (`flux[node][α * d + k]`); either may be absent.
pub fn load_vector(
    layout: &Layout,
    m: usize,
    source: Option<&[Complex64]>,
    flux: Option<&[Complex64]>,
) -> Vec<Complex64> {
    let d = layout.dim();
    let n = 1 << d;
    let counts = full_node_count(layout);
    let mut out = vec![Complex64::new(0.0, 0.0); layout.num_nodes() * m];
    let me = element_mass(layout);
    let h: Vec<f64> = (0..d).map(|k| layout.axis(k).h).collect();
    let basis = ElementBasis::new(d, &h, &Rule1d::gauss(2));
    let nq = basis.num_points();
    let mut fq = vec![Complex64::new(0.0, 0.0); m * d];
    for_each_element(layout, |el| {
        let corners: Vec<usize> = (0..n).map(|a| full_linear(counts, el.corner(a, d))).collect();
        if let Some(src) = source {
            for a in 0..n {
                let i = el.unknowns[a];
                if i == NONE {
                    continue;
                }
                for al in 0..m {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for b in 0..n {
                        acc += src[corners[b] * m + al] * me[a * n + b];
                    }
                    out[i * m + al] += acc;
                }
            }
        }
        if let Some(fl) = flux {
            for q in 0..nq {
                fq.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
                for b in 0..n {
                    let w = basis.value(q, b);
                    for c in 0..m * d {
                        fq[c] += fl[corners[b] * m * d + c] * w;
                    }
                }
                for a in 0..n {
                    let i = el.unknowns[a];
                    if i == NONE {
                        continue;
                    }
                    for al in 0..m {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for k in 0..d {
                            acc += fq[al * d + k] * basis.grad(q, a, k);
                        }
                        out[i * m + al] -= acc * basis.weights[q];
                    }
                }
            }
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::stencil::AxisLayout;

    #[test]
    fn identity_stiffness_is_q1_laplacian() {
        let layout = Layout::new(vec![AxisLayout::dirichlet(4, 1.0); 2]);
        let c = Coefficients::Homogenized(Tensor::identity(2, 1));
        let op = assemble_stiffness(&layout, &c);
        let mid = layout.linear([1, 1, 0]);
        let k = &op.stiffness()[mid * 9..mid * 9 + 9];
        for (o, v) in k.iter().enumerate() {
            let e = if o == 4 { 8.0 / 3.0 } else { -1.0 / 3.0 };
            assert!((v - e).abs() < 1e-14);
        }
        // corner unknown keeps only in-range couplings
        let k0 = &op.stiffness()[0..9];
        assert!((k0[4] - 8.0 / 3.0).abs() < 1e-14);
        assert_eq!(k0[0], 0.0);
    }

    #[test]
    fn gauss_rules_integrate_polynomials() {
        for n in 1..=3 {
            let r = Rule1d::gauss(n);
            let deg = 2 * n - 1;
            let exact = 1.0 / (deg as f64 + 1.0);
            let q: f64 = r.points.iter().zip(&r.weights).map(|(p, w)| w * p.powi(deg as i32)).sum();
            assert!((q - exact).abs() < 1e-15);
        }
    }

    #[test]
    fn element_mass_matches_stencil_weights() {
        let layout = Layout::new(vec![AxisLayout::periodic(8, 1.0), AxisLayout::periodic(8, 2.0)]);
        let me = element_mass(&layout);
        let total: f64 = me.iter().sum();
        assert!((total - (1.0 / 8.0) * (2.0 / 8.0)).abs() < 1e-15);
        let x = vec![Complex64::new(1.0, 0.0); layout.num_nodes()];
        let op = StencilOp::zeros(layout.clone(), 1);
        let mut y = vec![Complex64::new(0.0, 0.0); layout.num_nodes()];
        op.apply_mass(&x, &mut y);
        let full: Vec<Complex64> = vec![Complex64::new(1.0, 0.0); 81];
        let l = load_vector(&layout, 1, Some(&full), None);
        for (a, b) in y.iter().zip(&l) {
            assert!((a - b).norm() < 1e-15);
        }
    }
}

/// Element-averaged nodal gradients on a periodic or closed lattice.
///
/// Each cell contributes its centroid gradient to its corners; nodes take the
/// mean over adjacent cells. Output is `[node][α * d + k]`.
pub fn nodal_gradients<T: crate::linalg::Scalar>(layout: &Layout, m: usize, values: &[T]) -> Vec<T> {
    let d = layout.dim();
    let n = 1 << d;
    let nn = layout.num_nodes();
    let h: Vec<f64> = (0..d).map(|k| layout.axis(k).h).collect();
    let centre = ElementBasis::at_points(d, &h, vec![[0.5; 3]], vec![1.0]);
    let mut out = vec![T::zero(); nn * m * d];
    let mut count = vec![0u32; nn];
    let mut g = vec![T::zero(); m * d];
    for_each_element(layout, |el| {
        if el.unknowns[..n].iter().any(|&u| u == NONE) {
            return;
        }
        g.iter_mut().for_each(|v| *v = T::zero());
        for a in 0..n {
            let u = el.unknowns[a];
            for al in 0..m {
                let v = values[u * m + al];
                for k in 0..d {
                    g[al * d + k] += v.scale(centre.grad(0, a, k));
                }
            }
        }
        for a in 0..n {
            let u = el.unknowns[a];
            count[u] += 1;
            for c in 0..m * d {
                out[u * m * d + c] += g[c];
            }
        }
    });
    for (u, &c) in count.iter().enumerate() {
        if c > 0 {
            let inv = 1.0 / c as f64;
            for v in &mut out[u * m * d..(u + 1) * m * d] {
                *v = v.scale(inv);
            }
        }
    }
    out
}
