//! Geometric multigrid with multilinear transfers and Galerkin coarse operators.

use super::dense::DenseLu;
use super::stencil::{AxisLayout, Layout, StencilOp, NONE};
use super::{project_mean, Scalar};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MgOptions {
    pub pre_sweeps: usize,
    pub post_sweeps: usize,
    /// Coarsest levels up to this many unknowns are factored densely.
    pub coarse_direct_max: usize,
    pub coarse_sweeps: usize,
}

impl Default for MgOptions {
    fn default() -> Self {
        Self {
            pre_sweeps: 2,
            post_sweeps: 2,
            coarse_direct_max: 3000,
            coarse_sweeps: 40,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Parent {
    full: isize,
    weight: f64,
}

fn parents_full(f: isize) -> [Option<Parent>; 2] {
    if f % 2 == 0 {
        [Some(Parent { full: f / 2, weight: 1.0 }), None]
    } else {
        [
            Some(Parent {
                full: (f - 1) / 2,
                weight: 0.5,
            }),
            Some(Parent {
                full: (f + 1) / 2,
                weight: 0.5,
            }),
        ]
    }
}

/// Coarse parents of a fine lattice point: (coarse node, coarse lattice coords, weight).
fn node_parents(
    coarse: &Layout,
    full: [isize; 3],
    out: &mut Vec<(usize, [isize; 3], f64)>,
) {
    out.clear();
    let d = coarse.dim();
    let mut per_axis: [[Option<(usize, isize, f64)>; 2]; 3] = [[None; 2]; 3];
    for k in 0..3 {
        if k >= d {
            per_axis[k] = [Some((0, 0, 1.0)), None];
            continue;
        }
        let ax: &AxisLayout = coarse.axis(k);
        for (slot, p) in parents_full(full[k]).iter().enumerate() {
            if let Some(p) = p {
                if let Some(u) = ax.unknown_of(p.full) {
                    per_axis[k][slot] = Some((u, p.full, p.weight));
                }
            }
        }
    }
    for pz in per_axis[2].iter().flatten() {
        for py in per_axis[1].iter().flatten() {
            for px in per_axis[0].iter().flatten() {
                let idx = coarse.linear([px.0, py.0, pz.0]);
                out.push((idx, [px.1, py.1, pz.1], px.2 * py.2 * pz.2));
            }
        }
    }
}

/// Multilinear prolongation between two nested lattices.
#[derive(Clone, Debug)]
pub struct Transfer {
    // fine node -> up to 2^d (coarse node, weight)
    offsets: Vec<u32>,
    entries: Vec<(usize, f64)>,
}

impl Transfer {
    pub fn new(fine: &Layout, coarse: &Layout) -> Self {
        let n = fine.num_nodes();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut entries = Vec::with_capacity(n * 4);
        let mut buf = Vec::new();
        offsets.push(0);
        for i in 0..n {
            let c = fine.coords(i);
            let full = full_coords(fine, c);
            node_parents(coarse, full, &mut buf);
            for &(idx, _, w) in &buf {
                entries.push((idx, w));
            }
            offsets.push(entries.len() as u32);
        }
        Self { offsets, entries }
    }

    /// `fine += P coarse`.
    pub fn prolong_add<T: Scalar>(&self, m: usize, coarse: &[T], fine: &mut [T]) {
        let n = self.offsets.len() - 1;
        for i in 0..n {
            let (a, b) = (self.offsets[i] as usize, self.offsets[i + 1] as usize);
            for &(j, w) in &self.entries[a..b] {
                for c in 0..m {
                    fine[i * m + c] += coarse[j * m + c].scale(w);
                }
            }
        }
    }

    /// `coarse = Pᵀ fine`.
    pub fn restrict<T: Scalar>(&self, m: usize, fine: &[T], coarse: &mut [T]) {
        coarse.iter_mut().for_each(|v| *v = T::zero());
        let n = self.offsets.len() - 1;
        for i in 0..n {
            let (a, b) = (self.offsets[i] as usize, self.offsets[i + 1] as usize);
            for &(j, w) in &self.entries[a..b] {
                for c in 0..m {
                    coarse[j * m + c] += fine[i * m + c].scale(w);
                }
            }
        }
    }
}

fn full_coords(l: &Layout, c: [usize; 3]) -> [isize; 3] {
    let mut f = [0isize; 3];
    for k in 0..l.dim() {
        f[k] = l.axis(k).full_of(c[k]) as isize;
    }
    f
}

/// Galerkin product `Pᵀ K P` of the stiffness stencil.
pub fn galerkin_coarse(fine: &StencilOp, coarse_layout: Layout) -> StencilOp {
    let m = fine.components();
    let mm = m * m;
    let fl = fine.layout();
    let s = fl.stencil_size();
    let mut coarse = StencilOp::zeros(coarse_layout, m);
    let kf = fine.stiffness();
    let mut pi = Vec::new();
    let mut pj = Vec::new();
    {
        let cl = coarse.layout().clone();
        let kc = coarse.stiffness_mut();
        fl.for_each_row(false, |i, nb| {
            let c = fl.coords(i);
            let f = full_coords(fl, c);
            node_parents(&cl, f, &mut pi);
            if pi.is_empty() {
                return;
            }
            for o in 0..s {
                if nb[o] == NONE {
                    continue;
                }
                let off = fl.offset_of(o);
                let g = [f[0] + off[0], f[1] + off[1], f[2] + off[2]];
                node_parents(&cl, g, &mut pj);
                let blk = &kf[(i * s + o) * mm..(i * s + o + 1) * mm];
                for &(ci, fi, wi) in &pi {
                    for &(_, fj, wj) in &pj {
                        let co = cl.offset_index([fj[0] - fi[0], fj[1] - fi[1], fj[2] - fi[2]]);
                        let w = wi * wj;
                        let dst = &mut kc[(ci * s + co) * mm..(ci * s + co + 1) * mm];
                        for (dv, &sv) in dst.iter_mut().zip(blk) {
                            *dv += w * sv;
                        }
                    }
                }
            }
        });
    }
    coarse
}

/// Operators and transfers on every level, finest first. Independent of the shift.
#[derive(Clone, Debug)]
pub struct Hierarchy {
    levels: Vec<StencilOp>,
    transfers: Vec<Transfer>,
    singular: bool,
}

impl Hierarchy {
    pub fn new(fine: StencilOp) -> Self {
        let singular = fine.layout().is_periodic();
        let mut levels = vec![fine];
        let mut transfers = Vec::new();
        while let Some(cl) = levels.last().unwrap().layout().coarsened() {
            let fine = levels.last().unwrap();
            transfers.push(Transfer::new(fine.layout(), &cl));
            let coarse = galerkin_coarse(fine, cl);
            levels.push(coarse);
        }
        Self {
            levels,
            transfers,
            singular,
        }
    }

    pub fn finest(&self) -> &StencilOp {
        &self.levels[0]
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, l: usize) -> &StencilOp {
        &self.levels[l]
    }

    /// Whether the unshifted operator annihilates constants (fully periodic lattice).
    pub fn is_periodic(&self) -> bool {
        self.singular
    }
}

enum Coarse<T> {
    Direct(DenseLu<T>),
    Sweeps,
}

/// A V-cycle preconditioner for `K − λ M`, symmetric in the real-symmetric sense.
pub struct VCycle<'a, T: Scalar> {
    h: &'a Hierarchy,
    lambda: T,
    opts: MgOptions,
    dinv: Vec<Vec<T>>,
    coarse: Coarse<T>,
    project: bool,
    work: Vec<(Vec<T>, Vec<T>, Vec<T>)>,
}

impl<'a, T: Scalar> VCycle<'a, T> {
    pub fn new(h: &'a Hierarchy, lambda: T, opts: MgOptions) -> Result<Self> {
        let dinv: Vec<Vec<T>> = h.levels.iter().map(|l| l.diagonal_inverses(lambda)).collect();
        let last = h.levels.last().unwrap();
        let project = h.singular && lambda.abs2() == 0.0;
        let coarse = if last.len() <= opts.coarse_direct_max {
            let n = last.len();
            let dense = last.to_dense(lambda.to_c64());
            let mut a: Vec<T> = dense.into_iter().map(T::from_c64_lossy).collect();
            if project {
                let m = last.components();
                let diag = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
                let c = diag / (n / m) as f64;
                for i in 0..n {
                    for j in 0..n {
                        if i % m == j % m {
                            a[i * n + j] += T::from_real(c);
                        }
                    }
                }
            }
            Coarse::Direct(DenseLu::factor(a, n)?)
        } else {
            Coarse::Sweeps
        };
        let work = h
            .levels
            .iter()
            .map(|l| (vec![T::zero(); l.len()], vec![T::zero(); l.len()], vec![T::zero(); l.len()]))
            .collect();
        Ok(Self {
            h,
            lambda,
            opts,
            dinv,
            coarse,
            project,
            work,
        })
    }

    /// `z = B r` with one V-cycle from a zero initial guess.
    pub fn apply(&mut self, r: &[T], z: &mut [T]) {
        {
            let (b, _, _) = &mut self.work[0];
            b.copy_from_slice(r);
        }
        self.cycle(0);
        z.copy_from_slice(&self.work[0].1);
        if self.project {
            project_mean(z, self.h.levels[0].components());
        }
    }

    fn cycle(&mut self, l: usize) {
        let h = self.h;
        let nl = h.levels.len();
        let op = &h.levels[l];
        let m = op.components();
        let lambda = self.lambda;
        if l == nl - 1 {
            let (b, x, _) = &mut self.work[l];
            match &self.coarse {
                Coarse::Direct(lu) => {
                    let sol = lu.solve(b);
                    x.copy_from_slice(&sol);
                }
                Coarse::Sweeps => {
                    x.iter_mut().for_each(|v| *v = T::zero());
                    for s in 0..self.opts.coarse_sweeps {
                        op.gauss_seidel(lambda, &self.dinv[l], b, x, s % 2 == 1);
                    }
                }
            }
            if self.project {
                project_mean(x, m);
            }
            return;
        }
        {
            let (b, x, r) = &mut self.work[l];
            x.iter_mut().for_each(|v| *v = T::zero());
            for _ in 0..self.opts.pre_sweeps {
                op.gauss_seidel(lambda, &self.dinv[l], b, x, false);
            }
            op.apply(lambda, x, r);
            for (ri, &bi) in r.iter_mut().zip(b.iter()) {
                *ri = bi - *ri;
            }
        }
        {
            let (lo, hi) = self.work.split_at_mut(l + 1);
            let r = &lo[l].2;
            let bc = &mut hi[0].0;
            h.transfers[l].restrict(m, r, bc);
            if self.project {
                project_mean(bc, m);
            }
        }
        self.cycle(l + 1);
        {
            let (lo, hi) = self.work.split_at_mut(l + 1);
            let xc = &hi[0].1;
            let x = &mut lo[l].1;
            h.transfers[l].prolong_add(m, xc, x);
        }
        let (b, x, _) = &mut self.work[l];
        for _ in 0..self.opts.post_sweeps {
            op.gauss_seidel(lambda, &self.dinv[l], b, x, true);
        }
    }
}

trait FromC64Lossy {
    fn from_c64_lossy(z: num_complex::Complex64) -> Self;
}

impl<T: Scalar> FromC64Lossy for T {
    fn from_c64_lossy(z: num_complex::Complex64) -> Self {
        if T::IS_REAL {
            T::from_real(z.re)
        } else {
            T::from_c64(z)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::stencil::AxisLayout;

    fn laplacian(layout: Layout) -> StencilOp {
        // Q1 Laplacian on a uniform square lattice: 8/3 center, -1/3 neighbors.
        let s = layout.stencil_size();
        let n = layout.num_nodes();
        let mut k = vec![-1.0 / 3.0; n * s];
        for i in 0..n {
            k[i * s + layout.center_offset()] = 8.0 / 3.0;
        }
        StencilOp::from_parts(layout, 1, k)
    }

    #[test]
    fn galerkin_of_q1_laplacian_is_q1_laplacian() {
        let fine = laplacian(Layout::new(vec![AxisLayout::dirichlet(16, 1.0); 2]));
        let h = Hierarchy::new(fine);
        assert!(h.num_levels() >= 3);
        let c = h.level(1);
        let s = c.layout().stencil_size();
        let mid = c.layout().linear([3, 3, 0]);
        for o in 0..s {
            let v = c.stiffness()[mid * s + o];
            let e = if o == 4 { 8.0 / 3.0 } else { -1.0 / 3.0 };
            assert!((v - e).abs() < 1e-13, "offset {o}: {v}");
        }
    }

    #[test]
    fn prolong_is_transpose_of_restrict() {
        let fine = Layout::new(vec![AxisLayout::periodic(8, 1.0); 2]);
        let coarse = fine.coarsened().unwrap();
        let t = Transfer::new(&fine, &coarse);
        let xc: Vec<f64> = (0..coarse.num_nodes()).map(|i| (i as f64 * 0.37).sin()).collect();
        let yf: Vec<f64> = (0..fine.num_nodes()).map(|i| (i as f64 * 0.11).cos()).collect();
        let mut px = vec![0.0; fine.num_nodes()];
        t.prolong_add(1, &xc, &mut px);
        let mut ry = vec![0.0; coarse.num_nodes()];
        t.restrict(1, &yf, &mut ry);
        let lhs: f64 = px.iter().zip(&yf).map(|(a, b)| a * b).sum();
        let rhs: f64 = xc.iter().zip(&ry).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
