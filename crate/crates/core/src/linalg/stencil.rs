//! Matrix-free structured stencils on tensor-product node lattices.
//!
//! Unknowns are the nodes of a lattice that is periodic or carries
//! eliminated (Dirichlet) boundary nodes per axis. The stiffness part is
//! stored per row as `3^d` real `m × m` blocks; the consistent Q1 mass is a
//! tensor product of `h·[1/6, 2/3, 1/6]` and is applied from weights.

use num_complex::Complex64;

use super::Scalar;

pub const NONE: usize = usize::MAX;

/// How an axis treats its end points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AxisKind {
    /// Indices wrap; `cells` unknowns.
    Periodic,
    /// End points are eliminated; `cells − 1` unknowns.
    Dirichlet,
    /// Every lattice point is a node, end points included; `cells + 1` nodes.
    Closed,
}

/// One axis of a node lattice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisLayout {
    pub cells: usize,
    pub kind: AxisKind,
    pub h: f64,
}

impl AxisLayout {
    pub fn dirichlet(cells: usize, length: f64) -> Self {
        Self {
            cells,
            kind: AxisKind::Dirichlet,
            h: length / cells as f64,
        }
    }

    pub fn periodic(cells: usize, length: f64) -> Self {
        Self {
            cells,
            kind: AxisKind::Periodic,
            h: length / cells as f64,
        }
    }

    pub fn closed(cells: usize, length: f64) -> Self {
        Self {
            cells,
            kind: AxisKind::Closed,
            h: length / cells as f64,
        }
    }

    pub fn is_periodic(&self) -> bool {
        self.kind == AxisKind::Periodic
    }

    pub fn unknowns(&self) -> usize {
        match self.kind {
            AxisKind::Periodic => self.cells,
            AxisKind::Dirichlet => self.cells - 1,
            AxisKind::Closed => self.cells + 1,
        }
    }

    /// Lattice index (0..=cells) of an unknown.
    #[inline]
    pub fn full_of(&self, u: usize) -> usize {
        match self.kind {
            AxisKind::Dirichlet => u + 1,
            _ => u,
        }
    }

    /// Unknown carried by a lattice index, if any.
    #[inline]
    pub fn unknown_of(&self, full: isize) -> Option<usize> {
        let c = self.cells as isize;
        match self.kind {
            AxisKind::Periodic => Some(full.rem_euclid(c) as usize),
            AxisKind::Dirichlet if full >= 1 && full <= c - 1 => Some(full as usize - 1),
            AxisKind::Closed if full >= 0 && full <= c => Some(full as usize),
            _ => None,
        }
    }

    fn neighbor_table(&self) -> Vec<usize> {
        let n = self.unknowns();
        let mut t = vec![NONE; 3 * n];
        for u in 0..n {
            let f = self.full_of(u) as isize;
            for o in -1..=1isize {
                if let Some(v) = self.unknown_of(f + o) {
                    t[3 * u + (o + 1) as usize] = v;
                }
            }
        }
        t
    }

    /// 1D consistent mass weight for an offset in {-1, 0, 1}.
    #[inline]
    pub fn mass_weight(&self, o: isize) -> f64 {
        if o == 0 {
            2.0 * self.h / 3.0
        } else {
            self.h / 6.0
        }
    }
}

/// Tensor-product lattice of unknowns, x fastest.
#[derive(Clone, Debug)]
pub struct Layout {
    d: usize,
    axes: Vec<AxisLayout>,
    counts: [usize; 3],
    tables: [Vec<usize>; 3],
}

impl PartialEq for Layout {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d && self.axes == other.axes
    }
}

impl Layout {
    pub fn new(axes: Vec<AxisLayout>) -> Self {
        let d = axes.len();
        assert!(d == 2 || d == 3, "lattice dimension must be 2 or 3");
        let mut counts = [1usize; 3];
        let mut tables: [Vec<usize>; 3] = [vec![NONE, 0, NONE], vec![NONE, 0, NONE], vec![NONE, 0, NONE]];
        for (k, ax) in axes.iter().enumerate() {
            counts[k] = ax.unknowns();
            tables[k] = ax.neighbor_table();
        }
        Self {
            d,
            axes,
            counts,
            tables,
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn axes(&self) -> &[AxisLayout] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &AxisLayout {
        &self.axes[k]
    }

    pub fn counts(&self) -> [usize; 3] {
        self.counts
    }

    pub fn num_nodes(&self) -> usize {
        self.counts.iter().product()
    }

    /// Number of stencil offsets, `3^d`.
    pub fn stencil_size(&self) -> usize {
        3usize.pow(self.d as u32)
    }

    pub fn is_periodic(&self) -> bool {
        self.axes.iter().all(|a| a.is_periodic())
    }

    #[inline]
    pub fn linear(&self, c: [usize; 3]) -> usize {
        (c[2] * self.counts[1] + c[1]) * self.counts[0] + c[0]
    }

    #[inline]
    pub fn coords(&self, i: usize) -> [usize; 3] {
        let nx = self.counts[0];
        let ny = self.counts[1];
        [i % nx, (i / nx) % ny, i / (nx * ny)]
    }

    /// Offset index of a displacement with entries in {-1, 0, 1}.
    #[inline]
    pub fn offset_index(&self, o: [isize; 3]) -> usize {
        let mut idx = 0usize;
        let mut w = 1usize;
        for k in 0..self.d {
            idx += (o[k] + 1) as usize * w;
            w *= 3;
        }
        idx
    }

    /// Inverse of [`Layout::offset_index`].
    #[inline]
    pub fn offset_of(&self, idx: usize) -> [isize; 3] {
        let mut o = [0isize; 3];
        let mut r = idx;
        for k in 0..self.d {
            o[k] = (r % 3) as isize - 1;
            r /= 3;
        }
        o
    }

    pub fn center_offset(&self) -> usize {
        (self.stencil_size() - 1) / 2
    }

    /// Fill `out[o]` with the neighbor of node `c` at offset `o`, or [`NONE`].
    #[inline]
    pub fn neighbors(&self, c: [usize; 3], out: &mut [usize; 27]) {
        let nx = self.counts[0];
        let ny = self.counts[1];
        let tx = &self.tables[0][3 * c[0]..3 * c[0] + 3];
        let ty = &self.tables[1][3 * c[1]..3 * c[1] + 3];
        if self.d == 2 {
            let base = c[2] * nx * ny;
            for oy in 0..3 {
                let yy = ty[oy];
                for ox in 0..3 {
                    let xx = tx[ox];
                    out[oy * 3 + ox] = if yy == NONE || xx == NONE {
                        NONE
                    } else {
                        base + yy * nx + xx
                    };
                }
            }
        } else {
            let tz = &self.tables[2][3 * c[2]..3 * c[2] + 3];
            for oz in 0..3 {
                let zz = tz[oz];
                for oy in 0..3 {
                    let yy = ty[oy];
                    for ox in 0..3 {
                        let xx = tx[ox];
                        out[(oz * 3 + oy) * 3 + ox] = if zz == NONE || yy == NONE || xx == NONE {
                            NONE
                        } else {
                            (zz * ny + yy) * nx + xx
                        };
                    }
                }
            }
        }
    }

    /// Visit rows in lexicographic order, or reversed.
    #[inline]
    pub fn for_each_row<F: FnMut(usize, &[usize; 27])>(&self, reverse: bool, mut f: F) {
        let mut nb = [NONE; 27];
        let [nx, ny, nz] = self.counts;
        if !reverse {
            let mut i = 0;
            for z in 0..nz {
                for y in 0..ny {
                    for x in 0..nx {
                        self.neighbors([x, y, z], &mut nb);
                        f(i, &nb);
                        i += 1;
                    }
                }
            }
        } else {
            let mut i = nx * ny * nz;
            for z in (0..nz).rev() {
                for y in (0..ny).rev() {
                    for x in (0..nx).rev() {
                        i -= 1;
                        self.neighbors([x, y, z], &mut nb);
                        f(i, &nb);
                    }
                }
            }
        }
    }

    /// Tensor-product consistent mass weights per offset.
    pub fn mass_weights(&self) -> Vec<f64> {
        (0..self.stencil_size())
            .map(|o| {
                let off = self.offset_of(o);
                (0..self.d).map(|k| self.axes[k].mass_weight(off[k])).product()
            })
            .collect()
    }

    /// The lattice with every axis coarsened by two, if all cell counts allow it.
    pub fn coarsened(&self) -> Option<Layout> {
        let mut axes = Vec::with_capacity(self.d);
        for a in &self.axes {
            let min = match a.kind {
                AxisKind::Periodic => 8,
                AxisKind::Dirichlet => 4,
                AxisKind::Closed => return None,
            };
            if a.cells % 2 != 0 || a.cells < min {
                return None;
            }
            axes.push(AxisLayout {
                cells: a.cells / 2,
                kind: a.kind,
                h: a.h * 2.0,
            });
        }
        Some(Layout::new(axes))
    }
}

/// `(K − λ M)` on a lattice: real block stencil `K` plus the shifted consistent mass.
#[derive(Clone, Debug)]
pub struct StencilOp {
    layout: Layout,
    m: usize,
    k: Vec<f64>,
    mass: Vec<f64>,
}

impl StencilOp {
    pub fn zeros(layout: Layout, m: usize) -> Self {
        let s = layout.stencil_size();
        let n = layout.num_nodes();
        let mass = layout.mass_weights();
        Self {
            layout,
            m,
            k: vec![0.0; n * s * m * m],
            mass,
        }
    }

    pub fn from_parts(layout: Layout, m: usize, k: Vec<f64>) -> Self {
        assert_eq!(k.len(), layout.num_nodes() * layout.stencil_size() * m * m);
        let mass = layout.mass_weights();
        Self { layout, m, k, mass }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn components(&self) -> usize {
        self.m
    }

    /// Length of a vector on this operator's lattice.
    pub fn len(&self) -> usize {
        self.layout.num_nodes() * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stiffness(&self) -> &[f64] {
        &self.k
    }

    pub fn stiffness_mut(&mut self) -> &mut [f64] {
        &mut self.k
    }

    pub fn mass_weights(&self) -> &[f64] {
        &self.mass
    }

    #[inline]
    pub fn block_index(&self, node: usize, o: usize) -> usize {
        (node * self.layout.stencil_size() + o) * self.m * self.m
    }

    /// `y = (K − λ M) x`.
    pub fn apply<T: Scalar>(&self, lambda: T, x: &[T], y: &mut [T]) {
        let m = self.m;
        let s = self.layout.stencil_size();
        let lm: Vec<T> = self.mass.iter().map(|&w| lambda.scale(w)).collect();
        let k = &self.k;
        if m == 1 {
            self.layout.for_each_row(false, |i, nb| {
                let row = &k[i * s..(i + 1) * s];
                let mut acc = T::zero();
                for o in 0..s {
                    let j = nb[o];
                    if j != NONE {
                        let xj = x[j];
                        acc += xj.scale(row[o]) - lm[o] * xj;
                    }
                }
                y[i] = acc;
            });
        } else {
            let mm = m * m;
            self.layout.for_each_row(false, |i, nb| {
                let yi = &mut y[i * m..(i + 1) * m];
                yi.iter_mut().for_each(|v| *v = T::zero());
                for o in 0..s {
                    let j = nb[o];
                    if j == NONE {
                        continue;
                    }
                    let blk = &k[(i * s + o) * mm..(i * s + o + 1) * mm];
                    let xj = &x[j * m..(j + 1) * m];
                    for a in 0..m {
                        let mut acc = T::zero();
                        for b in 0..m {
                            acc += xj[b].scale(blk[a * m + b]);
                        }
                        yi[a] += acc - lm[o] * xj[a];
                    }
                }
            });
        }
    }

    /// `y = M x`.
    pub fn apply_mass<T: Scalar>(&self, x: &[T], y: &mut [T]) {
        let m = self.m;
        let s = self.layout.stencil_size();
        let w = &self.mass;
        self.layout.for_each_row(false, |i, nb| {
            for a in 0..m {
                let mut acc = T::zero();
                for o in 0..s {
                    let j = nb[o];
                    if j != NONE {
                        acc += x[j * m + a].scale(w[o]);
                    }
                }
                y[i * m + a] = acc;
            }
        });
    }

    /// Inverses of the diagonal blocks of `K − λ M`, row-major `m × m` each.
    pub fn diagonal_inverses<T: Scalar>(&self, lambda: T) -> Vec<T> {
        let m = self.m;
        let mm = m * m;
        let c = self.layout.center_offset();
        let lmc = lambda.scale(self.mass[c]);
        let n = self.layout.num_nodes();
        let mut out = vec![T::zero(); n * mm];
        let mut blk = vec![T::zero(); mm];
        for i in 0..n {
            let off = self.block_index(i, c);
            for a in 0..m {
                for b in 0..m {
                    blk[a * m + b] = T::from_real(self.k[off + a * m + b]);
                }
                blk[a * m + a] -= lmc;
            }
            super::dense::invert_small(&mut blk, m, &mut out[i * mm..(i + 1) * mm]);
        }
        out
    }

    /// One Gauss–Seidel sweep on `(K − λ M) x = b`, forward or backward.
    pub fn gauss_seidel<T: Scalar>(&self, lambda: T, dinv: &[T], b: &[T], x: &mut [T], backward: bool) {
        let m = self.m;
        let s = self.layout.stencil_size();
        let c = self.layout.center_offset();
        let lm: Vec<T> = self.mass.iter().map(|&w| lambda.scale(w)).collect();
        let k = &self.k;
        if m == 1 {
            self.layout.for_each_row(backward, |i, nb| {
                let row = &k[i * s..(i + 1) * s];
                let mut r = b[i];
                for o in 0..s {
                    let j = nb[o];
                    if o != c && j != NONE {
                        let xj = x[j];
                        r -= xj.scale(row[o]) - lm[o] * xj;
                    }
                }
                x[i] = dinv[i] * r;
            });
        } else {
            let mm = m * m;
            let mut r = vec![T::zero(); m];
            self.layout.for_each_row(backward, |i, nb| {
                r.copy_from_slice(&b[i * m..(i + 1) * m]);
                for o in 0..s {
                    let j = nb[o];
                    if o == c || j == NONE {
                        continue;
                    }
                    let blk = &k[(i * s + o) * mm..(i * s + o + 1) * mm];
                    for a in 0..m {
                        let mut acc = T::zero();
                        for bb in 0..m {
                            acc += x[j * m + bb].scale(blk[a * m + bb]);
                        }
                        r[a] -= acc - lm[o] * x[j * m + a];
                    }
                }
                let di = &dinv[i * mm..(i + 1) * mm];
                for a in 0..m {
                    let mut acc = T::zero();
                    for bb in 0..m {
                        acc += di[a * m + bb] * r[bb];
                    }
                    x[i * m + a] = acc;
                }
            });
        }
    }

    /// Dense `K − λ M`, row-major, for small lattices.
    pub fn to_dense(&self, lambda: Complex64) -> Vec<Complex64> {
        let n = self.len();
        let m = self.m;
        let s = self.layout.stencil_size();
        let mut a = vec![Complex64::new(0.0, 0.0); n * n];
        self.layout.for_each_row(false, |i, nb| {
            for o in 0..s {
                let j = nb[o];
                if j == NONE {
                    continue;
                }
                let off = self.block_index(i, o);
                for al in 0..m {
                    for be in 0..m {
                        a[(i * m + al) * n + j * m + be] += self.k[off + al * m + be];
                    }
                    a[(i * m + al) * n + j * m + al] -= lambda * self.mass[o];
                }
            }
        });
        a
    }

    /// Largest `|K_ij − K_ji|` over all stored couplings.
    pub fn stiffness_asymmetry(&self) -> f64 {
        let m = self.m;
        let s = self.layout.stencil_size();
        let mut worst = 0.0f64;
        let mut nbj = [NONE; 27];
        self.layout.for_each_row(false, |i, nb| {
            for o in 0..s {
                let j = nb[o];
                if j == NONE {
                    continue;
                }
                let off = self.layout.offset_of(o);
                let back = self.layout.offset_index([-off[0], -off[1], -off[2]]);
                self.layout.neighbors(self.layout.coords(j), &mut nbj);
                if nbj[back] != i {
                    continue;
                }
                let bij = self.block_index(i, o);
                let bji = self.block_index(j, back);
                for a in 0..m {
                    for b in 0..m {
                        let d = (self.k[bij + a * m + b] - self.k[bji + b * m + a]).abs();
                        worst = worst.max(d);
                    }
                }
            }
        });
        worst
    }
}
