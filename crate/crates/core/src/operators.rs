//! Global SEM operators on the σ-strip.
//!
//! Variable coefficients are folded in by collocation: `∫ N_i b f` is taken as
//! `∫ N_i I_P(b f)` with the exact mass matrix, so every weighted operator is
//! a reference matrix times a diagonal of nodal values.
//!
//! The weak divergence used by the pressure problem is
//!
//! ```text
//! Wdiv(G)_i = ∫ (∂x N_i + σx ∂σ N_i + ∂σ(σx) N_i) G1 + σz ∂σ N_i G2   dx* dσ
//! ```
//!
//! so that `∫ N_i ∇σ·G = -Wdiv(G)_i + ∮ N_i (Jᵀ n*)·G`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{fold_order, BandedLu, CsrMatrix, LinearOperator};
use crate::mesh::{BoundaryTag, Mesh};
use crate::reference_element::{apply_kron_first, apply_kron_second, Basis1d, Face, ReferenceElement};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dir {
    X,
    Sigma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Mass,
    Advection(Dir),
    /// Full `∫ b ∇N_i·∇N_j` in reference coordinates.
    Stiffness,
    StiffnessDir(Dir),
    /// `∮ b ∂_k N_j N_i n_k` over all exterior faces.
    Boundary(Dir),
}

#[derive(Debug, Clone)]
pub struct GlobalOperator {
    pub kind: OperatorKind,
    pub matrix: CsrMatrix,
}

/// 1D assembled mass on a conforming line of elements.
#[derive(Debug, Clone)]
pub struct Mass1d {
    pub n: usize,
    pub matrix: CsrMatrix,
    lu: BandedLu,
}

impl Mass1d {
    /// `sizes[e]` are element lengths; `wrap` joins the last node to the first.
    pub fn new(basis: &Basis1d, sizes: &[f64], wrap: bool) -> Result<Self> {
        let p = basis.p;
        let n = if wrap { sizes.len() * p } else { sizes.len() * p + 1 };
        let mut trip = Vec::new();
        for (e, &h) in sizes.iter().enumerate() {
            for a in 0..=p {
                for b in 0..=p {
                    trip.push(((e * p + a) % n, (e * p + b) % n, 0.5 * h * basis.mass[(a, b)]));
                }
            }
        }
        let matrix = CsrMatrix::from_triplets(n, n, &trip);
        let perm = if wrap { fold_order(n) } else { (0..n).collect() };
        let lu = BandedLu::factor(&matrix, Some(&perm))?;
        Ok(Self { n, matrix, lu })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        self.lu.solve_in_place(b);
    }
}

/// Operators on the free-surface trace (a 1D spectral element mesh).
#[derive(Debug, Clone)]
pub struct TraceOps {
    pub basis: Basis1d,
    pub n_el: usize,
    pub n: usize,
    pub periodic: bool,
    pub sizes: Vec<f64>,
    pub x: Vec<f64>,
    pub mass: Mass1d,
    mr_dr: DMatrix<f64>,
}

impl TraceOps {
    pub fn new(mesh: &Mesh, el: &ReferenceElement) -> Result<Self> {
        let basis = el.bx.clone();
        let sizes: Vec<f64> = (0..mesh.spec.nx).map(|ex| mesh.elements[ex * mesh.spec.nz].dx()).collect();
        let mass = Mass1d::new(&basis, &sizes, mesh.periodic())?;
        let mr_dr = &basis.mass * &basis.diff;
        Ok(Self {
            n_el: sizes.len(),
            n: mass.n,
            periodic: mesh.periodic(),
            x: mesh.x_nodes.clone(),
            mr_dr,
            basis,
            sizes,
            mass,
        })
    }

    fn ids(&self, e: usize) -> impl Iterator<Item = usize> + '_ {
        let p = self.basis.p;
        (0..=p).map(move |a| (e * p + a) % self.n)
    }

    /// L² recovered derivative `M⁻¹ A_x f`.
    pub fn derivative(&self, f: &[f64]) -> Vec<f64> {
        let np = self.basis.n();
        let mut out = vec![0.0; self.n];
        let mut loc = vec![0.0; np];
        for e in 0..self.n_el {
            for (a, g) in self.ids(e).enumerate() {
                loc[a] = f[g];
            }
            for (a, g) in self.ids(e).enumerate() {
                let mut s = 0.0;
                for b in 0..np {
                    s += self.mr_dr[(a, b)] * loc[b];
                }
                out[g] += s;
            }
        }
        self.mass.solve_in_place(&mut out);
        out
    }

    /// L² projection of the broken product `a ∂x f`.
    pub fn project_advection(&self, a: &[f64], f: &[f64]) -> Vec<f64> {
        let np = self.basis.n();
        let p = self.basis.p;
        let mut out = vec![0.0; self.n];
        let mut loc = vec![0.0; np];
        for e in 0..self.n_el {
            for (k, g) in self.ids(e).enumerate() {
                loc[k] = f[g];
            }
            let rx = 2.0 / self.sizes[e];
            let prod: Vec<f64> = (0..np)
                .map(|i| {
                    let d: f64 = (0..np).map(|b| self.basis.diff[(i, b)] * loc[b]).sum();
                    a[(e * p + i) % self.n] * rx * d
                })
                .collect();
            let h2 = 0.5 * self.sizes[e];
            for (i, g) in self.ids(e).enumerate() {
                let s: f64 = (0..np).map(|b| self.basis.mass[(i, b)] * prod[b]).sum();
                out[g] += h2 * s;
            }
        }
        self.mass.solve_in_place(&mut out);
        out
    }

    /// `∫ f dx` on the trace.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        let mut y = vec![0.0; self.n];
        self.mass.matrix.matvec(f, &mut y);
        y.iter().sum()
    }

    /// Elementwise nodal filter, averaging shared nodes.
    pub fn filter(&self, f: &[f64], filt: &DMatrix<f64>) -> Vec<f64> {
        let np = self.basis.n();
        let mut out = vec![0.0; self.n];
        let mut count = vec![0.0; self.n];
        let mut loc = vec![0.0; np];
        for e in 0..self.n_el {
            for (k, g) in self.ids(e).enumerate() {
                loc[k] = f[g];
            }
            for (i, g) in self.ids(e).enumerate() {
                out[g] += (0..np).map(|b| filt[(i, b)] * loc[b]).sum::<f64>();
                count[g] += 1.0;
            }
        }
        out.iter_mut().zip(&count).for_each(|(o, c)| *o /= c);
        out
    }
}

/// Global mass `Mx ⊗ Mσ` with its tensor-product inverse.
#[derive(Debug, Clone)]
pub struct TensorMass {
    pub mx: Mass1d,
    pub ms: Mass1d,
}

impl TensorMass {
    pub fn new(mesh: &Mesh, el: &ReferenceElement) -> Result<Self> {
        let nz = mesh.spec.nz;
        let xs: Vec<f64> = (0..mesh.spec.nx).map(|ex| mesh.elements[ex * nz].dx()).collect();
        let ss: Vec<f64> = (0..nz).map(|ez| mesh.elements[ez].dsig()).collect();
        Ok(Self { mx: Mass1d::new(&el.bx, &xs, mesh.periodic())?, ms: Mass1d::new(&el.bz, &ss, false)? })
    }

    pub fn solve_in_place(&self, v: &mut [f64]) {
        let (nxn, nzn) = (self.mx.n, self.ms.n);
        for col in v.chunks_mut(nzn) {
            self.ms.solve_in_place(col);
        }
        let mut row = vec![0.0; nxn];
        for gz in 0..nzn {
            for gx in 0..nxn {
                row[gx] = v[gx * nzn + gz];
            }
            self.mx.solve_in_place(&mut row);
            for gx in 0..nxn {
                v[gx * nzn + gz] = row[gx];
            }
        }
    }
}

/// Metric coefficients entering the weak divergence (stage `k`).
#[derive(Debug, Clone, Copy)]
pub struct DivCoeffs<'a> {
    pub sx: &'a [f64],
    /// `∂σ(σx)` at fixed x*.
    pub sxs: &'a [f64],
    pub sz: &'a [f64],
}

/// Metric coefficients entering the gradient (stage `k - 1`).
#[derive(Debug, Clone, Copy)]
pub struct GradCoeffs<'a> {
    pub sx: &'a [f64],
    pub sz: &'a [f64],
}

/// The discretization context: reference element, mesh and the factored
/// mass operators used for L² recovery.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub el: ReferenceElement,
    pub mesh: Mesh,
    pub trace: TraceOps,
    pub mass: TensorMass,
    drt_mr: DMatrix<f64>,
    dst_ms: DMatrix<f64>,
}

/// Scratch buffers for element kernels.
#[derive(Debug, Clone)]
pub struct Work {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub e: Vec<f64>,
    pub f: Vec<f64>,
}

impl Work {
    pub fn new(n: usize) -> Self {
        let z = vec![0.0; n];
        Self { a: z.clone(), b: z.clone(), c: z.clone(), d: z.clone(), e: z.clone(), f: z }
    }
}

impl Discretization {
    pub fn new(el: ReferenceElement, mesh: Mesh) -> Result<Self> {
        if mesh.px != el.px || mesh.pz != el.pz {
            return Err(Error::InvalidMesh("mesh and element orders differ".into()));
        }
        let trace = TraceOps::new(&mesh, &el)?;
        let mass = TensorMass::new(&mesh, &el)?;
        let drt_mr = el.bx.diff.transpose() * &el.bx.mass;
        let dst_ms = el.bz.diff.transpose() * &el.bz.mass;
        Ok(Self { el, mesh, trace, mass, drt_mr, dst_ms })
    }

    pub fn n_nodes(&self) -> usize {
        self.mesh.n_nodes()
    }

    pub fn npe(&self) -> usize {
        self.el.n_nodes()
    }

    pub fn work(&self) -> Work {
        Work::new(self.npe())
    }

    fn kron(&self, ar: &DMatrix<f64>, as_: &DMatrix<f64>, f: &[f64], tmp: &mut [f64], out: &mut [f64]) {
        apply_kron_second(as_, self.el.nx(), f, tmp);
        apply_kron_first(ar, self.el.nz(), tmp, out);
    }

    /// Element-local reference derivatives `(∂x* f, ∂σ f)`.
    pub fn local_grad(&self, e: usize, f: &[f64], fx: &mut [f64], fs: &mut [f64]) {
        let g = &self.mesh.elements[e];
        self.el.apply_r(&self.el.bx.diff, f, fx);
        self.el.apply_s(&self.el.bz.diff, f, fs);
        fx.iter_mut().for_each(|v| *v *= g.rx);
        fs.iter_mut().for_each(|v| *v *= g.ssig);
    }

    /// `out += |J| M f` on element `e`.
    pub fn local_mass_add(&self, e: usize, f: &[f64], w: &mut Work, out: &mut [f64]) {
        let detj = self.mesh.elements[e].detj;
        self.kron(&self.el.bx.mass, &self.el.bz.mass, f, &mut w.e, &mut w.f);
        for (o, v) in out.iter_mut().zip(&w.f) {
            *o += detj * v;
        }
    }

    /// Element weak divergence of local `(g1, g2)` with local coefficients.
    #[allow(clippy::too_many_arguments)]
    pub fn local_wdiv(
        &self,
        e: usize,
        g1: &[f64],
        g2: &[f64],
        sx: &[f64],
        sxs: &[f64],
        sz: &[f64],
        w: &mut Work,
        out: &mut [f64],
    ) {
        let g = &self.mesh.elements[e];
        let n = self.npe();
        for k in 0..n {
            w.c[k] = sx[k] * g1[k] + sz[k] * g2[k];
            w.d[k] = sxs[k] * g1[k];
        }
        self.kron(&self.drt_mr, &self.el.bz.mass, g1, &mut w.e, &mut w.f);
        for k in 0..n {
            out[k] = g.rx * w.f[k];
        }
        self.kron(&self.el.bx.mass, &self.dst_ms, &w.c, &mut w.e, &mut w.f);
        for k in 0..n {
            out[k] += g.ssig * w.f[k];
        }
        self.kron(&self.el.bx.mass, &self.el.bz.mass, &w.d, &mut w.e, &mut w.f);
        for k in 0..n {
            out[k] = g.detj * (out[k] + w.f[k]);
        }
    }

    fn gather(&self, e: usize, global: &[f64], local: &mut [f64]) {
        for (l, &g) in local.iter_mut().zip(self.mesh.ids(e)) {
            *l = global[g];
        }
    }

    /// Global weak divergence of a nodal (continuous) vector field.
    pub fn weak_divergence(&self, c: DivCoeffs, g1: &[f64], g2: &[f64]) -> Vec<f64> {
        let n = self.npe();
        let mut out = vec![0.0; self.n_nodes()];
        let mut w = self.work();
        let mut l = vec![vec![0.0; n]; 6];
        for e in 0..self.mesh.n_elements() {
            let ids = self.mesh.ids(e);
            for (k, &gid) in ids.iter().enumerate() {
                l[0][k] = g1[gid];
                l[1][k] = g2[gid];
                l[2][k] = c.sx[gid];
                l[3][k] = c.sxs[gid];
                l[4][k] = c.sz[gid];
            }
            let (head, tail) = l.split_at_mut(5);
            self.local_wdiv(e, &head[0], &head[1], &head[2], &head[3], &head[4], &mut w, &mut tail[0]);
            for (k, &gid) in ids.iter().enumerate() {
                out[gid] += tail[0][k];
            }
        }
        out
    }

    /// `Wdiv^k(∇^{k-1} f)` with the broken (elementwise) gradient.
    pub fn apply_mixed(&self, ck: DivCoeffs, cm: GradCoeffs, f: &[f64], out: &mut [f64]) {
        let n = self.npe();
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut w = self.work();
        let mut fl = vec![0.0; n];
        let (mut fx, mut fs) = (vec![0.0; n], vec![0.0; n]);
        let (mut g1, mut g2) = (vec![0.0; n], vec![0.0; n]);
        let (mut sx, mut sxs, mut sz) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut res = vec![0.0; n];
        for e in 0..self.mesh.n_elements() {
            let ids = self.mesh.ids(e);
            for (k, &gid) in ids.iter().enumerate() {
                fl[k] = f[gid];
                sx[k] = ck.sx[gid];
                sxs[k] = ck.sxs[gid];
                sz[k] = ck.sz[gid];
            }
            self.local_grad(e, &fl, &mut fx, &mut fs);
            for (k, &gid) in ids.iter().enumerate() {
                g1[k] = fx[k] + cm.sx[gid] * fs[k];
                g2[k] = cm.sz[gid] * fs[k];
            }
            self.local_wdiv(e, &g1, &g2, &sx, &sxs, &sz, &mut w, &mut res);
            for (k, &gid) in ids.iter().enumerate() {
                out[gid] += res[k];
            }
        }
    }

    /// Boundary flux `∮ N_i (Jᵀ n*)·G` over faces with the given tags, using
    /// stage coefficients `c` for `Jᵀ`.
    pub fn boundary_flux(&self, c: GradCoeffs, g1: &[f64], g2: &[f64], tags: &[BoundaryTag]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_nodes()];
        for face in self.mesh.faces.iter().filter(|f| tags.contains(&f.tag)) {
            let ids = self.mesh.ids(face.elem);
            let loc = self.el.face_nodes(face.face);
            let m1 = match face.face {
                Face::Bottom | Face::Top => &self.el.bx.mass,
                Face::Left | Face::Right => &self.el.bz.mass,
            };
            let (nx, ns) = face.normal;
            let vals: Vec<f64> = loc
                .iter()
                .map(|&l| {
                    let gid = ids[l];
                    (nx + c.sx[gid] * ns) * g1[gid] + c.sz[gid] * ns * g2[gid]
                })
                .collect();
            for (a, &la) in loc.iter().enumerate() {
                let s: f64 = (0..loc.len()).map(|b| m1[(a, b)] * vals[b]).sum();
                out[ids[la]] += face.sjac * s;
            }
        }
        out
    }

    /// Broken-gradient boundary flux `∮ N_i (Jᵀ n*)·∇f` computed elementwise.
    pub fn boundary_flux_of_grad(&self, c: GradCoeffs, f: &[f64], tags: &[BoundaryTag]) -> Vec<f64> {
        let n = self.npe();
        let mut out = vec![0.0; self.n_nodes()];
        let (mut fl, mut fx, mut fs) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for face in self.mesh.faces.iter().filter(|f| tags.contains(&f.tag)) {
            let ids = self.mesh.ids(face.elem);
            self.gather(face.elem, f, &mut fl);
            self.local_grad(face.elem, &fl, &mut fx, &mut fs);
            let loc = self.el.face_nodes(face.face);
            let m1 = match face.face {
                Face::Bottom | Face::Top => &self.el.bx.mass,
                Face::Left | Face::Right => &self.el.bz.mass,
            };
            let (nx, ns) = face.normal;
            let vals: Vec<f64> = loc
                .iter()
                .map(|&l| {
                    let gid = ids[l];
                    let g1 = fx[l] + c.sx[gid] * fs[l];
                    let g2 = c.sz[gid] * fs[l];
                    (nx + c.sx[gid] * ns) * g1 + c.sz[gid] * ns * g2
                })
                .collect();
            for (a, &la) in loc.iter().enumerate() {
                let s: f64 = (0..loc.len()).map(|b| m1[(a, b)] * vals[b]).sum();
                out[ids[la]] += face.sjac * s;
            }
        }
        out
    }

    /// L² recovered derivative, `M g = A_k f`.
    pub fn l2_gradient(&self, f: &[f64], dir: Dir) -> Vec<f64> {
        let n = self.npe();
        let mut out = vec![0.0; self.n_nodes()];
        let mut w = self.work();
        let (mut fl, mut fx, mut fs) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut acc = vec![0.0; n];
        for e in 0..self.mesh.n_elements() {
            self.gather(e, f, &mut fl);
            self.local_grad(e, &fl, &mut fx, &mut fs);
            acc.iter_mut().for_each(|v| *v = 0.0);
            self.local_mass_add(e, if dir == Dir::X { &fx } else { &fs }, &mut w, &mut acc);
            for (k, &gid) in self.mesh.ids(e).iter().enumerate() {
                out[gid] += acc[k];
            }
        }
        self.mass.solve_in_place(&mut out);
        out
    }

    /// L² projection `M⁻¹ ∫ N_i I_P(q)` of an element-local (broken) field
    /// produced by `local(e, out)`.
    pub fn project_broken(&self, mut local: impl FnMut(usize, &mut [f64])) -> Vec<f64> {
        let n = self.npe();
        let mut out = vec![0.0; self.n_nodes()];
        let mut w = self.work();
        let mut q = vec![0.0; n];
        let mut acc = vec![0.0; n];
        for e in 0..self.mesh.n_elements() {
            local(e, &mut q);
            acc.iter_mut().for_each(|v| *v = 0.0);
            self.local_mass_add(e, &q, &mut w, &mut acc);
            for (k, &gid) in self.mesh.ids(e).iter().enumerate() {
                out[gid] += acc[k];
            }
        }
        self.mass.solve_in_place(&mut out);
        out
    }

    /// Applies `M⁻¹` in place.
    pub fn mass_solve(&self, v: &mut [f64]) {
        self.mass.solve_in_place(v);
    }

    fn new_pattern(&self) -> CsrMatrix {
        CsrMatrix::from_blocks(self.n_nodes(), self.mesh.global_ids.chunks(self.npe()))
    }

    /// Assembles a global matrix whose element blocks are obtained by
    /// applying `kernel(e, unit_column, out)` to each local unit vector.
    pub fn assemble_kernel(&self, mut kernel: impl FnMut(usize, &[f64], &mut [f64])) -> CsrMatrix {
        let n = self.npe();
        let mut a = self.new_pattern();
        let mut unit = vec![0.0; n];
        let mut col = vec![0.0; n];
        let mut block = vec![0.0; n * n];
        for e in 0..self.mesh.n_elements() {
            for j in 0..n {
                unit[j] = 1.0;
                kernel(e, &unit, &mut col);
                unit[j] = 0.0;
                for i in 0..n {
                    block[i * n + j] = col[i];
                }
            }
            a.add_block(self.mesh.ids(e), &block);
        }
        a
    }

    pub fn assemble_weighted(&self, kind: OperatorKind, b: &[f64]) -> Result<GlobalOperator> {
        if b.len() != self.n_nodes() {
            return Err(Error::ShapeMismatch { expected: self.n_nodes(), got: b.len() });
        }
        let n = self.npe();
        let mut w = self.work();
        let mut bl = vec![0.0; n];
        let (mut fx, mut fs, mut q) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let matrix = match kind {
            OperatorKind::Boundary(dir) => self.assemble_boundary(dir, b),
            _ => self.assemble_kernel(|e, f, out| {
                self.gather(e, b, &mut bl);
                out.iter_mut().for_each(|v| *v = 0.0);
                match kind {
                    OperatorKind::Mass => {
                        for k in 0..n {
                            q[k] = bl[k] * f[k];
                        }
                        self.local_mass_add(e, &q, &mut w, out);
                    }
                    OperatorKind::Advection(dir) => {
                        self.local_grad(e, f, &mut fx, &mut fs);
                        let d = if dir == Dir::X { &fx } else { &fs };
                        for k in 0..n {
                            q[k] = bl[k] * d[k];
                        }
                        self.local_mass_add(e, &q, &mut w, out);
                    }
                    OperatorKind::Stiffness | OperatorKind::StiffnessDir(_) => {
                        self.local_grad(e, f, &mut fx, &mut fs);
                        let zero = vec![0.0; n];
                        let (use_x, use_s) = match kind {
                            OperatorKind::StiffnessDir(Dir::X) => (true, false),
                            OperatorKind::StiffnessDir(Dir::Sigma) => (false, true),
                            _ => (true, true),
                        };
                        for k in 0..n {
                            fx[k] = if use_x { bl[k] * fx[k] } else { 0.0 };
                            fs[k] = if use_s { bl[k] * fs[k] } else { 0.0 };
                        }
                        let ones = vec![1.0; n];
                        self.local_wdiv(e, &fx, &fs, &zero, &zero, &ones, &mut w, &mut q);
                        out.copy_from_slice(&q);
                    }
                    OperatorKind::Boundary(_) => unreachable!(),
                }
            }),
        };
        Ok(GlobalOperator { kind, matrix })
    }

    fn assemble_boundary(&self, dir: Dir, b: &[f64]) -> CsrMatrix {
        let n = self.npe();
        let mut a = self.new_pattern();
        let mut block = vec![0.0; n * n];
        for face in &self.mesh.faces {
            let e = face.elem;
            let g = self.mesh.elements[e];
            let ids = self.mesh.ids(e);
            let loc = self.el.face_nodes(face.face);
            let m1 = match face.face {
                Face::Bottom | Face::Top => &self.el.bx.mass,
                Face::Left | Face::Right => &self.el.bz.mass,
            };
            let (d, scale, nk) = match dir {
                Dir::X => (&self.el.dr, g.rx, face.normal.0),
                Dir::Sigma => (&self.el.ds, g.ssig, face.normal.1),
            };
            block.iter_mut().for_each(|v| *v = 0.0);
            if nk != 0.0 {
                for (a_, &la) in loc.iter().enumerate() {
                    for (b_, &lb) in loc.iter().enumerate() {
                        let wgt = face.sjac * m1[(a_, b_)] * b[ids[lb]] * nk * scale;
                        for j in 0..n {
                            block[la * n + j] += wgt * d[(lb, j)];
                        }
                    }
                }
            }
            a.add_block(ids, &block);
        }
        a
    }

    /// Assembled `Wdiv^k ∘ ∇^{k-1}` (stiffness sign, no boundary conditions).
    pub fn assemble_mixed(&self, ck: DivCoeffs, cm: GradCoeffs) -> CsrMatrix {
        let n = self.npe();
        let mut w = self.work();
        let (mut fx, mut fs) = (vec![0.0; n], vec![0.0; n]);
        let (mut g1, mut g2) = (vec![0.0; n], vec![0.0; n]);
        let (mut sx, mut sxs, mut sz) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        self.assemble_kernel(|e, f, out| {
            let ids = self.mesh.ids(e);
            for (k, &gid) in ids.iter().enumerate() {
                sx[k] = ck.sx[gid];
                sxs[k] = ck.sxs[gid];
                sz[k] = ck.sz[gid];
            }
            self.local_grad(e, f, &mut fx, &mut fs);
            for (k, &gid) in ids.iter().enumerate() {
                g1[k] = fx[k] + cm.sx[gid] * fs[k];
                g2[k] = cm.sz[gid] * fs[k];
            }
            self.local_wdiv(e, &g1, &g2, &sx, &sxs, &sz, &mut w, out);
        })
    }

    /// Assembled boundary functional `f ↦ ∮ N_i (Jᵀ n*)·∇f` on the given tags.
    pub fn assemble_boundary_of_grad(&self, c: GradCoeffs, tags: &[BoundaryTag]) -> CsrMatrix {
        let n = self.npe();
        let mut a = self.new_pattern();
        let mut block = vec![0.0; n * n];
        let (mut fx, mut fs) = (vec![0.0; n], vec![0.0; n]);
        let mut unit = vec![0.0; n];
        for face in self.mesh.faces.iter().filter(|f| tags.contains(&f.tag)) {
            let e = face.elem;
            let ids = self.mesh.ids(e);
            let loc = self.el.face_nodes(face.face);
            let m1 = match face.face {
                Face::Bottom | Face::Top => &self.el.bx.mass,
                Face::Left | Face::Right => &self.el.bz.mass,
            };
            let (nx, ns) = face.normal;
            block.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..n {
                unit[j] = 1.0;
                self.local_grad(e, &unit, &mut fx, &mut fs);
                unit[j] = 0.0;
                let vals: Vec<f64> = loc
                    .iter()
                    .map(|&l| {
                        let gid = ids[l];
                        let g1 = fx[l] + c.sx[gid] * fs[l];
                        let g2 = c.sz[gid] * fs[l];
                        (nx + c.sx[gid] * ns) * g1 + c.sz[gid] * ns * g2
                    })
                    .collect();
                for (a_, &la) in loc.iter().enumerate() {
                    let s: f64 = (0..loc.len()).map(|b_| m1[(a_, b_)] * vals[b_]).sum();
                    block[la * n + j] += face.sjac * s;
                }
            }
            a.add_block(ids, &block);
        }
        a
    }
}

/// Matrix-free `Wdiv^k ∘ ∇^{k-1}` with identity rows and zeroed columns on
/// Dirichlet nodes.
pub struct MixedOperator<'a> {
    pub disc: &'a Discretization,
    pub ck: DivCoeffs<'a>,
    pub cm: GradCoeffs<'a>,
    pub dirichlet: &'a [bool],
}

impl LinearOperator for MixedOperator<'_> {
    fn dim(&self) -> usize {
        self.disc.n_nodes()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let xs: Vec<f64> = x
            .iter()
            .zip(self.dirichlet)
            .map(|(&v, &d)| if d { 0.0 } else { v })
            .collect();
        self.disc.apply_mixed(self.ck, self.cm, &xs, y);
        for ((yi, &xi), &d) in y.iter_mut().zip(x).zip(self.dirichlet) {
            if d {
                *yi = xi;
            }
        }
    }
}
