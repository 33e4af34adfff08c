//! Geometric p-multigrid for the pressure problem: order coarsening,
//! interpolation transfers, an overlapping additive Schwarz smoother and a
//! banded direct coarse solve, used as a preconditioner for defect
//! correction (PDC) or GMRES.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, fold_order, norm2, BandedLu, CsrMatrix, LinearOperator};
use crate::mesh::{Bathymetry, Mesh};
use crate::operators::Discretization;
use crate::reference_element::{interpolation_matrix, ReferenceElement};
use crate::sigma_transform::still_metrics;

/// `P_{n-1} = ceil((P_n + 1) / 2)`.
pub fn coarsen_order(p: usize) -> usize {
    (p + 2) / 2
}

/// Level orders from fine to coarse. When the directions differ, the larger
/// order is coarsened and clamped to the smaller one until they match.
pub fn level_orders(px: usize, pz: usize) -> Vec<(usize, usize)> {
    let mut out = vec![(px, pz)];
    let (mut a, mut b) = (px, pz);
    loop {
        let next = if a == b {
            let c = coarsen_order(a);
            (c, c)
        } else if a > b {
            (coarsen_order(a).max(b), b)
        } else {
            (a, coarsen_order(b).max(a))
        };
        if next == (a, b) {
            break;
        }
        (a, b) = next;
        out.push(next);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterMethod {
    Pdc,
    #[default]
    Gmres,
}

impl OuterMethod {
    pub fn name(&self) -> &'static str {
        match self {
            OuterMethod::Pdc => "pdc-mg",
            OuterMethod::Gmres => "gmres-mg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub method: OuterMethod,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_restart")]
    pub restart: usize,
    #[serde(default = "default_one")]
    pub nu1: usize,
    #[serde(default = "default_one")]
    pub nu2: usize,
    #[serde(default = "default_overlap")]
    pub overlap: usize,
    /// Start each stage solve from the previous stage pressure instead of zero.
    #[serde(default = "default_true")]
    pub warm_start: bool,
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    200
}

fn default_restart() -> usize {
    40
}

fn default_one() -> usize {
    1
}

fn default_overlap() -> usize {
    2
}

fn default_true() -> bool {
    true
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: OuterMethod::Gmres,
            tol: default_tol(),
            max_iter: default_max_iter(),
            restart: default_restart(),
            nu1: 1,
            nu2: 1,
            overlap: default_overlap(),
            warm_start: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidParameter(format!("solver tolerance must lie in (0, 1), got {}", self.tol)));
        }
        if self.max_iter == 0 || self.restart == 0 {
            return Err(Error::InvalidParameter("max_iter and restart must be positive".into()));
        }
        Ok(())
    }
}

/// Overlapping element blocks with dense inverses.
#[derive(Debug, Clone)]
pub struct AsmSmoother {
    pub blocks: Vec<Vec<usize>>,
    inv: Vec<Vec<f64>>,
    pub weight: Vec<f64>,
}

/// Global ids of element `e` extended by `overlap` node layers.
pub fn element_block(mesh: &Mesh, e: usize, overlap: usize) -> Vec<usize> {
    let g = &mesh.elements[e];
    let (px, pz) = (mesh.px as isize, mesh.pz as isize);
    let ov = overlap as isize;
    let nxn = mesh.nxn as isize;
    let nzn = mesh.nzn as isize;
    let mut ids = Vec::new();
    for gx in (g.ex as isize * px - ov)..=((g.ex as isize + 1) * px + ov) {
        let gx = if mesh.periodic() {
            gx.rem_euclid(nxn)
        } else if gx < 0 || gx >= nxn {
            continue;
        } else {
            gx
        };
        for gz in (g.ez as isize * pz - ov)..=((g.ez as isize + 1) * pz + ov) {
            if gz >= 0 && gz < nzn {
                ids.push((gx * nzn + gz) as usize);
            }
        }
    }
    ids.sort_unstable();
    ids.dedup();
    ids
}

impl AsmSmoother {
    pub fn build(a: &CsrMatrix, mesh: &Mesh, overlap: usize) -> Result<Self> {
        let n = a.n_rows();
        let mut blocks = Vec::with_capacity(mesh.n_elements());
        let mut inv = Vec::with_capacity(mesh.n_elements());
        let mut count = vec![0usize; n];
        for e in 0..mesh.n_elements() {
            let ids = element_block(mesh, e, overlap);
            let m = ids.len();
            let mut pos = std::collections::HashMap::with_capacity(m);
            for (k, &g) in ids.iter().enumerate() {
                pos.insert(g, k);
                count[g] += 1;
            }
            let mut block = DMatrix::zeros(m, m);
            for (i, &g) in ids.iter().enumerate() {
                let (cols, vals) = a.row(g);
                for (&c, &v) in cols.iter().zip(vals) {
                    if let Some(&j) = pos.get(&(c as usize)) {
                        block[(i, j)] = v;
                    }
                }
            }
            let bi = block.try_inverse().ok_or_else(|| Error::Singular(format!("smoother block of element {e}")))?;
            let mut flat = vec![0.0; m * m];
            for i in 0..m {
                for j in 0..m {
                    flat[i * m + j] = bi[(i, j)];
                }
            }
            inv.push(flat);
            blocks.push(ids);
        }
        if let Some(g) = count.iter().position(|&c| c == 0) {
            return Err(Error::InvalidMesh(format!("node {g} is not covered by any smoother block")));
        }
        let weight = count.iter().map(|&c| 1.0 / c as f64).collect();
        Ok(Self { blocks, inv, weight })
    }

    /// `out = W Σ R_iᵀ A_i⁻¹ R_i r`.
    pub fn apply(&self, r: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut loc = Vec::new();
        for (ids, inv) in self.blocks.iter().zip(&self.inv) {
            let m = ids.len();
            loc.clear();
            loc.extend(ids.iter().map(|&g| r[g]));
            for (i, &g) in ids.iter().enumerate() {
                let row = &inv[i * m..(i + 1) * m];
                out[g] += row.iter().zip(&loc).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        for (o, w) in out.iter_mut().zip(&self.weight) {
            *o *= w;
        }
    }
}

/// Interpolation from `coarse` to `fine` nodes on the same element mesh.
pub fn prolongation(coarse: &Discretization, fine: &Discretization) -> CsrMatrix {
    let interp = interpolation_matrix(&coarse.el, &fine.el);
    let mut seen = vec![false; fine.n_nodes()];
    let mut trip = Vec::new();
    for e in 0..fine.mesh.n_elements() {
        let fid = fine.mesh.ids(e);
        let cid = coarse.mesh.ids(e);
        for (i, &gf) in fid.iter().enumerate() {
            if seen[gf] {
                continue;
            }
            seen[gf] = true;
            for (j, &gc) in cid.iter().enumerate() {
                let v = interp[(i, j)];
                if v.abs() > 1e-15 {
                    trip.push((gf, gc, v));
                }
            }
        }
    }
    CsrMatrix::from_triplets(fine.n_nodes(), coarse.n_nodes(), &trip)
}

fn surface_mask(mesh: &Mesh) -> Vec<bool> {
    let mut d = vec![false; mesh.n_nodes()];
    for g in mesh.free_surface_trace() {
        d[g] = true;
    }
    d
}

/// Linearized (η = 0) pressure operator with identity rows on the surface.
pub fn linearized_operator(disc: &Discretization, bathy: &Bathymetry) -> Result<(CsrMatrix, Vec<bool>)> {
    let m = still_metrics(bathy, disc)?;
    let mut a = disc.assemble_mixed(m.div(), m.grad());
    let dir = surface_mask(&disc.mesh);
    a.apply_dirichlet(&dir);
    Ok((a, dir))
}

pub struct Level {
    pub px: usize,
    pub pz: usize,
    pub disc: Discretization,
    pub a: CsrMatrix,
    pub dirichlet: Vec<bool>,
    pub smoother: AsmSmoother,
    /// Transfer from the next coarser level into this one, with rows and
    /// columns of surface nodes removed.
    pub prolong: Option<CsrMatrix>,
    pub restrict: Option<CsrMatrix>,
}

pub struct MgHierarchy {
    pub levels: Vec<Level>,
    pub coarse: BandedLu,
    pub nu1: usize,
    pub nu2: usize,
}

impl MgHierarchy {
    /// Builds the ladder from the fine discretization by rediscretizing the
    /// linearized operator at each order.
    pub fn build(fine: &Discretization, bathy: &Bathymetry, cfg: &SolverConfig) -> Result<Self> {
        let orders = level_orders(fine.el.px, fine.el.pz);
        let mut discs = vec![fine.clone()];
        for &(px, pz) in &orders[1..] {
            let el = ReferenceElement::new(px, pz)?;
            let mesh = Mesh::build(&fine.mesh.spec, &el)?;
            discs.push(Discretization::new(el, mesh)?);
        }
        let mut levels = Vec::with_capacity(discs.len());
        let mut coarse = None;
        let nlev = discs.len();
        for l in 0..nlev {
            let (a, dirichlet) = linearized_operator(&discs[l], bathy)?;
            let smoother = AsmSmoother::build(&a, &discs[l].mesh, cfg.overlap)?;
            let (prolong, restrict) = if l + 1 < nlev {
                let mut p = prolongation(&discs[l + 1], &discs[l]);
                let cdir = surface_mask(&discs[l + 1].mesh);
                mask_transfer(&mut p, &dirichlet, &cdir);
                let r = p.transpose();
                (Some(p), Some(r))
            } else {
                let perm = if discs[l].mesh.periodic() {
                    let nzn = discs[l].mesh.nzn;
                    let f = fold_order(discs[l].mesh.nxn);
                    Some((0..a.n_rows()).map(|g| f[g / nzn] * nzn + g % nzn).collect::<Vec<_>>())
                } else {
                    None
                };
                coarse = Some(BandedLu::factor(&a, perm.as_deref())?);
                (None, None)
            };
            levels.push(Level {
                px: orders[l].0,
                pz: orders[l].1,
                disc: discs[l].clone(),
                a,
                dirichlet,
                smoother,
                prolong,
                restrict,
            });
        }
        Ok(Self { levels, coarse: coarse.expect("at least one level"), nu1: cfg.nu1, nu2: cfg.nu2 })
    }

    pub fn orders(&self) -> Vec<(usize, usize)> {
        self.levels.iter().map(|l| (l.px, l.pz)).collect()
    }

    pub fn dim(&self) -> usize {
        self.levels[0].a.n_rows()
    }

    fn smooth(&self, l: usize, b: &[f64], x: &mut [f64], steps: usize) {
        let lev = &self.levels[l];
        let n = x.len();
        let (mut r, mut c) = (vec![0.0; n], vec![0.0; n]);
        for _ in 0..steps {
            lev.a.matvec(x, &mut r);
            r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
            lev.smoother.apply(&r, &mut c);
            axpy(1.0, &c, x);
        }
    }

    /// One V-cycle on level `l`, improving `x` in place.
    pub fn vcycle(&self, l: usize, b: &[f64], x: &mut [f64]) {
        if l + 1 == self.levels.len() {
            if self.levels.len() == 1 {
                self.smooth(l, b, x, self.nu1);
            }
            let lev = &self.levels[l];
            let mut r = vec![0.0; x.len()];
            lev.a.matvec(x, &mut r);
            r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
            self.coarse.solve_in_place(&mut r);
            axpy(1.0, &r, x);
            return;
        }
        let lev = &self.levels[l];
        self.smooth(l, b, x, self.nu1);
        let mut r = vec![0.0; x.len()];
        lev.a.matvec(x, &mut r);
        r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
        let restrict = lev.restrict.as_ref().expect("non-coarsest level");
        let mut rc = vec![0.0; restrict.n_rows()];
        restrict.matvec(&r, &mut rc);
        let mut ec = vec![0.0; rc.len()];
        self.vcycle(l + 1, &rc, &mut ec);
        let mut ef = vec![0.0; x.len()];
        lev.prolong.as_ref().expect("non-coarsest level").matvec(&ec, &mut ef);
        axpy(1.0, &ef, x);
        self.smooth(l, b, x, self.nu2);
    }

    /// Preconditioner application `z = V(r)` from a zero initial guess.
    pub fn precondition(&self, r: &[f64], z: &mut [f64]) {
        z.iter_mut().for_each(|v| *v = 0.0);
        self.vcycle(0, r, z);
    }
}

fn mask_transfer(p: &mut CsrMatrix, fine_dir: &[bool], coarse_dir: &[bool]) {
    let trip: Vec<(usize, usize, f64)> = (0..p.n_rows())
        .filter(|&i| !fine_dir[i])
        .flat_map(|i| {
            let (cols, vals) = p.row(i);
            cols.iter()
                .zip(vals)
                .filter(|(c, _)| !coarse_dir[**c as usize])
                .map(move |(&c, &v)| (i, c as usize, v))
                .collect::<Vec<_>>()
        })
        .collect();
    *p = CsrMatrix::from_triplets(p.n_rows(), p.n_cols(), &trip);
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats {
    pub method: OuterMethod,
    pub iterations: usize,
    /// Final true relative residual `‖b - Ax‖ / ‖b‖`.
    pub residual: f64,
    /// Per-iteration relative residual used by the stopping test.
    pub history: Vec<f64>,
    pub seconds: f64,
}

fn residual(a: &dyn LinearOperator, b: &[f64], x: &[f64], r: &mut [f64]) {
    a.apply(x, r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
}

/// Preconditioned defect correction `x ← x + V(b - Ax)`.
pub fn pdc_solve(
    a: &dyn LinearOperator,
    b: &[f64],
    x: &mut [f64],
    hier: &MgHierarchy,
    tol: f64,
    max_iter: usize,
) -> Result<SolveStats> {
    let start = Instant::now();
    let n = b.len();
    let bn = norm2(b);
    let stats = |it, res, history, start: Instant| SolveStats {
        method: OuterMethod::Pdc,
        iterations: it,
        residual: res,
        history,
        seconds: start.elapsed().as_secs_f64(),
    };
    if bn == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(stats(0, 0.0, vec![], start));
    }
    let mut r = vec![0.0; n];
    let mut e = vec![0.0; n];
    residual(a, b, x, &mut r);
    let mut rel = norm2(&r) / bn;
    let mut history = vec![rel];
    let mut streak = 0;
    for it in 1..=max_iter {
        if rel <= tol {
            return Ok(stats(it - 1, rel, history, start));
        }
        hier.precondition(&r, &mut e);
        axpy(1.0, &e, x);
        residual(a, b, x, &mut r);
        let new = norm2(&r) / bn;
        streak = if new > rel { streak + 1 } else { 0 };
        rel = new;
        history.push(rel);
        if streak >= 3 {
            return Err(Error::Diverged { method: "pdc-mg", streak, history });
        }
    }
    if rel <= tol {
        return Ok(stats(max_iter, rel, history, start));
    }
    Err(Error::NotConverged { method: "pdc-mg", iterations: max_iter, residual: rel, history })
}

/// Left-preconditioned restarted GMRES. Iterations run on the preconditioned
/// residual `‖V(b - Ax)‖ / ‖V(b)‖`; once that passes its target the true
/// residual is checked, and the target is tightened and the cycle restarted
/// until `‖b - Ax‖ ≤ tol ‖b‖`.
pub fn gmres_solve(
    a: &dyn LinearOperator,
    b: &[f64],
    x: &mut [f64],
    hier: &MgHierarchy,
    tol: f64,
    max_iter: usize,
    restart: usize,
) -> Result<SolveStats> {
    let start = Instant::now();
    let n = b.len();
    let bn = norm2(b);
    if bn == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats { method: OuterMethod::Gmres, iterations: 0, residual: 0.0, history: vec![], seconds: 0.0 });
    }
    let mut zb = vec![0.0; n];
    hier.precondition(b, &mut zb);
    let zbn = norm2(&zb);
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut history = Vec::new();
    let mut total = 0;
    let m = restart;
    let mut ptol = tol;
    loop {
        residual(a, b, x, &mut r);
        let true_rel = norm2(&r) / bn;
        hier.precondition(&r, &mut z);
        let beta = norm2(&z);
        let mut rel = beta / zbn;
        if history.is_empty() {
            history.push(rel);
        }
        if true_rel <= tol {
            return Ok(SolveStats {
                method: OuterMethod::Gmres,
                iterations: total,
                residual: true_rel,
                history,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
        if total >= max_iter {
            return Err(Error::NotConverged { method: "gmres-mg", iterations: total, residual: true_rel, history });
        }
        if rel <= ptol {
            ptol = 0.5 * rel * tol / true_rel;
        }
        let mut v: Vec<Vec<f64>> = vec![z.iter().map(|zi| zi / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            a.apply(&v[k], &mut r);
            let mut wv = vec![0.0; n];
            hier.precondition(&r, &mut wv);
            for (i, vi) in v.iter().enumerate() {
                h[i][k] = dot(&wv, vi);
                axpy(-h[i][k], vi, &mut wv);
            }
            h[k + 1][k] = norm2(&wv);
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let den = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if den == 0.0 {
                break;
            }
            cs[k] = h[k][k] / den;
            sn[k] = h[k + 1][k] / den;
            h[k][k] = den;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k_used = k + 1;
            rel = g[k + 1].abs() / zbn;
            history.push(rel);
            if rel <= ptol || total >= max_iter {
                break;
            }
            let nrm = norm2(&wv);
            if nrm == 0.0 {
                break;
            }
            v.push(wv.iter().map(|w| w / nrm).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = ((i + 1)..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (yi, vi) in y.iter().zip(&v) {
            axpy(*yi, vi, x);
        }
        if k_used == 0 {
            return Err(Error::NotConverged { method: "gmres-mg", iterations: total, residual: rel, history });
        }
    }
}

/// Dispatches on the configured outer method.
pub fn solve(
    a: &dyn LinearOperator,
    b: &[f64],
    x: &mut [f64],
    hier: &MgHierarchy,
    cfg: &SolverConfig,
) -> Result<SolveStats> {
    match cfg.method {
        OuterMethod::Pdc => pdc_solve(a, b, x, hier, cfg.tol, cfg.max_iter),
        OuterMethod::Gmres => gmres_solve(a, b, x, hier, cfg.tol, cfg.max_iter, cfg.restart),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshSpec;

    fn disc(nx: usize, nz: usize, px: usize, pz: usize, periodic: bool) -> Discretization {
        let el = ReferenceElement::new(px, pz).unwrap();
        let mut spec = MeshSpec::new(nx, nz, 0.0, nx as f64 * 0.5);
        spec.periodic = periodic;
        let mesh = Mesh::build(&spec, &el).unwrap();
        Discretization::new(el, mesh).unwrap()
    }

    #[test]
    fn coarsening_ladders() {
        assert_eq!((coarsen_order(8), coarsen_order(5), coarsen_order(2)), (5, 3, 2));
        assert_eq!(level_orders(8, 8), vec![(8, 8), (5, 5), (3, 3), (2, 2)]);
        assert_eq!(level_orders(8, 4), vec![(8, 4), (5, 4), (4, 4), (3, 3), (2, 2)]);
        assert_eq!(level_orders(2, 2), vec![(2, 2)]);
        assert_eq!(level_orders(4, 8), vec![(4, 8), (4, 5), (4, 4), (3, 3), (2, 2)]);
    }

    #[test]
    fn prolongation_reproduces_coarse_polynomials() {
        let f = disc(3, 2, 6, 6, false);
        let c = disc(3, 2, 4, 4, false);
        let p = prolongation(&c, &f);
        let poly = |x: f64, s: f64| 1.0 + x - 0.3 * x * x * s + s.powi(4) + x.powi(3) * s;
        let vc: Vec<f64> = (0..c.n_nodes()).map(|g| { let (x, s) = c.mesh.coord(g); poly(x, s) }).collect();
        let mut vf = vec![0.0; f.n_nodes()];
        p.matvec(&vc, &mut vf);
        for g in 0..f.n_nodes() {
            let (x, s) = f.mesh.coord(g);
            assert!((vf[g] - poly(x, s)).abs() < 1e-11);
        }
    }

    #[test]
    fn restriction_is_exact_transpose() {
        let f = disc(4, 2, 8, 8, true);
        let h = MgHierarchy::build(&f, &Bathymetry::Flat { h: 1.0 }, &SolverConfig::default()).unwrap();
        for l in &h.levels[..h.levels.len() - 1] {
            let p = l.prolong.as_ref().unwrap();
            let r = l.restrict.as_ref().unwrap();
            for i in 0..p.n_rows() {
                let (cols, vals) = p.row(i);
                for (&c, &v) in cols.iter().zip(vals) {
                    assert_eq!(r.get(c as usize, i), v);
                }
            }
            assert_eq!(p.nnz(), r.nnz());
        }
    }

    #[test]
    fn asm_single_block_is_exact_inverse() {
        let d = disc(1, 1, 4, 4, false);
        let (a, _) = linearized_operator(&d, &Bathymetry::Flat { h: 1.0 }).unwrap();
        let s = AsmSmoother::build(&a, &d.mesh, 0).unwrap();
        let b: Vec<f64> = (0..d.n_nodes()).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut x = vec![0.0; b.len()];
        s.apply(&b, &mut x);
        let mut ax = vec![0.0; b.len()];
        a.matvec(&x, &mut ax);
        assert!(ax.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-10));
        s.apply(&vec![0.0; b.len()], &mut x);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn asm_richardson_contracts() {
        let d = disc(4, 2, 4, 4, false);
        let (a, _) = linearized_operator(&d, &Bathymetry::Flat { h: 1.0 }).unwrap();
        let s = AsmSmoother::build(&a, &d.mesh, 1).unwrap();
        let b: Vec<f64> = (0..d.n_nodes()).map(|i| ((i * 7 % 11) as f64) - 5.0).collect();
        let mut x = vec![0.0; b.len()];
        let (mut r, mut c) = (vec![0.0; b.len()], vec![0.0; b.len()]);
        let mut last = norm2(&b);
        for _ in 0..10 {
            a.matvec(&x, &mut r);
            r.iter_mut().zip(&b).for_each(|(ri, bi)| *ri = bi - *ri);
            s.apply(&r, &mut c);
            axpy(1.0, &c, &mut x);
            a.matvec(&x, &mut r);
            r.iter_mut().zip(&b).for_each(|(ri, bi)| *ri = bi - *ri);
            let now = norm2(&r);
            assert!(now < last);
            last = now;
        }
    }

    fn model() -> (Discretization, MgHierarchy, CsrMatrix) {
        let d = disc(10, 2, 8, 8, false);
        let bathy = Bathymetry::Flat { h: 1.0 };
        let h = MgHierarchy::build(&d, &bathy, &SolverConfig::default()).unwrap();
        let a = h.levels[0].a.clone();
        (d, h, a)
    }

    fn model_rhs(d: &Discretization, dir: &[bool]) -> Vec<f64> {
        (0..d.n_nodes())
            .map(|g| {
                let (x, s) = d.mesh.coord(g);
                if dir[g] { 0.0 } else { (1.3 * x).sin() * (s + 0.2) + 0.1 * x.cos() }
            })
            .collect()
    }

    #[test]
    fn vcycle_contracts_and_fixes_zero() {
        let (d, h, a) = model();
        let n = d.n_nodes();
        let mut x = vec![0.0; n];
        h.vcycle(0, &vec![0.0; n], &mut x);
        assert!(x.iter().all(|&v| v == 0.0));
        let b = model_rhs(&d, &h.levels[0].dirichlet);
        h.vcycle(0, &b, &mut x);
        let mut r = vec![0.0; n];
        a.matvec(&x, &mut r);
        r.iter_mut().zip(&b).for_each(|(ri, bi)| *ri = bi - *ri);
        let rho = norm2(&r) / norm2(&b);
        // Measured 0.251 with one pre- and one post-smoothing step, overlap 2.
        assert!(rho <= 0.26, "contraction {rho}");
        let exact = BandedLu::factor(&a, None).unwrap().solve(&b);
        let mut y = exact.clone();
        h.vcycle(0, &b, &mut y);
        assert!(y.iter().zip(&exact).all(|(p, q)| (p - q).abs() < 1e-12 * (1.0 + q.abs())));
    }

    #[test]
    fn pdc_and_gmres_agree() {
        let (d, h, a) = model();
        let b = model_rhs(&d, &h.levels[0].dirichlet);
        let mut x1 = vec![0.0; b.len()];
        let s1 = pdc_solve(&a, &b, &mut x1, &h, 1e-12, 100).unwrap();
        let mut x2 = vec![0.0; b.len()];
        let s2 = gmres_solve(&a, &b, &mut x2, &h, 1e-12, 100, 30).unwrap();
        let scale = x1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(x1.iter().zip(&x2).all(|(p, q)| (p - q).abs() < 1e-10 * scale));
        assert!(s2.iterations <= s1.iterations);
        let mut z = vec![1.0; b.len()];
        let s = pdc_solve(&a, &vec![0.0; b.len()], &mut z, &h, 1e-6, 10).unwrap();
        assert_eq!(s.iterations, 0);
        assert!(z.iter().all(|&v| v == 0.0));
        let s = gmres_solve(&a, &vec![0.0; b.len()], &mut z, &h, 1e-6, 10, 5).unwrap();
        assert_eq!(s.iterations, 0);
    }

    #[test]
    fn periodic_hierarchy_solves() {
        let d = disc(6, 2, 6, 6, true);
        let h = MgHierarchy::build(&d, &Bathymetry::Flat { h: 1.0 }, &SolverConfig::default()).unwrap();
        let a = h.levels[0].a.clone();
        let b = model_rhs(&d, &h.levels[0].dirichlet);
        let mut x = vec![0.0; b.len()];
        let s = pdc_solve(&a, &b, &mut x, &h, 1e-10, 50).unwrap();
        assert!(s.residual <= 1e-10 && s.iterations < 20);
    }
}
