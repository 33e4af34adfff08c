//! Quadrature oracles shared by the integration tests. Everything here is
//! built from Lagrange polynomials on the element nodes and Gauss-Legendre
//! quadrature computed locally, not from the library's element matrices.
#![allow(dead_code)]

use wavetank_core::linalg::CsrMatrix;
use wavetank_core::mesh::Mesh;
use wavetank_core::operators::{Dir, Discretization};
use wavetank_core::reference_element::Face;

/// Gauss-Legendre points and weights by Newton iteration on `P_n`.
pub fn gauss(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (mut q0, mut q1) = (1.0, z);
                for k in 2..=n {
                    let q2 = ((2 * k - 1) as f64 * z * q1 - (k - 1) as f64 * q0) / k as f64;
                    q0 = q1;
                    q1 = q2;
                }
                let dq = n as f64 * (z * q1 - q0) / (z * z - 1.0);
                w[i] = 2.0 / ((1.0 - z * z) * dq * dq);
                break;
            }
        }
        x[i] = z;
    }
    (x, w)
}

/// Values of all Lagrange polynomials on `nodes` at `t`.
pub fn lagrange(nodes: &[f64], t: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|j| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(m, _)| m != j)
                .map(|(_, &xm)| (t - xm) / (nodes[j] - xm))
                .product()
        })
        .collect()
}

/// Derivatives of all Lagrange polynomials on `nodes` at `t`.
pub fn lagrange_deriv(nodes: &[f64], t: f64) -> Vec<f64> {
    let n = nodes.len();
    (0..n)
        .map(|j| {
            let mut s = 0.0;
            for m in (0..n).filter(|&m| m != j) {
                let mut prod = 1.0 / (nodes[j] - nodes[m]);
                for k in (0..n).filter(|&k| k != j && k != m) {
                    prod *= (t - nodes[k]) / (nodes[j] - nodes[k]);
                }
                s += prod;
            }
            s
        })
        .collect()
}

pub struct ElementFrame {
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
    pub rx: f64,
    pub rs: f64,
    pub detj: f64,
    /// `d[a][b] = l_b'(ξ_a)`
    pub dx: Vec<Vec<f64>>,
    pub ds: Vec<Vec<f64>>,
}

impl ElementFrame {
    pub fn new(mesh: &Mesh, xi: &[f64], eta: &[f64], e: usize) -> Self {
        let ids = mesh.ids(e);
        let nz = eta.len();
        let (x0, s0) = mesh.coord(ids[0]);
        let (x1, s1) = mesh.coord(ids[ids.len() - 1]);
        let _ = nz;
        let (hx, hs) = (x1 - x0, s1 - s0);
        Self {
            xi: xi.to_vec(),
            eta: eta.to_vec(),
            rx: 2.0 / hx,
            rs: 2.0 / hs,
            detj: hx * hs / 4.0,
            dx: xi.iter().map(|&t| lagrange_deriv(xi, t)).collect(),
            ds: eta.iter().map(|&t| lagrange_deriv(eta, t)).collect(),
        }
    }

    pub fn npe(&self) -> usize {
        self.xi.len() * self.eta.len()
    }

    /// Nodal values of `(∂x N_j, ∂σ N_j)` for local basis function `j`.
    pub fn grad_of_basis(&self, j: usize) -> (Vec<f64>, Vec<f64>) {
        let nz = self.eta.len();
        let (ja, jb) = (j / nz, j % nz);
        let mut fx = vec![0.0; self.npe()];
        let mut fs = vec![0.0; self.npe()];
        for a in 0..self.xi.len() {
            for b in 0..nz {
                let q = a * nz + b;
                if b == jb {
                    fx[q] = self.rx * self.dx[a][ja];
                }
                if a == ja {
                    fs[q] = self.rs * self.ds[b][jb];
                }
            }
        }
        (fx, fs)
    }

    /// `∫ detj [ w0 N_i + wx ∂ξN_i + ws ∂ηN_i ]` for all `i`, where each weight
    /// is the interpolant of the given nodal values.
    pub fn project(&self, w0: &[f64], wx: &[f64], ws: &[f64], nq: usize) -> Vec<f64> {
        let (g, gw) = gauss(nq);
        let nz = self.eta.len();
        let mut out = vec![0.0; self.npe()];
        for (qa, &tx) in g.iter().enumerate() {
            let lx = lagrange(&self.xi, tx);
            let dlx = lagrange_deriv(&self.xi, tx);
            for (qb, &ts) in g.iter().enumerate() {
                let ls = lagrange(&self.eta, ts);
                let dls = lagrange_deriv(&self.eta, ts);
                let interp = |v: &[f64]| -> f64 {
                    let mut s = 0.0;
                    for a in 0..self.xi.len() {
                        for b in 0..nz {
                            s += v[a * nz + b] * lx[a] * ls[b];
                        }
                    }
                    s
                };
                let (v0, vx, vs) = (interp(w0), interp(wx), interp(ws));
                let wt = gw[qa] * gw[qb] * self.detj;
                for a in 0..self.xi.len() {
                    for b in 0..nz {
                        out[a * nz + b] += wt * (v0 * lx[a] * ls[b] + vx * dlx[a] * ls[b] + vs * lx[a] * dls[b]);
                    }
                }
            }
        }
        out
    }
}

/// Dense global matrix from element columns: `col(e, frame, j)` returns
/// column `j` of the element matrix.
pub fn assemble(
    disc: &Discretization,
    mut col: impl FnMut(usize, &ElementFrame, usize, &[usize]) -> Vec<f64>,
) -> Vec<Vec<f64>> {
    let (xi, _) = wavetank_core::reference_element::gll_nodes_weights(disc.el.px).unwrap();
    let (eta, _) = wavetank_core::reference_element::gll_nodes_weights(disc.el.pz).unwrap();
    let n = disc.n_nodes();
    let mut a = vec![vec![0.0; n]; n];
    for e in 0..disc.mesh.n_elements() {
        let fr = ElementFrame::new(&disc.mesh, &xi, &eta, e);
        let ids = disc.mesh.ids(e).to_vec();
        for j in 0..fr.npe() {
            let c = col(e, &fr, j, &ids);
            for (i, v) in c.iter().enumerate() {
                a[ids[i]][ids[j]] += v;
            }
        }
    }
    a
}

fn local(ids: &[usize], f: &[f64]) -> Vec<f64> {
    ids.iter().map(|&g| f[g]).collect()
}

pub fn oracle_mass(disc: &Discretization, b: &[f64], nq: usize) -> Vec<Vec<f64>> {
    let z = vec![0.0; disc.npe()];
    assemble(disc, |_, fr, j, ids| {
        let mut w0 = vec![0.0; fr.npe()];
        w0[j] = b[ids[j]];
        fr.project(&w0, &z, &z, nq)
    })
}

pub fn oracle_advection(disc: &Discretization, dir: Dir, b: &[f64], nq: usize) -> Vec<Vec<f64>> {
    let z = vec![0.0; disc.npe()];
    assemble(disc, |_, fr, j, ids| {
        let (fx, fs) = fr.grad_of_basis(j);
        let d = if dir == Dir::X { fx } else { fs };
        let bl = local(ids, b);
        let w0: Vec<f64> = d.iter().zip(&bl).map(|(a, c)| a * c).collect();
        fr.project(&w0, &z, &z, nq)
    })
}

/// `∫ ∇N_i · I(b ∇N_j)` with the chosen components.
pub fn oracle_stiffness(disc: &Discretization, use_x: bool, use_s: bool, b: &[f64], nq: usize) -> Vec<Vec<f64>> {
    let z = vec![0.0; disc.npe()];
    assemble(disc, |_, fr, j, ids| {
        let (fx, fs) = fr.grad_of_basis(j);
        let bl = local(ids, b);
        let wx: Vec<f64> = (0..fr.npe()).map(|q| if use_x { fr.rx * bl[q] * fx[q] } else { 0.0 }).collect();
        let ws: Vec<f64> = (0..fr.npe()).map(|q| if use_s { fr.rs * bl[q] * fs[q] } else { 0.0 }).collect();
        fr.project(&z, &wx, &ws, nq)
    })
}

/// Element weak divergence of the broken gradient with stage `k` coefficients
/// `(sx, sxs, sz)` and stage `k-1` gradient coefficients `(gx, gz)`:
/// `∫ ∂x*N_i g1 + ∂σN_i (sx g1 + sz g2) + N_i sxs g1`, `g1 = ∂x* f + gx ∂σ f`,
/// `g2 = gz ∂σ f`.
#[allow(clippy::too_many_arguments)]
pub fn oracle_mixed(
    disc: &Discretization,
    sx: &[f64],
    sxs: &[f64],
    sz: &[f64],
    gx: &[f64],
    gz: &[f64],
    nq: usize,
) -> Vec<Vec<f64>> {
    assemble(disc, |_, fr, j, ids| {
        let (fx, fs) = fr.grad_of_basis(j);
        let n = fr.npe();
        let (sx, sxs, sz, gx, gz) = (local(ids, sx), local(ids, sxs), local(ids, sz), local(ids, gx), local(ids, gz));
        let g1: Vec<f64> = (0..n).map(|q| fx[q] + gx[q] * fs[q]).collect();
        let g2: Vec<f64> = (0..n).map(|q| gz[q] * fs[q]).collect();
        let w0: Vec<f64> = (0..n).map(|q| sxs[q] * g1[q]).collect();
        let wx: Vec<f64> = (0..n).map(|q| fr.rx * g1[q]).collect();
        let ws: Vec<f64> = (0..n).map(|q| fr.rs * (sx[q] * g1[q] + sz[q] * g2[q])).collect();
        fr.project(&w0, &wx, &ws, nq)
    })
}

/// `∮ N_i I(b ∂_k N_j) n_k` over all exterior faces.
pub fn oracle_boundary(disc: &Discretization, dir: Dir, b: &[f64], nq: usize) -> Vec<Vec<f64>> {
    let (xi, _) = wavetank_core::reference_element::gll_nodes_weights(disc.el.px).unwrap();
    let (eta, _) = wavetank_core::reference_element::gll_nodes_weights(disc.el.pz).unwrap();
    let nz = eta.len();
    let n = disc.n_nodes();
    let (g, gw) = gauss(nq);
    let mut a = vec![vec![0.0; n]; n];
    for face in &disc.mesh.faces {
        let e = face.elem;
        let fr = ElementFrame::new(&disc.mesh, &xi, &eta, e);
        let ids = disc.mesh.ids(e);
        // Face nodes, 1D node set along the face, normal and length factor.
        let (loc, nodes1, normal, jac): (Vec<usize>, &[f64], (f64, f64), f64) = match face.face {
            Face::Bottom => ((0..xi.len()).map(|a| a * nz).collect(), &xi, (0.0, -1.0), 1.0 / fr.rx),
            Face::Top => ((0..xi.len()).map(|a| a * nz + nz - 1).collect(), &xi, (0.0, 1.0), 1.0 / fr.rx),
            Face::Left => ((0..nz).collect(), &eta, (-1.0, 0.0), 1.0 / fr.rs),
            Face::Right => ((0..nz).map(|b| (xi.len() - 1) * nz + b).collect(), &eta, (1.0, 0.0), 1.0 / fr.rs),
        };
        let nk = if dir == Dir::X { normal.0 } else { normal.1 };
        if nk == 0.0 {
            continue;
        }
        for j in 0..fr.npe() {
            let (fx, fs) = fr.grad_of_basis(j);
            let d = if dir == Dir::X { &fx } else { &fs };
            let vals: Vec<f64> = loc.iter().map(|&l| b[ids[l]] * d[l]).collect();
            for (qi, &t) in g.iter().enumerate() {
                let l1 = lagrange(nodes1, t);
                let v: f64 = vals.iter().zip(&l1).map(|(a, c)| a * c).sum();
                for (ai, &la) in loc.iter().enumerate() {
                    a[ids[la]][ids[j]] += gw[qi] * jac * l1[ai] * v * nk;
                }
            }
        }
    }
    a
}

/// Largest entrywise difference between a sparse and a dense matrix.
pub fn max_diff(m: &CsrMatrix, dense: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, row) in dense.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            worst = worst.max((m.get(i, j) - v).abs());
        }
    }
    worst
}
