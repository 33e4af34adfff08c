//! Orthonormal Legendre machinery on the reference square [-1,1]^2.
//!
//! Local nodes are numbered `i * (Pz + 1) + j` with `i` along `r` (x*) and `j`
//! along `s` (σ). Modes use the same layout, `a * (Pz + 1) + b` with `a` the
//! degree in `r` and `b` the degree in `s`, so every 2D operator is the
//! Kronecker product of its 1D factors.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 20;

/// Orthonormal Legendre polynomial `P̃_k(x)` and its derivative.
pub fn legendre_eval(k: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 0.0;
    let mut dp_prev = 0.0;
    let mut p = std::f64::consts::FRAC_1_SQRT_2;
    let mut dp = 0.0;
    let mut a_prev = 0.0;
    for j in 1..=k {
        let jf = j as f64;
        let a = (jf * jf / ((2.0 * jf + 1.0) * (2.0 * jf - 1.0))).sqrt();
        let p_next = (x * p - a_prev * p_prev) / a;
        let dp_next = (p + x * dp - a_prev * dp_prev) / a;
        p_prev = p;
        dp_prev = dp;
        p = p_next;
        dp = dp_next;
        a_prev = a;
    }
    (p, dp)
}

/// Classical (unnormalized) Legendre values `P_P(x)` and `P_{P-1}(x)`.
fn legendre_classic(p: usize, x: f64) -> (f64, f64) {
    let (mut l0, mut l1) = (1.0, x);
    if p == 0 {
        return (1.0, 0.0);
    }
    for n in 2..=p {
        let nf = n as f64;
        let l2 = ((2.0 * nf - 1.0) * x * l1 - (nf - 1.0) * l0) / nf;
        l0 = l1;
        l1 = l2;
    }
    (l1, l0)
}

/// Gauss-Lobatto-Legendre nodes and weights for order `p` (p + 1 points).
pub fn gll_nodes_weights(p: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if p == 0 {
        return Err(Error::OrderOutOfRange(0));
    }
    let pf = p as f64;
    let mut x: Vec<f64> = (0..=p)
        .map(|j| -(std::f64::consts::PI * j as f64 / pf).cos())
        .collect();
    for xj in x.iter_mut().take(p).skip(1) {
        for _ in 0..100 {
            let (lp, lpm1) = legendre_classic(p, *xj);
            let dx = (*xj * lp - lpm1) / ((pf + 1.0) * lp);
            *xj -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
    }
    x[0] = -1.0;
    x[p] = 1.0;
    for j in 0..=p / 2 {
        let s = 0.5 * (x[p - j] - x[j]);
        x[j] = -s;
        x[p - j] = s;
    }
    if p % 2 == 0 {
        x[p / 2] = 0.0;
    }
    let w: Vec<f64> = x
        .iter()
        .map(|&xj| {
            let (lp, _) = legendre_classic(p, xj);
            2.0 / (pf * (pf + 1.0) * lp * lp)
        })
        .collect();
    Ok((x, w))
}

/// Gauss-Legendre points and weights with `n` points (exact to degree 2n-1).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = -(std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (ln, lnm1) = legendre_classic(n, z);
            let d = nf * (z * ln - lnm1) / (z * z - 1.0);
            let dz = ln / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (ln, lnm1) = legendre_classic(n, z);
        let d = nf * (z * ln - lnm1) / (z * z - 1.0);
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * d * d);
    }
    (x, w)
}

/// One-dimensional nodal basis on the GLL points of order `p`.
#[derive(Debug, Clone)]
pub struct Basis1d {
    pub p: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub v: DMatrix<f64>,
    pub vr: DMatrix<f64>,
    pub vinv: DMatrix<f64>,
    pub mass: DMatrix<f64>,
    pub diff: DMatrix<f64>,
}

impl Basis1d {
    pub fn new(p: usize) -> Result<Self> {
        if p == 0 || p > MAX_ORDER {
            return Err(Error::OrderOutOfRange(p));
        }
        let (nodes, weights) = gll_nodes_weights(p)?;
        let n = p + 1;
        let v = DMatrix::from_fn(n, n, |i, k| legendre_eval(k, nodes[i]).0);
        let vr = DMatrix::from_fn(n, n, |i, k| legendre_eval(k, nodes[i]).1);
        let vinv = v
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Singular(format!("1D Vandermonde of order {p}")))?;
        let mass = (&vinv.transpose()) * &vinv;
        let diff = &vr * &vinv;
        Ok(Self { p, nodes, weights, v, vr, vinv, mass, diff })
    }

    pub fn n(&self) -> usize {
        self.p + 1
    }

    /// Lagrange cardinal functions evaluated at `x`.
    pub fn eval_row(&self, x: f64) -> Vec<f64> {
        let n = self.n();
        let phi: Vec<f64> = (0..n).map(|k| legendre_eval(k, x).0).collect();
        (0..n)
            .map(|j| (0..n).map(|k| phi[k] * self.vinv[(k, j)]).sum())
            .collect()
    }

    /// Derivatives of the Lagrange cardinal functions at `x`.
    pub fn eval_deriv_row(&self, x: f64) -> Vec<f64> {
        let n = self.n();
        let dphi: Vec<f64> = (0..n).map(|k| legendre_eval(k, x).1).collect();
        (0..n)
            .map(|j| (0..n).map(|k| dphi[k] * self.vinv[(k, j)]).sum())
            .collect()
    }

    /// Nodal interpolation from this basis to the nodes of `to`.
    pub fn interpolation_to(&self, to: &Basis1d) -> DMatrix<f64> {
        let n = self.n();
        let phi = DMatrix::from_fn(to.n(), n, |i, k| legendre_eval(k, to.nodes[i]).0);
        phi * &self.vinv
    }

    /// Nodal filter `V diag(S) V⁻¹` for this direction.
    pub fn filter(&self, spec: &FilterSpec) -> DMatrix<f64> {
        let s = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(spec.response(self.p)));
        &self.v * s * &self.vinv
    }
}

/// Exponential cut-off filter `S(i) = exp(α ((i - Pc)/(P + 1 - Pc))^β)` above `Pc`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub cutoff: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl FilterSpec {
    /// `Pc = P - 2`, `β = 2`, and `α` such that the highest mode keeps 98%.
    pub fn default_for(p: usize) -> Self {
        let cutoff = p.saturating_sub(2);
        let beta = 2.0;
        let eta = (p - cutoff) as f64 / (p + 1 - cutoff) as f64;
        let alpha = if p == cutoff { 0.0 } else { 0.98f64.ln() / eta.powf(beta) };
        Self { cutoff, alpha, beta }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha > 0.0 || !self.alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("filter alpha must be <= 0, got {}", self.alpha)));
        }
        if self.beta <= 0.0 || !self.beta.is_finite() {
            return Err(Error::InvalidParameter(format!("filter beta must be > 0, got {}", self.beta)));
        }
        Ok(())
    }

    /// Modal response for a direction of order `p`; the cutoff is clamped to `p`.
    pub fn response(&self, p: usize) -> Vec<f64> {
        let pc = self.cutoff.min(p);
        (0..=p)
            .map(|i| {
                if i <= pc {
                    1.0
                } else {
                    let eta = (i - pc) as f64 / (p + 1 - pc) as f64;
                    (self.alpha * eta.powf(self.beta)).exp()
                }
            })
            .collect()
    }
}

/// The reference square with tensor-product GLL nodes.
#[derive(Debug, Clone)]
pub struct ReferenceElement {
    pub px: usize,
    pub pz: usize,
    pub bx: Basis1d,
    pub bz: Basis1d,
    /// `(r, s)` for each local node.
    pub nodes: Vec<(f64, f64)>,
    pub v: DMatrix<f64>,
    pub vr: DMatrix<f64>,
    pub vs: DMatrix<f64>,
    pub vinv: DMatrix<f64>,
    pub mass: DMatrix<f64>,
    pub dr: DMatrix<f64>,
    pub ds: DMatrix<f64>,
}

impl ReferenceElement {
    pub fn new(px: usize, pz: usize) -> Result<Self> {
        let bx = Basis1d::new(px)?;
        let bz = Basis1d::new(pz)?;
        let nodes = (0..=px)
            .flat_map(|i| (0..=pz).map(move |j| (i, j)))
            .map(|(i, j)| (bx.nodes[i], bz.nodes[j]))
            .collect();
        let v = bx.v.kronecker(&bz.v);
        let vr = bx.vr.kronecker(&bz.v);
        let vs = bx.v.kronecker(&bz.vr);
        let vinv = v
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Singular(format!("Vandermonde of order ({px}, {pz})")))?;
        let mass = (&v * v.transpose())
            .try_inverse()
            .ok_or_else(|| Error::Singular("V Vᵀ".into()))?;
        let dr = &vr * &vinv;
        let ds = &vs * &vinv;
        Ok(Self { px, pz, bx, bz, nodes, v, vr, vs, vinv, mass, dr, ds })
    }

    pub fn n_nodes(&self) -> usize {
        (self.px + 1) * (self.pz + 1)
    }

    pub fn nx(&self) -> usize {
        self.px + 1
    }

    pub fn nz(&self) -> usize {
        self.pz + 1
    }

    /// Applies `op ⊗ I` to a local nodal vector.
    pub fn apply_r(&self, op: &DMatrix<f64>, f: &[f64], out: &mut [f64]) {
        apply_kron_first(op, self.nz(), f, out);
    }

    /// Applies `I ⊗ op` to a local nodal vector.
    pub fn apply_s(&self, op: &DMatrix<f64>, f: &[f64], out: &mut [f64]) {
        apply_kron_second(op, self.nx(), f, out);
    }

    /// Face-local node indices: bottom (s = -1), top (s = 1), left, right.
    pub fn face_nodes(&self, face: Face) -> Vec<usize> {
        let (nx, nz) = (self.nx(), self.nz());
        match face {
            Face::Bottom => (0..nx).map(|i| i * nz).collect(),
            Face::Top => (0..nx).map(|i| i * nz + nz - 1).collect(),
            Face::Left => (0..nz).collect(),
            Face::Right => (0..nz).map(|j| (nx - 1) * nz + j).collect(),
        }
    }
}

/// Faces of the reference square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Face {
    Bottom,
    Top,
    Left,
    Right,
}

/// `out = (op ⊗ I_m) f` for `f` laid out as `f[a * m + j]`.
pub fn apply_kron_first(op: &DMatrix<f64>, m: usize, f: &[f64], out: &mut [f64]) {
    let (rows, cols) = op.shape();
    for i in 0..rows {
        let o = &mut out[i * m..(i + 1) * m];
        o.iter_mut().for_each(|v| *v = 0.0);
        for a in 0..cols {
            let c = op[(i, a)];
            if c == 0.0 {
                continue;
            }
            let fa = &f[a * m..(a + 1) * m];
            for (ov, fv) in o.iter_mut().zip(fa) {
                *ov += c * fv;
            }
        }
    }
}

/// `out = (I_n ⊗ op) f` for `f` laid out as `f[i * cols + b]`.
pub fn apply_kron_second(op: &DMatrix<f64>, n: usize, f: &[f64], out: &mut [f64]) {
    let (rows, cols) = op.shape();
    for i in 0..n {
        let fi = &f[i * cols..(i + 1) * cols];
        for j in 0..rows {
            let mut s = 0.0;
            for (b, fv) in fi.iter().enumerate() {
                s += op[(j, b)] * fv;
            }
            out[i * rows + j] = s;
        }
    }
}

/// Nodal interpolation between two reference elements, `Φ_to V_from⁻¹`.
pub fn interpolation_matrix(from: &ReferenceElement, to: &ReferenceElement) -> DMatrix<f64> {
    from.bx.interpolation_to(&to.bx).kronecker(&from.bz.interpolation_to(&to.bz))
}

/// Nodal filter matrix; the 2D response of mode `(a, b)` is `min(S_x(a), S_z(b))`.
pub fn filter_matrix(el: &ReferenceElement, spec: &FilterSpec) -> DMatrix<f64> {
    let sx = spec.response(el.px);
    let sz = spec.response(el.pz);
    let n = el.n_nodes();
    let nz = el.nz();
    let diag = nalgebra::DVector::from_fn(n, |q, _| sx[q / nz].min(sz[q % nz]));
    &el.v * DMatrix::from_diagonal(&diag) * &el.vinv
}
