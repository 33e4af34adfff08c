//! Time-dependent σ-transform metrics, `σ = (z + h) / d` with `d = η + h`.

use crate::error::{Error, Result};
use crate::mesh::{Bathymetry, BoundaryTag};
use crate::operators::{DivCoeffs, Discretization, GradCoeffs};

#[derive(Debug, Clone)]
pub struct SigmaMetrics {
    /// Stage that produced these metrics (0 = start of step).
    pub stage: usize,
    // Per surface column.
    pub d: Vec<f64>,
    pub d_x: Vec<f64>,
    pub d_xx: Vec<f64>,
    pub d_t: Vec<f64>,
    pub eta_x: Vec<f64>,
    pub h_x: Vec<f64>,
    pub h_xx: Vec<f64>,
    // Per global node.
    pub sig_t: Vec<f64>,
    pub sig_x: Vec<f64>,
    pub sig_xx: Vec<f64>,
    pub sig_z: Vec<f64>,
    /// `∂σ(σx)` at fixed x*, equal to `-d_x / d`.
    pub sig_x_sigma: Vec<f64>,
}

impl SigmaMetrics {
    pub fn div(&self) -> DivCoeffs<'_> {
        DivCoeffs { sx: &self.sig_x, sxs: &self.sig_x_sigma, sz: &self.sig_z }
    }

    pub fn grad(&self) -> GradCoeffs<'_> {
        GradCoeffs { sx: &self.sig_x, sz: &self.sig_z }
    }

    pub fn with_stage(mut self, stage: usize) -> Self {
        self.stage = stage;
        self
    }
}

/// Depth guard used when none is configured: `1e-6` of the smallest still depth.
pub fn default_d_min(bathy: &Bathymetry, disc: &Discretization) -> f64 {
    let hmin = disc.trace.x.iter().map(|&x| bathy.depth(x)).fold(f64::INFINITY, f64::min);
    1e-6 * hmin
}

/// Metric fields for surface `eta` and surface rate `eta_rate` (both on the trace).
pub fn compute_metrics(
    eta: &[f64],
    eta_rate: &[f64],
    bathy: &Bathymetry,
    disc: &Discretization,
    d_min: f64,
) -> Result<SigmaMetrics> {
    let nc = disc.trace.n;
    if eta.len() != nc {
        return Err(Error::ShapeMismatch { expected: nc, got: eta.len() });
    }
    if eta_rate.len() != nc {
        return Err(Error::ShapeMismatch { expected: nc, got: eta_rate.len() });
    }
    let eta_x = disc.trace.derivative(eta);
    let eta_xx = disc.trace.derivative(&eta_x);
    let mut d = vec![0.0; nc];
    let mut h_x = vec![0.0; nc];
    let mut h_xx = vec![0.0; nc];
    for c in 0..nc {
        let x = disc.trace.x[c];
        let (h, hx, hxx) = bathy.eval(x);
        d[c] = eta[c] + h;
        if !(d[c] >= d_min) {
            return Err(Error::DepthGuard { x, depth: d[c], min: d_min });
        }
        h_x[c] = hx;
        h_xx[c] = hxx;
    }
    let d_x: Vec<f64> = (0..nc).map(|c| eta_x[c] + h_x[c]).collect();
    let d_xx: Vec<f64> = (0..nc).map(|c| eta_xx[c] + h_xx[c]).collect();
    let n = disc.n_nodes();
    let nzn = disc.mesh.nzn;
    let mut m = SigmaMetrics {
        stage: 0,
        sig_t: vec![0.0; n],
        sig_x: vec![0.0; n],
        sig_xx: vec![0.0; n],
        sig_z: vec![0.0; n],
        sig_x_sigma: vec![0.0; n],
        d,
        d_x,
        d_xx,
        d_t: eta_rate.to_vec(),
        eta_x,
        h_x,
        h_xx,
    };
    for g in 0..n {
        let c = g / nzn;
        let s = disc.mesh.sigma_nodes[g % nzn];
        let dc = m.d[c];
        let sx = (m.h_x[c] - s * m.d_x[c]) / dc;
        m.sig_x[g] = sx;
        m.sig_z[g] = 1.0 / dc;
        m.sig_xx[g] = (m.h_xx[c] - s * m.d_xx[c] - 2.0 * sx * m.d_x[c]) / dc;
        m.sig_t[g] = -s * m.d_t[c] / dc;
        m.sig_x_sigma[g] = -m.d_x[c] / dc;
    }
    Ok(m)
}

/// Metrics of the undisturbed still-water domain (η = 0).
pub fn still_metrics(bathy: &Bathymetry, disc: &Discretization) -> Result<SigmaMetrics> {
    let z = vec![0.0; disc.trace.n];
    compute_metrics(&z, &z, bathy, disc, default_d_min(bathy, disc))
}

/// `w_σ = σt + u σx + w σz` at every node.
pub fn w_sigma(u: &[f64], w: &[f64], m: &SigmaMetrics) -> Vec<f64> {
    (0..u.len())
        .map(|g| m.sig_t[g] + u[g] * m.sig_x[g] + w[g] * m.sig_z[g])
        .collect()
}

/// Boundary normal at one face node: `scaled = Jᵀ n*`, `norm = |Jᵀ n*|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledNormal {
    pub node: usize,
    pub face: usize,
    pub tag: BoundaryTag,
    pub scaled: (f64, f64),
    pub norm: f64,
}

impl ScaledNormal {
    /// Unit physical normal.
    pub fn unit(&self) -> (f64, f64) {
        (self.scaled.0 / self.norm, self.scaled.1 / self.norm)
    }
}

pub fn transform_normals(m: &SigmaMetrics, disc: &Discretization) -> Vec<ScaledNormal> {
    let mut out = Vec::new();
    for (fi, face) in disc.mesh.faces.iter().enumerate() {
        let ids = disc.mesh.ids(face.elem);
        for l in disc.el.face_nodes(face.face) {
            let g = ids[l];
            let (nx, ns) = face.normal;
            let scaled = (nx + m.sig_x[g] * ns, m.sig_z[g] * ns);
            let norm = (scaled.0 * scaled.0 + scaled.1 * scaled.1).sqrt();
            out.push(ScaledNormal { node: g, face: fi, tag: face.tag, scaled, norm });
        }
    }
    out
}
