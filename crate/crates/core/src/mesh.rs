//! Structured quadrilateral mesh of the reference (x*, σ) strip and the
//! still-water bathymetry.
//!
//! Elements are numbered `ex * Nz + ez` and global nodes `gx * nzn + gz`, so
//! the numbering is lexicographic in (x*, σ) with σ running fastest.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reference_element::{Face, ReferenceElement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    FreeSurface,
    Wall,
    Bottom,
}

/// Affine element record. `rx = 2/Δx`, `ssig = 2/Δσ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeom {
    pub ex: usize,
    pub ez: usize,
    pub x0: f64,
    pub x1: f64,
    pub s0: f64,
    pub s1: f64,
    pub detj: f64,
    pub rx: f64,
    pub ssig: f64,
}

impl ElementGeom {
    pub fn dx(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn dsig(&self) -> f64 {
        self.s1 - self.s0
    }

    /// Half the face length.
    pub fn surface_jacobian(&self, face: Face) -> f64 {
        match face {
            Face::Bottom | Face::Top => 0.5 * self.dx(),
            Face::Left | Face::Right => 0.5 * self.dsig(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFace {
    pub elem: usize,
    pub face: Face,
    pub tag: BoundaryTag,
    pub sjac: f64,
    /// Outward reference normal `(n_x*, n_σ)`.
    pub normal: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    pub nx: usize,
    pub nz: usize,
    pub x0: f64,
    pub x1: f64,
    #[serde(default)]
    pub periodic: bool,
    /// Ratio of consecutive vertical element heights from bottom to top;
    /// values below 1 cluster elements toward the free surface.
    #[serde(default = "one")]
    pub sigma_ratio: f64,
}

fn one() -> f64 {
    1.0
}

impl MeshSpec {
    pub fn new(nx: usize, nz: usize, x0: f64, x1: f64) -> Self {
        Self { nx, nz, x0, x1, periodic: false, sigma_ratio: 1.0 }
    }

    pub fn periodic(mut self) -> Self {
        self.periodic = true;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub spec: MeshSpec,
    pub px: usize,
    pub pz: usize,
    /// Global node columns and rows.
    pub nxn: usize,
    pub nzn: usize,
    pub elements: Vec<ElementGeom>,
    /// `global_ids[e * npe + local]`
    pub global_ids: Vec<usize>,
    pub faces: Vec<BoundaryFace>,
    /// Node x* per global column, node σ per global row.
    pub x_nodes: Vec<f64>,
    pub sigma_nodes: Vec<f64>,
}

pub fn build_mesh(nx: usize, nz: usize, x_extent: (f64, f64), el: &ReferenceElement) -> Result<Mesh> {
    Mesh::build(&MeshSpec::new(nx, nz, x_extent.0, x_extent.1), el)
}

impl Mesh {
    pub fn build(spec: &MeshSpec, el: &ReferenceElement) -> Result<Self> {
        if spec.nx == 0 || spec.nz == 0 {
            return Err(Error::InvalidMesh("element counts must be at least 1".into()));
        }
        if !(spec.x1 > spec.x0) || !spec.x0.is_finite() || !spec.x1.is_finite() {
            return Err(Error::InvalidMesh(format!("degenerate extent [{}, {}]", spec.x0, spec.x1)));
        }
        if !(spec.sigma_ratio > 0.0) {
            return Err(Error::InvalidMesh("sigma_ratio must be positive".into()));
        }
        if spec.periodic && spec.nx < 2 {
            return Err(Error::InvalidMesh("periodic meshes need at least 2 elements".into()));
        }
        let (px, pz) = (el.px, el.pz);
        let nxn = if spec.periodic { spec.nx * px } else { spec.nx * px + 1 };
        let nzn = spec.nz * pz + 1;

        let dx = (spec.x1 - spec.x0) / spec.nx as f64;
        let xb: Vec<f64> = (0..=spec.nx)
            .map(|k| if k == spec.nx { spec.x1 } else { spec.x0 + k as f64 * dx })
            .collect();
        let mut sb = vec![0.0; spec.nz + 1];
        let total: f64 = (0..spec.nz).map(|k| spec.sigma_ratio.powi(k as i32)).sum();
        for k in 0..spec.nz {
            sb[k + 1] = sb[k] + spec.sigma_ratio.powi(k as i32) / total;
        }
        sb[spec.nz] = 1.0;

        let mut elements = Vec::with_capacity(spec.nx * spec.nz);
        let mut global_ids = Vec::with_capacity(spec.nx * spec.nz * el.n_nodes());
        let mut faces = Vec::new();
        for ex in 0..spec.nx {
            for ez in 0..spec.nz {
                let (x0, x1, s0, s1) = (xb[ex], xb[ex + 1], sb[ez], sb[ez + 1]);
                let g = ElementGeom {
                    ex,
                    ez,
                    x0,
                    x1,
                    s0,
                    s1,
                    detj: 0.25 * (x1 - x0) * (s1 - s0),
                    rx: 2.0 / (x1 - x0),
                    ssig: 2.0 / (s1 - s0),
                };
                let e = elements.len();
                for i in 0..=px {
                    let gx = (ex * px + i) % nxn;
                    for j in 0..=pz {
                        global_ids.push(gx * nzn + ez * pz + j);
                    }
                }
                let mut push = |face: Face, tag: BoundaryTag, normal: (f64, f64)| {
                    faces.push(BoundaryFace { elem: e, face, tag, sjac: g.surface_jacobian(face), normal });
                };
                if ez == 0 {
                    push(Face::Bottom, BoundaryTag::Bottom, (0.0, -1.0));
                }
                if ez + 1 == spec.nz {
                    push(Face::Top, BoundaryTag::FreeSurface, (0.0, 1.0));
                }
                if !spec.periodic && ex == 0 {
                    push(Face::Left, BoundaryTag::Wall, (-1.0, 0.0));
                }
                if !spec.periodic && ex + 1 == spec.nx {
                    push(Face::Right, BoundaryTag::Wall, (1.0, 0.0));
                }
                elements.push(g);
            }
        }

        let mut x_nodes = vec![0.0; nxn];
        for ex in 0..spec.nx {
            for i in 0..=px {
                let gx = ex * px + i;
                if gx < nxn {
                    x_nodes[gx] = xb[ex] + 0.5 * (el.bx.nodes[i] + 1.0) * (xb[ex + 1] - xb[ex]);
                }
            }
        }
        let mut sigma_nodes = vec![0.0; nzn];
        for ez in 0..spec.nz {
            for j in 0..=pz {
                sigma_nodes[ez * pz + j] = sb[ez] + 0.5 * (el.bz.nodes[j] + 1.0) * (sb[ez + 1] - sb[ez]);
            }
        }
        sigma_nodes[0] = 0.0;
        sigma_nodes[nzn - 1] = 1.0;

        Ok(Self { spec: spec.clone(), px, pz, nxn, nzn, elements, global_ids, faces, x_nodes, sigma_nodes })
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn npe(&self) -> usize {
        (self.px + 1) * (self.pz + 1)
    }

    /// Number of unique global nodes `K`.
    pub fn n_nodes(&self) -> usize {
        self.nxn * self.nzn
    }

    pub fn ids(&self, e: usize) -> &[usize] {
        let n = self.npe();
        &self.global_ids[e * n..(e + 1) * n]
    }

    pub fn column_of(&self, g: usize) -> usize {
        g / self.nzn
    }

    pub fn row_of(&self, g: usize) -> usize {
        g % self.nzn
    }

    pub fn coord(&self, g: usize) -> (f64, f64) {
        (self.x_nodes[g / self.nzn], self.sigma_nodes[g % self.nzn])
    }

    /// Local node coordinates of element `e` in (x*, σ).
    pub fn element_coords(&self, e: usize, el: &ReferenceElement) -> Vec<(f64, f64)> {
        let g = &self.elements[e];
        el.nodes
            .iter()
            .map(|&(r, s)| (g.x0 + 0.5 * (r + 1.0) * g.dx(), g.s0 + 0.5 * (s + 1.0) * g.dsig()))
            .collect()
    }

    /// Global ids on σ = 1, ordered by increasing x*.
    pub fn free_surface_trace(&self) -> Vec<usize> {
        (0..self.nxn).map(|gx| gx * self.nzn + self.nzn - 1).collect()
    }

    /// Global ids on σ = 0, ordered by increasing x*.
    pub fn bottom_trace(&self) -> Vec<usize> {
        (0..self.nxn).map(|gx| gx * self.nzn).collect()
    }

    /// Trace node indices (columns) of element column `ex`.
    pub fn trace_element_ids(&self, ex: usize) -> Vec<usize> {
        (0..=self.px).map(|i| (ex * self.px + i) % self.nxn).collect()
    }

    pub fn x_extent(&self) -> (f64, f64) {
        (self.spec.x0, self.spec.x1)
    }

    pub fn periodic(&self) -> bool {
        self.spec.periodic
    }

    /// Number of elements covering each global node.
    pub fn multiplicity(&self) -> Vec<usize> {
        let mut m = vec![0; self.n_nodes()];
        for &g in &self.global_ids {
            m[g] += 1;
        }
        m
    }

    pub fn scatter(&self, global: &[f64]) -> Vec<f64> {
        self.global_ids.iter().map(|&g| global[g]).collect()
    }

    /// Averages element-local values that land on the same global node.
    pub fn gather_average(&self, local: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_nodes()];
        for (&g, &v) in self.global_ids.iter().zip(local) {
            out[g] += v;
        }
        for (o, m) in out.iter_mut().zip(self.multiplicity()) {
            *o /= m as f64;
        }
        out
    }

    /// Smallest horizontal and vertical node spacings in (x*, σ).
    pub fn min_spacing(&self) -> (f64, f64) {
        let dx = self.x_nodes.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let ds = self.sigma_nodes.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        (dx, ds)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "elements: {} x {} = {}", self.spec.nx, self.spec.nz, self.n_elements());
        let _ = writeln!(s, "order: ({}, {})", self.px, self.pz);
        let _ = writeln!(s, "nodes: {} x {} = {}", self.nxn, self.nzn, self.n_nodes());
        let _ = writeln!(s, "periodic: {}", self.spec.periodic);
        let _ = writeln!(s, "bbox: x* in [{}, {}], sigma in [0, 1]", self.spec.x0, self.spec.x1);
        let count = |t: BoundaryTag| self.faces.iter().filter(|f| f.tag == t).count();
        let _ = writeln!(
            s,
            "faces: free_surface {}, wall {}, bottom {}",
            count(BoundaryTag::FreeSurface),
            count(BoundaryTag::Wall),
            count(BoundaryTag::Bottom)
        );
        s
    }
}

/// Still-water depth `h(x) > 0` with analytic first and second derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Bathymetry {
    Flat { h: f64 },
    /// `h(x) = h0 + slope * x`
    Linear { h0: f64, slope: f64 },
    /// Piecewise-linear profile through `(x, h)` points, held constant
    /// outside them, with kinks rounded over a width `smoothing`.
    Piecewise { points: Vec<(f64, f64)>, smoothing: f64 },
}

fn ln2cosh(t: f64) -> f64 {
    let a = t.abs();
    a + (-2.0 * a).exp().ln_1p()
}

impl Bathymetry {
    /// Submerged-bar flume geometry: 0.4 m
    /// depth, 1:20 upslope from x = 6 m to 12 m, 2 m crest at 0.1 m depth,
    /// 1:10 downslope to 17 m.
    pub fn submerged_bar() -> Self {
        Self::Piecewise {
            points: vec![(6.0, 0.4), (12.0, 0.1), (14.0, 0.1), (17.0, 0.4)],
            smoothing: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Flat { h } if !(*h > 0.0) => Err(Error::InvalidParameter(format!("flat depth {h} must be positive"))),
            Self::Piecewise { points, smoothing } => {
                if points.is_empty() || !(*smoothing > 0.0) {
                    return Err(Error::InvalidParameter("piecewise bathymetry needs points and smoothing > 0".into()));
                }
                if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::InvalidParameter("bathymetry points must have increasing x".into()));
                }
                if points.iter().any(|p| !(p.1 > 0.0)) {
                    return Err(Error::InvalidParameter("bathymetry depths must be positive".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `(h, h_x, h_xx)` at `x`.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        match self {
            Self::Flat { h } => (*h, 0.0, 0.0),
            Self::Linear { h0, slope } => (h0 + slope * x, *slope, 0.0),
            Self::Piecewise { points, smoothing } => {
                let d = *smoothing;
                let mut h = points[0].1;
                let (mut hx, mut hxx) = (0.0, 0.0);
                let mut prev_slope = 0.0;
                for k in 0..points.len() {
                    let slope = if k + 1 < points.len() {
                        (points[k + 1].1 - points[k].1) / (points[k + 1].0 - points[k].0)
                    } else {
                        0.0
                    };
                    let jump = slope - prev_slope;
                    prev_slope = slope;
                    let y = x - points[k].0;
                    let t = y / d;
                    h += jump * 0.5 * (y + d * ln2cosh(t));
                    let th = t.tanh();
                    hx += jump * 0.5 * (1.0 + th);
                    hxx += jump * 0.5 * (1.0 - th * th) / d;
                }
                (h, hx, hxx)
            }
        }
    }

    pub fn depth(&self, x: f64) -> f64 {
        self.eval(x).0
    }
}
