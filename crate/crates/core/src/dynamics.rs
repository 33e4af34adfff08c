//! Semi-discrete right-hand sides of the momentum and kinematic free-surface
//! equations, the spectral filter and relaxation zones.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Bathymetry, BoundaryTag};
use crate::operators::Discretization;
use crate::reference_element::{filter_matrix, FilterSpec};
use crate::sigma_transform::{w_sigma, SigmaMetrics};
use crate::wave_theory::WaveField;

pub const RHO_WATER: f64 = 999.70;

const ALL_TAGS: [BoundaryTag; 3] = [BoundaryTag::FreeSurface, BoundaryTag::Wall, BoundaryTag::Bottom];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default)]
    pub nu: f64,
    #[serde(default = "default_g")]
    pub g: f64,
}

fn default_rho() -> f64 {
    RHO_WATER
}

fn default_g() -> f64 {
    crate::wave_theory::GRAVITY
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self { rho: RHO_WATER, nu: 0.0, g: default_g() }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !(self.g > 0.0) || !(self.nu >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need rho > 0, g > 0, nu >= 0 (got rho={}, g={}, nu={})",
                self.rho, self.g, self.nu
            )));
        }
        Ok(())
    }
}

/// Nodal fields at one instant. `eta` lives on the surface trace.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub eta: Vec<f64>,
    pub p_d: Vec<f64>,
    pub t: f64,
}

impl FieldState {
    pub fn still(disc: &Discretization) -> Self {
        let n = disc.n_nodes();
        Self { u: vec![0.0; n], w: vec![0.0; n], eta: vec![0.0; disc.trace.n], p_d: vec![0.0; n], t: 0.0 }
    }

    /// Samples a wave field on the σ-grid defined by the wave's own surface.
    pub fn from_wave(disc: &Discretization, bathy: &Bathymetry, wave: &dyn WaveField, t: f64) -> Result<Self> {
        let mut s = Self::still(disc);
        s.t = t;
        let nzn = disc.mesh.nzn;
        for (c, &x) in disc.trace.x.iter().enumerate() {
            let h = bathy.depth(x);
            let eta = wave.eta(x, t);
            s.eta[c] = eta;
            for j in 0..nzn {
                let g = c * nzn + j;
                let z = (disc.mesh.sigma_nodes[j] * (eta + h) - h).min(eta);
                let v = wave.eval(x, z, t)?;
                s.u[g] = v.u;
                s.w[g] = v.w;
                s.p_d[g] = v.p_d;
            }
        }
        Ok(s)
    }

    /// Physical elevation of every node.
    pub fn node_z(&self, disc: &Discretization, bathy: &Bathymetry) -> Vec<f64> {
        let nzn = disc.mesh.nzn;
        (0..disc.n_nodes())
            .map(|g| {
                let c = g / nzn;
                let h = bathy.depth(disc.trace.x[c]);
                disc.mesh.sigma_nodes[g % nzn] * (self.eta[c] + h) - h
            })
            .collect()
    }

    pub fn check_shapes(&self, disc: &Discretization) -> Result<()> {
        let n = disc.n_nodes();
        for v in [&self.u, &self.w, &self.p_d] {
            if v.len() != n {
                return Err(Error::ShapeMismatch { expected: n, got: v.len() });
            }
        }
        if self.eta.len() != disc.trace.n {
            return Err(Error::ShapeMismatch { expected: disc.trace.n, got: self.eta.len() });
        }
        Ok(())
    }
}

/// Pressure-free part of the momentum tendency: advection, hydrostatic
/// surface slope and viscous diffusion.
pub fn momentum_forcing(
    state: &FieldState,
    m: &SigmaMetrics,
    params: &PhysicalParams,
    disc: &Discretization,
) -> (Vec<f64>, Vec<f64>) {
    let n = disc.npe();
    let ws = w_sigma(&state.u, &state.w, m);
    let (mut ul, mut wl) = (vec![0.0; n], vec![0.0; n]);
    let (mut ux, mut us, mut wx, mut wsg) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut fu = vec![0.0; disc.n_nodes()];
    let mut fw = vec![0.0; disc.n_nodes()];
    // Both advection terms share one pass over the elements.
    let mut qw_all = vec![0.0; disc.mesh.global_ids.len()];
    let adv_u = disc.project_broken(|e, q| {
        let ids = disc.mesh.ids(e);
        for (k, &g) in ids.iter().enumerate() {
            ul[k] = state.u[g];
            wl[k] = state.w[g];
        }
        disc.local_grad(e, &ul, &mut ux, &mut us);
        disc.local_grad(e, &wl, &mut wx, &mut wsg);
        for (k, &g) in ids.iter().enumerate() {
            q[k] = state.u[g] * ux[k] + ws[g] * us[k];
            qw_all[e * n + k] = state.u[g] * wx[k] + ws[g] * wsg[k];
        }
    });
    let adv_w = disc.project_broken(|e, q| q.copy_from_slice(&qw_all[e * n..(e + 1) * n]));
    let nzn = disc.mesh.nzn;
    for g in 0..disc.n_nodes() {
        fu[g] = -adv_u[g] - params.g * m.eta_x[g / nzn];
        fw[g] = -adv_w[g];
    }
    if params.nu > 0.0 {
        let lu = sigma_laplacian(&state.u, m, disc);
        let lw = sigma_laplacian(&state.w, m, disc);
        for g in 0..disc.n_nodes() {
            fu[g] += params.nu * lu[g];
            fw[g] += params.nu * lw[g];
        }
    }
    (fu, fw)
}

/// L² recovered Laplacian `M⁻¹[-Wdiv(∇f) + ∮ N n·∇f]` in physical coordinates.
pub fn sigma_laplacian(f: &[f64], m: &SigmaMetrics, disc: &Discretization) -> Vec<f64> {
    let mut a = vec![0.0; disc.n_nodes()];
    disc.apply_mixed(m.div(), m.grad(), f, &mut a);
    let b = disc.boundary_flux_of_grad(m.grad(), f, &ALL_TAGS);
    let mut out: Vec<f64> = b.iter().zip(&a).map(|(b, a)| b - a).collect();
    disc.mass_solve(&mut out);
    out
}

/// L² recovered physical gradient `(∂x p, ∂z p)` of a nodal field.
pub fn physical_gradient(p: &[f64], m: &SigmaMetrics, disc: &Discretization) -> (Vec<f64>, Vec<f64>) {
    let n = disc.npe();
    let (mut pl, mut px, mut ps) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut qz = vec![0.0; disc.mesh.global_ids.len()];
    let gx = disc.project_broken(|e, q| {
        let ids = disc.mesh.ids(e);
        for (k, &g) in ids.iter().enumerate() {
            pl[k] = p[g];
        }
        disc.local_grad(e, &pl, &mut px, &mut ps);
        for (k, &g) in ids.iter().enumerate() {
            q[k] = px[k] + m.sig_x[g] * ps[k];
            qz[e * n + k] = m.sig_z[g] * ps[k];
        }
    });
    let gz = disc.project_broken(|e, q| q.copy_from_slice(&qz[e * n..(e + 1) * n]));
    (gx, gz)
}

/// Full momentum tendency including the dynamic pressure gradient.
pub fn momentum_rhs(
    state: &FieldState,
    m: &SigmaMetrics,
    params: &PhysicalParams,
    disc: &Discretization,
) -> (Vec<f64>, Vec<f64>) {
    let (mut fu, mut fw) = momentum_forcing(state, m, params, disc);
    let (px, pz) = physical_gradient(&state.p_d, m, disc);
    for g in 0..fu.len() {
        fu[g] -= px[g] / params.rho;
        fw[g] -= pz[g] / params.rho;
    }
    (fu, fw)
}

/// Kinematic condition `∂η/∂t = w̃ - ũ ∂η/∂x` in the weak trace sense.
pub fn free_surface_rhs(state: &FieldState, disc: &Discretization) -> Vec<f64> {
    let top = disc.mesh.free_surface_trace();
    let ut: Vec<f64> = top.iter().map(|&g| state.u[g]).collect();
    let adv = disc.trace.project_advection(&ut, &state.eta);
    top.iter().zip(adv).map(|(&g, a)| state.w[g] - a).collect()
}

/// Volume and trace filter matrices for one discretization.
#[derive(Debug, Clone)]
pub struct SpectralFilter {
    pub spec: FilterSpec,
    pub volume: DMatrix<f64>,
    pub trace: DMatrix<f64>,
}

impl SpectralFilter {
    pub fn new(spec: FilterSpec, disc: &Discretization) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec, volume: filter_matrix(&disc.el, &spec), trace: disc.trace.basis.filter(&spec) })
    }

    pub fn default_for(disc: &Discretization) -> Result<Self> {
        Self::new(FilterSpec::default_for(disc.el.px.max(disc.el.pz)), disc)
    }
}

fn filter_volume(f: &[f64], filt: &DMatrix<f64>, disc: &Discretization) -> Vec<f64> {
    let n = disc.npe();
    let mut local = vec![0.0; disc.mesh.global_ids.len()];
    for e in 0..disc.mesh.n_elements() {
        let ids = disc.mesh.ids(e);
        for i in 0..n {
            local[e * n + i] = (0..n).map(|j| filt[(i, j)] * f[ids[j]]).sum();
        }
    }
    disc.mesh.gather_average(&local)
}

/// Filters `u`, `w` and `η` elementwise; `p_D` is left untouched.
pub fn apply_filter(state: &mut FieldState, filter: &SpectralFilter, disc: &Discretization) {
    state.u = filter_volume(&state.u, &filter.volume, disc);
    state.w = filter_volume(&state.w, &filter.volume, disc);
    state.eta = disc.trace.filter(&state.eta, &filter.trace);
}

pub fn f_g(y: f64) -> f64 {
    -2.0 * y * y * y + 3.0 * y * y
}

pub fn f_a(y: f64) -> f64 {
    1.0 - (1.0 - y).powi(5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneMode {
    Generation,
    Absorption,
}

/// How the two weights are paired inside a zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZonePairing {
    /// The piecewise table as written.
    #[default]
    Literal,
    /// `Γ_g = 1 - Γ_a` everywhere inside a zone (absorption targets still water).
    Complementary,
}

/// One zone; the local coordinate `y` runs from 0 at `x_start` to 1 at `x_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxationZone {
    pub x_start: f64,
    pub x_end: f64,
    pub mode: ZoneMode,
}

impl RelaxationZone {
    fn lo_hi(&self) -> (f64, f64) {
        (self.x_start.min(self.x_end), self.x_start.max(self.x_end))
    }

    fn contains(&self, x: f64) -> bool {
        let (lo, hi) = self.lo_hi();
        x >= lo && x <= hi
    }

    fn y(&self, x: f64) -> f64 {
        ((x - self.x_start) / (self.x_end - self.x_start)).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxationZones {
    pub zones: Vec<RelaxationZone>,
    #[serde(default)]
    pub pairing: ZonePairing,
}

impl RelaxationZones {
    pub fn validate(&self) -> Result<()> {
        for (i, z) in self.zones.iter().enumerate() {
            if !(z.x_start.is_finite() && z.x_end.is_finite()) || z.x_start == z.x_end {
                return Err(Error::InvalidParameter(format!("relaxation zone {i} has an empty interval")));
            }
            let (lo, hi) = z.lo_hi();
            for (j, o) in self.zones.iter().enumerate().skip(i + 1) {
                let (lo2, hi2) = o.lo_hi();
                if lo < hi2 && lo2 < hi {
                    return Err(Error::InvalidParameter(format!("relaxation zones {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }

    pub fn has_generation(&self) -> bool {
        self.zones.iter().any(|z| z.mode == ZoneMode::Generation)
    }
}

/// Blending weights `(Γ_g, Γ_a)` at each trace coordinate.
pub fn relaxation_profiles(x: &[f64], zones: &RelaxationZones) -> (Vec<f64>, Vec<f64>) {
    let mut gg = vec![0.0; x.len()];
    let mut ga = vec![1.0; x.len()];
    for (i, &xi) in x.iter().enumerate() {
        if let Some(z) = zones.zones.iter().find(|z| z.contains(xi)) {
            let y = z.y(xi);
            let (g, a) = match z.mode {
                ZoneMode::Generation => (f_g(1.0 - y), f_g(y)),
                ZoneMode::Absorption => (0.0, f_a(1.0 - y)),
            };
            gg[i] = g;
            ga[i] = a;
            if zones.pairing == ZonePairing::Complementary {
                gg[i] = 1.0 - a;
            }
        }
    }
    (gg, ga)
}

/// Relaxation targets; absorption zones always relax toward still water.
pub struct RelaxationTargets<'a> {
    pub wave: Option<&'a dyn WaveField>,
}

/// Blends the state with the targets, `q* = Γ_a q + Γ_g q_e`, for `η`, `u`, `w`.
pub fn apply_relaxation(
    state: &mut FieldState,
    profiles: &(Vec<f64>, Vec<f64>),
    zones: &RelaxationZones,
    targets: &RelaxationTargets,
    bathy: &Bathymetry,
    disc: &Discretization,
) -> Result<()> {
    let (gg, ga) = profiles;
    let nzn = disc.mesh.nzn;
    for (c, &x) in disc.trace.x.iter().enumerate() {
        if ga[c] == 1.0 && gg[c] == 0.0 {
            continue;
        }
        let zone = zones.zones.iter().find(|z| z.contains(x));
        let wave = match zone.map(|z| z.mode) {
            Some(ZoneMode::Generation) => targets.wave,
            _ => None,
        };
        let h = bathy.depth(x);
        let eta_e = wave.map_or(0.0, |w| w.eta(x, state.t));
        state.eta[c] = ga[c] * state.eta[c] + gg[c] * eta_e;
        for j in 0..nzn {
            let g = c * nzn + j;
            let (ue, we) = match wave {
                Some(wv) => {
                    let z = (disc.mesh.sigma_nodes[j] * (eta_e + h) - h).min(eta_e);
                    let s = wv.eval(x, z, state.t)?;
                    (s.u, s.w)
                }
                None => (0.0, 0.0),
            };
            state.u[g] = ga[c] * state.u[g] + gg[c] * ue;
            state.w[g] = ga[c] * state.w[g] + gg[c] * we;
        }
    }
    Ok(())
}
