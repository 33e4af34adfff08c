//! Mixed-stage Poisson problem for the dynamic pressure.
//!
//! At stage `k` the velocity update is
//! `u^(k) = (β_k Δt / ρ) (F - ∇^{k-1} p)` with
//! `F = ρ/(β_k Δt) u^(k-1) + ρ α_k/Δt K^(k-1) + ρ f_rest`, where `f_rest` is the
//! pressure-free momentum tendency. Requiring the weak divergence of `u^(k)`
//! with stage-`k` metrics to vanish gives `Wdiv^k(∇^{k-1} p) = Wdiv^k(F)`.
//! On walls and bottom the normal projection of the update gives
//! `n·∇^{k-1} p = n·F`, so the boundary integrals cancel; `p = 0` on σ = 1.

use crate::error::{Error, Result};
use crate::linalg::{norm2, LinearOperator};
use crate::mesh::{BoundaryTag, Mesh};
use crate::mg_solver::{solve, MgHierarchy, SolveStats, SolverConfig};
use crate::operators::{Discretization, MixedOperator};
use crate::sigma_transform::{transform_normals, SigmaMetrics};

const NEUMANN_TAGS: [BoundaryTag; 2] = [BoundaryTag::Wall, BoundaryTag::Bottom];

/// Stage data from the register arithmetic.
#[derive(Debug, Clone, Copy)]
pub struct StageInputs<'a> {
    pub u: &'a [f64],
    pub w: &'a [f64],
    pub ku: &'a [f64],
    pub kw: &'a [f64],
    /// Pressure-free momentum tendency at stage `k - 1`.
    pub fu_rest: &'a [f64],
    pub fw_rest: &'a [f64],
    pub alpha: f64,
    pub beta: f64,
    pub dt: f64,
    pub rho: f64,
}

#[derive(Debug, Clone)]
pub struct PoissonSystem {
    pub rhs: Vec<f64>,
    pub dirichlet: Vec<bool>,
    /// Nodal `F`.
    pub fx: Vec<f64>,
    pub fz: Vec<f64>,
    pub tol: f64,
}

/// Surface (σ = 1) nodes carry `p = 0`; corners shared with walls included.
pub fn surface_dirichlet(mesh: &Mesh) -> Vec<bool> {
    let mut d = vec![false; mesh.n_nodes()];
    for g in mesh.free_surface_trace() {
        d[g] = true;
    }
    d
}

/// Nodal `F` for the stage.
pub fn stage_flux(inp: &StageInputs) -> Result<(Vec<f64>, Vec<f64>)> {
    if inp.beta == 0.0 || inp.dt <= 0.0 {
        return Err(Error::InvalidParameter(format!("stage needs beta != 0 and dt > 0 (beta={}, dt={})", inp.beta, inp.dt)));
    }
    let c1 = inp.rho / (inp.beta * inp.dt);
    let c2 = inp.rho * inp.alpha / inp.dt;
    let fx = (0..inp.u.len()).map(|g| c1 * inp.u[g] + c2 * inp.ku[g] + inp.rho * inp.fu_rest[g]).collect();
    let fz = (0..inp.w.len()).map(|g| c1 * inp.w[g] + c2 * inp.kw[g] + inp.rho * inp.fw_rest[g]).collect();
    Ok((fx, fz))
}

pub fn build_poisson_rhs(
    inp: &StageInputs,
    metrics_k: &SigmaMetrics,
    disc: &Discretization,
    tol: f64,
) -> Result<PoissonSystem> {
    let n = disc.n_nodes();
    for v in [inp.u, inp.w, inp.ku, inp.kw, inp.fu_rest, inp.fw_rest] {
        if v.len() != n {
            return Err(Error::ShapeMismatch { expected: n, got: v.len() });
        }
    }
    let (fx, fz) = stage_flux(inp)?;
    let mut rhs = disc.weak_divergence(metrics_k.div(), &fx, &fz);
    let dirichlet = surface_dirichlet(&disc.mesh);
    for (r, &d) in rhs.iter_mut().zip(&dirichlet) {
        if d {
            *r = 0.0;
        }
    }
    Ok(PoissonSystem { rhs, dirichlet, fx, fz, tol })
}

/// Neumann datum `(Jᵀn*)·F` at one wall or bottom node, i.e. the normal
/// derivative of `p` scaled by the surface metric factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeumannValue {
    pub node: usize,
    pub tag: BoundaryTag,
    pub value: f64,
}

pub fn build_neumann_data(sys: &PoissonSystem, metrics_k: &SigmaMetrics, disc: &Discretization) -> Vec<NeumannValue> {
    transform_normals(metrics_k, disc)
        .into_iter()
        .filter(|n| NEUMANN_TAGS.contains(&n.tag))
        .map(|n| NeumannValue {
            node: n.node,
            tag: n.tag,
            value: n.scaled.0 * sys.fx[n.node] + n.scaled.1 * sys.fz[n.node],
        })
        .collect()
}

/// Weak boundary vector `∮ N_i g` of the Neumann data on walls and bottom.
pub fn neumann_vector(sys: &PoissonSystem, metrics_k: &SigmaMetrics, disc: &Discretization) -> Vec<f64> {
    disc.boundary_flux(metrics_k.grad(), &sys.fx, &sys.fz, &NEUMANN_TAGS)
}

/// Solves for `p_D^(k-1)` starting from `p`.
pub fn solve_pressure(
    sys: &PoissonSystem,
    metrics_k: &SigmaMetrics,
    metrics_km1: &SigmaMetrics,
    disc: &Discretization,
    hier: &MgHierarchy,
    cfg: &SolverConfig,
    p: &mut [f64],
) -> Result<SolveStats> {
    let op = MixedOperator { disc, ck: metrics_k.div(), cm: metrics_km1.grad(), dirichlet: &sys.dirichlet };
    let cfg = SolverConfig { tol: sys.tol, ..*cfg };
    solve(&op, &sys.rhs, p, hier, &cfg)
}

/// Weak divergence diagnostics after a stage update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceReport {
    /// `‖Wdiv^k(u^(k))‖` of the velocity with the element-broken pressure
    /// gradient, equal to `(β_k Δt/ρ) ‖b - A p‖` on interior rows.
    pub algebraic: f64,
    /// Same functional of the continuous nodal velocity that is stored.
    pub nodal: f64,
    /// `(β_k Δt/ρ) ‖b‖`, the right-hand-side scale.
    pub scale: f64,
}

impl DivergenceReport {
    pub fn algebraic_ratio(&self) -> f64 {
        if self.scale == 0.0 { 0.0 } else { self.algebraic / self.scale }
    }

    pub fn nodal_ratio(&self) -> f64 {
        if self.scale == 0.0 { 0.0 } else { self.nodal / self.scale }
    }
}

/// Weak divergence `-Wdiv^k(u) + ∮ N (Jᵀn*)·u` of a nodal velocity, Dirichlet rows dropped.
pub fn weak_divergence_residual(u: &[f64], w: &[f64], m: &SigmaMetrics, disc: &Discretization, dirichlet: &[bool]) -> Vec<f64> {
    let wd = disc.weak_divergence(m.div(), u, w);
    let bf = disc.boundary_flux(m.grad(), u, w, &NEUMANN_TAGS);
    wd.iter()
        .zip(&bf)
        .zip(dirichlet)
        .map(|((a, b), &d)| if d { 0.0 } else { b - a })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn divergence_report(
    sys: &PoissonSystem,
    p: &[f64],
    u_new: &[f64],
    w_new: &[f64],
    metrics_k: &SigmaMetrics,
    metrics_km1: &SigmaMetrics,
    disc: &Discretization,
    coef: f64,
) -> DivergenceReport {
    let op = MixedOperator { disc, ck: metrics_k.div(), cm: metrics_km1.grad(), dirichlet: &sys.dirichlet };
    let mut ap = vec![0.0; p.len()];
    op.apply(p, &mut ap);
    let r: Vec<f64> = sys
        .rhs
        .iter()
        .zip(&ap)
        .zip(&sys.dirichlet)
        .map(|((b, a), &d)| if d { 0.0 } else { b - a })
        .collect();
    let nodal = weak_divergence_residual(u_new, w_new, metrics_k, disc, &sys.dirichlet);
    DivergenceReport { algebraic: coef * norm2(&r), nodal: norm2(&nodal), scale: coef * norm2(&sys.rhs) }
}
