//! Five-stage fourth-order low-storage Runge–Kutta stepping with a pressure
//! solve in every stage.

use std::time::Instant;

use crate::dynamics::{
    apply_filter, apply_relaxation, free_surface_rhs, momentum_forcing, physical_gradient, FieldState,
    PhysicalParams, RelaxationTargets, RelaxationZones, SpectralFilter,
};
use crate::error::{Error, Result};
use crate::mesh::Bathymetry;
use crate::mg_solver::{MgHierarchy, SolverConfig};
use crate::operators::Discretization;
use crate::pressure_poisson::{build_poisson_rhs, divergence_report, solve_pressure, DivergenceReport, StageInputs};
use crate::sigma_transform::{compute_metrics, SigmaMetrics};

/// Low-storage five-stage fourth-order coefficients: `K = a_k K + Δt f`, `y += b_k K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RkScheme {
    pub a: [f64; 5],
    pub b: [f64; 5],
    pub c: [f64; 5],
}

pub fn lserk_coefficients() -> RkScheme {
    RkScheme {
        a: [
            0.0,
            -567301805773.0 / 1357537059087.0,
            -2404267990393.0 / 2016746695238.0,
            -3550918686646.0 / 2091501179385.0,
            -1275806237668.0 / 842570457699.0,
        ],
        b: [
            1432997174477.0 / 9575080441755.0,
            5161836677717.0 / 13612068292357.0,
            1720146321549.0 / 2090206949498.0,
            3134564353537.0 / 4481467310338.0,
            2277821191437.0 / 14882151754819.0,
        ],
        c: [
            0.0,
            1432997174477.0 / 9575080441755.0,
            2526269341429.0 / 6820363183890.0,
            2006345519317.0 / 3224310063776.0,
            2802321613138.0 / 2924317926251.0,
        ],
    }
}

/// One step of the scheme for a scalar ODE `y' = f(t, y)`.
pub fn lserk_scalar(f: impl Fn(f64, f64) -> f64, y: f64, t: f64, dt: f64) -> f64 {
    let s = lserk_coefficients();
    let (mut y, mut k) = (y, 0.0);
    for i in 0..5 {
        k = s.a[i] * k + dt * f(t + s.c[i] * dt, y);
        y += s.b[i] * k;
    }
    y
}

/// The single register held per field.
#[derive(Debug, Clone)]
pub struct Registers {
    pub ku: Vec<f64>,
    pub kw: Vec<f64>,
    pub keta: Vec<f64>,
}

impl Registers {
    fn zeros(n: usize, nt: usize) -> Self {
        Self { ku: vec![0.0; n], kw: vec![0.0; n], keta: vec![0.0; nt] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub stage: usize,
    pub iterations: usize,
    pub residual: f64,
    pub divergence: DivergenceReport,
    pub seconds: f64,
    pub solve_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    pub stages: Vec<StageRecord>,
}

impl StepReport {
    pub fn max_divergence_ratio(&self) -> f64 {
        self.stages.iter().map(|s| s.divergence.algebraic_ratio()).fold(0.0, f64::max)
    }
}

/// Everything a step needs besides the state.
pub struct Integrator<'a> {
    pub disc: &'a Discretization,
    pub bathy: &'a Bathymetry,
    pub params: PhysicalParams,
    pub hier: &'a MgHierarchy,
    pub solver: SolverConfig,
    pub filter: Option<SpectralFilter>,
    pub zones: Option<RelaxationZones>,
    pub targets: RelaxationTargets<'a>,
    pub d_min: f64,
    pub scheme: RkScheme,
    profiles: Option<(Vec<f64>, Vec<f64>)>,
}

impl<'a> Integrator<'a> {
    pub fn new(
        disc: &'a Discretization,
        bathy: &'a Bathymetry,
        params: PhysicalParams,
        hier: &'a MgHierarchy,
        solver: SolverConfig,
    ) -> Self {
        Self {
            disc,
            bathy,
            params,
            hier,
            solver,
            filter: None,
            zones: None,
            targets: RelaxationTargets { wave: None },
            d_min: crate::sigma_transform::default_d_min(bathy, disc),
            scheme: lserk_coefficients(),
            profiles: None,
        }
    }

    pub fn with_filter(mut self, filter: SpectralFilter) -> Self {
        self.filter = Some(filter);
        self
    }

    pub fn with_relaxation(mut self, zones: RelaxationZones, targets: RelaxationTargets<'a>) -> Self {
        self.profiles = Some(crate::dynamics::relaxation_profiles(&self.disc.trace.x, &zones));
        self.zones = Some(zones);
        self.targets = targets;
        self
    }

    fn metrics(&self, eta: &[f64], rate: &[f64], stage: usize) -> Result<SigmaMetrics> {
        Ok(compute_metrics(eta, rate, self.bathy, self.disc, self.d_min)?.with_stage(stage))
    }

    /// Advances `state` by `dt`; `step` only labels errors.
    pub fn step(&self, state: &mut FieldState, dt: f64, step: usize) -> Result<StepReport> {
        state.check_shapes(self.disc)?;
        let wrap = |stage: usize| move |e: Error| Error::Step { step, stage, source: Box::new(e) };
        let n = self.disc.n_nodes();
        let mut reg = Registers::zeros(n, self.disc.trace.n);
        let mut report = StepReport::default();
        let rho = self.params.rho;
        for k in 0..5 {
            let start = Instant::now();
            let (a, b) = (self.scheme.a[k], self.scheme.b[k]);
            let f_eta = free_surface_rhs(state, self.disc);
            let m_prev = self.metrics(&state.eta, &f_eta, k).map_err(wrap(k + 1))?;
            let (fu, fw) = momentum_forcing(state, &m_prev, &self.params, self.disc);
            for (kr, f) in reg.keta.iter_mut().zip(&f_eta) {
                *kr = a * *kr + dt * f;
            }
            let eta_new: Vec<f64> = state.eta.iter().zip(&reg.keta).map(|(e, kr)| e + b * kr).collect();
            let zero = vec![0.0; eta_new.len()];
            let m_k = self.metrics(&eta_new, &zero, k + 1).map_err(wrap(k + 1))?;
            let inp = StageInputs {
                u: &state.u,
                w: &state.w,
                ku: &reg.ku,
                kw: &reg.kw,
                fu_rest: &fu,
                fw_rest: &fw,
                alpha: a,
                beta: b,
                dt,
                rho,
            };
            let sys = build_poisson_rhs(&inp, &m_k, self.disc, self.solver.tol).map_err(wrap(k + 1))?;
            let mut p = if self.solver.warm_start { state.p_d.clone() } else { vec![0.0; n] };
            let stats = solve_pressure(&sys, &m_k, &m_prev, self.disc, self.hier, &self.solver, &mut p)
                .map_err(wrap(k + 1))?;
            let (px, pz) = physical_gradient(&p, &m_prev, self.disc);
            for g in 0..n {
                reg.ku[g] = a * reg.ku[g] + dt * (fu[g] - px[g] / rho);
                reg.kw[g] = a * reg.kw[g] + dt * (fw[g] - pz[g] / rho);
                state.u[g] += b * reg.ku[g];
                state.w[g] += b * reg.kw[g];
            }
            state.eta = eta_new;
            let divergence = divergence_report(&sys, &p, &state.u, &state.w, &m_k, &m_prev, self.disc, b * dt / rho);
            state.p_d = p;
            report.stages.push(StageRecord {
                stage: k + 1,
                iterations: stats.iterations,
                residual: stats.residual,
                divergence,
                seconds: start.elapsed().as_secs_f64(),
                solve_seconds: stats.seconds,
            });
        }
        state.t += dt;
        if let (Some(zones), Some(prof)) = (&self.zones, &self.profiles) {
            apply_relaxation(state, prof, zones, &self.targets, self.bathy, self.disc).map_err(wrap(5))?;
        }
        if let Some(f) = &self.filter {
            apply_filter(state, f, self.disc);
        }
        Ok(report)
    }
}

/// `Δt = C min_columns Δx / (|u| + √(g d))` with `Δx` the local horizontal
/// node spacing.
pub fn stable_timestep(
    state: &FieldState,
    disc: &Discretization,
    bathy: &Bathymetry,
    params: &PhysicalParams,
    courant: f64,
) -> Result<f64> {
    if !(courant > 0.0 && courant <= 1.0) {
        return Err(Error::InvalidParameter(format!("courant number must lie in (0, 1], got {courant}")));
    }
    let x = &disc.trace.x;
    let nc = x.len();
    let nzn = disc.mesh.nzn;
    let (x0, x1) = disc.mesh.x_extent();
    let span = x1 - x0;
    let gap = |a: usize, b: usize| {
        let d = (x[b] - x[a]).abs();
        if disc.mesh.periodic() { d.min(span - d) } else { d }
    };
    let mut dt = f64::INFINITY;
    for c in 0..nc {
        let mut dx = f64::INFINITY;
        if c + 1 < nc {
            dx = dx.min(gap(c, c + 1));
        } else if disc.mesh.periodic() {
            dx = dx.min(span - (x[c] - x[0]));
        }
        if c > 0 {
            dx = dx.min(gap(c - 1, c));
        }
        let d = state.eta[c] + bathy.depth(x[c]);
        if !(d > 0.0) {
            return Err(Error::DepthGuard { x: x[c], depth: d, min: 0.0 });
        }
        let umax = (0..nzn).map(|j| state.u[c * nzn + j].abs()).fold(0.0, f64::max);
        dt = dt.min(dx / (umax + (params.g * d).sqrt()));
    }
    Ok(courant * dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Mesh, MeshSpec};
    use crate::reference_element::ReferenceElement;

    #[test]
    fn scheme_structure_and_exponential() {
        let s = lserk_coefficients();
        assert_eq!(s.a[0], 0.0);
        assert_eq!(s.c[0], 0.0);
        let y1 = lserk_scalar(|_, y| y, 1.0, 0.0, 0.1);
        assert!((y1 - 0.1f64.exp()).abs() < 1e-7);
    }

    #[test]
    fn fourth_order_on_linear_ode() {
        let err = |dt: f64| {
            let n = (1.0 / dt).round() as usize;
            let mut y = 1.0;
            for i in 0..n {
                y = lserk_scalar(|t, y| -2.0 * y + t.cos(), y, i as f64 * dt, dt);
            }
            // y' = -2y + cos t, y(0) = 1.
            let exact = (2.0 * 1f64.cos() + 1f64.sin()) / 5.0 + (1.0 - 0.4) * (-2.0f64).exp();
            (y - exact).abs()
        };
        let r = err(0.05) / err(0.025);
        assert!((r / 16.0 - 1.0).abs() < 0.2, "ratio {r}");
    }

    fn disc(p: usize) -> Discretization {
        let el = ReferenceElement::new(p, p).unwrap();
        let mesh = Mesh::build(&MeshSpec::new(4, 2, 0.0, 8.0), &el).unwrap();
        Discretization::new(el, mesh).unwrap()
    }

    #[test]
    fn timestep_rules() {
        let bathy = Bathymetry::Flat { h: 1.0 };
        let d4 = disc(4);
        let s = FieldState::still(&d4);
        let p = PhysicalParams::default();
        let dt = stable_timestep(&s, &d4, &bathy, &p, 0.5).unwrap();
        let dx = d4.mesh.min_spacing().0;
        assert!((dt - 0.5 * dx / 9.81f64.sqrt()).abs() < 1e-14);
        let d8 = disc(8);
        assert!(stable_timestep(&FieldState::still(&d8), &d8, &bathy, &p, 0.5).unwrap() < dt);
        assert!(stable_timestep(&s, &d4, &bathy, &p, 0.0).is_err());
    }

    #[test]
    fn still_water_step_is_stationary() {
        let d = disc(4);
        let bathy = Bathymetry::Flat { h: 1.0 };
        let h = MgHierarchy::build(&d, &bathy, &SolverConfig::default()).unwrap();
        let integ = Integrator::new(&d, &bathy, PhysicalParams::default(), &h, SolverConfig::default())
            .with_filter(SpectralFilter::default_for(&d).unwrap());
        let mut s = FieldState::still(&d);
        let rep = integ.step(&mut s, 0.01, 0).unwrap();
        assert_eq!(rep.stages.len(), 5);
        assert!(s.u.iter().chain(&s.w).chain(&s.eta).all(|v| v.abs() < 1e-10));
        assert!((s.t - 0.01).abs() < 1e-15);
    }
}
