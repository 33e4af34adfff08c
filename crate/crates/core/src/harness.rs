//! Experiment drivers: configured simulations, the one-step convergence
//! study, the submerged-bar benchmark, the pressure-solver scaling study and
//! stream-function dumps.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dynamics::{FieldState, PhysicalParams, RelaxationTargets, RelaxationZone, RelaxationZones, SpectralFilter, ZoneMode};
use crate::mesh::{Bathymetry, Mesh, MeshSpec};
use crate::mg_solver::{MgHierarchy, OuterMethod, SolverConfig};
use crate::operators::Discretization;
use crate::reference_element::{FilterSpec, ReferenceElement};
use crate::time_integration::{stable_timestep, Integrator, StepReport};
use crate::wave_theory::{
    max_steepness, streamfunction_best, streamfunction_solve, AiryWave, StreamFnSolution, WaveField, WaveSample,
    WaveSpec, GRAVITY,
};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Config plumbing

/// Parses a TOML or JSON config; JSON is chosen by a `.json` extension.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    parse_config(&text, json).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_config<T: DeserializeOwned>(text: &str, json: bool) -> Result<T> {
    if json {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    } else {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

pub fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Config(e.to_string()))
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub nx: usize,
    pub nz: usize,
    pub x0: f64,
    pub x1: f64,
    #[serde(default)]
    pub periodic: bool,
    #[serde(default = "one")]
    pub sigma_ratio: f64,
    pub px: usize,
    /// Vertical order; defaults to `px`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pz: Option<usize>,
}

impl MeshConfig {
    pub fn discretization(&self) -> Result<Discretization> {
        let el = ReferenceElement::new(self.px, self.pz.unwrap_or(self.px))?;
        let spec = MeshSpec {
            nx: self.nx,
            nz: self.nz,
            x0: self.x0,
            x1: self.x1,
            periodic: self.periodic,
            sigma_ratio: self.sigma_ratio,
        };
        let mesh = Mesh::build(&spec, &el)?;
        Discretization::new(el, mesh)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theory {
    #[default]
    StreamFunction,
    Airy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveConfig {
    #[serde(default)]
    pub theory: Theory,
    pub height: f64,
    pub depth: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(default)]
    pub x_crest: f64,
    /// Stream-function order; picked from a candidate list when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_sf: Option<usize>,
    /// Cosine ramp of the relaxation target over this many periods.
    #[serde(default)]
    pub ramp_periods: f64,
}

/// Candidate stream-function orders for automatic selection.
pub const SF_ORDERS: [usize; 10] = [16, 20, 24, 28, 32, 40, 48, 56, 64, 80];

impl WaveConfig {
    pub fn spec(&self) -> WaveSpec {
        WaveSpec { height: self.height, depth: self.depth, length: self.length, period: self.period, x_crest: self.x_crest }
    }

    pub fn build(&self, params: &PhysicalParams) -> Result<BuiltWave> {
        let spec = self.spec();
        spec.validate()?;
        if !(self.ramp_periods >= 0.0) {
            return Err(Error::Config(format!("ramp_periods must be >= 0, got {}", self.ramp_periods)));
        }
        let inner = match self.theory {
            Theory::Airy => WaveKind::Airy(AiryWave::new(&spec, params.rho, params.g)?),
            Theory::StreamFunction => WaveKind::Stream(Box::new(match self.n_sf {
                Some(n) => streamfunction_solve(&spec, n, params.rho, params.g)?,
                None => streamfunction_best(&spec, &SF_ORDERS, params.rho, params.g)?,
            })),
        };
        let period = inner.period();
        Ok(BuiltWave { inner, depth: self.depth, t_ramp: self.ramp_periods * period })
    }
}

#[derive(Debug, Clone)]
pub enum WaveKind {
    Airy(AiryWave),
    Stream(Box<StreamFnSolution>),
}

impl WaveKind {
    pub fn period(&self) -> f64 {
        match self {
            Self::Airy(a) => a.period(),
            Self::Stream(s) => s.period,
        }
    }

    fn field(&self) -> &dyn WaveField {
        match self {
            Self::Airy(a) => a,
            Self::Stream(s) => s.as_ref(),
        }
    }
}

/// A wave with an optional start-up ramp. During the ramp the surface is
/// scaled by `r(t)` and interior points are mapped onto the full wave by
/// their relative height in the water column.
#[derive(Debug, Clone)]
pub struct BuiltWave {
    pub inner: WaveKind,
    pub depth: f64,
    pub t_ramp: f64,
}

impl BuiltWave {
    pub fn period(&self) -> f64 {
        self.inner.period()
    }

    pub fn ramp(&self, t: f64) -> f64 {
        if self.t_ramp <= 0.0 || t >= self.t_ramp {
            1.0
        } else if t <= 0.0 {
            0.0
        } else {
            0.5 * (1.0 - (std::f64::consts::PI * t / self.t_ramp).cos())
        }
    }

    fn scaled(&self, x: f64, z: f64, t: f64) -> (f64, f64) {
        let r = self.ramp(t);
        let eta = self.inner.field().eta(x, t);
        let h = self.depth;
        let s = (z + h) / (r * eta + h);
        (r, s * (eta + h) - h)
    }
}

impl WaveField for BuiltWave {
    fn eta(&self, x: f64, t: f64) -> f64 {
        self.ramp(t) * self.inner.field().eta(x, t)
    }

    fn eval(&self, x: f64, z: f64, t: f64) -> Result<WaveSample> {
        let (r, zf) = self.scaled(x, z, t);
        let s = self.inner.field().eval(x, zf, t)?;
        Ok(WaveSample { eta: r * s.eta, u: r * s.u, w: r * s.w, p_d: r * s.p_d })
    }

    fn eval_unchecked(&self, x: f64, z: f64, t: f64) -> WaveSample {
        let (r, zf) = self.scaled(x, z, t);
        let s = self.inner.field().eval_unchecked(x, zf, t);
        WaveSample { eta: r * s.eta, u: r * s.u, w: r * s.w, p_d: r * s.p_d }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    #[default]
    Still,
    /// The configured wave at `t = 0`, without ramp.
    Wave,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { enabled: true, cutoff: None, alpha: None, beta: None }
    }
}

impl FilterConfig {
    pub fn build(&self, disc: &Discretization) -> Result<Option<SpectralFilter>> {
        if !self.enabled {
            return Ok(None);
        }
        let base = FilterSpec::default_for(disc.el.px.max(disc.el.pz));
        let spec = FilterSpec {
            cutoff: self.cutoff.unwrap_or(base.cutoff),
            alpha: self.alpha.unwrap_or(base.alpha),
            beta: self.beta.unwrap_or(base.beta),
        };
        spec.validate()?;
        if self.cutoff.is_none() && self.alpha.is_none() && self.beta.is_none() {
            return SpectralFilter::default_for(disc).map(Some);
        }
        SpectralFilter::new(spec, disc).map(Some)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub end_time: f64,
    /// Fixed step; otherwise `courant` times the stable step of the initial state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub courant: Option<f64>,
    #[serde(default = "one_usize")]
    pub gauge_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("output")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_out_dir() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub mesh: MeshConfig,
    pub bathymetry: Bathymetry,
    #[serde(default)]
    pub physics: PhysicalParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wave: Option<WaveConfig>,
    #[serde(default)]
    pub initial: InitialCondition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zones: Option<RelaxationZones>,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub gauges: Vec<f64>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        self.bathymetry.validate()?;
        self.physics.validate()?;
        self.solver.validate()?;
        if let Some(z) = &self.zones {
            z.validate()?;
            if z.has_generation() && self.wave.is_none() {
                return cfg("a generation zone needs a [wave] section".into());
            }
        }
        if self.initial == InitialCondition::Wave && self.wave.is_none() {
            return cfg("initial = \"wave\" needs a [wave] section".into());
        }
        if !(self.mesh.x1 > self.mesh.x0) {
            return cfg(format!("mesh extent [{}, {}] is empty", self.mesh.x0, self.mesh.x1));
        }
        if let Some(g) = self.gauges.iter().find(|&&g| g < self.mesh.x0 || g > self.mesh.x1) {
            return cfg(format!("gauge at x = {g} lies outside the mesh"));
        }
        let t = &self.time;
        if !(t.end_time > 0.0) {
            return cfg(format!("end_time must be positive, got {}", t.end_time));
        }
        if t.dt.is_some_and(|dt| !(dt > 0.0)) {
            return cfg("dt must be positive".into());
        }
        if t.dt.is_some() && t.courant.is_some() {
            return cfg("give either dt or courant, not both".into());
        }
        if t.gauge_every == 0 {
            return cfg("gauge_every must be at least 1".into());
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Diagnostics

/// Interpolation weights of the surface trace at `x`.
pub fn trace_weights(disc: &Discretization, x: f64) -> Result<Vec<(usize, f64)>> {
    let tr = &disc.trace;
    let (x0, x1) = disc.mesh.x_extent();
    if !(x >= x0 && x <= x1) {
        return Err(Error::InvalidParameter(format!("x = {x} outside [{x0}, {x1}]")));
    }
    let p = tr.basis.p;
    let mut left = x0;
    for (e, &h) in tr.sizes.iter().enumerate() {
        if x <= left + h || e + 1 == tr.n_el {
            let xi = (2.0 * (x - left) / h - 1.0).clamp(-1.0, 1.0);
            let row = tr.basis.eval_row(xi);
            return Ok(row.into_iter().enumerate().map(|(a, w)| ((e * p + a) % tr.n, w)).collect());
        }
        left += h;
    }
    unreachable!("trace has at least one element")
}

/// Kinetic plus potential energy relative to still water, per unit width.
pub fn energy(state: &FieldState, disc: &Discretization, bathy: &Bathymetry, params: &PhysicalParams) -> f64 {
    let el = &disc.el;
    let nz = el.nz();
    let nzn = disc.mesh.nzn;
    let mut kin = 0.0;
    for (e, geom) in disc.mesh.elements.iter().enumerate() {
        for (q, &g) in disc.mesh.ids(e).iter().enumerate() {
            let c = g / nzn;
            let d = state.eta[c] + bathy.depth(disc.trace.x[c]);
            let w = el.bx.weights[q / nz] * el.bz.weights[q % nz];
            kin += geom.detj * w * d * (state.u[g] * state.u[g] + state.w[g] * state.w[g]);
        }
    }
    let eta2: Vec<f64> = state.eta.iter().map(|e| e * e).collect();
    0.5 * params.rho * (kin + params.g * disc.trace.integrate(&eta2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeRecord {
    pub t: f64,
    pub eta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatRow {
    pub step: usize,
    pub stage: usize,
    pub t: f64,
    pub dof: usize,
    pub method: &'static str,
    pub tolerance: f64,
    pub iterations: usize,
    pub residual: f64,
    pub divergence_ratio: f64,
    pub nodal_divergence_ratio: f64,
    pub wall_time: f64,
}

fn stat_rows<'a>(report: &'a StepReport, step: usize, t: f64, dof: usize, solver: &SolverConfig) -> impl Iterator<Item = StatRow> + 'a {
    let method = solver.method.name();
    let tolerance = solver.tol;
    report.stages.iter().map(move |s| StatRow {
        step,
        stage: s.stage,
        t,
        dof,
        method,
        tolerance,
        iterations: s.iterations,
        residual: s.residual,
        divergence_ratio: s.divergence.algebraic_ratio(),
        nodal_divergence_ratio: s.divergence.nodal_ratio(),
        wall_time: s.solve_seconds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: usize,
    pub dt: f64,
    pub t_end: f64,
    pub dof: usize,
    pub method: String,
    pub tolerance: f64,
    /// Largest weak-divergence residual over all stages, relative to the
    /// right-hand-side scale.
    pub max_divergence_ratio: f64,
    pub max_nodal_divergence_ratio: f64,
    pub mean_iterations: f64,
    pub max_iterations: usize,
    pub energy_initial: f64,
    pub energy_final: f64,
    /// Relative change, or the absolute change when the initial energy is zero.
    pub energy_drift: f64,
    pub max_abs_eta: f64,
    pub max_abs_u: f64,
    pub wall_seconds: f64,
}

pub struct RunOutput {
    pub summary: RunSummary,
    pub gauges: Vec<GaugeRecord>,
    pub stats: Vec<StatRow>,
    pub state: FieldState,
    pub disc: Discretization,
    pub wave: Option<BuiltWave>,
}

// ---------------------------------------------------------------------------
// Simulation

/// Runs a configured simulation in memory.
pub fn run(cfg: &SimulationConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let started = Instant::now();
    let disc = cfg.mesh.discretization()?;
    let bathy = &cfg.bathymetry;
    let params = cfg.physics;
    let wave = cfg.wave.as_ref().map(|w| w.build(&params)).transpose()?;
    let hier = MgHierarchy::build(&disc, bathy, &cfg.solver)?;
    let mut integ = Integrator::new(&disc, bathy, params, &hier, cfg.solver);
    if let Some(f) = cfg.filter.build(&disc)? {
        integ = integ.with_filter(f);
    }
    if let Some(z) = &cfg.zones {
        let targets = RelaxationTargets { wave: wave.as_ref().map(|w| w as &dyn WaveField) };
        integ = integ.with_relaxation(z.clone(), targets);
    }
    let mut state = match (cfg.initial, &wave) {
        (InitialCondition::Wave, Some(w)) => FieldState::from_wave(&disc, bathy, w.inner.field(), 0.0)?,
        _ => FieldState::still(&disc),
    };
    let dt0 = match cfg.time.dt {
        Some(dt) => dt,
        None => stable_timestep(&state, &disc, bathy, &params, cfg.time.courant.unwrap_or(0.5))?,
    };
    let steps = (cfg.time.end_time / dt0).ceil().max(1.0) as usize;
    let dt = cfg.time.end_time / steps as f64;

    let probes: Vec<Vec<(usize, f64)>> = cfg.gauges.iter().map(|&x| trace_weights(&disc, x)).collect::<Result<_>>()?;
    let sample = |s: &FieldState| GaugeRecord {
        t: s.t,
        eta: probes.iter().map(|w| w.iter().map(|&(i, c)| c * s.eta[i]).sum()).collect(),
    };
    let dof = disc.n_nodes();
    let e0 = energy(&state, &disc, bathy, &params);
    let mut gauges = vec![sample(&state)];
    let mut stats = Vec::with_capacity(5 * steps);
    for n in 0..steps {
        let report = integ.step(&mut state, dt, n)?;
        stats.extend(stat_rows(&report, n + 1, state.t, dof, &cfg.solver));
        if (n + 1) % cfg.time.gauge_every == 0 || n + 1 == steps {
            gauges.push(sample(&state));
        }
    }
    let e1 = energy(&state, &disc, bathy, &params);
    let its: Vec<usize> = stats.iter().map(|s| s.iterations).collect();
    let summary = RunSummary {
        steps,
        dt,
        t_end: state.t,
        dof,
        method: cfg.solver.method.name().into(),
        tolerance: cfg.solver.tol,
        max_divergence_ratio: stats.iter().map(|s| s.divergence_ratio).fold(0.0, f64::max),
        max_nodal_divergence_ratio: stats.iter().map(|s| s.nodal_divergence_ratio).fold(0.0, f64::max),
        mean_iterations: its.iter().sum::<usize>() as f64 / its.len().max(1) as f64,
        max_iterations: its.iter().copied().max().unwrap_or(0),
        energy_initial: e0,
        energy_final: e1,
        energy_drift: if e0 > 0.0 { (e1 - e0) / e0 } else { e1 - e0 },
        max_abs_eta: state.eta.iter().fold(0.0, |m, v| m.max(v.abs())),
        max_abs_u: state.u.iter().fold(0.0, |m, v| m.max(v.abs())),
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(RunOutput { summary, gauges, stats, state, disc, wave })
}

fn csv_writer(dir: &Path, name: &str) -> Result<csv::Writer<fs::File>> {
    fs::create_dir_all(dir)?;
    csv::Writer::from_path(dir.join(name)).map_err(csv_err)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

fn write_rows<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<()> {
    let mut w = csv_writer(dir, name)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    fs::create_dir_all(dir)?;
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(dir.join(name), text + "\n")?;
    Ok(())
}

pub fn write_gauges(dir: &Path, xs: &[f64], gauges: &[GaugeRecord]) -> Result<()> {
    let mut w = csv_writer(dir, "gauges.csv")?;
    let mut head = vec!["t".to_string()];
    head.extend(xs.iter().map(|x| format!("eta_x{x}")));
    w.write_record(&head).map_err(csv_err)?;
    for g in gauges {
        let mut rec = vec![format!("{:.10e}", g.t)];
        rec.extend(g.eta.iter().map(|v| format!("{v:.10e}")));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct StateRow {
    x_star: f64,
    sigma: f64,
    u: f64,
    w: f64,
    p_d: f64,
}

pub fn write_state(dir: &Path, state: &FieldState, disc: &Discretization) -> Result<()> {
    let rows: Vec<StateRow> = (0..disc.n_nodes())
        .map(|g| {
            let (x, s) = disc.mesh.coord(g);
            StateRow { x_star: x, sigma: s, u: state.u[g], w: state.w[g], p_d: state.p_d[g] }
        })
        .collect();
    write_rows(dir, "state_final.csv", &rows)
}

/// Runs a simulation and writes `gauges.csv`, `solver_stats.csv`,
/// `state_final.csv` and `summary.json` to the configured directory.
pub fn run_simulation(cfg: &SimulationConfig) -> Result<RunOutput> {
    let out = run(cfg)?;
    let dir = &cfg.output.dir;
    write_gauges(dir, &cfg.gauges, &out.gauges)?;
    write_rows(dir, "solver_stats.csv", &out.stats)?;
    write_state(dir, &out.state, &out.disc)?;
    write_json(dir, "summary.json", &out.summary)?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// One-step convergence study

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceCase {
    pub kh: f64,
    /// Fraction of the limiting steepness.
    pub steepness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceConfig {
    pub nx: usize,
    pub nz: usize,
    pub depth: f64,
    pub orders: Vec<usize>,
    pub cases: Vec<ConvergenceCase>,
    /// Time step as a fraction of the wave period.
    pub dt_periods: f64,
    pub solver: SolverConfig,
    /// Stream-function orders to choose the oracle from.
    pub sf_orders: Vec<usize>,
    pub max_ratio: f64,
    pub plateau_max: f64,
    pub physics: PhysicalParams,
    pub output: OutputConfig,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        let mut cases = Vec::new();
        for kh in [0.5, 2.0, 2.0 * std::f64::consts::PI] {
            for steepness in [0.1, 0.5, 0.9] {
                cases.push(ConvergenceCase { kh, steepness });
            }
        }
        Self {
            nx: 20,
            nz: 2,
            depth: 1.0,
            orders: vec![2, 4, 6, 8, 10, 12, 14],
            cases,
            dt_periods: 1e-3,
            solver: SolverConfig { tol: 1e-12, ..Default::default() },
            sf_orders: SF_ORDERS.to_vec(),
            max_ratio: 0.3,
            plateau_max: 1e-9,
            physics: PhysicalParams { nu: 0.0, ..Default::default() },
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub kh: f64,
    pub steepness: f64,
    pub n_sf: usize,
    pub p: usize,
    pub dof: usize,
    pub dt: f64,
    pub err_u: f64,
    pub err_w: f64,
    pub max_iterations: usize,
    pub oracle_residual: f64,
}

/// Spectral-decay verdict for one case.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayVerdict {
    pub kh: f64,
    pub steepness: f64,
    /// Orders in the decaying regime.
    pub decaying: usize,
    pub max_ratio: f64,
    /// Geometric mean of `err(P+2)/err(P)` in the decaying regime.
    pub mean_ratio: f64,
    pub plateau: f64,
    pub pass: bool,
}

/// The decaying regime runs until the first ratio above `max_ratio`; the
/// case passes when at least two ratios decay and every later error lies
/// below `plateau_max`.
pub fn decay_verdict(kh: f64, steepness: f64, errs: &[f64], max_ratio: f64, plateau_max: f64) -> DecayVerdict {
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[1] / w[0]).collect();
    let j = ratios.iter().position(|&r| !(r <= max_ratio)).unwrap_or(ratios.len());
    let dec = &ratios[..j];
    let plateau = errs[j..].iter().copied().fold(0.0, f64::max);
    let mean = if dec.is_empty() { f64::NAN } else { (dec.iter().map(|r| r.ln()).sum::<f64>() / dec.len() as f64).exp() };
    DecayVerdict {
        kh,
        steepness,
        decaying: j,
        max_ratio: dec.iter().copied().fold(0.0, f64::max),
        mean_ratio: mean,
        plateau,
        pass: j >= 2 && plateau <= plateau_max,
    }
}

/// Error of one step from the exact wave against the exact wave one step later.
pub fn one_step_error(
    sol: &StreamFnSolution,
    nx: usize,
    nz: usize,
    p: usize,
    dt: f64,
    solver: &SolverConfig,
    params: &PhysicalParams,
) -> Result<(f64, f64, usize, usize)> {
    let el = ReferenceElement::new(p, p)?;
    let mesh = Mesh::build(&MeshSpec::new(nx, nz, 0.0, sol.length).periodic(), &el)?;
    let disc = Discretization::new(el, mesh)?;
    let bathy = Bathymetry::Flat { h: sol.depth };
    let hier = MgHierarchy::build(&disc, &bathy, solver)?;
    let integ = Integrator::new(&disc, &bathy, *params, &hier, *solver);
    let mut s = FieldState::from_wave(&disc, &bathy, sol, 0.0)?;
    let rep = integ.step(&mut s, dt, 0)?;
    let z = s.node_z(&disc, &bathy);
    let (mut eu, mut ew) = (0.0f64, 0.0f64);
    for (g, &zg) in z.iter().enumerate() {
        let e = sol.eval_unchecked(disc.trace.x[g / disc.mesh.nzn], zg, s.t);
        eu = eu.max((s.u[g] - e.u).abs());
        ew = ew.max((s.w[g] - e.w).abs());
    }
    let its = rep.stages.iter().map(|r| r.iterations).max().unwrap_or(0);
    Ok((eu, ew, its, disc.n_nodes()))
}

pub struct ConvergenceOutput {
    pub rows: Vec<ConvergenceRow>,
    pub verdicts: Vec<DecayVerdict>,
}

pub fn convergence_study(cfg: &ConvergenceConfig) -> Result<ConvergenceOutput> {
    cfg.solver.validate()?;
    cfg.physics.validate()?;
    if cfg.orders.len() < 2 || cfg.cases.is_empty() {
        return Err(Error::Config("convergence study needs at least two orders and one case".into()));
    }
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    for case in &cfg.cases {
        let spec = WaveSpec::from_steepness(case.kh, case.steepness, cfg.depth);
        let sol = streamfunction_best(&spec, &cfg.sf_orders, cfg.physics.rho, cfg.physics.g)?;
        let dt = cfg.dt_periods * sol.period;
        let mut errs = Vec::new();
        for &p in &cfg.orders {
            let (eu, ew, its, dof) = one_step_error(&sol, cfg.nx, cfg.nz, p, dt, &cfg.solver, &cfg.physics)?;
            errs.push(eu);
            rows.push(ConvergenceRow {
                kh: case.kh,
                steepness: case.steepness,
                n_sf: sol.n_sf,
                p,
                dof,
                dt,
                err_u: eu,
                err_w: ew,
                max_iterations: its,
                oracle_residual: sol.surface_residual(),
            });
        }
        verdicts.push(decay_verdict(case.kh, case.steepness, &errs, cfg.max_ratio, cfg.plateau_max));
    }
    Ok(ConvergenceOutput { rows, verdicts })
}

/// Writes `convergence.csv` and `convergence_verdict.csv`.
pub fn run_convergence(cfg: &ConvergenceConfig) -> Result<ConvergenceOutput> {
    let out = convergence_study(cfg)?;
    write_rows(&cfg.output.dir, "convergence.csv", &out.rows)?;
    write_rows(&cfg.output.dir, "convergence_verdict.csv", &out.verdicts)?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Submerged bar

/// Flume stations behind the six comparison panels.
pub const BAR_GAUGES: [f64; 6] = [10.5, 12.5, 13.5, 14.5, 15.7, 17.3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BarConfig {
    pub height: f64,
    pub length: f64,
    pub depth: f64,
    pub nx: usize,
    pub nz: usize,
    pub p: usize,
    pub x_end: f64,
    /// Generation zone length in wavelengths, placed left of `x = 0`.
    pub generation_wavelengths: f64,
    pub absorption_start: f64,
    pub duration: f64,
    pub courant: f64,
    pub ramp_periods: f64,
    pub n_sf: Option<usize>,
    pub bathymetry: Bathymetry,
    pub gauges: Vec<f64>,
    pub solver: SolverConfig,
    pub filter: FilterConfig,
    pub physics: PhysicalParams,
    pub harmonics: usize,
    /// Length of the analysis window at the end of the record, in periods.
    pub analysis_periods: usize,
    pub output: OutputConfig,
}

impl Default for BarConfig {
    fn default() -> Self {
        Self {
            height: 0.02,
            length: 3.74,
            depth: 0.4,
            nx: 100,
            nz: 2,
            p: 8,
            x_end: 35.0,
            generation_wavelengths: 1.0,
            absorption_start: 25.0,
            duration: 40.0,
            courant: 0.5,
            ramp_periods: 2.0,
            n_sf: Some(32),
            bathymetry: Bathymetry::submerged_bar(),
            gauges: BAR_GAUGES.to_vec(),
            solver: SolverConfig { tol: 1e-8, ..Default::default() },
            filter: FilterConfig::default(),
            physics: PhysicalParams::default(),
            harmonics: 5,
            analysis_periods: 8,
            output: OutputConfig::default(),
        }
    }
}

impl BarConfig {
    pub fn simulation(&self) -> SimulationConfig {
        let x0 = -self.generation_wavelengths * self.length;
        SimulationConfig {
            mesh: MeshConfig { nx: self.nx, nz: self.nz, x0, x1: self.x_end, periodic: false, sigma_ratio: 1.0, px: self.p, pz: None },
            bathymetry: self.bathymetry.clone(),
            physics: self.physics,
            wave: Some(WaveConfig {
                theory: Theory::StreamFunction,
                height: self.height,
                depth: self.depth,
                length: Some(self.length),
                period: None,
                x_crest: 0.0,
                n_sf: self.n_sf,
                ramp_periods: self.ramp_periods,
            }),
            initial: InitialCondition::Still,
            zones: Some(RelaxationZones {
                zones: vec![
                    RelaxationZone { x_start: x0, x_end: 0.0, mode: ZoneMode::Generation },
                    RelaxationZone { x_start: self.absorption_start, x_end: self.x_end, mode: ZoneMode::Absorption },
                ],
                pairing: Default::default(),
            }),
            filter: self.filter.clone(),
            solver: self.solver,
            time: TimeConfig { end_time: self.duration, dt: None, courant: Some(self.courant), gauge_every: 1 },
            gauges: self.gauges.clone(),
            output: self.output.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmonicRow {
    pub gauge: usize,
    pub x: f64,
    pub amplitudes: Vec<f64>,
    /// Share of the energy of the resolved harmonics carried by orders 2 and up.
    pub higher_fraction: f64,
    pub fundamental_fraction: f64,
}

/// Fourier amplitudes of `eta` at the first `n` multiples of `1/period`,
/// over the last `window` periods of the record (mean removed).
pub fn harmonic_amplitudes(t: &[f64], eta: &[f64], period: f64, n: usize, window: usize) -> Vec<f64> {
    let t_end = t.last().copied().unwrap_or(0.0);
    let t0 = t_end - window as f64 * period;
    let idx: Vec<usize> = (0..t.len()).filter(|&i| t[i] > t0 + 1e-12).collect();
    let m = idx.len().max(1) as f64;
    let mean = idx.iter().map(|&i| eta[i]).sum::<f64>() / m;
    let om = 2.0 * std::f64::consts::PI / period;
    (1..=n)
        .map(|k| {
            let (mut c, mut s) = (0.0, 0.0);
            for &i in &idx {
                let ph = k as f64 * om * t[i];
                c += (eta[i] - mean) * ph.cos();
                s += (eta[i] - mean) * ph.sin();
            }
            2.0 * (c * c + s * s).sqrt() / m
        })
        .collect()
}

pub struct BarOutput {
    pub run: RunOutput,
    pub period: f64,
    pub harmonics: Vec<HarmonicRow>,
}

pub fn bar_benchmark(cfg: &BarConfig) -> Result<BarOutput> {
    if cfg.harmonics == 0 || cfg.analysis_periods == 0 {
        return Err(Error::Config("harmonics and analysis_periods must be positive".into()));
    }
    let sim = cfg.simulation();
    let run = run(&sim)?;
    let period = run.wave.as_ref().map(|w| w.period()).expect("bar preset has a wave");
    if cfg.duration < cfg.analysis_periods as f64 * period {
        return Err(Error::Config(format!(
            "duration {} s is shorter than the analysis window of {} periods",
            cfg.duration, cfg.analysis_periods
        )));
    }
    let t: Vec<f64> = run.gauges.iter().map(|g| g.t).collect();
    let harmonics = cfg
        .gauges
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let eta: Vec<f64> = run.gauges.iter().map(|g| g.eta[i]).collect();
            let a = harmonic_amplitudes(&t, &eta, period, cfg.harmonics, cfg.analysis_periods);
            let total: f64 = a.iter().map(|v| v * v).sum();
            let first = a[0] * a[0];
            HarmonicRow {
                gauge: i,
                x,
                higher_fraction: if total > 0.0 { (total - first) / total } else { 0.0 },
                fundamental_fraction: if total > 0.0 { first / total } else { 0.0 },
                amplitudes: a,
            }
        })
        .collect();
    Ok(BarOutput { run, period, harmonics })
}

/// Runs the bar benchmark and writes the simulation files plus `harmonics.csv`.
pub fn run_bar(cfg: &BarConfig) -> Result<BarOutput> {
    let out = bar_benchmark(cfg)?;
    let dir = &cfg.output.dir;
    write_gauges(dir, &cfg.gauges, &out.run.gauges)?;
    write_rows(dir, "solver_stats.csv", &out.run.stats)?;
    write_state(dir, &out.run.state, &out.run.disc)?;
    write_json(dir, "summary.json", &out.run.summary)?;
    let mut w = csv_writer(dir, "harmonics.csv")?;
    let mut head = vec!["gauge".to_string(), "x".into()];
    head.extend((1..=cfg.harmonics).map(|k| format!("a{k}")));
    head.extend(["higher_fraction".to_string(), "fundamental_fraction".into()]);
    w.write_record(&head).map_err(csv_err)?;
    for h in &out.harmonics {
        let mut rec = vec![h.gauge.to_string(), h.x.to_string()];
        rec.extend(h.amplitudes.iter().map(|a| format!("{a:.6e}")));
        rec.extend([format!("{:.6}", h.higher_fraction), format!("{:.6}", h.fundamental_fraction)]);
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Solver efficiency

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MgBenchConfig {
    pub kh: f64,
    pub depth: f64,
    /// Wave steepness `H/L` of the table case.
    pub steepness: f64,
    pub wavelengths: usize,
    pub nx: usize,
    pub px: usize,
    pub pz: usize,
    pub nz: usize,
    pub tolerances: Vec<f64>,
    pub methods: Vec<OuterMethod>,
    pub sweep_nx: Vec<usize>,
    pub sweep_px: Vec<usize>,
    pub sweep_px_nx: usize,
    pub sweep_tol: f64,
    /// Target points per wavelength in the sweeps.
    pub ppw: f64,
    /// Fraction of the limiting steepness for the mild-wave robustness check.
    pub mild_steepness: Option<f64>,
    pub courant: f64,
    pub n_sf: usize,
    /// Steps taken before the measured one, so warm starts see a computed
    /// pressure rather than the exact one.
    pub warmup_steps: usize,
    pub solver: SolverConfig,
    pub physics: PhysicalParams,
    pub output: OutputConfig,
}

impl Default for MgBenchConfig {
    fn default() -> Self {
        Self {
            kh: 1.0,
            depth: 1.0,
            steepness: 0.0301,
            wavelengths: 17,
            nx: 102,
            px: 8,
            pz: 8,
            nz: 2,
            tolerances: vec![1e-4, 1e-6, 1e-8],
            methods: vec![OuterMethod::Pdc, OuterMethod::Gmres],
            sweep_nx: vec![25, 50, 100, 200, 400],
            sweep_px: vec![4, 6, 8, 12, 16],
            sweep_px_nx: 200,
            sweep_tol: 1e-6,
            ppw: 48.0,
            mild_steepness: Some(0.01),
            courant: 0.5,
            n_sf: 32,
            warmup_steps: 2,
            solver: SolverConfig::default(),
            physics: PhysicalParams::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub study: &'static str,
    pub nx: usize,
    pub px: usize,
    pub pz: usize,
    pub wavelengths: usize,
    pub steepness: f64,
    pub dof: usize,
    pub method: &'static str,
    pub tolerance: f64,
    /// Mean outer iterations over the five stages of one step.
    pub iterations: f64,
    pub max_iterations: usize,
    /// Mean solve time per stage.
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub study: &'static str,
    pub method: &'static str,
    /// Exponent of the least-squares fit `t = c n^alpha`.
    pub alpha: f64,
    pub min_iterations: f64,
    pub max_iterations: f64,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// One measured LSERK step on a periodic stream-function wave, after the
/// configured warm-up steps; returns per-stage iteration counts and solve times.
#[allow(clippy::too_many_arguments)]
pub fn bench_step(
    cfg: &MgBenchConfig,
    h_over_l: f64,
    nx: usize,
    px: usize,
    wavelengths: usize,
    method: OuterMethod,
    tol: f64,
) -> Result<(usize, Vec<usize>, Vec<f64>)> {
    let length = 2.0 * std::f64::consts::PI * cfg.depth / cfg.kh;
    let spec = WaveSpec::with_length(h_over_l * length, length, cfg.depth);
    let sol = streamfunction_solve(&spec, cfg.n_sf, cfg.physics.rho, cfg.physics.g)?;
    let el = ReferenceElement::new(px, cfg.pz)?;
    let mesh = Mesh::build(&MeshSpec::new(nx, cfg.nz, 0.0, wavelengths as f64 * length).periodic(), &el)?;
    let disc = Discretization::new(el, mesh)?;
    let bathy = Bathymetry::Flat { h: cfg.depth };
    let solver = SolverConfig { method, tol, ..cfg.solver };
    let hier = MgHierarchy::build(&disc, &bathy, &solver)?;
    let integ = Integrator::new(&disc, &bathy, cfg.physics, &hier, solver);
    let mut s = FieldState::from_wave(&disc, &bathy, &sol, 0.0)?;
    let dt = stable_timestep(&s, &disc, &bathy, &cfg.physics, cfg.courant)?;
    for step in 0..cfg.warmup_steps {
        integ.step(&mut s, dt, step)?;
    }
    let rep = integ.step(&mut s, dt, cfg.warmup_steps)?;
    Ok((
        disc.n_nodes(),
        rep.stages.iter().map(|r| r.iterations).collect(),
        rep.stages.iter().map(|r| r.solve_seconds).collect(),
    ))
}

pub struct MgBenchOutput {
    pub rows: Vec<BenchRow>,
    pub fits: Vec<ScalingFit>,
}

#[allow(clippy::too_many_arguments)]
fn bench_row(
    cfg: &MgBenchConfig,
    study: &'static str,
    h_over_l: f64,
    nx: usize,
    px: usize,
    wl: usize,
    method: OuterMethod,
    tol: f64,
) -> Result<BenchRow> {
    let (dof, its, secs) = bench_step(cfg, h_over_l, nx, px, wl, method, tol)?;
    Ok(BenchRow {
        study,
        nx,
        px,
        pz: cfg.pz,
        wavelengths: wl,
        steepness: h_over_l,
        dof,
        method: method.name(),
        tolerance: tol,
        iterations: its.iter().sum::<usize>() as f64 / its.len() as f64,
        max_iterations: its.iter().copied().max().unwrap_or(0),
        wall_time: secs.iter().sum::<f64>() / secs.len() as f64,
    })
}

/// Table study at the configured tolerances only.
pub fn mg_table(cfg: &MgBenchConfig) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &m in &cfg.methods {
        for &tol in &cfg.tolerances {
            rows.push(bench_row(cfg, "table", cfg.steepness, cfg.nx, cfg.px, cfg.wavelengths, m, tol)?);
        }
    }
    if let Some(frac) = cfg.mild_steepness {
        let mild = frac * max_steepness(cfg.kh);
        for &m in &cfg.methods {
            rows.push(bench_row(cfg, "mild", mild, cfg.nx, cfg.px, cfg.wavelengths, m, cfg.sweep_tol)?);
        }
    }
    Ok(rows)
}

/// Sweeps over `Nx` at fixed order and over `Px` at fixed `Nx`, with fixed
/// points per wavelength.
pub fn mg_sweeps(cfg: &MgBenchConfig) -> Result<MgBenchOutput> {
    let wl = |nx: usize, px: usize| ((nx * px) as f64 / cfg.ppw).round().max(1.0) as usize;
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for &m in &cfg.methods {
        for (study, pts) in [
            ("sweep_nx", cfg.sweep_nx.iter().map(|&n| (n, cfg.px)).collect::<Vec<_>>()),
            ("sweep_px", cfg.sweep_px.iter().map(|&p| (cfg.sweep_px_nx, p)).collect()),
        ] {
            let start = rows.len();
            for (nx, px) in pts {
                rows.push(bench_row(cfg, study, cfg.steepness, nx, px, wl(nx, px), m, cfg.sweep_tol)?);
            }
            let part: &[BenchRow] = &rows[start..];
            if part.len() >= 2 {
                let n: Vec<f64> = part.iter().map(|r| r.dof as f64).collect();
                let t: Vec<f64> = part.iter().map(|r| r.wall_time).collect();
                fits.push(ScalingFit {
                    study,
                    method: m.name(),
                    alpha: loglog_slope(&n, &t),
                    min_iterations: part.iter().map(|r| r.iterations).fold(f64::INFINITY, f64::min),
                    max_iterations: part.iter().map(|r| r.iterations).fold(0.0, f64::max),
                });
            }
        }
    }
    Ok(MgBenchOutput { rows, fits })
}

/// Table and sweeps; writes `solver_stats.csv` and `scaling_fit.csv`.
pub fn mg_benchmark(cfg: &MgBenchConfig) -> Result<MgBenchOutput> {
    cfg.solver.validate()?;
    if !(cfg.kh > 0.0 && cfg.depth > 0.0 && cfg.steepness > 0.0 && cfg.ppw > 0.0) {
        return Err(Error::Config("kh, depth, steepness and ppw must be positive".into()));
    }
    let mut rows = mg_table(cfg)?;
    let sweeps = mg_sweeps(cfg)?;
    rows.extend(sweeps.rows);
    write_rows(&cfg.output.dir, "solver_stats.csv", &rows)?;
    write_rows(&cfg.output.dir, "scaling_fit.csv", &sweeps.fits)?;
    Ok(MgBenchOutput { rows, fits: sweeps.fits })
}

// ---------------------------------------------------------------------------
// Stream-function dump

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamFnConfig {
    pub height: f64,
    pub depth: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(default)]
    pub x_crest: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_sf: Option<usize>,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_g")]
    pub g: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_rho() -> f64 {
    crate::dynamics::RHO_WATER
}

fn default_g() -> f64 {
    GRAVITY
}

fn default_samples() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamFnSummary {
    pub n_sf: usize,
    pub wavenumber: f64,
    pub length: f64,
    pub period: f64,
    pub celerity: f64,
    pub kh: f64,
    pub steepness: f64,
    pub limit_fraction: f64,
    pub bernoulli_r: f64,
    pub flux_q: f64,
    pub newton_iterations: usize,
    pub collocation_residual: f64,
    pub surface_residual: f64,
    pub b: Vec<f64>,
}

#[derive(Serialize)]
struct ProfileRow {
    x: f64,
    eta: f64,
    u_surface: f64,
    w_surface: f64,
    u_bed: f64,
}

/// Solves the wave and writes `streamfn.json` and `streamfn_profile.csv`.
pub fn run_streamfn(cfg: &StreamFnConfig) -> Result<StreamFnSummary> {
    let spec = WaveSpec { height: cfg.height, depth: cfg.depth, length: cfg.length, period: cfg.period, x_crest: cfg.x_crest };
    spec.validate()?;
    if cfg.samples < 2 {
        return Err(Error::Config("samples must be at least 2".into()));
    }
    let sol = match cfg.n_sf {
        Some(n) => streamfunction_solve(&spec, n, cfg.rho, cfg.g)?,
        None => streamfunction_best(&spec, &SF_ORDERS, cfg.rho, cfg.g)?,
    };
    let kh = sol.k * sol.depth;
    let summary = StreamFnSummary {
        n_sf: sol.n_sf,
        wavenumber: sol.k,
        length: sol.length,
        period: sol.period,
        celerity: sol.c,
        kh,
        steepness: sol.height / sol.length,
        limit_fraction: sol.height / sol.length / max_steepness(kh),
        bernoulli_r: sol.r,
        flux_q: sol.q,
        newton_iterations: sol.newton_iterations,
        collocation_residual: sol.collocation_residual(),
        surface_residual: sol.surface_residual(),
        b: sol.b.clone(),
    };
    let rows: Vec<ProfileRow> = (0..cfg.samples)
        .map(|i| {
            let x = sol.x_crest + sol.length * i as f64 / cfg.samples as f64;
            let eta = sol.eta(x, 0.0);
            let s = sol.eval_unchecked(x, eta, 0.0);
            let b = sol.eval_unchecked(x, -sol.depth, 0.0);
            ProfileRow { x, eta, u_surface: s.u, w_surface: s.w, u_bed: b.u }
        })
        .collect();
    write_json(&cfg.output.dir, "streamfn.json", &summary)?;
    write_rows(&cfg.output.dir, "streamfn_profile.csv", &rows)?;
    Ok(summary)
}
