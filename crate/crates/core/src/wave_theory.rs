//! Analytic and semi-analytic periodic waves: the breaking steepness limit,
//! linear (Airy) waves and steady stream-function waves.
//!
//! The stream-function solution uses Fourier collocation on the free surface
//! in the dimensionless form with `k = 1`, `g = 1`; `Y` is
//! measured upward from the bed and the wave travels toward +x with its crest
//! at `x = x_crest` when `t = 0`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRAVITY: f64 = 9.81;

/// `(H/L)_max = 0.1401 tanh(0.8863 kh)`.
pub fn max_steepness(kh: f64) -> f64 {
    0.1401 * (0.8863 * kh).tanh()
}

/// Linear dispersion: wavenumber for period `t` in depth `h`.
pub fn linear_wavenumber(t: f64, h: f64, g: f64) -> f64 {
    let omega = 2.0 * std::f64::consts::PI / t;
    let mut k = omega * omega / g;
    for _ in 0..100 {
        let th = (k * h).tanh();
        let f = g * k * th - omega * omega;
        let df = g * th + g * k * h * (1.0 - th * th);
        let dk = f / df;
        k -= dk;
        if dk.abs() < 1e-15 * k {
            break;
        }
    }
    k
}

/// Wave parameters. Exactly one of `length` and `period` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveSpec {
    pub height: f64,
    pub depth: f64,
    #[serde(default)]
    pub length: Option<f64>,
    #[serde(default)]
    pub period: Option<f64>,
    /// Crest position at t = 0.
    #[serde(default)]
    pub x_crest: f64,
}

impl WaveSpec {
    pub fn with_length(height: f64, length: f64, depth: f64) -> Self {
        Self { height, depth, length: Some(length), period: None, x_crest: 0.0 }
    }

    pub fn with_period(height: f64, period: f64, depth: f64) -> Self {
        Self { height, depth, length: None, period: Some(period), x_crest: 0.0 }
    }

    /// Wave at `kh` with height set to a fraction of the limiting steepness.
    pub fn from_steepness(kh: f64, steepness_frac: f64, depth: f64) -> Self {
        let length = 2.0 * std::f64::consts::PI * depth / kh;
        let height = steepness_frac * max_steepness(kh) * length;
        Self::with_length(height, length, depth)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.height > 0.0) || !(self.depth > 0.0) {
            return Err(Error::InvalidParameter("wave height and depth must be positive".into()));
        }
        match (self.length, self.period) {
            (Some(l), None) if l > 0.0 => {
                let kh = 2.0 * std::f64::consts::PI * self.depth / l;
                if self.height / l > max_steepness(kh) {
                    return Err(Error::InvalidParameter(format!(
                        "steepness H/L = {:.4} exceeds the breaking limit {:.4}",
                        self.height / l,
                        max_steepness(kh)
                    )));
                }
                Ok(())
            }
            (None, Some(t)) if t > 0.0 => Ok(()),
            _ => Err(Error::InvalidParameter("set exactly one positive wave length or period".into())),
        }
    }

    pub fn wavenumber_linear(&self, g: f64) -> f64 {
        match (self.length, self.period) {
            (Some(l), _) => 2.0 * std::f64::consts::PI / l,
            (None, Some(t)) => linear_wavenumber(t, self.depth, g),
            _ => f64::NAN,
        }
    }
}

/// Sampled wave fields at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveSample {
    pub eta: f64,
    pub u: f64,
    pub w: f64,
    pub p_d: f64,
}

/// Something that provides wave kinematics on the physical domain.
pub trait WaveField {
    fn eta(&self, x: f64, t: f64) -> f64;
    /// Fields at `(x, z, t)`; `z` must lie at or below the surface.
    fn eval(&self, x: f64, z: f64, t: f64) -> Result<WaveSample>;
    /// Same expressions without the surface check, continued analytically
    /// slightly above the surface for error measurements.
    fn eval_unchecked(&self, x: f64, z: f64, t: f64) -> WaveSample;
}

/// Small-amplitude linear wave.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AiryWave {
    pub height: f64,
    pub depth: f64,
    pub k: f64,
    pub omega: f64,
    pub rho: f64,
    pub g: f64,
    pub x_crest: f64,
}

impl AiryWave {
    pub fn new(spec: &WaveSpec, rho: f64, g: f64) -> Result<Self> {
        spec.validate()?;
        let k = spec.wavenumber_linear(g);
        let omega = (g * k * (k * spec.depth).tanh()).sqrt();
        Ok(Self { height: spec.height, depth: spec.depth, k, omega, rho, g, x_crest: spec.x_crest })
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }
}

/// `(η, u, w, p_D)` of a linear wave.
pub fn airy_wave(w: &AiryWave, x: f64, z: f64, t: f64) -> WaveSample {
    let a = 0.5 * w.height;
    let th = w.k * (x - w.x_crest) - w.omega * t;
    let kh = w.k * w.depth;
    let kz = w.k * (z + w.depth);
    WaveSample {
        eta: a * th.cos(),
        u: a * w.omega * kz.cosh() / kh.sinh() * th.cos(),
        w: a * w.omega * kz.sinh() / kh.sinh() * th.sin(),
        p_d: w.rho * w.g * a * (kz.cosh() / kh.cosh() - 1.0) * th.cos(),
    }
}

impl WaveField for AiryWave {
    fn eta(&self, x: f64, t: f64) -> f64 {
        airy_wave(self, x, 0.0, t).eta
    }

    fn eval(&self, x: f64, z: f64, t: f64) -> Result<WaveSample> {
        let eta = self.eta(x, t);
        if z > eta + 1e-12 * self.depth.max(1.0) {
            return Err(Error::AboveSurface { z, eta });
        }
        Ok(airy_wave(self, x, z, t))
    }

    fn eval_unchecked(&self, x: f64, z: f64, t: f64) -> WaveSample {
        airy_wave(self, x, z, t)
    }
}

/// Converged stream-function wave.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamFnSolution {
    pub n_sf: usize,
    /// Dimensional wavenumber, depth, height, gravity and density.
    pub k: f64,
    pub depth: f64,
    pub height: f64,
    pub g: f64,
    pub rho: f64,
    pub x_crest: f64,
    /// Dimensionless unknowns: surface ordinates `Y_m` (from the bed) at
    /// `X_m = mπ/N`, coefficients `B_1..B_N`, mean speed `Ū`, flux `Q` and
    /// Bernoulli constant `R`.
    pub y: Vec<f64>,
    pub b: Vec<f64>,
    pub ubar: f64,
    pub q: f64,
    pub r: f64,
    /// Cosine coefficients of the dimensionless surface.
    pub e: Vec<f64>,
    /// Dimensional celerity and period.
    pub c: f64,
    pub period: f64,
    pub length: f64,
    /// Max collocation residual at convergence.
    pub residual: f64,
    pub newton_iterations: usize,
}

/// `cosh(jY)/cosh(jD)` and `sinh(jY)/cosh(jD)` without overflow.
fn ch_sh(j: f64, y: f64, d: f64) -> (f64, f64) {
    let e = (j * (y - d)).exp();
    let a = (-2.0 * j * y).exp();
    let b = 1.0 + (-2.0 * j * d).exp();
    (e * (1.0 + a) / b, e * (1.0 - a) / b)
}

struct SfProblem {
    n: usize,
    dd: f64,
    hh: f64,
}

impl SfProblem {
    fn dim(&self) -> usize {
        2 * self.n + 4
    }

    fn x(&self, m: usize) -> f64 {
        std::f64::consts::PI * m as f64 / self.n as f64
    }

    fn residual_and_jacobian(&self, z: &DVector<f64>, want_jac: bool) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n;
        let dim = self.dim();
        let (ib, iu, iq, ir) = (n + 1, 2 * n + 1, 2 * n + 2, 2 * n + 3);
        let ubar = z[iu];
        let mut f = DVector::zeros(dim);
        let mut jac = if want_jac { DMatrix::zeros(dim, dim) } else { DMatrix::zeros(0, 0) };
        for m in 0..=n {
            let xm = self.x(m);
            let ym = z[m];
            let mut psi = -ubar * ym + z[iq];
            let mut u = -ubar;
            let mut v = 0.0;
            let (mut uy, mut vy) = (0.0, 0.0);
            let mut dpsi_db = vec![0.0; n];
            let mut du_db = vec![0.0; n];
            let mut dv_db = vec![0.0; n];
            for j in 1..=n {
                let jf = j as f64;
                let bj = z[ib + j - 1];
                let (c, s) = ch_sh(jf, ym, self.dd);
                let (cs, sn) = ((jf * xm).cos(), (jf * xm).sin());
                psi += bj * s * cs;
                u += jf * bj * c * cs;
                v += jf * bj * s * sn;
                uy += jf * jf * bj * s * cs;
                vy += jf * jf * bj * c * sn;
                dpsi_db[j - 1] = s * cs;
                du_db[j - 1] = jf * c * cs;
                dv_db[j - 1] = jf * s * sn;
            }
            f[m] = psi;
            f[n + 1 + m] = 0.5 * (u * u + v * v) + ym - z[ir];
            if want_jac {
                jac[(m, m)] = u;
                jac[(n + 1 + m, m)] = u * uy + v * vy + 1.0;
                for j in 0..n {
                    jac[(m, ib + j)] = dpsi_db[j];
                    jac[(n + 1 + m, ib + j)] = u * du_db[j] + v * dv_db[j];
                }
                jac[(m, iu)] = -ym;
                jac[(m, iq)] = 1.0;
                jac[(n + 1 + m, iu)] = -u;
                jac[(n + 1 + m, ir)] = -1.0;
            }
        }
        let row_mean = 2 * n + 2;
        let mut mean = 0.5 * (z[0] + z[n]);
        for m in 1..n {
            mean += z[m];
        }
        f[row_mean] = mean / n as f64 - self.dd;
        f[row_mean + 1] = z[0] - z[n] - self.hh;
        if want_jac {
            for m in 0..=n {
                let wgt = if m == 0 || m == n { 0.5 } else { 1.0 };
                jac[(row_mean, m)] = wgt / n as f64;
            }
            jac[(row_mean + 1, 0)] = 1.0;
            jac[(row_mean + 1, n)] = -1.0;
        }
        (f, jac)
    }

    fn airy_guess(&self) -> DVector<f64> {
        let n = self.n;
        let mut z = DVector::zeros(self.dim());
        let a = 0.5 * self.hh;
        let c = self.dd.tanh().sqrt();
        for m in 0..=n {
            z[m] = self.dd + a * self.x(m).cos();
        }
        z[n + 1] = a * c / self.dd.tanh();
        z[2 * n + 1] = c;
        z[2 * n + 2] = c * self.dd;
        z[2 * n + 3] = 0.5 * c * c + self.dd;
        z
    }

    fn newton(&self, mut z: DVector<f64>, tol: f64, max_iter: usize) -> Result<(DVector<f64>, f64, usize)> {
        let (mut f, _) = self.residual_and_jacobian(&z, false);
        let mut res = f.amax();
        for it in 0..max_iter {
            if res < tol {
                return Ok((z, res, it));
            }
            let (_, jac) = self.residual_and_jacobian(&z, true);
            let dz = jac
                .lu()
                .solve(&f)
                .ok_or_else(|| Error::StreamFunction("singular Newton Jacobian".into()))?;
            let mut lambda = 1.0;
            loop {
                let trial = &z - lambda * &dz;
                let ok = (0..=self.n).all(|m| trial[m] > 0.0);
                if ok {
                    let (ft, _) = self.residual_and_jacobian(&trial, false);
                    let rt = ft.amax();
                    if rt < res || lambda < 1e-3 {
                        z = trial;
                        f = ft;
                        res = rt;
                        break;
                    }
                }
                lambda *= 0.5;
                if lambda < 1e-4 {
                    return Err(Error::StreamFunction(format!("line search failed, residual {res:.3e}")));
                }
            }
        }
        // Round-off can stall the last digits for deep, steep waves.
        if res < 100.0 * tol {
            Ok((z, res, max_iter))
        } else {
            Err(Error::StreamFunction(format!("Newton did not converge: residual {res:.3e} after {max_iter} iterations")))
        }
    }
}

/// Solves for the wave with dimensionless depth `dd = kh` and height `hh = kH`.
fn solve_nondim(dd: f64, hh: f64, n_sf: usize) -> Result<(DVector<f64>, f64, usize)> {
    let limit = max_steepness(dd) * 2.0 * std::f64::consts::PI;
    let frac = hh / limit;
    let steps = if frac < 0.3 { 1 } else { (frac * 10.0).ceil() as usize };
    let mut z: Option<DVector<f64>> = None;
    let mut prev: Option<DVector<f64>> = None;
    let mut total = 0;
    let mut res = f64::NAN;
    for s in 1..=steps {
        let h_s = hh * s as f64 / steps as f64;
        let prob = SfProblem { n: n_sf, dd, hh: h_s };
        let guess = match (&z, &prev) {
            (Some(a), Some(b)) => 2.0 * a - b,
            (Some(a), None) => a.clone(),
            _ => prob.airy_guess(),
        };
        let tol = if s == steps { 1e-13 } else { 1e-9 };
        let (sol, r, it) = prob.newton(guess, tol * (1.0 + dd), 30)?;
        total += it;
        res = r;
        prev = z.take();
        z = Some(sol);
    }
    Ok((z.unwrap(), res, total))
}

/// Solves the stream-function problem for `spec`. When the period is given,
/// the wavenumber is found by a secant iteration on the nonlinear dispersion.
pub fn streamfunction_solve(spec: &WaveSpec, n_sf: usize, rho: f64, g: f64) -> Result<StreamFnSolution> {
    spec.validate()?;
    if n_sf < 2 {
        return Err(Error::InvalidParameter("stream-function order must be at least 2".into()));
    }
    let h = spec.depth;
    let build = |k: f64| -> Result<StreamFnSolution> {
        let (z, res, its) = solve_nondim(k * h, k * spec.height, n_sf)?;
        Ok(finish(z, n_sf, k, spec, rho, g, res, its))
    };
    match (spec.length, spec.period) {
        (Some(l), _) => build(2.0 * std::f64::consts::PI / l),
        (None, Some(t)) => {
            let mut k0 = linear_wavenumber(t, h, g);
            let mut s0 = build(k0)?;
            let mut k1 = k0 * 0.98;
            let mut s1 = build(k1)?;
            for _ in 0..50 {
                let f0 = s0.period - t;
                let f1 = s1.period - t;
                if f1.abs() < 1e-12 * t {
                    return Ok(s1);
                }
                let k2 = k1 - f1 * (k1 - k0) / (f1 - f0);
                k0 = k1;
                s0 = s1;
                k1 = k2;
                s1 = build(k1)?;
            }
            Err(Error::StreamFunction("secant iteration on the wavenumber did not converge".into()))
        }
        _ => unreachable!("validated"),
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(z: DVector<f64>, n: usize, k: f64, spec: &WaveSpec, rho: f64, g: f64, res: f64, its: usize) -> StreamFnSolution {
    let y: Vec<f64> = (0..=n).map(|m| z[m]).collect();
    let b: Vec<f64> = (0..n).map(|j| z[n + 1 + j]).collect();
    let ubar = z[2 * n + 1];
    let nf = n as f64;
    let e: Vec<f64> = (0..=n)
        .map(|j| {
            let mut s = 0.0;
            for (m, &ym) in y.iter().enumerate() {
                let wgt = if m == 0 || m == n { 0.5 } else { 1.0 };
                s += wgt * ym * (std::f64::consts::PI * (j * m) as f64 / nf).cos();
            }
            let wj = if j == 0 || j == n { 0.5 } else { 1.0 };
            wj * 2.0 * s / nf
        })
        .collect();
    let c = ubar * (g / k).sqrt();
    let length = 2.0 * std::f64::consts::PI / k;
    StreamFnSolution {
        n_sf: n,
        k,
        depth: spec.depth,
        height: spec.height,
        g,
        rho,
        x_crest: spec.x_crest,
        y,
        b,
        ubar,
        q: z[2 * n + 2],
        r: z[2 * n + 3],
        e,
        c,
        period: length / c,
        length,
        residual: res,
        newton_iterations: its,
    }
}

/// Solves for every order in `orders` and keeps the lowest order whose
/// surface residual is within a factor 4 of the best one (or at round-off).
/// Orders whose Newton iteration fails are skipped.
pub fn streamfunction_best(spec: &WaveSpec, orders: &[usize], rho: f64, g: f64) -> Result<StreamFnSolution> {
    let mut found: Vec<(f64, StreamFnSolution)> = Vec::new();
    let mut last_err = None;
    for &n in orders {
        match streamfunction_solve(spec, n, rho, g) {
            Ok(sol) => found.push((sol.surface_residual(), sol)),
            Err(e) => last_err = Some(e),
        }
    }
    let best = found.iter().map(|f| f.0).fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(last_err.unwrap_or_else(|| Error::InvalidParameter("no stream-function orders given".into())));
    }
    let accept = (4.0 * best).max(1e-13);
    found.sort_by_key(|f| f.1.n_sf);
    Ok(found.into_iter().find(|f| f.0 <= accept).map(|f| f.1).expect("best candidate is accepted"))
}

impl StreamFnSolution {
    fn phase(&self, x: f64, t: f64) -> f64 {
        self.k * (x - self.x_crest - self.c * t)
    }

    /// Dimensionless surface ordinate above the bed at phase `xp`.
    fn surface_nd(&self, xp: f64) -> f64 {
        self.e.iter().enumerate().map(|(j, &ej)| ej * (j as f64 * xp).cos()).sum()
    }

    /// Max kinematic and dynamic collocation residuals.
    pub fn collocation_residual(&self) -> f64 {
        let n = self.n_sf;
        let prob = SfProblem { n, dd: self.k * self.depth, hh: self.k * self.height };
        let mut z = DVector::zeros(prob.dim());
        for m in 0..=n {
            z[m] = self.y[m];
        }
        for j in 0..n {
            z[n + 1 + j] = self.b[j];
        }
        z[2 * n + 1] = self.ubar;
        z[2 * n + 2] = self.q;
        z[2 * n + 3] = self.r;
        prob.residual_and_jacobian(&z, false).0.amax()
    }

    /// Max dimensionless Bernoulli residual on the surface, sampled midway
    /// between collocation points.
    pub fn surface_residual(&self) -> f64 {
        let n = self.n_sf;
        let mut worst: f64 = 0.0;
        for m in 0..4 * n {
            let xp = std::f64::consts::PI * (m as f64 + 0.5) / (4 * n) as f64;
            let ys = self.surface_nd(xp);
            let (u, v) = self.velocity_nd(xp, ys);
            worst = worst.max((self.r - ys - 0.5 * (u * u + v * v)).abs());
        }
        worst
    }

    /// Moving-frame dimensionless velocity `(u, v)` at `(X, Y)`.
    fn velocity_nd(&self, xp: f64, yy: f64) -> (f64, f64) {
        let dd = self.k * self.depth;
        let (mut u, mut v) = (-self.ubar, 0.0);
        for (j0, &bj) in self.b.iter().enumerate() {
            let jf = (j0 + 1) as f64;
            let (c, s) = ch_sh(jf, yy, dd);
            u += jf * bj * c * (jf * xp).cos();
            v += jf * bj * s * (jf * xp).sin();
        }
        (u, v)
    }
}

/// Stream-function fields at `(x, z, t)`, `z` measured from the still water level.
pub fn streamfunction_eval(sol: &StreamFnSolution, x: f64, z: f64, t: f64) -> Result<WaveSample> {
    let xp = sol.phase(x, t);
    let ys = sol.surface_nd(xp);
    let eta = ys / sol.k - sol.depth;
    if z > eta + 1e-9 * sol.depth {
        return Err(Error::AboveSurface { z, eta });
    }
    Ok(sample(sol, xp, ys, eta, z))
}

fn sample(sol: &StreamFnSolution, xp: f64, ys: f64, eta: f64, z: f64) -> WaveSample {
    let yy = sol.k * (z + sol.depth);
    let (um, vm) = sol.velocity_nd(xp, yy);
    let vs = (sol.g / sol.k).sqrt();
    let p_d = sol.rho * (sol.g / sol.k) * (sol.r - ys - 0.5 * (um * um + vm * vm));
    WaveSample { eta, u: (um + sol.ubar) * vs, w: vm * vs, p_d }
}

impl WaveField for StreamFnSolution {
    fn eta(&self, x: f64, t: f64) -> f64 {
        self.surface_nd(self.phase(x, t)) / self.k - self.depth
    }

    fn eval(&self, x: f64, z: f64, t: f64) -> Result<WaveSample> {
        streamfunction_eval(self, x, z, t)
    }

    fn eval_unchecked(&self, x: f64, z: f64, t: f64) -> WaveSample {
        let xp = self.phase(x, t);
        let ys = self.surface_nd(xp);
        sample(self, xp, ys, ys / self.k - self.depth, z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RHO: f64 = 999.70;

    #[test]
    fn steepness_limits() {
        assert!((max_steepness(1e6) - 0.1401).abs() < 1e-12);
        assert!(max_steepness(1e-9) < 1e-9);
        assert!((max_steepness(1.0) - 0.1401 * 0.8863f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn airy_basics() {
        let spec = WaveSpec::with_length(0.05, 1.0, 1.0 / (2.0 * std::f64::consts::PI) * 2.0 * std::f64::consts::PI);
        let w = AiryWave::new(&spec, RHO, GRAVITY).unwrap();
        assert!((airy_wave(&w, 0.0, 0.0, 0.0).eta - 0.025).abs() < 1e-15);
        assert_eq!(airy_wave(&w, 0.3, -w.depth, 0.2).w, 0.0);
        let kh = w.k * w.depth;
        assert!((w.omega * w.omega / (GRAVITY * w.k * kh.tanh()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stream_function_matches_airy_for_small_waves() {
        let spec = WaveSpec::from_steepness(1.0, 0.01, 1.0);
        let sol = streamfunction_solve(&spec, 32, RHO, GRAVITY).unwrap();
        let airy = AiryWave::new(&spec, RHO, GRAVITY).unwrap();
        let c_airy = airy.omega / airy.k;
        assert!(((sol.c - c_airy) / c_airy).abs() < 1e-3);
        assert!(sol.collocation_residual() < 1e-10);
    }

    #[test]
    fn nine_case_matrix_converges_and_celerity_grows() {
        for &kh in &[0.5, 2.0, 2.0 * std::f64::consts::PI] {
            let mut last_c = 0.0;
            for &frac in &[0.1, 0.5, 0.9] {
                let spec = WaveSpec::from_steepness(kh, frac, 1.0);
                let sol = streamfunction_solve(&spec, 32, RHO, GRAVITY).unwrap();
                assert!(sol.collocation_residual() < 1e-10, "kh={kh} frac={frac}");
                let etas: Vec<f64> = (0..=400).map(|i| sol.eta(sol.length * i as f64 / 400.0, 0.0)).collect();
                let hh = etas.iter().cloned().fold(f64::MIN, f64::max) - etas.iter().cloned().fold(f64::MAX, f64::min);
                assert!((hh - spec.height).abs() < 1e-9, "kh={kh} frac={frac} {hh}");
                assert!(sol.c > last_c);
                last_c = sol.c;
            }
        }
    }

    #[test]
    fn travelling_wave_and_bottom_condition() {
        let spec = WaveSpec::from_steepness(2.0, 0.5, 1.0);
        let sol = streamfunction_solve(&spec, 32, RHO, GRAVITY).unwrap();
        let dt = 0.137;
        for i in 0..10 {
            let x = 0.23 * i as f64;
            assert!((sol.eta(x, 0.4) - sol.eta(x - sol.c * dt, 0.4 - dt)).abs() < 1e-10);
            let s = streamfunction_eval(&sol, x, -1.0, 0.3).unwrap();
            assert!(s.w.abs() < 1e-10);
        }
        let top = sol.eta(0.0, 0.0);
        assert!(matches!(streamfunction_eval(&sol, 0.0, top + 0.01, 0.0), Err(Error::AboveSurface { .. })));
    }

    #[test]
    fn stream_function_is_divergence_free_and_irrotational() {
        let spec = WaveSpec::from_steepness(2.0, 0.7, 1.0);
        let sol = streamfunction_solve(&spec, 32, RHO, GRAVITY).unwrap();
        let h = 1e-5;
        for i in 0..8 {
            let x = 0.31 * i as f64;
            let z = -0.9 + 0.1 * i as f64;
            let f = |x: f64, z: f64| streamfunction_eval(&sol, x, z, 0.0).unwrap();
            let ux = (f(x + h, z).u - f(x - h, z).u) / (2.0 * h);
            let wz = (f(x, z + h).w - f(x, z - h).w) / (2.0 * h);
            let uz = (f(x, z + h).u - f(x, z - h).u) / (2.0 * h);
            let wx = (f(x + h, z).w - f(x - h, z).w) / (2.0 * h);
            assert!((ux + wz).abs() < 1e-8);
            assert!((uz - wx).abs() < 1e-8);
        }
    }

    #[test]
    fn period_given_solves_for_length() {
        let spec = WaveSpec::with_length(0.02, 3.74, 0.4);
        let sol = streamfunction_solve(&spec, 24, RHO, GRAVITY).unwrap();
        let back = streamfunction_solve(&WaveSpec::with_period(0.02, sol.period, 0.4), 24, RHO, GRAVITY).unwrap();
        assert!((back.length - 3.74).abs() < 1e-9);
        assert!((sol.period - 2.0).abs() < 0.1);
    }

    #[test]
    fn surface_dynamic_pressure_vanishes() {
        let spec = WaveSpec::from_steepness(1.0, 0.3, 1.0);
        let sol = streamfunction_solve(&spec, 32, RHO, GRAVITY).unwrap();
        for i in 0..20 {
            let x = sol.length * i as f64 / 20.0;
            let s = streamfunction_eval(&sol, x, sol.eta(x, 0.0), 0.0).unwrap();
            assert!(s.p_d.abs() < 1e-8 * RHO * GRAVITY);
        }
    }
}
