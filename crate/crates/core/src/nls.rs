//! Reduced NLS dynamics `i u_tau = rho1 u_xixi + rho2 |u|^2 u` on a periodic slow grid,
//! its symmetry flows, and a finite-difference commutator test.

use std::f64::consts::PI;
use std::io::{BufRead, BufReader, Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Complex samples on a uniform periodic grid `xi_j = xi0 + j dxi`, `j < L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    xi0: f64,
    dxi: f64,
    values: Vec<Complex64>,
    tau: f64,
}

impl Envelope {
    pub fn new(xi0: f64, dxi: f64, values: Vec<Complex64>, tau: f64) -> Result<Self> {
        if values.len() < 4 {
            return Err(Error::domain(format!("envelope needs at least 4 points, got {}", values.len())));
        }
        if !(dxi > 0.0) || !dxi.is_finite() {
            return Err(Error::domain(format!("grid spacing must be positive, got {dxi}")));
        }
        Ok(Self { xi0, dxi, values, tau })
    }

    /// Samples `f` on `L` points of the period `[xi0, xi0 + length)`.
    pub fn from_fn(xi0: f64, length: f64, l: usize, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let dxi = length / l as f64;
        Self::new(xi0, dxi, (0..l).map(|j| f(xi0 + j as f64 * dxi)).collect(), 0.0)
    }

    pub fn gaussian(xi0: f64, length: f64, l: usize, amplitude: f64, center: f64, width: f64) -> Result<Self> {
        Self::from_fn(xi0, length, l, |x| {
            Complex64::new(amplitude * (-((x - center) / width).powi(2)).exp(), 0.0)
        })
    }

    pub fn sech(xi0: f64, length: f64, l: usize, amplitude: f64, center: f64, width: f64) -> Result<Self> {
        Self::from_fn(xi0, length, l, |x| {
            Complex64::new(amplitude / ((x - center) / width).cosh(), 0.0)
        })
    }

    /// `A exp(i k xi)` with `k` rounded to the nearest mode of the period.
    pub fn plane(xi0: f64, length: f64, l: usize, amplitude: Complex64, k: f64) -> Result<Self> {
        let mode = (k * length / (2.0 * PI)).round();
        let k = 2.0 * PI * mode / length;
        Self::from_fn(xi0, length, l, |x| amplitude * Complex64::from_polar(1.0, k * (x - xi0)))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn xi0(&self) -> f64 {
        self.xi0
    }

    pub fn dxi(&self) -> f64 {
        self.dxi
    }

    pub fn period(&self) -> f64 {
        self.dxi * self.len() as f64
    }

    pub fn xi(&self, j: usize) -> f64 {
        self.xi0 + j as f64 * self.dxi
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn with_values(&self, values: Vec<Complex64>, tau: f64) -> Self {
        assert_eq!(values.len(), self.len(), "grid size mismatch");
        Self {
            xi0: self.xi0,
            dxi: self.dxi,
            values,
            tau,
        }
    }

    /// `sum |u|^2 dxi`.
    pub fn mass(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.dxi
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Circular shift by `k` grid points: `out[j] = in[j - k]`.
    pub fn shifted(&self, k: isize) -> Self {
        let l = self.len() as isize;
        let values = (0..l)
            .map(|j| self.values[(j - k).rem_euclid(l) as usize])
            .collect();
        self.with_values(values, self.tau)
    }

    /// Multiplies every sample by `exp(i phi)`.
    pub fn rotated(&self, phi: f64) -> Self {
        let e = Complex64::from_polar(1.0, phi);
        self.with_values(self.values.iter().map(|v| v * e).collect(), self.tau)
    }

    /// Largest modulus within `width` of either end of the sampling window.
    pub fn edge_magnitude(&self, width: f64) -> f64 {
        let k = ((width / self.dxi).ceil() as usize).max(1).min(self.len());
        self.values[..k]
            .iter()
            .chain(&self.values[self.len() - k..])
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    /// Fraction of spectral energy in the top third of wavenumbers.
    pub fn high_mode_fraction(&self) -> f64 {
        let grid = SpectralGrid::new(self.len(), self.dxi);
        let hat = grid.forward(&self.values);
        let l = self.len();
        let kmax = l / 2;
        let cut = 2 * kmax / 3;
        let mut total = 0.0;
        let mut high = 0.0;
        for (j, h) in hat.iter().enumerate() {
            let idx = if j <= l / 2 { j } else { l - j };
            total += h.norm_sqr();
            if idx > cut {
                high += h.norm_sqr();
            }
        }
        if total == 0.0 {
            0.0
        } else {
            high / total
        }
    }

    pub fn interpolant(&self) -> SpectralInterpolant {
        SpectralInterpolant::new(self)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "xi,re,im")?;
        for (j, v) in self.values.iter().enumerate() {
            writeln!(w, "{:?},{:?},{:?}", self.xi(j), v.re, v.im)?;
        }
        Ok(())
    }

    /// Reads `xi,re,im` rows; the grid must be uniform and is taken as one period.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (lineno, line) in BufReader::new(r).lines().enumerate() {
            let line = line?;
            if lineno == 0 || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Config(format!("line {}: expected three numbers", lineno + 1)))?;
            if cols.len() != 3 {
                return Err(Error::Config(format!("line {}: expected 3 columns", lineno + 1)));
            }
            xs.push(cols[0]);
            vs.push(Complex64::new(cols[1], cols[2]));
        }
        if xs.len() < 4 {
            return Err(Error::Config("envelope file holds fewer than 4 samples".into()));
        }
        let dxi = xs[1] - xs[0];
        for w in xs.windows(2) {
            if ((w[1] - w[0]) - dxi).abs() > 1e-9 * dxi.abs().max(1.0) {
                return Err(Error::Config("envelope grid is not uniform".into()));
            }
        }
        Self::new(xs[0], dxi, vs, 0.0)
    }
}

/// FFT plans and wavenumbers for a periodic grid.
#[derive(Clone)]
pub struct SpectralGrid {
    len: usize,
    k: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl SpectralGrid {
    pub fn new(len: usize, dxi: f64) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        let period = len as f64 * dxi;
        let k = (0..len)
            .map(|j| {
                let s = if j <= len / 2 { j as f64 } else { j as f64 - len as f64 };
                2.0 * PI * s / period
            })
            .collect();
        Self { len, k, fwd, inv }
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.k
    }

    pub fn forward(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut buf = v.to_vec();
        self.fwd.process(&mut buf);
        buf
    }

    /// Normalized inverse transform.
    pub fn inverse(&self, mut hat: Vec<Complex64>) -> Vec<Complex64> {
        self.inv.process(&mut hat);
        let s = 1.0 / self.len as f64;
        hat.iter_mut().for_each(|v| *v *= s);
        hat
    }

    fn is_nyquist(&self, j: usize) -> bool {
        self.len.is_multiple_of(2) && j == self.len / 2
    }

    /// Spectral `d^order / dxi^order`; the Nyquist mode is dropped for odd orders.
    pub fn derivative(&self, v: &[Complex64], order: u32) -> Vec<Complex64> {
        let mut hat = self.forward(v);
        for (j, h) in hat.iter_mut().enumerate() {
            if order % 2 == 1 && self.is_nyquist(j) {
                *h = Complex64::new(0.0, 0.0);
            } else {
                *h *= (I * self.k[j]).powu(order);
            }
        }
        self.inverse(hat)
    }
}

/// Trigonometric interpolation of a periodic envelope at arbitrary `xi`.
#[derive(Clone, Debug)]
pub struct SpectralInterpolant {
    xi0: f64,
    period: f64,
    // (wavenumber, coefficient); the Nyquist mode is split symmetrically.
    modes: Vec<(f64, Complex64)>,
}

impl SpectralInterpolant {
    pub fn new(env: &Envelope) -> Self {
        let l = env.len();
        let grid = SpectralGrid::new(l, env.dxi);
        let hat = grid.forward(&env.values);
        let scale = 1.0 / l as f64;
        let mut modes = Vec::with_capacity(l + 1);
        for (j, h) in hat.iter().enumerate() {
            let k = grid.k[j];
            if grid.is_nyquist(j) {
                modes.push((k, h * (0.5 * scale)));
                modes.push((-k, h * (0.5 * scale)));
            } else {
                modes.push((k, h * scale));
            }
        }
        Self {
            xi0: env.xi0,
            period: env.period(),
            modes,
        }
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn eval(&self, xi: f64) -> Complex64 {
        let x = xi - self.xi0;
        self.modes
            .iter()
            .map(|(k, c)| c * Complex64::from_polar(1.0, k * x))
            .sum()
    }

    /// Evaluates on an arithmetic progression `xi_start + j step`, `j < count`.
    pub fn eval_progression(&self, xi_start: f64, step: f64, count: usize) -> Vec<Complex64> {
        let x0 = xi_start - self.xi0;
        let mut out = vec![Complex64::new(0.0, 0.0); count];
        for (k, c) in &self.modes {
            let mut z = c * Complex64::from_polar(1.0, k * x0);
            let rot = Complex64::from_polar(1.0, k * step);
            for (j, o) in out.iter_mut().enumerate() {
                // Re-anchor periodically to bound round-off growth.
                if j % 64 == 0 && j > 0 {
                    z = c * Complex64::from_polar(1.0, k * (x0 + j as f64 * step));
                }
                *o += z;
                z *= rot;
            }
        }
        out
    }
}

/// Coefficients of the reduced equation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NlsCoefficients {
    rho1: f64,
    rho2: f64,
}

impl NlsCoefficients {
    pub fn new(rho1: f64, rho2: f64) -> Result<Self> {
        if rho1 == 0.0 || !rho1.is_finite() || !rho2.is_finite() {
            return Err(Error::domain(format!("need finite rho1 != 0, got rho1={rho1}, rho2={rho2}")));
        }
        Ok(Self { rho1, rho2 })
    }

    pub fn rho1(&self) -> f64 {
        self.rho1
    }

    pub fn rho2(&self) -> f64 {
        self.rho2
    }

    /// True when `rho1 rho2 < 0`.
    pub fn is_defocusing(&self) -> bool {
        self.rho1 * self.rho2 < 0.0
    }
}

fn check_len(env: &Envelope) -> Result<()> {
    if env.len() < 16 {
        return Err(Error::precondition(format!("need at least 16 grid points, got {}", env.len())));
    }
    Ok(())
}

fn rhs_on(grid: &SpectralGrid, u: &[Complex64], c: &NlsCoefficients) -> Vec<Complex64> {
    let uxx = grid.derivative(u, 2);
    u.iter()
        .zip(&uxx)
        .map(|(v, d)| -I * (d * c.rho1 + v * (c.rho2 * v.norm_sqr())))
        .collect()
}

/// `d u / d tau = -i (rho1 u_xixi + rho2 |u|^2 u)`, spectrally differentiated.
pub fn nls_rhs(env: &Envelope, c: &NlsCoefficients) -> Result<Vec<Complex64>> {
    check_len(env)?;
    Ok(rhs_on(&SpectralGrid::new(env.len(), env.dxi), &env.values, c))
}

/// Split-step integrator: Strang splitting of the exact linear (Fourier) and
/// nonlinear (pointwise phase) flows, raised to fourth order by the symmetric
/// triple-jump composition. Both sub-flows are unitary, so the scheme is
/// unconditionally stable and conserves `sum |u|^2` to round-off; accuracy
/// requires `dtau * max(|rho1| k_max^2, |rho2| max|u|^2)` to stay below about 1.
pub struct NlsIntegrator {
    grid: SpectralGrid,
    coeffs: NlsCoefficients,
}

const W1: f64 = 1.351_207_191_959_657_8; // 1 / (2 - 2^(1/3))
const W0: f64 = -1.702_414_383_919_315_3; // -2^(1/3) W1

impl NlsIntegrator {
    pub fn new(len: usize, dxi: f64, coeffs: NlsCoefficients) -> Self {
        Self {
            grid: SpectralGrid::new(len, dxi),
            coeffs,
        }
    }

    pub fn for_envelope(env: &Envelope, coeffs: NlsCoefficients) -> Self {
        Self::new(env.len(), env.dxi, coeffs)
    }

    fn nonlinear(&self, u: &mut [Complex64], h: f64) {
        for v in u.iter_mut() {
            *v *= Complex64::from_polar(1.0, -self.coeffs.rho2 * v.norm_sqr() * h);
        }
    }

    fn linear(&self, u: &mut Vec<Complex64>, h: f64) {
        let mut hat = self.grid.forward(u);
        for (j, v) in hat.iter_mut().enumerate() {
            let k = self.grid.k[j];
            *v *= Complex64::from_polar(1.0, self.coeffs.rho1 * k * k * h);
        }
        *u = self.grid.inverse(hat);
    }

    fn strang(&self, u: &mut Vec<Complex64>, h: f64) {
        self.nonlinear(u, 0.5 * h);
        self.linear(u, h);
        self.nonlinear(u, 0.5 * h);
    }

    pub fn step(&self, u: &mut Vec<Complex64>, h: f64) {
        self.strang(u, W1 * h);
        self.strang(u, W0 * h);
        self.strang(u, W1 * h);
    }

    pub fn rhs(&self, u: &[Complex64]) -> Vec<Complex64> {
        rhs_on(&self.grid, u, &self.coeffs)
    }

    /// Advances by `duration` using `ceil(duration / dtau)` equal steps.
    pub fn advance(&self, u: &mut Vec<Complex64>, duration: f64, dtau: f64) -> Result<()> {
        if duration == 0.0 {
            return Ok(());
        }
        if !(dtau > 0.0) {
            return Err(Error::domain(format!("time step must be positive, got {dtau}")));
        }
        let steps = (duration.abs() / dtau - 1e-12).ceil().max(1.0) as usize;
        let h = duration / steps as f64;
        for s in 0..steps {
            self.step(u, h);
            if u.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::Numerical(format!(
                    "non-finite envelope after step {} of {steps} (h = {h:e})",
                    s + 1
                )));
            }
        }
        Ok(())
    }
}

/// Evolves `env` to `tau_final` with time step at most `dtau`.
pub fn nls_evolve(env: &Envelope, c: &NlsCoefficients, tau_final: f64, dtau: f64) -> Result<Envelope> {
    let integ = NlsIntegrator::for_envelope(env, *c);
    let mut u = env.values.clone();
    integ.advance(&mut u, tau_final - env.tau, dtau)?;
    Ok(env.with_values(u, tau_final))
}

/// Snapshots on a uniform `tau` grid with cubic Hermite dense output.
#[derive(Clone, Debug)]
pub struct Trajectory {
    template: Envelope,
    tau0: f64,
    h: f64,
    states: Vec<Vec<Complex64>>,
    derivs: Vec<Vec<Complex64>>,
}

impl Trajectory {
    /// Integrates from `env.tau()` to at least `tau_max` with step `h`.
    pub fn compute(env: &Envelope, c: &NlsCoefficients, tau_max: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::domain(format!("snapshot step must be positive, got {h}")));
        }
        let integ = NlsIntegrator::for_envelope(env, *c);
        let span = (tau_max - env.tau).max(0.0);
        let steps = (span / h - 1e-12).ceil().max(0.0) as usize;
        let mut u = env.values.clone();
        let mut states = vec![u.clone()];
        let mut derivs = vec![integ.rhs(&u)];
        for s in 0..steps {
            integ.step(&mut u, h);
            if u.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::Numerical(format!("non-finite envelope at snapshot {}", s + 1)));
            }
            derivs.push(integ.rhs(&u));
            states.push(u.clone());
        }
        Ok(Self {
            template: env.clone(),
            tau0: env.tau,
            h,
            states,
            derivs,
        })
    }

    pub fn tau_range(&self) -> (f64, f64) {
        (self.tau0, self.tau0 + self.h * (self.states.len() - 1) as f64)
    }

    /// Envelope at `tau` by cubic Hermite interpolation between snapshots.
    pub fn at(&self, tau: f64) -> Result<Envelope> {
        let (t0, t1) = self.tau_range();
        let tol = 1e-12 * (1.0 + t1.abs());
        if tau < t0 - tol || tau > t1 + tol {
            return Err(Error::domain(format!("tau = {tau} outside trajectory range [{t0}, {t1}]")));
        }
        let pos = ((tau - t0) / self.h).max(0.0);
        let last = self.states.len() - 1;
        let i = (pos.floor() as usize).min(last.saturating_sub(1));
        if last == 0 {
            return Ok(self.template.with_values(self.states[0].clone(), tau));
        }
        let s = pos - i as f64;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let (a, b) = (&self.states[i], &self.states[i + 1]);
        let (da, db) = (&self.derivs[i], &self.derivs[i + 1]);
        let values = (0..a.len())
            .map(|j| a[j] * h00 + da[j] * (h10 * self.h) + b[j] * h01 + db[j] * (h11 * self.h))
            .collect();
        Ok(self.template.with_values(values, tau))
    }
}

/// Reduced flows: the equation itself and the four symmetry generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReducedFlow {
    Nls,
    H1,
    H2,
    H3,
    H4,
}

impl ReducedFlow {
    pub fn name(&self) -> &'static str {
        match self {
            ReducedFlow::Nls => "nls",
            ReducedFlow::H1 => "h1",
            ReducedFlow::H2 => "h2",
            ReducedFlow::H3 => "h3",
            ReducedFlow::H4 => "h4",
        }
    }
}

impl std::str::FromStr for ReducedFlow {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nls" => Ok(ReducedFlow::Nls),
            "h1" => Ok(ReducedFlow::H1),
            "h2" => Ok(ReducedFlow::H2),
            "h3" => Ok(ReducedFlow::H3),
            "h4" => Ok(ReducedFlow::H4),
            other => Err(Error::Config(format!("unknown flow '{other}'"))),
        }
    }
}

fn flow_on(grid: &SpectralGrid, u: &[Complex64], c: &NlsCoefficients, which: ReducedFlow) -> Vec<Complex64> {
    match which {
        ReducedFlow::H1 => u.iter().map(|v| I * v).collect(),
        ReducedFlow::H2 => grid.derivative(u, 1),
        ReducedFlow::Nls | ReducedFlow::H3 => rhs_on(grid, u, c),
        ReducedFlow::H4 => {
            let ux = grid.derivative(u, 1);
            let uxxx = grid.derivative(u, 3);
            u.iter()
                .zip(ux.iter().zip(&uxxx))
                .map(|(v, (d1, d3))| d3 * c.rho1 + d1 * (3.0 * c.rho2 * v.norm_sqr()))
                .collect()
        }
    }
}

/// Right-hand side of the requested flow.
pub fn symmetry_rhs(env: &Envelope, c: &NlsCoefficients, which: ReducedFlow) -> Result<Vec<Complex64>> {
    check_len(env)?;
    Ok(flow_on(&SpectralGrid::new(env.len(), env.dxi), &env.values, c, which))
}

fn sup(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

fn directional(
    grid: &SpectralGrid,
    u: &[Complex64],
    dir: &[Complex64],
    c: &NlsCoefficients,
    which: ReducedFlow,
    eps: f64,
) -> Vec<Complex64> {
    let scale = sup(dir);
    if scale == 0.0 {
        return vec![Complex64::new(0.0, 0.0); u.len()];
    }
    let plus: Vec<Complex64> = u.iter().zip(dir).map(|(a, d)| a + d * (eps / scale)).collect();
    let minus: Vec<Complex64> = u.iter().zip(dir).map(|(a, d)| a - d * (eps / scale)).collect();
    let fp = flow_on(grid, &plus, c, which);
    let fm = flow_on(grid, &minus, c, which);
    fp.iter()
        .zip(&fm)
        .map(|(a, b)| (a - b) * (scale / (2.0 * eps)))
        .collect()
}

/// Spectral-resolution precondition shared by the commutator routines.
pub fn check_resolved(env: &Envelope) -> Result<()> {
    let frac = env.high_mode_fraction();
    if frac >= 1e-10 {
        return Err(Error::precondition(format!(
            "envelope not spectrally resolved: top-third Fourier energy fraction {frac:e} >= 1e-10"
        )));
    }
    Ok(())
}

/// Sup norm of `K_A'[u] K_B(u) - K_B'[u] K_A(u)` with central-difference Frechet derivatives.
pub fn commutator_test(
    c: &NlsCoefficients,
    env: &Envelope,
    flow_a: ReducedFlow,
    flow_b: ReducedFlow,
    eps: f64,
) -> Result<f64> {
    check_len(env)?;
    check_resolved(env)?;
    let grid = SpectralGrid::new(env.len(), env.dxi);
    Ok(commutator_norm(&grid, &env.values, c, flow_a, flow_b, eps))
}

fn commutator_vec(
    grid: &SpectralGrid,
    u: &[Complex64],
    c: &NlsCoefficients,
    a: ReducedFlow,
    b: ReducedFlow,
    eps: f64,
) -> Vec<Complex64> {
    let ka = flow_on(grid, u, c, a);
    let kb = flow_on(grid, u, c, b);
    let da_kb = directional(grid, u, &kb, c, a, eps);
    let db_ka = directional(grid, u, &ka, c, b, eps);
    da_kb.iter().zip(&db_ka).map(|(x, y)| x - y).collect()
}

fn commutator_norm(
    grid: &SpectralGrid,
    u: &[Complex64],
    c: &NlsCoefficients,
    a: ReducedFlow,
    b: ReducedFlow,
    eps: f64,
) -> f64 {
    sup(&commutator_vec(grid, u, c, a, b, eps))
}

/// Eps sweep for one pair of flows.
#[derive(Clone, Debug, Serialize)]
pub struct CommutatorReport {
    pub flow_a: ReducedFlow,
    pub flow_b: ReducedFlow,
    pub eps: Vec<f64>,
    pub norm: Vec<f64>,
    /// Successive ratios `norm[i] / norm[i + 1]`.
    pub ratios: Vec<f64>,
    /// Measured round-off floor per eps.
    pub floor: Vec<f64>,
    pub pass: bool,
}

/// Largest admissible commutator norm at the smallest eps.
pub const COMMUTATOR_CEILING: f64 = 1e-6;

/// Default eps sweep.
pub const EPS_SWEEP: [f64; 3] = [1e-4, 5e-5, 2.5e-5];

/// Runs the eps sweep: every halving must cut the norm by at least 3.5x unless
/// the norm has reached the round-off floor, and the last norm must stay below
/// [`COMMUTATOR_CEILING`].
pub fn commutator_sweep(
    c: &NlsCoefficients,
    env: &Envelope,
    flow_a: ReducedFlow,
    flow_b: ReducedFlow,
    eps_list: &[f64],
) -> Result<CommutatorReport> {
    check_len(env)?;
    check_resolved(env)?;
    if eps_list.len() < 2 {
        return Err(Error::domain("eps sweep needs at least two values"));
    }
    let grid = SpectralGrid::new(env.len(), env.dxi);
    let u = &env.values;
    let mut norm = Vec::with_capacity(eps_list.len());
    let mut floor = Vec::with_capacity(eps_list.len());
    for &e in eps_list {
        // A relative change of 2^-10 in eps moves the truncation error by
        // about 0.2% but redraws the round-off, so the difference measures noise.
        let base = commutator_vec(&grid, u, c, flow_a, flow_b, e);
        let jitter = commutator_vec(&grid, u, c, flow_a, flow_b, e * (1.0 + 1.0 / 1024.0));
        let noise = base.iter().zip(&jitter).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        norm.push(sup(&base));
        floor.push(3.0 * noise);
    }
    let ratios: Vec<f64> = norm.windows(2).map(|w| w[0] / w[1]).collect();
    let pass = norm
        .windows(2)
        .enumerate()
        .all(|(i, w)| w[1] <= floor[i + 1] || w[0] / w[1] >= 3.5)
        && norm.last().is_some_and(|&v| v <= COMMUTATOR_CEILING);
    Ok(CommutatorReport {
        flow_a,
        flow_b,
        eps: eps_list.to_vec(),
        norm,
        ratios,
        floor,
        pass,
    })
}
