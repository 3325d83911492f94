//! Multiscale reduction of the lattice equation: coefficient formulas, slow
//! coordinates, the truncated ansatz and its residual scaling in `1/N`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::power_law;
use crate::model::{dispersion, max_residual, CarrierWave, FieldKind, LatticeField, LpkdvParams};
use crate::nls::{Envelope, NlsCoefficients, SpectralGrid, SpectralInterpolant, Trajectory};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Which sign of the `-/+` pair in `n2 = n1 -/+ m1` is used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// The sign that makes `M1` positive.
    Auto,
    /// `n2 = n1 - m1`, `M1 = -S (mu - zeta e^{i kappa})`.
    Upper,
    /// `n2 = n1 + m1`, `M1 = S (mu - zeta e^{i kappa})`.
    Lower,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReductionSettings {
    pub r: f64,
    pub m2_tilde: f64,
    pub branch: Branch,
    /// Evaluate `tau4` reading its undefined symbols as `alpha -> zeta`, `beta -> mu`.
    pub tau4_interpretation: bool,
}

impl Default for ReductionSettings {
    fn default() -> Self {
        Self {
            r: 1.0,
            m2_tilde: 1.0,
            branch: Branch::Auto,
            tau4_interpretation: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReductionCoefficients {
    pub params: LpkdvParams,
    pub kappa: f64,
    pub omega: f64,
    /// `+1` for the upper sign, `-1` for the lower one.
    pub branch: i8,
    pub r: f64,
    pub theta: f64,
    pub s: Complex64,
    #[serde(rename = "M1")]
    pub m1: f64,
    #[serde(rename = "M1_tilde")]
    pub m1_tilde: f64,
    #[serde(rename = "M2_tilde")]
    pub m2_tilde: f64,
    pub tau1: Complex64,
    pub tau2: Complex64,
    pub tau3: Complex64,
    pub tau4: Option<Complex64>,
    pub rho1: f64,
    pub rho2: f64,
}

impl ReductionCoefficients {
    pub fn carrier(&self) -> CarrierWave {
        CarrierWave::new(&self.params, self.kappa).expect("validated on construction")
    }

    pub fn nls(&self) -> NlsCoefficients {
        NlsCoefficients::new(self.rho1, self.rho2).expect("rho1 is nonzero for valid parameters")
    }

    /// `tau1` is used through its real part; its imaginary part is reported.
    pub fn tau1_imag_ratio(&self) -> f64 {
        self.tau1.im.abs() / self.tau1.norm().max(f64::MIN_POSITIVE)
    }

    pub fn slow_coordinates(&self, n_scale: usize) -> SlowCoordinates {
        SlowCoordinates {
            n_scale,
            m1: self.m1,
            m1_tilde: self.m1_tilde,
            m2_tilde: self.m2_tilde,
            branch: self.branch,
            xi_origin: 0.0,
        }
    }
}

fn realness(z: Complex64, what: &str) -> Result<f64> {
    if z.im.abs() > 1e-10 * z.norm() {
        return Err(Error::Consistency(format!(
            "{what} should be real: Im/|.| = {:e}",
            z.im.abs() / z.norm()
        )));
    }
    Ok(z.re)
}

/// Evaluates every closed-form coefficient of the reduction.
pub fn compute_coefficients(
    params: &LpkdvParams,
    kappa: f64,
    settings: &ReductionSettings,
) -> Result<ReductionCoefficients> {
    let omega = dispersion(params, kappa)?;
    let (mu, zeta) = (params.mu(), params.zeta());
    if !(settings.r > 0.0) || !(settings.m2_tilde > 0.0) {
        return Err(Error::domain(format!(
            "need r > 0 and M2_tilde > 0, got r={}, M2_tilde={}",
            settings.r, settings.m2_tilde
        )));
    }
    let den = zeta * kappa.cos() - mu;
    if den.abs() < 1e-14 * (zeta.abs() + mu.abs()) {
        return Err(Error::domain(format!(
            "theta undefined: zeta cos(kappa) - mu = {den:e}"
        )));
    }
    // Four-quadrant form of the arctangent: S (mu - zeta e^{i kappa}) is then
    // positive, which fixes the sign of M1_tilde to that of p q.
    let theta = (zeta * kappa.sin()).atan2(-den);
    let s = Complex64::from_polar(settings.r, theta);
    let e = Complex64::from_polar(1.0, kappa);
    let sa = s * (mu - zeta * e);
    let sa_re = realness(sa, "S (mu - zeta e^{i kappa})")?;
    let sgn: i8 = match settings.branch {
        Branch::Upper => 1,
        Branch::Lower => -1,
        Branch::Auto => {
            if sa_re < 0.0 {
                1
            } else {
                -1
            }
        }
    };
    let sg = f64::from(sgn);
    let m1 = -sg * sa_re;
    let m1_tilde = realness(s * e * (zeta * zeta - mu * mu) / (mu * e - zeta), "M1_tilde")?;
    if !(m1 > 0.0) {
        return Err(Error::domain(format!("M1 = {m1} is not positive on the requested branch")));
    }
    if !(m1_tilde > 0.0) {
        return Err(Error::domain(format!(
            "M1_tilde = {m1_tilde} is not positive (requires p q > 0)"
        )));
    }
    let one_e = Complex64::new(1.0, 0.0) + e;
    let tau1 = sg * 2.0 * one_e * one_e / (s * e * (mu + zeta) * (mu - zeta * e));
    let tau2 = one_e / ((Complex64::new(1.0, 0.0) - e) * (mu + zeta));
    let tau3 = I * (2.0 * kappa.sin() / (mu + zeta));
    let tau4 = settings.tau4_interpretation.then(|| {
        let em1 = e - 1.0;
        sg * 2.0 * s * e * (zeta + mu * e) / (em1 * em1 * (mu + zeta))
    });
    let d = zeta * zeta + mu * mu - 2.0 * zeta * mu * kappa.cos();
    let r2 = settings.r * settings.r;
    let rho1 = -mu * zeta * r2 * (zeta * zeta - mu * mu) * kappa.sin() / (settings.m2_tilde * d);
    let rho2 = 8.0 * zeta * mu * (zeta - mu) * (1.0 + kappa.cos()).powi(2) * kappa.sin()
        / (settings.m2_tilde * (mu + zeta) * d * d);
    Ok(ReductionCoefficients {
        params: *params,
        kappa,
        omega,
        branch: sgn,
        r: settings.r,
        theta,
        s,
        m1,
        m1_tilde,
        m2_tilde: settings.m2_tilde,
        tau1,
        tau2,
        tau3,
        tau4,
        rho1,
        rho2,
    })
}

/// `d omega / d kappa` by Richardson-refined central differences with step `1e-6`.
pub fn group_velocity(params: &LpkdvParams, kappa: f64) -> Result<f64> {
    let h = 1e-6;
    if kappa - h <= 0.0 || kappa + h >= PI {
        return Err(Error::domain(format!("kappa = {kappa} too close to the ends of (0, pi)")));
    }
    let d = |h: f64| -> Result<f64> {
        Ok((dispersion(params, kappa + h)? - dispersion(params, kappa - h)?) / (2.0 * h))
    };
    Ok((4.0 * d(h / 2.0)? - d(h)?) / 3.0)
}

/// Closed form `-4 p q / |mu - zeta e^{i kappa}|^2` of the group velocity.
pub fn group_velocity_exact(params: &LpkdvParams, kappa: f64) -> f64 {
    let a = Complex64::new(params.mu(), 0.0) - Complex64::from_polar(params.zeta(), kappa);
    -4.0 * params.p() * params.q() / a.norm_sqr()
}

/// Slow variables `xi = xi_origin + (M1 n - sgn M1_tilde m) / N` and `tau = M2_tilde m / N^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlowCoordinates {
    pub n_scale: usize,
    pub m1: f64,
    pub m1_tilde: f64,
    pub m2_tilde: f64,
    pub branch: i8,
    pub xi_origin: f64,
}

impl SlowCoordinates {
    pub fn xi(&self, n: f64, m: f64) -> f64 {
        self.xi_origin + (self.m1 * n - f64::from(self.branch) * self.m1_tilde * m) / self.n_scale as f64
    }

    pub fn tau(&self, m: f64) -> f64 {
        self.m2_tilde * m / (self.n_scale as f64).powi(2)
    }

    /// `xi` increment per unit step in `n`.
    pub fn dxi_dn(&self) -> f64 {
        self.m1 / self.n_scale as f64
    }
}

/// `u1^(0)(xi) = Re int_{xi0}^{xi} tau1 |u|^2 ds` for a periodic envelope: a
/// linear drift from the mean of the integrand plus a periodic remainder.
#[derive(Clone, Debug)]
pub struct ZerothHarmonic {
    xi0: f64,
    slope: f64,
    offset: f64,
    periodic: Option<SpectralInterpolant>,
    /// `Im(tau1) int |u|^2` over one period.
    pub imaginary_total: f64,
}

impl ZerothHarmonic {
    pub fn eval(&self, xi: f64) -> f64 {
        let per = self.periodic.as_ref().map_or(0.0, |p| p.eval(xi).re);
        self.slope * (xi - self.xi0) + per - self.offset
    }

    pub fn eval_progression(&self, xi_start: f64, step: f64, count: usize) -> Vec<f64> {
        let per = match &self.periodic {
            Some(p) => p.eval_progression(xi_start, step, count),
            None => vec![Complex64::new(0.0, 0.0); count],
        };
        per.iter()
            .enumerate()
            .map(|(j, v)| self.slope * (xi_start + j as f64 * step - self.xi0) + v.re - self.offset)
            .collect()
    }

    /// Rise over one full period.
    pub fn total_rise(&self) -> f64 {
        self.slope * self.periodic.as_ref().map_or(0.0, |p| p.period())
    }
}

/// Edge threshold for the decay precondition.
pub const EDGE_TOLERANCE: f64 = 1e-6;

pub fn build_zeroth_harmonic(env: &Envelope, coeffs: &ReductionCoefficients) -> Result<ZerothHarmonic> {
    let edge = env.values()[0].norm();
    if edge >= EDGE_TOLERANCE {
        return Err(Error::precondition(format!(
            "envelope does not decay at the left edge xi = {}: |u| = {edge:e}",
            env.xi0()
        )));
    }
    let l = env.len();
    let dens: Vec<Complex64> = env
        .values()
        .iter()
        .map(|v| Complex64::new(coeffs.tau1.re * v.norm_sqr(), 0.0))
        .collect();
    let grid = SpectralGrid::new(l, env.dxi());
    let mut hat = grid.forward(&dens);
    let slope = hat[0].re / l as f64;
    let k = grid.wavenumbers().to_vec();
    for (j, h) in hat.iter_mut().enumerate() {
        if j == 0 || (l.is_multiple_of(2) && j == l / 2) {
            *h = Complex64::new(0.0, 0.0);
        } else {
            *h /= I * k[j];
        }
    }
    let per_vals = grid.inverse(hat);
    let periodic = Envelope::new(env.xi0(), env.dxi(), per_vals, env.tau())?.interpolant();
    let offset = periodic.eval(env.xi0()).re;
    let imaginary_total = coeffs.tau1.im * env.mass();
    Ok(ZerothHarmonic {
        xi0: env.xi0(),
        slope,
        offset,
        periodic: Some(periodic),
        imaginary_total,
    })
}

/// `u2^(2) = tau2 (u1^(1))^2` pointwise.
pub fn build_second_harmonic(env: &Envelope, coeffs: &ReductionCoefficients) -> Vec<Complex64> {
    env.values().iter().map(|v| coeffs.tau2 * v * v).collect()
}

/// How the envelope depends on the slow time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvelopeDynamics {
    /// Evolved by the reduced NLS equation.
    Nls,
    /// Held at its initial value.
    Frozen,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnsatzOptions {
    pub include_zeroth: bool,
    pub include_second: bool,
    pub dynamics: EnvelopeDynamics,
    /// Snapshot spacing of the dense NLS output.
    pub snapshot_step: f64,
    pub xi_origin: f64,
}

impl Default for AnsatzOptions {
    fn default() -> Self {
        Self {
            include_zeroth: true,
            include_second: true,
            dynamics: EnvelopeDynamics::Nls,
            snapshot_step: 2e-3,
            xi_origin: 0.0,
        }
    }
}

/// The assembled truncated expansion together with the envelope samples used.
#[derive(Clone, Debug)]
pub struct AnsatzField {
    pub n_scale: usize,
    pub coords: SlowCoordinates,
    pub assembled: LatticeField,
    /// `u1^(1)` at every lattice point.
    pub envelope_samples: LatticeField,
    /// `u1^(0)` at every lattice point.
    pub zeroth_samples: LatticeField,
}

/// Source of `u1^(1)(xi, tau)` for the assembly.
pub enum EnvelopeSource<'a> {
    Frozen(&'a Envelope),
    Dense(&'a Trajectory),
}

impl EnvelopeSource<'_> {
    fn at(&self, tau: f64) -> Result<Envelope> {
        match self {
            EnvelopeSource::Frozen(e) => Ok((*e).clone()),
            EnvelopeSource::Dense(t) => t.at(tau),
        }
    }
}

/// Assembles
/// `u = (u1^(0) + u1^(1) e^{i theta} + c.c.) / N + (u2^(2) e^{2 i theta} + c.c.) / N^2`
/// with `theta = kappa n - omega m` on an `nn x nm` window.
pub fn assemble_ansatz(
    envelope: &Envelope,
    coeffs: &ReductionCoefficients,
    n_scale: usize,
    window: (usize, usize),
    options: &AnsatzOptions,
) -> Result<AnsatzField> {
    let (nn, nm) = window;
    let mut coords = coeffs.slow_coordinates(n_scale);
    coords.xi_origin = options.xi_origin;
    check_window(envelope, &coords, nn, nm)?;
    let tau_max = coords.tau((nm.max(1) - 1) as f64);
    let traj;
    let source = match options.dynamics {
        EnvelopeDynamics::Frozen => EnvelopeSource::Frozen(envelope),
        EnvelopeDynamics::Nls => {
            let step = options.snapshot_step.min(tau_max.max(f64::MIN_POSITIVE));
            traj = Trajectory::compute(envelope, &coeffs.nls(), envelope.tau() + tau_max, step)?;
            EnvelopeSource::Dense(&traj)
        }
    };
    assemble_from_source(&source, coeffs, &coords, window, options)
}

/// As [`assemble_ansatz`] with a caller-supplied envelope source.
pub fn assemble_from_source(
    source: &EnvelopeSource<'_>,
    coeffs: &ReductionCoefficients,
    coords: &SlowCoordinates,
    window: (usize, usize),
    options: &AnsatzOptions,
) -> Result<AnsatzField> {
    let (nn, nm) = window;
    let n_inv = 1.0 / coords.n_scale as f64;
    let tau_start = match source {
        EnvelopeSource::Frozen(e) => e.tau(),
        EnvelopeSource::Dense(t) => t.tau_range().0,
    };
    let carrier = coeffs.carrier();
    type Row = (Vec<Complex64>, Vec<Complex64>, Vec<Complex64>);
    let rows: Vec<Result<Row>> = (0..nm)
        .into_par_iter()
        .map(|m| -> Result<Row> {
            let env = source.at(tau_start + coords.tau(m as f64))?;
            let xi_start = coords.xi(0.0, m as f64);
            let step = coords.dxi_dn();
            let a = env.interpolant().eval_progression(xi_start, step, nn);
            let b = if options.include_zeroth {
                build_zeroth_harmonic(&env, coeffs)?.eval_progression(xi_start, step, nn)
            } else {
                vec![0.0; nn]
            };
            let mut u = Vec::with_capacity(nn);
            for n in 0..nn {
                let ph = Complex64::from_polar(1.0, carrier.phase(n as f64, m as f64));
                let mut v = (b[n] + 2.0 * (a[n] * ph).re) * n_inv;
                if options.include_second {
                    v += 2.0 * (coeffs.tau2 * a[n] * a[n] * ph * ph).re * n_inv * n_inv;
                }
                u.push(Complex64::new(v, 0.0));
            }
            let bz = b.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            Ok((u, a, bz))
        })
        .collect();
    let mut assembled = Vec::with_capacity(nn * nm);
    let mut env_samples = Vec::with_capacity(nn * nm);
    let mut zeroth = Vec::with_capacity(nn * nm);
    for row in rows {
        let (u, a, b) = row?;
        assembled.extend(u);
        env_samples.extend(a);
        zeroth.extend(b);
    }
    Ok(AnsatzField {
        n_scale: coords.n_scale,
        coords: *coords,
        assembled: LatticeField::from_values(nn, nm, FieldKind::Real, assembled)?,
        envelope_samples: LatticeField::from_values(nn, nm, FieldKind::Complex, env_samples)?,
        zeroth_samples: LatticeField::from_values(nn, nm, FieldKind::Real, zeroth)?,
    })
}

fn check_window(env: &Envelope, coords: &SlowCoordinates, nn: usize, nm: usize) -> Result<()> {
    if nn == 0 || nm == 0 {
        return Err(Error::domain("empty window"));
    }
    let lo = env.xi0();
    let hi = env.xi0() + env.period();
    for (n, m) in [(0, 0), (nn - 1, 0), (0, nm - 1), (nn - 1, nm - 1)] {
        let xi = coords.xi(n as f64, m as f64);
        if xi < lo - 1e-12 || xi > hi + 1e-12 {
            return Err(Error::domain(format!(
                "slow coordinate xi = {xi:.6} at (n={n}, m={m}) outside the envelope domain [{lo}, {hi})"
            )));
        }
    }
    Ok(())
}

/// Fitted exponent, or a label when the data is identically zero.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Exponent {
    Fitted(f64),
    Label(String),
}

impl Exponent {
    pub fn value(&self) -> Option<f64> {
        match self {
            Exponent::Fitted(v) => Some(*v),
            Exponent::Label(_) => None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    #[serde(rename = "N")]
    pub n: Vec<usize>,
    pub residual: Vec<f64>,
    pub exponent: Exponent,
    pub fit_r2: f64,
    /// First-harmonic residual content after demodulation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub demodulated: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub demodulated_exponent: Option<f64>,
}

impl ScalingReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("N,residual\n");
        for (n, r) in self.n.iter().zip(&self.residual) {
            s.push_str(&format!("{n},{r:e}\n"));
        }
        s
    }
}

/// Decay exponent `e` in `R ~ N^{-e}`.
pub fn decay_exponent(ns: &[f64], values: &[f64]) -> Result<(Exponent, f64)> {
    if values.iter().all(|&v| v == 0.0) {
        return Ok((Exponent::Label("exact".into()), 1.0));
    }
    let inv: Vec<f64> = ns.iter().map(|n| 1.0 / n).collect();
    let fit = power_law(&inv, values)?;
    Ok((Exponent::Fitted(fit.exponent), fit.r2))
}

/// Interior plaquette margin for residual norms.
pub const RESIDUAL_MARGIN: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingOptions {
    pub ansatz: AnsatzOptions,
    pub margin: usize,
    /// Box size of the demodulated diagnostic; `None` skips it.
    pub demodulation_box: Option<usize>,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        Self {
            ansatz: AnsatzOptions::default(),
            margin: RESIDUAL_MARGIN,
            demodulation_box: None,
        }
    }
}

/// Residual `max |Q(u)|` of the assembled ansatz for each `N`, with a power-law fit.
pub fn residual_scaling(
    envelope: &Envelope,
    coeffs: &ReductionCoefficients,
    n_list: &[usize],
    window: (usize, usize),
    options: &ScalingOptions,
) -> Result<ScalingReport> {
    if n_list.len() < 3 {
        return Err(Error::Numerical(format!(
            "degenerate fit: {} values of N, need at least 3",
            n_list.len()
        )));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("N values must be strictly ascending"));
    }
    let mut residual = Vec::with_capacity(n_list.len());
    let mut demod = Vec::new();
    for &n in n_list {
        let ans = assemble_ansatz(envelope, coeffs, n, window, &options.ansatz)?;
        residual.push(max_residual(&ans.assembled, &coeffs.params, options.margin));
        if let Some(b) = options.demodulation_box {
            demod.push(demodulated_residual(&ans.assembled, coeffs, b, 2 * options.margin));
        }
    }
    let ns: Vec<f64> = n_list.iter().map(|&n| n as f64).collect();
    let (exponent, fit_r2) = decay_exponent(&ns, &residual)?;
    let (demodulated, demodulated_exponent) = if options.demodulation_box.is_some() {
        let e = decay_exponent(&ns, &demod)?.0.value();
        (Some(demod), e)
    } else {
        (None, None)
    };
    Ok(ScalingReport {
        n: n_list.to_vec(),
        residual,
        exponent,
        fit_r2,
        demodulated,
        demodulated_exponent,
    })
}

/// Box average of `Q(u) e^{-i theta}` at plaquette centres; largest modulus
/// over the interior. Isolates the first-harmonic part of the residual, which
/// carries the envelope equation.
pub fn demodulated_residual(field: &LatticeField, coeffs: &ReductionCoefficients, boxw: usize, margin: usize) -> f64 {
    let (nn, nm) = (field.nn(), field.nm());
    if nn < 2 || nm < 2 {
        return 0.0;
    }
    let (pn, pm) = (nn - 1, nm - 1);
    let carrier = coeffs.carrier();
    let params = coeffs.params;
    let mut z = vec![Complex64::new(0.0, 0.0); pn * pm];
    for m in 0..pm {
        for n in 0..pn {
            let w = field.get(n + 1, m) - field.get(n, m + 1);
            let d = field.get(n + 1, m + 1) - field.get(n, m);
            let r = d * params.mu() + w * params.zeta() - w * d;
            z[m * pn + n] = r * Complex64::from_polar(1.0, -carrier.phase(n as f64 + 0.5, m as f64 + 0.5));
        }
    }
    // Summed-area table for box averages.
    let mut sat = vec![Complex64::new(0.0, 0.0); (pn + 1) * (pm + 1)];
    for m in 0..pm {
        for n in 0..pn {
            sat[(m + 1) * (pn + 1) + n + 1] =
                z[m * pn + n] + sat[m * (pn + 1) + n + 1] + sat[(m + 1) * (pn + 1) + n] - sat[m * (pn + 1) + n];
        }
    }
    let area = (boxw * boxw) as f64;
    let mut best: f64 = 0.0;
    if pn < boxw + 2 * margin || pm < boxw + 2 * margin {
        return 0.0;
    }
    for m0 in margin..=pm - boxw - margin {
        for n0 in margin..=pn - boxw - margin {
            let (n1, m1) = (n0 + boxw, m0 + boxw);
            let s = sat[m1 * (pn + 1) + n1] - sat[m0 * (pn + 1) + n1] - sat[m1 * (pn + 1) + n0] + sat[m0 * (pn + 1) + n0];
            best = best.max(s.norm() / area);
        }
    }
    best
}

/// Rational realization of `M1_tilde / M1` for integer slow-scale factors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IntegerScales {
    pub ratio: f64,
    #[serde(rename = "M1")]
    pub m1: u64,
    #[serde(rename = "M1_tilde")]
    pub m1_tilde: u64,
    /// The `r` at which `M1` equals the integer above.
    pub r: f64,
    /// True when both factors are integers at that `r` to within 1e-12.
    pub exact: bool,
}

impl IntegerScales {
    /// `N` admits the coarse lattice as a sublattice iff `M1` divides `N`.
    pub fn is_sublattice(&self, n_scale: u64) -> bool {
        n_scale.is_multiple_of(self.m1)
    }
}

/// Best rational approximation of `M1_tilde / M1` with denominator at most `max_den`.
pub fn integer_scales(coeffs: &ReductionCoefficients, max_den: u64) -> IntegerScales {
    let ratio = coeffs.m1_tilde / coeffs.m1;
    let (num, den) = best_rational(ratio, max_den.max(1));
    let r = coeffs.r * den as f64 / coeffs.m1;
    let exact = (ratio - num as f64 / den as f64).abs() < 1e-12 * ratio.abs().max(1.0);
    IntegerScales {
        ratio,
        m1: den,
        m1_tilde: num,
        r,
        exact,
    }
}

fn best_rational(x: f64, max_den: u64) -> (u64, u64) {
    // Continued-fraction convergents.
    let (mut h0, mut h1) = (0u64, 1u64);
    let (mut k0, mut k1) = (1u64, 0u64);
    let mut y = x;
    let mut best = (x.round() as u64, 1u64);
    for _ in 0..64 {
        let a = y.floor();
        let ai = a as u64;
        let h2 = ai.saturating_mul(h1).saturating_add(h0);
        let k2 = ai.saturating_mul(k1).saturating_add(k0);
        if k2 > max_den || k2 == 0 {
            break;
        }
        best = (h2, k2);
        let frac = y - a;
        if frac.abs() < 1e-12 {
            break;
        }
        y = 1.0 / frac;
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference() -> ReductionCoefficients {
        let p = LpkdvParams::new(1.5, 0.5).unwrap();
        compute_coefficients(&p, PI / 2.0, &ReductionSettings::default()).unwrap()
    }

    #[test]
    fn reference_coefficients() {
        let c = reference();
        assert!((c.m1 - 5f64.sqrt()).abs() < 1e-12);
        assert!((c.m1_tilde - 3.0 / 5f64.sqrt()).abs() < 1e-12);
        assert!((c.rho1 + 1.2).abs() < 1e-12);
        assert!((c.rho2 - 16.0 / 75.0).abs() < 1e-12);
        assert!((c.tau2 - Complex64::new(0.0, 1.0 / 3.0)).norm() < 1e-12);
        assert!((c.tau1 - Complex64::new(-4.0 / (3.0 * 5f64.sqrt()), 0.0)).norm() < 1e-12);
        assert!((c.tau3 - Complex64::new(0.0, 2.0 / 3.0)).norm() < 1e-12);
        assert_eq!(c.branch, -1);
        assert!(c.tau4.is_none());
        assert!((c.omega + 2.498_091_544_796_509).abs() < 1e-12);
        assert!(c.nls().is_defocusing());
    }

    #[test]
    fn tau4_behind_flag() {
        let p = LpkdvParams::new(1.5, 0.5).unwrap();
        let s = ReductionSettings {
            tau4_interpretation: true,
            ..Default::default()
        };
        let c = compute_coefficients(&p, PI / 2.0, &s).unwrap();
        let t4 = c.tau4.unwrap();
        let e = Complex64::new(0.0, 1.0);
        let expect = -2.0 * c.s * e * (2.0 + e) / ((e - 1.0) * (e - 1.0) * 3.0);
        assert!((t4 - expect).norm() < 1e-12);
    }

    #[test]
    fn explicit_branch_with_negative_m1_is_rejected() {
        let p = LpkdvParams::new(1.5, 0.5).unwrap();
        let s = ReductionSettings {
            branch: Branch::Upper,
            ..Default::default()
        };
        assert!(compute_coefficients(&p, PI / 2.0, &s).is_err());
        let neg = LpkdvParams::new(1.5, -0.5).unwrap();
        assert!(compute_coefficients(&neg, PI / 2.0, &ReductionSettings::default()).is_err());
    }

    #[test]
    fn group_velocity_examples() {
        let p = LpkdvParams::new(2.0, 1.0).unwrap();
        assert!((group_velocity(&p, PI / 2.0).unwrap() + 0.8).abs() < 1e-8);
        assert!((group_velocity(&p, 1e-3).unwrap() + 2.0).abs() < 1e-5);
        let c = reference();
        let v = group_velocity(&c.params, PI / 2.0).unwrap();
        assert!((v + 0.6).abs() < 1e-8);
        assert!((v + c.m1_tilde / c.m1).abs() < 1e-8);
    }

    #[test]
    fn slow_coordinates_follow_characteristics() {
        let c = reference();
        let sc = c.slow_coordinates(32);
        // sgn = -1: xi constant along n/m = -M1_tilde/M1
        let slope = f64::from(c.branch) * c.m1_tilde / c.m1;
        let base = sc.xi(10.0, 4.0);
        for t in [-3.0, 0.5, 7.0] {
            assert!((sc.xi(10.0 + slope * t, 4.0 + t) - base).abs() < 1e-12);
        }
        assert!((sc.tau(64.0) - 64.0 / 1024.0).abs() < 1e-15);
    }

    #[test]
    fn zeroth_harmonic_examples() {
        let c = reference();
        let zero = Envelope::from_fn(0.0, 20.0, 64, |_| Complex64::new(0.0, 0.0)).unwrap();
        let z = build_zeroth_harmonic(&zero, &c).unwrap();
        assert_eq!(z.eval(7.3), 0.0);

        let g = Envelope::gaussian(-20.0, 60.0, 256, 0.8, 5.0, 2.0).unwrap();
        let z = build_zeroth_harmonic(&g, &c).unwrap();
        let rise = z.eval(39.9) - z.eval(-20.0);
        let l2 = 0.64 * 2.0 * (PI / 2.0).sqrt();
        assert!((rise - c.tau1.re * l2).abs() < 1e-9, "rise {rise} vs {}", c.tau1.re * l2);
        // monotone (tau1 < 0: decreasing)
        let samples = z.eval_progression(-20.0, 0.05, 1199);
        assert!(samples.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(z.eval(-20.0).abs() < 1e-14);

        let wide = Envelope::gaussian(0.0, 20.0, 64, 0.8, 1.0, 2.0).unwrap();
        assert!(matches!(build_zeroth_harmonic(&wide, &c), Err(Error::Precondition(_))));
    }

    #[test]
    fn zeroth_harmonic_on_a_plateau_grows_linearly() {
        let c = reference();
        // smooth plateau of height 0.5 on [10, 30]
        let f = |x: f64| 0.125 * (1.0 + ((x - 10.0) / 0.5).tanh()) * (1.0 - ((x - 30.0) / 0.5).tanh());
        let env = Envelope::from_fn(0.0, 40.0, 512, |x| Complex64::new(f(x), 0.0)).unwrap();
        let z = build_zeroth_harmonic(&env, &c).unwrap();
        let slope = (z.eval(25.0) - z.eval(15.0)) / 10.0;
        assert!((slope - c.tau1.re * 0.25).abs() < 1e-6);
    }

    #[test]
    fn second_harmonic_examples() {
        let c = reference();
        let one = Envelope::from_fn(0.0, 10.0, 16, |_| Complex64::new(1.0, 0.0)).unwrap();
        assert!(build_second_harmonic(&one, &c).iter().all(|v| (v - Complex64::new(0.0, 1.0 / 3.0)).norm() < 1e-12));
        let g = Envelope::gaussian(0.0, 10.0, 32, 0.7, 5.0, 1.0).unwrap().rotated(0.4);
        for (v, u) in build_second_harmonic(&g, &c).iter().zip(g.values()) {
            assert!((v.norm() - c.tau2.norm() * u.norm_sqr()).abs() < 1e-14);
        }
    }

    fn small_env() -> Envelope {
        Envelope::gaussian(-20.0, 80.0, 256, 0.8, 6.0, 2.0).unwrap()
    }

    #[test]
    fn ansatz_is_real_and_scales_like_one_over_n() {
        let c = reference();
        let env = small_env();
        let a16 = assemble_ansatz(&env, &c, 16, (128, 64), &AnsatzOptions::default()).unwrap();
        let a32 = assemble_ansatz(&env, &c, 32, (128, 64), &AnsatzOptions::default()).unwrap();
        assert!(a16.assembled.is_real());
        let ratio = a16.assembled.max_abs() / a32.assembled.max_abs();
        assert!((ratio - 2.0).abs() < 0.2, "ratio {ratio}");
        let zero = Envelope::from_fn(-20.0, 80.0, 64, |_| Complex64::new(0.0, 0.0)).unwrap();
        let z = assemble_ansatz(&zero, &c, 16, (20, 20), &AnsatzOptions::default()).unwrap();
        assert_eq!(z.assembled.max_abs(), 0.0);
    }

    #[test]
    fn ansatz_outside_domain_is_reported() {
        let c = reference();
        let env = small_env();
        let err = assemble_ansatz(&env, &c, 4, (400, 10), &AnsatzOptions::default()).unwrap_err();
        assert!(err.to_string().contains("(n=399, m=0)"), "{err}");
    }

    #[test]
    fn zero_envelope_scaling_is_exact() {
        let c = reference();
        let zero = Envelope::from_fn(-20.0, 80.0, 64, |_| Complex64::new(0.0, 0.0)).unwrap();
        let rep = residual_scaling(&zero, &c, &[16, 32, 64], (24, 24), &ScalingOptions::default()).unwrap();
        assert_eq!(rep.exponent, Exponent::Label("exact".into()));
        let json = serde_json::to_value(&rep).unwrap();
        assert!(json.get("N").is_some() && json.get("fit_r2").is_some());
        assert!(residual_scaling(&zero, &c, &[16, 32], (24, 24), &ScalingOptions::default()).is_err());
    }

    #[test]
    fn integer_helper() {
        let c = reference();
        let ints = integer_scales(&c, 100);
        assert_eq!((ints.m1, ints.m1_tilde), (5, 3));
        assert!(ints.exact);
        assert!((ints.r - 5f64.sqrt()).abs() < 1e-12);
        assert!(ints.is_sublattice(64 * 5));
        assert!(!ints.is_sublattice(64));
    }

    proptest! {
        #[test]
        fn group_velocity_matches_slow_scales(p in 0.2f64..3.0, q in 0.2f64..3.0, kappa in 0.1f64..3.0) {
            prop_assume!((p - q).abs() > 0.05);
            let prm = LpkdvParams::new(p, q).unwrap();
            let c = compute_coefficients(&prm, kappa, &ReductionSettings::default()).unwrap();
            prop_assert!(c.m1 > 0.0 && c.m1_tilde > 0.0);
            let v = group_velocity(&prm, kappa).unwrap();
            prop_assert!(((c.m1_tilde / c.m1).abs() - v.abs()).abs() <= 1e-6 * v.abs().max(1e-3));
            prop_assert!((v - group_velocity_exact(&prm, kappa)).abs() < 1e-7 * (1.0 + v.abs()));
            prop_assert!(c.rho1 * c.rho2 < 0.0);
        }
    }
}
