//! The first two generalized symmetries of the lattice equation: right-hand
//! sides, one-step RK4 flow, the symmetry residual test and the projection of
//! the flows onto the first harmonic of a multiscale ansatz.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::power_law;
use crate::model::{evolve_ivp, quad_residual, ColumnSide, FieldKind, IvpBoundary, LatticeField, LpkdvParams};
use crate::reduction::{assemble_ansatz, AnsatzField, AnsatzOptions, EnvelopeDynamics, Exponent, ReductionCoefficients};
use crate::nls::Envelope;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowId {
    /// `1 / (2p + u_{n-1} - u_{n+1}) - 1 / (2p)`.
    Flow1,
    /// `(2p + u_{n-1} - u_{n+1})^{-2} [(2p + u_n - u_{n+2})^{-1} + (2p + u_{n-2} - u_n)^{-1}] - 1 / (4p^3)`.
    Flow2,
    /// Flow1 with `u_{n-1} - u_{n+1}` replaced by `u_{n+1} - u_{n+2}`; not a symmetry.
    NegativeControl,
}

impl FlowId {
    /// Columns on each side needed by the stencil.
    pub fn stencil(self) -> usize {
        match self {
            FlowId::Flow1 => 1,
            FlowId::Flow2 | FlowId::NegativeControl => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FlowId::Flow1 => "flow1",
            FlowId::Flow2 => "flow2",
            FlowId::NegativeControl => "negative_control",
        }
    }
}

impl std::str::FromStr for FlowId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flow1" => Ok(FlowId::Flow1),
            "flow2" => Ok(FlowId::Flow2),
            "negative_control" | "control" => Ok(FlowId::NegativeControl),
            _ => Err(Error::Config(format!("unknown flow '{s}' (flow1, flow2, negative_control)"))),
        }
    }
}

/// A right-hand side with the columns `[0, margin)` and `[nn - margin, nn)` invalid (zero).
#[derive(Clone, Debug)]
pub struct FlowRhs {
    pub values: LatticeField,
    pub margin: usize,
}

fn checked(den: Complex64, p: f64, n: usize, m: usize, stage: usize) -> Result<Complex64> {
    if den.norm() <= 1e-10 * p.abs() {
        return Err(Error::SingularFlow {
            n,
            m,
            stage,
            denominator: den.norm(),
        });
    }
    Ok(den.inv())
}

fn rhs_at(row: &[Complex64], n: usize, p: f64, which: FlowId, m: usize, stage: usize) -> Result<Complex64> {
    let tp = 2.0 * p;
    match which {
        FlowId::Flow1 => Ok(checked(row[n - 1] - row[n + 1] + tp, p, n, m, stage)? - 1.0 / tp),
        FlowId::Flow2 => {
            let a = checked(row[n - 1] - row[n + 1] + tp, p, n, m, stage)?;
            let b = checked(row[n] - row[n + 2] + tp, p, n, m, stage)?;
            let c = checked(row[n - 2] - row[n] + tp, p, n, m, stage)?;
            Ok(a * a * (b + c) - 1.0 / (4.0 * p * p * p))
        }
        FlowId::NegativeControl => Ok(checked(row[n + 1] - row[n + 2] + tp, p, n, m, stage)? - 1.0 / tp),
    }
}

fn rhs_with_margin(field: &LatticeField, p: f64, which: FlowId, margin_in: usize, stage: usize) -> Result<FlowRhs> {
    let (nn, nm) = (field.nn(), field.nm());
    let margin = margin_in + which.stencil();
    if nn <= 2 * margin {
        return Err(Error::domain(format!(
            "window of {nn} columns too narrow for an invalid margin of {margin} on each side"
        )));
    }
    let rows: Vec<Vec<Complex64>> = (0..nm)
        .into_par_iter()
        .map(|m| {
            let row = field.row(m);
            let mut out = vec![Complex64::new(0.0, 0.0); nn];
            for (n, o) in out.iter_mut().enumerate().take(nn - margin).skip(margin) {
                *o = rhs_at(row, n, p, which, m, stage)?;
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let kind = if field.is_real() && rows.iter().flatten().all(|v| v.im == 0.0) {
        FieldKind::Real
    } else {
        FieldKind::Complex
    };
    Ok(FlowRhs {
        values: LatticeField::from_values(nn, nm, kind, rows.concat())?,
        margin,
    })
}

/// Right-hand side `du/dlambda` at every interior point.
pub fn flow_rhs(field: &LatticeField, params: &LpkdvParams, which: FlowId) -> Result<FlowRhs> {
    rhs_with_margin(field, params.p(), which, 0, 0)
}

/// Field at group parameter `lambda`; columns within `invalid_margin` of either edge are meaningless.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub field: LatticeField,
    pub lambda: f64,
    pub invalid_margin: usize,
}

impl FlowState {
    pub fn new(field: LatticeField) -> Self {
        Self {
            field,
            lambda: 0.0,
            invalid_margin: 0,
        }
    }
}

/// One classical RK4 step; the invalid margin grows by four stencil widths.
pub fn flow_step(state: &FlowState, params: &LpkdvParams, which: FlowId, dlambda: f64) -> Result<FlowState> {
    let p = params.p();
    let u = &state.field;
    let k1 = rhs_with_margin(u, p, which, state.invalid_margin, 1)?;
    let k2 = rhs_with_margin(&u.axpy(dlambda / 2.0, &k1.values), p, which, k1.margin, 2)?;
    let k3 = rhs_with_margin(&u.axpy(dlambda / 2.0, &k2.values), p, which, k2.margin, 3)?;
    let k4 = rhs_with_margin(&u.axpy(dlambda, &k3.values), p, which, k3.margin, 4)?;
    let h6 = dlambda / 6.0;
    let field = u
        .axpy(h6, &k1.values)
        .axpy(2.0 * h6, &k2.values)
        .axpy(2.0 * h6, &k3.values)
        .axpy(h6, &k4.values);
    Ok(FlowState {
        field,
        lambda: state.lambda + dlambda,
        invalid_margin: k4.margin,
    })
}

/// Largest quad residual over plaquettes whose corners lie outside the margin.
pub fn interior_residual(field: &LatticeField, params: &LpkdvParams, margin: usize) -> Result<f64> {
    let (nn, nm) = (field.nn(), field.nm());
    if nn < 2 * margin + 2 || nm < 2 {
        return Err(Error::domain("no plaquette outside the invalid margin"));
    }
    let rows: Vec<f64> = (0..nm - 1)
        .into_par_iter()
        .map(|m| {
            let mut worst: f64 = 0.0;
            for n in margin..nn - margin - 1 {
                let r = quad_residual(field, params, n as i64, m as i64)?;
                worst = worst.max(r.norm());
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().fold(0.0, f64::max))
}

#[derive(Clone, Debug, Serialize)]
pub struct SymmetryReport {
    pub flow: FlowId,
    pub lambda: Vec<f64>,
    pub residual: Vec<f64>,
    /// Residual of the unflowed solution on the same plaquettes.
    pub base_residual: f64,
    /// Residuals at or below this are treated as round-off.
    pub floor: f64,
    pub exponent: Exponent,
    pub pass: bool,
}

impl SymmetryReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda,residual\n");
        for (l, r) in self.lambda.iter().zip(&self.residual) {
            s.push_str(&format!("{l:?},{r:?}\n"));
        }
        s
    }
}

/// Threshold exponent for an exact symmetry integrated by one RK4 step.
pub const SYMMETRY_EXPONENT: f64 = 4.0;

/// Flows a lattice solution by one RK4 step per `lambda` and fits the decay of
/// the residual of the flowed field.
pub fn symmetry_residual_scaling(
    solution: &LatticeField,
    params: &LpkdvParams,
    which: FlowId,
    lambda_list: &[f64],
) -> Result<SymmetryReport> {
    if lambda_list.len() < 3 {
        return Err(Error::domain("need at least three lambda values"));
    }
    if lambda_list.windows(2).any(|w| w[0] >= w[1]) || lambda_list[0] <= 0.0 {
        return Err(Error::domain("lambda values must be positive and ascending"));
    }
    let margin = 4 * which.stencil();
    let base_residual = interior_residual(solution, params, margin)?;
    if base_residual > 1e-11 {
        return Err(Error::precondition(format!(
            "input is not a lattice solution: residual {base_residual:e} > 1e-11"
        )));
    }
    let residual: Vec<f64> = lambda_list
        .par_iter()
        .map(|&l| {
            let st = flow_step(&FlowState::new(solution.clone()), params, which, l)?;
            interior_residual(&st.field, params, st.invalid_margin)
        })
        .collect::<Result<_>>()?;
    let floor = (100.0 * base_residual).max(10.0 * f64::EPSILON * (1.0 + solution.max_abs()));
    let above: Vec<(f64, f64)> = lambda_list
        .iter()
        .zip(&residual)
        .filter(|(_, r)| **r > floor)
        .map(|(l, r)| (*l, *r))
        .collect();
    let (exponent, pass) = if above.is_empty() {
        (Exponent::Label("below measurement floor".into()), true)
    } else if above.len() < 3 {
        (Exponent::Label("fewer than three points above the floor".into()), false)
    } else {
        let (x, y): (Vec<f64>, Vec<f64>) = above.into_iter().unzip();
        let fit = power_law(&x, &y)?;
        (Exponent::Fitted(fit.exponent), fit.exponent >= SYMMETRY_EXPONENT)
    };
    Ok(SymmetryReport {
        flow: which,
        lambda: lambda_list.to_vec(),
        residual,
        base_residual,
        floor,
        exponent,
        pass,
    })
}

/// Solution of the lattice equation from seeded uniform data in `[-amplitude, amplitude]`
/// on the first row and one column.
pub fn random_solution(
    params: &LpkdvParams,
    (nn, nm): (usize, usize),
    amplitude: f64,
    seed: u64,
    side: ColumnSide,
) -> Result<LatticeField> {
    if nn < 2 || nm < 1 {
        return Err(Error::domain("window needs at least 2 x 1 points"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let row: Vec<f64> = (0..nn).map(|_| rng.random_range(-amplitude..=amplitude)).collect();
    let mut column: Vec<f64> = (0..nm).map(|_| rng.random_range(-amplitude..=amplitude)).collect();
    column[0] = match side.resolve(params) {
        ColumnSide::Left => row[0],
        _ => row[nn - 1],
    };
    evolve_ivp(&IvpBoundary::real(&row, &column, side), params)
}

#[derive(Clone, Debug, Serialize)]
pub struct ProjectionReport {
    #[serde(rename = "N")]
    pub n_scale: usize,
    /// Points used after excluding small envelopes and the trimmed ends.
    pub points: usize,
    /// `max |F1 / prediction - 1|` for flow1.
    pub flow1_max_error: f64,
    pub flow1_mean_ratio: Complex64,
    /// Mean of the pointwise ratio of the flow2 and flow1 projections.
    pub flow2_over_flow1: Complex64,
    /// Standard deviation of that ratio over its modulus.
    pub flow2_over_flow1_rel_std: f64,
}

/// Points dropped at each end of each row after box averaging.
pub const PROJECTION_TRIM: usize = 4;

/// Envelope magnitude below which a point is excluded from the ratios.
pub const ENVELOPE_CUTOFF: f64 = 1e-8;

fn box_average(z: &[Complex64], w: usize) -> Vec<Complex64> {
    z.windows(w).map(|s| s.iter().sum::<Complex64>() / w as f64).collect()
}

/// Demodulates both flows on an ansatz field, averages over one carrier
/// period in `n`, and compares with `(i sin kappa / 2p^2) u1^(1) / N`.
pub fn harmonic_projection(ansatz: &AnsatzField, coeffs: &ReductionCoefficients) -> Result<ProjectionReport> {
    let field = &ansatz.assembled;
    let p = coeffs.params.p();
    let carrier = coeffs.carrier();
    let period = (2.0 * std::f64::consts::PI / coeffs.kappa - 1e-9).ceil() as usize;
    let (nn, nm) = (field.nn(), field.nm());
    let f1 = flow_rhs(field, &coeffs.params, FlowId::Flow1)?;
    let f2 = flow_rhs(field, &coeffs.params, FlowId::Flow2)?;
    let skip = PROJECTION_TRIM.max(f2.margin);
    if nn < period + 2 * skip + 1 {
        return Err(Error::domain("window too short for the projection"));
    }
    let coef = Complex64::new(0.0, coeffs.kappa.sin() / (2.0 * p * p));
    let nf = ansatz.n_scale as f64;
    let mut r1 = Vec::new();
    let mut r21 = Vec::new();
    for m in 0..nm {
        let demod = |v: &LatticeField| -> Vec<Complex64> {
            (0..nn)
                .map(|n| v.get(n, m) * Complex64::from_polar(1.0, -carrier.phase(n as f64, m as f64)))
                .collect()
        };
        let a1 = box_average(&demod(&f1.values), period);
        let a2 = box_average(&demod(&f2.values), period);
        let env = box_average(ansatz.envelope_samples.row(m), period);
        for j in skip..a1.len() - skip {
            if env[j].norm() < ENVELOPE_CUTOFF {
                continue;
            }
            r1.push(a1[j] / (coef * env[j] / nf));
            r21.push(a2[j] / a1[j]);
        }
    }
    let points = r1.len();
    if points == 0 {
        return Ok(ProjectionReport {
            n_scale: ansatz.n_scale,
            points,
            flow1_max_error: f64::NAN,
            flow1_mean_ratio: Complex64::new(f64::NAN, f64::NAN),
            flow2_over_flow1: Complex64::new(f64::NAN, f64::NAN),
            flow2_over_flow1_rel_std: f64::NAN,
        });
    }
    let k = points as f64;
    let mean1 = r1.iter().sum::<Complex64>() / k;
    let mean21 = r21.iter().sum::<Complex64>() / k;
    let var21 = r21.iter().map(|z| (z - mean21).norm_sqr()).sum::<f64>() / k;
    Ok(ProjectionReport {
        n_scale: ansatz.n_scale,
        points,
        flow1_max_error: r1.iter().map(|z| (z - 1.0).norm()).fold(0.0, f64::max),
        flow1_mean_ratio: mean1,
        flow2_over_flow1: mean21,
        flow2_over_flow1_rel_std: var21.sqrt() / mean21.norm(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionOptions {
    /// Slow extent of the window; its length in `n` is `xi_extent N / M1`.
    pub xi_extent: f64,
    pub xi_origin: f64,
    pub rows: usize,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self {
            xi_extent: 20.0,
            xi_origin: 0.0,
            rows: 4,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProjectionScaling {
    pub reports: Vec<ProjectionReport>,
    /// Error ratios between consecutive `N`.
    pub error_ratios: Vec<f64>,
}

/// Runs [`harmonic_projection`] for each `N` on a window of fixed slow extent.
pub fn projection_scaling(
    envelope: &Envelope,
    coeffs: &ReductionCoefficients,
    n_list: &[usize],
    options: &ProjectionOptions,
) -> Result<ProjectionScaling> {
    let reports: Vec<ProjectionReport> = n_list
        .iter()
        .map(|&n| {
            let nn = (options.xi_extent * n as f64 / coeffs.m1) as usize;
            let opts = AnsatzOptions {
                dynamics: EnvelopeDynamics::Frozen,
                xi_origin: options.xi_origin,
                ..Default::default()
            };
            let ans = assemble_ansatz(envelope, coeffs, n, (nn, options.rows), &opts)?;
            harmonic_projection(&ans, coeffs)
        })
        .collect::<Result<_>>()?;
    let error_ratios = reports
        .windows(2)
        .map(|w| w[0].flow1_max_error / w[1].flow1_max_error)
        .collect();
    Ok(ProjectionScaling { reports, error_ratios })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::{compute_coefficients, ReductionSettings};
    use std::f64::consts::PI;

    fn params() -> LpkdvParams {
        LpkdvParams::new(1.5, 0.5).unwrap()
    }

    #[test]
    fn flows_vanish_on_constants() {
        let f = LatticeField::from_real_fn(30, 3, |_, _| 0.37);
        for which in [FlowId::Flow1, FlowId::Flow2, FlowId::NegativeControl] {
            let r = flow_rhs(&f, &params(), which).unwrap();
            assert_eq!(r.values.max_abs(), 0.0);
            let st = flow_step(&FlowState::new(f.clone()), &params(), which, 0.1).unwrap();
            assert_eq!(st.field, f);
        }
    }

    #[test]
    fn flow1_point_value() {
        let p = LpkdvParams::new(1.0, 0.5).unwrap();
        // u_{n-1} - u_{n+1} = 2 at n = 3
        let f = LatticeField::from_real_fn(8, 1, |n, _| match n {
            2 => 1.0,
            4 => -1.0,
            _ => 0.0,
        });
        let r = flow_rhs(&f, &p, FlowId::Flow1).unwrap();
        assert!((r.values.get(3, 0).re + 0.25).abs() < 1e-15);
        assert_eq!(r.margin, 1);
        assert_eq!(r.values.get(0, 0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn flows_use_only_their_own_row() {
        let f = random_solution(&params(), (20, 4), 0.1, 3, ColumnSide::Right).unwrap();
        let mut g = f.clone();
        g.set(9, 2, Complex64::new(0.5, 0.0));
        for which in [FlowId::Flow1, FlowId::Flow2] {
            let a = flow_rhs(&f, &params(), which).unwrap().values;
            let b = flow_rhs(&g, &params(), which).unwrap().values;
            for m in [0, 1, 3] {
                assert_eq!(a.row(m), b.row(m));
            }
        }
    }

    #[test]
    fn singular_flow_is_located() {
        let f = LatticeField::from_real_fn(8, 1, |n, _| if n == 5 { 3.0 } else { 0.0 });
        let err = flow_rhs(&f, &params(), FlowId::Flow1).unwrap_err();
        assert!(matches!(err, Error::SingularFlow { n: 4, m: 0, stage: 0, .. }), "{err}");
    }

    #[test]
    fn rk4_step_has_fifth_order_local_error() {
        let f = random_solution(&params(), (120, 3), 0.1, 5, ColumnSide::Right).unwrap();
        let defect = |h: f64| {
            let one = flow_step(&FlowState::new(f.clone()), &params(), FlowId::Flow1, h).unwrap();
            let mut fine = FlowState::new(f.clone());
            for _ in 0..8 {
                fine = flow_step(&fine, &params(), FlowId::Flow1, h / 8.0).unwrap();
            }
            let mut worst: f64 = 0.0;
            for m in 0..3 {
                for n in fine.invalid_margin..120 - fine.invalid_margin {
                    worst = worst.max((one.field.get(n, m) - fine.field.get(n, m)).norm());
                }
            }
            worst
        };
        let ratio = defect(0.4) / defect(0.2);
        assert!(ratio > 24.0 && ratio < 40.0, "{ratio}");
    }

    #[test]
    fn step_back_returns_to_start() {
        let f = random_solution(&params(), (40, 2), 0.1, 9, ColumnSide::Right).unwrap();
        let fwd = flow_step(&FlowState::new(f.clone()), &params(), FlowId::Flow2, 0.05).unwrap();
        let back = flow_step(&fwd, &params(), FlowId::Flow2, -0.05).unwrap();
        assert_eq!(back.lambda, 0.0);
        for n in back.invalid_margin..40 - back.invalid_margin {
            assert!((back.field.get(n, 1) - f.get(n, 1)).norm() < 1e-9);
        }
    }

    #[test]
    fn symmetry_scaling_separates_flows_from_control() {
        let sol = random_solution(&params(), (60, 20), 0.1, 1, ColumnSide::Right).unwrap();
        let ls = [0.1, 0.2, 0.4];
        for which in [FlowId::Flow1, FlowId::Flow2] {
            let rep = symmetry_residual_scaling(&sol, &params(), which, &ls).unwrap();
            assert!(rep.pass, "{rep:?}");
        }
        let ctl = symmetry_residual_scaling(&sol, &params(), FlowId::NegativeControl, &ls).unwrap();
        assert!(!ctl.pass);
        assert!(ctl.exponent.value().unwrap() < 2.0);
    }

    #[test]
    fn tiny_lambda_is_below_floor() {
        let sol = random_solution(&params(), (40, 10), 0.01, 2, ColumnSide::Right).unwrap();
        let rep = symmetry_residual_scaling(&sol, &params(), FlowId::Flow1, &[1e-5, 2e-5, 4e-5]).unwrap();
        assert!(rep.pass);
        assert!(matches!(rep.exponent, Exponent::Label(_)));
    }

    #[test]
    fn non_solution_is_rejected() {
        let f = LatticeField::from_real_fn(30, 5, |n, m| 0.01 * (n * m) as f64);
        assert!(matches!(
            symmetry_residual_scaling(&f, &params(), FlowId::Flow1, &[0.1, 0.2, 0.4]),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn zero_envelope_gives_empty_projection() {
        let c = compute_coefficients(&params(), PI / 2.0, &ReductionSettings::default()).unwrap();
        let env = Envelope::gaussian(-20.0, 80.0, 256, 0.0, 10.0, 2.0).unwrap();
        let s = projection_scaling(&env, &c, &[16], &ProjectionOptions::default()).unwrap();
        assert_eq!(s.reports[0].points, 0);
    }

    #[test]
    fn projection_matches_leading_coefficient() {
        let c = compute_coefficients(&params(), PI / 2.0, &ReductionSettings::default()).unwrap();
        let env = Envelope::sech(-20.0, 80.0, 512, 0.8, 10.0, 2.0).unwrap();
        let s = projection_scaling(&env, &c, &[32, 64], &ProjectionOptions::default()).unwrap();
        let r64 = &s.reports[1];
        assert!(r64.flow1_max_error <= 3.0 / 64.0, "{r64:?}");
        assert!((s.error_ratios[0] - 2.0).abs() <= 0.6, "{:?}", s.error_ratios);
        assert!(r64.flow2_over_flow1_rel_std <= 0.05);
    }
}
