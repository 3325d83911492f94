//! The second-order scalar spectral problem `phi_{n-1} + a_n phi_{n+1} = E phi_n`
//! built from a lattice row, its eigenvalues, isospectrality in `m`, and the
//! first-order (Zakharov-Shabat type) limit on the slow scale.

use nalgebra::{DMatrix, Hessenberg, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{evolve_ivp, max_residual, ColumnSide, IvpBoundary, LatticeField, LpkdvParams};
use crate::nls::Envelope;
use crate::reduction::{assemble_ansatz, AnsatzOptions, EnvelopeDynamics, ReductionCoefficients};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// `phi` vanishes just outside the window.
    Dirichlet,
    /// Indices wrap around the row.
    Periodic,
}

/// Which stencil builds `a_n` from the row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientForm {
    /// `4p^2 / ([2p - (u_{n+2} - u_n)] [2p - (u_{n+1} - u_{n-1})])`; isospectral on solutions.
    Difference,
    /// `4p^2 / ([2p - (u_{n+2} + u_n)] [2p - (u_{n+1} + u_{n-1})])`; not isospectral on solutions.
    Sum,
}

/// Coefficients `a_n` and a boundary treatment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralProblem {
    /// Lattice index of `a[0]`.
    pub n_start: usize,
    pub a: Vec<f64>,
    pub boundary: Boundary,
}

impl SpectralProblem {
    pub fn new(a: Vec<f64>, boundary: Boundary) -> Self {
        Self { n_start: 0, a, boundary }
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Dense matrix of `(L phi)_n = phi_{n-1} + a_n phi_{n+1}`.
    pub fn dense_matrix(&self) -> DMatrix<f64> {
        let l = self.len();
        let mut m = DMatrix::<f64>::zeros(l, l);
        for i in 0..l {
            match self.boundary {
                Boundary::Dirichlet => {
                    if i > 0 {
                        m[(i, i - 1)] += 1.0;
                    }
                    if i + 1 < l {
                        m[(i, i + 1)] += self.a[i];
                    }
                }
                Boundary::Periodic => {
                    m[(i, (i + l - 1) % l)] += 1.0;
                    m[(i, (i + 1) % l)] += self.a[i];
                }
            }
        }
        m
    }
}

fn coefficient(p: f64, row: &[f64], n: usize, form: CoefficientForm, wrap: bool) -> Result<f64> {
    let len = row.len() as isize;
    let at = |k: isize| -> f64 {
        let idx = if wrap { k.rem_euclid(len) } else { k };
        row[idx as usize]
    };
    let n = n as isize;
    let (b1, b2) = match form {
        CoefficientForm::Difference => (2.0 * p - (at(n + 2) - at(n)), 2.0 * p - (at(n + 1) - at(n - 1))),
        CoefficientForm::Sum => (2.0 * p - (at(n + 2) + at(n)), 2.0 * p - (at(n + 1) + at(n - 1))),
    };
    let tol = 1e-10 * p.abs();
    for b in [b1, b2] {
        if b.abs() <= tol {
            return Err(Error::SingularPotential {
                n: n as usize,
                denominator: b.abs(),
            });
        }
    }
    Ok(4.0 * p * p / (b1 * b2))
}

/// Coefficients from the row `u[., m]`. Dirichlet problems use `n = 1 .. nn - 3`
/// so that every stencil stays inside the row; periodic problems wrap.
pub fn build_spectral_problem(
    field: &LatticeField,
    params: &LpkdvParams,
    m: usize,
    boundary: Boundary,
    form: CoefficientForm,
) -> Result<SpectralProblem> {
    if m >= field.nm() {
        return Err(Error::Index {
            n: 0,
            m: m as i64,
            nn: field.nn(),
            nm: field.nm(),
        });
    }
    if field.row(m).iter().any(|v| v.im != 0.0) {
        return Err(Error::domain("spectral problem needs a real row"));
    }
    let row = field.row_re(m);
    spectral_problem_from_row(&row, params.p(), boundary, form)
}

pub fn spectral_problem_from_row(
    row: &[f64],
    p: f64,
    boundary: Boundary,
    form: CoefficientForm,
) -> Result<SpectralProblem> {
    match boundary {
        Boundary::Dirichlet => {
            if row.len() < 4 {
                return Err(Error::domain("row too short: need two extra columns beyond the stencil"));
            }
            let a = (1..row.len() - 2)
                .map(|n| coefficient(p, row, n, form, false))
                .collect::<Result<Vec<_>>>()?;
            Ok(SpectralProblem {
                n_start: 1,
                a,
                boundary,
            })
        }
        Boundary::Periodic => {
            let a = (0..row.len())
                .map(|n| coefficient(p, row, n, form, true))
                .collect::<Result<Vec<_>>>()?;
            Ok(SpectralProblem {
                n_start: 0,
                a,
                boundary,
            })
        }
    }
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit QL with Wilkinson shifts.
pub fn symmetric_tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if off.len() + 1 != n {
        return Err(Error::domain("off-diagonal must have length n - 1"));
    }
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    const MAX_ITER: usize = 60;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_ITER {
                return Err(Error::Numerical(format!(
                    "tridiagonal QL did not converge for eigenvalue {l} after {MAX_ITER} iterations"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(|a, b| a.total_cmp(b));
    Ok(d)
}

/// Eigenvalues of a real upper Hessenberg matrix by Francis double-shift QR
/// with exceptional shifts.
pub fn hessenberg_eigenvalues(mut a: DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::domain("matrix must be square"));
    }
    const MAX_ITER: usize = 60;
    let eps = f64::EPSILON;
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[(i, j)].abs();
        }
    }
    let mut t = 0.0;
    let mut remaining = n;
    while remaining > 0 {
        let nn = remaining - 1;
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 1 {
                let mut s = a[(l - 1, l - 1)].abs() + a[(l, l)].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[(l, l - 1)].abs() <= eps * s {
                    a[(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[(nn, nn)];
            if l == nn {
                w[nn] = Complex64::new(x + t, 0.0);
                remaining -= 1;
                break;
            }
            let mut y = a[(nn - 1, nn - 1)];
            let mut ww = a[(nn, nn - 1)] * a[(nn - 1, nn)];
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + ww;
                let z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    let z = p + z.copysign(p);
                    w[nn - 1] = Complex64::new(x + z, 0.0);
                    w[nn] = w[nn - 1];
                    if z != 0.0 {
                        w[nn] = Complex64::new(x - ww / z, 0.0);
                    }
                } else {
                    w[nn] = Complex64::new(x + p, -z);
                    w[nn - 1] = w[nn].conj();
                }
                remaining -= 2;
                break;
            }
            if its == MAX_ITER {
                return Err(Error::Numerical(format!(
                    "Hessenberg QR did not converge after {MAX_ITER} iterations"
                )));
            }
            if its % 10 == 0 && its > 0 {
                t += x;
                for i in 0..=nn {
                    a[(i, i)] -= x;
                }
                let s = a[(nn, nn - 1)].abs() + a[(nn - 1, nn - 2)].abs();
                x = 0.75 * s;
                y = x;
                ww = -0.4375 * s * s;
            }
            its += 1;
            let (mut p, mut q, mut r);
            let mut m = nn - 2;
            loop {
                let z = a[(m, m)];
                let r0 = x - z;
                let s0 = y - z;
                p = (r0 * s0 - ww) / a[(m + 1, m)] + a[(m, m + 1)];
                q = a[(m + 1, m + 1)] - z - r0 - s0;
                r = a[(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[(m, m - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[(m - 1, m - 1)].abs() + z.abs() + a[(m + 1, m + 1)].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in m..nn - 1 {
                a[(i + 2, i)] = 0.0;
                if i != m {
                    a[(i + 2, i - 1)] = 0.0;
                }
            }
            for k in m..nn {
                if k != m {
                    p = a[(k, k - 1)];
                    q = a[(k + 1, k - 1)];
                    r = if k + 1 != nn { a[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s == 0.0 {
                    continue;
                }
                if k == m {
                    if l != m {
                        a[(k, k - 1)] = -a[(k, k - 1)];
                    }
                } else {
                    a[(k, k - 1)] = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                let z = r / s;
                q /= p;
                r /= p;
                for j in k..n {
                    let mut pp = a[(k, j)] + q * a[(k + 1, j)];
                    if k + 1 != nn {
                        pp += r * a[(k + 2, j)];
                        a[(k + 2, j)] -= pp * z;
                    }
                    a[(k + 1, j)] -= pp * y;
                    a[(k, j)] -= pp * x;
                }
                let mmin = if nn < k + 3 { nn } else { k + 3 };
                for i in 0..=mmin {
                    let mut pp = x * a[(i, k)] + y * a[(i, k + 1)];
                    if k + 1 != nn {
                        pp += z * a[(i, k + 2)];
                        a[(i, k + 2)] -= pp * r;
                    }
                    a[(i, k + 1)] -= pp * q;
                    a[(i, k)] -= pp;
                }
            }
        }
    }
    Ok(w)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Solver {
    /// Symmetrized tridiagonal or symmetric solver whenever possible.
    Auto,
    /// Always the general dense solver.
    Dense,
}

fn sort_complex(v: &mut [Complex64]) {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// Eigenvalues `E` of the operator, sorted by real part.
pub fn eigenvalues(sp: &SpectralProblem) -> Result<Vec<Complex64>> {
    eigenvalues_with(sp, Solver::Auto)
}

pub fn eigenvalues_with(sp: &SpectralProblem, solver: Solver) -> Result<Vec<Complex64>> {
    if sp.len() < 8 {
        return Err(Error::domain(format!("problem size {} below 8", sp.len())));
    }
    let positive = sp.a.iter().all(|&a| a > 0.0);
    let mut out: Vec<Complex64> = match (solver, sp.boundary, positive) {
        (Solver::Auto, Boundary::Dirichlet, true) => {
            // Gauge d_{n+1} / d_n = a_n^{-1/2} gives off-diagonals sqrt(a_n).
            let off: Vec<f64> = sp.a[..sp.len() - 1].iter().map(|a| a.sqrt()).collect();
            symmetric_tridiagonal_eigenvalues(&vec![0.0; sp.len()], &off)?
                .into_iter()
                .map(|x| Complex64::new(x, 0.0))
                .collect()
        }
        (Solver::Auto, Boundary::Periodic, true) if sp.a.iter().map(|a| a.ln()).sum::<f64>().abs() < 1e-12 => {
            // Around the ring the gauge closes only when prod a_n = 1.
            let l = sp.len();
            let mut m = DMatrix::<f64>::zeros(l, l);
            for i in 0..l {
                let s = sp.a[i].sqrt();
                m[(i, (i + 1) % l)] += s;
                m[((i + 1) % l, i)] += s;
            }
            SymmetricEigen::new(m)
                .eigenvalues
                .iter()
                .map(|&x| Complex64::new(x, 0.0))
                .collect()
        }
        _ => {
            let m = match sp.boundary {
                Boundary::Dirichlet => sp.dense_matrix(),
                Boundary::Periodic => Hessenberg::new(sp.dense_matrix()).h(),
            };
            hessenberg_eigenvalues(m)?
        }
    };
    if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("eigenvalue solver returned non-finite values".into()));
    }
    sort_complex(&mut out);
    Ok(out)
}

/// Threshold beyond the band `[-2, 2]` for discrete eigenvalues.
pub const BAND_MARGIN: f64 = 1e-8;

/// Real eigenvalues with `|E| > 2 + BAND_MARGIN`.
pub fn bound_states(sp: &SpectralProblem) -> Result<Vec<f64>> {
    Ok(eigenvalues(sp)?
        .into_iter()
        .filter(|z| z.im.abs() < 1e-9 && z.re.abs() > 2.0 + BAND_MARGIN)
        .map(|z| z.re)
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct DriftReport {
    pub m: Vec<usize>,
    pub bound_states: Vec<Vec<f64>>,
    /// Largest change of any bound state relative to the first row.
    pub drift: f64,
    /// Largest deviation from the row background within the edge columns.
    pub edge_activity: f64,
    pub note: String,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftOptions {
    pub form: CoefficientForm,
    pub residual_tolerance: f64,
    pub edge_width: usize,
}

impl Default for DriftOptions {
    fn default() -> Self {
        Self {
            form: CoefficientForm::Difference,
            residual_tolerance: 1e-9,
            edge_width: 5,
        }
    }
}

/// Tracks the discrete spectrum of the rows `m_list` of a lattice solution.
pub fn isospectral_drift(
    field: &LatticeField,
    params: &LpkdvParams,
    m_list: &[usize],
    options: &DriftOptions,
) -> Result<DriftReport> {
    if m_list.is_empty() {
        return Err(Error::domain("empty list of rows"));
    }
    let res = max_residual(field, params, 0);
    if res > options.residual_tolerance {
        return Err(Error::precondition(format!(
            "field does not solve the lattice equation: max residual {res:e} > {:e}",
            options.residual_tolerance
        )));
    }
    let mut edge_activity: f64 = 0.0;
    let w = options.edge_width.min(field.nn() / 2);
    for &m in m_list {
        let row = field.row_re(m);
        let (l0, r0) = (row[0], row[row.len() - 1]);
        for k in 0..w {
            edge_activity = edge_activity.max((row[k] - l0).abs()).max((row[row.len() - 1 - k] - r0).abs());
        }
    }
    let spectra: Vec<Vec<f64>> = m_list
        .par_iter()
        .map(|&m| build_spectral_problem(field, params, m, Boundary::Dirichlet, options.form).and_then(|sp| bound_states(&sp)))
        .collect::<Result<_>>()?;
    let first = &spectra[0];
    let mut note = String::new();
    let mut drift: f64 = 0.0;
    if spectra.iter().all(|s| s.is_empty()) {
        note = "no discrete spectrum".into();
    } else {
        for s in &spectra[1..] {
            if s.len() != first.len() {
                note = "bound-state count changed between rows".into();
            }
            for v in s {
                let nearest = first.iter().map(|f| (f - v).abs()).fold(f64::INFINITY, f64::min);
                drift = drift.max(nearest);
            }
        }
    }
    Ok(DriftReport {
        m: m_list.to_vec(),
        bound_states: spectra,
        drift,
        edge_activity,
        note,
    })
}

/// Solution with a Gaussian bump of the given amplitude and width in the first
/// row, `margin + 30` columns from the left, `margin` quiet columns beyond a
/// 40-column core, and a zero right-hand column of `rows` entries.
pub fn bump_solution(params: &LpkdvParams, margin: usize, rows: usize, amplitude: f64, width: f64) -> Result<LatticeField> {
    let w = 2 * margin + 40;
    let centre = margin as f64 + 30.0;
    let row: Vec<f64> = (0..w)
        .map(|n| amplitude * (-((n as f64 - centre) / width).powi(2)).exp())
        .collect();
    evolve_ivp(&IvpBoundary::real(&row, &vec![0.0; rows], ColumnSide::Right), params)
}

/// `phi_1^(3) = ((e^{2 i kappa} + e^{i kappa}) / (1 - e^{i kappa})) u1 phi1`.
pub fn third_harmonic(phi1: Complex64, u1: Complex64, kappa: f64) -> Result<Complex64> {
    let e = Complex64::from_polar(1.0, kappa);
    let den = Complex64::new(1.0, 0.0) - e;
    if den.norm() < 1e-14 {
        return Err(Error::domain("kappa = 0 makes the third-harmonic denominator vanish"));
    }
    Ok((e * e + e) / den * u1 * phi1)
}

/// First-order limit problem on `[xi0, xi0 + K dxi]`:
/// `scale Phi' + g A conj(Phi) = -i lambda Phi` with `g = 2 cos^2(kappa/2) / p`,
/// `mu1 = 2 sin(kappa/2) lambda`, and boundary conditions `Re Phi(xi0) = 0`,
/// `Re(e^{i chi} Phi(xi_R)) = 0`.
#[derive(Clone, Debug, Serialize)]
pub struct ZsProblem {
    pub xi0: f64,
    pub dxi: f64,
    /// Samples at `xi0 + j dxi`, `j = 0..=K`, with `K` a multiple of 4.
    pub potential: Vec<Complex64>,
    pub kappa: f64,
    pub p: f64,
    /// Coefficient of the derivative; `M1` for the limit of the lattice problem.
    pub derivative_scale: f64,
    pub chi: f64,
}

impl ZsProblem {
    pub fn new(
        xi0: f64,
        dxi: f64,
        potential: Vec<Complex64>,
        kappa: f64,
        p: f64,
        derivative_scale: f64,
        chi: f64,
    ) -> Result<Self> {
        let k = potential.len().saturating_sub(1);
        if k < 8 || !k.is_multiple_of(4) {
            return Err(Error::domain(format!(
                "potential needs K + 1 samples with K a positive multiple of 4, got K = {k}"
            )));
        }
        if derivative_scale == 0.0 || p == 0.0 {
            return Err(Error::domain("derivative scale and p must be nonzero"));
        }
        Ok(Self {
            xi0,
            dxi,
            potential,
            kappa,
            p,
            derivative_scale,
            chi,
        })
    }

    /// Samples a function on `K + 1` points covering `[xi0, xi0 + length]`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_fn(
        xi0: f64,
        length: f64,
        k: usize,
        f: impl Fn(f64) -> Complex64,
        kappa: f64,
        p: f64,
        derivative_scale: f64,
        chi: f64,
    ) -> Result<Self> {
        let dxi = length / k as f64;
        let pot = (0..=k).map(|j| f(xi0 + j as f64 * dxi)).collect();
        Self::new(xi0, dxi, pot, kappa, p, derivative_scale, chi)
    }

    pub fn length(&self) -> f64 {
        self.dxi * (self.potential.len() - 1) as f64
    }

    fn coupling(&self) -> f64 {
        2.0 * (self.kappa / 2.0).cos().powi(2) / self.p
    }

    fn mu1_per_lambda(&self) -> f64 {
        2.0 * (self.kappa / 2.0).sin()
    }

    /// Boundary mismatch at the right end for spectral value `lambda`, integrating
    /// with RK4 at step `stride * dxi` (`stride` 2 or 4; midpoints use samples).
    fn shoot(&self, lambda: f64, stride: usize) -> f64 {
        let g = self.coupling();
        let s = self.derivative_scale;
        let rhs = |phi: Complex64, a: Complex64| -> Complex64 {
            (Complex64::new(0.0, -lambda) * phi - a * phi.conj() * g) / s
        };
        let h = self.dxi * stride as f64;
        let half = stride / 2;
        let mut phi = Complex64::new(0.0, 1.0);
        let mut j = 0;
        while j + stride < self.potential.len() {
            let a0 = self.potential[j];
            let am = self.potential[j + half];
            let a1 = self.potential[j + stride];
            let k1 = rhs(phi, a0);
            let k2 = rhs(phi + k1 * (h / 2.0), am);
            let k3 = rhs(phi + k2 * (h / 2.0), am);
            let k4 = rhs(phi + k3 * h, a1);
            phi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            j += stride;
        }
        (Complex64::from_polar(1.0, self.chi) * phi).re
    }

    fn roots(&self, lambda_max: f64, scan: usize, stride: usize) -> Vec<f64> {
        let grid: Vec<f64> = (0..=scan)
            .map(|i| -lambda_max + 2.0 * lambda_max * i as f64 / scan as f64)
            .collect();
        let vals: Vec<f64> = grid.par_iter().map(|&l| self.shoot(l, stride)).collect();
        let mut out = Vec::new();
        for i in 0..scan {
            let (mut a, mut b) = (grid[i], grid[i + 1]);
            let (mut fa, fb) = (vals[i], vals[i + 1]);
            if fa == 0.0 {
                out.push(a);
                continue;
            }
            if fa * fb > 0.0 {
                continue;
            }
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                let fm = self.shoot(mid, stride);
                if fm == 0.0 || (b - a) < 1e-13 * (1.0 + mid.abs()) {
                    a = mid;
                    b = mid;
                    break;
                }
                if fa * fm < 0.0 {
                    b = mid;
                } else {
                    a = mid;
                    fa = fm;
                }
            }
            out.push(0.5 * (a + b));
        }
        out
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ZsSpectrum {
    /// Refinement-stable `mu1` values.
    pub eigenvalues: Vec<f64>,
    /// Values discarded by the refinement filter.
    pub rejected: Vec<f64>,
    pub diagnostic: String,
}

/// Refinement tolerance of the spurious-mode filter.
pub const REFINEMENT_TOLERANCE: f64 = 1e-3;

/// `mu1` values in `[-mu1_max, mu1_max]`, kept iff they move by less than
/// [`REFINEMENT_TOLERANCE`] when the integration step is halved.
pub fn zs_eigenvalues(zs: &ZsProblem, mu1_max: f64, scan: usize) -> ZsSpectrum {
    let lam_max = mu1_max / zs.mu1_per_lambda();
    let fine = zs.roots(lam_max, scan, 2);
    let coarse = zs.roots(lam_max, scan, 4);
    let mut eigenvalues = Vec::new();
    let mut rejected = Vec::new();
    for l in fine {
        let moved = coarse.iter().map(|c| (c - l).abs()).fold(f64::INFINITY, f64::min) * zs.mu1_per_lambda();
        let mu1 = l * zs.mu1_per_lambda();
        if moved < REFINEMENT_TOLERANCE {
            eigenvalues.push(mu1);
        } else {
            rejected.push(mu1);
        }
    }
    let diagnostic = if eigenvalues.is_empty() {
        "no refinement-stable eigenvalues in range".into()
    } else {
        String::new()
    };
    ZsSpectrum {
        eigenvalues,
        rejected,
        diagnostic,
    }
}

/// Closed-form spectrum for a vanishing potential:
/// `mu1 = 2 sin(kappa/2) scale (chi - j pi) / length`.
pub fn free_zs_eigenvalues(zs: &ZsProblem, mu1_max: f64) -> Vec<f64> {
    let c = zs.mu1_per_lambda() * zs.derivative_scale / zs.length();
    let jmax = ((zs.chi.abs() + mu1_max / c.abs()) / std::f64::consts::PI).ceil() as i64 + 1;
    let mut v: Vec<f64> = (-jmax..=jmax)
        .map(|j| c * (zs.chi - j as f64 * std::f64::consts::PI))
        .filter(|x| x.abs() <= mu1_max)
        .collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimitOptions {
    /// Slow extent of the lattice window.
    pub xi_extent: f64,
    pub xi_origin: f64,
    /// Compare eigenvalues with `|mu1|` up to this bound.
    pub mu1_max: f64,
    /// Target RK4 step of the limit problem.
    pub zs_step: f64,
    pub scan: usize,
    /// Multiplies `M1` in the derivative coefficient; `1 / M1` reproduces an unscaled derivative.
    pub derivative_factor: f64,
    /// Cauchy comparison ignores `|mu1|` below this.
    pub cauchy_floor: f64,
}

impl Default for LimitOptions {
    fn default() -> Self {
        Self {
            xi_extent: 20.0,
            xi_origin: 0.0,
            mu1_max: 3.0,
            zs_step: 0.02,
            scan: 400,
            derivative_factor: 1.0,
            cauchy_floor: 0.1,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitEntry {
    #[serde(rename = "N")]
    pub n: usize,
    pub lattice_sites: usize,
    pub lattice_mu1: Vec<f64>,
    pub zs_mu1: Vec<f64>,
    pub discrepancy: Option<f64>,
    pub note: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitReport {
    pub entries: Vec<LimitEntry>,
    pub non_increasing: bool,
    /// Largest relative change of rescaled band-edge deviations between the last two `N`.
    pub cauchy_change: Option<f64>,
}

/// Compares `N (E - 2 cos(kappa/2))` from the lattice problem with the spectrum
/// of the limit problem for a sequence of `N`.
pub fn spectral_limit_check(
    envelope: &Envelope,
    coeffs: &ReductionCoefficients,
    n_list: &[usize],
    options: &LimitOptions,
) -> Result<LimitReport> {
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("N values must be strictly ascending"));
    }
    let kappa = coeffs.kappa;
    let edge = 2.0 * (kappa / 2.0).cos();
    let p = coeffs.params.p();
    let entries: Vec<LimitEntry> = n_list
        .iter()
        .map(|&n| -> Result<LimitEntry> {
            let nf = n as f64;
            // Window n = 1..Nn with Nn + 1 a multiple of 4.
            let nn1 = (4.0 * (options.xi_extent * nf / (4.0 * coeffs.m1)).round()).max(8.0) as usize;
            let nn = nn1 - 1;
            let opts = AnsatzOptions {
                dynamics: EnvelopeDynamics::Frozen,
                xi_origin: options.xi_origin,
                ..Default::default()
            };
            let ans = assemble_ansatz(envelope, coeffs, n, (nn + 3, 1), &opts)?;
            let row = ans.assembled.row_re(0);
            let sp = SpectralProblem {
                n_start: 1,
                a: (1..=nn)
                    .map(|k| coefficient(p, &row, k, CoefficientForm::Difference, false))
                    .collect::<Result<_>>()?,
                boundary: Boundary::Dirichlet,
            };
            let mut lattice_mu1: Vec<f64> = eigenvalues(&sp)?
                .into_iter()
                .map(|z| nf * (z.re - edge))
                .filter(|v| v.abs() <= options.mu1_max + 1.0 && v.abs() <= 10.0)
                .collect();
            lattice_mu1.sort_by(|a, b| a.total_cmp(b));

            let length = coeffs.m1 * nn1 as f64 / nf;
            let k = 4 * ((length / (4.0 * options.zs_step)).ceil() as usize).max(2);
            let interp = envelope.interpolant();
            let zs = ZsProblem::from_fn(
                options.xi_origin,
                length,
                k,
                |x| interp.eval(x),
                kappa,
                p,
                coeffs.m1 * options.derivative_factor,
                kappa * nn1 as f64 / 2.0,
            )?;
            let spectrum = zs_eigenvalues(&zs, options.mu1_max, options.scan);
            let (discrepancy, note) = if spectrum.eigenvalues.is_empty() {
                (None, spectrum.diagnostic.clone())
            } else if lattice_mu1.is_empty() {
                (None, "no eigenvalue near the band reference point".to_string())
            } else {
                let d = spectrum
                    .eigenvalues
                    .iter()
                    .map(|z| lattice_mu1.iter().map(|l| (l - z).abs()).fold(f64::INFINITY, f64::min))
                    .fold(0.0, f64::max);
                (Some(d), String::new())
            };
            Ok(LimitEntry {
                n,
                lattice_sites: nn,
                lattice_mu1: lattice_mu1.into_iter().filter(|v| v.abs() <= options.mu1_max).collect(),
                zs_mu1: spectrum.eigenvalues,
                discrepancy,
                note,
            })
        })
        .collect::<Result<_>>()?;
    let non_increasing = entries
        .windows(2)
        .all(|w| match (w[0].discrepancy, w[1].discrepancy) {
            (Some(a), Some(b)) => b <= a,
            (None, None) => true,
            _ => false,
        });
    let cauchy_change = if entries.len() >= 2 {
        let (prev, last) = (&entries[entries.len() - 2], &entries[entries.len() - 1]);
        last.lattice_mu1
            .iter()
            .filter(|v| v.abs() >= options.cauchy_floor)
            .map(|v| {
                let near = prev.lattice_mu1.iter().copied().min_by(|a, b| (a - v).abs().total_cmp(&(b - v).abs()));
                near.map_or(f64::INFINITY, |b| (v - b).abs() / b.abs())
            })
            .reduce(f64::max)
    } else {
        None
    };
    Ok(LimitReport {
        entries,
        non_increasing,
        cauchy_change,
    })
}

/// Writes `index,re,im` rows.
pub fn spectrum_csv(values: &[Complex64]) -> String {
    let mut s = String::from("index,re,im\n");
    for (i, v) in values.iter().enumerate() {
        s.push_str(&format!("{i},{:?},{:?}\n", v.re, v.im));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn max_diff(a: &[Complex64], b: &[f64]) -> f64 {
        assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(x, y)| (x - Complex64::new(*y, 0.0)).norm()).fold(0.0, f64::max)
    }

    fn sorted(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }

    #[test]
    fn coefficient_examples() {
        let p = LpkdvParams::new(1.5, 0.5).unwrap();
        let zero = LatticeField::from_real_fn(20, 1, |_, _| 0.0);
        let sp = build_spectral_problem(&zero, &p, 0, Boundary::Dirichlet, CoefficientForm::Difference).unwrap();
        assert!(sp.a.iter().all(|&a| a == 1.0));
        let c = 0.2;
        let constant = LatticeField::from_real_fn(20, 1, |_, _| c);
        let sum = build_spectral_problem(&constant, &p, 0, Boundary::Dirichlet, CoefficientForm::Sum).unwrap();
        let expect = 4.0 * 1.5 * 1.5 / (3.0 - 2.0 * c).powi(2);
        assert!(sum.a.iter().all(|&a| (a - expect).abs() < 1e-14));
        let diff = build_spectral_problem(&constant, &p, 0, Boundary::Dirichlet, CoefficientForm::Difference).unwrap();
        assert!(diff.a.iter().all(|&a| a == 1.0));
    }

    #[test]
    fn coefficients_are_local() {
        let p = LpkdvParams::new(1.5, 0.5).unwrap();
        let k = 10;
        let bump = LatticeField::from_real_fn(24, 1, |n, _| if n == k { 0.3 } else { 0.0 });
        for form in [CoefficientForm::Difference, CoefficientForm::Sum] {
            let sp = build_spectral_problem(&bump, &p, 0, Boundary::Dirichlet, form).unwrap();
            for (i, a) in sp.a.iter().enumerate() {
                let n = i + sp.n_start;
                let touches = n + 2 == k || n + 1 == k || n == k || n == k + 1;
                assert_eq!(*a != 1.0, touches, "n = {n}");
            }
        }
    }

    #[test]
    fn singular_potential_is_reported() {
        let p = LpkdvParams::new(1.5, 0.5).unwrap();
        let f = LatticeField::from_real_fn(12, 1, |n, _| if n == 6 { 3.0 } else { 0.0 });
        let err = build_spectral_problem(&f, &p, 0, Boundary::Dirichlet, CoefficientForm::Difference).unwrap_err();
        assert!(matches!(err, Error::SingularPotential { n: 4, .. }), "{err}");
    }

    #[test]
    fn free_spectra_match_closed_forms() {
        for l in [8usize, 17, 64] {
            let per = eigenvalues(&SpectralProblem::new(vec![1.0; l], Boundary::Periodic)).unwrap();
            let exact = sorted((0..l).map(|j| 2.0 * (2.0 * PI * j as f64 / l as f64).cos()).collect());
            assert!(max_diff(&per, &exact) < 1e-10);
            let dir = eigenvalues(&SpectralProblem::new(vec![1.0; l], Boundary::Dirichlet)).unwrap();
            let exact = sorted((1..=l).map(|j| 2.0 * (PI * j as f64 / (l as f64 + 1.0)).cos()).collect());
            assert!(max_diff(&dir, &exact) < 1e-10);
        }
    }

    #[test]
    fn gauge_leaves_spectrum_unchanged() {
        let a: Vec<f64> = (0..40).map(|n| 1.0 + 0.3 * (0.4 * n as f64).sin()).collect();
        let sp = SpectralProblem::new(a, Boundary::Dirichlet);
        let sym = eigenvalues(&sp).unwrap();
        let dense = eigenvalues_with(&sp, Solver::Dense).unwrap();
        for (x, y) in sym.iter().zip(&dense) {
            assert!((x - y).norm() < 1e-10 * (1.0 + x.norm()));
        }
    }

    #[test]
    fn tridiagonal_ql_matches_dense_symmetric() {
        let d: Vec<f64> = (0..30).map(|i| (i as f64 * 0.7).cos()).collect();
        let e: Vec<f64> = (0..29).map(|i| 0.5 + (i as f64 * 1.3).sin()).collect();
        let ql = symmetric_tridiagonal_eigenvalues(&d, &e).unwrap();
        let mut m = DMatrix::<f64>::zeros(30, 30);
        for i in 0..30 {
            m[(i, i)] = d[i];
            if i < 29 {
                m[(i, i + 1)] = e[i];
                m[(i + 1, i)] = e[i];
            }
        }
        let reference = sorted(SymmetricEigen::new(m).eigenvalues.iter().copied().collect());
        for (a, b) in ql.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn non_positive_coefficients_use_the_general_solver() {
        let mut a = vec![1.0; 12];
        a[5] = -0.5;
        for boundary in [Boundary::Dirichlet, Boundary::Periodic] {
            let sp = SpectralProblem::new(a.clone(), boundary);
            let ev = eigenvalues(&sp).unwrap();
            if boundary == Boundary::Dirichlet {
                assert!(ev.iter().any(|z| z.im.abs() > 1e-6));
            }
            // power sums against traces of matrix powers
            let m = sp.dense_matrix();
            let mut mk = m.clone();
            for k in 1..=4 {
                let sum: Complex64 = ev.iter().map(|z| z.powu(k)).sum();
                assert!((sum - Complex64::new(mk.trace(), 0.0)).norm() < 1e-10, "k = {k}");
                mk = &mk * &m;
            }
        }
    }

    #[test]
    fn hessenberg_qr_on_random_matrices() {
        let n = 25;
        let m = DMatrix::<f64>::from_fn(n, n, |i, j| ((i * 7 + j * 13) as f64 * 0.37).sin() + if i == j { 0.1 * i as f64 } else { 0.0 });
        let ev = hessenberg_eigenvalues(Hessenberg::new(m.clone()).h()).unwrap();
        let mut mk = m.clone();
        for k in 1..=3 {
            let sum: Complex64 = ev.iter().map(|z| z.powu(k)).sum();
            assert!((sum.re - mk.trace()).abs() < 1e-9 * (1.0 + mk.trace().abs()));
            assert!(sum.im.abs() < 1e-9);
            mk = &mk * &m;
        }
    }

    fn bump_solution(margin: usize) -> (LatticeField, LpkdvParams) {
        let p = LpkdvParams::new(1.5, 0.5).unwrap();
        (super::bump_solution(&p, margin, 11, 0.3, 3.0).unwrap(), p)
    }

    #[test]
    fn drift_shrinks_with_margin() {
        let ms: Vec<usize> = (0..11).collect();
        let (f40, p) = bump_solution(40);
        let (f80, _) = bump_solution(80);
        let d40 = isospectral_drift(&f40, &p, &ms, &DriftOptions::default()).unwrap();
        let d80 = isospectral_drift(&f80, &p, &ms, &DriftOptions::default()).unwrap();
        assert!(!d40.bound_states[0].is_empty());
        assert!((d40.bound_states[0].last().unwrap() - 2.0156).abs() < 1e-3);
        assert!(d80.drift * 2.0 <= d40.drift, "{} {}", d40.drift, d80.drift);
        let sum_form = DriftOptions {
            form: CoefficientForm::Sum,
            ..Default::default()
        };
        let s80 = isospectral_drift(&f80, &p, &ms, &sum_form).unwrap();
        assert!(s80.drift > 100.0 * d80.drift);
    }

    #[test]
    fn trivial_field_has_no_drift() {
        let p = LpkdvParams::new(1.5, 0.5).unwrap();
        let zero = LatticeField::from_real_fn(30, 4, |_, _| 0.0);
        let rep = isospectral_drift(&zero, &p, &[0, 1, 2, 3], &DriftOptions::default()).unwrap();
        assert_eq!(rep.drift, 0.0);
        assert_eq!(rep.note, "no discrete spectrum");
    }

    #[test]
    fn third_harmonic_examples() {
        let k = PI / 2.0;
        let one = Complex64::new(1.0, 0.0);
        assert_eq!(third_harmonic(one, Complex64::new(0.0, 0.0), k).unwrap(), Complex64::new(0.0, 0.0));
        // (-1 + i) / (1 - i) = -1
        assert!((third_harmonic(one, one, k).unwrap() + one).norm() < 1e-14);
        let a = third_harmonic(Complex64::new(0.3, 0.1), Complex64::new(0.2, -0.4), 1.1).unwrap();
        let b = third_harmonic(Complex64::new(0.3, 0.1), Complex64::new(0.4, -0.8), 1.1).unwrap();
        assert!((b - 2.0 * a).norm() < 1e-14);
        assert!(third_harmonic(one, one, 0.0).is_err());
    }

    fn gaussian_zs(amp: f64, chi: f64) -> ZsProblem {
        ZsProblem::from_fn(
            0.0,
            20.0,
            1000,
            |x| Complex64::new(amp * (-((x - 10.0) / 2.0).powi(2)).exp(), 0.0),
            PI / 2.0,
            1.5,
            5f64.sqrt(),
            chi,
        )
        .unwrap()
    }

    #[test]
    fn zero_potential_gives_box_modes() {
        let zs = gaussian_zs(0.0, 0.7);
        let got = zs_eigenvalues(&zs, 3.0, 400).eigenvalues;
        let exact = free_zs_eigenvalues(&zs, 3.0);
        assert_eq!(got.len(), exact.len());
        let err = got.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        // RK4 at step 0.04 leaves a truncation error of a few 1e-8.
        assert!(err < 1e-6, "{err:e}");
    }

    #[test]
    fn zs_symmetries() {
        let chi = 0.3;
        let base = zs_eigenvalues(&gaussian_zs(1.5, chi), 3.0, 400).eigenvalues;
        assert!(!base.is_empty());
        let close = |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-8);
        // conj(A), -chi gives the mirrored spectrum
        let mirrored = zs_eigenvalues(&gaussian_zs(1.5, -chi), 3.0, 400).eigenvalues;
        let flipped: Vec<f64> = sorted(base.iter().map(|v| -v).collect());
        assert!(close(&sorted(mirrored), &flipped));
        // joint translation of window and potential
        let shifted = ZsProblem::from_fn(
            7.0,
            20.0,
            1000,
            |x| Complex64::new(1.5 * (-((x - 17.0) / 2.0).powi(2)).exp(), 0.0),
            PI / 2.0,
            1.5,
            5f64.sqrt(),
            chi,
        )
        .unwrap();
        let moved = zs_eigenvalues(&shifted, 3.0, 400).eigenvalues;
        assert!(moved.len() == base.len() && moved.iter().zip(&base).all(|(x, y)| (x - y).abs() < 1e-8));
    }
}
