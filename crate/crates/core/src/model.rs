//! The lattice potential KdV quad equation
//! `mu (u11 - u00) + zeta (u10 - u01) - (u10 - u01)(u11 - u00) = 0`
//! on rectangular windows.

use std::f64::consts::PI;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lattice parameters `p`, `q` and the combinations `mu = p - q`, `zeta = p + q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpkdvParams {
    p: f64,
    q: f64,
}

impl LpkdvParams {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !p.is_finite() || !q.is_finite() {
            return Err(Error::domain(format!("lattice parameters must be finite, got p={p}, q={q}")));
        }
        if p == q {
            return Err(Error::domain(format!("p must differ from q (mu = p - q = 0), got p = q = {p}")));
        }
        if p == -q {
            return Err(Error::domain(format!(
                "p must differ from -q (zeta = p + q = 0), got p={p}, q={q}"
            )));
        }
        Ok(Self { p, q })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn mu(&self) -> f64 {
        self.p - self.q
    }

    pub fn zeta(&self) -> f64 {
        self.p + self.q
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Real,
    Complex,
}

/// Dense field `u[n, m]` on `0 <= n < nn`, `0 <= m < nm`, stored row by row in `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeField {
    nn: usize,
    nm: usize,
    kind: FieldKind,
    values: Vec<Complex64>,
}

impl LatticeField {
    pub fn zeros(nn: usize, nm: usize, kind: FieldKind) -> Self {
        Self {
            nn,
            nm,
            kind,
            values: vec![Complex64::new(0.0, 0.0); nn * nm],
        }
    }

    pub fn from_real_fn(nn: usize, nm: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(nn * nm);
        for m in 0..nm {
            for n in 0..nn {
                values.push(Complex64::new(f(n, m), 0.0));
            }
        }
        Self {
            nn,
            nm,
            kind: FieldKind::Real,
            values,
        }
    }

    pub fn from_complex_fn(nn: usize, nm: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(nn * nm);
        for m in 0..nm {
            for n in 0..nn {
                values.push(f(n, m));
            }
        }
        Self {
            nn,
            nm,
            kind: FieldKind::Complex,
            values,
        }
    }

    /// Builds a field from row-major (`m` outer) values; a real kind requires zero imaginary parts.
    pub fn from_values(nn: usize, nm: usize, kind: FieldKind, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != nn * nm {
            return Err(Error::domain(format!(
                "expected {} values for a {nn} x {nm} window, got {}",
                nn * nm,
                values.len()
            )));
        }
        if kind == FieldKind::Real && values.iter().any(|v| v.im != 0.0) {
            return Err(Error::domain("real field with nonzero imaginary part"));
        }
        Ok(Self { nn, nm, kind, values })
    }

    pub fn nn(&self) -> usize {
        self.nn
    }

    pub fn nm(&self) -> usize {
        self.nm
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, n: usize, m: usize) -> Complex64 {
        self.values[m * self.nn + n]
    }

    /// Bounds-checked access with signed indices.
    pub fn at(&self, n: i64, m: i64) -> Result<Complex64> {
        if n < 0 || m < 0 || n as usize >= self.nn || m as usize >= self.nm {
            return Err(Error::Index {
                n,
                m,
                nn: self.nn,
                nm: self.nm,
            });
        }
        Ok(self.get(n as usize, m as usize))
    }

    /// Sets a value; on a real field the imaginary part is dropped.
    #[inline]
    pub fn set(&mut self, n: usize, m: usize, v: Complex64) {
        let v = match self.kind {
            FieldKind::Real => Complex64::new(v.re, 0.0),
            FieldKind::Complex => v,
        };
        self.values[m * self.nn + n] = v;
    }

    pub fn row(&self, m: usize) -> &[Complex64] {
        &self.values[m * self.nn..(m + 1) * self.nn]
    }

    pub fn row_mut(&mut self, m: usize) -> &mut [Complex64] {
        &mut self.values[m * self.nn..(m + 1) * self.nn]
    }

    pub fn row_re(&self, m: usize) -> Vec<f64> {
        self.row(m).iter().map(|v| v.re).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    /// Pointwise `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        assert_eq!((self.nn, self.nm), (other.nn, other.nm), "window mismatch");
        let kind = if self.kind == FieldKind::Real && other.kind == FieldKind::Real {
            FieldKind::Real
        } else {
            FieldKind::Complex
        };
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b * s)
            .collect();
        Self {
            nn: self.nn,
            nm: self.nm,
            kind,
            values,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,m,re,im")?;
        for m in 0..self.nm {
            for n in 0..self.nn {
                let v = self.get(n, m);
                writeln!(w, "{n},{m},{:?},{:?}", v.re, v.im)?;
            }
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let reader = BufReader::new(r);
        let mut entries = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if lineno == 0 || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 4 {
                return Err(Error::Config(format!("line {}: expected 4 columns", lineno + 1)));
            }
            let bad = |what: &str| Error::Config(format!("line {}: bad {what}", lineno + 1));
            let n: usize = cols[0].parse().map_err(|_| bad("n"))?;
            let m: usize = cols[1].parse().map_err(|_| bad("m"))?;
            let re: f64 = cols[2].parse().map_err(|_| bad("re"))?;
            let im: f64 = cols[3].parse().map_err(|_| bad("im"))?;
            entries.push((n, m, Complex64::new(re, im)));
        }
        let nn = entries.iter().map(|e| e.0 + 1).max().unwrap_or(0);
        let nm = entries.iter().map(|e| e.1 + 1).max().unwrap_or(0);
        if entries.len() != nn * nm {
            return Err(Error::Config(format!(
                "CSV holds {} entries, window {nn} x {nm} needs {}",
                entries.len(),
                nn * nm
            )));
        }
        let mut values = vec![Complex64::new(0.0, 0.0); nn * nm];
        for (n, m, v) in entries {
            values[m * nn + n] = v;
        }
        let kind = if values.iter().all(|v| v.im == 0.0) {
            FieldKind::Real
        } else {
            FieldKind::Complex
        };
        Self::from_values(nn, nm, kind, values)
    }

    /// One JSON header line followed by little-endian `f64` pairs `(re, im)`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let header = BinaryHeader {
            nn: self.nn,
            nm: self.nm,
            kind: self.kind,
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for v in &self.values {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(r: R) -> Result<Self> {
        let mut reader = BufReader::new(r);
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let header: BinaryHeader = serde_json::from_str(line.trim_end())?;
        let mut values = Vec::with_capacity(header.nn * header.nm);
        let mut buf = [0u8; 8];
        for _ in 0..header.nn * header.nm {
            reader.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf);
            reader.read_exact(&mut buf)?;
            let im = f64::from_le_bytes(buf);
            values.push(Complex64::new(re, im));
        }
        Self::from_values(header.nn, header.nm, header.kind, values)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn save_binary(&self, path: &Path) -> Result<()> {
        self.write_binary(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

#[derive(Serialize, Deserialize)]
struct BinaryHeader {
    nn: usize,
    nm: usize,
    kind: FieldKind,
}

/// Plane-wave carrier `exp(i(kappa n - omega m))` with `omega` from the dispersion relation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CarrierWave {
    kappa: f64,
    omega: f64,
}

impl CarrierWave {
    pub fn new(params: &LpkdvParams, kappa: f64) -> Result<Self> {
        Ok(Self {
            kappa,
            omega: dispersion(params, kappa)?,
        })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Phase `kappa n - omega m` at real lattice coordinates.
    pub fn phase(&self, n: f64, m: f64) -> f64 {
        self.kappa * n - self.omega * m
    }
}

#[inline]
fn residual_of(params: &LpkdvParams, u00: Complex64, u10: Complex64, u01: Complex64, u11: Complex64) -> Complex64 {
    let w = u10 - u01;
    let d = u11 - u00;
    d * params.mu() + w * params.zeta() - w * d
}

/// Left-hand side of the quad equation on the plaquette with lower-left corner `(n, m)`.
pub fn quad_residual(field: &LatticeField, params: &LpkdvParams, n: i64, m: i64) -> Result<Complex64> {
    let u00 = field.at(n, m)?;
    let u10 = field.at(n + 1, m)?;
    let u01 = field.at(n, m + 1)?;
    let u11 = field.at(n + 1, m + 1)?;
    Ok(residual_of(params, u00, u10, u01, u11))
}

/// Largest plaquette residual, skipping `margin` plaquettes at every edge.
pub fn max_residual(field: &LatticeField, params: &LpkdvParams, margin: usize) -> f64 {
    let (nn, nm) = (field.nn(), field.nm());
    if nn < 2 * margin + 2 || nm < 2 * margin + 2 {
        return 0.0;
    }
    (margin..nm - 1 - margin)
        .into_par_iter()
        .map(|m| {
            (margin..nn - 1 - margin)
                .map(|n| {
                    residual_of(
                        params,
                        field.get(n, m),
                        field.get(n + 1, m),
                        field.get(n, m + 1),
                        field.get(n + 1, m + 1),
                    )
                    .norm()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

fn singular_threshold(params: &LpkdvParams) -> f64 {
    1e-12 * (1.0 + params.mu().abs())
}

fn corner_solve_at(
    params: &LpkdvParams,
    u00: Complex64,
    u10: Complex64,
    u01: Complex64,
    n: usize,
    m: usize,
) -> Result<Complex64> {
    let w = u10 - u01;
    let den = w - params.mu();
    if den.norm() < singular_threshold(params) {
        return Err(Error::SingularCorner {
            n,
            m,
            denominator: den.norm(),
        });
    }
    Ok(u00 + w * params.zeta() / den)
}

/// `u11 = u00 + zeta w / (w - mu)` with `w = u10 - u01`.
pub fn corner_solve(params: &LpkdvParams, u00: Complex64, u10: Complex64, u01: Complex64) -> Result<Complex64> {
    corner_solve_at(params, u00, u10, u01, 0, 0)
}

/// Solves the quad equation for `u00` given the other three corners.
pub fn solve_for_u00(params: &LpkdvParams, u10: Complex64, u01: Complex64, u11: Complex64) -> Result<Complex64> {
    let w = u10 - u01;
    let den = w - params.mu();
    if den.norm() < singular_threshold(params) {
        return Err(Error::SingularCorner {
            n: 0,
            m: 0,
            denominator: den.norm(),
        });
    }
    Ok(u11 - w * params.zeta() / den)
}

fn solve_for_u01_at(
    params: &LpkdvParams,
    u00: Complex64,
    u10: Complex64,
    u11: Complex64,
    n: usize,
    m: usize,
) -> Result<Complex64> {
    let d = u11 - u00;
    let den = params.zeta() - d;
    if den.norm() < 1e-12 * (1.0 + params.zeta().abs()) {
        return Err(Error::SingularCorner {
            n,
            m,
            denominator: den.norm(),
        });
    }
    Ok(u10 + d * params.mu() / den)
}

/// Solves the quad equation for `u01` given `u00`, `u10`, `u11`.
pub fn solve_for_u01(params: &LpkdvParams, u00: Complex64, u10: Complex64, u11: Complex64) -> Result<Complex64> {
    solve_for_u01_at(params, u00, u10, u11, 0, 0)
}

/// Which column carries the second half of the initial data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnSide {
    /// Column `n = 0`; sweeps increase `n`. Perturbations grow by `|zeta / mu|` per site.
    Left,
    /// Column `n = nn - 1`; sweeps decrease `n`. Perturbations grow by `|mu / zeta|` per site.
    Right,
    /// Whichever side is linearly stable for the given parameters.
    Auto,
}

impl ColumnSide {
    pub fn resolve(self, params: &LpkdvParams) -> ColumnSide {
        match self {
            ColumnSide::Auto if params.zeta().abs() > params.mu().abs() => ColumnSide::Right,
            ColumnSide::Auto => ColumnSide::Left,
            side => side,
        }
    }
}

/// Initial data: the full row `m = 0` and one full column.
#[derive(Clone, Debug)]
pub struct IvpBoundary {
    pub row: Vec<Complex64>,
    pub column: Vec<Complex64>,
    pub side: ColumnSide,
}

impl IvpBoundary {
    pub fn real(row: &[f64], column: &[f64], side: ColumnSide) -> Self {
        Self {
            row: row.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            column: column.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            side,
        }
    }
}

/// Fills the window plaquette by plaquette from row and column data.
pub fn evolve_ivp(boundary: &IvpBoundary, params: &LpkdvParams) -> Result<LatticeField> {
    let nn = boundary.row.len();
    let nm = boundary.column.len();
    if nn < 2 || nm < 1 {
        return Err(Error::domain(format!("initial data window {nn} x {nm} too small")));
    }
    let side = boundary.side.resolve(params);
    let corner = if side == ColumnSide::Right { nn - 1 } else { 0 };
    let mismatch = (boundary.row[corner] - boundary.column[0]).norm();
    if mismatch > 1e-14 * (1.0 + boundary.row[corner].norm()) {
        return Err(Error::precondition(format!(
            "row and column disagree at the shared corner n={corner} (difference {mismatch:e})"
        )));
    }
    let kind = if boundary.row.iter().chain(&boundary.column).all(|v| v.im == 0.0) {
        FieldKind::Real
    } else {
        FieldKind::Complex
    };
    let mut field = LatticeField::zeros(nn, nm, kind);
    field.row_mut(0).copy_from_slice(&boundary.row);
    for m in 0..nm {
        field.set(corner, m, boundary.column[m]);
    }
    for m in 0..nm - 1 {
        match side {
            ColumnSide::Right => {
                for n in (0..nn - 1).rev() {
                    let v = solve_for_u01_at(
                        params,
                        field.get(n, m),
                        field.get(n + 1, m),
                        field.get(n + 1, m + 1),
                        n,
                        m + 1,
                    )?;
                    if !v.re.is_finite() || !v.im.is_finite() {
                        return Err(Error::NonFinite { n, m: m + 1 });
                    }
                    field.set(n, m + 1, v);
                }
            }
            _ => {
                for n in 0..nn - 1 {
                    let v = corner_solve_at(
                        params,
                        field.get(n, m),
                        field.get(n + 1, m),
                        field.get(n, m + 1),
                        n + 1,
                        m + 1,
                    )?;
                    if !v.re.is_finite() || !v.im.is_finite() {
                        return Err(Error::NonFinite { n: n + 1, m: m + 1 });
                    }
                    field.set(n + 1, m + 1, v);
                }
            }
        }
    }
    Ok(field)
}

/// Extracts the initial data of `field` for the given side.
pub fn boundary_of(field: &LatticeField, side: ColumnSide) -> IvpBoundary {
    let col = match side {
        ColumnSide::Right => field.nn() - 1,
        _ => 0,
    };
    IvpBoundary {
        row: field.row(0).to_vec(),
        column: (0..field.nm()).map(|m| field.get(col, m)).collect(),
        side,
    }
}

/// `omega(kappa) = -2 arctan((p / q) tan(kappa / 2))`.
pub fn dispersion(params: &LpkdvParams, kappa: f64) -> Result<f64> {
    if !(kappa > 0.0 && kappa < PI) {
        return Err(Error::domain(format!("kappa = {kappa} must lie in (0, pi)")));
    }
    if (PI - kappa) < 1e-8 {
        return Err(Error::domain(format!(
            "kappa = {kappa} too close to pi: tan(kappa/2) blows up"
        )));
    }
    let ratio = (params.zeta() + params.mu()) / (params.zeta() - params.mu());
    Ok(-2.0 * (ratio * (kappa / 2.0).tan()).atan())
}

/// Linear part `mu (T_n T_m - 1) u + zeta (T_n - T_m) u` on the plane wave at `(n, m)`.
pub fn plane_wave_linear_residual(params: &LpkdvParams, carrier: &CarrierWave, n: f64, m: f64) -> Complex64 {
    let e = |nn: f64, mm: f64| Complex64::from_polar(1.0, carrier.phase(nn, mm));
    (e(n + 1.0, m + 1.0) - e(n, m)) * params.mu() + (e(n + 1.0, m) - e(n, m + 1.0)) * params.zeta()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn params() -> LpkdvParams {
        LpkdvParams::new(1.5, 0.5).unwrap()
    }

    fn plaquette(u00: f64, u10: f64, u01: f64, u11: f64) -> LatticeField {
        LatticeField::from_real_fn(2, 2, |n, m| match (n, m) {
            (0, 0) => u00,
            (1, 0) => u10,
            (0, 1) => u01,
            _ => u11,
        })
    }

    #[test]
    fn params_validation() {
        assert!(LpkdvParams::new(1.0, 1.0).is_err());
        assert!(LpkdvParams::new(1.0, -1.0).is_err());
        let p = params();
        assert_eq!(p.mu(), 1.0);
        assert_eq!(p.zeta(), 2.0);
    }

    #[test]
    fn residual_examples() {
        let p = params();
        let constant = LatticeField::from_real_fn(3, 3, |_, _| 0.7);
        assert_eq!(quad_residual(&constant, &p, 0, 0).unwrap().norm(), 0.0);
        assert_eq!(quad_residual(&plaquette(0.0, 3.0, 1.0, 4.0), &p, 0, 0).unwrap(), c(0.0));
        assert_eq!(quad_residual(&plaquette(0.0, 3.0, 1.0, 0.0), &p, 0, 0).unwrap(), c(4.0));
        assert!(matches!(
            quad_residual(&constant, &p, 2, 0),
            Err(Error::Index { n: 3, .. })
        ));
    }

    #[test]
    fn corner_examples() {
        let p = params();
        assert_eq!(corner_solve(&p, c(0.0), c(3.0), c(1.0)).unwrap(), c(4.0));
        assert_eq!(corner_solve(&p, c(2.5), c(1.0), c(1.0)).unwrap(), c(2.5));
        assert_eq!(corner_solve(&p, c(5.0), c(3.0), c(1.0)).unwrap(), c(9.0));
        // w = mu
        assert!(matches!(
            corner_solve(&p, c(0.0), c(2.0), c(1.0)),
            Err(Error::SingularCorner { .. })
        ));
    }

    #[test]
    fn ivp_examples() {
        let p = params();
        for side in [ColumnSide::Left, ColumnSide::Right] {
            let zero = evolve_ivp(&IvpBoundary::real(&[0.0; 8], &[0.0; 5], side), &p).unwrap();
            assert_eq!(zero.max_abs(), 0.0);
        }
        let row: Vec<f64> = (0..30).map(|n| 0.05 * (0.3 * n as f64).sin()).collect();
        let mut col: Vec<f64> = (0..12).map(|m| 0.04 * (0.5 * m as f64).cos()).collect();
        col[0] = row[29];
        let f = evolve_ivp(&IvpBoundary::real(&row, &col, ColumnSide::Right), &p).unwrap();
        assert!(f.is_real());
        assert!(max_residual(&f, &p, 0) <= 1e-10 * (1.0 + f.max_abs()));
        let again = evolve_ivp(&boundary_of(&f, ColumnSide::Right), &p).unwrap();
        assert_eq!(again, f);
    }

    #[test]
    fn linear_wave_residual_is_quadratic_in_amplitude() {
        let p = params();
        let cw = CarrierWave::new(&p, PI / 2.0).unwrap();
        let wave = |a: f64| {
            LatticeField::from_complex_fn(16, 16, |n, m| Complex64::from_polar(a, cw.phase(n as f64, m as f64)))
        };
        let small = max_residual(&wave(1e-8), &p, 0);
        let big = max_residual(&wave(1e-4), &p, 0);
        assert!(small <= 1e-15);
        let ratio = big / small.max(f64::MIN_POSITIVE);
        assert!(big < 1e-7 && (ratio > 1e7 || small == 0.0));
    }

    #[test]
    fn stable_ivp_tracks_small_linear_wave() {
        let p = params();
        let cw = CarrierWave::new(&p, PI / 2.0).unwrap();
        let a = 1e-8;
        let nn = 24;
        let wave = |n: usize, m: usize| Complex64::from_polar(a, cw.phase(n as f64, m as f64));
        let f = evolve_ivp(
            &IvpBoundary {
                row: (0..nn).map(|n| wave(n, 0)).collect(),
                column: (0..16).map(|m| wave(nn - 1, m)).collect(),
                side: ColumnSide::Right,
            },
            &p,
        )
        .unwrap();
        assert_eq!(f.kind(), FieldKind::Complex);
        let mut worst: f64 = 0.0;
        for m in 0..16 {
            for n in 0..nn {
                worst = worst.max((f.get(n, m) - wave(n, m)).norm());
            }
        }
        assert!(worst < 1e3 * a * a, "deviation {worst:e}");
    }

    #[test]
    fn left_ivp_amplifies_when_zeta_exceeds_mu() {
        let p = params();
        assert_eq!(ColumnSide::Auto.resolve(&p), ColumnSide::Right);
        let row: Vec<f64> = (0..30).map(|n| 0.01 * ((n * 7 % 11) as f64 / 11.0 - 0.5)).collect();
        let mut col: Vec<f64> = (0..30).map(|m| 0.01 * ((m * 5 % 13) as f64 / 13.0 - 0.5)).collect();
        col[0] = row[0];
        let left = evolve_ivp(&IvpBoundary::real(&row, &col, ColumnSide::Left), &p);
        col[0] = row[29];
        let right = evolve_ivp(&IvpBoundary::real(&row, &col, ColumnSide::Right), &p).unwrap();
        assert!(right.max_abs() < 0.1);
        if let Ok(f) = left {
            assert!(f.max_abs() > 10.0 * right.max_abs());
        }
    }

    #[test]
    fn dispersion_examples() {
        let p = LpkdvParams::new(2.0, 1.0).unwrap();
        assert!((dispersion(&p, PI / 2.0).unwrap() + 2.0 * 2f64.atan()).abs() < 1e-12);
        assert!(dispersion(&p, 1e-9).unwrap().abs() < 1e-8);
        assert!(dispersion(&p, PI - 1e-10).is_err());
        assert!(dispersion(&p, 0.0).is_err());
    }

    #[test]
    fn io_round_trips() {
        let f = LatticeField::from_complex_fn(5, 3, |n, m| Complex64::new(0.1 * n as f64 + 1e-17, (m as f64).sqrt()));
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        assert_eq!(LatticeField::read_csv(buf.as_slice()).unwrap(), f);
        let mut bin = Vec::new();
        f.write_binary(&mut bin).unwrap();
        assert_eq!(LatticeField::read_binary(bin.as_slice()).unwrap(), f);
    }

    proptest! {
        #[test]
        fn corner_translation_covariance(
            a in -1.0f64..1.0, b in -1.0f64..1.0, d in -1.0f64..1.0,
            cr in -5.0f64..5.0, ci in -5.0f64..5.0,
        ) {
            let p = params();
            let shift = Complex64::new(cr, ci);
            let base = corner_solve(&p, c(a), c(b), c(d));
            prop_assume!((b - d - p.mu()).abs() > 0.1);
            let moved = corner_solve(&p, c(a) + shift, c(b) + shift, c(d) + shift).unwrap();
            prop_assert!((moved - base.unwrap() - shift).norm() < 1e-11 * (1.0 + shift.norm()));
        }

        #[test]
        fn corner_round_trip(a in -1.0f64..1.0, b in -0.4f64..0.4, d in -0.4f64..0.4) {
            let p = params();
            let u11 = corner_solve(&p, c(a), c(b), c(d)).unwrap();
            let u00 = solve_for_u00(&p, c(b), c(d), u11).unwrap();
            let again = corner_solve(&p, u00, c(b), c(d)).unwrap();
            prop_assert!((again - u11).norm() <= 1e-12 * (1.0 + u11.norm()));
            let u01 = solve_for_u01(&p, c(a), c(b), u11).unwrap();
            prop_assert!((u01 - c(d)).norm() <= 1e-12 * (1.0 + u11.norm()));
        }

        #[test]
        fn plane_wave_linear_part_vanishes(p in 0.2f64..3.0, q in 0.2f64..3.0, kappa in 0.05f64..3.0) {
            prop_assume!((p - q).abs() > 1e-3);
            let prm = LpkdvParams::new(p, q).unwrap();
            let cw = CarrierWave::new(&prm, kappa).unwrap();
            for (n, m) in [(0.0, 0.0), (3.0, -2.0), (17.0, 11.0)] {
                prop_assert!(plane_wave_linear_residual(&prm, &cw, n, m).norm() <= 1e-12 * (1.0 + p.abs() + q.abs()));
            }
        }
    }
}
