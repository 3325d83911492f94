//! Experiment configuration read from a single JSON document.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dispersion, ColumnSide, LpkdvParams};
use crate::nls::{Envelope, EPS_SWEEP};
use crate::reduction::{Branch, ReductionSettings};
use crate::spectral::{Boundary, CoefficientForm};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EnvelopeSpec {
    Gaussian { amplitude: f64, width: f64, center: f64 },
    Sech { amplitude: f64, width: f64, center: f64 },
    Plane { amplitude: f64, k: f64 },
    /// CSV with columns `xi,re,im` on a uniform periodic grid.
    File { path: String },
}

impl EnvelopeSpec {
    pub fn build(&self, grid: &NlsConfig) -> Result<Envelope> {
        let length = grid.l as f64 * grid.dxi;
        match self {
            EnvelopeSpec::Gaussian { amplitude, width, center } => {
                Envelope::gaussian(grid.xi0, length, grid.l, *amplitude, *center, *width)
            }
            EnvelopeSpec::Sech { amplitude, width, center } => {
                Envelope::sech(grid.xi0, length, grid.l, *amplitude, *center, *width)
            }
            EnvelopeSpec::Plane { amplitude, k } => {
                Envelope::plane(grid.xi0, length, grid.l, num_complex::Complex64::new(*amplitude, 0.0), *k)
            }
            EnvelopeSpec::File { path } => Envelope::read_csv(std::fs::File::open(path)?),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            EnvelopeSpec::Gaussian { width, .. } | EnvelopeSpec::Sech { width, .. } if !(*width > 0.0) => {
                Err(Error::Config(format!("envelope width must be positive, got {width}")))
            }
            EnvelopeSpec::File { path } if !Path::new(path).is_file() => {
                Err(Error::Config(format!("envelope file '{path}' not found")))
            }
            _ => Ok(()),
        }
    }
}

/// Slow grid and time stepping of the envelope equation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NlsConfig {
    #[serde(rename = "L")]
    pub l: usize,
    pub dxi: f64,
    pub xi0: f64,
    pub dtau: f64,
    pub tau_final: f64,
}

impl Default for NlsConfig {
    fn default() -> Self {
        Self {
            l: 512,
            dxi: 80.0 / 512.0,
            xi0: -20.0,
            dtau: 1e-3,
            tau_final: 1.0,
        }
    }
}

/// Initial data for lattice runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IvpConfig {
    pub amplitude: f64,
    pub side: ColumnSide,
}

impl Default for IvpConfig {
    fn default() -> Self {
        Self {
            amplitude: 0.1,
            side: ColumnSide::Auto,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub window: (usize, usize),
    pub amplitude: f64,
    pub lambda: Vec<f64>,
    /// Slow extent of the projection window.
    pub xi_extent: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            window: (60, 20),
            amplitude: 0.1,
            lambda: vec![0.1, 0.2, 0.4],
            xi_extent: 20.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    pub boundary: Boundary,
    pub form: CoefficientForm,
    /// Quiet columns on each side of the bump in the isospectrality run.
    pub margins: Vec<usize>,
    pub rows: usize,
    pub bump_amplitude: f64,
    pub bump_width: f64,
    pub xi_extent: f64,
    pub mu1_max: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            boundary: Boundary::Dirichlet,
            form: CoefficientForm::Difference,
            margins: vec![40, 80],
            rows: 11,
            bump_amplitude: 0.3,
            bump_width: 3.0,
            xi_extent: 20.0,
            mu1_max: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommutatorConfig {
    pub eps: Vec<f64>,
}

impl Default for CommutatorConfig {
    fn default() -> Self {
        Self { eps: EPS_SWEEP.to_vec() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub p: f64,
    pub q: f64,
    pub kappa: f64,
    pub r: f64,
    #[serde(rename = "M2_tilde")]
    pub m2_tilde: f64,
    pub branch: Branch,
    pub tau4_interpretation: bool,
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    pub window: (usize, usize),
    /// `None` lets each subcommand use its own default shape.
    pub envelope: Option<EnvelopeSpec>,
    pub nls: NlsConfig,
    pub ivp: IvpConfig,
    pub flows: FlowConfig,
    pub spectral: SpectralConfig,
    pub commutator: CommutatorConfig,
    pub tolerances: BTreeMap<String, f64>,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            p: 1.5,
            q: 0.5,
            kappa: PI / 2.0,
            r: 1.0,
            m2_tilde: 1.0,
            branch: Branch::Auto,
            tau4_interpretation: false,
            n_list: vec![16, 32, 64],
            window: (256, 256),
            envelope: None,
            nls: NlsConfig::default(),
            ivp: IvpConfig::default(),
            flows: FlowConfig::default(),
            spectral: SpectralConfig::default(),
            commutator: CommutatorConfig::default(),
            tolerances: BTreeMap::new(),
            seed: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config '{}': {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn params(&self) -> Result<LpkdvParams> {
        LpkdvParams::new(self.p, self.q)
    }

    pub fn settings(&self) -> ReductionSettings {
        ReductionSettings {
            r: self.r,
            m2_tilde: self.m2_tilde,
            branch: self.branch,
            tau4_interpretation: self.tau4_interpretation,
        }
    }

    /// Named tolerance, or `default` when the config does not override it.
    pub fn tol(&self, key: &str, default: f64) -> f64 {
        self.tolerances.get(key).copied().unwrap_or(default)
    }

    pub fn envelope_or(&self, default: EnvelopeSpec) -> Result<Envelope> {
        self.envelope.clone().unwrap_or(default).build(&self.nls)
    }

    /// Checks every module precondition that can be decided from the config alone.
    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        let params = self.params().map_err(cfg)?;
        dispersion(&params, self.kappa).map_err(cfg)?;
        if !(self.r > 0.0) {
            return Err(Error::Config(format!("r must be positive, got {}", self.r)));
        }
        if self.m2_tilde == 0.0 {
            return Err(Error::Config("M2_tilde must be nonzero".into()));
        }
        if self.n_list.is_empty() || self.n_list.windows(2).any(|w| w[0] >= w[1]) || self.n_list[0] == 0 {
            return Err(Error::Config("N_list must be positive and strictly ascending".into()));
        }
        if self.window.0 < 8 || self.window.1 < 2 {
            return Err(Error::Config(format!("window {:?} too small (need at least 8 x 2)", self.window)));
        }
        if self.nls.l < 16 || !(self.nls.dxi > 0.0) || !(self.nls.dtau > 0.0) || self.nls.tau_final < 0.0 {
            return Err(Error::Config("nls grid needs L >= 16, dxi > 0, dtau > 0, tau_final >= 0".into()));
        }
        if let Some(env) = &self.envelope {
            env.validate()?;
        }
        if self.flows.lambda.len() < 3 || self.flows.lambda.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("flows.lambda needs at least three ascending values".into()));
        }
        if self.spectral.margins.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("spectral.margins must be ascending".into()));
        }
        if self.commutator.eps.len() < 2 {
            return Err(Error::Config("commutator.eps needs at least two values".into()));
        }
        Ok(())
    }
}
