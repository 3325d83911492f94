//! Batch front-end: subcommand dispatch, run directories and exit codes.
//!
//! Exit code 0 means the subcommand's check passed, 1 a numerical failure, and
//! 2 a configuration or usage error.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{EnvelopeSpec, ExperimentConfig};
use crate::error::{Error, Result};
use crate::lattice_ops::exact_suite;
use crate::model::{max_residual, plane_wave_linear_residual, CarrierWave};
use crate::nls::{commutator_sweep, nls_evolve, ReducedFlow};
use crate::reduction::{
    compute_coefficients, group_velocity, group_velocity_exact, residual_scaling, AnsatzOptions, EnvelopeDynamics,
    ScalingOptions,
};
use crate::spectral::{
    bound_states, build_spectral_problem, bump_solution, eigenvalues, isospectral_drift, spectral_limit_check,
    spectrum_csv, DriftOptions, LimitOptions,
};
use crate::symmetry::{projection_scaling, random_solution, symmetry_residual_scaling, FlowId, ProjectionOptions};

#[derive(Parser, Debug)]
#[command(name = "lpkdv", version, about = "Lattice potential KdV workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON experiment configuration; defaults apply to omitted fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run directory for reports and the manifest.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for data-parallel loops.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Suppress the summary on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Exact difference-calculus suite.
    Selftest,
    /// Reduction coefficients as JSON.
    Coeffs,
    /// Dispersion relation, group velocity and plane-wave residual.
    Dispersion,
    /// Lattice initial-value problem and residual scan.
    Simulate,
    /// Residual scaling of the multiscale ansatz.
    AnsatzResidual,
    /// Envelope evolution.
    NlsEvolve,
    /// Commutators of the reduced flows.
    Commutators,
    /// Eigenvalues of the spectral problem on one row.
    Spectrum,
    /// Bound-state drift along a lattice solution.
    Isospectral,
    /// Band-edge eigenvalues against the first-order limit problem.
    ZsLimit,
    /// Symmetry residual scaling of the lattice flows.
    FlowCheck,
    /// First-harmonic projection of the lattice flows.
    FlowProject,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Selftest => "selftest",
            Command::Coeffs => "coeffs",
            Command::Dispersion => "dispersion",
            Command::Simulate => "simulate",
            Command::AnsatzResidual => "ansatz-residual",
            Command::NlsEvolve => "nls-evolve",
            Command::Commutators => "commutators",
            Command::Spectrum => "spectrum",
            Command::Isospectral => "isospectral",
            Command::ZsLimit => "zs-limit",
            Command::FlowCheck => "flow-check",
            Command::FlowProject => "flow-project",
        }
    }
}

/// Result of one subcommand.
#[derive(Debug)]
pub struct Outcome {
    pub pass: bool,
    pub summary: String,
    pub report: Value,
    /// Extra files written to the run directory.
    pub artifacts: Vec<(String, Vec<u8>)>,
}

impl Outcome {
    fn new(pass: bool, summary: String, report: impl Serialize) -> Result<Self> {
        Ok(Self {
            pass,
            summary,
            report: serde_json::to_value(report)?,
            artifacts: Vec::new(),
        })
    }

    fn with(mut self, name: &str, data: impl Into<Vec<u8>>) -> Self {
        self.artifacts.push((name.to_string(), data.into()));
        self
    }
}

/// Whether an error stems from the configuration rather than the numerics.
pub fn is_usage_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_) | Error::Domain(_) | Error::Precondition(_) | Error::Io(_) | Error::Json(_) | Error::Index { .. }
    )
}

fn gaussian(amplitude: f64, center: f64, width: f64) -> EnvelopeSpec {
    EnvelopeSpec::Gaussian { amplitude, width, center }
}

/// Runs one subcommand on a validated configuration.
pub fn run_command(cmd: Command, cfg: &ExperimentConfig) -> Result<Outcome> {
    let params = cfg.params()?;
    match cmd {
        Command::Selftest => {
            let rep = exact_suite(5)?;
            let summary = format!("{} exact checks, {} failures", rep.checks, rep.failures.len());
            Outcome::new(rep.pass(), summary, &rep)
        }
        Command::Coeffs => {
            let c = compute_coefficients(&params, cfg.kappa, &cfg.settings())?;
            let text = serde_json::to_string_pretty(&c)?;
            Outcome::new(true, text, c)
        }
        Command::Dispersion => {
            let carrier = CarrierWave::new(&params, cfg.kappa)?;
            let c = compute_coefficients(&params, cfg.kappa, &cfg.settings())?;
            let vg = group_velocity(&params, cfg.kappa)?;
            let vg_exact = group_velocity_exact(&params, cfg.kappa);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let residual = (0..100)
                .map(|_| {
                    let n = rng.random_range(-100.0..100.0);
                    let m = rng.random_range(-100.0..100.0);
                    plane_wave_linear_residual(&params, &carrier, n, m).norm()
                })
                .fold(0.0, f64::max);
            let ratio = c.m1_tilde / c.m1;
            let tol = cfg.tol("plane_wave_residual", 1e-12);
            let pass = residual <= tol && (ratio.abs() - vg_exact.abs()).abs() <= cfg.tol("group_velocity", 1e-6);
            let report = json!({
                "kappa": cfg.kappa,
                "omega": carrier.omega(),
                "group_velocity": vg,
                "group_velocity_exact": vg_exact,
                "M1_tilde_over_M1": ratio,
                "plane_wave_residual": residual,
            });
            let summary = format!(
                "omega = {:.12}, d omega/d kappa = {vg_exact:.9}, M1_tilde/M1 = {ratio:.9}, plane-wave residual {residual:.2e}",
                carrier.omega()
            );
            Outcome::new(pass, summary, report)
        }
        Command::Simulate => {
            let field = random_solution(&params, cfg.window, cfg.ivp.amplitude, cfg.seed, cfg.ivp.side)?;
            let res = max_residual(&field, &params, 0);
            let pass = res <= cfg.tol("simulate_residual", 1e-10);
            let mut csv = Vec::new();
            field.write_csv(&mut csv)?;
            let mut bin = Vec::new();
            field.write_binary(&mut bin)?;
            let report = json!({
                "window": cfg.window,
                "side": cfg.ivp.side.resolve(&params),
                "max_abs": field.max_abs(),
                "max_residual": res,
            });
            let summary = format!("{}x{} field, max |u| = {:.3e}, max residual {res:.2e}", cfg.window.0, cfg.window.1, field.max_abs());
            Ok(Outcome::new(pass, summary, report)?.with("field.csv", csv).with("field.bin", bin))
        }
        Command::AnsatzResidual => {
            let coeffs = compute_coefficients(&params, cfg.kappa, &cfg.settings())?;
            let env = cfg.envelope_or(gaussian(0.8, 6.0, 2.0))?;
            let variants = [
                ("full", AnsatzOptions::default()),
                ("without_zeroth", AnsatzOptions { include_zeroth: false, ..Default::default() }),
                ("without_second", AnsatzOptions { include_second: false, ..Default::default() }),
                ("frozen", AnsatzOptions { dynamics: EnvelopeDynamics::Frozen, ..Default::default() }),
            ];
            let mut reports = serde_json::Map::new();
            let mut exps = Vec::new();
            let mut out = Vec::new();
            for (label, ansatz) in variants {
                let opts = ScalingOptions { ansatz, demodulation_box: Some(8), ..Default::default() };
                let rep = residual_scaling(&env, &coeffs, &cfg.n_list, cfg.window, &opts)?;
                exps.push(rep.exponent.value().unwrap_or(f64::NAN));
                out.push((format!("residual_{label}.csv"), rep.to_csv()));
                reports.insert(label.to_string(), serde_json::to_value(&rep)?);
            }
            let min_exp = cfg.tol("ansatz_exponent", 2.7);
            let min_drop = cfg.tol("drop_reduction", 0.7);
            let pass = exps[0] >= min_exp && exps[0] - exps[1] >= min_drop && exps[0] - exps[2] >= min_drop;
            let summary = format!(
                "exponents: full {:.2}, without u1^(0) {:.2}, without u2^(2) {:.2}, frozen envelope {:.2}",
                exps[0], exps[1], exps[2], exps[3]
            );
            let mut o = Outcome::new(pass, summary, Value::Object(reports))?;
            for (name, csv) in out {
                o = o.with(&name, csv);
            }
            Ok(o)
        }
        Command::NlsEvolve => {
            let coeffs = compute_coefficients(&params, cfg.kappa, &cfg.settings())?;
            let env = cfg.envelope_or(gaussian(0.8, 6.0, 2.0))?;
            let fin = nls_evolve(&env, &coeffs.nls(), cfg.nls.tau_final, cfg.nls.dtau)?;
            let drift = (fin.mass() - env.mass()).abs() / env.mass().max(f64::MIN_POSITIVE);
            let pass = drift <= cfg.tol("mass_drift", 1e-8);
            let mut a = Vec::new();
            env.write_csv(&mut a)?;
            let mut b = Vec::new();
            fin.write_csv(&mut b)?;
            let report = json!({
                "rho1": coeffs.rho1,
                "rho2": coeffs.rho2,
                "tau_final": fin.tau(),
                "mass_initial": env.mass(),
                "mass_final": fin.mass(),
                "relative_mass_drift": drift,
                "max_abs_final": fin.max_abs(),
            });
            let summary = format!("evolved to tau = {}, relative mass drift {drift:.2e}", fin.tau());
            Ok(Outcome::new(pass, summary, report)?.with("envelope_initial.csv", a).with("envelope_final.csv", b))
        }
        Command::Commutators => {
            let coeffs = compute_coefficients(&params, cfg.kappa, &cfg.settings())?;
            let env = cfg.envelope_or(gaussian(0.8, 6.0, 2.0))?;
            let flows = [ReducedFlow::Nls, ReducedFlow::H1, ReducedFlow::H2, ReducedFlow::H4];
            let mut reps = Vec::new();
            for i in 0..flows.len() {
                for j in i + 1..flows.len() {
                    reps.push(commutator_sweep(&coeffs.nls(), &env, flows[i], flows[j], &cfg.commutator.eps)?);
                }
            }
            let pass = reps.iter().all(|r| r.pass);
            let summary = reps
                .iter()
                .map(|r| {
                    format!(
                        "[{}, {}] norms {:?} {}",
                        r.flow_a.name(),
                        r.flow_b.name(),
                        r.norm.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>(),
                        if r.pass { "ok" } else { "FAIL" }
                    )
                })
                .collect::<Vec<_>>()
                .join("\n");
            Outcome::new(pass, summary, &reps)
        }
        Command::Spectrum => {
            let field = random_solution(&params, cfg.window, cfg.ivp.amplitude, cfg.seed, cfg.ivp.side)?;
            let sp = build_spectral_problem(&field, &params, 0, cfg.spectral.boundary, cfg.spectral.form)?;
            let ev = eigenvalues(&sp)?;
            let bound = bound_states(&sp)?;
            let report = json!({
                "size": sp.len(),
                "boundary": sp.boundary,
                "bound_states": bound,
                "max_abs_eigenvalue": ev.iter().map(|z| z.norm()).fold(0.0, f64::max),
            });
            let summary = format!("{} eigenvalues, {} outside the band", ev.len(), bound.len());
            Ok(Outcome::new(true, summary, report)?.with("spectrum.csv", spectrum_csv(&ev)))
        }
        Command::Isospectral => {
            let opts = DriftOptions { form: cfg.spectral.form, ..Default::default() };
            let rows: Vec<usize> = (0..cfg.spectral.rows).collect();
            let reps = cfg
                .spectral
                .margins
                .iter()
                .map(|&margin| {
                    let f = bump_solution(&params, margin, cfg.spectral.rows, cfg.spectral.bump_amplitude, cfg.spectral.bump_width)?;
                    isospectral_drift(&f, &params, &rows, &opts)
                })
                .collect::<Result<Vec<_>>>()?;
            let factor = cfg.tol("drift_shrink", 2.0);
            let pass = reps.windows(2).all(|w| w[1].drift * factor <= w[0].drift);
            let summary = cfg
                .spectral
                .margins
                .iter()
                .zip(&reps)
                .map(|(m, r)| format!("margin {m}: drift {:.2e}", r.drift))
                .collect::<Vec<_>>()
                .join(", ");
            Outcome::new(pass, summary, json!({ "margins": cfg.spectral.margins, "reports": reps }))
        }
        Command::ZsLimit => {
            let coeffs = compute_coefficients(&params, cfg.kappa, &cfg.settings())?;
            let env = cfg.envelope_or(gaussian(1.5, 10.0, 2.0))?;
            let opts = LimitOptions {
                xi_extent: cfg.spectral.xi_extent,
                mu1_max: cfg.spectral.mu1_max,
                ..Default::default()
            };
            let rep = spectral_limit_check(&env, &coeffs, &cfg.n_list, &opts)?;
            let cauchy_ok = rep.cauchy_change.is_some_and(|c| c <= cfg.tol("cauchy", 0.25));
            let pass = rep.non_increasing && cauchy_ok;
            let summary = format!(
                "discrepancy {:?}, non-increasing {}, Cauchy change {:?}",
                rep.entries.iter().map(|e| e.discrepancy.map(|d| format!("{d:.4}"))).collect::<Vec<_>>(),
                rep.non_increasing,
                rep.cauchy_change
            );
            Outcome::new(pass, summary, &rep)
        }
        Command::FlowCheck => {
            let sol = random_solution(&params, cfg.flows.window, cfg.flows.amplitude, cfg.seed, cfg.ivp.side)?;
            let reps = [FlowId::Flow1, FlowId::Flow2, FlowId::NegativeControl]
                .iter()
                .map(|&w| symmetry_residual_scaling(&sol, &params, w, &cfg.flows.lambda))
                .collect::<Result<Vec<_>>>()?;
            let control_fails = reps[2].exponent.value().is_some_and(|e| e < cfg.tol("control_exponent", 2.0));
            let pass = reps[0].pass && reps[1].pass && control_fails;
            let summary = reps
                .iter()
                .map(|r| format!("{}: exponent {:?}", r.flow.name(), r.exponent))
                .collect::<Vec<_>>()
                .join(", ");
            let mut o = Outcome::new(pass, summary, &reps)?;
            for r in &reps {
                o = o.with(&format!("{}.csv", r.flow.name()), r.to_csv());
            }
            Ok(o)
        }
        Command::FlowProject => {
            let coeffs = compute_coefficients(&params, cfg.kappa, &cfg.settings())?;
            let env = cfg.envelope_or(EnvelopeSpec::Sech { amplitude: 0.8, width: 2.0, center: 10.0 })?;
            let opts = ProjectionOptions { xi_extent: cfg.flows.xi_extent, ..Default::default() };
            let rep = projection_scaling(&env, &coeffs, &cfg.n_list, &opts)?;
            let last = rep.reports.last().expect("N_list is non-empty");
            let n_last = *cfg.n_list.last().expect("N_list is non-empty") as f64;
            let halving = rep.error_ratios.last().is_none_or(|r| (r - 2.0).abs() <= 2.0 * cfg.tol("halving", 0.3));
            let pass = last.points > 0
                && last.flow1_max_error <= 3.0 / n_last
                && halving
                && last.flow2_over_flow1_rel_std <= cfg.tol("flow_ratio_std", 0.05);
            let summary = format!(
                "max |ratio - 1| {:?}, error ratios {:?}, flow2/flow1 relative std {:.4}",
                rep.reports.iter().map(|r| format!("{:.4}", r.flow1_max_error)).collect::<Vec<_>>(),
                rep.error_ratios,
                last.flow2_over_flow1_rel_std
            );
            Outcome::new(pass, summary, &rep)
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    pass: bool,
    version: &'a str,
    threads: usize,
    wall_time_s: f64,
    artifacts: Vec<String>,
    config: &'a ExperimentConfig,
}

fn write_run(dir: &Path, cmd: Command, cfg: &ExperimentConfig, outcome: &Outcome, wall: f64) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&outcome.report)?)?;
    let mut names = vec!["report.json".to_string()];
    for (name, data) in &outcome.artifacts {
        std::fs::write(dir.join(name), data)?;
        names.push(name.clone());
    }
    let manifest = Manifest {
        subcommand: cmd.name(),
        pass: outcome.pass,
        version: env!("CARGO_PKG_VERSION"),
        threads: rayon::current_num_threads(),
        wall_time_s: wall,
        artifacts: names,
        config: cfg,
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Parses arguments, runs the subcommand and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match cli.config.as_deref().map(ExperimentConfig::load).unwrap_or_else(|| Ok(ExperimentConfig::default())) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return 2;
    }
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: cannot configure {k} threads: {e}");
            return 2;
        }
    }
    let start = Instant::now();
    let outcome = match run_command(cli.command, &cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return if is_usage_error(&e) { 2 } else { 1 };
        }
    };
    let wall = start.elapsed().as_secs_f64();
    let dir = cli.out.unwrap_or_else(|| PathBuf::from("runs").join(cli.command.name()));
    if let Err(e) = write_run(&dir, cli.command, &cfg, &outcome, wall) {
        eprintln!("error: cannot write run directory {}: {e}", dir.display());
        return 2;
    }
    if !cli.quiet {
        println!("{}", outcome.summary);
        println!("{} {} ({wall:.2} s, {})", cli.command.name(), if outcome.pass { "PASS" } else { "FAIL" }, dir.display());
    }
    if outcome.pass {
        0
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> i32 {
        main_with_args(std::iter::once("lpkdv").chain(args.iter().copied()))
    }

    #[test]
    fn usage_errors_exit_with_two() {
        assert_eq!(run(&["no-such-command"]), 2);
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"p": 1.0, "q": 1.0}"#).unwrap();
        assert_eq!(run(&["dispersion", "--config", cfg.to_str().unwrap(), "--quiet"]), 2);
    }

    #[test]
    fn coeffs_writes_manifest_and_report() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        assert_eq!(run(&["coeffs", "--out", out.to_str().unwrap(), "--quiet"]), 0);
        let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
        assert!((report["M1"].as_f64().unwrap() - 5f64.sqrt()).abs() < 1e-9);
        assert!((report["rho1"].as_f64().unwrap() + 1.2).abs() < 1e-12);
        let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["subcommand"], "coeffs");
        assert_eq!(manifest["config"]["p"], 1.5);
    }
}
