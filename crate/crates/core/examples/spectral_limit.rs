//! Eigenvalues of the scalar spectral problem near the band edge `2 cos(kappa/2)`
//! on an ansatz row, compared with the first-order limit problem as `N` grows.

use std::f64::consts::PI;

use lpkdv::model::LpkdvParams;
use lpkdv::nls::Envelope;
use lpkdv::reduction::{compute_coefficients, ReductionSettings};
use lpkdv::spectral::{spectral_limit_check, LimitOptions};

fn main() -> lpkdv::Result<()> {
    let params = LpkdvParams::new(1.5, 0.5)?;
    let coeffs = compute_coefficients(&params, PI / 2.0, &ReductionSettings::default())?;
    let env = Envelope::gaussian(-20.0, 80.0, 512, 1.5, 10.0, 2.0)?;
    let report = spectral_limit_check(&env, &coeffs, &[16, 32, 64], &LimitOptions::default())?;
    for e in &report.entries {
        println!(
            "N = {:>3}: {} sites, discrepancy {:?}\n  lattice mu1 {:?}\n  limit   mu1 {:?}",
            e.n,
            e.lattice_sites,
            e.discrepancy,
            e.lattice_mu1.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
            e.zs_mu1.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>()
        );
    }
    println!("non-increasing: {}  Cauchy change: {:?}", report.non_increasing, report.cauchy_change);
    Ok(())
}
