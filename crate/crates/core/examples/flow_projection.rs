//! First-harmonic projection of the lattice flows on the multiscale ansatz.

use std::f64::consts::PI;

use lpkdv::model::LpkdvParams;
use lpkdv::nls::Envelope;
use lpkdv::reduction::{compute_coefficients, ReductionSettings};
use lpkdv::symmetry::{projection_scaling, ProjectionOptions};

fn main() -> lpkdv::Result<()> {
    let params = LpkdvParams::new(1.5, 0.5)?;
    let coeffs = compute_coefficients(&params, PI / 2.0, &ReductionSettings::default())?;
    let env = Envelope::sech(-20.0, 80.0, 512, 0.8, 10.0, 2.0)?;
    let rep = projection_scaling(&env, &coeffs, &[16, 32, 64], &ProjectionOptions::default())?;
    for r in &rep.reports {
        println!(
            "N = {:>3}: {:>4} points, max |ratio - 1| = {:.4}, flow2/flow1 = {:.4} (relative std {:.4})",
            r.n_scale, r.points, r.flow1_max_error, r.flow2_over_flow1, r.flow2_over_flow1_rel_std
        );
    }
    println!("error ratios {:?}", rep.error_ratios);
    Ok(())
}
