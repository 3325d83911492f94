//! Carrier dispersion, group velocity and the reduction coefficients.

use std::f64::consts::PI;

use lpkdv::model::{dispersion, LpkdvParams};
use lpkdv::reduction::{compute_coefficients, group_velocity_exact, ReductionSettings};

fn main() -> lpkdv::Result<()> {
    let params = LpkdvParams::new(1.5, 0.5)?;
    println!("{:>8} {:>14} {:>14}", "kappa", "omega", "d omega/dk");
    for k in 1..=6 {
        let kappa = k as f64 * PI / 7.0;
        println!("{kappa:>8.4} {:>14.9} {:>14.9}", dispersion(&params, kappa)?, group_velocity_exact(&params, kappa));
    }
    let c = compute_coefficients(&params, PI / 2.0, &ReductionSettings::default())?;
    println!("{}", serde_json::to_string_pretty(&c)?);
    println!("|M1_tilde / M1| = {:.12}", (c.m1_tilde / c.m1).abs());
    Ok(())
}
