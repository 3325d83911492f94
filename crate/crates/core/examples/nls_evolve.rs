//! Pseudo-spectral evolution of the envelope equation with mass monitoring.

use std::f64::consts::PI;

use lpkdv::model::LpkdvParams;
use lpkdv::nls::{nls_evolve, Envelope};
use lpkdv::reduction::{compute_coefficients, ReductionSettings};

fn main() -> lpkdv::Result<()> {
    let params = LpkdvParams::new(1.5, 0.5)?;
    let c = compute_coefficients(&params, PI / 2.0, &ReductionSettings::default())?.nls();
    println!("rho1 = {}, rho2 = {}, defocusing: {}", c.rho1(), c.rho2(), c.is_defocusing());
    let env = Envelope::sech(-20.0, 80.0, 512, 0.8, 10.0, 2.0)?;
    let mut cur = env.clone();
    for step in 1..=4 {
        cur = nls_evolve(&cur, &c, 0.5, 1e-3)?;
        println!(
            "tau = {:.1}: max |A| = {:.6}, relative mass drift = {:.2e}",
            0.5 * step as f64,
            cur.max_abs(),
            (cur.mass() - env.mass()).abs() / env.mass()
        );
    }
    Ok(())
}
