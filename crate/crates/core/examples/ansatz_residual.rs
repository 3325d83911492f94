//! Residual of the multiscale ansatz on the lattice equation as `N` grows,
//! with and without the zeroth and second harmonics.

use std::f64::consts::PI;

use lpkdv::model::LpkdvParams;
use lpkdv::nls::Envelope;
use lpkdv::reduction::{compute_coefficients, residual_scaling, AnsatzOptions, EnvelopeDynamics, ReductionSettings, ScalingOptions};

fn main() -> lpkdv::Result<()> {
    let params = LpkdvParams::new(1.5, 0.5)?;
    let coeffs = compute_coefficients(&params, PI / 2.0, &ReductionSettings::default())?;
    let env = Envelope::gaussian(-20.0, 80.0, 512, 0.8, 6.0, 2.0)?;
    let ns = [16, 32, 64];
    let window = (256, 256);

    let variants = [
        ("full ansatz", AnsatzOptions::default()),
        ("without u1^(0)", AnsatzOptions { include_zeroth: false, ..Default::default() }),
        ("without u2^(2)", AnsatzOptions { include_second: false, ..Default::default() }),
        ("frozen envelope", AnsatzOptions { dynamics: EnvelopeDynamics::Frozen, ..Default::default() }),
    ];
    for (label, ansatz) in variants {
        let opts = ScalingOptions { ansatz, demodulation_box: Some(8), ..Default::default() };
        let rep = residual_scaling(&env, &coeffs, &ns, window, &opts)?;
        println!(
            "{label:>16}: residuals {:?}  exponent {:?}  first-harmonic exponent {:?}",
            rep.residual.iter().map(|r| format!("{r:.3e}")).collect::<Vec<_>>(),
            rep.exponent,
            rep.demodulated_exponent
        );
    }
    Ok(())
}
