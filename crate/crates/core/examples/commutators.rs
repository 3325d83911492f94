//! Commutators of the reduced flows under an eps sweep.

use std::f64::consts::PI;

use lpkdv::model::LpkdvParams;
use lpkdv::nls::{commutator_sweep, Envelope, ReducedFlow, EPS_SWEEP};
use lpkdv::reduction::{compute_coefficients, ReductionSettings};

fn main() -> lpkdv::Result<()> {
    let params = LpkdvParams::new(1.5, 0.5)?;
    let c = compute_coefficients(&params, PI / 2.0, &ReductionSettings::default())?.nls();
    let env = Envelope::gaussian(-20.0, 80.0, 512, 0.8, 6.0, 2.0)?;
    let flows = [ReducedFlow::Nls, ReducedFlow::H1, ReducedFlow::H2, ReducedFlow::H4];
    for (i, &a) in flows.iter().enumerate() {
        for &b in &flows[i + 1..] {
            let r = commutator_sweep(&c, &env, a, b, &EPS_SWEEP)?;
            println!(
                "[{:>3}, {:>3}] norms {:?} floors {:?} pass {}",
                a.name(),
                b.name(),
                r.norm.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>(),
                r.floor.iter().map(|v| format!("{v:.1e}")).collect::<Vec<_>>(),
                r.pass
            );
        }
    }
    Ok(())
}
