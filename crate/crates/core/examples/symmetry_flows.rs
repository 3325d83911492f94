//! Residual of lattice solutions flowed along the symmetry generators.

use lpkdv::model::{ColumnSide, LpkdvParams};
use lpkdv::symmetry::{random_solution, symmetry_residual_scaling, FlowId};

fn main() -> lpkdv::Result<()> {
    let params = LpkdvParams::new(1.5, 0.5)?;
    let sol = random_solution(&params, (60, 20), 0.1, 1, ColumnSide::Right)?;
    for which in [FlowId::Flow1, FlowId::Flow2, FlowId::NegativeControl] {
        let r = symmetry_residual_scaling(&sol, &params, which, &[0.1, 0.2, 0.4])?;
        println!(
            "{:>16}: residuals {:?} exponent {:?}",
            which.name(),
            r.residual.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>(),
            r.exponent
        );
    }
    Ok(())
}
