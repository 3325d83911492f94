//! Bound states of the row spectral problem along the lattice evolution.

use lpkdv::model::LpkdvParams;
use lpkdv::spectral::{bound_states, bump_solution, build_spectral_problem, isospectral_drift, Boundary, CoefficientForm, DriftOptions};

fn main() -> lpkdv::Result<()> {
    let params = LpkdvParams::new(1.5, 0.5)?;
    let rows: Vec<usize> = (0..11).collect();
    for margin in [40, 80] {
        let field = bump_solution(&params, margin, rows.len(), 0.3, 3.0)?;
        let sp = build_spectral_problem(&field, &params, 0, Boundary::Dirichlet, CoefficientForm::Difference)?;
        let rep = isospectral_drift(&field, &params, &rows, &DriftOptions::default())?;
        println!(
            "margin {margin}: bound states {:?}, drift over {} rows {:.2e}, edge activity {:.1e}",
            bound_states(&sp)?,
            rows.len(),
            rep.drift,
            rep.edge_activity
        );
    }
    Ok(())
}
