//! Initial-boundary value problem on a lattice window and its residual.

use lpkdv::model::{max_residual, ColumnSide, LpkdvParams};
use lpkdv::symmetry::random_solution;

fn main() -> lpkdv::Result<()> {
    let params = LpkdvParams::new(1.5, 0.5)?;
    for side in [ColumnSide::Left, ColumnSide::Right] {
        let field = random_solution(&params, (64, 32), 0.1, 7, side)?;
        println!(
            "{side:?} column: max |u| = {:.3e}, max residual = {:.2e}",
            field.max_abs(),
            max_residual(&field, &params, 0)
        );
    }
    let field = random_solution(&params, (64, 32), 0.1, 7, ColumnSide::Auto)?;
    let path = std::env::temp_dir().join("lpkdv_field.csv");
    field.save_csv(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}
