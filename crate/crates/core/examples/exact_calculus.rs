//! Exact rational checks of the multiple-scale difference calculus.

use lpkdv::lattice_ops::{
    cross_lattice_difference, forward_difference, formal_derivative, rat, slowness_order, stirling_tables, ScaleRatio,
    Sequence1D, exact_suite,
};

fn main() -> lpkdv::Result<()> {
    let tables = stirling_tables(5)?;
    for i in 0..=5 {
        let row: Vec<String> = (0..=i).map(|k| tables.first(i, k).to_string()).collect();
        println!("s({i}, k) = [{}]", row.join(", "));
    }

    // n^3 / 6 sampled on 0..12
    let seq = Sequence1D::from_fn(0, 12, |n| rat(n * n * n, 6))?;
    let order = slowness_order(&seq, 6)?;
    println!("slowness order of n^3/6: {order:?}");
    println!("third forward difference: {}", forward_difference(&seq, 3)?.values()[0]);
    println!("formal derivative at n = 2: {}", formal_derivative(&seq, order)?.get(2).unwrap());

    let h = ScaleRatio::new(1, 2)?;
    let d = cross_lattice_difference(&seq, &h, 1, 4)?;
    let head: Vec<String> = d.values()[..4].iter().map(|v| v.to_string()).collect();
    println!("difference on the half-step lattice: [{}]", head.join(", "));

    let rep = exact_suite(5)?;
    println!("exact suite: {} checks, {} failures", rep.checks, rep.failures.len());
    Ok(())
}
