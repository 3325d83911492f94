//! Invariants of the scalar spectral problem and of the lattice flows.

use lpkdv::model::{ColumnSide, LatticeField, LpkdvParams};
use lpkdv::spectral::{
    build_spectral_problem, eigenvalues, eigenvalues_with, Boundary, CoefficientForm, Solver, SpectralProblem,
};
use lpkdv::symmetry::{flow_rhs, random_solution, FlowId};
use num_complex::Complex64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gauge_symmetrization_preserves_eigenvalues(a in prop::collection::vec(0.2f64..3.0, 8..60)) {
        let sp = SpectralProblem::new(a, Boundary::Dirichlet);
        let sym = eigenvalues(&sp).unwrap();
        let dense = eigenvalues_with(&sp, Solver::Dense).unwrap();
        for (x, y) in sym.iter().zip(&dense) {
            prop_assert!((x - y).norm() <= 1e-10 * (1.0 + x.norm()));
        }
    }

    #[test]
    fn coefficients_change_only_inside_the_stencil(site in 3usize..25, bump in -0.5f64..0.5) {
        prop_assume!(bump.abs() > 1e-3);
        let p = LpkdvParams::new(1.5, 0.5).unwrap();
        let base = LatticeField::from_real_fn(30, 1, |n, _| 0.05 * (n as f64 * 0.7).sin());
        let mut moved = base.clone();
        moved.set(site, 0, moved.get(site, 0) + Complex64::new(bump, 0.0));
        for form in [CoefficientForm::Difference, CoefficientForm::Sum] {
            let a = build_spectral_problem(&base, &p, 0, Boundary::Dirichlet, form).unwrap();
            let b = build_spectral_problem(&moved, &p, 0, Boundary::Dirichlet, form).unwrap();
            for (i, (x, y)) in a.a.iter().zip(&b.a).enumerate() {
                let n = i + a.n_start;
                let touches = n + 2 >= site && n <= site + 1;
                if !touches {
                    prop_assert_eq!(x, y);
                }
            }
        }
    }

    #[test]
    fn flows_vanish_on_any_constant(c in -2.0f64..2.0) {
        let p = LpkdvParams::new(1.5, 0.5).unwrap();
        let f = LatticeField::from_real_fn(16, 2, |_, _| c);
        for which in [FlowId::Flow1, FlowId::Flow2] {
            prop_assert!(flow_rhs(&f, &p, which).unwrap().values.max_abs() < 1e-15);
        }
    }

    #[test]
    fn flows_are_local_in_m(seed in 0u64..1000, m_changed in 0usize..4) {
        let p = LpkdvParams::new(1.5, 0.5).unwrap();
        let f = random_solution(&p, (24, 4), 0.1, seed, ColumnSide::Right).unwrap();
        let mut g = f.clone();
        g.set(12, m_changed, Complex64::new(0.3, 0.0));
        for which in [FlowId::Flow1, FlowId::Flow2] {
            let a = flow_rhs(&f, &p, which).unwrap().values;
            let b = flow_rhs(&g, &p, which).unwrap().values;
            for m in (0..4).filter(|&m| m != m_changed) {
                prop_assert_eq!(a.row(m), b.row(m));
            }
        }
    }
}

#[test]
fn free_operator_spectrum_stays_in_band() {
    let p = LpkdvParams::new(1.5, 0.5).unwrap();
    let zero = LatticeField::from_real_fn(64, 1, |_, _| 0.0);
    for boundary in [Boundary::Dirichlet, Boundary::Periodic] {
        let sp = build_spectral_problem(&zero, &p, 0, boundary, CoefficientForm::Difference).unwrap();
        for z in eigenvalues(&sp).unwrap() {
            assert!(z.im.abs() < 1e-12 && z.re.abs() <= 2.0 + 1e-12);
        }
    }
}
