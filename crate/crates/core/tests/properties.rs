use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

use weakval::catalog;
use weakval::error::Violation;
use weakval::evolution::{evolve_exact, post_select};
use weakval::pointer::{FockPointerSpec, PointerSpec};
use weakval::scenario::{CouplingSpec, ObservableSpec, Scenario};
use weakval::tensor::{spectral_decomposition, FactorLayout, Operator, StateVector};
use weakval::weak::{
    analytic_weak_value, correlator_decomposition, extract_joint_fock, symmetrized_joint_weak_value,
};

fn complex_vec(n: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n)
        .prop_map(|v| v.into_iter().map(|(a, b)| C64::new(a, b)).collect())
}

fn state(amps: Vec<C64>, layout: &FactorLayout) -> Option<StateVector> {
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm < 1e-3 {
        return None;
    }
    StateVector::new(layout.clone(), amps.into_iter().map(|a| a / norm).collect()).ok()
}

fn hermitian(entries: &[C64], n: usize) -> DMatrix<C64> {
    let m = DMatrix::from_fn(n, n, |r, c| entries[r * n + c]);
    (&m + m.adjoint()) * C64::new(0.5, 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Operators diagonal in a shared random basis commute, and the
    /// permutation sum then equals the plain product.
    #[test]
    fn commuting_families_reduce_to_the_product(
        h in complex_vec(64),
        diags in prop::collection::vec(prop::collection::vec(-2.0..2.0f64, 8), 3),
        pre in complex_vec(8),
        post in complex_vec(8),
    ) {
        let layout = FactorLayout::new(vec![2, 2, 2]).unwrap();
        let basis = Operator::hermitian(layout.clone(), hermitian(&h, 8)).unwrap();
        let (_, u) = spectral_decomposition(&basis).unwrap();
        let ops: Vec<Operator> = diags
            .iter()
            .map(|d| {
                let dm = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(8, d.iter().map(|&x| C64::new(x, 0.0))));
                Operator::hermitian(layout.clone(), &u * dm * u.adjoint()).unwrap()
            })
            .collect();
        let (Some(i), Some(f)) = (state(pre, &layout), state(post, &layout)) else { return Ok(()) };
        prop_assume!(f.inner(&i).unwrap().norm() > 0.05);
        let prod = ops[0].mul(&ops[1]).unwrap().mul(&ops[2]).unwrap();
        let direct = analytic_weak_value(&prod, &i, &f).unwrap();
        let sym = symmetrized_joint_weak_value(&ops, &i, &f).unwrap();
        prop_assert!((direct - sym).norm() <= 1e-12 * (1.0 + direct.norm()), "{} vs {}", direct, sym);
    }

    /// Lowering-operator and correlator routes agree on random one- and
    /// two-pointer scenarios.
    #[test]
    fn extraction_routes_agree(
        n in 1usize..=2,
        h in complex_vec(16),
        pre in complex_vec(4),
        post in complex_vec(4),
        lambda in 0.001..0.15f64,
        dim in 6usize..=12,
    ) {
        let sys = FactorLayout::new(vec![4]).unwrap();
        let (Some(i), Some(f)) = (state(pre, &sys), state(post, &sys)) else { return Ok(()) };
        prop_assume!(f.inner(&i).unwrap().norm() > 0.1);
        let a = Operator::hermitian(sys.clone(), hermitian(&h, 4)).unwrap();
        let s = Scenario {
            name: "random".into(),
            description: String::new(),
            system_dims: vec![4],
            observables: (0..n).map(|j| ObservableSpec { name: format!("a{j}"), matrix: a.clone(), target: vec![0] }).collect(),
            pointers: vec![PointerSpec::Fock(FockPointerSpec { sigma: 1.0, dim }); n],
            couplings: vec![CouplingSpec { gt: 2.0 * lambda }; n],
            pre: i.amps().to_vec(),
            post: f.amps().to_vec(),
            overlap_floor: 1e-10,
        };
        prop_assume!(a.max_abs() * lambda < 0.3);
        let evolved = match evolve_exact(&s) {
            Ok(e) => e,
            Err(_) => return Ok(()),
        };
        let r = match post_select(&evolved, &s) {
            Ok(r) => r,
            Err(_) => return Ok(()),
        };
        let low = extract_joint_fock(&r, &s).unwrap();
        let (table, corr) = correlator_decomposition(&r, &s).unwrap();
        prop_assert!((low - corr).norm() <= 1e-12 * low.norm().max(1.0), "{} vs {}", low, corr);
        prop_assert!(table.max_imag <= 1e-12 * table.entries.iter().fold(1.0f64, |m, e| m.max(e.abs())));
    }

    /// Norm is preserved by the exact evolution for rescaled catalog scenarios.
    #[test]
    fn evolution_preserves_norm(idx in 0usize..12, lambda in 0.001..0.2f64) {
        let name = catalog::names()[idx];
        let s = catalog::resolve(name).unwrap().with_lambda(lambda);
        if let Ok(c) = evolve_exact(&s) {
            prop_assert!((c.state.norm() - 1.0).abs() <= 1e-10);
        }
    }

    /// Validation never panics, whatever the shape of the input.
    #[test]
    fn validation_is_total(
        dims in prop::collection::vec(0usize..4, 0..3),
        mat_dim in 0usize..5,
        entries in complex_vec(16),
        target in prop::collection::vec(0usize..4, 0..3),
        pre in complex_vec(5),
        post in complex_vec(3),
        gt in prop_oneof![Just(f64::NAN), Just(0.0), -2.0..2.0f64],
        n_ptr in 0usize..3,
        sigma in prop_oneof![Just(0.0), Just(-1.0), 0.1..3.0f64],
        pdim in 0usize..6,
        floor in prop_oneof![Just(f64::NAN), Just(-1.0), 0.0..1e-3f64],
    ) {
        let m = DMatrix::from_fn(mat_dim, mat_dim, |r, c| entries[(r * mat_dim + c) % 16]);
        let matrix = match Operator::from_matrix(m) {
            Ok(op) => op,
            Err(_) => return Ok(()),
        };
        let s = Scenario {
            name: String::new(),
            description: String::new(),
            system_dims: dims,
            observables: vec![ObservableSpec { name: "x".into(), matrix, target }],
            pointers: vec![PointerSpec::Fock(FockPointerSpec { sigma, dim: pdim }); n_ptr],
            couplings: vec![CouplingSpec { gt }; 1],
            pre,
            post,
            overlap_floor: floor,
        };
        let v: Vec<Violation> = s.violations();
        prop_assert!(!v.is_empty());
        prop_assert!(s.validate().is_err());
    }
}
