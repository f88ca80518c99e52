use nf_core::field::{integrate_field, FieldInit, SpatialGrid};
use nf_core::history::HistorySegment;
use nf_core::model::{Boundary, FinitePopulationModel, NeuralFieldModel};
use nf_core::network::simulate_network;
use nf_core::sigmoid::{gauss_expectation, gauss_expectation_quadrature, GaussianMoments, SigmoidSpec};
use nf_core::spectral::{kernel_coefficient, lambert_residual, lambert_w, DispersionConvention};
use num_complex::Complex64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn probit_moment_is_a_monotone_probability(g in 0.1f64..10.0, mu in -20.0f64..20.0, v in 0.0f64..200.0, d in 0.0f64..1.0) {
        let spec = SigmoidSpec::probit(g, 0.0);
        let f = gauss_expectation(&spec, GaussianMoments::new(mu, v)).unwrap();
        let f2 = gauss_expectation(&spec, GaussianMoments::new(mu + d, v)).unwrap();
        let q = gauss_expectation_quadrature(&spec, GaussianMoments::new(mu, v)).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!(f2 >= f);
        prop_assert!((f - q).abs() < 1e-10);
    }

    #[test]
    fn lambert_branches_certify(re in -1e3f64..1e3, im in -1e3f64..1e3, k in -5i32..=5) {
        let z = Complex64::new(re, im);
        prop_assume!(z.norm() > 1e-6);
        let w = lambert_w(k, z).unwrap();
        prop_assert!(lambert_residual(w, z) < 1e-12);
    }

    #[test]
    fn static_kernel_coefficients_are_dominated_by_the_zero_mode(s in 0.01f64..0.2, k in 1i64..64) {
        let mut m = NeuralFieldModel::two_layer_reference(0.5, 0.0);
        m.widths = vec![s];
        m.w = vec![vec![1.0]];
        m.sigma = vec![vec![0.0]];
        m.noise.truncate(1);
        m.input.truncate(1);
        m.theta.truncate(1);
        let zero = Complex64::new(0.0, 0.0);
        let a = kernel_coefficient(&m, k, zero, DispersionConvention::Circular).unwrap();
        let a0 = kernel_coefficient(&m, 0, zero, DispersionConvention::Circular).unwrap();
        prop_assert!(a.im.abs() < 1e-12 && a.re > 0.0);
        prop_assert!(a.re < a0.re);
        let a = kernel_coefficient(&m, k, zero, DispersionConvention::OneSided).unwrap();
        let b = kernel_coefficient(&m, k + 1, zero, DispersionConvention::OneSided).unwrap();
        prop_assert!(b.norm() < a.norm());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn homogeneous_periodic_fields_stay_homogeneous(m1 in -2.0f64..2.0, m2 in -2.0f64..2.0, lam in 0.1f64..3.0) {
        let m = NeuralFieldModel::two_layer_reference(lam, 0.1);
        let grid = SpatialGrid::new(Boundary::Periodic, 512).unwrap();
        let v = lam * lam / 2.0;
        let init = FieldInit::homogeneous(&[m1, m2], &[v, v]).history(&grid, m.max_delay());
        let specs = vec![SigmoidSpec::probit(3.0, 0.0); 2];
        let tr = integrate_field(&m, &specs, &grid, &init, 2.0, 0.01).unwrap();
        prop_assert!(tr.max_spatial_deviation.iter().all(|&d| d < 1e-10));
    }

    #[test]
    fn network_runs_are_reproducible(seed in any::<u64>()) {
        let m = FinitePopulationModel::simple(vec![vec![1.0, -1.0], vec![1.0, 1.0]], vec![0.0, -1.0], 0.5, 0.1);
        let specs = vec![SigmoidSpec::probit(3.0, 0.0); 2];
        let init = HistorySegment::constant(vec![0.0, 0.0, 0.125, 0.125], m.max_delay());
        let a = simulate_network(&m, &specs, &init, 64, seed, 1.0, 0.01).unwrap();
        let b = simulate_network(&m, &specs, &init, 64, seed, 1.0, 0.01).unwrap();
        prop_assert_eq!(&a.mean, &b.mean);
        prop_assert_eq!(&a.var, &b.var);
    }
}
