//! Values frozen from an independent 30-digit evaluation.

use nf_core::dde::{find_equilibria, StateBox};
use nf_core::model::FinitePopulationModel;
use nf_core::sigmoid::{f0_values, gauss_expectation, GaussianMoments, SigmoidSpec};
use nf_core::spectral::{lambda_star, lambert_w};
use num_complex::Complex64;

fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol * b.norm().max(1.0)
}

#[test]
fn lambert_branches_match_reference() {
    let cases = [
        (0, Complex64::new(1.0, 0.0), Complex64::new(0.567_143_290_409_783_87, 0.0)),
        (-1, Complex64::new(-0.1, 0.0), Complex64::new(-3.577_152_063_957_297_1, 0.0)),
        (0, Complex64::new(1.0, 1.0), Complex64::new(0.656_966_069_230_436_4, 0.325_450_339_413_415_03)),
        (1, Complex64::new(0.0, 2.0), Complex64::new(-1.132_021_448_485_424_4, 6.099_686_186_188_022)),
        (-2, Complex64::new(-3.0, 0.0), Complex64::new(-0.954_208_358_456_842, -7.731_179_293_756_960_2)),
    ];
    for (k, z, w) in cases {
        let got = lambert_w(k, z).unwrap();
        assert!(close(got, w, 1e-13), "W_{k}({z}) = {got}, expected {w}");
    }
}

#[test]
fn probit_moment_matches_reference() {
    let spec = SigmoidSpec::probit(3.0, 0.0);
    let cases = [
        (0.4, 2.0, 0.608_456_687_813_154_6),
        (-1.5, 0.3, 0.009_656_372_839_907_598),
        (5.0, 50.0, 0.760_006_171_157_055_1),
    ];
    for (mu, v, f) in cases {
        let got = gauss_expectation(&spec, GaussianMoments::new(mu, v)).unwrap();
        assert!((got - f).abs() < 1e-15, "f({mu}, {v}) = {got}");
    }
}

#[test]
fn zero_variance_slope_and_threshold() {
    let (f0, f0p) = f0_values(&SigmoidSpec::probit(3.0, 0.0), 0.0).unwrap();
    assert_eq!(f0, 0.5);
    assert!((f0p - 1.196_826_841_204_298_2).abs() < 1e-15);
    assert!((lambda_star(3.0).unwrap() - 0.643_737_174_742_424_8).abs() < 1e-15);
}

#[test]
fn equilibria_of_two_population_benchmark() {
    let lam: f64 = 0.5;
    let m = FinitePopulationModel::simple(vec![vec![15.0, -12.0], vec![16.0, -5.0]], vec![0.0, -3.0], lam, 0.0);
    let specs = vec![SigmoidSpec::probit(1.0, 0.0); 2];
    let set = find_equilibria(&m, &specs, &StateBox::uniform(2, (-30.0, 30.0), (0.0, 60.0)), 64).unwrap();
    let expected = [
        (-0.521_174_116_028_857_3, -0.179_219_549_809_864_08),
        (1.272_126_711_085_798, 6.156_935_133_360_911_6),
        (2.960_628_271_712_615, 7.958_003_489_826_545_9),
    ];
    assert_eq!(set.points.len(), 3);
    for (e, (m1, m2)) in set.points.iter().zip(expected) {
        assert!((e.state[0] - m1).abs() < 1e-10 && (e.state[1] - m2).abs() < 1e-10, "{:?}", e.state);
        assert!((e.state[2] - lam * lam / 2.0).abs() < 1e-12);
    }
}
