use proptest::prelude::*;

use sgdlab_core::dynamics::population_path;
use sgdlab_core::experiments::{scaling_scan, BudgetRule, ScanConfig, StepRule};
use sgdlab_core::hermite::{
    hermite_polynomial, population_loss_quadrature_oracle, supervised_population_profile, GaussianRule, HermiteProfile,
    PlaneRule,
};
use sgdlab_core::theory::alpha_critical;
use sgdlab_core::{Activation, Family, PopulationProfile};

fn small_scan(teacher: Activation, delta: f64, alpha: f64, seed: u64) -> ScanConfig<f64> {
    let mut cfg = ScanConfig::new(Family::Supervised { teacher, student: None }, vec![24, 48, 96], 5);
    cfg.delta_rule = StepRule::Fixed(delta);
    cfg.alpha_rule = BudgetRule::Fixed(alpha);
    cfg.master_seed = seed;
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn scans_are_bit_identical_on_rerun(seed in any::<u64>(), delta in 0.1f64..1.0) {
        let cfg = small_scan(Activation::Linear, delta, 60.0, seed);
        let a = scaling_scan(&cfg).unwrap();
        let b = scaling_scan(&cfg).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        prop_assert_eq!(a.cells_csv(), b.cells_csv());
    }

    #[test]
    fn raising_the_budget_never_raises_tau(seed in any::<u64>(), short in 1.0f64..20.0, extra in 1.0f64..50.0) {
        let low = scaling_scan(&small_scan(Activation::Square, 0.1, short, seed)).unwrap();
        let high = scaling_scan(&small_scan(Activation::Square, 0.1, short + extra, seed)).unwrap();
        for (l, h) in low.cells.iter().zip(&high.cells) {
            if let Some(t) = l.tau {
                prop_assert_eq!(h.tau, Some(t));
            }
        }
    }
}

proptest! {
    #[test]
    fn oracle_matches_series_on_grid(i in 0usize..=20, which in 0usize..6) {
        let act = [
            Activation::Linear,
            Activation::Relu,
            Activation::Sigmoid,
            Activation::Square,
            Activation::Abs,
            Activation::Hermite3,
        ][which].clone();
        let m = -1.0 + 0.1 * i as f64;
        let p: PopulationProfile<f64> = supervised_population_profile(&HermiteProfile::of(&act).unwrap()).unwrap();
        let series = p.phi(m);
        let oracle = population_loss_quadrature_oracle(&act, m, 20).unwrap();
        prop_assert!((series - oracle).abs() < 1e-6 * (1.0 + series.abs()), "{act} at {m}: {series} vs {oracle}");
    }

    #[test]
    fn oracle_matches_series_off_grid_for_smooth_activations(m in -1.0f64..=1.0, which in 0usize..4) {
        let act = [Activation::Linear, Activation::Sigmoid, Activation::Square, Activation::Hermite3][which].clone();
        let p: PopulationProfile<f64> = supervised_population_profile(&HermiteProfile::of(&act).unwrap()).unwrap();
        let series = p.phi(m);
        let oracle = population_loss_quadrature_oracle(&act, m, 20).unwrap();
        prop_assert!((series - oracle).abs() < 1e-6 * (1.0 + series.abs()), "{act} at {m}: {series} vs {oracle}");
    }

    #[test]
    fn noise_operator_scales_by_power(m in -1.0f64..=1.0, k in 0usize..=8) {
        let rule = PlaneRule::tensor_hermite(40).unwrap();
        let s = (1.0 - m * m).sqrt();
        let v = rule.expect(|a1, a2| hermite_polynomial(k, a1 * m + a2 * s) * hermite_polynomial(k, a1)).unwrap();
        prop_assert!((v - m.powi(k as i32)).abs() < 1e-8);
    }

    #[test]
    fn population_path_is_monotone(m0 in 0.01f64..0.9, delta in 0.01f64..1.0, which in 0usize..3) {
        let act = [Activation::Linear, Activation::Square, Activation::Hermite3][which].clone();
        let p: PopulationProfile<f64> = supervised_population_profile(&HermiteProfile::of(&act).unwrap()).unwrap();
        let path = population_path(&p, 50, delta, m0, 2000);
        prop_assert!(path.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn critical_ratio_grows_with_dimension(k in 2usize..6, e in 4u32..12) {
        let n = 1usize << e;
        let r = |n: usize| alpha_critical(n, k + 1).unwrap() / alpha_critical(n, k).unwrap();
        prop_assert!(r(4 * n) > r(n));
    }
}

#[test]
fn orthonormality_at_order_forty() {
    let rule = GaussianRule::hermite(40).unwrap();
    for i in 0..=12 {
        for j in 0..=12 {
            let g = rule.expect(|z| hermite_polynomial(i, z) * hermite_polynomial(j, z)).unwrap();
            assert!((g - f64::from(u8::from(i == j))).abs() < 1e-8, "({i}, {j}): {g}");
        }
    }
}

#[test]
fn population_dynamics_converges() {
    let p: PopulationProfile<f64> =
        supervised_population_profile(&HermiteProfile::of(&Activation::Square).unwrap()).unwrap();
    let path = population_path(&p, 100, 0.5, 0.1, 20_000);
    assert!(*path.last().unwrap() > 1.0 - 1e-3);
}
