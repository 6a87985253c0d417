//! Exact invariants, checked on randomized inputs.

use hetnet_cells::analytics::{association_probability, mean_area_closed_form, mean_area_integral, mean_areas};
use hetnet_cells::association::{scores, serving_ap, ApGains};
use hetnet_cells::fading::fractional_moment;
use hetnet_cells::oracles::brute_force_map;
use hetnet_cells::pointprocess::sample_network;
use hetnet_cells::tessellation::compute_association_map;
use hetnet_cells::*;
use proptest::prelude::*;

fn fading_strategy() -> impl Strategy<Value = FadingModel> {
    prop_oneof![
        Just(FadingModel::Deterministic),
        (0.0f64..3.0).prop_map(|sigma| FadingModel::LogNormal { sigma }),
        (0.5f64..2.0).prop_map(|scale| FadingModel::Exponential { scale }),
    ]
}

fn tier_strategy(exponent: impl Strategy<Value = f64>) -> impl Strategy<Value = TierConfig> {
    (0.1f64..5.0, -10.0f64..20.0, exponent, fading_strategy())
        .prop_map(|(density, db, a, fading)| TierConfig::new(density, 10f64.powf(db / 10.0), a, fading))
}

fn equal_exponent_tiers() -> impl Strategy<Value = Vec<TierConfig>> {
    (2.5f64..6.0, prop::collection::vec(tier_strategy(Just(4.0)), 1..=3)).prop_map(|(a, mut tiers)| {
        for t in &mut tiers {
            t.path_loss_exponent = a;
        }
        tiers
    })
}

fn mixed_exponent_tiers() -> impl Strategy<Value = Vec<TierConfig>> {
    prop::collection::vec(tier_strategy(2.6f64..5.5), 1..=3)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn power_scale_leaves_areas_unchanged(tiers in mixed_exponent_tiers(), db in -20.0f64..20.0) {
        let scaled: Vec<TierConfig> = tiers
            .iter()
            .map(|t| TierConfig { power: t.power * 10f64.powf(db / 10.0), ..*t })
            .collect();
        let before = mean_areas(&tiers).unwrap();
        let after = mean_areas(&scaled).unwrap();
        for (x, y) in before.iter().zip(&after) {
            prop_assert!(rel(*y, *x) < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn density_scale_divides_areas(tiers in equal_exponent_tiers(), c in 0.2f64..5.0) {
        // holds for a common exponent only: otherwise rescaling space changes power ratios
        let scaled: Vec<TierConfig> = tiers.iter().map(|t| TierConfig { density: t.density * c, ..*t }).collect();
        let before = mean_area_closed_form(&tiers).unwrap();
        let after = mean_area_closed_form(&scaled).unwrap();
        let p_before = association_probability(&tiers).unwrap();
        let p_after = association_probability(&scaled).unwrap();
        for i in 0..tiers.len() {
            prop_assert!(rel(after[i], before[i] / c) < 1e-12);
            prop_assert!((p_after[i] - p_before[i]).abs() < 1e-12);
            let q_before = mean_area_integral(&tiers, i).unwrap().value;
            let q_after = mean_area_integral(&scaled, i).unwrap().value;
            prop_assert!(rel(q_after, q_before / c) < 1e-8);
        }
    }

    #[test]
    fn association_probabilities_sum_to_one(tiers in mixed_exponent_tiers()) {
        let total: f64 = association_probability(&tiers).unwrap().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-8, "{total}");
    }

    #[test]
    fn closed_form_partition_is_exact(tiers in equal_exponent_tiers()) {
        let areas = mean_area_closed_form(&tiers).unwrap();
        let total: f64 = tiers.iter().zip(&areas).map(|(t, m)| t.density * m).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn area_grows_with_power_and_sigma(tiers in mixed_exponent_tiers(), i in 0usize..3, bump in 0.5f64..3.0) {
        let i = i % tiers.len();
        let base = mean_area_integral(&tiers, i).unwrap().value;

        let mut louder = tiers.clone();
        louder[i].power *= 1.0 + bump;
        prop_assert!(mean_area_integral(&louder, i).unwrap().value >= base * (1.0 - 1e-8));

        if let FadingModel::LogNormal { sigma } = tiers[i].fading {
            let mut wider = tiers.clone();
            wider[i].fading = FadingModel::LogNormal { sigma: sigma + bump };
            prop_assert!(mean_area_integral(&wider, i).unwrap().value >= base * (1.0 - 1e-8));
        }
    }

    #[test]
    fn lognormal_moment_monotone_in_sigma(s in 0.0f64..4.0, ds in 0.01f64..2.0, delta in 0.05f64..1.0) {
        let lo = fractional_moment(&FadingModel::LogNormal { sigma: s }, delta).unwrap();
        let hi = fractional_moment(&FadingModel::LogNormal { sigma: s + ds }, delta).unwrap();
        prop_assert!(hi > lo);
    }
}

fn random_network(tiers: &[TierConfig], side: f64, res: usize, seed: u64) -> (Window, StreamKey, PointPattern) {
    let window = Window::new(side, res).unwrap();
    let key = StreamKey::new(seed, 0);
    let pattern = sample_network(tiers, &window, key).unwrap();
    (window, key, pattern)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn max_sir_and_max_power_pick_the_same_ap(seed in any::<u64>(), sigma in 0.0f64..4.0, a2 in 2.5f64..5.0) {
        let tiers = [
            TierConfig::new(0.5, 200.0, 3.5, FadingModel::LogNormal { sigma: 2.0 }),
            TierConfig::new(2.0, 2.0, a2, FadingModel::LogNormal { sigma }),
        ];
        let (window, key, pattern) = random_network(&tiers, 8.0, 48, seed);
        for mode in [GainFieldMode::PerAp, GainFieldMode::PerEvaluationPoint] {
            let p = compute_association_map(&pattern, &tiers, AssociationStrategy::MaxPower, mode, &window, key).unwrap();
            let s = compute_association_map(&pattern, &tiers, AssociationStrategy::MaxSir, mode, &window, key).unwrap();
            prop_assert_eq!(p.grid, s.grid);
        }
    }

    #[test]
    fn sir_scores_match_the_linear_definition(seed in any::<u64>(), x in 0.0f64..8.0, y in 0.0f64..8.0) {
        let tiers = [
            TierConfig::new(0.3, 20.0, 4.0, FadingModel::LogNormal { sigma: 1.0 }),
            TierConfig::new(0.6, 1.0, 3.0, FadingModel::Exponential { scale: 1.0 }),
        ];
        let (window, _, pattern) = random_network(&tiers, 8.0, 8, seed);
        let at = Point::new(x, y);
        let rx: Vec<f64> = scores(at, &pattern, &tiers, &window, AssociationStrategy::MaxPower, &ApGains(&pattern))
            .unwrap()
            .into_iter()
            .map(Score::linear)
            .collect();
        let sir = scores(at, &pattern, &tiers, &window, AssociationStrategy::MaxSir, &ApGains(&pattern)).unwrap();
        let total: f64 = rx.iter().sum();
        for (n, s) in sir.iter().enumerate() {
            let expected = rx[n] / (total - rx[n]);
            prop_assert!(rel(s.linear(), expected) < 1e-9, "AP {n}: {} vs {expected}", s.linear());
        }
    }

    #[test]
    fn translation_keeps_the_serving_ap(seed in any::<u64>(), sx in 0.0f64..10.0, sy in 0.0f64..10.0,
                                        x in 0.0f64..10.0, y in 0.0f64..10.0) {
        let tiers = [
            TierConfig::new(0.4, 50.0, 4.0, FadingModel::LogNormal { sigma: 2.0 }),
            TierConfig::new(1.0, 1.0, 3.2, FadingModel::LogNormal { sigma: 1.0 }),
        ];
        let (window, _, pattern) = random_network(&tiers, 10.0, 8, seed);
        let shift = Point::new(sx, sy);
        let moved = pattern.translated(&window, shift);
        let at = Point::new(x, y);
        for strategy in AssociationStrategy::ALL {
            let before = serving_ap(at, &pattern, &tiers, &window, strategy, &ApGains(&pattern)).unwrap();
            let after = serving_ap(window.translate(at, shift), &moved, &tiers, &window, strategy, &ApGains(&moved)).unwrap();
            prop_assert_eq!(before, after);
        }
    }

    #[test]
    fn single_tier_max_power_is_voronoi(seed in any::<u64>(), density in 0.2f64..3.0) {
        // unit power keeps the score an exact multiple of the log distance
        let tiers = [TierConfig::new(density, 1.0, 4.0, FadingModel::Deterministic)];
        let (window, key, pattern) = random_network(&tiers, 6.0, 60, seed);
        let p = compute_association_map(&pattern, &tiers, AssociationStrategy::MaxPower, GainFieldMode::PerAp, &window, key).unwrap();
        let n = compute_association_map(&pattern, &tiers, AssociationStrategy::Nearest, GainFieldMode::PerAp, &window, key).unwrap();
        prop_assert_eq!(p.grid, n.grid);
    }

    #[test]
    fn maps_match_the_oracle(seed in any::<u64>(), sigma in 0.0f64..3.0) {
        let tiers = [
            TierConfig::new(0.3, 100.0, 4.0, FadingModel::LogNormal { sigma }),
            TierConfig::new(1.0, 1.0, 3.0, FadingModel::Exponential { scale: 1.0 }),
        ];
        let (window, key, pattern) = random_network(&tiers, 6.0, 40, seed);
        for strategy in AssociationStrategy::ALL {
            for mode in [GainFieldMode::PerAp, GainFieldMode::PerEvaluationPoint] {
                let fast = compute_association_map(&pattern, &tiers, strategy, mode, &window, key).unwrap();
                let slow = brute_force_map(&pattern, &tiers, strategy, mode, &window, key).unwrap();
                prop_assert_eq!(&fast.grid, &slow.grid, "{:?} {:?}", strategy, mode);
            }
        }
    }

    #[test]
    fn pixel_counts_partition_the_grid(seed in any::<u64>(), res in 2usize..70) {
        let tiers = [
            TierConfig::new(0.5, 10.0, 4.0, FadingModel::LogNormal { sigma: 1.0 }),
            TierConfig::new(1.5, 1.0, 4.0, FadingModel::Deterministic),
        ];
        let (window, key, pattern) = random_network(&tiers, 5.0, res, seed);
        let map = compute_association_map(&pattern, &tiers, AssociationStrategy::MaxPower, GainFieldMode::PerAp, &window, key).unwrap();
        prop_assert_eq!(map.cell_pixel_counts.iter().sum::<u64>(), (res * res) as u64);
        let areas = tessellation::cell_areas(&map, &pattern).unwrap();
        prop_assert_eq!(areas.iter().filter(|c| c.contains_origin).count(), 1);
    }
}
