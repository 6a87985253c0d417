//! Distributional properties checked by two-sample and goodness-of-fit tests.

use hetnet_cells::analytics::{association_probability, mean_area_closed_form};
use hetnet_cells::config::dbm_to_watts;
use hetnet_cells::pointprocess::{sample_network, sample_superposition};
use hetnet_cells::rng::Purpose;
use hetnet_cells::stats::{ks_two_sample, mean_estimate, ExperimentPlan};
use hetnet_cells::tessellation::{cell_areas, compute_association_map};
use hetnet_cells::*;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, DiscreteCDF, Poisson};

const ALPHA: f64 = 0.01;

fn count_in_quadrant(pattern: &PointPattern, window: &Window) -> f64 {
    let half = 0.5 * window.side_length;
    pattern.points.iter().filter(|p| p.x < half && p.y < half).count() as f64
}

/// Mean nearest-neighbor distance of one realization (distances within a
/// realization are dependent, so only one summary per replication enters a test).
fn mean_nearest_neighbor_distance(pattern: &PointPattern, window: &Window) -> f64 {
    let d: Vec<f64> = pattern
        .points
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            pattern
                .points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &q)| window.dist2(p, q))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect();
    d.iter().sum::<f64>() / d.len() as f64
}

fn close_pairs(pattern: &PointPattern, window: &Window, radius: f64) -> f64 {
    let r2 = radius * radius;
    let pts = &pattern.points;
    let mut n = 0usize;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            n += usize::from(window.dist2(pts[i], pts[j]) < r2);
        }
    }
    n as f64
}

fn two_tiers() -> Vec<TierConfig> {
    vec![
        TierConfig::new(0.6, 10.0, 4.0, FadingModel::LogNormal { sigma: 1.0 }),
        TierConfig::new(1.4, 1.0, 4.0, FadingModel::Deterministic),
    ]
}

#[test]
fn shifted_configurations_look_the_same() {
    let tiers = two_tiers();
    let window = Window::new(8.0, 8).unwrap();
    let (mut counts, mut shifted_counts) = (Vec::new(), Vec::new());
    let (mut nn, mut shifted_nn) = (Vec::new(), Vec::new());
    let (mut tier1, mut shifted_tier1) = (Vec::new(), Vec::new());
    for r in 0..150u64 {
        let a = sample_network(&tiers, &window, StreamKey::new(21, r)).unwrap();
        counts.push(count_in_quadrant(&a, &window));
        nn.push(mean_nearest_neighbor_distance(&a, &window));
        tier1.push(a.tier_counts(2)[0] as f64);

        let key = StreamKey::new(21, 1000 + r);
        let mut rng = key.stream(Purpose::Shift, 0);
        let shift = Point::new(rng.random::<f64>() * 8.0, rng.random::<f64>() * 8.0);
        let b = sample_network(&tiers, &window, key).unwrap().translated(&window, shift);
        shifted_counts.push(count_in_quadrant(&b, &window));
        shifted_nn.push(mean_nearest_neighbor_distance(&b, &window));
        shifted_tier1.push(b.tier_counts(2)[0] as f64);
    }
    for (name, x, y) in [
        ("quadrant count", &counts, &shifted_counts),
        ("mean nearest-neighbor distance", &nn, &shifted_nn),
        ("tier-1 count", &tier1, &shifted_tier1),
    ] {
        let (d, p) = ks_two_sample(x, y);
        assert!(p >= ALPHA, "{name}: D = {d}, p = {p}");
    }
}

#[test]
fn superposition_matches_thinning() {
    let tiers = two_tiers();
    let window = Window::new(6.0, 6).unwrap();
    let mut stats = [
        [Vec::new(), Vec::new()],
        [Vec::new(), Vec::new()],
        [Vec::new(), Vec::new()],
    ];
    for r in 0..300u64 {
        let key = StreamKey::new(5, r);
        for (slot, pattern) in [
            sample_network(&tiers, &window, key).unwrap(),
            sample_superposition(&tiers, &window, key).unwrap(),
        ]
        .iter()
        .enumerate()
        {
            let c = pattern.tier_counts(2);
            stats[0][slot].push(c[0] as f64);
            stats[1][slot].push(c[1] as f64);
            stats[2][slot].push(close_pairs(pattern, &window, 0.5));
        }
    }
    for (name, [x, y]) in ["tier-1 count", "tier-2 count", "pairs within 0.5"].iter().zip(&stats) {
        let (d, p) = ks_two_sample(x, y);
        assert!(p >= ALPHA, "{name}: D = {d}, p = {p}");
    }
}

#[test]
fn thinned_counts_are_poisson() {
    // p = (0.3, 0.7) of total density 2 on a 5 x 5 window: means 15 and 35
    let tiers = vec![
        TierConfig::new(0.6, 1.0, 4.0, FadingModel::Deterministic),
        TierConfig::new(1.4, 1.0, 4.0, FadingModel::Deterministic),
    ];
    let window = Window::new(5.0, 5).unwrap();
    let reps = 2000u64;
    let counts: Vec<Vec<usize>> = (0..reps)
        .map(|r| {
            sample_network(&tiers, &window, StreamKey::new(17, r))
                .unwrap()
                .tier_counts(2)
        })
        .collect();
    for (k, mean) in [(0usize, 15.0), (1, 35.0)] {
        let law = Poisson::new(mean).unwrap();
        // bins of expected size >= 40 at both tails
        let lo = (0..).find(|&c| law.cdf(c) * reps as f64 >= 40.0).unwrap();
        let hi = (lo..).find(|&c| (law.sf(c) * reps as f64) < 40.0).unwrap();
        let mut observed = vec![0.0; (hi - lo + 1) as usize];
        for c in &counts {
            let v = (c[k] as u64).clamp(lo, hi);
            observed[(v - lo) as usize] += 1.0;
        }
        let expected: Vec<f64> = (lo..=hi)
            .map(|c| {
                let p = if c == lo {
                    law.cdf(lo)
                } else if c == hi {
                    law.sf(hi - 1)
                } else {
                    law.pmf(c)
                };
                p * reps as f64
            })
            .collect();
        let chi2: f64 = observed.iter().zip(&expected).map(|(o, e)| (o - e).powi(2) / e).sum();
        let dof = (observed.len() - 1) as f64;
        let p = 1.0 - ChiSquared::new(dof).unwrap().cdf(chi2);
        assert!(p >= ALPHA, "tier {}: chi2 = {chi2} on {dof} dof, p = {p}", k + 1);
    }
}

#[test]
fn cell_areas_are_marks_of_the_translated_configuration() {
    let tiers = two_tiers();
    let window = Window::new(8.0, 96).unwrap();
    let (mut before, mut after) = (Vec::new(), Vec::new());
    for r in 0..40u64 {
        let key = StreamKey::new(8, r);
        let pattern = sample_network(&tiers, &window, key).unwrap();
        let mut rng = key.stream(Purpose::Shift, 0);
        let shift = Point::new(rng.random::<f64>() * 8.0, rng.random::<f64>() * 8.0);
        let moved = pattern.translated(&window, shift);
        for (p, out) in [(&pattern, &mut before), (&moved, &mut after)] {
            let map = compute_association_map(
                p,
                &tiers,
                AssociationStrategy::MaxPower,
                GainFieldMode::PerAp,
                &window,
                key,
            )
            .unwrap();
            out.extend(cell_areas(&map, p).unwrap().iter().map(|c| c.area));
        }
    }
    let (d, p) = ks_two_sample(&before, &after);
    assert!(p >= ALPHA, "D = {d}, p = {p}");
    // same cells, so per-AP areas differ only by pixel quantization
    let pixel = window.pixel_area();
    let total_shift: f64 = before.iter().zip(&after).map(|(a, b)| (a - b).abs()).sum();
    assert!(total_shift / (before.len() as f64) < 20.0 * pixel);
}

#[test]
fn doubling_resolution_stays_within_the_interval() {
    let tiers = vec![
        TierConfig::new(1.0, dbm_to_watts(53.0), 4.0, FadingModel::LogNormal { sigma: 1.0 }),
        TierConfig::new(4.0, dbm_to_watts(33.0), 4.0, FadingModel::LogNormal { sigma: 1.0 }),
    ];
    let run = |res| {
        ExperimentPlan::new(tiers.clone(), Window::new(10.0, res).unwrap(), 30, 4)
            .run()
            .unwrap()
            .statistics
    };
    let coarse = run(100);
    let fine = run(200);
    for (c, f) in coarse.tiers.iter().zip(&fine.tiers) {
        let diff = (c.typical_mean_area.mean - f.typical_mean_area.mean).abs();
        assert!(
            diff < f.typical_mean_area.half_width,
            "tier {}: {diff} vs half-width {}",
            f.tier + 1,
            f.typical_mean_area.half_width
        );
    }
}

#[test]
fn deterministic_two_tier_fraction_matches_association_probability() {
    // 53 dBm macro and 33 dBm pico tier, a = 4, no fading
    let tiers = vec![
        TierConfig::new(1.0, dbm_to_watts(53.0), 4.0, FadingModel::Deterministic),
        TierConfig::new(5.0, dbm_to_watts(33.0), 4.0, FadingModel::Deterministic),
    ];
    let exp = ExperimentPlan::new(tiers.clone(), Window::new(10.0, 200).unwrap(), 50, 12)
        .run()
        .unwrap();
    let expected = association_probability(&tiers).unwrap();
    let got = exp.statistics.tiers[1].empirical_assoc_prob;
    assert!(got.contains(expected[1]), "{got:?} vs {}", expected[1]);
}

#[test]
fn identical_tiers_have_equal_mean_areas() {
    let t = TierConfig::new(0.5, 3.0, 3.5, FadingModel::LogNormal { sigma: 1.5 });
    let exp = ExperimentPlan::new(vec![t, t], Window::new(12.0, 120).unwrap(), 30, 2)
        .run()
        .unwrap();
    let [a, b] = [&exp.statistics.tiers[0], &exp.statistics.tiers[1]];
    assert!(a.typical_mean_area.overlaps(&b.typical_mean_area));
    let exact = mean_area_closed_form(&[t, t]).unwrap();
    assert!((exact[0] - 1.0).abs() < 1e-12);
}

#[test]
fn voronoi_zero_cell_is_larger_than_typical() {
    let tiers = vec![TierConfig::new(1.0, 1.0, 4.0, FadingModel::Deterministic)];
    let exp = ExperimentPlan::new(tiers, Window::new(10.0, 100).unwrap(), 500, 31)
        .with_strategy(AssociationStrategy::Nearest)
        .run()
        .unwrap();
    let t = &exp.statistics.tiers[0];
    let zero = mean_estimate(&exp.zero_cell_areas(0));
    let gap = zero.mean - t.typical_mean_area.mean;
    let se = (zero.standard_error.powi(2) + t.typical_mean_area.standard_error.powi(2)).sqrt();
    assert!(gap > 5.0 * se, "gap {gap}, se {se}");
}

#[test]
fn zero_cell_is_the_serving_cell_of_its_point() {
    let tiers = two_tiers();
    let window = Window::new(8.0, 64).unwrap();
    let key = StreamKey::new(1, 0);
    let pattern = sample_network(&tiers, &window, key).unwrap();
    let map = compute_association_map(
        &pattern,
        &tiers,
        AssociationStrategy::MaxPower,
        GainFieldMode::PerAp,
        &window,
        key,
    )
    .unwrap();
    let at = window.pixel_center(17, 40);
    let zero = tessellation::zero_cell(&map, &pattern, at).unwrap();
    let direct = association::serving_ap(
        at,
        &pattern,
        &tiers,
        &window,
        AssociationStrategy::MaxPower,
        &association::ApGains(&pattern),
    )
    .unwrap();
    assert_eq!(zero.ap_index, direct);
}
