mod common;

use cdkit::constructors::{normal_mean_cd, normal_mean_cd_from_summary, normal_variance_cd_from_summary};
use cdkit::inference::{
    cd_mean, cd_median, cd_mode, classify, iut_support, point_weak_support, strong_support,
    support_report, weak_support,
};
use cdkit::{draw, ConfidenceDistribution, DataSample, DistKind, LocationScaleCdf, NullRegion, RngStream};
use proptest::prelude::*;

fn normal_cd(loc: f64, scale: f64) -> ConfidenceDistribution {
    LocationScaleCdf::new(DistKind::standard_normal(), loc, scale)
        .unwrap()
        .into_cd()
        .unwrap()
}

/// Normal-mean CD with `xbar = 1`, `sigma = 1`, `n = 4`.
fn example_cd() -> ConfidenceDistribution {
    normal_mean_cd_from_summary(1.0, 1.0, 4, true).unwrap()
}

#[test]
fn median_examples() {
    assert_eq!(cd_median(&normal_cd(2.0, 0.3)), 2.0);
    let v = normal_variance_cd_from_summary(1.0, 5).unwrap();
    let chi_med = common::bisect(|x| 1.0 - common::chi2_even_sf(4, x), 0.5, 0.0, 20.0);
    assert!((cd_median(&v) - 4.0 / chi_med).abs() < 1e-9);
    assert!((cd_median(&v) - 1.1916).abs() < 1e-4);
}

#[test]
fn median_is_median_unbiased() {
    let m = 5000u64;
    let law = DistKind::normal(-2.0, 3.0).unwrap();
    let below = (0..m)
        .filter(|&r| {
            let d = DataSample::new(draw(&RngStream::new(404, r), &law, 15).unwrap()).unwrap();
            cd_median(&normal_mean_cd(&d, None).unwrap()) <= -2.0
        })
        .count();
    let f = below as f64 / m as f64;
    assert!((f - 0.5).abs() <= 3.0 * (0.25 / m as f64).sqrt(), "{f}");
}

#[test]
fn mean_examples() {
    assert!((cd_mean(&normal_cd(-7.5, 2.0)).unwrap() + 7.5).abs() < 1e-6);
    let t = normal_mean_cd_from_summary(3.0, 1.0, 6, false).unwrap();
    assert!((cd_mean(&t).unwrap() - 3.0).abs() < 1e-6);
    let v = normal_variance_cd_from_summary(1.0, 5).unwrap();
    assert!((cd_mean(&v).unwrap() - 2.0).abs() < 1e-3);
    let w = ConfidenceDistribution::weighted_sample(vec![1.0, 3.0], vec![0.25, 0.75]).unwrap();
    assert_eq!(cd_mean(&w).unwrap(), 2.5);
    // Cauchy-tailed CD has no mean
    let c = normal_mean_cd_from_summary(0.0, 1.0, 2, false).unwrap();
    assert!(cd_mean(&c).is_err());
}

#[test]
fn mode_examples() {
    assert!((cd_mode(&normal_cd(4.2, 0.7)).unwrap() - 4.2).abs() < 1e-6);
    // density of 4 / chi2_4 is proportional to x^-3 exp(-2 / x)
    let v = normal_variance_cd_from_summary(1.0, 5).unwrap();
    let oracle = common::bisect(|x| -(-3.0 / x + 2.0 / (x * x)), 0.0, 0.1, 5.0);
    assert!((oracle - 2.0 / 3.0).abs() < 1e-9);
    assert!((cd_mode(&v).unwrap() - oracle).abs() < 1e-4);
    let g = ConfidenceDistribution::grid(vec![0.0, 1.0, 1.5, 4.0], vec![0.0, 0.2, 0.8, 1.0]).unwrap();
    assert!((cd_mode(&g).unwrap() - 1.25).abs() < 1e-12);
    let w = ConfidenceDistribution::point_mass(0.0).unwrap();
    assert!(cd_mode(&w).is_err());
}

#[test]
fn strong_support_examples() {
    let h = example_cd();
    assert!((strong_support(&h, &NullRegion::half_line_below(cd_median(&h))) - 0.5).abs() < 1e-12);
    let p = strong_support(&h, &NullRegion::half_line_below(1.98));
    assert!((p - common::normal_cdf(1.96)).abs() < 1e-12);
    let all = NullRegion::intervals(vec![(f64::NEG_INFINITY, f64::INFINITY)]).unwrap();
    assert_eq!(strong_support(&h, &all), 1.0);
}

#[test]
fn weak_support_examples() {
    let h = example_cd();
    assert_eq!(weak_support(&h, &NullRegion::points(vec![1.0]).unwrap()), 1.0);
    let p = weak_support(&h, &NullRegion::points(vec![1.98]).unwrap());
    assert!((p - 2.0 * (1.0 - common::normal_cdf(1.96))).abs() < 1e-12);
    assert!((p - 0.05).abs() < 1e-4);
    assert_eq!(weak_support(&h, &NullRegion::intervals(vec![(0.5, 3.0)]).unwrap()), 1.0);
    // nearest endpoint when the median is outside
    let q = weak_support(&h, &NullRegion::intervals(vec![(-5.0, 0.2), (2.3, 9.0)]).unwrap());
    let want = (2.0 * common::normal_cdf(-1.6)).max(2.0 * (1.0 - common::normal_cdf(2.6)));
    assert!((q - want).abs() < 1e-12);
}

#[test]
fn iut_examples() {
    let h = example_cd();
    let one = NullRegion::intervals(vec![(0.1, 1.4)]).unwrap();
    assert_eq!(iut_support(&h, &one).unwrap(), strong_support(&h, &one));
    let be = normal_cd(1.0, 0.1);
    let c = NullRegion::intervals(vec![(f64::NEG_INFINITY, 0.8), (1.25, f64::INFINITY)]).unwrap();
    let p = iut_support(&be, &c).unwrap();
    let want = common::normal_cdf(-2.0).max(common::normal_cdf(-2.5));
    assert!((p - want).abs() < 1e-12);
    assert!((p - 0.02275).abs() < 1e-5);
}

#[test]
fn classify_examples() {
    let h = normal_cd(0.0, 1.0);
    let halves = [NullRegion::half_line_below(0.0), NullRegion::half_line_above(0.0)];
    assert_eq!(classify(&h, &halves).unwrap(), 0);
    let q3 = h.quantile(0.3).unwrap();
    let split = [NullRegion::half_line_below(q3), NullRegion::half_line_above(q3)];
    assert_eq!(classify(&h, &split).unwrap(), 1);
    let g = ConfidenceDistribution::grid(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 0.2, 0.7, 1.0]).unwrap();
    let three = [
        NullRegion::half_line_below(1.0),
        NullRegion::intervals(vec![(1.0, 2.0)]).unwrap(),
        NullRegion::half_line_above(2.0),
    ];
    assert_eq!(classify(&g, &three).unwrap(), 1);
    let gap = [NullRegion::half_line_below(0.5), NullRegion::half_line_above(1.0)];
    assert!(classify(&g, &gap).is_err());
}

#[test]
fn point_weak_support_is_two_sided_centrality() {
    for &(loc, x) in &[(0.0, 0.3), (2.0, -1.0), (-1.0, 4.0)] {
        let h = normal_cd(loc, 1.3);
        let f = h.eval(x);
        let c = 2.0 * f.min(1.0 - f);
        assert_eq!(point_weak_support(&h, x), c);
        assert_eq!(weak_support(&h, &NullRegion::points(vec![x]).unwrap()), c);
    }
}

fn arb_cd() -> impl Strategy<Value = ConfidenceDistribution> {
    prop_oneof![
        (-3.0f64..3.0, 0.1f64..3.0).prop_map(|(m, s)| normal_cd(m, s)),
        (-3.0f64..3.0, 0.1f64..3.0, 2usize..30)
            .prop_map(|(m, s, n)| normal_mean_cd_from_summary(m, s, n, false).unwrap()),
        prop::collection::vec((-4.0f64..4.0, 0.01f64..1.0), 1..12).prop_map(|v| {
            let total: f64 = v.iter().map(|p| p.1).sum();
            let (a, w): (Vec<f64>, Vec<f64>) = v.iter().map(|&(a, w)| (a, w / total)).unzip();
            ConfidenceDistribution::weighted_sample(a, w).unwrap()
        }),
    ]
}

fn arb_region() -> impl Strategy<Value = NullRegion> {
    prop_oneof![
        prop::collection::vec(-5.0f64..5.0, 1..8).prop_filter_map("distinct", |mut p| {
            p.sort_by(f64::total_cmp);
            p.dedup();
            NullRegion::points(p).ok()
        }),
        (prop::collection::vec(-5.0f64..5.0, 2..10), any::<bool>(), any::<bool>()).prop_filter_map(
            "disjoint",
            |(mut e, open_lo, open_hi)| {
                e.sort_by(f64::total_cmp);
                e.dedup();
                if e.len() % 2 == 1 {
                    e.pop();
                }
                if e.len() < 2 {
                    return None;
                }
                let mut iv: Vec<(f64, f64)> = e.chunks(2).map(|c| (c[0], c[1])).collect();
                if open_lo {
                    iv[0].0 = f64::NEG_INFINITY;
                }
                if open_hi {
                    iv.last_mut().unwrap().1 = f64::INFINITY;
                }
                NullRegion::intervals(iv).ok()
            }
        ),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn strong_never_exceeds_weak(h in arb_cd(), c in arb_region()) {
        let r = support_report(&h, &c);
        prop_assert!(0.0 <= r.p_s && r.p_s <= r.p_w + 1e-12 && r.p_w <= 1.0, "{r:?}");
        if let (Some(star), NullRegion::Intervals(iv)) = (r.p_s_star, &c) {
            prop_assert!(star <= r.p_s + 1e-12);
            prop_assert!(star >= r.p_s / iv.len() as f64 - 1e-12);
        }
    }
}

fn binomial_band(p: f64, m: u64) -> f64 {
    3.0 * (p * (1.0 - p) / m as f64).sqrt()
}

#[test]
fn strong_support_of_half_line_is_uniform_at_boundary() {
    let (m, n, theta0) = (5000u64, 10, 0.7);
    let law = DistKind::normal(theta0, 1.0).unwrap();
    let c = NullRegion::half_line_below(theta0);
    let ps: Vec<f64> = (0..m)
        .map(|r| {
            let d = DataSample::new(draw(&RngStream::new(505, r), &law, n).unwrap()).unwrap();
            strong_support(&normal_mean_cd(&d, Some(1.0)).unwrap(), &c)
        })
        .collect();
    for &a in &[0.05, 0.5] {
        let f = ps.iter().filter(|&&p| p <= a).count() as f64 / m as f64;
        assert!((f - a).abs() <= binomial_band(a, m), "alpha {a}: {f}");
    }
}

#[test]
fn union_of_intervals_has_asymptotic_size() {
    let (m, n) = (5000u64, 200);
    let c = NullRegion::intervals(vec![(f64::NEG_INFINITY, 0.0), (1.0, 2.0)]).unwrap();
    let mut worst: f64 = 0.0;
    for (k, &theta) in [0.0, 1.0, 1.5, 2.0].iter().enumerate() {
        let law = DistKind::normal(theta, 1.0).unwrap();
        let rejected = (0..m)
            .filter(|&r| {
                let d = DataSample::new(draw(&RngStream::new(606 + k as u64, r), &law, n).unwrap()).unwrap();
                strong_support(&normal_mean_cd(&d, Some(1.0)).unwrap(), &c) <= 0.05
            })
            .count();
        worst = worst.max(rejected as f64 / m as f64);
    }
    assert!((0.03..=0.07).contains(&worst), "{worst}");
}

#[test]
fn weak_support_of_points_is_uniform() {
    let (m, n) = (2000u64, 200);
    let law = DistKind::normal(0.0, 1.0).unwrap();
    let c = NullRegion::points(vec![0.0, 1.0]).unwrap();
    let pw: Vec<f64> = (0..m)
        .map(|r| {
            let d = DataSample::new(draw(&RngStream::new(707, r), &law, n).unwrap()).unwrap();
            weak_support(&normal_mean_cd(&d, None).unwrap(), &c)
        })
        .collect();
    let p = common::ks_uniform_p(&pw);
    assert!(p > 0.001, "p = {p}");
}
