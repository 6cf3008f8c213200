mod common;

use cdkit::constructors::{
    exponential_rate_cd, fisher_z_corr_cd_from_summary, normal_mean_cd_from_summary,
    normal_variance_cd_from_summary,
};
use cdkit::probkernel::dkw_epsilon;
use cdkit::{
    cd_mean, cd_median, transform_cd, CdRandomVariable, ConfidenceDistribution, DataSample,
    Direction, DistKind, LocationScaleCdf, RngStream,
};
use proptest::prelude::*;

fn normal_cd(loc: f64, scale: f64) -> ConfidenceDistribution {
    LocationScaleCdf::new(DistKind::standard_normal(), loc, scale)
        .unwrap()
        .into_cd()
        .unwrap()
}

fn chi2_4_median() -> f64 {
    common::bisect(|x| 1.0 - common::chi2_even_sf(4, x), 0.5, 0.0, 20.0)
}

#[test]
fn eval_examples() {
    assert_eq!(normal_cd(0.0, 1.0).eval(0.0), 0.5);
    let g = ConfidenceDistribution::grid(vec![0.0, 1.0, 2.0], vec![0.0, 0.4, 1.0]).unwrap();
    assert!((g.eval(0.5) - 0.2).abs() < 1e-15);
    let w = ConfidenceDistribution::weighted_sample(vec![1.0, 2.0], vec![0.3, 0.7]).unwrap();
    assert_eq!(w.eval(1.5), 0.3);
}

#[test]
fn quantile_examples() {
    assert_eq!(normal_cd(3.0, 1.0).quantile(0.5).unwrap(), 3.0);
    let v = normal_variance_cd_from_summary(1.0, 5).unwrap();
    let oracle = 4.0 / chi2_4_median();
    assert!((v.quantile(0.5).unwrap() - oracle).abs() < 1e-9);
    assert!((oracle - 1.1916).abs() < 1e-4);
    let w = ConfidenceDistribution::weighted_sample(vec![1.0, 2.0], vec![0.3, 0.7]).unwrap();
    assert_eq!(w.quantile(0.5).unwrap(), 2.0);
    assert!(w.quantile(1.0).is_err());
}

#[test]
fn density_examples() {
    let d = normal_cd(0.0, 1.0).density(0.0).unwrap();
    assert!((d - common::normal_pdf(0.0)).abs() < 1e-10);
    assert!((d - 0.39894).abs() < 1e-5);
    let g = ConfidenceDistribution::grid(vec![0.0, 2.0, 3.0, 5.0], vec![0.0, 0.5, 0.5, 1.0]).unwrap();
    assert!((g.density(1.0).unwrap() - 0.25).abs() < 1e-12);
    assert_eq!(g.density(2.5).unwrap(), 0.0);
    let w = ConfidenceDistribution::point_mass(1.0).unwrap();
    assert!(w.density(1.0).is_err());
}

#[test]
fn sampling_examples() {
    let g = ConfidenceDistribution::grid(vec![7.0], vec![1.0]).unwrap();
    let mut rv = CdRandomVariable::new(g, RngStream::new(1, 0));
    assert!(rv.sample(0).is_empty());
    assert!(rv.sample(50).iter().all(|&x| x == 7.0));

    let m = 100_000;
    let mut rv = CdRandomVariable::new(normal_cd(2.0, 0.5), RngStream::new(1, 1));
    let xs = rv.sample(m);
    assert!((common::mean(&xs) - 2.0).abs() < 4.0 * 0.5 / (m as f64).sqrt());
}

#[test]
fn sampling_within_dkw_band() {
    let m = 100_000;
    let eps = dkw_epsilon(m, 0.001);
    let phi = common::tabulated_cdf(common::normal_pdf, -14.0, 14.0, 200_000);
    let xs = CdRandomVariable::new(normal_cd(-1.0, 3.0), RngStream::new(5, 0)).sample(m);
    assert!(common::ks_distance(&xs, |x| phi((x + 1.0) / 3.0)) < eps);

    let v = normal_variance_cd_from_summary(2.0, 12).unwrap();
    let xs = CdRandomVariable::new(v.clone(), RngStream::new(5, 1)).sample(m);
    // P(xi <= x) = P(chi2_11 >= 22 / x)
    assert!(common::ks_distance(&xs, |x| v.eval(x)) < eps);

    let g = ConfidenceDistribution::grid(vec![0.0, 1.0, 4.0], vec![0.0, 0.8, 1.0]).unwrap();
    let xs = CdRandomVariable::new(g, RngStream::new(5, 2)).sample(m);
    let oracle = |x: f64| {
        if x <= 0.0 {
            0.0
        } else if x <= 1.0 {
            0.8 * x
        } else if x <= 4.0 {
            0.8 + 0.2 * (x - 1.0) / 3.0
        } else {
            1.0
        }
    };
    assert!(common::ks_distance(&xs, oracle) < eps);
}

#[test]
fn transform_examples() {
    let h = normal_cd(0.3, 1.2);
    let id = transform_cd(&h, |x| x, None, Direction::Increasing).unwrap();
    for i in 0..50 {
        let x = -4.0 + 0.17 * i as f64;
        assert!((id.eval(x) - h.eval(x)).abs() < 1e-12);
    }

    let v = normal_variance_cd_from_summary(1.0, 5).unwrap();
    let sd = transform_cd(&v, f64::sqrt, None, Direction::Increasing).unwrap();
    for &s in &[0.05, 0.3, 0.5, 0.8, 0.975] {
        let q = sd.quantile(s).unwrap();
        assert!((q - v.quantile(s).unwrap().sqrt()).abs() < 1e-8, "s = {s}");
    }
    // median through the chi-square oracle
    assert!((sd.quantile(0.5).unwrap() - (4.0 / chi2_4_median()).sqrt()).abs() < 1e-8);

    let n = normal_cd(0.0, 1.0);
    let r = transform_cd(&n, |x| -x, Some(std::sync::Arc::new(|y: f64| -y)), Direction::Decreasing)
        .unwrap();
    for &x in &[-3.0, -1.0, 0.0, 0.4, 2.2] {
        assert!((r.eval(x) - n.eval(x)).abs() < 1e-12);
    }
}

#[test]
fn decreasing_transform_of_sample_uses_left_limits() {
    let w = ConfidenceDistribution::weighted_sample(vec![1.0, 2.0, 4.0], vec![0.2, 0.3, 0.5]).unwrap();
    let t = transform_cd(&w, |x| 1.0 / x, None, Direction::Decreasing).unwrap();
    // P(1/xi <= 0.5) = P(xi >= 2) = 0.8
    assert!((t.eval(0.5) - 0.8).abs() < 1e-12);
    assert!((t.eval(0.25) - 0.5).abs() < 1e-12);
    assert!((t.eval(0.9) - 0.8).abs() < 1e-12);
}

#[test]
fn central_interval_examples() {
    let h = normal_cd(0.0, 1.0);
    let (lo, hi) = h.central_interval(0.95).unwrap();
    let z = common::bisect(common::normal_cdf, 0.975, 0.0, 5.0);
    assert!((hi - z).abs() < 1e-9 && (lo + z).abs() < 1e-9);
    assert!((hi - 1.95996).abs() < 1e-4);
    let (a, b) = h.central_interval(0.001).unwrap();
    assert!(b - a < h.quantile(0.6).unwrap() - h.quantile(0.4).unwrap());
    assert!(a <= cd_median(&h) && cd_median(&h) <= b);
    let s = normal_cd(4.0, 2.5);
    for &l in &[0.2, 0.68, 0.99] {
        let (a, b) = s.central_interval(l).unwrap();
        assert!(((a + b) / 2.0 - 4.0).abs() < 1e-9);
    }
    assert!(h.central_interval(0.0).is_err());
}

#[test]
fn inverse_chi_square_mean() {
    // (n-1) s^2 / (n-3) with n = 5
    let v = normal_variance_cd_from_summary(1.0, 5).unwrap();
    assert!((cd_mean(&v).unwrap() - 2.0).abs() < 1e-3);
}

fn constructed() -> Vec<ConfidenceDistribution> {
    let data = DataSample::new(vec![0.8, 1.9, 0.2, 3.1, 1.4, 2.2, 0.9]).unwrap();
    vec![
        normal_mean_cd_from_summary(1.0, 2.0, 10, true).unwrap(),
        normal_mean_cd_from_summary(-3.0, 0.4, 6, false).unwrap(),
        normal_variance_cd_from_summary(2.5, 8).unwrap(),
        fisher_z_corr_cd_from_summary(0.35, 40).unwrap(),
        exponential_rate_cd(&data).unwrap(),
        ConfidenceDistribution::grid(vec![0.0, 1.0, 1.5, 3.0], vec![0.0, 0.2, 0.2, 1.0]).unwrap(),
        ConfidenceDistribution::weighted_sample(vec![-1.0, 0.5, 2.0], vec![0.1, 0.6, 0.3]).unwrap(),
    ]
}

#[test]
fn monotone_on_support_grid() {
    for h in constructed() {
        let lo = h.quantile(1e-4).unwrap() - 1.0;
        let hi = h.quantile(1.0 - 1e-4).unwrap() + 1.0;
        let mut prev = -1.0;
        for i in 0..2000 {
            let x = lo + (hi - lo) * i as f64 / 1999.0;
            let f = h.eval(x);
            assert!(f >= prev - 1e-12 && (0.0..=1.0).contains(&f), "{} at {x}", h.kind_name());
            prev = f;
        }
    }
}

#[test]
fn quantile_cdf_consistency() {
    for h in constructed() {
        // largest jump for step CDFs, zero for continuous ones
        let jump = match h.repr() {
            cdkit::cd::Repr::WeightedSample(w) => w.weights().iter().cloned().fold(0.0, f64::max),
            _ => 0.0,
        };
        for i in 1..200 {
            let s = i as f64 / 200.0;
            let f = h.eval(h.quantile(s).unwrap());
            assert!(f >= s - 1e-6 && f <= s + jump + 1e-9, "{}: s {s} -> {f}", h.kind_name());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn increasing_transform_commutes_with_quantile(
        loc in -5.0f64..5.0, scale in 0.05f64..4.0, s in 0.001f64..0.999, which in 0usize..3,
    ) {
        let h = normal_cd(loc, scale);
        let (t, g): (ConfidenceDistribution, fn(f64) -> f64) = match which {
            0 => (transform_cd(&h, f64::exp, None, Direction::Increasing).unwrap(), f64::exp),
            1 => (transform_cd(&h, f64::atan, None, Direction::Increasing).unwrap(), f64::atan),
            _ => (transform_cd(&h, |x| x * x * x + x, None, Direction::Increasing).unwrap(), |x| x * x * x + x),
        };
        let q = t.quantile(s).unwrap();
        let want = g(h.quantile(s).unwrap());
        prop_assert!((q - want).abs() < 1e-8 * (1.0 + want.abs()), "{q} vs {want}");
    }

    #[test]
    fn random_grids_stay_monotone(steps in prop::collection::vec((0.01f64..2.0, 0.0f64..1.0), 2..30)) {
        let mut theta = vec![0.0];
        let mut h = vec![0.0];
        for (dx, dh) in &steps {
            theta.push(theta.last().unwrap() + dx);
            h.push(h.last().unwrap() + dh);
        }
        let top = *h.last().unwrap();
        let h: Vec<f64> = h.iter().map(|v| if top > 0.0 { v / top } else { 1.0 }).collect();
        let g = ConfidenceDistribution::grid(theta.clone(), h).unwrap();
        let end = *theta.last().unwrap();
        let mut prev = 0.0;
        for i in 0..=500 {
            let f = g.eval(-1.0 + (end + 2.0) * i as f64 / 500.0);
            prop_assert!(f >= prev - 1e-12);
            prev = f;
        }
    }
}
