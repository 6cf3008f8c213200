mod common;

use cdkit::inference::weak_support;
use cdkit::multivariate::{
    ccf_1d, depth, lcd_from_pivot, project, standard_normal_eta, transform_mcd,
};
use cdkit::simlab::{calibrate, centrality_calibrate, CentralityExperiment};
use cdkit::{
    CdGenerator, CentralityFn, Constructor, DepthSpec, DistKind, LocationScaleCdf, Model, MultiCD,
    NullRegion, RngStream,
};
use nalgebra::DMatrix;
use rand::Rng;

fn normal_cloud(center: [f64; 2], a: &DMatrix<f64>, m: usize, seed: u64) -> MultiCD {
    lcd_from_pivot(&center, a, standard_normal_eta(2), m, RngStream::new(seed, 0)).unwrap()
}

fn std_cloud(m: usize, seed: u64) -> MultiCD {
    normal_cloud([0.0, 0.0], &DMatrix::identity(2, 2), m, seed)
}

fn line(values: &[f64]) -> MultiCD {
    let pts: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
    MultiCD::from_points(1, &pts).unwrap()
}

#[test]
fn degenerate_eta_gives_theta_hat() {
    let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.0, 1.0]);
    let c = lcd_from_pivot(&[0.3, 4.0], &a, |_: &mut rand_chacha::ChaCha8Rng| vec![0.0, 0.0], 1000, RngStream::new(2, 0))
        .unwrap();
    assert_eq!(c.len(), 1000);
    assert!(c.points().all(|p| p == [0.3, 4.0]));
}

#[test]
fn pivot_cloud_has_target_covariance() {
    // A_n = sqrt(n) L^{-1} with Sigma = L L', so A_n^{-1} eta ~ N(0, Sigma / n)
    let n = 50.0f64;
    let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
    let l = sigma.clone().cholesky().unwrap().l();
    let a = l.try_inverse().unwrap() * n.sqrt();
    let c = normal_cloud([1.0, -1.0], &a, 10_000, 3);
    let cov = c.covariance();
    for i in 0..2 {
        for j in 0..2 {
            let want = sigma[(i, j)] / n;
            assert!((cov[(i, j)] / want - 1.0).abs() < 0.1, "({i},{j}) {} vs {want}", cov[(i, j)]);
        }
    }
    assert!(lcd_from_pivot(&[0.0, 0.0], &DMatrix::zeros(2, 2), standard_normal_eta(2), 1000, RngStream::new(3, 1))
        .is_err());
    assert!(lcd_from_pivot(&[0.0, 0.0], &a, standard_normal_eta(2), 999, RngStream::new(3, 1)).is_err());
}

#[test]
fn symmetric_cloud_centers_on_theta_hat() {
    let m = 10_000;
    let c = normal_cloud([2.0, -3.0], &DMatrix::identity(2, 2), m, 4);
    let mean = c.mean();
    let cov = c.covariance();
    for (i, want) in [2.0, -3.0].iter().enumerate() {
        let band = 4.0 * cov[(i, i)].sqrt() / (m as f64).sqrt();
        assert!((mean[i] - want).abs() < band, "{mean:?}");
        assert!((mean[i] - common::mean(&c.points().map(|p| p[i]).collect::<Vec<_>>())).abs() < 1e-12);
    }
}

#[test]
fn projection_matches_marginal() {
    let c = std_cloud(10_000, 5);
    let h = project(&c, &[1.0, 0.0]).unwrap();
    let atoms: Vec<f64> = c.points().map(|p| p[0]).collect();
    let phi = common::tabulated_cdf(common::normal_pdf, -14.0, 14.0, 200_000);
    let d = common::ks_distance(&atoms, &phi);
    assert!(d <= 0.02, "ks {d}");
    for &x in &[-1.5, -0.2, 0.0, 0.7, 2.1] {
        assert!((h.eval(x) - atoms.iter().filter(|&&a| a <= x).count() as f64 / 1e4).abs() < 1e-12);
    }

    let lambda = [0.4, -1.3];
    let base = project(&c, &lambda).unwrap();
    for &k in &[0.25, 3.0, 1e3] {
        let scaled = project(&c, &[k * lambda[0], k * lambda[1]]).unwrap();
        for &p in &[0.01, 0.2, 0.5, 0.9, 0.999] {
            let (a, b) = (base.quantile(p).unwrap(), scaled.quantile(p).unwrap());
            assert!((b - k * a).abs() <= 1e-12 * (1.0 + (k * a).abs()), "p {p}");
        }
    }
    assert!(project(&c, &[0.0, 0.0]).is_err());
    assert!(project(&c, &[1.0]).is_err());
}

#[test]
fn transforms() {
    let c = std_cloud(1000, 6);
    let img = transform_mcd(&c, |p| vec![2.0 * p[0] - p[1] + 1.0, 0.5 * p[1] - 3.0, p[0]]).unwrap();
    assert_eq!(img.dim(), 3);
    for (p, q) in c.points().zip(img.points()) {
        assert_eq!(q, [2.0 * p[0] - p[1] + 1.0, 0.5 * p[1] - 3.0, p[0]]);
    }
    let pm = transform_mcd(&c, |_| vec![7.0, 7.0]).unwrap();
    assert!(pm.points().all(|p| p == [7.0, 7.0]));
    let h = project(&pm, &[1.0, 1.0]).unwrap();
    assert_eq!(h.quantile(0.001).unwrap(), 14.0);
    assert_eq!(h.quantile(0.999).unwrap(), 14.0);
    assert!(transform_mcd(&c, |p| vec![1.0 / (p[0] - p[0])]).is_err());
}

#[test]
fn lcd_generators_calibrate() {
    let model = Model::BivariateNormalMean { mean: [1.0, 2.0], sd: [1.0, 1.5], rho: 0.3 };
    let proj = CdGenerator::new(model.clone(), Constructor::ProjectedLcd { lambda: [1.0, -0.5], m: 1000 }, 50, 7)
        .unwrap();
    let r = calibrate(&proj, 1000, &[0.9]).unwrap();
    assert!(r.ks_p_value > 0.001, "projected p = {}", r.ks_p_value);

    let ratio = CdGenerator::new(model, Constructor::RatioLcd { m: 1000 }, 400, 8).unwrap();
    assert_eq!(ratio.theta0().unwrap(), 0.5);
    let r = calibrate(&ratio, 1000, &[0.9]).unwrap();
    assert!(r.ks_p_value > 0.001, "ratio p = {}", r.ks_p_value);
}

#[test]
fn tukey_on_the_line_is_ecdf_min() {
    let m = 2001;
    let xs = cdkit::draw(&RngStream::new(9, 0), &DistKind::standard_normal(), m).unwrap();
    let c = line(&xs);
    let mut sorted = xs.clone();
    sorted.sort_by(f64::total_cmp);
    let med = sorted[m / 2];
    let d = depth(DepthSpec::tukey(), &c, &[med]).unwrap();
    assert!((d - 0.5).abs() <= 1.0 / m as f64, "{d}");
    let mut rng = RngStream::new(9, 1).rng();
    let mut probes: Vec<f64> = (0..500).map(|_| rng.random_range(-4.0..4.0)).collect();
    probes.extend_from_slice(&xs[..200]);
    for x in probes {
        let le = xs.iter().filter(|&&v| v <= x).count();
        let ge = xs.iter().filter(|&&v| v >= x).count();
        assert_eq!(depth(DepthSpec::tukey(), &c, &[x]).unwrap(), le.min(ge) as f64 / m as f64);
    }
}

#[test]
fn depth_examples() {
    let c = std_cloud(2000, 10);
    let center = c.mean();
    assert_eq!(depth(DepthSpec::Mahalanobis, &c, &center).unwrap(), 1.0);

    // reflect so every closed half-plane through the origin holds at least half
    let mut pts: Vec<Vec<f64>> = c.points().map(|p| p.to_vec()).collect();
    pts.extend(c.points().map(|p| vec![-p[0], -p[1]]));
    let sym = MultiCD::from_points(2, &pts).unwrap();
    let d = depth(DepthSpec::tukey(), &sym, &[0.0, 0.0]).unwrap();
    assert!((0.5..0.52).contains(&d), "{d}");
    assert_eq!(depth(DepthSpec::tukey(), &sym, &[50.0, -50.0]).unwrap(), 0.0);
    assert!(depth(DepthSpec::Tukey { directions: 179 }, &sym, &[0.0, 0.0]).is_err());
    assert!(depth(DepthSpec::Mahalanobis, &sym, &[0.0]).is_err());

    let flat = MultiCD::from_points(2, &vec![vec![1.0, 1.0]; 1000]).unwrap();
    assert!(depth(DepthSpec::Mahalanobis, &flat, &[1.0, 1.0]).is_err());
}

#[test]
fn tukey_in_the_plane_against_brute_force() {
    // brute force over a finer direction grid bounds the 360-direction value from below
    let c = std_cloud(1000, 11);
    let pts: Vec<[f64; 2]> = c.points().map(|p| [p[0], p[1]]).collect();
    let brute = |x: [f64; 2], dirs: usize| {
        (0..dirs)
            .map(|j| {
                let a = std::f64::consts::TAU * j as f64 / dirs as f64;
                let (u, v) = (a.cos(), a.sin());
                let t = u * x[0] + v * x[1];
                pts.iter().filter(|p| u * p[0] + v * p[1] >= t).count()
            })
            .min()
            .unwrap() as f64
            / pts.len() as f64
    };
    let mut rng = RngStream::new(11, 1).rng();
    for _ in 0..40 {
        let x = [rng.random_range(-2.5..2.5), rng.random_range(-2.5..2.5)];
        let d = depth(DepthSpec::tukey(), &c, &x).unwrap();
        assert_eq!(d, brute(x, 360));
        let fine = brute(x, 3600);
        assert!(fine <= d && d - fine <= std::f64::consts::TAU / 360.0, "{d} vs {fine}");
    }
}

#[test]
fn centrality_examples() {
    let m = 10_000;
    let c = std_cloud(m, 12);
    let cf = CentralityFn::new(DepthSpec::Mahalanobis, &c).unwrap();
    let deepest = c
        .points()
        .max_by(|a, b| cf.depth(a).unwrap().total_cmp(&cf.depth(b).unwrap()))
        .unwrap();
    assert_eq!(cf.centrality(deepest).unwrap(), 1.0);
    assert!(cf.centrality(&[1e3, -1e3]).unwrap() <= 1.0 / m as f64);

    // C(x) = P(chi2_2 >= |x|^2) = exp(-|x|^2 / 2)
    let r = (2.0 * 2f64.ln()).sqrt();
    for k in 0..8 {
        let a = std::f64::consts::TAU * k as f64 / 8.0;
        let x = [r * a.cos(), r * a.sin()];
        let v = cf.centrality(&x).unwrap();
        assert!((v - common::chi2_even_sf(2, r * r)).abs() <= 0.02, "{v}");
    }

    assert!(c.points().all(|p| cf.central_region_test(1.0 - 1e-9, p).unwrap()));
    assert!(!cf.central_region_test(0.5, &[3.0, 3.0]).unwrap());
    assert!(cf.central_region_test(0.0, &[0.0, 0.0]).is_err());
    assert!(cf.central_region_test(1.0, &[0.0, 0.0]).is_err());
    let v = cf.centrality(&[0.5, -0.5]).unwrap();
    assert_eq!(cf.central_region_test(0.4, &[0.5, -0.5]).unwrap(), v >= 0.6);
}

#[test]
fn centrality_of_truth_is_uniform() {
    let exp = CentralityExperiment {
        mean: [1.0, -2.0],
        sd: [1.0, 2.0],
        rho: 0.5,
        n: 30,
        m: 1000,
        depth: DepthSpec::Mahalanobis,
        reps: 2000,
        seed: 13,
        levels: vec![0.5, 0.9],
    };
    let r = centrality_calibrate(&exp).unwrap();
    assert_eq!(r.used, 2000);
    assert!(r.ks_p_value > 0.001, "p = {}", r.ks_p_value);
    assert!((common::ks_uniform_p(&r.u_values) - r.ks_p_value).abs() < 1e-8);
    for row in &r.coverage {
        assert!((row.coverage - row.level).abs() <= 0.02, "{row:?}");
    }
}

fn random_affine(rng: &mut impl Rng) -> ([f64; 4], [f64; 2]) {
    loop {
        let b = [
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        ];
        let det = b[0] * b[3] - b[1] * b[2];
        let norm = b.iter().map(|v| v * v).sum::<f64>();
        // keep the condition number moderate
        if det.abs() > 0.2 * norm {
            return (b, [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)]);
        }
    }
}

#[test]
fn depth_is_affine_invariant() {
    let m = 1000;
    let c = std_cloud(m, 14);
    let mut rng = RngStream::new(14, 1).rng();
    let res = 2.0 / (m as f64).sqrt();
    let tukey_bound = res + std::f64::consts::TAU / 360.0;
    for _ in 0..100 {
        let (b, s) = random_affine(&mut rng);
        let t = move |p: &[f64]| vec![b[0] * p[0] + b[1] * p[1] + s[0], b[2] * p[0] + b[3] * p[1] + s[1]];
        let img = transform_mcd(&c, t).unwrap();
        let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let tx = t(&x);
        let dm = depth(DepthSpec::Mahalanobis, &c, &x).unwrap() - depth(DepthSpec::Mahalanobis, &img, &tx).unwrap();
        assert!(dm.abs() <= res, "mahalanobis {dm}");
        let dt = depth(DepthSpec::tukey(), &c, &x).unwrap() - depth(DepthSpec::tukey(), &img, &tx).unwrap();
        assert!(dt.abs() <= tukey_bound, "tukey {dt}");
    }
}

#[test]
fn mahalanobis_contours_nest() {
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.0, 2.0]);
    let c = normal_cloud([0.5, 0.5], &a, 2000, 15);
    let cf = CentralityFn::new(DepthSpec::Mahalanobis, &c).unwrap();
    let center = c.mean();
    for k in 0..12 {
        let ang = std::f64::consts::TAU * k as f64 / 12.0;
        let mut prev = 1.0;
        for i in 0..200 {
            let r = 0.02 * i as f64;
            let v = cf.centrality(&[center[0] + r * ang.cos(), center[1] + r * ang.sin()]).unwrap();
            assert!(v <= prev, "ray {k} step {i}");
            prev = v;
        }
    }
}

#[test]
fn linear_and_circular_senses_agree() {
    // with a fixed A_n, the projected CD's equal-tail interval and the central
    // region of the same projected cloud cut the same probability
    let m = 10_000;
    let a = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, -1.0, 2.0]);
    let c = normal_cloud([1.0, 2.0], &a, m, 16);
    let lambda = [0.6, 0.8];
    let h = project(&c, &lambda).unwrap();
    let vals: Vec<f64> = c.points().map(|p| lambda[0] * p[0] + lambda[1] * p[1]).collect();
    let cf = CentralityFn::new(DepthSpec::Mahalanobis, &line(&vals)).unwrap();
    for &level in &[0.5, 0.9] {
        let (lo, hi) = h.central_interval(level).unwrap();
        let (q0, q1) = (h.quantile(0.0001).unwrap(), h.quantile(0.9999).unwrap());
        let inside: Vec<f64> = (0..20_001)
            .map(|i| q0 + (q1 - q0) * i as f64 / 20_000.0)
            .filter(|&x| cf.central_region_test(level, &[x]).unwrap())
            .collect();
        let (slo, shi) = (inside[0], *inside.last().unwrap());
        let tol = 0.01;
        assert!((h.eval(slo) - h.eval(lo)).abs() <= tol, "level {level}: {slo} vs {lo}");
        assert!((h.eval(shi) - h.eval(hi)).abs() <= tol, "level {level}: {shi} vs {hi}");
    }
}

#[test]
fn one_dimensional_centrality() {
    let h = LocationScaleCdf::new(DistKind::standard_normal(), 2.0, 0.5).unwrap().into_cd().unwrap();
    let med = h.quantile(0.5).unwrap();
    assert!((ccf_1d(&h, med) - 1.0).abs() < 1e-12);
    let q = h.quantile(0.975).unwrap();
    assert!((ccf_1d(&h, q) - 0.05).abs() < 1e-12);
    let w = cdkit::ConfidenceDistribution::weighted_sample(vec![0.0, 1.0, 2.0, 5.0], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    for &x in &[-1.0, 0.0, 0.5, 1.0, 2.0, 3.3, 5.0, 9.0, 1.4, 2.7] {
        for g in [&h, &w] {
            let ws = weak_support(g, &NullRegion::points(vec![x]).unwrap());
            assert!((ccf_1d(g, x) - ws).abs() <= 1e-15);
        }
    }
}
