//! Seeded Monte Carlo experiments: data-generating models, CD constructor
//! choices, calibration, coverage and consistency.
//!
//! Replicate `r` draws its data from stream `(seed, r)` and any auxiliary
//! randomness (bootstrap resamples, clouds) from a child of that stream.
//! Replicates run in parallel and are folded in index order, so reports do
//! not depend on the worker count.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{
    bootstrap_t_cd, hall_bootstrap_cd, raw_bootstrap_cd, reflected_bootstrap_cd, resample,
    ResamplePlan,
};
use crate::cd::{cd_mean, cd_median, cd_mode, transform_cd, ConfidenceDistribution, Direction, LocationScaleCdf};
use crate::constructors::{
    exponential_rate_cd, fisher_z_corr_cd, normal_mean_cd, normal_mean_cd_from_summary,
    normal_variance_cd, DataSample, PairedSample,
};
use crate::error::{Error, Result};
use crate::likelihood::{profile_acd_auto, wald_acd, NuisanceBounds};
use crate::multivariate::{lcd_from_pivot, project, standard_normal_eta, transform_mcd, CentralityFn, DepthSpec, MultiCD, MIN_TUKEY_DIRECTIONS};
use crate::probkernel::{draw, mean_se, DistKind, RngStream};

pub const MIN_REPS: usize = 100;
pub const MIN_KS_VALUES: usize = 10;
pub const DEFAULT_LEVELS: [f64; 4] = [0.5, 0.9, 0.95, 0.99];

/// A data-generating process. The true parameter is part of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Model {
    /// Target: `mu`.
    NormalMeanKnownSigma { mu: f64, sigma: f64 },
    /// Target: `mu`.
    NormalMeanUnknownSigma { mu: f64, sigma: f64 },
    /// Target: `sigma^2`.
    NormalVariance { mu: f64, sigma: f64 },
    /// Standard bivariate normal pairs; target: `rho`.
    BivariateNormalCorrelation { rho: f64 },
    /// Target: the rate.
    ExponentialRate { rate: f64 },
    /// Target: the mean `1 / rate`.
    ExponentialMean { mean: f64 },
    /// Pairs with means `mean`, sds `sd`, correlation `rho`; the target is
    /// set by the constructor (a projection or the mean ratio).
    BivariateNormalMean { mean: [f64; 2], sd: [f64; 2], rho: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BootVariant {
    Raw,
    Reflected,
    T,
    Hall,
}

/// How a CD is built from one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Constructor {
    /// The model's exact (or Fisher-z) pivot.
    Pivot,
    Bootstrap { variant: BootVariant, b: usize },
    /// Normalized profile likelihood.
    Likelihood { grid_size: usize },
    /// Normal CD at the profile maximum with the curve's curvature.
    Wald { grid_size: usize },
    /// `N(median, (pi / 2) sigma^2 / n)`; known-sigma model only.
    SampleMedian,
    /// The normal-mean pivot CD with its scale multiplied by `factor`.
    ScaledPivot { factor: f64 },
    /// Point mass at the true parameter.
    PointMassAtTruth,
    /// Gaussian l-CD cloud projected on `lambda`.
    ProjectedLcd { lambda: [f64; 2], m: usize },
    /// Gaussian l-CD cloud mapped through `mean_0 / mean_1`.
    RatioLcd { m: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Univariate(DataSample),
    Paired(Vec<(f64, f64)>),
}

impl Dataset {
    pub fn n(&self) -> usize {
        match self {
            Dataset::Univariate(d) => d.n(),
            Dataset::Paired(p) => p.len(),
        }
    }

    fn univariate(&self) -> Result<&DataSample> {
        match self {
            Dataset::Univariate(d) => Ok(d),
            Dataset::Paired(_) => Err(Error::Pairing("constructor needs univariate data".into())),
        }
    }

    fn paired(&self) -> Result<&[(f64, f64)]> {
        match self {
            Dataset::Paired(p) => Ok(p),
            Dataset::Univariate(_) => Err(Error::Pairing("constructor needs paired data".into())),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::ParameterDomain(format!("{name} = {v} must be positive and finite")))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::ParameterDomain(format!("{name} = {v} must be finite")))
    }
}

impl Model {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Model::NormalMeanKnownSigma { mu, sigma }
            | Model::NormalMeanUnknownSigma { mu, sigma }
            | Model::NormalVariance { mu, sigma } => {
                finite("mu", mu)?;
                positive("sigma", sigma)
            }
            Model::BivariateNormalCorrelation { rho } => {
                if rho.abs() < 1.0 {
                    Ok(())
                } else {
                    Err(Error::ParameterDomain(format!("rho = {rho} must lie in (-1, 1)")))
                }
            }
            Model::ExponentialRate { rate } => positive("rate", rate),
            Model::ExponentialMean { mean } => positive("mean", mean),
            Model::BivariateNormalMean { mean, sd, rho } => {
                finite("mean[0]", mean[0])?;
                finite("mean[1]", mean[1])?;
                positive("sd[0]", sd[0])?;
                positive("sd[1]", sd[1])?;
                if rho.abs() < 1.0 {
                    Ok(())
                } else {
                    Err(Error::ParameterDomain(format!("rho = {rho} must lie in (-1, 1)")))
                }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::NormalMeanKnownSigma { .. } => "normal-mean-known-sigma",
            Model::NormalMeanUnknownSigma { .. } => "normal-mean-unknown-sigma",
            Model::NormalVariance { .. } => "normal-variance",
            Model::BivariateNormalCorrelation { .. } => "bivariate-normal-correlation",
            Model::ExponentialRate { .. } => "exponential-rate",
            Model::ExponentialMean { .. } => "exponential-mean",
            Model::BivariateNormalMean { .. } => "bivariate-normal-mean",
        }
    }

    /// Whether the two models simulate identical data from the same stream.
    pub fn same_data(&self, other: &Model) -> bool {
        use Model as M;
        match (self, other) {
            (
                M::NormalMeanKnownSigma { mu: a, sigma: s }
                | M::NormalMeanUnknownSigma { mu: a, sigma: s }
                | M::NormalVariance { mu: a, sigma: s },
                M::NormalMeanKnownSigma { mu: b, sigma: t }
                | M::NormalMeanUnknownSigma { mu: b, sigma: t }
                | M::NormalVariance { mu: b, sigma: t },
            ) => a == b && s == t,
            _ => self == other,
        }
    }

    fn is_paired(&self) -> bool {
        matches!(
            self,
            Model::BivariateNormalCorrelation { .. } | Model::BivariateNormalMean { .. }
        )
    }

    /// `n` observations from stream `stream`.
    pub fn simulate(&self, n: usize, stream: &RngStream) -> Result<Dataset> {
        self.validate()?;
        match *self {
            Model::NormalMeanKnownSigma { mu, sigma }
            | Model::NormalMeanUnknownSigma { mu, sigma }
            | Model::NormalVariance { mu, sigma } => Ok(Dataset::Univariate(DataSample::new(draw(
                stream,
                &DistKind::normal(mu, sigma)?,
                n,
            )?)?)),
            Model::ExponentialRate { rate } => exponential_data(n, 1.0 / rate, stream),
            Model::ExponentialMean { mean } => exponential_data(n, mean, stream),
            Model::BivariateNormalCorrelation { rho } => {
                Ok(Dataset::Paired(bivariate_pairs(n, [0.0, 0.0], [1.0, 1.0], rho, stream)))
            }
            Model::BivariateNormalMean { mean, sd, rho } => {
                Ok(Dataset::Paired(bivariate_pairs(n, mean, sd, rho, stream)))
            }
        }
    }

    /// Covariance of one bivariate observation.
    fn covariance(&self) -> Option<DMatrix<f64>> {
        match *self {
            Model::BivariateNormalMean { sd, rho, .. } => Some(DMatrix::from_row_slice(
                2,
                2,
                &[sd[0] * sd[0], rho * sd[0] * sd[1], rho * sd[0] * sd[1], sd[1] * sd[1]],
            )),
            _ => None,
        }
    }
}

fn exponential_data(n: usize, scale: f64, stream: &RngStream) -> Result<Dataset> {
    let mut rng = stream.rng();
    let xs = (0..n)
        .map(|_| {
            let e: f64 = Exp1.sample(&mut rng);
            e * scale
        })
        .collect();
    Ok(Dataset::Univariate(DataSample::new(xs)?))
}

fn bivariate_pairs(n: usize, mean: [f64; 2], sd: [f64; 2], rho: f64, stream: &RngStream) -> Vec<(f64, f64)> {
    let mut rng = stream.rng();
    let c = (1.0 - rho * rho).sqrt();
    (0..n)
        .map(|_| {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            (mean[0] + sd[0] * z1, mean[1] + sd[1] * (rho * z1 + c * z2))
        })
        .collect()
}

/// A model, a constructor, a sample size and a master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CdGenerator {
    pub model: Model,
    pub constructor: Constructor,
    pub n: usize,
    pub seed: u64,
}

fn unavailable(c: &Constructor, m: &Model) -> Error {
    Error::InvalidData(format!("constructor {c:?} is not available for model {}", m.name()))
}

impl CdGenerator {
    pub fn new(model: Model, constructor: Constructor, n: usize, seed: u64) -> Result<Self> {
        let g = Self {
            model,
            constructor,
            n,
            seed,
        };
        g.validate()?;
        Ok(g)
    }

    /// Checks parameters and that the constructor applies to the model.
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let min_n = if self.model.is_paired() { 4 } else { 2 };
        if self.n < min_n {
            return Err(Error::ParameterDomain(format!("n = {} must be at least {min_n}", self.n)));
        }
        use Constructor as C;
        use Model as M;
        let ok = match (&self.constructor, &self.model) {
            (C::PointMassAtTruth, M::BivariateNormalMean { .. }) => false,
            (C::PointMassAtTruth, _) => true,
            (C::Pivot, M::BivariateNormalMean { .. }) => false,
            (C::Pivot, _) => true,
            (C::Bootstrap { variant, b }, m) => {
                if *b < crate::bootstrap::MIN_REPLICATES {
                    return Err(Error::ParameterDomain(format!("B = {b} must be at least 100")));
                }
                if *variant == BootVariant::Hall && self.n < 20 {
                    return Err(Error::ParameterDomain("the Hall variant needs n >= 20".into()));
                }
                matches!(
                    m,
                    M::NormalMeanKnownSigma { .. } | M::NormalMeanUnknownSigma { .. } | M::ExponentialMean { .. }
                )
            }
            (C::Likelihood { grid_size } | C::Wald { grid_size }, m) => {
                if *grid_size < crate::likelihood::MIN_GRID {
                    return Err(Error::ParameterDomain(format!("grid_size = {grid_size} must be at least 64")));
                }
                !m.is_paired()
            }
            (C::SampleMedian, M::NormalMeanKnownSigma { .. }) => true,
            (C::ScaledPivot { factor }, M::NormalMeanKnownSigma { .. } | M::NormalMeanUnknownSigma { .. }) => {
                positive("factor", *factor)?;
                true
            }
            (C::ProjectedLcd { lambda, m }, M::BivariateNormalMean { .. }) => {
                check_cloud_size(*m)?;
                if lambda.iter().all(|&l| l == 0.0) || lambda.iter().any(|l| !l.is_finite()) {
                    return Err(Error::ParameterDomain("lambda must be finite and nonzero".into()));
                }
                true
            }
            (C::RatioLcd { m }, M::BivariateNormalMean { mean, .. }) => {
                check_cloud_size(*m)?;
                positive("|mean[1]|", mean[1].abs())?;
                true
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(unavailable(&self.constructor, &self.model))
        }
    }

    /// The true value of the parameter the constructed CDs target.
    pub fn theta0(&self) -> Result<f64> {
        Ok(match (&self.model, &self.constructor) {
            (Model::NormalMeanKnownSigma { mu, .. } | Model::NormalMeanUnknownSigma { mu, .. }, _) => *mu,
            (Model::NormalVariance { sigma, .. }, _) => sigma * sigma,
            (Model::BivariateNormalCorrelation { rho }, _) => *rho,
            (Model::ExponentialRate { rate }, _) => *rate,
            (Model::ExponentialMean { mean }, _) => *mean,
            (Model::BivariateNormalMean { mean, .. }, Constructor::ProjectedLcd { lambda, .. }) => {
                lambda[0] * mean[0] + lambda[1] * mean[1]
            }
            (Model::BivariateNormalMean { mean, .. }, Constructor::RatioLcd { .. }) => mean[0] / mean[1],
            (m, c) => return Err(unavailable(c, m)),
        })
    }

    pub fn data_stream(&self, rep: usize) -> RngStream {
        RngStream::new(self.seed, rep as u64)
    }

    pub fn aux_stream(&self, rep: usize) -> RngStream {
        self.data_stream(rep).substream(1)
    }

    pub fn dataset(&self, rep: usize) -> Result<Dataset> {
        self.model.simulate(self.n, &self.data_stream(rep))
    }

    /// CD of replicate `rep`.
    pub fn build(&self, rep: usize) -> Result<ConfidenceDistribution> {
        let data = self.dataset(rep)?;
        self.construct(&data, &self.aux_stream(rep))
    }

    /// Applies this generator's constructor to `data`, drawing auxiliary
    /// randomness from `aux`.
    pub fn construct(&self, data: &Dataset, aux: &RngStream) -> Result<ConfidenceDistribution> {
        use Constructor as C;
        match &self.constructor {
            C::PointMassAtTruth => ConfidenceDistribution::point_mass(self.theta0()?),
            C::Pivot => self.pivot_cd(data),
            C::Bootstrap { variant, b } => {
                let d = data.univariate()?;
                let plan = ResamplePlan::for_mean(*b, *aux)?;
                let se = d.sd() / (d.n() as f64).sqrt();
                match variant {
                    BootVariant::Raw => raw_bootstrap_cd(&resample(d, &plan)?),
                    BootVariant::Reflected => reflected_bootstrap_cd(&resample(d, &plan)?, d.mean()),
                    BootVariant::T => bootstrap_t_cd(&resample(d, &plan)?, d.mean(), se),
                    BootVariant::Hall => Ok(hall_bootstrap_cd(d, &plan)?.0),
                }
            }
            C::Likelihood { grid_size } => Ok(self.likelihood_cd(data.univariate()?, *grid_size)?.0),
            C::Wald { grid_size } => Ok(self.likelihood_cd(data.univariate()?, *grid_size)?.1),
            C::SampleMedian => {
                let d = data.univariate()?;
                let Model::NormalMeanKnownSigma { sigma, .. } = self.model else {
                    return Err(unavailable(&self.constructor, &self.model));
                };
                let mut v = d.values().to_vec();
                v.sort_by(f64::total_cmp);
                let k = v.len();
                let med = if k % 2 == 1 { v[k / 2] } else { 0.5 * (v[k / 2 - 1] + v[k / 2]) };
                let scale = sigma * (std::f64::consts::FRAC_PI_2 / k as f64).sqrt();
                LocationScaleCdf::new(DistKind::standard_normal(), med, scale)?.into_cd()
            }
            C::ScaledPivot { factor } => {
                let d = data.univariate()?;
                match self.model {
                    Model::NormalMeanKnownSigma { sigma, .. } => {
                        normal_mean_cd_from_summary(d.mean(), factor * sigma, d.n(), true)
                    }
                    Model::NormalMeanUnknownSigma { .. } => {
                        normal_mean_cd_from_summary(d.mean(), factor * d.sd(), d.n(), false)
                    }
                    _ => Err(unavailable(&self.constructor, &self.model)),
                }
            }
            C::ProjectedLcd { lambda, m } => project(&self.gaussian_cloud(data.paired()?, *m, aux)?, lambda),
            C::RatioLcd { m } => {
                let cloud = self.gaussian_cloud(data.paired()?, *m, aux)?;
                project(&transform_mcd(&cloud, |p| vec![p[0] / p[1]])?, &[1.0])
            }
        }
    }

    fn pivot_cd(&self, data: &Dataset) -> Result<ConfidenceDistribution> {
        match self.model {
            Model::NormalMeanKnownSigma { sigma, .. } => normal_mean_cd(data.univariate()?, Some(sigma)),
            Model::NormalMeanUnknownSigma { .. } => normal_mean_cd(data.univariate()?, None),
            Model::NormalVariance { .. } => normal_variance_cd(data.univariate()?),
            Model::BivariateNormalCorrelation { .. } => fisher_z_corr_cd(&PairedSample::new(data.paired()?)?),
            Model::ExponentialRate { .. } => exponential_rate_cd(data.univariate()?),
            Model::ExponentialMean { .. } => {
                let rate = exponential_rate_cd(data.univariate()?)?;
                transform_cd(
                    &rate,
                    |r: f64| 1.0 / r,
                    Some(Arc::new(|m: f64| 1.0 / m)),
                    Direction::Decreasing,
                )
            }
            Model::BivariateNormalMean { .. } => Err(unavailable(&self.constructor, &self.model)),
        }
    }

    /// Normalized-likelihood CD and the Wald CD from the same profile curve.
    fn likelihood_cd(
        &self,
        d: &DataSample,
        grid_size: usize,
    ) -> Result<(ConfidenceDistribution, ConfidenceDistribution)> {
        let n = d.n();
        let nf = n as f64;
        let xs: Arc<[f64]> = d.values().into();
        let sum: f64 = d.mean() * nf;
        let spread = |rel: f64, centre: f64| -> (f64, f64) {
            let w = 8.0 * rel / nf.sqrt();
            (centre * (1.0 - w).max(0.05), centre * (1.0 + w))
        };
        let positive_domain = (0.0, f64::INFINITY);
        let whole = (f64::NEG_INFINITY, f64::INFINITY);
        let (h, curve, domain) = match self.model {
            Model::NormalMeanKnownSigma { sigma, .. } => {
                let x = xs.clone();
                let ll = move |t: f64, _: f64| -> f64 {
                    -x.iter().map(|v| (v - t) * (v - t)).sum::<f64>() / (2.0 * sigma * sigma)
                };
                let half = 8.0 * sigma / nf.sqrt();
                let (h, c) = profile_acd_auto(ll, n, (d.mean() - half, d.mean() + half), whole, grid_size, None)?;
                (h, c, whole)
            }
            Model::NormalMeanUnknownSigma { .. } => {
                if !(d.sd() > 0.0) {
                    return Err(Error::DegenerateSample("sample sd is zero".into()));
                }
                let x = xs.clone();
                let ll = move |t: f64, s: f64| -> f64 {
                    -nf * s.ln() - x.iter().map(|v| (v - t) * (v - t)).sum::<f64>() / (2.0 * s * s)
                };
                let half = 8.0 * d.sd() / nf.sqrt();
                let bounds = NuisanceBounds {
                    lo: 0.1 * d.sd(),
                    hi: 100.0 * d.sd(),
                };
                let (h, c) =
                    profile_acd_auto(ll, n, (d.mean() - half, d.mean() + half), whole, grid_size, Some(bounds))?;
                (h, c, whole)
            }
            Model::NormalVariance { .. } => {
                if !(d.sd() > 0.0) {
                    return Err(Error::DegenerateSample("sample sd is zero".into()));
                }
                let x = xs.clone();
                let ll = move |t: f64, mu: f64| -> f64 {
                    -0.5 * nf * t.ln() - x.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (2.0 * t)
                };
                let s2 = d.sd() * d.sd() * (nf - 1.0) / nf;
                let half = 10.0 * d.sd() / nf.sqrt();
                let bounds = NuisanceBounds {
                    lo: d.mean() - half,
                    hi: d.mean() + half,
                };
                let pilot = spread(std::f64::consts::SQRT_2, s2);
                let (h, c) = profile_acd_auto(ll, n, pilot, positive_domain, grid_size, Some(bounds))?;
                (h, c, positive_domain)
            }
            Model::ExponentialRate { .. } => {
                let ll = move |t: f64, _: f64| nf * t.ln() - t * sum;
                let (h, c) = profile_acd_auto(ll, n, spread(1.0, 1.0 / d.mean()), positive_domain, grid_size, None)?;
                (h, c, positive_domain)
            }
            Model::ExponentialMean { .. } => {
                let ll = move |t: f64, _: f64| -nf * t.ln() - sum / t;
                let (h, c) = profile_acd_auto(ll, n, spread(1.0, d.mean()), positive_domain, grid_size, None)?;
                (h, c, positive_domain)
            }
            _ => return Err(unavailable(&self.constructor, &self.model)),
        };
        let wald = wald_acd(curve.theta_hat, curve.i_n, n, domain)?;
        Ok((h, wald))
    }

    /// Cloud `theta_hat - A^{-1} eta` with `A = sqrt(n) L^{-1}`, `L L' = Sigma`.
    fn gaussian_cloud(&self, pairs: &[(f64, f64)], m: usize, aux: &RngStream) -> Result<MultiCD> {
        let cov = self
            .model
            .covariance()
            .ok_or_else(|| unavailable(&self.constructor, &self.model))?;
        gaussian_lcd(pairs, &cov, m, aux)
    }
}

fn check_cloud_size(m: usize) -> Result<()> {
    if m < crate::multivariate::MIN_CLOUD {
        return Err(Error::ParameterDomain(format!("m = {m} must be at least 1000")));
    }
    Ok(())
}

fn gaussian_lcd(pairs: &[(f64, f64)], cov: &DMatrix<f64>, m: usize, aux: &RngStream) -> Result<MultiCD> {
    let n = pairs.len() as f64;
    let xbar = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let ybar = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let l = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::LinearAlgebra("covariance is not positive definite".into()))?
        .l();
    let l_inv = l
        .try_inverse()
        .ok_or_else(|| Error::LinearAlgebra("covariance factor is singular".into()))?;
    let a_n = l_inv * n.sqrt();
    lcd_from_pivot(&[xbar, ybar], &a_n, standard_normal_eta(2), m, *aux)
}

/// Ordered per-replicate results and the number of failed replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct Replicates<T> {
    pub values: Vec<T>,
    pub failures: usize,
    pub first_failure: Option<String>,
}

fn gather<T>(out: Vec<Result<T>>) -> Replicates<T> {
    let mut values = Vec::with_capacity(out.len());
    let mut failures = 0;
    let mut first_failure = None;
    for r in out {
        match r {
            Ok(v) => values.push(v),
            Err(e) => {
                failures += 1;
                if first_failure.is_none() {
                    first_failure = Some(e.to_string());
                }
            }
        }
    }
    Replicates {
        values,
        failures,
        first_failure,
    }
}

fn check_reps(reps: usize) -> Result<()> {
    if reps < MIN_REPS {
        return Err(Error::ParameterDomain(format!("reps = {reps} must be at least {MIN_REPS}")));
    }
    Ok(())
}

/// Runs `f` on the CD of every replicate. Failures (construction or `f`)
/// are counted and excluded.
pub fn map_replicates<T, F>(gen: &CdGenerator, reps: usize, f: F) -> Result<Replicates<T>>
where
    T: Send,
    F: Fn(usize, &ConfidenceDistribution) -> Result<T> + Sync,
{
    gen.validate()?;
    let out: Vec<Result<T>> = (0..reps)
        .into_par_iter()
        .map(|r| f(r, &gen.build(r)?))
        .collect();
    Ok(gather(out))
}

/// Paired design: both constructors see `gen1`'s data and auxiliary
/// streams for every replicate.
pub fn map_paired<T, F>(gen1: &CdGenerator, gen2: &CdGenerator, reps: usize, f: F) -> Result<Replicates<T>>
where
    T: Send,
    F: Fn(usize, &ConfidenceDistribution, &ConfidenceDistribution) -> Result<T> + Sync,
{
    gen1.validate()?;
    gen2.validate()?;
    if !gen1.model.same_data(&gen2.model) || gen1.n != gen2.n {
        return Err(Error::Pairing(format!(
            "generators differ in data shape ({} n={} vs {} n={})",
            gen1.model.name(),
            gen1.n,
            gen2.model.name(),
            gen2.n
        )));
    }
    let (t1, t2) = (gen1.theta0()?, gen2.theta0()?);
    if t1 != t2 {
        return Err(Error::Pairing(format!("generators target different values ({t1} vs {t2})")));
    }
    let out: Vec<Result<T>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let data = gen1.dataset(r)?;
            let aux = gen1.aux_stream(r);
            let h1 = gen1.construct(&data, &aux)?;
            let h2 = gen2.construct(&data, &aux)?;
            f(r, &h1, &h2)
        })
        .collect();
    Ok(gather(out))
}

/// Two-sided one-sample KS test against U(0, 1) with the asymptotic
/// Kolmogorov p-value (Stephens' finite-sample correction).
pub fn ks_uniform(u: &[f64]) -> Result<(f64, f64)> {
    if u.len() < MIN_KS_VALUES {
        return Err(Error::InsufficientReplicates {
            usable: u.len(),
            required: MIN_KS_VALUES,
        });
    }
    if let Some(v) = u.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain(format!("value {v} is outside [0, 1]")));
    }
    let mut s = u.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let d = s
        .iter()
        .enumerate()
        .map(|(i, &v)| ((i as f64 + 1.0) / n - v).max(v - i as f64 / n))
        .fold(0.0, f64::max);
    let rn = n.sqrt();
    Ok((d, kolmogorov_sf((rn + 0.12 + 0.11 / rn) * d)))
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    const EPS: f64 = 1e-10;
    if lambda < 1.18 {
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        for k in 1..=100 {
            let j = (2 * k - 1) as f64;
            let term = (c * j * j).exp();
            sum += term;
            if term < EPS {
                break;
            }
        }
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * sum;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < EPS {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub level: f64,
    pub coverage: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub generator: CdGenerator,
    pub theta0: f64,
    pub reps: usize,
    pub used: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
    pub u_values: Vec<f64>,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
    pub coverage: Vec<CoverageRow>,
    /// Fraction of replicates with CD median at or below `theta0`.
    pub median_unbiased_fraction: f64,
}

fn check_levels(levels: &[f64]) -> Result<()> {
    if let Some(l) = levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
        return Err(Error::Domain(format!("level {l} must lie in (0, 1)")));
    }
    Ok(())
}

struct Outcome {
    u: f64,
    median: f64,
    covered: Vec<bool>,
}

fn coverage_rows(levels: &[f64], hits: impl Fn(usize) -> usize, used: usize) -> Vec<CoverageRow> {
    levels
        .iter()
        .enumerate()
        .map(|(j, &level)| {
            let c = hits(j) as f64 / used as f64;
            CoverageRow {
                level,
                coverage: c,
                se: (c * (1.0 - c) / used as f64).sqrt(),
            }
        })
        .collect()
}

/// `u_i = H_i(theta0)` over `reps` replicates, KS test against U(0, 1),
/// central-interval coverage at `levels` and the median-unbiasedness rate.
pub fn calibrate(gen: &CdGenerator, reps: usize, levels: &[f64]) -> Result<CalibrationReport> {
    check_reps(reps)?;
    check_levels(levels)?;
    let theta0 = gen.theta0()?;
    let res = map_replicates(gen, reps, |_, h| {
        let covered = levels
            .iter()
            .map(|&l| h.central_interval(l).map(|(a, b)| a <= theta0 && theta0 <= b))
            .collect::<Result<Vec<bool>>>()?;
        Ok(Outcome {
            u: h.eval(theta0),
            median: cd_median(h),
            covered,
        })
    })?;
    let used = res.values.len();
    let u_values: Vec<f64> = res.values.iter().map(|o| o.u).collect();
    let (ks_statistic, ks_p_value) = ks_uniform(&u_values)?;
    let below = res.values.iter().filter(|o| o.median <= theta0).count();
    let coverage = coverage_rows(levels, |j| res.values.iter().filter(|o| o.covered[j]).count(), used);
    Ok(CalibrationReport {
        generator: gen.clone(),
        theta0,
        reps,
        used,
        failures: res.failures,
        first_failure: res.first_failure,
        u_values,
        ks_statistic,
        ks_p_value,
        coverage,
        median_unbiased_fraction: below as f64 / used as f64,
    })
}

/// Empirical frequency of `theta0` inside the central interval per level.
pub fn coverage(gen: &CdGenerator, levels: &[f64], reps: usize) -> Result<Vec<CoverageRow>> {
    Ok(calibrate(gen, reps, levels)?.coverage)
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
    pub used: usize,
    pub failures: usize,
}

impl McEstimate {
    pub fn from_values(v: &[f64], failures: usize) -> Result<Self> {
        if v.len() < 2 {
            return Err(Error::InsufficientReplicates {
                usable: v.len(),
                required: 2,
            });
        }
        let (mean, se) = mean_se(v);
        Ok(Self {
            mean,
            se,
            used: v.len(),
            failures,
        })
    }
}

/// Mean absolute errors of the CD median, mean and mode about `theta0`.
/// The mode entry is absent for sample-represented CDs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatorErrors {
    pub median: McEstimate,
    pub mean: McEstimate,
    pub mode: Option<McEstimate>,
}

pub fn estimator_errors(gen: &CdGenerator, reps: usize) -> Result<EstimatorErrors> {
    check_reps(reps)?;
    let theta0 = gen.theta0()?;
    let res = map_replicates(gen, reps, |_, h| {
        let mode = match cd_mode(h) {
            Ok(m) => Some((m - theta0).abs()),
            Err(Error::UnsupportedRepresentation(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(((cd_median(h) - theta0).abs(), (cd_mean(h)? - theta0).abs(), mode))
    })?;
    let med: Vec<f64> = res.values.iter().map(|v| v.0).collect();
    let mean: Vec<f64> = res.values.iter().map(|v| v.1).collect();
    let mode: Option<Vec<f64>> = res.values.iter().map(|v| v.2).collect();
    Ok(EstimatorErrors {
        median: McEstimate::from_values(&med, res.failures)?,
        mean: McEstimate::from_values(&mean, res.failures)?,
        mode: match mode {
            Some(m) => Some(McEstimate::from_values(&m, res.failures)?),
            None => None,
        },
    })
}

/// Circular-sense calibration for the bivariate normal mean with known
/// covariance: per replicate, the Gaussian l-CD cloud and its centrality
/// function evaluated at the true mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CentralityExperiment {
    pub mean: [f64; 2],
    pub sd: [f64; 2],
    pub rho: f64,
    pub n: usize,
    pub m: usize,
    pub depth: DepthSpec,
    pub reps: usize,
    pub seed: u64,
    pub levels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CentralityReport {
    pub experiment: CentralityExperiment,
    pub used: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
    /// `C_i(theta0)` per replicate.
    pub u_values: Vec<f64>,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
    pub coverage: Vec<CoverageRow>,
}

impl CentralityExperiment {
    fn model(&self) -> Model {
        Model::BivariateNormalMean {
            mean: self.mean,
            sd: self.sd,
            rho: self.rho,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_reps(self.reps)?;
        check_levels(&self.levels)?;
        check_cloud_size(self.m)?;
        self.model().validate()?;
        if self.n < 2 {
            return Err(Error::ParameterDomain(format!("n = {} must be at least 2", self.n)));
        }
        if let DepthSpec::Tukey { directions } = self.depth {
            if directions < MIN_TUKEY_DIRECTIONS {
                return Err(Error::ParameterDomain(format!(
                    "{directions} directions, need at least {MIN_TUKEY_DIRECTIONS}"
                )));
            }
        }
        Ok(())
    }
}

pub fn centrality_calibrate(exp: &CentralityExperiment) -> Result<CentralityReport> {
    exp.validate()?;
    let model = exp.model();
    let cov = model.covariance().expect("bivariate model");
    let theta0 = exp.mean;
    let out: Vec<Result<f64>> = (0..exp.reps)
        .into_par_iter()
        .map(|r| {
            let stream = RngStream::new(exp.seed, r as u64);
            let Dataset::Paired(pairs) = model.simulate(exp.n, &stream)? else {
                unreachable!("bivariate model yields pairs")
            };
            let cloud = gaussian_lcd(&pairs, &cov, exp.m, &stream.substream(1))?;
            CentralityFn::new(exp.depth, &cloud)?.centrality(&theta0)
        })
        .collect();
    let res = gather(out);
    let used = res.values.len();
    let (ks_statistic, ks_p_value) = ks_uniform(&res.values)?;
    let coverage = coverage_rows(
        &exp.levels,
        |j| res.values.iter().filter(|&&c| c >= 1.0 - exp.levels[j]).count(),
        used,
    );
    Ok(CentralityReport {
        experiment: exp.clone(),
        used,
        failures: res.failures,
        first_failure: res.first_failure,
        u_values: res.values,
        ks_statistic,
        ks_p_value,
        coverage,
    })
}
