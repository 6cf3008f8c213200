//! Bootstrap CDs: raw, reflected, bootstrap-t and the skewness-corrected
//! (Hall) variant.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cd::{ConfidenceDistribution, Direction};
use crate::constructors::{
    from_pivot, hall_coefficients, hall_pivot, hall_transform, hall_transform_inverse, DataSample,
    PivotSpec,
};
use crate::error::{Error, Result};
use crate::probkernel::{pairwise_sum, DistKind, RngStream};

pub const MIN_REPLICATES: usize = 100;

pub type Statistic = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct ResamplePlan {
    pub b: usize,
    pub stream: RngStream,
    pub statistic: Statistic,
    pub se_estimator: Option<Statistic>,
}

impl fmt::Debug for ResamplePlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ResamplePlan")
            .field("b", &self.b)
            .field("stream", &self.stream)
            .field("se_estimator", &self.se_estimator.is_some())
            .finish()
    }
}

pub fn mean_statistic(x: &[f64]) -> f64 {
    pairwise_sum(x) / x.len() as f64
}

/// `s / sqrt(n)` with the divisor `n - 1` sample sd.
pub fn mean_se(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = mean_statistic(x);
    let d: Vec<f64> = x.iter().map(|v| (v - m) * (v - m)).collect();
    (pairwise_sum(&d) / (n - 1.0)).sqrt() / n.sqrt()
}

impl ResamplePlan {
    pub fn new(b: usize, stream: RngStream, statistic: Statistic) -> Result<Self> {
        if b < MIN_REPLICATES {
            return Err(Error::ParameterDomain(format!(
                "B = {b} must be at least {MIN_REPLICATES}"
            )));
        }
        Ok(Self {
            b,
            stream,
            statistic,
            se_estimator: None,
        })
    }

    /// Mean statistic with the `s / sqrt(n)` standard error.
    pub fn for_mean(b: usize, stream: RngStream) -> Result<Self> {
        Ok(Self::new(b, stream, Arc::new(mean_statistic))?.with_se(Arc::new(mean_se)))
    }

    pub fn with_se(mut self, se: Statistic) -> Self {
        self.se_estimator = Some(se);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Replicate {
    pub index: usize,
    pub theta: f64,
    pub se: Option<f64>,
}

/// Usable replicates in replicate-index order, plus the number excluded as
/// degenerate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateSet {
    pub records: Vec<Replicate>,
    pub excluded: usize,
    pub requested: usize,
}

impl ReplicateSet {
    pub fn thetas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.theta).collect()
    }

    fn require_usable(&self) -> Result<()> {
        if self.records.len() < MIN_REPLICATES {
            return Err(Error::InsufficientReplicates {
                usable: self.records.len(),
                required: MIN_REPLICATES,
            });
        }
        Ok(())
    }
}

fn resample_once(values: &[f64], stream: RngStream) -> Vec<f64> {
    let mut rng = stream.rng();
    let n = values.len();
    (0..n).map(|_| values[rng.random_range(0..n)]).collect()
}

/// Draws `plan.b` nonparametric resamples; replicate `i` uses child stream
/// `i` of `plan.stream`, so the set does not depend on thread count.
pub fn resample(data: &DataSample, plan: &ResamplePlan) -> Result<ReplicateSet> {
    let values = data.values();
    let out: Vec<Option<Replicate>> = (0..plan.b)
        .into_par_iter()
        .map(|i| {
            let xs = resample_once(values, plan.stream.substream(i as u64));
            let theta = (plan.statistic)(&xs);
            if !theta.is_finite() {
                return None;
            }
            let se = match &plan.se_estimator {
                Some(f) => {
                    let s = f(&xs);
                    if !(s.is_finite() && s > 0.0) {
                        return None;
                    }
                    Some(s)
                }
                None => None,
            };
            Some(Replicate {
                index: i,
                theta,
                se,
            })
        })
        .collect();
    let excluded = out.iter().filter(|r| r.is_none()).count();
    Ok(ReplicateSet {
        records: out.into_iter().flatten().collect(),
        excluded,
        requested: plan.b,
    })
}

/// `H(x) = P_B(theta_B <= x)`.
pub fn raw_bootstrap_cd(reps: &ReplicateSet) -> Result<ConfidenceDistribution> {
    reps.require_usable()?;
    ConfidenceDistribution::equal_weight_sample(reps.thetas())
}

/// `H(x) = P_B(theta_B >= 2 theta_hat - x)`: atoms `2 theta_hat - theta_B`.
pub fn reflected_bootstrap_cd(
    reps: &ReplicateSet,
    theta_hat: f64,
) -> Result<ConfidenceDistribution> {
    reps.require_usable()?;
    let atoms = reps.records.iter().map(|r| 2.0 * theta_hat - r.theta).collect();
    ConfidenceDistribution::equal_weight_sample(atoms)
}

/// Bootstrap-t CD: with `G` the ECDF of `(theta_B - theta_hat) / SE_B`,
/// `H(x) = P_G(Z >= (theta_hat - x) / se_hat)`.
pub fn bootstrap_t_cd(
    reps: &ReplicateSet,
    theta_hat: f64,
    se_hat: f64,
) -> Result<ConfidenceDistribution> {
    if !(se_hat.is_finite() && se_hat > 0.0) {
        return Err(Error::Domain(format!("se_hat = {se_hat} must be positive")));
    }
    reps.require_usable()?;
    let mut z = Vec::with_capacity(reps.records.len());
    for r in &reps.records {
        match r.se {
            Some(s) if s > 0.0 => z.push((r.theta - theta_hat) / s),
            _ => {
                return Err(Error::InvalidData(format!(
                    "replicate {} has no positive standard error",
                    r.index
                )))
            }
        }
    }
    let spec = PivotSpec::new(
        |p: &(f64, f64), x: f64| (p.0 - x) / p.1,
        Direction::Decreasing,
        DistKind::empirical(z)?,
        (f64::NEG_INFINITY, f64::INFINITY),
    )
    .with_inverse(|p: &(f64, f64), u: f64| p.0 - p.1 * u);
    from_pivot(spec, (theta_hat, se_hat))
}

/// Skewness-corrected bootstrap CD for a mean. Each resample contributes
/// the corrected pivot at `mu = xbar` computed from its own mean, sd and
/// skewness; resamples with zero spread are excluded. The plan's statistic
/// is not consulted.
pub fn hall_bootstrap_cd(
    data: &DataSample,
    plan: &ResamplePlan,
) -> Result<(ConfidenceDistribution, ReplicateSet)> {
    let n = data.n();
    if n < 20 {
        return Err(Error::InvalidData(format!("n = {n} must be at least 20")));
    }
    if !(data.sd() > 0.0) {
        return Err(Error::DegenerateSample("sample sd is zero".into()));
    }
    let xbar = data.mean();
    let values = data.values();
    let out: Vec<Option<Replicate>> = (0..plan.b)
        .into_par_iter()
        .map(|i| {
            let xs = resample_once(values, plan.stream.substream(i as u64));
            let star = DataSample::new(xs).ok()?;
            if !(star.sd() > 0.0) {
                return None;
            }
            let psi = hall_pivot(&star, xbar);
            psi.is_finite().then_some(Replicate {
                index: i,
                theta: psi,
                se: None,
            })
        })
        .collect();
    let excluded = out.iter().filter(|r| r.is_none()).count();
    let reps = ReplicateSet {
        records: out.into_iter().flatten().collect(),
        excluded,
        requested: plan.b,
    };
    reps.require_usable()?;
    let (a, b) = hall_coefficients(data.skewness(), n);
    let scale = data.sd() / (n as f64).sqrt();
    let law = DistKind::empirical(reps.thetas())?;
    let spec = PivotSpec::new(
        move |_: &(), mu: f64| hall_transform((xbar - mu) / scale, a, b),
        Direction::Decreasing,
        law,
        (f64::NEG_INFINITY, f64::INFINITY),
    )
    .with_inverse(move |_: &(), u: f64| xbar - scale * hall_transform_inverse(u, a, b));
    Ok((from_pivot(spec, ())?, reps))
}
