//! CDs from data: the substitution scheme for pivots and the standard
//! closed-form examples.

use std::fmt;
use std::sync::Arc;

use crate::cd::{AnalyticCdf, ConfidenceDistribution, Direction, LocationScaleCdf};
use crate::error::{Error, Result};
use crate::probkernel::{brent, expand_bracket, pairwise_sum, DistKind, Tail};

/// A univariate sample with the summaries the constructors use.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSample {
    values: Vec<f64>,
    mean: f64,
    sd: f64,
    m3: f64,
}

impl DataSample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidData(format!(
                "a sample needs at least 2 values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("sample contains non-finite values".into()));
        }
        let n = values.len() as f64;
        let mean = pairwise_sum(&values) / n;
        let dev2: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        let dev3: Vec<f64> = values.iter().map(|v| (v - mean).powi(3)).collect();
        let sd = (pairwise_sum(&dev2) / (n - 1.0)).sqrt();
        let m3 = pairwise_sum(&dev3) / n;
        Ok(Self {
            values,
            mean,
            sd,
            m3,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Standard deviation with divisor `n - 1`.
    pub fn sd(&self) -> f64 {
        self.sd
    }

    /// `m3 / s^3` with `m3` the divisor-`n` third central moment; `NaN` when
    /// the sample has no spread.
    pub fn skewness(&self) -> f64 {
        if self.sd > 0.0 {
            self.m3 / self.sd.powi(3)
        } else {
            f64::NAN
        }
    }
}

/// Paired observations with their sample correlation.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    x: Vec<f64>,
    y: Vec<f64>,
    r: f64,
}

impl PairedSample {
    pub fn new(pairs: &[(f64, f64)]) -> Result<Self> {
        if pairs.len() < 4 {
            return Err(Error::InvalidData(format!(
                "paired sample needs at least 4 pairs, got {}",
                pairs.len()
            )));
        }
        let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("paired sample contains non-finite values".into()));
        }
        let n = pairs.len() as f64;
        let mx = pairwise_sum(&x) / n;
        let my = pairwise_sum(&y) / n;
        let sxx: Vec<f64> = x.iter().map(|a| (a - mx) * (a - mx)).collect();
        let syy: Vec<f64> = y.iter().map(|b| (b - my) * (b - my)).collect();
        let sxy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).collect();
        let (sxx, syy, sxy) = (pairwise_sum(&sxx), pairwise_sum(&syy), pairwise_sum(&sxy));
        if sxx <= 0.0 || syy <= 0.0 {
            return Err(Error::DegenerateSample("a marginal has zero spread".into()));
        }
        let mut r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
        if 1.0 - r.abs() < 1e-12 {
            r = r.signum();
        }
        Ok(Self { x, y, r })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }
}

type PivotFn<D> = Arc<dyn Fn(&D, f64) -> f64 + Send + Sync>;

/// A pivot `psi(data, theta)`, strictly monotone in `theta`, with sampling
/// law `law`.
pub struct PivotSpec<D> {
    pub psi: PivotFn<D>,
    /// Solves `psi(data, theta) = u` for `theta`; bisection when absent.
    pub psi_inv: Option<PivotFn<D>>,
    pub direction: Direction,
    pub law: DistKind,
    pub support: (f64, f64),
}

impl<D> Clone for PivotSpec<D> {
    fn clone(&self) -> Self {
        Self {
            psi: self.psi.clone(),
            psi_inv: self.psi_inv.clone(),
            direction: self.direction,
            law: self.law.clone(),
            support: self.support,
        }
    }
}

impl<D> PivotSpec<D> {
    pub fn new(
        psi: impl Fn(&D, f64) -> f64 + Send + Sync + 'static,
        direction: Direction,
        law: DistKind,
        support: (f64, f64),
    ) -> Self {
        Self {
            psi: Arc::new(psi),
            psi_inv: None,
            direction,
            law,
            support,
        }
    }

    pub fn with_inverse(mut self, inv: impl Fn(&D, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.psi_inv = Some(Arc::new(inv));
        self
    }
}

/// `H(x) = G(psi(x))` for increasing pivots, `P(Y >= psi(x))` for decreasing.
struct PivotCdf<D> {
    spec: PivotSpec<D>,
    data: D,
}

impl<D> fmt::Debug for PivotCdf<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PivotCdf")
            .field("direction", &self.spec.direction)
            .field("law", &self.spec.law.name())
            .field("support", &self.spec.support)
            .finish()
    }
}

impl<D> PivotCdf<D> {
    fn psi(&self, x: f64) -> f64 {
        (self.spec.psi)(&self.data, x)
    }

    fn inv(&self, u: f64) -> Option<f64> {
        self.spec.psi_inv.as_ref().map(|f| f(&self.data, u))
    }

    fn law(&self) -> &DistKind {
        &self.spec.law
    }
}

impl<D: Send + Sync> AnalyticCdf for PivotCdf<D> {
    fn cdf(&self, x: f64) -> f64 {
        let u = self.psi(x);
        match self.spec.direction {
            Direction::Increasing => self.law().cdf_raw(u),
            Direction::Decreasing => self.law().sf_left_raw(u),
        }
    }

    fn cdf_left(&self, x: f64) -> f64 {
        let u = self.psi(x);
        match self.spec.direction {
            Direction::Increasing => self.law().cdf_left_raw(u),
            Direction::Decreasing if self.law().is_continuous() => self.law().sf_left_raw(u),
            Direction::Decreasing => 1.0 - self.law().cdf_raw(u),
        }
    }

    fn density(&self, x: f64) -> Option<f64> {
        let h = (1e-6 * x.abs()).max(1e-6);
        let (a, b) = (x - h, x + h);
        if a <= self.spec.support.0 || b >= self.spec.support.1 {
            return None;
        }
        let dpsi = (self.psi(b) - self.psi(a)) / (2.0 * h);
        self.law().pdf_raw(self.psi(x)).map(|d| d * dpsi.abs())
    }

    fn quantile(&self, s: f64) -> Option<f64> {
        self.spec.psi_inv.as_ref()?;
        let u = match self.spec.direction {
            Direction::Increasing => self.law().quantile_raw(s).ok()?,
            Direction::Decreasing => self.law().upper_quantile_raw(s).ok()?,
        };
        self.inv(u)
    }

    fn quantile_complement(&self, q: f64) -> Option<f64> {
        if self.spec.psi_inv.is_none() || !self.law().is_continuous() {
            return None;
        }
        let u = match self.spec.direction {
            Direction::Increasing => self.law().upper_quantile_raw(q).ok()?,
            Direction::Decreasing => self.law().quantile_raw(q).ok()?,
        };
        self.inv(u)
    }

    fn log_cdf(&self, x: f64) -> Option<f64> {
        if !self.law().is_continuous() {
            return None;
        }
        let u = self.psi(x);
        Some(match self.spec.direction {
            Direction::Increasing => self.law().log_tail_raw(u, Tail::Lower),
            Direction::Decreasing => self.law().log_tail_raw(u, Tail::Upper),
        })
    }

    fn log_sf(&self, x: f64) -> Option<f64> {
        if !self.law().is_continuous() {
            return None;
        }
        let u = self.psi(x);
        Some(match self.spec.direction {
            Direction::Increasing => self.law().log_tail_raw(u, Tail::Upper),
            Direction::Decreasing => self.law().log_tail_raw(u, Tail::Lower),
        })
    }

    fn is_continuous(&self) -> bool {
        self.law().is_continuous()
    }
}

/// Substitution-scheme CD of a pivot. The pivot's monotonicity is
/// spot-checked on 101 points spanning the CD's 0.001 to 0.999 quantiles.
pub fn from_pivot<D: Send + Sync + 'static>(
    spec: PivotSpec<D>,
    data: D,
) -> Result<ConfidenceDistribution> {
    spec.law.validate()?;
    let support = spec.support;
    let direction = spec.direction;
    let psi = spec.psi.clone();
    let cdf = Arc::new(PivotCdf { spec, data });
    let h = ConfidenceDistribution::analytic(cdf.clone(), support)?;
    let lo = h.quantile(0.001)?;
    let hi = h.quantile(0.999)?;
    if hi > lo {
        let mut prev: Option<f64> = None;
        for i in 0..=100 {
            let x = lo + (hi - lo) * i as f64 / 100.0;
            let u = psi(&cdf.data, x);
            if !u.is_finite() {
                return Err(Error::MonotonicityViolation(format!("pivot is not finite at {x}")));
            }
            if let Some(p) = prev {
                let ok = match direction {
                    Direction::Increasing => u > p,
                    Direction::Decreasing => u < p,
                };
                if !ok {
                    return Err(Error::MonotonicityViolation(format!(
                        "pivot is not strictly {direction:?} near theta = {x}"
                    )));
                }
            }
            prev = Some(u);
        }
    }
    Ok(h)
}

/// CD for a normal mean from summary statistics: `Phi((x - xbar) / (sigma /
/// sqrt n))` with `scale = sigma` known, or the Student-t analogue with
/// `n - 1` degrees of freedom when `scale` is the sample sd.
pub fn normal_mean_cd_from_summary(
    xbar: f64,
    scale: f64,
    n: usize,
    sigma_known: bool,
) -> Result<ConfidenceDistribution> {
    if n < 2 {
        return Err(Error::InvalidData(format!("n = {n} must be at least 2")));
    }
    if !(scale > 0.0) {
        return Err(if sigma_known {
            Error::ParameterDomain(format!("sigma = {scale} must be positive"))
        } else {
            Error::DegenerateSample("sample sd is zero".into())
        });
    }
    let law = if sigma_known {
        DistKind::standard_normal()
    } else {
        DistKind::student_t((n - 1) as f64)?
    };
    LocationScaleCdf::new(law, xbar, scale / (n as f64).sqrt())?.into_cd()
}

/// CD for a normal mean; `sigma = None` means unknown.
pub fn normal_mean_cd(data: &DataSample, sigma: Option<f64>) -> Result<ConfidenceDistribution> {
    match sigma {
        Some(s) => normal_mean_cd_from_summary(data.mean(), s, data.n(), true),
        None => normal_mean_cd_from_summary(data.mean(), data.sd(), data.n(), false),
    }
}

/// `x -> P(chi2_{n-1} >= (n - 1) s^2 / x)` on `(0, inf)`.
pub fn normal_variance_cd_from_summary(s2: f64, n: usize) -> Result<ConfidenceDistribution> {
    if n < 2 {
        return Err(Error::InvalidData(format!("n = {n} must be at least 2")));
    }
    if !(s2 > 0.0 && s2.is_finite()) {
        return Err(Error::DegenerateSample(format!("sample variance {s2} must be positive")));
    }
    let k = (n - 1) as f64;
    let ss = k * s2;
    let spec = PivotSpec::new(
        |ss: &f64, theta: f64| ss / theta,
        Direction::Decreasing,
        DistKind::chi_square(k)?,
        (0.0, f64::INFINITY),
    )
    .with_inverse(|ss: &f64, u: f64| ss / u);
    from_pivot(spec, ss)
}

pub fn normal_variance_cd(data: &DataSample) -> Result<ConfidenceDistribution> {
    normal_variance_cd_from_summary(data.sd() * data.sd(), data.n())
}

/// Fisher-z asymptotic CD for a correlation:
/// `1 - Phi(sqrt(n - 3) (atanh r - atanh x))` on `(-1, 1)`.
pub fn fisher_z_corr_cd_from_summary(r: f64, n: usize) -> Result<ConfidenceDistribution> {
    if n < 4 {
        return Err(Error::InvalidData(format!("n = {n} must be at least 4")));
    }
    if !(r.abs() < 1.0) {
        return Err(Error::DegenerateSample(format!("|r| = {} must be below 1", r.abs())));
    }
    let c = ((n - 3) as f64).sqrt();
    let zr = r.atanh();
    let spec = PivotSpec::new(
        move |_: &(), theta: f64| c * (zr - theta.atanh()),
        Direction::Decreasing,
        DistKind::standard_normal(),
        (-1.0, 1.0),
    )
    .with_inverse(move |_: &(), u: f64| (zr - u / c).tanh());
    from_pivot(spec, ())
}

pub fn fisher_z_corr_cd(data: &PairedSample) -> Result<ConfidenceDistribution> {
    fisher_z_corr_cd_from_summary(data.r(), data.n())
}

/// Exact CD for an exponential rate: `2 theta sum(x) ~ chi2_{2n}`.
pub fn exponential_rate_cd(data: &DataSample) -> Result<ConfidenceDistribution> {
    if data.values().iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidData("exponential data must be positive".into()));
    }
    let total = data.mean() * data.n() as f64;
    let spec = PivotSpec::new(
        |t: &f64, theta: f64| 2.0 * theta * t,
        Direction::Increasing,
        DistKind::chi_square(2.0 * data.n() as f64)?,
        (0.0, f64::INFINITY),
    )
    .with_inverse(|t: &f64, u: f64| u / (2.0 * t));
    from_pivot(spec, total)
}

/// Coefficients `(a, b)` of the skewness-corrected cubic
/// `t + a (2 t^2 + 1) + b t^3`.
pub fn hall_coefficients(skewness: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    (skewness / (6.0 * nf.sqrt()), skewness * skewness / (27.0 * nf))
}

pub fn hall_transform(t: f64, a: f64, b: f64) -> f64 {
    t + a * (2.0 * t * t + 1.0) + b * t * t * t
}

/// Inverse of [`hall_transform`] in `t`. The cubic's derivative
/// `1 + 4 a t + 3 b t^2` has zero discriminant when `b = 16 a^2 / 12`, so
/// the map is nondecreasing and the root is unique.
pub fn hall_transform_inverse(psi: f64, a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        return psi;
    }
    let g = |t: f64| hall_transform(t, a, b) - psi;
    let start = psi - a;
    match expand_bracket(g, start - 1.0, start + 1.0, -f64::MAX, f64::MAX) {
        Ok((lo, hi)) if lo == hi => lo,
        Ok((lo, hi)) => brent(g, lo, hi, 0.0).unwrap_or(hi),
        Err(_) => f64::NAN,
    }
}

/// The skewness-corrected pivot at `mu`, with `t = sqrt(n) (xbar - mu) / s`.
pub fn hall_pivot(data: &DataSample, mu: f64) -> f64 {
    let n = data.n();
    let t = (n as f64).sqrt() * (data.mean() - mu) / data.sd();
    let (a, b) = hall_coefficients(data.skewness(), n);
    hall_transform(t, a, b)
}
