//! Numeric substrate: the handful of distributions the rest of the crate
//! needs, evaluated with log-space tails, plus root finding, quadrature and
//! seeded counter-based random streams.

mod quad;
mod rng;
mod roots;
pub mod special;

use std::f64::consts::{LN_2, PI, SQRT_2};
use std::sync::Arc;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Normal, Open01, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use special::{ln_beta_reg_pair_with_logs, ln_gamma_reg_pair, ln_one_minus_exp};

pub use quad::{mean, mean_se, midpoint, pairwise_sum, trapezoid_cumulative};
pub use rng::RngStream;
pub use roots::{bisect_generalized_inverse, brent, expand_bracket, golden_max};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Which tail `log_tail` measures: `Lower` is `P(X <= x)`, `Upper` is `P(X > x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    Lower,
    Upper,
}

/// Sorted finite sample backing an empirical law.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalLaw {
    sorted: Arc<[f64]>,
}

impl EmpiricalLaw {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::ParameterDomain("empirical sample is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::ParameterDomain("empirical sample has non-finite values".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self {
            sorted: values.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    fn count_le(&self, x: f64) -> usize {
        self.sorted.partition_point(|&v| v <= x)
    }

    fn count_lt(&self, x: f64) -> usize {
        self.sorted.partition_point(|&v| v < x)
    }

    /// Smallest count `c` in `1..=n` with `c / n >= p`.
    fn min_count_reaching(&self, p: f64) -> usize {
        let n = self.sorted.len();
        let nf = n as f64;
        let guess = ((p * nf).ceil() as usize).clamp(1, n);
        let mut c = guess;
        while c > 1 && (c - 1) as f64 / nf >= p {
            c -= 1;
        }
        while c < n && (c as f64 / nf) < p {
            c += 1;
        }
        c
    }
}

/// The distributions used throughout the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum DistKind {
    Normal { mean: f64, sd: f64 },
    StudentT { df: f64 },
    ChiSquare { df: f64 },
    Uniform01,
    Empirical(EmpiricalLaw),
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

/// Mills ratio `R(z) = (1 - Phi(z)) / phi(z)` for `z >= 5` by backward
/// evaluation of Laplace's continued fraction.
fn mills_ratio(z: f64) -> f64 {
    let mut t = z;
    for k in (1..=200).rev() {
        t = z + k as f64 / t;
    }
    1.0 / t
}

fn std_normal_ln_cdf(z: f64) -> f64 {
    if z < -20.0 {
        -0.5 * z * z - LN_SQRT_2PI + mills_ratio(-z).ln()
    } else if z > 5.0 {
        (-std_normal_cdf(-z)).ln_1p()
    } else {
        std_normal_cdf(z).ln()
    }
}

/// Inverse-erfc start and one Newton step on the lower tail.
fn std_normal_quantile(p: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    let q = p.min(1.0 - p);
    let mut x = -SQRT_2 * erfc_inv(2.0 * q);
    let d = std_normal_pdf(x);
    if d > 0.0 {
        x -= (std_normal_cdf(x) - q) / d;
    }
    if p < 0.5 {
        x
    } else {
        -x
    }
}

/// `ln P(T_df <= x)` for `x <= 0`.
fn t_ln_lower_nonpositive(df: f64, x: f64) -> f64 {
    if x == 0.0 {
        return -LN_2;
    }
    let ax = x.abs();
    let r = df / (ax * ax); // nu / t^2, may overflow for tiny |x|
    let (xb, yb, ln_xb, ln_yb) = if r.is_finite() {
        let xb = r / (1.0 + r);
        let yb = 1.0 / (1.0 + r);
        (xb, yb, df.ln() - 2.0 * ax.ln() - r.ln_1p(), -r.ln_1p())
    } else {
        let s = ax * ax / df;
        let yb = s / (1.0 + s);
        (1.0 / (1.0 + s), yb, -s.ln_1p(), s.ln() - s.ln_1p())
    };
    let (ln_i, _) = ln_beta_reg_pair_with_logs(0.5 * df, 0.5, xb, yb, ln_xb, ln_yb);
    ln_i - LN_2
}

fn t_ln_tails(df: f64, x: f64) -> (f64, f64) {
    if x <= 0.0 {
        let lo = t_ln_lower_nonpositive(df, x);
        (lo, ln_one_minus_exp(lo))
    } else {
        let up = t_ln_lower_nonpositive(df, -x);
        (ln_one_minus_exp(up), up)
    }
}

fn chi2_ln_tails(df: f64, x: f64) -> (f64, f64) {
    if x <= 0.0 {
        (f64::NEG_INFINITY, 0.0)
    } else {
        ln_gamma_reg_pair(0.5 * df, 0.5 * x)
    }
}

impl DistKind {
    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        let d = DistKind::Normal { mean, sd };
        d.validate()?;
        Ok(d)
    }

    pub fn student_t(df: f64) -> Result<Self> {
        let d = DistKind::StudentT { df };
        d.validate()?;
        Ok(d)
    }

    pub fn chi_square(df: f64) -> Result<Self> {
        let d = DistKind::ChiSquare { df };
        d.validate()?;
        Ok(d)
    }

    pub fn empirical(values: Vec<f64>) -> Result<Self> {
        Ok(DistKind::Empirical(EmpiricalLaw::new(values)?))
    }

    pub fn standard_normal() -> Self {
        DistKind::Normal { mean: 0.0, sd: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DistKind::Normal { mean, sd } => {
                if !mean.is_finite() || !(sd.is_finite() && *sd > 0.0) {
                    return Err(Error::ParameterDomain(format!(
                        "Normal(mean={mean}, sd={sd}) needs finite mean and sd > 0"
                    )));
                }
            }
            DistKind::StudentT { df } | DistKind::ChiSquare { df } => {
                if !(df.is_finite() && *df > 0.0) {
                    return Err(Error::ParameterDomain(format!("df = {df} must be > 0")));
                }
            }
            DistKind::Uniform01 => {}
            DistKind::Empirical(law) => {
                if law.is_empty() {
                    return Err(Error::ParameterDomain("empirical sample is empty".into()));
                }
                if law.values().windows(2).any(|w| w[0] > w[1]) {
                    return Err(Error::ParameterDomain("empirical sample not sorted".into()));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            DistKind::Normal { .. } => "normal",
            DistKind::StudentT { .. } => "student_t",
            DistKind::ChiSquare { .. } => "chi_square",
            DistKind::Uniform01 => "uniform01",
            DistKind::Empirical(_) => "empirical",
        }
    }

    pub fn is_continuous(&self) -> bool {
        !matches!(self, DistKind::Empirical(_))
    }

    fn check_x(x: f64) -> Result<()> {
        if x.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!("x = {x} must be finite")))
        }
    }

    fn check_p(p: f64) -> Result<()> {
        if p > 0.0 && p < 1.0 {
            Ok(())
        } else {
            Err(Error::Domain(format!("probability {p} must lie in (0, 1)")))
        }
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        self.validate()?;
        Self::check_x(x)?;
        Ok(self.cdf_raw(x))
    }

    /// `P(X < x)`; equals `cdf` for continuous kinds.
    pub fn cdf_left(&self, x: f64) -> Result<f64> {
        self.validate()?;
        Self::check_x(x)?;
        Ok(self.cdf_left_raw(x))
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        self.validate()?;
        Self::check_p(p)?;
        self.quantile_raw(p)
    }

    /// `sup { y : P(X >= y) >= s }`. For continuous kinds this is the value
    /// with upper-tail mass `s`, computed without forming `1 - s`.
    pub fn upper_quantile(&self, s: f64) -> Result<f64> {
        self.validate()?;
        Self::check_p(s)?;
        self.upper_quantile_raw(s)
    }

    /// Natural log of the lower (`P(X <= x)`) or upper (`P(X > x)`) tail.
    pub fn log_tail(&self, x: f64, side: Tail) -> Result<f64> {
        self.validate()?;
        Self::check_x(x)?;
        Ok(self.log_tail_raw(x, side))
    }

    pub fn pdf(&self, x: f64) -> Option<f64> {
        self.pdf_raw(x)
    }

    pub(crate) fn cdf_raw(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        match self {
            DistKind::Normal { mean, sd } => std_normal_cdf((x - mean) / sd),
            DistKind::StudentT { df } => {
                if x <= 0.0 {
                    t_ln_lower_nonpositive(*df, x).exp()
                } else {
                    1.0 - t_ln_lower_nonpositive(*df, -x).exp()
                }
            }
            DistKind::ChiSquare { df } => {
                let (lp, lq) = chi2_ln_tails(*df, x);
                if lp < lq {
                    lp.exp()
                } else {
                    1.0 - lq.exp()
                }
            }
            DistKind::Uniform01 => x.clamp(0.0, 1.0),
            DistKind::Empirical(law) => law.count_le(x) as f64 / law.len() as f64,
        }
    }

    /// `P(Y >= x)`, computed on the upper tail directly.
    pub(crate) fn sf_left_raw(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        match self {
            DistKind::Normal { mean, sd } => std_normal_cdf(-(x - mean) / sd),
            DistKind::StudentT { .. } => DistKind::cdf_raw(self, -x),
            DistKind::ChiSquare { df } => {
                let (lp, lq) = chi2_ln_tails(*df, x);
                if lq < lp {
                    lq.exp()
                } else {
                    1.0 - lp.exp()
                }
            }
            DistKind::Uniform01 => 1.0 - x.clamp(0.0, 1.0),
            DistKind::Empirical(law) => 1.0 - law.count_lt(x) as f64 / law.len() as f64,
        }
    }

    pub(crate) fn cdf_left_raw(&self, x: f64) -> f64 {
        match self {
            DistKind::Empirical(law) => law.count_lt(x) as f64 / law.len() as f64,
            _ => self.cdf_raw(x),
        }
    }

    pub(crate) fn log_tail_raw(&self, x: f64, side: Tail) -> f64 {
        match self {
            DistKind::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                match side {
                    Tail::Lower => std_normal_ln_cdf(z),
                    Tail::Upper => std_normal_ln_cdf(-z),
                }
            }
            DistKind::StudentT { df } => {
                let (lo, up) = t_ln_tails(*df, x);
                match side {
                    Tail::Lower => lo,
                    Tail::Upper => up,
                }
            }
            DistKind::ChiSquare { df } => {
                let (lp, lq) = chi2_ln_tails(*df, x);
                match side {
                    Tail::Lower => lp,
                    Tail::Upper => lq,
                }
            }
            DistKind::Uniform01 => {
                let c = x.clamp(0.0, 1.0);
                match side {
                    Tail::Lower => c.ln(),
                    Tail::Upper => (-c).ln_1p(),
                }
            }
            DistKind::Empirical(law) => {
                let n = law.len() as f64;
                let le = law.count_le(x) as f64;
                match side {
                    Tail::Lower => (le / n).ln(),
                    Tail::Upper => ((n - le) / n).ln(),
                }
            }
        }
    }

    pub(crate) fn pdf_raw(&self, x: f64) -> Option<f64> {
        match self {
            DistKind::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                Some((-0.5 * z * z - LN_SQRT_2PI).exp() / sd)
            }
            DistKind::StudentT { df } => {
                let ln = ln_gamma(0.5 * (df + 1.0))
                    - ln_gamma(0.5 * df)
                    - 0.5 * (df * PI).ln()
                    - 0.5 * (df + 1.0) * (x * x / df).ln_1p();
                Some(ln.exp())
            }
            DistKind::ChiSquare { df } => {
                let a = 0.5 * df;
                if x < 0.0 {
                    Some(0.0)
                } else if x == 0.0 {
                    Some(if a < 1.0 {
                        f64::INFINITY
                    } else if a == 1.0 {
                        0.5
                    } else {
                        0.0
                    })
                } else {
                    Some(((a - 1.0) * x.ln() - 0.5 * x - a * LN_2 - ln_gamma(a)).exp())
                }
            }
            DistKind::Uniform01 => Some(if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 }),
            DistKind::Empirical(_) => None,
        }
    }

    pub(crate) fn quantile_raw(&self, p: f64) -> Result<f64> {
        match self {
            DistKind::Normal { mean, sd } => Ok(mean + sd * std_normal_quantile(p)),
            DistKind::StudentT { df } => {
                if p == 0.5 {
                    Ok(0.0)
                } else if p < 0.5 {
                    t_lower_quantile(*df, p)
                } else {
                    Ok(-t_lower_quantile(*df, 1.0 - p)?)
                }
            }
            DistKind::ChiSquare { df } => {
                if p <= 0.5 {
                    chi2_solve(*df, p, Tail::Lower)
                } else {
                    chi2_solve(*df, 1.0 - p, Tail::Upper)
                }
            }
            DistKind::Uniform01 => Ok(p),
            DistKind::Empirical(law) => Ok(law.sorted[law.min_count_reaching(p) - 1]),
        }
    }

    pub(crate) fn upper_quantile_raw(&self, s: f64) -> Result<f64> {
        match self {
            DistKind::Normal { mean, sd } => Ok(mean - sd * std_normal_quantile(s)),
            DistKind::StudentT { df } => {
                if s == 0.5 {
                    Ok(0.0)
                } else if s < 0.5 {
                    Ok(-t_lower_quantile(*df, s)?)
                } else {
                    t_lower_quantile(*df, 1.0 - s)
                }
            }
            DistKind::ChiSquare { df } => {
                if s <= 0.5 {
                    chi2_solve(*df, s, Tail::Upper)
                } else {
                    chi2_solve(*df, 1.0 - s, Tail::Lower)
                }
            }
            DistKind::Uniform01 => Ok(1.0 - s),
            DistKind::Empirical(law) => {
                let m = law.min_count_reaching(s);
                Ok(law.sorted[law.len() - m])
            }
        }
    }

    pub(crate) fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        match self {
            DistKind::Normal { mean, sd } => {
                let d = Normal::new(*mean, *sd).expect("validated");
                (0..count).map(|_| d.sample(rng)).collect()
            }
            DistKind::StudentT { df } => {
                let d = StudentT::new(*df).expect("validated");
                (0..count).map(|_| d.sample(rng)).collect()
            }
            DistKind::ChiSquare { df } => {
                let d = ChiSquared::new(*df).expect("validated");
                (0..count).map(|_| d.sample(rng)).collect()
            }
            DistKind::Uniform01 => (0..count).map(|_| Open01.sample(rng)).collect(),
            DistKind::Empirical(law) => (0..count)
                .map(|_| law.sorted[rng.random_range(0..law.len())])
                .collect(),
        }
    }
}

fn t_lower_quantile(df: f64, p: f64) -> Result<f64> {
    let lp = p.ln();
    let g = |t: f64| t_ln_lower_nonpositive(df, t.min(0.0)) - lp;
    let z = std_normal_quantile(p).min(-f64::MIN_POSITIVE);
    // Cornish-Fisher start; the bracket widens if it is off
    let z3 = z * z * z;
    let t0 = z + (z3 + z) / (4.0 * df) + (5.0 * z3 * z * z + 16.0 * z3 + 3.0 * z) / (96.0 * df * df);
    let (a, b) = if t0.is_finite() && t0 < 0.0 {
        let w = 0.02 * (1.0 - t0);
        (t0 - w, (t0 + w).min(-f64::MIN_POSITIVE))
    } else {
        (z * 2.0 - 1.0, z)
    };
    if t0.is_finite() && t0 < 0.0 {
        if let Some(t) = t_quantile_newton(df, lp, t0) {
            return Ok(t);
        }
    }
    let (lo, hi) = expand_bracket(g, a, b, -f64::MAX, 0.0)?;
    if lo == hi {
        return Ok(lo);
    }
    brent(g, lo, hi, 1e-300)
}

/// Newton on `ln F(t) = lp`; `None` when the iteration leaves the lower
/// half-line or fails to settle within a few steps.
fn t_quantile_newton(df: f64, lp: f64, mut t: f64) -> Option<f64> {
    let c = ln_gamma(0.5 * (df + 1.0)) - ln_gamma(0.5 * df) - 0.5 * (df * PI).ln();
    for _ in 0..12 {
        let lf = t_ln_lower_nonpositive(df, t);
        let lpdf = c - 0.5 * (df + 1.0) * (t * t / df).ln_1p();
        let step = (lf - lp) / (lpdf - lf).exp();
        let next = t - step;
        if !next.is_finite() || next >= 0.0 {
            return None;
        }
        if (next - t).abs() <= 1e-13 * t.abs() {
            return Some(next);
        }
        t = next;
    }
    None
}

/// Solves `ln P(chi2_df <= x) = ln target` (Lower) or `ln P(chi2_df > x) =
/// ln target` (Upper) in the log-abscissa.
fn chi2_solve(df: f64, target: f64, side: Tail) -> Result<f64> {
    let lt = target.ln();
    let g = |u: f64| {
        let (lp, lq) = chi2_ln_tails(df, u.exp());
        match side {
            Tail::Lower => lp - lt,
            Tail::Upper => lt - lq,
        }
    };
    let u0 = df.max(1e-3).ln();
    let (lo, hi) = expand_bracket(g, u0 - 1.0, u0 + 1.0, -740.0, 709.0)?;
    if lo == hi {
        return Ok(lo.exp());
    }
    Ok(brent(g, lo, hi, 1e-15)?.exp())
}

/// Draws `count` variates from `d` on the given stream. Replaying the same
/// stream yields the same sequence.
pub fn draw(stream: &RngStream, d: &DistKind, count: usize) -> Result<Vec<f64>> {
    d.validate()?;
    let mut rng = stream.rng();
    Ok(d.sample_into(&mut rng, count))
}

/// Dvoretzky-Kiefer-Wolfowitz half-width: with probability at least
/// `1 - alpha`, the ECDF of `n` draws stays within this distance of the CDF.
pub fn dkw_epsilon(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}
