//! Profile likelihoods normalized into asymptotic CDs, and the companion
//! normal (Wald) CD.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::cd::{AnalyticCdf, ConfidenceDistribution, LocationScaleCdf};
use crate::error::{Error, Result};
use crate::probkernel::{golden_max, trapezoid_cumulative, DistKind, Tail};

pub const MIN_GRID: usize = 64;
const EDGE_DECAY: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileCurve {
    pub grid: Vec<f64>,
    /// `l(theta) - l(theta_hat)`.
    pub ell_star: Vec<f64>,
    pub theta_hat: f64,
    pub ell_max: f64,
    /// `1 / i_n = -(1/n) l''(theta_hat)`.
    pub i_n: f64,
    /// `integral exp(ell_star)` over the grid.
    pub c_n: f64,
    pub n: usize,
}

/// Bounds for a scalar nuisance parameter, maximized out per `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NuisanceBounds {
    pub lo: f64,
    pub hi: f64,
}

fn profile_at<F>(loglik: &F, theta: f64, nuisance: Option<NuisanceBounds>) -> Result<f64>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let v = match nuisance {
        None => loglik(theta, f64::NAN),
        Some(b) => {
            let tol = 1e-8;
            let (eta, v) = golden_max(|eta| loglik(theta, eta), b.lo, b.hi, tol);
            let width = b.hi - b.lo;
            if eta - b.lo < 1e-6 * width || b.hi - eta < 1e-6 * width {
                return Err(Error::OptimizationFailure {
                    theta,
                    reason: format!("nuisance optimum {eta} sits on the bound [{}, {}]", b.lo, b.hi),
                });
            }
            v
        }
    };
    if v.is_nan() || v == f64::INFINITY {
        return Err(Error::OptimizationFailure {
            theta,
            reason: format!("log-likelihood evaluated to {v}"),
        });
    }
    Ok(v)
}

/// Profiles `loglik(theta, eta)` over `grid_size` equally spaced points of
/// `window`. Without nuisance bounds `eta` is passed as `NaN`.
pub fn profile_curve<F>(
    loglik: F,
    n: usize,
    window: (f64, f64),
    grid_size: usize,
    nuisance: Option<NuisanceBounds>,
) -> Result<ProfileCurve>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    if grid_size < MIN_GRID {
        return Err(Error::ParameterDomain(format!(
            "grid_size = {grid_size} must be at least {MIN_GRID}"
        )));
    }
    if n == 0 {
        return Err(Error::ParameterDomain("n must be positive".into()));
    }
    let (a, b) = window;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::Domain(format!("window ({a}, {b}) is not a finite interval")));
    }
    if let Some(nb) = nuisance {
        if !(nb.lo.is_finite() && nb.hi.is_finite() && nb.lo < nb.hi) {
            return Err(Error::Domain(format!("nuisance bounds ({}, {}) invalid", nb.lo, nb.hi)));
        }
    }
    let step = (b - a) / (grid_size - 1) as f64;
    let grid: Vec<f64> = (0..grid_size)
        .map(|i| if i == grid_size - 1 { b } else { a + i as f64 * step })
        .collect();
    let ell: Vec<f64> = grid
        .par_iter()
        .map(|&t| profile_at(&loglik, t, nuisance))
        .collect::<Result<_>>()?;

    let mut best = 0;
    for (i, &v) in ell.iter().enumerate() {
        if v > ell[best] {
            best = i;
        }
    }
    let mut theta_hat = grid[best];
    if best > 0 && best + 1 < grid_size {
        let (fm, f0, fp) = (ell[best - 1], ell[best], ell[best + 1]);
        let denom = fp - 2.0 * f0 + fm;
        if denom < 0.0 {
            let shift = 0.5 * step * (fm - fp) / denom;
            theta_hat = grid[best] + shift.clamp(-step, step);
        }
    }
    let at_hat = profile_at(&loglik, theta_hat, nuisance)?;
    let ell_max = at_hat.max(ell[best]);
    if ell[best] > at_hat {
        theta_hat = grid[best];
    }

    let lo = profile_at(&loglik, theta_hat - step, nuisance)?;
    let hi = profile_at(&loglik, theta_hat + step, nuisance)?;
    let second = (hi - 2.0 * ell_max + lo) / (step * step);
    if !(second < 0.0) {
        return Err(Error::OptimizationFailure {
            theta: theta_hat,
            reason: format!("profile curvature {second} is not negative at the maximum"),
        });
    }
    let i_n = -(n as f64) / second;

    let ell_star: Vec<f64> = ell.iter().map(|v| (v - ell_max).min(0.0)).collect();
    let ys: Vec<f64> = ell_star.iter().map(|v| v.exp()).collect();
    let c_n = *trapezoid_cumulative(&grid, &ys).last().expect("grid nonempty");
    Ok(ProfileCurve {
        grid,
        ell_star,
        theta_hat,
        ell_max,
        i_n,
        c_n,
        n,
    })
}

/// Grid CD `G_i = integral_{grid start}^{theta_i} exp(ell_star) / c_n`.
pub fn normalize_to_acd(curve: &ProfileCurve) -> Result<ConfidenceDistribution> {
    let k = curve.ell_star.len();
    let lower = curve.ell_star[0].exp();
    let upper = curve.ell_star[k - 1].exp();
    if lower >= EDGE_DECAY || upper >= EDGE_DECAY {
        return Err(Error::WindowTooNarrow { lower, upper });
    }
    if !(curve.c_n.is_finite() && curve.c_n > 0.0) {
        return Err(Error::NonIntegrable(format!("c_n = {}", curve.c_n)));
    }
    // ell_star <= 0 with max 0, so exponentiating cannot overflow
    let ys: Vec<f64> = curve.ell_star.iter().map(|v| v.exp()).collect();
    let cum = trapezoid_cumulative(&curve.grid, &ys);
    let total = cum[k - 1];
    let mut h: Vec<f64> = cum.iter().map(|c| (c / total).min(1.0)).collect();
    h[k - 1] = 1.0;
    ConfidenceDistribution::grid(curve.grid.clone(), h)
}

/// Normal CD with mean `theta_hat` and variance `i_n / n`, truncated to
/// `window` and renormalized.
pub fn wald_acd(
    theta_hat: f64,
    i_n: f64,
    n: usize,
    window: (f64, f64),
) -> Result<ConfidenceDistribution> {
    if n == 0 || !(i_n.is_finite() && i_n > 0.0) {
        return Err(Error::ParameterDomain(format!("need n >= 1 and i_n > 0 (n = {n}, i_n = {i_n})")));
    }
    let (a, b) = window;
    if !(a <= theta_hat && theta_hat <= b) || a.is_nan() || b.is_nan() || a >= b {
        return Err(Error::Domain(format!(
            "window ({a}, {b}) must contain theta_hat = {theta_hat}"
        )));
    }
    let sd = (i_n / n as f64).sqrt();
    if a == f64::NEG_INFINITY && b == f64::INFINITY {
        return LocationScaleCdf::new(DistKind::standard_normal(), theta_hat, sd)?.into_cd();
    }
    let t = TruncatedNormalCdf::new(theta_hat, sd, a, b)?;
    ConfidenceDistribution::analytic(Arc::new(t), window)
}

struct TruncatedNormalCdf {
    mean: f64,
    sd: f64,
    lo: f64,
    hi: f64,
    p_lo: f64,
    mass: f64,
}

impl fmt::Debug for TruncatedNormalCdf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "TruncatedNormal(mean={}, sd={}, [{}, {}])",
            self.mean, self.sd, self.lo, self.hi
        )
    }
}

impl TruncatedNormalCdf {
    fn new(mean: f64, sd: f64, lo: f64, hi: f64) -> Result<Self> {
        let n = DistKind::standard_normal();
        let p_lo = n.cdf_raw((lo - mean) / sd);
        let p_hi = n.cdf_raw((hi - mean) / sd);
        let mass = p_hi - p_lo;
        if !(mass > 0.0) {
            return Err(Error::Domain("truncation window carries no normal mass".into()));
        }
        Ok(Self {
            mean,
            sd,
            lo,
            hi,
            p_lo,
            mass,
        })
    }
}

impl AnalyticCdf for TruncatedNormalCdf {
    fn cdf(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        if x >= self.hi {
            return 1.0;
        }
        let p = DistKind::standard_normal().cdf_raw((x - self.mean) / self.sd);
        ((p - self.p_lo) / self.mass).clamp(0.0, 1.0)
    }

    fn density(&self, x: f64) -> Option<f64> {
        if x < self.lo || x > self.hi {
            return Some(0.0);
        }
        let z = (x - self.mean) / self.sd;
        DistKind::standard_normal()
            .pdf_raw(z)
            .map(|d| d / (self.sd * self.mass))
    }

    fn quantile(&self, s: f64) -> Option<f64> {
        let p = self.p_lo + s * self.mass;
        let z = DistKind::standard_normal().quantile_raw(p.clamp(1e-300, 1.0 - 1e-16)).ok()?;
        Some((self.mean + self.sd * z).clamp(self.lo, self.hi))
    }

    fn log_cdf(&self, x: f64) -> Option<f64> {
        if self.lo == f64::NEG_INFINITY {
            let l = DistKind::standard_normal().log_tail_raw((x - self.mean) / self.sd, Tail::Lower);
            return Some(l - self.mass.ln());
        }
        None
    }
}

/// Builds the normalized-likelihood CD with an automatic window: a pilot
/// profile over `pilot` locates `theta_hat` and `i_n`, then the window
/// `theta_hat +/- 10 sqrt(i_n / n)` (clipped to `domain`) is widened by a
/// factor 2 up to three times while the edges have not decayed.
pub fn profile_acd_auto<F>(
    loglik: F,
    n: usize,
    pilot: (f64, f64),
    domain: (f64, f64),
    grid_size: usize,
    nuisance: Option<NuisanceBounds>,
) -> Result<(ConfidenceDistribution, ProfileCurve)>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let first = profile_curve(&loglik, n, pilot, grid_size, nuisance)?;
    let sd = (first.i_n / n as f64).sqrt();
    let mut half = 10.0 * sd;
    let mut last_err = None;
    for _ in 0..4 {
        let mut a = first.theta_hat - half;
        let mut b = first.theta_hat + half;
        if a <= domain.0 {
            a = domain.0 + 1e-9 * (first.theta_hat - domain.0).abs().max(f64::MIN_POSITIVE);
        }
        if b >= domain.1 {
            b = domain.1 - 1e-9 * (domain.1 - first.theta_hat).abs().max(f64::MIN_POSITIVE);
        }
        let curve = profile_curve(&loglik, n, (a, b), grid_size, nuisance)?;
        match normalize_to_acd(&curve) {
            Ok(h) => return Ok((h, curve)),
            Err(e @ Error::WindowTooNarrow { .. }) => {
                last_err = Some(e);
                half *= 2.0;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("loop ran"))
}
