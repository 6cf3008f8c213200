//! Confidence distributions: representations, evaluation, quantiles,
//! densities, CD random variables, monotone transforms and central intervals.

use std::fmt;
use std::sync::Arc;

use rand::distr::Open01;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probkernel::{
    bisect_generalized_inverse, brent, expand_bracket, golden_max, pairwise_sum, DistKind,
    RngStream, Tail,
};

/// A CDF known through evaluators rather than tabulated values.
///
/// Only `cdf` is required. The optional methods let representations with
/// closed forms skip numeric inversion or keep far tails in log space.
pub trait AnalyticCdf: Send + Sync + fmt::Debug {
    fn cdf(&self, x: f64) -> f64;

    /// `H(x-)`.
    fn cdf_left(&self, x: f64) -> f64 {
        self.cdf(x)
    }

    fn density(&self, _x: f64) -> Option<f64> {
        None
    }

    /// `inf { x : H(x) >= s }`.
    fn quantile(&self, _s: f64) -> Option<f64> {
        None
    }

    /// `inf { x : H(x) >= 1 - q }` evaluated without forming `1 - q`.
    fn quantile_complement(&self, _q: f64) -> Option<f64> {
        None
    }

    /// `ln H(x)`.
    fn log_cdf(&self, _x: f64) -> Option<f64> {
        None
    }

    /// `ln(1 - H(x))`.
    fn log_sf(&self, _x: f64) -> Option<f64> {
        None
    }

    fn is_continuous(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
}

/// Piecewise-linear CDF through `(theta_i, h_i)`, constant outside the knots.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCdf {
    theta: Vec<f64>,
    h: Vec<f64>,
}

impl GridCdf {
    pub fn new(theta: Vec<f64>, h: Vec<f64>) -> Result<Self> {
        if theta.is_empty() || theta.len() != h.len() {
            return Err(Error::InvalidData(format!(
                "grid needs matching nonempty columns ({} theta, {} values)",
                theta.len(),
                h.len()
            )));
        }
        if theta.iter().chain(&h).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("grid has non-finite entries".into()));
        }
        if theta.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidData("grid abscissae must be strictly increasing".into()));
        }
        if h.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::MonotonicityViolation("grid values decrease".into()));
        }
        if h[0] < 0.0 || h[h.len() - 1] > 1.0 {
            return Err(Error::InvalidData("grid values must lie in [0, 1]".into()));
        }
        Ok(Self { theta, h })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn values(&self) -> &[f64] {
        &self.h
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.theta.len();
        if x <= self.theta[0] {
            return self.h[0];
        }
        if x >= self.theta[n - 1] {
            return self.h[n - 1];
        }
        let i = self.theta.partition_point(|&t| t <= x); // theta[i-1] <= x < theta[i]
        let (t0, t1) = (self.theta[i - 1], self.theta[i]);
        let (h0, h1) = (self.h[i - 1], self.h[i]);
        let w = (x - t0) / (t1 - t0);
        (h0 + w * (h1 - h0)).clamp(h0, h1)
    }

    fn slope(&self, x: f64) -> f64 {
        let n = self.theta.len();
        if n < 2 || x < self.theta[0] || x >= self.theta[n - 1] {
            return 0.0;
        }
        let i = self.theta.partition_point(|&t| t <= x);
        (self.h[i] - self.h[i - 1]) / (self.theta[i] - self.theta[i - 1])
    }

    fn quantile(&self, s: f64) -> f64 {
        let n = self.theta.len();
        if s <= self.h[0] {
            return self.theta[0];
        }
        if s > self.h[n - 1] {
            return self.theta[n - 1];
        }
        let i = self.h.partition_point(|&v| v < s); // h[i-1] < s <= h[i]
        let (h0, h1) = (self.h[i - 1], self.h[i]);
        let (t0, t1) = (self.theta[i - 1], self.theta[i]);
        let w = (s - h0) / (h1 - h0);
        (t0 + w * (t1 - t0)).clamp(t0, t1)
    }

    /// Midpoint of the steepest segment; the leftmost one on ties.
    fn steepest_midpoint(&self) -> f64 {
        let mut best = (f64::NEG_INFINITY, self.theta[0]);
        for i in 1..self.theta.len() {
            let slope = (self.h[i] - self.h[i - 1]) / (self.theta[i] - self.theta[i - 1]);
            if slope > best.0 {
                best = (slope, 0.5 * (self.theta[i - 1] + self.theta[i]));
            }
        }
        best.1
    }
}

/// Step CDF of weighted atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    atoms: Vec<f64>,
    weights: Vec<f64>,
    cum: Vec<f64>,
}

impl WeightedSample {
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::InvalidData(format!(
                "weighted sample needs matching nonempty columns ({} atoms, {} weights)",
                atoms.len(),
                weights.len()
            )));
        }
        if atoms.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidData("non-finite atom".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidData("weights must be finite and nonnegative".into()));
        }
        let total = pairwise_sum(&weights);
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidData(format!("weights sum to {total}, not 1")));
        }
        let mut idx: Vec<usize> = (0..atoms.len()).collect();
        idx.sort_by(|&a, &b| atoms[a].total_cmp(&atoms[b]).then(a.cmp(&b)));
        let atoms: Vec<f64> = idx.iter().map(|&i| atoms[i]).collect();
        let weights: Vec<f64> = idx.iter().map(|&i| weights[i]).collect();
        let mut cum = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cum.push(acc / total);
        }
        *cum.last_mut().expect("nonempty") = 1.0;
        Ok(Self { atoms, weights, cum })
    }

    /// Equal weights `1/m`. Cumulative weights are formed as `k/m` exactly.
    pub fn equal(mut atoms: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidData("weighted sample needs at least one atom".into()));
        }
        if atoms.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidData("non-finite atom".into()));
        }
        atoms.sort_by(f64::total_cmp);
        let m = atoms.len();
        let w = 1.0 / m as f64;
        let cum = (1..=m).map(|k| k as f64 / m as f64).collect();
        Ok(Self {
            weights: vec![w; m],
            atoms,
            cum,
        })
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn eval(&self, x: f64) -> f64 {
        let k = self.atoms.partition_point(|&a| a <= x);
        if k == 0 {
            0.0
        } else {
            self.cum[k - 1]
        }
    }

    fn eval_left(&self, x: f64) -> f64 {
        let k = self.atoms.partition_point(|&a| a < x);
        if k == 0 {
            0.0
        } else {
            self.cum[k - 1]
        }
    }

    fn quantile(&self, s: f64) -> f64 {
        let k = self.cum.partition_point(|&c| c < s);
        self.atoms[k.min(self.atoms.len() - 1)]
    }

    fn mean(&self) -> f64 {
        let terms: Vec<f64> = self.atoms.iter().zip(&self.weights).map(|(a, w)| a * w).collect();
        pairwise_sum(&terms)
    }
}

#[derive(Debug, Clone)]
pub enum Repr {
    Analytic(Arc<dyn AnalyticCdf>),
    Grid(GridCdf),
    WeightedSample(WeightedSample),
}

/// Tabulated representations compare by value, analytic ones by identity.
impl PartialEq for Repr {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Repr::Analytic(a), Repr::Analytic(b)) => Arc::ptr_eq(a, b),
            (Repr::Grid(a), Repr::Grid(b)) => a == b,
            (Repr::WeightedSample(a), Repr::WeightedSample(b)) => a == b,
            _ => false,
        }
    }
}

/// A data-dependent distribution on the parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceDistribution {
    support: (f64, f64),
    repr: Repr,
}

fn check_unit_open(s: f64, what: &str) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} = {s} must lie in (0, 1)")))
    }
}

fn check_support(support: (f64, f64)) -> Result<()> {
    if support.0.is_nan() || support.1.is_nan() || support.0 >= support.1 {
        return Err(Error::InvalidData(format!(
            "support ({}, {}) is not a nonempty interval",
            support.0, support.1
        )));
    }
    Ok(())
}

impl ConfidenceDistribution {
    pub fn analytic(cdf: Arc<dyn AnalyticCdf>, support: (f64, f64)) -> Result<Self> {
        check_support(support)?;
        Ok(Self {
            support,
            repr: Repr::Analytic(cdf),
        })
    }

    pub fn grid(theta: Vec<f64>, h: Vec<f64>) -> Result<Self> {
        let g = GridCdf::new(theta, h)?;
        let n = g.theta.len();
        Ok(Self {
            support: (g.theta[0], g.theta[n - 1]),
            repr: Repr::Grid(g),
        })
    }

    pub fn weighted_sample(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::from_sample(WeightedSample::new(atoms, weights)?)
    }

    pub fn equal_weight_sample(atoms: Vec<f64>) -> Result<Self> {
        Self::from_sample(WeightedSample::equal(atoms)?)
    }

    pub fn point_mass(at: f64) -> Result<Self> {
        Self::equal_weight_sample(vec![at])
    }

    fn from_sample(ws: WeightedSample) -> Result<Self> {
        let lo = ws.atoms[0];
        let hi = ws.atoms[ws.atoms.len() - 1];
        Ok(Self {
            support: (lo, hi),
            repr: Repr::WeightedSample(ws),
        })
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn repr(&self) -> &Repr {
        &self.repr
    }

    pub fn kind_name(&self) -> &'static str {
        match self.repr {
            Repr::Analytic(_) => "analytic",
            Repr::Grid(_) => "grid",
            Repr::WeightedSample(_) => "weighted_sample",
        }
    }

    pub fn is_continuous(&self) -> bool {
        match &self.repr {
            Repr::Analytic(a) => a.is_continuous(),
            Repr::Grid(_) => true,
            Repr::WeightedSample(_) => false,
        }
    }

    /// `H(x)`, clamped to `[0, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        let v = match &self.repr {
            Repr::Analytic(a) => {
                if x < self.support.0 {
                    0.0
                } else if x >= self.support.1 {
                    1.0
                } else {
                    a.cdf(x)
                }
            }
            Repr::Grid(g) => g.eval(x),
            Repr::WeightedSample(w) => w.eval(x),
        };
        v.clamp(0.0, 1.0)
    }

    /// `H(x-)`.
    pub fn eval_left(&self, x: f64) -> f64 {
        let v = match &self.repr {
            Repr::Analytic(a) => {
                if x <= self.support.0 {
                    0.0
                } else if x > self.support.1 {
                    1.0
                } else {
                    a.cdf_left(x)
                }
            }
            Repr::Grid(g) => g.eval(x),
            Repr::WeightedSample(w) => w.eval_left(x),
        };
        v.clamp(0.0, 1.0)
    }

    /// `ln H(x)`, kept finite far below the underflow threshold when the
    /// representation has a log-space evaluator.
    pub fn log_eval(&self, x: f64) -> f64 {
        if let Repr::Analytic(a) = &self.repr {
            if x >= self.support.0 && x < self.support.1 {
                if let Some(v) = a.log_cdf(x) {
                    return v.min(0.0);
                }
            }
        }
        self.eval(x).ln()
    }

    /// `ln(1 - H(x))`.
    pub fn log_complement(&self, x: f64) -> f64 {
        if let Repr::Analytic(a) = &self.repr {
            if x >= self.support.0 && x < self.support.1 {
                if let Some(v) = a.log_sf(x) {
                    return v.min(0.0);
                }
            }
        }
        (-self.eval(x)).ln_1p()
    }

    /// Generalized inverse `inf { x : H(x) >= s }`.
    pub fn quantile(&self, s: f64) -> Result<f64> {
        check_unit_open(s, "s")?;
        Ok(self.quantile_unchecked(s))
    }

    /// `quantile(1 - q)`, computed from the upper tail when possible.
    pub fn quantile_complement(&self, q: f64) -> Result<f64> {
        check_unit_open(q, "q")?;
        if let Repr::Analytic(a) = &self.repr {
            if let Some(v) = a.quantile_complement(q) {
                return Ok(v.clamp(self.support.0, self.support.1));
            }
        }
        Ok(self.quantile_unchecked(1.0 - q))
    }

    pub(crate) fn quantile_unchecked(&self, s: f64) -> f64 {
        match &self.repr {
            Repr::Analytic(a) => match a.quantile(s) {
                Some(v) => v.clamp(self.support.0, self.support.1),
                None => self.bisect_quantile(s),
            },
            Repr::Grid(g) => g.quantile(s),
            Repr::WeightedSample(w) => w.quantile(s),
        }
    }

    fn bisect_quantile(&self, s: f64) -> f64 {
        let (lo_s, hi_s) = self.support;
        let h = |x: f64| self.eval(x);
        let mut lo = if lo_s.is_finite() { lo_s } else { -1.0 };
        let mut hi = if hi_s.is_finite() { hi_s } else { 1.0 };
        if lo_s.is_finite() && h(lo_s) >= s {
            return lo_s;
        }
        let mut step = 1.0;
        while h(lo) >= s && lo > f64::MIN {
            hi = lo;
            lo = if lo_s.is_finite() { lo_s.max(lo - step) } else { lo - step };
            step *= 2.0;
            if lo == lo_s {
                break;
            }
        }
        let mut step = 1.0;
        while h(hi) < s && hi < f64::MAX {
            lo = hi;
            hi = if hi_s.is_finite() { hi_s.min(hi + step) } else { (hi + step).min(f64::MAX) };
            step *= 2.0;
            if hi == hi_s {
                break;
            }
        }
        if lo > hi {
            std::mem::swap(&mut lo, &mut hi);
        }
        if h(lo) >= s {
            return lo;
        }
        bisect_generalized_inverse(h, s, lo, hi)
    }

    /// `(Q(alpha/2), Q(1 - alpha/2))` with `alpha = 1 - level`.
    pub fn central_interval(&self, level: f64) -> Result<(f64, f64)> {
        check_unit_open(level, "level")?;
        let a = 0.5 * (1.0 - level);
        let lo = self.quantile(a)?;
        let hi = self.quantile_complement(a)?;
        Ok((lo, hi.max(lo)))
    }

    /// CD density `h(x) = H'(x)`.
    pub fn density(&self, x: f64) -> Result<f64> {
        match &self.repr {
            Repr::WeightedSample(_) => Err(Error::UnsupportedRepresentation("weighted_sample")),
            Repr::Grid(g) => Ok(g.slope(x).max(0.0)),
            Repr::Analytic(a) => {
                if x < self.support.0 || x > self.support.1 {
                    return Ok(0.0);
                }
                if let Some(d) = a.density(x) {
                    return Ok(d.max(0.0));
                }
                let h = (1e-6 * x.abs()).max(1e-6);
                Ok(((self.eval(x + h) - self.eval(x - h)) / (2.0 * h)).max(0.0))
            }
        }
    }

    /// Tabulates this CD on `points` knots placed at quantiles, producing a
    /// grid representation.
    pub fn to_grid(&self, points: usize) -> Result<Self> {
        if let Repr::Grid(_) = self.repr {
            return Ok(self.clone());
        }
        let points = points.max(8);
        let mut theta = Vec::with_capacity(points);
        for i in 0..points {
            let v = (i as f64 + 0.5) / points as f64;
            let s = smooth_step(v).clamp(1e-12, 1.0 - 1e-12);
            let x = if s > 0.5 {
                self.quantile_complement(smooth_step(1.0 - v).max(1e-12))?
            } else {
                self.quantile(s)?
            };
            if theta.last().is_none_or(|&last| x > last) {
                theta.push(x);
            }
        }
        let h: Vec<f64> = theta.iter().map(|&x| self.eval(x)).collect();
        let mut hh = Vec::with_capacity(h.len());
        let mut running = 0.0f64;
        for v in h {
            running = running.max(v);
            hh.push(running);
        }
        Self::grid(theta, hh)
    }
}

/// Quantile-domain substitution `s = g(v)`, flat to third order at both ends.
pub(crate) fn smooth_step(v: f64) -> f64 {
    let v2 = v * v;
    let v4 = v2 * v2;
    v4 * (35.0 - 84.0 * v + 70.0 * v2 - 20.0 * v2 * v)
}

pub(crate) fn smooth_step_deriv(v: f64) -> f64 {
    let w = v * (1.0 - v);
    140.0 * w * w * w
}

/// `integral_0^1 f(Q(s)) ds` by the midpoint rule in `v` after `s = g(v)`.
pub(crate) fn quantile_domain_integral<F: Fn(f64) -> f64>(
    h: &ConfidenceDistribution,
    f: F,
    points: usize,
) -> Result<f64> {
    let mut terms = Vec::with_capacity(points);
    for i in 0..points {
        let v = (i as f64 + 0.5) / points as f64;
        let x = if v > 0.5 {
            h.quantile_complement(smooth_step(1.0 - v))?
        } else {
            h.quantile(smooth_step(v))?
        };
        terms.push(f(x) * smooth_step_deriv(v));
    }
    Ok(pairwise_sum(&terms) / points as f64)
}

/// Rejects CDs whose tails are too heavy for a finite first moment: the
/// tail contribution `p * |Q(p) - M|` must shrink markedly from `p = 1e-6`
/// to `p = 1e-10` on both sides.
pub(crate) fn check_integrable(h: &ConfidenceDistribution) -> Result<()> {
    if !matches!(h.repr, Repr::Analytic(_)) {
        return Ok(());
    }
    let m = h.quantile(0.5)?;
    let (p1, p2) = (1e-6, 1e-10);
    let lower = |p: f64| -> Result<f64> { Ok(p * (h.quantile(p)? - m).abs()) };
    let upper = |p: f64| -> Result<f64> { Ok(p * (h.quantile_complement(p)? - m).abs()) };
    for (side, f) in [("lower", &lower as &dyn Fn(f64) -> Result<f64>), ("upper", &upper)] {
        let (a, b) = (f(p1)?, f(p2)?);
        if !a.is_finite() || !b.is_finite() || b > 0.5 * a {
            return Err(Error::NonIntegrable(format!(
                "{side} tail mass times deviation does not decay ({a:e} at 1e-6, {b:e} at 1e-10)"
            )));
        }
    }
    Ok(())
}

/// CD mean `integral t dH(t)`.
pub fn cd_mean(h: &ConfidenceDistribution) -> Result<f64> {
    if let Repr::WeightedSample(w) = &h.repr {
        return Ok(w.mean());
    }
    check_integrable(h)?;
    quantile_domain_integral(h, |x| x, 1024)
}

pub fn cd_median(h: &ConfidenceDistribution) -> f64 {
    h.quantile_unchecked(0.5)
}

/// Maximizer of the CD density; smallest maximizer on ties.
pub fn cd_mode(h: &ConfidenceDistribution) -> Result<f64> {
    match &h.repr {
        Repr::WeightedSample(_) => Err(Error::UnsupportedRepresentation("weighted_sample")),
        Repr::Grid(g) => Ok(g.steepest_midpoint()),
        Repr::Analytic(_) => {
            let a = h.quantile(0.001)?;
            let b = h.quantile_complement(0.001)?;
            if !(b > a) {
                return Ok(a);
            }
            let dens = |x: f64| h.density(x).unwrap_or(0.0);
            // coarse scan guards against golden-section locking onto a shoulder
            let cells = 256;
            let step = (b - a) / cells as f64;
            let mut best = (a, dens(a));
            for i in 1..=cells {
                let x = a + i as f64 * step;
                let d = dens(x);
                if d > best.1 {
                    best = (x, d);
                }
            }
            let lo = (best.0 - step).max(a);
            let hi = (best.0 + step).min(b);
            let (x, _) = golden_max(dens, lo, hi, 1e-8);
            Ok(x)
        }
    }
}

/// A draw source `xi = Q(U)` for a fixed CD. The stream advances with use.
pub struct CdRandomVariable {
    source: ConfidenceDistribution,
    rng: ChaCha8Rng,
}

impl CdRandomVariable {
    pub fn new(source: ConfidenceDistribution, stream: RngStream) -> Self {
        Self {
            source,
            rng: stream.rng(),
        }
    }

    pub fn source(&self) -> &ConfidenceDistribution {
        &self.source
    }

    pub fn sample(&mut self, m: usize) -> Vec<f64> {
        (0..m)
            .map(|_| {
                let u: f64 = self.rng.sample(Open01);
                self.source.quantile_unchecked(u)
            })
            .collect()
    }
}

type RealMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// CD of `g(theta)` for strictly monotone `g`.
struct TransformedCdf {
    base: ConfidenceDistribution,
    g: RealMap,
    g_inv: Option<RealMap>,
    direction: Direction,
}

impl fmt::Debug for TransformedCdf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransformedCdf")
            .field("base", &self.base)
            .field("direction", &self.direction)
            .finish()
    }
}

impl TransformedCdf {
    /// `g^{-1}(x)` clamped to the base support.
    fn inverse(&self, x: f64) -> f64 {
        let (lo_s, hi_s) = self.base.support;
        if let Some(inv) = &self.g_inv {
            return inv(x).clamp(lo_s, hi_s);
        }
        let sign = match self.direction {
            Direction::Increasing => 1.0,
            Direction::Decreasing => -1.0,
        };
        let g = &self.g;
        let phi = |y: f64| {
            let v = sign * (g(y) - x);
            if v.is_nan() {
                // outside g's domain: push the bracket back toward the support
                if y <= lo_s { -1.0 } else { 1.0 }
            } else {
                v
            }
        };
        let q1 = self.base.quantile_unchecked(0.25);
        let q3 = self.base.quantile_unchecked(0.75);
        let (a, b) = if q3 > q1 { (q1, q3) } else { (q1 - 1.0, q1 + 1.0) };
        let min = if lo_s.is_finite() { lo_s } else { -f64::MAX };
        let max = if hi_s.is_finite() { hi_s } else { f64::MAX };
        match expand_bracket(phi, a.max(min), b.min(max), min, max) {
            Ok((l, h)) if l == h => l,
            Ok((l, h)) => brent(phi, l, h, 0.0).unwrap_or(h),
            Err(_) => max,
        }
    }
}

impl AnalyticCdf for TransformedCdf {
    fn cdf(&self, x: f64) -> f64 {
        let y = self.inverse(x);
        match self.direction {
            Direction::Increasing => self.base.eval(y),
            Direction::Decreasing => 1.0 - self.base.eval_left(y),
        }
    }

    fn cdf_left(&self, x: f64) -> f64 {
        let y = self.inverse(x);
        match self.direction {
            Direction::Increasing => self.base.eval_left(y),
            Direction::Decreasing => 1.0 - self.base.eval(y),
        }
    }

    fn quantile(&self, s: f64) -> Option<f64> {
        match self.direction {
            Direction::Increasing => Some((self.g)(self.base.quantile_unchecked(s))),
            Direction::Decreasing if self.base.is_continuous() => {
                Some((self.g)(self.base.quantile_complement(s).ok()?))
            }
            Direction::Decreasing => None,
        }
    }

    fn quantile_complement(&self, q: f64) -> Option<f64> {
        match self.direction {
            Direction::Increasing if self.base.is_continuous() => {
                Some((self.g)(self.base.quantile_complement(q).ok()?))
            }
            Direction::Decreasing if self.base.is_continuous() => {
                Some((self.g)(self.base.quantile_unchecked(q)))
            }
            _ => None,
        }
    }

    fn log_cdf(&self, x: f64) -> Option<f64> {
        if !self.base.is_continuous() {
            return None;
        }
        let y = self.inverse(x);
        Some(match self.direction {
            Direction::Increasing => self.base.log_eval(y),
            Direction::Decreasing => self.base.log_complement(y),
        })
    }

    fn log_sf(&self, x: f64) -> Option<f64> {
        if !self.base.is_continuous() {
            return None;
        }
        let y = self.inverse(x);
        Some(match self.direction {
            Direction::Increasing => self.base.log_complement(y),
            Direction::Decreasing => self.base.log_eval(y),
        })
    }

    fn is_continuous(&self) -> bool {
        self.base.is_continuous()
    }
}

/// CD of `g(theta)` for a strictly monotone `g` (declared `direction`).
///
/// `g_inv`, when supplied, replaces the bracketed numeric inverse.
pub fn transform_cd(
    h: &ConfidenceDistribution,
    g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    g_inv: Option<RealMap>,
    direction: Direction,
) -> Result<ConfidenceDistribution> {
    let g: RealMap = Arc::new(g);
    // evaluation grid: atoms for samples, quantiles otherwise
    let xs: Vec<f64> = match &h.repr {
        Repr::WeightedSample(w) => {
            let mut a = w.atoms.clone();
            a.dedup();
            a
        }
        _ => {
            let mut v: Vec<f64> = (0..101)
                .map(|i| h.quantile_unchecked(0.001 + 0.998 * i as f64 / 100.0))
                .collect();
            v.dedup();
            v
        }
    };
    let ys: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::MapDomain("transform is not finite on the CD's range".into()));
    }
    for w in ys.windows(2) {
        let ok = match direction {
            Direction::Increasing => w[1] > w[0],
            Direction::Decreasing => w[1] < w[0],
        };
        if !ok {
            return Err(Error::MonotonicityViolation(format!(
                "map is not strictly {direction:?} on the evaluation grid ({} then {})",
                w[0], w[1]
            )));
        }
    }
    if let Repr::WeightedSample(w) = &h.repr {
        let atoms: Vec<f64> = w.atoms.iter().map(|&a| g(a)).collect();
        return ConfidenceDistribution::from_sample(WeightedSample::new(atoms, w.weights.clone())?);
    }
    let map_edge = |e: f64, fallback: f64| {
        let v = g(e);
        if v.is_nan() {
            fallback
        } else {
            v
        }
    };
    let (lo, hi) = h.support;
    let (a, b) = match direction {
        Direction::Increasing => (map_edge(lo, f64::NEG_INFINITY), map_edge(hi, f64::INFINITY)),
        Direction::Decreasing => (map_edge(hi, f64::NEG_INFINITY), map_edge(lo, f64::INFINITY)),
    };
    let t = TransformedCdf {
        base: h.clone(),
        g,
        g_inv,
        direction,
    };
    ConfidenceDistribution::analytic(Arc::new(t), (a, b))
}

/// `x -> law.cdf((x - loc) / scale)`: normal and Student-t CDs, Wald CDs.
#[derive(Debug, Clone)]
pub struct LocationScaleCdf {
    pub law: DistKind,
    pub loc: f64,
    pub scale: f64,
}

impl LocationScaleCdf {
    pub fn new(law: DistKind, loc: f64, scale: f64) -> Result<Self> {
        law.validate()?;
        if !loc.is_finite() || !(scale.is_finite() && scale > 0.0) {
            return Err(Error::ParameterDomain(format!(
                "location {loc} and scale {scale} must be finite with scale > 0"
            )));
        }
        Ok(Self { law, loc, scale })
    }

    pub fn into_cd(self) -> Result<ConfidenceDistribution> {
        ConfidenceDistribution::analytic(Arc::new(self), (f64::NEG_INFINITY, f64::INFINITY))
    }

    fn z(&self, x: f64) -> f64 {
        (x - self.loc) / self.scale
    }
}

impl AnalyticCdf for LocationScaleCdf {
    fn cdf(&self, x: f64) -> f64 {
        self.law.cdf_raw(self.z(x))
    }

    fn cdf_left(&self, x: f64) -> f64 {
        self.law.cdf_left_raw(self.z(x))
    }

    fn density(&self, x: f64) -> Option<f64> {
        self.law.pdf_raw(self.z(x)).map(|d| d / self.scale)
    }

    fn quantile(&self, s: f64) -> Option<f64> {
        self.law.quantile_raw(s).ok().map(|z| self.loc + self.scale * z)
    }

    fn quantile_complement(&self, q: f64) -> Option<f64> {
        if !self.law.is_continuous() {
            return None;
        }
        self.law.upper_quantile_raw(q).ok().map(|z| self.loc + self.scale * z)
    }

    fn log_cdf(&self, x: f64) -> Option<f64> {
        Some(self.law.log_tail_raw(self.z(x), Tail::Lower))
    }

    fn log_sf(&self, x: f64) -> Option<f64> {
        Some(self.law.log_tail_raw(self.z(x), Tail::Upper))
    }

    fn is_continuous(&self) -> bool {
        self.law.is_continuous()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_normal_cd(loc: f64, scale: f64) -> ConfidenceDistribution {
        LocationScaleCdf::new(DistKind::standard_normal(), loc, scale)
            .unwrap()
            .into_cd()
            .unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(std_normal_cd(0.0, 1.0).eval(0.0), 0.5);
        let g = ConfidenceDistribution::grid(vec![0.0, 1.0, 2.0], vec![0.0, 0.4, 1.0]).unwrap();
        assert!((g.eval(0.5) - 0.2).abs() < 1e-15);
        assert_eq!(g.eval(-3.0), 0.0);
        assert_eq!(g.eval(7.0), 1.0);
        let w = ConfidenceDistribution::weighted_sample(vec![1.0, 2.0], vec![0.3, 0.7]).unwrap();
        assert_eq!(w.eval(1.5), 0.3);
        assert_eq!(w.quantile(0.5).unwrap(), 2.0);
        assert_eq!(w.eval_left(2.0), 0.3);
    }

    #[test]
    fn quantile_domain_errors() {
        let h = std_normal_cd(3.0, 1.0);
        assert_eq!(h.quantile(0.5).unwrap(), 3.0);
        assert!(matches!(h.quantile(0.0), Err(Error::Domain(_))));
        assert!(matches!(h.central_interval(1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn grid_density_and_mode() {
        let g = ConfidenceDistribution::grid(
            vec![0.0, 1.0, 2.0, 3.0, 4.0],
            vec![0.0, 0.1, 0.1, 0.9, 1.0],
        )
        .unwrap();
        assert!((g.density(0.5).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(g.density(1.5).unwrap(), 0.0);
        assert_eq!(cd_mode(&g).unwrap(), 2.5);
        let w = ConfidenceDistribution::point_mass(1.0).unwrap();
        assert!(matches!(w.density(1.0), Err(Error::UnsupportedRepresentation(_))));
        assert!(matches!(cd_mode(&w), Err(Error::UnsupportedRepresentation(_))));
    }

    #[test]
    fn grid_quantile_is_generalized_inverse() {
        let g = ConfidenceDistribution::grid(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 0.5, 0.5, 1.0])
            .unwrap();
        assert_eq!(g.quantile(0.5).unwrap(), 1.0);
        assert!((g.quantile(0.75).unwrap() - 2.5).abs() < 1e-15);
        assert!((g.quantile(0.25).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn degenerate_grid_draws_are_constant() {
        let g = ConfidenceDistribution::grid(vec![7.0], vec![1.0]).unwrap();
        let mut rv = CdRandomVariable::new(g, RngStream::new(3, 0));
        assert!(rv.sample(0).is_empty());
        assert!(rv.sample(100).iter().all(|&x| x == 7.0));
    }

    #[test]
    fn sample_mean_exact() {
        let w = ConfidenceDistribution::weighted_sample(vec![1.0, 3.0], vec![0.25, 0.75]).unwrap();
        assert_eq!(cd_mean(&w).unwrap(), 2.5);
    }

    #[test]
    fn smooth_step_endpoints() {
        assert_eq!(smooth_step(0.0), 0.0);
        assert!((smooth_step(1.0) - 1.0).abs() < 1e-14);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
        for &v in &[0.1, 0.3, 0.77] {
            assert!((smooth_step(v) + smooth_step(1.0 - v) - 1.0).abs() < 1e-14);
            let d = (smooth_step(v + 1e-6) - smooth_step(v - 1e-6)) / 2e-6;
            assert!((d - smooth_step_deriv(v)).abs() < 1e-6);
        }
    }

    #[test]
    fn weights_must_normalize() {
        assert!(ConfidenceDistribution::weighted_sample(vec![1.0, 2.0], vec![0.3, 0.6]).is_err());
    }

    #[test]
    fn transform_rejects_non_monotone() {
        let h = std_normal_cd(0.0, 1.0);
        let r = transform_cd(&h, |x| x * x, None, Direction::Increasing);
        assert!(matches!(r, Err(Error::MonotonicityViolation(_))));
    }

    #[test]
    fn reflection_of_standard_normal() {
        let h = std_normal_cd(0.0, 1.0);
        let t = transform_cd(&h, |x| -x, None, Direction::Decreasing).unwrap();
        for &x in &[-2.0, -0.3, 0.0, 1.1, 2.5] {
            assert!((t.eval(x) - h.eval(x)).abs() < 1e-12, "x = {x}");
        }
    }
}
