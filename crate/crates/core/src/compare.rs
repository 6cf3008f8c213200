//! Precision of competing CDs: loss-weighted dispersion, integrated risk,
//! large-deviation slopes and Monte Carlo stochastic dominance.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cd::{check_integrable, quantile_domain_integral, ConfidenceDistribution, Repr};
use crate::error::{Error, Result};
use crate::probkernel::{dkw_epsilon, midpoint, pairwise_sum};
use crate::simlab::{map_paired, map_replicates, CdGenerator, McEstimate, MIN_REPS};

/// A valley-shaped loss `phi(x, theta)`.
#[derive(Clone)]
pub enum LossSpec {
    SquaredError,
    Absolute,
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossSpec::SquaredError => f.write_str("SquaredError"),
            LossSpec::Absolute => f.write_str("Absolute"),
            LossSpec::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl LossSpec {
    pub fn eval(&self, x: f64, theta: f64) -> f64 {
        match self {
            LossSpec::SquaredError => (x - theta) * (x - theta),
            LossSpec::Absolute => (x - theta).abs(),
            LossSpec::Custom(f) => f(x, theta),
        }
    }

    /// Spot-checks nonnegativity and the valley shape about `theta` on
    /// `theta +/- scale * k / 20`, `k = 0..=20`.
    pub fn check(&self, theta: f64, scale: f64) -> Result<()> {
        let at = self.eval(theta, theta);
        let mut prev = (at, at);
        for k in 0..=20 {
            let d = scale * k as f64 / 20.0;
            let (lo, hi) = (self.eval(theta - d, theta), self.eval(theta + d, theta));
            if !(lo >= 0.0 && hi >= 0.0) || lo < prev.0 || hi < prev.1 || lo < at || hi < at {
                return Err(Error::ParameterDomain(format!(
                    "loss is not valley-shaped about {theta} (offset {d})"
                )));
            }
            prev = (lo, hi);
        }
        Ok(())
    }
}

/// `integral phi(x, theta0) dH(x)` for one realized CD.
pub fn sample_dispersion(h: &ConfidenceDistribution, loss: &LossSpec, theta0: f64) -> Result<f64> {
    if let Repr::WeightedSample(w) = h.repr() {
        let terms: Vec<f64> = w
            .atoms()
            .iter()
            .zip(w.weights())
            .map(|(&a, &p)| p * loss.eval(a, theta0))
            .collect();
        return Ok(pairwise_sum(&terms));
    }
    check_integrable(h)?;
    let v = quantile_domain_integral(h, |x| loss.eval(x, theta0), 2048)?;
    if !v.is_finite() {
        return Err(Error::NonIntegrable(format!("dispersion evaluated to {v}")));
    }
    Ok(v)
}

fn check_reps(reps: usize) -> Result<()> {
    if reps < MIN_REPS {
        return Err(Error::ParameterDomain(format!("reps = {reps} must be at least {MIN_REPS}")));
    }
    Ok(())
}

/// Monte Carlo mean of [`sample_dispersion`] at the generator's truth.
pub fn mc_dispersion(gen: &CdGenerator, loss: &LossSpec, reps: usize) -> Result<McEstimate> {
    check_reps(reps)?;
    let theta0 = gen.theta0()?;
    let res = map_replicates(gen, reps, |_, h| sample_dispersion(h, loss, theta0))?;
    McEstimate::from_values(&res.values, res.failures)
}

/// Paired Monte Carlo estimate of `d(gen1) - d(gen2)` on common data.
pub fn mc_dispersion_difference(
    gen1: &CdGenerator,
    gen2: &CdGenerator,
    loss: &LossSpec,
    reps: usize,
) -> Result<McEstimate> {
    check_reps(reps)?;
    let theta0 = gen1.theta0()?;
    let res = map_paired(gen1, gen2, reps, |_, h1, h2| {
        Ok(sample_dispersion(h1, loss, theta0)? - sample_dispersion(h2, loss, theta0)?)
    })?;
    McEstimate::from_values(&res.values, res.failures)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PsiSpec {
    Identity,
    Square,
}

impl PsiSpec {
    pub fn eval(self, t: f64) -> f64 {
        match self {
            PsiSpec::Identity => t,
            PsiSpec::Square => t * t,
        }
    }
}

/// Weight measure `W`, centred at the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightSpec {
    /// Degenerate window at the truth, read as the Kolmogorov distance
    /// `sup_x |H(x) - 1{x >= theta0}| = max(H(theta0-), 1 - H(theta0))`.
    KsAtTruth,
    Uniform { half_width: f64 },
    /// Normal density with standard deviation `sd`, integrated over
    /// `theta0 +/- 8 sd`.
    Gaussian { sd: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskSpec {
    pub psi: PsiSpec,
    pub weight: WeightSpec,
}

impl RiskSpec {
    fn validate(&self) -> Result<()> {
        match self.weight {
            WeightSpec::KsAtTruth => Ok(()),
            WeightSpec::Uniform { half_width: w } | WeightSpec::Gaussian { sd: w } => {
                if w.is_finite() && w > 0.0 {
                    Ok(())
                } else {
                    Err(Error::ParameterDomain(format!("weight width {w} must be positive")))
                }
            }
        }
    }
}

/// `integral psi(|H(x) - 1{x >= theta0}|) dW(x)` for one realized CD, by a
/// 256-point midpoint rule split at `theta0`.
pub fn sample_risk(h: &ConfidenceDistribution, spec: &RiskSpec, theta0: f64) -> Result<f64> {
    spec.validate()?;
    let integrand = |x: f64| {
        let step = if x >= theta0 { 1.0 } else { 0.0 };
        spec.psi.eval((h.eval(x) - step).abs())
    };
    let (half, dens): (f64, Box<dyn Fn(f64) -> f64>) = match spec.weight {
        WeightSpec::KsAtTruth => {
            let d = h.eval_left(theta0).max(1.0 - h.eval(theta0));
            return Ok(spec.psi.eval(d));
        }
        WeightSpec::Uniform { half_width } => (half_width, Box::new(move |_| 0.5 / half_width)),
        WeightSpec::Gaussian { sd } => (
            8.0 * sd,
            Box::new(move |x: f64| {
                let z = (x - theta0) / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
            }),
        ),
    };
    let f = |x: f64| integrand(x) * dens(x);
    Ok(midpoint(&f, theta0 - half, theta0, 128) + midpoint(&f, theta0, theta0 + half, 128))
}

pub fn risk(gen: &CdGenerator, spec: &RiskSpec, reps: usize) -> Result<McEstimate> {
    check_reps(reps)?;
    spec.validate()?;
    let theta0 = gen.theta0()?;
    let res = map_replicates(gen, reps, |_, h| sample_risk(h, spec, theta0))?;
    McEstimate::from_values(&res.values, res.failures)
}

/// `(1/n) log H(theta0 - eps)` and `(1/n) log(1 - H(theta0 + eps))`.
/// A tail with no mass gives `-inf` and sets its flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BahadurSlopes {
    pub left: f64,
    pub right: f64,
    pub left_empty: bool,
    pub right_empty: bool,
}

pub fn bahadur_slopes(h: &ConfidenceDistribution, theta0: f64, eps: f64, n: usize) -> Result<BahadurSlopes> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Domain(format!("eps = {eps} must be positive")));
    }
    if n == 0 {
        return Err(Error::Domain("n must be positive".into()));
    }
    let nf = n as f64;
    let l = h.log_eval(theta0 - eps);
    let r = h.log_complement(theta0 + eps);
    Ok(BahadurSlopes {
        left: (l / nf).min(0.0),
        right: (r / nf).min(0.0),
        left_empty: l == f64::NEG_INFINITY,
        right_empty: r == f64::NEG_INFINITY,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    #[serde(rename = "1 dominates")]
    FirstDominates,
    #[serde(rename = "2 dominates")]
    SecondDominates,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsComparison {
    pub eps: f64,
    /// ECDFs over replicates on `DominanceReport::grid`.
    pub left_1: Vec<f64>,
    pub left_2: Vec<f64>,
    pub right_1: Vec<f64>,
    pub right_2: Vec<f64>,
    /// Grid average of `F_1 - F_2`, summed over both tails.
    pub net_area: f64,
    pub verdict: Verdict,
}

/// For `t` in `{0.25, 0.5, 0.75}`: ECDFs of `|Q_1(t) - theta0|` and
/// `|Q_2(t) - theta0|` on pooled quantiles of both.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalCheck {
    pub t: f64,
    pub points: Vec<f64>,
    pub ecdf_1: Vec<f64>,
    pub ecdf_2: Vec<f64>,
    /// `max(F_2 - F_1)` if generator 1 dominates, otherwise the reverse.
    pub max_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub theta0: f64,
    pub reps: usize,
    pub used: usize,
    pub failures: usize,
    pub dkw: f64,
    pub tolerance: f64,
    pub grid: Vec<f64>,
    pub per_eps: Vec<EpsComparison>,
    pub verdict: Verdict,
    pub interval_checks: Vec<IntervalCheck>,
}

fn ecdf_on(values: &[f64], grid: &[f64]) -> Vec<f64> {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    grid.iter()
        .map(|&t| s.partition_point(|&v| v <= t) as f64 / s.len() as f64)
        .collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x - y).fold(f64::NEG_INFINITY, f64::max)
}

/// Verdict from the stored ECDFs. Generator 1 dominates when neither of
/// its tail statistics exceeds generator 2's stochastically by more than
/// `tol` anywhere on the grid and the net area between the ECDFs favours
/// it; equal ECDFs give no verdict.
fn verdict_of(c: &EpsComparison, tol: f64) -> Verdict {
    let behind_1 = max_diff(&c.left_2, &c.left_1).max(max_diff(&c.right_2, &c.right_1));
    let behind_2 = max_diff(&c.left_1, &c.left_2).max(max_diff(&c.right_1, &c.right_2));
    if behind_1 <= tol && c.net_area > 0.0 {
        Verdict::FirstDominates
    } else if behind_2 <= tol && c.net_area < 0.0 {
        Verdict::SecondDominates
    } else {
        Verdict::Inconclusive
    }
}

fn net_area(c: &EpsComparison) -> f64 {
    let terms: Vec<f64> = c
        .left_1
        .iter()
        .zip(&c.left_2)
        .chain(c.right_1.iter().zip(&c.right_2))
        .map(|(a, b)| a - b)
        .collect();
    pairwise_sum(&terms) / c.left_1.len() as f64
}

struct RepStats {
    tails: Vec<[f64; 4]>,
    dev: [[f64; 2]; 3],
}

const INTERVAL_T: [f64; 3] = [0.25, 0.5, 0.75];

/// Paired Monte Carlo comparison of `H_1(theta0 - eps)` against
/// `H_2(theta0 - eps)` and of the right tails, on a 99-point grid with
/// tolerance `2 DKW(reps, 0.05)`.
pub fn dominance_mc(gen1: &CdGenerator, gen2: &CdGenerator, eps_grid: &[f64], reps: usize) -> Result<DominanceReport> {
    check_reps(reps)?;
    if eps_grid.is_empty() || eps_grid.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::Domain("eps grid must be nonempty and positive".into()));
    }
    let theta0 = gen1.theta0()?;
    let res = map_paired(gen1, gen2, reps, |_, h1, h2| {
        let tails = eps_grid
            .iter()
            .map(|&e| {
                [
                    h1.eval(theta0 - e),
                    h2.eval(theta0 - e),
                    1.0 - h1.eval(theta0 + e),
                    1.0 - h2.eval(theta0 + e),
                ]
            })
            .collect();
        let mut dev = [[0.0; 2]; 3];
        for (k, &t) in INTERVAL_T.iter().enumerate() {
            dev[k] = [(h1.quantile(t)? - theta0).abs(), (h2.quantile(t)? - theta0).abs()];
        }
        Ok(RepStats { tails, dev })
    })?;
    let used = res.values.len();
    if used < MIN_REPS {
        return Err(Error::InsufficientReplicates {
            usable: used,
            required: MIN_REPS,
        });
    }
    let dkw = dkw_epsilon(used, 0.05);
    let tolerance = 2.0 * dkw;
    let grid: Vec<f64> = (1..=99).map(|k| k as f64 / 100.0).collect();
    let col = |j: usize, e: usize| -> Vec<f64> { res.values.iter().map(|r| r.tails[e][j]).collect() };
    let per_eps: Vec<EpsComparison> = eps_grid
        .iter()
        .enumerate()
        .map(|(e, &eps)| {
            let mut c = EpsComparison {
                eps,
                left_1: ecdf_on(&col(0, e), &grid),
                left_2: ecdf_on(&col(1, e), &grid),
                right_1: ecdf_on(&col(2, e), &grid),
                right_2: ecdf_on(&col(3, e), &grid),
                net_area: 0.0,
                verdict: Verdict::Inconclusive,
            };
            c.net_area = net_area(&c);
            c.verdict = verdict_of(&c, tolerance);
            c
        })
        .collect();
    let verdict = if per_eps.iter().all(|c| c.verdict == Verdict::FirstDominates) {
        Verdict::FirstDominates
    } else if per_eps.iter().all(|c| c.verdict == Verdict::SecondDominates) {
        Verdict::SecondDominates
    } else {
        Verdict::Inconclusive
    };
    let interval_checks = INTERVAL_T
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let d1: Vec<f64> = res.values.iter().map(|r| r.dev[k][0]).collect();
            let d2: Vec<f64> = res.values.iter().map(|r| r.dev[k][1]).collect();
            let mut pooled: Vec<f64> = d1.iter().chain(&d2).copied().collect();
            pooled.sort_by(f64::total_cmp);
            let points: Vec<f64> = (1..=99).map(|j| pooled[(j * (pooled.len() - 1)) / 100]).collect();
            let ecdf_1 = ecdf_on(&d1, &points);
            let ecdf_2 = ecdf_on(&d2, &points);
            let max_violation = match verdict {
                Verdict::SecondDominates => max_diff(&ecdf_1, &ecdf_2),
                _ => max_diff(&ecdf_2, &ecdf_1),
            };
            IntervalCheck {
                t,
                points,
                ecdf_1,
                ecdf_2,
                max_violation,
            }
        })
        .collect();
    Ok(DominanceReport {
        theta0,
        reps,
        used,
        failures: res.failures,
        dkw,
        tolerance,
        grid,
        per_eps,
        verdict,
        interval_checks,
    })
}

/// `max |H_1 - H_2|` over `points` equally spaced points spanning the
/// 0.0005 to 0.9995 quantiles of both CDs.
pub fn sup_distance(h1: &ConfidenceDistribution, h2: &ConfidenceDistribution, points: usize) -> Result<f64> {
    if points < 2 {
        return Err(Error::Domain("need at least 2 points".into()));
    }
    let a = h1.quantile(0.0005)?.min(h2.quantile(0.0005)?);
    let b = h1.quantile(0.9995)?.max(h2.quantile(0.9995)?);
    Ok((0..points)
        .map(|i| {
            let x = a + (b - a) * i as f64 / (points - 1) as f64;
            (h1.eval(x) - h2.eval(x)).abs()
        })
        .fold(0.0, f64::max))
}
