//! Multivariate CDs held as clouds of draws: projections (linear sense),
//! depth and centrality (circular sense), and pointwise transforms.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cd::ConfidenceDistribution;
use crate::error::{Error, Result};
use crate::probkernel::{pairwise_sum, RngStream};

pub const MIN_CLOUD: usize = 1000;
pub const MIN_TUKEY_DIRECTIONS: usize = 180;
pub const DEFAULT_TUKEY_DIRECTIONS: usize = 360;

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub theta_hat: Vec<f64>,
    pub a_n: DMatrix<f64>,
    pub condition_number: f64,
}

/// `m` draws of a `dim`-dimensional CD random vector, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiCD {
    dim: usize,
    cloud: Vec<f64>,
    provenance: Option<Provenance>,
}

impl MultiCD {
    pub fn from_points(dim: usize, points: &[Vec<f64>]) -> Result<Self> {
        if dim == 0 || points.is_empty() {
            return Err(Error::InvalidData("cloud needs dim >= 1 and at least one point".into()));
        }
        let mut cloud = Vec::with_capacity(dim * points.len());
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::InvalidData(format!(
                    "point {i} has {} coordinates, expected {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData(format!("point {i} is not finite")));
            }
            cloud.extend_from_slice(p);
        }
        Ok(Self {
            dim,
            cloud,
            provenance: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.cloud.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.cloud[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.cloud.chunks_exact(self.dim)
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn mean(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|j| {
                let col: Vec<f64> = self.points().map(|p| p[j]).collect();
                pairwise_sum(&col) / self.len() as f64
            })
            .collect()
    }

    /// Sample covariance with divisor `m - 1`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let mu = self.mean();
        let m = self.len() as f64;
        DMatrix::from_fn(self.dim, self.dim, |a, b| {
            let terms: Vec<f64> = self.points().map(|p| (p[a] - mu[a]) * (p[b] - mu[b])).collect();
            pairwise_sum(&terms) / (m - 1.0)
        })
    }
}

/// Standard normal `eta` of dimension `k`.
pub fn standard_normal_eta(k: usize) -> impl Fn(&mut ChaCha8Rng) -> Vec<f64> + Sync {
    move |rng: &mut ChaCha8Rng| (0..k).map(|_| StandardNormal.sample(rng)).collect()
}

fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

/// Cloud of `theta_hat - A^{-1} eta` with `eta` drawn by `eta_sampler`;
/// draw `i` uses child stream `i` of `stream`.
pub fn lcd_from_pivot<S>(
    theta_hat: &[f64],
    a_n: &DMatrix<f64>,
    eta_sampler: S,
    m: usize,
    stream: RngStream,
) -> Result<MultiCD>
where
    S: Fn(&mut ChaCha8Rng) -> Vec<f64> + Sync,
{
    let k = theta_hat.len();
    if k < 2 {
        return Err(Error::InvalidData(format!("dimension {k} must be at least 2")));
    }
    if m < MIN_CLOUD {
        return Err(Error::ParameterDomain(format!("m = {m} must be at least {MIN_CLOUD}")));
    }
    if a_n.nrows() != k || a_n.ncols() != k {
        return Err(Error::LinearAlgebra(format!(
            "A_n is {}x{}, expected {k}x{k}",
            a_n.nrows(),
            a_n.ncols()
        )));
    }
    let inv = a_n
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::LinearAlgebra("A_n is singular".into()))?;
    let cond = condition_number(a_n);
    if !cond.is_finite() {
        return Err(Error::LinearAlgebra("A_n is singular".into()));
    }
    let center = DVector::from_column_slice(theta_hat);
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.substream(i as u64).rng();
            let eta = DVector::from_vec(eta_sampler(&mut rng));
            (&center - &inv * eta).iter().copied().collect()
        })
        .collect();
    let mut cloud = Vec::with_capacity(m * k);
    for r in &rows {
        if r.len() != k || r.iter().any(|v| !v.is_finite()) {
            return Err(Error::MapDomain("eta sampler produced an invalid draw".into()));
        }
        cloud.extend_from_slice(r);
    }
    Ok(MultiCD {
        dim: k,
        cloud,
        provenance: Some(Provenance {
            theta_hat: theta_hat.to_vec(),
            a_n: a_n.clone(),
            condition_number: cond,
        }),
    })
}

/// CD of `lambda' theta`: the equal-weight sample of `lambda' xi`.
pub fn project(mcd: &MultiCD, lambda: &[f64]) -> Result<ConfidenceDistribution> {
    if lambda.len() != mcd.dim {
        return Err(Error::Domain(format!(
            "lambda has {} entries, cloud dimension is {}",
            lambda.len(),
            mcd.dim
        )));
    }
    if lambda.iter().all(|&l| l == 0.0) || lambda.iter().any(|l| !l.is_finite()) {
        return Err(Error::Domain("lambda must be finite and nonzero".into()));
    }
    let atoms = mcd
        .points()
        .map(|p| p.iter().zip(lambda).map(|(a, b)| a * b).sum())
        .collect();
    ConfidenceDistribution::equal_weight_sample(atoms)
}

/// Image cloud `g(xi)`.
pub fn transform_mcd<G>(mcd: &MultiCD, g: G) -> Result<MultiCD>
where
    G: Fn(&[f64]) -> Vec<f64> + Sync,
{
    let rows: Vec<Vec<f64>> = mcd.cloud.par_chunks_exact(mcd.dim).map(&g).collect();
    let l = rows[0].len();
    if l == 0 {
        return Err(Error::MapDomain("map returned an empty vector".into()));
    }
    let mut cloud = Vec::with_capacity(l * rows.len());
    for (i, r) in rows.iter().enumerate() {
        if r.len() != l || r.iter().any(|v| !v.is_finite()) {
            return Err(Error::MapDomain(format!("image of draw {i} is not a finite {l}-vector")));
        }
        cloud.extend_from_slice(r);
    }
    Ok(MultiCD {
        dim: l,
        cloud,
        provenance: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DepthSpec {
    /// `1 / (1 + (x - c)' S^{-1} (x - c))` with `c`, `S` from the cloud.
    Mahalanobis,
    /// Halfspace depth; exact on the line, `directions` equally spaced
    /// directions in the plane.
    Tukey { directions: usize },
}

impl DepthSpec {
    pub fn tukey() -> Self {
        DepthSpec::Tukey {
            directions: DEFAULT_TUKEY_DIRECTIONS,
        }
    }
}

/// Depth relative to a fixed cloud, with per-query work independent of
/// the cloud size up to a logarithm.
#[derive(Debug, Clone)]
pub struct DepthEvaluator {
    dim: usize,
    kind: DepthKind,
}

#[derive(Debug, Clone)]
enum DepthKind {
    Mahalanobis {
        center: DVector<f64>,
        precision: DMatrix<f64>,
    },
    Tukey1 {
        sorted: Vec<f64>,
    },
    Tukey2 {
        dirs: Vec<(f64, f64)>,
        sorted: Vec<Vec<f64>>,
    },
}

impl DepthEvaluator {
    pub fn new(spec: DepthSpec, cloud: &MultiCD) -> Result<Self> {
        let dim = cloud.dim;
        let kind = match spec {
            DepthSpec::Mahalanobis => {
                if cloud.len() <= dim {
                    return Err(Error::LinearAlgebra(
                        "cloud too small for a nonsingular scatter".into(),
                    ));
                }
                let scatter = cloud.covariance();
                let chol = scatter
                    .clone()
                    .cholesky()
                    .ok_or_else(|| Error::LinearAlgebra("scatter is not positive definite".into()))?;
                DepthKind::Mahalanobis {
                    center: DVector::from_vec(cloud.mean()),
                    precision: chol.inverse(),
                }
            }
            DepthSpec::Tukey { directions } => match dim {
                1 => {
                    let mut v: Vec<f64> = cloud.cloud.clone();
                    v.sort_by(f64::total_cmp);
                    DepthKind::Tukey1 { sorted: v }
                }
                2 => {
                    if directions < MIN_TUKEY_DIRECTIONS {
                        return Err(Error::ParameterDomain(format!(
                            "{directions} directions; at least {MIN_TUKEY_DIRECTIONS} required"
                        )));
                    }
                    let dirs: Vec<(f64, f64)> = (0..directions)
                        .map(|j| {
                            let a = std::f64::consts::TAU * j as f64 / directions as f64;
                            (a.cos(), a.sin())
                        })
                        .collect();
                    let sorted = dirs
                        .par_iter()
                        .map(|&(c, s)| {
                            let mut p: Vec<f64> = cloud.points().map(|y| c * y[0] + s * y[1]).collect();
                            p.sort_by(f64::total_cmp);
                            p
                        })
                        .collect();
                    DepthKind::Tukey2 { dirs, sorted }
                }
                _ => {
                    return Err(Error::Domain(format!(
                        "Tukey depth is available for dimension 1 and 2, not {dim}"
                    )))
                }
            },
        };
        Ok(Self { dim, kind })
    }

    pub fn depth(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::Domain(format!(
                "point has {} coordinates, expected {}",
                x.len(),
                self.dim
            )));
        }
        Ok(match &self.kind {
            DepthKind::Mahalanobis { center, precision } => {
                let d = DVector::from_column_slice(x) - center;
                let q = (d.transpose() * precision * &d)[(0, 0)];
                1.0 / (1.0 + q.max(0.0))
            }
            DepthKind::Tukey1 { sorted } => {
                let m = sorted.len();
                let le = sorted.partition_point(|&v| v <= x[0]);
                let ge = m - sorted.partition_point(|&v| v < x[0]);
                le.min(ge) as f64 / m as f64
            }
            DepthKind::Tukey2 { dirs, sorted } => {
                let m = sorted[0].len();
                let mut best = m;
                for ((c, s), proj) in dirs.iter().zip(sorted) {
                    let t = c * x[0] + s * x[1];
                    let ge = m - proj.partition_point(|&v| v < t);
                    best = best.min(ge);
                }
                best as f64 / m as f64
            }
        })
    }
}

pub fn depth(spec: DepthSpec, cloud: &MultiCD, x: &[f64]) -> Result<f64> {
    DepthEvaluator::new(spec, cloud)?.depth(x)
}

/// `C(x)`: the fraction of the reference cloud whose depth is at most the
/// depth of `x` (ties counted, the `<=` convention).
#[derive(Debug, Clone)]
pub struct CentralityFn {
    evaluator: DepthEvaluator,
    sorted_depths: Vec<f64>,
}

impl CentralityFn {
    pub fn new(spec: DepthSpec, reference: &MultiCD) -> Result<Self> {
        let evaluator = DepthEvaluator::new(spec, reference)?;
        let mut sorted_depths = reference
            .cloud
            .par_chunks_exact(reference.dim)
            .map(|p| evaluator.depth(p))
            .collect::<Result<Vec<f64>>>()?;
        sorted_depths.sort_by(f64::total_cmp);
        Ok(Self {
            evaluator,
            sorted_depths,
        })
    }

    pub fn depth(&self, x: &[f64]) -> Result<f64> {
        self.evaluator.depth(x)
    }

    pub fn centrality(&self, x: &[f64]) -> Result<f64> {
        let d = self.evaluator.depth(x)?;
        let k = self.sorted_depths.partition_point(|&v| v <= d);
        Ok(k as f64 / self.sorted_depths.len() as f64)
    }

    /// Whether `x` lies in the central region `{C >= 1 - level}`.
    pub fn central_region_test(&self, level: f64, x: &[f64]) -> Result<bool> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::Domain(format!("level = {level} must lie in (0, 1)")));
        }
        Ok(self.centrality(x)? >= 1.0 - level)
    }
}

/// One-dimensional centrality `2 min(H(x), 1 - H(x-))`.
pub fn ccf_1d(h: &ConfidenceDistribution, x: f64) -> f64 {
    crate::inference::point_weak_support(h, x)
}
