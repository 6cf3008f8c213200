//! Point estimates and hypothesis-test supports read off a CD.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cd::ConfidenceDistribution;
use crate::error::{Error, Result};

pub use crate::cd::{cd_mean, cd_median, cd_mode};

/// A null hypothesis region: disjoint closed intervals (infinite ends
/// allowed) or a finite set of points.
#[derive(Debug, Clone, PartialEq)]
pub enum NullRegion {
    Intervals(Vec<(f64, f64)>),
    Points(Vec<f64>),
}

impl NullRegion {
    pub fn intervals(mut iv: Vec<(f64, f64)>) -> Result<Self> {
        if iv.is_empty() {
            return Err(Error::InvalidData("region has no intervals".into()));
        }
        for &(a, b) in &iv {
            if a.is_nan() || b.is_nan() || a > b || a == f64::INFINITY || b == f64::NEG_INFINITY {
                return Err(Error::InvalidData(format!("[{a}, {b}] is not an interval")));
            }
        }
        iv.sort_by(|x, y| x.0.total_cmp(&y.0));
        for w in iv.windows(2) {
            if w[1].0 <= w[0].1 {
                return Err(Error::InvalidData(format!(
                    "intervals [{}, {}] and [{}, {}] overlap",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        Ok(NullRegion::Intervals(iv))
    }

    pub fn points(mut p: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("points must be finite and nonempty".into()));
        }
        p.sort_by(f64::total_cmp);
        if p.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidData("points must be distinct".into()));
        }
        Ok(NullRegion::Points(p))
    }

    pub fn half_line_below(a: f64) -> Self {
        NullRegion::Intervals(vec![(f64::NEG_INFINITY, a)])
    }

    pub fn half_line_above(b: f64) -> Self {
        NullRegion::Intervals(vec![(b, f64::INFINITY)])
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
struct RegionJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    intervals: Option<Vec<(Option<f64>, Option<f64>)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points: Option<Vec<f64>>,
}

impl Serialize for NullRegion {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let j = match self {
            NullRegion::Intervals(iv) => RegionJson {
                intervals: Some(
                    iv.iter()
                        .map(|&(a, b)| (a.is_finite().then_some(a), b.is_finite().then_some(b)))
                        .collect(),
                ),
                points: None,
            },
            NullRegion::Points(p) => RegionJson {
                intervals: None,
                points: Some(p.clone()),
            },
        };
        j.serialize(s)
    }
}

impl<'de> Deserialize<'de> for NullRegion {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = RegionJson::deserialize(d)?;
        match (j.intervals, j.points) {
            (Some(iv), None) => NullRegion::intervals(
                iv.into_iter()
                    .map(|(a, b)| (a.unwrap_or(f64::NEG_INFINITY), b.unwrap_or(f64::INFINITY)))
                    .collect(),
            )
            .map_err(D::Error::custom),
            (None, Some(p)) => NullRegion::points(p).map_err(D::Error::custom),
            _ => Err(D::Error::custom("region needs exactly one of \"intervals\" or \"points\"")),
        }
    }
}

/// CD content of `[c, d]` (closed, so an atom at `c` counts).
fn interval_content(h: &ConfidenceDistribution, c: f64, d: f64) -> f64 {
    let upper = if d == f64::INFINITY { 1.0 } else { h.eval(d) };
    let lower = if c == f64::NEG_INFINITY { 0.0 } else { h.eval_left(c) };
    (upper - lower).max(0.0)
}

/// `2 min(H(x), 1 - H(x-))`: the two-sided point support at `x`. Equals
/// `2 min(H, 1 - H)` for continuous CDs.
pub fn point_weak_support(h: &ConfidenceDistribution, x: f64) -> f64 {
    (2.0 * h.eval(x).min(1.0 - h.eval_left(x))).min(1.0)
}

/// `sup` of [`point_weak_support`] over `[c, d]`. The map increases up to
/// the median and decreases after it, so the supremum is 1 when the median
/// lies inside and otherwise sits at the endpoint nearest the median.
fn interval_weak_support(h: &ConfidenceDistribution, median: f64, c: f64, d: f64) -> f64 {
    if c <= median && median <= d {
        1.0
    } else if d < median {
        (2.0 * h.eval(d)).min(1.0)
    } else {
        (2.0 * (1.0 - h.eval_left(c))).min(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentSupport {
    /// `[lo, hi]`; a point component has `lo == hi`. `None` encodes an
    /// infinite end.
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub p_s: f64,
    pub p_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportReport {
    pub p_s: f64,
    pub p_w: f64,
    /// Max of per-interval strong supports; absent for point regions.
    pub p_s_star: Option<f64>,
    /// Set for point regions: `p_s` is only the atom mass there.
    pub points_region: bool,
    pub per_component: Vec<ComponentSupport>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub fn support_report(h: &ConfidenceDistribution, region: &NullRegion) -> SupportReport {
    let median = cd_median(h);
    let mut per = Vec::new();
    match region {
        NullRegion::Intervals(iv) => {
            for &(c, d) in iv {
                per.push(ComponentSupport {
                    lo: finite(c),
                    hi: finite(d),
                    p_s: interval_content(h, c, d),
                    p_w: interval_weak_support(h, median, c, d),
                });
            }
        }
        NullRegion::Points(p) => {
            for &x in p {
                per.push(ComponentSupport {
                    lo: Some(x),
                    hi: Some(x),
                    p_s: interval_content(h, x, x),
                    p_w: point_weak_support(h, x),
                });
            }
        }
    }
    let p_s = per.iter().map(|c| c.p_s).sum::<f64>().min(1.0);
    let p_w = per.iter().map(|c| c.p_w).fold(0.0, f64::max);
    let p_s_star = match region {
        NullRegion::Intervals(_) => Some(per.iter().map(|c| c.p_s).fold(0.0, f64::max)),
        NullRegion::Points(_) => None,
    };
    SupportReport {
        p_s,
        p_w,
        p_s_star,
        points_region: matches!(region, NullRegion::Points(_)),
        per_component: per,
    }
}

/// Strong support `p_s`: the CD content of the region.
pub fn strong_support(h: &ConfidenceDistribution, region: &NullRegion) -> f64 {
    match region {
        NullRegion::Intervals(iv) => iv
            .iter()
            .map(|&(c, d)| interval_content(h, c, d))
            .sum::<f64>()
            .min(1.0),
        NullRegion::Points(p) => p.iter().map(|&x| interval_content(h, x, x)).sum::<f64>().min(1.0),
    }
}

/// Weak support `p_w`.
pub fn weak_support(h: &ConfidenceDistribution, region: &NullRegion) -> f64 {
    match region {
        NullRegion::Intervals(iv) => {
            let m = cd_median(h);
            iv.iter()
                .map(|&(c, d)| interval_weak_support(h, m, c, d))
                .fold(0.0, f64::max)
        }
        NullRegion::Points(p) => p.iter().map(|&x| point_weak_support(h, x)).fold(0.0, f64::max),
    }
}

/// Intersection-union support: the largest per-interval strong support.
pub fn iut_support(h: &ConfidenceDistribution, region: &NullRegion) -> Result<f64> {
    match region {
        NullRegion::Intervals(iv) => Ok(iv
            .iter()
            .map(|&(c, d)| interval_content(h, c, d))
            .fold(0.0, f64::max)),
        NullRegion::Points(_) => Err(Error::Domain("IUT support needs an interval region".into())),
    }
}

/// Index of the region with the largest CD content; ties (within 1e-9)
/// go to the lowest index. The regions must be interval regions that
/// partition a superset of the CD's support, overlapping at most in
/// endpoints.
pub fn classify(h: &ConfidenceDistribution, partition: &[NullRegion]) -> Result<usize> {
    const TOL: f64 = 1e-9;
    if partition.is_empty() {
        return Err(Error::PartitionInvalid("no regions".into()));
    }
    let mut all = Vec::new();
    for (k, r) in partition.iter().enumerate() {
        match r {
            NullRegion::Intervals(iv) => all.extend(iv.iter().map(|&(a, b)| (a, b, k))),
            NullRegion::Points(_) => {
                return Err(Error::PartitionInvalid(format!(
                    "region {k} is a point set and cannot be part of a partition"
                )))
            }
        }
    }
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    let (lo, hi) = h.support();
    if all[0].0 > lo + TOL {
        return Err(Error::PartitionInvalid(format!(
            "support below {} is not covered",
            all[0].0
        )));
    }
    for w in all.windows(2) {
        let (end, start) = (w[0].1, w[1].0);
        if start > end + TOL {
            return Err(Error::PartitionInvalid(format!("gap ({end}, {start}) is not covered")));
        }
        if start < end - TOL {
            return Err(Error::PartitionInvalid(format!(
                "regions {} and {} overlap on ({start}, {end})",
                w[0].2, w[1].2
            )));
        }
    }
    let last = all.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    if last < hi - TOL {
        return Err(Error::PartitionInvalid(format!("support above {last} is not covered")));
    }
    let contents: Vec<f64> = partition.iter().map(|r| strong_support(h, r)).collect();
    let mut best = 0;
    for (k, &c) in contents.iter().enumerate().skip(1) {
        if c > contents[best] + TOL {
            best = k;
        }
    }
    Ok(best)
}
