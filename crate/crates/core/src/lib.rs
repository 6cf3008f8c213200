//! Confidence distributions: construction from pivots, bootstrap replicates
//! and profile likelihoods; point estimates, intervals and test supports;
//! precision comparisons; multivariate clouds with data depth; and a seeded
//! Monte Carlo lab for checking calibration.

pub mod bootstrap;
pub mod cd;
pub mod compare;
pub mod constructors;
pub mod error;
pub mod inference;
pub mod io;
pub mod likelihood;
pub mod multivariate;
pub mod probkernel;
pub mod simlab;

pub use bootstrap::{ReplicateSet, ResamplePlan};
pub use cd::{
    cd_mean, cd_median, cd_mode, transform_cd, AnalyticCdf, CdRandomVariable,
    ConfidenceDistribution, Direction, LocationScaleCdf,
};
pub use compare::{DominanceReport, LossSpec, RiskSpec, Verdict};
pub use constructors::{DataSample, PairedSample, PivotSpec};
pub use error::{Error, Result};
pub use inference::{NullRegion, SupportReport};
pub use likelihood::ProfileCurve;
pub use multivariate::{CentralityFn, DepthSpec, MultiCD};
pub use probkernel::{draw, DistKind, EmpiricalLaw, RngStream, Tail};
pub use simlab::{CalibrationReport, CdGenerator, Constructor, McEstimate, Model};
