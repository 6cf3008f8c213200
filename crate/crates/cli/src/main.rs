use std::fmt::Display;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cdkit::compare::{bahadur_slopes, dominance_mc, mc_dispersion, mc_dispersion_difference, risk, BahadurSlopes};
use cdkit::constructors::{
    exponential_rate_cd, fisher_z_corr_cd, normal_mean_cd, normal_variance_cd,
};
use cdkit::bootstrap::{bootstrap_t_cd, hall_bootstrap_cd, mean_se, raw_bootstrap_cd, reflected_bootstrap_cd, resample};
use cdkit::inference::support_report;
use cdkit::io;
use cdkit::multivariate::{project, DEFAULT_TUKEY_DIRECTIONS, MIN_TUKEY_DIRECTIONS};
use cdkit::simlab::{calibrate, centrality_calibrate, CentralityExperiment, DEFAULT_LEVELS, MIN_REPS};
use cdkit::{
    cd_mean, cd_median, cd_mode, CdGenerator, CentralityFn, ConfidenceDistribution, DataSample, DepthSpec,
    LossSpec, McEstimate, MultiCD, NullRegion, PairedSample, ResamplePlan, RiskSpec, RngStream,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

const INTERVAL_LEVELS: [f64; 3] = [0.90, 0.95, 0.99];

#[derive(Parser)]
#[command(name = "cdkit", version, about = "Confidence distributions from the command line")]
#[command(allow_negative_numbers = true)]
struct Cli {
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a CD from a data file.
    Construct(ConstructArgs),
    /// Point estimates from a dumped CD.
    Estimate(EstimateArgs),
    /// Strong and weak support of a null region.
    Test(TestArgs),
    /// Compare two generators by dominance, dispersion, risk and slopes.
    Compare(ConfigArgs),
    /// Monte Carlo calibration of one generator.
    Calibrate(CalibrateArgs),
    /// Operations on multivariate clouds.
    #[command(subcommand)]
    Mv(MvCmd),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ModelKind {
    NormalMean,
    NormalVariance,
    ExponentialRate,
    Correlation,
    BootstrapMean,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Variant {
    Raw,
    Reflected,
    T,
    Hall,
}

#[derive(Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
enum Sigma {
    Known(f64),
    Unknown,
}

fn parse_sigma(s: &str) -> Result<Sigma, String> {
    if s == "unknown" {
        return Ok(Sigma::Unknown);
    }
    let v = s
        .strip_prefix("known=")
        .ok_or_else(|| format!("expected `known=<value>` or `unknown`, got `{s}`"))?;
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() && x > 0.0 => Ok(Sigma::Known(x)),
        _ => Err(format!("sigma `{v}` must be a positive number")),
    }
}

#[derive(Args, Serialize)]
struct ConstructArgs {
    #[arg(long)]
    model: ModelKind,
    /// `known=<sigma>` or `unknown` (normal-mean only).
    #[arg(long, value_parser = parse_sigma, default_value = "unknown")]
    sigma: Sigma,
    /// One value per row; two columns for `correlation`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "t")]
    variant: Variant,
    /// Bootstrap replicates.
    #[arg(long, default_value_t = 1000)]
    b: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Knots used when an analytic CD is dumped.
    #[arg(long, default_value_t = 2001)]
    grid: usize,
    /// Write the CD as CSV.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct EstimateArgs {
    #[arg(long)]
    cd: PathBuf,
}

#[derive(Args, Serialize)]
struct TestArgs {
    #[arg(long)]
    cd: PathBuf,
    /// Region JSON, inline or `@file`.
    #[arg(long)]
    region: String,
}

#[derive(Args, Serialize)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    /// Write the dominance ECDFs as CSV.
    #[arg(long)]
    ecdf_csv: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct CalibrateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Write the u-values as CSV.
    #[arg(long)]
    u_csv: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum DepthKind {
    Mahalanobis,
    Tukey,
}

#[derive(Args, Serialize)]
struct CloudArgs {
    /// `k` columns per row.
    #[arg(long)]
    cloud: PathBuf,
}

#[derive(Args, Serialize)]
struct DepthArgs {
    #[command(flatten)]
    #[serde(flatten)]
    cloud: CloudArgs,
    #[arg(long, value_enum, default_value = "mahalanobis")]
    depth: DepthKind,
    #[arg(long, default_value_t = DEFAULT_TUKEY_DIRECTIONS)]
    directions: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    point: Vec<f64>,
}

#[derive(Subcommand)]
enum MvCmd {
    /// CD of `lambda' theta` from a cloud.
    Project {
        #[command(flatten)]
        cloud: CloudArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        lambda: Vec<f64>,
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    Depth(DepthArgs),
    /// Centrality of a point and central-region membership.
    Centrality(DepthArgs),
    /// Coverage of depth central regions over replications.
    Coverage(CalibrateArgs),
}

enum Failure {
    Config(String),
    Numeric(cdkit::Error),
}

impl From<cdkit::Error> for Failure {
    fn from(e: cdkit::Error) -> Self {
        Failure::Numeric(e)
    }
}

fn config(e: impl Display) -> Failure {
    Failure::Config(e.to_string())
}

type Res<T> = Result<T, Failure>;

/// Input errors are configuration errors, whatever layer reports them.
fn input<T>(what: &Path, r: cdkit::Result<T>) -> Res<T> {
    r.map_err(|e| config(format!("{}: {e}", what.display())))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Res<T> {
    let f = File::open(path).map_err(|e| config(format!("{}: {e}", path.display())))?;
    serde_json::from_reader(f).map_err(|e| config(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct Report<C: Serialize, R: Serialize> {
    config: C,
    result: R,
}

#[derive(Serialize)]
struct Estimates {
    median: f64,
    mean: Option<f64>,
    mode: Option<f64>,
}

impl Estimates {
    fn of(h: &ConfidenceDistribution) -> Self {
        Estimates {
            median: cd_median(h),
            mean: cd_mean(h).ok(),
            mode: cd_mode(h).ok(),
        }
    }
}

#[derive(Serialize)]
struct Interval {
    level: f64,
    lower: f64,
    upper: f64,
}

#[derive(Serialize)]
struct Summary {
    representation: &'static str,
    #[serde(flatten)]
    estimates: Estimates,
    intervals: Vec<Interval>,
}

fn summary(h: &ConfidenceDistribution) -> Res<Summary> {
    let intervals = INTERVAL_LEVELS
        .iter()
        .map(|&level| {
            let (lower, upper) = h.central_interval(level)?;
            Ok(Interval { level, lower, upper })
        })
        .collect::<cdkit::Result<_>>()?;
    Ok(Summary {
        representation: h.kind_name(),
        estimates: Estimates::of(h),
        intervals,
    })
}

fn dump_cd(path: &Path, h: &ConfidenceDistribution, grid: usize) -> Res<()> {
    if h.kind_name() == "analytic" {
        io::write_cd_file(path, &h.to_grid(grid)?)?;
    } else {
        io::write_cd_file(path, h)?;
    }
    Ok(())
}

fn construct(a: &ConstructArgs) -> Res<serde_json::Value> {
    let file = || File::open(&a.data).map_err(|e| config(format!("{}: {e}", a.data.display())));
    let h = if let ModelKind::Correlation = a.model {
        let pairs = input(&a.data, io::read_pairs(file()?))?;
        fisher_z_corr_cd(&input(&a.data, PairedSample::new(&pairs))?)?
    } else {
        let d = input(&a.data, io::read_values(file()?).and_then(DataSample::new))?;
        match a.model {
            ModelKind::NormalMean => match a.sigma {
                Sigma::Known(s) => normal_mean_cd(&d, Some(s))?,
                Sigma::Unknown => normal_mean_cd(&d, None)?,
            },
            ModelKind::NormalVariance => normal_variance_cd(&d)?,
            ModelKind::ExponentialRate => exponential_rate_cd(&d)?,
            ModelKind::BootstrapMean => {
                let plan = ResamplePlan::for_mean(a.b, RngStream::new(a.seed, 0)).map_err(config)?;
                let (xbar, se) = (d.mean(), mean_se(d.values()));
                match a.variant {
                    Variant::Hall => hall_bootstrap_cd(&d, &plan)?.0,
                    v => {
                        let reps = resample(&d, &plan)?;
                        match v {
                            Variant::Raw => raw_bootstrap_cd(&reps)?,
                            Variant::Reflected => reflected_bootstrap_cd(&reps, xbar)?,
                            _ => bootstrap_t_cd(&reps, xbar, se)?,
                        }
                    }
                }
            }
            ModelKind::Correlation => unreachable!(),
        }
    };
    if let Some(p) = &a.dump {
        dump_cd(p, &h, a.grid)?;
    }
    #[derive(Serialize)]
    struct Out {
        n: usize,
        #[serde(flatten)]
        summary: Summary,
    }
    let n = match a.model {
        ModelKind::Correlation => input(&a.data, io::read_pairs(file()?))?.len(),
        _ => input(&a.data, io::read_values(file()?))?.len(),
    };
    json(&Out { n, summary: summary(&h)? })
}

fn load_cd(path: &Path) -> Res<ConfidenceDistribution> {
    input(path, io::read_cd_file(path))
}

fn parse_region(s: &str) -> Res<NullRegion> {
    let text = match s.strip_prefix('@') {
        Some(p) => std::fs::read_to_string(p).map_err(|e| config(format!("{p}: {e}")))?,
        None => s.to_owned(),
    };
    serde_json::from_str(&text).map_err(|e| config(format!("region: {e}")))
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum LossArg {
    #[default]
    SquaredError,
    Absolute,
}

impl LossArg {
    fn spec(self) -> LossSpec {
        match self {
            LossArg::SquaredError => LossSpec::SquaredError,
            LossArg::Absolute => LossSpec::Absolute,
        }
    }
}

fn default_eps() -> Vec<f64> {
    vec![0.1, 0.5, 1.0]
}

fn default_risk() -> RiskSpec {
    RiskSpec {
        psi: cdkit::compare::PsiSpec::Identity,
        weight: cdkit::compare::WeightSpec::KsAtTruth,
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompareConfig {
    first: CdGenerator,
    second: CdGenerator,
    reps: usize,
    #[serde(default = "default_eps")]
    eps: Vec<f64>,
    #[serde(default)]
    loss: LossArg,
    #[serde(default = "default_risk")]
    risk: RiskSpec,
    /// Slopes are taken on replicate 0 of each generator.
    #[serde(default = "default_eps")]
    slope_eps: Vec<f64>,
}

fn check_reps(reps: usize) -> Res<()> {
    if reps < MIN_REPS {
        return Err(config(format!("reps = {reps} must be at least {MIN_REPS}")));
    }
    Ok(())
}

fn compare(a: &ConfigArgs) -> Res<(CompareConfig, serde_json::Value)> {
    let c: CompareConfig = read_json(&a.config)?;
    c.first.validate().map_err(config)?;
    c.second.validate().map_err(config)?;
    check_reps(c.reps)?;
    let dominance = dominance_mc(&c.first, &c.second, &c.eps, c.reps)?;
    let loss = c.loss.spec();
    #[derive(Serialize)]
    struct Pair<T> {
        first: T,
        second: T,
    }
    #[derive(Serialize)]
    struct SlopeRow {
        eps: f64,
        first: BahadurSlopes,
        second: BahadurSlopes,
    }
    #[derive(Serialize)]
    struct Out {
        dominance: cdkit::DominanceReport,
        dispersion: Pair<McEstimate>,
        dispersion_difference: McEstimate,
        risk: Pair<McEstimate>,
        slopes: Vec<SlopeRow>,
    }
    let (h1, h2) = (c.first.build(0)?, c.second.build(0)?);
    let (t1, t2) = (c.first.theta0()?, c.second.theta0()?);
    let slopes = c
        .slope_eps
        .iter()
        .map(|&eps| {
            Ok(SlopeRow {
                eps,
                first: bahadur_slopes(&h1, t1, eps, c.first.n)?,
                second: bahadur_slopes(&h2, t2, eps, c.second.n)?,
            })
        })
        .collect::<cdkit::Result<_>>()?;
    if let Some(p) = &a.ecdf_csv {
        let mut header = vec!["t".to_owned()];
        for e in &dominance.per_eps {
            for s in ["left_1", "left_2", "right_1", "right_2"] {
                header.push(format!("{s}@{}", e.eps));
            }
        }
        let rows = dominance.grid.iter().enumerate().map(|(k, &t)| {
            let mut r = vec![t];
            for e in &dominance.per_eps {
                r.extend([e.left_1[k], e.left_2[k], e.right_1[k], e.right_2[k]]);
            }
            r
        });
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        io::write_table(create(p)?, &header, rows)?;
    }
    let out = Out {
        dispersion: Pair {
            first: mc_dispersion(&c.first, &loss, c.reps)?,
            second: mc_dispersion(&c.second, &loss, c.reps)?,
        },
        dispersion_difference: mc_dispersion_difference(&c.first, &c.second, &loss, c.reps)?,
        risk: Pair {
            first: risk(&c.first, &c.risk, c.reps)?,
            second: risk(&c.second, &c.risk, c.reps)?,
        },
        slopes,
        dominance,
    };
    Ok((c, json(&out)?))
}

fn default_levels() -> Vec<f64> {
    DEFAULT_LEVELS.to_vec()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrateConfig {
    generator: CdGenerator,
    reps: usize,
    #[serde(default = "default_levels")]
    levels: Vec<f64>,
}

fn check_levels(levels: &[f64]) -> Res<()> {
    if let Some(l) = levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
        return Err(config(format!("level {l} must lie in (0, 1)")));
    }
    Ok(())
}

fn write_u(path: &Path, u: &[f64]) -> Res<()> {
    io::write_table(create(path)?, &["u"], u.iter().map(|&v| vec![v]))?;
    Ok(())
}

fn calibrate_cmd(a: &CalibrateArgs) -> Res<(CalibrateConfig, serde_json::Value)> {
    let c: CalibrateConfig = read_json(&a.config)?;
    c.generator.validate().map_err(config)?;
    check_reps(c.reps)?;
    check_levels(&c.levels)?;
    let r = calibrate(&c.generator, c.reps, &c.levels)?;
    if let Some(p) = &a.u_csv {
        write_u(p, &r.u_values)?;
    }
    Ok((c, json(&r)?))
}

fn load_cloud(a: &CloudArgs) -> Res<MultiCD> {
    let f = File::open(&a.cloud).map_err(|e| config(format!("{}: {e}", a.cloud.display())))?;
    let (_, rows) = input(&a.cloud, io::read_rows(f, None))?;
    if rows.is_empty() {
        return Err(config(format!("{}: cloud is empty", a.cloud.display())));
    }
    input(&a.cloud, MultiCD::from_points(rows[0].len(), &rows))
}

fn depth_spec(a: &DepthArgs) -> DepthSpec {
    match a.depth {
        DepthKind::Mahalanobis => DepthSpec::Mahalanobis,
        DepthKind::Tukey => DepthSpec::Tukey { directions: a.directions },
    }
}

fn mv(cmd: &MvCmd) -> Res<(serde_json::Value, serde_json::Value)> {
    match cmd {
        MvCmd::Project { cloud, lambda, dump } => {
            let m = load_cloud(cloud)?;
            if lambda.len() != m.dim() {
                return Err(config(format!("lambda has {} entries, cloud has {} columns", lambda.len(), m.dim())));
            }
            let h = project(&m, lambda).map_err(config)?;
            if let Some(p) = dump {
                io::write_cd_file(p, &h)?;
            }
            let cfg = serde_json::json!({ "op": "project", "cloud": cloud.cloud, "lambda": lambda, "dump": dump });
            Ok((cfg, json(&summary(&h)?)?))
        }
        MvCmd::Depth(a) | MvCmd::Centrality(a) => {
            let m = load_cloud(&a.cloud)?;
            if a.point.len() != m.dim() {
                return Err(config(format!("point has {} coordinates, cloud has {} columns", a.point.len(), m.dim())));
            }
            let spec = depth_spec(a);
            if let DepthSpec::Tukey { directions } = spec {
                if directions < MIN_TUKEY_DIRECTIONS {
                    return Err(config(format!("{directions} directions, need at least {MIN_TUKEY_DIRECTIONS}")));
                }
            }
            let op = if matches!(cmd, MvCmd::Depth(_)) { "depth" } else { "centrality" };
            let cfg = serde_json::json!({ "op": op, "args": a, "spec": spec });
            if op == "depth" {
                let d = cdkit::multivariate::depth(spec, &m, &a.point)?;
                return Ok((cfg, serde_json::json!({ "depth": d })));
            }
            let cf = CentralityFn::new(spec, &m)?;
            let c = cf.centrality(&a.point)?;
            let regions: Vec<_> = INTERVAL_LEVELS
                .iter()
                .map(|&level| Ok(serde_json::json!({ "level": level, "inside": cf.central_region_test(level, &a.point)? })))
                .collect::<cdkit::Result<_>>()?;
            Ok((cfg, serde_json::json!({ "depth": cf.depth(&a.point)?, "centrality": c, "regions": regions })))
        }
        MvCmd::Coverage(a) => {
            let e: CentralityExperiment = read_json(&a.config)?;
            e.validate().map_err(config)?;
            let r = centrality_calibrate(&e)?;
            if let Some(p) = &a.u_csv {
                write_u(p, &r.u_values)?;
            }
            Ok((json(&e)?, json(&r)?))
        }
    }
}

fn json<T: Serialize>(v: &T) -> Res<serde_json::Value> {
    serde_json::to_value(v).map_err(|e| Failure::Numeric(e.into()))
}

fn create(path: &Path) -> Res<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| config(format!("{}: {e}", path.display())))
}

fn run(cli: &Cli) -> Res<()> {
    let (cfg, result) = match &cli.cmd {
        Cmd::Construct(a) => (json(a)?, construct(a)?),
        Cmd::Estimate(a) => (json(a)?, json(&Estimates::of(&load_cd(&a.cd)?))?),
        Cmd::Test(a) => {
            let h = load_cd(&a.cd)?;
            let region = parse_region(&a.region)?;
            let cfg = serde_json::json!({ "cd": a.cd, "region": region });
            (cfg, json(&support_report(&h, &region))?)
        }
        Cmd::Compare(a) => {
            let (c, r) = compare(a)?;
            (json(&c)?, r)
        }
        Cmd::Calibrate(a) => {
            let (c, r) = calibrate_cmd(a)?;
            (json(&c)?, r)
        }
        Cmd::Mv(m) => mv(m)?,
    };
    let report = Report { config: cfg, result };
    let text = serde_json::to_string_pretty(&report).map_err(|e| Failure::Numeric(e.into()))?;
    let written = match &cli.out {
        Some(p) => create(p)?.write_all(text.as_bytes()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.write_all(b"\n"))
        }
    };
    match written {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => r.map_err(|e| Failure::Numeric(e.into())),
    }
}

fn threads() -> Res<()> {
    let Ok(v) = std::env::var("CDKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| config(format!("CDKIT_THREADS = `{v}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(config)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            eprintln!("{}", msg.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(2);
        }
    };
    match threads().and_then(|_| run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("cdkit: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(e)) => {
            eprintln!("cdkit: {e}");
            ExitCode::from(1)
        }
    }
}
