//! Experiments behind the `kernel-lens` binary.
//!
//! Each subcommand resolves its flags into a [`report::Report`], which renders
//! as CSV with a comment header (or JSON for the two scalar checks). The exit
//! status of verification subcommands reflects their tolerance checks.

pub mod report;
pub mod values;

use std::f64::consts::PI;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use kernel_lens::analytic::{self, Derivatives, KernelQuery};
use kernel_lens::diagnostics::{self, SequenceScheme, Statistic};
use kernel_lens::rng::{derive_seed, domain};
use kernel_lens::simulate::{self, InitRule, UniversalitySweep};
use kernel_lens::{Activation, DistributionSpec, EmpiricalKernel, NetworkConfig};

use report::{Check, Report};
use values::{angle_grid, Angle, IndexList, Shape};

pub type Error = Box<dyn std::error::Error + Send + Sync>;
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Parser, Debug)]
#[command(name = "kernel-lens", version, about = "Equivalent kernels of wide random rectifier networks: closed forms and Monte Carlo checks")]
pub struct Cli {
    /// Write the report to this file instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Closed-form kernel and normalized kernel on a grid of angles.
    KernelCurve(KernelCurveArgs),
    /// Monte Carlo kernel estimates against the closed form (passes when every |z| <= --max-z).
    McVerify(McVerifyArgs),
    /// Cosine between two inputs after each layer, analytic or simulated (mc passes when within --tolerance, default 0.05).
    DepthCurve(DepthCurveArgs),
    /// Histograms of output-to-input norm ratios in deep networks.
    NormHist(NormHistArgs),
    /// Gap between a non-Gaussian layer's normalized kernel and the Gaussian one as input dimension grows.
    Universality(UniversalityArgs),
    /// Spread statistic of a vector dataset at several subsampled dimensions.
    HypothesisScan(HypothesisScanArgs),
    /// Residual of the kernel's second-order ODE and its boundary values (JSON).
    OdeCheck(OdeCheckArgs),
    /// Norm-preserving weight scale and the matching distribution (JSON).
    InitCalc(InitCalcArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ActivationArgs {
    /// relu, lrelu, elu or tanh.
    #[arg(long, default_value = "relu")]
    pub activation: String,
    /// Negative-side slope for lrelu.
    #[arg(long, default_value_t = 0.0)]
    pub a: f64,
}

impl ActivationArgs {
    fn resolve(&self) -> Result<Activation> {
        if self.activation != "lrelu" && self.activation != "leaky_relu" && self.a != 0.0 {
            return Err(format!("--a only applies to lrelu, not {}", self.activation).into());
        }
        Ok(Activation::from_name(&self.activation, self.a)?)
    }

    fn echo(&self, r: &mut Report) {
        r.config("activation", &self.activation).config("a", self.a);
    }
}

#[derive(Args, Debug, Clone)]
pub struct KernelCurveArgs {
    #[command(flatten)]
    pub act: ActivationArgs,
    /// Second moment of the weights, E[W²].
    #[arg(long, default_value_t = 1.0)]
    pub w2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub norm_x: f64,
    #[arg(long, default_value_t = 1.0)]
    pub norm_y: f64,
    /// Number of angles, evenly spaced on [0, π].
    #[arg(long, default_value_t = 65)]
    pub grid: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Oracle {
    /// Closed form when one exists, otherwise an error.
    Auto,
    ClosedForm,
    /// Gaussian-weight Monte Carlo with matched E[W²].
    McGaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Quantity {
    /// Mean of σ(w·x)σ(w·y).
    Kernel,
    /// Cosine similarity of the hidden representations.
    Normalized,
}

#[derive(Args, Debug, Clone)]
pub struct McVerifyArgs {
    /// Weight distribution, e.g. family=t,nu=5,scale=1.
    #[arg(long, default_value = "family=gaussian,sigma=1")]
    pub dist: DistributionSpec,
    #[command(flatten)]
    pub act: ActivationArgs,
    /// Input dimension.
    #[arg(long, default_value_t = 1000)]
    pub m: usize,
    /// Hidden width.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Number of angles, evenly spaced on [0, π].
    #[arg(long, default_value_t = 16)]
    pub theta0_grid: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Independent networks per angle, pooled.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long, value_enum, default_value_t = Oracle::Auto)]
    pub oracle: Oracle,
    /// Samples for the mc-gaussian oracle.
    #[arg(long, default_value_t = 1_000_000)]
    pub oracle_samples: usize,
    #[arg(long, value_enum, default_value_t = Quantity::Kernel)]
    pub quantity: Quantity,
    /// Largest |z| that still passes.
    #[arg(long, default_value_t = 4.0)]
    pub max_z: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Analytic,
    Mc,
}

#[derive(Args, Debug, Clone)]
pub struct DepthCurveArgs {
    /// Leaky-ReLU slope (0 is ReLU).
    #[arg(long, default_value_t = 0.0)]
    pub a: f64,
    /// Layers to report, e.g. 1..16 or 1,2,4,128.
    #[arg(long, default_value = "1..16")]
    pub depths: IndexList,
    #[arg(long, value_enum, default_value_t = Mode::Analytic)]
    pub mode: Mode,
    #[arg(long, default_value_t = 64)]
    pub theta0_grid: usize,
    /// Input dimension (mc).
    #[arg(long, default_value_t = 1000)]
    pub m: usize,
    /// Width of every layer (mc).
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Weight family; its scale is reset by --init (mc).
    #[arg(long, default_value = "family=gaussian,sigma=1")]
    pub dist: DistributionSpec,
    #[arg(long, default_value = "eq8")]
    pub init: InitRule,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest |mc − analytic| cosine that still passes (mc).
    #[arg(long, default_value_t = 0.05)]
    pub tolerance: f64,
}

#[derive(Args, Debug, Clone)]
pub struct NormHistArgs {
    #[arg(long, default_value_t = 0.2)]
    pub a: f64,
    /// eq8 (variance 2/((1+a²)n)) or he (variance 2/n).
    #[arg(long, default_value = "eq8")]
    pub init: InitRule,
    #[arg(long, default_value = "1,2,4,8,16,32")]
    pub depths: IndexList,
    /// Number of standard-normal inputs.
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
    /// Independent networks the inputs are split across.
    #[arg(long, default_value_t = 1)]
    pub networks: usize,
    #[arg(long, default_value_t = 1000)]
    pub m: usize,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value = "family=gaussian,sigma=1")]
    pub dist: DistributionSpec,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct UniversalityArgs {
    #[arg(long, default_value = "family=gaussian,sigma=1")]
    pub dist: DistributionSpec,
    #[command(flatten)]
    pub act: ActivationArgs,
    /// Input dimensions, increasing.
    #[arg(long, default_value = "16,64,256,1024")]
    pub m_list: IndexList,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    /// Angle between the inputs; accepts forms like pi/2.
    #[arg(long, default_value = "pi/2")]
    pub theta0: Angle,
    /// Samples for the Gaussian-weight oracle when no closed form exists.
    #[arg(long, default_value_t = 1_000_000)]
    pub oracle_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// The gap at the largest m passes below max(tolerance, 3·stderr).
    #[arg(long, default_value_t = 0.02)]
    pub tolerance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Raw,
}

#[derive(Args, Debug, Clone)]
pub struct HypothesisScanArgs {
    /// Dataset file (one vector per CSV row, or raw little-endian f64).
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// JSON shape file for raw input; defaults to INPUT.json.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    /// Use COUNTxDIM random-phase sinusoids instead of a file.
    #[arg(long)]
    pub synthetic: Option<Shape>,
    /// Decimation factors, increasing.
    #[arg(long, default_value = "1,2,4,8")]
    pub factors: IndexList,
    #[arg(long, default_value = "linear")]
    pub statistic: Statistic,
    /// Rescale decimated vectors to the original norm.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub renormalize: bool,
    /// Seed for synthetic data.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DerivativeMode {
    Analytic,
    FiniteDifference,
}

#[derive(Args, Debug, Clone)]
pub struct OdeCheckArgs {
    /// Interior grid points on (0, π).
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    /// analytic passes below 1e-12, finite-difference below 1e-6.
    #[arg(long, value_enum, default_value_t = DerivativeMode::Analytic)]
    pub mode: DerivativeMode,
    /// Finite-difference step.
    #[arg(long, default_value_t = Derivatives::DEFAULT_STEP)]
    pub step: f64,
    #[arg(long, default_value_t = 1.0)]
    pub w2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub norm_x: f64,
    #[arg(long, default_value_t = 1.0)]
    pub norm_y: f64,
}

#[derive(Args, Debug, Clone)]
pub struct InitCalcArgs {
    #[arg(long, default_value_t = 0.0)]
    pub a: f64,
    /// Layer width.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value = "family=gaussian,sigma=1")]
    pub dist: DistributionSpec,
}

/// Builds the report for a parsed command line.
pub fn execute(command: &Command) -> Result<Report> {
    match command {
        Command::KernelCurve(a) => kernel_curve(a),
        Command::McVerify(a) => mc_verify(a),
        Command::DepthCurve(a) => depth_curve(a),
        Command::NormHist(a) => norm_hist(a),
        Command::Universality(a) => universality(a),
        Command::HypothesisScan(a) => hypothesis_scan(a),
        Command::OdeCheck(a) => ode_check(a),
        Command::InitCalc(a) => init_calc(a),
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn rectifier(a: f64) -> Result<Activation> {
    Ok(if a == 0.0 { Activation::Relu } else { Activation::leaky_relu(a)? })
}

fn kernel_curve(args: &KernelCurveArgs) -> Result<Report> {
    let act = args.act.resolve()?;
    let slope = act
        .rectifier_slope()
        .ok_or_else(|| format!("{} has no closed-form kernel", act.name()))?;
    if args.grid < 2 {
        return Err("--grid needs at least 2 points".into());
    }
    let mut r = Report::new("kernel-curve");
    args.act.echo(&mut r);
    r.config("w2", args.w2)
        .config("norm-x", args.norm_x)
        .config("norm-y", args.norm_y)
        .config("grid", args.grid);
    r.columns = vec!["theta0".into(), "k".into(), "normalized_k".into()];
    for theta in angle_grid(args.grid) {
        let q = KernelQuery::new(theta, args.norm_x, args.norm_y, args.w2)?;
        let k = analytic::lrelu_kernel(&q, &act)?;
        let nk = analytic::normalized_lrelu_kernel(theta, slope)?;
        r.rows.push(vec![num(theta), num(k), num(nk)]);
    }
    Ok(r)
}

/// Pools `r` independent estimates of one quantity.
fn pool(estimates: &[EmpiricalKernel]) -> EmpiricalKernel {
    let r = estimates.len() as f64;
    EmpiricalKernel {
        mean: estimates.iter().map(|e| e.mean).sum::<f64>() / r,
        stderr: estimates.iter().map(|e| e.stderr * e.stderr).sum::<f64>().sqrt() / r,
        samples: estimates.iter().map(|e| e.samples).sum(),
    }
}

fn z_score(diff: f64, stderr: f64) -> f64 {
    if diff.abs() <= 1e-12 {
        0.0
    } else {
        diff / stderr
    }
}

fn mc_verify(args: &McVerifyArgs) -> Result<Report> {
    let act = args.act.resolve()?;
    let oracle = match (args.oracle, act.has_closed_form()) {
        (Oracle::Auto | Oracle::ClosedForm, true) => Oracle::ClosedForm,
        (Oracle::McGaussian, _) => Oracle::McGaussian,
        (_, false) => {
            return Err(format!("{} has no closed-form kernel; pass --oracle mc-gaussian", act.name()).into())
        }
    };
    if args.repeats == 0 || args.theta0_grid < 2 {
        return Err("--repeats must be positive and --theta0-grid at least 2".into());
    }
    let w2 = args.dist.second_moment()?;
    let grid = angle_grid(args.theta0_grid);
    let cells: Vec<(f64, EmpiricalKernel, f64)> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &theta)| -> Result<_> {
            let estimates = (0..args.repeats)
                .map(|rep| {
                    let cell = derive_seed(args.seed, &[domain::CELL, i as u64, rep as u64]);
                    let pair = simulate::make_angle_pair(args.m, theta, 1.0, 1.0, cell)?;
                    let cfg = NetworkConfig::new(args.m, args.n, 1, act, args.dist, cell)?;
                    match args.quantity {
                        Quantity::Kernel => simulate::empirical_kernel(&cfg, &pair),
                        Quantity::Normalized => simulate::empirical_normalized_angle(&cfg, &pair),
                    }
                })
                .collect::<kernel_lens::Result<Vec<_>>>()?;
            let q = KernelQuery::new(theta, 1.0, 1.0, w2)?;
            let (reference, reference_se) = match oracle {
                Oracle::McGaussian => {
                    let s = derive_seed(args.seed, &[domain::ORACLE, i as u64]);
                    let (k, nk) = simulate::gaussian_oracle(&act, &q, args.oracle_samples, s)?;
                    let e = if args.quantity == Quantity::Kernel { k } else { nk };
                    (e.mean, e.stderr)
                }
                _ => {
                    let v = match args.quantity {
                        Quantity::Kernel => analytic::lrelu_kernel(&q, &act)?,
                        Quantity::Normalized => analytic::normalized_lrelu_kernel(theta, act.rectifier_slope().unwrap_or(0.0))?,
                    };
                    (v, 0.0)
                }
            };
            let est = pool(&estimates);
            let combined = EmpiricalKernel { stderr: est.stderr.hypot(reference_se), ..est };
            Ok((reference, combined, reference_se))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut r = Report::new("mc-verify");
    r.config("dist", args.dist);
    args.act.echo(&mut r);
    r.config("m", args.m)
        .config("n", args.n)
        .config("theta0-grid", args.theta0_grid)
        .config("seed", args.seed)
        .config("repeats", args.repeats)
        .config("oracle", if oracle == Oracle::McGaussian { "mc-gaussian" } else { "closed-form" })
        .config("oracle-samples", args.oracle_samples)
        .config("quantity", if args.quantity == Quantity::Kernel { "kernel" } else { "normalized" })
        .config("max-z", args.max_z);
    r.summary("w2", w2);
    r.columns = ["theta0", "analytic", "mc_mean", "mc_stderr", "z_score"].map(String::from).to_vec();
    let mut max_z = 0.0f64;
    let mut max_abs_diff = 0.0f64;
    for (theta, (reference, est, _)) in grid.iter().zip(&cells) {
        let z = z_score(est.mean - reference, est.stderr);
        max_z = max_z.max(z.abs());
        max_abs_diff = max_abs_diff.max((est.mean - reference).abs());
        r.rows.push(vec![num(*theta), num(*reference), num(est.mean), num(est.stderr), num(z)]);
    }
    r.summary("max_abs_diff", max_abs_diff);
    r.checks.push(Check::at_most("max_abs_z", max_z, args.max_z));
    Ok(r)
}

fn depth_curve(args: &DepthCurveArgs) -> Result<Report> {
    let act = rectifier(args.a)?;
    let depths = &args.depths.0;
    if depths[0] == 0 {
        return Err("depths start at 1".into());
    }
    let deepest = *depths.last().unwrap();
    let grid = angle_grid(args.theta0_grid);
    if grid.len() < 2 {
        return Err("--theta0-grid needs at least 2 points".into());
    }
    let mut r = Report::new("depth-curve");
    r.config("a", args.a)
        .config("depths", &args.depths)
        .config("mode", if args.mode == Mode::Mc { "mc" } else { "analytic" })
        .config("theta0-grid", args.theta0_grid);
    if args.mode == Mode::Mc {
        r.config("m", args.m)
            .config("n", args.n)
            .config("dist", args.dist)
            .config("init", args.init.name())
            .config("seed", args.seed)
            .config("tolerance", args.tolerance);
    }
    let traces = grid
        .iter()
        .map(|&t| analytic::depth_trace(t, args.a, deepest))
        .collect::<kernel_lens::Result<Vec<_>>>()?;
    match args.mode {
        Mode::Analytic => {
            r.columns = ["theta0", "j", "cos_theta_j"].map(String::from).to_vec();
            for (theta, trace) in grid.iter().zip(&traces) {
                for &j in depths {
                    r.rows.push(vec![num(*theta), j.to_string(), num(trace.cosines[j])]);
                }
            }
        }
        Mode::Mc => {
            let base = NetworkConfig::new(args.m, args.n, deepest, act, args.dist, args.seed)?.with_init(args.init)?;
            let curves = grid
                .par_iter()
                .enumerate()
                .map(|(i, &theta)| -> kernel_lens::Result<Vec<f64>> {
                    let cell = derive_seed(args.seed, &[domain::CELL, i as u64]);
                    let pair = simulate::make_angle_pair(args.m, theta, 1.0, 1.0, cell)?;
                    simulate::depth_propagation(&NetworkConfig { seed: cell, ..base.clone() }, &pair)
                })
                .collect::<kernel_lens::Result<Vec<_>>>()?;
            r.columns = ["theta0", "j", "cos_theta_j", "analytic", "abs_diff"].map(String::from).to_vec();
            let mut worst = 0.0f64;
            for ((theta, trace), curve) in grid.iter().zip(&traces).zip(&curves) {
                for &j in depths {
                    let (mc, exact) = (curve[j - 1], trace.cosines[j]);
                    let d = (mc - exact).abs();
                    worst = worst.max(d);
                    r.rows.push(vec![num(*theta), j.to_string(), num(mc), num(exact), num(d)]);
                }
            }
            r.checks.push(Check::at_most("max_abs_diff", worst, args.tolerance));
        }
    }
    Ok(r)
}

fn norm_hist(args: &NormHistArgs) -> Result<Report> {
    let act = rectifier(args.a)?;
    if args.bins == 0 {
        return Err("--bins must be positive".into());
    }
    let depths = &args.depths.0;
    let cfg = NetworkConfig::new(args.m, args.n, *depths.last().unwrap(), act, args.dist, args.seed)?;
    let profile = simulate::norm_ratio_profile(&cfg, args.count, args.init, depths, args.networks)?;
    let mut r = Report::new("norm-hist");
    r.config("a", args.a)
        .config("init", args.init.name())
        .config("depths", &args.depths)
        .config("count", args.count)
        .config("bins", args.bins)
        .config("networks", args.networks)
        .config("m", args.m)
        .config("n", args.n)
        .config("dist", args.dist)
        .config("seed", args.seed);
    let std = args.init.stddev(&act, args.n)?;
    r.summary("weight_stddev", std);
    let all = profile.iter().flatten().copied();
    let lo = all.clone().fold(f64::INFINITY, f64::min).min(0.0);
    let hi = all.fold(0.0f64, f64::max);
    let width = if hi > lo { (hi - lo) / args.bins as f64 } else { 1.0 };
    r.columns = ["depth", "bin_low", "bin_high", "count"].map(String::from).to_vec();
    for (&depth, ratios) in depths.iter().zip(&profile) {
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let sd = (ratios.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / ratios.len() as f64).sqrt();
        r.summary(format!("depth_{depth}.mean"), mean);
        r.summary(format!("depth_{depth}.std"), sd);
        let mut counts = vec![0usize; args.bins];
        for &x in ratios {
            let b = (((x - lo) / width) as usize).min(args.bins - 1);
            counts[b] += 1;
        }
        for (b, c) in counts.iter().enumerate() {
            let low = lo + width * b as f64;
            r.rows.push(vec![depth.to_string(), num(low), num(low + width), c.to_string()]);
        }
    }
    Ok(r)
}

fn universality(args: &UniversalityArgs) -> Result<Report> {
    let act = args.act.resolve()?;
    let sweep = UniversalitySweep {
        dist: args.dist,
        activation: act,
        theta0: args.theta0.0,
        m_list: args.m_list.0.clone(),
        n: args.n,
        oracle_samples: args.oracle_samples,
        seed: args.seed,
    };
    let points = sweep.run()?;
    let mut r = Report::new("universality");
    r.config("dist", args.dist);
    args.act.echo(&mut r);
    r.config("m-list", &args.m_list)
        .config("n", args.n)
        .config("theta0", args.theta0)
        .config("oracle-samples", args.oracle_samples)
        .config("seed", args.seed)
        .config("tolerance", args.tolerance);
    r.summary("oracle", points[0].oracle);
    r.summary("oracle_kind", if act.has_closed_form() { "closed-form" } else { "mc-gaussian" });
    r.columns = ["m", "gap", "stderr"].map(String::from).to_vec();
    for p in &points {
        r.rows.push(vec![p.m.to_string(), num(p.gap), num(p.stderr)]);
    }
    let (first, last) = (points.first().unwrap(), points.last().unwrap());
    r.summary("gap_decreased", last.gap < first.gap);
    r.checks.push(Check::at_most("final_gap", last.gap, args.tolerance.max(3.0 * last.stderr)));
    Ok(r)
}

fn hypothesis_scan(args: &HypothesisScanArgs) -> Result<Report> {
    let mut r = Report::new("hypothesis-scan");
    let data = match (&args.input, args.synthetic) {
        (Some(path), _) => {
            r.config("input", path.display()).config("format", match args.format {
                Format::Csv => "csv",
                Format::Raw => "raw",
            });
            match args.format {
                Format::Csv => diagnostics::read_csv(path)?,
                Format::Raw => {
                    let side = args.sidecar.clone().unwrap_or_else(|| diagnostics::sidecar_path(path));
                    r.config("sidecar", side.display());
                    diagnostics::read_raw(path, &side)?
                }
            }
        }
        (None, Some(shape)) => {
            r.config("synthetic", shape).config("seed", args.seed);
            diagnostics::synthetic_sinusoids(shape.count, shape.dim, args.seed)?
        }
        (None, None) => return Err("pass --input or --synthetic".into()),
    };
    let scheme = SequenceScheme::new(args.factors.0.clone(), args.renormalize)?;
    let curve = diagnostics::dataset_curve(&data, &scheme, args.statistic)?;
    r.config("factors", &args.factors)
        .config("statistic", args.statistic.name())
        .config("renormalize", args.renormalize);
    r.summary("samples", data.len());
    // the table lists m in increasing order
    let decreasing = curve.windows(2).all(|w| w[0].mean < w[1].mean);
    r.summary("strictly_decreasing_in_m", decreasing);
    r.columns = ["m", "mean", "std", "excluded_count"].map(String::from).to_vec();
    for p in curve.iter().rev() {
        r.rows.push(vec![p.m.to_string(), num(p.mean), num(p.std), p.excluded.to_string()]);
    }
    Ok(r)
}

fn ode_check(args: &OdeCheckArgs) -> Result<Report> {
    let q = KernelQuery::new(PI / 2.0, args.norm_x, args.norm_y, args.w2)?;
    let (mode, tol) = match args.mode {
        DerivativeMode::Analytic => (Derivatives::Analytic, 1e-12),
        DerivativeMode::FiniteDifference => (Derivatives::FiniteDifference { step: args.step }, 1e-6),
    };
    if args.step.is_nan() || args.step <= 0.0 {
        return Err("--step must be positive".into());
    }
    let out = analytic::ode_forcing_residual_with(&q, args.grid, mode)?;
    let mut r = Report::new("ode-check");
    r.config("grid", args.grid)
        .config("mode", if args.mode == DerivativeMode::Analytic { "analytic" } else { "finite-difference" })
        .config("step", args.step)
        .config("w2", args.w2)
        .config("norm-x", args.norm_x)
        .config("norm-y", args.norm_y);
    r.json.insert("max_residual".into(), json!(out.max_residual));
    r.json.insert("k_pi".into(), json!(out.k_pi));
    r.json.insert("kprime_pi".into(), json!(out.kprime_pi));
    r.checks.push(Check::at_most("max_residual", out.max_residual, tol));
    r.checks.push(Check::at_most("abs_k_pi", out.k_pi.abs(), 1e-12));
    r.checks.push(Check::at_most("abs_kprime_pi", out.kprime_pi.abs(), 1e-12));
    Ok(r)
}

fn init_calc(args: &InitCalcArgs) -> Result<Report> {
    let stddev = analytic::init_stddev(args.a, args.n)?;
    let calibrated = args.dist.calibrate(stddev * stddev)?;
    let mut r = Report::new("init-calc");
    r.config("a", args.a).config("n", args.n).config("dist", args.dist);
    r.json.insert("stddev".into(), json!(stddev));
    r.json.insert("variance".into(), json!(stddev * stddev));
    r.json.insert("calibrated_spec".into(), json!(calibrated.to_string()));
    r.json.insert("calibrated".into(), serde_json::to_value(calibrated)?);
    Ok(r)
}
