//! Monte Carlo estimates from finite random networks.
//!
//! A single hidden layer with `n` neurons maps `x` to
//! `h(x)_i = σ(w_i · x)`, and `h(x)·h(y)/n` estimates the equivalent kernel.
//! Single-layer estimators stream rows of the weight matrix and never hold
//! it in memory; the deep estimators build one `n × fan_in` matrix per layer.
//!
//! Row `i` of layer `l` is drawn from its own keyed stream, and the `n`-term
//! sums are split into fixed chunks of [`CHUNK`] rows whose partial moments
//! are merged in chunk order. Results therefore do not depend on the rayon
//! pool size.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::analytic::{self, init_stddev, KernelQuery};
use crate::distributions::{DistributionSpec, RowSampler};
use crate::error::{invalid, Error, Result};
use crate::rng::{derive_seed, domain, Substreams};

/// Rows per work unit; fixed so that summation order never changes.
pub const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Input dimension.
    pub m: usize,
    /// Hidden width of every layer.
    pub n: usize,
    pub depth: usize,
    pub activation: Activation,
    pub dist: DistributionSpec,
    pub seed: u64,
}

impl NetworkConfig {
    pub fn new(m: usize, n: usize, depth: usize, activation: Activation, dist: DistributionSpec, seed: u64) -> Result<Self> {
        let cfg = NetworkConfig { m, n, depth, activation, dist, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(invalid(format!("input dimension m must be at least 2, got {}", self.m)));
        }
        if self.n == 0 {
            return Err(invalid("hidden width n must be positive"));
        }
        if self.depth == 0 {
            return Err(invalid("depth must be at least 1"));
        }
        if let Activation::LeakyRelu { slope } = self.activation {
            Activation::leaky_relu(slope)?;
        }
        self.dist.validated()?;
        Ok(())
    }

    /// Same network with the weight scale chosen by `rule`.
    pub fn with_init(&self, rule: InitRule) -> Result<Self> {
        let std = rule.stddev(&self.activation, self.n)?;
        Ok(NetworkConfig {
            dist: self.dist.calibrate(std * std)?,
            ..self.clone()
        })
    }
}

/// Weight-variance rules for deep networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitRule {
    /// Variance `2/((1+a²)n)`, which keeps `‖h‖ ≈ ‖x‖` for leaky ReLU.
    SlopeAware,
    /// Variance `2/n` whatever the slope.
    He,
}

impl InitRule {
    pub fn stddev(&self, act: &Activation, n: usize) -> Result<f64> {
        match self {
            InitRule::SlopeAware => {
                let a = act.rectifier_slope().ok_or_else(|| {
                    invalid(format!("norm-preserving init is defined for rectifiers, not {}", act.name()))
                })?;
                init_stddev(a, n)
            }
            InitRule::He => init_stddev(0.0, n),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InitRule::SlopeAware => "eq8",
            InitRule::He => "he",
        }
    }
}

impl std::str::FromStr for InitRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eq8" | "slope-aware" => Ok(InitRule::SlopeAware),
            "he" => Ok(InitRule::He),
            other => Err(Error::Parse(format!("unknown init rule `{other}` (expected eq8 or he)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputPair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub theta0: f64,
    pub norm_x: f64,
    pub norm_y: f64,
}

impl InputPair {
    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Mean of a per-neuron quantity with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalKernel {
    pub mean: f64,
    /// Sample standard deviation over `√samples` (delta method for ratios).
    pub stderr: f64,
    pub samples: usize,
}

impl EmpiricalKernel {
    /// `(self − value) / stderr`; exact agreement counts as zero even when
    /// the standard error vanishes.
    pub fn z_score(&self, value: f64) -> f64 {
        let diff = self.mean - value;
        if diff.abs() <= 1e-12 {
            0.0
        } else {
            diff / self.stderr
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Two vectors of dimension `m` at angle `theta0` with the given norms, in a
/// uniformly random orientation.
///
/// Gram–Schmidt on two Gaussian vectors yields the first two rows of a Haar
/// rotation, the same distribution as taking `Rᵀe₁` and `Rᵀ(cos θ, sin θ, 0…)`
/// from the QR factor of a Gaussian matrix.
pub fn make_angle_pair(m: usize, theta0: f64, norm_x: f64, norm_y: f64, seed: u64) -> Result<InputPair> {
    if m < 2 {
        return Err(invalid(format!("angle pairs need m >= 2, got {m}")));
    }
    let q = KernelQuery::new(theta0, norm_x, norm_y, 1.0)?;
    let theta0 = q.theta0;
    let streams = Substreams::new(seed, &[domain::INPUT_PAIR]);
    for attempt in 0u64.. {
        let mut rng = streams.stream(attempt);
        let g1: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let mut v: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let n1 = norm(&g1);
        if n1 == 0.0 {
            continue;
        }
        let r1: Vec<f64> = g1.iter().map(|g| g / n1).collect();
        let scale_v = norm(&v);
        // two passes keep r₁·r₂ at rounding level
        for _ in 0..2 {
            let p = dot(&v, &r1);
            v.iter_mut().zip(&r1).for_each(|(vi, ri)| *vi -= p * ri);
        }
        let n2 = norm(&v);
        if n2.is_nan() || n2 <= 1e-8 * scale_v {
            continue;
        }
        let r2: Vec<f64> = v.iter().map(|x| x / n2).collect();
        let (s, c) = if theta0 == 0.0 { (0.0, 1.0) } else { theta0.sin_cos() };
        let x = r1.iter().map(|r| norm_x * r).collect();
        let y = r1.iter().zip(&r2).map(|(a, b)| norm_y * (c * a + s * b)).collect();
        return Ok(InputPair { x, y, theta0, norm_x, norm_y });
    }
    unreachable!()
}

/// Running means and co-moments of `K` quantities (Welford / Chan).
#[derive(Debug, Clone, Copy)]
struct Moments<const K: usize> {
    count: usize,
    mean: [f64; K],
    comoment: [[f64; K]; K],
}

#[allow(clippy::needless_range_loop)]
impl<const K: usize> Moments<K> {
    fn new() -> Self {
        Moments { count: 0, mean: [0.0; K], comoment: [[0.0; K]; K] }
    }

    fn push(&mut self, x: [f64; K]) {
        self.count += 1;
        let n = self.count as f64;
        let mut delta = [0.0; K];
        for j in 0..K {
            delta[j] = x[j] - self.mean[j];
            self.mean[j] += delta[j] / n;
        }
        for j in 0..K {
            for k in 0..K {
                self.comoment[j][k] += delta[j] * (x[k] - self.mean[k]);
            }
        }
    }

    fn merge(&self, other: &Self) -> Self {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let mut out = Moments::new();
        out.count = self.count + other.count;
        let mut delta = [0.0; K];
        for j in 0..K {
            delta[j] = other.mean[j] - self.mean[j];
            out.mean[j] = self.mean[j] + delta[j] * nb / n;
        }
        for j in 0..K {
            for k in 0..K {
                out.comoment[j][k] =
                    self.comoment[j][k] + other.comoment[j][k] + delta[j] * delta[k] * na * nb / n;
            }
        }
        out
    }

    fn covariance(&self, j: usize, k: usize) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.comoment[j][k] / (self.count as f64 - 1.0)
        }
    }
}

/// Per-neuron products `σ(u)σ(v)`, `σ(u)²`, `σ(v)²`.
#[derive(Debug, Clone, Copy)]
struct PairStatistics(Moments<3>);

impl PairStatistics {
    /// Runs `neuron(i) -> (u, v)` for `i < n` in fixed chunks and merges in order.
    fn collect<F>(n: usize, act: &Activation, neuron: F) -> Self
    where
        F: Fn(usize, &mut Vec<f64>) -> (f64, f64) + Sync,
    {
        let chunks = n.div_ceil(CHUNK);
        let partials: Vec<Moments<3>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut buf = Vec::new();
                let mut acc = Moments::new();
                for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                    let (u, v) = neuron(i, &mut buf);
                    let (su, sv) = (act.apply(u), act.apply(v));
                    acc.push([su * sv, su * su, sv * sv]);
                }
                acc
            })
            .collect();
        PairStatistics(partials.iter().fold(Moments::new(), |a, b| a.merge(b)))
    }

    fn kernel(&self) -> EmpiricalKernel {
        let m = &self.0;
        EmpiricalKernel {
            mean: m.mean[0],
            stderr: (m.covariance(0, 0) / m.count as f64).sqrt(),
            samples: m.count,
        }
    }

    /// Cosine similarity `Σσ(u)σ(v) / √(Σσ(u)² Σσ(v)²)` with a delta-method
    /// standard error.
    fn normalized(&self) -> Result<EmpiricalKernel> {
        let m = &self.0;
        let [a, b, c] = m.mean;
        if !(b > 0.0 && c > 0.0) {
            return Err(Error::DegenerateSignal);
        }
        let root = (b * c).sqrt();
        let r = (a / root).clamp(-1.0, 1.0);
        let g = [1.0 / root, -r / (2.0 * b), -r / (2.0 * c)];
        let mut var = 0.0;
        for j in 0..3 {
            for k in 0..3 {
                var += g[j] * g[k] * m.covariance(j, k);
            }
        }
        Ok(EmpiricalKernel {
            mean: r,
            stderr: (var.max(0.0) / m.count as f64).sqrt(),
            samples: m.count,
        })
    }
}

fn single_layer_statistics(cfg: &NetworkConfig, pair: &InputPair) -> Result<PairStatistics> {
    cfg.validate()?;
    if pair.x.len() != cfg.m || pair.y.len() != cfg.m {
        return Err(Error::DimensionMismatch {
            expected: cfg.m,
            found: if pair.x.len() != cfg.m { pair.x.len() } else { pair.y.len() },
        });
    }
    let sampler = RowSampler::new(cfg.dist, cfg.seed, 0)?;
    let m = cfg.m;
    Ok(PairStatistics::collect(cfg.n, &cfg.activation, |i, buf| {
        buf.resize(m, 0.0);
        sampler.fill(i, buf);
        (dot(buf, &pair.x), dot(buf, &pair.y))
    }))
}

fn require_single_layer(cfg: &NetworkConfig) -> Result<()> {
    if cfg.depth != 1 {
        return Err(invalid(format!(
            "single-layer estimator called with depth {}; use depth_propagation",
            cfg.depth
        )));
    }
    Ok(())
}

/// Mean and standard error of `σ(w_i·x)σ(w_i·y)` over the `n` neurons of one
/// layer whose weights are `sample_matrix(dist, n, m, seed)`.
pub fn empirical_kernel(cfg: &NetworkConfig, pair: &InputPair) -> Result<EmpiricalKernel> {
    require_single_layer(cfg)?;
    Ok(single_layer_statistics(cfg, pair)?.kernel())
}

/// Cosine similarity of `h(x)` and `h(y)` for one layer, with a delta-method
/// standard error.
pub fn empirical_normalized_angle(cfg: &NetworkConfig, pair: &InputPair) -> Result<EmpiricalKernel> {
    require_single_layer(cfg)?;
    single_layer_statistics(cfg, pair)?.normalized()
}

/// Gaussian-weight reference for activations without a closed form.
///
/// With `W ~ N(0, w2·I)` the pair `(W·x, W·y)` is bivariate normal, so it is
/// sampled directly from two standard normals per neuron instead of an
/// `m`-dimensional weight vector. Returns `(kernel, normalized)`.
pub fn gaussian_oracle(act: &Activation, q: &KernelQuery, samples: usize, seed: u64) -> Result<(EmpiricalKernel, EmpiricalKernel)> {
    if samples < 2 {
        return Err(invalid("oracle needs at least two samples"));
    }
    let q = KernelQuery::new(q.theta0, q.norm_x, q.norm_y, q.w2)?;
    let sd = q.w2.sqrt();
    let (sx, sy) = (sd * q.norm_x, sd * q.norm_y);
    let (s, c) = if q.theta0 == 0.0 { (0.0, 1.0) } else { q.theta0.sin_cos() };
    let streams = Substreams::new(seed, &[domain::ORACLE]);
    let stats = PairStatistics::collect(samples, act, |i, _| {
        let mut rng = streams.stream(i as u64);
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        (sx * z1, sy * (c * z1 + s * z2))
    });
    Ok((stats.kernel(), stats.normalized()?))
}

fn layer_weights(cfg: &NetworkConfig, layer: usize, fan_in: usize) -> Result<Array2<f64>> {
    RowSampler::new(cfg.dist, cfg.seed, layer as u64)?.matrix(cfg.n, fan_in)
}

/// Cosine similarity of the two inputs after each of `cfg.depth` layers.
///
/// Every layer gets fresh weights keyed by `(seed, layer)`; layer 1 uses the
/// same matrix as [`empirical_kernel`]. Weight scale is taken from
/// `cfg.dist` as given, so deep unnormalized networks should be built with
/// [`NetworkConfig::with_init`].
pub fn depth_propagation(cfg: &NetworkConfig, pair: &InputPair) -> Result<Vec<f64>> {
    cfg.validate()?;
    if pair.dim() != cfg.m || pair.y.len() != cfg.m {
        return Err(Error::DimensionMismatch { expected: cfg.m, found: pair.dim() });
    }
    let mut h = Array2::<f64>::zeros((cfg.m, 2));
    h.column_mut(0).assign(&Array1::from(pair.x.clone()));
    h.column_mut(1).assign(&Array1::from(pair.y.clone()));
    let mut out = Vec::with_capacity(cfg.depth);
    for layer in 0..cfg.depth {
        let w = layer_weights(cfg, layer, h.nrows())?;
        h = w.dot(&h);
        h.mapv_inplace(|z| cfg.activation.apply(z));
        let (a, b) = (h.column(0), h.column(1));
        let (na, nb) = (a.dot(&a), b.dot(&b));
        if !(na > 0.0 && nb > 0.0) || !(na.is_finite() && nb.is_finite()) {
            return Err(Error::DegenerateSignal);
        }
        out.push((a.dot(&b) / (na * nb).sqrt()).clamp(-1.0, 1.0));
    }
    Ok(out)
}

/// `‖h⁽ᴶ⁾(x)‖ / ‖x‖` for `count` standard-normal inputs pushed through one
/// network of depth `cfg.depth` whose weight scale is set by `init`.
pub fn norm_ratio_samples(cfg: &NetworkConfig, count: usize, init: InitRule) -> Result<Vec<f64>> {
    let mut profile = norm_ratio_profile(cfg, count, init, &[cfg.depth], 1)?;
    Ok(profile.pop().expect("one depth requested"))
}

/// Norm ratios at several depths: entry `k` holds the ratios after
/// `depths[k]` layers. Deeper networks extend shallower ones, since layer
/// weights depend only on `(seed, layer)`.
///
/// The inputs are split into `networks` contiguous blocks, each pushed
/// through its own network. Block 0 uses `cfg.seed`; block `b > 0` a seed
/// derived from `(cfg.seed, b)`. Within one network the deep layers see
/// nearly parallel signals, so all inputs share most of the network's gain
/// fluctuation; several networks average it out.
pub fn norm_ratio_profile(
    cfg: &NetworkConfig,
    count: usize,
    init: InitRule,
    depths: &[usize],
    networks: usize,
) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(invalid("count must be positive"));
    }
    if networks == 0 || networks > count {
        return Err(invalid(format!("networks must be in 1..={count}, got {networks}")));
    }
    if depths.is_empty() {
        return Err(Error::Empty("depth list"));
    }
    if depths[0] == 0 || depths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("depths must be positive and strictly increasing"));
    }
    let deepest = *depths.last().expect("non-empty");
    let cfg = NetworkConfig { depth: deepest, ..cfg.with_init(init)? };
    cfg.validate()?;
    let inputs = Substreams::new(cfg.seed, &[domain::INPUTS]);
    let blocks: Vec<Vec<Vec<f64>>> = (0..networks)
        .into_par_iter()
        .map(|b| {
            let (start, end) = (b * count / networks, (b + 1) * count / networks);
            let seed = if b == 0 { cfg.seed } else { derive_seed(cfg.seed, &[domain::CELL, b as u64]) };
            let net = NetworkConfig { seed, ..cfg.clone() };
            let mut h = Array2::<f64>::zeros((net.m, end - start));
            for (k, mut col) in h.axis_iter_mut(Axis(1)).enumerate() {
                let mut rng = inputs.stream((start + k) as u64);
                col.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
            }
            let input_norms: Vec<f64> = h.axis_iter(Axis(1)).map(|c| c.dot(&c).sqrt()).collect();
            let mut out = Vec::with_capacity(depths.len());
            let mut wanted = depths.iter().peekable();
            for layer in 0..deepest {
                let w = layer_weights(&net, layer, h.nrows())?;
                h = w.dot(&h);
                h.mapv_inplace(|z| net.activation.apply(z));
                if wanted.peek() == Some(&&(layer + 1)) {
                    wanted.next();
                    out.push(
                        h.axis_iter(Axis(1))
                            .zip(&input_norms)
                            .map(|(c, n0)| c.dot(&c).sqrt() / n0)
                            .collect::<Vec<f64>>(),
                    );
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok((0..depths.len())
        .map(|d| blocks.iter().flat_map(|b| b[d].iter().copied()).collect())
        .collect())
}

/// One row of a universality sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniversalityPoint {
    pub m: usize,
    pub empirical: f64,
    pub oracle: f64,
    /// `|empirical − oracle|` on the normalized kernel.
    pub gap: f64,
    /// Combined standard error of the empirical and oracle values.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniversalitySweep {
    pub dist: DistributionSpec,
    pub activation: Activation,
    pub theta0: f64,
    pub m_list: Vec<usize>,
    pub n: usize,
    /// Samples for the Gaussian-weight oracle when no closed form exists.
    pub oracle_samples: usize,
    pub seed: u64,
}

impl UniversalitySweep {
    /// Normalized-kernel gap to the Gaussian-weight value at each `m`.
    ///
    /// Each `m` gets its own random orientation of a unit-norm pair and its
    /// own network, both derived from `(seed, m)`.
    pub fn run(&self) -> Result<Vec<UniversalityPoint>> {
        let third = self.dist.abs_third_moment()?;
        if !third.is_finite() {
            return Err(Error::InfiniteMoment(format!(
                "universality needs a finite third absolute moment; {} has none",
                self.dist
            )));
        }
        if self.m_list.is_empty() {
            return Err(Error::Empty("m list"));
        }
        if self.m_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("m list must be strictly increasing"));
        }
        let w2 = self.dist.second_moment()?;
        let q = KernelQuery::new(self.theta0, 1.0, 1.0, w2)?;
        let (oracle, oracle_se) = match self.activation.rectifier_slope() {
            Some(a) => (analytic::normalized_lrelu_kernel(q.theta0, a)?, 0.0),
            None => {
                let (_, norm) = gaussian_oracle(&self.activation, &q, self.oracle_samples, self.seed)?;
                (norm.mean, norm.stderr)
            }
        };
        self.m_list
            .iter()
            .map(|&m| {
                let cell = derive_seed(self.seed, &[domain::CELL, m as u64]);
                let pair = make_angle_pair(m, q.theta0, 1.0, 1.0, cell)?;
                let cfg = NetworkConfig::new(m, self.n, 1, self.activation, self.dist, cell)?;
                let emp = empirical_normalized_angle(&cfg, &pair)?;
                Ok(UniversalityPoint {
                    m,
                    empirical: emp.mean,
                    oracle,
                    gap: (emp.mean - oracle).abs(),
                    stderr: emp.stderr.hypot(oracle_se),
                })
            })
            .collect()
    }
}
