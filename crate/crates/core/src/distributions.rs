//! Weight distributions, their analytic moments, and row samplers.
//!
//! Each family is symmetric about zero. Spherical Gaussian, generalized
//! Gaussian, uniform and Laplace rows have IID coordinates. Multivariate-t
//! rows are a Gaussian vector times one shared `√(ν/χ²_ν)` factor, so the
//! coordinates are uncorrelated but not independent. The distribution is
//! still rotationally invariant.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Exp1, Open01, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{domain, Substreams};
use crate::special::{gamma_ratio, integrate, ln_gamma};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistributionSpec {
    /// IID `N(0, σ²)` coordinates.
    SphericalGaussian { sigma: f64 },
    /// Multivariate t with `nu` degrees of freedom and shape `scale²·I`.
    MultivariateT { nu: f64, scale: f64 },
    /// IID coordinates with density `∝ exp(−|w/α|^β)`.
    GeneralizedGaussian { alpha: f64, beta: f64 },
    /// IID coordinates uniform on `[−bound, bound]`.
    Uniform { bound: f64 },
    /// IID coordinates with density `∝ exp(−|w|/b)`.
    Laplace { b: f64 },
}

impl DistributionSpec {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        DistributionSpec::SphericalGaussian { sigma }.validated()
    }

    pub fn multivariate_t(nu: f64, scale: f64) -> Result<Self> {
        DistributionSpec::MultivariateT { nu, scale }.validated()
    }

    pub fn generalized_gaussian(alpha: f64, beta: f64) -> Result<Self> {
        DistributionSpec::GeneralizedGaussian { alpha, beta }.validated()
    }

    pub fn uniform(bound: f64) -> Result<Self> {
        DistributionSpec::Uniform { bound }.validated()
    }

    pub fn laplace(b: f64) -> Result<Self> {
        DistributionSpec::Laplace { b }.validated()
    }

    pub fn family(&self) -> &'static str {
        match self {
            DistributionSpec::SphericalGaussian { .. } => "gaussian",
            DistributionSpec::MultivariateT { .. } => "t",
            DistributionSpec::GeneralizedGaussian { .. } => "gengauss",
            DistributionSpec::Uniform { .. } => "uniform",
            DistributionSpec::Laplace { .. } => "laplace",
        }
    }

    pub fn validated(self) -> Result<Self> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{} parameter {name} must be positive and finite, got {v}", self.family())))
            }
        };
        match self {
            DistributionSpec::SphericalGaussian { sigma } => positive("sigma", sigma)?,
            DistributionSpec::MultivariateT { nu, scale } => {
                positive("scale", scale)?;
                positive("nu", nu)?;
                if nu <= 2.0 {
                    return Err(Error::InfiniteMoment(format!("t distribution with nu = {nu} <= 2")));
                }
            }
            DistributionSpec::GeneralizedGaussian { alpha, beta } => {
                positive("alpha", alpha)?;
                positive("beta", beta)?;
            }
            DistributionSpec::Uniform { bound } => positive("bound", bound)?,
            DistributionSpec::Laplace { b } => positive("b", b)?,
        }
        Ok(self)
    }

    /// Exact `E[W_i²]`.
    pub fn second_moment(&self) -> Result<f64> {
        let spec = self.validated()?;
        Ok(match spec {
            DistributionSpec::SphericalGaussian { sigma } => sigma * sigma,
            DistributionSpec::MultivariateT { nu, scale } => scale * scale * nu / (nu - 2.0),
            DistributionSpec::GeneralizedGaussian { alpha, beta } => {
                alpha * alpha * gamma_ratio(3.0 / beta, 1.0 / beta)
            }
            DistributionSpec::Uniform { bound } => bound * bound / 3.0,
            DistributionSpec::Laplace { b } => 2.0 * b * b,
        })
    }

    /// `E|W_i|³`, or `f64::INFINITY` when it diverges (t with `ν ≤ 3`).
    ///
    /// For the t family this uses the chi-square mixture,
    /// `E|W|³ = scale³ · E|Z|³ · E[(ν/χ²_ν)^{3/2}]`; see
    /// [`t_abs_third_moment_quadrature`] for an independent numeric route.
    pub fn abs_third_moment(&self) -> Result<f64> {
        let spec = self.validated()?;
        Ok(match spec {
            DistributionSpec::SphericalGaussian { sigma } => {
                sigma.powi(3) * 2.0 * (2.0 / std::f64::consts::PI).sqrt()
            }
            DistributionSpec::MultivariateT { nu, scale } => {
                if nu <= 3.0 {
                    f64::INFINITY
                } else {
                    let ln = 1.5 * nu.ln() + ln_gamma((nu - 3.0) / 2.0)
                        - 0.5 * std::f64::consts::PI.ln()
                        - ln_gamma(nu / 2.0);
                    scale.powi(3) * ln.exp()
                }
            }
            DistributionSpec::GeneralizedGaussian { alpha, beta } => {
                alpha.powi(3) * gamma_ratio(4.0 / beta, 1.0 / beta)
            }
            DistributionSpec::Uniform { bound } => bound.powi(3) / 4.0,
            DistributionSpec::Laplace { b } => 6.0 * b.powi(3),
        })
    }

    /// Density `f(w) = f(Rw)` for every rotation `R`.
    pub fn is_rotationally_invariant(&self) -> bool {
        match *self {
            DistributionSpec::SphericalGaussian { .. } | DistributionSpec::MultivariateT { .. } => true,
            DistributionSpec::GeneralizedGaussian { beta, .. } => beta == 2.0,
            DistributionSpec::Uniform { .. } | DistributionSpec::Laplace { .. } => false,
        }
    }

    /// Rescales the scale parameter so that `E[W²] = target_w2`. Shape
    /// parameters (`ν`, `β`) are kept.
    pub fn calibrate(&self, target_w2: f64) -> Result<Self> {
        if !(target_w2 > 0.0 && target_w2.is_finite()) {
            return Err(invalid(format!("target second moment must be positive, got {target_w2}")));
        }
        let spec = self.validated()?;
        let out = match spec {
            DistributionSpec::SphericalGaussian { .. } => DistributionSpec::SphericalGaussian {
                sigma: target_w2.sqrt(),
            },
            DistributionSpec::MultivariateT { nu, .. } => DistributionSpec::MultivariateT {
                nu,
                scale: (target_w2 * (nu - 2.0) / nu).sqrt(),
            },
            DistributionSpec::GeneralizedGaussian { beta, .. } => DistributionSpec::GeneralizedGaussian {
                alpha: (target_w2 / gamma_ratio(3.0 / beta, 1.0 / beta)).sqrt(),
                beta,
            },
            DistributionSpec::Uniform { .. } => DistributionSpec::Uniform {
                bound: (3.0 * target_w2).sqrt(),
            },
            DistributionSpec::Laplace { .. } => DistributionSpec::Laplace {
                b: (target_w2 / 2.0).sqrt(),
            },
        };
        out.validated()
    }

    /// Fills `out` with one weight vector.
    pub fn sample_row<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match *self {
            DistributionSpec::SphericalGaussian { sigma } => {
                for w in out.iter_mut() {
                    *w = sigma * rng.sample::<f64, _>(StandardNormal);
                }
            }
            DistributionSpec::MultivariateT { nu, scale } => {
                let chi2 = 2.0 * gamma_variate(rng, nu / 2.0);
                let mix = scale * (nu / chi2).sqrt();
                for w in out.iter_mut() {
                    *w = mix * rng.sample::<f64, _>(StandardNormal);
                }
            }
            DistributionSpec::GeneralizedGaussian { alpha, beta } => {
                if beta == 2.0 {
                    let sigma = alpha * std::f64::consts::FRAC_1_SQRT_2;
                    for w in out.iter_mut() {
                        *w = sigma * rng.sample::<f64, _>(StandardNormal);
                    }
                } else if beta == 1.0 {
                    for w in out.iter_mut() {
                        *w = alpha * signed_exp1(rng);
                    }
                } else {
                    let shape = 1.0 / beta;
                    for w in out.iter_mut() {
                        // |W| = α G^{1/β}, G ~ Gamma(1/β)
                        let mag = alpha * (ln_gamma_variate(rng, shape) / beta).exp();
                        *w = if rng.random::<bool>() { mag } else { -mag };
                    }
                }
            }
            DistributionSpec::Uniform { bound } => {
                for w in out.iter_mut() {
                    *w = bound * (2.0 * rng.random::<f64>() - 1.0);
                }
            }
            DistributionSpec::Laplace { b } => {
                for w in out.iter_mut() {
                    *w = b * signed_exp1(rng);
                }
            }
        }
    }
}

#[inline]
fn signed_exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let e: f64 = rng.sample(Exp1);
    if rng.random::<bool>() {
        e
    } else {
        -e
    }
}

/// `ln G` with `G ~ Gamma(shape, 1)` (Marsaglia–Tsang).
///
/// Shapes below one are boosted: `G(a) = G(a + 1)·U^{1/a}`. Working in log
/// space keeps tiny shapes (large β) from underflowing to zero.
pub fn ln_gamma_variate<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    if shape < 1.0 {
        let u: f64 = rng.sample(Open01);
        return ln_gamma_variate(rng, shape + 1.0) + u.ln() / shape;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u: f64 = rng.sample(Open01);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return (d * v).ln();
        }
    }
}

/// `G ~ Gamma(shape, 1)`.
pub fn gamma_variate<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    ln_gamma_variate(rng, shape).exp()
}

/// `E|W|³` of the t marginal by adaptive quadrature of its density.
///
/// Substitutes `w = scale·√ν·tan φ` to map the half-line onto `[0, π/2)`.
/// Accurate for `ν ≳ 3.5`; near `ν = 3` the integrand's endpoint singularity is
/// too strong for a fixed interval budget.
pub fn t_abs_third_moment_quadrature(nu: f64, scale: f64) -> Result<f64> {
    DistributionSpec::multivariate_t(nu, scale)?;
    if nu <= 3.0 {
        return Ok(f64::INFINITY);
    }
    let ln_norm = ln_gamma((nu + 1.0) / 2.0)
        - ln_gamma(nu / 2.0)
        - 0.5 * (nu * std::f64::consts::PI).ln()
        - scale.ln();
    let c = scale * nu.sqrt();
    let density = |w: f64| (ln_norm - (nu + 1.0) / 2.0 * (w * w / (nu * scale * scale)).ln_1p()).exp();
    let integrand = |phi: f64| {
        let (s, co) = phi.sin_cos();
        let w = c * s / co;
        w.powi(3) * density(w) * c / (co * co)
    };
    let q = integrate(integrand, 0.0, std::f64::consts::FRAC_PI_2, 1e-8, 4000);
    Ok(2.0 * q.value)
}

/// Draws row `i` of the weight matrix for `(seed, layer)` into `out`.
#[derive(Debug, Clone)]
pub struct RowSampler {
    spec: DistributionSpec,
    streams: Substreams,
}

impl RowSampler {
    pub fn new(spec: DistributionSpec, seed: u64, layer: u64) -> Result<Self> {
        Ok(RowSampler {
            spec: spec.validated()?,
            streams: Substreams::new(seed, &[domain::WEIGHTS, layer]),
        })
    }

    pub fn spec(&self) -> &DistributionSpec {
        &self.spec
    }

    pub fn fill(&self, row: usize, out: &mut [f64]) {
        let mut rng = self.streams.stream(row as u64);
        self.spec.sample_row(&mut rng, out);
    }

    /// Full `rows × cols` matrix; rows are generated in parallel.
    pub fn matrix(&self, rows: usize, cols: usize) -> Result<Array2<f64>> {
        if rows == 0 || cols == 0 {
            return Err(invalid(format!("matrix shape must be positive, got {rows}x{cols}")));
        }
        let len = rows
            .checked_mul(cols)
            .ok_or(Error::Allocation { rows, cols })?;
        let mut data: Vec<f64> = Vec::new();
        data.try_reserve_exact(len)
            .map_err(|_| Error::Allocation { rows, cols })?;
        data.resize(len, 0.0);
        data.par_chunks_mut(cols)
            .enumerate()
            .for_each(|(i, row)| self.fill(i, row));
        Array2::from_shape_vec((rows, cols), data).map_err(|e| invalid(e.to_string()))
    }
}

/// `n × m` weight matrix, one weight vector per row.
///
/// Row `i` depends only on `(spec, m, seed, i)` and equals row `i` of layer 0
/// in [`RowSampler`].
pub fn sample_matrix(spec: &DistributionSpec, rows: usize, cols: usize, seed: u64) -> Result<Array2<f64>> {
    RowSampler::new(*spec, seed, 0)?.matrix(rows, cols)
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DistributionSpec::SphericalGaussian { sigma } => write!(f, "family=gaussian,sigma={sigma}"),
            DistributionSpec::MultivariateT { nu, scale } => write!(f, "family=t,nu={nu},scale={scale}"),
            DistributionSpec::GeneralizedGaussian { alpha, beta } => {
                write!(f, "family=gengauss,alpha={alpha},beta={beta}")
            }
            DistributionSpec::Uniform { bound } => write!(f, "family=uniform,bound={bound}"),
            DistributionSpec::Laplace { b } => write!(f, "family=laplace,b={b}"),
        }
    }
}

impl FromStr for DistributionSpec {
    type Err = Error;

    /// Parses `family=t,nu=5,scale=1`. Scale parameters default to 1; shape
    /// parameters (`nu`, `beta`) are required.
    fn from_str(s: &str) -> Result<Self> {
        let mut family = None;
        let mut params: Vec<(&str, f64)> = Vec::new();
        for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got `{item}`")))?;
            let (k, v) = (k.trim(), v.trim());
            if k == "family" {
                family = Some(v);
            } else {
                let x = v
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{k}=`{v}`: {e}")))?;
                if params.iter().any(|(name, _)| *name == k) {
                    return Err(Error::Parse(format!("duplicate key `{k}`")));
                }
                params.push((k, x));
            }
        }
        let family = family.ok_or_else(|| Error::Parse("missing family=".into()))?;
        let allowed: &[&str] = match family {
            "gaussian" | "normal" => &["sigma"],
            "t" | "student_t" => &["nu", "scale"],
            "gengauss" | "generalized_gaussian" => &["alpha", "beta"],
            "uniform" => &["bound"],
            "laplace" => &["b"],
            other => return Err(Error::Parse(format!("unknown family `{other}`"))),
        };
        if let Some((k, _)) = params.iter().find(|(k, _)| !allowed.contains(k)) {
            return Err(Error::Parse(format!("unknown key `{k}` for family {family}")));
        }
        let get = |k: &str| params.iter().find(|(name, _)| *name == k).map(|p| p.1);
        let required = |k: &str| get(k).ok_or_else(|| Error::Parse(format!("family {family} needs {k}=")));
        let spec = match allowed[0] {
            "sigma" => DistributionSpec::SphericalGaussian {
                sigma: get("sigma").unwrap_or(1.0),
            },
            "nu" => DistributionSpec::MultivariateT {
                nu: required("nu")?,
                scale: get("scale").unwrap_or(1.0),
            },
            "alpha" => DistributionSpec::GeneralizedGaussian {
                alpha: get("alpha").unwrap_or(1.0),
                beta: required("beta")?,
            },
            "bound" => DistributionSpec::Uniform {
                bound: get("bound").unwrap_or(1.0),
            },
            _ => DistributionSpec::Laplace {
                b: get("b").unwrap_or(1.0),
            },
        };
        spec.validated()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::gamma;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const DRAWS: usize = 1_000_000;

    fn all_families() -> Vec<DistributionSpec> {
        vec![
            DistributionSpec::gaussian(0.7).unwrap(),
            DistributionSpec::multivariate_t(5.0, 1.0).unwrap(),
            DistributionSpec::generalized_gaussian(1.0, 1.0).unwrap(),
            DistributionSpec::generalized_gaussian(1.3, 4.0).unwrap(),
            DistributionSpec::generalized_gaussian(0.8, 0.6).unwrap(),
            DistributionSpec::uniform(1.5).unwrap(),
            DistributionSpec::laplace(0.5).unwrap(),
        ]
    }

    /// mean and standard error of `f(w)` over a `DRAWS × 1` sample
    fn mc_moment(spec: &DistributionSpec, seed: u64, f: impl Fn(f64) -> f64) -> (f64, f64) {
        let w = sample_matrix(spec, DRAWS, 1, seed).unwrap();
        let vals: Vec<f64> = w.iter().map(|&x| f(x)).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    #[test]
    fn second_moment_examples() {
        let gg = DistributionSpec::generalized_gaussian(1.7, 2.0).unwrap();
        assert_relative_eq!(gg.second_moment().unwrap(), 1.7 * 1.7 / 2.0, max_relative = 1e-13);
        assert_relative_eq!(DistributionSpec::uniform(1.0).unwrap().second_moment().unwrap(), 1.0 / 3.0);
        assert_relative_eq!(
            DistributionSpec::multivariate_t(5.0, 1.0).unwrap().second_moment().unwrap(),
            5.0 / 3.0,
            max_relative = 1e-15
        );
        assert!(matches!(
            DistributionSpec::multivariate_t(2.0, 1.0),
            Err(Error::InfiniteMoment(_))
        ));
        assert!(DistributionSpec::gaussian(0.0).is_err());
    }

    #[test]
    fn t_second_moment_by_sampling() {
        let spec = DistributionSpec::multivariate_t(5.0, 1.0).unwrap();
        let (m, se) = mc_moment(&spec, 3, |w| w * w);
        assert!((m - 5.0 / 3.0).abs() < 4.0 * se, "{m} ± {se}");
    }

    #[test]
    fn abs_third_moment_examples() {
        assert_relative_eq!(DistributionSpec::laplace(1.0).unwrap().abs_third_moment().unwrap(), 6.0);
        assert_relative_eq!(DistributionSpec::uniform(1.0).unwrap().abs_third_moment().unwrap(), 0.25);
        assert!(DistributionSpec::multivariate_t(3.0, 1.0)
            .unwrap()
            .abs_third_moment()
            .unwrap()
            .is_infinite());
        // generalized Gaussian at β = 1 is Laplace with b = α
        assert_relative_eq!(
            DistributionSpec::generalized_gaussian(1.0, 1.0).unwrap().abs_third_moment().unwrap(),
            6.0,
            max_relative = 1e-13
        );
        // and at β = 2 a Gaussian with σ = α/√2
        let g = DistributionSpec::gaussian(std::f64::consts::FRAC_1_SQRT_2).unwrap();
        assert_relative_eq!(
            DistributionSpec::generalized_gaussian(1.0, 2.0).unwrap().abs_third_moment().unwrap(),
            g.abs_third_moment().unwrap(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn t_third_moment_two_routes_agree() {
        for &(nu, scale) in &[(3.5, 1.0), (4.0, 0.5), (5.0, 1.0), (10.0, 2.0), (40.0, 1.0)] {
            let spec = DistributionSpec::multivariate_t(nu, scale).unwrap();
            let closed = spec.abs_third_moment().unwrap();
            let quad = t_abs_third_moment_quadrature(nu, scale).unwrap();
            assert!(((closed - quad) / closed).abs() < 1e-6, "nu={nu}: {closed} vs {quad}");
        }
    }

    #[test]
    fn calibrate_examples() {
        let g = DistributionSpec::gaussian(1.0).unwrap().calibrate(2.0 / 50.0).unwrap();
        assert_eq!(g, DistributionSpec::SphericalGaussian { sigma: (0.04f64).sqrt() });
        assert_relative_eq!((0.04f64).sqrt(), 0.2, max_relative = 1e-15);
        let u = DistributionSpec::uniform(1.0).unwrap().calibrate(1.0 / 3.0).unwrap();
        match u {
            DistributionSpec::Uniform { bound } => assert_relative_eq!(bound, 1.0, max_relative = 1e-15),
            _ => unreachable!(),
        }
        let gg = DistributionSpec::generalized_gaussian(1.0, 1.0).unwrap().calibrate(2.0).unwrap();
        match gg {
            DistributionSpec::GeneralizedGaussian { alpha, beta } => {
                assert_relative_eq!(alpha, 1.0, max_relative = 1e-13);
                assert_eq!(beta, 1.0);
            }
            _ => unreachable!(),
        }
        assert!(DistributionSpec::MultivariateT { nu: 1.5, scale: 1.0 }.calibrate(1.0).is_err());
        assert!(DistributionSpec::gaussian(1.0).unwrap().calibrate(0.0).is_err());
    }

    #[test]
    fn rotational_invariance_flags() {
        assert!(DistributionSpec::multivariate_t(5.0, 1.0).unwrap().is_rotationally_invariant());
        assert!(DistributionSpec::gaussian(1.0).unwrap().is_rotationally_invariant());
        assert!(!DistributionSpec::generalized_gaussian(1.0, 4.0).unwrap().is_rotationally_invariant());
        assert!(DistributionSpec::generalized_gaussian(1.0, 2.0).unwrap().is_rotationally_invariant());
        assert!(!DistributionSpec::uniform(1.0).unwrap().is_rotationally_invariant());
        assert!(!DistributionSpec::laplace(1.0).unwrap().is_rotationally_invariant());
    }

    #[test]
    fn sampled_second_moments_match_analytic() {
        for (i, spec) in all_families().into_iter().enumerate() {
            let (m, se) = mc_moment(&spec, 100 + i as u64, |w| w * w);
            let exact = spec.second_moment().unwrap();
            assert!((m - exact).abs() < 4.0 * se, "{spec}: {m} vs {exact} (se {se})");
        }
    }

    #[test]
    fn sampled_odd_moments_vanish() {
        for (i, spec) in all_families().into_iter().enumerate() {
            let (m1, se1) = mc_moment(&spec, 200 + i as u64, |w| w);
            assert!(m1.abs() < 4.0 * se1, "{spec}: mean {m1} (se {se1})");
            let (m3, se3) = mc_moment(&spec, 300 + i as u64, |w| w * w * w);
            assert!(m3.abs() < 4.0 * se3, "{spec}: third {m3} (se {se3})");
        }
    }

    #[test]
    fn gaussian_column_means() {
        let sigma = 1.3;
        let spec = DistributionSpec::gaussian(sigma).unwrap();
        let w = sample_matrix(&spec, 250_000, 4, 9).unwrap();
        let means = w.mean_axis(ndarray::Axis(0)).unwrap();
        // 10^6 draws in total; each column mean has σ/500 standard error
        for m in means.iter() {
            assert!(m.abs() < 5.0 * sigma / 500.0, "{m}");
        }
    }

    #[test]
    fn t_coordinates_uncorrelated_but_dependent() {
        let spec = DistributionSpec::multivariate_t(5.0, 1.0).unwrap();
        let w = sample_matrix(&spec, DRAWS, 2, 17).unwrap();
        let (a, b) = (w.column(0), w.column(1));
        let n = DRAWS as f64;
        let mean = |v: &ndarray::ArrayView1<f64>| v.sum() / n;
        let (ma, mb) = (mean(&a), mean(&b));
        let cov = a.iter().zip(b.iter()).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n;
        let va = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / n;
        let vb = b.iter().map(|y| (y - mb).powi(2)).sum::<f64>() / n;
        let corr = cov / (va * vb).sqrt();
        assert!(corr.abs() < 0.01, "corr = {corr}");
        // squared coordinates share the mixing factor, so they are correlated
        let sq_cov = a.iter().zip(b.iter()).map(|(x, y)| x * x * y * y).sum::<f64>() / n - va * vb;
        assert!(sq_cov > 0.1, "{sq_cov}");
    }

    #[test]
    fn gengauss_beta4_second_moment() {
        let spec = DistributionSpec::generalized_gaussian(1.0, 4.0).unwrap();
        let exact = gamma(0.75) / gamma(0.25);
        assert_relative_eq!(spec.second_moment().unwrap(), exact, max_relative = 1e-13);
        let (m, se) = mc_moment(&spec, 21, |w| w * w);
        assert!((m - exact).abs() < 4.0 * se);
    }

    #[test]
    fn large_beta_approaches_uniform() {
        let gg = DistributionSpec::generalized_gaussian(1.0, 64.0).unwrap();
        let u = DistributionSpec::uniform(1.0).unwrap();
        let (a, b) = (gg.second_moment().unwrap(), u.second_moment().unwrap());
        assert!(((a - b) / b).abs() < 0.02, "{a} vs {b}");
        // samples stay inside a slightly inflated support
        let w = sample_matrix(&gg, 100_000, 1, 5).unwrap();
        assert!(w.iter().all(|x| x.abs() < 1.2));
        assert!(w.iter().all(|x| *x != 0.0));
    }

    #[test]
    fn gamma_variates_have_unit_scale_mean() {
        let s = Substreams::new(4, &[1]);
        for &shape in &[0.25, 0.5, 1.0, 2.5, 7.0] {
            let mut rng = s.stream((shape * 100.0) as u64);
            let n = 200_000;
            let xs: Vec<f64> = (0..n).map(|_| gamma_variate(&mut rng, shape)).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            // Var = shape
            let se = (shape / n as f64).sqrt();
            assert!((mean - shape).abs() < 4.0 * se, "shape {shape}: {mean}");
        }
    }

    #[test]
    fn sample_matrix_is_deterministic_and_row_keyed() {
        let spec = DistributionSpec::generalized_gaussian(1.0, 4.0).unwrap();
        let a = sample_matrix(&spec, 37, 11, 99).unwrap();
        let b = sample_matrix(&spec, 37, 11, 99).unwrap();
        assert_eq!(a, b);
        // a taller matrix shares its leading rows
        let c = sample_matrix(&spec, 50, 11, 99).unwrap();
        assert_eq!(a, c.slice(ndarray::s![..37, ..]));
        let d = sample_matrix(&spec, 37, 11, 100).unwrap();
        assert_ne!(a, d);
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let e = single.install(|| sample_matrix(&spec, 37, 11, 99).unwrap());
        assert_eq!(a, e);
        assert!(sample_matrix(&spec, 0, 3, 1).is_err());
    }

    #[test]
    fn text_form_examples() {
        let t: DistributionSpec = "family=t,nu=5,scale=1".parse().unwrap();
        assert_eq!(t, DistributionSpec::MultivariateT { nu: 5.0, scale: 1.0 });
        let g: DistributionSpec = "family=gengauss,beta=4".parse().unwrap();
        assert_eq!(g, DistributionSpec::GeneralizedGaussian { alpha: 1.0, beta: 4.0 });
        assert!("family=t".parse::<DistributionSpec>().is_err());
        assert!("family=t,nu=2".parse::<DistributionSpec>().is_err());
        assert!("family=cauchy".parse::<DistributionSpec>().is_err());
        assert!("family=gaussian,nu=3".parse::<DistributionSpec>().is_err());
        assert!("sigma=1".parse::<DistributionSpec>().is_err());
    }

    fn any_spec() -> impl Strategy<Value = DistributionSpec> {
        prop_oneof![
            (0.01f64..10.0).prop_map(|sigma| DistributionSpec::SphericalGaussian { sigma }),
            (2.01f64..50.0, 0.01f64..10.0).prop_map(|(nu, scale)| DistributionSpec::MultivariateT { nu, scale }),
            (0.01f64..10.0, 0.2f64..40.0).prop_map(|(alpha, beta)| DistributionSpec::GeneralizedGaussian { alpha, beta }),
            (0.01f64..10.0).prop_map(|bound| DistributionSpec::Uniform { bound }),
            (0.01f64..10.0).prop_map(|b| DistributionSpec::Laplace { b }),
        ]
    }

    proptest! {
        #[test]
        fn text_form_round_trips(spec in any_spec()) {
            let back: DistributionSpec = spec.to_string().parse().unwrap();
            prop_assert_eq!(back, spec);
        }

        #[test]
        fn calibration_hits_target_and_is_idempotent(spec in any_spec(), target in 1e-4f64..10.0) {
            let once = spec.calibrate(target).unwrap();
            let got = once.second_moment().unwrap();
            prop_assert!(((got - target) / target).abs() < 1e-12);
            prop_assert_eq!(once.calibrate(target).unwrap(), once);
            prop_assert_eq!(once.family(), spec.family());
        }
    }
}
