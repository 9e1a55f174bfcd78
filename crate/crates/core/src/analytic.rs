//! Closed-form equivalent kernels of infinitely wide (L)ReLU layers.
//!
//! For ReLU and any rotationally invariant weight distribution with finite
//! second moment the equivalent kernel is the arc-cosine kernel
//!
//! ```text
//! k(θ) = E[W²]‖x‖‖y‖ / 2π · (sin θ + (π − θ) cos θ)
//! ```
//!
//! and it depends on the distribution only through `E[W²]`. The leaky
//! rectifier adds a linear term. Iterating the normalized kernel across layers
//! gives the map `T` on cosines, whose unique fixed point is `cos θ = 1`.
//!
//! The layer recursion uses the previous layer's cosine in the linear term,
//! `2a·cos θ_{j-1}`. That is the map that is a contraction; writing the input
//! angle `θ_0` there instead would give a recursion without the fixed point at 1.

use std::f64::consts::PI;

use serde::Serialize;

use crate::activation::Activation;
use crate::error::{invalid, Error, Result};

/// Slack allowed when an angle lands just outside `[0, π]`.
pub const ANGLE_SLACK: f64 = 1e-9;
/// Slack allowed when a cosine lands just outside `[-1, 1]`.
pub const COSINE_SLACK: f64 = 1e-12;

fn check_angle(name: &'static str, theta: f64) -> Result<f64> {
    if !(-ANGLE_SLACK..=PI + ANGLE_SLACK).contains(&theta) {
        return Err(Error::Domain {
            name,
            value: theta,
            domain: "[0, π]",
        });
    }
    Ok(theta.clamp(0.0, PI))
}

fn check_cosine(z: f64) -> Result<f64> {
    if z.is_nan() || z.abs() > 1.0 + COSINE_SLACK {
        return Err(Error::Domain {
            name: "cosine",
            value: z,
            domain: "[-1, 1]",
        });
    }
    Ok(z.clamp(-1.0, 1.0))
}

fn check_slope(a: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&a) {
        return Err(Error::Domain {
            name: "slope",
            value: a,
            domain: "[0, 1)",
        });
    }
    Ok(a)
}

/// Angle between two inputs, their norms and the weight second moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelQuery {
    pub theta0: f64,
    pub norm_x: f64,
    pub norm_y: f64,
    /// `E[W_i²]`
    pub w2: f64,
}

impl KernelQuery {
    pub fn new(theta0: f64, norm_x: f64, norm_y: f64, w2: f64) -> Result<Self> {
        let q = KernelQuery {
            theta0,
            norm_x,
            norm_y,
            w2,
        };
        q.validated()
    }

    /// Unit-norm inputs and unit second moment.
    pub fn unit(theta0: f64) -> Result<Self> {
        Self::new(theta0, 1.0, 1.0, 1.0)
    }

    fn validated(&self) -> Result<Self> {
        let theta0 = check_angle("theta0", self.theta0)?;
        for (name, v) in [("norm_x", self.norm_x), ("norm_y", self.norm_y), ("w2", self.w2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain {
                    name,
                    value: v,
                    domain: "(0, ∞)",
                });
            }
        }
        Ok(KernelQuery { theta0, ..*self })
    }

    fn scale(&self) -> f64 {
        self.w2 * self.norm_x * self.norm_y
    }
}

/// `sin θ + (π − θ) cos θ`
#[inline]
fn arc_cosine_shape(theta: f64) -> f64 {
    theta.sin() + (PI - theta) * theta.cos()
}

/// The arc-cosine kernel of a ReLU layer.
pub fn arc_cosine_kernel(q: &KernelQuery) -> Result<f64> {
    let q = q.validated()?;
    // shape / 2π is exactly 1/2 at θ = 0
    Ok(q.scale() * (arc_cosine_shape(q.theta0) / (2.0 * PI)))
}

/// `(k, k′, k″)` of the arc-cosine kernel with respect to the angle.
pub fn arc_cosine_derivatives(q: &KernelQuery) -> Result<(f64, f64, f64)> {
    let q = q.validated()?;
    let c = q.scale() / (2.0 * PI);
    let t = q.theta0;
    let (s, co) = t.sin_cos();
    Ok((
        c * (s + (PI - t) * co),
        -c * (PI - t) * s,
        c * (s - (PI - t) * co),
    ))
}

/// Equivalent kernel of a leaky-ReLU layer; slope 0 is the arc-cosine kernel.
///
/// Fails with [`Error::NoClosedForm`] for ELU and tanh.
pub fn lrelu_kernel(q: &KernelQuery, act: &Activation) -> Result<f64> {
    let a = act.rectifier_slope().ok_or(Error::NoClosedForm(act.name()))?;
    let a = check_slope(a)?;
    let q = q.validated()?;
    let t = q.theta0;
    let bracket = (1.0 - a).powi(2) / (2.0 * PI) * arc_cosine_shape(t) + a * t.cos();
    Ok(bracket * q.scale())
}

/// Cosine similarity of the hidden representations of a ReLU layer.
pub fn normalized_relu_kernel(theta0: f64) -> Result<f64> {
    let t = check_angle("theta0", theta0)?;
    Ok((arc_cosine_shape(t) / PI).clamp(0.0, 1.0))
}

/// Cosine similarity after one leaky-ReLU layer, `T(cos θ₀)`.
pub fn normalized_lrelu_kernel(theta0: f64, a: f64) -> Result<f64> {
    let t = check_angle("theta0", theta0)?;
    lrelu_angle_map(t.cos(), a)
}

/// The layer-to-layer map on cosines,
/// `T(z) = [(1−a)²/π·(√(1−z²) + (π − arccos z) z) + 2a z] / (1 + a²)`.
pub fn lrelu_angle_map(cos_prev: f64, a: f64) -> Result<f64> {
    let z = check_cosine(cos_prev)?;
    let a = check_slope(a)?;
    let rect = ((1.0 - z * z).max(0.0).sqrt() + (PI - z.acos()) * z) / PI;
    let v = ((1.0 - a).powi(2) * rect + 2.0 * a * z) / (1.0 + a * a);
    Ok(v.clamp(-1.0, 1.0))
}

/// `|T′(z)| = |1 − ((1−a)/(1+a))² · arccos(z)/π|`, at most 1 on `[-1, 1]`.
pub fn contraction_derivative_magnitude(z: f64, a: f64) -> Result<f64> {
    let z = check_cosine(z)?;
    let a = check_slope(a)?;
    let r = (1.0 - a) / (1.0 + a);
    Ok((1.0 - r * r * z.acos() / PI).abs())
}

/// Angles between two signals layer by layer under the composed kernel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepthTrace {
    pub slope: f64,
    /// `θ_0 ..= θ_J`
    pub angles: Vec<f64>,
    /// `cos θ_j`, same length as `angles`
    pub cosines: Vec<f64>,
}

impl DepthTrace {
    pub fn depth(&self) -> usize {
        self.angles.len() - 1
    }
}

/// Iterates `T` for `depth` layers starting from `theta0`.
///
/// Always returns exactly `depth + 1` entries, with no early exit at the fixed
/// point, so traces from different runs line up index by index.
pub fn depth_trace(theta0: f64, a: f64, depth: usize) -> Result<DepthTrace> {
    let t0 = check_angle("theta0", theta0)?;
    let a = check_slope(a)?;
    if depth == 0 {
        return Err(invalid("depth must be at least 1"));
    }
    let mut angles = Vec::with_capacity(depth + 1);
    let mut cosines = Vec::with_capacity(depth + 1);
    angles.push(t0);
    cosines.push(t0.cos());
    let mut z = t0.cos();
    for _ in 0..depth {
        z = lrelu_angle_map(z, a)?;
        angles.push(z.acos());
        cosines.push(z);
    }
    Ok(DepthTrace {
        slope: a,
        angles,
        cosines,
    })
}

/// `2 − 2 cos θ`: expected squared distance between two equal-norm signals,
/// relative to their squared norm.
pub fn signal_distance_ratio(theta_j: f64) -> Result<f64> {
    let t = check_angle("theta_j", theta_j)?;
    Ok(2.0 - 2.0 * t.cos())
}

/// Per-weight standard deviation that keeps `‖h(x)‖ ≈ ‖x‖` through a leaky-ReLU
/// layer of width `n`: `√(2 / ((1 + a²) n))`. At `a = 0` this is He init.
pub fn init_stddev(a: f64, n: usize) -> Result<f64> {
    let a = check_slope(a)?;
    if n == 0 {
        return Err(invalid("layer width must be positive"));
    }
    Ok((2.0 / ((1.0 + a * a) * n as f64)).sqrt())
}

/// How `k″` is obtained in [`ode_forcing_residual_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Derivatives {
    Analytic,
    /// Central difference of the closed form with the given step (capped at
    /// the grid spacing).
    FiniteDifference { step: f64 },
}

impl Derivatives {
    pub const DEFAULT_STEP: f64 = 1e-3;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdeCheck {
    /// `max |k″ + k − K sin θ|` over the interior grid
    pub max_residual: f64,
    pub k_pi: f64,
    pub kprime_pi: f64,
}

/// Checks that the arc-cosine kernel solves `k″ + k = K sin θ`, `k(π) = k′(π) = 0`
/// with `K = E[W²]‖x‖‖y‖/π`, using analytic derivatives.
///
/// `q.theta0` is ignored; the grid covers `(0, π)`.
pub fn ode_forcing_residual(q: &KernelQuery, grid_size: usize) -> Result<OdeCheck> {
    ode_forcing_residual_with(q, grid_size, Derivatives::Analytic)
}

pub fn ode_forcing_residual_with(q: &KernelQuery, grid_size: usize, mode: Derivatives) -> Result<OdeCheck> {
    if grid_size < 16 {
        return Err(invalid(format!("ODE grid needs at least 16 points, got {grid_size}")));
    }
    let base = q.validated()?;
    let at = |theta: f64| KernelQuery { theta0: theta, ..base };
    let forcing = base.scale() / PI;
    let spacing = PI / (grid_size + 1) as f64;

    let mut max_residual = 0.0f64;
    for i in 1..=grid_size {
        let theta = spacing * i as f64;
        let (k, _, k2_exact) = arc_cosine_derivatives(&at(theta))?;
        let k2 = match mode {
            Derivatives::Analytic => k2_exact,
            Derivatives::FiniteDifference { step } => {
                let h = step.min(spacing);
                let lo = arc_cosine_kernel(&at(theta - h))?;
                let hi = arc_cosine_kernel(&at(theta + h))?;
                (hi - 2.0 * k + lo) / (h * h)
            }
        };
        let r = (k2 + k - forcing * theta.sin()).abs();
        max_residual = max_residual.max(r);
    }
    let (k_pi, kprime_pi, _) = arc_cosine_derivatives(&at(PI))?;
    Ok(OdeCheck {
        max_residual,
        k_pi,
        kprime_pi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn lrelu(a: f64) -> Activation {
        Activation::leaky_relu(a).unwrap()
    }

    #[test]
    fn arc_cosine_examples() {
        assert_eq!(arc_cosine_kernel(&KernelQuery::unit(0.0).unwrap()).unwrap(), 0.5);
        let at_pi = arc_cosine_kernel(&KernelQuery::new(PI, 2.0, 3.0, 0.7).unwrap()).unwrap();
        assert!(at_pi.abs() < 1e-15);
        let v = arc_cosine_kernel(&KernelQuery::unit(FRAC_PI_2).unwrap()).unwrap();
        assert_relative_eq!(v, 1.0 / (2.0 * PI), max_relative = 1e-15);
        assert!((v - 0.159155).abs() < 1e-6);
    }

    #[test]
    fn angle_domain_errors() {
        assert!(KernelQuery::unit(-0.1).is_err());
        assert!(KernelQuery::unit(PI + 1e-6).is_err());
        // within slack is clamped
        let q = KernelQuery::unit(PI + 1e-10).unwrap();
        assert_eq!(q.theta0, PI);
        assert!(KernelQuery::new(1.0, 0.0, 1.0, 1.0).is_err());
        assert!(KernelQuery::new(1.0, 1.0, 1.0, -2.0).is_err());
        assert!(normalized_relu_kernel(4.0).is_err());
        assert!(signal_distance_ratio(-1.0).is_err());
    }

    #[test]
    fn lrelu_examples() {
        let q = KernelQuery::unit(0.0).unwrap();
        assert_relative_eq!(lrelu_kernel(&q, &lrelu(0.2)).unwrap(), 0.52, max_relative = 1e-14);
        let q = KernelQuery::unit(FRAC_PI_2).unwrap();
        let v = lrelu_kernel(&q, &lrelu(0.2)).unwrap();
        assert!((v - 0.101_859_163_578_813).abs() < 1e-12);
        assert!(matches!(
            lrelu_kernel(&q, &Activation::Elu),
            Err(Error::NoClosedForm("elu"))
        ));
    }

    #[test]
    fn normalized_examples() {
        assert_eq!(normalized_relu_kernel(0.0).unwrap(), 1.0);
        assert!(normalized_relu_kernel(PI).unwrap().abs() < 1e-15);
        assert_relative_eq!(normalized_relu_kernel(FRAC_PI_2).unwrap(), 1.0 / PI, max_relative = 1e-15);
        // leaky at π: −2a/(1+a²)
        let v = normalized_lrelu_kernel(PI, 0.2).unwrap();
        assert_relative_eq!(v, -0.4 / 1.04, max_relative = 1e-14);
    }

    #[test]
    fn angle_map_examples() {
        for a in [0.0, 0.2, 0.7] {
            assert_eq!(lrelu_angle_map(1.0, a).unwrap(), 1.0);
        }
        assert_relative_eq!(lrelu_angle_map(0.0, 0.0).unwrap(), 1.0 / PI, max_relative = 1e-15);
        assert_relative_eq!(
            lrelu_angle_map(0.0, 0.2).unwrap(),
            0.64 / (1.04 * PI),
            max_relative = 1e-14
        );
        assert!((lrelu_angle_map(0.0, 0.2).unwrap() - 0.195_886).abs() < 5e-6);
        assert!(lrelu_angle_map(1.0 + 1e-13, 0.0).is_ok());
        assert!(lrelu_angle_map(1.0 + 1e-9, 0.0).is_err());
    }

    #[test]
    fn depth_trace_examples() {
        let tr = depth_trace(0.0, 0.2, 128).unwrap();
        assert_eq!(tr.angles.len(), 129);
        assert!(tr.angles.iter().all(|&t| t == 0.0));

        let tr = depth_trace(FRAC_PI_2, 0.0, 2).unwrap();
        // frozen from a 30-digit evaluation of two applications of T
        assert!((tr.cosines[2] - 0.493_731_090_200_371_5).abs() < 1e-13);
        assert!((tr.cosines[2] - 0.49373).abs() < 1e-5);

        let tr = depth_trace(FRAC_PI_2, 0.0, 128).unwrap();
        assert!(tr.angles[128] < 0.1);
        assert!((tr.angles[128] - 0.067_440_135_956_031).abs() < 1e-10);
        assert!(depth_trace(1.0, 0.0, 0).is_err());
    }

    #[test]
    fn contraction_examples() {
        assert_eq!(contraction_derivative_magnitude(1.0, 0.3).unwrap(), 1.0);
        assert!(contraction_derivative_magnitude(-1.0, 0.0).unwrap().abs() < 1e-15);
        assert_relative_eq!(
            contraction_derivative_magnitude(0.0, 0.2).unwrap(),
            7.0 / 9.0,
            max_relative = 1e-14
        );
        assert!(contraction_derivative_magnitude(1.5, 0.0).is_err());
    }

    #[test]
    fn signal_distance_examples() {
        assert_eq!(signal_distance_ratio(0.0).unwrap(), 0.0);
        assert!((signal_distance_ratio(FRAC_PI_2).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(signal_distance_ratio(PI).unwrap(), 4.0);
    }

    #[test]
    fn init_examples() {
        assert_relative_eq!(init_stddev(0.0, 100).unwrap(), 0.02f64.sqrt(), max_relative = 1e-15);
        assert!((init_stddev(0.0, 100).unwrap() - 0.141_421).abs() < 1e-6);
        assert!((init_stddev(0.2, 1000).unwrap() - 0.043_852_900_965_351_46).abs() < 1e-15);
        assert_eq!(init_stddev(0.0, 2).unwrap(), 1.0);
        assert!(init_stddev(0.0, 0).is_err());
    }

    #[test]
    fn ode_examples() {
        let q = KernelQuery::unit(0.0).unwrap();
        let chk = ode_forcing_residual(&q, 64).unwrap();
        assert!(chk.max_residual < 1e-12, "{chk:?}");
        assert!(chk.k_pi.abs() < 1e-12);
        assert!(chk.kprime_pi.abs() < 1e-12);

        let (k, _, k2) = arc_cosine_derivatives(&KernelQuery::unit(FRAC_PI_2).unwrap()).unwrap();
        assert_relative_eq!(k + k2, 1.0 / PI, max_relative = 1e-14);

        let fd = ode_forcing_residual_with(
            &q,
            64,
            Derivatives::FiniteDifference {
                step: Derivatives::DEFAULT_STEP,
            },
        )
        .unwrap();
        assert!(fd.max_residual < 1e-6, "{fd:?}");
        assert!(ode_forcing_residual(&q, 8).is_err());
    }

    #[test]
    fn finite_difference_second_derivative_on_dense_grid() {
        let grid = 10_000;
        let h = PI / (grid + 1) as f64;
        let mut worst = 0.0f64;
        for i in 1..=grid {
            let t = h * i as f64;
            let q = |th: f64| KernelQuery::new(th, 1.3, 0.8, 2.0).unwrap();
            let k = |th: f64| arc_cosine_kernel(&q(th)).unwrap();
            let fd = (k(t + h) - 2.0 * k(t) + k(t - h)) / (h * h);
            let (_, _, exact) = arc_cosine_derivatives(&q(t)).unwrap();
            worst = worst.max((fd - exact).abs());
        }
        assert!(worst < 1e-6, "worst = {worst}");
        let q = KernelQuery::new(0.0, 1.3, 0.8, 2.0).unwrap();
        let res = ode_forcing_residual_with(&q, grid, Derivatives::FiniteDifference { step: 1.0 }).unwrap();
        assert!(res.max_residual < 1e-4);
    }

    #[test]
    fn lrelu_four_term_decomposition() {
        // k = k1 + k2 + k3 + k4 with k1 = a² lin, k2 = k3 = a(1−a)/2 lin,
        // k4 = (1−a)² arc-cosine, lin = E[W²]‖x‖‖y‖ cos θ
        for &a in &[0.0, 0.1, 0.2, 0.5, 0.9] {
            for i in 0..=32 {
                let t = PI * i as f64 / 32.0;
                let q = KernelQuery::new(t, 1.7, 0.4, 0.9).unwrap();
                let lin = q.w2 * q.norm_x * q.norm_y * t.cos();
                let k1 = a * a * lin;
                let k2 = a * (1.0 - a) / 2.0 * lin;
                let k4 = (1.0 - a).powi(2) * arc_cosine_kernel(&q).unwrap();
                let total = k1 + 2.0 * k2 + k4;
                let direct = lrelu_kernel(&q, &lrelu(a)).unwrap();
                assert!((total - direct).abs() < 1e-14, "a={a} θ={t}");
            }
        }
    }

    #[test]
    fn dense_contraction_bound() {
        for &a in &[0.0, 0.2, 0.5] {
            for i in 0..10_000 {
                let z = -1.0 + 2.0 * i as f64 / 9_999.0;
                let d = contraction_derivative_magnitude(z, a).unwrap();
                assert!(d <= 1.0);
                if z < 1.0 {
                    assert!(d < 1.0);
                }
            }
        }
    }

    #[test]
    fn normalized_relu_strictly_decreasing() {
        let mut prev = normalized_relu_kernel(0.0).unwrap();
        for i in 1..=2_000 {
            let v = normalized_relu_kernel(PI * i as f64 / 2_000.0).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    proptest! {
        #[test]
        fn relu_is_lrelu_with_zero_slope(t in 0.0..PI, nx in 0.01f64..10.0, ny in 0.01f64..10.0, w2 in 0.01f64..10.0) {
            let q = KernelQuery::new(t, nx, ny, w2).unwrap();
            let a = arc_cosine_kernel(&q).unwrap();
            let b = lrelu_kernel(&q, &Activation::Relu).unwrap();
            prop_assert!((a - b).abs() <= 1e-14 * (1.0 + a.abs()));
            prop_assert!(a >= 0.0);
        }

        #[test]
        fn self_kernels(nx in 0.01f64..10.0, ny in 0.01f64..10.0, w2 in 0.01f64..10.0, a in 0.0f64..0.99) {
            let q = KernelQuery::new(0.0, nx, ny, w2).unwrap();
            prop_assert_eq!(arc_cosine_kernel(&q).unwrap(), w2 * nx * ny / 2.0);
            let l = lrelu_kernel(&q, &lrelu(a)).unwrap();
            let expected = (1.0 + a * a) / 2.0 * w2 * nx * ny;
            prop_assert!((l - expected).abs() <= 1e-13 * expected);
        }

        #[test]
        fn bilinear_in_scales(t in 0.0..PI, c in 0.1f64..10.0, a in 0.0f64..0.99) {
            let q = KernelQuery::new(t, 1.1, 0.9, 0.7).unwrap();
            let k = lrelu_kernel(&q, &lrelu(a)).unwrap();
            for scaled in [
                KernelQuery { w2: q.w2 * c, ..q },
                KernelQuery { norm_x: q.norm_x * c, ..q },
                KernelQuery { norm_y: q.norm_y * c, ..q },
            ] {
                let ks = lrelu_kernel(&scaled, &lrelu(a)).unwrap();
                prop_assert!((ks - c * k).abs() <= 1e-12 * (1.0 + (c * k).abs()));
            }
        }

        #[test]
        fn angle_map_stays_in_range(z in -1.0f64..=1.0, a in 0.0f64..0.999) {
            let v = lrelu_angle_map(z, a).unwrap();
            prop_assert!((-1.0..=1.0).contains(&v));
            // T(z) ≥ z: the map never moves away from the fixed point
            prop_assert!(v >= z - 1e-12);
        }

        #[test]
        fn traces_converge_monotonically(t in 1e-3..(PI - 1e-3), a in 0.0f64..0.9, depth in 2usize..200) {
            let tr = depth_trace(t, a, depth).unwrap();
            prop_assert_eq!(tr.angles.len(), depth + 1);
            for (th, c) in tr.angles.iter().zip(&tr.cosines) {
                prop_assert!((0.0..=PI).contains(th));
                prop_assert!((th.cos() - c).abs() < 1e-12);
            }
            for w in tr.angles[1..].windows(2) {
                prop_assert!(w[1] < w[0] || w[0] < 1e-12);
            }
            prop_assert!(tr.angles[depth] < tr.angles[1]);
        }
    }
}
