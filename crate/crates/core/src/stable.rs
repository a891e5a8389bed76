//! Symmetric alpha-stable building blocks: the series constants, marginal and
//! finite-dimensional characteristic functions, codifference, the alpha-sine
//! transform, and a Chambers–Mallows–Stuck sampler.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{domain, Error, Result};
use crate::quadrature::{integrate, QuadratureConfig};
use crate::spectra::SpectralDensity;

const MAX_KINKS: f64 = 20_000.0;

/// Index of stability, `0 < alpha <= 2`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value <= 2.0 {
            Ok(Self(value))
        } else {
            Err(domain("alpha", value, "0 < alpha <= 2"))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `alpha < 2`, as required by the LePage constants.
    pub fn require_non_gaussian(self) -> Result<Self> {
        if self.0 < 2.0 {
            Ok(self)
        } else {
            Err(domain("alpha", self.0, "0 < alpha < 2"))
        }
    }
}

impl TryFrom<f64> for Alpha {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Alpha> for f64 {
    fn from(a: Alpha) -> f64 {
        a.0
    }
}

/// SaS scale parameter, strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ScaleParam(f64);

impl ScaleParam {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value.is_finite() {
            Ok(Self(value))
        } else {
            Err(domain("sigma", value, "sigma > 0"))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableConstants {
    pub lambda_alpha: f64,
    pub c_alpha: f64,
    pub b_alpha: f64,
}

impl StableConstants {
    pub fn new(alpha: Alpha) -> Result<Self> {
        Ok(Self {
            lambda_alpha: lambda_alpha(alpha),
            c_alpha: c_alpha(alpha)?,
            b_alpha: b_alpha(alpha),
        })
    }

    /// `(C_alpha / b_alpha)^{1/alpha}`, the scale of the LePage series for a
    /// unit-mass control measure.
    pub fn series_scale(&self, alpha: Alpha) -> f64 {
        (self.c_alpha / self.b_alpha).powf(1.0 / alpha.value())
    }
}

/// `(1/2pi) int_0^{2pi} |cos x|^alpha dx`, in closed form
/// `Gamma((alpha+1)/2) / (sqrt(pi) Gamma(alpha/2 + 1))`.
pub fn lambda_alpha(alpha: Alpha) -> f64 {
    let a = alpha.value();
    gamma((a + 1.0) / 2.0) / (PI.sqrt() * gamma(a / 2.0 + 1.0))
}

/// Reference value of `lambda_alpha` by adaptive quadrature of the defining
/// integral; used to pin the closed form.
pub fn lambda_alpha_quadrature(alpha: Alpha, quad: &QuadratureConfig) -> Result<f64> {
    let a = alpha.value();
    // |cos|^a over a full period is four copies of cos^a on [0, pi/2]
    let r = integrate(|x: f64| x.cos().max(0.0).powf(a), 0.0, FRAC_PI_2, quad)?;
    Ok(4.0 * r.value / (2.0 * PI))
}

/// `C_alpha = (int_0^inf x^{-alpha} sin x dx)^{-1}` for `0 < alpha < 2`.
pub fn c_alpha(alpha: Alpha) -> Result<f64> {
    let a = alpha.require_non_gaussian()?.value();
    if a == 1.0 {
        return Ok(2.0 / PI);
    }
    Ok((1.0 - a) / (gamma(2.0 - a) * (PI * a / 2.0).cos()))
}

/// `b_alpha = 2^{alpha/2} Gamma(1 + alpha/2)`.
pub fn b_alpha(alpha: Alpha) -> f64 {
    let a = alpha.value();
    2f64.powf(a / 2.0) * gamma(1.0 + a / 2.0)
}

/// Characteristic function `exp(-sigma^alpha |s|^alpha)` of SaS(sigma).
pub fn sas_cf(sigma: ScaleParam, alpha: Alpha, s: f64) -> f64 {
    (-(sigma.value() * s.abs()).powf(alpha.value())).exp()
}

/// Marginal scale of the process for a unit-mass control measure:
/// `sigma^alpha = lambda_alpha`.
pub fn marginal_scale(alpha: Alpha) -> ScaleParam {
    ScaleParam(lambda_alpha(alpha).powf(1.0 / alpha.value()))
}

/// Finite-dimensional characteristic function
/// `E exp(i sum_j s_j X(t_j))` of the harmonizable process with spectral
/// density `density`.
pub fn finite_dim_cf(
    density: &SpectralDensity,
    alpha: Alpha,
    times: &[f64],
    s: &[f64],
    quad: &QuadratureConfig,
) -> Result<f64> {
    if times.len() != s.len() || times.is_empty() {
        return Err(Error::LengthMismatch(format!(
            "{} times vs {} weights",
            times.len(),
            s.len()
        )));
    }
    let a = alpha.value();
    let lambda = lambda_alpha(alpha);
    if s.iter().all(|&v| v == 0.0) {
        return Ok(1.0);
    }
    if times.len() == 1 {
        // the double sum collapses to s^2 and the density integrates to one
        return Ok((-lambda * s[0].abs().powf(a)).exp());
    }
    let quadratic_form = |x: f64| {
        let mut total = 0.0;
        for (j, (&tj, &sj)) in times.iter().zip(s).enumerate() {
            total += sj * sj;
            for (&tk, &sk) in times[j + 1..].iter().zip(&s[j + 1..]) {
                total += 2.0 * sj * sk * ((tk - tj) * x).cos();
            }
        }
        total.abs().powf(a / 2.0)
    };
    let bound = s.iter().map(|v| v.abs()).sum::<f64>().powf(a);
    let r = density.integrate(quadratic_form, bound, &[], quad)?;
    Ok((-lambda * r.value).exp())
}

/// Alpha-sine transform `int_0^inf |sin(t x)|^alpha f(x) dx`.
pub fn alpha_sine_transform(
    density: &SpectralDensity,
    alpha: Alpha,
    t: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(domain("t", t, "t >= 0"));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let a = alpha.value();
    // zeros of sin(t x) are the kinks of |sin|^alpha
    let period = PI / t;
    let last = (density.cutoff(quad) / period).min(MAX_KINKS) as usize;
    let kinks: Vec<f64> = (1..=last).map(|m| m as f64 * period).collect();
    let r = density.integrate_half(|x| (t * x).sin().abs().powf(a), 1.0, &kinks, quad)?;
    Ok(r.value)
}

/// Codifference `tau(t) = 2 sigma^alpha - 2^alpha lambda_alpha int |sin(tx/2)|^alpha f(x) dx`
/// with `sigma^alpha = lambda_alpha`.
pub fn codifference(
    density: &SpectralDensity,
    alpha: Alpha,
    t: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    let lambda = lambda_alpha(alpha);
    let a = alpha.value();
    // the integrand is even, so the full-line integral is twice the
    // alpha-sine transform at |t|/2
    let half = alpha_sine_transform(density, alpha, t.abs() / 2.0, quad)?;
    Ok(2.0 * lambda - 2f64.powf(a) * lambda * 2.0 * half)
}

/// Draws `count` i.i.d. SaS(sigma) variates with the Chambers–Mallows–Stuck
/// construction.
pub fn sample_sas<R: Rng + ?Sized>(
    alpha: Alpha,
    sigma: ScaleParam,
    rng: &mut R,
    count: usize,
) -> Vec<f64> {
    (0..count).map(|_| sas_variate(alpha, sigma, rng)).collect()
}

pub fn sas_variate<R: Rng + ?Sized>(alpha: Alpha, sigma: ScaleParam, rng: &mut R) -> f64 {
    let a = alpha.value();
    // U uniform on (-pi/2, pi/2), E unit exponential
    let u = PI * (rng.random::<f64>() - 0.5);
    let e = -(1.0 - rng.random::<f64>()).ln();
    let x = if a == 1.0 {
        u.tan()
    } else {
        (a * u).sin() / u.cos().powf(1.0 / a) * (((1.0 - a) * u).cos() / e).powf((1.0 - a) / a)
    };
    sigma.value() * x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn a(v: f64) -> Alpha {
        Alpha::new(v).unwrap()
    }

    #[test]
    fn alpha_domain() {
        assert!(Alpha::new(0.0).is_err());
        assert!(Alpha::new(2.5).is_err());
        assert!(Alpha::new(f64::NAN).is_err());
        assert!(Alpha::new(2.0).is_ok());
        assert!(c_alpha(a(2.0)).is_err());
        assert!(ScaleParam::new(0.0).is_err());
    }

    #[test]
    fn lambda_known_values() {
        assert_abs_diff_eq!(lambda_alpha(a(2.0)), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(lambda_alpha(a(1.0)), 2.0 / PI, epsilon = 1e-14);
        assert_abs_diff_eq!(lambda_alpha(a(1e-9)), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn lambda_closed_form_matches_quadrature() {
        let quad = QuadratureConfig::with_tolerance(1e-13, 1e-13);
        for i in 1..=32 {
            let al = a(2.0 * i as f64 / 32.0);
            let q = lambda_alpha_quadrature(al, &quad).unwrap();
            assert!((q - lambda_alpha(al)).abs() < 1e-10, "alpha {}", al.value());
        }
    }

    #[test]
    fn lambda_is_decreasing() {
        let quad = QuadratureConfig::default();
        let vals: Vec<f64> = (1..=32)
            .map(|i| lambda_alpha_quadrature(a(2.0 * i as f64 / 32.0), &quad).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
        assert!(vals.iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn c_alpha_values() {
        assert_abs_diff_eq!(c_alpha(a(1.0)).unwrap(), 2.0 / PI, epsilon = 1e-15);
        // (1 - 0.5) / (Gamma(1.5) cos(pi/4)) and 1/sqrt(pi/2) agree
        let expected = 1.0 / (PI / 2.0).sqrt();
        assert_abs_diff_eq!(c_alpha(a(0.5)).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(c_alpha(a(0.5)).unwrap(), 0.797885, epsilon = 1e-6);
        for al in [1.0 - 1e-6, 1.0 + 1e-6] {
            assert!((c_alpha(a(al)).unwrap() - 2.0 / PI).abs() < 1e-5);
        }
    }

    #[test]
    fn c_alpha_against_integral() {
        // int_0^inf x^{-1/2} sin x dx = sqrt(pi/2) by substitution x = u^2:
        // 2 int_0^inf sin(u^2) du, checked numerically on a long window
        let quad = QuadratureConfig {
            max_subdivisions: 20_000,
            ..QuadratureConfig::with_tolerance(1e-10, 1e-10)
        };
        // split into half-periods of sin(u^2) so the tail is an alternating series
        let mut nodes: Vec<f64> = (0..=4000).map(|k| (k as f64 * PI).sqrt()).collect();
        nodes[0] = 0.0;
        let mut partial = Vec::new();
        let mut acc = 0.0;
        for w in nodes.windows(2) {
            acc += integrate(|u: f64| 2.0 * (u * u).sin(), w[0], w[1], &quad).unwrap().value;
            partial.push(acc);
        }
        // average of the last two partial sums accelerates the alternating tail
        let n = partial.len();
        let est = 0.5 * (partial[n - 1] + partial[n - 2]);
        assert!((1.0 / est - c_alpha(a(0.5)).unwrap()).abs() < 1e-4);
    }

    #[test]
    fn b_alpha_values() {
        assert_abs_diff_eq!(b_alpha(a(2.0)), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(b_alpha(a(1e-12)), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(b_alpha(a(1.0)), 1.253_314_1, epsilon = 1e-7);
        assert_abs_diff_eq!(b_alpha(a(1.0)), 2f64.sqrt() * gamma(1.5), epsilon = 1e-14);
    }

    #[test]
    fn sas_cf_values() {
        let one = ScaleParam::new(1.0).unwrap();
        assert_eq!(sas_cf(one, a(1.3), 0.0), 1.0);
        assert_abs_diff_eq!(sas_cf(one, a(2.0), 1.0), (-1f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(
            sas_cf(ScaleParam::new(2.0).unwrap(), a(1.0), 3.0),
            (-6f64).exp(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn finite_dim_cf_cases() {
        let f1 = SpectralDensity::builtin("f1").unwrap();
        let quad = QuadratureConfig::default();
        for &al in &[0.5, 1.0, 1.5, 2.0] {
            let v = finite_dim_cf(&f1, a(al), &[3.0], &[0.7], &quad).unwrap();
            assert_abs_diff_eq!(v, sas_cf(marginal_scale(a(al)), a(al), 0.7), epsilon = 1e-8);
        }
        assert_eq!(finite_dim_cf(&f1, a(1.2), &[0.0, 1.0], &[0.0, 0.0], &quad).unwrap(), 1.0);
        // Gaussian case: exp(-(1/2) int (2 - 2 cos x) f1) = exp(-(1 - e^{-1/2}))
        let v = finite_dim_cf(&f1, a(2.0), &[0.0, 1.0], &[1.0, -1.0], &quad).unwrap();
        assert_abs_diff_eq!(v, (-(1.0 - (-0.5f64).exp())).exp(), epsilon = 1e-9);
        assert!(finite_dim_cf(&f1, a(1.0), &[0.0], &[1.0, 2.0], &quad).is_err());
    }

    #[test]
    fn finite_dim_cf_two_point_non_gaussian_matches_direct_quadrature() {
        // n = 2 form reduces to |s1^2 + s2^2 + 2 s1 s2 cos(x)|^{a/2}
        let f1 = SpectralDensity::builtin("f1").unwrap();
        let quad = QuadratureConfig::default();
        let (s1, s2, al) = (0.8, 0.3, 1.3);
        let direct = integrate(
            |x: f64| {
                (s1 * s1 + s2 * s2 + 2.0 * s1 * s2 * (2.0 * x).cos())
                    .abs()
                    .powf(al / 2.0)
                    * f1.pdf(x)
            },
            -40.0,
            40.0,
            &quad,
        )
        .unwrap()
        .value;
        let expect = (-lambda_alpha(a(al)) * direct).exp();
        let got = finite_dim_cf(&f1, a(al), &[0.0, 2.0], &[s1, s2], &quad).unwrap();
        assert_abs_diff_eq!(got, expect, epsilon = 1e-9);
    }

    #[test]
    fn alpha_sine_gaussian_case() {
        let f1 = SpectralDensity::builtin("f1").unwrap();
        let quad = QuadratureConfig::default();
        assert_eq!(alpha_sine_transform(&f1, a(2.0), 0.0, &quad).unwrap(), 0.0);
        for &t in &[0.1, 0.5, 1.0, 2.0, 7.5, 30.0] {
            let v = alpha_sine_transform(&f1, a(2.0), t, &quad).unwrap();
            assert_abs_diff_eq!(v, (1.0 - (-2.0 * t * t).exp()) / 4.0, epsilon = 1e-9);
        }
        assert!(alpha_sine_transform(&f1, a(1.0), -1.0, &quad).is_err());
    }

    #[test]
    fn alpha_sine_bounded_by_half() {
        let quad = QuadratureConfig::with_tolerance(1e-9, 1e-9);
        for name in ["f1", "f2", "f4"] {
            let f = SpectralDensity::builtin(name).unwrap();
            for &t in &[0.3, 1.0, 4.0, 20.0] {
                let v = alpha_sine_transform(&f, a(0.7), t, &quad).unwrap();
                assert!(v > 0.0 && v <= 0.5 + 1e-9, "{name} {t} {v}");
            }
        }
    }

    #[test]
    fn codifference_identity() {
        let f1 = SpectralDensity::builtin("f1").unwrap();
        let quad = QuadratureConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in 1..=7 {
            let al = a(0.25 * i as f64);
            let lam = lambda_alpha(al);
            assert_abs_diff_eq!(codifference(&f1, al, 0.0, &quad).unwrap(), 2.0 * lam, epsilon = 1e-12);
            for _ in 0..20 {
                let t: f64 = rng.random::<f64>() * 10.0;
                let tau = codifference(&f1, al, t, &quad).unwrap();
                // direct full-line integral of |sin(tx/2)|^alpha
                let kinks: Vec<f64> = (1..200).map(|m| 2.0 * PI * m as f64 / t).collect();
                let direct = f1
                    .integrate(|x: f64| (t * x / 2.0).sin().abs().powf(al.value()), 1.0, &kinks, &quad)
                    .unwrap()
                    .value;
                let via_direct = 2.0 * lam - 2f64.powf(al.value()) * lam * direct;
                assert!((tau - via_direct).abs() < 1e-7, "alpha {} t {t}", al.value());
                let ts = alpha_sine_transform(&f1, al, t / 2.0, &quad).unwrap();
                let via_transform = 2.0 * lam - 2f64.powf(al.value() + 1.0) * lam * ts;
                assert!((tau - via_transform).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn codifference_gaussian_case() {
        // alpha = 2: tau(t) = 1 - 4 * (1/2) * T_2 f1(t/2) with T_2 f1(u) = (1 - e^{-2u^2})/4
        let f1 = SpectralDensity::builtin("f1").unwrap();
        let quad = QuadratureConfig::default();
        let t = 2.0;
        let expected = 1.0 - 8.0 * 0.5 * (1.0 - (-2.0 * 1.0f64).exp()) / 4.0;
        assert_abs_diff_eq!(codifference(&f1, a(2.0), t, &quad).unwrap(), expected, epsilon = 1e-9);
        // which is the Gaussian autocovariance-type value e^{-t^2/2}
        assert_abs_diff_eq!(expected, (-2.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn cms_gaussian_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = sample_sas(a(2.0), ScaleParam::new(1.5).unwrap(), &mut rng, 100_000);
        let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!((var / (2.0 * 1.5 * 1.5) - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn cms_cauchy_median() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut x: Vec<f64> = sample_sas(a(1.0), ScaleParam::new(1.0).unwrap(), &mut rng, 100_000)
            .into_iter()
            .map(f64::abs)
            .collect();
        x.sort_by(f64::total_cmp);
        let median = x[x.len() / 2];
        assert!((median - 1.0).abs() < 0.05, "{median}");
    }

    #[test]
    fn cms_empirical_cf() {
        let count = 100_000;
        for (seed, &al) in [0.5, 0.8, 1.0, 1.5, 1.9].iter().enumerate() {
            let sigma = ScaleParam::new(0.7).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed as u64);
            let x = sample_sas(a(al), sigma, &mut rng, count);
            for k in 1..=10 {
                let s = 0.3 * k as f64;
                let cos: Vec<f64> = x.iter().map(|v| (s * v).cos()).collect();
                let mean = cos.iter().sum::<f64>() / count as f64;
                let sd = (cos.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / count as f64).sqrt();
                let tol = 3.0 * sd / (count as f64).sqrt() + 1e-12;
                let expect = sas_cf(sigma, a(al), s);
                assert!((mean - expect).abs() <= tol, "alpha {al} s {s}: {mean} vs {expect}");
            }
        }
    }
}
