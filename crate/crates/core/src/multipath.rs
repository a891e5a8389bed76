//! Estimation of the alpha-sine transform of the spectral density from many
//! independent paths, via stable-law fits to the lag increments.

use std::f64::consts::LN_2;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kde::quantile;
use crate::simulate::{generate_model, sample_path_from, PathSample, TruncationRule};
use crate::spectra::SpectralDensity;
use crate::stable::{lambda_alpha, Alpha};

const PROBES: usize = 10;
const MIN_SAMPLES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableFit {
    pub alpha: f64,
    pub sigma: f64,
}

/// `L` independent paths observed at `t_0 = 0, t_1 = delta, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSample {
    paths: Vec<PathSample>,
}

impl EnsembleSample {
    pub fn new(paths: Vec<PathSample>) -> Result<Self> {
        let first = paths.first().ok_or(Error::TooFewSamples { needed: 2, got: 0 })?;
        if paths.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: paths.len(),
            });
        }
        if paths
            .iter()
            .any(|p| p.len() != first.len() || p.delta() != first.delta() || p.start_index() != first.start_index())
        {
            return Err(Error::LengthMismatch("paths differ in length, spacing or start".into()));
        }
        Ok(Self { paths })
    }

    pub fn paths(&self) -> &[PathSample] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Points per path.
    pub fn points(&self) -> usize {
        self.paths[0].len()
    }

    pub fn delta(&self) -> f64 {
        self.paths[0].delta()
    }

    /// Lag of grid point `i` from the first observation.
    pub fn lag(&self, i: usize) -> f64 {
        i as f64 * self.delta()
    }

    /// `X^{(l)}(t_i) - X^{(l)}(t_0)` over all paths.
    pub fn increments(&self, i: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p.values()[i] - p.values()[0]).collect()
    }
}

/// Simulates `paths` independent paths at `t = 0, delta, ..., (points-1) delta`.
/// Path `l` uses its own model seed drawn from the master seed.
pub fn simulate_ensemble(
    alpha: Alpha,
    density: &SpectralDensity,
    rule: TruncationRule,
    seed: u64,
    paths: usize,
    delta: f64,
    points: usize,
) -> Result<EnsembleSample> {
    if paths < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: paths });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let seeds: Vec<u64> = (0..paths).map(|_| rng.random()).collect();
    let paths = seeds
        .par_iter()
        .map(|&s| {
            let m = generate_model(alpha, density, rule, s)?;
            sample_path_from(&m, delta, 0, points)
        })
        .collect::<Result<Vec<_>>>()?;
    EnsembleSample::new(paths)
}

/// `(log s_k, log(-log |phi_hat(s_k)|^2))` at the probes.
fn ecf_points(x: &[f64], probes: &[f64]) -> Result<Vec<(f64, f64)>> {
    let n = x.len() as f64;
    probes
        .iter()
        .map(|&s| {
            let (c, sn) = x.iter().fold((0.0, 0.0), |(c, sn), &v| {
                let (a, b) = (s * v).sin_cos();
                (c + b, sn + a)
            });
            let m2 = (c * c + sn * sn) / (n * n);
            if !(m2 > 0.0 && m2 < 1.0) {
                return Err(Error::DegenerateEcf {
                    probe: s,
                    modulus: m2.sqrt(),
                });
            }
            Ok((s.ln(), (-m2.ln()).ln()))
        })
        .collect()
}

fn regress(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn probe_grid(scale: f64) -> Vec<f64> {
    (1..=PROBES).map(|k| 0.1 * k as f64 / scale).collect()
}

/// Interquartile half-width; the Cauchy scale, and a rough SaS scale.
fn rough_scale(x: &[f64]) -> Result<f64> {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let c = 0.5 * (quantile(&s, 0.75) - quantile(&s, 0.25));
    if c > 0.0 {
        Ok(c)
    } else {
        Err(Error::DegenerateSample("zero interquartile range"))
    }
}

fn check_len(x: &[f64]) -> Result<()> {
    if x.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_SAMPLES,
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateSample("non-finite value"));
    }
    Ok(())
}

/// Regression fit of `log(-log |phi_hat(s)|^2) = log 2 + alpha log sigma + alpha log s`.
///
/// The data are first divided by a quantile scale so the fixed probes
/// `0.1, ..., 1.0` fall where the ECF is informative; a second pass rescales
/// the probes by the first-pass `1 / sigma_hat`.
pub fn estimate_stable_params(samples: &[f64]) -> Result<StableFit> {
    check_len(samples)?;
    let c = rough_scale(samples)?;
    let x: Vec<f64> = samples.iter().map(|v| v / c).collect();
    let mut sigma = 1.0;
    let mut alpha = 2.0;
    for _ in 0..2 {
        let (slope, intercept) = regress(&ecf_points(&x, &probe_grid(sigma))?);
        alpha = slope.clamp(f64::MIN_POSITIVE, 2.0);
        sigma = ((intercept - LN_2) / alpha).exp();
    }
    Ok(StableFit {
        alpha,
        sigma: sigma * c,
    })
}

/// Scale estimate for a known index `alpha`: the intercept of the same
/// regression with the slope held at `alpha`.
pub fn estimate_scale_fixed_alpha(samples: &[f64], alpha: f64) -> Result<f64> {
    check_len(samples)?;
    let c = rough_scale(samples)?;
    let x: Vec<f64> = samples.iter().map(|v| v / c).collect();
    let mut sigma = 1.0;
    for _ in 0..2 {
        let pts = ecf_points(&x, &probe_grid(sigma))?;
        let intercept = pts.iter().map(|(lx, ly)| ly - alpha * lx).sum::<f64>() / pts.len() as f64;
        sigma = ((intercept - LN_2) / alpha).exp();
    }
    Ok(sigma * c)
}

fn transform_from_scale(sigma: f64, alpha: f64) -> Result<f64> {
    let a = Alpha::new(alpha)?;
    Ok(sigma.powf(alpha) / (2f64.powf(alpha + 1.0) * lambda_alpha(a)))
}

/// `sigma_hat(t_i)^alpha_hat / (2^{alpha_hat + 1} lambda_{alpha_hat})`, which
/// estimates the alpha-sine transform at `t_i / 2`.
pub fn estimate_alpha_sine(ensemble: &EnsembleSample, t_index: usize) -> Result<f64> {
    if t_index >= ensemble.points() {
        return Err(Error::LengthMismatch(format!(
            "t_index {t_index} beyond {} points",
            ensemble.points()
        )));
    }
    if t_index == 0 {
        return Ok(0.0);
    }
    let fit = estimate_stable_params(&ensemble.increments(t_index))?;
    transform_from_scale(fit.sigma, fit.alpha)
}

/// Alpha-sine estimates over the whole grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSineCurve {
    /// `t_i / 2`
    pub half_lags: Vec<f64>,
    /// `None` where the fit failed at that lag.
    pub estimates: Vec<Option<f64>>,
    pub pooled_alpha: f64,
}

impl AlphaSineCurve {
    /// Writes `t_half, estimate, truth`; failed lags are written as `NaN`.
    pub fn write_csv<W: Write>(&self, w: W, truth: &[f64]) -> Result<()> {
        let est: Vec<f64> = self.estimates.iter().map(|e| e.unwrap_or(f64::NAN)).collect();
        crate::io::write_columns(w, &["t_half", "estimate", "truth"], &[&self.half_lags, &est, truth])
    }
}

/// Estimates the transform at every lag with one index shared by all lags:
/// `alpha` is the median of the per-lag fits, then each scale is refit with
/// `alpha` held fixed.
pub fn estimate_alpha_sine_curve(ensemble: &EnsembleSample) -> Result<AlphaSineCurve> {
    let points = ensemble.points();
    let fits: Vec<Option<StableFit>> = (1..points)
        .into_par_iter()
        .map(|i| estimate_stable_params(&ensemble.increments(i)).ok())
        .collect();
    let mut alphas: Vec<f64> = fits.iter().flatten().map(|f| f.alpha).collect();
    if alphas.is_empty() {
        return Err(Error::DegenerateSample("no lag admitted a stable fit"));
    }
    alphas.sort_by(f64::total_cmp);
    let pooled = quantile(&alphas, 0.5);
    let mut estimates = vec![Some(0.0)];
    estimates.extend(
        (1..points)
            .into_par_iter()
            .map(|i| {
                estimate_scale_fixed_alpha(&ensemble.increments(i), pooled)
                    .and_then(|s| transform_from_scale(s, pooled))
                    .ok()
            })
            .collect::<Vec<_>>(),
    );
    Ok(AlphaSineCurve {
        half_lags: (0..points).map(|i| 0.5 * ensemble.lag(i)).collect(),
        estimates,
        pooled_alpha: pooled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stable::{sample_sas, ScaleParam};

    fn sas(alpha: f64, sigma: f64, seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample_sas(Alpha::new(alpha).unwrap(), ScaleParam::new(sigma).unwrap(), &mut rng, n)
    }

    #[test]
    fn gaussian_round_trip() {
        let fit = estimate_stable_params(&sas(2.0, 1.0, 1, 10_000)).unwrap();
        assert!((1.9..=2.0).contains(&fit.alpha), "{fit:?}");
        assert!((0.95..=1.05).contains(&fit.sigma), "{fit:?}");
    }

    #[test]
    fn stable_round_trip() {
        let fit = estimate_stable_params(&sas(1.5, 1.0, 2, 10_000)).unwrap();
        assert!((fit.alpha - 1.5).abs() <= 0.1, "{fit:?}");
        assert!((fit.sigma - 1.0).abs() <= 0.05, "{fit:?}");
    }

    #[test]
    fn scale_equivariance() {
        let x = sas(1.2, 0.7, 3, 5000);
        let doubled: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let a = estimate_stable_params(&x).unwrap();
        let b = estimate_stable_params(&doubled).unwrap();
        assert!((b.sigma / a.sigma - 2.0).abs() < 1e-9);
        assert!((b.alpha - a.alpha).abs() < 1e-9);
    }

    #[test]
    fn rejects_degenerate() {
        assert!(matches!(estimate_stable_params(&[1.0; 10]), Err(Error::TooFewSamples { .. })));
        assert!(estimate_stable_params(&[0.0; 100]).is_err());
    }

    #[test]
    fn fixed_alpha_scale() {
        let x = sas(1.5, 2.0, 4, 10_000);
        let s = estimate_scale_fixed_alpha(&x, 1.5).unwrap();
        assert!((s / 2.0 - 1.0).abs() < 0.05, "{s}");
    }

    #[test]
    fn zero_lag_is_zero() {
        let f1 = SpectralDensity::builtin("f1").unwrap();
        let ens = simulate_ensemble(Alpha::new(1.5).unwrap(), &f1, TruncationRule::Fixed(200), 1, 60, 0.1, 5).unwrap();
        assert_eq!(estimate_alpha_sine(&ens, 0).unwrap(), 0.0);
        assert!(estimate_alpha_sine(&ens, 5).is_err());
        assert!(estimate_alpha_sine(&ens, 3).unwrap() > 0.0);
        assert!(ens.paths().iter().all(|p| p.start_index() == 0));
    }

    #[test]
    fn ensemble_validation() {
        let p = PathSample::with_start(0.1, vec![0.0, 1.0, 2.0], 0).unwrap();
        let q = PathSample::with_start(0.2, vec![0.0, 1.0, 2.0], 0).unwrap();
        assert!(EnsembleSample::new(vec![p.clone()]).is_err());
        assert!(EnsembleSample::new(vec![p.clone(), q]).is_err());
        assert_eq!(EnsembleSample::new(vec![p.clone(), p]).unwrap().increments(2), vec![2.0, 2.0]);
        let f1 = SpectralDensity::builtin("f1").unwrap();
        assert!(simulate_ensemble(Alpha::new(1.5).unwrap(), &f1, TruncationRule::Fixed(10), 1, 1, 0.1, 5).is_err());
    }
}
