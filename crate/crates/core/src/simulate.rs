//! Truncated LePage series for the harmonizable process and equidistant path
//! sampling in rectangular and polar form.

use std::f64::consts::TAU;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::spectra::SpectralDensity;
use crate::stable::{Alpha, StableConstants};

const STREAM_GAMMAS: u64 = 0;
const STREAM_G1: u64 = 1;
const STREAM_G2: u64 = 2;
const STREAM_FREQS: u64 = 3;

/// How many series terms to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationRule {
    Fixed(usize),
    /// Stop at the first `k` with `Gamma_k^{-1/alpha} < eps * Gamma_1^{-1/alpha}`,
    /// but never keep more than `max_n` terms.
    TailEpsilon { eps: f64, max_n: usize },
}

impl Default for TruncationRule {
    fn default() -> Self {
        TruncationRule::Fixed(10_000)
    }
}

impl TruncationRule {
    pub const DEFAULT_MAX_N: usize = 1_000_000;

    pub fn tail_epsilon(eps: f64) -> Self {
        TruncationRule::TailEpsilon {
            eps,
            max_n: Self::DEFAULT_MAX_N,
        }
    }
}

/// State of the truncated series
/// `X(t) = sum_k nu_k (G1_k cos(t Z_k) + G2_k sin(t Z_k)) = sum_k R_k cos(Theta_k + t Z_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelDoc")]
pub struct HarmonizableModel {
    alpha: Alpha,
    density_name: String,
    truncation: usize,
    seed: u64,
    gammas: Vec<f64>,
    g1: Vec<f64>,
    g2: Vec<f64>,
    freqs: Vec<f64>,
    amps: Vec<f64>,
    phases: Vec<f64>,
}

#[derive(Deserialize)]
struct ModelDoc {
    alpha: Alpha,
    density_name: String,
    truncation: usize,
    seed: u64,
    gammas: Vec<f64>,
    g1: Vec<f64>,
    g2: Vec<f64>,
    freqs: Vec<f64>,
    amps: Vec<f64>,
    phases: Vec<f64>,
}

impl TryFrom<ModelDoc> for HarmonizableModel {
    type Error = Error;

    fn try_from(d: ModelDoc) -> Result<Self> {
        let m = HarmonizableModel::from_parts(d.alpha, &d.density_name, d.gammas, d.g1, d.g2, d.freqs, d.seed)?;
        if m.truncation != d.truncation || m.amps.len() != d.amps.len() || m.phases.len() != d.phases.len() {
            return Err(Error::LengthMismatch("stored truncation disagrees with the lists".into()));
        }
        let close = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + x.abs()))
        };
        if !close(&m.amps, &d.amps) || !close(&m.phases, &d.phases) {
            return Err(Error::LengthMismatch(
                "stored amplitudes or phases disagree with the series marks".into(),
            ));
        }
        Ok(m)
    }
}

impl HarmonizableModel {
    /// Builds a model from its series marks, deriving amplitudes and phases.
    pub fn from_parts(
        alpha: Alpha,
        density_name: &str,
        gammas: Vec<f64>,
        g1: Vec<f64>,
        g2: Vec<f64>,
        freqs: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        let n = gammas.len();
        if n == 0 {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if g1.len() != n || g2.len() != n || freqs.len() != n {
            return Err(Error::LengthMismatch(format!(
                "gammas {n}, g1 {}, g2 {}, freqs {}",
                g1.len(),
                g2.len(),
                freqs.len()
            )));
        }
        if !(gammas[0] > 0.0) || gammas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(domain("gammas", gammas[0], "positive and strictly increasing"));
        }
        if g1.iter().chain(&g2).chain(&freqs).any(|v| !v.is_finite()) {
            return Err(Error::DegenerateSample("non-finite series mark"));
        }
        let scale = StableConstants::new(alpha)?.series_scale(alpha);
        let inv = -1.0 / alpha.value();
        let mut amps = Vec::with_capacity(n);
        let mut phases = Vec::with_capacity(n);
        for k in 0..n {
            let nu = scale * gammas[k].powf(inv);
            amps.push(nu * g1[k].hypot(g2[k]));
            phases.push(wrap_phase((-g2[k]).atan2(g1[k])));
        }
        Ok(Self {
            alpha,
            density_name: density_name.to_string(),
            truncation: n,
            seed,
            gammas,
            g1,
            g2,
            freqs,
            amps,
            phases,
        })
    }

    /// Builds a model directly from polar terms `R_k cos(Theta_k + t Z_k)`.
    ///
    /// The arrival times are set to `1, 2, ..., N` and the Gaussian marks are
    /// back-solved so both series forms agree.
    pub fn from_polar(alpha: Alpha, amps: &[f64], phases: &[f64], freqs: Vec<f64>) -> Result<Self> {
        let n = amps.len();
        if phases.len() != n {
            return Err(Error::LengthMismatch("amps vs phases".into()));
        }
        if amps.iter().any(|&r| !(r >= 0.0)) {
            return Err(Error::DegenerateSample("negative amplitude"));
        }
        let scale = StableConstants::new(alpha)?.series_scale(alpha);
        let gammas: Vec<f64> = (1..=n).map(|k| k as f64).collect();
        let nus: Vec<f64> = gammas.iter().map(|g| scale * g.powf(-1.0 / alpha.value())).collect();
        let g1 = (0..n).map(|k| amps[k] * phases[k].cos() / nus[k]).collect();
        let g2 = (0..n).map(|k| -amps[k] * phases[k].sin() / nus[k]).collect();
        Self::from_parts(alpha, "custom", gammas, g1, g2, freqs, 0)
    }

    pub fn alpha(&self) -> Alpha {
        self.alpha
    }
    pub fn density_name(&self) -> &str {
        &self.density_name
    }
    pub fn truncation(&self) -> usize {
        self.truncation
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }
    pub fn g1(&self) -> &[f64] {
        &self.g1
    }
    pub fn g2(&self) -> &[f64] {
        &self.g2
    }
    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }
    pub fn amps(&self) -> &[f64] {
        &self.amps
    }
    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// `nu_k = (C_alpha / b_alpha)^{1/alpha} Gamma_k^{-1/alpha}`.
    pub fn weights(&self) -> Vec<f64> {
        let scale = StableConstants::new(self.alpha)
            .expect("validated at construction")
            .series_scale(self.alpha);
        let inv = -1.0 / self.alpha.value();
        self.gammas.iter().map(|g| scale * g.powf(inv)).collect()
    }

    /// Largest `|Z_k|`.
    pub fn max_abs_freq(&self) -> f64 {
        self.freqs.iter().fold(0.0, |m, z| m.max(z.abs()))
    }

    /// Value of the polar series at continuous time `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        self.amps
            .iter()
            .zip(&self.phases)
            .zip(&self.freqs)
            .map(|((r, th), z)| r * (th + t * z).cos())
            .sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn wrap_phase(p: f64) -> f64 {
    let w = p.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU
    if w >= TAU {
        0.0
    } else {
        w
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

/// Draws a truncated series model. Each family of marks comes from its own
/// stream of the master seed, so changing `N` never reshuffles earlier terms.
pub fn generate_model(
    alpha: Alpha,
    density: &SpectralDensity,
    rule: TruncationRule,
    seed: u64,
) -> Result<HarmonizableModel> {
    alpha.require_non_gaussian()?;
    let mut rng = stream(seed, STREAM_GAMMAS);
    let mut arrival = || -(1.0 - rng.random::<f64>()).ln();
    let gammas = match rule {
        TruncationRule::Fixed(n) => {
            if n == 0 {
                return Err(domain("N", 0.0, "N >= 1"));
            }
            let mut acc = 0.0;
            (0..n)
                .map(|_| {
                    acc += arrival();
                    acc
                })
                .collect::<Vec<f64>>()
        }
        TruncationRule::TailEpsilon { eps, max_n } => {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(domain("eps", eps, "0 < eps < 1"));
            }
            if max_n == 0 {
                return Err(domain("max_n", 0.0, "max_n >= 1"));
            }
            let first = arrival();
            // Gamma_k^{-1/alpha} < eps Gamma_1^{-1/alpha}  <=>  Gamma_k > Gamma_1 eps^{-alpha}
            let threshold = first * eps.powf(-alpha.value());
            let mut g = vec![first];
            let mut acc = first;
            while acc <= threshold && g.len() < max_n {
                acc += arrival();
                g.push(acc);
            }
            g
        }
    };
    let n = gammas.len();
    // strictly increasing is guaranteed unless an arrival underflows to 0
    let mut rng = stream(seed, STREAM_G1);
    let g1: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
    let mut rng = stream(seed, STREAM_G2);
    let g2: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
    let mut rng = stream(seed, STREAM_FREQS);
    let freqs = density.sample_frequencies(&mut rng, n);
    HarmonizableModel::from_parts(alpha, density.name(), gammas, g1, g2, freqs, seed)
}

/// Equidistant observations `x(j) = X(j delta)` for `j = start_index, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    delta: f64,
    values: Vec<f64>,
    start_index: usize,
}

impl PathSample {
    pub fn new(delta: f64, values: Vec<f64>) -> Result<Self> {
        Self::with_start(delta, values, 1)
    }

    pub fn with_start(delta: f64, values: Vec<f64>, start_index: usize) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(domain("delta", delta, "delta > 0"));
        }
        if values.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateSample("non-finite path value"));
        }
        Ok(Self {
            delta,
            values,
            start_index,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn start_index(&self) -> usize {
        self.start_index
    }

    pub fn time(&self, i: usize) -> f64 {
        (self.start_index + i) as f64 * self.delta
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Same spacing and start, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::with_start(self.delta, values, self.start_index)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        crate::io::write_columns(w, &["t", "x"], &[&self.times(), &self.values])
    }

    /// Reads a two-column `t,x` file. The spacing and start index are
    /// recovered from the time column, which must be equidistant.
    pub fn read_csv(text: &str) -> Result<Self> {
        let rows = crate::io::read_rows(text, 2)?;
        if rows.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: rows.len(),
            });
        }
        let t: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let delta = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
        if !(delta > 0.0) || t.iter().enumerate().any(|(i, &ti)| (ti - t[0] - i as f64 * delta).abs() > 1e-6 * delta) {
            return Err(Error::DegenerateSample("time column is not equidistant"));
        }
        let start = (t[0] / delta).round();
        if start < 0.0 || (t[0] - start * delta).abs() > 1e-6 * delta {
            return Err(Error::DegenerateSample("time column is not on the grid j * delta"));
        }
        Self::with_start(delta, rows.iter().map(|r| r[1]).collect(), start as usize)
    }
}

fn check_grid(delta: f64, n: usize) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(domain("delta", delta, "delta > 0"));
    }
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    Ok(())
}

/// Rectangular form at `t_j = j delta`, `j = 1..=n`.
pub fn sample_path(model: &HarmonizableModel, delta: f64, n: usize) -> Result<PathSample> {
    sample_path_from(model, delta, 1, n)
}

/// Rectangular form at `t_j = j delta`, `j = start..start+n`.
pub fn sample_path_from(model: &HarmonizableModel, delta: f64, start: usize, n: usize) -> Result<PathSample> {
    check_grid(delta, n)?;
    let nu = model.weights();
    let values = (0..n)
        .into_par_iter()
        .map(|i| {
            let t = (start + i) as f64 * delta;
            let mut acc = 0.0;
            for k in 0..model.truncation {
                let (s, c) = (t * model.freqs[k]).sin_cos();
                acc += nu[k] * (model.g1[k] * c + model.g2[k] * s);
            }
            acc
        })
        .collect();
    PathSample::with_start(delta, values, start)
}

/// Polar form `sum_k R_k cos(Theta_k + t_j Z_k)`, `j = 1..=n`.
pub fn sample_path_polar(model: &HarmonizableModel, delta: f64, n: usize) -> Result<PathSample> {
    check_grid(delta, n)?;
    let values = (0..n)
        .into_par_iter()
        .map(|i| model.value_at((i + 1) as f64 * delta))
        .collect();
    PathSample::new(delta, values)
}

/// Autocovariance of the path conditional on the arrival times and frequencies:
/// `(C_alpha / b_alpha)^{2/alpha} sum_k Gamma_k^{-2/alpha} cos(t Z_k)`.
pub fn theoretical_acv(model: &HarmonizableModel, t: f64) -> f64 {
    model
        .weights()
        .iter()
        .zip(&model.freqs)
        .map(|(nu, z)| nu * nu * (t * z).cos())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stable::{c_alpha, b_alpha};
    use approx::assert_abs_diff_eq;

    fn a(v: f64) -> Alpha {
        Alpha::new(v).unwrap()
    }

    fn f1() -> SpectralDensity {
        SpectralDensity::builtin("f1").unwrap()
    }

    #[test]
    fn deterministic_and_prefix_stable() {
        let m1 = generate_model(a(1.5), &f1(), TruncationRule::Fixed(200), 7).unwrap();
        let m2 = generate_model(a(1.5), &f1(), TruncationRule::Fixed(200), 7).unwrap();
        assert_eq!(m1, m2);
        let long = generate_model(a(1.5), &f1(), TruncationRule::Fixed(500), 7).unwrap();
        assert_eq!(&long.gammas()[..200], m1.gammas());
        assert_eq!(&long.g1()[..200], m1.g1());
        assert_eq!(&long.g2()[..200], m1.g2());
        assert_eq!(&long.freqs()[..200], m1.freqs());
        let other = generate_model(a(1.5), &f1(), TruncationRule::Fixed(200), 8).unwrap();
        assert_ne!(m1.gammas(), other.gammas());
    }

    #[test]
    fn model_invariants() {
        let m = generate_model(a(0.8), &f1(), TruncationRule::Fixed(1000), 3).unwrap();
        assert_eq!(m.truncation(), 1000);
        assert!(m.gammas()[0] > 0.0);
        assert!(m.gammas().windows(2).all(|w| w[1] > w[0]));
        let scale = (c_alpha(a(0.8)).unwrap() / b_alpha(a(0.8))).powf(1.0 / 0.8);
        for k in 0..1000 {
            let expect = scale * m.gammas()[k].powf(-1.0 / 0.8) * m.g1()[k].hypot(m.g2()[k]);
            assert!((m.amps()[k] - expect).abs() <= 1e-14 * expect.max(1e-300));
            assert!((0.0..TAU).contains(&m.phases()[k]));
        }
    }

    #[test]
    fn rejects_bad_rules() {
        assert!(generate_model(a(1.5), &f1(), TruncationRule::Fixed(0), 1).is_err());
        assert!(generate_model(a(1.5), &f1(), TruncationRule::tail_epsilon(0.0), 1).is_err());
        assert!(generate_model(a(1.5), &f1(), TruncationRule::tail_epsilon(1.0), 1).is_err());
        assert!(generate_model(a(2.0), &f1(), TruncationRule::Fixed(10), 1).is_err());
    }

    #[test]
    fn amplitude_decay() {
        let mut ratios: Vec<f64> = (0..50)
            .map(|s| {
                let m = generate_model(a(1.5), &f1(), TruncationRule::Fixed(10_000), s).unwrap();
                (m.amps()[9999] / m.amps()[0]).log10()
            })
            .collect();
        ratios.sort_by(f64::total_cmp);
        let median = 0.5 * (ratios[24] + ratios[25]);
        assert!((-3.2..=-2.2).contains(&median), "{median}");
    }

    #[test]
    fn tail_epsilon_smaller_for_small_alpha() {
        for seed in 0..20 {
            let small = generate_model(a(0.5), &f1(), TruncationRule::tail_epsilon(1e-4), seed).unwrap();
            let large = generate_model(a(1.75), &f1(), TruncationRule::tail_epsilon(1e-4), seed).unwrap();
            assert!(small.truncation() * 100 < large.truncation(), "seed {seed}");
            let g = small.gammas();
            let n = g.len();
            // the last kept term is the first one below the threshold
            assert!(g[n - 1].powf(-2.0) < 1e-4 * g[0].powf(-2.0));
            assert!(n == 1 || g[n - 2].powf(-2.0) >= 1e-4 * g[0].powf(-2.0));
        }
    }

    #[test]
    fn single_term_cosine() {
        let al = a(1.2);
        let m = HarmonizableModel::from_parts(al, "x", vec![2.0], vec![1.0], vec![0.0], vec![0.9], 0).unwrap();
        let nu = m.weights()[0];
        let p = sample_path(&m, 0.3, 50).unwrap();
        for (j, v) in p.values().iter().enumerate() {
            assert_abs_diff_eq!(*v, nu * ((j + 1) as f64 * 0.3 * 0.9).cos(), epsilon = 1e-14);
        }
        let zero = HarmonizableModel::from_parts(al, "x", vec![1.0, 2.0], vec![0.0; 2], vec![0.0; 2], vec![1.0, 2.0], 0).unwrap();
        assert!(sample_path(&zero, 1.0, 10).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn polar_pure_cosine_and_phase_flip() {
        let m = HarmonizableModel::from_polar(a(1.5), &[1.0], &[0.0], vec![0.4]).unwrap();
        let p = sample_path_polar(&m, 1.0, 30).unwrap();
        let r = sample_path(&m, 1.0, 30).unwrap();
        for j in 0..30 {
            assert_abs_diff_eq!(p.values()[j], ((j + 1) as f64 * 0.4).cos(), epsilon = 1e-14);
            assert_abs_diff_eq!(r.values()[j], p.values()[j], epsilon = 1e-14);
        }
        let m2 = HarmonizableModel::from_polar(a(1.5), &[1.0, 0.5], &[0.3, 1.0], vec![0.4, 1.3]).unwrap();
        let m3 = HarmonizableModel::from_polar(a(1.5), &[1.0, 0.5], &[0.3, 1.0 + std::f64::consts::PI], vec![0.4, 1.3]).unwrap();
        let comp0 = HarmonizableModel::from_polar(a(1.5), &[1.0], &[0.3], vec![0.4]).unwrap();
        let (x2, x3, x0) = (
            sample_path_polar(&m2, 0.7, 40).unwrap(),
            sample_path_polar(&m3, 0.7, 40).unwrap(),
            sample_path_polar(&comp0, 0.7, 40).unwrap(),
        );
        for j in 0..40 {
            let c1_2 = x2.values()[j] - x0.values()[j];
            let c1_3 = x3.values()[j] - x0.values()[j];
            assert_abs_diff_eq!(c1_2, -c1_3, epsilon = 1e-12);
        }
    }

    #[test]
    fn acv_properties() {
        let m = generate_model(a(1.3), &f1(), TruncationRule::Fixed(300), 4).unwrap();
        let r0 = theoretical_acv(&m, 0.0);
        let nu = m.weights();
        assert_abs_diff_eq!(r0, nu.iter().map(|v| v * v).sum::<f64>(), epsilon = 1e-12 * r0);
        assert!(r0 > 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let t = 50.0 * (rng.random::<f64>() - 0.5);
            assert_eq!(theoretical_acv(&m, t), theoretical_acv(&m, -t));
            assert!(theoretical_acv(&m, t).abs() <= r0 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn json_roundtrip() {
        let m = generate_model(a(0.9), &f1(), TruncationRule::Fixed(20), 11).unwrap();
        let text = m.to_json().unwrap();
        let back = HarmonizableModel::from_json(&text).unwrap();
        assert_eq!(m, back);
        let tampered = text.replacen("\"truncation\": 20", "\"truncation\": 21", 1);
        assert!(HarmonizableModel::from_json(&tampered).is_err());
    }

    #[test]
    fn path_csv_roundtrip() {
        let m = generate_model(a(1.5), &f1(), TruncationRule::Fixed(20), 2).unwrap();
        let p = sample_path(&m, 0.5, 64).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let q = PathSample::read_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(q.values(), p.values());
        assert_eq!(q.start_index(), 1);
        assert!((q.delta() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn path_rejects_bad_input() {
        let m = generate_model(a(1.5), &f1(), TruncationRule::Fixed(5), 2).unwrap();
        assert!(sample_path(&m, 0.0, 10).is_err());
        assert!(sample_path(&m, 1.0, 1).is_err());
        assert!(PathSample::new(1.0, vec![1.0, f64::NAN]).is_err());
    }
}
