//! Iterative extraction of sinusoid frequencies from a single path: take the
//! highest periodogram peak, fit and subtract the sinusoid, repeat.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::periodogram::{periodogram_at, periodogram_fft, recommended_pad, Periodogram};
use crate::simulate::PathSample;

const GOLDEN: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakConfig {
    /// Stop once the highest remaining peak falls below this fraction of the
    /// first periodogram's maximum.
    pub prominence_threshold: f64,
    /// Estimates closer than this to an earlier one are merged into it.
    /// `None` means `4 pi / (pad_length delta)`.
    pub min_separation: Option<f64>,
    pub max_components: usize,
    pub refine_iters: usize,
    /// `None` means the next power of two at or above `8 n`.
    pub pad_length: Option<usize>,
    /// Periodogram level the prominence fraction refers to. `None` means the
    /// maximum of the first periodogram.
    #[serde(default)]
    pub reference_level: Option<f64>,
}

impl Default for PeakConfig {
    fn default() -> Self {
        Self {
            prominence_threshold: 0.005,
            min_separation: None,
            max_components: 1000,
            refine_iters: 40,
            pad_length: None,
            reference_level: None,
        }
    }
}

impl PeakConfig {
    pub fn validate(&self) -> Result<()> {
        let p = self.prominence_threshold;
        if !(p > 0.0 && p < 1.0) {
            return Err(domain("prominence_threshold", p, "0 < prominence < 1"));
        }
        if let Some(s) = self.min_separation {
            if !(s >= 0.0) {
                return Err(domain("min_separation", s, "min_separation >= 0"));
            }
        }
        if self.max_components == 0 {
            return Err(domain("max_components", 0.0, "max_components >= 1"));
        }
        Ok(())
    }

    pub fn pad_for(&self, n: usize) -> usize {
        self.pad_length.unwrap_or_else(|| recommended_pad(n, 8))
    }

    pub fn separation_for(&self, pad: usize, delta: f64) -> f64 {
        self.min_separation.unwrap_or(2.0 * TAU / (pad as f64 * delta))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyEstimates {
    /// Extracted angular frequencies in extraction order.
    pub freqs: Vec<f64>,
    /// `(alpha_hat, beta_hat)` of `alpha cos(t theta) + beta sin(t theta)`.
    pub coeffs: Vec<(f64, f64)>,
    /// Residual sum of squares right after each frequency was extracted.
    pub residual_energy: Vec<f64>,
    pub iterations: usize,
    /// Level the prominence threshold was measured against.
    pub reference_level: f64,
    /// Residual path after the last subtraction.
    pub residual: PathSample,
    pub pad_length: usize,
    pub min_separation: f64,
}

impl FrequencyEstimates {
    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let a: Vec<f64> = self.coeffs.iter().map(|c| c.0).collect();
        let b: Vec<f64> = self.coeffs.iter().map(|c| c.1).collect();
        crate::io::write_columns(
            w,
            &["freq", "alpha_hat", "beta_hat", "residual_energy_after"],
            &[&self.freqs, &a, &b, &self.residual_energy],
        )
    }
}

/// Location of the highest periodogram peak, refined off-grid by golden-section
/// search within one grid cell on either side.
///
/// `reference_max` is the maximum of the first periodogram of the iteration.
pub fn find_largest_peak(
    pg: &Periodogram,
    path: &PathSample,
    config: &PeakConfig,
    reference_max: f64,
) -> Result<f64> {
    let (j, vmax) = pg.argmax().ok_or(Error::NoPeak)?;
    if !(vmax > 0.0) || vmax < config.prominence_threshold * reference_max {
        return Err(Error::NoPeak);
    }
    let cell = pg.cell();
    let center = pg.theta_grid()[j];
    let lo = (center - cell).max(0.5 * cell);
    let hi = (center + cell).min(PI / path.delta());
    Ok(golden_max(|th| periodogram_at(path, th), lo, hi, center, config.refine_iters))
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, start: f64, iters: usize) -> f64 {
    let mut best = (start, f(start));
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    for cand in [(c, fc), (d, fd)] {
        if cand.1 > best.1 {
            best = cand;
        }
    }
    best.0
}

fn regressors(path: &PathSample, thetas: &[f64]) -> Vec<Vec<f64>> {
    let mut cols = Vec::with_capacity(2 * thetas.len());
    for &th in thetas {
        let (s, c): (Vec<f64>, Vec<f64>) = (0..path.len()).map(|i| (path.time(i) * th).sin_cos()).unzip();
        cols.push(c);
        cols.push(s);
    }
    cols
}

/// Least squares of `y` on the given columns via the normal equations.
/// Returns `None` when the Gram matrix is numerically singular.
fn least_squares(cols: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let p = cols.len();
    let mut g = vec![vec![0.0; p + 1]; p];
    for i in 0..p {
        for j in i..p {
            let v: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
            g[i][j] = v;
            g[j][i] = v;
        }
        g[i][p] = cols[i].iter().zip(y).map(|(a, b)| a * b).sum();
    }
    let diag: Vec<f64> = (0..p).map(|i| g[i][i]).collect();
    let largest = diag.iter().copied().fold(0.0, f64::max);
    if diag.iter().any(|&d| !(d > 1e-10 * largest)) {
        return None;
    }
    // Gaussian elimination with partial pivoting on the scaled system
    for i in 0..p {
        for j in 0..p {
            g[i][j] /= (diag[i] * diag[j]).sqrt();
        }
        g[i][p] /= diag[i].sqrt();
    }
    for col in 0..p {
        let piv = (col..p).max_by(|&a, &b| g[a][col].abs().total_cmp(&g[b][col].abs()))?;
        if g[piv][col].abs() < 1e-10 {
            return None;
        }
        g.swap(col, piv);
        for r in col + 1..p {
            let f = g[r][col] / g[col][col];
            for c in col..=p {
                g[r][c] -= f * g[col][c];
            }
        }
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|j| g[i][j] * x[j]).sum();
        x[i] = (g[i][p] - s) / g[i][i];
    }
    Some((0..p).map(|i| x[i] / diag[i].sqrt()).collect())
}

/// Ordinary least squares of the path on `cos(t theta)` and `sin(t theta)`.
pub fn fit_sinusoid(path: &PathSample, theta_hat: f64) -> Result<(f64, f64)> {
    let cols = regressors(path, &[theta_hat]);
    least_squares(&cols, path.values())
        .map(|b| (b[0], b[1]))
        .ok_or(Error::SingularFit { theta: theta_hat })
}

/// `x(t) - alpha cos(t theta) - beta sin(t theta)`.
pub fn subtract_component(path: &PathSample, theta_hat: f64, coeffs: (f64, f64)) -> PathSample {
    let values = path
        .values()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let (s, c) = (path.time(i) * theta_hat).sin_cos();
            x - coeffs.0 * c - coeffs.1 * s
        })
        .collect();
    path.with_values(values).expect("subtraction keeps spacing and length")
}

fn add_component(path: &PathSample, theta: f64, coeffs: (f64, f64)) -> PathSample {
    subtract_component(path, theta, (-coeffs.0, -coeffs.1))
}

/// Runs the peak / fit / subtract loop until no prominent peak remains.
pub fn estimate_frequencies(path: &PathSample, config: &PeakConfig) -> Result<FrequencyEstimates> {
    config.validate()?;
    let n = path.len();
    if n < 4 {
        return Err(Error::TooFewSamples { needed: 4, got: n });
    }
    let pad = config.pad_for(n);
    if pad < n {
        return Err(Error::PadTooShort { pad, n });
    }
    let delta = path.delta();
    let min_sep = config.separation_for(pad, delta);
    let lowest = TAU / (n as f64 * delta);
    let max_iterations = 4 * config.max_components + 16;

    let mut residual = path.clone();
    let mut freqs: Vec<f64> = Vec::new();
    let mut coeffs: Vec<(f64, f64)> = Vec::new();
    let mut energy: Vec<f64> = Vec::new();
    let mut reference: Option<f64> = None;
    let mut iterations = 0;

    while iterations < max_iterations && freqs.len() < config.max_components {
        iterations += 1;
        let pg = periodogram_fft(&residual, pad)?;
        let reference_max = *reference
            .get_or_insert_with(|| config.reference_level.unwrap_or_else(|| pg.argmax().map_or(0.0, |p| p.1)));
        let theta = match find_largest_peak(&pg, &residual, config, reference_max) {
            Ok(t) => t,
            Err(Error::NoPeak) => break,
            Err(e) => return Err(e),
        };
        let near = freqs
            .iter()
            .enumerate()
            .filter(|(_, &f)| (f - theta).abs() < min_sep)
            .min_by(|a, b| (a.1 - theta).abs().total_cmp(&(b.1 - theta).abs()))
            .map(|(k, _)| k);
        if let Some(k) = near {
            // put the earlier component back and fit both frequencies jointly
            let restored = add_component(&residual, freqs[k], coeffs[k]);
            let cols = regressors(&restored, &[freqs[k], theta]);
            if let Some(b) = least_squares(&cols, restored.values()) {
                let r = subtract_component(&restored, freqs[k], (b[0], b[1]));
                residual = subtract_component(&r, theta, (b[2], b[3]));
                coeffs[k] = (b[0], b[1]);
                continue;
            }
        }
        match fit_sinusoid(&residual, theta) {
            Ok(c) => {
                residual = subtract_component(&residual, theta, c);
                if theta >= lowest && near.is_none() {
                    freqs.push(theta);
                    coeffs.push(c);
                    energy.push(residual.energy());
                }
            }
            // a peak pinned to 0 or the Nyquist edge cannot be regressed out
            Err(Error::SingularFit { .. }) => break,
            Err(e) => return Err(e),
        }
    }

    Ok(FrequencyEstimates {
        freqs,
        coeffs,
        residual_energy: energy,
        iterations,
        reference_level: reference.unwrap_or(0.0),
        residual,
        pad_length: pad,
        min_separation: min_sep,
    })
}
