//! Normalized DFT, zero-padded FFT periodogram, off-grid evaluation, and the
//! closed-form periodogram of a truncated series model.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{domain, Error, Result};
use crate::simulate::{HarmonizableModel, PathSample};

/// `I_n(theta_j delta)` on the grid `theta_j = 2 pi j / (pad_length delta)`,
/// `j = 1..=pad_length/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Periodogram {
    theta_grid: Vec<f64>,
    values: Vec<f64>,
    n: usize,
    pad_length: usize,
    delta: f64,
}

impl Periodogram {
    pub fn theta_grid(&self) -> &[f64] {
        &self.theta_grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn pad_length(&self) -> usize {
        self.pad_length
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Grid spacing `2 pi / (pad_length delta)`.
    pub fn cell(&self) -> f64 {
        TAU / (self.pad_length as f64 * self.delta)
    }

    /// Index and value of the largest grid value (first one on ties).
    pub fn argmax(&self) -> Option<(usize, f64)> {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold(None, |best, (i, v)| match best {
                Some((_, b)) if b >= v => best,
                _ => Some((i, v)),
            })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        crate::io::write_columns(w, &["theta", "I"], &[&self.theta_grid, &self.values])
    }
}

/// `n^{-1} sum_{k=1}^n x(k) e^{-i k theta}`.
pub fn dft(values: &[f64], theta: f64) -> Complex64 {
    let n = values.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, &x) in values.iter().enumerate() {
        let (s, c) = ((k + 1) as f64 * theta).sin_cos();
        acc += Complex64::new(x * c, -x * s);
    }
    acc / n.max(1) as f64
}

/// Periodogram on the zero-padded Fourier grid, computed by FFT.
pub fn periodogram_fft(path: &PathSample, pad_length: usize) -> Result<Periodogram> {
    let n = path.len();
    if pad_length < n {
        return Err(Error::PadTooShort { pad: pad_length, n });
    }
    let mut buf: Vec<Complex64> = path
        .values()
        .iter()
        .map(|&x| Complex64::new(x, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(pad_length)
        .collect();
    FftPlanner::new().plan_fft_forward(pad_length).process(&mut buf);
    // buf[j] = e^{i theta} sum_k x(k) e^{-i k theta} for theta = 2 pi j / pad;
    // the leading phase drops out of the modulus
    let norm = 1.0 / (n as f64 * n as f64);
    let half = pad_length / 2;
    let scale = TAU / (pad_length as f64 * path.delta());
    Ok(Periodogram {
        theta_grid: (1..=half).map(|j| j as f64 * scale).collect(),
        values: (1..=half).map(|j| buf[j].norm_sqr() * norm).collect(),
        n,
        pad_length,
        delta: path.delta(),
    })
}

/// `|F_n(theta delta)|^2` at an arbitrary angular frequency.
pub fn periodogram_at(path: &PathSample, theta: f64) -> f64 {
    dft(path.values(), theta * path.delta()).norm_sqr()
}

/// `S_n(x) = sin(n x / 2) / sin(x / 2)`, continuous at `x = 2 pi j`.
pub fn dirichlet_s(n: usize, x: f64) -> f64 {
    // reduce to x = 2 pi j + eps; S_n(x) = (-1)^{j(n-1)} S_n(eps)
    let j = (x / TAU).round();
    let eps = x - j * TAU;
    let sign = if (j.abs() as u64 % 2 == 1) && n.is_multiple_of(2) {
        -1.0
    } else {
        1.0
    };
    let denom = (0.5 * eps).sin();
    if denom.abs() < 1e-9 {
        return sign * n as f64;
    }
    sign * (0.5 * n as f64 * eps).sin() / denom
}

/// The periodogram of the noiseless truncated series, expanded in closed form
/// over pairs of components. Cost is quadratic in the truncation.
///
/// Each term `R cos(Theta + t Z)` with `Z < 0` is rewritten as
/// `R cos(-Theta + t |Z|)` so only absolute frequencies enter `S_n`.
pub fn exact_periodogram(model: &HarmonizableModel, delta: f64, n: usize, theta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(domain("delta", delta, "delta > 0"));
    }
    if n == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let th = theta * delta;
    let half_n1 = 0.5 * (n + 1) as f64;
    let terms: Vec<(f64, f64, f64, f64)> = model
        .amps()
        .iter()
        .zip(model.phases())
        .zip(model.freqs())
        .map(|((&r, &u), &z)| {
            let (z, u) = if z < 0.0 { (-z * delta, -u) } else { (z * delta, u) };
            (r, u + half_n1 * z, dirichlet_s(n, z - th), dirichlet_s(n, z + th))
        })
        .collect();
    let mut total = 0.0;
    for (l, &(rl, pl, al, bl)) in terms.iter().enumerate() {
        total += 0.25 * rl * rl * (al * al + bl * bl + 2.0 * al * bl * (2.0 * pl).cos());
        for &(rm, pm, am, bm) in &terms[l + 1..] {
            total += 0.5
                * rl
                * rm
                * ((al * am + bl * bm) * (pl - pm).cos() + (al * bm + bl * am) * (pl + pm).cos());
        }
    }
    Ok(total / (n as f64 * n as f64))
}

/// [`exact_periodogram`] over many frequencies in parallel.
pub fn exact_periodogram_grid(
    model: &HarmonizableModel,
    delta: f64,
    n: usize,
    thetas: &[f64],
) -> Result<Vec<f64>> {
    thetas
        .par_iter()
        .map(|&t| exact_periodogram(model, delta, n, t))
        .collect()
}

/// Smallest power of two that is at least `factor * n`.
pub fn recommended_pad(n: usize, factor: usize) -> usize {
    (n * factor.max(1)).next_power_of_two()
}

/// Upper edge of the grid.
pub fn nyquist(delta: f64) -> f64 {
    PI / delta
}
