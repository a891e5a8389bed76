//! Kernel density estimation of the absolute frequencies and the symmetric
//! spectral density estimate built from it.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quadrature::{integrate_breakpoints, QuadratureConfig};
use crate::spectra::SpectralDensity;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Gaussian,
    Epanechnikov,
    Triangle,
}

impl Kernel {
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Kernel::Gaussian => FRAC_1_SQRT_2PI * (-0.5 * u * u).exp(),
            Kernel::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            Kernel::Triangle => (1.0 - u.abs()).max(0.0),
        }
    }

    /// `int u^2 k(u) du`
    pub fn second_moment(self) -> f64 {
        match self {
            Kernel::Gaussian => 1.0,
            Kernel::Epanechnikov => 0.2,
            Kernel::Triangle => 1.0 / 6.0,
        }
    }

    /// `int k(u)^2 du`
    pub fn roughness(self) -> f64 {
        match self {
            Kernel::Gaussian => 0.5 / PI.sqrt(),
            Kernel::Epanechnikov => 0.6,
            Kernel::Triangle => 2.0 / 3.0,
        }
    }

    /// Half-width of the support, infinite for the Gaussian.
    pub fn radius(self) -> f64 {
        match self {
            Kernel::Gaussian => f64::INFINITY,
            _ => 1.0,
        }
    }

    /// Factor turning a Gaussian-kernel bandwidth into the bandwidth with the
    /// same asymptotic MISE for this kernel.
    pub fn gaussian_equivalent_factor(self) -> f64 {
        let canon = |k: Kernel| (k.roughness() / k.second_moment().powi(2)).powf(0.2);
        canon(self) / canon(Kernel::Gaussian)
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kernel::Gaussian => "gaussian",
            Kernel::Epanechnikov => "epanechnikov",
            Kernel::Triangle => "triangle",
        })
    }
}

impl FromStr for Kernel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Kernel::Gaussian),
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            "triangle" => Ok(Kernel::Triangle),
            other => Err(Error::UnknownOption {
                what: "kernel",
                name: other.into(),
            }),
        }
    }
}

/// `(1 / (N h)) sum_k k((x - x_k) / h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    points: Vec<f64>,
    kernel: Kernel,
    bandwidth: f64,
}

impl DensityEstimate {
    pub fn new(points: Vec<f64>, kernel: Kernel, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(domain("bandwidth", bandwidth, "bandwidth > 0"));
        }
        if points.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateSample("non-finite support point"));
        }
        Ok(Self {
            points,
            kernel,
            bandwidth,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }
    pub fn kernel(&self) -> Kernel {
        self.kernel
    }
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn eval(&self, x: f64) -> f64 {
        kde_eval(self, x)
    }
}

pub fn kde_eval(est: &DensityEstimate, x: f64) -> f64 {
    let h = est.bandwidth;
    let s: f64 = est.points.iter().map(|&p| est.kernel.eval((x - p) / h)).sum();
    s / (est.points.len() as f64 * h)
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Linearly interpolated sample quantile (the usual "type 7" definition).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted(x: &[f64]) -> Vec<f64> {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

fn spread(samples: &[f64], iqr_divisor: f64) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    let (_, sd) = mean_sd(samples);
    if !(sd > 0.0) {
        return Err(Error::DegenerateSample("zero standard deviation"));
    }
    let s = sorted(samples);
    let iqr = quantile(&s, 0.75) - quantile(&s, 0.25);
    Ok(if iqr > 0.0 { sd.min(iqr / iqr_divisor) } else { sd })
}

/// `0.9 min(sd, IQR / 1.34) N^{-1/5}`.
pub fn bandwidth_silverman(samples: &[f64]) -> Result<f64> {
    let scale = spread(samples, 1.34)?;
    Ok(0.9 * scale * (samples.len() as f64).powf(-0.2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SjBandwidth {
    pub h: f64,
    /// The fixed-point equation had no root in the search bracket and the
    /// Silverman value was returned instead.
    pub fell_back: bool,
}

/// Binned pairwise distances: bin width and counts of `|i - j|` bin offsets.
fn pair_counts(x: &[f64], nbins: usize) -> (f64, Vec<f64>) {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let d = 1.01 * (hi - lo) / nbins as f64;
    let idx: Vec<i64> = x.iter().map(|&v| ((v - lo) / d).floor() as i64).collect();
    let mut cnt = vec![0.0; nbins];
    for i in 1..idx.len() {
        for j in 0..i {
            cnt[(idx[i] - idx[j]).unsigned_abs() as usize] += 1.0;
        }
    }
    (d, cnt)
}

/// Binned estimate of `int f^{(4)} f` with a Gaussian pilot of width `h`.
fn phi4(n: usize, d: f64, cnt: &[f64], h: f64) -> f64 {
    let mut sum = 0.0;
    for (i, &c) in cnt.iter().enumerate() {
        let del = (i as f64 * d / h).powi(2);
        if del >= 1000.0 {
            break;
        }
        sum += (-0.5 * del).exp() * (del * del - 6.0 * del + 3.0) * c;
    }
    let nf = n as f64;
    (2.0 * sum + 3.0 * nf) / (nf * (nf - 1.0) * h.powi(5) * (2.0 * PI).sqrt())
}

/// Binned estimate of `int f^{(6)} f` with a Gaussian pilot of width `h`.
fn phi6(n: usize, d: f64, cnt: &[f64], h: f64) -> f64 {
    let mut sum = 0.0;
    for (i, &c) in cnt.iter().enumerate() {
        let del = (i as f64 * d / h).powi(2);
        if del >= 1000.0 {
            break;
        }
        sum += (-0.5 * del).exp() * (del.powi(3) - 15.0 * del * del + 45.0 * del - 15.0) * c;
    }
    let nf = n as f64;
    (2.0 * sum - 15.0 * nf) / (nf * (nf - 1.0) * h.powi(7) * (2.0 * PI).sqrt())
}

/// Sheather–Jones solve-the-equation bandwidth for the Gaussian kernel.
pub fn bandwidth_sheather_jones(samples: &[f64]) -> Result<SjBandwidth> {
    let n = samples.len();
    if n < 8 {
        return Err(Error::TooFewSamples { needed: 8, got: n });
    }
    let h_silv = bandwidth_silverman(samples)?;
    let fallback = SjBandwidth {
        h: h_silv,
        fell_back: true,
    };
    let scale = spread(samples, 1.349)?;
    let (d, cnt) = pair_counts(samples, 1000);
    let nf = n as f64;
    let a = 1.24 * scale * nf.powf(-1.0 / 7.0);
    let b = 1.23 * scale * nf.powf(-1.0 / 9.0);
    let c1 = Kernel::Gaussian.roughness() / nf;
    let td = -phi6(n, d, &cnt, b);
    let sd_a = phi4(n, d, &cnt, a);
    if !(td > 0.0 && sd_a > 0.0) {
        return Ok(fallback);
    }
    let alph2 = 1.357 * (sd_a / td).powf(1.0 / 7.0);
    let equation = |log_h: f64| {
        let h = log_h.exp();
        let s = phi4(n, d, &cnt, alph2 * h.powf(5.0 / 7.0));
        if s > 0.0 {
            (c1 / s).powf(0.2).ln() - log_h
        } else {
            f64::NAN
        }
    };
    let (mut lo, mut hi) = ((h_silv / 100.0).ln(), (h_silv * 100.0).ln());
    let (mut flo, fhi) = (equation(lo), equation(hi));
    if !(flo.is_finite() && fhi.is_finite()) || flo * fhi > 0.0 {
        return Ok(fallback);
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        let fm = equation(mid);
        if !fm.is_finite() {
            return Ok(fallback);
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(SjBandwidth {
        h: (0.5 * (lo + hi)).exp(),
        fell_back: false,
    })
}

/// MISE-optimal bandwidth for estimating the density `2 f` of `|Z|` from `N`
/// samples: `[R(k) / (mu_2(k)^2 R(g'') N)]^{1/5}` with
/// `R(g'') = int_0^inf (2 f'')^2 = 2 int_R f''^2`.
pub fn optimal_bandwidth_oracle(kernel: Kernel, density: &SpectralDensity, n_samples: usize) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if density.pdf_second_derivative(0.0).is_none() {
        return Err(Error::NonSmoothDensity(density.name().to_string()));
    }
    let quad = QuadratureConfig::with_tolerance(1e-14, 1e-12);
    let r = density
        .integrate_half(
            |x| {
                let f2 = density.pdf_second_derivative(x).unwrap_or(0.0);
                let p = density.pdf(x);
                // integrate_half weights by f; divide it back out
                if p > 0.0 {
                    4.0 * f2 * f2 / p
                } else {
                    0.0
                }
            },
            0.0,
            &[],
            &quad,
        )?
        .value;
    let mu2 = kernel.second_moment();
    Ok((kernel.roughness() / (mu2 * mu2 * r * n_samples as f64)).powf(0.2))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum BandwidthRule {
    Silverman,
    #[default]
    SheatherJones,
    Fixed(f64),
}

impl fmt::Display for BandwidthRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BandwidthRule::Silverman => f.write_str("silverman"),
            BandwidthRule::SheatherJones => f.write_str("sj"),
            BandwidthRule::Fixed(h) => write!(f, "fixed:{h}"),
        }
    }
}

impl FromStr for BandwidthRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "silverman" => Ok(BandwidthRule::Silverman),
            "sj" => Ok(BandwidthRule::SheatherJones),
            _ => {
                let h: f64 = s
                    .strip_prefix("fixed:")
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::UnknownOption {
                        what: "bandwidth rule",
                        name: s.into(),
                    })?;
                if h > 0.0 && h.is_finite() {
                    Ok(BandwidthRule::Fixed(h))
                } else {
                    Err(domain("bandwidth", h, "bandwidth > 0"))
                }
            }
        }
    }
}

impl Serialize for BandwidthRule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BandwidthRule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl BandwidthRule {
    /// Bandwidth for `kernel`. Data-driven rules are computed for the Gaussian
    /// kernel and carried over by the canonical-bandwidth ratio.
    pub fn resolve(self, kernel: Kernel, samples: &[f64]) -> Result<SjBandwidth> {
        let gaussian = match self {
            BandwidthRule::Fixed(h) => {
                return Ok(SjBandwidth {
                    h,
                    fell_back: false,
                })
            }
            BandwidthRule::Silverman => SjBandwidth {
                h: bandwidth_silverman(samples)?,
                fell_back: false,
            },
            // too few points for the pilot stages: use the rule of thumb and say so
            BandwidthRule::SheatherJones if samples.len() < 8 => SjBandwidth {
                h: bandwidth_silverman(samples)?,
                fell_back: true,
            },
            BandwidthRule::SheatherJones => bandwidth_sheather_jones(samples)?,
        };
        Ok(SjBandwidth {
            h: gaussian.h * kernel.gaussian_equivalent_factor(),
            ..gaussian
        })
    }
}

/// Symmetric spectral density estimate from absolute frequency estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEstimate {
    kde: DensityEstimate,
    reflect: bool,
    bandwidth_fell_back: bool,
}

impl SpectralEstimate {
    /// Without reflection: `kde(|x|) / 2`. With reflection: the estimate on
    /// the mirrored sample `{+Z, -Z}`, which removes the boundary dip at 0.
    pub fn eval(&self, x: f64) -> f64 {
        let a = x.abs();
        if self.reflect {
            0.5 * (self.kde.eval(a) + self.kde.eval(-a))
        } else {
            0.5 * self.kde.eval(a)
        }
    }

    pub fn kde(&self) -> &DensityEstimate {
        &self.kde
    }
    pub fn bandwidth(&self) -> f64 {
        self.kde.bandwidth
    }
    pub fn reflect(&self) -> bool {
        self.reflect
    }
    pub fn bandwidth_fell_back(&self) -> bool {
        self.bandwidth_fell_back
    }

    /// `512` equispaced points on `[-q, q]`, `q` = 99.5th percentile of the
    /// support points plus `3 h`.
    pub fn export_grid(&self) -> Vec<f64> {
        let s = sorted(self.kde.points());
        let q = quantile(&s, 0.995) + 3.0 * self.bandwidth();
        (0..512).map(|i| -q + 2.0 * q * i as f64 / 511.0).collect()
    }

    pub fn eval_grid(&self, xs: &[f64]) -> Vec<f64> {
        xs.par_iter().map(|&x| self.eval(x)).collect()
    }

    /// Writes `x, f_hat` and, if given, the true density alongside.
    pub fn write_csv<W: Write>(&self, w: W, truth: Option<&SpectralDensity>) -> Result<()> {
        let xs = self.export_grid();
        let fh = self.eval_grid(&xs);
        match truth {
            Some(f) => {
                let ft: Vec<f64> = xs.iter().map(|&x| f.pdf(x)).collect();
                crate::io::write_columns(w, &["x", "f_hat", "f_true"], &[&xs, &fh, &ft])
            }
            None => crate::io::write_columns(w, &["x", "f_hat"], &[&xs, &fh]),
        }
    }

    /// `int |f_hat - f|` over the real line.
    pub fn l1_distance(&self, truth: &SpectralDensity) -> Result<f64> {
        let s = sorted(self.kde.points());
        let h = self.bandwidth();
        let reach = match self.kde.kernel.radius() {
            r if r.is_finite() => s[s.len() - 1] + r * h,
            _ => s[s.len() - 1] + 40.0 * h,
        };
        let quad = QuadratureConfig {
            tail_cutoff: None,
            ..QuadratureConfig::with_tolerance(1e-7, 1e-7)
        };
        let mut upper = reach;
        if let crate::spectra::Support::Bounded(b) = truth.support() {
            upper = upper.max(b);
        }
        let truth_tail = match truth.support() {
            crate::spectra::Support::Bounded(_) => 0.0,
            _ => {
                upper = upper.max(40.0);
                truth.tail_mass(upper)
            }
        };
        let panels = 64;
        let mut pts: Vec<f64> = (0..=panels).map(|i| upper * i as f64 / panels as f64).collect();
        if let crate::spectra::Support::Unbounded { lower } = truth.support() {
            if lower > 0.0 && lower < upper {
                pts.push(lower);
            }
        }
        if let crate::spectra::Support::Bounded(b) = truth.support() {
            pts.push(b);
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let r = integrate_breakpoints(|x| (self.eval(x) - truth.pdf(x)).abs(), &pts, &quad)?;
        Ok(2.0 * r.value + truth_tail)
    }
}

/// Spectral density estimate from extracted frequencies (taken in absolute
/// value).
pub fn estimate_spectral_density(
    freqs: &[f64],
    kernel: Kernel,
    rule: BandwidthRule,
    reflect: bool,
) -> Result<SpectralEstimate> {
    if freqs.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: freqs.len(),
        });
    }
    let points: Vec<f64> = freqs.iter().map(|z| z.abs()).collect();
    let bw = rule.resolve(kernel, &points)?;
    Ok(SpectralEstimate {
        kde: DensityEstimate::new(points, kernel, bw.h)?,
        reflect,
        bandwidth_fell_back: bw.fell_back,
    })
}
