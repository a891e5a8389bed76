//! Almost-sure limits of time averages along one path, which are products of
//! Bessel `J0` factors, and the time averages themselves.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::simulate::HarmonizableModel;

const BLOCK: usize = 4096;

/// Bessel function of the first kind of order zero.
pub fn bessel_j0(s: f64) -> f64 {
    let x = s.abs();
    if x <= 8.0 {
        j0_series(x)
    } else if x <= 25.0 {
        j0_miller(x)
    } else {
        j0_hankel(x)
    }
}

fn j0_series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Backward recurrence `J_{k-1} = (2k/x) J_k - J_{k+1}`, normalized by
/// `J_0 + 2 sum_k J_{2k} = 1`.
fn j0_miller(x: f64) -> f64 {
    let start = 2 * ((x as usize + 40) / 2);
    let (mut jp1, mut j) = (0.0f64, 1e-30f64);
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let jm1 = 2.0 * k as f64 / x * j - jp1;
        jp1 = j;
        j = jm1;
        // j now holds J_{k-1}
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += 2.0 * j;
        }
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp1 *= 1e-250;
            norm *= 1e-250;
        }
    }
    j / (norm + j)
}

/// Asymptotic expansion `sqrt(2 / (pi x)) (P cos chi - Q sin chi)`.
fn j0_hankel(x: f64) -> f64 {
    let mut p = 0.0;
    let mut q = 0.0;
    // a_k = prod_{m=1}^k (2m-1)^2 / (k! 8^k x^k)
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 0..120 {
        if k > 0 {
            let m = (2 * k - 1) as f64;
            a *= m * m / (k as f64 * 8.0 * x);
        }
        if a.abs() > last {
            break;
        }
        last = a.abs();
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * a;
        } else {
            // a_k(0) carries an extra (-1)^k, which only matters for odd k
            q -= sign * a;
        }
        if a.abs() < 1e-18 {
            break;
        }
    }
    let chi = x - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

fn j0_product(model: &HarmonizableModel, arg: impl Fn(usize) -> f64) -> f64 {
    let mut prod = 1.0;
    for k in 0..model.truncation() {
        let a = arg(k);
        if a.abs() < 1e-12 {
            continue;
        }
        prod *= bessel_j0(a);
        if prod == 0.0 {
            break;
        }
    }
    prod
}

/// `prod_k J0(lambda R_k)`.
pub fn cf_limit(model: &HarmonizableModel, lambda: f64) -> f64 {
    let r = model.amps();
    j0_product(model, |k| lambda * r[k])
}

/// `prod_k J0(2 lambda R_k sin(h Z_k / 2))`.
pub fn lag_cf_limit(model: &HarmonizableModel, lambda: f64, h: f64) -> f64 {
    let (r, z) = (model.amps(), model.freqs());
    j0_product(model, |k| 2.0 * lambda * r[k] * (0.5 * h * z[k]).sin())
}

/// Largest step that resolves every frequency of the model.
pub fn max_time_step(model: &HarmonizableModel) -> f64 {
    0.2 / model.max_abs_freq()
}

/// Trapezoidal time average `(1/T) int_0^T g(tau) dtau`, summed in fixed
/// blocks so the result does not depend on the thread count.
fn time_average<G>(model: &HarmonizableModel, t_max: f64, dt: f64, g: G) -> Result<Complex64>
where
    G: Fn(f64) -> Complex64 + Sync,
{
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(domain("T", t_max, "T > 0"));
    }
    let limit = max_time_step(model);
    if !(dt > 0.0) || dt > limit {
        return Err(Error::DtTooCoarse { dt, max_dt: limit });
    }
    let steps = (t_max / dt).ceil() as usize;
    let h = t_max / steps as f64;
    let blocks: Vec<Complex64> = (0..=steps)
        .collect::<Vec<_>>()
        .par_chunks(BLOCK)
        .map(|chunk| {
            chunk.iter().fold(Complex64::new(0.0, 0.0), |acc, &i| {
                let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
                acc + g(i as f64 * h) * w
            })
        })
        .collect();
    let total = blocks.iter().fold(Complex64::new(0.0, 0.0), |a, b| a + b);
    Ok(total * h / t_max)
}

/// `(1/T) int_0^T exp(i lambda X(tau)) dtau` on the continuous series.
pub fn empirical_cf_time_average(model: &HarmonizableModel, lambda: f64, t_max: f64, dt: f64) -> Result<Complex64> {
    time_average(model, t_max, dt, |tau| Complex64::from_polar(1.0, lambda * model.value_at(tau)))
}

/// `(1/T) int_0^T exp(i lambda (X(tau + h) - X(tau))) dtau`.
pub fn lag_cf_time_average(model: &HarmonizableModel, lambda: f64, h: f64, t_max: f64, dt: f64) -> Result<Complex64> {
    time_average(model, t_max, dt, |tau| {
        Complex64::from_polar(1.0, lambda * (model.value_at(tau + h) - model.value_at(tau)))
    })
}

/// A bounded observable `h` whose time average `(1/T) int h(X(tau)) dtau`
/// has a closed-form limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ObservableSpec {
    /// `h(x) = exp(i lambda x)`
    CharFn { lambda: f64 },
    /// `exp(i lambda (X(tau + h) - X(tau)))`
    LagCharFn { lambda: f64, h: f64 },
    /// `h(x) = sum_n c_n exp(i (2 pi / p) n x)` over the listed modes.
    Periodic {
        period: f64,
        modes: Vec<i64>,
        coeffs: Vec<(f64, f64)>,
    },
    /// `h(x) = int F(y) exp(i x y) dy` with `F` tabulated on a symmetric grid.
    Integrable {
        grid: Vec<f64>,
        transform: Vec<(f64, f64)>,
    },
}

impl ObservableSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ObservableSpec::CharFn { .. } => Ok(()),
            ObservableSpec::LagCharFn { h, .. } => {
                if *h >= 0.0 {
                    Ok(())
                } else {
                    Err(domain("h", *h, "h >= 0"))
                }
            }
            ObservableSpec::Periodic { period, modes, coeffs } => {
                if !(*period > 0.0) {
                    return Err(domain("period", *period, "period > 0"));
                }
                if modes.len() != coeffs.len() {
                    return Err(Error::LengthMismatch("modes vs coefficients".into()));
                }
                Ok(())
            }
            ObservableSpec::Integrable { grid, transform } => {
                if grid.len() != transform.len() || grid.len() < 3 {
                    return Err(Error::LengthMismatch("transform table".into()));
                }
                let n = grid.len();
                let scale = grid[n - 1].abs();
                if grid.windows(2).any(|w| !(w[1] > w[0]))
                    || (0..n).any(|i| (grid[i] + grid[n - 1 - i]).abs() > 1e-9 * scale)
                {
                    return Err(Error::InvalidTable("transform grid must be increasing and symmetric".into()));
                }
                Ok(())
            }
        }
    }

    /// Value of the observable at `x` (not defined for the lag observable,
    /// which depends on two times).
    pub fn eval(&self, x: f64) -> Option<Complex64> {
        match self {
            ObservableSpec::CharFn { lambda } => Some(Complex64::from_polar(1.0, lambda * x)),
            ObservableSpec::LagCharFn { .. } => None,
            ObservableSpec::Periodic { period, modes, coeffs } => {
                let w = 2.0 * PI / period;
                Some(
                    modes
                        .iter()
                        .zip(coeffs)
                        .map(|(&n, &(re, im))| Complex64::new(re, im) * Complex64::from_polar(1.0, w * n as f64 * x))
                        .sum(),
                )
            }
            ObservableSpec::Integrable { grid, transform } => {
                let vals: Vec<Complex64> = grid
                    .iter()
                    .zip(transform)
                    .map(|(&y, &(re, im))| Complex64::new(re, im) * Complex64::from_polar(1.0, x * y))
                    .collect();
                Some(trapezoid(grid, &vals))
            }
        }
    }
}

fn trapezoid(x: &[f64], y: &[Complex64]) -> Complex64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| (yw[0] + yw[1]) * (0.5 * (xw[1] - xw[0])))
        .sum()
}

/// Almost-sure limit of the time average of the observable.
pub fn observable_limit(model: &HarmonizableModel, obs: &ObservableSpec) -> Result<Complex64> {
    obs.validate()?;
    Ok(match obs {
        ObservableSpec::CharFn { lambda } => Complex64::new(cf_limit(model, *lambda), 0.0),
        ObservableSpec::LagCharFn { lambda, h } => Complex64::new(lag_cf_limit(model, *lambda, *h), 0.0),
        ObservableSpec::Periodic { period, modes, coeffs } => {
            let w = 2.0 * PI / period;
            modes
                .iter()
                .zip(coeffs)
                .map(|(&n, &(re, im))| Complex64::new(re, im) * cf_limit(model, w * n as f64))
                .sum()
        }
        ObservableSpec::Integrable { grid, transform } => {
            let vals: Vec<Complex64> = grid
                .par_iter()
                .zip(transform)
                .map(|(&y, &(re, im))| Complex64::new(re, im) * cf_limit(model, y))
                .collect();
            trapezoid(grid, &vals)
        }
    })
}

/// Time average of the observable along the continuous series.
pub fn observable_time_average(model: &HarmonizableModel, obs: &ObservableSpec, t_max: f64, dt: f64) -> Result<Complex64> {
    obs.validate()?;
    match obs {
        ObservableSpec::LagCharFn { lambda, h } => lag_cf_time_average(model, *lambda, *h, t_max, dt),
        _ => time_average(model, t_max, dt, |tau| obs.eval(model.value_at(tau)).expect("single-time observable")),
    }
}
