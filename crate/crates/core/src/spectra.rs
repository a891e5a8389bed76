//! Symmetric spectral densities: the four built-in examples plus tabulated
//! user densities. Each density evaluates its pdf, draws exact samples, and
//! integrates functions against itself.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_breakpoints, Integral, QuadratureConfig};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Where the density lives on the nonnegative half-line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Support {
    /// `[-bound, bound]`
    Bounded(f64),
    /// `|x| >= lower`, unbounded above.
    Unbounded { lower: f64 },
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    /// standard normal
    Gaussian,
    /// `x^2 e^{-|x|/4} / 256`
    DoubleGamma,
    /// `x^{-2}/2` on `|x| >= 1`
    Pareto,
    /// `1/2` on `[-1, 1]`
    Uniform,
    Table(TableDensity),
}

/// A symmetric probability density on the real line. It serves both as the
/// control-measure density of the process and as the law of the random
/// frequencies in its series representation.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensity {
    name: String,
    shape: Shape,
}

impl fmt::Display for SpectralDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl SpectralDensity {
    /// One of the built-in densities `f1`..`f4`, normalized to unit mass.
    pub fn builtin(name: &str) -> Result<Self> {
        let shape = match name {
            "f1" => Shape::Gaussian,
            "f2" => Shape::DoubleGamma,
            "f3" => Shape::Pareto,
            "f4" => Shape::Uniform,
            other => return Err(Error::UnknownDensity(other.to_string())),
        };
        Ok(Self {
            name: name.to_string(),
            shape,
        })
    }

    /// Resolves `f1`..`f4` or `table:PATH`.
    pub fn from_spec(spec: &str) -> Result<Self> {
        match spec.strip_prefix("table:") {
            Some(path) => Self::from_table_file(path),
            None => Self::builtin(spec),
        }
    }

    pub fn from_table_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let table = TableDensity::parse(&text)?;
        Ok(Self {
            name: format!("table:{}", path.display()),
            shape: Shape::Table(table),
        })
    }

    pub fn from_table(name: &str, xs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Ok(Self {
            name: name.to_string(),
            shape: Shape::Table(TableDensity::new(xs, values)?),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn support(&self) -> Support {
        match &self.shape {
            Shape::Gaussian | Shape::DoubleGamma => Support::Unbounded { lower: 0.0 },
            Shape::Pareto => Support::Unbounded { lower: 1.0 },
            Shape::Uniform => Support::Bounded(1.0),
            Shape::Table(t) => Support::Bounded(t.bound()),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let a = x.abs();
        match &self.shape {
            Shape::Gaussian => FRAC_1_SQRT_2PI * (-0.5 * x * x).exp(),
            Shape::DoubleGamma => a * a * (-a / 4.0).exp() / 256.0,
            Shape::Pareto => {
                if a >= 1.0 {
                    0.5 / (a * a)
                } else {
                    0.0
                }
            }
            Shape::Uniform => {
                if a <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
            Shape::Table(t) => t.pdf(a),
        }
    }

    /// Density of `|Z|` for `Z` with this density: `2 f(x)` on `x >= 0`.
    pub fn abs_density(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Err(crate::error::domain("x", x, "x >= 0"));
        }
        Ok(2.0 * self.pdf(x))
    }

    /// Second derivative of the pdf, for densities that are twice
    /// differentiable everywhere.
    pub fn pdf_second_derivative(&self, x: f64) -> Option<f64> {
        let a = x.abs();
        match &self.shape {
            Shape::Gaussian => Some((x * x - 1.0) * self.pdf(x)),
            Shape::DoubleGamma => Some((2.0 - a + a * a / 16.0) * (-a / 4.0).exp() / 256.0),
            _ => None,
        }
    }

    /// Mass of `{|x| > c}`.
    pub fn tail_mass(&self, c: f64) -> f64 {
        let c = c.max(0.0);
        match &self.shape {
            Shape::Gaussian => statrs::function::erf::erfc(c / SQRT_2),
            Shape::DoubleGamma => {
                // Gamma(3, scale 4) survival function
                let u = c / 4.0;
                (-u).exp() * (1.0 + u + 0.5 * u * u)
            }
            Shape::Pareto => 1.0 / c.max(1.0),
            Shape::Uniform => (1.0 - c).max(0.0),
            Shape::Table(t) => t.tail_mass(c),
        }
    }

    /// Truncation point used by [`integrate_half`](Self::integrate_half).
    pub fn cutoff(&self, quad: &QuadratureConfig) -> f64 {
        quad.tail_cutoff
            .unwrap_or_else(|| self.default_cutoff(quad.abs_tol))
    }

    fn default_cutoff(&self, abs_tol: f64) -> f64 {
        match &self.shape {
            Shape::Gaussian => 40.0,
            Shape::DoubleGamma => 400.0,
            // the x^{-2} tail cannot be truncated below abs_tol at any
            // practical cutoff; the omitted mass goes into the error bound
            Shape::Pareto => (1.0 / abs_tol).min(1e4),
            Shape::Uniform => 1.0,
            Shape::Table(t) => t.bound(),
        }
    }

    fn half_line_panels(&self, cutoff: f64) -> Vec<f64> {
        let mut pts = match &self.shape {
            Shape::Gaussian => vec![0.0, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 20.0],
            Shape::DoubleGamma => vec![0.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0],
            Shape::Pareto => (0..)
                .map(|k| 2f64.powi(k))
                .take_while(|&x| x < cutoff)
                .collect(),
            Shape::Uniform => vec![0.0],
            Shape::Table(t) => t.half_nodes(),
        };
        pts.retain(|&x| x < cutoff);
        pts.push(cutoff);
        pts
    }

    /// `int_0^inf g(x) f(x) dx`, truncated at the density's cutoff.
    ///
    /// `kinks` are extra breakpoints where `g` is not smooth. `g_bound` bounds
    /// `|g|` beyond the cutoff; the omitted tail mass times this bound is
    /// folded into the reported error.
    pub fn integrate_half<G: Fn(f64) -> f64>(
        &self,
        g: G,
        g_bound: f64,
        kinks: &[f64],
        quad: &QuadratureConfig,
    ) -> Result<Integral> {
        let cutoff = self.cutoff(quad);
        let mut pts = self.half_line_panels(cutoff);
        let lo = pts[0];
        pts.extend(kinks.iter().copied().filter(|&k| k > lo && k < cutoff));
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let mut r = integrate_breakpoints(|x| g(x) * self.pdf(x), &pts, quad)?;
        r.error += g_bound.abs() * 0.5 * self.tail_mass(cutoff);
        Ok(r)
    }

    /// `int_R g(x) f(x) dx` via symmetry of the density.
    pub fn integrate<G: Fn(f64) -> f64>(
        &self,
        g: G,
        g_bound: f64,
        kinks: &[f64],
        quad: &QuadratureConfig,
    ) -> Result<Integral> {
        let mut r = self.integrate_half(|x| g(x) + g(-x), 2.0 * g_bound, kinks, quad)?;
        r.error = r.error.max(0.0);
        Ok(r)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let magnitude = match &self.shape {
            Shape::Gaussian => return box_muller(rng),
            Shape::DoubleGamma => {
                // Gamma(3, scale 4) as a sum of three exponentials
                let prod: f64 = (0..3).map(|_| open_unit(rng)).product();
                -4.0 * prod.ln()
            }
            Shape::Pareto => 1.0 / open_unit(rng),
            Shape::Uniform => rng.random::<f64>(),
            Shape::Table(t) => t.sample_abs(rng.random::<f64>()),
        };
        sign * magnitude
    }

    pub fn sample_frequencies<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        (0..count).map(|_| self.sample(rng)).collect()
    }
}

/// Uniform on (0, 1].
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

fn box_muller<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1 = open_unit(rng);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Piecewise-linear density given on a symmetric grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TableDensity {
    /// nonnegative half of the grid, starting at 0
    xs: Vec<f64>,
    values: Vec<f64>,
    /// cumulative mass of `|Z|` at each node
    cumulative: Vec<f64>,
}

impl TableDensity {
    pub fn parse(text: &str) -> Result<Self> {
        let mut xs = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            let parsed: std::result::Result<Vec<f64>, _> =
                fields.iter().map(|s| s.parse::<f64>()).collect();
            match parsed {
                Ok(v) if v.len() == 2 => {
                    xs.push(v[0]);
                    values.push(v[1]);
                }
                // a header row is allowed before any data
                Err(_) if xs.is_empty() => continue,
                _ => {
                    return Err(Error::InvalidTable(format!(
                        "line {}: expected two numeric columns",
                        lineno + 1
                    )))
                }
            }
        }
        Self::new(xs, values)
    }

    pub fn new(xs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if xs.len() != values.len() {
            return Err(Error::InvalidTable("column lengths differ".into()));
        }
        if xs.len() < 3 {
            return Err(Error::InvalidTable("need at least three grid points".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidTable("x must be strictly increasing".into()));
        }
        if values.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidTable("density values must be finite and nonnegative".into()));
        }
        let n = xs.len();
        let scale = xs[n - 1].abs().max(xs[0].abs());
        let vscale = values.iter().copied().fold(0.0, f64::max);
        for i in 0..n {
            let j = n - 1 - i;
            if (xs[i] + xs[j]).abs() > 1e-9 * scale {
                return Err(Error::InvalidTable("grid is not symmetric about 0".into()));
            }
            if (values[i] - values[j]).abs() > 1e-9 * vscale {
                return Err(Error::InvalidTable("density values are not symmetric".into()));
            }
        }
        // keep the nonnegative half, inserting x = 0 for even-length grids
        let mut half_x = Vec::with_capacity(n / 2 + 1);
        let mut half_v = Vec::with_capacity(n / 2 + 1);
        if n.is_multiple_of(2) {
            let (a, b) = (xs[n / 2 - 1], xs[n / 2]);
            let t = -a / (b - a);
            half_x.push(0.0);
            half_v.push(values[n / 2 - 1] + t * (values[n / 2] - values[n / 2 - 1]));
            half_x.extend_from_slice(&xs[n / 2..]);
            half_v.extend_from_slice(&values[n / 2..]);
        } else {
            half_x.push(0.0);
            half_v.push(values[n / 2]);
            half_x.extend_from_slice(&xs[n / 2 + 1..]);
            half_v.extend_from_slice(&values[n / 2 + 1..]);
        }
        let mut cumulative = vec![0.0; half_x.len()];
        for i in 1..half_x.len() {
            cumulative[i] =
                cumulative[i - 1] + 0.5 * (half_v[i] + half_v[i - 1]) * (half_x[i] - half_x[i - 1]);
        }
        let half_mass = cumulative[cumulative.len() - 1];
        if !(half_mass > 0.0) {
            return Err(Error::InvalidTable("density has zero mass".into()));
        }
        // normalize so that the full line carries unit mass
        let scale = 0.5 / half_mass;
        for v in &mut half_v {
            *v *= scale;
        }
        for c in &mut cumulative {
            *c *= 2.0 * scale;
        }
        Ok(Self {
            xs: half_x,
            values: half_v,
            cumulative,
        })
    }

    fn bound(&self) -> f64 {
        self.xs[self.xs.len() - 1]
    }

    fn half_nodes(&self) -> Vec<f64> {
        if self.xs.len() <= 4096 {
            self.xs.clone()
        } else {
            let step = self.xs.len() / 4096 + 1;
            self.xs.iter().step_by(step).copied().collect()
        }
    }

    fn segment(&self, a: f64) -> Option<usize> {
        if a > self.bound() {
            return None;
        }
        let i = self.xs.partition_point(|&x| x <= a);
        Some(i.saturating_sub(1).min(self.xs.len() - 2))
    }

    fn pdf(&self, a: f64) -> f64 {
        match self.segment(a) {
            None => 0.0,
            Some(i) => {
                let t = (a - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
                self.values[i] + t * (self.values[i + 1] - self.values[i])
            }
        }
    }

    fn tail_mass(&self, c: f64) -> f64 {
        match self.segment(c) {
            None => 0.0,
            Some(i) => {
                // |Z|-mass on [x_i, c] is twice the trapezoid under f
                let partial = (c - self.xs[i]) * (self.values[i] + self.pdf(c));
                (1.0 - self.cumulative[i] - partial).max(0.0)
            }
        }
    }

    /// Inverse CDF of `|Z|` at probability `u`.
    fn sample_abs(&self, u: f64) -> f64 {
        let i = self
            .cumulative
            .partition_point(|&c| c <= u)
            .saturating_sub(1)
            .min(self.xs.len() - 2);
        let target = (u - self.cumulative[i]) / 2.0; // mass in f-units on this segment
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        let slope = (v1 - v0) / (x1 - x0);
        // solve v0 d + slope d^2 / 2 = target for d in [0, x1 - x0]
        let d = if slope.abs() < 1e-300 {
            if v0 > 0.0 {
                target / v0
            } else {
                0.0
            }
        } else {
            let disc = (v0 * v0 + 2.0 * slope * target).max(0.0);
            // numerically stable root of the quadratic
            2.0 * target / (v0 + disc.sqrt())
        };
        (x0 + d).clamp(x0, x1)
    }
}
