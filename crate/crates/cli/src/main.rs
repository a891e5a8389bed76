//! `srh`: simulate harmonizable SaS paths and estimate their spectral density.

mod config;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use config::{pick, FileConfig};
use harmonizable::freq_est::estimate_frequencies;
use harmonizable::kde::estimate_spectral_density;
use harmonizable::multipath::{estimate_alpha_sine_curve, simulate_ensemble};
use harmonizable::nonergodic::{cf_limit, empirical_cf_time_average, lag_cf_limit, lag_cf_time_average, max_time_step};
use harmonizable::periodogram::periodogram_fft;
use harmonizable::simulate::{generate_model, sample_path};
use harmonizable::stable::alpha_sine_transform;
use harmonizable::{
    Alpha, BandwidthRule, HarmonizableModel, Kernel, PathSample, PeakConfig, QuadratureConfig, SpectralDensity,
    TruncationRule,
};

#[derive(Parser)]
#[command(name = "srh", version, about = "Harmonizable symmetric alpha-stable processes: simulation and spectral estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a series model and sample one path on (0, T].
    Simulate(SimulateArgs),
    /// Periodogram, frequency extraction and kernel estimate of the spectral density.
    Estimate(EstimateArgs),
    /// Time averages of exp(i lambda X) against their Bessel-product limits.
    Limits(LimitsArgs),
    /// Alpha-sine transform from an ensemble of independent paths.
    Multipath(MultipathArgs),
}

#[derive(Args)]
struct Common {
    /// TOML file with default values for any of the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    /// f1, f2, f3, f4 or table:PATH
    #[arg(long)]
    density: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of series terms N.
    #[arg(long)]
    components: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Observation horizon T.
    #[arg(long)]
    t_max: Option<f64>,
    /// Number of sample points n.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    common: Common,
    /// Path CSV (t, x). Without it a path is simulated first.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Zero-padded FFT length.
    #[arg(long)]
    pad: Option<usize>,
    /// gaussian, epanechnikov or triangle
    #[arg(long)]
    kernel: Option<String>,
    /// silverman, sj or fixed:H
    #[arg(long)]
    bandwidth: Option<String>,
    /// Stop when the largest peak falls below this fraction of the first maximum.
    #[arg(long)]
    prominence: Option<f64>,
    #[arg(long)]
    min_separation: Option<f64>,
    /// Mirror the frequency sample at 0 before smoothing.
    #[arg(long)]
    reflect: bool,
}

#[derive(Args)]
struct LimitsArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    t_max: Option<f64>,
    /// Comma-separated lambda values.
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    /// Lag h; adds a table for exp(i lambda (X(t+h) - X(t))).
    #[arg(long)]
    lag: Option<f64>,
    /// Time step of the trapezoid rule.
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Args)]
struct MultipathArgs {
    #[command(flatten)]
    common: Common,
    /// Last observation time; the grid starts at 0.
    #[arg(long)]
    t_max: Option<f64>,
    /// Points per path, including t = 0.
    #[arg(long)]
    samples: Option<usize>,
    /// Number of independent paths L.
    #[arg(long)]
    paths: Option<usize>,
}

/// Bad arguments; reported with exit status 2.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// Settings shared by the commands that draw a model.
struct ModelSettings {
    alpha: f64,
    density: SpectralDensity,
    density_given: bool,
    seed: u64,
    components: usize,
    out: PathBuf,
}

impl ModelSettings {
    fn resolve(common: &Common, file: &FileConfig, default_components: usize) -> Result<Self> {
        let density_spec = common.density.clone().or_else(|| file.density.clone());
        let density_given = density_spec.is_some();
        let density_spec = density_spec.unwrap_or_else(|| "f1".into());
        let density = SpectralDensity::from_spec(&density_spec).map_err(|e| usage(e.to_string()))?;
        let components = pick(common.components, file.components, default_components);
        if components == 0 {
            return Err(usage("--components must be at least 1"));
        }
        Ok(Self {
            alpha: pick(common.alpha, file.alpha, 1.5),
            density,
            density_given,
            seed: pick(common.seed, file.seed, 0),
            components,
            out: pick(common.out.clone(), file.out.clone(), PathBuf::from("out")),
        })
    }

    fn alpha(&self) -> Result<Alpha> {
        Alpha::new(self.alpha).map_err(|e| usage(e.to_string()))
    }

    fn model(&self) -> Result<HarmonizableModel> {
        generate_model(self.alpha()?, &self.density, TruncationRule::Fixed(self.components), self.seed)
            .map_err(|e| usage(e.to_string()))
    }

    fn record(&self, summary: &mut Map<String, Value>) {
        summary.insert("alpha".into(), json!(self.alpha));
        summary.insert("density".into(), json!(self.density.name()));
        summary.insert("seed".into(), json!(self.seed));
        summary.insert("components".into(), json!(self.components));
    }
}

fn grid(t_max: f64, samples: usize) -> Result<f64> {
    if samples == 0 {
        return Err(usage("--samples must be at least 1"));
    }
    let delta = t_max / samples as f64;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(usage("--t-max must be positive"));
    }
    Ok(delta)
}

fn csv(write: impl FnOnce(&mut Vec<u8>) -> harmonizable::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

/// Writes all artifacts at the end, so a failed run leaves no partial output.
fn write_all(out: &Path, files: Vec<(&str, Vec<u8>)>, summary: Map<String, Value>) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for (name, bytes) in files {
        let path = out.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(summary))?;
    text.push('\n');
    let path = out.join("summary.json");
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let settings = ModelSettings::resolve(&args.common, &file, 10_000)?;
    let t_max = pick(args.t_max, file.t_max, 500.0);
    let samples = pick(args.samples, file.samples, 1000);
    let delta = grid(t_max, samples)?;
    let model = settings.model()?;
    let path = sample_path(&model, delta, samples)?;

    let mut summary = Map::new();
    summary.insert("command".into(), json!("simulate"));
    settings.record(&mut summary);
    summary.insert("t_max".into(), json!(t_max));
    summary.insert("samples".into(), json!(samples));
    summary.insert("delta".into(), json!(delta));
    summary.insert("energy".into(), json!(path.energy()));
    let mut model_json = model.to_json()?;
    model_json.push('\n');
    write_all(
        &settings.out,
        vec![
            ("model.json", model_json.into_bytes()),
            ("path.csv", csv(|b| path.write_csv(b))?),
        ],
        summary,
    )
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let settings = ModelSettings::resolve(&args.common, &file, 10_000)?;
    let mut summary = Map::new();
    summary.insert("command".into(), json!("estimate"));

    let path = match args.input.clone().or(file.input.clone()) {
        Some(input) => {
            let text = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            summary.insert("input".into(), json!(input.display().to_string()));
            PathSample::read_csv(&text).with_context(|| format!("parsing {}", input.display()))?
        }
        None => {
            let t_max = pick(args.t_max, file.t_max, 500.0);
            let samples = pick(args.samples, file.samples, 1000);
            let delta = grid(t_max, samples)?;
            settings.record(&mut summary);
            summary.insert("t_max".into(), json!(t_max));
            sample_path(&settings.model()?, delta, samples)?
        }
    };
    let n = path.len();
    let pad = pick(args.pad, file.pad, (8 * n).next_power_of_two());
    if pad < n {
        return Err(usage(format!("--pad {pad} is shorter than the {n} samples")));
    }
    let kernel: Kernel = pick(args.kernel, file.kernel, "gaussian".into())
        .parse()
        .map_err(|e: harmonizable::Error| usage(e.to_string()))?;
    let rule: BandwidthRule = pick(args.bandwidth, file.bandwidth, "sj".into())
        .parse()
        .map_err(|e: harmonizable::Error| usage(e.to_string()))?;
    let reflect = args.reflect || file.reflect.unwrap_or(false);
    let config = PeakConfig {
        prominence_threshold: pick(args.prominence, file.prominence, PeakConfig::default().prominence_threshold),
        min_separation: args.min_separation.or(file.min_separation),
        pad_length: Some(pad),
        ..PeakConfig::default()
    };
    config.validate().map_err(|e| usage(e.to_string()))?;

    let periodogram = periodogram_fft(&path, pad)?;
    let freqs = estimate_frequencies(&path, &config)?;
    let est = estimate_spectral_density(&freqs.freqs, kernel, rule, reflect)?;
    let truth = settings.density_given.then_some(&settings.density);

    summary.insert("samples".into(), json!(n));
    summary.insert("delta".into(), json!(path.delta()));
    summary.insert("pad".into(), json!(pad));
    summary.insert("prominence".into(), json!(config.prominence_threshold));
    summary.insert("min_separation".into(), json!(freqs.min_separation));
    summary.insert("reference_level".into(), json!(freqs.reference_level));
    summary.insert("iterations".into(), json!(freqs.iterations));
    summary.insert("frequencies_extracted".into(), json!(freqs.len()));
    summary.insert("kernel".into(), json!(kernel.to_string()));
    summary.insert("bandwidth_rule".into(), json!(rule.to_string()));
    summary.insert("bandwidth".into(), json!(est.bandwidth()));
    summary.insert("bandwidth_fell_back".into(), json!(est.bandwidth_fell_back()));
    summary.insert("reflect".into(), json!(reflect));
    if let Some(f) = truth {
        summary.insert("density".into(), json!(f.name()));
        summary.insert("l1_distance".into(), json!(est.l1_distance(f)?));
    }
    write_all(
        &settings.out,
        vec![
            ("periodogram.csv", csv(|b| periodogram.write_csv(b))?),
            ("frequencies.csv", csv(|b| freqs.write_csv(b))?),
            ("density.csv", csv(|b| est.write_csv(b, truth))?),
        ],
        summary,
    )
}

fn limits(args: LimitsArgs) -> Result<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let settings = ModelSettings::resolve(&args.common, &file, 5)?;
    let t_max = pick(args.t_max, file.t_max, 2e4);
    if t_max.is_nan() || t_max <= 0.0 {
        return Err(usage("--t-max must be positive"));
    }
    let lambdas = pick(args.lambdas, file.lambdas, (0..=12).map(|i| 0.25 * i as f64).collect());
    let model = settings.model()?;
    let dt = pick(args.dt, file.dt, max_time_step(&model));
    let lag = args.lag.or(file.lag);

    let table = |avg: &dyn Fn(f64) -> harmonizable::Result<f64>, limit: &dyn Fn(f64) -> f64| -> Result<Vec<u8>> {
        let mut cols = [Vec::new(), Vec::new(), Vec::new()];
        for &l in &lambdas {
            let a = avg(l)?;
            let b = limit(l);
            cols[0].push(a);
            cols[1].push(b);
            cols[2].push((a - b).abs());
        }
        csv(|buf| {
            harmonizable::io::write_columns(
                buf,
                &["lambda", "time_average", "limit", "abs_diff"],
                &[&lambdas, &cols[0], &cols[1], &cols[2]],
            )
        })
    };
    let mut files = vec![(
        "limits.csv",
        table(
            &|l| empirical_cf_time_average(&model, l, t_max, dt).map(|c| c.re),
            &|l| cf_limit(&model, l),
        )?,
    )];
    if let Some(h) = lag {
        files.push((
            "lag_limits.csv",
            table(
                &|l| lag_cf_time_average(&model, l, h, t_max, dt).map(|c| c.re),
                &|l| lag_cf_limit(&model, l, h),
            )?,
        ));
    }
    let mut model_json = model.to_json()?;
    model_json.push('\n');
    files.push(("model.json", model_json.into_bytes()));

    let mut summary = Map::new();
    summary.insert("command".into(), json!("limits"));
    settings.record(&mut summary);
    summary.insert("t_max".into(), json!(t_max));
    summary.insert("dt".into(), json!(dt));
    summary.insert("lambdas".into(), json!(lambdas.len()));
    if let Some(h) = lag {
        summary.insert("lag".into(), json!(h));
    }
    write_all(&settings.out, files, summary)
}

fn multipath(args: MultipathArgs) -> Result<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let settings = ModelSettings::resolve(&args.common, &file, 10_000)?;
    let t_max = pick(args.t_max, file.t_max, 10.0);
    let samples = pick(args.samples, file.samples, 101);
    let paths = pick(args.paths, file.paths, 100);
    if paths < 2 {
        return Err(usage("--paths must be at least 2"));
    }
    if samples < 2 {
        return Err(usage("--samples must be at least 2"));
    }
    let delta = grid(t_max, samples - 1)?;
    let alpha = settings.alpha()?;
    let ensemble = simulate_ensemble(
        alpha,
        &settings.density,
        TruncationRule::Fixed(settings.components),
        settings.seed,
        paths,
        delta,
        samples,
    )
    .map_err(|e| usage(e.to_string()))?;
    let curve = estimate_alpha_sine_curve(&ensemble)?;
    let quad = QuadratureConfig::default();
    let truth = curve
        .half_lags
        .iter()
        .map(|&t| alpha_sine_transform(&settings.density, alpha, t, &quad))
        .collect::<harmonizable::Result<Vec<_>>>()?;

    let mut summary = Map::new();
    summary.insert("command".into(), json!("multipath"));
    settings.record(&mut summary);
    summary.insert("t_max".into(), json!(t_max));
    summary.insert("samples".into(), json!(samples));
    summary.insert("paths".into(), json!(paths));
    summary.insert("pooled_alpha".into(), json!(curve.pooled_alpha));
    summary.insert(
        "failed_lags".into(),
        json!(curve.estimates.iter().filter(|e| e.is_none()).count()),
    );
    let max_err = curve
        .estimates
        .iter()
        .zip(&truth)
        .filter_map(|(e, t)| e.map(|e| (e - t).abs()))
        .fold(0.0, f64::max);
    summary.insert("max_abs_error".into(), json!(max_err));
    write_all(
        &settings.out,
        vec![("alpha_sine.csv", csv(|b| curve.write_csv(b, &truth))?)],
        summary,
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Limits(a) => limits(a),
        Command::Multipath(a) => multipath(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Usage>() => {
            eprintln!("usage error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
