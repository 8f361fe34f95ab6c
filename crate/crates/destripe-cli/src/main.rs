//! Command-line destriping toolkit.
//!
//! Without a subcommand the binary destripes the given image:
//!   destripe --method gsr --mu1 0.3333 --mu2 0.003333 --iters 25000 in.tif
//! Subcommands: `run` (explicit form of the default), `metrics`, `synth`.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use destripe::fourier::{filter_volume, FourierFilterParams};
use destripe::gsr::{solve_gsr, GsrParams, SolveReport, SolverSettings};
use destripe::io::{read_image, write_image, ExportFormat, ExportOptions, LoadedVolume};
use destripe::metrics::{evaluate, MetricReport};
use destripe::synth::{
    corrupt, make_phantom, make_stripes, PhantomSpec, PhantomStructure, StripeLength, StripeSpec,
    RNG_ALGORITHM,
};
use destripe::volume::{Dims, StripeDecomposition, StripeDirection, Volume};
use destripe::vsnr::{make_gabor_patterns, solve_vsnr, VsnrParams, DEFAULT_PATTERN_SCALES};

use config::{resolve, ConfigFile};

/// Error class that should exit with the usage code (2) instead of 1.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(anyhow!(UsageError(msg.into())))
}

#[derive(Parser, Debug)]
#[command(
    name = "destripe",
    version,
    about = "Remove stripe artifacts from 2D/3D grayscale images",
    subcommand_negates_reqs = true,
    args_conflicts_with_subcommands = true
)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Destripe an image (same as calling without a subcommand)
    Run(RunArgs),
    /// Compute quality metrics for an image, optionally against a reference
    Metrics(MetricsArgs),
    /// Generate a synthetic (clean, striped) ground-truth pair
    Synth(SynthArgs),
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// Input image (multi-page TIFF, 2D PNG, or raw f32 with .dims sidecar)
    #[arg(required = true)]
    input: Option<PathBuf>,

    /// Destriping method: gsr | gsr-oblique | vsnr | fourier
    #[arg(long)]
    method: Option<String>,

    /// TV weight of the variational method
    #[arg(long)]
    mu1: Option<f64>,
    /// Stripe sparsity weight of the variational method
    #[arg(long)]
    mu2: Option<f64>,
    /// Weight on the z-gradient in [0, 1]
    #[arg(long = "rho-z")]
    rho_z: Option<f64>,
    /// Stripe direction(s) in radians, comma separated (pi/2 is vertical)
    #[arg(long)]
    theta: Option<String>,
    /// Iteration count of the variational solvers
    #[arg(long)]
    iters: Option<usize>,

    /// Gaussian damping width of the Fourier filter
    #[arg(long)]
    sigma: Option<f64>,
    /// Angular fall-off of the Fourier filter
    #[arg(long = "sigma-a")]
    sigma_a: Option<f64>,
    /// Number of angular wedges of the Fourier filter
    #[arg(long = "n-dir")]
    n_dir: Option<usize>,
    /// Low-frequency protect radius (bins) of the Fourier filter
    #[arg(long = "protect-radius")]
    protect_radius: Option<f64>,

    /// Weight of the short-pattern channel (vsnr)
    #[arg(long)]
    alpha1: Option<f64>,
    /// Weight of the medium-pattern channel (vsnr)
    #[arg(long)]
    alpha2: Option<f64>,
    /// Weight of the long-pattern channel (vsnr)
    #[arg(long)]
    alpha3: Option<f64>,
    /// Gradient smoothing of vsnr
    #[arg(long)]
    epsilon: Option<f64>,

    /// Where to write the clean image (default: <input>_clean.<ext>)
    #[arg(long = "out-clean")]
    out_clean: Option<PathBuf>,
    /// Where to write the stripe image (default: <input>_stripes.<ext>)
    #[arg(long = "out-stripes")]
    out_stripes: Option<PathBuf>,
    /// Export unclipped 32-bit float instead of quantized integers
    #[arg(long)]
    float: bool,

    /// Print a metric report for the result (curtaining; plus PSNR/MS-SSIM
    /// with --reference)
    #[arg(long)]
    metrics: bool,
    /// Reference image for PSNR and MS-SSIM
    #[arg(long)]
    reference: Option<PathBuf>,

    /// key = value config file; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,

    /// Grid search 'mu1=a:b:n,mu2=c:d:m'; prints a CSV metric table instead
    /// of writing images
    #[arg(long)]
    sweep: Option<String>,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    /// Image to score
    input: PathBuf,
    /// Reference image enabling PSNR and MS-SSIM
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Stripe direction for the curtaining score (radians)
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    theta: f64,
    /// Output format: kv | csv
    #[arg(long, default_value = "kv")]
    format: String,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Volume dims as NXxNY or NXxNYxNZ
    #[arg(long, default_value = "256x256")]
    dims: String,
    /// Phantom structure: blobs | spheres | cells
    #[arg(long, default_value = "blobs")]
    structure: String,
    #[arg(long, default_value_t = 14)]
    count: usize,
    #[arg(long = "radius-min", default_value_t = 8.0)]
    radius_min: f64,
    #[arg(long = "radius-max", default_value_t = 36.0)]
    radius_max: f64,
    #[arg(long = "intensity-min", default_value_t = 0.4)]
    intensity_min: f64,
    #[arg(long = "intensity-max", default_value_t = 0.55)]
    intensity_max: f64,
    #[arg(long, default_value_t = 0.4)]
    background: f64,
    /// Gaussian blur applied to the phantom
    #[arg(long, default_value_t = 1.5)]
    smoothness: f64,

    /// Stripe direction in radians
    #[arg(long = "stripe-theta", default_value_t = std::f64::consts::FRAC_PI_2)]
    stripe_theta: f64,
    #[arg(long = "width-min", default_value_t = 1.0)]
    width_min: f64,
    #[arg(long = "width-max", default_value_t = 3.0)]
    width_max: f64,
    /// Peak stripe amplitude; values are drawn from [-a, a]
    #[arg(long, default_value_t = 0.18)]
    amplitude: f64,
    /// Target covered area fraction
    #[arg(long, default_value_t = 0.18)]
    density: f64,
    /// Stripe length: 'full' or 'min:max' segment lengths in pixels
    #[arg(long, default_value = "full")]
    length: String,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Where to write the clean phantom
    #[arg(long = "out-clean")]
    out_clean: PathBuf,
    /// Where to write the striped image
    #[arg(long = "out-striped")]
    out_striped: PathBuf,
    /// Optionally write the signed stripe field (shifted for integer formats)
    #[arg(long = "out-stripes")]
    out_stripes: Option<PathBuf>,
    /// Export unclipped 32-bit float instead of quantized integers
    #[arg(long)]
    float: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Method {
    Gsr,
    GsrOblique,
    Vsnr,
    Fourier,
}

impl Method {
    fn parse(s: &str) -> Result<Method> {
        match s.to_ascii_lowercase().as_str() {
            "gsr" => Ok(Method::Gsr),
            "gsr-oblique" | "gsr_oblique" => Ok(Method::GsrOblique),
            "vsnr" => Ok(Method::Vsnr),
            "fourier" => Ok(Method::Fourier),
            other => usage(format!(
                "unknown method '{other}' (expected gsr, gsr-oblique, vsnr, or fourier)"
            )),
        }
    }
}

fn main() -> ExitCode {
    init_thread_pool();
    let cli = Cli::parse();
    let result = match cli.command {
        Some(Command::Run(args)) => cmd_run(args),
        Some(Command::Metrics(args)) => cmd_metrics(args),
        Some(Command::Synth(args)) => cmd_synth(args),
        None => cmd_run(cli.run),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.chain().any(|c| c.is::<UsageError>()) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

/// DESTRIPE_THREADS caps the rayon pool used for slice-parallel work.
fn init_thread_pool() {
    if let Ok(raw) = std::env::var("DESTRIPE_THREADS") {
        match raw.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            _ => eprintln!("warning: ignoring invalid DESTRIPE_THREADS='{raw}'"),
        }
    }
}

fn parse_thetas(raw: &str) -> Result<Vec<StripeDirection>> {
    let mut dirs = Vec::new();
    for part in raw.split(',') {
        let value: f64 = match part.trim().parse() {
            Ok(v) => v,
            Err(_) => return usage(format!("cannot parse angle '{part}' (radians expected)")),
        };
        dirs.push(
            StripeDirection::from_angle(value).map_err(|e| anyhow!(UsageError(e.to_string())))?,
        );
    }
    if dirs.is_empty() {
        return usage("at least one angle is required");
    }
    Ok(dirs)
}

fn default_output(input: &Path, suffix: &str, float: bool) -> PathBuf {
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = if float {
        "tif".to_string()
    } else {
        input
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("tif")
            .to_string()
    };
    input.with_file_name(format!("{stem}_{suffix}.{ext}"))
}

fn export_options(path: &Path, float: bool, signed: bool) -> Result<ExportOptions> {
    let format = if float {
        match path.extension().and_then(|e| e.to_str()) {
            Some("raw") => ExportFormat::RawF32,
            Some("tif") | Some("tiff") => ExportFormat::TiffF32,
            other => {
                return usage(format!(
                    "--float requires a .tif or .raw output, got {other:?}"
                ))
            }
        }
    } else {
        ExportFormat::from_extension(path)?
    };
    Ok(ExportOptions {
        format,
        shift_signed: signed && !format.is_float(),
    })
}

fn print_metric_report(report: &MetricReport, format: &str) -> Result<()> {
    match format {
        "kv" => {
            match report.psnr {
                Some(v) if v.is_infinite() => println!("psnr=inf"),
                Some(v) => println!("psnr={v:.6}"),
                None => println!("psnr=unavailable"),
            }
            match report.ms_ssim {
                Some(v) => println!("ms_ssim={v:.6}"),
                None => println!("ms_ssim=unavailable"),
            }
            match report.curtaining {
                Some(v) => println!("curtaining={v:.6}"),
                None => println!("curtaining=unavailable"),
            }
            for flag in &report.flags {
                println!("flag={flag}");
            }
        }
        "csv" => {
            println!("psnr,ms_ssim,curtaining");
            let cell = |v: Option<f64>| match v {
                Some(x) if x.is_infinite() => "inf".to_string(),
                Some(x) => format!("{x:.6}"),
                None => String::new(),
            };
            println!(
                "{},{},{}",
                cell(report.psnr),
                cell(report.ms_ssim),
                cell(report.curtaining)
            );
        }
        other => return usage(format!("unknown format '{other}' (expected kv or csv)")),
    }
    Ok(())
}

struct ResolvedRun {
    method: Method,
    gsr: GsrParams,
    settings: SolverSettings,
    vsnr: VsnrParams,
    fourier: FourierFilterParams,
    theta0: f64,
}

fn resolve_run(args: &RunArgs, cfg: &ConfigFile) -> Result<ResolvedRun> {
    let method_name = args
        .method
        .clone()
        .or_else(|| cfg.get("method").map(str::to_string));
    let Some(method_name) = method_name else {
        return usage("no method given (use --method or a config file)");
    };
    let method = Method::parse(&method_name)?;

    let theta_raw = args
        .theta
        .clone()
        .or_else(|| cfg.get("theta").map(str::to_string));
    let directions = match &theta_raw {
        Some(raw) => parse_thetas(raw)?,
        None => vec![StripeDirection::from_angle(std::f64::consts::FRAC_PI_2).unwrap()],
    };
    let theta0 = directions[0].angle();

    let iters = resolve(args.iters, cfg.get_parsed("iters")?, 25_000);
    // the CLI never prints the trace, so skip per-stride objective logging
    let mut settings = SolverSettings::with_iters(iters);
    settings.log_stride = 0;

    let gsr = GsrParams {
        mu1: resolve(args.mu1, cfg.get_parsed("mu1")?, 1.0 / 3.0),
        mu2: resolve(args.mu2, cfg.get_parsed("mu2")?, 1.0 / 300.0),
        rho_z: resolve(args.rho_z, cfg.get_parsed("rho_z")?, 1.0),
        directions: directions.clone(),
    };

    let vsnr = VsnrParams {
        alphas: [
            resolve(args.alpha1, cfg.get_parsed("alpha1")?, 3.0),
            resolve(args.alpha2, cfg.get_parsed("alpha2")?, 5.0),
            resolve(args.alpha3, cfg.get_parsed("alpha3")?, 10.0),
        ],
        epsilon: resolve(args.epsilon, cfg.get_parsed("epsilon")?, 1e-2),
        settings: settings.clone(),
    };

    let fourier = FourierFilterParams {
        sigma: resolve(args.sigma, cfg.get_parsed("sigma")?, 10.0),
        sigma_a: resolve(args.sigma_a, cfg.get_parsed("sigma_a")?, 0.3),
        n_dir: resolve(args.n_dir, cfg.get_parsed("n_dir")?, 8),
        theta0,
        protect_radius: resolve(args.protect_radius, cfg.get_parsed("protect_radius")?, 3.0),
        wedge_softness: 1.0,
    };

    // surface domain errors as usage errors before any heavy work
    let domain_check: Result<(), destripe::Error> = match method {
        Method::Gsr | Method::GsrOblique => gsr.validate(),
        Method::Vsnr => vsnr.validate(),
        Method::Fourier => fourier.validate(),
    };
    if let Err(e) = domain_check {
        return usage(e.to_string());
    }

    Ok(ResolvedRun {
        method,
        gsr,
        settings,
        vsnr,
        fourier,
        theta0,
    })
}

fn run_method(
    resolved: &ResolvedRun,
    volume: &Volume,
) -> Result<(StripeDecomposition, Option<SolveReport>)> {
    match resolved.method {
        Method::Gsr | Method::GsrOblique => {
            let (dec, report) = solve_gsr(volume, &resolved.gsr, &resolved.settings)?;
            Ok((dec, Some(report)))
        }
        Method::Vsnr => {
            let patterns = make_gabor_patterns(resolved.theta0, &DEFAULT_PATTERN_SCALES)?;
            let outcome = solve_vsnr(volume, &patterns, &resolved.vsnr)?;
            Ok((outcome.decomposition, Some(outcome.report)))
        }
        Method::Fourier => Ok((filter_volume(volume, &resolved.fourier)?, None)),
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let input_path = args
        .input
        .clone()
        .ok_or_else(|| anyhow!(UsageError("no input image given".into())))?;
    let cfg = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let resolved = resolve_run(&args, &cfg)?;

    let loaded: LoadedVolume = read_image(&input_path)?;
    let volume = loaded.volume;

    if let Some(sweep_spec) = &args.sweep {
        return run_sweep(&resolved, &volume, sweep_spec, args.reference.as_deref());
    }

    let started = std::time::Instant::now();
    let (dec, report) = run_method(&resolved, &volume)?;
    eprintln!("solve took {:?}", started.elapsed());

    let out_clean = args
        .out_clean
        .clone()
        .unwrap_or_else(|| default_output(&input_path, "clean", args.float));
    let out_stripes = args
        .out_stripes
        .clone()
        .unwrap_or_else(|| default_output(&input_path, "stripes", args.float));
    write_image(
        &dec.clean,
        &out_clean,
        &export_options(&out_clean, args.float, false)?,
    )?;
    let stripe_opts = export_options(&out_stripes, args.float, true)?;
    write_image(&dec.stripes, &out_stripes, &stripe_opts)?;

    println!("input={}", input_path.display());
    println!("dims={}", volume.dims());
    println!("method={:?}", resolved.method);
    match resolved.method {
        Method::Gsr | Method::GsrOblique => {
            println!("mu1={}", resolved.gsr.mu1);
            println!("mu2={}", resolved.gsr.mu2);
            println!("rho_z={}", resolved.gsr.rho_z);
            let thetas: Vec<String> = resolved
                .gsr
                .directions
                .iter()
                .map(|d| format!("{}", d.angle()))
                .collect();
            println!("theta={}", thetas.join(","));
        }
        Method::Vsnr => {
            println!(
                "alpha={},{},{}",
                resolved.vsnr.alphas[0], resolved.vsnr.alphas[1], resolved.vsnr.alphas[2]
            );
            println!("epsilon={}", resolved.vsnr.epsilon);
        }
        Method::Fourier => {
            println!("sigma={}", resolved.fourier.sigma);
            println!("sigma_a={}", resolved.fourier.sigma_a);
            println!("n_dir={}", resolved.fourier.n_dir);
        }
    }
    println!("clean={}", out_clean.display());
    println!("stripes={}", out_stripes.display());
    if stripe_opts.shift_signed {
        println!("note=stripe field shifted to [0,1] via (s+1)/2 for integer export");
    }
    if let Some(report) = report {
        println!("iterations={}", report.iterations);
        println!("final_objective={:.9e}", report.final_objective);
        println!("constraint_residual={:.3e}", report.constraint_residual);
        if report.fell_back_to_input {
            println!("note=objective favored the unmodified input");
        }
    }

    if args.metrics {
        let reference = match &args.reference {
            Some(path) => Some(read_image(path)?.volume),
            None => None,
        };
        let metric_report = evaluate(&dec.clean, reference.as_ref(), resolved.theta0)?;
        print_metric_report(&metric_report, "kv")?;
    }
    Ok(())
}

/// One axis of the sweep grid: linearly spaced values from 'lo:hi:count'.
fn parse_sweep_axis(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return usage(format!("sweep axis '{spec}' must be 'lo:hi:count'"));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| anyhow!(UsageError(format!("bad sweep bound '{}'", parts[0]))))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| anyhow!(UsageError(format!("bad sweep bound '{}'", parts[1]))))?;
    let count: usize = parts[2]
        .parse()
        .map_err(|_| anyhow!(UsageError(format!("bad sweep count '{}'", parts[2]))))?;
    if count == 0 {
        return usage("sweep count must be >= 1");
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let step = (hi - lo) / (count - 1) as f64;
    Ok((0..count).map(|i| lo + step * i as f64).collect())
}

fn run_sweep(
    resolved: &ResolvedRun,
    volume: &Volume,
    sweep_spec: &str,
    reference: Option<&Path>,
) -> Result<()> {
    if !matches!(resolved.method, Method::Gsr | Method::GsrOblique) {
        return usage("--sweep currently covers the gsr methods (mu1/mu2 grid)");
    }
    let mut mu1_axis = vec![resolved.gsr.mu1];
    let mut mu2_axis = vec![resolved.gsr.mu2];
    for part in sweep_spec.split(',') {
        let Some((key, axis)) = part.split_once('=') else {
            return usage(format!("sweep term '{part}' must be 'name=lo:hi:count'"));
        };
        match key.trim() {
            "mu1" => mu1_axis = parse_sweep_axis(axis)?,
            "mu2" => mu2_axis = parse_sweep_axis(axis)?,
            other => return usage(format!("unknown sweep parameter '{other}'")),
        }
    }
    let reference = match reference {
        Some(path) => Some(read_image(path)?.volume),
        None => None,
    };

    let cells: Vec<(f64, f64)> = mu1_axis
        .iter()
        .flat_map(|&m1| mu2_axis.iter().map(move |&m2| (m1, m2)))
        .collect();

    use rayon::prelude::*;
    let rows: Vec<Result<String>> = cells
        .par_iter()
        .map(|&(mu1, mu2)| {
            let params = GsrParams {
                mu1,
                mu2,
                ..resolved.gsr.clone()
            };
            let (dec, _) = solve_gsr(volume, &params, &resolved.settings)?;
            let report = evaluate(&dec.clean, reference.as_ref(), resolved.theta0)?;
            let cell = |v: Option<f64>| match v {
                Some(x) if x.is_infinite() => "inf".to_string(),
                Some(x) => format!("{x:.6}"),
                None => String::new(),
            };
            Ok(format!(
                "{mu1:.6},{mu2:.6},{},{},{}",
                cell(report.psnr),
                cell(report.ms_ssim),
                cell(report.curtaining)
            ))
        })
        .collect();

    println!("mu1,mu2,psnr,ms_ssim,curtaining");
    for row in rows {
        println!("{}", row?);
    }
    Ok(())
}

fn cmd_metrics(args: MetricsArgs) -> Result<()> {
    let image = read_image(&args.input)?.volume;
    let reference = match &args.reference {
        Some(path) => {
            let r = read_image(path)?.volume;
            if r.dims() != image.dims() {
                return usage(format!(
                    "reference dims {} do not match image dims {}",
                    r.dims(),
                    image.dims()
                ));
            }
            Some(r)
        }
        None => None,
    };
    if !(0.0..std::f64::consts::PI).contains(&args.theta) {
        return usage(format!("theta {} must lie in [0, pi)", args.theta));
    }
    let report = evaluate(&image, reference.as_ref(), args.theta)?;
    print_metric_report(&report, &args.format)
}

fn parse_dims(raw: &str) -> Result<Dims> {
    let parts: Vec<&str> = raw.split('x').collect();
    if parts.len() != 2 && parts.len() != 3 {
        return usage(format!("dims '{raw}' must be NXxNY or NXxNYxNZ"));
    }
    let mut sizes = [1usize; 3];
    for (i, p) in parts.iter().enumerate() {
        sizes[i] = p
            .parse()
            .map_err(|_| anyhow!(UsageError(format!("bad dimension '{p}'"))))?;
    }
    Dims::new(sizes[0], sizes[1], sizes[2]).map_err(|e| anyhow!(UsageError(e.to_string())))
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let dims = parse_dims(&args.dims)?;
    let structure = match args.structure.to_ascii_lowercase().as_str() {
        "blobs" => PhantomStructure::Blobs,
        "spheres" => PhantomStructure::Spheres,
        "cells" => PhantomStructure::Cells,
        other => return usage(format!("unknown structure '{other}'")),
    };
    let length = if args.length.eq_ignore_ascii_case("full") {
        StripeLength::FullExtent
    } else {
        let Some((lo, hi)) = args.length.split_once(':') else {
            return usage(format!(
                "length '{}' must be 'full' or 'min:max'",
                args.length
            ));
        };
        let min: f64 = lo
            .parse()
            .map_err(|_| anyhow!(UsageError(format!("bad length '{lo}'"))))?;
        let max: f64 = hi
            .parse()
            .map_err(|_| anyhow!(UsageError(format!("bad length '{hi}'"))))?;
        StripeLength::Segments { min, max }
    };

    let phantom_spec = PhantomSpec {
        dims,
        structure,
        count: args.count,
        radius_range: (args.radius_min, args.radius_max),
        intensity_range: (args.intensity_min, args.intensity_max),
        background: args.background,
        smoothness: args.smoothness,
    };
    let stripe_spec = StripeSpec {
        direction: args.stripe_theta,
        width_range: (args.width_min, args.width_max),
        length,
        amplitude: args.amplitude,
        density: args.density,
    };

    let clean =
        make_phantom(&phantom_spec, args.seed).map_err(|e| anyhow!(UsageError(e.to_string())))?;
    let stripes = make_stripes(&stripe_spec, dims, args.seed.wrapping_add(1))
        .map_err(|e| anyhow!(UsageError(e.to_string())))?;
    let pair = corrupt(&clean, &stripes).context("corrupting phantom")?;

    write_image(
        &clean,
        &args.out_clean,
        &export_options(&args.out_clean, args.float, false)?,
    )?;
    write_image(
        &pair.volume,
        &args.out_striped,
        &export_options(&args.out_striped, args.float, false)?,
    )?;
    if let Some(path) = &args.out_stripes {
        write_image(&stripes, path, &export_options(path, args.float, true)?)?;
    }

    println!("rng={RNG_ALGORITHM}");
    println!("seed={}", args.seed);
    println!("dims={dims}");
    println!("structure={:?}", structure);
    println!("count={}", args.count);
    println!("radius_range={}..{}", args.radius_min, args.radius_max);
    println!(
        "intensity_range={}..{}",
        args.intensity_min, args.intensity_max
    );
    println!("background={}", args.background);
    println!("smoothness={}", args.smoothness);
    println!("stripe_theta={}", args.stripe_theta);
    println!("width_range={}..{}", args.width_min, args.width_max);
    println!("amplitude={}", args.amplitude);
    println!("density={}", args.density);
    println!("length={}", args.length);
    println!("clamped_fraction={}", pair.clamped_fraction);
    println!("clean={}", args.out_clean.display());
    println!("striped={}", args.out_striped.display());
    Ok(())
}
