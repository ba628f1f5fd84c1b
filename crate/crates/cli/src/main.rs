//! `wbarray`: synthesize manifolds, design grating-lobe suppressing
//! operators and evaluate spatial correlation maps from the command line.

mod sidecar;

use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wbarray::correlation::{
    correlation_function_from_steering, correlation_function_with_operator_from_steering,
    effective_scf_from_steering, peak_sidelobe_level, scf_from_steering, uniform_angle_grid,
};
use wbarray::design::{design_operator, LogEntry};
use wbarray::manifold::{is_azimuth, steering_with_delay, synthesize_channel};
use wbarray::persist::{parse_config, parse_config_str, read_map_csv, read_tensor, write_map_csv, write_tensor, MapCsv, RunConfig};
use wbarray::{ComplexMultiArray, Error, OperatorTensor, PathParams};
use wbarray::Complex64;

use sidecar::{Band, ManifoldMeta};

const REFERENCE_CONFIG: &str = include_str!("../../../configs/reference.conf");

#[derive(Parser)]
#[command(name = "wbarray", version, about = "Wideband array manifolds and grating-lobe suppressing operators")]
struct Cli {
    /// Overrides the seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run configuration; the built-in reference array when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// No progress on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the steering tensor [n_freq, n_elements, n_angles] and a JSON sidecar.
    Manifold(ManifoldArgs),
    /// Fit an operator mapping the field band onto the target band.
    Design(DesignArgs),
    /// Spatial correlation map as CSV.
    Scf(ScfArgs),
    /// Correlation function of a single-path snapshot as CSV.
    Corr(CorrArgs),
    /// Peak side-lobe level of a map CSV, in dB, on stdout.
    Psl(PslArgs),
}

#[derive(Args)]
struct ManifoldArgs {
    #[arg(long)]
    out: PathBuf,
    /// Number of uniformly spaced azimuths over (-pi, pi].
    #[arg(long, default_value_t = 720)]
    angles: usize,
    #[arg(long, value_enum, default_value_t = Band::Field)]
    band: Band,
}

#[derive(Args)]
struct DesignArgs {
    /// Operator tensor.
    #[arg(long)]
    out: PathBuf,
    /// Training log CSV.
    #[arg(long)]
    log: PathBuf,
    /// Rolling checkpoint; defaults to `<out>.ckpt`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Overrides the number of batches from the config.
    #[arg(long)]
    batches: Option<u64>,
}

#[derive(Args)]
struct ScfArgs {
    /// Steering tensor written by `manifold`.
    #[arg(long)]
    manifold: PathBuf,
    #[arg(long)]
    operator: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Emit the correlation-coefficient form.
    #[arg(long)]
    normalized: bool,
}

#[derive(Args)]
struct CorrArgs {
    #[arg(long)]
    manifold: PathBuf,
    #[arg(long)]
    operator: Option<PathBuf>,
    /// Source azimuth, radians.
    #[arg(long, allow_hyphen_values = true)]
    theta: f64,
    /// Normalized delay in (0, 1].
    #[arg(long, default_value_t = 0.3)]
    tau: f64,
    /// Per-entry SNR; `inf` disables noise.
    #[arg(long, default_value = "inf", allow_hyphen_values = true)]
    snr_db: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PslArgs {
    /// Map CSV written by `scf` or `corr`.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 5.0)]
    halfwidth_deg: f64,
}

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Run(Error::Config { .. } | Error::ConfigFile { .. }) => 2,
            Failure::Run(Error::Io(_)) => 4,
            Failure::Run(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Run(e) => write!(f, "{e}"),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

struct Ctx {
    seed: Option<u64>,
    config: Option<PathBuf>,
    quiet: bool,
}

impl Ctx {
    fn run_config(&self) -> Result<RunConfig, Failure> {
        let mut cfg = match &self.config {
            Some(p) => parse_config(p)?,
            None => parse_config_str(REFERENCE_CONFIG)?,
        };
        if let Some(s) = self.seed {
            cfg.design.seed = s;
        }
        Ok(cfg)
    }

    fn progress(&self, msg: std::fmt::Arguments<'_>) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Ctx {
        seed: cli.seed,
        config: cli.config,
        quiet: cli.quiet,
    };
    let result = (|| {
        if cli.threads == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| usage(format!("thread pool: {e}")))?;
        match cli.command {
            Command::Manifold(a) => cmd_manifold(&ctx, a),
            Command::Design(a) => cmd_design(&ctx, a),
            Command::Scf(a) => cmd_scf(&ctx, a),
            Command::Corr(a) => cmd_corr(&ctx, a),
            Command::Psl(a) => cmd_psl(a),
        }
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("wbarray: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}

fn cmd_manifold(ctx: &Ctx, a: ManifoldArgs) -> Outcome {
    if a.angles == 0 {
        return Err(usage("--angles must be at least 1"));
    }
    let cfg = ctx.run_config()?;
    let angles = uniform_angle_grid(a.angles);
    let manifold = match a.band {
        Band::Field => cfg.field_manifold()?,
        Band::Target => cfg.target_manifold()?,
    };
    let grid = manifold.steering_grid(&angles)?;
    write_tensor(&a.out, &grid).map_err(|e| at(&a.out, e))?;
    ManifoldMeta::new(&cfg, a.band, angles)?.write(&sidecar::path_for(&a.out))?;
    ctx.progress(format_args!("wrote {:?} steering tensor to {}", grid.dims(), a.out.display()));
    Ok(())
}

/// Writes to a sibling temporary file first so a crash never leaves a torn checkpoint.
fn write_tensor_atomic(path: &Path, t: &ComplexMultiArray) -> wbarray::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    write_tensor(&tmp, t)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn cmd_design(ctx: &Ctx, a: DesignArgs) -> Outcome {
    let mut cfg = ctx.run_config()?;
    if let Some(k) = a.batches {
        cfg.design.batches = k;
    }
    cfg.design.validate()?;
    let ckpt = a.checkpoint.clone().unwrap_or_else(|| {
        let mut s = a.out.as_os_str().to_owned();
        s.push(".ckpt");
        PathBuf::from(s)
    });
    let field = cfg.field_manifold()?;
    let target = cfg.target_manifold()?;

    let mut log = BufWriter::new(File::create(&a.log).map_err(|e| at(&a.log, e.into()))?);
    writeln!(log, "iteration,heldout_error,batch_error").map_err(Error::from)?;
    let total = cfg.design.batches;
    let mut sink = |e: &LogEntry, op: &OperatorTensor| -> wbarray::Result<()> {
        writeln!(log, "{},{:.16e},{:.16e}", e.iteration, e.heldout_error, e.batch_error)?;
        log.flush()?;
        write_tensor_atomic(&ckpt, op.tensor())?;
        ctx.progress(format_args!(
            "{}/{total} held-out {:.6e} batch {:.6e}",
            e.iteration, e.heldout_error, e.batch_error
        ));
        Ok(())
    };
    let (op, trace) = design_operator(&field, &target, &cfg.design, &mut sink)?;
    write_tensor(&a.out, op.tensor()).map_err(|e| at(&a.out, e))?;
    ctx.progress(format_args!(
        "initial held-out {:.6e}; operator written to {}",
        trace.initial_heldout_error,
        a.out.display()
    ));
    Ok(())
}

struct LoadedManifold {
    grid: ComplexMultiArray,
    meta: ManifoldMeta,
}

/// Names the file in I/O errors, which otherwise only carry the OS message.
fn at(path: &Path, e: Error) -> Error {
    match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    }
}

fn load_manifold(path: &Path) -> Result<LoadedManifold, Failure> {
    let grid = read_tensor(path).map_err(|e| at(path, e))?;
    let side = sidecar::path_for(path);
    let meta = ManifoldMeta::read(&side).map_err(|e| at(&side, e))?;
    if grid.dims() != meta.dims.as_slice() || meta.angles.len() != *meta.dims.last().unwrap_or(&0) {
        return Err(Error::Dimension(format!(
            "tensor {:?} does not match its sidecar {:?}",
            grid.dims(),
            meta.dims
        ))
        .into());
    }
    Ok(LoadedManifold { grid, meta })
}

fn load_operator(path: &Option<PathBuf>) -> Result<Option<OperatorTensor>, Failure> {
    match path {
        None => Ok(None),
        Some(p) => Ok(Some(OperatorTensor::new(read_tensor(p).map_err(|e| at(p, e))?)?)),
    }
}

fn cmd_scf(ctx: &Ctx, a: ScfArgs) -> Outcome {
    let m = load_manifold(&a.manifold)?;
    let op = load_operator(&a.operator)?;
    let angles = &m.meta.angles;
    let map = match &op {
        None => scf_from_steering(&m.grid, angles, false)?,
        Some(op) => effective_scf_from_steering(&m.grid, op, angles, false)?,
    };
    let map = if a.normalized { map.normalized() } else { map };
    write_map_csv(&a.out, &map).map_err(|e| at(&a.out, e))?;
    ctx.progress(format_args!("wrote {}x{} map to {}", map.len(), map.len(), a.out.display()));
    Ok(())
}

fn cmd_corr(ctx: &Ctx, a: CorrArgs) -> Outcome {
    if !is_azimuth(a.theta) {
        return Err(usage(format!("--theta {} outside (-pi, pi]", a.theta)));
    }
    if !(a.tau > 0.0 && a.tau <= 1.0) {
        return Err(usage(format!("--tau {} outside (0, 1]", a.tau)));
    }
    if a.snr_db.is_nan() {
        return Err(usage("--snr-db must be a number or inf"));
    }
    let m = load_manifold(&a.manifold)?;
    let op = load_operator(&a.operator)?;
    let manifold = m.meta.manifold()?;
    let seed = ctx.seed.unwrap_or(m.meta.run_config()?.design.seed);

    let clean = steering_with_delay(&manifold, a.theta, a.tau)?;
    let power = clean.norm_sqr() / clean.len() as f64;
    let noise_variance = if a.snr_db == f64::INFINITY {
        0.0
    } else {
        power / 10f64.powf(a.snr_db / 10.0)
    };
    let path = PathParams {
        gamma: Complex64::new(1.0, 0.0),
        theta: a.theta,
        tau: a.tau,
    };
    let x = synthesize_channel(&manifold, &[path], noise_variance, seed)?;

    let angles = &m.meta.angles;
    let map = match &op {
        None => correlation_function_from_steering(&x, &m.grid, manifold.grid(), angles, a.tau)?,
        Some(op) => correlation_function_with_operator_from_steering(&x, op, &m.grid, manifold.grid(), angles, a.tau)?,
    };
    write_map_csv(&a.out, &map).map_err(|e| at(&a.out, e))?;
    ctx.progress(format_args!(
        "peak at {:.6} rad ({} angles) written to {}",
        map.peak_angle(),
        angles.len(),
        a.out.display()
    ));
    Ok(())
}

fn cmd_psl(a: PslArgs) -> Outcome {
    if !(a.halfwidth_deg > 0.0 && a.halfwidth_deg < 360.0) {
        return Err(usage(format!("--halfwidth-deg {} must lie in (0, 360)", a.halfwidth_deg)));
    }
    let hw = a.halfwidth_deg * PI / 180.0;
    let psl = match read_map_csv(&a.input).map_err(|e| at(&a.input, e))? {
        MapCsv::Scf(m) => peak_sidelobe_level(&m, hw)?,
        MapCsv::Corr(m) => peak_sidelobe_level(&m, hw)?,
    };
    println!("{psl:.4}");
    Ok(())
}
