//! Command-line front end: synthesis, reconstruction, statistical
//! verification, sweeps, demos, and image scoring.
//!
//! Exit codes: 0 on success, 1 when a verification ran and failed, 2 for
//! argument or input errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};

use pnfc::derain::{self, DerainConfig, Estimator};
use pnfc::error::Error;
use pnfc::harness::{self, measurement_interval_ms, test_scene, BlockSpec};
use pnfc::imgio::pgm::{read_pgm, write_pgm};
use pnfc::imgio::Image;
use pnfc::metrics::{psnr, ssim};
use pnfc::photonstats::{verdict_table, verify_vanishing, CoherenceParams};
use pnfc::rainsim::{
    synth_from_config, ComponentTrace, FrameStack, SynthConfig, MAX_DROP_CROSSING_MS,
};

#[derive(Parser)]
#[command(
    name = "pnfc",
    about = "Rain removal by temporal photon-number fluctuation correlation",
    version
)]
struct Cli {
    /// Worker thread count (also honored via PNFC_THREADS). Output is
    /// identical for every setting; this only controls resource use.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a rainy photon-count frame stack
    Synth(SynthArgs),
    /// Reconstruct a rain-free image from a frame stack
    Derain(DerainArgs),
    /// Check vanishing fluctuation correlations on a synthesized stack
    VerifyStats(VerifyStatsArgs),
    /// Sweep integration times and score every estimator
    Sweep(SweepArgs),
    /// Track consecutive-frame fluctuation across exposures
    DemoFluctuation(DemoFluctuationArgs),
    /// Score image b against reference image a
    Eval(EvalArgs),
}

#[derive(clap::Args)]
struct SynthArgs {
    /// Clean scene PGM (defaults to a built-in 128x128 test scene)
    #[arg(long)]
    clean: Option<PathBuf>,
    /// Synthesis configuration JSON (defaults to the calibrated rain)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for frames and manifest
    #[arg(long)]
    out: PathBuf,
    /// Number of frames
    #[arg(long, default_value_t = 30)]
    frames: usize,
    /// Integration time per frame, milliseconds
    #[arg(long = "T", default_value_t = 30.0)]
    t_ms: f64,
    /// Interval between frame starts, milliseconds (default max(T, 33))
    #[arg(long = "dT")]
    dt_ms: Option<f64>,
    /// Random seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Also persist the noiseless component decomposition
    #[arg(long)]
    trace: bool,
}

#[derive(clap::Args)]
struct DerainArgs {
    /// Stack manifest JSON written by synth
    #[arg(long)]
    stack: PathBuf,
    /// Estimator: pnfc, mean, or median
    #[arg(long)]
    estimator: Option<String>,
    /// Fluctuation suppression strength (pnfc only)
    #[arg(long)]
    kappa: Option<f64>,
    /// Reconstruction configuration JSON (flags override its fields)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output PGM path
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct VerifyStatsArgs {
    /// Stack manifest JSON
    #[arg(long)]
    stack: PathBuf,
    /// Component trace directory written by synth --trace
    #[arg(long)]
    trace: PathBuf,
    /// Fluctuation coherence time, milliseconds
    #[arg(long, default_value_t = MAX_DROP_CROSSING_MS)]
    coherence_ms: f64,
    /// Tile side in pixels for verdict aggregation
    #[arg(long, default_value_t = 8)]
    tile: usize,
    /// Verdict CSV output path (optional)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SweepArgs {
    /// Clean scene PGM (defaults to a built-in 128x128 test scene)
    #[arg(long)]
    clean: Option<PathBuf>,
    /// Synthesis configuration JSON (defaults to the calibrated rain)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for report, curves, and reconstructions
    #[arg(long)]
    out: PathBuf,
    /// Integration times to sweep, milliseconds
    #[arg(long = "T", value_delimiter = ',', default_values_t = vec![20.0, 50.0, 80.0])]
    t_ms: Vec<f64>,
    /// Frames per stack
    #[arg(long, default_value_t = 30)]
    frames: usize,
    /// Seeds, one stack per (T, seed) cell
    #[arg(long, value_delimiter = ',', default_values_t = vec![1, 2, 3, 4, 5])]
    seeds: Vec<u64>,
}

#[derive(clap::Args)]
struct DemoFluctuationArgs {
    /// Clean scene PGM (defaults to a built-in 128x128 test scene)
    #[arg(long)]
    clean: Option<PathBuf>,
    /// Synthesis configuration JSON (defaults to the calibrated rain)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for the CSV and demo images
    #[arg(long)]
    out: PathBuf,
    /// Integration times to compare, milliseconds
    #[arg(long = "T", value_delimiter = ',', default_values_t = vec![20.0, 50.0])]
    t_ms: Vec<f64>,
    /// Frames per exposure
    #[arg(long, default_value_t = 30)]
    frames: usize,
    /// Random seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Observed block as x,y,width,height (default 8x8 at center)
    #[arg(long)]
    block: Option<String>,
}

#[derive(clap::Args)]
struct EvalArgs {
    /// Reference image PGM
    #[arg(long)]
    a: PathBuf,
    /// Image to score, PGM
    #[arg(long)]
    b: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads(cli.threads) {
        return argument_failure(&e);
    }
    let verdict_ok = match run(cli.command) {
        Ok(ok) => ok,
        Err(e) => return argument_failure(&e),
    };
    if verdict_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn argument_failure(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    eprintln!("{}", Cli::command().render_usage());
    eprintln!("run 'pnfc <command> --help' for command options");
    ExitCode::from(2)
}

fn configure_threads(flag: Option<usize>) -> Result<(), Error> {
    let threads = match flag {
        Some(n) => Some(n),
        None => match std::env::var("PNFC_THREADS") {
            Ok(text) => Some(text.parse().map_err(|_| {
                Error::argument(format!("PNFC_THREADS must be a thread count, got {text:?}"))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::argument("thread count must be at least 1"));
        }
        pnfc::parallel::set_threads(n)?;
    }
    Ok(())
}

/// Runs one subcommand. `Ok(false)` means a verification ran and failed.
fn run(command: Command) -> Result<bool, Error> {
    match command {
        Command::Synth(args) => run_synth(args).map(|_| true),
        Command::Derain(args) => run_derain(args).map(|_| true),
        Command::VerifyStats(args) => run_verify_stats(args),
        Command::Sweep(args) => run_sweep(args).map(|_| true),
        Command::DemoFluctuation(args) => run_demo(args).map(|_| true),
        Command::Eval(args) => run_eval(args).map(|_| true),
    }
}

fn load_clean(path: &Option<PathBuf>) -> Result<Image, Error> {
    match path {
        Some(p) => read_pgm(p),
        None => test_scene(128, 128),
    }
}

fn load_synth_config(path: &Option<PathBuf>) -> Result<SynthConfig, Error> {
    match path {
        Some(p) => SynthConfig::load(p),
        None => Ok(SynthConfig::default()),
    }
}

fn run_synth(args: SynthArgs) -> Result<(), Error> {
    let clean = load_clean(&args.clean)?;
    let config = load_synth_config(&args.config)?;
    let dt_ms = args.dt_ms.unwrap_or_else(|| measurement_interval_ms(args.t_ms));
    let out = synth_from_config(&clean, &config, args.frames, args.t_ms, dt_ms, args.seed)?;

    std::fs::create_dir_all(&args.out)?;
    let clean_reference = args.clean.as_ref().map(|p| p.display().to_string());
    let manifest = out.stack.save(&args.out, clean_reference)?;
    println!("frames={}", args.frames);
    println!("t_ms={:?}", args.t_ms);
    println!("dt_ms={dt_ms:?}");
    println!("seed={}", args.seed);
    println!("manifest={}", manifest.display());
    if args.trace {
        let trace_dir = args.out.join("trace");
        out.trace.save(&trace_dir)?;
        println!("trace={}", trace_dir.display());
    }
    Ok(())
}

fn run_derain(args: DerainArgs) -> Result<(), Error> {
    let stack = FrameStack::load(&args.stack)?;
    let mut config = match &args.config {
        Some(p) => DerainConfig::load(p)?,
        None => DerainConfig::default(),
    };
    if let Some(name) = &args.estimator {
        config.estimator = name.parse::<Estimator>()?;
    }
    if let Some(kappa) = args.kappa {
        config.kappa = kappa;
    }
    let recon = derain::reconstruct(&stack, &config)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_pgm(&recon, &args.out)?;
    println!("estimator={}", config.estimator.label());
    println!("kappa={:?}", config.kappa);
    println!("frames={}", stack.n_frames());
    println!("out={}", args.out.display());
    Ok(())
}

fn run_verify_stats(args: VerifyStatsArgs) -> Result<bool, Error> {
    let stack = FrameStack::load(&args.stack)?;
    let trace = ComponentTrace::load(&args.trace)?;
    let coherence = CoherenceParams {
        coherence_time_ms: args.coherence_ms,
        measurement_interval_ms: stack.measurement_interval_ms,
    };
    let verdict = verify_vanishing(&trace, &stack, &coherence, args.tile)?;
    if let Some(path) = &args.out {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        verdict_table(&verdict)?.write(path)?;
        println!("out={}", path.display());
    }
    println!("regime_ok={}", verdict.regime_ok);
    println!("tile_px={}", verdict.tile_px);
    println!("tiles={}", verdict.tiles.len());
    println!("n_pass={}", verdict.n_pass());
    println!("pass_rate={:?}", verdict.pass_rate());
    println!("aggregate_pass={}", verdict.aggregate_pass());
    Ok(verdict.aggregate_pass())
}

fn run_sweep(args: SweepArgs) -> Result<(), Error> {
    let clean = load_clean(&args.clean)?;
    let config = load_synth_config(&args.config)?;
    let output =
        harness::sweep_integration_time(&clean, &config, &args.t_ms, args.frames, &args.seeds)?;
    harness::write_sweep_artifacts(&output, &args.out)?;
    println!("rows={}", output.rows.len());
    println!("out={}", args.out.display());
    for estimator in ["pnfc", "mean", "median", "rainy"] {
        for &(t, value) in &harness::psnr_curve(&output.rows, estimator)? {
            println!("psnr_{estimator}_t{t}={value:?}");
        }
    }
    match harness::inflection_detect(&output.rows, "pnfc", "rainy")? {
        Some(t) => println!("inflection_pnfc_rainy={t:?}"),
        None => println!("inflection_pnfc_rainy=none"),
    }
    Ok(())
}

fn parse_block(text: &str) -> Result<BlockSpec, Error> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 4 {
        return Err(Error::argument(format!(
            "block must be x,y,width,height, got {text:?}"
        )));
    }
    let mut values = [0usize; 4];
    for (slot, part) in values.iter_mut().zip(&parts) {
        *slot = part.trim().parse().map_err(|_| {
            Error::argument(format!("block component {part:?} is not a pixel count"))
        })?;
    }
    Ok(BlockSpec {
        x: values[0],
        y: values[1],
        width: values[2],
        height: values[3],
    })
}

fn run_demo(args: DemoFluctuationArgs) -> Result<(), Error> {
    let clean = load_clean(&args.clean)?;
    let config = load_synth_config(&args.config)?;
    let block = args.block.as_deref().map(parse_block).transpose()?;
    let demo = harness::fluctuation_demo(
        &clean,
        &config,
        &args.t_ms,
        args.frames,
        block,
        args.seed,
    )?;
    harness::write_fluctuation_artifacts(&demo, &args.out)?;
    println!("rows={}", demo.rows.len());
    println!("out={}", args.out.display());
    for &t in &args.t_ms {
        if let Some(mean) = demo.mean_interframe_psnr(t) {
            println!("interframe_psnr_t{t}={mean:?}");
        }
    }
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<(), Error> {
    let a = read_pgm(&args.a)?;
    let b = read_pgm(&args.b)?;
    println!("psnr_db={:?}", psnr(&a, &b, a.peak())?);
    println!("ssim={:?}", ssim(&a, &b, a.peak())?);
    Ok(())
}
