//! The `sse` command-line tool.
//!
//! Exit codes: 0 success, 2 invalid arguments or input, 3 numerical failure
//! (or a replay mismatch), 4 I/O or malformed file.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::baselines::{retrack_block, svd_filter_chunked, DEFAULT_SVD_THRESHOLD};
use crate::bench::{self, BenchContext};
use crate::block::SignalBlock;
use crate::error::{Error, Result};
use crate::io_util::write_atomic;
use crate::manifest::{sidecar_path, strip_csv_columns, OutputRecord, RunManifest, MANIFEST_FILE};
use crate::metrics::{self, Param, ParamSeries};
use crate::signal_model::{BrownConstants, BrownParams};
use crate::simulator::{
    corrupt, make_trajectory_with_cap, NoiseSpec, ParamRanges, ParamTrajectory, TrajectoryKind, DEFAULT_STEP_CAP,
};
use crate::solver::{denoise_stream_with, SolverConfig, StreamOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "sse",
    version,
    about = "Smooth-signal denoising of successive altimetric waveforms"
)]
pub struct Cli {
    /// Seed of every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Key-value file with instrument constants and solver settings.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Problem size of `bench`: signals for table1/std-ratio, runs per SWH for table2/fig4.
    #[arg(long, global = true)]
    pub scale: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a clean track and its speckled observation.
    Generate(GenerateArgs),
    /// Denoise a block chunk by chunk.
    Denoise(DenoiseArgs),
    /// Retrack every signal of a block.
    Estimate(EstimateArgs),
    /// Compare a reconstruction or parameter estimates with ground truth.
    Metrics(MetricsArgs),
    /// Run a benchmark experiment.
    Bench(BenchArgs),
    /// Re-run a recorded command and compare its outputs byte for byte.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrajectoryChoice {
    Constant,
    SmoothRandom,
    File,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "smooth-random")]
    pub traj: TrajectoryChoice,
    /// Parameter CSV for `--traj file`.
    #[arg(long)]
    pub traj_file: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    pub swh: f64,
    #[arg(long, default_value_t = 31.0)]
    pub tau_gates: f64,
    #[arg(long, default_value_t = 130.0)]
    pub pu: f64,
    #[arg(long, default_value_t = 90)]
    pub looks: u32,
    /// Largest per-signal step of smooth-random parameters, as a fraction of their range.
    #[arg(long, default_value_t = DEFAULT_STEP_CAP)]
    pub step_cap: f64,
    /// Also write CSV copies of both blocks.
    #[arg(long)]
    pub csv: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SolverFlags {
    #[arg(long)]
    pub zeta: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub xi: Option<f64>,
    #[arg(long)]
    pub tmax: Option<usize>,
    #[arg(long)]
    pub lengthscale: Option<f64>,
    /// Directory caching correlation bases across runs.
    #[arg(long)]
    pub basis_cache: Option<PathBuf>,
}

impl SolverFlags {
    fn apply(&self, mut cfg: SolverConfig) -> Result<SolverConfig> {
        if let Some(v) = self.zeta {
            cfg.zeta = v;
        }
        if let Some(v) = self.eta {
            cfg.eta = v;
        }
        if let Some(v) = self.xi {
            cfg.xi = v;
        }
        if let Some(v) = self.tmax {
            cfg.t_max = v;
        }
        if let Some(v) = self.lengthscale {
            cfg.lengthscale = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn stream(&self) -> StreamOptions {
        StreamOptions {
            cache_dir: self.basis_cache.clone(),
            serial: false,
        }
    }
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Filter length M.
    #[arg(long, default_value_t = 500)]
    pub chunk: usize,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// CSV of the cost after every sweep (chunk, iteration, cost).
    #[arg(long)]
    pub emit_cost_trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Ls,
    SvdLs,
    SseLs,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "sse-ls")]
    pub method: Method,
    #[arg(long, default_value_t = DEFAULT_SVD_THRESHOLD)]
    pub svd_threshold: f64,
    #[arg(long, default_value_t = 500)]
    pub chunk: usize,
    #[command(flatten)]
    pub solver: SolverFlags,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Clean reference block.
    #[arg(long, requires = "estimate")]
    pub clean: Option<PathBuf>,
    /// Reconstructed block.
    #[arg(long, requires = "clean")]
    pub estimate: Option<PathBuf>,
    /// True parameters (trajectory CSV).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Estimated parameters (output of `estimate`).
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, default_value_t = metrics::STD_20HZ_WINDOW)]
    pub window: usize,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Table1,
    Table2,
    Fig4,
    StdRatio,
}

impl Suite {
    fn file_name(self) -> &'static str {
        match self {
            Suite::Table1 => "table1.csv",
            Suite::Table2 => "table2.csv",
            Suite::Fig4 => "fig4.csv",
            Suite::StdRatio => "std_ratio.csv",
        }
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub solver: SolverFlags,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Where the re-run writes; a temporary directory by default.
    #[arg(long)]
    pub scratch: Option<PathBuf>,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } | Error::Format { .. } => EXIT_IO,
        e if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (without the program name) and runs the command.
pub fn run_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(std::iter::once("sse".to_string()).chain(argv.iter().cloned())) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match run(&cli, argv) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

struct Settings {
    consts: BrownConstants,
    solver: SolverConfig,
}

fn settings(cli: &Cli) -> Result<Settings> {
    match &cli.config {
        Some(path) => Ok(Settings {
            consts: BrownConstants::from_file(path)?,
            solver: SolverConfig::from_file(path)?,
        }),
        None => Ok(Settings {
            consts: BrownConstants::jason2_like(),
            solver: SolverConfig::default(),
        }),
    }
}

pub fn run(cli: &Cli, argv: Vec<String>) -> Result<i32> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidArgument("--threads must be >= 1".into()));
        }
        // A pool already exists when commands run in-process more than once.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let s = settings(cli)?;
    let name = match &cli.command {
        Command::Generate(_) => "generate",
        Command::Denoise(_) => "denoise",
        Command::Estimate(_) => "estimate",
        Command::Metrics(_) => "metrics",
        Command::Bench(_) => "bench",
        Command::Replay(_) => "replay",
    };
    let mut manifest = RunManifest::new(name, argv, cli.seed, s.consts, s.solver);
    let start = Instant::now();
    let manifest_path = match &cli.command {
        Command::Generate(a) => generate(cli, &s, a, &mut manifest)?,
        Command::Denoise(a) => denoise(&s, a, &mut manifest)?,
        Command::Estimate(a) => estimate(&s, a, &mut manifest)?,
        Command::Metrics(a) => metrics_cmd(&s, a, &mut manifest)?,
        Command::Bench(a) => bench_cmd(cli, &s, a, &mut manifest)?,
        Command::Replay(a) => return replay(a),
    };
    manifest
        .timings_ms
        .insert("total".into(), start.elapsed().as_secs_f64() * 1e3);
    manifest.write(&manifest_path)?;
    Ok(EXIT_OK)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn generate(cli: &Cli, s: &Settings, a: &GenerateArgs, manifest: &mut RunManifest) -> Result<PathBuf> {
    let kind = match a.traj {
        TrajectoryChoice::Constant => {
            TrajectoryKind::Constant(BrownParams::with_tau_gates(a.swh, a.tau_gates, a.pu, &s.consts))
        }
        TrajectoryChoice::SmoothRandom => TrajectoryKind::SmoothRandom(ParamRanges::realistic()),
        TrajectoryChoice::File => {
            let path = a
                .traj_file
                .clone()
                .ok_or_else(|| Error::InvalidArgument("--traj file needs --traj-file".into()))?;
            manifest.inputs.push(path.clone());
            TrajectoryKind::File(path)
        }
    };
    let traj = make_trajectory_with_cap(&kind, a.n, cli.seed, &s.consts, a.step_cap)?;
    let clean = traj.clean_block(&s.consts)?;
    let noisy = corrupt(&clean, &NoiseSpec::speckle(a.looks, cli.seed))?;
    ensure_dir(&a.out_dir)?;
    clean.write(&a.out_dir.join("clean.sse1"))?;
    noisy.write(&a.out_dir.join("noisy.sse1"))?;
    traj.write_csv(&a.out_dir.join("trajectory.csv"))?;
    let mut files = vec!["clean.sse1".to_string(), "noisy.sse1".into(), "trajectory.csv".into()];
    if a.csv {
        clean.write_csv(&a.out_dir.join("clean.csv"))?;
        noisy.write_csv(&a.out_dir.join("noisy.csv"))?;
        files.extend(["clean.csv".to_string(), "noisy.csv".into()]);
    }
    manifest.outputs.push(OutputRecord {
        flag: "--out-dir".into(),
        path: a.out_dir.clone(),
        files,
        volatile_columns: vec![],
    });
    println!(
        "generated {}x{} block, input RSNR {:.2} dB",
        clean.gates(),
        clean.signals(),
        metrics::rsnr(&clean, &noisy)?
    );
    Ok(a.out_dir.join(MANIFEST_FILE))
}

fn single_output(flag: &str, path: &Path) -> OutputRecord {
    OutputRecord {
        flag: flag.into(),
        path: path.to_path_buf(),
        files: vec![],
        volatile_columns: vec![],
    }
}

fn denoise(s: &Settings, a: &DenoiseArgs, manifest: &mut RunManifest) -> Result<PathBuf> {
    let cfg = a.solver.apply(s.solver)?;
    manifest.solver = cfg;
    manifest.inputs.push(a.input.clone());
    let y = SignalBlock::read(&a.input)?;
    let start = Instant::now();
    let out = denoise_stream_with(&y, a.chunk, &cfg, &a.solver.stream())?;
    manifest
        .timings_ms
        .insert("denoise".into(), start.elapsed().as_secs_f64() * 1e3);
    out.s_hat.write(&a.output)?;
    manifest.outputs.push(single_output("--output", &a.output));
    if let Some(trace) = &a.emit_cost_trace {
        write_atomic(trace, |w| {
            writeln!(w, "chunk,iteration,cost")?;
            for (c, report) in out.chunks.iter().enumerate() {
                for (t, cost) in report.cost_trace.iter().enumerate() {
                    writeln!(w, "{c},{t},{cost:e}")?;
                }
            }
            Ok(())
        })?;
        manifest.outputs.push(single_output("--emit-cost-trace", trace));
    }
    let converged = out
        .chunks
        .iter()
        .filter(|c| c.stop_reason == crate::solver::StopReason::Converged)
        .count();
    println!(
        "denoised {} signals in {} chunks ({converged} converged)",
        y.signals(),
        out.chunks.len()
    );
    Ok(sidecar_path(&a.output))
}

fn estimate(s: &Settings, a: &EstimateArgs, manifest: &mut RunManifest) -> Result<PathBuf> {
    let cfg = a.solver.apply(s.solver)?;
    manifest.solver = cfg;
    manifest.inputs.push(a.input.clone());
    let y = SignalBlock::read(&a.input)?;
    let filtered = match a.method {
        Method::Ls => y,
        Method::SvdLs => svd_filter_chunked(&y, a.svd_threshold, a.chunk)?,
        Method::SseLs => denoise_stream_with(&y, a.chunk, &cfg, &a.solver.stream())?.s_hat,
    };
    let fits = retrack_block(&filtered, &s.consts)?;
    write_atomic(&a.output, |w| {
        writeln!(w, "index,swh_m,tau_m,pu,residual,converged")?;
        for (i, f) in fits.iter().enumerate() {
            writeln!(
                w,
                "{i},{},{},{},{},{}",
                f.params.swh, f.params.tau, f.params.pu, f.residual_norm, f.converged
            )?;
        }
        Ok(())
    })?;
    manifest.outputs.push(single_output("--output", &a.output));
    println!(
        "retracked {} signals ({} converged)",
        fits.len(),
        fits.iter().filter(|f| f.converged).count()
    );
    Ok(sidecar_path(&a.output))
}

fn metrics_cmd(_s: &Settings, a: &MetricsArgs, manifest: &mut RunManifest) -> Result<PathBuf> {
    let mut rows: Vec<(String, String, f64)> = Vec::new();
    if let (Some(clean), Some(est)) = (&a.clean, &a.estimate) {
        manifest.inputs.extend([clean.clone(), est.clone()]);
        let c = SignalBlock::read(clean)?;
        let e = SignalBlock::read(est)?;
        rows.push(("rsnr_db".into(), String::new(), metrics::rsnr(&c, &e)?));
    }
    if let Some(params) = &a.params {
        manifest.inputs.push(params.clone());
        let estimates = ParamTrajectory::read_csv(params)?;
        let truth = match &a.truth {
            Some(t) => {
                manifest.inputs.push(t.clone());
                Some(ParamTrajectory::read_csv(t)?)
            }
            None => None,
        };
        let has_truth = truth.is_some();
        let series = ParamSeries::new(estimates, truth)?;
        for p in Param::ALL {
            let name = p.name().to_string();
            if has_truth {
                rows.push(("rmse".into(), name.clone(), metrics::rmse(&series, p)?));
                rows.push(("bias".into(), name.clone(), metrics::bias(&series, p)?));
            }
            rows.push(("std".into(), name.clone(), metrics::std(&series, p)?));
            rows.push(("std_20hz".into(), name, metrics::std_20hz(&series, p, a.window)?));
        }
    } else if a.truth.is_some() {
        return Err(Error::InvalidArgument("--truth needs --params".into()));
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument(
            "nothing to compare: give --clean/--estimate and/or --params".into(),
        ));
    }
    write_atomic(&a.output, |w| {
        writeln!(w, "metric,param,value")?;
        for (m, p, v) in &rows {
            writeln!(w, "{m},{p},{v}")?;
        }
        Ok(())
    })?;
    manifest.outputs.push(single_output("--output", &a.output));
    for (m, p, v) in &rows {
        println!("{m:>9} {p:>4} {v:.6}");
    }
    Ok(sidecar_path(&a.output))
}

fn bench_cmd(cli: &Cli, s: &Settings, a: &BenchArgs, manifest: &mut RunManifest) -> Result<PathBuf> {
    let cfg = a.solver.apply(s.solver)?;
    manifest.solver = cfg;
    let mut ctx = BenchContext::new(s.consts, cfg, cli.seed);
    ctx.stream = a.solver.stream();
    ensure_dir(&a.out_dir)?;
    let path = a.out_dir.join(a.suite.file_name());
    let mut volatile = vec![];
    match a.suite {
        Suite::Table1 => {
            let n = cli.scale.unwrap_or(bench::TABLE1_SIGNALS);
            let report = bench::table1(&ctx, n, &bench::TABLE1_LENGTHS)?;
            bench::write_table1_csv(&path, &report)?;
            volatile.push("ms_per_signal".to_string());
            println!("input RSNR {:.2} dB", report.input_rsnr_db);
            for r in &report.rows {
                println!(
                    "M={:<5} RSNR {:.2} dB  {:.3} ms/signal",
                    r.m, r.rsnr_db, r.ms_per_signal
                );
            }
        }
        Suite::Table2 => {
            let runs = cli.scale.unwrap_or(bench::MONTE_CARLO_RUNS);
            let rows = bench::table2(&ctx, runs, &bench::SWH_GRID)?;
            bench::write_table2_csv(&path, &rows)?;
            for r in &rows {
                println!("SWH {:>3} m  SVD {:.2} dB  SSE {:.2} dB", r.swh, r.rsnr_svd, r.rsnr_sse);
            }
        }
        Suite::Fig4 => {
            let runs = cli.scale.unwrap_or(bench::MONTE_CARLO_RUNS);
            let rows = bench::fig4(&ctx, runs, &bench::SWH_GRID)?;
            bench::write_fig4_csv(&path, &rows)?;
            for r in &rows {
                println!(
                    "SWH {:>3} m  RMSE(SWH) LS {:.3} SVD {:.3} SSE {:.3}",
                    r.swh, r.ls.swh, r.svd.swh, r.sse.swh
                );
            }
        }
        Suite::StdRatio => {
            let n = cli.scale.unwrap_or(bench::TABLE1_SIGNALS);
            let report = bench::std_ratio(&ctx, n)?;
            bench::write_std_ratio_csv(&path, &report)?;
            for p in Param::ALL {
                println!(
                    "{:>4}: LS / SSE-LS STD at 20 Hz = {:.2}",
                    p.name(),
                    report.improvement(p)
                );
            }
        }
    }
    manifest.outputs.push(OutputRecord {
        flag: "--out-dir".into(),
        path: a.out_dir.clone(),
        files: vec![a.suite.file_name().into()],
        volatile_columns: volatile,
    });
    Ok(a.out_dir.join(MANIFEST_FILE))
}

/// Replaces the value following `flag` (or `flag=value`) in `argv`.
fn redirect(argv: &[String], flag: &str, to: &Path) -> Option<Vec<String>> {
    let mut out = argv.to_vec();
    let target = to.to_string_lossy().into_owned();
    for i in 0..out.len() {
        if out[i] == flag && i + 1 < out.len() {
            out[i + 1] = target;
            return Some(out);
        }
        if out[i].starts_with(&format!("{flag}=")) {
            out[i] = format!("{flag}={target}");
            return Some(out);
        }
    }
    None
}

fn same_content(a: &Path, b: &Path, volatile: &[String]) -> Result<bool> {
    let ra = std::fs::read(a).map_err(|e| Error::io(a, e))?;
    let rb = std::fs::read(b).map_err(|e| Error::io(b, e))?;
    if volatile.is_empty() {
        return Ok(ra == rb);
    }
    let (ta, tb) = (String::from_utf8_lossy(&ra), String::from_utf8_lossy(&rb));
    Ok(strip_csv_columns(&ta, volatile) == strip_csv_columns(&tb, volatile))
}

fn replay(a: &ReplayArgs) -> Result<i32> {
    let manifest = RunManifest::read(&a.manifest)?;
    let tmp;
    let scratch = match &a.scratch {
        Some(dir) => {
            ensure_dir(dir)?;
            dir.clone()
        }
        None => {
            tmp = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
            tmp.path().to_path_buf()
        }
    };
    let mut argv = manifest.argv.clone();
    let mut pairs: Vec<(PathBuf, PathBuf, Vec<String>)> = Vec::new();
    for (i, out) in manifest.outputs.iter().enumerate() {
        let name = out
            .path
            .file_name()
            .map(|n| n.to_os_string())
            .unwrap_or_else(|| "out".into());
        let fresh = scratch.join(format!("{i}")).join(name);
        if let Some(parent) = fresh.parent() {
            ensure_dir(parent)?;
        }
        argv = redirect(&argv, &out.flag, &fresh)
            .ok_or_else(|| Error::format(&a.manifest, format!("argv has no {} flag", out.flag)))?;
        if out.files.is_empty() {
            pairs.push((out.path.clone(), fresh, out.volatile_columns.clone()));
        } else {
            for f in &out.files {
                pairs.push((out.path.join(f), fresh.join(f), out.volatile_columns.clone()));
            }
        }
    }
    let code = run_args(argv);
    if code != EXIT_OK {
        return Ok(code);
    }
    let mut all_same = true;
    for (orig, fresh, volatile) in &pairs {
        let same = same_content(orig, fresh, volatile)?;
        all_same &= same;
        println!("{} {}", if same { "identical" } else { "DIFFERS  " }, orig.display());
    }
    Ok(if all_same { EXIT_OK } else { EXIT_NUMERICAL })
}
