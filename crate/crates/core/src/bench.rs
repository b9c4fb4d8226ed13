//! Benchmark experiments on synthetic tracks and their CSV reports.
//!
//! * `table1`: one smooth-random track of N signals, denoised with several
//!   filter lengths.
//! * `table2`: for each SWH, `runs` independent noisy echoes of a fixed
//!   (SWH, τ = 31 gates, Pu = 130) waveform, filtered by SVD and SSE.
//! * `fig4`: the same setup, followed by LS retracking of the raw, SVD-filtered
//!   and SSE-filtered echoes.
//! * `std_ratio`: 20-sample STD of retracked SWH on a long smooth-random track.
//!
//! Noise for the experiment at grid index `i` is seeded with `seed + 1 + i`;
//! trajectories use `seed`.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::baselines::{retrack_block, svd_filter_chunked, FitResult, DEFAULT_SVD_THRESHOLD};
use crate::block::SignalBlock;
use crate::error::Result;
use crate::io_util::write_atomic;
use crate::metrics::{self, rmse, rsnr, Param, ParamSeries};
use crate::signal_model::{BrownConstants, BrownParams};
use crate::simulator::{corrupt, make_trajectory, NoiseSpec, ParamRanges, TrajectoryKind};
use crate::solver::{denoise_stream_with, SolverConfig, StreamOptions};

pub const TABLE1_LENGTHS: [usize; 7] = [50, 100, 250, 500, 1000, 2500, 5000];
pub const TABLE1_SIGNALS: usize = 5000;
pub const SWH_GRID: [f64; 9] = [0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
pub const MONTE_CARLO_RUNS: usize = 500;
pub const FILTER_LENGTH: usize = 500;
pub const LOOKS: u32 = 90;
pub const FIXED_TAU_GATES: f64 = 31.0;
pub const FIXED_PU: f64 = 130.0;

#[derive(Debug, Clone)]
pub struct BenchContext {
    pub consts: BrownConstants,
    pub solver: SolverConfig,
    pub seed: u64,
    pub stream: StreamOptions,
}

impl BenchContext {
    pub fn new(consts: BrownConstants, solver: SolverConfig, seed: u64) -> Self {
        Self {
            consts,
            solver,
            seed,
            stream: StreamOptions::default(),
        }
    }

    fn noise(&self, index: usize) -> NoiseSpec {
        NoiseSpec::speckle(LOOKS, self.seed.wrapping_add(1 + index as u64))
    }

    fn sse(&self, noisy: &SignalBlock, chunk: usize) -> Result<SignalBlock> {
        Ok(denoise_stream_with(noisy, chunk, &self.solver, &self.stream)?.s_hat)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Table1Row {
    pub m: usize,
    pub rsnr_db: f64,
    pub ms_per_signal: f64,
    pub mean_iterations: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Table1Report {
    pub signals: usize,
    pub input_rsnr_db: f64,
    pub rows: Vec<Table1Row>,
}

/// Filter lengths longer than the track are skipped.
pub fn table1(ctx: &BenchContext, signals: usize, lengths: &[usize]) -> Result<Table1Report> {
    let kind = TrajectoryKind::SmoothRandom(ParamRanges::realistic());
    let traj = make_trajectory(&kind, signals, ctx.seed, &ctx.consts)?;
    let clean = traj.clean_block(&ctx.consts)?;
    let noisy = corrupt(&clean, &ctx.noise(0))?;
    let input_rsnr_db = rsnr(&clean, &noisy)?;
    let mut rows = Vec::new();
    for &m in lengths.iter().filter(|&&m| m <= signals) {
        let start = Instant::now();
        let out = denoise_stream_with(&noisy, m, &ctx.solver, &ctx.stream)?;
        let elapsed = start.elapsed().as_secs_f64();
        let mean_iterations = out.chunks.iter().map(|c| c.iterations as f64).sum::<f64>() / out.chunks.len() as f64;
        rows.push(Table1Row {
            m,
            rsnr_db: rsnr(&clean, &out.s_hat)?,
            ms_per_signal: 1e3 * elapsed / signals as f64,
            mean_iterations,
        });
    }
    Ok(Table1Report {
        signals,
        input_rsnr_db,
        rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Table2Row {
    pub swh: f64,
    pub rsnr_input: f64,
    pub rsnr_svd: f64,
    pub rsnr_sse: f64,
}

struct SwhCase {
    truth: Vec<BrownParams>,
    clean: SignalBlock,
    noisy: SignalBlock,
    svd: SignalBlock,
    sse: SignalBlock,
}

fn swh_case(ctx: &BenchContext, index: usize, swh: f64, runs: usize) -> Result<SwhCase> {
    let p = BrownParams::with_tau_gates(swh, FIXED_TAU_GATES, FIXED_PU, &ctx.consts);
    let traj = make_trajectory(&TrajectoryKind::Constant(p), runs, ctx.seed, &ctx.consts)?;
    let clean = traj.clean_block(&ctx.consts)?;
    let noisy = corrupt(&clean, &ctx.noise(index))?;
    let chunk = FILTER_LENGTH.min(runs);
    let svd = svd_filter_chunked(&noisy, DEFAULT_SVD_THRESHOLD, chunk)?;
    let sse = ctx.sse(&noisy, chunk)?;
    Ok(SwhCase {
        truth: traj.params,
        clean,
        noisy,
        svd,
        sse,
    })
}

pub fn table2(ctx: &BenchContext, runs: usize, swhs: &[f64]) -> Result<Vec<Table2Row>> {
    swhs.iter()
        .enumerate()
        .map(|(i, &swh)| {
            let case = swh_case(ctx, i, swh, runs)?;
            Ok(Table2Row {
                swh,
                rsnr_input: rsnr(&case.clean, &case.noisy)?,
                rsnr_svd: rsnr(&case.clean, &case.svd)?,
                rsnr_sse: rsnr(&case.clean, &case.sse)?,
            })
        })
        .collect()
}

/// RMSE of (SWH, τ, Pu) for one processing chain.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Rmse3 {
    pub swh: f64,
    pub tau: f64,
    pub pu: f64,
}

impl Rmse3 {
    fn of(fits: &[FitResult], truth: &[BrownParams]) -> Result<Self> {
        let series = ParamSeries::new(fits.iter().map(|f| f.params).collect(), Some(truth.to_vec()))?;
        Ok(Self {
            swh: rmse(&series, Param::Swh)?,
            tau: rmse(&series, Param::Tau)?,
            pu: rmse(&series, Param::Pu)?,
        })
    }

    pub fn get(&self, p: Param) -> f64 {
        match p {
            Param::Swh => self.swh,
            Param::Tau => self.tau,
            Param::Pu => self.pu,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig4Row {
    pub swh: f64,
    pub ls: Rmse3,
    pub svd: Rmse3,
    pub sse: Rmse3,
}

pub fn fig4(ctx: &BenchContext, runs: usize, swhs: &[f64]) -> Result<Vec<Fig4Row>> {
    swhs.iter()
        .enumerate()
        .map(|(i, &swh)| {
            let case = swh_case(ctx, i, swh, runs)?;
            let fit = |b: &SignalBlock| -> Result<Rmse3> { Rmse3::of(&retrack_block(b, &ctx.consts)?, &case.truth) };
            Ok(Fig4Row {
                swh,
                ls: fit(&case.noisy)?,
                svd: fit(&case.svd)?,
                sse: fit(&case.sse)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct StdRatioReport {
    pub signals: usize,
    pub std20_ls: [f64; 3],
    pub std20_svd: [f64; 3],
    pub std20_sse: [f64; 3],
}

impl StdRatioReport {
    /// LS over SSE-LS 20-sample STD.
    pub fn improvement(&self, p: Param) -> f64 {
        self.std20_ls[p.index()] / self.std20_sse[p.index()]
    }
}

pub fn std_ratio(ctx: &BenchContext, signals: usize) -> Result<StdRatioReport> {
    let kind = TrajectoryKind::SmoothRandom(ParamRanges::realistic());
    let traj = make_trajectory(&kind, signals, ctx.seed, &ctx.consts)?;
    let clean = traj.clean_block(&ctx.consts)?;
    let noisy = corrupt(&clean, &ctx.noise(0))?;
    let chunk = FILTER_LENGTH.min(signals);
    let std20 = |b: &SignalBlock| -> Result<[f64; 3]> {
        let fits = retrack_block(b, &ctx.consts)?;
        let series = ParamSeries::new(fits.iter().map(|f| f.params).collect(), None)?;
        let mut out = [0.0; 3];
        for p in Param::ALL {
            out[p.index()] = metrics::std_20hz(&series, p, metrics::STD_20HZ_WINDOW)?;
        }
        Ok(out)
    };
    Ok(StdRatioReport {
        signals,
        std20_ls: std20(&noisy)?,
        std20_svd: std20(&svd_filter_chunked(&noisy, DEFAULT_SVD_THRESHOLD, chunk)?)?,
        std20_sse: std20(&ctx.sse(&noisy, chunk)?)?,
    })
}

pub fn write_table1_csv(path: &Path, report: &Table1Report) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "m,rsnr_db,ms_per_signal,mean_iterations,input_rsnr_db")?;
        for r in &report.rows {
            writeln!(
                w,
                "{},{:.6},{:.6},{:.3},{:.6}",
                r.m, r.rsnr_db, r.ms_per_signal, r.mean_iterations, report.input_rsnr_db
            )?;
        }
        Ok(())
    })
}

pub fn write_table2_csv(path: &Path, rows: &[Table2Row]) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "swh,rsnr_input,rsnr_svd,rsnr_sse")?;
        for r in rows {
            writeln!(w, "{},{:.6},{:.6},{:.6}", r.swh, r.rsnr_input, r.rsnr_svd, r.rsnr_sse)?;
        }
        Ok(())
    })
}

pub fn write_fig4_csv(path: &Path, rows: &[Fig4Row]) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(
            w,
            "swh,rmse_swh_ls,rmse_swh_svd,rmse_swh_sse,rmse_tau_ls,rmse_tau_svd,rmse_tau_sse,rmse_pu_ls,rmse_pu_svd,rmse_pu_sse"
        )?;
        for r in rows {
            write!(w, "{}", r.swh)?;
            for p in Param::ALL {
                write!(w, ",{:.8},{:.8},{:.8}", r.ls.get(p), r.svd.get(p), r.sse.get(p))?;
            }
            writeln!(w)?;
        }
        Ok(())
    })
}

pub fn write_std_ratio_csv(path: &Path, report: &StdRatioReport) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "param,std20_ls,std20_svd,std20_sse,ls_over_sse")?;
        for p in Param::ALL {
            let i = p.index();
            writeln!(
                w,
                "{},{:.8},{:.8},{:.8},{:.4}",
                p.name(),
                report.std20_ls[i],
                report.std20_svd[i],
                report.std20_sse[i],
                report.improvement(p)
            )?;
        }
        Ok(())
    })
}
