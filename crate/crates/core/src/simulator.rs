//! Synthetic altimetric tracks: smooth parameter trajectories, clean blocks and
//! speckle-corrupted observations.
//!
//! Random streams are ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded with
//! `seed_from_u64(seed)`; the stream id selects the consumer. Noise for column
//! `m` uses stream `m`, trajectory parameter `i` uses stream
//! `TRAJECTORY_STREAM + i`. Any column can therefore be regenerated on its own,
//! and serial and parallel generation agree bit for bit.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use crate::block::SignalBlock;
use crate::error::{Error, Result};
use crate::io_util::write_atomic;
use crate::metrics;
use crate::signal_model::{brown_waveform, BrownConstants, BrownParams};

pub const TRAJECTORY_STREAM: u64 = 1 << 63;

/// Moving-average length applied to the random walk of smooth trajectories.
pub const SMOOTHING_WINDOW: usize = 50;

/// Default per-sample step cap, as a fraction of each parameter's range.
pub const DEFAULT_STEP_CAP: f64 = 0.02;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Closed intervals for SWH (m), τ (m) and Pu.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRanges {
    pub swh: [f64; 2],
    pub tau: [f64; 2],
    pub pu: [f64; 2],
}

impl ParamRanges {
    /// Ranges of the realistic filter-length experiment.
    pub fn realistic() -> Self {
        Self {
            swh: [3.4, 5.4],
            tau: [14.3, 15.0],
            pu: [150.0, 190.0],
        }
    }

    fn as_array(&self) -> [[f64; 2]; 3] {
        [self.swh, self.tau, self.pu]
    }

    fn validate(&self, consts: &BrownConstants) -> Result<()> {
        for (name, [lo, hi]) in ["swh", "tau", "pu"].iter().zip(self.as_array()) {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::BadRange(format!("{name} range [{lo}, {hi}] is empty")));
            }
        }
        BrownParams::new(self.swh[0], self.tau[0], self.pu[0]).validate(consts)?;
        BrownParams::new(self.swh[1], self.tau[1], self.pu[1]).validate(consts)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryKind {
    Constant(BrownParams),
    SmoothRandom(ParamRanges),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamTrajectory {
    pub params: Vec<BrownParams>,
    pub seed: u64,
}

impl ParamTrajectory {
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Largest |θ(m+1) − θ(m)| for SWH, τ and Pu.
    pub fn max_steps(&self) -> [f64; 3] {
        let mut out = [0.0; 3];
        for pair in self.params.windows(2) {
            let (a, b) = (pair[0].as_array(), pair[1].as_array());
            for i in 0..3 {
                out[i] = f64::max(out[i], (b[i] - a[i]).abs());
            }
        }
        out
    }

    pub fn clean_block(&self, consts: &BrownConstants) -> Result<SignalBlock> {
        let columns = self
            .params
            .par_iter()
            .map(|p| brown_waveform(p, consts))
            .collect::<Result<Vec<_>>>()?;
        SignalBlock::from_columns(&columns)
    }

    /// CSV with header `index,swh_m,tau_m,pu`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| {
            writeln!(w, "index,swh_m,tau_m,pu")?;
            for (i, p) in self.params.iter().enumerate() {
                writeln!(w, "{i},{},{},{}", p.swh, p.tau, p.pu)?;
            }
            Ok(())
        })
    }

    pub fn read_csv(path: &Path) -> Result<Vec<BrownParams>> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let find = |name: &str| {
            cols.iter()
                .position(|c| *c == name)
                .ok_or_else(|| Error::format(path, format!("missing column {name}")))
        };
        let (iswh, itau, ipu) = (find("swh_m")?, find("tau_m")?, find("pu")?);
        let mut out = Vec::new();
        for (lineno, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parse = |i: usize| -> Result<f64> {
                fields
                    .get(i)
                    .and_then(|f| f.parse::<f64>().ok())
                    .ok_or_else(|| Error::format(path, format!("bad value on line {}", lineno + 2)))
            };
            out.push(BrownParams::new(parse(iswh)?, parse(itau)?, parse(ipu)?));
        }
        Ok(out)
    }
}

pub fn make_trajectory(kind: &TrajectoryKind, m: usize, seed: u64, consts: &BrownConstants) -> Result<ParamTrajectory> {
    make_trajectory_with_cap(kind, m, seed, consts, DEFAULT_STEP_CAP)
}

/// `step_cap` bounds each per-sample step to that fraction of the parameter's
/// range; smooth-random draws exceeding it are contracted toward the range center.
pub fn make_trajectory_with_cap(
    kind: &TrajectoryKind,
    m: usize,
    seed: u64,
    consts: &BrownConstants,
    step_cap: f64,
) -> Result<ParamTrajectory> {
    if m == 0 {
        return Err(Error::InvalidArgument("trajectory length must be >= 1".into()));
    }
    let params = match kind {
        TrajectoryKind::Constant(p) => {
            p.validate(consts)?;
            vec![*p; m]
        }
        TrajectoryKind::SmoothRandom(ranges) => {
            ranges.validate(consts)?;
            smooth_random(ranges, m, seed, step_cap)
        }
        TrajectoryKind::File(path) => {
            let rows = ParamTrajectory::read_csv(path)?;
            if rows.len() < m {
                return Err(Error::BadRange(format!(
                    "{} holds {} rows, {m} requested",
                    path.display(),
                    rows.len()
                )));
            }
            let rows: Vec<_> = rows.into_iter().take(m).collect();
            for p in &rows {
                p.validate(consts)?;
            }
            rows
        }
    };
    Ok(ParamTrajectory { params, seed })
}

fn smooth_random(ranges: &ParamRanges, m: usize, seed: u64, step_cap: f64) -> Vec<BrownParams> {
    let mut columns = [vec![], vec![], vec![]];
    for (i, [lo, hi]) in ranges.as_array().into_iter().enumerate() {
        let mut rng = stream_rng(seed, TRAJECTORY_STREAM + i as u64);
        let mut walk = Vec::with_capacity(m + SMOOTHING_WINDOW - 1);
        let mut x = 0.0;
        for _ in 0..m + SMOOTHING_WINDOW - 1 {
            let step: f64 = StandardNormal.sample(&mut rng);
            x += step;
            walk.push(x);
        }
        let smooth: Vec<f64> = walk
            .windows(SMOOTHING_WINDOW)
            .map(|w| w.iter().sum::<f64>() / SMOOTHING_WINDOW as f64)
            .collect();
        columns[i] = map_into_range(&smooth, lo, hi, step_cap);
    }
    (0..m)
        .map(|n| BrownParams::new(columns[0][n], columns[1][n], columns[2][n]))
        .collect()
}

fn map_into_range(x: &[f64], lo: f64, hi: f64, step_cap: f64) -> Vec<f64> {
    let mid = 0.5 * (lo + hi);
    let (min, max) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if max <= min || hi <= lo {
        return vec![mid; x.len()];
    }
    let scale = (hi - lo) / (max - min);
    let mut out: Vec<f64> = x.iter().map(|v| lo + (v - min) * scale).collect();
    let max_step = out.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    let cap = step_cap * (hi - lo);
    if max_step > cap {
        let shrink = cap / max_step;
        for v in &mut out {
            *v = mid + (*v - mid) * shrink;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseMode {
    /// y = s·g with g ~ Gamma(L, 1/L): mean 1, variance 1/L.
    Speckle,
    /// y = s + n with n ~ N(0, variances[k]) at gate k.
    AdditiveGaussian { variances: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub looks: u32,
    pub seed: u64,
    pub mode: NoiseMode,
}

impl NoiseSpec {
    pub fn speckle(looks: u32, seed: u64) -> Self {
        Self {
            looks,
            seed,
            mode: NoiseMode::Speckle,
        }
    }
}

pub fn corrupt(clean: &SignalBlock, spec: &NoiseSpec) -> Result<SignalBlock> {
    if spec.looks == 0 {
        return Err(Error::BadRange("looks must be >= 1".into()));
    }
    let gates = clean.gates();
    if let NoiseMode::AdditiveGaussian { variances } = &spec.mode {
        if variances.len() != gates {
            return Err(Error::ShapeMismatch {
                expected: format!("{gates} per-gate variances"),
                got: format!("{}", variances.len()),
            });
        }
        if variances.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::BadRange("noise variances must be finite and >= 0".into()));
        }
    }
    let looks = spec.looks as f64;
    let gamma = Gamma::new(looks, 1.0 / looks).map_err(|e| Error::BadRange(e.to_string()))?;
    let columns: Vec<Vec<f64>> = (0..clean.signals())
        .into_par_iter()
        .map(|m| {
            let mut rng = stream_rng(spec.seed, m as u64);
            (0..gates)
                .map(|k| {
                    let s = clean.get(k, m);
                    match &spec.mode {
                        NoiseMode::Speckle => s * gamma.sample(&mut rng),
                        NoiseMode::AdditiveGaussian { variances } => {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            s + variances[k].sqrt() * z
                        }
                    }
                })
                .collect()
        })
        .collect();
    let mut out = SignalBlock::zeros(gates, clean.signals());
    for (m, col) in columns.iter().enumerate() {
        out.set_column(m, col);
    }
    Ok(out)
}

/// RSNR of the observations themselves.
pub fn input_rsnr(clean: &SignalBlock, noisy: &SignalBlock) -> Result<f64> {
    metrics::rsnr(clean, noisy)
}
