//! Coordinate-descent MAP estimation of a smooth signal block.
//!
//! Each sweep updates, in order, the signals of every gate, the noise
//! variances σ², their auxiliaries w, the signal energies ε² and their
//! auxiliaries v. Every step is the exact minimizer of the objective along its
//! coordinate block, so the cost never increases. Iteration stops when the
//! relative cost change falls to `xi` or after `t_max` sweeps.
//!
//! In the default spectral mode a gate's signal lives in the eigenbasis of the
//! correlation matrix: with `c = Vᵀy` the update is a diagonal filter on `c`,
//! and both the residual energy and `sᵀH⁻¹s` are sums over coefficients. The
//! block is synthesized once at the end.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::block::SignalBlock;
use crate::error::{Error, Result};
use crate::gmrf::{EnergyState, GammaChain, NoiseState, DEFAULT_COUPLING, INITIAL_AUX, VARIANCE_FLOOR};
use crate::kernels::{
    build_h, posterior_mean_dense, prior_quadratic_form, CorrelationMatrix, CovarianceBasis, DEFAULT_JITTER,
    DEFAULT_LENGTHSCALE,
};

pub const INITIAL_EPS2: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SUpdate {
    /// Diagonal filter in the eigenbasis.
    #[default]
    Spectral,
    /// Cholesky solve per gate in signal space. Slow; for verification.
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub zeta: f64,
    pub eta: f64,
    pub xi: f64,
    pub t_max: usize,
    pub lengthscale: f64,
    pub jitter: f64,
    pub variance_floor: f64,
    pub s_update: SUpdate,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            zeta: DEFAULT_COUPLING,
            eta: DEFAULT_COUPLING,
            xi: 1e-3,
            t_max: 100,
            lengthscale: DEFAULT_LENGTHSCALE,
            jitter: DEFAULT_JITTER,
            variance_floor: VARIANCE_FLOOR,
            s_update: SUpdate::Spectral,
        }
    }
}

impl SolverConfig {
    pub const KEYS: [&'static str; 8] = [
        "zeta",
        "eta",
        "xi",
        "t_max",
        "lengthscale",
        "jitter",
        "variance_floor",
        "s_update",
    ];

    pub fn validate(&self) -> Result<()> {
        if !(self.zeta > 1.0 && self.zeta.is_finite()) {
            return Err(Error::InvalidArgument(format!("zeta must be > 1, got {}", self.zeta)));
        }
        if !(self.eta > 1.0 && self.eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("eta must be > 1, got {}", self.eta)));
        }
        if !(self.xi > 0.0 && self.xi.is_finite()) {
            return Err(Error::InvalidArgument(format!("xi must be > 0, got {}", self.xi)));
        }
        if self.t_max == 0 {
            return Err(Error::InvalidArgument("t_max must be >= 1".into()));
        }
        if !(self.lengthscale > 0.0 && self.lengthscale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lengthscale must be > 0, got {}",
                self.lengthscale
            )));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "jitter must be >= 0, got {}",
                self.jitter
            )));
        }
        if !(self.variance_floor > 0.0 && self.variance_floor.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "variance_floor must be > 0, got {}",
                self.variance_floor
            )));
        }
        Ok(())
    }

    /// Reads solver keys from a key-value file that may also hold instrument
    /// constants. Missing keys keep their defaults.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut own = toml::Table::new();
        for key in Self::KEYS {
            if let Some(v) = table.get(key) {
                own.insert(key.to_string(), v.clone());
            }
        }
        let cfg: Self = own
            .try_into()
            .map_err(|e: toml::de::Error| Error::InvalidArgument(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv_str(&text).map_err(|e| match e {
            Error::InvalidArgument(reason) => Error::format(path, reason),
            other => other,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub s_hat: SignalBlock,
    pub noise: NoiseState,
    pub energy: EnergyState,
    /// Cost of the initial point followed by the cost after each sweep.
    pub cost_trace: Vec<f64>,
    pub iterations: usize,
    pub stop_reason: StopReason,
}

/// Free variables between sweeps. In spectral mode `rows[k]` holds the
/// eigen-coefficients `Vᵀs_k`; in dense mode it holds `s_k` itself.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub rows: Vec<Vec<f64>>,
    pub noise: NoiseState,
    pub energy: EnergyState,
    residual: Vec<f64>,
    quad: Vec<f64>,
}

impl Iterate {
    /// ‖y_k − s_k‖² for the current signals.
    pub fn residual_energies(&self) -> &[f64] {
        &self.residual
    }

    /// s_kᵀH⁻¹s_k for the current signals.
    pub fn prior_energies(&self) -> &[f64] {
        &self.quad
    }
}

/// One observation block bound to its basis, with `Vᵀy` cached per gate.
pub struct Problem<'a> {
    y: &'a SignalBlock,
    basis: &'a CovarianceBasis,
    config: SolverConfig,
    projected: Vec<Vec<f64>>,
    dense_h: Option<CorrelationMatrix>,
}

impl<'a> Problem<'a> {
    pub fn new(y: &'a SignalBlock, basis: &'a CovarianceBasis, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        let (k, m) = y.shape();
        if k == 0 || m == 0 {
            return Err(Error::InvalidArgument(
                "block must have at least one gate and one signal".into(),
            ));
        }
        if basis.size() != m {
            return Err(Error::ShapeMismatch {
                expected: format!("basis of size {m}"),
                got: format!("basis of size {}", basis.size()),
            });
        }
        if !y.is_finite() {
            return Err(Error::NonFinite("observation block"));
        }
        let projected = project_rows(y, basis);
        let dense_h = match config.s_update {
            SUpdate::Spectral => None,
            SUpdate::Dense => Some(build_h(m, config.lengthscale, config.jitter)?),
        };
        Ok(Self {
            y,
            basis,
            config: *config,
            projected,
            dense_h,
        })
    }

    fn m(&self) -> usize {
        self.y.signals()
    }

    /// Signals at the column mean, σ² at the mean waveform (floored), ε² = 10,
    /// auxiliaries at 1e−12.
    pub fn initial(&self) -> Result<Iterate> {
        let mean = self.y.mean_column();
        let m = self.m();
        let rows: Vec<Vec<f64>> = match self.config.s_update {
            SUpdate::Spectral => {
                let ones = self.basis.project(&vec![1.0; m]);
                mean.iter().map(|mu| ones.iter().map(|o| mu * o).collect()).collect()
            }
            SUpdate::Dense => mean.iter().map(|mu| vec![*mu; m]).collect(),
        };
        let floor = self.config.variance_floor;
        let sigma2 = mean.iter().map(|v| v.max(floor)).collect();
        let noise = GammaChain::new(sigma2, INITIAL_AUX, self.config.zeta)?;
        let energy = GammaChain::new(vec![INITIAL_EPS2; mean.len()], INITIAL_AUX, self.config.eta)?;
        let (residual, quad) = self.data_terms(&rows);
        Ok(Iterate {
            rows,
            noise,
            energy,
            residual,
            quad,
        })
    }

    fn data_terms(&self, rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let r = self.basis.inverse_eigenvalues();
        match self.config.s_update {
            SUpdate::Spectral => rows
                .iter()
                .zip(&self.projected)
                .map(|(a, c)| {
                    let res = a.iter().zip(c).map(|(a, c)| (c - a) * (c - a)).sum::<f64>();
                    let quad = a.iter().zip(r).map(|(a, r)| r * a * a).sum::<f64>();
                    (res, quad)
                })
                .unzip(),
            SUpdate::Dense => rows
                .iter()
                .zip(self.y.rows())
                .map(|(s, y)| {
                    let res = s.iter().zip(y).map(|(s, y)| (y - s) * (y - s)).sum::<f64>();
                    (res, prior_quadratic_form(s, self.basis))
                })
                .unzip(),
        }
    }

    fn update_signals(&self, it: &mut Iterate) -> Result<()> {
        let r = self.basis.inverse_eigenvalues();
        for k in 0..it.rows.len() {
            let sigma2 = it.noise.variances[k];
            let eps2 = it.energy.variances[k];
            match self.config.s_update {
                SUpdate::Spectral => {
                    let c = &self.projected[k];
                    let (mut res, mut quad) = (0.0, 0.0);
                    for (i, a) in it.rows[k].iter_mut().enumerate() {
                        let rs = r[i] * sigma2;
                        let denom = rs + eps2;
                        *a = c[i] * (eps2 / denom);
                        let leftover = c[i] * (rs / denom);
                        res += leftover * leftover;
                        quad += r[i] * *a * *a;
                    }
                    it.residual[k] = res;
                    it.quad[k] = quad;
                }
                SUpdate::Dense => {
                    let h = self.dense_h.as_ref().expect("dense mode keeps H");
                    let y = self.y.row(k);
                    let s = posterior_mean_dense(y, sigma2, eps2, h)?;
                    it.residual[k] = s.iter().zip(y).map(|(s, y)| (y - s) * (y - s)).sum();
                    it.quad[k] = prior_quadratic_form(&s, self.basis);
                    it.rows[k] = s;
                }
            }
        }
        Ok(())
    }

    /// One full sweep; returns the cost of the updated iterate.
    pub fn sweep(&self, it: &mut Iterate) -> Result<f64> {
        let m = self.m();
        let floor = self.config.variance_floor;
        self.update_signals(it)?;
        it.noise.update_variances(&it.residual, m, floor);
        it.noise.update_aux();
        it.energy.update_variances(&it.quad, m, floor);
        it.energy.update_aux();
        self.cost(it)
    }

    pub fn cost(&self, it: &Iterate) -> Result<f64> {
        let m = self.m();
        Ok(it.noise.cost(&it.residual, m)? + it.energy.cost(&it.quad, m)?)
    }

    pub fn signals(&self, it: &Iterate) -> SignalBlock {
        let (k, m) = self.y.shape();
        match self.config.s_update {
            SUpdate::Spectral => {
                let a = DMatrix::from_row_iterator(k, m, it.rows.iter().flatten().copied());
                let s = a * self.basis.vectors().transpose();
                let mut out = SignalBlock::zeros(k, m);
                for g in 0..k {
                    for (dst, src) in out.row_mut(g).iter_mut().zip(s.row(g).iter()) {
                        *dst = *src;
                    }
                }
                out
            }
            SUpdate::Dense => SignalBlock::from_row_major(k, m, it.rows.concat()).expect("rows match block shape"),
        }
    }

    pub fn run(&self) -> Result<SolverState> {
        let mut it = self.initial()?;
        let mut prev = self.cost(&it)?;
        let mut cost_trace = vec![prev];
        let mut stop_reason = StopReason::MaxIterations;
        let mut iterations = 0;
        while iterations < self.config.t_max {
            let c = self.sweep(&mut it)?;
            iterations += 1;
            cost_trace.push(c);
            if (c - prev).abs() <= self.config.xi * prev.abs() {
                stop_reason = StopReason::Converged;
                break;
            }
            prev = c;
        }
        let s_hat = self.signals(&it);
        if !s_hat.is_finite() {
            return Err(Error::NonFinite("denoised block"));
        }
        Ok(SolverState {
            s_hat,
            noise: it.noise,
            energy: it.energy,
            cost_trace,
            iterations,
            stop_reason,
        })
    }
}

fn project_rows(y: &SignalBlock, basis: &CovarianceBasis) -> Vec<Vec<f64>> {
    let (k, m) = y.shape();
    let ym = DMatrix::from_row_slice(k, m, y.as_slice());
    let c = ym * basis.vectors();
    (0..k).map(|g| c.row(g).iter().copied().collect()).collect()
}

pub fn cost(it: &Iterate, y: &SignalBlock, basis: &CovarianceBasis, config: &SolverConfig) -> Result<f64> {
    Problem::new(y, basis, config)?.cost(it)
}

pub fn denoise(y: &SignalBlock, config: &SolverConfig) -> Result<SolverState> {
    config.validate()?;
    let basis = CovarianceBasis::build(y.signals(), config.lengthscale, config.jitter)?;
    denoise_with_basis(y, &basis, config)
}

pub fn denoise_with_basis(y: &SignalBlock, basis: &CovarianceBasis, config: &SolverConfig) -> Result<SolverState> {
    Problem::new(y, basis, config)?.run()
}

#[derive(Debug, Clone, Default)]
pub struct StreamOptions {
    /// Directory for cached bases; `None` builds them in memory.
    pub cache_dir: Option<PathBuf>,
    pub serial: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChunkReport {
    pub start: usize,
    pub len: usize,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub cost_trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct StreamOutput {
    pub s_hat: SignalBlock,
    pub chunks: Vec<ChunkReport>,
}

pub fn chunk_bounds(n: usize, chunk: usize) -> Vec<(usize, usize)> {
    (0..n.div_ceil(chunk))
        .map(|i| (i * chunk, ((i + 1) * chunk).min(n)))
        .collect()
}

pub fn denoise_stream(y: &SignalBlock, chunk: usize, config: &SolverConfig) -> Result<StreamOutput> {
    denoise_stream_with(y, chunk, config, &StreamOptions::default())
}

/// Denoises consecutive, non-overlapping column chunks independently. A short
/// trailing chunk gets its own basis.
pub fn denoise_stream_with(
    y: &SignalBlock,
    chunk: usize,
    config: &SolverConfig,
    opts: &StreamOptions,
) -> Result<StreamOutput> {
    config.validate()?;
    if chunk == 0 {
        return Err(Error::InvalidArgument("chunk length must be >= 1".into()));
    }
    if y.signals() == 0 {
        return Err(Error::InvalidArgument("block has no signals".into()));
    }
    let bounds = chunk_bounds(y.signals(), chunk);
    let mut lengths: Vec<usize> = bounds.iter().map(|(a, b)| b - a).collect();
    lengths.sort_unstable();
    lengths.dedup();
    let build = |m: usize| -> Result<(usize, CovarianceBasis)> {
        let basis = match &opts.cache_dir {
            Some(dir) => CovarianceBasis::load_or_build(dir, m, config.lengthscale, config.jitter)?,
            None => CovarianceBasis::build(m, config.lengthscale, config.jitter)?,
        };
        Ok((m, basis))
    };
    let bases: BTreeMap<usize, CovarianceBasis> = if opts.serial {
        lengths.into_iter().map(build).collect::<Result<_>>()?
    } else {
        lengths.into_par_iter().map(build).collect::<Result<_>>()?
    };

    let run = |&(start, end): &(usize, usize)| -> Result<(SignalBlock, ChunkReport)> {
        let part = y.columns(start, end);
        let state = denoise_with_basis(&part, &bases[&(end - start)], config)?;
        let report = ChunkReport {
            start,
            len: end - start,
            iterations: state.iterations,
            stop_reason: state.stop_reason,
            cost_trace: state.cost_trace,
        };
        Ok((state.s_hat, report))
    };
    let results: Vec<(SignalBlock, ChunkReport)> = if opts.serial {
        bounds.iter().map(run).collect::<Result<_>>()?
    } else {
        bounds.par_iter().map(run).collect::<Result<_>>()?
    };
    let (parts, chunks): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok(StreamOutput {
        s_hat: SignalBlock::hconcat(&parts)?,
        chunks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunking() {
        assert_eq!(chunk_bounds(5000, 250).len(), 20);
        assert_eq!(chunk_bounds(10, 4), vec![(0, 4), (4, 8), (8, 10)]);
        assert_eq!(chunk_bounds(7, 7), vec![(0, 7)]);
    }

    #[test]
    fn config_keys_coexist_with_constants() {
        let cfg = SolverConfig::from_kv_str("alpha = 2.0e6\nzeta = 3.5\nt_max = 7\n").unwrap();
        assert_eq!(cfg.zeta, 3.5);
        assert_eq!(cfg.t_max, 7);
        assert_eq!(cfg.eta, DEFAULT_COUPLING);
        assert!(SolverConfig::from_kv_str("zeta = 1.0").is_err());
        assert!(SolverConfig::from_kv_str("xi = 0.0").is_err());
    }

    #[test]
    fn single_gate_single_signal_cost() {
        // K = M = 1, y = s = 1, σ² = ε² = w = v = 1, ζ = η = 2:
        // last-gate shapes are ζ + 3/2, logs vanish, β₁ = 0 + 4, β₂ = r + 4.
        let y = SignalBlock::from_row_major(1, 1, vec![1.0]).unwrap();
        let basis = CovarianceBasis::build(1, 30.0, 1e-8).unwrap();
        let cfg = SolverConfig::default();
        let p = Problem::new(&y, &basis, &cfg).unwrap();
        let mut it = p.initial().unwrap();
        it.noise = GammaChain::new(vec![1.0], 1.0, 2.0).unwrap();
        it.energy = GammaChain::new(vec![1.0], 1.0, 2.0).unwrap();
        it.rows = vec![basis.project(&[1.0])];
        let (res, quad) = p.data_terms(&it.rows);
        it.residual = res;
        it.quad = quad;
        let r = 1.0 / (1.0 + 1e-8);
        let expected = 4.0 / 2.0 + (r + 4.0) / 2.0;
        assert!((p.cost(&it).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn rejects_mismatched_basis() {
        let y = SignalBlock::zeros(3, 5);
        let basis = CovarianceBasis::build(4, 30.0, 1e-8).unwrap();
        assert!(matches!(
            denoise_with_basis(&y, &basis, &SolverConfig::default()),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
