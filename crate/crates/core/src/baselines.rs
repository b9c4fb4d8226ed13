//! Reference processing chains: least-squares retracking of single echoes and
//! truncated-SVD filtering of a block.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use crate::block::SignalBlock;
use crate::error::{Error, Result};
use crate::signal_model::{brown_jacobian, brown_waveform, BrownConstants, BrownParams};
use crate::solver::chunk_bounds;

pub const DEFAULT_SVD_THRESHOLD: f64 = 0.84;

const MAX_ITERATIONS: usize = 200;
const STEP_TOLERANCE: f64 = 1e-8;
const MAX_REJECTIONS: usize = 10;
const INITIAL_DAMPING: f64 = 1e-3;
/// Predicted decrease of ‖r‖², relative to ‖r‖², below which the cost can no
/// longer rank a step; such steps are taken on the model's word.
const ROUNDOFF_GAIN: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitResult {
    pub params: BrownParams,
    /// ‖y − model‖
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn residual_sq(y: &[f64], params: &BrownParams, consts: &BrownConstants) -> Result<f64> {
    let model = brown_waveform(params, consts)?;
    Ok(y.iter().zip(model.samples()).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// The model depends on SWH only through SWH², so a negative SWH is reflected
/// rather than clamped; clamping would park the fit where ∂s/∂SWH vanishes.
fn project(theta: Vector3<f64>, consts: &BrownConstants) -> Vector3<f64> {
    let window = consts.gates_to_meters(consts.num_gates as f64);
    Vector3::new(theta[0].abs(), theta[1].clamp(0.0, window), theta[2].max(0.0))
}

/// Levenberg–Marquardt minimization of ‖y − s(θ)‖² over (SWH, τ, Pu), with
/// SWH and Pu kept non-negative and τ kept inside the gate window.
/// Stops when the step falls to 1e−8 of each parameter. Fails with [`Error::Diverged`] after ten
/// consecutive rejected steps.
pub fn ls_fit(y: &[f64], consts: &BrownConstants, init: &BrownParams) -> Result<FitResult> {
    if y.len() != consts.num_gates {
        return Err(Error::ShapeMismatch {
            expected: format!("{} gates", consts.num_gates),
            got: format!("{} gates", y.len()),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("waveform to retrack"));
    }
    let mut theta = project(Vector3::from(init.as_array()), consts);
    let mut params = BrownParams::from_array(theta.into());
    let mut cost = residual_sq(y, &params, consts)?;
    let mut lambda = INITIAL_DAMPING;
    let mut rejections = 0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let model = brown_waveform(&params, consts)?;
        let jac = brown_jacobian(&params, consts)?;
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for ((row, yk), sk) in jac.iter().zip(y).zip(model.samples()) {
            let j = Vector3::from(*row);
            jtj += j * j.transpose();
            jtr += j * (yk - sk);
        }
        let scale = jtj.diagonal().max().max(f64::MIN_POSITIVE);
        loop {
            let mut damped = jtj;
            for i in 0..3 {
                damped[(i, i)] += lambda * jtj[(i, i)].max(1e-12 * scale);
            }
            let step = damped.cholesky().map(|c| c.solve(&jtr));
            let Some(step) = step.filter(|s| s.iter().all(|v| v.is_finite())) else {
                lambda *= 10.0;
                rejections += 1;
                if rejections >= MAX_REJECTIONS {
                    return Err(Error::Diverged { iterations });
                }
                continue;
            };
            let candidate = project(theta + step, consts);
            let moved = candidate - theta;
            let predicted = 2.0 * moved.dot(&jtr) - (jtj * moved).dot(&moved);
            let small = (0..3).all(|i| moved[i].abs() <= STEP_TOLERANCE * (theta[i].abs() + STEP_TOLERANCE));
            let below_roundoff = predicted > 0.0 && predicted <= ROUNDOFF_GAIN * cost;
            let cand_params = BrownParams::from_array(candidate.into());
            let cand_cost = residual_sq(y, &cand_params, consts).unwrap_or(f64::INFINITY);
            if cand_cost <= cost || (below_roundoff && cand_cost.is_finite()) {
                theta = candidate;
                params = cand_params;
                cost = cand_cost;
                lambda = (lambda / 10.0).max(1e-12);
                rejections = 0;
                converged = small;
                break;
            }
            if small {
                converged = true;
                break;
            }
            lambda *= 10.0;
            rejections += 1;
            if rejections >= MAX_REJECTIONS {
                return Err(Error::Diverged { iterations });
            }
        }
        if converged {
            break;
        }
    }
    Ok(FitResult {
        params,
        residual_norm: cost.sqrt(),
        iterations,
        converged,
    })
}

/// Nominal starting point: SWH = 2 m, τ at mid-window, Pu = max(y).
pub fn nominal_init(y: &[f64], consts: &BrownConstants) -> BrownParams {
    let pu = y.iter().copied().fold(0.0, f64::max);
    BrownParams::with_tau_gates(2.0, consts.num_gates as f64 / 2.0, pu, consts)
}

/// Fits from the nominal start; if that fails to converge, restarts from a
/// five-point τ grid and keeps the best converged fit.
pub fn retrack(y: &[f64], consts: &BrownConstants) -> Result<FitResult> {
    let init = nominal_init(y, consts);
    let first = ls_fit(y, consts, &init);
    if let Ok(fit) = &first {
        if fit.converged {
            return first;
        }
    }
    let k = consts.num_gates as f64;
    let mut best: Option<FitResult> = first.as_ref().ok().copied();
    for frac in [0.2, 0.35, 0.5, 0.65, 0.8] {
        let start = BrownParams::with_tau_gates(init.swh, frac * k, init.pu, consts);
        let Ok(fit) = ls_fit(y, consts, &start) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some(b) => {
                (fit.converged && !b.converged) || (fit.converged == b.converged && fit.residual_norm < b.residual_norm)
            }
        };
        if better {
            best = Some(fit);
        }
    }
    match best {
        Some(fit) => Ok(fit),
        None => first,
    }
}

/// Retracks every column of a block.
pub fn retrack_block(block: &SignalBlock, consts: &BrownConstants) -> Result<Vec<FitResult>> {
    (0..block.signals())
        .into_par_iter()
        .map(|m| retrack(block.column(m).samples(), consts))
        .collect()
}

/// Number of leading singular values whose cumulative squared sum first
/// reaches `threshold` of the total.
pub fn energy_rank(singular_values: &[f64], threshold: f64) -> usize {
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return 0;
    }
    let mut cum = 0.0;
    for (i, s) in singular_values.iter().enumerate() {
        cum += s * s;
        if cum >= threshold * total {
            return i + 1;
        }
    }
    singular_values.len()
}

/// Rank-truncated reconstruction keeping the leading components that carry
/// `threshold` of the squared singular-value energy.
pub fn svd_filter(y: &SignalBlock, threshold: f64) -> Result<SignalBlock> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "energy threshold must lie in (0, 1], got {threshold}"
        )));
    }
    if !y.is_finite() {
        return Err(Error::NonFinite("block to filter"));
    }
    let (k, m) = y.shape();
    let svd = DMatrix::from_row_slice(k, m, y.as_slice()).svd(true, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sorted: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let rank = energy_rank(&sorted, threshold);
    let u = svd.u.as_ref().expect("left vectors requested");
    let vt = svd.v_t.as_ref().expect("right vectors requested");
    let mut out = DMatrix::<f64>::zeros(k, m);
    for &i in &order[..rank] {
        out += u.column(i) * vt.row(i) * svd.singular_values[i];
    }
    let mut block = SignalBlock::zeros(k, m);
    for g in 0..k {
        for (dst, src) in block.row_mut(g).iter_mut().zip(out.row(g).iter()) {
            *dst = *src;
        }
    }
    Ok(block)
}

/// [`svd_filter`] over consecutive column chunks.
pub fn svd_filter_chunked(y: &SignalBlock, threshold: f64, chunk: usize) -> Result<SignalBlock> {
    if chunk == 0 {
        return Err(Error::InvalidArgument("chunk length must be >= 1".into()));
    }
    let parts: Vec<SignalBlock> = chunk_bounds(y.signals(), chunk)
        .into_par_iter()
        .map(|(a, b)| svd_filter(&y.columns(a, b), threshold))
        .collect::<Result<_>>()?;
    SignalBlock::hconcat(&parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_rank_cases() {
        assert_eq!(energy_rank(&[3.0, 4.0], 1.0), 2);
        assert_eq!(energy_rank(&[4.0, 3.0], 0.64), 1);
        assert_eq!(energy_rank(&[4.0, 3.0], 0.65), 2);
        assert_eq!(energy_rank(&[0.0, 0.0], 0.5), 0);
    }

    #[test]
    fn rejects_bad_threshold() {
        let y = SignalBlock::zeros(2, 2);
        assert!(svd_filter(&y, 0.0).is_err());
        assert!(svd_filter(&y, 1.5).is_err());
        assert_eq!(svd_filter(&y, 0.84).unwrap(), y);
    }

    #[test]
    fn exact_fit_is_a_fixed_point() {
        let c = BrownConstants::jason2_like();
        let truth = BrownParams::with_tau_gates(2.0, 31.0, 130.0, &c);
        let y = brown_waveform(&truth, &c).unwrap();
        let fit = ls_fit(y.samples(), &c, &truth).unwrap();
        assert!(fit.converged);
        assert!(fit.iterations <= 2);
        assert_eq!(fit.residual_norm, 0.0);
    }

    #[test]
    fn wrong_length_is_rejected() {
        let c = BrownConstants::jason2_like();
        assert!(matches!(retrack(&[1.0; 10], &c), Err(Error::ShapeMismatch { .. })));
    }
}
