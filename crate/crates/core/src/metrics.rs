//! Reconstruction and parameter-estimation quality criteria.
//!
//! All spreads use population normalization (1/N).

use serde::{Deserialize, Serialize};

use crate::block::SignalBlock;
use crate::error::{Error, Result};
use crate::signal_model::BrownParams;

/// Returned by [`rsnr`] when the estimate equals the reference exactly.
pub const RSNR_SATURATED: f64 = f64::INFINITY;

/// Window length of the "STD at 20 Hz" criterion.
pub const STD_20HZ_WINDOW: usize = 20;

/// Reconstruction SNR in dB: 10·log10(Σ‖s_m‖² / Σ‖s_m − ŝ_m‖²).
pub fn rsnr(clean: &SignalBlock, est: &SignalBlock) -> Result<f64> {
    clean.ensure_same_shape(est)?;
    let signal = clean.frobenius_sq();
    if signal <= 0.0 {
        return Err(Error::DegenerateInput("reference block has zero energy"));
    }
    let err: f64 = clean
        .as_slice()
        .iter()
        .zip(est.as_slice())
        .map(|(s, e)| (s - e) * (s - e))
        .sum();
    if err == 0.0 {
        return Ok(RSNR_SATURATED);
    }
    Ok(10.0 * (signal / err).log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Param {
    Swh,
    Tau,
    Pu,
}

impl Param {
    pub const ALL: [Param; 3] = [Param::Swh, Param::Tau, Param::Pu];

    pub fn index(self) -> usize {
        match self {
            Param::Swh => 0,
            Param::Tau => 1,
            Param::Pu => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Param::Swh => "swh",
            Param::Tau => "tau",
            Param::Pu => "pu",
        }
    }
}

/// Per-signal estimates with optional ground truth.
#[derive(Debug, Clone, Default)]
pub struct ParamSeries {
    pub estimates: Vec<BrownParams>,
    pub truth: Option<Vec<BrownParams>>,
}

impl ParamSeries {
    pub fn new(estimates: Vec<BrownParams>, truth: Option<Vec<BrownParams>>) -> Result<Self> {
        if let Some(t) = &truth {
            if t.len() != estimates.len() {
                return Err(Error::ShapeMismatch {
                    expected: format!("{} truth rows", estimates.len()),
                    got: format!("{} truth rows", t.len()),
                });
            }
        }
        Ok(Self { estimates, truth })
    }

    pub fn len(&self) -> usize {
        self.estimates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }

    pub fn values(&self, param: Param) -> Vec<f64> {
        self.estimates.iter().map(|p| p.as_array()[param.index()]).collect()
    }

    fn errors(&self, param: Param) -> Result<Vec<f64>> {
        let truth = self
            .truth
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("ground truth required".into()))?;
        Ok(self
            .estimates
            .iter()
            .zip(truth)
            .map(|(e, t)| e.as_array()[param.index()] - t.as_array()[param.index()])
            .collect())
    }
}

pub fn rmse(series: &ParamSeries, param: Param) -> Result<f64> {
    let errs = series.errors(param)?;
    if errs.is_empty() {
        return Err(Error::DegenerateInput("empty series"));
    }
    Ok((errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt())
}

/// Mean of (estimate − truth).
pub fn bias(series: &ParamSeries, param: Param) -> Result<f64> {
    let errs = series.errors(param)?;
    if errs.is_empty() {
        return Err(Error::DegenerateInput("empty series"));
    }
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn population_std(values: &[f64]) -> f64 {
    let mu = mean(values);
    (values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Spread of the estimates about their global mean.
pub fn std(series: &ParamSeries, param: Param) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::DegenerateInput("std needs at least two estimates"));
    }
    Ok(population_std(&series.values(param)))
}

/// Spread about per-window means over consecutive, non-overlapping windows.
/// A trailing partial window is centered on its own mean.
pub fn std_windowed(values: &[f64], window: usize) -> Result<f64> {
    if window == 0 {
        return Err(Error::InvalidArgument("window must be >= 1".into()));
    }
    if values.len() < window {
        return Err(Error::DegenerateInput("series shorter than the averaging window"));
    }
    let sum_sq: f64 = values
        .chunks(window)
        .map(|w| {
            let mu = mean(w);
            w.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>()
        })
        .sum();
    Ok((sum_sq / values.len() as f64).sqrt())
}

pub fn std_20hz(series: &ParamSeries, param: Param, window: usize) -> Result<f64> {
    std_windowed(&series.values(param), window)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(vals: &[f64]) -> ParamSeries {
        ParamSeries::new(vals.iter().map(|&v| BrownParams::new(v, v, v)).collect(), None).unwrap()
    }

    #[test]
    fn rsnr_cases() {
        let s = SignalBlock::from_row_major(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(rsnr(&s, &s).unwrap(), RSNR_SATURATED);

        let doubled = SignalBlock::from_row_major(2, 2, s.as_slice().iter().map(|v| 2.0 * v).collect()).unwrap();
        assert!(rsnr(&s, &doubled).unwrap().abs() < 1e-12);

        // ‖s − ŝ‖² = ‖s‖²/10 spread uniformly
        let scale = 1.0 - (0.1f64).sqrt();
        let est = SignalBlock::from_row_major(2, 2, s.as_slice().iter().map(|v| scale * v).collect()).unwrap();
        assert!((rsnr(&s, &est).unwrap() - 10.0).abs() < 1e-12);

        let zero = SignalBlock::zeros(2, 2);
        assert!(matches!(rsnr(&zero, &s), Err(Error::DegenerateInput(_))));
        assert!(rsnr(&s, &SignalBlock::zeros(2, 3)).is_err());
    }

    #[test]
    fn rmse_and_bias() {
        let truth: Vec<_> = (0..10).map(|i| BrownParams::new(i as f64, 1.0, 2.0)).collect();
        let est = ParamSeries::new(truth.clone(), Some(truth.clone())).unwrap();
        assert_eq!(rmse(&est, Param::Swh).unwrap(), 0.0);

        let shifted: Vec<_> = truth
            .iter()
            .map(|p| BrownParams::new(p.swh - 0.3, p.tau, p.pu))
            .collect();
        let est = ParamSeries::new(shifted, Some(truth)).unwrap();
        assert!((rmse(&est, Param::Swh).unwrap() - 0.3).abs() < 1e-12);
        assert!((bias(&est, Param::Swh).unwrap() + 0.3).abs() < 1e-12);
        assert!(rmse(&series(&[1.0, 2.0]), Param::Swh).is_err());
    }

    #[test]
    fn std_cases() {
        assert_eq!(std(&series(&[4.0; 7]), Param::Tau).unwrap(), 0.0);
        assert!((std(&series(&[2.5, -2.5]), Param::Pu).unwrap() - 2.5).abs() < 1e-15);
        assert!(std(&series(&[1.0]), Param::Pu).is_err());
    }

    #[test]
    fn std_20hz_of_ramp_matches_closed_form() {
        // Population std of 0..w−1 about its mean is sqrt((w²−1)/12).
        let slope = 0.37;
        let ramp: Vec<f64> = (0..400).map(|n| slope * n as f64).collect();
        let got = std_20hz(&series(&ramp), Param::Swh, 20).unwrap();
        let expected = slope * ((20.0f64 * 20.0 - 1.0) / 12.0).sqrt();
        assert!((got - expected).abs() < 1e-12 * expected);
        assert!((expected / slope - 5.766).abs() < 1e-3);
    }

    #[test]
    fn std_20hz_trailing_window_uses_own_mean() {
        // 20 constant values then a partial window {0, 2}: only the tail contributes.
        let mut v = vec![5.0; 20];
        v.extend([0.0, 2.0]);
        let got = std_windowed(&v, 20).unwrap();
        assert!((got - (2.0f64 / 22.0).sqrt()).abs() < 1e-15);
        assert_eq!(std_windowed(&[1.0; 20], 20).unwrap(), 0.0);
        assert!(std_windowed(&[1.0; 19], 20).is_err());
    }
}
