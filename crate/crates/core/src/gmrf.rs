//! Inverse-gamma Markov chains over gates and their conditional modes.
//!
//! A chain holds K variances `x_0..x_{K−1}` and K auxiliaries `a_0..a_{K−1}`.
//! Variance `x_i` couples to `a_i` and, except at the last gate, to `a_{i+1}`;
//! auxiliary `a_j` couples to `x_{j−1}` (when `j ≥ 1`) and `x_j`. With data
//! term `d_i` over `M` samples, the chain's share of the objective is
//!
//! ```text
//! Σ_i shape_i·log x_i + β_i/(2x_i)  −  (2c−1)·Σ_j log a_j
//! β_i = d_i + 2c·(a_i + a_{i+1})
//! shape_i = 2c + M/2 + 1   (interior)     c + M/2 + 1   (last gate)
//! ```
//!
//! Each coordinate has a unique minimizer in closed form.

use crate::error::{Error, Result};

pub const DEFAULT_COUPLING: f64 = 2.0;
pub const VARIANCE_FLOOR: f64 = 1e-20;
pub const INITIAL_AUX: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GammaChain {
    pub variances: Vec<f64>,
    pub aux: Vec<f64>,
    pub coupling: f64,
}

/// σ², w and ζ.
pub type NoiseState = GammaChain;
/// ε², v and η.
pub type EnergyState = GammaChain;

impl GammaChain {
    pub fn new(variances: Vec<f64>, aux_init: f64, coupling: f64) -> Result<Self> {
        if !(coupling > 1.0 && coupling.is_finite()) {
            return Err(Error::InvalidArgument(format!("coupling must be > 1, got {coupling}")));
        }
        let aux = vec![aux_init; variances.len()];
        Ok(Self {
            variances,
            aux,
            coupling,
        })
    }

    pub fn len(&self) -> usize {
        self.variances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variances.is_empty()
    }

    fn neighbor_aux(&self, i: usize) -> f64 {
        self.aux[i] + self.aux.get(i + 1).copied().unwrap_or(0.0)
    }

    pub fn shape(&self, i: usize, m: usize) -> f64 {
        let c = self.coupling;
        let half_m = m as f64 / 2.0;
        if i + 1 == self.len() {
            c + half_m + 1.0
        } else {
            2.0 * c + half_m + 1.0
        }
    }

    pub fn beta(&self, i: usize, data: f64) -> f64 {
        data + 2.0 * self.coupling * self.neighbor_aux(i)
    }

    /// Minimizer of the chain objective over `x_i` alone, floored.
    pub fn variance_mode(&self, i: usize, data: f64, m: usize, floor: f64) -> f64 {
        (self.beta(i, data) / (2.0 * self.shape(i, m))).max(floor)
    }

    /// Minimizer of the chain objective over `a_j` alone.
    pub fn aux_mode(&self, j: usize) -> f64 {
        let c = self.coupling;
        let left = if j >= 1 { 1.0 / self.variances[j - 1] } else { 0.0 };
        (2.0 * c - 1.0) / (c * (left + 1.0 / self.variances[j]))
    }

    pub fn update_variances(&mut self, data: &[f64], m: usize, floor: f64) {
        debug_assert_eq!(data.len(), self.len());
        let next: Vec<f64> = (0..self.len())
            .map(|i| self.variance_mode(i, data[i], m, floor))
            .collect();
        self.variances = next;
    }

    pub fn update_aux(&mut self) {
        let next: Vec<f64> = (0..self.len()).map(|j| self.aux_mode(j)).collect();
        self.aux = next;
    }

    /// The chain's share of the objective for data terms `data`.
    pub fn cost(&self, data: &[f64], m: usize) -> Result<f64> {
        let mut total = 0.0;
        for (i, (&x, &d)) in self.variances.iter().zip(data).enumerate() {
            if x.is_nan() || x <= 0.0 {
                return Err(Error::NonFinite("log of a non-positive variance"));
            }
            total += self.shape(i, m) * x.ln() + self.beta(i, d) / (2.0 * x);
        }
        let log_coef = 2.0 * self.coupling - 1.0;
        for &a in &self.aux {
            if a.is_nan() || a <= 0.0 {
                return Err(Error::NonFinite("log of a non-positive auxiliary"));
            }
            total -= log_coef * a.ln();
        }
        if !total.is_finite() {
            return Err(Error::NonFinite("cost"));
        }
        Ok(total)
    }
}

/// σ_k² from the residual energy ‖y_k − s_k‖² over `m` signals.
pub fn update_sigma2(k: usize, residual_sq: f64, state: &NoiseState, m: usize, floor: f64) -> f64 {
    state.variance_mode(k, residual_sq, m, floor)
}

/// ε_k² from the prior energy s_kᵀH⁻¹s_k.
pub fn update_eps2(k: usize, prior_quad: f64, state: &EnergyState, m: usize, floor: f64) -> f64 {
    state.variance_mode(k, prior_quad, m, floor)
}

pub fn update_w(k: usize, state: &NoiseState) -> f64 {
    state.aux_mode(k)
}

pub fn update_v(k: usize, state: &EnergyState) -> f64 {
    state.aux_mode(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(vars: &[f64], aux: f64, c: f64) -> GammaChain {
        GammaChain::new(vars.to_vec(), aux, c).unwrap()
    }

    #[test]
    fn zero_residual_leaves_only_the_prior() {
        let s = chain(&[1.0, 1.0, 1.0], 1e-12, 2.0);
        let got = update_sigma2(1, 0.0, &s, 500, VARIANCE_FLOOR);
        let expected = 2.0 * 2.0 * 2e-12 / (8.0 + 502.0);
        assert!((got - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn interior_arithmetic() {
        let s = chain(&[1.0, 1.0, 1.0], 0.0, 2.0);
        assert!((update_sigma2(0, 502.0, &s, 500, VARIANCE_FLOOR) - 502.0 / 510.0).abs() < 1e-15);
        let e = chain(&[1.0, 1.0, 1.0], 0.0, 2.0);
        assert!((update_eps2(1, 510.0, &e, 500, VARIANCE_FLOOR) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn last_gate_uses_single_neighbor_shape() {
        let s = chain(&[1.0, 1.0], 0.5, 2.0);
        let got = update_sigma2(1, 100.0, &s, 100, VARIANCE_FLOOR);
        assert!((got - (100.0 + 4.0 * 0.5) / (4.0 + 100.0 + 2.0)).abs() < 1e-15);
    }

    #[test]
    fn zero_energy_is_floored() {
        let e = chain(&[1.0, 1.0], 0.0, 2.0);
        assert_eq!(update_eps2(0, 0.0, &e, 10, VARIANCE_FLOOR), VARIANCE_FLOOR);
    }

    #[test]
    fn aux_arithmetic() {
        let s = chain(&[0.8, 0.8, 0.8], 1.0, 2.0);
        assert!((update_w(1, &s) - 0.6).abs() < 1e-15);
        let s = chain(&[1.0, 3.0], 1.0, 2.0);
        assert!((update_w(1, &s) - 9.0 / 8.0).abs() < 1e-15);
        // First auxiliary sees only the first variance.
        assert!((update_v(0, &s) - 3.0 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_weak_coupling() {
        assert!(GammaChain::new(vec![1.0], 1.0, 1.0).is_err());
        assert!(GammaChain::new(vec![1.0], 1.0, f64::NAN).is_err());
    }

    #[test]
    fn cost_detects_corrupted_state() {
        let mut s = chain(&[1.0, 1.0], 1.0, 2.0);
        assert!(s.cost(&[1.0, 1.0], 4).is_ok());
        s.aux[1] = 0.0;
        assert!(matches!(s.cost(&[1.0, 1.0], 4), Err(Error::NonFinite(_))));
    }

    #[test]
    fn doubling_an_auxiliary_shifts_cost_analytically() {
        let s = chain(&[0.7, 1.3, 2.1], 0.4, 2.0);
        let data = [3.0, 5.0, 1.0];
        let mut d = s.clone();
        d.aux[1] *= 2.0;
        let delta = d.cost(&data, 8).unwrap() - s.cost(&data, 8).unwrap();
        let c = 2.0;
        let expected = -(2.0 * c - 1.0) * 2f64.ln() + c * 0.4 * (1.0 / 0.7 + 1.0 / 1.3);
        assert!((delta - expected).abs() < 1e-12);
    }
}
