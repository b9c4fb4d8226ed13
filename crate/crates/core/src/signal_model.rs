//! Brown ocean-echo model for pulse-limited radar altimeters.
//!
//! The mean return power at time `t` is
//!
//! ```text
//! s(t) = Pu/2 · [1 + erf((t − τs − α·σc²) / (√2·σc))] · exp(−α·(t − τs − α·σc²/2))
//! σc²  = (SWH / 2c)² + σp²
//! ```
//!
//! with `τs = 2τ/c` the epoch in seconds. A waveform is sampled at `t = k·T`
//! for gates `k = 1..=K`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Instrument constants. The `jason2_like` profile is representative of a
/// Ku-band pulse-limited altimeter, not an authoritative mission record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrownConstants {
    /// Antenna-pattern decay of the trailing edge, 1/s.
    pub alpha: f64,
    /// Width of the point-target response, s.
    pub sigma_p: f64,
    /// Speed of light, m/s.
    pub c: f64,
    /// Gate spacing T, s.
    pub gate_resolution: f64,
    /// Number of gates K per waveform.
    pub num_gates: usize,
}

impl Default for BrownConstants {
    fn default() -> Self {
        Self::jason2_like()
    }
}

impl BrownConstants {
    pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

    /// 320 MHz bandwidth (T = 3.125 ns), σp = 0.513·T, α derived from a 1.28°
    /// beamwidth at 1336 km altitude.
    pub fn jason2_like() -> Self {
        let gate_resolution = 3.125e-9;
        Self {
            alpha: 2.06e6,
            sigma_p: 0.513 * gate_resolution,
            c: Self::SPEED_OF_LIGHT,
            gate_resolution,
            num_gates: 104,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.alpha) {
            return Err(Error::BadRange(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !positive(self.sigma_p) {
            return Err(Error::BadRange(format!("sigma_p must be > 0, got {}", self.sigma_p)));
        }
        if !positive(self.c) {
            return Err(Error::BadRange(format!("c must be > 0, got {}", self.c)));
        }
        if !positive(self.gate_resolution) {
            return Err(Error::BadRange(format!(
                "gate_resolution must be > 0, got {}",
                self.gate_resolution
            )));
        }
        if self.num_gates < 2 {
            return Err(Error::BadRange(format!(
                "num_gates must be >= 2, got {}",
                self.num_gates
            )));
        }
        Ok(())
    }

    /// Reads a key-value profile (`alpha`, `sigma_p`, `c`, `gate_resolution`,
    /// `num_gates`). Missing keys fall back to the jason2-like profile.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv_str(&text).map_err(|e| match e {
            Error::InvalidArgument(reason) => Error::format(path, reason),
            other => other,
        })
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Partial {
            alpha: Option<f64>,
            sigma_p: Option<f64>,
            c: Option<f64>,
            gate_resolution: Option<f64>,
            num_gates: Option<usize>,
        }
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        // Solver keys may live in the same file; only the constants are read here.
        let mut own = toml::Table::new();
        for key in ["alpha", "sigma_p", "c", "gate_resolution", "num_gates"] {
            if let Some(v) = table.get(key) {
                own.insert(key.to_string(), v.clone());
            }
        }
        let p: Partial = own
            .try_into()
            .map_err(|e: toml::de::Error| Error::InvalidArgument(e.to_string()))?;
        let base = Self::jason2_like();
        let consts = Self {
            alpha: p.alpha.unwrap_or(base.alpha),
            sigma_p: p.sigma_p.unwrap_or(base.sigma_p),
            c: p.c.unwrap_or(base.c),
            gate_resolution: p.gate_resolution.unwrap_or(base.gate_resolution),
            num_gates: p.num_gates.unwrap_or(base.num_gates),
        };
        consts.validate()?;
        Ok(consts)
    }

    /// One gate expressed as a two-way range in meters (c·T/2).
    pub fn gate_in_meters(&self) -> f64 {
        self.c * self.gate_resolution / 2.0
    }

    pub fn gates_to_meters(&self, gates: f64) -> f64 {
        gates * self.gate_in_meters()
    }

    pub fn meters_to_gates(&self, meters: f64) -> f64 {
        meters / self.gate_in_meters()
    }

    /// Epoch in seconds for an epoch in meters.
    pub fn epoch_seconds(&self, tau_m: f64) -> f64 {
        2.0 * tau_m / self.c
    }
}

/// Altimetric parameters of one echo. `tau` is stored in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrownParams {
    pub swh: f64,
    pub tau: f64,
    pub pu: f64,
}

impl BrownParams {
    pub fn new(swh: f64, tau: f64, pu: f64) -> Self {
        Self { swh, tau, pu }
    }

    pub fn with_tau_gates(swh: f64, tau_gates: f64, pu: f64, consts: &BrownConstants) -> Self {
        Self::new(swh, consts.gates_to_meters(tau_gates), pu)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.swh, self.tau, self.pu]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn validate(&self, consts: &BrownConstants) -> Result<()> {
        if !(self.swh.is_finite() && self.tau.is_finite() && self.pu.is_finite()) {
            return Err(Error::NonFinite("Brown parameters"));
        }
        if self.swh < 0.0 {
            return Err(Error::BadRange(format!("swh must be >= 0, got {}", self.swh)));
        }
        if self.pu < 0.0 {
            return Err(Error::BadRange(format!("pu must be >= 0, got {}", self.pu)));
        }
        let tau_s = consts.epoch_seconds(self.tau);
        let window = consts.num_gates as f64 * consts.gate_resolution;
        if !(0.0..=window).contains(&tau_s) {
            return Err(Error::BadRange(format!(
                "tau = {} m lies outside the {}-gate window",
                self.tau, consts.num_gates
            )));
        }
        Ok(())
    }
}

/// K power samples of one echo.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform(pub Vec<f64>);

impl Waveform {
    pub fn samples(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// σc² in s².
pub fn sigma_c2(params: &BrownParams, consts: &BrownConstants) -> f64 {
    let swh_term = params.swh / (2.0 * consts.c);
    swh_term * swh_term + consts.sigma_p * consts.sigma_p
}

struct Terms {
    /// 1 + erf(u), evaluated as erfc(−u) so the pre-edge tail keeps relative precision.
    rise: f64,
    envelope: f64,
    u: f64,
    sigma_c: f64,
    sigma_c2: f64,
}

fn terms(t: f64, params: &BrownParams, consts: &BrownConstants) -> Terms {
    let sc2 = sigma_c2(params, consts);
    let sc = sc2.sqrt();
    let tau_s = consts.epoch_seconds(params.tau);
    let alpha = consts.alpha;
    let u = (t - tau_s - alpha * sc2) / (SQRT_2 * sc);
    Terms {
        rise: libm::erfc(-u),
        envelope: (-alpha * (t - tau_s - alpha * sc2 / 2.0)).exp(),
        u,
        sigma_c: sc,
        sigma_c2: sc2,
    }
}

/// Continuous-time model value at `t` seconds.
pub fn brown_at(t: f64, params: &BrownParams, consts: &BrownConstants) -> f64 {
    let tr = terms(t, params, consts);
    params.pu / 2.0 * tr.rise * tr.envelope
}

fn gate_time(k: usize, consts: &BrownConstants) -> f64 {
    (k + 1) as f64 * consts.gate_resolution
}

pub fn brown_waveform(params: &BrownParams, consts: &BrownConstants) -> Result<Waveform> {
    let samples: Vec<f64> = (0..consts.num_gates)
        .map(|k| brown_at(gate_time(k, consts), params, consts))
        .collect();
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Brown waveform"));
    }
    Ok(Waveform(samples))
}

/// Rows are gates; columns are ∂s/∂SWH (per m), ∂s/∂τ (per m), ∂s/∂Pu.
pub fn brown_jacobian(params: &BrownParams, consts: &BrownConstants) -> Result<Vec<[f64; 3]>> {
    let alpha = consts.alpha;
    let dq_dswh = params.swh / (2.0 * consts.c * consts.c);
    let dtaus_dtau = 2.0 / consts.c;
    let mut jac = Vec::with_capacity(consts.num_gates);
    for k in 0..consts.num_gates {
        let tr = terms(gate_time(k, consts), params, consts);
        let gauss = FRAC_2_SQRT_PI * (-tr.u * tr.u).exp();
        let half_pu = params.pu / 2.0;

        let du_dq = -alpha / (SQRT_2 * tr.sigma_c) - tr.u / (2.0 * tr.sigma_c2);
        let ds_dq = half_pu * tr.envelope * (gauss * du_dq + tr.rise * alpha * alpha / 2.0);

        let du_dtaus = -1.0 / (SQRT_2 * tr.sigma_c);
        let ds_dtaus = half_pu * tr.envelope * (gauss * du_dtaus + tr.rise * alpha);

        let row = [ds_dq * dq_dswh, ds_dtaus * dtaus_dtau, 0.5 * tr.rise * tr.envelope];
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Brown Jacobian"));
        }
        jac.push(row);
    }
    Ok(jac)
}
