//! IEEE C57.91 hourly thermal and insulation-aging model.
//!
//! Top-oil rise follows a first-order exponential response to the ultimate
//! rise for the hour's load; the winding hot-spot gradient does the same with
//! the winding time constant. The day is treated as periodic: the top-oil
//! rise at the end of hour 24 seeds hour 1, and passes repeat until the
//! hourly values stop moving.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::HOURS;

/// Hot-spot temperature at which the aging acceleration factor is one, °C.
pub const REFERENCE_HOTSPOT_C: f64 = 110.0;
const AGING_B: f64 = 15000.0;
const KELVIN: f64 = 273.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalParameters {
    /// Nameplate rating, MVA.
    pub rated_mva: f64,
    /// Top-oil rise over ambient at rated load, °C.
    pub dtheta_to_r: f64,
    /// Hot-spot rise over top oil at rated load, °C.
    pub dtheta_h_r: f64,
    /// Load loss at rated load over no-load loss.
    pub loss_ratio: f64,
    /// Oil time constant, hours.
    pub tau_to: f64,
    /// Winding time constant, hours.
    pub tau_w: f64,
    /// Oil exponent: 0.8 ONAN, 0.9 ONAF.
    pub n_exp: f64,
    /// Winding exponent: 0.8 typical, 1.0 directed oil.
    pub m_exp: f64,
}

impl ThermalParameters {
    /// 50 MVA ONAF unit used for demos and tests. Real studies should supply
    /// manufacturer data.
    pub const ONAF_50MVA: ThermalParameters = ThermalParameters {
        rated_mva: 50.0,
        dtheta_to_r: 55.0,
        dtheta_h_r: 25.0,
        loss_ratio: 5.0,
        tau_to: 3.5,
        tau_w: 0.08,
        n_exp: 0.9,
        m_exp: 0.8,
    };

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "onaf-50mva" => Some(Self::ONAF_50MVA),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("rated_mva", self.rated_mva),
            ("dtheta_to_r", self.dtheta_to_r),
            ("dtheta_h_r", self.dtheta_h_r),
            ("loss_ratio", self.loss_ratio),
            ("tau_to", self.tau_to),
            ("tau_w", self.tau_w),
            ("n_exp", self.n_exp),
            ("m_exp", self.m_exp),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} = {v} must be positive")));
            }
        }
        for (name, v) in [("n_exp", self.n_exp), ("m_exp", self.m_exp)] {
            if !(0.5..=1.0).contains(&v) {
                return Err(Error::InvalidInput(format!("{name} = {v} outside [0.5, 1.0]")));
            }
        }
        if self.tau_to <= self.tau_w {
            return Err(Error::InvalidInput(format!(
                "oil time constant {} h must exceed winding time constant {} h",
                self.tau_to, self.tau_w
            )));
        }
        Ok(())
    }
}

/// On-disk thermal parameter file: either a preset name, explicit values,
/// or a preset with individual overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalParameterFile {
    pub preset: Option<String>,
    pub rated_mva: Option<f64>,
    pub dtheta_to_r: Option<f64>,
    pub dtheta_h_r: Option<f64>,
    pub loss_ratio: Option<f64>,
    pub tau_to: Option<f64>,
    pub tau_w: Option<f64>,
    pub n_exp: Option<f64>,
    pub m_exp: Option<f64>,
}

impl ThermalParameterFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidInput(format!("thermal parameters: {e}")))
    }

    pub fn load(path: &Path) -> Result<ThermalParameters> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)?.resolve()
    }

    pub fn resolve(&self) -> Result<ThermalParameters> {
        let base = match &self.preset {
            Some(name) => Some(
                ThermalParameters::preset(name)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown thermal preset {name:?}")))?,
            ),
            None => None,
        };
        let pick = |name: &str, v: Option<f64>, from: Option<f64>| {
            v.or(from)
                .ok_or_else(|| Error::InvalidInput(format!("thermal parameter {name} missing")))
        };
        let p = ThermalParameters {
            rated_mva: pick("rated_mva", self.rated_mva, base.map(|b| b.rated_mva))?,
            dtheta_to_r: pick("dtheta_to_r", self.dtheta_to_r, base.map(|b| b.dtheta_to_r))?,
            dtheta_h_r: pick("dtheta_h_r", self.dtheta_h_r, base.map(|b| b.dtheta_h_r))?,
            loss_ratio: pick("loss_ratio", self.loss_ratio, base.map(|b| b.loss_ratio))?,
            tau_to: pick("tau_to", self.tau_to, base.map(|b| b.tau_to))?,
            tau_w: pick("tau_w", self.tau_w, base.map(|b| b.tau_w))?,
            n_exp: pick("n_exp", self.n_exp, base.map(|b| b.n_exp))?,
            m_exp: pick("m_exp", self.m_exp, base.map(|b| b.m_exp))?,
        };
        p.validate()?;
        Ok(p)
    }
}

/// What goes in the numerator of the exponential response term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResponseExponent {
    /// `dt / τ`, the step duration.
    #[default]
    StepDuration,
    /// `24 / τ` regardless of step; kept for comparison runs.
    LiteralTwentyFour,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    pub dt_hours: f64,
    pub exponent: ResponseExponent,
    /// Starting top-oil rise for hour 1 of the first pass, °C.
    pub initial_top_oil: f64,
    /// Largest hourly top-oil change between passes that counts as converged, °C.
    pub convergence_c: f64,
    pub max_passes: usize,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            dt_hours: 1.0,
            exponent: ResponseExponent::StepDuration,
            initial_top_oil: 0.0,
            convergence_c: 0.01,
            max_passes: 100,
        }
    }
}

impl SimulationOptions {
    fn response(&self, tau: f64) -> f64 {
        let span = match self.exponent {
            ResponseExponent::StepDuration => self.dt_hours,
            ResponseExponent::LiteralTwentyFour => 24.0,
        };
        1.0 - (-span / tau).exp()
    }
}

/// Ultimate top-oil rise for per-unit load `k`.
pub fn ultimate_top_oil_rise(k: f64, p: &ThermalParameters) -> f64 {
    let r = p.loss_ratio;
    p.dtheta_to_r * ((k * k * r + 1.0) / (r + 1.0)).powf(p.n_exp)
}

/// Hot-spot rise over top oil at steady per-unit load `k`.
pub fn steady_hotspot_rise(k: f64, p: &ThermalParameters) -> f64 {
    p.dtheta_h_r * k.powf(2.0 * p.m_exp)
}

fn approach(initial: f64, ultimate: f64, response: f64) -> f64 {
    (ultimate - initial) * response + initial
}

/// Top-oil rise at the end of a step of length `dt_hours` at load `k_u`.
pub fn top_oil_step(dtheta_to_init: f64, k_u: f64, p: &ThermalParameters, dt_hours: f64) -> f64 {
    approach(
        dtheta_to_init,
        ultimate_top_oil_rise(k_u, p),
        1.0 - (-dt_hours / p.tau_to).exp(),
    )
}

/// Hot-spot rise at the end of a step whose load moved from `k_i` to `k_u`.
pub fn hotspot_step(k_i: f64, k_u: f64, p: &ThermalParameters, dt_hours: f64) -> f64 {
    approach(
        steady_hotspot_rise(k_i, p),
        steady_hotspot_rise(k_u, p),
        1.0 - (-dt_hours / p.tau_w).exp(),
    )
}

/// Insulation aging acceleration relative to a 110 °C hot spot.
pub fn aging_factor(theta_h: f64) -> f64 {
    (AGING_B / (REFERENCE_HOTSPOT_C + KELVIN) - AGING_B / (theta_h + KELVIN)).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayThermalResult {
    pub dtheta_to: [f64; HOURS],
    pub dtheta_h: [f64; HOURS],
    pub theta_h: [f64; HOURS],
    pub f_aa: [f64; HOURS],
    pub f_eqa: f64,
    /// Top-oil passes run, including the final confirming one.
    pub iterations: usize,
    pub residual: f64,
}

/// Simulates one periodic day of per-unit loads against hourly ambient.
pub fn simulate_day(
    loads_pu: &[f64; HOURS],
    ambient: &[f64; HOURS],
    p: &ThermalParameters,
    opts: &SimulationOptions,
) -> Result<DayThermalResult> {
    if let Some(bad) = loads_pu.iter().find(|k| !(k.is_finite() && **k >= 0.0)) {
        return Err(Error::InvalidInput(format!("per-unit load {bad} must be non-negative")));
    }
    let oil_response = opts.response(p.tau_to);
    let winding_response = opts.response(p.tau_w);
    let ultimate: [f64; HOURS] = loads_pu.map(|k| ultimate_top_oil_rise(k, p));

    let mut dtheta_to = [f64::NAN; HOURS];
    let mut carry = opts.initial_top_oil;
    let mut passes = 0;
    let mut residual = f64::INFINITY;
    while passes < opts.max_passes {
        passes += 1;
        residual = 0.0f64;
        for h in 0..HOURS {
            let next = approach(carry, ultimate[h], oil_response);
            residual = residual.max((next - dtheta_to[h]).abs());
            if dtheta_to[h].is_nan() {
                residual = f64::INFINITY;
            }
            dtheta_to[h] = next;
            carry = next;
        }
        if residual < opts.convergence_c {
            break;
        }
    }
    if !(residual < opts.convergence_c) {
        return Err(Error::NonConvergence { passes, residual });
    }

    let mut dtheta_h = [0.0; HOURS];
    let mut theta_h = [0.0; HOURS];
    let mut f_aa = [0.0; HOURS];
    for h in 0..HOURS {
        let k_i = loads_pu[(h + HOURS - 1) % HOURS];
        dtheta_h[h] = approach(
            steady_hotspot_rise(k_i, p),
            steady_hotspot_rise(loads_pu[h], p),
            winding_response,
        );
        theta_h[h] = ambient[h] + dtheta_to[h] + dtheta_h[h];
        f_aa[h] = aging_factor(theta_h[h]);
    }
    let f_eqa = f_aa.iter().sum::<f64>() / HOURS as f64;
    Ok(DayThermalResult {
        dtheta_to,
        dtheta_h,
        theta_h,
        f_aa,
        f_eqa,
        iterations: passes,
        residual,
    })
}
