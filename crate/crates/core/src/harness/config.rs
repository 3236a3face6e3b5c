use serde::{Deserialize, Serialize};

use crate::channel::{
    db_to_linear, dbm_to_watts, CELL_INNER_RADIUS_M, CELL_OUTER_RADIUS_M, PATHLOSS_EXPONENT, PATHLOSS_REFERENCE_DB,
};
use crate::precoding::{Scheme, MIN_NORMALIZATION_TRIALS};
use crate::{Error, Result};

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 4] = ["fig3", "fig4", "fig5", "fig6"];

/// Uniform annular cell with distance-based pathloss `L0 r^-eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacroCell {
    pub pathloss_exponent: f64,
    /// `10 log10(L0)`.
    pub pathloss_reference_db: f64,
    pub r_in: f64,
    pub r_out: f64,
    pub noise_density_dbm_hz: f64,
    pub bandwidth_hz: f64,
}

impl Default for MacroCell {
    fn default() -> Self {
        Self {
            pathloss_exponent: PATHLOSS_EXPONENT,
            pathloss_reference_db: PATHLOSS_REFERENCE_DB,
            r_in: CELL_INNER_RADIUS_M,
            r_out: CELL_OUTER_RADIUS_M,
            noise_density_dbm_hz: -174.0,
            bandwidth_hz: 20e6,
        }
    }
}

impl MacroCell {
    pub fn pathloss(&self, r: f64) -> f64 {
        db_to_linear(self.pathloss_reference_db) * r.powf(-self.pathloss_exponent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelModel {
    /// Every user has pathloss `beta` and noise power `sigma2`.
    Symmetric { beta: f64, sigma2: f64 },
    /// Users dropped at random in a macro cell; `Pt` is in watts.
    MacroCell(MacroCell),
}

/// One operating point of the downlink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(rename = "L")]
    pub antennas: usize,
    #[serde(rename = "K")]
    pub users: usize,
    /// When set, `K = L / theta` follows `L` in antenna sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Linear transmit power, in the unit of the noise power.
    #[serde(rename = "Pt")]
    pub pt: f64,
    pub rho: f64,
    pub channel: ChannelModel,
    /// Training symbols behind the CSIT error `1 / (Pt N)`; absent for perfect CSIT.
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub training_symbols: Option<u32>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rzf_reg: Option<f64>,
    #[serde(default = "default_normalization_trials")]
    pub normalization_trials: usize,
}

fn default_normalization_trials() -> usize {
    2000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParameter {
    #[serde(rename = "rho")]
    Rho,
    #[serde(rename = "L")]
    Antennas,
    #[serde(rename = "Pt")]
    Pt,
    #[serde(rename = "N")]
    TrainingSymbols,
}

impl SweepParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParameter::Rho => "rho",
            SweepParameter::Antennas => "L",
            SweepParameter::Pt => "Pt",
            SweepParameter::TrainingSymbols => "N",
        }
    }
}

/// A grid of operating points evaluated for several schemes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub swept_parameter: SweepParameter,
    pub grid: Vec<f64>,
    pub fixed: SystemConfig,
    pub schemes: Vec<Scheme>,
    /// User-location realizations; must be 1 for the symmetric channel.
    #[serde(default = "one")]
    pub drops: usize,
    pub trials_per_point: usize,
}

fn one() -> usize {
    1
}

fn is_count(v: f64) -> bool {
    v.is_finite() && v >= 1.0 && v.fract() == 0.0
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.antennas == 0 || self.users == 0 {
            return Err(Error::config("L and K must be positive"));
        }
        if !(self.pt.is_finite() && self.pt > 0.0) {
            return Err(Error::config(format!("Pt must be finite and positive, got {}", self.pt)));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::config(format!("rho must lie in [0, 1], got {}", self.rho)));
        }
        if let Some(theta) = self.theta {
            if !(theta > 0.0) || (self.antennas as f64 / theta - self.users as f64).abs() > 1e-9 {
                return Err(Error::config(format!("L / K must equal theta = {theta}")));
            }
        }
        if self.training_symbols == Some(0) {
            return Err(Error::config("N must be at least 1"));
        }
        if let Some(reg) = self.rzf_reg {
            if !(reg.is_finite() && reg > 0.0) {
                return Err(Error::config(format!("rzf_reg must be positive, got {reg}")));
            }
        }
        match self.channel {
            ChannelModel::Symmetric { beta, sigma2 } => {
                if !(beta > 0.0 && beta.is_finite() && sigma2 > 0.0 && sigma2.is_finite()) {
                    return Err(Error::config("beta and sigma2 must be finite and positive"));
                }
            }
            ChannelModel::MacroCell(c) => {
                if !(c.r_in > 0.0 && c.r_in < c.r_out && c.r_out.is_finite()) {
                    return Err(Error::config(format!("need 0 < r_in < r_out, got {} and {}", c.r_in, c.r_out)));
                }
                if !(c.bandwidth_hz > 0.0 && c.pathloss_exponent > 0.0) {
                    return Err(Error::config("bandwidth and pathloss exponent must be positive"));
                }
            }
        }
        Ok(())
    }

    /// The configuration at one grid point of a sweep along `param`.
    pub fn at(&self, param: SweepParameter, value: f64) -> Result<Self> {
        let mut c = self.clone();
        match param {
            SweepParameter::Rho => c.rho = value,
            SweepParameter::Pt => c.pt = value,
            SweepParameter::Antennas => {
                if !is_count(value) {
                    return Err(Error::config(format!("L grid values must be positive integers, got {value}")));
                }
                c.antennas = value as usize;
                if let Some(theta) = self.theta {
                    let k = c.antennas as f64 / theta;
                    if k < 1.0 || (k - k.round()).abs() > 1e-9 {
                        return Err(Error::config(format!("L = {value} does not keep theta = {theta} integral")));
                    }
                    c.users = k.round() as usize;
                }
            }
            SweepParameter::TrainingSymbols => {
                if !is_count(value) || value > u32::MAX as f64 {
                    return Err(Error::config(format!("N grid values must be positive integers, got {value}")));
                }
                c.training_symbols = Some(value as u32);
            }
        }
        c.validate()?;
        Ok(c)
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::config("grid must not be empty"));
        }
        if self.grid.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::config("grid must be sorted in increasing order"));
        }
        if self.schemes.is_empty() {
            return Err(Error::config("at least one scheme is required"));
        }
        if self.trials_per_point == 0 {
            return Err(Error::config("trials_per_point must be positive"));
        }
        match self.fixed.channel {
            ChannelModel::Symmetric { .. } if self.drops != 1 => {
                return Err(Error::config("drops only apply to the macro-cell channel; use 1"));
            }
            _ if self.drops == 0 => return Err(Error::config("drops must be positive")),
            _ => {}
        }
        self.fixed.validate()?;
        let imperfect =
            self.fixed.training_symbols.is_some() || self.swept_parameter == SweepParameter::TrainingSymbols;
        for &scheme in &self.schemes {
            if imperfect && !scheme.is_matched_filter() {
                return Err(Error::config(format!(
                    "{scheme} is only supported under perfect CSIT; imperfect CSIT requires MF_JOINT or MRT_MF"
                )));
            }
            if !scheme.is_matched_filter() && self.fixed.normalization_trials < MIN_NORMALIZATION_TRIALS {
                return Err(Error::config(format!(
                    "normalization_trials must be at least {MIN_NORMALIZATION_TRIALS} for {scheme}"
                )));
            }
        }
        for &v in &self.grid {
            let c = self.fixed.at(self.swept_parameter, v)?;
            if self.schemes.contains(&Scheme::MrtZf) && c.users > c.antennas {
                return Err(Error::config(format!("MRT_ZF needs K <= L, got K = {} and L = {}", c.users, c.antennas)));
            }
        }
        Ok(())
    }
}

const RHO_GRID: [f64; 11] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

/// Built-in scenario; `fig3` needs an explicit `Pt` and fails here.
pub fn preset(name: &str) -> Result<SweepSpec> {
    preset_with_pt(name, None)
}

/// Built-in scenario with an optional transmit-power override (linear).
pub fn preset_with_pt(name: &str, pt: Option<f64>) -> Result<SweepSpec> {
    let symmetric = ChannelModel::Symmetric { beta: 1.0, sigma2: 1.0 };
    let spec = match name {
        "fig3" => {
            let pt = pt.ok_or_else(|| Error::config("preset fig3 has no default Pt; supply one"))?;
            SweepSpec {
                swept_parameter: SweepParameter::Antennas,
                grid: vec![20.0, 50.0, 100.0, 150.0, 200.0],
                fixed: SystemConfig {
                    antennas: 100,
                    users: 20,
                    theta: Some(5.0),
                    pt,
                    rho: 0.5,
                    channel: symmetric,
                    training_symbols: Some(10),
                    seed: 0,
                    rzf_reg: None,
                    normalization_trials: default_normalization_trials(),
                },
                schemes: vec![Scheme::MfJoint],
                drops: 1,
                trials_per_point: 2000,
            }
        }
        "fig4" => SweepSpec {
            swept_parameter: SweepParameter::Rho,
            grid: RHO_GRID.to_vec(),
            fixed: SystemConfig {
                antennas: 12,
                users: 4,
                theta: None,
                pt: pt.unwrap_or(db_to_linear(10.0)),
                rho: 0.5,
                channel: symmetric,
                training_symbols: Some(10),
                seed: 0,
                rzf_reg: None,
                normalization_trials: default_normalization_trials(),
            },
            schemes: vec![Scheme::MfJoint],
            drops: 1,
            trials_per_point: 2000,
        },
        "fig5" | "fig6" => SweepSpec {
            swept_parameter: SweepParameter::Rho,
            grid: RHO_GRID.to_vec(),
            fixed: SystemConfig {
                antennas: if name == "fig5" { 8 } else { 16 },
                users: 8,
                theta: None,
                pt: pt.unwrap_or(dbm_to_watts(40.0)),
                rho: 0.5,
                channel: ChannelModel::MacroCell(MacroCell::default()),
                training_symbols: None,
                seed: 0,
                rzf_reg: None,
                normalization_trials: default_normalization_trials(),
            },
            schemes: vec![Scheme::MfJoint, Scheme::MrtZf, Scheme::MrtRzf],
            drops: 1000,
            trials_per_point: 2000,
        },
        other => {
            return Err(Error::config(format!("unknown preset {other:?}; expected one of {}", PRESETS.join(", "))))
        }
    };
    spec.validate()?;
    Ok(spec)
}
