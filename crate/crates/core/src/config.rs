//! TOML scenario configuration.
//!
//! Powers are given in dBm and angles in degrees here; everything downstream
//! works in watts and radians. Every field has a default, so an empty file
//! is a valid configuration.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{ChannelParams, Point, SystemGeometry};
use crate::error::{Error, Result};
use crate::metrics::{dbm_to_watts, NoiseModel, PowerBudget};
use crate::optimizer::OptimizerConfig;
use crate::par::Execution;
use crate::ris_fp::QcqpSettings;
use crate::scenario::Scenario;
use crate::sdp::SdpSettings;
use crate::selection::CuckooParams;
use crate::wmmse::TransmitSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AsMode {
    Cuckoo,
    Random,
    Contiguous,
    Full,
}

impl AsMode {
    pub const ALL: [AsMode; 4] = [AsMode::Cuckoo, AsMode::Random, AsMode::Contiguous, AsMode::Full];

    pub fn name(self) -> &'static str {
        match self {
            AsMode::Cuckoo => "cuckoo",
            AsMode::Random => "random",
            AsMode::Contiguous => "contiguous",
            AsMode::Full => "full",
        }
    }
}

impl fmt::Display for AsMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AsMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AsMode::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown AS mode '{s}' (cuckoo|random|contiguous|full)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub bs_position: Point,
    pub ris_position: Point,
    pub user_center: Point,
    pub user_radius: f64,
    pub num_users: usize,
    pub num_antennas: usize,
    /// `M_s`.
    pub num_selected: usize,
    pub num_ris_elements: usize,
    pub target_angle_deg: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        let g = SystemGeometry::default();
        Self {
            bs_position: g.bs_position,
            ris_position: g.ris_position,
            user_center: g.user_center,
            user_radius: g.user_radius,
            num_users: g.num_users,
            num_antennas: g.num_antennas,
            num_selected: 6,
            num_ris_elements: g.num_ris_elements,
            target_angle_deg: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub pathloss_ref_db: f64,
    pub exponent_direct: f64,
    pub exponent_ris: f64,
    pub rician_factor: f64,
    pub d_over_lambda: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        let c = ChannelParams::default();
        Self {
            pathloss_ref_db: c.pathloss_ref_db,
            exponent_direct: c.exponent_direct,
            exponent_ris: c.exponent_ris,
            rician_factor: c.rician_factor,
            d_over_lambda: c.d_over_lambda,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerConfig {
    pub total_dbm: f64,
    /// `ρ`.
    pub split_ratio: f64,
    /// `η`.
    pub radar_ratio: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            total_dbm: 20.0,
            split_ratio: 0.9,
            radar_ratio: 0.75,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub user_noise_dbm: f64,
    pub ris_noise_dbm: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            user_noise_dbm: -20.0,
            ris_noise_dbm: -40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub mode: AsMode,
    /// Subsets drawn by the random-search baseline.
    pub random_draws: usize,
    pub cuckoo: CuckooParams,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            mode: AsMode::Cuckoo,
            random_draws: 3,
            cuckoo: CuckooParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub max_outer_iters: usize,
    pub wsr_tol: f64,
    pub sdp_tol: f64,
    pub sdp_max_iters: usize,
    pub randomization_candidates: usize,
    pub warm_start: bool,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let o = OptimizerConfig::default();
        Self {
            max_outer_iters: o.max_outer_iters,
            wsr_tol: o.wsr_tol,
            sdp_tol: o.transmit.sdp.tol,
            sdp_max_iters: o.transmit.sdp.max_iters,
            randomization_candidates: o.transmit.candidates,
            warm_start: o.transmit.warm_start,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub num_seeds: usize,
    pub first_seed: u64,
    pub output_dir: String,
    pub execution: Execution,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            num_seeds: 20,
            first_seed: 0,
            output_dir: "results".into(),
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub geometry: GeometryConfig,
    pub channel: ChannelConfig,
    pub power: PowerConfig,
    pub noise: NoiseConfig,
    /// `μ_k`; empty means `1/K` each.
    pub weights: Vec<f64>,
    pub selection: SelectionConfig,
    pub optimizer: OptimizerSection,
    pub run: RunConfig,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config always serializes")
    }

    /// Hex SHA-256 of the canonical TOML form, ignoring the output directory
    /// and execution mode since neither changes any result.
    pub fn config_hash(&self) -> String {
        let mut canon = self.clone();
        canon.run.output_dir = String::new();
        canon.run.execution = Execution::default();
        let digest = Sha256::digest(canon.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        if g.num_selected == 0 || g.num_selected > g.num_antennas {
            return Err(Error::Config(format!(
                "num_selected = {} must lie in 1..={}",
                g.num_selected, g.num_antennas
            )));
        }
        if !self.weights.is_empty() && self.weights.len() != g.num_users {
            return Err(Error::Config(format!(
                "{} weights given for {} users",
                self.weights.len(),
                g.num_users
            )));
        }
        if self.run.num_seeds == 0 {
            return Err(Error::Config("num_seeds must be at least 1".into()));
        }
        if self.selection.random_draws == 0 {
            return Err(Error::Config("random_draws must be at least 1".into()));
        }
        let checks = [
            self.geometry().validate(),
            self.channel_params(0).validate(),
            self.scenario().validate(),
            self.selection.cuckoo.validate(),
            self.optimizer_config(0).validate(),
        ];
        for r in checks {
            r.map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn geometry(&self) -> SystemGeometry {
        let g = &self.geometry;
        SystemGeometry {
            bs_position: g.bs_position,
            ris_position: g.ris_position,
            user_center: g.user_center,
            user_radius: g.user_radius,
            num_users: g.num_users,
            num_antennas: g.num_antennas,
            num_ris_elements: g.num_ris_elements,
            target_angle: g.target_angle_deg.to_radians(),
        }
    }

    pub fn channel_params(&self, seed: u64) -> ChannelParams {
        let c = &self.channel;
        ChannelParams {
            pathloss_ref_db: c.pathloss_ref_db,
            exponent_direct: c.exponent_direct,
            exponent_ris: c.exponent_ris,
            rician_factor: c.rician_factor,
            d_over_lambda: c.d_over_lambda,
            rng_seed: seed,
        }
    }

    pub fn scenario(&self) -> Scenario {
        let k = self.geometry.num_users;
        Scenario {
            budget: PowerBudget {
                total: dbm_to_watts(self.power.total_dbm),
                split_ratio: self.power.split_ratio,
                radar_ratio: self.power.radar_ratio,
            },
            noise: NoiseModel::uniform(
                k,
                dbm_to_watts(self.noise.user_noise_dbm),
                dbm_to_watts(self.noise.ris_noise_dbm),
            ),
            weights: if self.weights.is_empty() {
                vec![1.0 / k.max(1) as f64; k]
            } else {
                self.weights.clone()
            },
            target_angle: self.geometry.target_angle_deg.to_radians(),
            d_over_lambda: self.channel.d_over_lambda,
        }
    }

    pub fn optimizer_config(&self, seed: u64) -> OptimizerConfig {
        let o = &self.optimizer;
        OptimizerConfig {
            max_outer_iters: o.max_outer_iters,
            wsr_tol: o.wsr_tol,
            transmit: TransmitSettings {
                sdp: SdpSettings {
                    tol: o.sdp_tol,
                    max_iters: o.sdp_max_iters,
                    ..SdpSettings::default()
                },
                candidates: o.randomization_candidates,
                seed,
                warm_start: o.warm_start,
            },
            qcqp: QcqpSettings::default(),
            rng_seed: seed,
        }
    }

    pub fn cuckoo_params(&self, seed: u64) -> CuckooParams {
        CuckooParams {
            rng_seed: seed,
            ..self.selection.cuckoo.clone()
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.run.num_seeds as u64).map(|i| self.run.first_seed + i).collect()
    }
}
