use serde::{Deserialize, Serialize};

use crate::channel::AntennaSubset;
use crate::error::{Error, Result};
use crate::linalg::CVec;
use crate::metrics::{dbm_to_watts, NoiseModel, PowerBudget};

/// System parameters shared by every optimization stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub budget: PowerBudget,
    pub noise: NoiseModel,
    /// `μ_k`.
    pub weights: Vec<f64>,
    /// Radar target direction in radians.
    pub target_angle: f64,
    pub d_over_lambda: f64,
}

impl Scenario {
    /// P = 20 dBm, ρ = 0.9, η = 0.75, σ² = -20 dBm, σ₁² = -40 dBm, equal
    /// weights, target at 30°.
    pub fn standard(num_users: usize) -> Self {
        Self {
            budget: PowerBudget {
                total: dbm_to_watts(20.0),
                split_ratio: 0.9,
                radar_ratio: 0.75,
            },
            noise: NoiseModel::uniform(num_users, dbm_to_watts(-20.0), dbm_to_watts(-40.0)),
            weights: vec![1.0 / num_users.max(1) as f64; num_users],
            target_angle: 30f64.to_radians(),
            d_over_lambda: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.budget.validate()?;
        self.noise.validate()?;
        if self.weights.len() != self.noise.user_noise.len() {
            return Err(Error::invalid("one weight and one noise power per user required"));
        }
        if self.weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::invalid("user weights must be nonnegative"));
        }
        if !(self.d_over_lambda > 0.0) {
            return Err(Error::invalid("d/lambda must be positive"));
        }
        Ok(())
    }

    pub fn num_users(&self) -> usize {
        self.weights.len()
    }

    pub fn steering(&self, subset: &AntennaSubset) -> CVec {
        crate::channel::steering_vector(self.target_angle, subset, self.d_over_lambda)
    }

    /// Per-antenna transmit power `P_s / M_s`.
    pub fn per_antenna_power(&self, num_selected: usize) -> f64 {
        self.budget.bs_power() / num_selected as f64
    }
}
