//! Inputs shared by the per-slot optimization steps.

use serde::{Deserialize, Serialize};

use crate::array::{ArrayGeometry, ChannelEstimate};
use crate::error::{Error, Result};
use crate::kinematics::VehicleState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotParams {
    /// `P_t`, watts.
    pub power_budget: f64,
    /// `F` in `−F·ln ρ`, watts.
    pub computing_coefficient: f64,
    pub sigma_c2: f64,
    pub sigma_r2: f64,
    pub n_samples: usize,
    /// Outage tolerance of the intended-rate constraints.
    pub epsilon_intended: f64,
    /// Outage tolerance of the eavesdropper-rate constraints.
    pub epsilon_eavesdropper: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub iota: f64,
}

impl SlotParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("power_budget", self.power_budget),
            ("computing_coefficient", self.computing_coefficient),
            ("sigma_c2", self.sigma_c2),
            ("sigma_r2", self.sigma_r2),
            ("iota", self.iota),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("epsilon_intended", self.epsilon_intended), ("epsilon_eavesdropper", self.epsilon_eavesdropper)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidArgument(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if !(self.kappa1 >= 0.0 && self.kappa2 >= 0.0) {
            return Err(Error::InvalidArgument("trade-off weights must be non-negative".into()));
        }
        if self.n_samples == 0 {
            return Err(Error::InvalidArgument("need at least one radar sample".into()));
        }
        Ok(())
    }
}

/// Predicted state of a tracked vehicle and its prior angle information
/// `(M_{t|t-1}⁻¹)[1,1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingTarget {
    pub state: VehicleState,
    pub prior_info: f64,
}

/// Everything the optimizer sees in one slot.
///
/// `targets` lists the intended vehicles first, then the unintended ones, and
/// carries one sensing covariance each.
#[derive(Debug, Clone)]
pub struct SlotProblem {
    pub geometry: ArrayGeometry,
    pub intended: Vec<ChannelEstimate>,
    pub eavesdroppers: Vec<ChannelEstimate>,
    pub targets: Vec<SensingTarget>,
    pub params: SlotParams,
}

impl SlotProblem {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let n = self.geometry.num_antennas;
        if self.intended.is_empty() {
            return Err(Error::InvalidArgument("need at least one intended vehicle".into()));
        }
        for est in self.intended.iter().chain(&self.eavesdroppers) {
            if est.dim() != n {
                return Err(Error::Dimension(format!("channel of length {} for {n} antennas", est.dim())));
            }
        }
        if self.targets.len() != self.intended.len() + self.eavesdroppers.len() {
            return Err(Error::Dimension(format!(
                "{} sensing targets for {} vehicles",
                self.targets.len(),
                self.intended.len() + self.eavesdroppers.len()
            )));
        }
        Ok(())
    }

    pub fn num_intended(&self) -> usize {
        self.intended.len()
    }

    pub fn num_vehicles(&self) -> usize {
        self.targets.len()
    }
}

/// Rate targets and extraction ratios held fixed while the beams are
/// optimized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Targets {
    /// Intended semantic-rate target `λ`.
    pub lambda: f64,
    /// Eavesdropper semantic-rate cap `ϱ`.
    pub varrho: f64,
    pub rho: Vec<f64>,
}
