//! Scenario files.
//!
//! Scenarios are TOML documents with a `schema_version` key. Powers are given
//! in dBm and angles in degrees; [`Scenario`] holds the same values in watts
//! and radians next to the document they came from.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::ArrayGeometry;
use crate::error::{Error, Result};
use crate::kinematics::{ProcessNoise, SlotClock, VehicleState};
use crate::opt::{AoParams, RandomizationParams, SlotParams};
use crate::tracking::{BeliefPrior, MeasurementModel};

pub const SCHEMA_VERSION: u32 = 1;

/// `10^{(dBm − 30)/10}`
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Ekf,
    Pf,
    /// Dead reckoning without measurement updates.
    None,
}

impl FilterKind {
    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Ekf => "ekf",
            FilterKind::Pf => "pf",
            FilterKind::None => "none",
        }
    }
}

impl std::str::FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ekf" => Ok(FilterKind::Ekf),
            "pf" => Ok(FilterKind::Pf),
            "none" => Ok(FilterKind::None),
            other => Err(Error::config("simulation.filter", format!("unknown filter `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Intended,
    Unintended,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Beamforming {
    /// Alternating optimization every slot.
    Optimized,
    /// Equal power over all covariances, no optimization.
    Isotropic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySection {
    pub antennas: usize,
    /// Element spacing in wavelengths.
    pub spacing_wavelengths: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSection {
    pub budget_dbm: f64,
    pub comm_noise_dbm: f64,
    pub radar_noise_dbm: f64,
    /// `F` in `−F·ln ρ`, watts.
    pub computing_coefficient_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub kappa1: f64,
    pub kappa2: f64,
    pub epsilon_intended: f64,
    pub epsilon_eavesdropper: f64,
    pub initial_lambda: f64,
    pub delta_lambda: f64,
    pub delta_varrho: f64,
    /// Frobenius threshold on beam increments, relative to the power budget.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub randomization_candidates: usize,
    pub per_vehicle_rho: bool,
    /// Start each slot from the previous slot's targets.
    pub warm_start: bool,
    pub beamforming: Beamforming,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemanticSection {
    pub enabled: bool,
    /// Semantic symbols per word, `ι`.
    pub iota: f64,
    pub rho_lower_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    /// `Ω = csi_error·|β̂|²·I`.
    pub csi_error: f64,
    /// Optimize on the true channels with `Ω = 0`.
    pub perfect_csi: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadarSection {
    /// Samples per slot, `T`.
    pub samples: usize,
    /// Scale the angle-measurement variance by the inverse matched-filter
    /// echo SNR, which includes the integration gain `T`.
    pub snr_link: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub slot_duration_s: f64,
    pub slots: usize,
    pub coverage_m: f64,
    pub filter: FilterKind,
    pub particles: usize,
    pub seed: u64,
    /// Monte-Carlo outage draws per slot; 0 disables the check.
    pub mc_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleConfig {
    pub role: Role,
    pub theta_deg: f64,
    pub distance_m: f64,
    pub velocity_mps: f64,
    pub beta_abs: f64,
    #[serde(default)]
    pub beta_phase_deg: f64,
    /// Process noise variances `(θ rad², d m², v (m/s)², β)`.
    pub q1: [f64; 4],
    /// Measurement variances `(θ rad², d m², v (m/s)²)`; the angle entry is
    /// divided by the echo SNR when `radar.snr_link` is set.
    pub q2: [f64; 3],
    /// Diagonal of the initial MSE matrix; defaults to `q1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m0: Option<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub array: ArraySection,
    pub power: PowerSection,
    pub optimizer: OptimizerSection,
    pub semantic: SemanticSection,
    pub channel: ChannelSection,
    pub radar: RadarSection,
    pub simulation: SimulationSection,
    pub vehicles: Vec<VehicleConfig>,
}

/// Per-vehicle quantities in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleSpec {
    pub role: Role,
    pub prior: BeliefPrior,
    pub process: ProcessNoise,
    pub measurement: MeasurementModel,
}

/// A validated scenario in watts and radians.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub geometry: ArrayGeometry,
    pub slot: SlotParams,
    pub ao: AoParams,
    pub randomization: RandomizationParams,
    pub clock: SlotClock,
    /// Intended vehicles first, in file order, then unintended ones.
    pub vehicles: Vec<VehicleSpec>,
}

impl Scenario {
    pub fn num_intended(&self) -> usize {
        self.vehicles.iter().filter(|v| v.role == Role::Intended).count()
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive and finite, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be non-negative and finite, got {v}")))
    }
}

fn finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be finite, got {v}")))
    }
}

fn open_unit(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must lie in (0, 1), got {v}")))
    }
}

impl ScenarioConfig {
    /// Checks every field and converts to SI units.
    pub fn resolve(&self) -> Result<Scenario> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        let a = &self.array;
        if a.antennas == 0 {
            return Err(Error::config("array.antennas", "must be at least 1"));
        }
        positive("array.spacing_wavelengths", a.spacing_wavelengths)?;

        let p = &self.power;
        finite("power.budget_dbm", p.budget_dbm)?;
        finite("power.comm_noise_dbm", p.comm_noise_dbm)?;
        finite("power.radar_noise_dbm", p.radar_noise_dbm)?;
        positive("power.computing_coefficient_w", p.computing_coefficient_w)?;

        let o = &self.optimizer;
        non_negative("optimizer.kappa1", o.kappa1)?;
        non_negative("optimizer.kappa2", o.kappa2)?;
        open_unit("optimizer.epsilon_intended", o.epsilon_intended)?;
        open_unit("optimizer.epsilon_eavesdropper", o.epsilon_eavesdropper)?;
        positive("optimizer.initial_lambda", o.initial_lambda)?;
        positive("optimizer.delta_lambda", o.delta_lambda)?;
        positive("optimizer.delta_varrho", o.delta_varrho)?;
        positive("optimizer.tolerance", o.tolerance)?;
        if o.max_iterations == 0 {
            return Err(Error::config("optimizer.max_iterations", "must be at least 1"));
        }
        if o.randomization_candidates == 0 {
            return Err(Error::config("optimizer.randomization_candidates", "must be at least 1"));
        }

        let s = &self.semantic;
        positive("semantic.iota", s.iota)?;
        if !(s.rho_lower_bound > 0.0 && s.rho_lower_bound <= 1.0) {
            return Err(Error::config(
                "semantic.rho_lower_bound",
                format!("must lie in (0, 1], got {}", s.rho_lower_bound),
            ));
        }
        non_negative("channel.csi_error", self.channel.csi_error)?;
        if self.radar.samples == 0 {
            return Err(Error::config("radar.samples", "must be at least 1"));
        }

        let sim = &self.simulation;
        positive("simulation.slot_duration_s", sim.slot_duration_s)?;
        if sim.slots == 0 {
            return Err(Error::config("simulation.slots", "must be at least 1"));
        }
        positive("simulation.coverage_m", sim.coverage_m)?;
        if sim.filter == FilterKind::Pf && sim.particles == 0 {
            return Err(Error::config("simulation.particles", "must be at least 1 with the particle filter"));
        }
        if sim.mc_samples != 0 && sim.mc_samples < crate::opt::MIN_OUTAGE_SAMPLES {
            return Err(Error::config(
                "simulation.mc_samples",
                format!("must be 0 or at least {}", crate::opt::MIN_OUTAGE_SAMPLES),
            ));
        }

        let sigma_r2 = dbm_to_watts(p.radar_noise_dbm);
        let mut intended = Vec::new();
        let mut unintended = Vec::new();
        for (i, v) in self.vehicles.iter().enumerate() {
            let field = |name: &str| format!("vehicles[{i}].{name}");
            finite(&field("theta_deg"), v.theta_deg)?;
            positive(&field("distance_m"), v.distance_m)?;
            if v.distance_m > sim.coverage_m {
                return Err(Error::config(field("distance_m"), "starts outside the coverage area"));
            }
            finite(&field("velocity_mps"), v.velocity_mps)?;
            positive(&field("beta_abs"), v.beta_abs)?;
            finite(&field("beta_phase_deg"), v.beta_phase_deg)?;
            for (j, q) in v.q1.iter().enumerate() {
                non_negative(&field(&format!("q1[{j}]")), *q)?;
            }
            for (j, q) in v.q2.iter().enumerate() {
                positive(&field(&format!("q2[{j}]")), *q)?;
            }
            if let Some(m0) = v.m0 {
                for (j, q) in m0.iter().enumerate() {
                    non_negative(&field(&format!("m0[{j}]")), *q)?;
                }
            }
            let state = VehicleState::new(
                v.theta_deg.to_radians(),
                v.distance_m,
                v.velocity_mps,
                Complex64::from_polar(v.beta_abs, v.beta_phase_deg.to_radians()),
            );
            let spec = VehicleSpec {
                role: v.role,
                prior: BeliefPrior {
                    state,
                    m0_diagonal: v.m0,
                },
                process: ProcessNoise::new(v.q1).map_err(|e| Error::config(field("q1"), e.to_string()))?,
                // Matched filtering over `T` samples divides the echo noise by `T`.
                measurement: MeasurementModel::new(v.q2, self.radar.snr_link, sigma_r2 / self.radar.samples as f64)
                    .map_err(|e| Error::config(field("q2"), e.to_string()))?,
            };
            match v.role {
                Role::Intended => intended.push(spec),
                Role::Unintended => unintended.push(spec),
            }
        }
        if intended.is_empty() {
            return Err(Error::config("vehicles", "need at least one intended vehicle"));
        }
        let mut vehicles = intended;
        vehicles.extend(unintended);

        let slot = SlotParams {
            power_budget: dbm_to_watts(p.budget_dbm),
            computing_coefficient: p.computing_coefficient_w,
            sigma_c2: dbm_to_watts(p.comm_noise_dbm),
            sigma_r2,
            n_samples: self.radar.samples,
            epsilon_intended: o.epsilon_intended,
            epsilon_eavesdropper: o.epsilon_eavesdropper,
            kappa1: o.kappa1,
            kappa2: o.kappa2,
            iota: s.iota,
        };
        slot.validate().map_err(|e| Error::config("power", e.to_string()))?;
        Ok(Scenario {
            config: self.clone(),
            geometry: ArrayGeometry::new(a.antennas, a.spacing_wavelengths)
                .map_err(|e| Error::config("array", e.to_string()))?,
            slot,
            ao: AoParams {
                initial_lambda: o.initial_lambda,
                delta_lambda: o.delta_lambda,
                delta_varrho: o.delta_varrho,
                tolerance: o.tolerance,
                max_iterations: o.max_iterations,
                rho_lower_bound: s.rho_lower_bound,
                semantic: s.enabled,
                per_vehicle_rho: o.per_vehicle_rho,
            },
            randomization: RandomizationParams {
                candidates: o.randomization_candidates,
                ..RandomizationParams::default()
            },
            clock: SlotClock::new(sim.slot_duration_s).map_err(|e| Error::config("simulation.slot_duration_s", e.to_string()))?,
            vehicles,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let field = e.span().map(|s| format!("at bytes {}..{}", s.start, s.end)).unwrap_or_default();
            Error::config(if field.is_empty() { "document".to_string() } else { field }, e.message().to_string())
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config("document", e.to_string()))
    }

    /// Two vehicles on a straight road, `N = 8`: the intended vehicle close to
    /// the roadside unit and an unintended one further away.
    pub fn nominal() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            array: ArraySection {
                antennas: 8,
                spacing_wavelengths: 0.5,
            },
            power: PowerSection {
                budget_dbm: 20.0,
                comm_noise_dbm: -30.0,
                radar_noise_dbm: -30.0,
                computing_coefficient_w: 0.01,
            },
            optimizer: OptimizerSection {
                kappa1: 0.5,
                kappa2: 0.5,
                epsilon_intended: 0.01,
                epsilon_eavesdropper: 0.01,
                initial_lambda: 0.1,
                delta_lambda: 0.1,
                delta_varrho: 0.1,
                tolerance: 1e-3,
                max_iterations: 100,
                randomization_candidates: 100,
                per_vehicle_rho: false,
                warm_start: true,
                beamforming: Beamforming::Optimized,
            },
            semantic: SemanticSection {
                enabled: true,
                iota: 1.0,
                rho_lower_bound: 0.65,
            },
            channel: ChannelSection {
                csi_error: 0.01,
                perfect_csi: false,
            },
            radar: RadarSection {
                samples: 64,
                snr_link: true,
            },
            simulation: SimulationSection {
                slot_duration_s: 0.02,
                slots: 100,
                coverage_m: 100.0,
                filter: FilterKind::Ekf,
                particles: 1000,
                seed: 1,
                mc_samples: 0,
            },
            vehicles: vec![
                vehicle(Role::Intended, 15.0, 8.0, 5.0, 2.5e-3, [4e-4, 1e-2, 1e-2, 6.25e-8]),
                vehicle(Role::Unintended, 5.0, 55.0, 20.0, 3.6e-4, [4e-4, 4e-2, 0.25, 1.296e-9]),
            ],
        }
    }

    /// The nominal scenario with a 20-element array.
    pub fn wide_array() -> Self {
        let mut c = Self::nominal();
        c.array.antennas = 20;
        c
    }

    /// The unintended vehicle drives past the roadside unit on the near lane
    /// and overtakes the intended vehicle at their closest approach.
    pub fn flyby() -> Self {
        let mut c = Self::nominal();
        // Without process noise both vehicles reach their closest approach
        // near slot 77, at lateral offsets of 2.07 m (intended) and 1.2 m
        // (unintended).
        c.vehicles[1] = vehicle(Role::Unintended, 2.23, 30.82, 20.0, 6.5e-4, [4e-4, 4e-2, 0.25, 4.225e-9]);
        c
    }
}

/// A vehicle with the shared measurement noise. Presets take `|β₀| ≈ 0.02/d₀`
/// and a per-slot `β` noise deviation of 10% of `|β₀|`.
pub fn vehicle(role: Role, theta_deg: f64, distance_m: f64, velocity_mps: f64, beta_abs: f64, q1: [f64; 4]) -> VehicleConfig {
    VehicleConfig {
        role,
        theta_deg,
        distance_m,
        velocity_mps,
        beta_abs,
        beta_phase_deg: 0.0,
        q1,
        q2: [1.0, 6e-7, 2e4],
        m0: None,
    }
}

pub fn load_config(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ScenarioConfig::from_toml(&text)?.resolve()
}

pub fn save_config(config: &ScenarioConfig, path: &Path) -> Result<()> {
    std::fs::write(path, config.to_toml()?).map_err(|e| Error::io(path, e))
}
