//! The slot loop: predict, design, transmit, measure, update.

use nalgebra::Matrix4;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Beamforming, FilterKind, Role, Scenario};
use crate::array::{true_channel, ChannelEstimate};
use crate::error::{Error, Result};
use crate::kinematics::{evolve_state, SlotClock, VehicleState};
use crate::linalg::{CMat, CVec};
use crate::opt::{
    ao_loop, gaussian_randomization, AoIteration, initial_targets, transmit_budget, validate_outage_mc, AoInit, BtiKind,
    ClarabelSolver, OutageEstimate, OutageTargets, SensingTarget, SlotProblem, Targets,
};
use crate::semantic::{comm_sense_power, computing_power, rate_report, transmit_covariance, BeamformerSet, RateReport};
use crate::sensing::pcrb_report;
use crate::tracking::{
    dead_reckon, ekf_predict, ekf_update, init_belief, prior_angle_information, simulate_measurement, EchoLink,
    TrackBelief, VehicleParticleFilter,
};

/// Independent random streams drawn from one seed.
mod stream {
    pub const TRUTH: u64 = 0;
    pub const MEASUREMENT: u64 = 1;
    pub const PARTICLES: u64 = 2;
    pub const RANDOMIZATION: u64 = 3;
    pub const OUTAGE: u64 = 4;
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed for a per-slot draw that does not disturb the long-lived streams.
fn slot_seed(seed: u64, stream: u64, slot: usize) -> u64 {
    seed ^ (stream << 56) ^ (slot as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotStatus {
    /// Optimized and the randomized beams satisfy every restriction.
    Optimal,
    /// Optimized, but the best randomized candidate violates a restriction.
    RandomizationViolation,
    /// No feasible point; the slot transmits isotropically.
    Infeasible,
    /// Isotropic beams by configuration.
    Isotropic,
}

impl SlotStatus {
    pub fn name(self) -> &'static str {
        match self {
            SlotStatus::Optimal => "optimal",
            SlotStatus::RandomizationViolation => "randomization_violation",
            SlotStatus::Infeasible => "infeasible",
            SlotStatus::Isotropic => "isotropic",
        }
    }

    pub fn is_feasible(self) -> bool {
        self == SlotStatus::Optimal
    }
}

/// Communication metrics for one vehicle in one slot.
///
/// For an intended vehicle `sinr` and the rates are its own; for an
/// unintended one they are the largest over the intended streams it could
/// decode, and `ssr` is absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkMetrics {
    pub sinr: f64,
    pub conventional_rate: f64,
    pub semantic_rate: f64,
    pub ssr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub role: Role,
    pub truth: VehicleState,
    pub predicted: VehicleState,
    pub posterior: VehicleState,
    pub pcrb_theta: f64,
    /// On the predicted channels the design saw.
    pub predicted_link: LinkMetrics,
    /// On the true channels.
    pub true_link: LinkMetrics,
    pub rho: Option<f64>,
    /// Empirical outage of this vehicle's constraints; for an unintended
    /// vehicle the worst over the intended streams.
    pub outage: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: usize,
    pub time: f64,
    pub status: SlotStatus,
    pub lambda: Option<f64>,
    pub varrho: Option<f64>,
    pub power_comm_sense: f64,
    pub power_computing: f64,
    pub ao_iterations: usize,
    pub ao_converged: bool,
    /// Every AO iteration of the accepted attempt.
    pub ao_trace: Vec<AoIteration>,
    pub randomization_margin: Option<f64>,
    pub vehicles: Vec<VehicleRecord>,
}

/// What the optimizer used in a slot, enough to re-run the outage check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRecord {
    pub slot: usize,
    pub beams: BeamformerSet,
    pub intended: Vec<ChannelEstimate>,
    pub eavesdroppers: Vec<ChannelEstimate>,
    pub lambda: f64,
    pub varrho: f64,
    pub rho: Vec<f64>,
    pub iota: f64,
    pub sigma_c2: f64,
    pub epsilon_intended: f64,
    pub epsilon_eavesdropper: f64,
}

impl DesignRecord {
    pub fn outage_targets(&self) -> OutageTargets {
        OutageTargets {
            lambda: self.lambda,
            varrho: self.varrho,
            rho: self.rho.clone(),
            iota: self.iota,
            sigma_c2: self.sigma_c2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub records: Vec<SlotRecord>,
    pub designs: Vec<DesignRecord>,
    /// Why the loop ended before the configured slot count, if it did.
    pub stopped_early: Option<String>,
}

impl RunResult {
    pub fn feasible_slots(&self) -> usize {
        self.records.iter().filter(|r| r.status.is_feasible()).count()
    }
}

enum Tracker {
    Kalman(TrackBelief),
    DeadReckoning(TrackBelief),
    Particles(Box<VehicleParticleFilter>, TrackBelief),
}

impl Tracker {
    fn belief(&self) -> &TrackBelief {
        match self {
            Tracker::Kalman(b) | Tracker::DeadReckoning(b) | Tracker::Particles(_, b) => b,
        }
    }
}

/// `(M⁻¹)[1,1]`, falling back to `1/M[1,1]` when `M` is too ill-conditioned
/// to invert.
fn prior_info(m: &Matrix4<f64>) -> f64 {
    prior_angle_information(m).unwrap_or(1.0 / m[(0, 0)].max(f64::MIN_POSITIVE))
}

fn link_metrics(report: &RateReport, i: usize, k_count: usize, iota: f64) -> LinkMetrics {
    if i < k_count {
        LinkMetrics {
            sinr: report.sinr[i],
            conventional_rate: report.conventional_rate[i],
            semantic_rate: report.semantic_rate[i],
            ssr: Some(report.ssr[i]),
        }
    } else {
        let l = i - k_count;
        let best = (0..k_count)
            .max_by(|&a, &b| report.eaves_rate[l][a].total_cmp(&report.eaves_rate[l][b]))
            .unwrap_or(0);
        let sinr = report.eaves_sinr[l][best];
        LinkMetrics {
            sinr,
            conventional_rate: iota * (1.0 + sinr).log2(),
            semantic_rate: report.eaves_rate[l][best],
            ssr: None,
        }
    }
}

/// Fractions of the previous slot's `λ` tried, in order, before a cold start.
const WARM_BACK_OFF: [f64; 6] = [1.0, 0.97, 0.9, 0.75, 0.5, 0.25];

struct Design {
    beams: BeamformerSet,
    status: SlotStatus,
    targets: Option<Targets>,
    rho: Vec<f64>,
    ao_iterations: usize,
    ao_converged: bool,
    ao_trace: Vec<AoIteration>,
    margin: Option<f64>,
}

/// Runs the configured scenario slot by slot.
pub fn run_simulation(scenario: &Scenario) -> Result<RunResult> {
    let cfg = &scenario.config;
    let seed = cfg.simulation.seed;
    let filter = cfg.simulation.filter;
    let k_count = scenario.num_intended();
    let n_vehicles = scenario.vehicles.len();
    let geom = &scenario.geometry;
    let params = &scenario.slot;
    let solver = ClarabelSolver::default();

    let mut truth_rng = rng_for(seed, stream::TRUTH);
    let mut meas_rng = rng_for(seed, stream::MEASUREMENT);
    let mut pf_rng = rng_for(seed, stream::PARTICLES);

    let mut truth: Vec<VehicleState> = scenario.vehicles.iter().map(|v| v.prior.state).collect();
    let mut trackers = Vec::with_capacity(n_vehicles);
    for v in &scenario.vehicles {
        let belief = init_belief(&v.prior, &v.process)?;
        trackers.push(match filter {
            FilterKind::Ekf => Tracker::Kalman(belief),
            FilterKind::None => Tracker::DeadReckoning(belief),
            FilterKind::Pf => {
                let m0 = v.prior.m0_diagonal.unwrap_or(v.process.variances);
                let pf = VehicleParticleFilter::new(&v.prior.state, &m0, cfg.simulation.particles, &mut pf_rng)?;
                Tracker::Particles(Box::new(pf), belief)
            }
        });
    }

    let mut records = Vec::new();
    let mut designs = Vec::new();
    let mut stopped_early = None;
    let mut warm: Option<Targets> = None;

    for slot in 1..=cfg.simulation.slots {
        let clock = SlotClock {
            slot_index: slot,
            ..scenario.clock
        };

        // Ground truth moves first; the run ends once a vehicle leaves coverage.
        let mut next_truth = Vec::with_capacity(n_vehicles);
        for (s, v) in truth.iter().zip(&scenario.vehicles) {
            let draw = v.process.sample(&mut truth_rng);
            next_truth.push(evolve_state(s, &clock, &draw).map_err(|e| Error::Trajectory {
                slot,
                source: Box::new(e),
            })?);
        }
        truth = next_truth;
        if let Some(far) = truth.iter().position(|s| s.distance > cfg.simulation.coverage_m) {
            stopped_early = Some(format!("vehicle {far} left the coverage area at slot {slot}"));
            break;
        }

        // Prediction.
        let mut predicted = Vec::with_capacity(n_vehicles);
        for (tr, v) in trackers.iter_mut().zip(&scenario.vehicles) {
            let b = match tr {
                Tracker::Kalman(b) => ekf_predict(b, &clock, &v.process)?,
                Tracker::DeadReckoning(b) => dead_reckon(b, &clock, &v.process)?,
                Tracker::Particles(pf, _) => {
                    let start = TrackBelief::new(pf.mean(), pf.covariance());
                    ekf_predict(&start, &clock, &v.process)?
                }
            };
            match tr {
                Tracker::Kalman(x) | Tracker::DeadReckoning(x) | Tracker::Particles(_, x) => *x = b,
            }
            predicted.push(b);
        }

        // Channels the design sees.
        let estimates: Vec<ChannelEstimate> = predicted
            .iter()
            .zip(&truth)
            .map(|(b, t)| {
                if cfg.channel.perfect_csi {
                    Ok(ChannelEstimate::exact(true_channel(t, geom)))
                } else {
                    let q = &b.q_pred;
                    let h = crate::array::steering_vector(q.theta, geom) * q.beta;
                    ChannelEstimate::isotropic(h, cfg.channel.csi_error * q.beta.norm_sqr())
                }
            })
            .collect::<Result<_>>()?;
        let problem = SlotProblem {
            geometry: *geom,
            intended: estimates[..k_count].to_vec(),
            eavesdroppers: estimates[k_count..].to_vec(),
            targets: predicted
                .iter()
                .map(|b| SensingTarget {
                    state: b.q_pred,
                    prior_info: prior_info(&b.m_pred),
                })
                .collect(),
            params: *params,
        };

        // Design.
        let design = match cfg.optimizer.beamforming {
            Beamforming::Isotropic => isotropic_design(scenario, &problem)?,
            Beamforming::Optimized => optimized_design(scenario, &problem, warm.as_ref(), &solver, seed, slot)?,
        };
        if design.status.is_feasible() {
            warm = design.targets.clone();
        }

        // Metrics.
        let h_pred: Vec<CVec> = estimates.iter().map(|e| e.h_bar.clone()).collect();
        let h_true: Vec<CVec> = truth.iter().map(|s| true_channel(s, geom)).collect();
        let report_pred = rate_report(&design.beams, &h_pred[..k_count], &h_pred[k_count..], params.sigma_c2, params.iota, &design.rho)?;
        let report_true = rate_report(&design.beams, &h_true[..k_count], &h_true[k_count..], params.sigma_c2, params.iota, &design.rho)?;
        let rx: CMat = transmit_covariance(&design.beams);

        let outage = match (&design.targets, cfg.simulation.mc_samples) {
            (Some(t), n) if n > 0 && design.status != SlotStatus::Infeasible => Some(validate_outage_mc(
                &design.beams,
                &problem.intended,
                &problem.eavesdroppers,
                &OutageTargets {
                    lambda: t.lambda,
                    varrho: t.varrho,
                    rho: t.rho.clone(),
                    iota: params.iota,
                    sigma_c2: params.sigma_c2,
                },
                n,
                slot_seed(seed, stream::OUTAGE, slot),
            )?),
            _ => None,
        };

        // Measurement and update.
        let echo = EchoLink { rx: &rx, geom };
        let mut vehicles = Vec::with_capacity(n_vehicles);
        for (i, (tr, v)) in trackers.iter_mut().zip(&scenario.vehicles).enumerate() {
            let z = simulate_measurement(&truth[i], &v.measurement, Some(&echo), &mut meas_rng);
            let pred = *tr.belief();
            let post = match tr {
                Tracker::Kalman(b) => {
                    *b = ekf_update(b, &z, &v.measurement, Some(&echo))?;
                    b.q_post
                }
                Tracker::DeadReckoning(b) => b.q_post,
                Tracker::Particles(pf, b) => {
                    let cov = v.measurement.covariance(&b.q_pred, Some(&echo));
                    let (mean, _) = pf.step(&z, &clock, &v.process, &cov, &mut pf_rng);
                    b.q_post = mean;
                    b.m_post = pf.covariance();
                    mean
                }
            };
            let pcrb = pcrb_report(&pred.q_pred, &pred.m_pred, &rx, geom, params.n_samples, params.sigma_r2)
                .map(|r| r.pcrb_theta)
                .unwrap_or(1.0 / prior_info(&pred.m_pred));
            vehicles.push(VehicleRecord {
                role: v.role,
                truth: truth[i],
                predicted: pred.q_pred,
                posterior: post,
                pcrb_theta: pcrb,
                predicted_link: link_metrics(&report_pred, i, k_count, params.iota),
                true_link: link_metrics(&report_true, i, k_count, params.iota),
                rho: (i < k_count).then(|| design.rho[i]),
                outage: outage.as_ref().map(|o| worst_outage(o, i, k_count)),
            });
        }

        if let Some(t) = &design.targets {
            designs.push(DesignRecord {
                slot,
                beams: design.beams.clone(),
                intended: problem.intended.clone(),
                eavesdroppers: problem.eavesdroppers.clone(),
                lambda: t.lambda,
                varrho: t.varrho,
                rho: t.rho.clone(),
                iota: params.iota,
                sigma_c2: params.sigma_c2,
                epsilon_intended: params.epsilon_intended,
                epsilon_eavesdropper: params.epsilon_eavesdropper,
            });
        }
        records.push(SlotRecord {
            slot,
            time: clock.time(),
            status: design.status,
            lambda: design.targets.as_ref().map(|t| t.lambda),
            varrho: design.targets.as_ref().map(|t| t.varrho),
            power_comm_sense: comm_sense_power(&design.beams),
            power_computing: computing_power(&design.rho, params.computing_coefficient)?,
            ao_iterations: design.ao_iterations,
            ao_converged: design.ao_converged,
            ao_trace: design.ao_trace,
            randomization_margin: design.margin,
            vehicles,
        });
    }

    Ok(RunResult {
        records,
        designs,
        stopped_early,
    })
}

fn worst_outage(estimates: &[OutageEstimate], i: usize, k_count: usize) -> f64 {
    estimates
        .iter()
        .filter(|o| match o.kind {
            BtiKind::Intended { k } => i < k_count && k == i,
            BtiKind::Eavesdropper { l, .. } => i >= k_count && l == i - k_count,
        })
        .map(|o| o.rate)
        .fold(0.0, f64::max)
}

fn fallback_rho(scenario: &Scenario, problem: &SlotProblem) -> Result<Vec<f64>> {
    Ok(initial_targets(problem, &scenario.ao)?.rho)
}

fn isotropic_beams(scenario: &Scenario, problem: &SlotProblem, rho: &[f64]) -> BeamformerSet {
    BeamformerSet::isotropic(
        scenario.geometry.num_antennas,
        problem.num_intended(),
        problem.num_vehicles(),
        transmit_budget(problem, rho).max(0.0),
    )
}

fn isotropic_design(scenario: &Scenario, problem: &SlotProblem) -> Result<Design> {
    let rho = fallback_rho(scenario, problem)?;
    Ok(Design {
        beams: isotropic_beams(scenario, problem, &rho),
        status: SlotStatus::Isotropic,
        targets: None,
        rho,
        ao_iterations: 0,
        ao_converged: false,
        ao_trace: Vec::new(),
        margin: None,
    })
}

fn optimized_design(
    scenario: &Scenario,
    problem: &SlotProblem,
    warm: Option<&Targets>,
    solver: &ClarabelSolver,
    seed: u64,
    slot: usize,
) -> Result<Design> {
    let cold = initial_targets(problem, &scenario.ao)?;
    let mut attempts = Vec::with_capacity(2);
    if let (true, Some(t)) = (scenario.config.optimizer.warm_start, warm) {
        for back_off in WARM_BACK_OFF {
            let lambda = t.lambda * back_off;
            if lambda <= cold.lambda {
                break;
            }
            attempts.push(AoInit {
                lambda,
                varrho: t.varrho,
                rho: t.rho.clone(),
                previous: None,
                frozen: false,
            });
        }
    }
    attempts.push(cold.clone());

    let mut iterations = 0;
    for init in attempts {
        match ao_loop(problem, init, &scenario.ao, solver) {
            Ok(out) => {
                iterations += out.diagnostics.iterations.len();
                let rand = gaussian_randomization(
                    &out.solution.beams,
                    problem,
                    &out.targets,
                    &scenario.randomization,
                    slot_seed(seed, stream::RANDOMIZATION, slot),
                )?;
                return Ok(Design {
                    beams: rand.beams,
                    status: if rand.feasible {
                        SlotStatus::Optimal
                    } else {
                        SlotStatus::RandomizationViolation
                    },
                    rho: out.targets.rho.clone(),
                    targets: Some(out.targets),
                    ao_iterations: iterations,
                    ao_converged: out.diagnostics.converged,
                    ao_trace: out.diagnostics.iterations,
                    margin: Some(rand.min_margin),
                });
            }
            Err(Error::NoFeasiblePoint { .. }) => iterations += 1,
            Err(e) => return Err(e),
        }
    }
    let rho = cold.rho;
    Ok(Design {
        beams: isotropic_beams(scenario, problem, &rho),
        status: SlotStatus::Infeasible,
        targets: None,
        rho,
        ao_iterations: iterations,
        ao_converged: false,
        ao_trace: Vec::new(),
        margin: None,
    })
}
