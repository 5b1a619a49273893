//! State estimation: the extended Kalman filter used by the roadside unit and
//! a bootstrap particle filter baseline.

mod ekf;
mod pf;

pub use ekf::{
    dead_reckon, ekf_predict, ekf_update, init_belief, jacobian_g2, observe, predict_covariance,
    simulate_measurement, BeliefPrior, EchoLink, Measurement, MeasurementModel, TrackBelief,
    MAX_INNOVATION_CONDITION,
};
pub(crate) use ekf::prior_angle_information;
pub use pf::{
    pf_step, ParticleFilter, ParticleModel, PfStepReport, VehicleParticleFilter, VehicleParticleModel,
    DEGENERATE_WEIGHT,
};
