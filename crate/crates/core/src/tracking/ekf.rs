//! Extended Kalman filter over the vehicle state model.
//!
//! The filter state is `[θ, d, v, |β|]`. The echo is reduced to a direct
//! observation of `(θ, d, v)` with noise covariance `Q₂ = diag(σ_e², σ_d̂², σ_v̂²)`.
//! When the model is linked to the echo SNR, the angle variance becomes
//! `σ_e² / ρ` with `ρ = |β|²·aᴴ(θ) R_x a(θ) / σ_r²`.

use nalgebra::{DMatrix, Matrix3, Matrix3x4, Matrix4, Matrix4x3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::array::{steering_vector, ArrayGeometry};
use crate::error::{Error, Result};
use crate::kinematics::{evolve_state, jacobian_g1, ProcessDraw, ProcessNoise, SlotClock, VehicleState};
use crate::linalg::{self, CMat};

/// Innovation covariances with a larger condition number are rejected.
pub const MAX_INNOVATION_CONDITION: f64 = 1e12;

/// Largest angle variance used when the echo carries no energy.
const MAX_ANGLE_VARIANCE: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackBelief {
    /// `q̂_{t|t-1}`
    pub q_pred: VehicleState,
    /// `M_{t|t-1}`
    pub m_pred: Matrix4<f64>,
    /// `q̂_t`
    pub q_post: VehicleState,
    /// `M_t`
    pub m_post: Matrix4<f64>,
}

impl TrackBelief {
    /// Belief with a known initial state and MSE matrix `m0`.
    pub fn new(state: VehicleState, m0: Matrix4<f64>) -> Self {
        Self {
            q_pred: state,
            m_pred: m0,
            q_post: state,
            m_post: m0,
        }
    }

    /// Belief that is certain of `state`.
    pub fn exact(state: VehicleState) -> Self {
        Self::new(state, Matrix4::zeros())
    }

    /// Information about `θ` carried by the prediction, `(M_{t|t-1}⁻¹)[1,1]`.
    pub fn prior_angle_information(&self) -> Result<f64> {
        prior_angle_information(&self.m_pred)
    }
}

pub(crate) fn prior_angle_information(m_pred: &Matrix4<f64>) -> Result<f64> {
    let cond = linalg::condition_number(&DMatrix::from_iterator(4, 4, m_pred.iter().copied()));
    if cond > MAX_INNOVATION_CONDITION {
        return Err(Error::IllConditioned {
            what: "predicted MSE matrix",
            condition: cond,
        });
    }
    let inv = m_pred.try_inverse().ok_or(Error::IllConditioned {
        what: "predicted MSE matrix",
        condition: f64::INFINITY,
    })?;
    Ok(inv[(0, 0)])
}

/// Prior for the filter at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeliefPrior {
    pub state: VehicleState,
    /// Diagonal of `M₀`; when absent, `Q₁` is used.
    pub m0_diagonal: Option<[f64; 4]>,
}

/// Builds the `t = 0` belief. `M₀` defaults to `Q₁`.
pub fn init_belief(prior: &BeliefPrior, noise: &ProcessNoise) -> Result<TrackBelief> {
    let m0 = match prior.m0_diagonal {
        Some(d) => {
            if d.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(Error::NotPsd {
                    min_eigenvalue: d.iter().copied().fold(f64::INFINITY, f64::min),
                });
            }
            Matrix4::from_diagonal(&d.into())
        }
        None => noise.matrix(),
    };
    Ok(TrackBelief::new(prior.state, m0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementModel {
    /// `(σ_e², σ_d̂², σ_v̂²)`
    pub q2: [f64; 3],
    /// Divide the angle variance by the matched-filter echo SNR.
    pub snr_link: bool,
    /// Echo noise power after matched filtering (W), used only with
    /// `snr_link`.
    pub sigma_r2: f64,
}

/// Transmit covariance and array used to evaluate the echo SNR.
#[derive(Debug, Clone, Copy)]
pub struct EchoLink<'a> {
    pub rx: &'a CMat,
    pub geom: &'a ArrayGeometry,
}

impl MeasurementModel {
    pub fn new(q2: [f64; 3], snr_link: bool, sigma_r2: f64) -> Result<Self> {
        if q2.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "measurement variances must be positive, got {q2:?}"
            )));
        }
        if snr_link && !(sigma_r2 > 0.0) {
            return Err(Error::InvalidArgument("radar noise power must be positive".into()));
        }
        Ok(Self { q2, snr_link, sigma_r2 })
    }

    /// Matched-filter echo SNR for a target at `state`.
    pub fn echo_snr(&self, state: &VehicleState, echo: &EchoLink<'_>) -> f64 {
        let a = steering_vector(state.theta, echo.geom);
        state.beta.norm_sqr() * linalg::quad_form(echo.rx, &a) / self.sigma_r2
    }

    /// Per-component observation variances at `state`.
    pub fn variances(&self, state: &VehicleState, echo: Option<&EchoLink<'_>>) -> Vector3<f64> {
        let mut v = Vector3::from(self.q2);
        if self.snr_link {
            let snr = echo.map(|e| self.echo_snr(state, e)).unwrap_or(0.0);
            v[0] = if snr > 0.0 {
                (self.q2[0] / snr).min(MAX_ANGLE_VARIANCE)
            } else {
                MAX_ANGLE_VARIANCE
            };
        }
        v
    }

    pub fn covariance(&self, state: &VehicleState, echo: Option<&EchoLink<'_>>) -> Matrix3<f64> {
        Matrix3::from_diagonal(&self.variances(state, echo))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub theta_obs: f64,
    pub d_obs: f64,
    pub v_obs: f64,
}

impl Measurement {
    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.theta_obs, self.d_obs, self.v_obs)
    }
}

/// `g₂(q) = (θ, d, v)`.
pub fn observe(s: &VehicleState) -> Vector3<f64> {
    Vector3::new(s.theta, s.distance, s.velocity)
}

pub fn jacobian_g2(_s: &VehicleState) -> Matrix3x4<f64> {
    #[rustfmt::skip]
    let g = Matrix3x4::new(
        1.0, 0.0, 0.0, 0.0,
        0.0, 1.0, 0.0, 0.0,
        0.0, 0.0, 1.0, 0.0,
    );
    g
}

/// Draws a noisy observation of `truth`. With `snr_link` the angle noise is
/// scaled by the echo SNR under the transmit covariance in `echo`.
pub fn simulate_measurement<R: Rng + ?Sized>(
    truth: &VehicleState,
    model: &MeasurementModel,
    echo: Option<&EchoLink<'_>>,
    rng: &mut R,
) -> Measurement {
    let var = model.variances(truth, echo);
    let mut n = |v: f64| -> f64 { v.sqrt() * rng.sample::<f64, _>(StandardNormal) };
    let d_obs = (truth.distance + n(var[1])).max(f64::MIN_POSITIVE);
    Measurement {
        theta_obs: truth.theta + n(var[0]),
        d_obs,
        v_obs: truth.velocity + n(var[2]),
    }
}

fn symmetrize4(m: &Matrix4<f64>) -> Matrix4<f64> {
    (m + m.transpose()) * 0.5
}

/// `G₁ M G₁ᵀ + Q₁`, symmetrized.
pub fn predict_covariance(g1: &Matrix4<f64>, m: &Matrix4<f64>, q1: &Matrix4<f64>) -> Matrix4<f64> {
    symmetrize4(&(g1 * m * g1.transpose() + q1))
}

/// Prediction before any sensing signal is sent: `q̂_{t|t-1} = g₁(q̂_{t-1})`
/// and `M_{t|t-1} = G₁ M_{t-1} G₁ᵀ + Q₁`.
pub fn ekf_predict(prev: &TrackBelief, clock: &SlotClock, noise: &ProcessNoise) -> Result<TrackBelief> {
    if prev.m_post.iter().any(|v| !v.is_finite()) || !prev.q_post.is_finite() {
        return Err(Error::NonFinite("previous belief"));
    }
    let q_pred = evolve_state(&prev.q_post, clock, &ProcessDraw::ZERO)?;
    let g1 = jacobian_g1(&prev.q_post, clock);
    let m_pred = predict_covariance(&g1, &prev.m_post, &noise.matrix());
    if m_pred.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("predicted MSE matrix"));
    }
    Ok(TrackBelief {
        q_pred,
        m_pred,
        q_post: q_pred,
        m_post: m_pred,
    })
}

/// Measurement update with gain `K = M G₂ᵀ (Q₂ + G₂ M G₂ᵀ)⁻¹`.
pub fn ekf_update(
    belief: &TrackBelief,
    z: &Measurement,
    model: &MeasurementModel,
    echo: Option<&EchoLink<'_>>,
) -> Result<TrackBelief> {
    let q2 = model.covariance(&belief.q_pred, echo);
    update_with_covariance(belief, z, &q2)
}

pub(crate) fn update_with_covariance(
    belief: &TrackBelief,
    z: &Measurement,
    q2: &Matrix3<f64>,
) -> Result<TrackBelief> {
    let g2 = jacobian_g2(&belief.q_pred);
    let m = &belief.m_pred;
    let s = q2 + g2 * m * g2.transpose();
    let cond = linalg::condition_number(&DMatrix::from_iterator(3, 3, s.iter().copied()));
    if !(cond <= MAX_INNOVATION_CONDITION) {
        return Err(Error::IllConditioned {
            what: "innovation covariance",
            condition: cond,
        });
    }
    let s_inv = s.try_inverse().ok_or(Error::IllConditioned {
        what: "innovation covariance",
        condition: f64::INFINITY,
    })?;
    let k: Matrix4x3<f64> = m * g2.transpose() * s_inv;
    let innovation = z.to_vector() - observe(&belief.q_pred);
    let x = belief.q_pred.to_vector() + k * innovation;
    let m_post = symmetrize4(&((Matrix4::identity() - k * g2) * m));
    let q_post = belief.q_pred.with_vector(&x);
    if !q_post.is_finite() || m_post.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("posterior belief"));
    }
    Ok(TrackBelief {
        q_pred: belief.q_pred,
        m_pred: belief.m_pred,
        q_post,
        m_post,
    })
}

/// Dead-reckoning step: prediction with no measurement correction.
pub fn dead_reckon(prev: &TrackBelief, clock: &SlotClock, noise: &ProcessNoise) -> Result<TrackBelief> {
    ekf_predict(prev, clock, noise)
}
