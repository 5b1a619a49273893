//! Uniform linear array steering vectors and channel construction.
//!
//! Element `n` of the steering vector carries phase `2π·δ·n·sin θ`, where `δ`
//! is the element spacing in wavelengths and element 0 is the phase
//! reference. A single line-of-sight path gives the channel `β·a(θ)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::VehicleState;
use crate::linalg::{self, c, CMat, CVec};
use crate::tracking::TrackBelief;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub num_antennas: usize,
    /// Inter-element spacing in wavelengths.
    pub element_spacing: f64,
}

impl ArrayGeometry {
    pub fn new(num_antennas: usize, element_spacing: f64) -> Result<Self> {
        if num_antennas == 0 {
            return Err(Error::InvalidArgument("array needs at least one antenna".into()));
        }
        if !(element_spacing > 0.0 && element_spacing.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "element spacing must be positive, got {element_spacing}"
            )));
        }
        Ok(Self {
            num_antennas,
            element_spacing,
        })
    }

    pub fn half_wavelength(num_antennas: usize) -> Self {
        Self {
            num_antennas: num_antennas.max(1),
            element_spacing: 0.5,
        }
    }

    fn phase_slope(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.element_spacing
    }
}

/// `a(θ)`: entry `n` is `exp(j·2π·δ·n·sin θ)`.
pub fn steering_vector(theta: f64, geom: &ArrayGeometry) -> CVec {
    let k = geom.phase_slope() * theta.sin();
    CVec::from_iterator(
        geom.num_antennas,
        (0..geom.num_antennas).map(|n| {
            let phase = k * n as f64;
            c(phase.cos(), phase.sin())
        }),
    )
}

/// `∂a/∂θ`: entry `n` is `j·2π·δ·n·cos θ · a_n(θ)`.
pub fn steering_derivative(theta: f64, geom: &ArrayGeometry) -> CVec {
    let slope = geom.phase_slope();
    let k = slope * theta.sin();
    let dk = slope * theta.cos();
    CVec::from_iterator(
        geom.num_antennas,
        (0..geom.num_antennas).map(|n| {
            let phase = k * n as f64;
            c(0.0, dk * n as f64) * c(phase.cos(), phase.sin())
        }),
    )
}

/// Predicted channel `h̄` together with the covariance `Ω` of its error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelEstimate {
    pub h_bar: CVec,
    pub omega: CMat,
}

impl ChannelEstimate {
    pub fn new(h_bar: CVec, omega: CMat) -> Result<Self> {
        linalg::check_square(&omega, h_bar.len(), "CSI error covariance")?;
        if !linalg::is_hermitian(&omega, 1e-10) {
            return Err(Error::InvalidArgument("CSI error covariance is not Hermitian".into()));
        }
        let lo = linalg::min_eigenvalue(&omega);
        if lo < -1e-10 {
            return Err(Error::NotPsd { min_eigenvalue: lo });
        }
        Ok(Self { h_bar, omega })
    }

    /// Error-free estimate (`Ω = 0`).
    pub fn exact(h: CVec) -> Self {
        let n = h.len();
        Self {
            h_bar: h,
            omega: linalg::zeros(n),
        }
    }

    /// `h̄` with isotropic error `Ω = σ²·I`.
    pub fn isotropic(h_bar: CVec, error_variance: f64) -> Result<Self> {
        if !(error_variance >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "CSI error variance must be non-negative, got {error_variance}"
            )));
        }
        let n = h_bar.len();
        Ok(Self {
            h_bar,
            omega: linalg::identity(n).scale(error_variance),
        })
    }

    pub fn dim(&self) -> usize {
        self.h_bar.len()
    }

    pub fn omega_sqrt(&self) -> Result<CMat> {
        linalg::psd_sqrt(&self.omega)
    }
}

/// `h̄ = β̂·a(θ̂)` from the predicted state, with `Ω = σ_Ω²·I`.
pub fn predicted_channel(
    belief: &TrackBelief,
    geom: &ArrayGeometry,
    error_variance: f64,
) -> Result<ChannelEstimate> {
    let q = &belief.q_pred;
    ChannelEstimate::isotropic(steering_vector(q.theta, geom) * q.beta, error_variance)
}

/// `h = β·a(θ)` from the ground-truth state.
pub fn true_channel(state: &VehicleState, geom: &ArrayGeometry) -> CVec {
    steering_vector(state.theta, geom) * state.beta
}

/// One draw of `Δh = Ω^{1/2} e`, `e ∼ CN(0, I)`.
pub fn sample_csi_error<R: Rng + ?Sized>(est: &ChannelEstimate, rng: &mut R) -> Result<CVec> {
    let root = est.omega_sqrt()?;
    let e = linalg::complex_gaussian(est.dim(), rng);
    Ok(root * e)
}
