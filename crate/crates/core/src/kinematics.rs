//! Ground-truth vehicle motion.
//!
//! Each vehicle is described in polar coordinates relative to the roadside
//! unit: the angle `θ` between the line of sight and the direction of travel,
//! the range `d`, the speed `v`, and the complex round-trip coefficient `β`.
//! Per slot of length `ΔT`:
//!
//! ```text
//! θ' = θ + v·ΔT·sin θ / d         + u_θ
//! d' = d − v·ΔT·cos θ             + u_d
//! v' = v                          + u_v
//! β' = β·(1 + v·ΔT·cos θ / d)     + u_β
//! ```
//!
//! `u_β` is circularly-symmetric complex Gaussian; its variance is split
//! evenly between real and imaginary parts.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    /// Radians.
    pub theta: f64,
    /// Meters.
    pub distance: f64,
    /// Meters per second.
    pub velocity: f64,
    pub beta: Complex64,
}

impl VehicleState {
    pub fn new(theta: f64, distance: f64, velocity: f64, beta: Complex64) -> Self {
        Self {
            theta,
            distance,
            velocity,
            beta,
        }
    }

    /// `[θ, d, v, |β|]`, the coordinates the tracker works in.
    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.theta, self.distance, self.velocity, self.beta.norm())
    }

    /// Inverse of [`to_vector`](Self::to_vector); the phase of `β` is taken
    /// from `self`.
    pub fn with_vector(&self, x: &Vector4<f64>) -> Self {
        let phase = if self.beta.norm() > 0.0 { self.beta.arg() } else { 0.0 };
        Self {
            theta: x[0],
            distance: x[1],
            velocity: x[2],
            beta: Complex64::from_polar(x[3], phase),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.theta.is_finite()
            && self.distance.is_finite()
            && self.velocity.is_finite()
            && self.beta.re.is_finite()
            && self.beta.im.is_finite()
    }
}

/// Process noise covariance `Q₁ = diag(σ_θ², σ_d², σ_v², σ_β²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessNoise {
    pub variances: [f64; 4],
}

impl ProcessNoise {
    pub fn new(variances: [f64; 4]) -> Result<Self> {
        if variances.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "process noise variances must be finite and non-negative, got {variances:?}"
            )));
        }
        Ok(Self { variances })
    }

    pub fn zero() -> Self {
        Self { variances: [0.0; 4] }
    }

    pub fn matrix(&self) -> Matrix4<f64> {
        Matrix4::from_diagonal(&Vector4::from(self.variances))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ProcessDraw {
        let mut n = || -> f64 { rng.sample(StandardNormal) };
        let [vt, vd, vv, vb] = self.variances;
        let half = (vb / 2.0).sqrt();
        ProcessDraw {
            theta: vt.sqrt() * n(),
            distance: vd.sqrt() * n(),
            velocity: vv.sqrt() * n(),
            beta: Complex64::new(half * n(), half * n()),
        }
    }
}

/// One realization of the process noise `u`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProcessDraw {
    pub theta: f64,
    pub distance: f64,
    pub velocity: f64,
    pub beta: Complex64,
}

impl ProcessDraw {
    pub const ZERO: ProcessDraw = ProcessDraw {
        theta: 0.0,
        distance: 0.0,
        velocity: 0.0,
        beta: Complex64::new(0.0, 0.0),
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotClock {
    /// Slot length `ΔT` in seconds.
    pub delta_t: f64,
    pub slot_index: usize,
}

impl SlotClock {
    pub fn new(delta_t: f64) -> Result<Self> {
        if !(delta_t > 0.0 && delta_t.is_finite()) {
            return Err(Error::InvalidArgument(format!("slot length must be positive, got {delta_t}")));
        }
        Ok(Self {
            delta_t,
            slot_index: 0,
        })
    }

    pub fn time(&self) -> f64 {
        self.delta_t * self.slot_index as f64
    }
}

/// One step of the state model.
pub fn evolve_state(s: &VehicleState, clock: &SlotClock, noise: &ProcessDraw) -> Result<VehicleState> {
    if !(s.distance > 0.0) {
        return Err(Error::DistanceNonPositive { distance: s.distance });
    }
    let step = s.velocity * clock.delta_t;
    let (sin, cos) = s.theta.sin_cos();
    let growth = 1.0 + step * cos / s.distance;
    let next = VehicleState {
        theta: s.theta + step * sin / s.distance + noise.theta,
        distance: s.distance - step * cos + noise.distance,
        velocity: s.velocity + noise.velocity,
        beta: s.beta * growth + noise.beta,
    };
    if !next.is_finite() {
        return Err(Error::NonFinite("evolved vehicle state"));
    }
    if next.distance <= 0.0 {
        return Err(Error::DistanceNonPositive {
            distance: next.distance,
        });
    }
    Ok(next)
}

/// Jacobian of the noiseless state model over `[θ, d, v, |β|]`.
pub fn jacobian_g1(s: &VehicleState, clock: &SlotClock) -> Matrix4<f64> {
    let dt = clock.delta_t;
    let (d, v, b) = (s.distance, s.velocity, s.beta.norm());
    let (sin, cos) = s.theta.sin_cos();
    #[rustfmt::skip]
    let g = Matrix4::new(
        1.0 + v * dt * cos / d, -v * dt * sin / (d * d), dt * sin / d,       0.0,
        v * dt * sin,           1.0,                     -dt * cos,          0.0,
        0.0,                    0.0,                     1.0,                0.0,
        -b * v * dt * sin / d,  -b * v * dt * cos / (d * d), b * dt * cos / d, 1.0 + v * dt * cos / d,
    );
    g
}

/// Generates `n_slots` successive states after `init` (the initial state is
/// not included). Noise for every slot comes from one ChaCha stream seeded
/// with `seed`.
pub fn simulate_trajectory(
    init: &VehicleState,
    clock: &SlotClock,
    noise: &ProcessNoise,
    n_slots: usize,
    seed: u64,
) -> Result<Vec<VehicleState>> {
    if n_slots == 0 {
        return Err(Error::InvalidArgument("trajectory needs at least one slot".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_slots);
    let mut state = *init;
    let mut clk = *clock;
    for slot in 0..n_slots {
        clk.slot_index = clock.slot_index + slot + 1;
        let draw = noise.sample(&mut rng);
        state = evolve_state(&state, &clk, &draw).map_err(|e| Error::Trajectory {
            slot: clk.slot_index,
            source: Box::new(e),
        })?;
        out.push(state);
    }
    Ok(out)
}
