//! Bootstrap particle filter with systematic resampling.

use nalgebra::{Matrix3, Matrix4, Vector4};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::kinematics::{evolve_state, ProcessNoise, SlotClock, VehicleState};
use crate::tracking::ekf::{observe, Measurement};

/// Weights whose largest value falls below this are treated as degenerate.
pub const DEGENERATE_WEIGHT: f64 = 1e-300;

/// Dynamics and likelihood seen by the particle filter.
pub trait ParticleModel {
    type State: Clone;
    type Observation;

    fn propagate<R: Rng + ?Sized>(&self, state: &Self::State, rng: &mut R) -> Self::State;

    fn log_likelihood(&self, state: &Self::State, z: &Self::Observation) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfStepReport {
    /// All weights underflowed and were reset to uniform.
    pub degenerate: bool,
    /// Effective sample size before resampling.
    pub effective_size: f64,
}

#[derive(Debug, Clone)]
pub struct ParticleFilter<S> {
    particles: Vec<S>,
    weights: Vec<f64>,
}

impl<S: Clone> ParticleFilter<S> {
    pub fn new(particles: Vec<S>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::InvalidArgument("particle filter needs at least one particle".into()));
        }
        let w = 1.0 / particles.len() as f64;
        Ok(Self {
            weights: vec![w; particles.len()],
            particles,
        })
    }

    pub fn particles(&self) -> &[S] {
        &self.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Weighted mean of a feature of the particles.
    pub fn mean_of<const D: usize>(&self, f: impl Fn(&S) -> [f64; D]) -> [f64; D] {
        let mut acc = [0.0; D];
        for (p, w) in self.particles.iter().zip(&self.weights) {
            for (a, v) in acc.iter_mut().zip(f(p)) {
                *a += w * v;
            }
        }
        acc
    }

    /// Propagate, weight by the likelihood of `z`, then resample.
    ///
    /// The returned estimate is computed from the weighted cloud before
    /// resampling; afterwards all weights are uniform.
    pub fn step<M, R>(&mut self, model: &M, z: &M::Observation, rng: &mut R) -> PfStepReport
    where
        M: ParticleModel<State = S>,
        R: Rng + ?Sized,
    {
        for p in self.particles.iter_mut() {
            *p = model.propagate(p, rng);
        }
        let log_w: Vec<f64> = self
            .particles
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w.ln() + model.log_likelihood(p, z))
            .collect();
        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let degenerate = !(max.is_finite() && max.exp() >= DEGENERATE_WEIGHT);
        let n = self.particles.len();
        if degenerate {
            self.weights = vec![1.0 / n as f64; n];
        } else {
            let unnorm: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
            let total: f64 = unnorm.iter().sum();
            self.weights = unnorm.iter().map(|u| u / total).collect();
        }
        let effective_size = 1.0 / self.weights.iter().map(|w| w * w).sum::<f64>();
        PfStepReport {
            degenerate,
            effective_size,
        }
    }

    /// Systematic resampling with a single uniform offset.
    pub fn resample<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let n = self.particles.len();
        let step = 1.0 / n as f64;
        let start: f64 = rng.random::<f64>() * step;
        let mut out = Vec::with_capacity(n);
        let mut cum = self.weights[0];
        let mut i = 0;
        for m in 0..n {
            let u = start + m as f64 * step;
            while u > cum && i + 1 < n {
                i += 1;
                cum += self.weights[i];
            }
            out.push(self.particles[i].clone());
        }
        self.particles = out;
        self.weights = vec![step; n];
    }
}

/// Vehicle dynamics with a diagonal Gaussian observation of `(θ, d, v)`.
#[derive(Debug, Clone, Copy)]
pub struct VehicleParticleModel {
    pub clock: SlotClock,
    pub noise: ProcessNoise,
    /// Observation variances `(θ, d, v)`.
    pub obs_variance: [f64; 3],
}

impl ParticleModel for VehicleParticleModel {
    type State = VehicleState;
    type Observation = Measurement;

    fn propagate<R: Rng + ?Sized>(&self, s: &VehicleState, rng: &mut R) -> VehicleState {
        let draw = self.noise.sample(rng);
        match evolve_state(s, &self.clock, &draw) {
            Ok(next) => next,
            // Particles that cross the range origin are kept at a small range.
            Err(_) => VehicleState {
                distance: 1e-3,
                ..*s
            },
        }
    }

    fn log_likelihood(&self, s: &VehicleState, z: &Measurement) -> f64 {
        let r = z.to_vector() - observe(s);
        let mut ll = 0.0;
        for i in 0..3 {
            let v = self.obs_variance[i];
            ll -= 0.5 * (r[i] * r[i] / v + (2.0 * std::f64::consts::PI * v).ln());
        }
        ll
    }
}

/// Particle filter specialised to vehicle tracking.
#[derive(Debug, Clone)]
pub struct VehicleParticleFilter {
    pub filter: ParticleFilter<VehicleState>,
    /// Count of degenerate steps so far.
    pub degenerate_steps: usize,
}

impl VehicleParticleFilter {
    /// Particles drawn around `init` from `N(0, diag(m0))`.
    pub fn new<R: Rng + ?Sized>(init: &VehicleState, m0: &[f64; 4], count: usize, rng: &mut R) -> Result<Self> {
        let spread = ProcessNoise::new(*m0)?;
        let particles = (0..count)
            .map(|_| {
                let d = spread.sample(rng);
                VehicleState {
                    theta: init.theta + d.theta,
                    distance: (init.distance + d.distance).max(1e-3),
                    velocity: init.velocity + d.velocity,
                    beta: init.beta + d.beta,
                }
            })
            .collect();
        Ok(Self {
            filter: ParticleFilter::new(particles)?,
            degenerate_steps: 0,
        })
    }

    pub fn mean(&self) -> VehicleState {
        let [t, d, v, br, bi] = self
            .filter
            .mean_of(|s| [s.theta, s.distance, s.velocity, s.beta.re, s.beta.im]);
        VehicleState::new(t, d, v, Complex64::new(br, bi))
    }

    /// Weighted covariance over `[θ, d, v, |β|]`.
    pub fn covariance(&self) -> Matrix4<f64> {
        let mean = {
            let m = self.filter.mean_of(|s| s.to_vector().into());
            Vector4::from(m)
        };
        let mut acc = Matrix4::zeros();
        for (p, w) in self.filter.particles().iter().zip(self.filter.weights()) {
            let d = p.to_vector() - mean;
            acc += d * d.transpose() * *w;
        }
        acc
    }

    /// One filter cycle; returns the posterior-mean estimate.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        z: &Measurement,
        clock: &SlotClock,
        noise: &ProcessNoise,
        obs_covariance: &Matrix3<f64>,
        rng: &mut R,
    ) -> (VehicleState, PfStepReport) {
        let model = VehicleParticleModel {
            clock: *clock,
            noise: *noise,
            obs_variance: [obs_covariance[(0, 0)], obs_covariance[(1, 1)], obs_covariance[(2, 2)]],
        };
        let report = self.filter.step(&model, z, rng);
        if report.degenerate {
            self.degenerate_steps += 1;
        }
        let estimate = self.mean();
        self.filter.resample(rng);
        (estimate, report)
    }
}

/// Free-standing form: propagate, weight and resample `particles` in place.
pub fn pf_step<M, R>(
    pf: &mut ParticleFilter<M::State>,
    model: &M,
    z: &M::Observation,
    rng: &mut R,
) -> PfStepReport
where
    M: ParticleModel,
    R: Rng + ?Sized,
{
    let report = pf.step(model, z, rng);
    pf.resample(rng);
    report
}
