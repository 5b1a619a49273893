//! Bernstein-type restrictions of the rate outage constraints.
//!
//! With `h = h̄ + Ω^{1/2}e`, `e ∼ CN(0, I)`, each rate constraint becomes
//! `eᴴQe + 2Re{eᴴr} + s ≥ 0` holding with probability `1 − ε`. It is implied by
//!
//! ```text
//! Tr(Q) − √(2 ln(1/ε))·a + ln(ε)·b + s ≥ 0
//! ‖[vec(Q); √2·r]‖ ≤ a
//! bI + Q ⪰ 0,  b ≥ 0
//! ```
//!
//! For the intended vehicle `k`, `χ = W_k/γ̂ − Σ_{k'≠k} W_k' − Σ R_i` and
//! `s = h̄ᴴχh̄ − σ_c²`. For eavesdropper `l` listening to `k`,
//! `χ = Σ R_i − W_k/Γ̂` and `s = h̄ᴴχh̄ + σ_c²`; other information beams are not
//! counted as interference there, which keeps the restriction conservative.

use serde::{Deserialize, Serialize};

use super::problem::{SlotProblem, Targets};
use crate::array::ChannelEstimate;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};
use crate::semantic::BeamformerSet;

/// `2^{rate·ρ/ι} − 1`, the SINR that delivers `rate` at extraction ratio `ρ`.
pub fn sinr_threshold(rate: f64, rho: f64, iota: f64) -> Result<f64> {
    let exponent = rate * rho / iota;
    if !(exponent > 0.0 && exponent.is_finite()) {
        return Err(Error::TargetOutOfRange(format!(
            "rate·ρ/ι = {exponent} must be positive"
        )));
    }
    let threshold = exponent.exp2() - 1.0;
    if !threshold.is_finite() {
        return Err(Error::TargetOutOfRange(format!("rate·ρ/ι = {exponent} overflows")));
    }
    Ok(threshold)
}

/// `√(2 ln(1/ε))`
pub fn bernstein_coefficient(epsilon: f64) -> f64 {
    (2.0 * (1.0 / epsilon).ln()).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BtiKind {
    Intended { k: usize },
    Eavesdropper { l: usize, k: usize },
}

/// `W_k/γ̂ − Σ_{k'≠k} W_k' − Σ R_i`
pub fn chi_intended(k: usize, beams: &BeamformerSet, gamma_hat: f64) -> CMat {
    let n = beams.dim();
    let mut chi = beams.w[k].scale(1.0 / gamma_hat);
    for (j, w) in beams.w.iter().enumerate() {
        if j != k {
            chi -= w;
        }
    }
    for r in &beams.r {
        chi -= r;
    }
    debug_assert_eq!(chi.nrows(), n);
    chi
}

/// `Σ R_i − W_k/Γ̂`
pub fn chi_eavesdropper(k: usize, beams: &BeamformerSet, cap: f64) -> CMat {
    let mut chi = beams.w[k].scale(-1.0 / cap);
    for r in &beams.r {
        chi += r;
    }
    chi
}

#[derive(Debug, Clone, PartialEq)]
pub struct BtiBlock {
    pub q_mat: CMat,
    pub r_vec: CVec,
    pub s_scalar: f64,
    pub epsilon: f64,
    /// Smallest feasible `a`: `‖[vec(Q); √2·r]‖`.
    pub slack_a: f64,
    /// Smallest feasible `b`: `max(0, −λ_min(Q))`.
    pub slack_b: f64,
}

impl BtiBlock {
    /// `Q = Ω^{1/2}χΩ^{1/2}`, `r = Ω^{1/2}χh̄`, `s = h̄ᴴχh̄ + noise_offset`.
    pub fn new(chi: &CMat, est: &ChannelEstimate, noise_offset: f64, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidArgument(format!("outage tolerance must lie in (0, 1), got {epsilon}")));
        }
        linalg::check_square(chi, est.dim(), "constraint matrix")?;
        let root = est.omega_sqrt()?;
        let q_mat = linalg::hermitian_part(&(&root * chi * &root));
        let r_vec = &root * chi * &est.h_bar;
        let s_scalar = linalg::quad_form(chi, &est.h_bar) + noise_offset;
        let slack_a = (q_mat.norm_squared() + 2.0 * r_vec.norm_squared()).sqrt();
        let slack_b = (-linalg::min_eigenvalue(&q_mat)).max(0.0);
        Ok(Self {
            q_mat,
            r_vec,
            s_scalar,
            epsilon,
            slack_a,
            slack_b,
        })
    }

    /// Left-hand side of the linear BTI inequality at the tightest slacks;
    /// non-negative exactly when the restriction holds.
    pub fn margin(&self) -> f64 {
        linalg::real_trace(&self.q_mat) - bernstein_coefficient(self.epsilon) * self.slack_a
            + self.epsilon.ln() * self.slack_b
            + self.s_scalar
    }
}

/// Every BTI block of the slot problem evaluated at fixed beams.
pub fn bti_blocks(
    beams: &BeamformerSet,
    problem: &SlotProblem,
    targets: &Targets,
) -> Result<Vec<(BtiKind, BtiBlock)>> {
    let p = &problem.params;
    let k_count = problem.num_intended();
    if beams.w.len() != k_count || targets.rho.len() != k_count {
        return Err(Error::Dimension(format!(
            "{k_count} intended vehicles, {} information beams, {} extraction ratios",
            beams.w.len(),
            targets.rho.len()
        )));
    }
    let mut out = Vec::with_capacity(k_count * (1 + problem.eavesdroppers.len()));
    for k in 0..k_count {
        let gamma = sinr_threshold(targets.lambda, targets.rho[k], p.iota)?;
        let chi = chi_intended(k, beams, gamma);
        let block = BtiBlock::new(&chi, &problem.intended[k], -p.sigma_c2, p.epsilon_intended)?;
        out.push((BtiKind::Intended { k }, block));
    }
    for (l, est) in problem.eavesdroppers.iter().enumerate() {
        for k in 0..k_count {
            let cap = sinr_threshold(targets.varrho, targets.rho[k], p.iota)?;
            let chi = chi_eavesdropper(k, beams, cap);
            let block = BtiBlock::new(&chi, est, p.sigma_c2, p.epsilon_eavesdropper)?;
            out.push((BtiKind::Eavesdropper { l, k }, block));
        }
    }
    Ok(out)
}

/// Smallest BTI margin over all constraints, in units of `σ_c²`.
pub fn min_bti_margin(beams: &BeamformerSet, problem: &SlotProblem, targets: &Targets) -> Result<f64> {
    let blocks = bti_blocks(beams, problem, targets)?;
    Ok(blocks
        .iter()
        .map(|(_, b)| b.margin() / problem.params.sigma_c2)
        .fold(f64::INFINITY, f64::min))
}
