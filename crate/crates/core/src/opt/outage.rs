//! Monte-Carlo check of the rate chance constraints under CSI error.
//!
//! Each draw forms `h = h̄ + Ω^{1/2}e`, `e ∼ CN(0, I)`, for every vehicle and
//! counts `S_k < λ` and `S_{l|k} > ϱ`. The eavesdropper rate uses the SINR
//! with only sensing interference, which is the quantity the outage
//! restriction controls and upper-bounds the fully interfered one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ao::restricted_eavesdropper_sinr;
use super::bti::BtiKind;
use crate::array::ChannelEstimate;
use crate::error::{Error, Result};
use crate::linalg::{self, CVec};
use crate::semantic::{semantic_rate, sinr_intended, BeamformerSet};

pub const MIN_OUTAGE_SAMPLES: usize = 1000;

/// Wilson score interval for a binomial proportion at `z` standard deviations.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageEstimate {
    pub kind: BtiKind,
    pub violations: usize,
    pub samples: usize,
    pub rate: f64,
    /// 95% Wilson interval.
    pub interval: (f64, f64),
    /// Half-width of the Wilson interval at one standard deviation.
    pub std_error: f64,
}

impl OutageEstimate {
    fn from_counts(kind: BtiKind, violations: usize, samples: usize) -> Self {
        let (lo1, hi1) = wilson_interval(violations, samples, 1.0);
        Self {
            kind,
            violations,
            samples,
            rate: violations as f64 / samples as f64,
            interval: wilson_interval(violations, samples, 1.96),
            std_error: 0.5 * (hi1 - lo1),
        }
    }

    /// `rate ≤ ε + z·SE`
    pub fn within(&self, epsilon: f64, z: f64) -> bool {
        self.rate <= epsilon + z * self.std_error
    }
}

/// Targets and constants the drawn rates are compared against.
#[derive(Debug, Clone, PartialEq)]
pub struct OutageTargets {
    pub lambda: f64,
    pub varrho: f64,
    pub rho: Vec<f64>,
    pub iota: f64,
    pub sigma_c2: f64,
}

pub fn validate_outage_mc(
    beams: &BeamformerSet,
    intended: &[ChannelEstimate],
    eavesdroppers: &[ChannelEstimate],
    targets: &OutageTargets,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<OutageEstimate>> {
    if n_samples < MIN_OUTAGE_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_OUTAGE_SAMPLES} samples, got {n_samples}"
        )));
    }
    let k_count = intended.len();
    if beams.w.len() != k_count || targets.rho.len() != k_count {
        return Err(Error::Dimension(format!(
            "{k_count} intended channels, {} information beams, {} extraction ratios",
            beams.w.len(),
            targets.rho.len()
        )));
    }
    let roots_i = intended.iter().map(ChannelEstimate::omega_sqrt).collect::<Result<Vec<_>>>()?;
    let roots_e = eavesdroppers.iter().map(ChannelEstimate::omega_sqrt).collect::<Result<Vec<_>>>()?;
    let n = beams.dim();
    let draw = |est: &ChannelEstimate, root: &linalg::CMat, rng: &mut ChaCha8Rng| -> CVec {
        &est.h_bar + root * linalg::complex_gaussian(n, rng)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fail_i = vec![0usize; k_count];
    let mut fail_e = vec![vec![0usize; k_count]; eavesdroppers.len()];
    for _ in 0..n_samples {
        for (k, (est, root)) in intended.iter().zip(&roots_i).enumerate() {
            let h = draw(est, root, &mut rng);
            let sinr = sinr_intended(k, &h, beams, targets.sigma_c2)?;
            if semantic_rate(sinr, targets.iota, targets.rho[k])? < targets.lambda {
                fail_i[k] += 1;
            }
        }
        for (l, (est, root)) in eavesdroppers.iter().zip(&roots_e).enumerate() {
            let h = draw(est, root, &mut rng);
            for k in 0..k_count {
                let sinr = restricted_eavesdropper_sinr(k, &h, beams, targets.sigma_c2);
                if semantic_rate(sinr, targets.iota, targets.rho[k])? > targets.varrho {
                    fail_e[l][k] += 1;
                }
            }
        }
    }

    let mut out: Vec<OutageEstimate> = fail_i
        .iter()
        .enumerate()
        .map(|(k, &v)| OutageEstimate::from_counts(BtiKind::Intended { k }, v, n_samples))
        .collect();
    for (l, row) in fail_e.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            out.push(OutageEstimate::from_counts(BtiKind::Eavesdropper { l, k }, v, n_samples));
        }
    }
    Ok(out)
}
