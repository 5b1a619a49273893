//! Semantic rates, the extraction-ratio floor, secrecy rates and power
//! accounting.
//!
//! A vehicle that receives semantically compressed text with extraction ratio
//! `ρ` gets `(ι/ρ)·log₂(1 + γ)` bits/s/Hz of source text. Compression is paid
//! for with computing power `−F·ln ρ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticProfile {
    /// Bits per word, `ι`.
    pub iota: f64,
    /// Extraction ratio per intended vehicle.
    pub rho: Vec<f64>,
    /// BLEU floor `Q_t`.
    pub bleu_floor: f64,
    pub gram_weights: Vec<f64>,
    pub gram_precisions: Vec<f64>,
}

impl SemanticProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.iota > 0.0 && self.iota.is_finite()) {
            return Err(Error::InvalidArgument(format!("iota must be positive, got {}", self.iota)));
        }
        if self.gram_weights.len() != self.gram_precisions.len() {
            return Err(Error::Dimension(format!(
                "{} gram weights but {} precisions",
                self.gram_weights.len(),
                self.gram_precisions.len()
            )));
        }
        if self.gram_weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidArgument("gram weights must be non-negative".into()));
        }
        let floor = rho_lower_bound(self)?.value;
        for &r in &self.rho {
            if !(r >= floor - 1e-12 && r <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "extraction ratio {r} outside [{floor}, 1]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoBound {
    pub value: f64,
    /// The formula gave a value above 1 (or a non-positive denominator) and
    /// was clamped to 1.
    pub clamped: bool,
}

/// `1 / (1 − ln Q + Σ_g w_g ln p_g)`, clamped into `(0, 1]`.
pub fn rho_lower_bound(profile: &SemanticProfile) -> Result<RhoBound> {
    let q = profile.bleu_floor;
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidArgument(format!("BLEU floor must lie in (0, 1], got {q}")));
    }
    if profile.gram_weights.len() != profile.gram_precisions.len() {
        return Err(Error::Dimension("gram weights and precisions differ in length".into()));
    }
    let mut denom = 1.0 - q.ln();
    for (&w, &p) in profile.gram_weights.iter().zip(&profile.gram_precisions) {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidArgument(format!("gram precision must lie in (0, 1], got {p}")));
        }
        denom += w * p.ln();
    }
    let raw = 1.0 / denom;
    if denom <= 0.0 || raw > 1.0 {
        return Ok(RhoBound {
            value: 1.0,
            clamped: true,
        });
    }
    Ok(RhoBound {
        value: raw,
        clamped: false,
    })
}

/// Transmit beamformers: one information covariance per intended vehicle and
/// one sensing covariance per tracked vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamformerSet {
    pub w: Vec<CMat>,
    pub r: Vec<CMat>,
    /// Rank-one factors with `W_k = w_k w_kᴴ`, set after randomization.
    #[serde(default)]
    pub w_vec: Option<Vec<CVec>>,
}

impl BeamformerSet {
    pub fn new(w: Vec<CMat>, r: Vec<CMat>) -> Result<Self> {
        let n = w.first().or(r.first()).map(|m| m.nrows()).unwrap_or(0);
        for m in w.iter().chain(&r) {
            linalg::check_square(m, n, "beamformer")?;
        }
        Ok(Self { w, r, w_vec: None })
    }

    pub fn dim(&self) -> usize {
        self.w.first().or(self.r.first()).map(|m| m.nrows()).unwrap_or(0)
    }

    /// Equal power split over all covariances, each `p/(K+L+K)·I/N`.
    pub fn isotropic(n: usize, n_intended: usize, n_vehicles: usize, power: f64) -> Self {
        let parts = (n_intended + n_vehicles).max(1) as f64;
        let block = linalg::identity(n).scale(power / (parts * n as f64));
        Self {
            w: vec![block.clone(); n_intended],
            r: vec![block; n_vehicles],
            w_vec: None,
        }
    }

    fn sensing_sum(&self) -> CMat {
        let n = self.dim();
        self.r.iter().fold(linalg::zeros(n), |acc, m| acc + m)
    }
}

/// `R_x = Σ W_k + Σ R_i`.
pub fn transmit_covariance(beams: &BeamformerSet) -> CMat {
    beams.w.iter().fold(beams.sensing_sum(), |acc, m| acc + m)
}

/// `Tr(R_x)`, the communication and sensing power.
pub fn comm_sense_power(beams: &BeamformerSet) -> f64 {
    beams.w.iter().chain(&beams.r).map(linalg::real_trace).sum()
}

/// `−F·Σ ln ρ_k`.
pub fn computing_power(rho: &[f64], f: f64) -> Result<f64> {
    let mut acc = 0.0;
    for &r in rho {
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::InvalidArgument(format!("extraction ratio must lie in (0, 1], got {r}")));
        }
        acc -= r.ln();
    }
    Ok(f * acc)
}

fn check_sinr_args(k: usize, channel: &CVec, beams: &BeamformerSet, sigma_c2: f64) -> Result<()> {
    if k >= beams.w.len() {
        return Err(Error::InvalidArgument(format!(
            "intended index {k} but only {} beams",
            beams.w.len()
        )));
    }
    if channel.len() != beams.dim() {
        return Err(Error::Dimension(format!(
            "channel of length {} for {} antennas",
            channel.len(),
            beams.dim()
        )));
    }
    if !(sigma_c2 > 0.0) {
        return Err(Error::InvalidArgument(format!("noise power must be positive, got {sigma_c2}")));
    }
    Ok(())
}

/// `hᴴW_k h / (hᴴ(Σ_{k'≠k} W_k' + Σ R_i)h + σ_c²)`.
pub fn sinr_intended(k: usize, channel: &CVec, beams: &BeamformerSet, sigma_c2: f64) -> Result<f64> {
    check_sinr_args(k, channel, beams, sigma_c2)?;
    Ok(sinr_at(k, channel, beams, sigma_c2))
}

/// SINR of an unintended vehicle with channel `channel` decoding the stream
/// meant for vehicle `k`. Other intended streams and all sensing beams
/// interfere.
pub fn sinr_eavesdropper(k: usize, channel: &CVec, beams: &BeamformerSet, sigma_c2: f64) -> Result<f64> {
    check_sinr_args(k, channel, beams, sigma_c2)?;
    Ok(sinr_at(k, channel, beams, sigma_c2))
}

fn sinr_at(k: usize, h: &CVec, beams: &BeamformerSet, sigma_c2: f64) -> f64 {
    let signal = linalg::quad_form(&beams.w[k], h).max(0.0);
    let mut interference = 0.0;
    for (j, w) in beams.w.iter().enumerate() {
        if j != k {
            interference += linalg::quad_form(w, h);
        }
    }
    for r in &beams.r {
        interference += linalg::quad_form(r, h);
    }
    signal / (interference.max(0.0) + sigma_c2)
}

/// `(ι/ρ)·log₂(1 + γ)`.
pub fn semantic_rate(sinr: f64, iota: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidArgument(format!("extraction ratio must lie in (0, 1], got {rho}")));
    }
    if !(sinr >= 0.0) {
        return Err(Error::InvalidArgument(format!("SINR must be non-negative, got {sinr}")));
    }
    Ok(iota / rho * (1.0 + sinr).log2())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// `γ_k` per intended vehicle.
    pub sinr: Vec<f64>,
    /// `ι·log₂(1 + γ_k)`, the rate without semantic compression.
    pub conventional_rate: Vec<f64>,
    pub semantic_rate: Vec<f64>,
    /// `Γ_{l|k}`, indexed `[l][k]`.
    pub eaves_sinr: Vec<Vec<f64>>,
    /// `S_{l|k}`, indexed `[l][k]`, computed with the intended vehicle's `ρ_k`.
    pub eaves_rate: Vec<Vec<f64>>,
    pub ssr: Vec<f64>,
}

/// Rates for every intended vehicle and every eavesdropping pair.
///
/// Eavesdroppers are assumed to share the intended vehicle's knowledge base,
/// so they decode with the same `ρ_k`.
pub fn rate_report(
    beams: &BeamformerSet,
    intended: &[CVec],
    eavesdroppers: &[CVec],
    sigma_c2: f64,
    iota: f64,
    rho: &[f64],
) -> Result<RateReport> {
    let k_count = beams.w.len();
    if intended.len() != k_count || rho.len() != k_count {
        return Err(Error::Dimension(format!(
            "{k_count} information beams, {} channels, {} extraction ratios",
            intended.len(),
            rho.len()
        )));
    }
    let mut report = RateReport {
        sinr: Vec::with_capacity(k_count),
        conventional_rate: Vec::with_capacity(k_count),
        semantic_rate: Vec::with_capacity(k_count),
        eaves_sinr: Vec::with_capacity(eavesdroppers.len()),
        eaves_rate: Vec::with_capacity(eavesdroppers.len()),
        ssr: Vec::with_capacity(k_count),
    };
    for k in 0..k_count {
        let g = sinr_intended(k, &intended[k], beams, sigma_c2)?;
        report.sinr.push(g);
        report.conventional_rate.push(semantic_rate(g, iota, 1.0)?);
        report.semantic_rate.push(semantic_rate(g, iota, rho[k])?);
    }
    for h in eavesdroppers {
        let mut sinr_row = Vec::with_capacity(k_count);
        let mut rate_row = Vec::with_capacity(k_count);
        for k in 0..k_count {
            let g = sinr_eavesdropper(k, h, beams, sigma_c2)?;
            sinr_row.push(g);
            rate_row.push(semantic_rate(g, iota, rho[k])?);
        }
        report.eaves_sinr.push(sinr_row);
        report.eaves_rate.push(rate_row);
    }
    for k in 0..k_count {
        let s = secrecy_rate(k, &report);
        report.ssr.push(s);
    }
    Ok(report)
}

/// `min_l [S_k − S_{l|k}]⁺`; with no eavesdroppers this is `S_k`.
pub fn secrecy_rate(k: usize, report: &RateReport) -> f64 {
    let own = report.semantic_rate[k];
    report
        .eaves_rate
        .iter()
        .map(|row| (own - row[k]).max(0.0))
        .fold(own.max(0.0), f64::min)
}
