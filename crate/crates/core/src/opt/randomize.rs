//! Rank-one recovery of the information covariances by Gaussian
//! randomization.
//!
//! A covariance whose second eigenvalue is negligible is replaced by its
//! principal eigenvector. Otherwise candidates `w = W^{1/2}g`, `g ∼ CN(0, I)`,
//! are rescaled to `Tr(W)` and the set with the largest worst-case BTI margin
//! is kept. Sensing covariances are left untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::bti::min_bti_margin;
use super::problem::{SlotProblem, Targets};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};
use crate::semantic::BeamformerSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomizationParams {
    pub candidates: usize,
    /// `λ₂/λ₁` at or below which a covariance counts as rank one.
    pub rank_one_ratio: f64,
    /// Smallest acceptable margin, in units of `σ_c²`.
    pub margin_tolerance: f64,
}

impl Default for RandomizationParams {
    fn default() -> Self {
        Self {
            candidates: 100,
            rank_one_ratio: 1e-6,
            margin_tolerance: -1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Randomized {
    /// `W_k = w_k w_kᴴ` with `w_vec` set.
    pub beams: BeamformerSet,
    /// Worst BTI margin of the returned beams, in units of `σ_c²`.
    pub min_margin: f64,
    pub feasible: bool,
    /// Worst margin of every drawn candidate set; empty when all inputs were
    /// rank one.
    pub candidate_margins: Vec<f64>,
}

impl Randomized {
    pub fn require_feasible(self) -> Result<Self> {
        if self.feasible {
            Ok(self)
        } else {
            Err(Error::NoFeasibleCandidate {
                best_margin: self.min_margin,
            })
        }
    }
}

/// Principal eigenvector scaled to carry `Tr(W)`, when `W` is numerically
/// rank one.
pub fn rank_one_factor(w: &CMat, ratio: f64) -> Option<CVec> {
    let (vals, vecs) = linalg::hermitian_eigen(w);
    let n = vals.len();
    let top = vals[n - 1];
    if top <= 0.0 {
        return Some(CVec::zeros(n));
    }
    let second = if n > 1 { vals[n - 2].max(0.0) } else { 0.0 };
    if second / top > ratio {
        return None;
    }
    let trace = linalg::real_trace(w).max(0.0);
    Some(vecs.column(n - 1).into_owned() * linalg::c(trace.sqrt(), 0.0))
}

pub fn gaussian_randomization(
    beams: &BeamformerSet,
    problem: &SlotProblem,
    targets: &Targets,
    params: &RandomizationParams,
    seed: u64,
) -> Result<Randomized> {
    let n = beams.dim();
    let mut fixed: Vec<Option<CVec>> = Vec::with_capacity(beams.w.len());
    let mut roots = Vec::with_capacity(beams.w.len());
    for w in &beams.w {
        let lo = linalg::min_eigenvalue(w);
        if lo < -1e-6 * linalg::real_trace(w).abs().max(1e-300) {
            return Err(Error::NotPsd { min_eigenvalue: lo });
        }
        let factor = rank_one_factor(w, params.rank_one_ratio);
        roots.push(if factor.is_none() { Some(linalg::psd_sqrt(&linalg::project_psd(w))?) } else { None });
        fixed.push(factor);
    }

    let assemble = |vecs: Vec<CVec>| -> BeamformerSet {
        BeamformerSet {
            w: vecs.iter().map(linalg::outer).collect(),
            r: beams.r.clone(),
            w_vec: Some(vecs),
        }
    };

    if fixed.iter().all(Option::is_some) {
        let out = assemble(fixed.into_iter().map(Option::unwrap).collect());
        let margin = min_bti_margin(&out, problem, targets)?;
        return Ok(Randomized {
            beams: out,
            min_margin: margin,
            feasible: margin >= params.margin_tolerance,
            candidate_margins: Vec::new(),
        });
    }
    if params.candidates == 0 {
        return Err(Error::InvalidArgument("need at least one randomization candidate".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, BeamformerSet)> = None;
    let mut margins = Vec::with_capacity(params.candidates);
    for _ in 0..params.candidates {
        let vecs: Vec<CVec> = beams
            .w
            .iter()
            .zip(&fixed)
            .zip(&roots)
            .map(|((w, f), root)| match (f, root) {
                (Some(v), _) => v.clone(),
                (None, Some(root)) => {
                    let g = linalg::complex_gaussian(n, &mut rng);
                    let v = root * g;
                    let scale = (linalg::real_trace(w).max(0.0) / v.norm_squared().max(1e-300)).sqrt();
                    v * linalg::c(scale, 0.0)
                }
                (None, None) => unreachable!("every non-rank-one covariance has a root"),
            })
            .collect();
        let cand = assemble(vecs);
        let margin = min_bti_margin(&cand, problem, targets)?;
        margins.push(margin);
        if best.as_ref().is_none_or(|(m, _)| margin > *m) {
            best = Some((margin, cand));
        }
    }
    let (margin, out) = best.expect("at least one candidate");
    Ok(Randomized {
        beams: out,
        min_margin: margin,
        feasible: margin >= params.margin_tolerance,
        candidate_margins: margins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::steering_vector;
    use crate::opt::sdp::tests::small_problem;
    use crate::semantic::comm_sense_power;

    fn targets() -> Targets {
        Targets {
            lambda: 0.5,
            varrho: 6.0,
            rho: vec![0.65],
        }
    }

    #[test]
    fn rank_one_input_is_reproduced() {
        let p = small_problem(4, 0.01);
        let v = steering_vector(0.3, &p.geometry) * linalg::c(0.05, 0.02);
        let w = linalg::outer(&v);
        let beams = BeamformerSet::new(vec![w.clone()], vec![linalg::identity(4).scale(1e-3); 2]).unwrap();
        let out = gaussian_randomization(&beams, &p, &targets(), &RandomizationParams::default(), 1).unwrap();
        assert!((&out.beams.w[0] - &w).camax() < 1e-9 * w.camax());
        assert!(out.candidate_margins.is_empty());
        assert!((comm_sense_power(&out.beams) - comm_sense_power(&beams)).abs() < 1e-9);
    }

    #[test]
    fn rank_two_input_keeps_trace_and_best_candidate() {
        let p = small_problem(4, 0.01);
        let a = steering_vector(0.3, &p.geometry) * linalg::c(0.05, 0.0);
        let b = steering_vector(-0.2, &p.geometry) * linalg::c(0.02, 0.0);
        let w = linalg::outer(&a) + linalg::outer(&b);
        let beams = BeamformerSet::new(vec![w.clone()], vec![linalg::identity(4).scale(1e-4); 2]).unwrap();
        let out = gaussian_randomization(&beams, &p, &targets(), &RandomizationParams::default(), 7).unwrap();
        assert_eq!(out.candidate_margins.len(), 100);
        let trace_in = linalg::real_trace(&w);
        let trace_out = linalg::real_trace(&out.beams.w[0]);
        assert!((trace_in - trace_out).abs() < 1e-9 * trace_in);
        assert!(comm_sense_power(&out.beams) <= comm_sense_power(&beams) + 1e-12);
        let mut sorted = out.candidate_margins.clone();
        sorted.sort_by(f64::total_cmp);
        assert!(out.min_margin >= sorted[94]);
        let v = &out.beams.w_vec.as_ref().unwrap()[0];
        assert!((linalg::outer(v) - &out.beams.w[0]).camax() == 0.0);
    }

    #[test]
    fn same_seed_same_candidate() {
        let p = small_problem(3, 0.01);
        let w = linalg::identity(3).scale(0.01);
        let beams = BeamformerSet::new(vec![w], vec![linalg::identity(3).scale(1e-4); 2]).unwrap();
        let a = gaussian_randomization(&beams, &p, &targets(), &RandomizationParams::default(), 3).unwrap();
        let b = gaussian_randomization(&beams, &p, &targets(), &RandomizationParams::default(), 3).unwrap();
        assert_eq!(a.beams, b.beams);
    }

    #[test]
    fn impossible_targets_report_best_margin() {
        let p = small_problem(3, 0.01);
        let w = linalg::identity(3).scale(1e-6);
        let beams = BeamformerSet::new(vec![w], vec![linalg::identity(3).scale(1e-4); 2]).unwrap();
        let tg = Targets {
            lambda: 20.0,
            varrho: 6.0,
            rho: vec![0.65],
        };
        let out = gaussian_randomization(&beams, &p, &tg, &RandomizationParams::default(), 3).unwrap();
        assert!(!out.feasible);
        assert!(matches!(out.require_feasible(), Err(Error::NoFeasibleCandidate { .. })));
    }
}
