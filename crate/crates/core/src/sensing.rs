//! Fisher information about `(θ, β)` from the echo and the posterior
//! Cramér–Rao bound on the angle.
//!
//! With `B = a aᴴ` and `Ḃ = ∂B/∂θ = ȧ aᴴ + a ȧᴴ`, `T` samples and receiver
//! noise `σ_r²`, the observation blocks are
//!
//! ```text
//! J_θθ = (2T|β|²/σ_r²) · Tr(Ḃ R_x Ḃᴴ)
//! J_θβ = (2T/σ_r²) · Re{β* Tr(B R_x Ḃᴴ) · [1, j]}
//! J_ββ = (2T/σ_r²) · Tr(B R_x Bᴴ) · I₂
//! ```
//!
//! Every block is a real linear functional of `R_x`, so each is stored as a
//! Hermitian coefficient matrix `G` with `J = Tr(G R_x)`; the optimizer uses
//! the same forms to write the bound as a linear matrix inequality.

use nalgebra::{Matrix2, Matrix3, Matrix4, RowVector2};
use crate::array::{steering_derivative, steering_vector, ArrayGeometry};
use crate::error::{Error, Result};
use crate::kinematics::VehicleState;
use crate::linalg::{self, c, CMat};
use crate::tracking::prior_angle_information;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherBlocks {
    pub j_tt: f64,
    pub j_tb: RowVector2<f64>,
    pub j_bb: Matrix2<f64>,
}

impl FisherBlocks {
    pub fn zero() -> Self {
        Self {
            j_tt: 0.0,
            j_tb: RowVector2::zeros(),
            j_bb: Matrix2::zeros(),
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            j_tt: self.j_tt * k,
            j_tb: self.j_tb * k,
            j_bb: self.j_bb * k,
        }
    }
}

/// Coefficient matrices of the observation FIM as linear functionals of
/// `R_x`.
#[derive(Debug, Clone)]
pub struct FimForms {
    pub tt: CMat,
    pub tb: [CMat; 2],
    pub bb: CMat,
}

impl FimForms {
    pub fn new(state: &VehicleState, geom: &ArrayGeometry, n_samples: usize, sigma_r2: f64) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::InvalidArgument("need at least one sample".into()));
        }
        if !(sigma_r2 > 0.0) {
            return Err(Error::InvalidArgument(format!("radar noise power must be positive, got {sigma_r2}")));
        }
        let a = steering_vector(state.theta, geom);
        let da = steering_derivative(state.theta, geom);
        let b = linalg::outer(&a);
        let db = &da * a.adjoint() + &a * da.adjoint();
        let scale = 2.0 * n_samples as f64 / sigma_r2;
        let beta = state.beta;

        // Tr(Ḃ R Ḃᴴ) = Tr(ḂᴴḂ R); Tr(B R Ḃᴴ) = Tr(Ḃᴴ B R).
        let tt = (db.adjoint() * &db).scale(scale * beta.norm_sqr());
        let cross = db.adjoint() * &b * (beta.conj() * scale);
        let tb = [
            linalg::hermitian_part(&cross),
            linalg::hermitian_part(&(&cross * c(0.0, 1.0))),
        ];
        let bb = (b.adjoint() * &b).scale(scale);
        Ok(Self {
            tt: linalg::hermitian_part(&tt),
            tb,
            bb: linalg::hermitian_part(&bb),
        })
    }

    pub fn evaluate(&self, rx: &CMat) -> FisherBlocks {
        let f = |g: &CMat| (g * rx).trace().re;
        let bb = f(&self.bb);
        FisherBlocks {
            j_tt: f(&self.tt),
            j_tb: RowVector2::new(f(&self.tb[0]), f(&self.tb[1])),
            j_bb: Matrix2::new(bb, 0.0, 0.0, bb),
        }
    }
}

/// Observation FIM blocks for the target at `state` under transmit
/// covariance `rx`.
pub fn fim_observation(
    state: &VehicleState,
    rx: &CMat,
    geom: &ArrayGeometry,
    n_samples: usize,
    sigma_r2: f64,
) -> Result<FisherBlocks> {
    linalg::check_square(rx, geom.num_antennas, "transmit covariance")?;
    let lo = linalg::min_eigenvalue(rx);
    if lo < -linalg::PSD_TOL {
        return Err(Error::NotPsd { min_eigenvalue: lo });
    }
    Ok(FimForms::new(state, geom, n_samples, sigma_r2)?.evaluate(rx))
}

/// Posterior FIM restricted to `(θ, β)`: the observation blocks plus the
/// prior angle information `(M_{t|t-1}⁻¹)[1,1]` on the top-left entry.
pub fn fim_posterior(obs: &FisherBlocks, m_pred: &Matrix4<f64>) -> Result<Matrix3<f64>> {
    let prior = prior_angle_information(m_pred)?;
    Ok(assemble_posterior(obs, prior))
}

pub(crate) fn assemble_posterior(obs: &FisherBlocks, prior_info: f64) -> Matrix3<f64> {
    let mut j = Matrix3::zeros();
    j[(0, 0)] = obs.j_tt + prior_info;
    for k in 0..2 {
        j[(0, k + 1)] = obs.j_tb[k];
        j[(k + 1, 0)] = obs.j_tb[k];
        for l in 0..2 {
            j[(k + 1, l + 1)] = obs.j_bb[(k, l)];
        }
    }
    j
}

/// `(J⁻¹)[1,1]` through the Schur complement
/// `(J_θθ' − J_θβ J_ββ⁻¹ J_θβᵀ)⁻¹`.
///
/// A vanishing `J_ββ` (no energy towards the target) forces `J_θβ = 0` as well,
/// and the bound reduces to the inverse of the angle information.
pub fn pcrb_theta(j_post: &Matrix3<f64>) -> Result<f64> {
    let j_tt = j_post[(0, 0)];
    let j_tb = RowVector2::new(j_post[(0, 1)], j_post[(0, 2)]);
    let j_bb = Matrix2::new(j_post[(1, 1)], j_post[(1, 2)], j_post[(2, 1)], j_post[(2, 2)]);
    let scale = j_bb.amax();
    let correction = if scale <= 1e-300 {
        0.0
    } else {
        let inv = (j_bb / scale)
            .try_inverse()
            .ok_or(Error::NonIdentifiable(f64::NAN))?
            / scale;
        (j_tb * inv * j_tb.transpose())[(0, 0)]
    };
    let schur = j_tt - correction;
    if !(schur > 0.0) {
        return Err(Error::NonIdentifiable(schur));
    }
    Ok(1.0 / schur)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcrbReport {
    /// Bound on the angle MSE, rad².
    pub pcrb_theta: f64,
    /// `(M_{t|t-1}⁻¹)[1,1]`
    pub prior_info: f64,
}

/// PCRB for one vehicle given its predicted state and MSE matrix.
pub fn pcrb_report(
    state_pred: &VehicleState,
    m_pred: &Matrix4<f64>,
    rx: &CMat,
    geom: &ArrayGeometry,
    n_samples: usize,
    sigma_r2: f64,
) -> Result<PcrbReport> {
    let obs = fim_observation(state_pred, rx, geom, n_samples, sigma_r2)?;
    let prior_info = prior_angle_information(m_pred)?;
    let pcrb = pcrb_theta(&assemble_posterior(&obs, prior_info))?;
    Ok(PcrbReport {
        pcrb_theta: pcrb,
        prior_info,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_psd(n: usize, rng: &mut impl Rng) -> CMat {
        let a = CMat::from_fn(n, n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        &a * a.adjoint()
    }

    fn state(theta: f64, beta: Complex64) -> VehicleState {
        VehicleState::new(theta, 20.0, 10.0, beta)
    }

    #[test]
    fn single_antenna_has_no_angle_information() {
        let g = ArrayGeometry::half_wavelength(1);
        let rx = CMat::from_element(1, 1, c(0.7, 0.0));
        let f = fim_observation(&state(0.4, c(1.0, 0.0)), &rx, &g, 8, 2.0).unwrap();
        assert_eq!(f.j_tt, 0.0);
        assert_eq!(f.j_tb, RowVector2::zeros());
        let expected = 2.0 * 8.0 * 0.7 / 2.0;
        assert!((f.j_bb - Matrix2::identity() * expected).amax() < 1e-12);
    }

    #[test]
    fn blocks_scale_linearly_with_power() {
        let g = ArrayGeometry::half_wavelength(4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rx = random_psd(4, &mut rng);
        let s = state(0.3, c(0.8, -0.3));
        let f1 = fim_observation(&s, &rx, &g, 8, 1.0).unwrap();
        let f3 = fim_observation(&s, &rx.scale(3.0), &g, 8, 1.0).unwrap();
        let f1s = f1.scaled(3.0);
        assert!((f3.j_tt - f1s.j_tt).abs() <= 1e-12 * f1s.j_tt.abs());
        assert!((f3.j_tb - f1s.j_tb).amax() <= 1e-12 * f1s.j_tb.amax().max(1.0));
        assert!((f3.j_bb - f1s.j_bb).amax() <= 1e-12 * f1s.j_bb.amax());
    }

    /// Builds `B` and `Ḃ` entry by entry and evaluates the traces directly.
    fn brute_force(theta: f64, beta: Complex64, n: usize, t: usize, s2: f64, rx: &CMat) -> (f64, [f64; 2], f64) {
        let k = std::f64::consts::PI;
        let mut b = CMat::zeros(n, n);
        let mut db = CMat::zeros(n, n);
        for p in 0..n {
            for q in 0..n {
                let phase = k * (p as f64 - q as f64) * theta.sin();
                let e = Complex64::from_polar(1.0, phase);
                b[(p, q)] = e;
                db[(p, q)] = e * c(0.0, k * (p as f64 - q as f64) * theta.cos());
            }
        }
        let mut tr_dd = c(0.0, 0.0);
        let mut tr_bd = c(0.0, 0.0);
        let mut tr_bb = c(0.0, 0.0);
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    // (X R Yᴴ)_{pp} = Σ X_pq R_qr conj(Y_pr)
                    tr_dd += db[(p, q)] * rx[(q, r)] * db[(p, r)].conj();
                    tr_bd += b[(p, q)] * rx[(q, r)] * db[(p, r)].conj();
                    tr_bb += b[(p, q)] * rx[(q, r)] * b[(p, r)].conj();
                }
            }
        }
        let sc = 2.0 * t as f64 / s2;
        let x = beta.conj() * tr_bd;
        (
            sc * beta.norm_sqr() * tr_dd.re,
            [sc * x.re, sc * (x * c(0.0, 1.0)).re],
            sc * tr_bb.re,
        )
    }

    #[test]
    fn matches_elementwise_trace_evaluation() {
        let g = ArrayGeometry::half_wavelength(4);
        let rx = linalg::identity(4);
        let f = fim_observation(&state(0.3, c(1.0, 0.0)), &rx, &g, 8, 1.0).unwrap();
        let (tt, _, _) = brute_force(0.3, c(1.0, 0.0), 4, 8, 1.0, &rx);
        assert!((f.j_tt - tt).abs() <= 1e-9 * tt.abs());

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = rng.random_range(2..7);
            let rx = random_psd(n, &mut rng);
            let theta = rng.random_range(-1.4..1.4);
            let beta = c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let g = ArrayGeometry::half_wavelength(n);
            let f = fim_observation(&state(theta, beta), &rx, &g, 16, 0.5).unwrap();
            let (tt, tb, bb) = brute_force(theta, beta, n, 16, 0.5, &rx);
            let scale = tt.abs().max(bb.abs());
            assert!((f.j_tt - tt).abs() <= 1e-9 * scale);
            assert!((f.j_tb[0] - tb[0]).abs() <= 1e-9 * scale);
            assert!((f.j_tb[1] - tb[1]).abs() <= 1e-9 * scale);
            assert!((f.j_bb[(0, 0)] - bb).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn rejects_indefinite_transmit_covariance() {
        let g = ArrayGeometry::half_wavelength(2);
        let rx = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]));
        assert!(fim_observation(&state(0.1, c(1.0, 0.0)), &rx, &g, 4, 1.0).is_err());
    }

    #[test]
    fn zero_observation_leaves_prior_only() {
        let m = Matrix4::from_diagonal(&nalgebra::Vector4::new(0.25, 1.0, 2.0, 3.0));
        let j = fim_posterior(&FisherBlocks::zero(), &m).unwrap();
        assert!((j[(0, 0)] - 4.0).abs() < 1e-12);
        assert!((pcrb_theta(&j).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn identity_prior_adds_one() {
        let obs = FisherBlocks {
            j_tt: 2.5,
            j_tb: RowVector2::new(0.1, 0.2),
            j_bb: Matrix2::identity() * 3.0,
        };
        let j = fim_posterior(&obs, &Matrix4::identity()).unwrap();
        assert!((j[(0, 0)] - 3.5).abs() < 1e-15);
        assert_eq!(j[(0, 1)], 0.1);
        assert_eq!(j[(2, 0)], 0.2);
        assert_eq!(j[(1, 1)], 3.0);
    }

    #[test]
    fn posterior_assembly_with_random_prior() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = Matrix4::from_fn(|_, _| rng.random::<f64>() - 0.5);
        let m = a * a.transpose() + Matrix4::identity() * 0.2;
        let obs = FisherBlocks {
            j_tt: 1.7,
            j_tb: RowVector2::new(-0.3, 0.4),
            j_bb: Matrix2::identity() * 2.2,
        };
        let j = fim_posterior(&obs, &m).unwrap();
        let prior = m.try_inverse().unwrap()[(0, 0)];
        let expected = Matrix3::new(1.7 + prior, -0.3, 0.4, -0.3, 2.2, 0.0, 0.4, 0.0, 2.2);
        assert!((j - expected).amax() < 1e-12);
    }

    #[test]
    fn ill_conditioned_prior_is_rejected() {
        let m = Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, 1.0, 1.0, 1e-14));
        assert!(matches!(
            fim_posterior(&FisherBlocks::zero(), &m),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn block_diagonal_bound() {
        let j = Matrix3::new(4.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!((pcrb_theta(&j).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn non_identifiable_geometry_is_reported() {
        let j = Matrix3::new(1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(matches!(pcrb_theta(&j), Err(Error::NonIdentifiable(_))));
    }

    proptest! {
        #[test]
        fn schur_form_equals_inverse_entry(
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = Matrix3::from_fn(|_, _| rng.random::<f64>() - 0.5);
            let mut j = a * a.transpose() + Matrix3::identity() * 0.5;
            // The β-block of a real FIM is a multiple of I₂.
            let bb = 0.5 * (j[(1, 1)] + j[(2, 2)]);
            j[(1, 1)] = bb;
            j[(2, 2)] = bb;
            j[(1, 2)] = 0.0;
            j[(2, 1)] = 0.0;
            prop_assume!(j.symmetric_eigenvalues().min() > 1e-2);
            let closed = pcrb_theta(&j).unwrap();
            let direct = j.try_inverse().unwrap()[(0, 0)];
            prop_assert!(((closed - direct) / direct).abs() < 1e-10);
        }
    }

    #[test]
    fn more_power_never_hurts() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let g = ArrayGeometry::half_wavelength(6);
        for _ in 0..100 {
            let rx = random_psd(6, &mut rng);
            let s = state(rng.random_range(0.05..1.5), c(rng.random_range(0.2..2.0), 0.0));
            let m = Matrix4::from_diagonal(&nalgebra::Vector4::new(4e-4, 0.04, 0.25, 0.01));
            let p1 = pcrb_report(&s, &m, &rx, &g, 64, 1.0).unwrap();
            let p2 = pcrb_report(&s, &m, &rx.scale(2.0), &g, 64, 1.0).unwrap();
            assert!(p2.pcrb_theta <= p1.pcrb_theta * (1.0 + 1e-12));
            assert!(p1.pcrb_theta <= 1.0 / p1.prior_info + 1e-12);
        }
    }
}
