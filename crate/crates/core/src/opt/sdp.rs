//! The per-slot semidefinite program with rate targets and extraction ratios
//! held fixed.
//!
//! Decision variables are the information covariances `W_k`, the sensing
//! covariances `R_i`, the BTI slacks `(a, b)` of every outage constraint, the
//! PCRB slacks `U_i` and epigraph variables `t_i ≥ 1/U_i`. The rank-one
//! requirement on `W_k` is dropped.
//!
//! Internally powers are measured in units of `P_t` and channel gains in
//! units of `σ_c²/P_t`, so every constraint has entries of order one.

use std::f64::consts::SQRT_2;

use super::affine::{AffineExpr, HermCombo, HermVar};
use super::bti::{bernstein_coefficient, sinr_threshold, BtiKind};
use super::conic::{ConicProgram, ConicSolver, SolveStatus};
use super::problem::{SlotProblem, Targets};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::semantic::BeamformerSet;
use crate::sensing::FimForms;

#[derive(Debug, Clone)]
struct Layout {
    w: Vec<HermVar>,
    r: Vec<HermVar>,
    u: Vec<usize>,
    t: Vec<usize>,
    /// `s_i` with `U_i = s_i·Ũ_i`.
    u_scale: Vec<f64>,
    slacks: Vec<(BtiKind, usize, usize)>,
}

/// An assembled program together with the map back to beams.
#[derive(Debug, Clone)]
pub struct SdpProgram {
    pub program: ConicProgram,
    pub targets: Targets,
    layout: Layout,
    power_budget: f64,
    kappa1: f64,
    kappa2: f64,
}

impl SdpProgram {
    /// Number of PSD blocks of each side length, sorted by side.
    pub fn psd_block_sizes(&self) -> Vec<(usize, usize)> {
        let mut counts = std::collections::BTreeMap::new();
        for b in self.program.blocks() {
            if let super::conic::Cone::PsdTriangle(side) = b.cone {
                *counts.entry(side).or_insert(0) += 1;
            }
        }
        counts.into_iter().collect()
    }

    pub fn num_bti_blocks(&self) -> usize {
        self.layout.slacks.len()
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub beams: BeamformerSet,
    /// `U_i` in rad⁻²; `1/U_i` bounds the angle PCRB.
    pub u: Vec<f64>,
    /// `κ₁(λ − ϱ) − κ₂·Σ 1/U_i`
    pub objective: f64,
    pub status: SolveStatus,
    pub solver_iterations: u32,
    /// Largest cone violation of the returned point in the scaled program.
    pub max_violation: f64,
    /// Largest `|t_i·U_i − 1|` in scaled units; small when every epigraph is
    /// tight.
    pub epigraph_gap: f64,
}

/// Remaining transmit budget after computing power, `P_t + F·Σ ln ρ_k`.
pub fn transmit_budget(problem: &SlotProblem, rho: &[f64]) -> f64 {
    let p = &problem.params;
    p.power_budget + p.computing_coefficient * rho.iter().map(|r| r.ln()).sum::<f64>()
}

pub fn assemble_sdp(problem: &SlotProblem, targets: &Targets) -> Result<SdpProgram> {
    problem.validate()?;
    let p = &problem.params;
    let n = problem.geometry.num_antennas;
    let k_count = problem.num_intended();
    let v_count = problem.num_vehicles();
    if targets.rho.len() != k_count {
        return Err(Error::Dimension(format!(
            "{} extraction ratios for {k_count} intended vehicles",
            targets.rho.len()
        )));
    }
    let budget = transmit_budget(problem, &targets.rho);
    if !(budget > 0.0) {
        return Err(Error::Infeasible);
    }

    let mut prog = ConicProgram::new();
    let herm = |prog: &mut ConicProgram| HermVar {
        offset: prog.add_variables(HermVar::len(n)),
        n,
    };
    let w: Vec<HermVar> = (0..k_count).map(|_| herm(&mut prog)).collect();
    let r: Vec<HermVar> = (0..v_count).map(|_| herm(&mut prog)).collect();
    for v in w.iter().chain(&r) {
        prog.add_psd(2 * n, v.packed_embedding())?;
    }

    // Power: Σ Tr W̃ + Σ Tr R̃ ≤ budget / P_t
    let mut power = AffineExpr::constant(budget / p.power_budget);
    let eye = linalg::identity(n);
    for v in w.iter().chain(&r) {
        power.add_scaled(&v.trace_form(&eye), -1.0);
    }
    prog.add_nonnegative(vec![power.compact()])?;

    // Outage restrictions with channels scaled by √(P_t/σ_c²).
    let gain = (p.power_budget / p.sigma_c2).sqrt();
    let mut slacks = Vec::new();
    let sensing = r.iter().fold(HermCombo::new(n), |acc, v| acc.with(*v, 1.0));
    for k in 0..k_count {
        let gamma = sinr_threshold(targets.lambda, targets.rho[k], p.iota)?;
        let mut chi = HermCombo::new(n).with(w[k], 1.0 / gamma);
        for (j, v) in w.iter().enumerate() {
            if j != k {
                chi = chi.with(*v, -1.0);
            }
        }
        for &(v, c) in &sensing.parts {
            chi = chi.with(v, -c);
        }
        let (a, b) = add_bti(&mut prog, &chi, &problem.intended[k], gain, -1.0, p.epsilon_intended)?;
        slacks.push((BtiKind::Intended { k }, a, b));
    }
    for (l, est) in problem.eavesdroppers.iter().enumerate() {
        for k in 0..k_count {
            let cap = sinr_threshold(targets.varrho, targets.rho[k], p.iota)?;
            let chi = sensing.clone().with(w[k], -1.0 / cap);
            let (a, b) = add_bti(&mut prog, &chi, est, gain, 1.0, p.epsilon_eavesdropper)?;
            slacks.push((BtiKind::Eavesdropper { l, k }, a, b));
        }
    }

    // PCRB LMIs and epigraphs.
    let all = w.iter().chain(&r).fold(HermCombo::new(n), |acc, v| acc.with(*v, 1.0));
    let mut u = Vec::with_capacity(v_count);
    let mut t = Vec::with_capacity(v_count);
    let mut u_scale = Vec::with_capacity(v_count);
    for target in &problem.targets {
        let forms = FimForms::new(&target.state, &problem.geometry, p.n_samples, p.sigma_r2)?;
        let isotropic = p.power_budget / n as f64 * linalg::real_trace(&forms.tt);
        let s = target.prior_info + isotropic;
        let s = if s > 0.0 && s.is_finite() { s } else { 1.0 };
        let k = p.power_budget / s;
        let ui = prog.add_variables(1);
        let ti = prog.add_variables(1);
        let j_tt = all
            .trace_form(&forms.tt)
            .scaled(k)
            .plus_constant(target.prior_info / s)
            .plus_term(ui, -1.0);
        let j_tb: Vec<AffineExpr> = forms.tb.iter().map(|g| all.trace_form(g).scaled(k * SQRT_2)).collect();
        let j_bb = all.trace_form(&forms.bb).scaled(k);
        prog.add_psd(
            3,
            vec![
                j_tt,
                j_tb[0].clone(),
                j_bb.clone(),
                j_tb[1].clone(),
                AffineExpr::default(),
                j_bb,
            ],
        )?;
        prog.add_psd(
            2,
            vec![AffineExpr::var(ti), AffineExpr::constant(SQRT_2), AffineExpr::var(ui)],
        )?;
        u.push(ui);
        t.push(ti);
        u_scale.push(s);
    }
    let inv_max = u_scale.iter().map(|s| 1.0 / s).fold(0.0, f64::max);
    for (i, &ti) in t.iter().enumerate() {
        prog.set_objective(ti, p.kappa2 * (1.0 / u_scale[i]) / inv_max);
    }

    Ok(SdpProgram {
        program: prog,
        targets: targets.clone(),
        layout: Layout {
            w,
            r,
            u,
            t,
            u_scale,
            slacks,
        },
        power_budget: p.power_budget,
        kappa1: p.kappa1,
        kappa2: p.kappa2,
    })
}

/// Adds one BTI triplet for `χ` and returns the indices of `(a, b)`.
fn add_bti(
    prog: &mut ConicProgram,
    chi: &HermCombo,
    est: &crate::array::ChannelEstimate,
    gain: f64,
    noise_sign: f64,
    epsilon: f64,
) -> Result<(usize, usize)> {
    let n = chi.n;
    let root = est.omega_sqrt()?.scale(gain);
    let h = est.h_bar.scale(gain);
    let a = prog.add_variables(1);
    let b = prog.add_variables(1);

    let mut q = chi.congruence(&root);
    let r_parts = chi.mul_vec(&root, &h);
    let s = chi.quad_form(&h).plus_constant(noise_sign);

    let mut lin = q.trace();
    lin.add_scaled(&s, 1.0);
    lin.add_term(a, -bernstein_coefficient(epsilon));
    lin.add_term(b, epsilon.ln());
    prog.add_nonnegative(vec![lin.compact(), AffineExpr::var(b)])?;

    let mut soc = Vec::with_capacity(1 + n * n + 2 * n);
    soc.push(AffineExpr::var(a));
    soc.extend(q.frobenius_rows());
    for (re, im) in &r_parts {
        soc.push(re.clone().scaled(SQRT_2));
        soc.push(im.clone().scaled(SQRT_2));
    }
    prog.add_second_order(soc)?;

    q.add_to_diagonal(&AffineExpr::var(b));
    prog.add_psd(2 * n, q.packed_embedding())?;
    Ok((a, b))
}

pub fn solve_sdp_step(program: &SdpProgram, solver: &dyn ConicSolver) -> Result<SdpSolution> {
    let sol = solver.solve(&program.program)?;
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Err(Error::Infeasible),
        SolveStatus::NumericalFailure => {
            return Err(Error::NumericalFailure(format!(
                "no solution after {} iterations",
                sol.iterations
            )))
        }
    }
    if sol.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("solver output"));
    }
    let x = &sol.x;
    let lay = &program.layout;
    let extract = |v: &HermVar| -> CMat {
        linalg::project_psd(&linalg::hermitian_part(&v.value(x))).scale(program.power_budget)
    };
    let beams = BeamformerSet::new(lay.w.iter().map(extract).collect(), lay.r.iter().map(extract).collect())?;
    let u: Vec<f64> = lay.u.iter().zip(&lay.u_scale).map(|(&i, s)| x[i] * s).collect();
    if u.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::NumericalFailure("non-positive PCRB slack".into()));
    }
    let targets = &program.targets;
    let objective =
        program.kappa1 * (targets.lambda - targets.varrho) - program.kappa2 * u.iter().map(|v| 1.0 / v).sum::<f64>();
    let max_violation = program.program.violations(x).into_iter().fold(0.0, f64::max);
    let epigraph_gap = lay
        .t
        .iter()
        .zip(&lay.u)
        .map(|(&ti, &ui)| (x[ti] * x[ui] - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(SdpSolution {
        beams,
        u,
        objective,
        status: sol.status,
        solver_iterations: sol.iterations,
        max_violation,
        epigraph_gap,
    })
}
