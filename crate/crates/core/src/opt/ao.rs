//! Alternating optimization over beams, extraction ratios and rate targets.
//!
//! Each iteration solves the slot SDP at fixed `(λ, ϱ, ρ)`, picks the
//! smallest extraction ratio the remaining power allows, then raises `λ` by
//! `Δλ` and lowers `ϱ` by `Δϱ`. The first infeasible SDP reverts the targets to
//! the last feasible pair and freezes them. The loop stops once consecutive
//! beam sets differ by at most `ε` (Frobenius norm, in units of `P_t`) or the
//! iteration cap is hit.

use serde::{Deserialize, Serialize};

use super::conic::ConicSolver;
use super::problem::{SlotProblem, Targets};
use super::sdp::{assemble_sdp, solve_sdp_step, SdpSolution};
use crate::error::{Error, Result};
use crate::linalg;
use crate::semantic::{comm_sense_power, semantic_rate, BeamformerSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoParams {
    pub initial_lambda: f64,
    pub delta_lambda: f64,
    pub delta_varrho: f64,
    /// Convergence threshold on beam increments, relative to `P_t`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub rho_lower_bound: f64,
    /// With semantic compression off every `ρ` is pinned to 1.
    pub semantic: bool,
    /// Bisect each vehicle's `ρ` in turn instead of one shared value.
    pub per_vehicle_rho: bool,
}

impl Default for AoParams {
    fn default() -> Self {
        Self {
            initial_lambda: 0.1,
            delta_lambda: 0.1,
            delta_varrho: 0.1,
            tolerance: 1e-3,
            max_iterations: 100,
            rho_lower_bound: 0.65,
            semantic: true,
            per_vehicle_rho: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoState {
    pub lambda: f64,
    pub varrho: f64,
    pub rho: Vec<f64>,
    /// PCRB slacks of the last feasible solve.
    pub u: Vec<f64>,
    pub iteration: usize,
    pub frozen: bool,
    pub last_feasible: Option<(f64, f64)>,
}

/// Steps the targets after an SDP solve.
///
/// A feasible solve records `(λ, ϱ)` and moves to `(λ + Δλ, max(0, ϱ − Δϱ))`;
/// an infeasible one restores the last feasible pair and freezes. Frozen
/// targets never move again.
pub fn update_targets(state: &AoState, feasible: bool, params: &AoParams) -> AoState {
    let mut next = state.clone();
    if feasible {
        next.last_feasible = Some((state.lambda, state.varrho));
        if !state.frozen {
            next.lambda = state.lambda + params.delta_lambda;
            next.varrho = (state.varrho - params.delta_varrho).max(0.0);
        }
    } else {
        if let Some((l, v)) = state.last_feasible {
            next.lambda = l;
            next.varrho = v;
        }
        next.frozen = true;
    }
    next
}

/// Absolute tolerance of the bisection on `ρ`.
pub const RHO_TOLERANCE: f64 = 1e-4;
/// Slack allowed on the power budget when testing a candidate `ρ`.
pub const POWER_TOLERANCE: f64 = 1e-6;

/// Smallest shared `ρ ∈ [ρ_LB, 1]` with `Tr(R_x) − F·K·ln ρ ≤ P_t`.
pub fn bisect_rho(beams: &BeamformerSet, f: f64, power_budget: f64, rho_lower_bound: f64) -> Result<f64> {
    let k = beams.w.len().max(1) as f64;
    bisect_one(comm_sense_power(beams), f * k, power_budget, rho_lower_bound)
}

/// Coordinate-wise variant: each `ρ_k` in turn is lowered as far as the
/// budget allows with the others held at their current values.
pub fn bisect_rho_per_vehicle(
    beams: &BeamformerSet,
    f: f64,
    power_budget: f64,
    rho_lower_bound: f64,
    current: &[f64],
) -> Result<Vec<f64>> {
    let base = comm_sense_power(beams);
    let mut rho = current.to_vec();
    for k in 0..rho.len() {
        let others: f64 = rho.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, r)| -f * r.ln()).sum();
        rho[k] = bisect_one(base + others, f, power_budget, rho_lower_bound)?;
    }
    Ok(rho)
}

fn bisect_one(fixed_power: f64, f: f64, budget: f64, lower: f64) -> Result<f64> {
    if !(lower > 0.0 && lower <= 1.0) {
        return Err(Error::InvalidArgument(format!("ρ lower bound must lie in (0, 1], got {lower}")));
    }
    let fits = |rho: f64| fixed_power - f * rho.ln() <= budget + POWER_TOLERANCE;
    if !fits(1.0) {
        return Err(Error::Infeasible);
    }
    if fits(lower) {
        return Ok(lower);
    }
    let (mut lo, mut hi) = (lower, 1.0);
    while hi - lo > RHO_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if fits(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Starting point of the loop.
#[derive(Debug, Clone, PartialEq)]
pub struct AoInit {
    pub lambda: f64,
    pub varrho: f64,
    pub rho: Vec<f64>,
    /// Beams the first solve is compared against.
    pub previous: Option<BeamformerSet>,
    pub frozen: bool,
}

/// `λ₀` from the parameters; `ρ₀ = max(ρ_LB, exp(−P_t/(2FK)))` so that
/// computing takes at most half the budget; `ϱ₀` is the largest eavesdropper
/// rate under an isotropic transmission at `ρ₀`.
pub fn initial_targets(problem: &SlotProblem, params: &AoParams) -> Result<AoInit> {
    let p = &problem.params;
    let k_count = problem.num_intended();
    let rho0 = if params.semantic {
        params
            .rho_lower_bound
            .max((-0.5 * p.power_budget / (p.computing_coefficient * k_count as f64)).exp())
            .min(1.0)
    } else {
        1.0
    };
    let rho = vec![rho0; k_count];
    let budget = super::sdp::transmit_budget(problem, &rho);
    let iso = BeamformerSet::isotropic(
        problem.geometry.num_antennas,
        k_count,
        problem.num_vehicles(),
        budget.max(0.0),
    );
    let mut varrho: f64 = 0.0;
    for est in &problem.eavesdroppers {
        for k in 0..k_count {
            let sinr = restricted_eavesdropper_sinr(k, &est.h_bar, &iso, p.sigma_c2);
            varrho = varrho.max(semantic_rate(sinr, p.iota, rho[k])?);
        }
    }
    if !problem.eavesdroppers.is_empty() {
        varrho = varrho.max(params.delta_varrho);
    }
    Ok(AoInit {
        lambda: params.initial_lambda,
        varrho,
        rho,
        previous: None,
        frozen: false,
    })
}

/// Eavesdropper SINR with only the sensing beams as interference, the form
/// the outage restriction controls.
pub fn restricted_eavesdropper_sinr(k: usize, h: &linalg::CVec, beams: &BeamformerSet, sigma_c2: f64) -> f64 {
    let signal = linalg::quad_form(&beams.w[k], h).max(0.0);
    let interference: f64 = beams.r.iter().map(|r| linalg::quad_form(r, h)).sum();
    signal / (interference.max(0.0) + sigma_c2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoIteration {
    pub lambda: f64,
    pub varrho: f64,
    pub feasible: bool,
    /// `κ₁(λ − ϱ) − κ₂·Σ 1/U_i` for feasible solves.
    pub objective: Option<f64>,
    pub w_increment: Option<f64>,
    pub r_increment: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct AoDiagnostics {
    pub iterations: Vec<AoIteration>,
    pub converged: bool,
}

impl AoDiagnostics {
    pub fn feasible_objectives(&self) -> Vec<f64> {
        self.iterations.iter().filter_map(|it| it.objective).collect()
    }
}

#[derive(Debug, Clone)]
pub struct AoOutcome {
    /// The last feasible solve.
    pub solution: SdpSolution,
    /// Targets and extraction ratios that solve was computed with.
    pub targets: Targets,
    pub state: AoState,
    pub diagnostics: AoDiagnostics,
}

/// Frobenius norms of the stacked `W` and `R` differences, divided by `P_t`.
pub fn beam_increments(a: &BeamformerSet, b: &BeamformerSet, power_budget: f64) -> (f64, f64) {
    let diff = |x: &[linalg::CMat], y: &[linalg::CMat]| -> f64 {
        if x.len() != y.len() {
            return f64::INFINITY;
        }
        x.iter().zip(y).map(|(p, q)| (p - q).norm_squared()).sum::<f64>().sqrt() / power_budget
    };
    (diff(&a.w, &b.w), diff(&a.r, &b.r))
}

pub fn ao_loop(
    problem: &SlotProblem,
    init: AoInit,
    params: &AoParams,
    solver: &dyn ConicSolver,
) -> Result<AoOutcome> {
    problem.validate()?;
    let p = &problem.params;
    let has_eavesdroppers = !problem.eavesdroppers.is_empty();
    let mut state = AoState {
        lambda: init.lambda,
        varrho: init.varrho,
        rho: init.rho,
        u: Vec::new(),
        iteration: 0,
        frozen: init.frozen,
        last_feasible: None,
    };
    let mut previous = init.previous;
    let mut best: Option<(SdpSolution, Targets)> = None;
    let mut diagnostics = AoDiagnostics::default();

    for it in 1..=params.max_iterations {
        state.iteration = it;
        let targets = Targets {
            lambda: state.lambda,
            varrho: state.varrho,
            rho: state.rho.clone(),
        };
        let solved = assemble_sdp(problem, &targets).and_then(|prog| solve_sdp_step(&prog, solver));
        match solved {
            Ok(sol) => {
                let incr = previous.as_ref().map(|pb| beam_increments(pb, &sol.beams, p.power_budget));
                let converged = incr.is_some_and(|(dw, dr)| dw <= params.tolerance && dr <= params.tolerance);
                diagnostics.iterations.push(AoIteration {
                    lambda: targets.lambda,
                    varrho: targets.varrho,
                    feasible: true,
                    objective: Some(sol.objective),
                    w_increment: incr.map(|v| v.0),
                    r_increment: incr.map(|v| v.1),
                });
                let next_rho = if !params.semantic {
                    vec![1.0; targets.rho.len()]
                } else if params.per_vehicle_rho {
                    bisect_rho_per_vehicle(&sol.beams, p.computing_coefficient, p.power_budget, params.rho_lower_bound, &targets.rho)
                        .unwrap_or_else(|_| targets.rho.clone())
                } else {
                    bisect_rho(&sol.beams, p.computing_coefficient, p.power_budget, params.rho_lower_bound)
                        .map(|r| vec![r; targets.rho.len()])
                        .unwrap_or_else(|_| targets.rho.clone())
                };
                state.u = sol.u.clone();
                previous = Some(sol.beams.clone());
                best = Some((sol, targets.clone()));
                state = update_targets(&state, true, params);
                if has_eavesdroppers && !state.frozen && state.varrho <= 0.0 {
                    // ϱ = 0 would demand zero leakage, which no W_k ≠ 0 meets.
                    state.varrho = targets.varrho;
                }
                state.rho = next_rho;
                if converged {
                    diagnostics.converged = true;
                    break;
                }
            }
            Err(Error::Infeasible | Error::NumericalFailure(_) | Error::TargetOutOfRange(_)) => {
                let Some((_, last)) = best.as_ref() else {
                    return Err(Error::NoFeasiblePoint {
                        lambda: targets.lambda,
                        varrho: targets.varrho,
                    });
                };
                diagnostics.iterations.push(AoIteration {
                    lambda: targets.lambda,
                    varrho: targets.varrho,
                    feasible: false,
                    objective: None,
                    w_increment: None,
                    r_increment: None,
                });
                if state.frozen {
                    break;
                }
                state.rho = last.rho.clone();
                state = update_targets(&state, false, params);
            }
            Err(e) => return Err(e),
        }
    }

    let (solution, targets) = best.ok_or(Error::NoFeasiblePoint {
        lambda: init.lambda,
        varrho: init.varrho,
    })?;
    Ok(AoOutcome {
        solution,
        targets,
        state,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opt::conic::ClarabelSolver;
    use crate::opt::sdp::tests::small_problem;

    fn state(lambda: f64, varrho: f64) -> AoState {
        AoState {
            lambda,
            varrho,
            rho: vec![0.65],
            u: vec![],
            iteration: 0,
            frozen: false,
            last_feasible: None,
        }
    }

    #[test]
    fn feasible_step_moves_targets() {
        let p = AoParams::default();
        let s = update_targets(&state(1.0, 0.5), true, &p);
        assert!((s.lambda - 1.1).abs() < 1e-15);
        assert!((s.varrho - 0.4).abs() < 1e-15);
        assert_eq!(s.last_feasible, Some((1.0, 0.5)));
        let s = update_targets(&state(1.0, 0.05), true, &p);
        assert_eq!(s.varrho, 0.0);
    }

    #[test]
    fn infeasible_step_reverts_and_freezes() {
        let p = AoParams::default();
        let s = update_targets(&state(1.0, 0.5), true, &p);
        let s = update_targets(&s, false, &p);
        assert!(s.frozen);
        assert_eq!((s.lambda, s.varrho), (1.0, 0.5));
        let again = update_targets(&s, true, &p);
        assert_eq!((again.lambda, again.varrho), (1.0, 0.5));
    }

    fn beams_with_power(p: f64) -> BeamformerSet {
        BeamformerSet::new(vec![linalg::identity(1).scale(p)], vec![]).unwrap()
    }

    #[test]
    fn bisection_examples() {
        assert_eq!(bisect_rho(&beams_with_power(0.1), 1.0, 1e6, 0.65).unwrap(), 0.65);
        let rho = bisect_rho(&beams_with_power(0.8), 1.0, 1.0, 0.65).unwrap();
        assert!((rho - (-0.2f64).exp()).abs() <= RHO_TOLERANCE, "{rho}");
        let rho = bisect_rho(&beams_with_power(1.0), 1.0, 1.0, 0.65).unwrap();
        assert!((rho - 1.0).abs() <= RHO_TOLERANCE);
        assert!(matches!(bisect_rho(&beams_with_power(1.1), 1.0, 1.0, 0.65), Err(Error::Infeasible)));
    }

    #[test]
    fn per_vehicle_bisection_respects_budget() {
        let beams = BeamformerSet::new(vec![linalg::identity(1).scale(0.5); 2], vec![]).unwrap();
        let rho = bisect_rho_per_vehicle(&beams, 1.0, 1.3, 0.5, &[1.0, 1.0]).unwrap();
        let total = 1.0 - rho.iter().map(|r| r.ln()).sum::<f64>();
        assert!(total <= 1.3 + 1e-6);
        assert!(rho.iter().all(|&r| (0.5..=1.0).contains(&r)));
    }

    #[test]
    fn loop_converges_with_monotone_objective() {
        let problem = small_problem(4, 0.01);
        let params = AoParams::default();
        let init = initial_targets(&problem, &params).unwrap();
        let out = ao_loop(&problem, init, &params, &ClarabelSolver::default()).unwrap();
        assert!(out.diagnostics.converged);
        assert!(out.diagnostics.iterations.len() <= 100);
        let obj = out.diagnostics.feasible_objectives();
        for w in obj.windows(2) {
            assert!(w[1] >= w[0] - 1e-6, "{obj:?}");
        }
        // Restarting at the converged point is a fixed point.
        let again = AoInit {
            lambda: out.targets.lambda,
            varrho: out.targets.varrho,
            rho: out.targets.rho.clone(),
            previous: Some(out.solution.beams.clone()),
            frozen: true,
        };
        let out2 = ao_loop(&problem, again, &params, &ClarabelSolver::default()).unwrap();
        assert_eq!(out2.diagnostics.iterations.len(), 1);
        assert!(out2.diagnostics.converged);
    }

    #[test]
    fn infeasible_start_is_reported() {
        let problem = small_problem(4, 0.01);
        let params = AoParams::default();
        let mut init = initial_targets(&problem, &params).unwrap();
        init.lambda = 1e6;
        assert!(matches!(
            ao_loop(&problem, init, &params, &ClarabelSolver::default()),
            Err(Error::NoFeasiblePoint { .. })
        ));
    }
}
