//! Per-slot beamforming optimization: outage restrictions, the conic
//! program, alternating optimization over rate targets and extraction ratios,
//! and rank-one recovery.

pub mod affine;
pub mod ao;
pub mod bti;
pub mod conic;
pub mod outage;
pub mod problem;
pub mod randomize;
pub mod sdp;

pub use ao::{ao_loop, bisect_rho, bisect_rho_per_vehicle, initial_targets, restricted_eavesdropper_sinr, update_targets, AoDiagnostics, AoIteration, AoInit, AoOutcome, AoParams, AoState};
pub use bti::{bti_blocks, min_bti_margin, sinr_threshold, BtiBlock, BtiKind};
pub use conic::{ClarabelSolver, ConicProgram, ConicSolution, ConicSolver, SolveStatus};
pub use outage::{validate_outage_mc, wilson_interval, OutageEstimate, OutageTargets, MIN_OUTAGE_SAMPLES};
pub use problem::{SensingTarget, SlotParams, SlotProblem, Targets};
pub use randomize::{gaussian_randomization, rank_one_factor, RandomizationParams, Randomized};
pub use sdp::{assemble_sdp, solve_sdp_step, transmit_budget, SdpProgram, SdpSolution};
