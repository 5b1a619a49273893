//! A solver-neutral conic program and the Clarabel backend.
//!
//! Programs are stated as
//!
//! ```text
//! minimize   cᵀx
//! subject to e_j(x) ∈ K_j   for every block j
//! ```
//!
//! where each `e_j` is a vector of affine expressions and `K_j` is a zero,
//! nonnegative, second-order or PSD cone. PSD blocks are given in the packed
//! upper triangle, column by column, with off-diagonal entries scaled by `√2`.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::DMatrix;

use super::affine::AffineExpr;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    Zero(usize),
    Nonnegative(usize),
    /// First entry bounds the norm of the rest.
    SecondOrder(usize),
    /// Side length of the symmetric matrix.
    PsdTriangle(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Zero(n) | Cone::Nonnegative(n) | Cone::SecondOrder(n) => n,
            Cone::PsdTriangle(n) => n * (n + 1) / 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConeBlock {
    pub cone: Cone,
    pub rows: Vec<AffineExpr>,
}

#[derive(Debug, Clone, Default)]
pub struct ConicProgram {
    num_vars: usize,
    objective: Vec<f64>,
    blocks: Vec<ConeBlock>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `count` free variables and returns the index of the first.
    pub fn add_variables(&mut self, count: usize) -> usize {
        let first = self.num_vars;
        self.num_vars += count;
        self.objective.resize(self.num_vars, 0.0);
        first
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn set_objective(&mut self, var: usize, coefficient: f64) {
        self.objective[var] = coefficient;
    }

    pub fn blocks(&self) -> &[ConeBlock] {
        &self.blocks
    }

    pub fn add_block(&mut self, cone: Cone, rows: Vec<AffineExpr>) -> Result<()> {
        if rows.len() != cone.dim() {
            return Err(Error::Dimension(format!(
                "{cone:?} needs {} rows, got {}",
                cone.dim(),
                rows.len()
            )));
        }
        if let Some(bad) = rows.iter().flat_map(|r| r.terms()).find(|(v, _)| *v >= self.num_vars) {
            return Err(Error::Dimension(format!("row refers to unknown variable {}", bad.0)));
        }
        self.blocks.push(ConeBlock { cone, rows });
        Ok(())
    }

    pub fn add_nonnegative(&mut self, rows: Vec<AffineExpr>) -> Result<()> {
        self.add_block(Cone::Nonnegative(rows.len()), rows)
    }

    pub fn add_second_order(&mut self, rows: Vec<AffineExpr>) -> Result<()> {
        self.add_block(Cone::SecondOrder(rows.len()), rows)
    }

    pub fn add_psd(&mut self, side: usize, packed: Vec<AffineExpr>) -> Result<()> {
        self.add_block(Cone::PsdTriangle(side), packed)
    }

    pub fn count(&self, pred: impl Fn(&Cone) -> bool) -> usize {
        self.blocks.iter().filter(|b| pred(&b.cone)).count()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest cone violation of each block at `x`; zero means feasible.
    pub fn violations(&self, x: &[f64]) -> Vec<f64> {
        self.blocks
            .iter()
            .map(|b| {
                let v: Vec<f64> = b.rows.iter().map(|r| r.eval(x)).collect();
                cone_violation(&b.cone, &v)
            })
            .collect()
    }
}

fn cone_violation(cone: &Cone, v: &[f64]) -> f64 {
    match *cone {
        Cone::Zero(_) => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        Cone::Nonnegative(_) => v.iter().fold(0.0, |m, x| m.max(-x)),
        Cone::SecondOrder(_) => {
            let tail: f64 = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
            (tail - v[0]).max(0.0)
        }
        Cone::PsdTriangle(n) => {
            let m = unpack_symmetric(v, n);
            (-m.symmetric_eigenvalues().min()).max(0.0)
        }
    }
}

/// Index of entry `(i, j)`, `i ≤ j`, in the packed upper triangle.
pub fn packed_index(i: usize, j: usize) -> usize {
    debug_assert!(i <= j);
    j * (j + 1) / 2 + i
}

pub fn unpack_symmetric(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let x = v[packed_index(i, j)];
            if i == j {
                m[(i, i)] = x;
            } else {
                m[(i, j)] = x / std::f64::consts::SQRT_2;
                m[(j, i)] = m[(i, j)];
            }
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: u32,
}

pub trait ConicSolver {
    fn solve(&self, program: &ConicProgram) -> Result<ConicSolution>;
}

#[derive(Debug, Clone, Copy)]
pub struct ClarabelSolver {
    /// Requested primal/dual feasibility tolerance.
    pub tol_feas: f64,
    /// Tolerance at which a stalled solve is still accepted.
    pub accept_feas: f64,
    pub max_iter: u32,
}

impl Default for ClarabelSolver {
    fn default() -> Self {
        Self {
            tol_feas: 1e-8,
            accept_feas: 1e-6,
            max_iter: 200,
        }
    }
}

impl ConicSolver for ClarabelSolver {
    fn solve(&self, program: &ConicProgram) -> Result<ConicSolution> {
        let n = program.num_vars;
        let mut rows = Vec::new();
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut b = Vec::new();
        let mut cones = Vec::with_capacity(program.blocks.len());
        for block in &program.blocks {
            for expr in &block.rows {
                let r = b.len();
                // e(x) = gᵀx + g₀ ∈ K  ⇔  s = b − Ax with A = −gᵀ, b = g₀.
                for &(v, c) in expr.terms() {
                    rows.push(r);
                    cols.push(v);
                    vals.push(-c);
                }
                b.push(expr.constant_term());
            }
            cones.push(match block.cone {
                Cone::Zero(d) => SupportedConeT::ZeroConeT(d),
                Cone::Nonnegative(d) => SupportedConeT::NonnegativeConeT(d),
                Cone::SecondOrder(d) => SupportedConeT::SecondOrderConeT(d),
                Cone::PsdTriangle(d) => SupportedConeT::PSDTriangleConeT(d),
            });
        }
        let a = CscMatrix::new_from_triplets(b.len(), n, rows, cols, vals);
        let p = CscMatrix::zeros((n, n));
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .direct_solve_method("faer".into())
            .max_iter(self.max_iter)
            .tol_feas(self.tol_feas)
            .tol_gap_abs(self.tol_feas)
            .tol_gap_rel(self.tol_feas)
            .reduced_tol_feas(self.accept_feas)
            .reduced_tol_gap_abs(self.accept_feas)
            .reduced_tol_gap_rel(self.accept_feas)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("solver settings: {e}")))?;
        let mut solver = DefaultSolver::new(&p, &program.objective, &a, &b, &cones, settings)
            .map_err(|e| Error::InvalidArgument(format!("solver setup: {e}")))?;
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
            _ => SolveStatus::NumericalFailure,
        };
        Ok(ConicSolution {
            status,
            x: sol.x.clone(),
            objective: sol.obj_val,
            iterations: sol.iterations,
        })
    }
}
