//! Solving conic programs.
//!
//! [`ConicBackend`] is the seam between the program IR and a concrete
//! interior-point solver. The default backend is Clarabel.

use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use serde::{Deserialize, Serialize};

use crate::conic::{assemble_from_rows, Cone, ConicProgram, CpProblem, Structure};
use crate::matrix::{trace_inner, Block2, SymMatrix};
use crate::{Error, Result};

/// Environment variable that overrides the default feasibility/gap tolerance.
pub const TOL_ENV: &str = "SDDCP_BACKEND_TOL";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

/// Which cones a backend can handle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub nonnegative: bool,
    pub rotated_quadratic: bool,
    pub psd_triangle: bool,
}

impl Capabilities {
    pub fn supports(&self, cone: &Cone) -> bool {
        match cone {
            Cone::Nonnegative { .. } => self.nonnegative,
            Cone::RotatedQuadratic { .. } => self.rotated_quadratic,
            Cone::PsdTriangle { .. } => self.psd_triangle,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub max_iter: u32,
    /// Seconds; infinite means no limit.
    pub time_limit: f64,
    pub verbose: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol_feas: 1e-8, tol_gap: 1e-8, max_iter: 200, time_limit: f64::INFINITY, verbose: false }
    }
}

impl SolveOptions {
    /// Defaults, with both tolerances taken from `SDDCP_BACKEND_TOL` when it is set.
    pub fn from_env() -> Self {
        let mut opts = Self::default();
        if let Some(tol) = std::env::var(TOL_ENV).ok().and_then(|s| s.parse::<f64>().ok()) {
            if tol > 0.0 {
                opts.tol_feas = tol;
                opts.tol_gap = tol;
            }
        }
        opts
    }
}

/// What a backend hands back, before any matrix interpretation.
#[derive(Clone, Debug)]
pub struct RawSolution {
    pub status: Status,
    /// Objective values in the program's own sense.
    pub primal_value: f64,
    pub dual_value: f64,
    pub x: Vec<f64>,
    /// Multipliers of the equality rows, signed so that the dual reads
    /// `opt bᵀy  s.t.  sign·(c - Σ y_i a_i) ∈ K*`.
    pub y: Vec<f64>,
    pub iterations: u32,
    pub detail: String,
}

pub trait ConicBackend: Send + Sync {
    fn name(&self) -> &'static str;
    fn capabilities(&self) -> Capabilities;
    fn solve_raw(&self, prog: &ConicProgram, opts: &SolveOptions) -> Result<RawSolution>;
}

/// Result of one conic solve, with `X` rebuilt from the program's variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub status: Status,
    pub primal_value: f64,
    pub dual_value: f64,
    /// Per-edge blocks in the program's edge order (SDD programs only).
    pub blocks: Vec<Block2>,
    pub vertex_weights: Option<Vec<f64>>,
    pub x: SymMatrix,
    pub y: Vec<f64>,
    pub solve_time: f64,
    pub iterations: u32,
    pub detail: String,
}

impl SolveOutcome {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

/// Interior-point solves through Clarabel.
#[derive(Clone, Copy, Debug, Default)]
pub struct ClarabelBackend;

impl ConicBackend for ClarabelBackend {
    fn name(&self) -> &'static str {
        "clarabel"
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { nonnegative: true, rotated_quadratic: true, psd_triangle: cfg!(feature = "sdp") }
    }

    fn solve_raw(&self, prog: &ConicProgram, opts: &SolveOptions) -> Result<RawSolution> {
        let nv = prog.num_vars;
        let mut rows = Vec::new();
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut b = Vec::new();
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        let mut push = |r: usize, c: usize, v: f64| {
            rows.push(r);
            cols.push(c);
            vals.push(v);
        };

        let mut r = 0;
        for (row, rhs) in &prog.equalities {
            for &(c, v) in &row.terms {
                push(r, c, v);
            }
            b.push(*rhs);
            r += 1;
        }
        if !prog.equalities.is_empty() {
            cones.push(SupportedConeT::ZeroConeT(prog.equalities.len()));
        }

        // s = b - A x with b = 0 on every cone row, so A carries the negated map.
        let sqrt2 = std::f64::consts::SQRT_2;
        for cone in &prog.cones {
            match cone {
                Cone::Nonnegative { vars } => {
                    if vars.is_empty() {
                        continue;
                    }
                    for &v in vars {
                        push(r, v, -1.0);
                        b.push(0.0);
                        r += 1;
                    }
                    match cones.last_mut() {
                        Some(SupportedConeT::NonnegativeConeT(k)) => *k += vars.len(),
                        _ => cones.push(SupportedConeT::NonnegativeConeT(vars.len())),
                    }
                }
                Cone::RotatedQuadratic { x, y, z } => {
                    // x·y >= z²  <=>  (x + y, 2z, x - y) ∈ SOC(3)
                    push(r, *x, -1.0);
                    push(r, *y, -1.0);
                    push(r + 1, *z, -2.0);
                    push(r + 2, *x, -1.0);
                    push(r + 2, *y, 1.0);
                    b.extend([0.0; 3]);
                    r += 3;
                    cones.push(SupportedConeT::SecondOrderConeT(3));
                }
                Cone::PsdTriangle { order, vars } => {
                    if !cfg!(feature = "sdp") {
                        return Err(Error::CapabilityMissing("psd-triangle"));
                    }
                    let mut k = 0;
                    for j in 0..*order {
                        for i in 0..=j {
                            push(r, vars[k], if i == j { -1.0 } else { -sqrt2 });
                            b.push(0.0);
                            r += 1;
                            k += 1;
                        }
                    }
                    #[cfg(feature = "sdp")]
                    cones.push(SupportedConeT::PSDTriangleConeT(*order));
                }
            }
        }

        let a = CscMatrix::new_from_triplets(r, nv, rows, cols, vals);
        let p = CscMatrix::<f64>::zeros((nv, nv));
        let sign = prog.sense.sign();
        let q: Vec<f64> = prog.objective.iter().map(|c| sign * c).collect();

        let settings = DefaultSettingsBuilder::default()
            .verbose(opts.verbose)
            .tol_feas(opts.tol_feas)
            .tol_gap_abs(opts.tol_gap)
            .tol_gap_rel(opts.tol_gap)
            .max_iter(opts.max_iter)
            .time_limit(opts.time_limit)
            .max_threads(1)
            .build()
            .map_err(|e| Error::Solver(format!("invalid settings: {e:?}")))?;
        let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings)
            .map_err(|e| Error::Solver(format!("setup failed: {e}")))?;
        solver.solve();
        let sol = &solver.solution;

        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => Status::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => Status::Infeasible,
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => Status::Unbounded,
            _ => Status::NumericalFailure,
        };
        let m = prog.equalities.len();
        Ok(RawSolution {
            status,
            primal_value: sign * sol.obj_val,
            dual_value: sign * sol.obj_val_dual,
            x: sol.x.clone(),
            y: sol.z[..m].iter().map(|z| -sign * z).collect(),
            iterations: sol.iterations,
            detail: format!("{:?}", sol.status),
        })
    }
}

/// Solves with the default backend.
pub fn solve(prog: &ConicProgram, opts: &SolveOptions) -> Result<SolveOutcome> {
    solve_with(&ClarabelBackend, prog, opts)
}

/// Solves with `backend` and rebuilds `X`, blocks and vertex weights.
pub fn solve_with(backend: &dyn ConicBackend, prog: &ConicProgram, opts: &SolveOptions) -> Result<SolveOutcome> {
    let caps = backend.capabilities();
    for cone in &prog.cones {
        if !caps.supports(cone) {
            return Err(Error::CapabilityMissing(match cone {
                Cone::Nonnegative { .. } => "nonnegative",
                Cone::RotatedQuadratic { .. } => "rotated-quadratic",
                Cone::PsdTriangle { .. } => "psd-triangle",
            }));
        }
    }

    let start = Instant::now();
    let raw = backend.solve_raw(prog, opts)?;
    let solve_time = start.elapsed().as_secs_f64();
    log::debug!(
        "{} solve: {:?} after {} iterations in {:.3}s, value {}",
        backend.name(),
        raw.status,
        raw.iterations,
        solve_time,
        raw.primal_value
    );

    let optimal = raw.status == Status::Optimal;
    let (blocks, vertex_weights, x) = match &prog.structure {
        Structure::Sdd { n, rows, edges, block_vars, vertex_vars } => {
            let blocks: Vec<Block2> =
                block_vars.iter().map(|v| Block2::new(raw.x[v[0]], raw.x[v[1]], raw.x[v[2]])).collect();
            let weights: Option<Vec<f64>> = vertex_vars.as_ref().map(|vv| vv.iter().map(|&i| raw.x[i]).collect());
            let x = if optimal {
                assemble_from_rows(*n, rows, edges, &blocks, weights.as_deref())?
            } else {
                SymMatrix::zeros(*n)
            };
            (blocks, weights, x)
        }
        Structure::Diag { n, rows, vertex_vars } => {
            let weights: Vec<f64> = vertex_vars.iter().map(|&i| raw.x[i]).collect();
            let x =
                if optimal { assemble_from_rows(*n, rows, &[], &[], Some(&weights))? } else { SymMatrix::zeros(*n) };
            (Vec::new(), Some(weights), x)
        }
        Structure::Dense { order, entry_vars } => {
            let x = SymMatrix::from_packed(*order, entry_vars.iter().map(|&i| raw.x[i]).collect())?;
            (Vec::new(), None, x)
        }
    };

    Ok(SolveOutcome {
        status: raw.status,
        primal_value: if optimal { raw.primal_value } else { f64::NAN },
        dual_value: if optimal { raw.dual_value } else { f64::NAN },
        blocks,
        vertex_weights,
        x,
        y: raw.y,
        solve_time,
        iterations: raw.iterations,
        detail: raw.detail,
    })
}

/// `tr(X (C - Σ y_i A_i))`, signed by the problem sense so that it is nonnegative
/// at a primal/dual feasible pair, together with the worst equality residual.
pub fn duality_slack(outcome: &SolveOutcome, p: &CpProblem) -> Result<(f64, f64)> {
    if outcome.y.len() != p.m() {
        return Err(Error::DimensionMismatch { expected: p.m(), found: outcome.y.len() });
    }
    let mut slack = p.objective.clone();
    for ((a, _), yi) in p.constraints.iter().zip(&outcome.y) {
        slack.add_scaled(-yi, a)?;
    }
    let gap = p.sense.sign() * trace_inner(&outcome.x, &slack)?;
    Ok((gap, p.equality_residual(&outcome.x)?))
}

/// Whether an outcome satisfies weak duality: `sign·tr(X (C - Σ y_i A_i)) >= -tol`
/// and every equality residual is at most `tol` (both relative to the data scale).
pub fn weak_duality_check(outcome: &SolveOutcome, p: &CpProblem, tol: f64) -> bool {
    if !outcome.is_optimal() {
        return false;
    }
    let Ok((gap, residual)) = duality_slack(outcome, p) else {
        return false;
    };
    let scale = 1.0 + outcome.primal_value.abs();
    let b_scale = 1.0 + p.constraints.iter().fold(0.0f64, |m, (_, b)| m.max(b.abs()));
    gap >= -tol * scale && residual <= tol * b_scale
}
