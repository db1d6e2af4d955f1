//! Iterative refinement of the embedded graph.
//!
//! Each iteration solves the inner approximation over the current graph,
//! decomposes the solution into rank-one atoms and uses the atom points to
//! build the next graph.

use std::fmt::Write as _;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{solve, SolveOptions, SolveOutcome, Status};
use crate::conic::{build_sdd_program, CpProblem, SddOptions, Sense};
use crate::decomposition::{decompose, select_atoms, CandidatePolicy, Decomposition};
use crate::graph::{l1_distance, random_simplex_point, EmbeddedGraph, SimplexList, DEFAULT_PARTITION_CAP};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// One solve over the uniform grid of step `1/k`.
    DeltaPartition(usize),
    /// Add every heavy atom point and join all vertices.
    Max,
    /// Add the heaviest atom point and join all vertices.
    Max1,
    /// Split the simplices containing the heaviest atom's edge at its point.
    AdaptiveDelta,
    /// Rebuild from the identity base plus the heavy atom points of the last solve.
    Forgetfulness,
}

impl Strategy {
    pub fn name(&self) -> String {
        match self {
            Strategy::DeltaPartition(k) => format!("delta-partition-{k}"),
            Strategy::Max => "max".into(),
            Strategy::Max1 => "max1".into(),
            Strategy::AdaptiveDelta => "adaptive-delta".into(),
            Strategy::Forgetfulness => "forgetfulness".into(),
        }
    }

    /// Default iteration budget for problems of dimension `n`.
    pub fn default_iters(&self, n: usize) -> usize {
        let small = n <= 10;
        match self {
            Strategy::DeltaPartition(_) => 1,
            Strategy::Max => 5,
            Strategy::Max1 => 100,
            Strategy::AdaptiveDelta => {
                if small {
                    20
                } else {
                    15
                }
            }
            Strategy::Forgetfulness => {
                if small {
                    15
                } else {
                    12
                }
            }
        }
    }

    pub fn default_stall_window(&self) -> usize {
        match self {
            Strategy::Max1 => 2,
            _ => 3,
        }
    }

    /// Strategies whose graphs grow monotonically.
    pub fn is_enlarging(&self) -> bool {
        matches!(self, Strategy::Max | Strategy::Max1 | Strategy::AdaptiveDelta)
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "max" => Ok(Strategy::Max),
            "max1" => Ok(Strategy::Max1),
            "adaptive" | "adaptive-delta" => Ok(Strategy::AdaptiveDelta),
            "forgetfulness" => Ok(Strategy::Forgetfulness),
            _ => {
                let k = lower
                    .strip_prefix("delta-partition")
                    .or_else(|| lower.strip_prefix("delta"))
                    .map(|r| r.trim_start_matches(['-', ':', '=']))
                    .and_then(|r| r.parse::<usize>().ok())
                    .filter(|&k| k >= 1);
                k.map(Strategy::DeltaPartition).ok_or_else(|| Error::InvalidArgument(format!("unknown strategy '{s}'")))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub strategy: Strategy,
    /// Maximum number of solves.
    pub max_iters: usize,
    /// No graph with more vertices than this is solved.
    pub vertex_cap: usize,
    /// Atoms with `γ < weight_threshold·tr(X)` are not proposed as vertices.
    pub weight_threshold: f64,
    /// ℓ1 distance below which two vertices are considered equal.
    pub prune_delta: f64,
    /// Total improvement over the stall window below which a run has stalled.
    pub improvement_tol: f64,
    pub stall_window: usize,
    /// Add one uniformly random point of the simplex per iteration (Max and Max1).
    pub random_vertex_rescue: bool,
    /// Retry from the Δ-partition with `k = 2` when the base graph is infeasible.
    pub fallback_delta2: bool,
    /// Give each vertex its own weight variable in the program.
    pub vertex_atoms: bool,
    pub seed: u64,
    pub solve: SolveOptions,
}

impl SchemeConfig {
    pub fn new(strategy: Strategy, n: usize) -> Self {
        SchemeConfig {
            strategy,
            max_iters: strategy.default_iters(n),
            vertex_cap: 200,
            weight_threshold: 1e-5,
            prune_delta: 1e-6,
            improvement_tol: 1e-6,
            stall_window: strategy.default_stall_window(),
            random_vertex_rescue: false,
            fallback_delta2: false,
            vertex_atoms: false,
            seed: 0,
            solve: SolveOptions::from_env(),
        }
    }

    pub fn with_iters(mut self, iters: usize) -> Self {
        self.max_iters = iters;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if self.vertex_cap < n {
            return Err(Error::InvalidArgument(format!("vertex cap {} is below the dimension {n}", self.vertex_cap)));
        }
        if self.stall_window < 1 {
            return Err(Error::InvalidArgument("stall window must be at least 1".into()));
        }
        for (name, v) in [
            ("weight threshold", self.weight_threshold),
            ("prune delta", self.prune_delta),
            ("improvement tolerance", self.improvement_tol),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be a finite nonnegative number, got {v}")));
            }
        }
        if let Strategy::DeltaPartition(0) = self.strategy {
            return Err(Error::InvalidArgument("Δ-partition needs k >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    IterLimit,
    CapHit,
    Stalled,
    InfeasibleStart,
    SolverFailure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// Number of vertices `t_k`.
    pub vertices: usize,
    pub edges: usize,
    pub status: Status,
    pub value: Option<f64>,
    pub dual: Option<f64>,
    pub seconds: f64,
    /// Vertices added to build the next graph.
    pub added: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeTrace {
    pub sense: Sense,
    pub records: Vec<IterationRecord>,
    pub termination: Option<Termination>,
    /// True when the run restarted from the Δ-partition with `k = 2`.
    pub used_fallback: bool,
}

impl SchemeTrace {
    pub fn new(sense: Sense) -> Self {
        SchemeTrace { sense, records: Vec::new(), termination: None, used_fallback: false }
    }

    /// Values of the optimal solves, in order.
    pub fn values(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.value).collect()
    }

    pub fn total_seconds(&self) -> f64 {
        self.records.iter().map(|r| r.seconds).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,t,edges,value,dual,seconds\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.6}",
                r.iter,
                r.vertices,
                r.edges,
                opt(r.value),
                opt(r.dual),
                r.seconds
            );
        }
        out
    }
}

/// True when the last `window + 1` recorded values improved by less than `tol` in total.
pub fn stall_detector(trace: &SchemeTrace, window: usize, tol: f64) -> bool {
    let values = trace.values();
    if window == 0 || values.len() < window + 1 {
        return false;
    }
    let first = values[values.len() - window - 1];
    let last = values[values.len() - 1];
    let improvement = match trace.sense {
        Sense::Minimize => first - last,
        Sense::Maximize => last - first,
    };
    improvement < tol
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestIterate {
    pub iter: usize,
    pub outcome: SolveOutcome,
    pub graph: EmbeddedGraph,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeRun {
    pub best: Option<BestIterate>,
    pub trace: SchemeTrace,
}

impl SchemeRun {
    pub fn best_value(&self) -> Option<f64> {
        self.best.as_ref().map(|b| b.outcome.primal_value)
    }

    /// Rank-one certificate of the best iterate.
    pub fn certificate(&self, weight_floor: f64) -> Result<Option<Decomposition>> {
        self.best.as_ref().map(|b| decompose(&b.outcome, &b.graph, weight_floor)).transpose()
    }
}

struct State {
    graph: EmbeddedGraph,
    /// Simplicial partition, kept by the adaptive strategy.
    partition: Option<SimplexList>,
    base_count: usize,
}

fn initial_state(strategy: Strategy, n: usize) -> Result<State> {
    let graph = match strategy {
        Strategy::DeltaPartition(k) => EmbeddedGraph::delta_partition(n, k, DEFAULT_PARTITION_CAP)?,
        _ => EmbeddedGraph::identity_complete(n)?,
    };
    let partition = matches!(strategy, Strategy::AdaptiveDelta).then(|| vec![(0..n).collect()]);
    Ok(State { graph, partition, base_count: n })
}

/// Base graph containing every midpoint `(e_i + e_j)/2`.
fn fallback_state(strategy: Strategy, n: usize) -> Result<State> {
    match strategy {
        Strategy::AdaptiveDelta => {
            let mut graph = EmbeddedGraph::identity_complete(n)?;
            let mut partition: SimplexList = vec![(0..n).collect()];
            for i in 0..n {
                for j in i + 1..n {
                    let p = crate::graph::SegmentPoint::on_edge(&graph, i, j, 0.5)?;
                    let (g, s) = graph.subdivide_simplicial(&partition, (i, j), &p)?;
                    graph = g;
                    partition = s;
                }
            }
            Ok(State { graph, partition: Some(partition), base_count: n })
        }
        _ => {
            let graph = EmbeddedGraph::delta_partition(n, 2, DEFAULT_PARTITION_CAP)?;
            let base_count = graph.vertex_count();
            Ok(State { graph, partition: None, base_count })
        }
    }
}

fn is_duplicate(g: &EmbeddedGraph, point: &[f64], delta: f64) -> bool {
    g.vertices().iter().any(|u| l1_distance(u, point) < delta)
}

/// Runs one refinement scheme on `p`.
pub fn run_scheme(p: &CpProblem, cfg: &SchemeConfig) -> Result<SchemeRun> {
    p.validate()?;
    let n = p.n();
    cfg.validate(n)?;
    let strategy = cfg.strategy;
    let sdd = SddOptions { vertex_atoms: cfg.vertex_atoms };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = SchemeTrace::new(p.sense);
    let mut best: Option<BestIterate> = None;
    let mut state = initial_state(strategy, n)?;
    let capped = !matches!(strategy, Strategy::DeltaPartition(_));

    let mut iter = 0;
    let termination = loop {
        if capped && state.graph.vertex_count() > cfg.vertex_cap {
            break Termination::CapHit;
        }
        let start = Instant::now();
        let prog = build_sdd_program(p, &state.graph, sdd)?;
        let outcome = solve(&prog, &cfg.solve)?;
        let seconds = start.elapsed().as_secs_f64();
        let optimal = outcome.is_optimal();
        trace.records.push(IterationRecord {
            iter,
            vertices: state.graph.vertex_count(),
            edges: state.graph.edge_count(),
            status: outcome.status,
            value: optimal.then_some(outcome.primal_value),
            dual: optimal.then_some(outcome.dual_value),
            seconds,
            added: 0,
        });
        log::info!(
            "{} iter {iter}: t={} |E|={} {:?} value={} ({seconds:.2}s)",
            strategy.name(),
            state.graph.vertex_count(),
            state.graph.edge_count(),
            outcome.status,
            outcome.primal_value
        );

        if !optimal {
            if best.is_none() && outcome.status == Status::Infeasible {
                if cfg.fallback_delta2 && !trace.used_fallback && !matches!(strategy, Strategy::DeltaPartition(_)) {
                    trace.used_fallback = true;
                    state = fallback_state(strategy, n)?;
                    continue;
                }
                break Termination::InfeasibleStart;
            }
            break Termination::SolverFailure;
        }

        if best.as_ref().is_none_or(|b| p.sense.better(outcome.primal_value, b.outcome.primal_value)) {
            best = Some(BestIterate { iter, outcome: outcome.clone(), graph: state.graph.clone() });
        }
        iter += 1;
        if iter >= cfg.max_iters || matches!(strategy, Strategy::DeltaPartition(_)) {
            break Termination::IterLimit;
        }
        if strategy.is_enlarging() && stall_detector(&trace, cfg.stall_window, cfg.improvement_tol) {
            break Termination::Stalled;
        }

        let d = decompose(&outcome, &state.graph, cfg.weight_threshold)?;
        let (next, added) = next_state(&state, &d, cfg, &mut rng)?;
        if let Some(r) = trace.records.last_mut() {
            r.added = added;
        }
        match next {
            Some(s) => state = s,
            None => break Termination::Stalled,
        }
    };
    trace.termination = Some(termination);
    Ok(SchemeRun { best, trace })
}

/// The graph for the next iteration, or `None` when nothing would change.
fn next_state(
    state: &State,
    d: &Decomposition,
    cfg: &SchemeConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Option<State>, usize)> {
    let g = &state.graph;
    let fresh = |a: &crate::decomposition::SegmentAtom| !is_duplicate(g, &a.point.point, cfg.prune_delta);
    match cfg.strategy {
        Strategy::DeltaPartition(_) => Ok((None, 0)),
        Strategy::Max | Strategy::Max1 => {
            let policy = if cfg.strategy == Strategy::Max {
                CandidatePolicy::AllAboveThreshold
            } else {
                CandidatePolicy::LargestOnly
            };
            let mut next = g.clone();
            let mut added = 0;
            for atom in select_atoms(d, policy, cfg.weight_threshold, fresh) {
                if !is_duplicate(&next, &atom.point.point, cfg.prune_delta) {
                    next = next.with_vertex(atom.point.point.clone())?.0;
                    added += 1;
                }
            }
            if cfg.random_vertex_rescue {
                let point = random_simplex_point(g.n(), rng);
                if !is_duplicate(&next, &point, cfg.prune_delta) {
                    next = next.with_vertex(point)?.0;
                    added += 1;
                }
            }
            if added == 0 {
                return Ok((None, 0));
            }
            Ok((Some(State { graph: next.complete_edges(), partition: None, base_count: state.base_count }), added))
        }
        Strategy::AdaptiveDelta => {
            let partition =
                state.partition.as_ref().ok_or_else(|| Error::InvalidArgument("missing partition".into()))?;
            let Some(atom) = select_atoms(d, CandidatePolicy::LargestOnly, cfg.weight_threshold, fresh).pop() else {
                return Ok((None, 0));
            };
            let (graph, partition) = g.subdivide_simplicial(partition, atom.edge, &atom.point)?;
            Ok((Some(State { graph, partition: Some(partition), base_count: state.base_count }), 1))
        }
        Strategy::Forgetfulness => {
            let base = state.base_count;
            let mut vertices: Vec<Vec<f64>> = g.vertices()[..base].to_vec();
            let atoms = select_atoms(d, CandidatePolicy::AllAboveThreshold, cfg.weight_threshold, |_| true);
            vertices.extend(atoms.iter().map(|a| a.point.point.clone()));
            let graph = EmbeddedGraph::new(g.n(), vertices, [])?.star_to_base(base)?.prune_duplicates(cfg.prune_delta);
            let added = graph.vertex_count() - base;
            if graph == *g {
                return Ok((None, added));
            }
            Ok((Some(State { graph, partition: None, base_count: base }), added))
        }
    }
}
