//! Exact reference solvers for small instances.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::backend::{solve, SolveOptions, Status};
use crate::conic::{build_sdd_program, Cone, ConicProgram, CpProblem, LinearRow, SddOptions, Sense, Structure};
use crate::graph::EmbeddedGraph;
use crate::matrix::{copositive2, trace_inner, Block2, SymMatrix};
use crate::problems::Graph;
use crate::{Error, Result};

/// Default dimension limit of [`sqp_oracle`].
pub const SQP_ORACLE_LIMIT: usize = 20;
/// Default vertex limit of [`stable_set_oracle`].
pub const STABLE_SET_ORACLE_LIMIT: usize = 40;
/// Hard vertex limit of the bitset representation.
pub const STABLE_SET_MAX_VERTICES: usize = 128;
/// Relative pivot size below which a face system is treated as singular.
pub const PIVOT_TOL: f64 = 1e-12;
/// Tolerance of membership decisions, relative to the size of the tested matrix.
pub const MEMBERSHIP_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMethod {
    FaceEnumeration,
    BranchAndBound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Witness {
    /// A minimizer in the standard simplex.
    Point(Vec<f64>),
    /// A maximum stable set.
    Subset(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub value: f64,
    pub witness: Witness,
    pub method: OracleMethod,
}

/// Global minimum of `xᵀQx` over the standard simplex.
///
/// Every support set `F` is tried: the stationarity system `Q_F x_F = μ1`,
/// `Σ x_F = 1` is solved and kept when `x_F > 0`. Faces with a singular system
/// are skipped; their boundary is covered by smaller faces.
pub fn sqp_oracle(q: &SymMatrix, limit: usize) -> Result<OracleResult> {
    let n = q.dim();
    if n > limit || n >= usize::BITS as usize {
        return Err(Error::TooLarge { what: "SQP oracle dimension", count: n, cap: limit });
    }
    let mut best_value = f64::INFINITY;
    let mut best_x = vec![0.0; n];
    let mut skipped = 0usize;
    for mask in 1usize..(1usize << n) {
        let support: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        let Some(xf) = face_stationary_point(q, &support) else {
            skipped += 1;
            continue;
        };
        if xf.iter().any(|&v| v <= 0.0) {
            continue;
        }
        let mut x = vec![0.0; n];
        for (&i, &v) in support.iter().zip(&xf) {
            x[i] = v;
        }
        let value = q.bilinear(&x, &x);
        if value < best_value {
            best_value = value;
            best_x = x;
        }
    }
    if skipped > 0 {
        log::debug!("SQP oracle skipped {skipped} singular faces");
    }
    Ok(OracleResult { value: best_value, witness: Witness::Point(best_x), method: OracleMethod::FaceEnumeration })
}

fn face_stationary_point(q: &SymMatrix, support: &[usize]) -> Option<Vec<f64>> {
    let k = support.len();
    let mut kkt = DMatrix::<f64>::zeros(k + 1, k + 1);
    for (r, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            kkt[(r, c)] = q.get(i, j);
        }
        kkt[(r, k)] = -1.0;
        kkt[(k, r)] = 1.0;
    }
    let scale = kkt.amax().max(1.0);
    let lu = kkt.lu();
    let u = lu.u();
    if (0..=k).any(|d| u[(d, d)].abs() <= PIVOT_TOL * scale) {
        return None;
    }
    let mut rhs = DVector::<f64>::zeros(k + 1);
    rhs[k] = 1.0;
    let sol = lu.solve(&rhs)?;
    Some(sol.iter().take(k).copied().collect())
}

/// Independence number `α(G)` by branch and bound with a clique-cover bound.
pub fn stable_set_oracle(g: &Graph, limit: usize) -> Result<OracleResult> {
    let n = g.vertex_count();
    let cap = limit.min(STABLE_SET_MAX_VERTICES);
    if n > cap {
        return Err(Error::TooLarge { what: "stable set oracle vertices", count: n, cap });
    }
    // Non-neighbours: a stable set is a clique in this graph.
    let full: u128 = if n == 128 { u128::MAX } else { (1u128 << n) - 1 };
    let mut compat = vec![full; n];
    for (v, row) in compat.iter_mut().enumerate() {
        *row &= !(1u128 << v);
    }
    for (a, b) in g.edges() {
        compat[a] &= !(1u128 << b);
        compat[b] &= !(1u128 << a);
    }

    let mut search = StableSearch { compat: &compat, best: greedy_stable_set(g), current: Vec::new() };
    search.expand(full);
    let mut best = search.best;
    best.sort_unstable();
    Ok(OracleResult { value: best.len() as f64, witness: Witness::Subset(best), method: OracleMethod::BranchAndBound })
}

fn greedy_stable_set(g: &Graph) -> Vec<usize> {
    let n = g.vertex_count();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| g.degree(v));
    let mut chosen: Vec<usize> = Vec::new();
    for v in order {
        if chosen.iter().all(|&u| !g.has_edge(u, v)) {
            chosen.push(v);
        }
    }
    chosen
}

struct StableSearch<'a> {
    compat: &'a [u128],
    best: Vec<usize>,
    current: Vec<usize>,
}

impl StableSearch<'_> {
    fn expand(&mut self, mut candidates: u128) {
        if candidates == 0 {
            if self.current.len() > self.best.len() {
                self.best = self.current.clone();
            }
            return;
        }
        let (order, bounds) = self.color(candidates);
        for (&v, &colors) in order.iter().zip(&bounds).rev() {
            if self.current.len() + colors <= self.best.len() {
                return;
            }
            self.current.push(v);
            self.expand(candidates & self.compat[v]);
            self.current.pop();
            candidates &= !(1u128 << v);
        }
    }

    /// Greedy partition of the candidates into classes of mutually conflicting
    /// vertices; returns vertices in class order with the running class count.
    fn color(&self, candidates: u128) -> (Vec<usize>, Vec<usize>) {
        let mut order = Vec::with_capacity(candidates.count_ones() as usize);
        let mut bounds = Vec::with_capacity(order.capacity());
        let mut uncolored = candidates;
        let mut class = 0;
        while uncolored != 0 {
            class += 1;
            let mut open = uncolored;
            while open != 0 {
                let v = open.trailing_zeros() as usize;
                open &= !(1u128 << v);
                // members of a class are pairwise incompatible
                open &= !self.compat[v];
                uncolored &= !(1u128 << v);
                order.push(v);
                bounds.push(class);
            }
        }
        (order, bounds)
    }
}

/// Outcome of [`sdd_membership`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Membership {
    /// `M = Σ Uᵀ ι_kl(S_kl) U` with the given blocks, up to `residual` entrywise.
    Member { blocks: Vec<Block2>, residual: f64 },
    /// `W` lies in the dual cone and `tr(WM) = value < 0`.
    NonMember { certificate: SymMatrix, value: f64 },
    /// Neither a representation nor a separating functional was found.
    Inconclusive { status: Status, value: f64 },
}

impl Membership {
    pub fn is_member(&self) -> bool {
        matches!(self, Membership::Member { .. })
    }
}

/// `[[u_kᵀWu_k, u_kᵀWu_l], [u_lᵀWu_k, u_lᵀWu_l]]`.
fn pulled_back(w: &SymMatrix, uk: &[f64], ul: &[f64]) -> Block2 {
    Block2::new(w.bilinear(uk, uk), w.bilinear(uk, ul), w.bilinear(ul, ul))
}

/// Whether `W` lies in the dual of `SDD⁺ᴳ(U)`: every pulled-back edge block is copositive.
pub fn dual_cone_member(w: &SymMatrix, g: &EmbeddedGraph, tol: f64) -> bool {
    w.dim() == g.n() && g.edges().all(|(k, l)| copositive2(&pulled_back(w, g.vertex(k), g.vertex(l)), tol))
}

/// Decides `M ∈ SDD⁺ᴳ(U)`.
///
/// A feasibility solve looks for blocks reproducing `M`. When there are none,
/// `min tr(WM)` over dual-cone `W` with entries in `[-1, 1]` yields the separating
/// functional.
pub fn sdd_membership(m: &SymMatrix, g: &EmbeddedGraph, opts: &SolveOptions) -> Result<Membership> {
    let n = m.dim();
    if g.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: g.n() });
    }
    let scale = 1.0 + m.max_abs();
    let tol = MEMBERSHIP_TOL * scale;

    let mut constraints = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        for i in 0..=j {
            let mut e = SymMatrix::zeros(n);
            e.set(i, j, if i == j { 1.0 } else { 0.5 });
            constraints.push((e, m.get(i, j)));
        }
    }
    let feas = CpProblem::new(SymMatrix::zeros(n), constraints, Sense::Minimize)?;
    let out = solve(&build_sdd_program(&feas, g, SddOptions::default())?, opts)?;
    if out.is_optimal() {
        let mut diff = out.x.clone();
        diff.add_scaled(-1.0, m)?;
        let residual = diff.max_abs();
        if residual <= tol {
            return Ok(Membership::Member { blocks: out.blocks, residual });
        }
    }

    let sep = solve(&separation_program(m, g)?, opts)?;
    if sep.is_optimal() {
        let w = sep.x;
        let value = trace_inner(&w, m)?;
        if value < -tol && dual_cone_member(&w, g, MEMBERSHIP_TOL) {
            return Ok(Membership::NonMember { certificate: w, value });
        }
        return Ok(Membership::Inconclusive { status: out.status, value });
    }
    Ok(Membership::Inconclusive { status: sep.status, value: f64::NAN })
}

/// `min tr(WM)` over `W` in the dual cone with `-1 <= W_ij <= 1`.
///
/// Each edge carries `(a, c, z) ∈` rotated cone and `ν >= 0` with
/// `a = u_kᵀWu_k`, `c = u_lᵀWu_l`, `z = u_kᵀWu_l - ν`, which is exactly
/// copositivity of the pulled-back block.
fn separation_program(m: &SymMatrix, g: &EmbeddedGraph) -> Result<ConicProgram> {
    let n = m.dim();
    let len = n * (n + 1) / 2;
    let packed = |i: usize, j: usize| j * (j + 1) / 2 + i;
    let edges: Vec<(usize, usize)> = g.edges().collect();
    if edges.is_empty() {
        return Err(Error::EmptyEdgeSet);
    }
    let edge_base = len;
    let slack_base = edge_base + 4 * edges.len();
    let num_vars = slack_base + 2 * len;

    let mut objective = vec![0.0; num_vars];
    for j in 0..n {
        for i in 0..=j {
            objective[packed(i, j)] = if i == j { m.get(i, i) } else { 2.0 * m.get(i, j) };
        }
    }

    let bilinear_row = |u: &[f64], v: &[f64]| -> Vec<(usize, f64)> {
        let mut terms = Vec::new();
        for j in 0..n {
            for i in 0..=j {
                let c = if i == j { u[i] * v[i] } else { u[i] * v[j] + u[j] * v[i] };
                if c != 0.0 {
                    terms.push((packed(i, j), c));
                }
            }
        }
        terms
    };

    let mut equalities = Vec::new();
    let mut cones = Vec::new();
    let mut nonneg = Vec::new();
    for (e, &(k, l)) in edges.iter().enumerate() {
        let (a, c, z, nu) = (edge_base + 4 * e, edge_base + 4 * e + 1, edge_base + 4 * e + 2, edge_base + 4 * e + 3);
        let (uk, ul) = (g.vertex(k), g.vertex(l));
        let mut row_a: Vec<(usize, f64)> = bilinear_row(uk, uk).into_iter().map(|(i, v)| (i, -v)).collect();
        row_a.push((a, 1.0));
        let mut row_c: Vec<(usize, f64)> = bilinear_row(ul, ul).into_iter().map(|(i, v)| (i, -v)).collect();
        row_c.push((c, 1.0));
        let mut row_z: Vec<(usize, f64)> = bilinear_row(uk, ul).into_iter().map(|(i, v)| (i, -v)).collect();
        row_z.push((z, 1.0));
        row_z.push((nu, 1.0));
        equalities.push((LinearRow { terms: row_a }, 0.0));
        equalities.push((LinearRow { terms: row_c }, 0.0));
        equalities.push((LinearRow { terms: row_z }, 0.0));
        cones.push(Cone::RotatedQuadratic { x: a, y: c, z });
        nonneg.push(nu);
    }
    for q in 0..len {
        let (up, down) = (slack_base + 2 * q, slack_base + 2 * q + 1);
        equalities.push((LinearRow { terms: vec![(q, 1.0), (up, 1.0)] }, 1.0));
        equalities.push((LinearRow { terms: vec![(q, 1.0), (down, -1.0)] }, -1.0));
        nonneg.push(up);
        nonneg.push(down);
    }
    cones.push(Cone::Nonnegative { vars: nonneg });

    Ok(ConicProgram {
        num_vars,
        sense: Sense::Minimize,
        objective,
        equalities,
        cones,
        structure: Structure::Dense { order: n, entry_vars: (0..len).collect() },
    })
}

/// `(upper - lower)/|lower|`, or the absolute difference when `lower` is zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub value: f64,
    /// True when the gap is absolute because the reference is zero.
    pub absolute: bool,
}

pub fn relative_gap(upper: f64, lower: f64) -> Gap {
    if lower == 0.0 {
        Gap { value: upper - lower, absolute: true }
    } else {
        Gap { value: (upper - lower) / lower.abs(), absolute: false }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{complement, motzkin_straus, BuiltinGraph};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn counterexample_m() -> SymMatrix {
        SymMatrix::from_rows(&[vec![6.0, 5.0, 5.0], vec![5.0, 6.0, 5.0], vec![5.0, 5.0, 6.0]]).unwrap()
    }

    fn point(r: &OracleResult) -> &[f64] {
        match &r.witness {
            Witness::Point(x) => x,
            Witness::Subset(_) => panic!("expected a point"),
        }
    }

    #[test]
    fn sqp_pentagon() {
        let q = motzkin_straus(&Graph::cycle(5).unwrap());
        let r = sqp_oracle(&q, SQP_ORACLE_LIMIT).unwrap();
        assert_abs_diff_eq!(r.value, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn sqp_identity() {
        let r = sqp_oracle(&SymMatrix::identity(3), SQP_ORACLE_LIMIT).unwrap();
        assert_abs_diff_eq!(r.value, 1.0 / 3.0, epsilon = 1e-12);
        for &x in point(&r) {
            assert_abs_diff_eq!(x, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn sqp_diagonal() {
        let q = SymMatrix::diagonal(&[1.0, 2.0, 3.0]);
        let r = sqp_oracle(&q, SQP_ORACLE_LIMIT).unwrap();
        assert_abs_diff_eq!(r.value, 6.0 / 11.0, epsilon = 1e-12);
        let x = point(&r);
        assert_abs_diff_eq!(q.bilinear(x, x), r.value, epsilon = 1e-10);
    }

    #[test]
    fn sqp_all_ones() {
        let r = sqp_oracle(&SymMatrix::ones(4), SQP_ORACLE_LIMIT).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sqp_limit() {
        assert!(matches!(sqp_oracle(&SymMatrix::identity(5), 4), Err(Error::TooLarge { .. })));
    }

    fn grid_min(q: &SymMatrix, steps: usize) -> f64 {
        let h = 1.0 / steps as f64;
        let mut best = f64::INFINITY;
        for i in 0..=steps {
            for j in 0..=steps - i {
                let x = [i as f64 * h, j as f64 * h, (steps - i - j) as f64 * h];
                best = best.min(q.bilinear(&x, &x));
            }
        }
        best
    }

    #[test]
    fn sqp_diagonal_matches_grid() {
        let q = SymMatrix::diagonal(&[1.0, 2.0, 3.0]);
        let r = sqp_oracle(&q, SQP_ORACLE_LIMIT).unwrap();
        let g = grid_min(&q, 1000);
        assert!(g >= r.value - 1e-12 && g - r.value <= 1e-3);
    }

    #[test]
    fn stable_small() {
        let c5 = Graph::cycle(5).unwrap();
        assert_eq!(stable_set_oracle(&c5, 40).unwrap().value, 2.0);
        assert_eq!(stable_set_oracle(&Graph::empty(7), 40).unwrap().value, 7.0);
        assert_eq!(stable_set_oracle(&Graph::complete(4), 40).unwrap().value, 1.0);
        assert_eq!(stable_set_oracle(&Graph::empty(0), 40).unwrap().value, 0.0);
    }

    #[test]
    fn clique_numbers() {
        for (name, omega) in [("hamming6-4", 4.0), ("johnson8-2-4", 4.0), ("icosahedron", 3.0)] {
            let g = name.parse::<BuiltinGraph>().unwrap().build().unwrap();
            let r = stable_set_oracle(&complement(&g), STABLE_SET_MAX_VERTICES).unwrap();
            assert_eq!(r.value, omega, "{name}");
            let Witness::Subset(s) = &r.witness else { panic!() };
            assert!(complement(&g).is_stable(s));
        }
    }

    #[test]
    fn code_graph_stability_numbers() {
        for (name, alpha) in [("1tc.16", 8.0), ("1tc.32", 12.0), ("1dc.64", 10.0)] {
            let g = name.parse::<BuiltinGraph>().unwrap().build().unwrap();
            assert_eq!(stable_set_oracle(&g, STABLE_SET_MAX_VERTICES).unwrap().value, alpha, "{name}");
        }
    }

    #[test]
    fn stable_limit() {
        assert!(matches!(stable_set_oracle(&Graph::empty(41), 40), Err(Error::TooLarge { .. })));
    }

    fn brute_force_alpha(g: &Graph) -> usize {
        let n = g.vertex_count();
        (0u32..1 << n)
            .filter(|mask| {
                let set: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
                g.is_stable(&set)
            })
            .map(|m| m.count_ones() as usize)
            .max()
            .unwrap_or(0)
    }

    proptest! {
        #[test]
        fn stable_matches_enumeration(n in 1usize..13, density in 0.0..1.0f64, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
            let g = Graph::new(n, pairs.into_iter().filter(|_| rng.random_bool(density))).unwrap();
            let r = stable_set_oracle(&g, 40).unwrap();
            prop_assert_eq!(r.value as usize, brute_force_alpha(&g));
            let Witness::Subset(s) = &r.witness else { panic!() };
            prop_assert!(g.is_stable(s));
        }

        #[test]
        fn sqp_matches_grid(entries in proptest::collection::vec(-1.0..1.0f64, 6)) {
            let q = SymMatrix::from_packed(3, entries).unwrap();
            let r = sqp_oracle(&q, SQP_ORACLE_LIMIT).unwrap();
            let x = point(&r);
            prop_assert!((q.bilinear(x, x) - r.value).abs() <= 1e-10);
            prop_assert!((x.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
            let g = grid_min(&q, 300);
            prop_assert!(g >= r.value - 1e-9);
            prop_assert!(g - r.value <= 1e-3 * 30.0);
        }
    }

    #[test]
    fn gap_values() {
        assert_abs_diff_eq!(relative_gap(1.05, 1.0).value, 0.05, epsilon = 1e-12);
        assert_eq!(relative_gap(1.0, 1.0).value, 0.0);
        let g = relative_gap(0.5, -16.331);
        assert!(!g.absolute);
        assert_abs_diff_eq!(g.value, 16.831 / 16.331, epsilon = 1e-12);
        let z = relative_gap(0.25, 0.0);
        assert!(z.absolute);
        assert_eq!(z.value, 0.25);
    }

    #[test]
    fn counterexample_is_separated() {
        let g = EmbeddedGraph::identity_complete(3).unwrap();
        match sdd_membership(&counterexample_m(), &g, &SolveOptions::default()).unwrap() {
            Membership::NonMember { certificate, value } => {
                assert_abs_diff_eq!(value, -12.0, epsilon = 1e-5);
                let w = SymMatrix::from_rows(&[vec![1.0, -1.0, -1.0], vec![-1.0, 1.0, -1.0], vec![-1.0, -1.0, 1.0]])
                    .unwrap();
                let mut diff = certificate.clone();
                diff.add_scaled(-1.0, &w).unwrap();
                assert!(diff.max_abs() < 1e-4, "{certificate:?}");
            }
            other => panic!("expected a separation, got {other:?}"),
        }
    }

    #[test]
    fn separating_w_is_in_dual_cone() {
        let g = EmbeddedGraph::identity_complete(3).unwrap();
        let w = SymMatrix::from_rows(&[vec![1.0, -1.0, -1.0], vec![-1.0, 1.0, -1.0], vec![-1.0, -1.0, 1.0]]).unwrap();
        assert!(dual_cone_member(&w, &g, 0.0));
        assert_eq!(trace_inner(&w, &counterexample_m()).unwrap(), -12.0);
        // W is not copositive on the barycenter, so it leaves the dual once that vertex is added
        let third = 1.0 / 3.0;
        let (g4, _) = g.with_vertex(vec![third; 3]).unwrap();
        assert!(!dual_cone_member(&w, &g4.complete_edges(), 1e-9));
    }

    #[test]
    fn counterexample_with_barycenter() {
        let third = 1.0 / 3.0;
        let (g, _) = EmbeddedGraph::identity_complete(3).unwrap().with_vertex(vec![third; 3]).unwrap();
        let g = g.complete_edges();
        let verdict = sdd_membership(&counterexample_m(), &g, &SolveOptions::default()).unwrap();
        assert!(verdict.is_member(), "{verdict:?}");
    }

    #[test]
    fn identity_is_member() {
        let g = EmbeddedGraph::identity_complete(3).unwrap();
        assert!(sdd_membership(&SymMatrix::identity(3), &g, &SolveOptions::default()).unwrap().is_member());
    }

    #[test]
    fn segment_samples_are_members() {
        let g = EmbeddedGraph::delta_partition(3, 2, 100).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let p = g.sample_segment_point(&mut rng).unwrap();
            let m = SymMatrix::outer(&p.point);
            let verdict = sdd_membership(&m, &g, &SolveOptions::default()).unwrap();
            assert!(verdict.is_member(), "{verdict:?}");
        }
    }
}
