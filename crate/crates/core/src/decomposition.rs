//! Rank-one certificates for solutions of the inner approximation.
//!
//! Every block `S_ij` of an optimal solution splits as `vvᵀ + diag(a, b)` with
//! `v ≥ 0`, so `X` is a nonnegative combination of `u_i u_iᵀ` and `w_ij w_ijᵀ`
//! where `w_ij` lies on the segment `[u_i, u_j]`. The points `w_ij` are the
//! candidate vertices used to refine the graph.

use serde::{Deserialize, Serialize};

use crate::backend::SolveOutcome;
use crate::graph::{Edge, EmbeddedGraph, SegmentPoint};
use crate::matrix::{Block2, SymMatrix};
use crate::{Error, Result};

/// Relative tolerance of the cone check in [`balanced_split`].
pub const SPLIT_CONE_TOL: f64 = 1e-6;

/// Off-diagonal entries at or below this are treated as zero.
pub fn degenerate_threshold(m: &Block2) -> f64 {
    1e-9 * m.trace().abs() + 1e-12
}

/// A 2×2 block written as `v vᵀ + diag(a, b)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub v: [f64; 2],
    pub a: f64,
    pub b: f64,
}

/// Splits `M ∈ S²₊ ∩ N²` into `v vᵀ + diag(a, b)` with `v ≥ 0`, `a, b ≥ 0`.
///
/// The ratio `v₁/v₂` is `√(m11/m22)`, the geometric mean of the extreme ratios
/// `m12/m22` and `m11/m12` that keep both residuals nonnegative.
pub fn balanced_split(m: &Block2) -> Result<Split> {
    let scale = 1.0 + m.trace().abs();
    let tol = SPLIT_CONE_TOL * scale;
    if m.s11 < -tol || m.s22 < -tol || m.s12 < -tol || m.s12 * m.s12 > m.s11.max(0.0) * m.s22.max(0.0) + tol * scale {
        return Err(Error::NotInCone(format!(
            "block [[{}, {}], [{}, {}]] is not in S²₊ ∩ N²",
            m.s11, m.s12, m.s12, m.s22
        )));
    }
    let (mut m11, mut m22) = (m.s11.max(0.0), m.s22.max(0.0));
    let eps = degenerate_threshold(m);
    if m.s12 <= eps || (m11 <= eps && m22 <= eps) {
        return Ok(Split { v: [0.0, 0.0], a: m11, b: m22 });
    }
    // a block just outside the cone has its smaller diagonal lifted onto the boundary
    if m.s12 * m.s12 > m11 * m22 {
        if m11 <= m22 {
            m11 = m.s12 * m.s12 / m22;
        } else {
            m22 = m.s12 * m.s12 / m11;
        }
    }
    let r = (m11 / m22).sqrt().sqrt();
    let root = m.s12.sqrt();
    let v = [root * r, root / r];
    let a = m11 - v[0] * v[0];
    let b = m22 - v[1] * v[1];
    Ok(Split { v, a: clamp(a), b: clamp(b) })
}

fn clamp(x: f64) -> f64 {
    x.max(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentAtom {
    pub edge: Edge,
    pub gamma: f64,
    pub point: SegmentPoint,
    /// False when the atom is too light to be proposed as a new vertex.
    pub candidate: bool,
}

/// `X = Σ λ_i u_i u_iᵀ + Σ γ_ij w_ij w_ijᵀ`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// `(vertex index, λ)`, only for positive weights.
    pub vertex_atoms: Vec<(usize, f64)>,
    pub segment_atoms: Vec<SegmentAtom>,
    pub trace_x: f64,
}

impl Decomposition {
    /// Rebuilds `X` from the atoms.
    pub fn reconstruct(&self, g: &EmbeddedGraph) -> SymMatrix {
        let mut x = SymMatrix::zeros(g.n());
        for &(i, lambda) in &self.vertex_atoms {
            x.add_outer(lambda, g.vertex(i));
        }
        for atom in &self.segment_atoms {
            x.add_outer(atom.gamma, &atom.point.point);
        }
        x
    }

    /// The rank-one factors `√weight · vector` as the columns of a nonnegative factor.
    pub fn factors(&self, g: &EmbeddedGraph) -> Vec<Vec<f64>> {
        let scaled = |w: f64, v: &[f64]| v.iter().map(|x| w.sqrt() * x).collect::<Vec<f64>>();
        self.vertex_atoms
            .iter()
            .map(|&(i, l)| scaled(l, g.vertex(i)))
            .chain(self.segment_atoms.iter().map(|a| scaled(a.gamma, &a.point.point)))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Decomposes the solution of an SDD program over `g` into rank-one atoms.
///
/// Atoms with `γ·max(w)² < weight_floor·tr(X)` stay in the certificate but are
/// not marked as candidates.
pub fn decompose(outcome: &SolveOutcome, g: &EmbeddedGraph, weight_floor: f64) -> Result<Decomposition> {
    if !outcome.is_optimal() {
        return Err(Error::NotOptimal(outcome.status));
    }
    if weight_floor < 0.0 || weight_floor.is_nan() {
        return Err(Error::InvalidArgument(format!("weight floor {weight_floor} must be nonnegative")));
    }
    if outcome.blocks.len() != g.edge_count() {
        return Err(Error::DimensionMismatch { expected: g.edge_count(), found: outcome.blocks.len() });
    }
    let t = g.vertex_count();
    let mut lambda = vec![0.0; t];
    if let Some(w) = &outcome.vertex_weights {
        if w.len() != t {
            return Err(Error::DimensionMismatch { expected: t, found: w.len() });
        }
        for (l, &x) in lambda.iter_mut().zip(w) {
            *l += clamp(x);
        }
    }

    let trace_x = outcome.x.trace();
    let floor = weight_floor * trace_x;
    let mut segment_atoms = Vec::new();
    for ((i, j), block) in g.edges().zip(&outcome.blocks) {
        let split = balanced_split(block)?;
        lambda[i] += split.a;
        lambda[j] += split.b;
        let [v1, v2] = split.v;
        if v1 <= 0.0 && v2 <= 0.0 {
            continue;
        }
        let (ui, uj) = (g.vertex(i), g.vertex(j));
        let s: f64 = ui.iter().zip(uj).map(|(a, b)| v1 * a + v2 * b).sum();
        let theta = (v1 / (v1 + v2)).clamp(0.0, 1.0);
        let point = SegmentPoint::on_edge(g, i, j, theta)?;
        let gamma = s * s;
        let peak = point.point.iter().fold(0.0f64, |m, &x| m.max(x));
        segment_atoms.push(SegmentAtom { edge: (i, j), gamma, candidate: gamma * peak * peak >= floor, point });
    }
    let vertex_atoms = lambda.into_iter().enumerate().filter(|&(_, l)| l > 0.0).collect();
    Ok(Decomposition { vertex_atoms, segment_atoms, trace_x })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidatePolicy {
    AllAboveThreshold,
    LargestOnly,
}

/// Segment points proposed as new vertices.
///
/// An atom qualifies when it is a candidate and `γ ≥ threshold·tr(X)`.
pub fn candidate_vertices(d: &Decomposition, policy: CandidatePolicy, threshold: f64) -> Vec<SegmentPoint> {
    select_atoms(d, policy, threshold, |_| true).into_iter().map(|a| a.point.clone()).collect()
}

/// Like [`candidate_vertices`], restricted to atoms accepted by `keep`, returning the atoms.
pub fn select_atoms(
    d: &Decomposition,
    policy: CandidatePolicy,
    threshold: f64,
    keep: impl Fn(&SegmentAtom) -> bool,
) -> Vec<&SegmentAtom> {
    let cut = threshold * d.trace_x;
    let eligible = d.segment_atoms.iter().filter(|a| a.candidate && a.gamma >= cut && keep(a));
    match policy {
        CandidatePolicy::AllAboveThreshold => eligible.collect(),
        CandidatePolicy::LargestOnly => eligible
            .fold(None::<&SegmentAtom>, |best, a| match best {
                Some(b) if b.gamma >= a.gamma => Some(b),
                _ => Some(a),
            })
            .into_iter()
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{solve, SolveOptions, Status};
    use crate::conic::{build_sdd_program, CpProblem, SddOptions, Sense};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn outcome_on(g: &EmbeddedGraph, blocks: Vec<Block2>) -> SolveOutcome {
        let x = crate::conic::assemble_x(g, &blocks, None).unwrap();
        SolveOutcome {
            status: Status::Optimal,
            primal_value: 0.0,
            dual_value: 0.0,
            blocks,
            vertex_weights: None,
            x,
            y: vec![],
            solve_time: 0.0,
            iterations: 0,
            detail: String::new(),
        }
    }

    #[test]
    fn split_rank_one() {
        let s = balanced_split(&Block2::new(4.0, 2.0, 1.0)).unwrap();
        assert_abs_diff_eq!(s.v[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.v[1], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.a, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.b, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn split_symmetric() {
        let s = balanced_split(&Block2::new(2.0, 1.0, 2.0)).unwrap();
        assert_eq!(s.v, [1.0, 1.0]);
        assert_eq!((s.a, s.b), (1.0, 1.0));
    }

    #[test]
    fn split_diagonal() {
        let s = balanced_split(&Block2::new(1.0, 0.0, 1.0)).unwrap();
        assert_eq!(s.v, [0.0, 0.0]);
        assert_eq!((s.a, s.b), (1.0, 1.0));
    }

    #[test]
    fn split_lifts_vanishing_diagonal() {
        let m = Block2::new(-4e-10, 1.8e-5, 0.4);
        let s = balanced_split(&m).unwrap();
        assert_abs_diff_eq!(s.v[0] * s.v[1], m.s12, epsilon = 1e-15);
        assert_abs_diff_eq!(s.v[0] * s.v[0], 1.8e-5 * 1.8e-5 / 0.4, epsilon = 1e-18);
        assert_abs_diff_eq!(s.v[1] * s.v[1] + s.b, m.s22, epsilon = 1e-15);
        assert_abs_diff_eq!(s.a, 0.0, epsilon = 1e-18);
    }

    #[test]
    fn split_rejects_outside_cone() {
        assert!(balanced_split(&Block2::new(1.0, 2.0, 1.0)).is_err());
        assert!(balanced_split(&Block2::new(1.0, -0.5, 1.0)).is_err());
        assert!(balanced_split(&Block2::new(-1.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn split_projects_one_sided_block() {
        // m22 below the threshold with a tiny off-diagonal: treated as diagonal
        let s = balanced_split(&Block2::new(1.0, 1e-10, 1e-14)).unwrap();
        assert_eq!(s.v, [0.0, 0.0]);
        assert_eq!(s.a, 1.0);
    }

    #[test]
    fn decompose_single_rank_one_edge() {
        let g = EmbeddedGraph::new(2, vec![vec![1.0, 0.0], vec![0.0, 1.0]], [(0, 1)]).unwrap();
        let d = decompose(&outcome_on(&g, vec![Block2::new(1.0, 1.0, 1.0)]), &g, 0.0).unwrap();
        assert!(d.vertex_atoms.is_empty());
        assert_eq!(d.segment_atoms.len(), 1);
        let a = &d.segment_atoms[0];
        assert_abs_diff_eq!(a.gamma, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.point.point[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(a.point.point[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn decompose_with_residuals() {
        let g = EmbeddedGraph::new(2, vec![vec![1.0, 0.0], vec![0.0, 1.0]], [(0, 1)]).unwrap();
        let d = decompose(&outcome_on(&g, vec![Block2::new(2.0, 1.0, 2.0)]), &g, 0.0).unwrap();
        assert_eq!(d.vertex_atoms, vec![(0, 1.0), (1, 1.0)]);
        assert_abs_diff_eq!(d.segment_atoms[0].gamma, 4.0, epsilon = 1e-12);
        assert_eq!(d.segment_atoms[0].point.point, vec![0.5, 0.5]);
    }

    #[test]
    fn decompose_requires_optimal() {
        let g = EmbeddedGraph::identity_complete(2).unwrap();
        let mut out = outcome_on(&g, vec![Block2::zero()]);
        out.status = Status::Infeasible;
        assert!(matches!(decompose(&out, &g, 0.0), Err(Error::NotOptimal(Status::Infeasible))));
    }

    #[test]
    fn weight_floor_marks_light_atoms() {
        let g = EmbeddedGraph::identity_complete(3).unwrap();
        let blocks = vec![Block2::new(1.0, 1.0, 1.0), Block2::new(1e-6, 1e-6, 1e-6), Block2::zero()];
        let d = decompose(&outcome_on(&g, blocks), &g, 1e-3).unwrap();
        assert_eq!(d.segment_atoms.len(), 2);
        assert!(d.segment_atoms[0].candidate);
        assert!(!d.segment_atoms[1].candidate);
        // light atoms still belong to the certificate
        let x = d.reconstruct(&g);
        assert_abs_diff_eq!(x.get(0, 2), 1e-6, epsilon = 1e-15);
    }

    fn two_atoms() -> Decomposition {
        let g = EmbeddedGraph::identity_complete(3).unwrap();
        let p = |i, j| SegmentPoint::on_edge(&g, i, j, 0.5).unwrap();
        Decomposition {
            vertex_atoms: vec![],
            segment_atoms: vec![
                SegmentAtom { edge: (0, 1), gamma: 5.0, point: p(0, 1), candidate: true },
                SegmentAtom { edge: (0, 2), gamma: 0.1, point: p(0, 2), candidate: true },
            ],
            trace_x: 10.0,
        }
    }

    #[test]
    fn candidates_boundary_inclusive() {
        let d = two_atoms();
        assert_eq!(candidate_vertices(&d, CandidatePolicy::AllAboveThreshold, 0.01).len(), 2);
        assert_eq!(candidate_vertices(&d, CandidatePolicy::AllAboveThreshold, 0.011).len(), 1);
    }

    #[test]
    fn candidates_largest_only() {
        let d = two_atoms();
        let c = candidate_vertices(&d, CandidatePolicy::LargestOnly, 0.01);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].edge, (0, 1));
        assert!(candidate_vertices(&d, CandidatePolicy::LargestOnly, 0.6).is_empty());
    }

    #[test]
    fn candidates_empty() {
        let d = Decomposition::default();
        assert!(candidate_vertices(&d, CandidatePolicy::AllAboveThreshold, 0.0).is_empty());
        assert!(candidate_vertices(&d, CandidatePolicy::LargestOnly, 0.0).is_empty());
    }

    #[test]
    fn solved_random_instance_reconstructs() {
        let n = 4;
        let c = SymMatrix::from_fn(n, |i, j| ((3 * i + 5 * j + i * j) % 7) as f64 / 3.0 - 0.5);
        let p = CpProblem::new(c, vec![(SymMatrix::ones(n), 1.0)], Sense::Minimize).unwrap();
        let g = EmbeddedGraph::identity_complete(n).unwrap();
        let out = solve(&build_sdd_program(&p, &g, SddOptions::default()).unwrap(), &SolveOptions::default()).unwrap();
        let d = decompose(&out, &g, 1e-5).unwrap();
        let err = d.reconstruct(&g).add_scaled_owned(-1.0, &out.x);
        assert!(err <= 1e-6 * (1.0 + out.x.frobenius_norm()), "{err}");
    }

    trait Diff {
        fn add_scaled_owned(self, alpha: f64, other: &SymMatrix) -> f64;
    }
    impl Diff for SymMatrix {
        fn add_scaled_owned(mut self, alpha: f64, other: &SymMatrix) -> f64 {
            self.add_scaled(alpha, other).unwrap();
            self.frobenius_norm()
        }
    }

    fn psd_nonneg_block() -> impl Strategy<Value = Block2> {
        (0.0..10.0f64, 0.0..10.0f64, 0.0..1.0f64).prop_map(|(a, b, t)| Block2::new(a, t * (a * b).sqrt(), b))
    }

    proptest! {
        #[test]
        fn split_reconstructs_block(m in psd_nonneg_block()) {
            let s = balanced_split(&m).unwrap();
            let scale = 1.0 + m.trace();
            if s.v != [0.0, 0.0] {
                prop_assert!((s.v[0] * s.v[0] + s.a - m.s11).abs() <= 1e-12 * scale);
                prop_assert!((s.v[0] * s.v[1] - m.s12).abs() <= 1e-12 * scale);
                prop_assert!((s.v[1] * s.v[1] + s.b - m.s22).abs() <= 1e-12 * scale);
            } else {
                let eps = degenerate_threshold(&m);
                prop_assert!(m.s12 <= eps || (m.s11 <= eps && m.s22 <= eps));
            }
            prop_assert!(s.a >= 0.0 && s.b >= 0.0 && s.v[0] >= 0.0 && s.v[1] >= 0.0);
        }

        #[test]
        fn split_ratio_within_extremes(a in 0.01..10.0f64, b in 0.01..10.0f64, t in 0.01..1.0f64) {
            let m = Block2::new(a, t * (a * b).sqrt(), b);
            let s = balanced_split(&m).unwrap();
            let ratio = s.v[0] / s.v[1];
            prop_assert!(ratio >= m.s12 / m.s22 * (1.0 - 1e-12));
            prop_assert!(ratio <= m.s11 / m.s12 * (1.0 + 1e-12));
        }

        #[test]
        fn decomposition_reconstructs_feasible_x(
            blocks in proptest::collection::vec(psd_nonneg_block(), 6),
            weights in proptest::collection::vec(0.0..2.0f64, 4),
        ) {
            let g = EmbeddedGraph::identity_complete(4).unwrap();
            let mut out = outcome_on(&g, blocks.clone());
            out.x = crate::conic::assemble_x(&g, &blocks, Some(&weights)).unwrap();
            out.vertex_weights = Some(weights);
            let d = decompose(&out, &g, 1e-5).unwrap();
            let err = d.reconstruct(&g).add_scaled_owned(-1.0, &out.x);
            prop_assert!(err <= 1e-6 * (1.0 + out.x.frobenius_norm()));
            for atom in &d.segment_atoms {
                prop_assert!(atom.point.validate(&g).is_ok());
                prop_assert!((atom.point.point.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
    }
}
