//! Completely positive problem data and its conic approximations.
//!
//! Programs are expressed in a small backend-neutral form: a vector of scalar
//! variables, linear equality rows, a linear objective, and cone constraints that
//! each name the variables they apply to.

use serde::{Deserialize, Serialize};

use crate::graph::{Edge, EmbeddedGraph};
use crate::matrix::{dot, packed_len, Block2, SymMatrix};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

impl Sense {
    /// `+1` for minimization, `-1` for maximization.
    pub fn sign(self) -> f64 {
        match self {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        }
    }

    /// Whether `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Sense::Minimize => a < b,
            Sense::Maximize => a > b,
        }
    }
}

/// `opt tr(CX)  s.t.  tr(A_i X) = b_i (i = 1..m),  X ∈ CPⁿ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpProblem {
    pub objective: SymMatrix,
    pub constraints: Vec<(SymMatrix, f64)>,
    pub sense: Sense,
}

impl CpProblem {
    pub fn new(objective: SymMatrix, constraints: Vec<(SymMatrix, f64)>, sense: Sense) -> Result<Self> {
        let p = CpProblem { objective, constraints, sense };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.objective.dim();
        if self.constraints.is_empty() {
            return Err(Error::InvalidArgument("a CP problem needs at least one constraint".into()));
        }
        for (a, _) in &self.constraints {
            if a.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, found: a.dim() });
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.objective.dim()
    }

    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    pub fn rhs(&self) -> Vec<f64> {
        self.constraints.iter().map(|(_, b)| *b).collect()
    }

    /// Largest absolute residual `|tr(A_i X) - b_i|`.
    pub fn equality_residual(&self, x: &SymMatrix) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (a, b) in &self.constraints {
            worst = worst.max((crate::matrix::trace_inner(a, x)? - b).abs());
        }
        Ok(worst)
    }
}

/// A cone constraint on a list of program variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cone", rename_all = "kebab-case")]
pub enum Cone {
    /// Every listed variable is nonnegative.
    Nonnegative { vars: Vec<usize> },
    /// `x >= 0, y >= 0, x·y >= z²`.
    RotatedQuadratic { x: usize, y: usize, z: usize },
    /// The listed variables, a packed upper triangle in column-major order
    /// (unscaled), form a PSD matrix of the given order.
    PsdTriangle { order: usize, vars: Vec<usize> },
}

/// Sparse linear row `Σ coef · x[var]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearRow {
    pub terms: Vec<(usize, f64)>,
}

impl LinearRow {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum()
    }
}

/// How program variables map back to the matrix `X`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Structure {
    /// Per-edge 2×2 blocks `(s11, s12, s22)` and optional per-vertex weights.
    Sdd {
        n: usize,
        rows: Vec<Vec<f64>>,
        edges: Vec<Edge>,
        block_vars: Vec<[usize; 3]>,
        vertex_vars: Option<Vec<usize>>,
    },
    /// One weight per vertex: `X = Σ λ_i u_i u_iᵀ`.
    Diag { n: usize, rows: Vec<Vec<f64>>, vertex_vars: Vec<usize> },
    /// The packed upper triangle of `X` itself.
    Dense { order: usize, entry_vars: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    pub num_vars: usize,
    pub sense: Sense,
    /// Objective coefficients in the program's own sense.
    pub objective: Vec<f64>,
    /// Rows `row · x = rhs`.
    pub equalities: Vec<(LinearRow, f64)>,
    pub cones: Vec<Cone>,
    pub structure: Structure,
}

impl ConicProgram {
    pub fn needs_psd(&self) -> bool {
        self.cones.iter().any(|c| matches!(c, Cone::PsdTriangle { .. }))
    }

    pub fn num_blocks(&self) -> usize {
        match &self.structure {
            Structure::Sdd { block_vars, .. } => block_vars.len(),
            _ => 0,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x)
    }
}

/// Options for [`build_sdd_program`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SddOptions {
    /// Add a nonnegative weight per vertex (`λ_i u_i u_iᵀ` atoms).
    pub vertex_atoms: bool,
}

/// Coefficients of the linear functional `S ↦ tr(A Uᵀ ι_kl(S) U)` for every edge,
/// plus `u_iᵀ A u_i` for every vertex.
struct PairCoefficients {
    edge: Vec<[f64; 3]>,
    vertex: Vec<f64>,
}

fn pair_coefficients(a: &SymMatrix, rows: &[Vec<f64>], edges: &[Edge]) -> PairCoefficients {
    let au: Vec<Vec<f64>> = rows.iter().map(|u| a.mul_vec(u)).collect();
    let vertex: Vec<f64> = rows.iter().zip(&au).map(|(u, au)| dot(u, au)).collect();
    let edge = edges.iter().map(|&(k, l)| [vertex[k], 2.0 * dot(&rows[k], &au[l]), vertex[l]]).collect();
    PairCoefficients { edge, vertex }
}

fn check_rows(n: usize, rows: &[Vec<f64>]) -> Result<()> {
    for r in rows {
        if r.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: r.len() });
        }
    }
    Ok(())
}

/// The approximation `X ∈ SDD⁺ᴳ(U)` of a CP problem.
///
/// One block `S_kl ∈ S²₊ ∩ N²` per edge; `X = Σ Uᵀ ι_kl(S_kl) U`. Each block is
/// constrained by a rotated quadratic cone on `(s11, s22, s12)` plus `s12 >= 0`.
pub fn build_sdd_program(p: &CpProblem, g: &EmbeddedGraph, opts: SddOptions) -> Result<ConicProgram> {
    if g.n() != p.n() {
        return Err(Error::DimensionMismatch { expected: p.n(), found: g.n() });
    }
    let edges: Vec<Edge> = g.edges().collect();
    build_sdd_from_rows(p, g.vertices(), &edges, opts)
}

/// Same as [`build_sdd_program`] on raw nonnegative rows that need not sum to one.
pub fn build_sdd_from_rows(p: &CpProblem, rows: &[Vec<f64>], edges: &[Edge], opts: SddOptions) -> Result<ConicProgram> {
    p.validate()?;
    check_rows(p.n(), rows)?;
    if edges.is_empty() {
        return Err(Error::EmptyEdgeSet);
    }
    let t = rows.len();
    for &(k, l) in edges {
        if k >= t || l >= t {
            return Err(Error::IndexOutOfRange { index: k.max(l), dim: t });
        }
    }

    let nb = edges.len();
    let block_vars: Vec<[usize; 3]> = (0..nb).map(|e| [3 * e, 3 * e + 1, 3 * e + 2]).collect();
    let vertex_vars: Option<Vec<usize>> = opts.vertex_atoms.then(|| (0..t).map(|i| 3 * nb + i).collect());
    let num_vars = 3 * nb + if opts.vertex_atoms { t } else { 0 };

    let fill_row = |coefs: &PairCoefficients| -> Vec<f64> {
        let mut row = vec![0.0; num_vars];
        for (vars, c) in block_vars.iter().zip(&coefs.edge) {
            for q in 0..3 {
                row[vars[q]] = c[q];
            }
        }
        if let Some(vv) = &vertex_vars {
            for (&v, &c) in vv.iter().zip(&coefs.vertex) {
                row[v] = c;
            }
        }
        row
    };

    let objective = fill_row(&pair_coefficients(&p.objective, rows, edges));
    let equalities =
        p.constraints.iter().map(|(a, b)| (dense_to_row(&fill_row(&pair_coefficients(a, rows, edges))), *b)).collect();

    let mut cones: Vec<Cone> =
        block_vars.iter().map(|v| Cone::RotatedQuadratic { x: v[0], y: v[2], z: v[1] }).collect();
    let mut nonneg: Vec<usize> = block_vars.iter().map(|v| v[1]).collect();
    if let Some(vv) = &vertex_vars {
        nonneg.extend(vv);
    }
    cones.push(Cone::Nonnegative { vars: nonneg });

    Ok(ConicProgram {
        num_vars,
        sense: p.sense,
        objective,
        equalities,
        cones,
        structure: Structure::Sdd { n: p.n(), rows: rows.to_vec(), edges: edges.to_vec(), block_vars, vertex_vars },
    })
}

fn dense_to_row(v: &[f64]) -> LinearRow {
    LinearRow { terms: v.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(i, &c)| (i, c)).collect() }
}

/// The LP approximation `X ∈ Diag⁺(U)`: one nonnegative weight per vertex.
pub fn build_diag_program(p: &CpProblem, g: &EmbeddedGraph) -> Result<ConicProgram> {
    p.validate()?;
    if g.n() != p.n() {
        return Err(Error::DimensionMismatch { expected: p.n(), found: g.n() });
    }
    let rows = g.vertices();
    let t = rows.len();
    let vertex_coef = |a: &SymMatrix| -> Vec<f64> { rows.iter().map(|u| a.bilinear(u, u)).collect() };
    let objective = vertex_coef(&p.objective);
    let equalities = p.constraints.iter().map(|(a, b)| (dense_to_row(&vertex_coef(a)), *b)).collect();
    let vertex_vars: Vec<usize> = (0..t).collect();
    Ok(ConicProgram {
        num_vars: t,
        sense: p.sense,
        objective,
        equalities,
        cones: vec![Cone::Nonnegative { vars: vertex_vars.clone() }],
        structure: Structure::Diag { n: p.n(), rows: rows.to_vec(), vertex_vars },
    })
}

/// The doubly nonnegative relaxation `X ⪰ 0, X >= 0`, a bound from the other side.
pub fn build_dnn_program(p: &CpProblem) -> Result<ConicProgram> {
    p.validate()?;
    let n = p.n();
    let len = packed_len(n);
    let entry_vars: Vec<usize> = (0..len).collect();
    let coef = |a: &SymMatrix| -> Vec<f64> {
        let mut row = Vec::with_capacity(len);
        for j in 0..n {
            for i in 0..=j {
                row.push(if i == j { a.get(i, j) } else { 2.0 * a.get(i, j) });
            }
        }
        row
    };
    let objective = coef(&p.objective);
    let equalities = p.constraints.iter().map(|(a, b)| (dense_to_row(&coef(a)), *b)).collect();
    Ok(ConicProgram {
        num_vars: len,
        sense: p.sense,
        objective,
        equalities,
        cones: vec![
            Cone::Nonnegative { vars: entry_vars.clone() },
            Cone::PsdTriangle { order: n, vars: entry_vars.clone() },
        ],
        structure: Structure::Dense { order: n, entry_vars },
    })
}

/// `X = Σ_{kl ∈ E} Uᵀ ι_kl(S_kl) U + Σ_i λ_i u_i u_iᵀ`.
pub fn assemble_x(g: &EmbeddedGraph, blocks: &[Block2], vertex_weights: Option<&[f64]>) -> Result<SymMatrix> {
    let edges: Vec<Edge> = g.edges().collect();
    assemble_from_rows(g.n(), g.vertices(), &edges, blocks, vertex_weights)
}

/// [`assemble_x`] over raw rows and an explicit edge list.
pub fn assemble_from_rows(
    n: usize,
    rows: &[Vec<f64>],
    edges: &[Edge],
    blocks: &[Block2],
    vertex_weights: Option<&[f64]>,
) -> Result<SymMatrix> {
    if blocks.len() != edges.len() {
        return Err(Error::DimensionMismatch { expected: edges.len(), found: blocks.len() });
    }
    check_rows(n, rows)?;
    let mut x = SymMatrix::zeros(n);
    for (&(k, l), s) in edges.iter().zip(blocks) {
        let (uk, ul) = (&rows[k], &rows[l]);
        x.add_outer(s.s11, uk);
        x.add_outer(s.s22, ul);
        x.add_sym_outer(s.s12, uk, ul);
    }
    if let Some(w) = vertex_weights {
        if w.len() != rows.len() {
            return Err(Error::DimensionMismatch { expected: rows.len(), found: w.len() });
        }
        for (u, &lambda) in rows.iter().zip(w) {
            x.add_outer(lambda, u);
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::embed;

    fn sqp(q: SymMatrix) -> CpProblem {
        let n = q.dim();
        CpProblem::new(q, vec![(SymMatrix::ones(n), 1.0)], Sense::Minimize).unwrap()
    }

    #[test]
    fn counts_for_pentagon() {
        let q = SymMatrix::from_fn(5, |i, j| if i == j || (j - i) % 5 == 1 || (j - i) % 5 == 4 { 1.0 } else { 0.0 });
        let g = EmbeddedGraph::identity_complete(5).unwrap();
        let prog = build_sdd_program(&sqp(q), &g, SddOptions::default()).unwrap();
        assert_eq!(prog.num_blocks(), 10);
        assert_eq!(prog.equalities.len(), 1);
        assert_eq!(prog.num_vars, 30);
        assert!(!prog.needs_psd());
    }

    #[test]
    fn coefficients_match_assembled_matrix() {
        // tr(A X) computed from the program row must agree with assembling X.
        let g = EmbeddedGraph::new(
            3,
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1. / 3., 1. / 3., 1. / 3.]],
            [(0, 3), (1, 3), (2, 3), (0, 1)],
        )
        .unwrap();
        let a = SymMatrix::from_fn(3, |i, j| (i as f64 + 1.0) * 0.7 - j as f64);
        let p = CpProblem::new(a.clone(), vec![(a.clone(), 0.0)], Sense::Minimize).unwrap();
        let prog = build_sdd_program(&p, &g, SddOptions { vertex_atoms: true }).unwrap();
        let blocks = vec![
            Block2::new(1.0, 0.5, 2.0),
            Block2::new(0.3, 0.1, 0.4),
            Block2::new(2.0, 1.0, 1.0),
            Block2::new(0.2, 0.0, 0.7),
        ];
        let weights = vec![0.1, 0.2, 0.3, 0.4];
        let mut xvec = Vec::new();
        for b in &blocks {
            xvec.extend([b.s11, b.s12, b.s22]);
        }
        xvec.extend(&weights);
        let x = assemble_x(&g, &blocks, Some(&weights)).unwrap();
        let direct = crate::matrix::trace_inner(&a, &x).unwrap();
        assert!((prog.objective_value(&xvec) - direct).abs() < 1e-12);
        assert!((prog.equalities[0].0.eval(&xvec) - direct).abs() < 1e-12);
    }

    #[test]
    fn assemble_three_by_three_example() {
        let g = EmbeddedGraph::new(
            3,
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1. / 3., 1. / 3., 1. / 3.]],
            [(0, 3), (1, 3), (2, 3)],
        )
        .unwrap();
        let blocks = vec![Block2::new(1.0, 3.0, 9.0); 3];
        let x = assemble_x(&g, &blocks, None).unwrap();
        let m = SymMatrix::from_rows(&[vec![6., 5., 5.], vec![5., 6., 5.], vec![5., 5., 6.]]).unwrap();
        for (a, b) in x.packed().iter().zip(m.packed()) {
            assert!((a - b).abs() < 1e-12, "{x:?}");
        }
    }

    #[test]
    fn assemble_identity_and_zero() {
        let g = EmbeddedGraph::identity_complete(3).unwrap();
        let mut blocks = vec![Block2::zero(); 3];
        assert_eq!(assemble_x(&g, &blocks, None).unwrap(), SymMatrix::zeros(3));
        blocks[0] = Block2::new(1.0, 2.0, 5.0);
        assert_eq!(assemble_x(&g, &blocks, None).unwrap(), embed(&blocks[0], 0, 1, 3).unwrap());
        assert!(assemble_x(&g, &blocks[..2], None).is_err());
    }

    #[test]
    fn diag_and_dnn_shapes() {
        let q = SymMatrix::identity(4);
        let p = sqp(q);
        let g = EmbeddedGraph::identity_complete(4).unwrap();
        let d = build_diag_program(&p, &g).unwrap();
        assert_eq!(d.num_vars, 4);
        assert_eq!(d.objective, vec![1.0; 4]);
        let s = build_dnn_program(&p).unwrap();
        assert_eq!(s.num_vars, 10);
        assert!(s.needs_psd());
        // tr(E X) picks diagonal once and off-diagonals twice
        assert_eq!(s.equalities[0].0.terms.iter().map(|t| t.1).sum::<f64>(), 4.0 + 2.0 * 6.0);
    }

    #[test]
    fn empty_edges_rejected() {
        let p = sqp(SymMatrix::identity(2));
        let g = EmbeddedGraph::new(2, vec![vec![1.0, 0.0], vec![0.0, 1.0]], []).unwrap();
        assert!(matches!(build_sdd_program(&p, &g, SddOptions::default()), Err(Error::EmptyEdgeSet)));
    }

    #[test]
    fn ir_serializes() {
        let p = sqp(SymMatrix::identity(2));
        let g = EmbeddedGraph::identity_complete(2).unwrap();
        let text = build_sdd_program(&p, &g, SddOptions::default()).unwrap().to_json().unwrap();
        assert!(text.contains("rotated-quadratic"));
        let back: ConicProgram = serde_json::from_str(&text).unwrap();
        assert_eq!(back.num_vars, 3);
    }
}
