//! Graphs embedded in the standard simplex Δⁿ.
//!
//! An [`EmbeddedGraph`] is the pair `(G, U)`: vertex `i` sits at row `u_i` of `U`
//! (a point of Δⁿ) and every edge `{i, j}` stands for the segment `[u_i, u_j]`.
//! The union of those segments, `seg(G, U)`, determines the approximating cone.
//! All mutators return new values.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance on vertex row sums.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Tolerance between a segment point and its barycentric reconstruction.
pub const SEGMENT_TOL: f64 = 1e-10;
/// Default cap on the number of grid vertices of a uniform Δ-partition.
pub const DEFAULT_PARTITION_CAP: usize = 100_000;

/// An edge as an ordered pair `(i, j)` with `i < j`.
pub type Edge = (usize, usize);

/// A simplicial partition of Δⁿ: each simplex lists the indices of its `n` vertices.
pub type SimplexList = Vec<Vec<usize>>;

fn ordered(i: usize, j: usize) -> Edge {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct EmbeddedGraph {
    n: usize,
    vertices: Vec<Vec<f64>>,
    edges: BTreeSet<Edge>,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    n: usize,
    vertices: Vec<Vec<f64>>,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphRepr> for EmbeddedGraph {
    type Error = Error;

    fn try_from(r: GraphRepr) -> Result<Self> {
        EmbeddedGraph::new(r.n, r.vertices, r.edges.into_iter().map(|[i, j]| (i, j)))
    }
}

impl From<EmbeddedGraph> for GraphRepr {
    fn from(g: EmbeddedGraph) -> Self {
        GraphRepr { n: g.n, vertices: g.vertices, edges: g.edges.into_iter().map(|(i, j)| [i, j]).collect() }
    }
}

fn check_simplex_point(n: usize, v: &[f64]) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: v.len() });
    }
    if let Some(x) = v.iter().find(|x| x.is_nan() || **x < 0.0) {
        return Err(Error::InvalidArgument(format!("vertex has a negative or NaN entry {x}")));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::InvalidArgument(format!("vertex sums to {sum}, not 1")));
    }
    Ok(())
}

impl EmbeddedGraph {
    /// Validating constructor. Edge orientation is normalized and repeated edges collapse.
    pub fn new(n: usize, vertices: Vec<Vec<f64>>, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("ambient dimension must be positive".into()));
        }
        if vertices.is_empty() {
            return Err(Error::InvalidArgument("an embedded graph needs at least one vertex".into()));
        }
        for v in &vertices {
            check_simplex_point(n, v)?;
        }
        let t = vertices.len();
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i >= t || j >= t {
                return Err(Error::IndexOutOfRange { index: i.max(j), dim: t });
            }
            if i == j {
                return Err(Error::DiagonalPair(i));
            }
            set.insert(ordered(i, j));
        }
        Ok(EmbeddedGraph { n, vertices, edges: set })
    }

    /// The simplex vertices `e_1, …, e_n` joined by all `n(n-1)/2` edges.
    pub fn identity_complete(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("identity embedding needs n >= 2, got {n}")));
        }
        let vertices = (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                e
            })
            .collect();
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        Ok(EmbeddedGraph { n, vertices, edges })
    }

    /// Uniform grid `{x ∈ Δⁿ : kx ∈ ℤⁿ}` with grid-adjacency edges.
    ///
    /// Two grid points are adjacent when `k(u_i - u_j)` is `e_a - e_b` for some `a ≠ b`.
    /// Vertices are listed in lexicographically decreasing order of `kx`, so `k = 1`
    /// reproduces [`EmbeddedGraph::identity_complete`].
    pub fn delta_partition(n: usize, k: usize, cap: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("Δ-partition needs n >= 2, got {n}")));
        }
        if k < 1 {
            return Err(Error::InvalidArgument("Δ-partition needs k >= 1".into()));
        }
        let count = binomial(n + k - 1, k).unwrap_or(u128::MAX);
        if count > cap as u128 {
            return Err(Error::TooLarge { what: "Δ-partition", count: count.min(usize::MAX as u128) as usize, cap });
        }

        let mut grid: Vec<Vec<u32>> = Vec::with_capacity(count as usize);
        let mut current = vec![0u32; n];
        compositions(k as u32, 0, &mut current, &mut grid);

        let index: HashMap<&[u32], usize> = grid.iter().enumerate().map(|(i, c)| (c.as_slice(), i)).collect();
        let mut edges = BTreeSet::new();
        let mut probe = vec![0u32; n];
        for (i, c) in grid.iter().enumerate() {
            for a in 0..n {
                if c[a] == 0 {
                    continue;
                }
                for b in 0..n {
                    if a == b {
                        continue;
                    }
                    probe.copy_from_slice(c);
                    probe[a] -= 1;
                    probe[b] += 1;
                    if let Some(&j) = index.get(probe.as_slice()) {
                        edges.insert(ordered(i, j));
                    }
                }
            }
        }

        let kf = k as f64;
        let vertices = grid.iter().map(|c| c.iter().map(|&x| x as f64 / kf).collect()).collect();
        Ok(EmbeddedGraph { n, vertices, edges })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.vertices[i]
    }

    pub fn edges(&self) -> impl ExactSizeIterator<Item = Edge> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&ordered(i, j))
    }

    /// Whether every vertex is incident to at least one edge.
    pub fn covers_all_vertices(&self) -> bool {
        let mut seen = vec![false; self.vertex_count()];
        for &(i, j) in &self.edges {
            seen[i] = true;
            seen[j] = true;
        }
        seen.into_iter().all(|s| s)
    }

    /// Appends the point as a new vertex without edges; returns the new index.
    pub fn add_vertex(&self, p: &SegmentPoint) -> Result<(Self, usize)> {
        p.validate(self)?;
        self.with_vertex(p.point.clone())
    }

    /// Appends an arbitrary point of Δⁿ as a new isolated vertex.
    pub fn with_vertex(&self, point: Vec<f64>) -> Result<(Self, usize)> {
        check_simplex_point(self.n, &point)?;
        let mut g = self.clone();
        g.vertices.push(point);
        Ok((g, self.vertices.len()))
    }

    /// Joins every pair of vertices.
    pub fn complete_edges(&self) -> Self {
        let t = self.vertex_count();
        let edges = (0..t).flat_map(|i| (i + 1..t).map(move |j| (i, j))).collect();
        EmbeddedGraph { n: self.n, vertices: self.vertices.clone(), edges }
    }

    /// Complete graph on the first `base_count` vertices plus every edge from a later
    /// vertex to each base vertex.
    pub fn star_to_base(&self, base_count: usize) -> Result<Self> {
        let t = self.vertex_count();
        if base_count == 0 || base_count > t {
            return Err(Error::IndexOutOfRange { index: base_count, dim: t });
        }
        let mut edges = BTreeSet::new();
        for i in 0..base_count {
            for j in i + 1..base_count {
                edges.insert((i, j));
            }
        }
        for v in base_count..t {
            for b in 0..base_count {
                edges.insert((b, v));
            }
        }
        Ok(EmbeddedGraph { n: self.n, vertices: self.vertices.clone(), edges })
    }

    /// Removes near-duplicate vertices.
    ///
    /// Scanning in index order, a vertex within ℓ1 distance `< delta` of an earlier
    /// surviving vertex is dropped and its edges move to that survivor. Self-loops
    /// created by the move are discarded.
    pub fn prune_duplicates(&self, delta: f64) -> Self {
        let t = self.vertex_count();
        let mut survivors: Vec<usize> = Vec::with_capacity(t);
        let mut new_index = vec![usize::MAX; t];
        for j in 0..t {
            let twin = survivors.iter().copied().find(|&i| l1_distance(&self.vertices[i], &self.vertices[j]) < delta);
            match twin {
                Some(i) => new_index[j] = new_index[i],
                None => {
                    new_index[j] = survivors.len();
                    survivors.push(j);
                }
            }
        }
        let vertices = survivors.iter().map(|&i| self.vertices[i].clone()).collect();
        let edges = self
            .edges
            .iter()
            .filter_map(|&(i, j)| {
                let (a, b) = (new_index[i], new_index[j]);
                (a != b).then(|| ordered(a, b))
            })
            .collect();
        EmbeddedGraph { n: self.n, vertices, edges }
    }

    /// Splits every simplex containing `edge` at `point`.
    ///
    /// Each such simplex is replaced by two: one with the edge's second endpoint
    /// swapped for the new vertex, one with the first endpoint swapped. The edge set
    /// becomes the union of the 1-skeletons of the resulting simplices.
    pub fn subdivide_simplicial(
        &self,
        partition: &[Vec<usize>],
        edge: Edge,
        point: &SegmentPoint,
    ) -> Result<(Self, SimplexList)> {
        let (a, b) = ordered(edge.0, edge.1);
        if ordered(point.edge.0, point.edge.1) != (a, b) {
            return Err(Error::InvalidArgument(format!(
                "point lies on edge {:?}, not on the split edge ({a}, {b})",
                point.edge
            )));
        }
        let t = self.vertex_count();
        for s in partition {
            if let Some(&bad) = s.iter().find(|&&v| v >= t) {
                return Err(Error::IndexOutOfRange { index: bad, dim: t });
            }
        }
        let (mut g, v) = self.add_vertex(point)?;

        let mut split_any = false;
        let mut next: SimplexList = Vec::with_capacity(partition.len() + 1);
        for s in partition {
            if s.contains(&a) && s.contains(&b) {
                split_any = true;
                next.push(s.iter().map(|&x| if x == b { v } else { x }).collect());
                next.push(s.iter().map(|&x| if x == a { v } else { x }).collect());
            } else {
                next.push(s.clone());
            }
        }
        if !split_any {
            return Err(Error::EdgeNotInPartition(a, b));
        }

        g.edges = next
            .iter()
            .flat_map(|s| s.iter().enumerate().flat_map(move |(p, &x)| s[p + 1..].iter().map(move |&y| ordered(x, y))))
            .filter(|(x, y)| x != y)
            .collect();
        Ok((g, next))
    }

    /// Euclidean distance from `x` to `seg(G, U)`; infinite when there are no edges.
    pub fn distance_to_segments(&self, x: &[f64]) -> f64 {
        self.edges
            .iter()
            .map(|&(i, j)| point_segment_distance(x, &self.vertices[i], &self.vertices[j]))
            .fold(f64::INFINITY, f64::min)
    }

    /// A uniformly random point on a uniformly random edge.
    pub fn sample_segment_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<SegmentPoint> {
        if self.edges.is_empty() {
            return None;
        }
        let k = rng.random_range(0..self.edges.len());
        let (i, j) = *self.edges.iter().nth(k)?;
        SegmentPoint::on_edge(self, i, j, rng.random::<f64>()).ok()
    }
}

/// A uniformly distributed point of Δⁿ (flat Dirichlet).
pub fn random_simplex_point<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    renormalize(&mut v);
    v
}

/// Clamps negatives to zero and rescales to unit sum.
pub(crate) fn renormalize(v: &mut [f64]) {
    for x in v.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
    // Fold the residual rounding error into the largest entry.
    let s: f64 = v.iter().sum();
    if let Some(big) = v.iter_mut().max_by(|a, b| a.total_cmp(b)) {
        *big += 1.0 - s;
    }
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn point_segment_distance(x: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab: Vec<f64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
    let len2: f64 = ab.iter().map(|d| d * d).sum();
    let theta = if len2 == 0.0 {
        0.0
    } else {
        let proj: f64 = x.iter().zip(b).zip(&ab).map(|((xi, bi), d)| (xi - bi) * d).sum();
        (proj / len2).clamp(0.0, 1.0)
    };
    x.iter()
        .zip(b)
        .zip(&ab)
        .map(|((xi, bi), d)| {
            let diff = xi - (bi + theta * d);
            diff * diff
        })
        .sum::<f64>()
        .sqrt()
}

fn compositions(remaining: u32, pos: usize, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    let n = current.len();
    if pos == n - 1 {
        current[pos] = remaining;
        out.push(current.clone());
        return;
    }
    for x in (0..=remaining).rev() {
        current[pos] = x;
        compositions(remaining - x, pos + 1, current, out);
    }
}

/// `C(n, k)`, or `None` on overflow.
pub fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// A point on the segment of an edge: `point = θ u_i + (1 - θ) u_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentPoint {
    pub edge: Edge,
    pub theta: f64,
    pub point: Vec<f64>,
}

impl SegmentPoint {
    /// The point with weight `theta` on `u_i` and `1 - theta` on `u_j`.
    pub fn on_edge(g: &EmbeddedGraph, i: usize, j: usize, theta: f64) -> Result<Self> {
        let t = g.vertex_count();
        if i >= t || j >= t {
            return Err(Error::IndexOutOfRange { index: i.max(j), dim: t });
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidArgument(format!("barycentric weight {theta} outside [0, 1]")));
        }
        let mut point: Vec<f64> =
            g.vertex(i).iter().zip(g.vertex(j)).map(|(a, b)| theta * a + (1.0 - theta) * b).collect();
        renormalize(&mut point);
        let p = SegmentPoint { edge: (i, j), theta, point };
        p.validate(g)?;
        Ok(p)
    }

    /// Checks the point against the graph it claims to lie on.
    pub fn validate(&self, g: &EmbeddedGraph) -> Result<()> {
        let (i, j) = self.edge;
        let t = g.vertex_count();
        if i >= t || j >= t {
            return Err(Error::IndexOutOfRange { index: i.max(j), dim: t });
        }
        if i == j {
            return Err(Error::DiagonalPair(i));
        }
        if !g.has_edge(i, j) {
            return Err(Error::InvalidArgument(format!("({i}, {j}) is not an edge of the graph")));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidArgument(format!("barycentric weight {} outside [0, 1]", self.theta)));
        }
        check_simplex_point(g.n(), &self.point)?;
        let (ui, uj) = (g.vertex(i), g.vertex(j));
        for (k, &x) in self.point.iter().enumerate() {
            let expect = self.theta * ui[k] + (1.0 - self.theta) * uj[k];
            if (x - expect).abs() > SEGMENT_TOL {
                return Err(Error::InvalidArgument(format!("point coordinate {k} is {x}, segment gives {expect}")));
            }
        }
        Ok(())
    }
}
