//! Problem instances: random programs, standard quadratic programs, stable set
//! programs, graph families and file formats.
//!
//! Graph vertices are 0-based in memory and 1-based in DIMACS text.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::conic::{CpProblem, Sense};
use crate::matrix::SymMatrix;
use crate::{Error, Result};

/// A simple undirected graph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    vertex_count: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn new(vertex_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= vertex_count || b >= vertex_count {
                return Err(Error::IndexOutOfRange { index: a.max(b), dim: vertex_count });
            }
            if a == b {
                return Err(Error::DiagonalPair(a));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Graph { vertex_count, edges: set })
    }

    pub fn empty(n: usize) -> Self {
        Graph { vertex_count: n, edges: BTreeSet::new() }
    }

    pub fn complete(n: usize) -> Self {
        Graph { vertex_count: n, edges: (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect() }
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidArgument(format!("a cycle needs at least 3 vertices, got {n}")));
        }
        Graph::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl ExactSizeIterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == v || b == v).count()
    }

    pub fn adjacency(&self) -> SymMatrix {
        let mut a = SymMatrix::zeros(self.vertex_count);
        for &(i, j) in &self.edges {
            a.set(i, j, 1.0);
        }
        a
    }

    /// Whether `set` is pairwise non-adjacent.
    pub fn is_stable(&self, set: &[usize]) -> bool {
        set.iter().enumerate().all(|(p, &a)| set[p + 1..].iter().all(|&b| a != b && !self.has_edge(a, b)))
    }
}

/// The graph with exactly the non-edges of `g`.
pub fn complement(g: &Graph) -> Graph {
    let n = g.vertex_count;
    let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| !g.has_edge(i, j)).collect();
    Graph { vertex_count: n, edges }
}

/// `min tr(C X)` with `C = MᵀM`, `A_i = (M_i + M_iᵀ)/2` and `b_i = tr(A_i (E + nI))`.
///
/// `M`, then `M_1..M_m`, are filled row by row with standard normal draws from a
/// ChaCha8 stream seeded with `seed`.
pub fn random_instance(n: usize, m: usize, seed: u64) -> Result<CpProblem> {
    if n < 2 || m < 1 {
        return Err(Error::InvalidArgument(format!("random instance needs n >= 2 and m >= 1, got n={n}, m={m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gaussian = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect()).collect()
    };
    let mm = gaussian(&mut rng);
    let c = SymMatrix::from_fn(n, |i, j| (0..n).map(|k| mm[k][i] * mm[k][j]).sum());
    let feasible = feasible_point(n);
    let mut constraints = Vec::with_capacity(m);
    for _ in 0..m {
        let mi = gaussian(&mut rng);
        let a = SymMatrix::from_fn(n, |i, j| 0.5 * (mi[i][j] + mi[j][i]));
        let b = crate::matrix::trace_inner(&a, &feasible)?;
        constraints.push((a, b));
    }
    CpProblem::new(c, constraints, Sense::Minimize)
}

/// `E + nI`, interior to the completely positive cone and feasible for every random instance.
pub fn feasible_point(n: usize) -> SymMatrix {
    SymMatrix::from_fn(n, |i, j| if i == j { 1.0 + n as f64 } else { 1.0 })
}

/// `min tr(Q X)  s.t.  tr(E X) = 1`, whose value is `min xᵀQx` over the simplex.
pub fn encode_sqp(q: SymMatrix) -> CpProblem {
    let n = q.dim();
    CpProblem { objective: q, constraints: vec![(SymMatrix::ones(n), 1.0)], sense: Sense::Minimize }
}

/// `Q = A_G + I`; the standard quadratic program then has value `1/α(G)`.
pub fn motzkin_straus(g: &Graph) -> SymMatrix {
    let mut q = g.adjacency();
    for i in 0..g.vertex_count() {
        q.set(i, i, 1.0);
    }
    q
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SqpMode {
    /// Every entry uniform on `[0, 1]`.
    Uniform,
    /// Unit diagonal, off-diagonal entries uniform on `[0, 1]`.
    UnitDiagonal,
}

impl FromStr for SqpMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(SqpMode::Uniform),
            "unit-diagonal" | "unit" => Ok(SqpMode::UnitDiagonal),
            _ => Err(Error::InvalidArgument(format!("unknown SQP mode '{s}'"))),
        }
    }
}

/// Random symmetric `Q`; the upper triangle is drawn row by row from a ChaCha8 stream.
pub fn random_sqp(n: usize, mode: SqpMode, seed: u64) -> Result<SymMatrix> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("random SQP needs n >= 2, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = SymMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            let v = if i == j && mode == SqpMode::UnitDiagonal { 1.0 } else { rng.random::<f64>() };
            q.set(i, j, v);
        }
    }
    Ok(q)
}

/// `max tr(E X)  s.t.  tr((A_G + I) X) = 1`, whose value is `α(G)`.
pub fn encode_stable_set(g: &Graph) -> Result<CpProblem> {
    let n = g.vertex_count();
    if n == 0 {
        return Err(Error::InvalidArgument("stable set needs at least one vertex".into()));
    }
    CpProblem::new(SymMatrix::ones(n), vec![(motzkin_straus(g), 1.0)], Sense::Maximize)
}

/// Reads a graph in DIMACS edge format.
pub fn parse_dimacs(text: &str) -> Result<Graph> {
    let mut n: Option<usize> = None;
    let mut edges = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("p") => {
                if n.is_some() {
                    return Err(err("second problem line".into()));
                }
                let kind = fields.next().ok_or_else(|| err("problem line without a type".into()))?;
                if kind != "edge" {
                    return Err(err(format!("unsupported problem type '{kind}'")));
                }
                let count = fields
                    .next()
                    .and_then(|s| s.parse::<usize>().ok())
                    .ok_or_else(|| err("problem line without a vertex count".into()))?;
                fields
                    .next()
                    .and_then(|s| s.parse::<usize>().ok())
                    .ok_or_else(|| err("problem line without an edge count".into()))?;
                n = Some(count);
            }
            Some("e") => {
                let count = n.ok_or_else(|| err("edge before the problem line".into()))?;
                let mut end = || -> Result<usize> {
                    let v = fields
                        .next()
                        .and_then(|s| s.parse::<usize>().ok())
                        .ok_or_else(|| err("edge line needs two vertex numbers".into()))?;
                    if v == 0 || v > count {
                        return Err(err(format!("vertex {v} outside 1..={count}")));
                    }
                    Ok(v - 1)
                };
                let (a, b) = (end()?, end()?);
                if a == b {
                    return Err(err(format!("self-loop at vertex {}", a + 1)));
                }
                edges.push((a, b));
            }
            Some(other) => return Err(err(format!("unknown line type '{other}'"))),
            None => {}
        }
    }
    let n = n.ok_or(Error::Parse { line: 0, msg: "missing problem line".into() })?;
    Graph::new(n, edges)
}

/// Writes a graph in DIMACS edge format.
pub fn to_dimacs(g: &Graph) -> String {
    let mut out = format!("p edge {} {}\n", g.vertex_count(), g.edge_count());
    for (a, b) in g.edges() {
        let _ = writeln!(out, "e {} {}", a + 1, b + 1);
    }
    out
}

pub fn read_dimacs(path: &Path) -> Result<Graph> {
    parse_dimacs(&std::fs::read_to_string(path)?)
}

/// Graph families generated in memory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BuiltinGraph {
    Cycle(usize),
    Complete(usize),
    Empty(usize),
    /// `d`-bit words, adjacent when their Hamming distance is at least `w`.
    Hamming {
        d: usize,
        w: usize,
    },
    /// `k`-subsets of `n` points, adjacent when their characteristic vectors are at
    /// Hamming distance at least `dist`.
    Johnson {
        n: usize,
        k: usize,
        dist: usize,
    },
    /// `x ~ y` when `x - y` is a nonzero square in GF(q).
    Paley(usize),
    Icosahedron,
    /// Binary words of length `bits`, adjacent when they share a subsequence of
    /// length `bits - errors` (`1dc.64`, `2dc.128`).
    DeletionCode {
        bits: usize,
        errors: usize,
    },
    /// Binary words of length `bits`, adjacent when one adjacent transposition
    /// applied to each can make them equal (`1tc.32`).
    TranspositionCode {
        bits: usize,
    },
}

impl BuiltinGraph {
    pub fn build(&self) -> Result<Graph> {
        match *self {
            BuiltinGraph::Cycle(n) => Graph::cycle(n),
            BuiltinGraph::Complete(n) => Ok(Graph::complete(n)),
            BuiltinGraph::Empty(n) => Ok(Graph::empty(n)),
            BuiltinGraph::Hamming { d, w } => hamming(d, w),
            BuiltinGraph::Johnson { n, k, dist } => johnson(n, k, dist),
            BuiltinGraph::Paley(q) => paley(q),
            BuiltinGraph::Icosahedron => Ok(icosahedron()),
            BuiltinGraph::DeletionCode { bits, errors } => deletion_code(bits, errors),
            BuiltinGraph::TranspositionCode { bits } => transposition_code(bits),
        }
    }
}

impl FromStr for BuiltinGraph {
    type Err = Error;

    /// Accepts `cycle:5`, `pentagon`, `complete:4`, `empty:4`, `icosahedron`,
    /// `paley:13`, `paley13`, `hamming6-4`, `hamming:6:4`, `johnson8-2-4` and
    /// `johnson:8:2:4`, and the code graphs `1tc.16`, `1dc.64`, `2dc.128`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown graph '{s}'"));
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "pentagon" | "c5" => return Ok(BuiltinGraph::Cycle(5)),
            "icosahedron" => return Ok(BuiltinGraph::Icosahedron),
            _ => {}
        }
        if let Some((prefix, count)) = lower.split_once('.') {
            let count: usize = count.parse().map_err(|_| bad())?;
            if !count.is_power_of_two() || count < 2 {
                return Err(bad());
            }
            let bits = count.trailing_zeros() as usize;
            return match prefix {
                "1tc" => Ok(BuiltinGraph::TranspositionCode { bits }),
                _ => {
                    let errors = prefix.strip_suffix("dc").and_then(|e| e.parse().ok()).ok_or_else(bad)?;
                    Ok(BuiltinGraph::DeletionCode { bits, errors })
                }
            };
        }
        let split = lower.find(|c: char| c.is_ascii_digit() || c == ':').ok_or_else(bad)?;
        let (name, rest) = lower.split_at(split);
        let nums: Vec<usize> = rest
            .trim_start_matches(':')
            .split([':', '-', ','])
            .map(|t| t.parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        match (name, nums.as_slice()) {
            ("cycle", [n]) => Ok(BuiltinGraph::Cycle(*n)),
            ("complete", [n]) => Ok(BuiltinGraph::Complete(*n)),
            ("empty", [n]) => Ok(BuiltinGraph::Empty(*n)),
            ("paley", [q]) => Ok(BuiltinGraph::Paley(*q)),
            ("hamming", [d, w]) => Ok(BuiltinGraph::Hamming { d: *d, w: *w }),
            ("johnson", [n, k, dist]) => Ok(BuiltinGraph::Johnson { n: *n, k: *k, dist: *dist }),
            _ => Err(bad()),
        }
    }
}

fn hamming(d: usize, w: usize) -> Result<Graph> {
    if d == 0 || d > 20 || w == 0 {
        return Err(Error::InvalidArgument(format!("hamming graph needs 1 <= d <= 20 and w >= 1, got d={d}, w={w}")));
    }
    let n = 1usize << d;
    let edges =
        (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).filter(|&(a, b)| (a ^ b).count_ones() as usize >= w);
    Graph::new(n, edges)
}

fn johnson(n: usize, k: usize, dist: usize) -> Result<Graph> {
    if k == 0 || k > n || n > 30 {
        return Err(Error::InvalidArgument(format!("johnson graph needs 1 <= k <= n <= 30, got n={n}, k={k}")));
    }
    let subsets: Vec<u32> = (0u32..(1u32 << n)).filter(|s| s.count_ones() as usize == k).collect();
    let edges = (0..subsets.len())
        .flat_map(|a| (a + 1..subsets.len()).map(move |b| (a, b)))
        .filter(|&(a, b)| (subsets[a] ^ subsets[b]).count_ones() as usize >= dist);
    Graph::new(subsets.len(), edges.collect::<Vec<_>>())
}

fn check_bits(bits: usize) -> Result<()> {
    if bits == 0 || bits > 12 {
        return Err(Error::InvalidArgument(format!("code graphs need 1 <= bits <= 12, got {bits}")));
    }
    Ok(())
}

/// Bit `i` of `w`, counting from the most significant of `bits`.
fn bit(w: usize, i: usize, bits: usize) -> usize {
    (w >> (bits - 1 - i)) & 1
}

fn common_subsequence(a: usize, b: usize, bits: usize) -> usize {
    let mut prev = vec![0usize; bits + 1];
    for i in 0..bits {
        let mut cur = vec![0usize; bits + 1];
        for j in 0..bits {
            cur[j + 1] = if bit(a, i, bits) == bit(b, j, bits) { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        prev = cur;
    }
    prev[bits]
}

fn deletion_code(bits: usize, errors: usize) -> Result<Graph> {
    check_bits(bits)?;
    if errors == 0 || errors >= bits {
        return Err(Error::InvalidArgument(format!("deletion count {errors} must lie in 1..{bits}")));
    }
    let n = 1usize << bits;
    let edges = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .filter(|&(a, b)| common_subsequence(a, b, bits) >= bits - errors);
    Graph::new(n, edges.collect::<Vec<_>>())
}

/// `w` together with every word reached by swapping two unequal neighbouring bits.
fn transposition_ball(w: usize, bits: usize) -> Vec<usize> {
    let mut ball = vec![w];
    for i in 0..bits.saturating_sub(1) {
        if bit(w, i, bits) != bit(w, i + 1, bits) {
            ball.push(w ^ (0b11 << (bits - 2 - i)));
        }
    }
    ball
}

fn transposition_code(bits: usize) -> Result<Graph> {
    check_bits(bits)?;
    let n = 1usize << bits;
    let balls: Vec<Vec<usize>> = (0..n).map(|w| transposition_ball(w, bits)).collect();
    let edges = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .filter(|&(a, b)| balls[a].iter().any(|x| balls[b].contains(x)));
    Graph::new(n, edges.collect::<Vec<_>>())
}

fn icosahedron() -> Graph {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut pts: Vec<[f64; 3]> = Vec::with_capacity(12);
    for s1 in [-1.0, 1.0] {
        for s2 in [-phi, phi] {
            pts.push([0.0, s1, s2]);
            pts.push([s1, s2, 0.0]);
            pts.push([s2, 0.0, s1]);
        }
    }
    let dist2 = |a: &[f64; 3], b: &[f64; 3]| (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>();
    let edges = (0..12)
        .flat_map(|i| (i + 1..12).map(move |j| (i, j)))
        .filter(|&(i, j)| (dist2(&pts[i], &pts[j]) - 4.0).abs() < 1e-9);
    Graph::new(12, edges.collect::<Vec<_>>()).expect("icosahedron indices are in range")
}

/// `q = p^k` for a prime `p`.
fn prime_power(q: usize) -> Option<(usize, usize)> {
    if q < 2 {
        return None;
    }
    let p = (2..=q).find(|d| q.is_multiple_of(*d))?;
    let mut rest = q;
    let mut k = 0;
    while rest.is_multiple_of(p) {
        rest /= p;
        k += 1;
    }
    (rest == 1).then_some((p, k))
}

/// GF(p^k) as coefficient vectors modulo a monic irreducible polynomial.
struct FiniteField {
    p: usize,
    k: usize,
    /// Low coefficients of the modulus `x^k + Σ m_i x^i`.
    modulus: Vec<usize>,
}

impl FiniteField {
    fn new(p: usize, k: usize) -> Self {
        let modulus = (0..p.pow(k as u32))
            .map(|code| digits(code, p, k))
            .find(|low| {
                let mut f = low.clone();
                f.push(1);
                is_irreducible(&f, p)
            })
            .expect("an irreducible polynomial of every degree exists");
        FiniteField { p, k, modulus }
    }

    fn mul(&self, a: &[usize], b: &[usize]) -> Vec<usize> {
        let (p, k) = (self.p, self.k);
        let mut prod = vec![0usize; 2 * k];
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                prod[i + j] = (prod[i + j] + x * y) % p;
            }
        }
        for d in (k..2 * k).rev() {
            let c = prod[d];
            if c == 0 {
                continue;
            }
            prod[d] = 0;
            for (i, &m) in self.modulus.iter().enumerate() {
                prod[d - k + i] = (prod[d - k + i] + (p - m) * c) % p;
            }
        }
        prod.truncate(k);
        prod
    }
}

fn digits(mut code: usize, p: usize, k: usize) -> Vec<usize> {
    (0..k)
        .map(|_| {
            let d = code % p;
            code /= p;
            d
        })
        .collect()
}

fn undigits(v: &[usize], p: usize) -> usize {
    v.iter().rev().fold(0, |acc, &d| acc * p + d)
}

/// Remainder of `f` modulo the monic `g` over GF(p); both low-order first.
fn poly_rem(f: &[usize], g: &[usize], p: usize) -> Vec<usize> {
    let mut r = f.to_vec();
    let dg = g.len() - 1;
    while r.len() > dg {
        let c = *r.last().unwrap_or(&0);
        let shift = r.len() - 1 - dg;
        if c != 0 {
            for (i, &gi) in g.iter().enumerate() {
                r[shift + i] = (r[shift + i] + (p - gi) * c) % p;
            }
        }
        r.pop();
    }
    r
}

fn is_irreducible(f: &[usize], p: usize) -> bool {
    let deg = f.len() - 1;
    for d in 1..=deg / 2 {
        for code in 0..p.pow(d as u32) {
            let mut g = digits(code, p, d);
            g.push(1);
            if poly_rem(f, &g, p).iter().all(|&c| c == 0) {
                return false;
            }
        }
    }
    true
}

fn paley(q: usize) -> Result<Graph> {
    let (p, k) = prime_power(q)
        .filter(|_| q % 4 == 1)
        .ok_or_else(|| Error::InvalidArgument(format!("Paley graph needs a prime power q ≡ 1 (mod 4), got {q}")))?;
    if q > 10_000 {
        return Err(Error::TooLarge { what: "Paley graph order", count: q, cap: 10_000 });
    }
    let field = FiniteField::new(p, k);
    let mut square = vec![false; q];
    for code in 1..q {
        let x = digits(code, p, k);
        square[undigits(&field.mul(&x, &x), p)] = true;
    }
    let mut edges = Vec::new();
    for a in 0..q {
        let xa = digits(a, p, k);
        for b in a + 1..q {
            let xb = digits(b, p, k);
            let diff: Vec<usize> = xa.iter().zip(&xb).map(|(u, v)| (u + p - v) % p).collect();
            if square[undigits(&diff, p)] {
                edges.push((a, b));
            }
        }
    }
    Graph::new(q, edges)
}

/// On-disk form of a [`CpProblem`]: upper triangles stored row by row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InstanceFile {
    pub n: usize,
    pub m: usize,
    pub sense: Sense,
    #[serde(rename = "C")]
    pub c: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

fn upper_row_major(m: &SymMatrix) -> Vec<f64> {
    let n = m.dim();
    (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).map(|(i, j)| m.get(i, j)).collect()
}

fn from_upper_row_major(n: usize, v: &[f64], what: &str) -> Result<SymMatrix> {
    let len = n * (n + 1) / 2;
    if v.len() != len {
        return Err(Error::Parse { line: 0, msg: format!("{what} has {} entries, expected {len}", v.len()) });
    }
    let mut out = SymMatrix::zeros(n);
    let mut it = v.iter();
    for i in 0..n {
        for j in i..n {
            out.set(i, j, *it.next().expect("length checked"));
        }
    }
    Ok(out)
}

impl InstanceFile {
    pub fn from_problem(p: &CpProblem) -> Self {
        InstanceFile {
            n: p.n(),
            m: p.m(),
            sense: p.sense,
            c: upper_row_major(&p.objective),
            a: p.constraints.iter().map(|(a, _)| upper_row_major(a)).collect(),
            b: p.rhs(),
        }
    }

    pub fn to_problem(&self) -> Result<CpProblem> {
        if self.a.len() != self.m || self.b.len() != self.m {
            return Err(Error::Parse {
                line: 0,
                msg: format!("m = {} but {} matrices and {} right-hand sides", self.m, self.a.len(), self.b.len()),
            });
        }
        let c = from_upper_row_major(self.n, &self.c, "C")?;
        let constraints = self
            .a
            .iter()
            .zip(&self.b)
            .enumerate()
            .map(|(i, (a, &b))| Ok((from_upper_row_major(self.n, a, &format!("A[{i}]"))?, b)))
            .collect::<Result<Vec<_>>>()?;
        CpProblem::new(c, constraints, self.sense)
    }
}

pub fn instance_to_json(p: &CpProblem) -> Result<String> {
    Ok(serde_json::to_string_pretty(&InstanceFile::from_problem(p))?)
}

pub fn instance_from_json(text: &str) -> Result<CpProblem> {
    let file: InstanceFile = serde_json::from_str(text)?;
    file.to_problem()
}

pub fn read_instance(path: &Path) -> Result<CpProblem> {
    instance_from_json(&std::fs::read_to_string(path)?)
}

pub fn write_instance(path: &Path, p: &CpProblem) -> Result<()> {
    std::fs::write(path, instance_to_json(p)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::trace_inner;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn random_instance_shape() {
        let p = random_instance(10, 5, 1).unwrap();
        assert_eq!(p.m(), 5);
        assert_eq!(p.n(), 10);
        assert!(p.constraints.iter().all(|(a, _)| a.dim() == 10));
        assert_eq!(p.sense, Sense::Minimize);
    }

    #[test]
    fn rhs_formula_on_identity() {
        let a = SymMatrix::identity(2);
        assert_eq!(trace_inner(&a, &feasible_point(2)).unwrap(), 6.0);
    }

    #[test]
    fn random_instance_reproducible() {
        assert_eq!(random_instance(6, 3, 42).unwrap(), random_instance(6, 3, 42).unwrap());
        assert_ne!(random_instance(6, 3, 42).unwrap(), random_instance(6, 3, 43).unwrap());
    }

    #[test]
    fn random_objective_is_gram() {
        // C = MᵀM has a nonnegative quadratic form
        let p = random_instance(5, 1, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let x: Vec<f64> = (0..5).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            assert!(p.objective.bilinear(&x, &x) >= -1e-12);
        }
    }

    #[test]
    fn sqp_encoding() {
        let p = encode_sqp(SymMatrix::identity(3));
        assert_eq!(p.m(), 1);
        assert_eq!(p.constraints[0].0, SymMatrix::ones(3));
        assert_eq!(p.rhs(), vec![1.0]);
    }

    #[test]
    fn unit_diagonal_sqp() {
        let q = random_sqp(8, SqpMode::UnitDiagonal, 5).unwrap();
        assert!((0..8).all(|i| q.get(i, i) == 1.0));
        assert!(q.packed().iter().all(|&x| (0.0..=1.0).contains(&x)));
        assert_eq!(q, random_sqp(8, SqpMode::UnitDiagonal, 5).unwrap());
        let u = random_sqp(8, SqpMode::Uniform, 5).unwrap();
        assert!((0..8).any(|i| u.get(i, i) != 1.0));
    }

    #[test]
    fn stable_set_encoding() {
        let p = encode_stable_set(&Graph::cycle(5).unwrap()).unwrap();
        assert_eq!(p.sense, Sense::Maximize);
        assert_eq!(p.m(), 1);
        let q = &p.constraints[0].0;
        assert_eq!(q.get(0, 1), 1.0);
        assert_eq!(q.get(0, 2), 0.0);
        assert_eq!(q.get(3, 3), 1.0);
        // a stable set's normalized indicator attains its size
        let x = SymMatrix::outer(&[1.0, 0.0, 1.0, 0.0, 0.0]).scaled(0.5);
        assert_eq!(trace_inner(q, &x).unwrap(), 1.0);
        assert_eq!(trace_inner(&p.objective, &x).unwrap(), 2.0);
    }

    #[test]
    fn complement_basics() {
        assert_eq!(complement(&Graph::complete(3)), Graph::empty(3));
        assert_eq!(complement(&Graph::empty(3)), Graph::complete(3));
        let c5 = Graph::cycle(5).unwrap();
        assert_eq!(complement(&complement(&c5)), c5);
        // C₅ is self-complementary up to relabeling: also 5 edges
        assert_eq!(complement(&c5).edge_count(), 5);
    }

    #[test]
    fn dimacs_path() {
        let g = parse_dimacs("p edge 3 2\ne 1 2\ne 2 3").unwrap();
        assert_eq!(g, Graph::new(3, [(0, 1), (1, 2)]).unwrap());
    }

    #[test]
    fn dimacs_duplicates() {
        let g = parse_dimacs("c test\np edge 2 2\ne 1 2\ne 2 1\n").unwrap();
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn dimacs_errors() {
        assert!(matches!(parse_dimacs("p col 3 2"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_dimacs("e 1 2"), Err(Error::Parse { .. })));
        assert!(matches!(parse_dimacs("p edge 2 1\ne 1 3"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_dimacs("p edge 2 1\ne 0 1"), Err(Error::Parse { .. })));
        assert!(matches!(parse_dimacs("p edge 2 1\ne 1 1"), Err(Error::Parse { .. })));
        assert!(matches!(parse_dimacs("p edge x 1"), Err(Error::Parse { .. })));
        assert!(matches!(parse_dimacs("c nothing"), Err(Error::Parse { .. })));
    }

    #[test]
    fn builtin_counts() {
        assert_eq!(BuiltinGraph::Cycle(5).build().unwrap().edge_count(), 5);
        let ico = BuiltinGraph::Icosahedron.build().unwrap();
        assert_eq!((ico.vertex_count(), ico.edge_count()), (12, 30));
        assert!((0..12).all(|v| ico.degree(v) == 5));
        let h = "hamming6-4".parse::<BuiltinGraph>().unwrap().build().unwrap();
        assert_eq!((h.vertex_count(), h.edge_count()), (64, 704));
        assert_eq!(complement(&h).edge_count(), 1312);
        let h2 = "hamming6-2".parse::<BuiltinGraph>().unwrap().build().unwrap();
        assert_eq!(h2.edge_count(), 1824);
        let j = "johnson8-2-4".parse::<BuiltinGraph>().unwrap().build().unwrap();
        assert_eq!((j.vertex_count(), j.edge_count()), (28, 210));
        let j4 = "johnson8-4-4".parse::<BuiltinGraph>().unwrap().build().unwrap();
        assert_eq!((j4.vertex_count(), j4.edge_count()), (70, 1855));
        let j16 = "johnson16-2-4".parse::<BuiltinGraph>().unwrap().build().unwrap();
        assert_eq!((j16.vertex_count(), j16.edge_count()), (120, 5460));
    }

    #[test]
    fn code_graph_counts() {
        let count = |name: &str| {
            let g = name.parse::<BuiltinGraph>().unwrap().build().unwrap();
            (g.vertex_count(), g.edge_count())
        };
        assert_eq!(count("1tc.16"), (16, 22));
        assert_eq!(count("1tc.32"), (32, 68));
        assert_eq!(count("1dc.64"), (64, 543));
        assert_eq!(count("1dc.128"), (128, 1471));
        assert_eq!(count("2dc.128"), (128, 5173));
    }

    #[test]
    fn code_graph_adjacency() {
        // 0110 and 1010 differ by swapping the first two bits
        let t = BuiltinGraph::TranspositionCode { bits: 4 }.build().unwrap();
        assert!(t.has_edge(0b0110, 0b1010));
        // 0110 -> 0101 and 1001 -> 0101 meet after one swap each
        assert!(t.has_edge(0b0110, 0b1001));
        assert!(!t.has_edge(0b0000, 0b1111));
        // 1100 and 0110 share the subsequence 110
        let d = BuiltinGraph::DeletionCode { bits: 4, errors: 1 }.build().unwrap();
        assert!(d.has_edge(0b1100, 0b0110));
        assert!(!d.has_edge(0b0000, 0b0011));
    }

    #[test]
    fn builtin_names() {
        assert_eq!("pentagon".parse::<BuiltinGraph>().unwrap(), BuiltinGraph::Cycle(5));
        assert_eq!("cycle:7".parse::<BuiltinGraph>().unwrap(), BuiltinGraph::Cycle(7));
        assert_eq!("paley:13".parse::<BuiltinGraph>().unwrap(), BuiltinGraph::Paley(13));
        assert_eq!("johnson:8:2:4".parse::<BuiltinGraph>().unwrap(), BuiltinGraph::Johnson { n: 8, k: 2, dist: 4 });
        assert_eq!("1dc.64".parse::<BuiltinGraph>().unwrap(), BuiltinGraph::DeletionCode { bits: 6, errors: 1 });
        assert_eq!("2dc.128".parse::<BuiltinGraph>().unwrap(), BuiltinGraph::DeletionCode { bits: 7, errors: 2 });
        assert_eq!("1tc.32".parse::<BuiltinGraph>().unwrap(), BuiltinGraph::TranspositionCode { bits: 5 });
        assert!("1tc.30".parse::<BuiltinGraph>().is_err());
        assert!("xdc.64".parse::<BuiltinGraph>().is_err());
        assert!("hamming6".parse::<BuiltinGraph>().is_err());
        assert!("petersen".parse::<BuiltinGraph>().is_err());
    }

    #[test]
    fn paley_prime() {
        let g = paley(13).unwrap();
        assert_eq!(g.edge_count(), 13 * 6 / 2);
        assert!((0..13).all(|v| g.degree(v) == 6));
        // squares mod 5 are {1, 4}: Paley(5) is C₅
        let p5 = paley(5).unwrap();
        assert!((0..5).all(|v| p5.degree(v) == 2));
        assert!(p5.has_edge(0, 1) && p5.has_edge(0, 4) && !p5.has_edge(0, 2));
    }

    #[test]
    fn paley_prime_power() {
        // Paley(9) is the 3×3 rook's graph: 4-regular, 18 edges, self-complementary
        let g = paley(9).unwrap();
        assert_eq!(g.edge_count(), 18);
        assert!((0..9).all(|v| g.degree(v) == 4));
        assert_eq!(complement(&g).edge_count(), 18);
        let g25 = paley(25).unwrap();
        assert!((0..25).all(|v| g25.degree(v) == 12));
    }

    #[test]
    fn paley_rejects() {
        assert!(paley(7).is_err());
        assert!(paley(21).is_err());
        assert!(paley(1).is_err());
    }

    #[test]
    fn instance_round_trip() {
        let p = random_instance(4, 2, 11).unwrap();
        let text = instance_to_json(&p).unwrap();
        assert_eq!(instance_from_json(&text).unwrap(), p);
        let file: InstanceFile = serde_json::from_str(&text).unwrap();
        assert_eq!(file.c.len(), 10);
        assert_eq!(file.c[1], p.objective.get(0, 1));
        assert_eq!(file.c[4], p.objective.get(1, 1));
    }

    #[test]
    fn instance_rejects_bad_lengths() {
        let text = r#"{"n": 2, "m": 1, "sense": "minimize", "C": [1, 0], "A": [[1, 0, 1]], "b": [1]}"#;
        assert!(matches!(instance_from_json(text), Err(Error::Parse { .. })));
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (1usize..12).prop_flat_map(|n| {
            proptest::collection::vec(any::<bool>(), n * (n - 1) / 2).prop_map(move |bits| {
                let pairs = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
                Graph::new(n, pairs.zip(bits).filter(|(_, b)| *b).map(|(e, _)| e)).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn dimacs_round_trip(g in arb_graph()) {
            prop_assert_eq!(parse_dimacs(&to_dimacs(&g)).unwrap(), g);
        }

        #[test]
        fn complement_involution(g in arb_graph()) {
            let c = complement(&g);
            let n = g.vertex_count();
            prop_assert_eq!(c.edge_count() + g.edge_count(), n * (n - 1) / 2);
            prop_assert_eq!(complement(&c), g);
        }

        #[test]
        fn random_instances_admit_interior_point(n in 2usize..8, m in 1usize..5, seed in any::<u64>()) {
            let p = random_instance(n, m, seed).unwrap();
            prop_assert!(p.equality_residual(&feasible_point(n)).unwrap() <= 1e-9);
        }
    }
}
