//! Delay graphs, delay assignments and the compatibility test between a
//! controller structure and a delay graph.
//!
//! Vertices are 0-based in the API and 1-based (`v1 … vN`) in text and
//! display. The controller input is pinned to `v1`, the output to `vN`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use crate::delay::Delay;
use crate::error::{Error, Result};
use crate::structure_graph::ControllerStructure;

/// Directed graph of sites with integer edge delays; vertex 0 is the sensor,
/// vertex `n − 1` the actuator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayGraph {
    n: usize,
    edges: Vec<(usize, usize, u32)>,
}

impl DelayGraph {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(crate::error::invalid("n", "delay graph needs at least one vertex"));
        }
        Ok(Self { n, edges: Vec::new() })
    }

    pub fn with_edges(n: usize, edges: &[(usize, usize, u32)]) -> Result<Self> {
        let mut g = Self::new(n)?;
        for &(i, j, w) in edges {
            g.add_edge(i, j, w)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, from: usize, to: usize, delay: u32) -> Result<()> {
        for v in [from, to] {
            if v >= self.n {
                return Err(Error::VertexOutOfRange { vertex: v + 1, n: self.n });
            }
        }
        self.edges.push((from, to, delay));
        Ok(())
    }

    /// Sensor → nervous system → muscle, one step each way.
    pub fn muscle() -> Self {
        Self::with_edges(3, &[(0, 1, 1), (1, 2, 1)]).expect("static graph")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize, u32)] {
        &self.edges
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("vertex {}\n", self.n);
        for (i, j, w) in &self.edges {
            writeln!(s, "edge {} {} {w}", i + 1, j + 1).unwrap();
        }
        s
    }

    /// Reads `vertex N` lines (the largest `N` sets the vertex count) and
    /// `edge i j w` lines with 1-based endpoints.
    pub fn parse(text: &str) -> Result<Self> {
        let mut n = 0usize;
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let err = |message: String| Error::Parse { line, message };
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let toks: Vec<&str> = body.split_whitespace().collect();
            let num = |t: &str| t.parse::<usize>().map_err(|_| err(format!("`{t}` is not a non-negative integer")));
            match toks.as_slice() {
                ["vertex", v] => n = n.max(num(v)?),
                ["edge", i, j, w] => {
                    let (i, j) = (num(i)?, num(j)?);
                    let w = u32::try_from(num(w)?).map_err(|_| err("edge delay too large".into()))?;
                    if i == 0 || j == 0 {
                        return Err(err("vertices are numbered from 1".into()));
                    }
                    edges.push((line, i - 1, j - 1, w));
                }
                _ => return Err(err(format!("unrecognized line `{body}`"))),
            }
        }
        let mut g = Self::new(n).map_err(|_| Error::Parse {
            line: 0,
            message: "graph declares no vertices".into(),
        })?;
        for (line, i, j, w) in edges {
            g.add_edge(i, j, w).map_err(|e| Error::Parse { line, message: e.to_string() })?;
        }
        Ok(g)
    }
}

/// Square matrix of delays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayMatrix {
    n: usize,
    data: Vec<Delay>,
}

impl DelayMatrix {
    pub fn filled(n: usize, value: Delay) -> Self {
        Self {
            n,
            data: vec![value; n * n],
        }
    }

    pub fn from_rows(rows: &[&[Delay]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch("delay matrix rows must be square".into()));
        }
        Ok(Self {
            n,
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Delay {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, d: Delay) {
        self.data[i * self.n + j] = d;
    }

    pub fn rows(&self) -> Vec<Vec<Delay>> {
        self.data.chunks(self.n).map(<[Delay]>::to_vec).collect()
    }
}

impl fmt::Display for DelayMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.data.chunks(self.n) {
            let cells: Vec<String> = row
                .iter()
                .map(|d| match d {
                    Delay::Finite(v) => format!("{v:>3}"),
                    Delay::Infinite => "  ∞".to_string(),
                })
                .collect();
            writeln!(f, "[{} ]", cells.join(""))?;
        }
        Ok(())
    }
}

/// All-pairs fastest delays (min-plus closure) of the graph.
pub fn closure(g: &DelayGraph) -> DelayMatrix {
    let n = g.n;
    let mut e = DelayMatrix::filled(n, Delay::Infinite);
    for i in 0..n {
        e.set(i, i, Delay::ZERO);
    }
    for &(i, j, w) in &g.edges {
        if i != j && Delay::Finite(w) < e.get(i, j) {
            e.set(i, j, Delay::Finite(w));
        }
    }
    for k in 0..n {
        for i in 0..n {
            let ik = e.get(i, k);
            if ik == Delay::Infinite {
                continue;
            }
            for j in 0..n {
                let via = ik + e.get(k, j);
                if via < e.get(i, j) {
                    e.set(i, j, via);
                }
            }
        }
    }
    e
}

/// Map from signal name to vertex (0-based).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DelayAssignment {
    map: BTreeMap<String, usize>,
}

impl DelayAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn assign(&mut self, signal: impl Into<String>, vertex: usize) {
        self.map.insert(signal.into(), vertex);
    }

    pub fn with(mut self, signal: impl Into<String>, vertex: usize) -> Self {
        self.assign(signal, vertex);
        self
    }

    pub fn vertex_of(&self, signal: &str) -> Option<usize> {
        self.map.get(signal).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.map.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Signals on each vertex, for display.
    pub fn by_vertex(&self, n: usize) -> Vec<Vec<&str>> {
        let mut out = vec![Vec::new(); n];
        for (s, v) in self.iter() {
            if v < n {
                out[v].push(s);
            }
        }
        out
    }
}

impl fmt::Display for DelayAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (s, v) in self.iter() {
            writeln!(f, "{s} -> v{}", v + 1)?;
        }
        Ok(())
    }
}

/// Vertex index of every signal of `s` (in block order), checking totality,
/// range and the input/output pins.
fn resolve(s: &ControllerStructure, a: &DelayAssignment, n: usize) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(crate::error::invalid("n", "delay graph needs at least one vertex"));
    }
    let vertices = s
        .blocks()
        .iter()
        .map(|b| {
            let v = a.vertex_of(&b.id).ok_or_else(|| Error::Unassigned(b.id.clone()))?;
            if v >= n {
                return Err(Error::VertexOutOfRange { vertex: v + 1, n });
            }
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    for (sig, expected) in [(s.input(), 0), (s.output(), n - 1)] {
        let got = vertices[s.signal_index(sig)?];
        if got != expected {
            return Err(Error::PinViolation {
                signal: sig.to_string(),
                expected: expected + 1,
                got: got + 1,
            });
        }
    }
    Ok(vertices)
}

/// `Ẽ_ij`: fastest path from a signal on vertex `i` to a signal on vertex
/// `j` whose intermediate signals stay on `i` or `j`. The diagonal is 0.
pub fn controller_delay_matrix(s: &ControllerStructure, a: &DelayAssignment, n: usize) -> Result<DelayMatrix> {
    let vertex = resolve(s, a, n)?;
    let mut e = DelayMatrix::filled(n, Delay::Infinite);
    for i in 0..n {
        e.set(i, i, Delay::ZERO);
        let sources: Vec<usize> = (0..vertex.len()).filter(|&k| vertex[k] == i).collect();
        if sources.is_empty() {
            continue;
        }
        for j in (0..n).filter(|&j| j != i) {
            let dist = s.fastest_from(&sources, |k| vertex[k] == i || vertex[k] == j);
            let best = (0..vertex.len())
                .filter(|&k| vertex[k] == j)
                .map(|k| dist[k])
                .min()
                .unwrap_or(Delay::Infinite);
            e.set(i, j, best);
        }
    }
    Ok(e)
}

/// Like [`controller_delay_matrix`] but over unrestricted paths, so
/// `Ẽ_ij = min_{p on i, q on j} min_path_delay(p, q)`.
pub fn all_paths_delay_matrix(s: &ControllerStructure, a: &DelayAssignment, n: usize) -> Result<DelayMatrix> {
    let vertex = resolve(s, a, n)?;
    let mut e = DelayMatrix::filled(n, Delay::Infinite);
    for i in 0..n {
        e.set(i, i, Delay::ZERO);
        let sources: Vec<usize> = (0..vertex.len()).filter(|&k| vertex[k] == i).collect();
        if sources.is_empty() {
            continue;
        }
        let dist = s.fastest_from(&sources, |_| true);
        for (k, &d) in dist.iter().enumerate() {
            let j = vertex[k];
            if j != i && d < e.get(i, j) {
                e.set(i, j, d);
            }
        }
    }
    Ok(e)
}

/// `Ẽ_ij ≥ E_ij` for every pair.
pub fn is_assignment_compatible(e_tilde: &DelayMatrix, e: &DelayMatrix) -> Result<bool> {
    if e_tilde.n != e.n {
        return Err(Error::DimensionMismatch(format!(
            "controller delay matrix is {0}x{0}, graph matrix is {1}x{1}",
            e_tilde.n, e.n
        )));
    }
    Ok(e_tilde.data.iter().zip(&e.data).all(|(t, g)| t >= g))
}

/// Entries `(i, j)` where `Ẽ_ij < E_ij`.
pub fn violations(e_tilde: &DelayMatrix, e: &DelayMatrix) -> Result<Vec<(usize, usize)>> {
    if e_tilde.n != e.n {
        return Err(Error::DimensionMismatch("matrix sizes differ".into()));
    }
    let n = e.n;
    Ok((0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| e_tilde.get(i, j) < e.get(i, j))
        .collect())
}

/// Result of the exhaustive assignment search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub witness: Option<DelayAssignment>,
    /// Partial assignments examined.
    pub visited: u64,
    /// For rejected partial assignments, the `(i, j)` entry that failed
    /// first, with counts.
    pub rejections: BTreeMap<(usize, usize), u64>,
}

struct Search<'a> {
    e: &'a DelayMatrix,
    n: usize,
    order: Vec<usize>,
    /// Per signal: (other signal, delay, signal is the edge source).
    adj: Vec<Vec<(usize, u32, bool)>>,
    vertex: Vec<Option<usize>>,
    visited: u64,
    rejections: BTreeMap<(usize, usize), u64>,
}

impl Search<'_> {
    /// First violated edge constraint between `sig` and assigned neighbors.
    fn conflict(&self, sig: usize, v: usize) -> Option<(usize, usize)> {
        for &(other, w, outgoing) in &self.adj[sig] {
            let Some(ov) = self.vertex[other] else { continue };
            let (from, to) = if outgoing { (v, ov) } else { (ov, v) };
            if Delay::Finite(w) < self.e.get(from, to) {
                return Some((from, to));
            }
        }
        None
    }

    fn run(&mut self, depth: usize) -> bool {
        let Some(&sig) = self.order.get(depth) else {
            return true;
        };
        for v in 0..self.n {
            self.visited += 1;
            if let Some(bad) = self.conflict(sig, v) {
                *self.rejections.entry(bad).or_default() += 1;
                continue;
            }
            self.vertex[sig] = Some(v);
            if self.run(depth + 1) {
                return true;
            }
            self.vertex[sig] = None;
        }
        false
    }
}

/// Exhaustive depth-first search over assignments of the free signals
/// (sorted by name, vertices tried in ascending order), pruning a branch as
/// soon as one structure edge `p → q` carries less delay than
/// `E[v(p)][v(q)]`. The first assignment found is the lexicographically
/// smallest compatible one.
///
/// Since `E` is a min-plus closure, edge-local checks are equivalent to
/// `Ẽ ≥ E`: any path decomposes into cross-vertex hops whose delays add up
/// to at least the closure distance.
pub fn search_assignments(s: &ControllerStructure, g: &DelayGraph) -> SearchOutcome {
    let e = closure(g);
    let n = g.n();
    let count = s.len();
    let mut adj: Vec<Vec<(usize, u32, bool)>> = vec![Vec::new(); count];
    for (i, j, w) in s.indexed_edges() {
        adj[i].push((j, w, true));
        adj[j].push((i, w, false));
    }
    let input = s.signal_index(s.input()).expect("input exists");
    let output = s.signal_index(s.output()).expect("output exists");
    let mut outcome = SearchOutcome {
        witness: None,
        visited: 0,
        rejections: BTreeMap::new(),
    };
    if input == output && n > 1 {
        return outcome;
    }
    let mut vertex = vec![None; count];
    vertex[input] = Some(0);
    vertex[output] = Some(n - 1);
    let mut names: Vec<(&str, usize)> = s.blocks().iter().enumerate().map(|(i, b)| (b.id.as_str(), i)).collect();
    names.sort_unstable();
    let order: Vec<usize> = names
        .into_iter()
        .map(|(_, i)| i)
        .filter(|&i| i != input && i != output)
        .collect();
    let mut search = Search {
        e: &e,
        n,
        order,
        adj,
        vertex,
        visited: 0,
        rejections: BTreeMap::new(),
    };
    // Pinned pair, e.g. a direct input → output edge.
    if let Some(bad) = search.conflict(output, n - 1) {
        *search.rejections.entry(bad).or_default() += 1;
        outcome.rejections = search.rejections;
        return outcome;
    }
    let found = search.run(0);
    outcome.visited = search.visited;
    outcome.rejections = std::mem::take(&mut search.rejections);
    if found {
        let mut a = DelayAssignment::new();
        for (b, v) in s.blocks().iter().zip(&search.vertex) {
            a.assign(b.id.clone(), v.expect("complete assignment"));
        }
        outcome.witness = Some(a);
    }
    outcome
}

pub fn find_compatible_assignment(s: &ControllerStructure, g: &DelayGraph) -> Option<DelayAssignment> {
    search_assignments(s, g).witness
}

/// Outcome of checking several structures of one controller.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerVerdict {
    pub compatible: bool,
    /// Index of the first compatible structure and its assignment.
    pub witness: Option<(usize, DelayAssignment)>,
}

/// A controller is compatible if any of its candidate structures is.
pub fn is_controller_compatible(candidates: &[ControllerStructure], g: &DelayGraph) -> ControllerVerdict {
    for (i, s) in candidates.iter().enumerate() {
        if let Some(a) = find_compatible_assignment(s, g) {
            return ControllerVerdict {
                compatible: true,
                witness: Some((i, a)),
            };
        }
    }
    ControllerVerdict {
        compatible: false,
        witness: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delayed_lqr::OptimalGains;
    use crate::realization::{controllable_canonical, observable_canonical};
    use crate::structure_graph::{ifp_structure, relay_structure, series_named, structure_of, Block, BlockKind};
    use crate::transfer_fn::{decompose, DecompositionParams, RationalTransferFunction};
    use Delay::{Finite as F, Infinite as INF};

    fn gains() -> OptimalGains {
        OptimalGains::from_vec(vec![-0.048, -0.606, -0.368]).unwrap()
    }

    fn decomposed(p: DecompositionParams) -> ControllerStructure {
        let g = RationalTransferFunction::new(&[-0.048], &[1.0, 0.606, 0.368]).unwrap();
        let d = decompose(&g, p).unwrap();
        series_named(&[
            ("g1", &relay_structure(p.c1, p.eps1).unwrap()),
            ("g2", &structure_of(&controllable_canonical(&d.g2).unwrap()).unwrap()),
            ("g3", &relay_structure(p.c3, p.eps3).unwrap()),
        ])
        .unwrap()
    }

    #[test]
    fn muscle_closure() {
        let e = closure(&DelayGraph::muscle());
        let expected = DelayMatrix::from_rows(&[&[F(0), F(1), F(2)], &[INF, F(0), F(1)], &[INF, INF, F(0)]]).unwrap();
        assert_eq!(e, expected);
        assert_eq!(closure(&DelayGraph::new(1).unwrap()).rows(), vec![vec![F(0)]]);
        let apart = closure(&DelayGraph::new(2).unwrap());
        assert_eq!(apart.get(0, 1), INF);
        assert_eq!(apart.get(1, 0), INF);
    }

    #[test]
    fn closure_takes_fastest_route() {
        let g = DelayGraph::with_edges(3, &[(0, 2, 5), (0, 1, 1), (1, 2, 1), (0, 2, 4)]).unwrap();
        assert_eq!(closure(&g).get(0, 2), F(2));
        assert!(DelayGraph::with_edges(2, &[(0, 2, 1)]).is_err());
    }

    #[test]
    fn decomposed_witness_matrix() {
        let s = decomposed(DecompositionParams::default());
        let g = DelayGraph::muscle();
        let a = find_compatible_assignment(&s, &g).expect("compatible");
        let et = controller_delay_matrix(&s, &a, 3).unwrap();
        let expected = DelayMatrix::from_rows(&[&[F(0), F(1), INF], &[INF, F(0), F(1)], &[INF, INF, F(0)]]).unwrap();
        assert_eq!(et, expected);
        assert!(is_assignment_compatible(&et, &closure(&g)).unwrap());
        // The unrestricted version sees the two-hop path v1 → v3.
        let full = all_paths_delay_matrix(&s, &a, 3).unwrap();
        assert_eq!(full.get(0, 2), F(2));
        assert!(is_assignment_compatible(&full, &closure(&g)).unwrap());
        // Input side on v1, relay internals of G3 on v3, the rest on v2.
        assert_eq!(a.vertex_of("g1.u"), Some(0));
        assert_eq!(a.vertex_of("g1.c"), Some(0));
        assert_eq!(a.vertex_of("g1.x"), Some(1));
        assert_eq!(a.vertex_of("g3.c"), Some(1));
        assert_eq!(a.vertex_of("g3.x"), Some(2));
    }

    #[test]
    fn decomposed_with_relay_poles_still_compatible() {
        let s = decomposed(DecompositionParams::new(1.5, -0.5, 0.4, -0.3).unwrap());
        let a = find_compatible_assignment(&s, &DelayGraph::muscle()).expect("compatible");
        let et = controller_delay_matrix(&s, &a, 3).unwrap();
        assert_eq!(et.get(0, 1), F(1));
        assert_eq!(et.get(1, 2), F(1));
        assert_eq!(et.get(0, 2), INF);
    }

    #[test]
    fn state_space_relay_with_pole_is_incompatible() {
        // The adder of x(t+1) = εx + cu sits before the delay, pulling the
        // loop onto the input vertex.
        let p = DecompositionParams::new(1.0, 1.0, 0.4, 0.0).unwrap();
        let g = RationalTransferFunction::new(&[-0.048], &[1.0, 0.606, 0.368]).unwrap();
        let d = decompose(&g, p).unwrap();
        let s = series_named(&[
            ("g1", &structure_of(&crate::realization::first_order_stage(p.c1, p.eps1).unwrap()).unwrap()),
            ("g2", &structure_of(&controllable_canonical(&d.g2).unwrap()).unwrap()),
            ("g3", &relay_structure(p.c3, p.eps3).unwrap()),
        ])
        .unwrap();
        assert!(find_compatible_assignment(&s, &DelayGraph::muscle()).is_none());
    }

    #[test]
    fn ifp_incompatible() {
        let s = ifp_structure(&gains()).unwrap();
        let out = search_assignments(&s, &DelayGraph::muscle());
        assert!(out.witness.is_none());
        assert!(out.visited > 0);
        assert!(!out.rejections.is_empty());
    }

    #[test]
    fn ifp_case_analysis() {
        // Gains drawn inside the adder, as in the block diagram.
        let s = ifp_structure(&gains()).unwrap();
        let e = closure(&DelayGraph::muscle());
        let reasons = [(0, (2, 0)), (1, (2, 1)), (2, (0, 2))];
        for (mu_vertex, reason) in reasons {
            for gamma in 0..3 {
                let a = DelayAssignment::new()
                    .with("x", 0)
                    .with("u", 2)
                    .with("mu", mu_vertex)
                    .with("k0", mu_vertex)
                    .with("k1", mu_vertex)
                    .with("k2", mu_vertex)
                    .with("gamma", gamma);
                let et = controller_delay_matrix(&s, &a, 3).unwrap();
                assert_eq!(et.get(reason.0, reason.1), F(0));
                assert!(violations(&et, &e).unwrap().contains(&reason));
                assert!(!is_assignment_compatible(&et, &e).unwrap());
            }
        }
    }

    #[test]
    fn ifp_mu_on_actuator_gives_zero_e13() {
        let s = ifp_structure(&gains()).unwrap();
        let a = DelayAssignment::new()
            .with("x", 0)
            .with("k0", 0)
            .with("k1", 2)
            .with("k2", 2)
            .with("mu", 2)
            .with("gamma", 1)
            .with("u", 2);
        let et = controller_delay_matrix(&s, &a, 3).unwrap();
        assert_eq!(et.get(0, 2), F(0));
    }

    #[test]
    fn compatibility_check_examples() {
        let e = closure(&DelayGraph::muscle());
        let good = DelayMatrix::from_rows(&[&[F(0), F(1), INF], &[INF, F(0), F(1)], &[INF, INF, F(0)]]).unwrap();
        assert!(is_assignment_compatible(&good, &e).unwrap());
        let mut bad = good.clone();
        bad.set(0, 2, F(0));
        assert!(!is_assignment_compatible(&bad, &e).unwrap());
        assert_eq!(violations(&bad, &e).unwrap(), vec![(0, 2)]);
        let zero = DelayMatrix::filled(3, F(0));
        assert!(is_assignment_compatible(&bad, &zero).unwrap());
        assert!(is_assignment_compatible(&DelayMatrix::filled(2, F(0)), &e).is_err());
    }

    #[test]
    fn assignment_errors() {
        let s = ifp_structure(&gains()).unwrap();
        let partial = DelayAssignment::new().with("x", 0).with("u", 2);
        assert!(matches!(controller_delay_matrix(&s, &partial, 3), Err(Error::Unassigned(_))));
        let mut all = DelayAssignment::new();
        for sig in s.signals() {
            all.assign(sig, 1);
        }
        assert!(matches!(controller_delay_matrix(&s, &all, 3), Err(Error::PinViolation { .. })));
        all.assign("x", 7);
        assert!(matches!(
            controller_delay_matrix(&s, &all, 3),
            Err(Error::VertexOutOfRange { .. })
        ));
    }

    #[test]
    fn single_vertex_graph() {
        let s = ifp_structure(&gains()).unwrap();
        let g = DelayGraph::new(1).unwrap();
        let a = find_compatible_assignment(&s, &g).expect("no constraints");
        assert_eq!(controller_delay_matrix(&s, &a, 1).unwrap().rows(), vec![vec![F(0)]]);
    }

    #[test]
    fn zero_weight_complete_graph_accepts_everything() {
        let mut edges = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    edges.push((i, j, 0));
                }
            }
        }
        let g = DelayGraph::with_edges(3, &edges).unwrap();
        assert!(find_compatible_assignment(&ifp_structure(&gains()).unwrap(), &g).is_some());
    }

    #[test]
    fn controller_level_verdicts() {
        let g = RationalTransferFunction::new(&[-0.048], &[1.0, 0.606, 0.368]).unwrap();
        let p = DecompositionParams::default();
        let d = decompose(&g, p).unwrap();
        let ocr = series_named(&[
            ("g1", &relay_structure(p.c1, p.eps1).unwrap()),
            ("g2", &structure_of(&observable_canonical(&d.g2).unwrap()).unwrap()),
            ("g3", &relay_structure(p.c3, p.eps3).unwrap()),
        ])
        .unwrap();
        let ifp = ifp_structure(&gains()).unwrap();
        let candidates = vec![ifp.clone(), decomposed(p), ocr];
        let verdict = is_controller_compatible(&candidates, &DelayGraph::muscle());
        assert!(verdict.compatible);
        assert_eq!(verdict.witness.as_ref().unwrap().0, 1);

        let only_ifp = is_controller_compatible(std::slice::from_ref(&ifp), &DelayGraph::muscle());
        assert!(!only_ifp.compatible);
        assert!(is_controller_compatible(&[ifp], &DelayGraph::new(1).unwrap()).compatible);
    }

    #[test]
    fn input_equal_to_output_needs_one_vertex() {
        let s = ControllerStructure::new(vec![Block::new("u", BlockKind::Input, &[])], "u").unwrap();
        assert!(find_compatible_assignment(&s, &DelayGraph::muscle()).is_none());
        assert!(find_compatible_assignment(&s, &DelayGraph::new(1).unwrap()).is_some());
    }

    #[test]
    fn graph_text_round_trip() {
        let g = DelayGraph::muscle();
        assert_eq!(DelayGraph::parse(&g.to_text()).unwrap(), g);
        let listed = DelayGraph::parse("vertex 1\nvertex 2\nvertex 3\nedge 1 2 1\nedge 2 3 1\n").unwrap();
        assert_eq!(listed, g);
        assert!(matches!(DelayGraph::parse("vertex 2\nedge 1 3 1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(DelayGraph::parse("edge 0 1 1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(DelayGraph::parse(""), Err(Error::Parse { .. })));
    }
}
