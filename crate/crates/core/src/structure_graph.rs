//! Controller structures: block diagrams of gains, adders and unit delays
//! wired by named scalar signals.
//!
//! Every block drives exactly one signal, named after the block. The
//! controller input is a distinguished `input` block with no inputs. An edge
//! `p → q` carries one timestep of delay when `q` is a unit delay and none
//! otherwise.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::{self, Write as _};

use petgraph::algo::is_isomorphic_matching;
use petgraph::graph::DiGraph;

use crate::delay::Delay;
use crate::delayed_lqr::OptimalGains;
use crate::error::{Error, Result};
use crate::realization::Realization;
use crate::transfer_fn::DecompositionParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockKind {
    Input,
    Gain(f64),
    Sum,
    UnitDelay,
}

impl BlockKind {
    pub fn name(&self) -> &'static str {
        match self {
            BlockKind::Input => "input",
            BlockKind::Gain(_) => "gain",
            BlockKind::Sum => "sum",
            BlockKind::UnitDelay => "unit_delay",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub id: String,
    pub kind: BlockKind,
    pub inputs: Vec<String>,
}

impl Block {
    pub fn new(id: impl Into<String>, kind: BlockKind, inputs: &[&str]) -> Self {
        Self {
            id: id.into(),
            kind,
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerStructure {
    blocks: Vec<Block>,
    index: HashMap<String, usize>,
    input: String,
    output: String,
    /// Evaluation order of the delay-free part within one step.
    order: Vec<usize>,
}

impl ControllerStructure {
    pub fn new(blocks: Vec<Block>, output: impl Into<String>) -> Result<Self> {
        let output = output.into();
        let mut index = HashMap::with_capacity(blocks.len());
        for (i, b) in blocks.iter().enumerate() {
            if b.id.is_empty() || b.id.chars().any(char::is_whitespace) || b.id == "output" || b.id == "->" {
                return Err(Error::InvalidStructure(format!("invalid signal name `{}`", b.id)));
            }
            if index.insert(b.id.clone(), i).is_some() {
                return Err(Error::InvalidStructure(format!("duplicate signal `{}`", b.id)));
            }
        }
        let inputs: Vec<&Block> = blocks.iter().filter(|b| b.kind == BlockKind::Input).collect();
        let [input] = inputs.as_slice() else {
            return Err(Error::InvalidStructure(format!(
                "expected exactly one input block, found {}",
                inputs.len()
            )));
        };
        let input = input.id.clone();
        for b in &blocks {
            let arity_ok = match b.kind {
                BlockKind::Input => b.inputs.is_empty(),
                BlockKind::Gain(v) => b.inputs.len() == 1 && v.is_finite(),
                BlockKind::Sum => b.inputs.len() >= 2,
                // A delay with no input holds the constant zero signal.
                BlockKind::UnitDelay => b.inputs.len() <= 1,
            };
            if !arity_ok {
                return Err(Error::InvalidStructure(format!(
                    "{} block `{}` has {} inputs",
                    b.kind.name(),
                    b.id,
                    b.inputs.len()
                )));
            }
            if let Some(missing) = b.inputs.iter().find(|s| !index.contains_key(*s)) {
                return Err(Error::UnknownSignal(missing.clone()));
            }
        }
        if !index.contains_key(&output) {
            return Err(Error::UnknownSignal(output));
        }
        let mut s = Self {
            blocks,
            index,
            input,
            output,
            order: Vec::new(),
        };
        s.order = s.delay_free_order()?;
        let from_input = s.fastest_from(&[s.index[&s.input]], |_| true);
        if from_input[s.index[&s.output]] == Delay::Infinite {
            return Err(Error::InvalidStructure(format!(
                "output `{}` is not reachable from input `{}`",
                s.output, s.input
            )));
        }
        Ok(s)
    }

    /// Kahn's algorithm over delay-free edges; delay outputs and the input
    /// are sources.
    fn delay_free_order(&self) -> Result<Vec<usize>> {
        let n = self.blocks.len();
        let mut indeg = vec![0usize; n];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, b) in self.blocks.iter().enumerate() {
            if b.kind == BlockKind::UnitDelay {
                continue;
            }
            for s in &b.inputs {
                out[self.index[s]].push(i);
                indeg[i] += 1;
            }
        }
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = queue.pop_front() {
            order.push(i);
            for &j in &out[i] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    queue.push_back(j);
                }
            }
        }
        if order.len() < n {
            let stuck = (0..n).find(|&i| indeg[i] > 0).expect("some block is on the cycle");
            return Err(Error::AlgebraicLoop(self.blocks[stuck].id.clone()));
        }
        Ok(order)
    }

    /// Every block in an order where delay-free inputs come first.
    pub(crate) fn evaluation_order(&self) -> &[usize] {
        &self.order
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, id: &str) -> Option<&Block> {
        self.index.get(id).map(|&i| &self.blocks[i])
    }

    pub fn input(&self) -> &str {
        &self.input
    }

    pub fn output(&self) -> &str {
        &self.output
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Signal names in sorted order.
    pub fn signals(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.blocks.iter().map(|b| b.id.as_str()).collect();
        names.sort_unstable();
        names
    }

    pub(crate) fn signal_index(&self, id: &str) -> Result<usize> {
        self.index.get(id).copied().ok_or_else(|| Error::UnknownSignal(id.to_string()))
    }

    /// All edges `(src, dst, delay)` in block order.
    pub fn edges(&self) -> Vec<(&str, &str, u32)> {
        self.blocks
            .iter()
            .flat_map(|b| {
                let w = u32::from(b.kind == BlockKind::UnitDelay);
                b.inputs.iter().map(move |s| (s.as_str(), b.id.as_str(), w))
            })
            .collect()
    }

    /// Edges as indices, for the graph algorithms.
    pub(crate) fn indexed_edges(&self) -> Vec<(usize, usize, u32)> {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(j, b)| {
                let w = u32::from(b.kind == BlockKind::UnitDelay);
                b.inputs.iter().map(move |s| (self.index[s], j, w))
            })
            .collect()
    }

    pub fn delay_count(&self) -> usize {
        self.blocks.iter().filter(|b| b.kind == BlockKind::UnitDelay).count()
    }

    /// 0-1 BFS from `sources`, visiting only signals accepted by `allowed`.
    pub(crate) fn fastest_from(&self, sources: &[usize], allowed: impl Fn(usize) -> bool) -> Vec<Delay> {
        let n = self.blocks.len();
        let mut succ: Vec<Vec<(usize, u32)>> = vec![Vec::new(); n];
        for (i, j, w) in self.indexed_edges() {
            succ[i].push((j, w));
        }
        let mut dist = vec![Delay::Infinite; n];
        let mut deque = VecDeque::new();
        for &s in sources {
            if allowed(s) && dist[s] != Delay::ZERO {
                dist[s] = Delay::ZERO;
                deque.push_front(s);
            }
        }
        while let Some(i) = deque.pop_front() {
            let Delay::Finite(di) = dist[i] else { continue };
            for &(j, w) in &succ[i] {
                if !allowed(j) {
                    continue;
                }
                let cand = Delay::Finite(di + w);
                if cand < dist[j] {
                    dist[j] = cand;
                    if w == 0 {
                        deque.push_front(j);
                    } else {
                        deque.push_back(j);
                    }
                }
            }
        }
        dist
    }

    /// Fewest unit delays along any directed path from one signal to another.
    pub fn min_path_delay(&self, from: &str, to: &str) -> Result<Delay> {
        let (i, j) = (self.signal_index(from)?, self.signal_index(to)?);
        Ok(self.fastest_from(&[i], |_| true)[j])
    }

    /// Steps the diagram over `input`: delay-free blocks settle in
    /// topological order, then every delay latches its input.
    pub fn simulate(&self, input: &[f64]) -> Vec<f64> {
        self.simulate_signals(input).0
    }

    /// Output sequence and every signal's trace, keyed by signal name.
    pub fn simulate_signals(&self, input: &[f64]) -> (Vec<f64>, BTreeMap<String, Vec<f64>>) {
        let n = self.blocks.len();
        let mut latched = vec![0.0; n];
        let mut values = vec![0.0; n];
        let mut traces: Vec<Vec<f64>> = vec![Vec::with_capacity(input.len()); n];
        let out_idx = self.index[&self.output];
        let mut out = Vec::with_capacity(input.len());
        for &u in input {
            for &i in &self.order {
                let b = &self.blocks[i];
                values[i] = match b.kind {
                    BlockKind::Input => u,
                    BlockKind::Gain(k) => k * values[self.index[&b.inputs[0]]],
                    BlockKind::Sum => b.inputs.iter().map(|s| values[self.index[s]]).sum(),
                    BlockKind::UnitDelay => latched[i],
                };
            }
            out.push(values[out_idx]);
            for (i, b) in self.blocks.iter().enumerate() {
                traces[i].push(values[i]);
                if b.kind == BlockKind::UnitDelay {
                    latched[i] = b.inputs.first().map_or(0.0, |s| values[self.index[s]]);
                }
            }
        }
        let traces = self.blocks.iter().map(|b| b.id.clone()).zip(traces).collect();
        (out, traces)
    }

    /// Renames every signal with `f`.
    pub fn renamed(&self, f: impl Fn(&str) -> String) -> Result<Self> {
        let blocks = self
            .blocks
            .iter()
            .map(|b| Block {
                id: f(&b.id),
                kind: b.kind,
                inputs: b.inputs.iter().map(|s| f(s)).collect(),
            })
            .collect();
        Self::new(blocks, f(&self.output))
    }

    fn labeled_graph(&self) -> DiGraph<(&'static str, bool), ()> {
        let mut g = DiGraph::new();
        let nodes: Vec<_> = self
            .blocks
            .iter()
            .map(|b| g.add_node((b.kind.name(), b.id == self.output)))
            .collect();
        for (i, j, _) in self.indexed_edges() {
            g.add_edge(nodes[i], nodes[j], ());
        }
        g
    }

    /// Same structure up to signal names and gain values.
    pub fn same_structure(&self, other: &Self) -> bool {
        is_isomorphic_matching(&self.labeled_graph(), &other.labeled_graph(), |a, b| a == b, |_, _| true)
    }

    /// Text form: one `id kind [value]` line per block, one `src -> dst delay`
    /// line per edge and an `output id` line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for b in &self.blocks {
            match b.kind {
                BlockKind::Gain(v) => writeln!(s, "{} gain {v}", b.id),
                k => writeln!(s, "{} {}", b.id, k.name()),
            }
            .unwrap();
        }
        writeln!(s, "output {}", self.output).unwrap();
        for (src, dst, w) in self.edges() {
            writeln!(s, "{src} -> {dst} {w}").unwrap();
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut blocks: Vec<Block> = Vec::new();
        let mut pos: HashMap<String, usize> = HashMap::new();
        let mut edges: Vec<(usize, String, String, Option<u32>)> = Vec::new();
        let mut output = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let err = |message: String| Error::Parse { line, message };
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let toks: Vec<&str> = body.split_whitespace().collect();
            match toks.as_slice() {
                ["output", id] => {
                    if output.replace(id.to_string()).is_some() {
                        return Err(err("output declared twice".into()));
                    }
                }
                [src, "->", dst] => edges.push((line, src.to_string(), dst.to_string(), None)),
                [src, "->", dst, w] => {
                    let w = w.parse::<u32>().map_err(|_| err(format!("bad edge delay `{w}`")))?;
                    edges.push((line, src.to_string(), dst.to_string(), Some(w)));
                }
                [id, kind, rest @ ..] => {
                    let kind = match (*kind, rest) {
                        ("input", []) => BlockKind::Input,
                        ("sum", []) => BlockKind::Sum,
                        ("unit_delay", []) => BlockKind::UnitDelay,
                        ("gain", [v]) => BlockKind::Gain(
                            v.parse::<f64>().map_err(|_| err(format!("bad gain value `{v}`")))?,
                        ),
                        _ => return Err(err(format!("unrecognized block `{body}`"))),
                    };
                    if pos.insert(id.to_string(), blocks.len()).is_some() {
                        return Err(err(format!("duplicate block `{id}`")));
                    }
                    blocks.push(Block::new(*id, kind, &[]));
                }
                _ => return Err(err(format!("unrecognized line `{body}`"))),
            }
        }
        for (line, src, dst, w) in edges {
            let err = |message: String| Error::Parse { line, message };
            if !pos.contains_key(&src) {
                return Err(err(format!("unknown signal `{src}`")));
            }
            let &j = pos.get(&dst).ok_or_else(|| err(format!("unknown signal `{dst}`")))?;
            let expected = u32::from(blocks[j].kind == BlockKind::UnitDelay);
            if let Some(w) = w {
                if w != expected {
                    return Err(err(format!("edge {src} -> {dst} carries delay {expected}, not {w}")));
                }
            }
            blocks[j].inputs.push(src);
        }
        let output = output.ok_or(Error::Parse {
            line: text.lines().count(),
            message: "missing `output` line".into(),
        })?;
        Self::new(blocks, output)
    }
}

impl fmt::Display for ControllerStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn nonzero(x: f64) -> bool {
    x != 0.0
}

/// Diagram of a realization: per state a unit delay (named by the state
/// label) fed by a sum of its `F` and `H` gains; the output combines the `M`
/// gains and the `N` gain. Zero entries produce no block and a single term
/// needs no adder.
pub fn structure_of(r: &Realization) -> Result<ControllerStructure> {
    let n = r.order();
    let lab = &r.labels;
    let mut blocks = vec![Block::new("u", BlockKind::Input, &[])];
    for i in 0..n {
        let mut terms: Vec<String> = Vec::new();
        for j in 0..n {
            if nonzero(r.f[(i, j)]) {
                let id = format!("f_{}_{}", lab[i], lab[j]);
                blocks.push(Block::new(&id, BlockKind::Gain(r.f[(i, j)]), &[&lab[j]]));
                terms.push(id);
            }
        }
        if nonzero(r.h[i]) {
            let id = format!("h_{}", lab[i]);
            blocks.push(Block::new(&id, BlockKind::Gain(r.h[i]), &["u"]));
            terms.push(id);
        }
        let feed: Vec<String> = match terms.len() {
            0 => vec![],
            1 => terms,
            _ => {
                let id = format!("sum_{}", lab[i]);
                blocks.push(Block {
                    id: id.clone(),
                    kind: BlockKind::Sum,
                    inputs: terms,
                });
                vec![id]
            }
        };
        blocks.push(Block {
            id: lab[i].clone(),
            kind: BlockKind::UnitDelay,
            inputs: feed,
        });
    }
    let mut out_terms: Vec<String> = Vec::new();
    for (i, label) in lab.iter().enumerate() {
        if nonzero(r.m[i]) {
            let id = format!("m_{label}");
            blocks.push(Block::new(&id, BlockKind::Gain(r.m[i]), &[label]));
            out_terms.push(id);
        }
    }
    if nonzero(r.n_ff) {
        blocks.push(Block::new("n", BlockKind::Gain(r.n_ff), &["u"]));
        out_terms.push("n".into());
    }
    let output = match out_terms.len() {
        0 => {
            // Identically zero controller.
            blocks.push(Block::new("y", BlockKind::Gain(0.0), &["u"]));
            "y".to_string()
        }
        1 => out_terms.pop().unwrap(),
        _ => {
            blocks.push(Block {
                id: "y".into(),
                kind: BlockKind::Sum,
                inputs: out_terms,
            });
            "y".to_string()
        }
    };
    ControllerStructure::new(blocks, output)
}

/// First-order relay `C/(z − ε)` drawn with the delay on its input:
/// `u → C → z⁻¹ → Σ → x`, the adder closing an `ε·z⁻¹` loop on `x`.
/// With `ε = 0` the loop is dropped and `x` is the delayed signal itself.
pub fn relay_structure(c: f64, eps: f64) -> Result<ControllerStructure> {
    if c == 0.0 {
        return Err(crate::error::invalid("c", "relay gain must be nonzero"));
    }
    let mut blocks = vec![
        Block::new("u", BlockKind::Input, &[]),
        Block::new("c", BlockKind::Gain(c), &["u"]),
    ];
    if eps == 0.0 {
        blocks.push(Block::new("x", BlockKind::UnitDelay, &["c"]));
    } else {
        blocks.push(Block::new("d", BlockKind::UnitDelay, &["c"]));
        blocks.push(Block::new("x", BlockKind::Sum, &["d", "e"]));
        blocks.push(Block::new("xd", BlockKind::UnitDelay, &["x"]));
        blocks.push(Block::new("e", BlockKind::Gain(eps), &["xd"]));
    }
    ControllerStructure::new(blocks, "x")
}

/// The delayed-LQR controller drawn directly from its gain law: the
/// sensed force `x` and the in-flight commands feed one adder producing the
/// intended actuation `mu`, which reaches the output `u` through the delay
/// chain.
pub fn ifp_structure(g: &OptimalGains) -> Result<ControllerStructure> {
    let k = g.as_slice();
    let t = g.delay();
    // Delay chain after mu: gamma_{T-1} … gamma_1, then u.
    let mut chain: Vec<String> = if t == 2 {
        vec!["gamma".into()]
    } else {
        (1..t).rev().map(|i| format!("gamma{i}")).collect()
    };
    chain.push("u".into());
    let mut blocks = vec![
        Block::new("x", BlockKind::Input, &[]),
        Block::new("k0", BlockKind::Gain(k[0]), &["x"]),
    ];
    let mut prev = "mu".to_string();
    for sig in &chain {
        blocks.push(Block::new(sig, BlockKind::UnitDelay, &[&prev]));
        prev = sig.clone();
    }
    let mut sum_inputs = vec!["k0".to_string()];
    for (i, sig) in chain.iter().enumerate() {
        let id = format!("k{}", i + 1);
        blocks.push(Block::new(&id, BlockKind::Gain(k[i + 1]), &[sig]));
        sum_inputs.push(id);
    }
    blocks.push(Block {
        id: "mu".into(),
        kind: BlockKind::Sum,
        inputs: sum_inputs,
    });
    ControllerStructure::new(blocks, "u")
}

/// Cascade with stage `i`'s signals prefixed `s{i}.`; a single structure is
/// returned unchanged.
pub fn series(structures: &[ControllerStructure]) -> Result<ControllerStructure> {
    if let [only] = structures {
        return Ok(only.clone());
    }
    let names: Vec<String> = (1..=structures.len()).map(|i| format!("s{i}")).collect();
    let named: Vec<(&str, &ControllerStructure)> =
        names.iter().map(String::as_str).zip(structures.iter()).collect();
    series_named(&named)
}

/// Cascade with explicit stage prefixes. Each later stage's input block is
/// replaced by the previous stage's output signal.
pub fn series_named(stages: &[(&str, &ControllerStructure)]) -> Result<ControllerStructure> {
    if stages.is_empty() {
        return Err(crate::error::invalid("structures", "cascade needs at least one stage"));
    }
    let prefixes: BTreeSet<&str> = stages.iter().map(|(p, _)| *p).collect();
    if prefixes.len() != stages.len() {
        return Err(crate::error::invalid("structures", "stage names must be distinct"));
    }
    let mut blocks: Vec<Block> = Vec::new();
    let mut upstream: Option<String> = None;
    for (prefix, s) in stages {
        let rename = |id: &str| -> String {
            match &upstream {
                Some(up) if id == s.input() => up.clone(),
                _ => format!("{prefix}.{id}"),
            }
        };
        for b in s.blocks() {
            if upstream.is_some() && b.kind == BlockKind::Input {
                continue;
            }
            blocks.push(Block {
                id: rename(&b.id),
                kind: b.kind,
                inputs: b.inputs.iter().map(|x| rename(x)).collect(),
            });
        }
        upstream = Some(rename(s.output()));
    }
    ControllerStructure::new(blocks, upstream.expect("at least one stage"))
}

/// `G₃G₂G₁` drawn with input-delayed relays around the diagram of `middle`.
pub fn decomposed_structure(p: DecompositionParams, middle: &Realization) -> Result<ControllerStructure> {
    p.validate()?;
    series_named(&[
        ("g1", &relay_structure(p.c1, p.eps1)?),
        ("g2", &structure_of(middle)?),
        ("g3", &relay_structure(p.c3, p.eps3)?),
    ])
}
