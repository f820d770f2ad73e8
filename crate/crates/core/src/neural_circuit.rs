//! Circuits of stylized linear rate neurons.
//!
//! A neuron's axon output at `t+1` is its self-weight times its own output at
//! `t` plus the weighted synaptic inputs at `t`. Delay-free output
//! combinations are kept as `output_taps` and land in the next stage's
//! neuron bodies when circuits are cascaded.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};
use crate::realization::{Realization, STRUCTURAL_ZERO};
use crate::structure_graph::{BlockKind, ControllerStructure};

#[derive(Debug, Clone, PartialEq)]
pub struct Synapse {
    /// A neuron id or the circuit's external input name.
    pub source: String,
    pub weight: f64,
}

impl Synapse {
    pub fn new(source: impl Into<String>, weight: f64) -> Self {
        Self {
            source: source.into(),
            weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neuron {
    pub id: String,
    pub self_weight: f64,
    pub synapses: Vec<Synapse>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralCircuit {
    neurons: Vec<Neuron>,
    external_input: String,
    output_taps: Vec<Synapse>,
    index: HashMap<String, usize>,
}

/// Resolved source of a synapse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Src {
    External,
    Neuron(usize),
}

impl NeuralCircuit {
    pub fn new(neurons: Vec<Neuron>, external_input: impl Into<String>, output_taps: Vec<Synapse>) -> Result<Self> {
        let external_input = external_input.into();
        let mut index = HashMap::with_capacity(neurons.len());
        for (i, n) in neurons.iter().enumerate() {
            if n.id == external_input || n.id.is_empty() || n.id.chars().any(char::is_whitespace) {
                return Err(Error::InvalidStructure(format!("invalid neuron id `{}`", n.id)));
            }
            if index.insert(n.id.clone(), i).is_some() {
                return Err(Error::InvalidStructure(format!("duplicate neuron `{}`", n.id)));
            }
        }
        if output_taps.is_empty() {
            return Err(Error::InvalidStructure("circuit has no output taps".into()));
        }
        let c = Self {
            neurons,
            external_input,
            output_taps,
            index,
        };
        for syn in c.neurons.iter().flat_map(|n| &n.synapses).chain(&c.output_taps) {
            c.resolve(&syn.source)?;
        }
        Ok(c)
    }

    fn resolve(&self, source: &str) -> Result<Src> {
        if source == self.external_input {
            Ok(Src::External)
        } else {
            self.index
                .get(source)
                .map(|&i| Src::Neuron(i))
                .ok_or_else(|| Error::UnknownNeuron(source.to_string()))
        }
    }

    pub fn neurons(&self) -> &[Neuron] {
        &self.neurons
    }

    pub fn neuron(&self, id: &str) -> Option<&Neuron> {
        self.index.get(id).map(|&i| &self.neurons[i])
    }

    pub fn external_input(&self) -> &str {
        &self.external_input
    }

    pub fn output_taps(&self) -> &[Synapse] {
        &self.output_taps
    }

    pub fn neuron_ids(&self) -> Vec<&str> {
        self.neurons.iter().map(|n| n.id.as_str()).collect()
    }

    pub fn neuron_count(&self) -> usize {
        self.neurons.len()
    }

    /// Places where two or more signals are added: neuron bodies with at
    /// least two incoming terms (self-dynamics counts as one), plus the
    /// output combination when it has at least two taps.
    pub fn summation_site_count(&self) -> usize {
        let bodies = self
            .neurons
            .iter()
            .filter(|n| n.synapses.len() + usize::from(n.self_weight != 0.0) >= 2)
            .count();
        bodies + usize::from(self.output_taps.len() >= 2)
    }

    /// Distinct targets reached by the neuron's axon: other neurons it
    /// synapses onto, plus the output if it is tapped.
    pub fn branch_count(&self, id: &str) -> Result<usize> {
        if !self.index.contains_key(id) {
            return Err(Error::UnknownNeuron(id.to_string()));
        }
        let to_neurons = self
            .neurons
            .iter()
            .filter(|n| n.id != id && n.synapses.iter().any(|s| s.source == id))
            .count();
        let to_output = self.output_taps.iter().any(|s| s.source == id);
        Ok(to_neurons + usize::from(to_output))
    }

    /// `(F, H, M, N)` with one state per neuron, labelled by neuron id.
    pub fn to_realization(&self) -> Result<Realization> {
        let n = self.neurons.len();
        let mut f = DMatrix::zeros(n, n);
        let mut h = DVector::zeros(n);
        for (i, neuron) in self.neurons.iter().enumerate() {
            f[(i, i)] += neuron.self_weight;
            for syn in &neuron.synapses {
                match self.resolve(&syn.source)? {
                    Src::External => h[i] += syn.weight,
                    Src::Neuron(j) => f[(i, j)] += syn.weight,
                }
            }
        }
        let mut m = RowDVector::zeros(n);
        let mut n_ff = 0.0;
        for tap in &self.output_taps {
            match self.resolve(&tap.source)? {
                Src::External => n_ff += tap.weight,
                Src::Neuron(j) => m[j] += tap.weight,
            }
        }
        Realization::with_labels(f, h, m, n_ff, self.neurons.iter().map(|x| x.id.clone()).collect())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("input {}\n", self.external_input);
        for n in &self.neurons {
            writeln!(s, "neuron {} {}", n.id, n.self_weight).unwrap();
        }
        for n in &self.neurons {
            for syn in &n.synapses {
                writeln!(s, "synapse {} {} {}", syn.source, n.id, syn.weight).unwrap();
            }
        }
        for tap in &self.output_taps {
            writeln!(s, "tap {} {}", tap.source, tap.weight).unwrap();
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut input = None;
        let mut neurons: Vec<Neuron> = Vec::new();
        let mut pos: HashMap<String, usize> = HashMap::new();
        let mut taps = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let err = |message: String| Error::Parse { line, message };
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let num = |t: &str| t.parse::<f64>().map_err(|_| err(format!("`{t}` is not a number")));
            let toks: Vec<&str> = body.split_whitespace().collect();
            match toks.as_slice() {
                ["input", name] => input = Some(name.to_string()),
                ["neuron", id, w] => {
                    pos.insert(id.to_string(), neurons.len());
                    neurons.push(Neuron {
                        id: id.to_string(),
                        self_weight: num(w)?,
                        synapses: Vec::new(),
                    });
                }
                ["synapse", src, dst, w] => {
                    let &i = pos.get(*dst).ok_or_else(|| err(format!("unknown neuron `{dst}`")))?;
                    let w = num(w)?;
                    neurons[i].synapses.push(Synapse::new(*src, w));
                }
                ["tap", src, w] => taps.push(Synapse::new(*src, num(w)?)),
                _ => return Err(err(format!("unrecognized line `{body}`"))),
            }
        }
        let input = input.ok_or(Error::Parse {
            line: 0,
            message: "missing `input` line".into(),
        })?;
        Self::new(neurons, input, taps)
    }
}

/// One neuron per state: self-weight `F_ii`, synapses `F_ij` from the other
/// states and `H_i` from the input; output taps `M_i` and `N`. Weights no
/// larger than [`STRUCTURAL_ZERO`] in magnitude are not wired.
pub fn circuit_of(r: &Realization) -> Result<NeuralCircuit> {
    let n = r.order();
    let input = "u";
    let wired = |w: f64| w.abs() > STRUCTURAL_ZERO;
    let neurons = (0..n)
        .map(|i| {
            let mut synapses: Vec<Synapse> = (0..n)
                .filter(|&j| j != i && wired(r.f[(i, j)]))
                .map(|j| Synapse::new(&r.labels[j], r.f[(i, j)]))
                .collect();
            if wired(r.h[i]) {
                synapses.push(Synapse::new(input, r.h[i]));
            }
            Neuron {
                id: r.labels[i].clone(),
                self_weight: r.f[(i, i)],
                synapses,
            }
        })
        .collect();
    let mut taps: Vec<Synapse> = (0..n)
        .filter(|&i| wired(r.m[i]))
        .map(|i| Synapse::new(&r.labels[i], r.m[i]))
        .collect();
    if wired(r.n_ff) {
        taps.push(Synapse::new(input, r.n_ff));
    }
    NeuralCircuit::new(neurons, input, taps)
}

/// One neuron per unit delay of the diagram; each delay's input, expanded
/// through the delay-free gains and adders, becomes that neuron's synapses.
pub fn circuit_of_structure(s: &ControllerStructure) -> Result<NeuralCircuit> {
    let blocks = s.blocks();
    let delays: Vec<usize> = (0..blocks.len())
        .filter(|&i| blocks[i].kind == BlockKind::UnitDelay)
        .collect();
    let mut slot = vec![usize::MAX; blocks.len()];
    for (k, &i) in delays.iter().enumerate() {
        slot[i] = k + 1;
    }
    // Coefficients over [external, neuron 1, …].
    let width = delays.len() + 1;
    let mut expansion: Vec<Option<Vec<f64>>> = vec![None; blocks.len()];
    for &i in s.evaluation_order() {
        let b = &blocks[i];
        let mut v = vec![0.0; width];
        match b.kind {
            BlockKind::Input => v[0] = 1.0,
            BlockKind::UnitDelay => v[slot[i]] = 1.0,
            BlockKind::Gain(k) => {
                let src = expansion[s.signal_index(&b.inputs[0])?].as_ref().expect("topological order");
                v.iter_mut().zip(src).for_each(|(a, b)| *a = k * b);
            }
            BlockKind::Sum => {
                for inp in &b.inputs {
                    let src = expansion[s.signal_index(inp)?].as_ref().expect("topological order");
                    v.iter_mut().zip(src).for_each(|(a, b)| *a += b);
                }
            }
        }
        expansion[i] = Some(v);
    }
    let name = |k: usize| -> &str {
        if k == 0 {
            s.input()
        } else {
            &blocks[delays[k - 1]].id
        }
    };
    let neurons = delays
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let update = match blocks[i].inputs.first() {
                Some(inp) => expansion[s.signal_index(inp)?].clone().expect("expanded"),
                None => vec![0.0; width],
            };
            Ok(Neuron {
                id: blocks[i].id.clone(),
                self_weight: update[k + 1],
                synapses: (0..width)
                    .filter(|&j| j != k + 1 && update[j] != 0.0)
                    .map(|j| Synapse::new(name(j), update[j]))
                    .collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let out = expansion[s.signal_index(s.output())?].as_ref().expect("expanded");
    let taps = (0..width)
        .filter(|&j| out[j] != 0.0)
        .map(|j| Synapse::new(name(j), out[j]))
        .collect();
    NeuralCircuit::new(neurons, s.input(), taps)
}

fn merge(synapses: impl IntoIterator<Item = Synapse>) -> Vec<Synapse> {
    let mut order: Vec<String> = Vec::new();
    let mut weights: BTreeMap<String, f64> = BTreeMap::new();
    for s in synapses {
        if !weights.contains_key(&s.source) {
            order.push(s.source.clone());
        }
        *weights.entry(s.source).or_insert(0.0) += s.weight;
    }
    order
        .into_iter()
        .filter_map(|src| {
            let w = weights[&src];
            (w != 0.0).then(|| Synapse::new(src, w))
        })
        .collect()
}

/// Cascade of circuits; neuron ids become `{name}.{id}`. The first stage's
/// external input stays the circuit input; every later stage's input
/// synapses are rewired onto the previous stage's output taps.
pub fn series_named(stages: &[(&str, &NeuralCircuit)]) -> Result<NeuralCircuit> {
    let Some(((first_name, first), _)) = stages.split_first() else {
        return Err(crate::error::invalid("circuits", "cascade needs at least one stage"));
    };
    let input = first.external_input.clone();
    let mut neurons: Vec<Neuron> = Vec::new();
    // Taps of the stage built so far, in the combined namespace.
    let mut upstream: Vec<Synapse> = vec![Synapse::new(&input, 1.0)];
    let _ = first_name;
    for (name, c) in stages {
        let rewire = |syns: &[Synapse]| -> Vec<Synapse> {
            merge(syns.iter().flat_map(|s| -> Vec<Synapse> {
                if s.source == c.external_input {
                    upstream
                        .iter()
                        .map(|t| Synapse::new(&t.source, t.weight * s.weight))
                        .collect()
                } else {
                    vec![Synapse::new(format!("{name}.{}", s.source), s.weight)]
                }
            }))
        };
        for n in &c.neurons {
            neurons.push(Neuron {
                id: format!("{name}.{}", n.id),
                self_weight: n.self_weight,
                synapses: rewire(&n.synapses),
            });
        }
        upstream = rewire(&c.output_taps);
    }
    NeuralCircuit::new(neurons, input, upstream)
}

/// Per-neuron axon outputs (deviations from equilibrium).
#[derive(Debug, Clone, PartialEq)]
pub struct FiringTrace {
    pub ids: Vec<String>,
    /// `rates[k][t]` is neuron `k` at step `t`.
    pub rates: Vec<Vec<f64>>,
}

impl FiringTrace {
    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.ids.iter().position(|x| x == id).map(|k| self.rates[k].as_slice())
    }

    pub fn len(&self) -> usize {
        self.rates.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitRun {
    pub trace: FiringTrace,
    pub output: Vec<f64>,
}

/// Stepwise evaluation of a circuit, for use inside a feedback loop.
#[derive(Debug, Clone)]
pub struct CircuitState<'a> {
    circuit: &'a NeuralCircuit,
    synapses: Vec<Vec<(Src, f64)>>,
    taps: Vec<(Src, f64)>,
    rates: Vec<f64>,
    next: Vec<f64>,
}

impl<'a> CircuitState<'a> {
    pub fn new(circuit: &'a NeuralCircuit) -> Self {
        let resolve = |s: &Synapse| (circuit.resolve(&s.source).expect("validated on construction"), s.weight);
        Self {
            circuit,
            synapses: circuit.neurons.iter().map(|n| n.synapses.iter().map(resolve).collect()).collect(),
            taps: circuit.output_taps.iter().map(resolve).collect(),
            rates: vec![0.0; circuit.neurons.len()],
            next: vec![0.0; circuit.neurons.len()],
        }
    }

    fn value(&self, src: Src, input: f64) -> f64 {
        match src {
            Src::External => input,
            Src::Neuron(j) => self.rates[j],
        }
    }

    /// Output at the current step given the current input.
    pub fn output(&self, input: f64) -> f64 {
        self.taps.iter().map(|&(s, w)| w * self.value(s, input)).sum()
    }

    /// Current axon outputs.
    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Synchronous update of every neuron.
    pub fn advance(&mut self, input: f64) {
        for (i, neuron) in self.circuit.neurons.iter().enumerate() {
            let drive: f64 = self.synapses[i].iter().map(|&(s, w)| w * self.value(s, input)).sum();
            self.next[i] = neuron.self_weight * self.rates[i] + drive;
        }
        std::mem::swap(&mut self.rates, &mut self.next);
    }
}

/// Runs the circuit from equilibrium for `steps` samples; missing input
/// samples are zero.
pub fn simulate_circuit(c: &NeuralCircuit, input: &[f64], steps: usize) -> Result<CircuitRun> {
    if steps == 0 {
        return Err(crate::error::invalid("steps", "must be at least 1"));
    }
    let mut state = CircuitState::new(c);
    let mut rates = vec![Vec::with_capacity(steps); c.neurons.len()];
    let mut output = Vec::with_capacity(steps);
    for t in 0..steps {
        let u = input.get(t).copied().unwrap_or(0.0);
        output.push(state.output(u));
        for (k, r) in state.rates().iter().enumerate() {
            rates[k].push(*r);
        }
        state.advance(u);
    }
    Ok(CircuitRun {
        trace: FiringTrace {
            ids: c.neurons.iter().map(|n| n.id.clone()).collect(),
            rates,
        },
        output,
    })
}
