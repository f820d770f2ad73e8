//! Closed-loop runs of the linearized muscle under a delayed controller.

use std::fmt::Write as _;

use nalgebra::DVector;

use crate::delayed_lqr::{LqrWeights, OptimalGains};
use crate::error::{invalid, Error, Result};
use crate::muscle_plant::{open_loop_sim, DiscretePlant, OperatingPoint};
use crate::neural_circuit::{circuit_of, series_named as circuit_series, CircuitState, FiringTrace, NeuralCircuit};
use crate::realization::{first_order_stage, series_realization, Realization};
use crate::transfer_fn::DecompositionParams;

/// Input-output delay every controller must respect.
pub const REQUIRED_DELAY: usize = 2;

/// Additive force disturbance; `w(t)` is added to `δf(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Disturbance {
    #[default]
    None,
    Pulse {
        amplitude: f64,
        start: usize,
        duration: usize,
    },
}

impl Disturbance {
    pub fn at(&self, t: usize) -> f64 {
        match *self {
            Disturbance::None => 0.0,
            Disturbance::Pulse {
                amplitude,
                start,
                duration,
            } => {
                if t >= start && t - start < duration {
                    amplitude
                } else {
                    0.0
                }
            }
        }
    }

    /// First step after which the disturbance is zero forever.
    pub fn end(&self) -> usize {
        match *self {
            Disturbance::None => 0,
            Disturbance::Pulse { start, duration, .. } => start + duration,
        }
    }
}

pub fn pulse(amplitude: f64, start: usize, duration: usize) -> Result<Disturbance> {
    if duration == 0 {
        return Err(invalid("duration", "pulse must last at least one step"));
    }
    if !amplitude.is_finite() {
        return Err(invalid("amplitude", "must be finite"));
    }
    Ok(Disturbance::Pulse {
        amplitude,
        start,
        duration,
    })
}

/// A controller mapping `δf` to `δr`, in any of its representations.
#[derive(Debug, Clone, PartialEq)]
pub enum Controller {
    /// The augmented-state feedback law itself.
    Gains(OptimalGains),
    Realization(Realization),
    Circuit(NeuralCircuit),
}

/// The relay stages around `middle`, cascaded as a single realization.
pub fn pipeline_realization(p: DecompositionParams, middle: &Realization) -> Result<Realization> {
    p.validate()?;
    series_realization(&[
        ("g1", &first_order_stage(p.c1, p.eps1)?),
        ("g2", middle),
        ("g3", &first_order_stage(p.c3, p.eps3)?),
    ])
}

/// The relay stages around `middle`, as one neural circuit.
pub fn pipeline_circuit(p: DecompositionParams, middle: &Realization) -> Result<NeuralCircuit> {
    p.validate()?;
    circuit_series(&[
        ("g1", &circuit_of(&first_order_stage(p.c1, p.eps1)?)?),
        ("g2", &circuit_of(middle)?),
        ("g3", &circuit_of(&first_order_stage(p.c3, p.eps3)?)?),
    ])
}

/// Leading Markov parameters `N`, `MH`, `MFH`, … up to `count` terms.
fn markov_parameters(r: &Realization, count: usize) -> Vec<f64> {
    let mut out = vec![r.n_ff];
    let mut v = r.h.clone();
    for _ in 1..count {
        out.push((&r.m * &v)[0]);
        v = &r.f * v;
    }
    out
}

fn check_realization_delay(r: &Realization) -> Result<()> {
    let scale = 1.0 + r.n_ff.abs() + r.m.amax() * r.h.amax() * (1.0 + r.f.amax());
    let markov = markov_parameters(r, REQUIRED_DELAY);
    match markov.iter().position(|v| v.abs() > 1e-12 * scale) {
        Some(got) => Err(Error::InsufficientDelay {
            got,
            required: REQUIRED_DELAY,
        }),
        None => Ok(()),
    }
}

impl Controller {
    /// Verifies the input-output delay is at least [`REQUIRED_DELAY`].
    pub fn check_delay(&self) -> Result<()> {
        match self {
            Controller::Gains(g) if g.delay() < REQUIRED_DELAY => Err(Error::InsufficientDelay {
                got: g.delay(),
                required: REQUIRED_DELAY,
            }),
            Controller::Gains(_) => Ok(()),
            Controller::Realization(r) => check_realization_delay(r),
            Controller::Circuit(c) => check_realization_delay(&c.to_realization()?),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopTrace {
    pub ts: f64,
    pub delta_f: Vec<f64>,
    pub delta_r: Vec<f64>,
    /// Present when the controller is a circuit.
    pub neurons: Option<FiringTrace>,
}

impl ClosedLoopTrace {
    pub fn len(&self) -> usize {
        self.delta_f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta_f.is_empty()
    }

    /// Time axis in seconds.
    pub fn time(&self) -> Vec<f64> {
        (0..self.len()).map(|t| t as f64 * self.ts).collect()
    }

    pub fn f_abs(&self, op: &OperatingPoint) -> Vec<f64> {
        self.delta_f.iter().map(|d| d + op.f_bar).collect()
    }

    pub fn r_abs(&self, op: &OperatingPoint) -> Vec<f64> {
        self.delta_r.iter().map(|d| d + op.r_bar).collect()
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut cols: Vec<String> = ["t", "delta_f", "delta_r", "f_abs", "r_abs"].map(String::from).into();
        if let Some(n) = &self.neurons {
            cols.extend(n.ids.iter().map(|id| format!("neuron_{id}")));
        }
        cols
    }

    /// Rows in the same order as [`Self::column_names`].
    pub fn rows(&self, op: &OperatingPoint) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|t| {
                let mut row = vec![
                    t as f64 * self.ts,
                    self.delta_f[t],
                    self.delta_r[t],
                    self.delta_f[t] + op.f_bar,
                    self.delta_r[t] + op.r_bar,
                ];
                if let Some(n) = &self.neurons {
                    row.extend(n.rates.iter().map(|r| r[t]));
                }
                row
            })
            .collect()
    }

    pub fn to_csv(&self, op: &OperatingPoint) -> String {
        let mut s = self.column_names().join(",");
        s.push('\n');
        for row in self.rows(op) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
            writeln!(s, "{}", cells.join(",")).unwrap();
        }
        s
    }
}

enum Stepper<'a> {
    Gains { k: &'a [f64], chi: Vec<f64> },
    Realization { r: &'a Realization, x: DVector<f64> },
    Circuit(CircuitState<'a>),
}

impl Stepper<'_> {
    /// `δr(t)` given `δf(t)`, then advance the controller by one step.
    fn step(&mut self, df: f64) -> f64 {
        match self {
            Stepper::Gains { k, chi } => {
                chi[0] = df;
                let n = chi.len();
                let out = chi[n - 1];
                let mu: f64 = k.iter().zip(chi.iter()).map(|(a, b)| a * b).sum();
                for i in (2..n).rev() {
                    chi[i] = chi[i - 1];
                }
                chi[1] = mu;
                out
            }
            Stepper::Realization { r, x } => {
                let out = (&r.m * &*x)[0] + r.n_ff * df;
                *x = &r.f * &*x + &r.h * df;
                out
            }
            Stepper::Circuit(c) => {
                let out = c.output(df);
                c.advance(df);
                out
            }
        }
    }

    fn rates(&self) -> Option<&[f64]> {
        match self {
            Stepper::Circuit(c) => Some(c.rates()),
            _ => None,
        }
    }
}

pub fn closed_loop(plant: &DiscretePlant, controller: &Controller, d: &Disturbance, steps: usize) -> Result<ClosedLoopTrace> {
    closed_loop_with_initial(plant, controller, d, steps, 0.0)
}

/// Like [`closed_loop`], starting from `δf(0) = initial_force` with the
/// controller at rest.
pub fn closed_loop_with_initial(
    plant: &DiscretePlant,
    controller: &Controller,
    d: &Disturbance,
    steps: usize,
    initial_force: f64,
) -> Result<ClosedLoopTrace> {
    controller.check_delay()?;
    if steps == 0 {
        return Err(invalid("steps", "must be at least 1"));
    }
    let mut stepper = match controller {
        Controller::Gains(g) => Stepper::Gains {
            k: g.as_slice(),
            chi: vec![0.0; g.as_slice().len()],
        },
        Controller::Realization(r) => Stepper::Realization {
            r,
            x: DVector::zeros(r.order()),
        },
        Controller::Circuit(c) => Stepper::Circuit(CircuitState::new(c)),
    };
    let mut neurons = match controller {
        Controller::Circuit(c) => Some(FiringTrace {
            ids: c.neuron_ids().into_iter().map(String::from).collect(),
            rates: vec![Vec::with_capacity(steps); c.neuron_count()],
        }),
        _ => None,
    };
    let mut delta_f = Vec::with_capacity(steps);
    let mut delta_r = Vec::with_capacity(steps);
    let mut df = initial_force + d.at(0);
    for t in 0..steps {
        if let (Some(trace), Some(rates)) = (neurons.as_mut(), stepper.rates()) {
            for (series, r) in trace.rates.iter_mut().zip(rates) {
                series.push(*r);
            }
        }
        let dr = stepper.step(df);
        delta_f.push(df);
        delta_r.push(dr);
        df = plant.a * df + plant.b * dr + d.at(t + 1);
    }
    Ok(ClosedLoopTrace {
        ts: plant.ts,
        delta_f,
        delta_r,
        neurons,
    })
}

/// Plant driven directly by the rate deviation `input`, from equilibrium.
pub fn open_loop_trace(plant: &DiscretePlant, input: &[f64], steps: usize) -> Result<ClosedLoopTrace> {
    if steps == 0 {
        return Err(invalid("steps", "must be at least 1"));
    }
    let delta_r: Vec<f64> = (0..steps).map(|t| input.get(t).copied().unwrap_or(0.0)).collect();
    Ok(ClosedLoopTrace {
        ts: plant.ts,
        delta_f: open_loop_sim(plant, &delta_r, steps),
        delta_r,
        neurons: None,
    })
}

/// `Σ q·δf(t)² + r·δr(t)²` over the trace.
pub fn cost_of_trace(trace: &ClosedLoopTrace, w: &LqrWeights) -> f64 {
    trace
        .delta_f
        .iter()
        .zip(&trace.delta_r)
        .map(|(f, r)| w.q * f * f + w.r * r * r)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delayed_lqr::synthesize;
    use crate::muscle_plant::MuscleParams;
    use crate::realization::{controllable_canonical, from_delayed_gains, observable_canonical, random_general_realization};
    use crate::transfer_fn::decompose;
    use crate::delayed_lqr::gains_to_tf;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn plant() -> DiscretePlant {
        DiscretePlant::from_muscle(&MuscleParams::default(), 1.0, 0.01).unwrap()
    }

    fn gains() -> OptimalGains {
        synthesize(&plant(), 2, &LqrWeights::default()).unwrap().1.gains
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    fn controllers(p: DecompositionParams) -> Vec<Controller> {
        let g = gains();
        let g2 = decompose(&gains_to_tf(&g).unwrap(), p).unwrap().g2;
        let middle = controllable_canonical(&g2).unwrap();
        vec![
            Controller::Gains(g.clone()),
            Controller::Realization(from_delayed_gains(&g).unwrap()),
            Controller::Realization(pipeline_realization(p, &middle).unwrap()),
            Controller::Circuit(pipeline_circuit(p, &middle).unwrap()),
            Controller::Circuit(pipeline_circuit(p, &observable_canonical(&g2).unwrap()).unwrap()),
        ]
    }

    #[test]
    fn pulse_shape() {
        let p = pulse(1.0, 5, 10).unwrap();
        let w: Vec<f64> = (0..20).map(|t| p.at(t)).collect();
        assert_eq!(w.iter().filter(|&&x| x == 1.0).count(), 10);
        assert_eq!((w[4], w[5], w[14], w[15]), (0.0, 1.0, 1.0, 0.0));
        let kick = pulse(1.0, 0, 1).unwrap();
        assert_eq!((kick.at(0), kick.at(1)), (1.0, 0.0));
        assert!(pulse(1.0, 0, 0).is_err());
        assert!(pulse(f64::NAN, 0, 1).is_err());
    }

    #[test]
    fn no_disturbance_stays_at_rest() {
        for c in controllers(DecompositionParams::default()) {
            let tr = closed_loop(&plant(), &c, &Disturbance::None, 50).unwrap();
            assert!(tr.delta_f.iter().chain(&tr.delta_r).all(|&v| v == 0.0));
            assert_eq!(cost_of_trace(&tr, &LqrWeights::default()), 0.0);
        }
    }

    #[test]
    fn representations_agree() {
        let d = pulse(1.0, 10, 10).unwrap();
        for p in [
            DecompositionParams::default(),
            DecompositionParams::new(2.0, 0.5, 0.3, -0.6).unwrap(),
        ] {
            let traces: Vec<ClosedLoopTrace> = controllers(p)
                .iter()
                .map(|c| closed_loop(&plant(), c, &d, 200).unwrap())
                .collect();
            for tr in &traces[1..] {
                assert!(max_diff(&tr.delta_f, &traces[0].delta_f) < 1e-10);
                assert!(max_diff(&tr.delta_r, &traces[0].delta_r) < 1e-10);
            }
        }
    }

    #[test]
    fn delayed_response_and_settling() {
        let d = pulse(1.0, 5, 1).unwrap();
        for c in controllers(DecompositionParams::new(1.0, 1.0, 0.5, 0.2).unwrap()) {
            let tr = closed_loop(&plant(), &c, &d, 200).unwrap();
            assert!(tr.delta_r[..7].iter().all(|&v| v == 0.0));
            assert!(tr.delta_r[7] != 0.0);
            assert!(tr.delta_f[d.end() + 100].abs() < 1e-6);
        }
    }

    #[test]
    fn decomposition_parameters_only_change_internals() {
        let d = pulse(1.0, 10, 10).unwrap();
        let g2_of = |p| decompose(&gains_to_tf(&gains()).unwrap(), p).unwrap().g2;
        let pa = DecompositionParams::default();
        let pb = DecompositionParams::new(3.0, 0.4, 0.7, -0.5).unwrap();
        let run = |p| {
            let c = pipeline_circuit(p, &controllable_canonical(&g2_of(p)).unwrap()).unwrap();
            closed_loop(&plant(), &Controller::Circuit(c), &d, 150).unwrap()
        };
        let (a, b) = (run(pa), run(pb));
        assert!(max_diff(&a.delta_f, &b.delta_f) < 1e-10);
        assert!(max_diff(&a.delta_r, &b.delta_r) < 1e-10);
        let (na, nb) = (a.neurons.unwrap(), b.neurons.unwrap());
        assert!(max_diff(na.get("g1.x").unwrap(), nb.get("g1.x").unwrap()) > 0.1);
    }

    #[test]
    fn insufficient_delay_rejected() {
        let fast = Realization::new(
            nalgebra::DMatrix::from_element(1, 1, 0.5),
            DVector::from_element(1, 1.0),
            nalgebra::RowDVector::from_element(1, 1.0),
            0.0,
        )
        .unwrap();
        assert_eq!(
            closed_loop(&plant(), &Controller::Realization(fast), &Disturbance::None, 10),
            Err(Error::InsufficientDelay { got: 1, required: 2 })
        );
        let one_step = OptimalGains::from_vec(vec![-0.1, 0.2]).unwrap();
        assert!(matches!(
            closed_loop(&plant(), &Controller::Gains(one_step), &Disturbance::None, 10),
            Err(Error::InsufficientDelay { got: 1, .. })
        ));
    }

    #[test]
    fn superposition_of_pulses() {
        let c = Controller::Gains(gains());
        let (p1, p2) = (pulse(1.0, 3, 4).unwrap(), pulse(-0.5, 20, 2).unwrap());
        let a = closed_loop(&plant(), &c, &p1, 80).unwrap();
        let b = closed_loop(&plant(), &c, &p2, 80).unwrap();
        // Superposed disturbance via a realization-free direct recursion.
        let mut df = vec![0.0; 80];
        let mut dr = vec![0.0; 80];
        let k = gains();
        let (mut gamma, mut r) = (0.0, 0.0);
        for t in 0..80 {
            let w = p1.at(t) + p2.at(t);
            df[t] = if t == 0 { w } else { plant().a * df[t - 1] + plant().b * dr[t - 1] + w };
            dr[t] = r;
            let mu = k.k0() * df[t] + k.k1() * gamma + k.k2() * r;
            r = gamma;
            gamma = mu;
        }
        let sum_f: Vec<f64> = a.delta_f.iter().zip(&b.delta_f).map(|(x, y)| x + y).collect();
        assert!(max_diff(&sum_f, &df) < 1e-12);
    }

    #[test]
    fn open_loop_follows_rate() {
        let input: Vec<f64> = (0..60).map(|t| if (10..30).contains(&t) { 1.0 } else { 0.0 }).collect();
        let tr = open_loop_trace(&plant(), &input, 60).unwrap();
        assert_eq!(tr.delta_r, input);
        assert_eq!(tr.delta_f[10], 0.0);
        assert!(tr.delta_f[11] > 0.0);
        // Step gain b/(1 − a).
        let dc = plant().b / (1.0 - plant().a);
        assert!((tr.delta_f[29] - dc).abs() < 1e-3 * dc);
        assert!(tr.delta_f[59].abs() < 1e-3);
    }

    #[test]
    fn csv_layout_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = DecompositionParams::default();
        let g2 = decompose(&gains_to_tf(&gains()).unwrap(), p).unwrap().g2;
        let (middle, _) = random_general_realization(&g2, &mut rng).unwrap();
        let c = Controller::Circuit(pipeline_circuit(p, &middle).unwrap());
        let op = OperatingPoint::at_rate(&MuscleParams::default(), 1.0).unwrap();
        let tr = closed_loop(&plant(), &c, &pulse(1.0, 2, 3).unwrap(), 20).unwrap();
        let csv = tr.to_csv(&op);
        assert!(csv.starts_with("t,delta_f,delta_r,f_abs,r_abs,neuron_g1.x,neuron_g2.x1,neuron_g2.x2,neuron_g3.x\n"));
        assert_eq!(csv.lines().count(), 21);
        assert_eq!(csv, closed_loop(&plant(), &c, &pulse(1.0, 2, 3).unwrap(), 20).unwrap().to_csv(&op));
        assert!((tr.f_abs(&op)[0] - op.f_bar).abs() < 1e-12);
    }
}
