//! Command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ControllerChoice, RealizationChoice, RunConfig};
use crate::delay_compat::{closure, controller_delay_matrix, search_assignments, DelayGraph};
use crate::delayed_lqr::{gains_to_tf, synthesize, LqrSolution};
use crate::error::{Error, Result};
use crate::neural_circuit::NeuralCircuit;
use crate::realization::{
    controllable_canonical, is_minimal, observable_canonical, random_general_realization, Realization,
};
use crate::simulation::{closed_loop, open_loop_trace, pipeline_circuit, pipeline_realization, ClosedLoopTrace, Controller};
use crate::structure_graph::{decomposed_structure, ifp_structure, ControllerStructure};
use crate::svg::stacked_plot;
use crate::transfer_fn::{decompose, Decomposition, RationalTransferFunction};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INCOMPATIBLE: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "neurolqr", version, about = "Delayed optimal muscle control and its neural circuit realizations")]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the delayed LQR problem and write controller.txt.
    Synthesize,
    /// Split the controller into relay stages around a second-order core.
    Decompose,
    /// Realize the core, translate the pipeline into a circuit.
    Realize,
    /// Search for a delay assignment of a structure on a delay graph.
    CheckCompat { structure: PathBuf, graph: PathBuf },
    /// Run the closed loop and write trace.csv and trace.svg.
    Simulate,
    /// Print a bundled structure or delay graph.
    ExportStructure {
        #[arg(value_enum)]
        kind: ExportKind,
        /// Write to a file instead of stdout.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExportKind {
    /// Structure of the augmented-state gain law.
    Ifp,
    /// Relay, core and relay stages in series.
    Decomposed,
    /// Sensor, nervous system and muscle with unit delays.
    MuscleGraph,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Start from a named preset (open-loop, closed-loop, controllable, observable, general).
    #[arg(long, global = true)]
    preset: Option<String>,
    /// File of `key = value` lines applied after the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    f_max: Option<String>,
    #[arg(long, global = true, value_name = "S")]
    tau: Option<String>,
    #[arg(long, global = true)]
    r_bar: Option<String>,
    #[arg(long, global = true, value_name = "S")]
    ts: Option<String>,
    #[arg(long, global = true, value_name = "STEPS")]
    delay: Option<String>,
    #[arg(long, global = true)]
    q: Option<String>,
    #[arg(long, global = true)]
    r: Option<String>,
    #[arg(long, global = true)]
    c1: Option<String>,
    #[arg(long, global = true)]
    c3: Option<String>,
    #[arg(long, global = true)]
    eps1: Option<String>,
    #[arg(long, global = true)]
    eps3: Option<String>,
    /// controllable, observable or general
    #[arg(long, global = true)]
    realization: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// open_loop, gains or circuit
    #[arg(long, global = true)]
    controller: Option<String>,
    /// pulse or none
    #[arg(long, global = true)]
    disturbance: Option<String>,
    #[arg(long, global = true)]
    pulse_amplitude: Option<String>,
    #[arg(long, global = true)]
    pulse_start: Option<String>,
    #[arg(long, global = true)]
    pulse_duration: Option<String>,
    #[arg(long, global = true, value_name = "STEPS")]
    horizon: Option<String>,
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.preset {
            Some(p) => RunConfig::preset(p)?,
            None => RunConfig::default(),
        };
        if let Some(path) = &self.config {
            cfg.apply_text(&read(path)?)?;
        }
        let flags = [
            ("f_max", &self.f_max),
            ("tau", &self.tau),
            ("r_bar", &self.r_bar),
            ("ts", &self.ts),
            ("delay", &self.delay),
            ("q", &self.q),
            ("r", &self.r),
            ("c1", &self.c1),
            ("c3", &self.c3),
            ("eps1", &self.eps1),
            ("eps3", &self.eps3),
            ("realization", &self.realization),
            ("seed", &self.seed),
            ("controller", &self.controller),
            ("disturbance", &self.disturbance),
            ("pulse_amplitude", &self.pulse_amplitude),
            ("pulse_start", &self.pulse_start),
            ("pulse_duration", &self.pulse_duration),
            ("horizon", &self.horizon),
            ("out_dir", &self.out_dir),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Parse {
        line: 0,
        message: format!("cannot read {}: {e}", path.display()),
    })
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let io = |e: std::io::Error| crate::error::invalid("out_dir", format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(io)?;
    Ok(path)
}

/// Everything derived from a configuration up to the deployed circuit.
struct Design {
    cfg: RunConfig,
    solution: LqrSolution,
    tf: RationalTransferFunction,
}

impl Design {
    fn new(cfg: RunConfig) -> Result<Self> {
        let (_, solution) = synthesize(&cfg.plant()?, cfg.delay, &cfg.weights()?)?;
        let tf = if solution.gains.is_zero() {
            RationalTransferFunction::constant(0.0)
        } else {
            gains_to_tf(&solution.gains)?
        };
        Ok(Self { cfg, solution, tf })
    }

    fn decomposition(&self) -> Result<Decomposition> {
        decompose(&self.tf, self.cfg.decomposition()?)
    }

    /// Core realization and, for general ones, the transform used.
    fn middle(&self) -> Result<(Realization, Option<DMatrix<f64>>)> {
        let g2 = self.decomposition()?.g2;
        Ok(match self.cfg.realization {
            RealizationChoice::Controllable => (controllable_canonical(&g2)?, None),
            RealizationChoice::Observable => (observable_canonical(&g2)?, None),
            RealizationChoice::General => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
                let (r, p) = random_general_realization(&g2, &mut rng)?;
                (r, Some(p))
            }
        })
    }

    fn circuit(&self) -> Result<NeuralCircuit> {
        pipeline_circuit(self.cfg.decomposition()?, &self.middle()?.0)
    }

    fn provenance(&self) -> String {
        match self.cfg.realization {
            RealizationChoice::General => format!("realization general, seed {}", self.cfg.seed),
            other => format!("realization {other}"),
        }
    }
}

fn fmt_row(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.12}")).collect::<Vec<_>>().join(" ")
}

fn controller_text(d: &Design) -> String {
    let g = &d.solution.gains;
    let mut s = String::from("# delayed LQR controller\n");
    writeln!(s, "q {}\nr {}\ndelay {}", d.cfg.q, d.cfg.r, g.delay()).unwrap();
    for (i, k) in g.as_slice().iter().enumerate() {
        writeln!(s, "k{i} {k:.15e}").unwrap();
    }
    writeln!(s, "num {}", fmt_row(d.tf.num())).unwrap();
    writeln!(s, "den {}", fmt_row(d.tf.den())).unwrap();
    writeln!(s, "relative_degree {}", d.tf.relative_degree().map_or(0, |v| v)).unwrap();
    s
}

fn realization_text(r: &Realization, header: &str) -> String {
    let mut s = format!("# {header}\n");
    writeln!(s, "states {}", r.labels.join(" ")).unwrap();
    for i in 0..r.order() {
        let row: Vec<f64> = r.f.row(i).iter().copied().collect();
        writeln!(s, "F {}", fmt_row(&row)).unwrap();
    }
    writeln!(s, "H {}", fmt_row(r.h.as_slice())).unwrap();
    writeln!(s, "M {}", fmt_row(&r.m.iter().copied().collect::<Vec<_>>())).unwrap();
    writeln!(s, "N {:.12}", r.n_ff).unwrap();
    s
}

fn cmd_synthesize(cfg: RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let plant = cfg.plant()?;
    let op = cfg.operating_point()?;
    let d = Design::new(cfg)?;
    let g = &d.solution.gains;
    let _ = writeln!(out, "plant: a = {:.6}, b = {:.6}, f_bar = {:.4}", plant.a, plant.b, op.f_bar);
    let gains: Vec<String> = g.as_slice().iter().enumerate().map(|(i, k)| format!("K{i} = {k:.6}")).collect();
    let _ = writeln!(out, "gains: {}", gains.join(", "));
    let _ = writeln!(out, "riccati iterations: {}", d.solution.iterations);
    let _ = writeln!(out, "G(z) = {}", d.tf);
    match d.tf.relative_degree() {
        Ok(rd) => {
            let _ = writeln!(out, "relative degree: {rd}");
        }
        Err(_) => {
            let _ = writeln!(out, "relative degree: undefined (zero controller)");
        }
    }
    if g.is_zero() {
        let _ = writeln!(err, "warning: all gains are zero; the controller never acts");
    }
    let path = write_file(&d.cfg.out_dir, "controller.txt", &controller_text(&d))?;
    let _ = writeln!(out, "wrote {}", path.display());
    Ok(EXIT_OK)
}

fn cmd_decompose(cfg: RunConfig, out: &mut dyn Write) -> Result<i32> {
    let d = Design::new(cfg)?;
    let dec = d.decomposition()?;
    let residual = dec.reduced_product()?.max_coeff_diff(&d.tf).unwrap_or(f64::INFINITY);
    let mut s = String::new();
    writeln!(s, "G(z)  = {}", d.tf).unwrap();
    writeln!(s, "G1(z) = {}", dec.g1).unwrap();
    writeln!(s, "G2(z) = {}", dec.g2).unwrap();
    writeln!(s, "G3(z) = {}", dec.g3).unwrap();
    writeln!(s, "max |G3 G2 G1 - G| coefficient: {residual:.3e}").unwrap();
    let _ = out.write_all(s.as_bytes());
    let path = write_file(&d.cfg.out_dir, "decomposition.txt", &s)?;
    let _ = writeln!(out, "wrote {}", path.display());
    Ok(EXIT_OK)
}

fn cmd_realize(cfg: RunConfig, out: &mut dyn Write) -> Result<i32> {
    let d = Design::new(cfg)?;
    let p = d.cfg.decomposition()?;
    let (middle, transform) = d.middle()?;
    let pipeline = pipeline_realization(p, &middle)?;
    let circuit = d.circuit()?;
    let structure = decomposed_structure(p, &middle)?;
    let mut s = realization_text(&middle, &d.provenance());
    if let Some(t) = &transform {
        for i in 0..t.nrows() {
            let row: Vec<f64> = t.row(i).iter().copied().collect();
            writeln!(s, "P {}", fmt_row(&row)).unwrap();
        }
    }
    let _ = out.write_all(s.as_bytes());
    let _ = writeln!(out, "core minimal: {}", is_minimal(&middle));
    let _ = writeln!(out, "pipeline states: {}, minimal: {}", pipeline.order(), is_minimal(&pipeline));
    let _ = writeln!(
        out,
        "circuit: {} neurons, {} summation sites",
        circuit.neuron_count(),
        circuit.summation_site_count()
    );
    for id in circuit.neuron_ids() {
        let _ = writeln!(out, "  {id}: {} axon branches", circuit.branch_count(id)?);
    }
    let dir = &d.cfg.out_dir;
    let header = format!("# {}\n", d.provenance());
    for (name, body) in [
        ("realization.txt", s.clone()),
        ("circuit.txt", header.clone() + &circuit.to_text()),
        ("structure.txt", header + &structure.to_text()),
    ] {
        let path = write_file(dir, name, &body)?;
        let _ = writeln!(out, "wrote {}", path.display());
    }
    Ok(EXIT_OK)
}

fn cmd_check_compat(structure: &Path, graph: &Path, out: &mut dyn Write) -> Result<i32> {
    let s = ControllerStructure::parse(&read(structure)?)?;
    let g = DelayGraph::parse(&read(graph)?)?;
    let e = closure(&g);
    let outcome = search_assignments(&s, &g);
    match outcome.witness {
        Some(a) => {
            let e_tilde = controller_delay_matrix(&s, &a, g.n())?;
            let _ = writeln!(out, "COMPATIBLE");
            let _ = writeln!(out, "assignment:");
            for (v, signals) in a.by_vertex(g.n()).iter().enumerate() {
                let _ = writeln!(out, "  v{}: {}", v + 1, signals.join(" "));
            }
            let _ = writeln!(out, "controller delay matrix:\n{e_tilde}");
            let _ = writeln!(out, "graph delay matrix:\n{e}");
            Ok(EXIT_OK)
        }
        None => {
            let _ = writeln!(out, "INCOMPATIBLE");
            let _ = writeln!(
                out,
                "exhaustive search over {} signals on {} vertices examined {} partial assignments; none compatible",
                s.len(),
                g.n(),
                outcome.visited
            );
            for ((i, j), count) in &outcome.rejections {
                let _ = writeln!(
                    out,
                    "  {count} rejected: a path v{} -> v{} faster than the graph allows ({})",
                    i + 1,
                    j + 1,
                    e.get(*i, *j)
                );
            }
            let _ = writeln!(out, "graph delay matrix:\n{e}");
            Ok(EXIT_INCOMPATIBLE)
        }
    }
}

fn simulate(d: &Design) -> Result<ClosedLoopTrace> {
    let cfg = &d.cfg;
    let plant = cfg.plant()?;
    let dist = cfg.disturbance()?;
    match cfg.controller {
        ControllerChoice::OpenLoop => {
            let input: Vec<f64> = (0..cfg.horizon).map(|t| dist.at(t)).collect();
            open_loop_trace(&plant, &input, cfg.horizon)
        }
        ControllerChoice::Gains => closed_loop(&plant, &Controller::Gains(d.solution.gains.clone()), &dist, cfg.horizon),
        ControllerChoice::Circuit => closed_loop(&plant, &Controller::Circuit(d.circuit()?), &dist, cfg.horizon),
    }
}

fn cmd_simulate(cfg: RunConfig, out: &mut dyn Write) -> Result<i32> {
    let op = cfg.operating_point()?;
    let d = Design::new(cfg)?;
    let trace = simulate(&d)?;
    let cfg = &d.cfg;
    let csv = trace.to_csv(&op);
    let rows = trace.rows(&op);
    let series: Vec<(String, Vec<f64>)> = trace
        .column_names()
        .into_iter()
        .enumerate()
        .skip(1)
        .map(|(c, name)| (name, rows.iter().map(|r| r[c]).collect()))
        .collect();
    let notes = vec![
        format!("controller {}", cfg.controller),
        d.provenance(),
        format!("decomposition c1 {} c3 {} eps1 {} eps3 {}", cfg.c1, cfg.c3, cfg.eps1, cfg.eps3),
    ];
    let title = format!("{} response, {} steps of {} s", cfg.controller, cfg.horizon, cfg.ts);
    let svg = stacked_plot(&title, &notes, &trace.time(), &series);
    let mut written = vec![
        write_file(&cfg.out_dir, "trace.csv", &csv)?,
        write_file(&cfg.out_dir, "trace.svg", &svg)?,
        write_file(&cfg.out_dir, "config.txt", &cfg.to_text())?,
    ];
    if cfg.controller == ControllerChoice::Circuit {
        let body = format!("# {}\n{}", d.provenance(), d.circuit()?.to_text());
        written.push(write_file(&cfg.out_dir, "circuit.txt", &body)?);
    }
    let peak = trace.delta_f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let _ = writeln!(
        out,
        "{} steps, peak |delta_f| = {peak:.6}, final delta_f = {:.3e}",
        trace.len(),
        trace.delta_f.last().copied().unwrap_or(0.0)
    );
    for p in written {
        let _ = writeln!(out, "wrote {}", p.display());
    }
    Ok(EXIT_OK)
}

fn cmd_export(cfg: RunConfig, kind: ExportKind, output: Option<&Path>, out: &mut dyn Write) -> Result<i32> {
    let text = match kind {
        ExportKind::MuscleGraph => DelayGraph::muscle().to_text(),
        ExportKind::Ifp => ifp_structure(&Design::new(cfg)?.solution.gains)?.to_text(),
        ExportKind::Decomposed => {
            let d = Design::new(cfg)?;
            format!("# {}\n{}", d.provenance(), decomposed_structure(d.cfg.decomposition()?, &d.middle()?.0)?.to_text())
        }
    };
    match output {
        Some(path) => {
            let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let name = path.file_name().and_then(|n| n.to_str()).ok_or_else(|| crate::error::invalid("output", "not a file path"))?;
            let written = write_file(dir, name, &text)?;
            let _ = writeln!(out, "wrote {}", written.display());
        }
        None => {
            let _ = out.write_all(text.as_bytes());
        }
    }
    Ok(EXIT_OK)
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(rendered.as_bytes()) } else { out.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    let result = (|| -> Result<i32> {
        if let Command::CheckCompat { structure, graph } = &cli.command {
            return cmd_check_compat(structure, graph, out);
        }
        let cfg = cli.config.resolve()?;
        match &cli.command {
            Command::Synthesize => cmd_synthesize(cfg, out, err),
            Command::Decompose => cmd_decompose(cfg, out),
            Command::Realize => cmd_realize(cfg, out),
            Command::Simulate => cmd_simulate(cfg, out),
            Command::ExportStructure { kind, output } => cmd_export(cfg, *kind, output.as_deref(), out),
            Command::CheckCompat { .. } => unreachable!(),
        }
    })();
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}
