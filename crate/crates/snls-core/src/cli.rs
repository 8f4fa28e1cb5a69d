//! Command-line driver. Exit codes: 0 success, 1 failed criterion,
//! 2 configuration or usage error.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;

use crate::acceptance::run_all;
use crate::config::{Command, ConfigError, Manifest, Overrides, RunConfig};
use crate::diagram::{multi_to_diagrams, Diagram};
use crate::numerics::decay::{directional_decay_test, DecayWindow};
use crate::numerics::estimate::Estimate;
use crate::numerics::evaluate::{evaluate_diagram, Bindings};
use crate::numerics::kernel::{coeff_c_with, kernel_g_window, Propagator, QKernel};
use crate::numerics::lattice::{BumpParams, TestFunction};
use crate::numerics::scaling::{default_probe, scaling_degree_estimate, scaling_lattice, ScalingKernel, DEFAULT_SCALES};
use crate::numerics::simulate::{simulate_linear, slope_reports, FirstOrderSimulator};
use crate::perturbation::{counterterms, expand, expectation, m_point_expr, two_point, PerturbationError};
use crate::power_counting::{admissible_trees, maximal_contraction, subcritical_report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CRITERION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "snls", version, about = "Perturbative stochastic NLS: symbolic expansion and lattice checks")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// TOML config, or a manifest.json from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    order: Option<u32>,
    #[arg(long, global = true)]
    kappa: Option<u32>,
    /// Spatial dimension.
    #[arg(long, global = true)]
    dim: Option<u32>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    realizations: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Write F_0..F_K.
    Expand,
    /// Check that the mean of the solution vanishes order by order.
    Expect,
    /// List m-point diagrams and evaluate two-point ones on the lattice.
    Correlate,
    /// Power counting report and DOT files.
    Analyze,
    /// Monte Carlo, scaling-degree and decay runs.
    Simulate,
    /// Run the acceptance criteria.
    Verify,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Command {
        match c {
            Cmd::Expand => Command::Expand,
            Cmd::Expect => Command::Expect,
            Cmd::Correlate => Command::Correlate,
            Cmd::Analyze => Command::Analyze,
            Cmd::Simulate => Command::Simulate,
            Cmd::Verify => Command::Verify,
        }
    }
}

/// Failure of a run, mapped onto an exit code.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Criterion(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            _ => EXIT_CRITERION,
        }
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Other(e.to_string())
    }
}

fn other<E: std::fmt::Display>(e: E) -> RunError {
    RunError::Other(e.to_string())
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("snls: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: &Cli) -> Result<(), RunError> {
    let cmd: Command = cli.command.into();
    let (mut cfg, source) = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => (RunConfig::default(), String::new()),
    };
    cfg.apply(&Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        order: cli.order,
        kappa: cli.kappa,
        dim: cli.dim,
        lambda: cli.lambda,
        realizations: cli.realizations,
    });
    cfg.validate(cmd, &source)?;
    fs::create_dir_all(&cfg.out)?;
    write_manifest(cmd, &cfg)?;
    match cmd {
        Command::Expand => cmd_expand(&cfg),
        Command::Expect => cmd_expect(&cfg),
        Command::Correlate => cmd_correlate(&cfg),
        Command::Analyze => cmd_analyze(&cfg),
        Command::Simulate => cmd_simulate(&cfg),
        Command::Verify => cmd_verify(&cfg),
    }
}

fn write_manifest(cmd: Command, cfg: &RunConfig) -> Result<(), RunError> {
    let m = Manifest { command: cmd, version: env!("CARGO_PKG_VERSION").into(), config: cfg.clone(), lattice_spec: cfg.spec() };
    fs::write(cfg.out.join("manifest.json"), serde_json::to_string_pretty(&m).map_err(other)? + "\n")?;
    fs::write(cfg.out.join("manifest.toml"), cfg.to_toml())?;
    Ok(())
}

fn path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out.join(name)
}

fn write_csv<T: Serialize>(file: &Path, rows: &[T]) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(file)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn perturbation_err(e: PerturbationError) -> RunError {
    match e {
        PerturbationError::OddPoints(_) | PerturbationError::ZeroKappa | PerturbationError::OrderTooHigh { .. } => {
            RunError::Config(ConfigError { line: None, message: e.to_string() })
        }
        e => RunError::Criterion(e.to_string()),
    }
}

pub fn cmd_expand(cfg: &RunConfig) -> Result<(), RunError> {
    let sol = expand(cfg.kappa, cfg.order).map_err(perturbation_err)?;
    let coeffs: Vec<serde_json::Value> = sol
        .coefficients
        .iter()
        .enumerate()
        .map(|(k, f)| serde_json::json!({ "k": k, "terms": f.len(), "expr": f.to_json(), "pretty": f.to_string() }))
        .collect();
    let cts = counterterms(&sol, cfg.order).map_err(perturbation_err)?;
    let cts_json: Vec<serde_json::Value> = cts
        .entries
        .iter()
        .enumerate()
        .map(|(i, m)| serde_json::json!({ "k": i + 1, "expr": m.to_json(), "pretty": m.to_string() }))
        .collect();
    let diagrams: Vec<serde_json::Value> =
        two_point(&sol, cfg.order).map_err(perturbation_err)?.iter().map(Diagram::to_json).collect();
    let doc = serde_json::json!({
        "kappa": cfg.kappa,
        "order": cfg.order,
        "coefficients": coeffs,
        "counterterms": cts_json,
        "two_point_diagrams": diagrams,
    });
    fs::write(path(cfg, "expansion.json"), serde_json::to_string_pretty(&doc).map_err(other)? + "\n")?;
    let mut txt = String::new();
    for (k, f) in sol.coefficients.iter().enumerate() {
        txt.push_str(&format!("F_{k} = {f}\n"));
    }
    fs::write(path(cfg, "expansion.txt"), &txt)?;
    print!("{txt}");
    Ok(())
}

#[derive(Serialize)]
struct ExpectRow {
    kappa: u32,
    k: u32,
    terms: usize,
    zero: bool,
}

pub fn cmd_expect(cfg: &RunConfig) -> Result<(), RunError> {
    let sol = expand(cfg.kappa, cfg.order).map_err(perturbation_err)?;
    let mut rows = Vec::new();
    for k in 0..=cfg.order {
        let e = expectation(&sol, k).map_err(perturbation_err)?;
        rows.push(ExpectRow { kappa: cfg.kappa, k, terms: e.len(), zero: e.is_zero() });
        println!("E[psi] through order {k}: {}", if e.is_zero() { "0".to_string() } else { e.to_string() });
    }
    write_csv(&path(cfg, "expectation.csv"), &rows)?;
    if rows.iter().all(|r| r.zero) {
        Ok(())
    } else {
        Err(RunError::Criterion("nonzero expectation".into()))
    }
}

fn edge_summary(d: &Diagram) -> String {
    d.edges
        .iter()
        .map(|e| format!("{}({},{})", e.kind.label(), d.vertices[e.src].label, d.vertices[e.dst].label))
        .collect::<Vec<_>>()
        .join(" ")
}

fn decoration_summary(d: &Diagram) -> String {
    d.vertices
        .iter()
        .filter(|v| !v.decorations.is_empty())
        .map(|v| format!("{}:{:?}", v.label, v.decorations))
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Serialize)]
struct CorrelateRow {
    diagram: usize,
    lambda_power: u32,
    symmetry_factor: String,
    edges: String,
    decorations: String,
    observable: String,
    value_re: Option<f64>,
    value_im: Option<f64>,
}

pub fn cmd_correlate(cfg: &RunConfig) -> Result<(), RunError> {
    let sol = expand(cfg.kappa, cfg.order).map_err(perturbation_err)?;
    let m = cfg.correlate.points;
    let multi = m_point_expr(&sol, m, cfg.order, true).map_err(perturbation_err)?;
    let diags = multi_to_diagrams(&multi);
    let dot_dir = path(cfg, "dot");
    fs::create_dir_all(&dot_dir)?;
    for (i, d) in diags.iter().enumerate() {
        fs::write(dot_dir.join(format!("diagram_{i}.dot")), d.to_dot(&format!("diagram_{i}")))?;
    }
    let json: Vec<serde_json::Value> = diags.iter().map(Diagram::to_json).collect();
    fs::write(path(cfg, "diagrams.json"), serde_json::to_string_pretty(&json).map_err(other)? + "\n")?;
    let evaluate = cfg.correlate.evaluate && m == 2;
    let lattice = if evaluate {
        let spec = cfg.spec();
        let prop = Propagator::new(&spec).map_err(other)?;
        let cbar = coeff_c_with(&prop, cfg.extension).map_err(other)?;
        Some((spec, prop, Bindings::from_cbar(&cbar)))
    } else {
        None
    };
    let mut rows = Vec::new();
    for (i, d) in diags.iter().enumerate() {
        let (n, den) = d.symmetry_factor;
        let sf = if den == 1 { n.to_string() } else { format!("{n}/{den}") };
        println!("[{i}] {sf} lambda^{} {} {}", d.lambda_power, edge_summary(d), decoration_summary(d));
        let base = |observable: String, v: Option<Complex64>| CorrelateRow {
            diagram: i,
            lambda_power: d.lambda_power,
            symmetry_factor: sf.clone(),
            edges: edge_summary(d),
            decorations: decoration_summary(d),
            observable,
            value_re: v.map(|z| z.re),
            value_im: v.map(|z| z.im),
        };
        match &lattice {
            Some((spec, prop, b)) => {
                for o in &cfg.observables {
                    let (f1, f2) = (TestFunction::bump(spec, &o.f1), TestFunction::bump(spec, &o.f2));
                    // Diagrams with loops have no forest evaluation.
                    let v = evaluate_diagram(d, prop, &[&f1, &f2], b).ok();
                    if let Some(z) = v {
                        println!("      {}: {:.6e} {:+.6e}i", o.name, z.re, z.im);
                    }
                    rows.push(base(o.name.clone(), v));
                }
            }
            None => rows.push(base(String::new(), None)),
        }
    }
    write_csv(&path(cfg, "correlate.csv"), &rows)?;
    Ok(())
}

pub fn cmd_analyze(cfg: &RunConfig) -> Result<(), RunError> {
    let rep = subcritical_report(cfg.d as u64, cfg.kappa, cfg.analyze.k_max);
    let mut w = fs::File::create(path(cfg, "divergence.csv"))?;
    rep.write_csv(&mut w)?;
    w.flush()?;
    let verdict = serde_json::json!({
        "d": rep.d,
        "kappa": rep.kappa,
        "k_max": cfg.analyze.k_max,
        "subcritical": rep.subcritical,
        "max_divergent_order": rep.max_divergent_order,
        "divergent_graphs": rep.rows.iter().filter(|r| r.divergent).count(),
        "graphs": rep.rows.len(),
    });
    fs::write(path(cfg, "verdict.json"), serde_json::to_string_pretty(&verdict).map_err(other)? + "\n")?;
    let dot_dir = path(cfg, "dot");
    fs::create_dir_all(&dot_dir)?;
    // Divergent graphs only, and at most through order 3.
    for k in 0..=cfg.analyze.k_max.min(3) {
        for (id, t) in admissible_trees(cfg.kappa, k).iter().enumerate() {
            let divergent = rep.rows.iter().any(|r| r.k == k && r.diagram_id == id && r.divergent);
            if divergent {
                let name = format!("k{k}_graph{id}");
                fs::write(dot_dir.join(format!("{name}.dot")), maximal_contraction(t).canonical().to_dot(&name))?;
            }
        }
    }
    println!(
        "d={} kappa={}: {} ({} of {} graphs divergent, max divergent order {:?})",
        rep.d,
        rep.kappa,
        if rep.subcritical { "subcritical" } else { "not subcritical" },
        verdict["divergent_graphs"],
        rep.rows.len(),
        rep.max_divergent_order
    );
    Ok(())
}

#[derive(Serialize)]
struct EstimateRow {
    observable: String,
    mean_re: f64,
    mean_im: f64,
    stderr: f64,
    n: u64,
}

impl EstimateRow {
    fn new(observable: String, e: &Estimate) -> Self {
        EstimateRow { observable, mean_re: e.mean.re, mean_im: e.mean.im, stderr: e.stderr, n: e.n }
    }
}

#[derive(Serialize)]
struct ValueRow {
    observable: String,
    re: f64,
    im: f64,
}

#[derive(Serialize)]
struct ScalingRow {
    kernel: String,
    estimate: f64,
    fit_residual: f64,
    reliable: bool,
}

#[derive(Serialize)]
struct DecayCsvRow {
    base_x: f64,
    direction: String,
    exponent: f64,
    points: usize,
    rapid: bool,
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<(), RunError> {
    let spec = cfg.spec();
    let prop = Propagator::new(&spec).map_err(other)?;
    let q = QKernel { prop: prop.clone() };
    let pairs: Vec<(TestFunction, TestFunction)> =
        cfg.observables.iter().map(|o| (TestFunction::bump(&spec, &o.f1), TestFunction::bump(&spec, &o.f2))).collect();
    let lin = simulate_linear(&spec, cfg.n_real, &pairs, cfg.seed).map_err(other)?;
    let mut est = Vec::new();
    let mut exact = Vec::new();
    for (i, o) in cfg.observables.iter().enumerate() {
        est.push(EstimateRow::new(format!("{}:covariance", o.name), &lin.covariance[i]));
        est.push(EstimateRow::new(format!("{}:pseudo_covariance", o.name), &lin.pseudo_covariance[i]));
        est.push(EstimateRow::new(format!("{}:mean", o.name), &lin.mean[i]));
        let z = q.pair_tf(&pairs[i].0, &pairs[i].1);
        exact.push(ValueRow { observable: format!("{}:Q", o.name), re: z.re, im: z.im });
    }
    if !cfg.simulate.lambdas.is_empty() {
        let sim = FirstOrderSimulator::new(&spec, cfg.extension, cfg.seed).map_err(other)?;
        let sol = expand(1, 1).map_err(perturbation_err)?;
        let diags: Vec<Diagram> =
            two_point(&sol, 1).map_err(perturbation_err)?.into_iter().filter(|d| d.lambda_power == 1).collect();
        let b = Bindings::from_cbar(&sim.cbar);
        for (i, o) in cfg.observables.iter().enumerate() {
            let (f1, f2) = (&pairs[i].0, &pairs[i].1);
            let mut slope = Complex64::new(0.0, 0.0);
            for d in &diags {
                slope += evaluate_diagram(d, &sim.prop, &[f1, f2], &b).map_err(other)?;
            }
            exact.push(ValueRow { observable: format!("{}:order1_diagrams", o.name), re: slope.re, im: slope.im });
            let samples = sim.samples(cfg.n_real, f1, f2).map_err(other)?;
            for r in slope_reports(&samples, &cfg.simulate.lambdas) {
                let two: crate::numerics::estimate::Accumulator = samples.iter().map(|s| s.two_point(r.lambda)).collect();
                est.push(EstimateRow::new(format!("{}:two_point:lambda={}", o.name, r.lambda), &two.estimate()));
                est.push(EstimateRow::new(format!("{}:slope_forward:lambda={}", o.name, r.lambda), &r.forward));
                est.push(EstimateRow::new(format!("{}:slope_central:lambda={}", o.name, r.lambda), &r.central));
                est.push(EstimateRow::new(format!("{}:psi_mean:lambda={}", o.name, r.lambda), &r.mean));
            }
        }
    }
    write_csv(&path(cfg, "estimates.csv"), &est)?;
    write_csv(&path(cfg, "kernel_values.csv"), &exact)?;
    for r in &est {
        println!("{:<40} {:+.6e} {:+.6e}i ± {:.2e} (n={})", r.observable, r.mean_re, r.mean_im, r.stderr, r.n);
    }
    if cfg.simulate.scaling {
        let s = scaling_lattice();
        let g = kernel_g_window(&s, false, Some(1.0)).map_err(other)?;
        let gb = g.conj();
        let probe = default_probe(&s);
        let constant = ScalingKernel::Constant { value: Complex64::new(1.0, 0.0), dt: s.dt(), dx: s.dx() };
        let mut rows = Vec::new();
        for (name, k) in [("G", ScalingKernel::Grid(&g)), ("G*Gbar", ScalingKernel::Product(&g, &gb)), ("constant", constant)] {
            let e = scaling_degree_estimate(&k, &probe, &DEFAULT_SCALES).map_err(other)?;
            println!("wsd({name}) = {:.4}{}", e.estimate, if e.reliable { "" } else { " (unreliable)" });
            rows.push(ScalingRow { kernel: name.into(), estimate: e.estimate, fit_residual: e.fit_residual, reliable: e.reliable });
        }
        write_csv(&path(cfg, "scaling.csv"), &rows)?;
    }
    if cfg.simulate.decay {
        let dirs = [(-1.0, 0.0), (1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (-1.0, 1.0)];
        let mut rows = Vec::new();
        for x0 in [0.0, 1.5] {
            let f = BumpParams { center_t: 0.0, center_x: x0, radius_t: 0.4, radius_x: 1.0, plateau: 0.0, amplitude: 1.0 };
            for r in directional_decay_test(&DecayWindow::around(x0), &f, &dirs) {
                println!("decay x0={x0} ({:+.3},{:+.3}): p = {:.3}", r.direction.0, r.direction.1, r.exponent);
                rows.push(DecayCsvRow {
                    base_x: x0,
                    direction: format!("({:.4},{:.4})", r.direction.0, r.direction.1),
                    exponent: r.exponent,
                    points: r.points,
                    rapid: r.rapid,
                });
            }
        }
        write_csv(&path(cfg, "decay.csv"), &rows)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct VerifyRow {
    id: u32,
    criterion: String,
    passed: bool,
    detail: String,
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<(), RunError> {
    let results = run_all(cfg, |r| println!("{}", r.line()));
    let rows: Vec<VerifyRow> =
        results.iter().map(|r| VerifyRow { id: r.id, criterion: r.name.into(), passed: r.passed, detail: r.detail.clone() }).collect();
    write_csv(&path(cfg, "verify.csv"), &rows)?;
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(RunError::Criterion(format!("{failed} criteria failed")));
    }
    Ok(())
}
