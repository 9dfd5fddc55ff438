//! `slocc` command-line front end: train, synthesize, verify, post-process,
//! export state-link graphs and browse the class catalog.

pub mod config;
pub mod report;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use slocc_synth::catalog::{Catalog, FamilyId, Feasibility, Representative};
use slocc_synth::gates::{support, Circuit, SUPPORT_TOL};
use slocc_synth::postprocess::{
    parametrize, postprocess_auto, solve_angles, AutoResult, DEFAULT_SEEDS, RESIDUAL_TOL,
};
use slocc_synth::qlearn::{Problem, QMatrixFile, TrainReport, DEFAULT_MAX_STEPS, RNG_ALGORITHM};
use slocc_synth::slg::{build_slg, circuit_path, StateLinkGraph};
use slocc_synth::Error;

use config::{gate_hash, Resolved, RunConfig, Target};
use report::{
    circuit_lines, PostprocessSummary, Status, SynthesisReport, TrainingSummary, Verification,
};

#[derive(Parser, Debug)]
#[command(
    name = "slocc",
    version,
    about = "Q-learning synthesis of 4-qubit SLOCC class states"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train, extract the greedy circuit, verify it and write artifacts
    Synth(SynthArgs),
    /// Train only and persist the Q-matrix
    Train(RunArgs),
    /// Simulate a circuit file and compare it with a target
    Verify(VerifyArgs),
    /// Export the state-link graph of a Q-matrix file
    Slg(SlgArgs),
    /// List catalog classes
    Catalog(CatalogArgs),
    /// Fit rotation angles so a circuit reaches the target amplitudes
    Postprocess(PostprocessArgs),
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// JSON file with RunConfig fields; flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunConfig,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: RunArgs,
    /// Also write circuit.qasm
    #[arg(long)]
    pub qasm: bool,
    /// Multi-start count for post-processing
    #[arg(long, default_value_t = DEFAULT_SEEDS)]
    pub seeds: usize,
}

#[derive(Args, Debug)]
pub struct TargetArgs {
    #[arg(long)]
    pub class: Option<String>,
    #[arg(long)]
    pub objective: Option<String>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    pub circuit: PathBuf,
    #[command(flatten)]
    pub target: TargetArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GraphFormat {
    Dot,
    Json,
}

#[derive(Args, Debug)]
pub struct SlgArgs {
    pub qmatrix: PathBuf,
    #[arg(long, value_enum, default_value_t = GraphFormat::Dot)]
    pub format: GraphFormat,
    /// Circuit file whose path is highlighted (DOT only)
    #[arg(long)]
    pub overlay: Option<PathBuf>,
    /// Write here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CatalogArgs {
    #[arg(long)]
    pub family: Option<String>,
    /// green, blue, yellow or unlisted
    #[arg(long)]
    pub feasibility: Option<String>,
    #[arg(long)]
    pub class: Option<String>,
}

#[derive(Args, Debug)]
pub struct PostprocessArgs {
    pub circuit: PathBuf,
    #[command(flatten)]
    pub target: TargetArgs,
    /// Step indices to turn into rotations; default grows the first H/CH steps
    #[arg(long, value_delimiter = ',')]
    pub replace: Option<Vec<usize>>,
    #[arg(long, default_value_t = DEFAULT_SEEDS)]
    pub seeds: usize,
    /// Write the resulting circuit here
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(status) => status.exit_code(),
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            error_code(&e)
        }
    }
}

fn error_code(e: &anyhow::Error) -> i32 {
    match e.downcast_ref::<Error>() {
        Some(
            Error::NoPolicy { .. } | Error::LoopDetected { .. } | Error::BudgetExceeded { .. },
        ) => 3,
        Some(Error::SupportMismatch { .. } | Error::NoSolution { .. }) => 2,
        _ => 1,
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<Status> {
    match command {
        Command::Synth(a) => {
            let r = RunConfig::layered(a.common.config.as_deref(), &a.common.run)?.resolve()?;
            Ok(cmd_synth(&r, a.qasm, a.seeds, out)?.status)
        }
        Command::Train(a) => {
            let r = RunConfig::layered(a.config.as_deref(), &a.run)?.resolve()?;
            cmd_train(&r, out)
        }
        Command::Verify(a) => {
            let target = Target::resolve(a.target.class.as_deref(), a.target.objective.as_deref())?;
            Ok(cmd_verify(&read_circuit(&a.circuit)?, &target, out)?.status())
        }
        Command::Slg(a) => cmd_slg(&a, out).map(|_| Status::Pass),
        Command::Catalog(a) => cmd_catalog(&a, out).map(|_| Status::Pass),
        Command::Postprocess(a) => cmd_postprocess(&a, out).map(|_| Status::Pass),
    }
}

pub fn read_circuit(path: &Path) -> Result<Circuit> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.parse::<Circuit>()
        .with_context(|| format!("parsing circuit {}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Compares the simulated output of `c` with `target`.
pub fn verify(c: &Circuit, target: &Target) -> Result<Verification> {
    let output = c.output();
    let found = support(&output, SUPPORT_TOL)?;
    let (fidelity, deviation) = match &target.state {
        Some(rep) => (
            Some(rep.amplitudes.fidelity(&output)),
            Some(output.max_abs_diff_up_to_phase(&rep.amplitudes)),
        ),
        None => (None, None),
    };
    Ok(Verification {
        expected_support: target.terms.to_string(),
        simulated_support: found.to_string(),
        support_pass: found == target.terms,
        fidelity,
        max_amplitude_deviation: deviation,
        amplitudes_match: deviation.map(|d| d <= RESIDUAL_TOL),
    })
}

impl Verification {
    pub fn status(&self) -> Status {
        if self.support_pass {
            Status::Pass
        } else {
            Status::VerificationFail
        }
    }

    fn print(&self, out: &mut dyn Write) -> Result<()> {
        writeln!(out, "expected support:  {{{}}}", self.expected_support)?;
        writeln!(out, "simulated support: {{{}}}", self.simulated_support)?;
        writeln!(
            out,
            "support: {}",
            if self.support_pass { "pass" } else { "fail" }
        )?;
        if let (Some(f), Some(d)) = (self.fidelity, self.max_amplitude_deviation) {
            writeln!(out, "fidelity: {f:.12}")?;
            let verdict = if d <= RESIDUAL_TOL {
                "match"
            } else {
                "mismatch"
            };
            writeln!(out, "amplitudes: {verdict} (max deviation {d:.3e})")?;
        }
        Ok(())
    }
}

pub fn cmd_verify(c: &Circuit, target: &Target, out: &mut dyn Write) -> Result<Verification> {
    let v = verify(c, target)?;
    v.print(out)?;
    Ok(v)
}

fn train(r: &Resolved) -> Result<(Problem, TrainReport)> {
    let problem = Problem::new(r.target.terms, r.gates.clone(), r.train.reward_value)?;
    let report = problem.train_until_converged(&r.train)?;
    Ok((problem, report))
}

fn qmatrix_text(r: &Resolved, problem: &Problem, report: &TrainReport) -> String {
    QMatrixFile {
        max_terms: problem.env().max_terms(),
        objective: r.target.terms,
        config: r.train.clone(),
        rng_algorithm: RNG_ALGORITHM.to_string(),
        action_labels: r.gates.labels(),
        q: report.final_q.clone(),
    }
    .to_text(problem.env())
}

fn print_training(t: &TrainingSummary, out: &mut dyn Write) -> Result<()> {
    let last = t.cr_history.last().copied().unwrap_or(0.0);
    writeln!(
        out,
        "training: {} run(s), {} episodes, final CR {last:.4}%, {}",
        t.runs_executed,
        t.episodes_executed,
        if t.converged {
            "converged"
        } else {
            "NOT converged"
        }
    )?;
    Ok(())
}

pub fn cmd_train(r: &Resolved, out: &mut dyn Write) -> Result<Status> {
    let (problem, report) = train(r)?;
    let dir = r.artifact_dir();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_file(
        &dir.join("qmatrix.txt"),
        &qmatrix_text(r, &problem, &report),
    )?;
    let graph = build_slg(&report.final_q, problem.env(), problem.gates());
    write_file(&dir.join("slg.dot"), &graph.to_dot(&[]))?;
    print_training(&TrainingSummary::from(&report), out)?;
    writeln!(out, "artifacts: {}", dir.display())?;
    Ok(if report.converged {
        Status::Pass
    } else {
        Status::NotConverged
    })
}

/// Trains, extracts, verifies and, when the support is right but the
/// amplitudes of a real target are not, fits rotation angles. Artifacts are
/// written even when extraction fails.
pub fn cmd_synth(
    r: &Resolved,
    qasm: bool,
    seeds: usize,
    out: &mut dyn Write,
) -> Result<SynthesisReport> {
    let (problem, trained) = train(r)?;
    let training = TrainingSummary::from(&trained);
    let bfs = problem.bfs_shortest(r.initial)?;
    let extracted = problem.extract_circuit(&trained.final_q, r.initial, DEFAULT_MAX_STEPS);

    let (circuit, extraction_error) = match extracted {
        Ok(c) => (Some(c), None),
        Err(
            e
            @ (Error::NoPolicy { .. } | Error::LoopDetected { .. } | Error::BudgetExceeded { .. }),
        ) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let verification = circuit.as_ref().map(|c| verify(c, &r.target)).transpose()?;

    let mut pp: Option<AutoResult> = None;
    let mut pp_note = None;
    if let (Some(c), Some(v), Some(rep)) = (&circuit, &verification, &r.target.state) {
        if v.support_pass && v.amplitudes_match == Some(false) {
            if rep.is_real() {
                match postprocess_auto(c, rep, seeds) {
                    Ok(res) => pp = Some(res),
                    Err(e @ (Error::NoSolution { .. } | Error::SupportMismatch { .. })) => {
                        pp_note = Some(e.to_string())
                    }
                    Err(e) => return Err(e.into()),
                }
            } else {
                pp_note =
                    Some("target has complex amplitudes; phase fitting is not implemented".into());
            }
        }
    }
    let postprocess = pp.as_ref().map(|res| summarize_pp(res, rep_of(&r.target)));

    let status = match (&verification, trained.converged) {
        (None, _) => Status::NoPolicy,
        (Some(v), _) if !v.support_pass => Status::VerificationFail,
        (Some(_), false) => Status::NotConverged,
        (Some(_), true) => Status::Pass,
    };

    let report = SynthesisReport {
        config: r.effective.clone(),
        target: r.target.label.clone(),
        objective: r.target.terms.to_string(),
        gate_set: r.gates.kinds_string(),
        gate_hash: gate_hash(&r.gates),
        training,
        bfs_optimal_length: bfs,
        circuit: circuit.as_ref().map(circuit_lines),
        circuit_length: circuit.as_ref().map(Circuit::len),
        extraction_error,
        verification,
        postprocess,
        postprocess_note: pp_note,
        status,
        exit_code: status.exit_code(),
    };

    let dir = r.artifact_dir();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_file(
        &dir.join("qmatrix.txt"),
        &qmatrix_text(r, &problem, &trained),
    )?;
    let graph = build_slg(&trained.final_q, problem.env(), problem.gates());
    let overlay = match &circuit {
        Some(c) => circuit_path(c, problem.env())?,
        None => Vec::new(),
    };
    write_file(&dir.join("slg.dot"), &graph.to_dot(&overlay))?;
    // optional files are removed when this run did not produce them
    let optional = [
        ("circuit.txt", circuit.as_ref().map(|c| c.to_string())),
        ("circuit_pp.txt", pp.as_ref().map(|p| p.circuit.to_string())),
        (
            "circuit.qasm",
            circuit.as_ref().filter(|_| qasm).map(|c| c.to_qasm()),
        ),
        (
            "circuit_pp.qasm",
            pp.as_ref().filter(|_| qasm).map(|p| p.circuit.to_qasm()),
        ),
    ];
    for (name, contents) in optional {
        let path = dir.join(name);
        match contents {
            Some(text) => write_file(&path, &text)?,
            None if path.exists() => {
                fs::remove_file(&path).with_context(|| format!("removing {}", path.display()))?
            }
            None => {}
        }
    }
    write_file(&dir.join("report.json"), &report.to_json())?;

    print_synth(&report, out)?;
    writeln!(out, "artifacts: {}", dir.display())?;
    Ok(report)
}

fn rep_of(t: &Target) -> &Representative {
    t.state
        .as_ref()
        .expect("post-processing needs target amplitudes")
}

fn summarize_pp(res: &AutoResult, target: &Representative) -> PostprocessSummary {
    PostprocessSummary {
        replaced_steps: res.parametric.replaced().to_vec(),
        angles: res.solution.angles.clone(),
        residual: res.solution.residual,
        start: res.solution.start,
        fidelity: target.amplitudes.fidelity(&res.circuit.output()),
        circuit: circuit_lines(&res.circuit),
    }
}

fn print_synth(r: &SynthesisReport, out: &mut dyn Write) -> Result<()> {
    writeln!(
        out,
        "target {} {{{}}}, gates {} [{}]",
        r.target, r.objective, r.gate_set, r.gate_hash
    )?;
    print_training(&r.training, out)?;
    match r.bfs_optimal_length {
        Some(n) => writeln!(out, "shortest path: {n} gate(s)")?,
        None => writeln!(
            out,
            "shortest path: objective unreachable from the initial state"
        )?,
    }
    if let Some(e) = &r.extraction_error {
        writeln!(out, "extraction failed: {e}")?;
    }
    if let Some(lines) = &r.circuit {
        writeln!(out, "circuit ({} gate(s)):", r.circuit_length.unwrap_or(0))?;
        for l in lines {
            writeln!(out, "  {l}")?;
        }
    }
    if let Some(v) = &r.verification {
        v.print(out)?;
    }
    if let Some(p) = &r.postprocess {
        let angles: Vec<String> = p.angles.iter().map(|a| format!("{a:.10}")).collect();
        writeln!(
            out,
            "postprocess: steps {:?} -> angles [{}], residual {:.3e}, fidelity {:.12}",
            p.replaced_steps,
            angles.join(", "),
            p.residual,
            p.fidelity
        )?;
        for l in &p.circuit {
            writeln!(out, "  {l}")?;
        }
    }
    if let Some(n) = &r.postprocess_note {
        writeln!(out, "postprocess: {n}")?;
    }
    writeln!(out, "status: {}", r.status)?;
    Ok(())
}

/// Number of edges whose endpoints lie in different shells.
pub fn cross_shell_edges(g: &StateLinkGraph) -> usize {
    g.edges
        .iter()
        .filter(|e| e.src.shell() != e.dst.shell())
        .count()
}

pub fn cmd_slg(a: &SlgArgs, out: &mut dyn Write) -> Result<StateLinkGraph> {
    let text = fs::read_to_string(&a.qmatrix)
        .with_context(|| format!("reading {}", a.qmatrix.display()))?;
    let file =
        QMatrixFile::parse(&text).with_context(|| format!("parsing {}", a.qmatrix.display()))?;
    let env = file.environment()?;
    let gates = file.gate_set()?;
    let graph = build_slg(&file.q, &env, &gates);
    let rendered = match a.format {
        GraphFormat::Dot => {
            let overlay = match &a.overlay {
                Some(p) => circuit_path(&read_circuit(p)?, &env)?,
                None => Vec::new(),
            };
            graph.to_dot(&overlay)
        }
        GraphFormat::Json => {
            if a.overlay.is_some() {
                bail!("--overlay applies to DOT output only");
            }
            let mut s = graph.to_json();
            s.push('\n');
            s
        }
    };
    match &a.out {
        Some(path) => {
            write_file(path, &rendered)?;
            writeln!(
                out,
                "{} nodes, {} edges, {} cross-shell; wrote {}",
                graph.nodes.len(),
                graph.edges.len(),
                cross_shell_edges(&graph),
                path.display()
            )?;
        }
        None => out.write_all(rendered.as_bytes())?,
    }
    Ok(graph)
}

fn parse_feasibility(s: &str) -> Result<Feasibility> {
    [
        Feasibility::Green,
        Feasibility::Blue,
        Feasibility::Yellow,
        Feasibility::Unlisted,
    ]
    .into_iter()
    .find(|f| f.name().eq_ignore_ascii_case(s))
    .ok_or_else(|| anyhow!("unknown feasibility `{s}` (expected green, blue, yellow or unlisted)"))
}

/// Prints matching classes, one per line, and returns their ids.
pub fn cmd_catalog(a: &CatalogArgs, out: &mut dyn Write) -> Result<Vec<String>> {
    let cat = Catalog::builtin();
    let family: Option<FamilyId> = a.family.as_deref().map(str::parse).transpose()?;
    let feasibility = a
        .feasibility
        .as_deref()
        .map(parse_feasibility)
        .transpose()?;
    if let Some(id) = &a.class {
        cat.get(id)?;
    }
    let rows: Vec<_> = cat
        .classes()
        .iter()
        .filter(|c| family.is_none_or(|f| c.family == f))
        .filter(|c| feasibility.is_none_or(|f| c.feasibility == f))
        .filter(|c| a.class.as_ref().is_none_or(|id| &c.id == id))
        .collect();
    for c in &rows {
        writeln!(
            out,
            "{:<11} {:<14} {:<9} {{{}}}  {}",
            c.id,
            c.family.to_string(),
            c.feasibility.name(),
            c.terms,
            match c.conditions.source() {
                "" => "-",
                s => s,
            }
        )?;
    }
    writeln!(out, "{} class(es)", rows.len())?;
    Ok(rows.iter().map(|c| c.id.clone()).collect())
}

pub fn cmd_postprocess(a: &PostprocessArgs, out: &mut dyn Write) -> Result<Circuit> {
    let target = Target::resolve(a.target.class.as_deref(), a.target.objective.as_deref())?;
    let Some(rep) = &target.state else {
        bail!("post-processing needs target amplitudes; use --class");
    };
    let c = read_circuit(&a.circuit)?;
    let res = match &a.replace {
        Some(steps) => {
            let parametric = parametrize(&c, steps)?;
            let solution = solve_angles(&parametric, rep, a.seeds)?;
            let circuit = parametric.with_angles(&solution.angles)?;
            AutoResult {
                parametric,
                solution,
                circuit,
            }
        }
        None => postprocess_auto(&c, rep, a.seeds)?,
    };
    let s = summarize_pp(&res, rep);
    writeln!(out, "replaced steps: {:?}", s.replaced_steps)?;
    for (i, theta) in s.angles.iter().enumerate() {
        writeln!(out, "theta[{i}] = {theta:.12}")?;
    }
    writeln!(out, "residual: {:.3e}", s.residual)?;
    writeln!(out, "fidelity: {:.12}", s.fidelity)?;
    match &a.out {
        Some(path) => {
            write_file(path, &res.circuit.to_string())?;
            writeln!(out, "wrote {}", path.display())?;
        }
        None => write!(out, "{}", res.circuit)?,
    }
    Ok(res.circuit)
}
