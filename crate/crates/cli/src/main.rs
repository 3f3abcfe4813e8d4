use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qcausal::ci::{closure, implies, parse_ci_set, parse_relation, CiRelation, CiSet};
use qcausal::dag_format::{parse_dag_with_lines, ParsedDag};
use qcausal::distribution::{parse_table, write_table, EXACT_TOL, SIMULATED_TOL};
use qcausal::graph::{causal_input_list, quantum_input_list, DEFAULT_MAX_NODES};
use qcausal::quantum::{parse_params, Qcm};
use qcausal::scenarios::{
    bell_dag, bell_k, bell_mixture_scenario, bell_network_dag, chsh, check_map, finetune_run, pr_box,
    pr_box_with_lambda, prbox_probe, BellAngles, MapVerdict, SeparationRule,
};
use qcausal::separation::{
    ci_set_d, ci_set_q, d_separated, explain_d, explain_q, q_separated, DRule, Explanation, Path as TrailPath,
    QRule,
};
use qcausal::{Dag, Error, JointDistribution, VarId, VarOrder};

const AFTER_HELP: &str = "\
Exit codes:
  0  success; separation verdicts (SEPARATED or CONNECTED) always exit 0
  1  a check failed: check-map found no I-map, or the probe exceeded the bound
  2  input error: unreadable file, parse error (file:line), invalid graph or parameters
  3  resource cap exceeded (node, table, state or enumeration limits)

Structured output (--format json) prints one JSON object per line.
Stable keys:
  dsep, qsep    verdict: rule, relation, verdict
                explanation: path, active, reason, node; paths (no path), truncated
  ci-list       relation, x, y, z
  closure       relation (one per closure member); query, implied
  simulate      vars, sizes (header); cell, p (one per nonzero cell); wrote, cells
  check-map     rule, imap, perfect, witness
  scenario      scenario, key, value (one per reported quantity)
  validate      file, nodes, edges, quantum_valid, params

Bell and CHSH conventions: outcome a counts as (-1)^a, E(s,t) = sum (-1)^(a xor b) P(a,b|s,t),
CHSH = |E(0,0) + E(0,1) + E(1,0) - E(1,1)|. Measurement on a wing with angle x applies
R(x) = [[cos x, sin x], [-sin x, cos x]] before a computational-basis readout of Phi+.";

#[derive(Parser)]
#[command(name = "qcausal", version, about = "Classical and quantum causal models over small DAGs")]
#[command(after_help = AFTER_HELP)]
struct Cli {
    /// Report format.
    #[arg(long, value_enum, global = true, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    #[value(alias = "json-lines")]
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Rule {
    D,
    Q,
}

impl From<Rule> for SeparationRule {
    fn from(r: Rule) -> Self {
        match r {
            Rule::D => SeparationRule::D,
            Rule::Q => SeparationRule::Q,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ListKind {
    /// Causal input list for an ordering.
    Causal,
    /// Quantum input list for an ordering.
    Quantum,
    /// Every d-separation relation of the graph.
    D,
    /// Every q-separation relation of the graph.
    Q,
}

#[derive(Subcommand)]
enum Command {
    /// Decide d-separation of `X,Y _||_ Z | W`.
    Dsep(SepArgs),
    /// Decide q-separation of `X,Y _||_ Z | W` on a quantum-valid graph.
    Qsep(SepArgs),
    /// Print the relations of an input list or of a separation rule.
    CiList {
        dag: PathBuf,
        #[arg(long, value_enum, default_value_t = ListKind::Causal)]
        list: ListKind,
        /// Comma-separated variable ordering for input lists (default: topological).
        #[arg(long)]
        order: Option<String>,
    },
    /// Semi-graphoid closure of a relation file (`vars ...` header, one relation per line).
    Closure {
        relations: PathBuf,
        /// Only report whether the set implies this relation.
        #[arg(long)]
        implies: Option<String>,
    },
    /// Evaluate a quantum causal model into its joint distribution table.
    Simulate {
        dag: PathBuf,
        params: PathBuf,
        /// Write the table here instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare a graph's separation closure with a distribution's CI relations.
    CheckMap {
        dag: PathBuf,
        table: PathBuf,
        #[arg(long, value_enum, default_value_t = Rule::D)]
        rule: Rule,
        /// Tolerance of the CI tests on the table.
        #[arg(long, default_value_t = EXACT_TOL)]
        tol: f64,
    },
    /// Named experiments.
    #[command(subcommand)]
    Scenario(Scenario),
    /// Check a graph file for quantum validity, and optionally a parameter file against it.
    Validate {
        dag: PathBuf,
        #[arg(long)]
        params: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SepArgs {
    dag: PathBuf,
    relation: String,
    /// Show one active path, or every path with the rule that blocks it.
    #[arg(long)]
    explain: bool,
    /// Maximum number of paths listed by --explain.
    #[arg(long, default_value_t = 64)]
    limit: usize,
}

#[derive(Subcommand)]
enum Scenario {
    /// Bell experiment on the network lambda -> S -> A, lambda -> T -> B.
    Bell {
        /// Measurement angles a0 a1 b0 b1 in radians.
        #[arg(long, num_args = 4, allow_negative_numbers = true, value_names = ["A0", "A1", "B0", "B1"])]
        angles: Option<Vec<f64>>,
        /// Weights of Bell states selected by lambda for the map checks (default 0.6 0.4).
        #[arg(long, num_args = 1..=4)]
        lambda_weights: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The PR box over A, B, S, T.
    Prbox {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fine-tuned classical model on Z -> Y -> X, Z -> X.
    Finetune {
        /// Offset added to k = u_y.
        #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
        k_offset: i64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded random search for CHSH values above Tsirelson's bound.
    PrboxProbe {
        #[arg(long)]
        draws: usize,
        #[arg(long)]
        seed: u64,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_resource() { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

/// Attach a file name to library errors, turning `line N` into `file:N`.
fn in_file(path: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |e| {
        let file = path.display();
        let message = match &e {
            Error::Parse { line, message } => format!("{file}:{line}: {message}"),
            Error::Validation(items) => items
                .iter()
                .map(|m| match m.strip_prefix("line ").and_then(|r| r.split_once(": ")) {
                    Some((n, rest)) if n.parse::<usize>().is_ok() => format!("{file}:{n}: {rest}"),
                    _ => format!("{file}: {m}"),
                })
                .collect::<Vec<_>>()
                .join("\n"),
            Error::Resource(m) => format!("{file}: resource limit exceeded: {m}"),
            Error::Input(m) => format!("{file}: {m}"),
        };
        Failure {
            code: if e.is_resource() { 3 } else { 2 },
            message,
        }
    }
}

type Outcome = Result<u8, Failure>;

struct Report {
    format: Format,
    out: String,
}

impl Report {
    fn emit<T: Serialize>(&mut self, text: impl AsRef<str>, record: &T) {
        match self.format {
            Format::Text => self.out.push_str(text.as_ref()),
            Format::Json => self
                .out
                .push_str(&serde_json::to_string(record).expect("records serialize")),
        }
        self.out.push('\n');
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load_dag(path: &Path) -> Result<ParsedDag, Failure> {
    parse_dag_with_lines(&read(path)?, DEFAULT_MAX_NODES).map_err(in_file(path))
}

fn relation_arg(text: &str, g: &Dag) -> Result<CiRelation, Failure> {
    parse_relation(text, g.names()).map_err(|e| Failure::input(format!("relation {text:?}: {e}")))
}

fn show(r: &CiRelation, names: &[String]) -> String {
    r.display(names).to_string()
}

fn names_of(v: qcausal::VarSet, names: &[String]) -> Vec<String> {
    v.iter().map(|i| names[i.index()].clone()).collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut report = Report {
        format: cli.format,
        out: String::new(),
    };
    let result = run(cli.command, &mut report);
    let _ = std::io::stdout().write_all(report.out.as_bytes());
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: Command, r: &mut Report) -> Outcome {
    match cmd {
        Command::Dsep(a) => separation(a, Rule::D, r),
        Command::Qsep(a) => separation(a, Rule::Q, r),
        Command::CiList { dag, list, order } => ci_list(&dag, list, order.as_deref(), r),
        Command::Closure { relations, implies } => closure_cmd(&relations, implies.as_deref(), r),
        Command::Simulate { dag, params, out } => simulate(&dag, &params, out.as_deref(), r),
        Command::CheckMap { dag, table, rule, tol } => check_map_cmd(&dag, &table, rule, tol, r),
        Command::Scenario(s) => scenario(s, r),
        Command::Validate { dag, params } => validate(&dag, params.as_deref(), r),
    }
}

#[derive(Serialize)]
struct SepRecord<'a> {
    rule: &'a str,
    relation: String,
    verdict: &'a str,
}

#[derive(Serialize)]
struct PathRecord {
    path: String,
    active: bool,
    reason: Option<&'static str>,
    node: Option<String>,
}

fn separation(a: SepArgs, rule: Rule, r: &mut Report) -> Outcome {
    let parsed = load_dag(&a.dag)?;
    let g = &parsed.dag;
    if rule == Rule::Q {
        parsed.validate_quantum(false).map_err(in_file(&a.dag))?;
    }
    let rel = relation_arg(&a.relation, g)?;
    let (x, y, z) = (rel.x(), rel.y(), rel.z());
    let separated = match rule {
        Rule::D => d_separated(g, x, y, z)?,
        Rule::Q => q_separated(g, x, y, z)?,
    };
    let verdict = if separated { "SEPARATED" } else { "CONNECTED" };
    r.emit(
        verdict,
        &SepRecord {
            rule: if rule == Rule::D { "d" } else { "q" },
            relation: show(&rel, g.names()),
            verdict,
        },
    );
    if !a.explain {
        return Ok(0);
    }
    let names = g.names();
    let node = |v: VarId| Some(names[v.index()].clone());
    let describe_d = |rule: &DRule| match *rule {
        DRule::Conditioned(v) => ("conditioned", node(v)),
        DRule::Collider(v) => ("collider", node(v)),
    };
    let describe_q = |rule: &QRule| match *rule {
        QRule::SettingsUnlinked => ("settings_unlinked", None),
        QRule::NoSignal => ("no_signal", None),
        QRule::Collider(v) => ("collider", node(v)),
    };
    match rule {
        Rule::D => explain_out(explain_d(g, x, y, z, a.limit)?, names, describe_d, r),
        Rule::Q => explain_out(explain_q(g, x, y, z, a.limit)?, names, describe_q, r),
    }
    Ok(0)
}

fn explain_out<R>(
    e: Explanation<R>,
    names: &[String],
    describe: impl Fn(&R) -> (&'static str, Option<String>),
    r: &mut Report,
) {
    let path_text = |p: &TrailPath| p.display(names);
    match e {
        Explanation::Connected(p) => {
            let text = path_text(&p);
            r.emit(
                format!("active path: {text}"),
                &PathRecord {
                    path: text,
                    active: true,
                    reason: None,
                    node: None,
                },
            );
        }
        Explanation::Separated { blocked, truncated } => {
            if blocked.is_empty() {
                r.emit("no path connects the two sides", &serde_json::json!({ "paths": 0 }));
            }
            for (p, rule) in &blocked {
                let (reason, node) = describe(rule);
                let text = path_text(p);
                let detail = match &node {
                    Some(n) => format!("{reason} {n}"),
                    None => reason.to_string(),
                };
                r.emit(
                    format!("blocked: {text} ({detail})"),
                    &PathRecord {
                        path: text,
                        active: false,
                        reason: Some(reason),
                        node,
                    },
                );
            }
            if truncated {
                r.emit("(path listing truncated)", &serde_json::json!({ "truncated": true }));
            }
        }
    }
}

#[derive(Serialize)]
struct RelationRecord {
    relation: String,
    x: Vec<String>,
    y: Vec<String>,
    z: Vec<String>,
}

fn emit_relations(set: &CiSet, names: &[String], r: &mut Report) {
    for rel in set {
        let text = show(rel, names);
        r.emit(
            &text,
            &RelationRecord {
                relation: text.clone(),
                x: names_of(rel.x(), names),
                y: names_of(rel.y(), names),
                z: names_of(rel.z(), names),
            },
        );
    }
}

fn ordering(g: &Dag, order: Option<&str>) -> Result<VarOrder, Failure> {
    let Some(text) = order else {
        return Ok(g.topological_order());
    };
    let seq = text
        .split(',')
        .map(str::trim)
        .map(|n| {
            g.id_of(n)
                .ok_or_else(|| Failure::input(format!("--order: unknown variable {n:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    VarOrder::from_sequence(seq).map_err(|e| Failure::input(format!("--order: {e}")))
}

fn ci_list(path: &Path, list: ListKind, order: Option<&str>, r: &mut Report) -> Outcome {
    let parsed = load_dag(path)?;
    let g = &parsed.dag;
    if matches!(list, ListKind::Quantum | ListKind::Q) {
        parsed.validate_quantum(false).map_err(in_file(path))?;
    }
    let set = match list {
        ListKind::Causal => causal_input_list(g, &ordering(g, order)?)?.to_ci_set(),
        ListKind::Quantum => quantum_input_list(g, &ordering(g, order)?)?.to_ci_set()?,
        ListKind::D => ci_set_d(g)?,
        ListKind::Q => ci_set_q(g)?,
    };
    emit_relations(&set, g.names(), r);
    Ok(0)
}

fn closure_cmd(path: &Path, query: Option<&str>, r: &mut Report) -> Outcome {
    let (names, set) = parse_ci_set(&read(path)?).map_err(in_file(path))?;
    match query {
        Some(q) => {
            let rel = parse_relation(q, &names).map_err(|e| Failure::input(format!("--implies {q:?}: {e}")))?;
            let yes = implies(&set, &rel)?;
            r.emit(
                if yes { "IMPLIED" } else { "NOT IMPLIED" },
                &serde_json::json!({ "query": show(&rel, &names), "implied": yes }),
            );
        }
        None => emit_relations(&closure(&set)?, &names, r),
    }
    Ok(0)
}

fn emit_table(p: &JointDistribution, out: Option<&Path>, r: &mut Report) -> Result<(), Failure> {
    let text = write_table(p);
    if let Some(path) = out {
        write_file(path, &text)?;
        let cells = p.table().iter().filter(|&&q| q != 0.0).count();
        r.emit(
            format!("wrote {cells} nonzero cells to {}", path.display()),
            &serde_json::json!({ "wrote": path.display().to_string(), "cells": cells }),
        );
        return Ok(());
    }
    match r.format {
        Format::Text => r.out.push_str(&text),
        Format::Json => {
            r.emit("", &serde_json::json!({ "vars": p.names(), "sizes": p.space().sizes() }));
            let mut vals = vec![0; p.n()];
            for (i, &q) in p.table().iter().enumerate() {
                if q != 0.0 {
                    p.space().decode(i, &mut vals);
                    r.emit("", &serde_json::json!({ "cell": vals, "p": q }));
                }
            }
        }
    }
    Ok(())
}

fn load_model(dag: &Path, params: &Path) -> Result<Qcm, Failure> {
    let parsed = load_dag(dag)?;
    parsed.validate_quantum(true).map_err(in_file(dag))?;
    let p = parse_params(&read(params)?, &parsed.dag).map_err(in_file(params))?;
    Qcm::new(parsed.dag, p).map_err(in_file(params))
}

fn simulate(dag: &Path, params: &Path, out: Option<&Path>, r: &mut Report) -> Outcome {
    let q = load_model(dag, params)?;
    let p = q.evaluate()?;
    emit_table(&p, out, r)?;
    Ok(0)
}

#[derive(Serialize)]
struct MapRecord<'a> {
    rule: &'a str,
    imap: bool,
    perfect: bool,
    witness: Option<String>,
}

fn emit_verdict(v: &MapVerdict, rule: Rule, names: &[String], label: &str, r: &mut Report) {
    let witness = v.witness.map(|w| show(&w, names));
    let rule_name = if rule == Rule::D { "d" } else { "q" };
    r.emit(
        format!(
            "{label}rule={rule_name} imap={} perfect={} witness={}",
            v.imap,
            v.perfect,
            witness.as_deref().unwrap_or("none")
        ),
        &MapRecord {
            rule: rule_name,
            imap: v.imap,
            perfect: v.perfect,
            witness,
        },
    );
}

fn check_map_cmd(dag: &Path, table: &Path, rule: Rule, tol: f64, r: &mut Report) -> Outcome {
    let parsed = load_dag(dag)?;
    if rule == Rule::Q {
        parsed.validate_quantum(false).map_err(in_file(dag))?;
    }
    let p = parse_table(&read(table)?).map_err(in_file(table))?;
    let v = check_map(&parsed.dag, &p, rule.into(), tol).map_err(in_file(table))?;
    emit_verdict(&v, rule, parsed.dag.names(), "", r);
    Ok(if v.imap { 0 } else { 1 })
}

fn fact(r: &mut Report, scenario: &str, key: &str, value: serde_json::Value, text: String) {
    r.emit(
        text,
        &serde_json::json!({ "scenario": scenario, "key": key, "value": value }),
    );
}

fn k_holds(p: &JointDistribution, tol: f64, scenario: &str, r: &mut Report) -> Result<(), Failure> {
    let names = p.names().to_vec();
    for rel in bell_k(p)? {
        let holds = p.is_ci_relation(&rel, tol)?;
        let text = show(&rel, &names);
        fact(r, scenario, &text, holds.into(), format!("{text}: {holds}"));
    }
    Ok(())
}

fn scenario(s: Scenario, r: &mut Report) -> Outcome {
    match s {
        Scenario::Bell {
            angles,
            lambda_weights,
            out,
        } => {
            let angles = match angles {
                Some(v) => BellAngles::from_slice(&v)?,
                None => BellAngles::optimal(),
            };
            let (_, p) = bell_mixture_scenario(angles, &[1.0])?;
            let value = chsh(&p)?;
            fact(r, "bell", "chsh", value.into(), format!("CHSH: {value:.7}"));
            k_holds(&p, EXACT_TOL, "bell", r)?;
            let weights = lambda_weights.unwrap_or_else(|| vec![0.6, 0.4]);
            let (_, mixed) = bell_mixture_scenario(angles, &weights)?;
            let g = bell_dag(weights.len());
            for rule in [Rule::D, Rule::Q] {
                let v = check_map(&g, &mixed, rule.into(), SIMULATED_TOL)?;
                emit_verdict(&v, rule, g.names(), "lambda mixture: ", r);
            }
            if let Some(path) = out {
                emit_table(&p, Some(&path), r)?;
            }
            Ok(0)
        }
        Scenario::Prbox { out } => {
            let p = pr_box();
            let (a, b, s, t) = (VarId(0), VarId(1), VarId(2), VarId(3));
            for (si, ti) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let q = p
                    .conditional_prob(&[(a, 0), (b, 0)], &[(s, si), (t, ti)])
                    .expect("uniform settings");
                let key = format!("P(00|{si}{ti})");
                fact(r, "prbox", &key, q.into(), format!("{key} = {q}"));
            }
            let value = chsh(&p)?;
            fact(r, "prbox", "chsh", value.into(), format!("CHSH: {value:.7}"));
            k_holds(&p, f64::MIN_POSITIVE, "prbox", r)?;
            let g = bell_network_dag(1);
            let v = check_map(&g, &pr_box_with_lambda(), SeparationRule::Q, EXACT_TOL)?;
            emit_verdict(&v, Rule::Q, g.names(), "network: ", r);
            if let Some(path) = out {
                emit_table(&p, Some(&path), r)?;
            }
            Ok(0)
        }
        Scenario::Finetune { k_offset, out } => {
            let run = finetune_run(k_offset, EXACT_TOL)?;
            let names = run.dag.names().to_vec();
            fact(
                r,
                "finetune",
                "k_offset",
                k_offset.into(),
                format!("k = u_y + {k_offset}"),
            );
            let xy_z = parse_relation("X _||_ Y | Z", &names)?;
            let holds = run.distribution.is_ci_relation(&xy_z, EXACT_TOL)?;
            fact(r, "finetune", "X _||_ Y | Z", holds.into(), format!("X _||_ Y | Z: {holds}"));
            let all = run.distribution.all_ci(EXACT_TOL)?;
            let listed: Vec<String> = all.iter().map(|c| show(c, &names)).collect();
            fact(
                r,
                "finetune",
                "relations",
                listed.clone().into(),
                format!("relations in P: {}", listed.join("; ")),
            );
            emit_verdict(&run.verdict, Rule::D, &names, "", r);
            if let Some(path) = out {
                emit_table(&run.distribution, Some(&path), r)?;
            }
            Ok(0)
        }
        Scenario::PrboxProbe { draws, seed } => {
            let rep = prbox_probe(draws, seed)?;
            match r.format {
                Format::Text => r.out.push_str(&rep.render()),
                Format::Json => {
                    for (key, value) in [
                        ("draws", serde_json::json!(rep.draws)),
                        ("seed", serde_json::json!(rep.seed)),
                        ("max_chsh", serde_json::json!(rep.max_chsh)),
                        ("argmax", serde_json::json!(rep.argmax)),
                        ("mean_chsh", serde_json::json!(rep.mean_chsh)),
                        ("above_bound", serde_json::json!(rep.above_bound)),
                    ] {
                        fact(r, "prbox-probe", key, value, String::new());
                    }
                }
            }
            Ok(if rep.within_bound() { 0 } else { 1 })
        }
    }
}

fn validate(dag: &Path, params: Option<&Path>, r: &mut Report) -> Outcome {
    let parsed = load_dag(dag)?;
    parsed.validate_quantum(params.is_some()).map_err(in_file(dag))?;
    if let Some(p) = params {
        load_model(dag, p)?;
    }
    let g = &parsed.dag;
    r.emit(
        format!(
            "{}: OK ({} nodes, {} edges, quantum-valid{})",
            dag.display(),
            g.n(),
            g.edge_count(),
            if params.is_some() { ", parameters valid" } else { "" }
        ),
        &serde_json::json!({
            "file": dag.display().to_string(),
            "nodes": g.n(),
            "edges": g.edge_count(),
            "quantum_valid": true,
            "params": params.map(|p| p.display().to_string()),
        }),
    );
    Ok(0)
}
