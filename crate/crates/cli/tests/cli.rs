use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qcausal::ci::parse_relation;
use qcausal::dag_format::parse_dag;
use qcausal::distribution::parse_table;
use qcausal::separation::ci_set_q;
use qcausal::CiSet;
use tempfile::TempDir;

const BELL: &str = "\
node lambda role=setting values=1
node S role=setting values=2
node T role=setting values=2
node A role=outcome values=2
node B role=outcome values=2
edge lambda -> A
edge lambda -> B
edge S -> A
edge T -> B
";

const FIVE_NODE: &str = "\
# pa(V)=X, pa(Y)=X, pa(W)=V, pa(Z)=V,Y
node X role=setting values=2
node V role=setting values=2
node Y role=setting values=2
node W role=outcome values=2
node Z role=outcome values=2
edge X -> V
edge X -> Y
edge V -> W
edge V -> Z
edge Y -> Z
";

const NETWORK: &str = "\
node lambda role=setting values=1
node S role=setting values=2
node T role=setting values=2
node A role=outcome values=2
node B role=outcome values=2
edge lambda -> S
edge lambda -> T
edge S -> A
edge T -> B
";

const NETWORK_PARAMS: &str = "\
prep lambda 0 : 0.7071067811865476 0 0 0.7071067811865476
gate S 0 : 1 0 0 1
gate S 1 : 0.7071067811865476 0.7071067811865476 0.7071067811865476 -0.7071067811865476
gate T 0 : 1 0 0 1
gate T 1 : 0,0 0,-1 0,1 0,0
marginal S : 0.3 0.7
";

struct Dir(TempDir);

impl Dir {
    fn new() -> Self {
        Dir(TempDir::new().unwrap())
    }

    fn file(&self, name: &str, text: &str) -> PathBuf {
        let p = self.0.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }
}

fn qcausal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcausal")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn qsep_reports_bell_outcomes_connected_given_source() {
    let d = Dir::new();
    let g = d.file("bell.dag", BELL);
    let o = qcausal(&["qsep", p(&g), "A _||_ B | lambda"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "CONNECTED\n");

    let o = qcausal(&["qsep", p(&g), "S _||_ T | A", "--explain"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("SEPARATED\n"), "{out}");
    assert!(out.contains("blocked: S -> A <- lambda -> B <- T"), "{out}");
}

#[test]
fn dsep_on_five_node_graph() {
    let d = Dir::new();
    let g = d.file("five_node.dag", FIVE_NODE);
    let o = qcausal(&["dsep", p(&g), "W _||_ Y | V"]);
    assert_eq!((o.status.code(), stdout(&o)), (Some(0), "SEPARATED\n".to_string()));

    let o = qcausal(&["dsep", p(&g), "W _||_ Y | Z", "--explain"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("CONNECTED\nactive path: "), "{out}");
}

#[test]
fn json_verdict_has_stable_keys() {
    let d = Dir::new();
    let g = d.file("five_node.dag", FIVE_NODE);
    let o = qcausal(&["--format", "json", "dsep", p(&g), "W _||_ Y | V"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["rule"], "d");
    assert_eq!(v["verdict"], "SEPARATED");
    assert_eq!(v["relation"], "Y _||_ W | V");
}

#[test]
fn validate_names_childless_setting() {
    let d = Dir::new();
    let g = d.file(
        "bad.dag",
        "node S role=setting values=2\nnode A role=outcome values=2\nnode U role=setting values=2\nedge S -> A\n",
    );
    let o = qcausal(&["validate", p(&g)]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains(&format!("{}:3:", p(&g))), "{err}");
    assert!(err.contains("node U"), "{err}");

    let ok = d.file("bell.dag", BELL);
    let o = qcausal(&["validate", p(&ok)]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn parse_errors_carry_file_and_line() {
    let d = Dir::new();
    let g = d.file("typo.dag", "node X role=setting values=2\n\nedge X -> Q\n");
    let o = qcausal(&["dsep", p(&g), "X _||_ X"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(&format!("{}:3:", p(&g))), "{}", stderr(&o));

    let g = d.file("junk.dag", "node X role=setting values=2 extra\n");
    let o = qcausal(&["validate", p(&g)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(":1:"));

    let o = qcausal(&["validate", p(&d.path("missing.dag"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn node_cap_exits_with_resource_code() {
    let d = Dir::new();
    let text: String = (0..17).map(|i| format!("node N{i} role=outcome values=1\n")).collect();
    let g = d.file("big.dag", &text);
    let o = qcausal(&["validate", p(&g)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    let text: String = (0..8).map(|i| format!("node N{i} role=outcome values=1\n")).collect();
    let g = d.file("wide.dag", &text);
    let o = qcausal(&["ci-list", p(&g), "--list", "d"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn ci_list_json_round_trips_through_relation_syntax() {
    let d = Dir::new();
    let g = d.file("bell.dag", BELL);
    let o = qcausal(&["--format", "json", "ci-list", p(&g), "--list", "q"]);
    assert_eq!(o.status.code(), Some(0));
    let dag = parse_dag(BELL).unwrap();
    let mut seen = CiSet::new(dag.n());
    for line in stdout(&o).lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let r = parse_relation(v["relation"].as_str().unwrap(), dag.names()).unwrap();
        let names = |key: &str| -> Vec<String> {
            v[key].as_array().unwrap().iter().map(|n| n.as_str().unwrap().to_string()).collect()
        };
        let side = |s: qcausal::VarSet| -> Vec<String> { s.iter().map(|i| dag.name(i).to_string()).collect() };
        assert_eq!((names("x"), names("y"), names("z")), (side(r.x()), side(r.y()), side(r.z())));
        seen.insert(r);
    }
    assert_eq!(seen, ci_set_q(&dag).unwrap());
}

#[test]
fn ci_list_accepts_an_ordering() {
    let d = Dir::new();
    let g = d.file("five_node.dag", FIVE_NODE);
    let o = qcausal(&["ci-list", p(&g), "--order", "X,V,W,Y,Z"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.lines().any(|l| l == "X _||_ W | V"), "{out}");
    assert!(out.lines().any(|l| l == "X,W _||_ Z | V,Y"), "{out}");

    let o = qcausal(&["ci-list", p(&g), "--order", "X,V,Q"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn closure_and_implication() {
    let d = Dir::new();
    let f = d.file("rels.ci", "vars X Y W Z\nX _||_ Y | Z\nX _||_ W | Y,Z\n");
    let o = qcausal(&["closure", p(&f), "--implies", "X _||_ Y,W | Z"]);
    assert_eq!((o.status.code(), stdout(&o)), (Some(0), "IMPLIED\n".to_string()));
    let o = qcausal(&["closure", p(&f), "--implies", "X _||_ W"]);
    assert_eq!(stdout(&o), "NOT IMPLIED\n");
    let o = qcausal(&["closure", p(&f)]);
    let lines: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert!(lines.contains(&"X _||_ Y,W | Z".to_string()), "{lines:?}");
    assert!(lines.contains(&"X _||_ W | Z".to_string()), "{lines:?}");

    let bad = d.file("bad.ci", "vars X Y\nX _||_ Y\nX Y\n");
    let o = qcausal(&["closure", p(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(":3:"));
}

#[test]
fn simulate_writes_a_readable_table() {
    let d = Dir::new();
    let g = d.file("net.dag", NETWORK);
    let params = d.file("net.params", NETWORK_PARAMS);
    let out = d.path("net.table");
    let o = qcausal(&["simulate", p(&g), p(&params), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = parse_table(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!((table.table().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    assert_eq!(table.names(), ["lambda", "S", "T", "A", "B"]);

    let printed = qcausal(&["simulate", p(&g), p(&params)]);
    assert_eq!(stdout(&printed), std::fs::read_to_string(&out).unwrap());

    let o = qcausal(&["check-map", p(&g), p(&out), "--rule", "q", "--tol", "1e-7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("imap=true"));

    let o = qcausal(&["validate", p(&g), "--params", p(&params)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn simulate_rejects_non_unitary_gate() {
    let d = Dir::new();
    let g = d.file("net.dag", NETWORK);
    let params = d.file("net.params", &NETWORK_PARAMS.replace("gate T 0 : 1 0 0 1", "gate T 0 : 1 0 0 2"));
    let o = qcausal(&["simulate", p(&g), p(&params)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("net.params"), "{}", stderr(&o));
}

#[test]
fn check_map_failure_exits_one() {
    let d = Dir::new();
    let empty = d.file(
        "empty.dag",
        "node A role=outcome values=2\nnode B role=outcome values=2\nnode S role=outcome values=2\nnode T role=outcome values=2\n",
    );
    let out = d.path("prbox.table");
    let o = qcausal(&["scenario", "prbox", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let o = qcausal(&["check-map", p(&empty), p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("imap=false"));
}

#[test]
fn bell_report_prints_chsh_with_seven_decimals() {
    let o = qcausal(&["scenario", "bell"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.lines().any(|l| l == "CHSH: 2.8284271"), "{out}");
    assert!(out.contains("rule=d imap=false perfect=false witness=A _||_ B | lambda"), "{out}");
    assert!(out.contains("rule=q imap=true"), "{out}");

    let o = qcausal(&["scenario", "bell", "--angles", "0", "0", "0", "0"]);
    assert!(stdout(&o).lines().any(|l| l == "CHSH: 2.0000000"), "{}", stdout(&o));
}

#[test]
fn prbox_and_finetune_reports() {
    let out = stdout(&qcausal(&["scenario", "prbox"]));
    assert!(out.contains("P(00|11) = 0\n"), "{out}");
    assert!(out.contains("CHSH: 4.0000000"), "{out}");

    let out = stdout(&qcausal(&["scenario", "finetune"]));
    assert!(out.contains("X _||_ Y | Z: true"), "{out}");
    assert!(out.contains("perfect=false"), "{out}");
}

#[test]
fn probe_is_reproducible_and_requires_draws() {
    let args = ["scenario", "prbox-probe", "--draws", "40", "--seed", "11"];
    let a = qcausal(&args);
    let b = qcausal(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).contains("WITHIN BOUND"));

    let o = qcausal(&["scenario", "prbox-probe", "--draws", "0", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = qcausal(&["scenario", "prbox-probe", "--draws", "5"]);
    assert_ne!(o.status.code(), Some(0));
}
