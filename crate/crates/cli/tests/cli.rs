use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_mfotl");

fn run(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(BIN)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

struct Corpus {
    dir: tempfile::TempDir,
}

impl Corpus {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let o = run(&["corpus", "export", dir.path().to_str().unwrap()], "");
        assert!(o.status.success(), "{}", stderr(&o));
        Corpus { dir }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).display().to_string()
    }

    fn write(&self, name: &str, content: &str) -> String {
        fs::write(self.dir.path().join(name), content).unwrap();
        self.path(name)
    }
}

#[test]
fn check_exit_codes() {
    let c = Corpus::new();
    let phi1 = c.path("phi1.mfotl");
    let o = run(&["check", "--policy", &phi1, "--sig", &c.path("corpus.sig")], "");
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("transparently enforceable"));

    let o = run(&["check", &phi1, &c.path("corpus-observable.sig")], "");
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("not suppressable"));

    let sig = c.write(
        "stamp.sig",
        "event request(u: string) {observable}\nevent stamp(n: int) {observable, causable}\n",
    );
    let only = c.write("stamp.mfotl", "ALWAYS (FORALL u. request(u) IMPLIES EXISTS n. stamp(n))\n");
    let o = run(&["check", &only, &sig], "");
    assert_eq!(o.status.code(), Some(1));

    let o = run(&["check", &c.path("missing.mfotl"), &c.path("corpus.sig")], "");
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("error: "));
}

#[test]
fn check_reports_positions_of_free_variables() {
    let c = Corpus::new();
    let v3 = c.path("art7-1-v3.mfotl");
    let o = run(&["check", &v3, &c.path("corpus.sig")], "");
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("art7-1-v3.mfotl:4:44: free variable `ehc`"), "{err}");
    assert!(err.contains("art7-1-v3.mfotl:6:11: free variable `y`"), "{err}");

    let o = run(&["check", "--close", &v3, &c.path("corpus.sig")], "");
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("warning: unused variable"));
}

#[test]
fn check_json() {
    let c = Corpus::new();
    let o = run(&["check", &c.path("phi1.mfotl"), &c.path("corpus.sig"), "--output", "json"], "");
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["verdict"], "transparent");
    assert_eq!(doc["required_capabilities"]["uses"], serde_json::json!(["observable", "suppressable"]));
    assert_eq!(doc["blame"], serde_json::json!([]));

    let o = run(&["check", &c.path("phi1.mfotl"), &c.path("corpus-observable.sig"), "--output", "json"], "");
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["verdict"], "not-enforceable");
    assert_eq!(doc["blame"][0]["path"], "0.0.0");
    assert_eq!(doc["blame"][0]["subformula"], "uses(app, data, user, purpose)");

    let o = run(&["check", &c.path("nope.mfotl"), &c.path("corpus.sig"), "--output", "json"], "");
    assert_eq!(o.status.code(), Some(3));
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["errors"].as_array().unwrap().len(), 1);
}

#[test]
fn monitor_exit_codes_and_output() {
    let c = Corpus::new();
    let (phi1, sig) = (c.path("phi1.mfotl"), c.path("corpus.sig"));
    let o = run(&["monitor", &phi1, &sig, "--log", &c.path("scenarios/use-without-consent.log")], "");
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.starts_with("@1 (tp 0): violated {app=\"website.com\""), "{out}");
    assert!(out.ends_with("1 time-points, 1 violated\n"));

    let o = run(&["monitor", &phi1, &sig, &c.path("scenarios/consent-then-use.log")], "");
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 1);
    let o = run(&["monitor", &phi1, &sig, &c.path("scenarios/consent-then-use.log"), "-v"], "");
    assert!(stdout(&o).lines().count() > 1);

    let empty = c.write("empty.log", "");
    let o = run(&["monitor", &phi1, &sig, &empty], "");
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "");

    let o = run(
        &["monitor", &phi1, &sig, &c.path("scenarios/use-without-consent.log"), "--output", "json"],
        "",
    );
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["satisfied"], false);
    assert_eq!(doc["verdicts"][0]["status"], "violated");
    assert_eq!(doc["verdicts"][0]["witnesses"][0]["user"], "Alice");

    let bad = c.write("bad.log", "@2 uses(\"a\");\n");
    let o = run(&["monitor", &phi1, &sig, &bad], "");
    assert_eq!(o.status.code(), Some(3));
}

const TICK: &str = r#"{"type":"tick","ts":1,"events":[{"name":"uses","args":["website.com","bday","Alice","ads"]}]}"#;

#[test]
fn enforce_over_stdio() {
    let c = Corpus::new();
    let input = format!("{TICK}\nnot json\n{{\"type\":\"tick\",\"ts\":0,\"events\":[]}}\n{{\"type\":\"end\"}}\n");
    let o = run(&["enforce", &c.path("phi1.mfotl"), &c.path("corpus.sig")], &input);
    assert_eq!(o.status.code(), Some(0));
    let lines: Vec<Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0]["suppress"], serde_json::json!([0]));
    assert_eq!(lines[1]["type"], "error");
    assert_eq!(lines[2]["type"], "error");
    assert_eq!(lines[3], serde_json::json!({"type": "final", "log": "@1;\n"}));
}

#[test]
fn enforce_refuses_unenforceable_policy() {
    let c = Corpus::new();
    let o = run(&["enforce", &c.path("phi1.mfotl"), &c.path("corpus-observable.sig")], "");
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("not enforceable"));
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn enforce_over_tcp_serves_independent_sessions() {
    let c = Corpus::new();
    let mut child = Command::new(BIN)
        .args(["enforce", &c.path("phi1.mfotl"), &c.path("corpus.sig"), "--listen", "127.0.0.1:0"])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut err = BufReader::new(child.stderr.take().unwrap());
    let _server = Server(child);
    let mut line = String::new();
    err.read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").expect("address line").to_string();

    let mut a = TcpStream::connect(&addr).unwrap();
    let mut b = TcpStream::connect(&addr).unwrap();
    writeln!(a, "{TICK}").unwrap();
    writeln!(b, r#"{{"type":"tick","ts":5,"events":[{{"name":"consent","args":["Alice","website.com","ads"]}}]}}"#).unwrap();
    let mut ra = BufReader::new(a.try_clone().unwrap());
    let mut rb = BufReader::new(b.try_clone().unwrap());
    let mut reply = String::new();
    ra.read_line(&mut reply).unwrap();
    assert!(reply.contains(r#""suppress":[0]"#), "{reply}");
    reply.clear();
    rb.read_line(&mut reply).unwrap();
    assert!(reply.contains(r#""suppress":[]"#), "{reply}");

    writeln!(b, r#"{{"type":"end"}}"#).unwrap();
    writeln!(a, r#"{{"type":"end"}}"#).unwrap();
    let mut rest = String::new();
    rb.read_to_string(&mut rest).unwrap();
    assert!(rest.contains("consent"), "{rest}");
    rest.clear();
    ra.read_to_string(&mut rest).unwrap();
    assert_eq!(rest, "{\"type\":\"final\",\"log\":\"@1;\\n\"}\n");
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

#[test]
fn simulate_scenarios() {
    let o = run(&["simulate", "--scenario", "use-without-consent"], "");
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with(&fs::read_to_string(golden("use-without-consent.transcript")).unwrap()));
    assert!(out.ends_with("final log:\n@1;\noracle: satisfied\n"));

    let o = run(&["simulate", "--scenario", "consent-then-use", "--output", "json"], "");
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["oracle"], "satisfied");
    for m in doc["transcript"].as_array().unwrap() {
        if m["message"]["type"] == "command" {
            assert_eq!(m["message"]["suppress"], serde_json::json!([]));
            assert_eq!(m["message"]["cause"], serde_json::json!([]));
        }
    }

    let o = run(&["simulate", "--scenario", "no-such-scenario"], "");
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn trivial_policy_never_intervenes() {
    let c = Corpus::new();
    let policy = c.write("true.mfotl", "ALWAYS TRUE\n");
    for scenario in ["use-without-consent", "consent-then-use", "processing-with-consent"] {
        let o = run(&["simulate", "--scenario", scenario, "--policy", &policy], "");
        assert_eq!(o.status.code(), Some(0));
        for line in stdout(&o).lines().filter(|l| l.starts_with("< {\"type\":\"command\"")) {
            assert!(line.contains(r#""suppress":[],"cause":[]"#), "{line}");
        }
    }
}

#[test]
fn convert_rules() {
    let c = Corpus::new();
    let o = run(&["convert", &c.path("art7-1.rio")], "");
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), fs::read_to_string(golden("art7-1.convert")).unwrap());
    assert!(stderr(&o).contains("`edp` occurs only once"));

    let empty = c.write("empty.rio", "");
    let o = run(&["convert", &empty], "");
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "");

    let unused = c.write("unused.rio", "rule r { if: a(x); vars: q; then: b(x) }\n");
    let o = run(&["convert", &unused], "");
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("rule r: warning: unused variable `q`"), "{}", stderr(&o));

    let broken = c.write("broken.rio", "rule bad { if: a(x)@t1; then: b(x) }\nrule ok { if: a(x); then: b(x) }\n");
    let o = run(&["convert", &broken], "");
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("# rule ok"));
    assert!(stderr(&o).contains("rule bad: error"));

    let out = c.dir.path().join("out");
    let o = run(&["convert", &c.path("art7-1.rio"), "--out-dir", out.to_str().unwrap()], "");
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("art7_1.mfotl").is_file());
}

#[test]
fn corpus_list_names_every_entry() {
    let o = run(&["corpus", "list"], "");
    let out = stdout(&o);
    for id in ["phi1", "art7-1-dapreco", "art7-1-v2", "art7-1-v3", "art7-1-v4"] {
        assert!(out.lines().any(|l| l.starts_with(id)), "{id}");
    }
    assert!(out.contains("scenario use-without-consent"));
}
