use std::fs;
use std::io::{self, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value as Json};

use mfotl_core::converter::convert_file;
use mfotl_core::corpus::{self, Scenario};
use mfotl_core::enforceability::{analyze, explain, CapabilityMap};
use mfotl_core::enforcer::harness::{simulate, Direction};
use mfotl_core::enforcer::protocol::{serve, value_json, PROTOCOL_VERSION};
use mfotl_core::enforcer::{Session, SessionError};
use mfotl_core::log::{parse_log, serialize_log};
use mfotl_core::monitor::{monitor_log, Status, Valuation};
use mfotl_core::policy::{
    lint, parse_policy_spanned, parse_signature, pretty_print, typecheck, Signature, TypedFormula, Warning,
};

const EXIT_ERROR: u8 = 3;

#[derive(Parser)]
#[command(name = "mfotl", version, about = "Check, monitor and enforce MFOTL privacy policies")]
struct Cli {
    #[arg(long, value_enum, default_value_t = Output::Text, global = true)]
    output: Output,
    /// More detail: every monitor verdict, required capabilities, files written.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Output {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decide whether a policy is enforceable. Exit 0 transparent, 1 enforceable only,
    /// 2 not enforceable, 3 error.
    Check {
        #[command(flatten)]
        spec: PolicySpec,
    },
    /// Judge every time-point of a log. Exit 1 if some time-point is violated.
    Monitor {
        #[command(flatten)]
        spec: PolicySpec,
        #[arg(long, value_name = "FILE")]
        log: Option<PathBuf>,
        #[arg(value_name = "LOG")]
        log_pos: Option<PathBuf>,
    },
    /// Run an enforcer speaking the NDJSON protocol on stdin/stdout or on a TCP socket.
    Enforce {
        #[command(flatten)]
        spec: PolicySpec,
        /// Serve each TCP connection as a separate session.
        #[arg(long, value_name = "ADDR:PORT")]
        listen: Option<String>,
    },
    /// Drive an enforcer with a scripted system and check the result with the monitor.
    Simulate {
        /// Bundled scenario name, or a `.log` file.
        #[arg(long)]
        scenario: String,
        /// Policy file; defaults to the bundled consent policy.
        #[arg(long, value_name = "FILE")]
        policy: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        sig: Option<PathBuf>,
        /// Universally close free variables of the policy.
        #[arg(long)]
        close: bool,
    },
    /// Translate `.rio` rules to MFOTL.
    Convert {
        rules: PathBuf,
        /// Typecheck against this signature instead of one derived from the rules.
        #[arg(long, value_name = "FILE")]
        sig: Option<PathBuf>,
        /// Write one `<label>.mfotl` per rule here instead of printing.
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },
    /// Bundled policies, signatures and scenarios.
    Corpus {
        #[command(subcommand)]
        action: CorpusCmd,
    },
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// Write the bundled files under DIR.
    Export { dir: PathBuf },
    /// List entries and scenarios.
    List,
}

#[derive(Args)]
struct PolicySpec {
    #[arg(long, value_name = "FILE")]
    policy: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    sig: Option<PathBuf>,
    #[arg(value_name = "POLICY")]
    policy_pos: Option<PathBuf>,
    #[arg(value_name = "SIG")]
    sig_pos: Option<PathBuf>,
    /// Universally close free variables under the top-level ALWAYS before checking.
    #[arg(long)]
    close: bool,
}

/// Error messages for stderr; empty when stdout was closed early.
struct Failure(Vec<String>);

fn stdout_failure(e: io::Error) -> Failure {
    if e.kind() == io::ErrorKind::BrokenPipe {
        Failure(vec![])
    } else {
        Failure(vec![format!("stdout: {e}")])
    }
}

macro_rules! say {
    ($($t:tt)*) => {
        writeln!(io::stdout(), $($t)*).map_err(stdout_failure)?
    };
}

macro_rules! put {
    ($($t:tt)*) => {
        write!(io::stdout(), $($t)*).map_err(stdout_failure)?
    };
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(vec![e.to_string()])
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.output;
    let code = match run(cli) {
        Ok(code) => code,
        Err(Failure(msgs)) => {
            for m in &msgs {
                eprintln!("error: {m}");
            }
            if out == Output::Json && !msgs.is_empty() {
                println!("{}", json!({"schema_version": PROTOCOL_VERSION, "errors": msgs}));
            }
            EXIT_ERROR
        }
    };
    ExitCode::from(code)
}

fn run(cli: Cli) -> Outcome {
    let ctx = Ctx {
        output: cli.output,
        verbose: cli.verbose,
    };
    match cli.command {
        Cmd::Check { spec } => ctx.check(&spec),
        Cmd::Monitor { spec, log, log_pos } => {
            let log = log.or(log_pos).ok_or("missing --log")?;
            ctx.monitor(&spec, &log)
        }
        Cmd::Enforce { spec, listen } => ctx.enforce(&spec, listen.as_deref()),
        Cmd::Simulate {
            scenario,
            policy,
            sig,
            close,
        } => ctx.simulate(&scenario, policy.as_deref(), sig.as_deref(), close),
        Cmd::Convert { rules, sig, out_dir } => ctx.convert(&rules, sig.as_deref(), out_dir.as_deref()),
        Cmd::Corpus { action } => ctx.corpus(action),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure(vec![format!("{}: {e}", path.display())]))
}

fn load_signature(path: &Path) -> Result<Signature, Failure> {
    parse_signature(&read(path)?).map_err(|e| Failure(vec![format!("{}: {e}", path.display())]))
}

/// Parses and typechecks a policy, reporting type errors at their source positions.
fn load_policy(path: &Path, sig: &Signature, close: bool) -> Result<TypedFormula, Failure> {
    let text = read(path)?;
    let (f, spans) = parse_policy_spanned(&text).map_err(|e| Failure(vec![format!("{}: {e}", path.display())]))?;
    let f = if close { f.universal_closure() } else { f };
    typecheck(&f, sig).map_err(|errs| {
        Failure(
            errs.iter()
                .map(|e| match spans.get(e.path()) {
                    Some(pos) if !close => format!("{}:{pos}: {e}", path.display()),
                    _ => format!("{}: {e}", path.display()),
                })
                .collect(),
        )
    })
}

impl PolicySpec {
    fn load(&self) -> Result<(TypedFormula, Signature, PathBuf), Failure> {
        let policy = self
            .policy
            .clone()
            .or_else(|| self.policy_pos.clone())
            .ok_or("missing --policy")?;
        let sig_path = self.sig.clone().or_else(|| self.sig_pos.clone()).ok_or("missing --sig")?;
        let sig = load_signature(&sig_path)?;
        Ok((load_policy(&policy, &sig, self.close)?, sig, policy))
    }
}

fn warning_json(w: &Warning) -> Json {
    match w {
        Warning::UnusedVariable { var, path } => {
            json!({"kind": "unused-variable", "var": var, "path": path.to_string()})
        }
        Warning::SingletonExistential { var, path } => {
            json!({"kind": "singleton-existential", "var": var, "path": path.to_string()})
        }
    }
}

fn valuation_json(v: &Valuation) -> Json {
    Json::Object(v.iter().map(|(k, x)| (k.clone(), value_json(x))).collect())
}

struct Ctx {
    output: Output,
    verbose: u8,
}

impl Ctx {
    fn json(&self) -> bool {
        self.output == Output::Json
    }

    fn check(&self, spec: &PolicySpec) -> Outcome {
        let (f, sig, path) = spec.load()?;
        let report = analyze(&f, &CapabilityMap::from(&sig));
        let warnings = lint(f.formula());
        if self.json() {
            let caps: serde_json::Map<String, Json> = report
                .required_capabilities
                .iter()
                .map(|(e, c)| (e.clone(), json!(c.names())))
                .collect();
            let blame: Vec<Json> = report
                .blame
                .iter()
                .map(|b| {
                    json!({
                        "path": b.path.to_string(),
                        "reason": b.reason,
                        "subformula": f.formula().at_path(&b.path).map(pretty_print),
                    })
                })
                .collect();
            let doc = json!({
                "schema_version": PROTOCOL_VERSION,
                "verdict": report.verdict,
                "required_capabilities": caps,
                "blame": blame,
                "warnings": warnings.iter().map(warning_json).collect::<Vec<_>>(),
            });
            say!("{doc}");
        } else {
            put!("{}", explain(&report, &f));
            for w in &warnings {
                eprintln!("{}: warning: {w}", path.display());
            }
            if self.verbose > 0 {
                for (e, c) in &report.required_capabilities {
                    eprintln!("requires {e} {c}");
                }
            }
        }
        Ok(report.verdict.exit_code() as u8)
    }

    fn monitor(&self, spec: &PolicySpec, log_path: &Path) -> Outcome {
        let (f, sig, _) = spec.load()?;
        let log = parse_log(&read(log_path)?, &sig).map_err(|e| Failure(vec![format!("{}: {e}", log_path.display())]))?;
        let verdicts = monitor_log(&f, &log)?;
        let violated = verdicts.iter().any(|v| v.status == Status::Violated);
        if self.json() {
            let vs: Vec<Json> = verdicts
                .iter()
                .map(|v| {
                    json!({
                        "index": v.index,
                        "ts": v.ts,
                        "status": v.status,
                        "witnesses": v.witnesses.iter().map(valuation_json).collect::<Vec<_>>(),
                    })
                })
                .collect();
            say!(
                "{}",
                json!({"schema_version": PROTOCOL_VERSION, "satisfied": !violated, "verdicts": vs})
            );
        } else {
            for v in &verdicts {
                if self.verbose > 0 || v.status != Status::Satisfied {
                    say!("{v}");
                }
            }
            let n = verdicts.iter().filter(|v| v.status == Status::Violated).count();
            if !verdicts.is_empty() {
                say!("{} time-points, {n} violated", verdicts.len());
            }
        }
        Ok(u8::from(violated))
    }

    fn session(&self, f: TypedFormula, sig: Signature) -> Result<Session, Failure> {
        match Session::new(f.clone(), sig) {
            Ok(s) => {
                if self.verbose > 0 {
                    eprintln!("enforcing a {} policy", s.report().verdict);
                }
                Ok(s)
            }
            Err(SessionError::Refused(report)) => Err(Failure(
                explain(&report, &f).lines().map(String::from).collect(),
            )),
            Err(e) => Err(e.into()),
        }
    }

    fn enforce(&self, spec: &PolicySpec, listen: Option<&str>) -> Outcome {
        let (f, sig, _) = spec.load()?;
        let session = self.session(f, sig)?;
        let Some(addr) = listen else {
            let stdin = io::stdin();
            serve(session, stdin.lock(), io::stdout().lock())?;
            return Ok(0);
        };
        let listener = TcpListener::bind(addr)?;
        eprintln!("listening on {}", listener.local_addr()?);
        let verbose = self.verbose;
        for conn in listener.incoming() {
            let conn = match conn {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("accept failed: {e}");
                    continue;
                }
            };
            let s = session.clone();
            thread::spawn(move || {
                let peer = conn.peer_addr().map(|a| a.to_string()).unwrap_or_default();
                let result = conn
                    .try_clone()
                    .and_then(|reader| serve(s, BufReader::new(reader), conn));
                match result {
                    Ok(log) if verbose > 0 => eprintln!("{peer}: session closed after {} time-points", log.len()),
                    Err(e) => eprintln!("{peer}: {e}"),
                    _ => {}
                }
            });
        }
        Ok(0)
    }

    fn simulate(&self, name: &str, policy: Option<&Path>, sig: Option<&Path>, close: bool) -> Outcome {
        let file = Path::new(name);
        let (scenario, sig) = if file.is_file() {
            let sig = load_signature(sig.ok_or("--sig is required with a scenario file")?)?;
            let log = parse_log(&read(file)?, &sig).map_err(|e| Failure(vec![format!("{name}: {e}")]))?;
            (Scenario::from_log(name, "", &log), sig)
        } else {
            let s = corpus::load_scenario(name)?;
            let sig = match sig {
                Some(p) => load_signature(p)?,
                None => parse_signature(corpus::file(&s.signature_file).ok_or("missing signature")?)?,
            };
            (s, sig)
        };
        let f = match policy {
            Some(p) => load_policy(p, &sig, close)?,
            None => typecheck(&corpus::load_entry("phi1")?.closed(), &sig).map_err(|errs| {
                Failure(errs.iter().map(|e| format!("bundled policy: {e}")).collect())
            })?,
        };
        let sim = simulate(self.session(f, sig)?, &scenario)?;
        let ok = sim.satisfied();
        if self.json() {
            let lines: Vec<Json> = sim
                .transcript
                .lines
                .iter()
                .map(|(d, l)| {
                    let dir = if *d == Direction::Sent { "sent" } else { "received" };
                    json!({"direction": dir, "message": serde_json::from_str::<Json>(l).unwrap_or(Json::Null)})
                })
                .collect();
            say!(
                "{}",
                json!({
                    "schema_version": PROTOCOL_VERSION,
                    "transcript": lines,
                    "final_log": serialize_log(&sim.final_log),
                    "oracle": if ok { "satisfied" } else { "violated" },
                })
            );
        } else {
            put!("{}", sim.transcript);
            say!("final log:");
            put!("{}", serialize_log(&sim.final_log));
            say!("oracle: {}", if ok { "satisfied" } else { "violated" });
            for v in sim.verdicts.iter().filter(|v| v.status == Status::Violated) {
                say!("  {v}");
            }
        }
        Ok(u8::from(!ok))
    }

    fn convert(&self, rules: &Path, sig: Option<&Path>, out_dir: Option<&Path>) -> Outcome {
        let sig = sig.map(load_signature).transpose()?;
        let text = read(rules)?;
        let results = convert_file(&text, sig.as_ref()).map_err(|e| Failure(vec![format!("{}: {e}", rules.display())]))?;
        if let Some(dir) = out_dir {
            fs::create_dir_all(dir)?;
        }
        let mut failed = false;
        let mut docs = Vec::new();
        for r in &results {
            match r {
                Ok(rule) => {
                    let text = pretty_print(&rule.formula);
                    for w in &rule.warnings {
                        eprintln!("{}: rule {}: warning: {w}", rules.display(), rule.label);
                    }
                    for e in &rule.type_errors {
                        eprintln!("{}: rule {}: type error: {e}", rules.display(), rule.label);
                    }
                    if let Some(dir) = out_dir {
                        let path = dir.join(format!("{}.mfotl", rule.label));
                        fs::write(&path, format!("{text}\n"))?;
                        if self.verbose > 0 {
                            eprintln!("wrote {}", path.display());
                        }
                    }
                    docs.push(json!({
                        "label": rule.label,
                        "formula": text,
                        "warnings": rule.warnings.iter().map(warning_json).collect::<Vec<_>>(),
                        "type_errors": rule.type_errors.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
                    }));
                    if out_dir.is_none() && !self.json() {
                        say!("# rule {}\n{text}\n", rule.label);
                    }
                }
                Err(fail) => {
                    failed = true;
                    let label = fail.label.as_deref().unwrap_or("?");
                    eprintln!("{}: rule {label}: error: {}", rules.display(), fail.error);
                    docs.push(json!({"label": fail.label, "error": fail.error.to_string()}));
                }
            }
        }
        if self.json() {
            say!("{}", json!({"schema_version": PROTOCOL_VERSION, "rules": docs}));
        }
        Ok(u8::from(failed))
    }

    fn corpus(&self, action: CorpusCmd) -> Outcome {
        match action {
            CorpusCmd::Export { dir } => {
                let written = corpus::export(&dir)?;
                if self.json() {
                    let files: Vec<String> = written.iter().map(|p| p.display().to_string()).collect();
                    say!("{}", json!({"schema_version": PROTOCOL_VERSION, "files": files}));
                } else {
                    for p in &written {
                        say!("{}", p.display());
                    }
                }
            }
            CorpusCmd::List => {
                let entries = corpus::load_corpus()?;
                if self.json() {
                    let es: Vec<Json> = entries
                        .iter()
                        .map(|e| {
                            json!({
                                "id": e.id,
                                "policy": e.policy_file,
                                "signature": e.signature_file,
                                "expected_verdict": e.expected_verdict,
                            })
                        })
                        .collect();
                    say!(
                        "{}",
                        json!({"schema_version": PROTOCOL_VERSION, "entries": es, "scenarios": corpus::scenario_names()})
                    );
                } else {
                    for e in &entries {
                        say!("{:<16} {:<22} {}", e.id, e.policy_file, e.expected_verdict);
                    }
                    for s in corpus::scenario_names() {
                        say!("scenario {s}");
                    }
                }
            }
        }
        Ok(0)
    }
}
