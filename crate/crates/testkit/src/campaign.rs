//! Enforcer fuzzing: soundness and transparency audits of simulated runs.

use mfotl_core::corpus::Scenario;
use mfotl_core::enforcer::harness::{simulate, Direction, Simulation};
use mfotl_core::enforcer::Session;
use mfotl_core::log::{Event, Log, TimePoint};
use mfotl_core::monitor::{horizon, monitor_log, Status};
use mfotl_core::policy::{Formula, Signature, TypedFormula};
use serde_json::Value as Json;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Audit {
    pub runs: usize,
    pub points: usize,
    pub suppressed: usize,
    pub caused: usize,
    /// Runs whose final log has a violated time-point.
    pub unsound: Vec<String>,
    /// Interventions that were not needed.
    pub opaque: Vec<String>,
}

impl Audit {
    pub fn merge(&mut self, other: Audit) {
        self.runs += other.runs;
        self.points += other.points;
        self.suppressed += other.suppressed;
        self.caused += other.caused;
        self.unsound.extend(other.unsound);
        self.opaque.extend(other.opaque);
    }
}

/// Suppressed and caused events per committed time-point, recovered from the transcript.
fn interventions(sim: &Simulation) -> Vec<(Vec<Event>, Vec<Event>)> {
    let mut proposed: Vec<Event> = vec![];
    let mut out = vec![];
    for (dir, line) in &sim.transcript.lines {
        let msg: Json = serde_json::from_str(line).expect("protocol lines are JSON");
        let event = |e: &Json| {
            let w: mfotl_core::enforcer::protocol::WireEvent =
                serde_json::from_value(e.clone()).expect("wire event");
            w.to_event().expect("valid event")
        };
        match (dir, msg["type"].as_str()) {
            (Direction::Sent, Some("tick")) => {
                proposed = msg["events"].as_array().into_iter().flatten().map(event).collect();
            }
            (Direction::Received, Some("command")) => {
                let suppressed = if msg["proactive"].as_bool().unwrap_or(false) {
                    vec![]
                } else {
                    msg["suppress"]
                        .as_array()
                        .into_iter()
                        .flatten()
                        .map(|i| proposed[i.as_u64().expect("index") as usize].clone())
                        .collect()
                };
                let caused = msg["cause"].as_array().into_iter().flatten().map(event).collect();
                out.push((suppressed, caused));
            }
            _ => {}
        }
    }
    out
}

/// Some time-point is not settled as satisfied: it is violated, or its future window is
/// still open at the end of `log`.
fn unsatisfied(policy: &TypedFormula, log: &Log) -> bool {
    let body = match policy.formula() {
        Formula::Always(_, body) => body,
        other => other,
    };
    let open = |ts: u64| {
        body.has_future()
            && log.last_ts().is_some_and(|last| horizon(body).is_none_or(|h| last <= ts.saturating_add(h)))
    };
    monitor_log(policy, log)
        .expect("closed policy")
        .iter()
        .any(|v| v.status != Status::Satisfied || open(v.ts))
}

fn edit(log: &Log, upto: usize, at: usize, change: impl FnOnce(&mut TimePoint)) -> Log {
    let mut points: Vec<TimePoint> = log.points()[..upto].to_vec();
    change(&mut points[at]);
    Log::from_points(points).expect("timestamps unchanged")
}

/// Runs `script` against a fresh session and audits the outcome.
///
/// Soundness: no time-point of the final log is violated. Transparency: putting back any
/// single suppressed event leaves the prefix ending at its time-point unsatisfied, and
/// taking out any single caused event leaves the whole log unsatisfied.
pub fn audit(policy: &TypedFormula, sig: &Signature, script: &Scenario) -> Audit {
    let session = Session::new(policy.clone(), sig.clone()).expect("enforceable policy");
    let sim = simulate(session, script).expect("protocol run");
    let log = &sim.final_log;
    let mut a = Audit {
        runs: 1,
        points: log.len(),
        ..Audit::default()
    };
    let tag = |what: String| format!("{what} in {:?}", script.steps);
    if !sim.satisfied() {
        a.unsound.push(tag("violated final log".into()));
    }
    let per_point = interventions(&sim);
    assert_eq!(per_point.len(), log.len(), "one command per committed time-point");
    for (j, (suppressed, caused)) in per_point.iter().enumerate() {
        for e in suppressed {
            a.suppressed += 1;
            let back = edit(log, j + 1, j, |p| {
                p.events.insert(e.clone());
            });
            if !unsatisfied(policy, &back) {
                a.opaque.push(tag(format!("needless suppression of {e} at {j}")));
            }
        }
        for e in caused {
            a.caused += 1;
            let without = edit(log, log.len(), j, |p| {
                p.events.remove(e);
            });
            if !unsatisfied(policy, &without) {
                a.opaque.push(tag(format!("needless cause of {e} at {j}")));
            }
        }
    }
    a
}
