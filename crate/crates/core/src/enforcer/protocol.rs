//! Newline-delimited JSON protocol between a system and an enforcement [`Session`].
//!
//! Messages from the system:
//!
//! ```text
//! {"type":"tick","ts":2,"events":[{"name":"uses","args":["website.com","bday","Alice","ads"]}]}
//! {"type":"advance","ts":30}
//! {"type":"end"}
//! ```
//!
//! Replies, one JSON object per line, keys in the order shown:
//!
//! ```text
//! {"type":"command","suppress":[0],"cause":[],"violation":null}
//! {"type":"command","proactive":true,"ts":30,"suppress":[],"cause":[{"name":"delete","args":["Alice"]}],"violation":null}
//! {"type":"final","log":"@2;\n"}
//! {"type":"error","message":"..."}
//! ```
//!
//! A `tick` is answered by the proactive commands that became overdue before it,
//! followed by exactly one reactive command. An `advance` is answered by the proactive
//! commands due by then, or by a single empty proactive command. `end` flushes the
//! remaining obligations and closes the session with the committed log.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::{Command, Session};
use crate::log::{serialize_log, Event, Log};
use crate::policy::Value;

/// Protocol version reported by machine-readable CLI output.
pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireEvent {
    pub name: String,
    pub args: Vec<Json>,
}

impl WireEvent {
    pub fn to_event(&self) -> Result<Event, String> {
        let args = self
            .args
            .iter()
            .map(|a| match a {
                Json::String(s) => Ok(Value::Str(s.clone())),
                Json::Number(n) => n
                    .as_i64()
                    .map(Value::Int)
                    .ok_or_else(|| format!("argument {n} is not a 64-bit integer")),
                other => Err(format!("argument {other} is neither a string nor an integer")),
            })
            .collect::<Result<_, _>>()?;
        Ok(Event {
            name: self.name.clone(),
            args,
        })
    }
}

impl From<&Event> for WireEvent {
    fn from(e: &Event) -> Self {
        WireEvent {
            name: e.name.clone(),
            args: e.args.iter().map(value_json).collect(),
        }
    }
}

pub fn value_json(v: &Value) -> Json {
    match v {
        Value::Str(s) => Json::String(s.clone()),
        Value::Int(n) => Json::from(*n),
    }
}

/// Messages sent by the system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Request {
    Tick { ts: u64, events: Vec<WireEvent> },
    Advance { ts: u64 },
    End,
}

#[derive(Serialize)]
struct ViolationMsg {
    index: usize,
    witness: BTreeMap<String, Json>,
}

#[derive(Serialize)]
struct CommandMsg<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    proactive: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    ts: Option<u64>,
    suppress: &'a [usize],
    cause: Vec<WireEvent>,
    violation: Option<ViolationMsg>,
}

#[derive(Serialize)]
struct FinalMsg<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    log: &'a str,
}

#[derive(Serialize)]
struct ErrorMsg<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    message: &'a str,
}

/// One-line JSON rendering of a command. Proactive commands carry their timestamp.
pub fn encode_command(c: &Command) -> String {
    let msg = CommandMsg {
        kind: "command",
        proactive: c.proactive,
        ts: c.proactive.then_some(c.ts),
        suppress: &c.suppress,
        cause: c.cause.iter().map(WireEvent::from).collect(),
        violation: c.violation.as_ref().map(|v| ViolationMsg {
            index: v.index,
            witness: v.witness.iter().map(|(k, x)| (k.clone(), value_json(x))).collect(),
        }),
    };
    serde_json::to_string(&msg).expect("serializable")
}

pub fn encode_final(log: &Log) -> String {
    serde_json::to_string(&FinalMsg {
        kind: "final",
        log: &serialize_log(log),
    })
    .expect("serializable")
}

pub fn encode_error(message: &str) -> String {
    serde_json::to_string(&ErrorMsg { kind: "error", message }).expect("serializable")
}

/// Protocol state machine around a session.
pub struct Endpoint {
    session: Session,
    closed: Option<Log>,
}

impl Endpoint {
    pub fn new(session: Session) -> Self {
        Endpoint {
            session,
            closed: None,
        }
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    /// The committed log, once `end` was received.
    pub fn final_log(&self) -> Option<&Log> {
        self.closed.as_ref()
    }

    /// Handles one input line and returns the reply lines. Blank lines get no reply.
    pub fn handle_line(&mut self, line: &str) -> Vec<String> {
        if line.trim().is_empty() {
            return vec![];
        }
        if self.closed.is_some() {
            return vec![encode_error("session has ended")];
        }
        let req: Request = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => return vec![encode_error(&format!("malformed message: {e}"))],
        };
        match req {
            Request::Tick { ts, events } => {
                let events: Result<Vec<Event>, String> = events.iter().map(WireEvent::to_event).collect();
                let events = match events {
                    Ok(e) => e,
                    Err(m) => return vec![encode_error(&m)],
                };
                match self.session.react(ts, &events) {
                    Ok(r) => r
                        .proactive
                        .iter()
                        .chain(std::iter::once(&r.command))
                        .map(encode_command)
                        .collect(),
                    Err(e) => vec![encode_error(&e.to_string())],
                }
            }
            Request::Advance { ts } => match self.session.proactive_tick(ts) {
                Ok(cmds) if cmds.is_empty() => vec![encode_command(&Command {
                    ts,
                    proactive: true,
                    suppress: vec![],
                    cause: vec![],
                    violation: None,
                })],
                Ok(cmds) => cmds.iter().map(encode_command).collect(),
                Err(e) => vec![encode_error(&e.to_string())],
            },
            Request::End => {
                let mut out: Vec<String> = self.session.flush().iter().map(encode_command).collect();
                let log = self.session.committed().clone();
                out.push(encode_final(&log));
                self.closed = Some(log);
                out
            }
        }
    }

    pub fn is_closed(&self) -> bool {
        self.closed.is_some()
    }
}

/// Runs a session over a line-oriented duplex stream until `end` or end of input.
/// Returns the committed log.
pub fn serve<R: BufRead, W: Write>(session: Session, input: R, mut output: W) -> io::Result<Log> {
    let mut ep = Endpoint::new(session);
    for line in input.lines() {
        let line = line?;
        for reply in ep.handle_line(&line) {
            output.write_all(reply.as_bytes())?;
            output.write_all(b"\n")?;
        }
        output.flush()?;
        if ep.is_closed() {
            break;
        }
    }
    Ok(match ep.closed {
        Some(log) => log,
        None => ep.session.finalize(),
    })
}

/// Encodes a request as a protocol line.
pub fn encode_request(r: &Request) -> String {
    serde_json::to_string(r).expect("serializable")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{parse_policy, parse_signature, typecheck};

    fn endpoint(policy: &str) -> Endpoint {
        let sig = parse_signature(
            "event uses(app: string, data: string, user: string, purpose: string) {observable, suppressable}\n\
             event consent(user: string, app: string, purpose: string) {observable}\n\
             event request(u: string) {observable}\n\
             event delete(u: string) {observable, causable}",
        )
        .unwrap();
        let f = typecheck(&parse_policy(policy).unwrap(), &sig).unwrap();
        Endpoint::new(Session::new(f, sig).unwrap())
    }

    const PHI1: &str = "ALWAYS (FORALL a,d,u,p. uses(a,d,u,p) IMPLIES ONCE consent(u,a,p))";

    #[test]
    fn tick_and_end() {
        let mut ep = endpoint(PHI1);
        let r = ep.handle_line(
            r#"{"type":"tick","ts":1,"events":[{"name":"uses","args":["website.com","bday","Alice","ads"]}]}"#,
        );
        assert_eq!(r, vec![r#"{"type":"command","suppress":[0],"cause":[],"violation":null}"#]);
        let r = ep.handle_line(r#"{"type":"end"}"#);
        assert_eq!(r, vec![r#"{"type":"final","log":"@1;\n"}"#]);
        assert_eq!(ep.handle_line(r#"{"type":"end"}"#).len(), 1);
    }

    #[test]
    fn malformed_keeps_session() {
        let mut ep = endpoint(PHI1);
        assert!(ep.handle_line("{nope").unwrap_first().starts_with(r#"{"type":"error","message":"malformed"#));
        assert!(ep.handle_line(r#"{"type":"tick","ts":1,"events":[{"name":"nope","args":[]}]}"#)
            .unwrap_first()
            .starts_with(r#"{"type":"error""#));
        let r = ep.handle_line(r#"{"type":"tick","ts":1,"events":[]}"#);
        assert_eq!(r, vec![r#"{"type":"command","suppress":[],"cause":[],"violation":null}"#]);
    }

    #[test]
    fn advance_causes_at_deadline() {
        let mut ep = endpoint("ALWAYS (FORALL u. request(u) IMPLIES EVENTUALLY [0,30] delete(u))");
        ep.handle_line(r#"{"type":"tick","ts":0,"events":[{"name":"request","args":["Alice"]}]}"#);
        assert_eq!(
            ep.handle_line(r#"{"type":"advance","ts":10}"#),
            vec![r#"{"type":"command","proactive":true,"ts":10,"suppress":[],"cause":[],"violation":null}"#]
        );
        assert_eq!(
            ep.handle_line(r#"{"type":"advance","ts":30}"#),
            vec![r#"{"type":"command","proactive":true,"ts":30,"suppress":[],"cause":[{"name":"delete","args":["Alice"]}],"violation":null}"#]
        );
    }

    trait First {
        fn unwrap_first(self) -> String;
    }

    impl First for Vec<String> {
        fn unwrap_first(self) -> String {
            self.into_iter().next().unwrap()
        }
    }
}
