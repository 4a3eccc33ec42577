//! Scripted system driving a session through the wire protocol over an in-memory
//! duplex byte stream.

use std::fmt;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::thread;

use super::protocol::{encode_request, serve, Request, WireEvent};
use super::Session;
use crate::corpus::Scenario;
use crate::log::{parse_log, Log};
use crate::monitor::{monitor_log, MonitorError, Status, Verdict};

/// Reading end of an in-memory pipe.
pub struct PipeReader {
    rx: Receiver<Vec<u8>>,
    buf: Vec<u8>,
    at: usize,
}

/// Writing end of an in-memory pipe.
pub struct PipeWriter {
    tx: Sender<Vec<u8>>,
}

/// A one-directional in-memory byte pipe. Reads block until data arrives or the
/// writer is dropped.
pub fn pipe() -> (PipeWriter, PipeReader) {
    let (tx, rx) = channel();
    (PipeWriter { tx }, PipeReader { rx, buf: vec![], at: 0 })
}

impl Read for PipeReader {
    fn read(&mut self, out: &mut [u8]) -> io::Result<usize> {
        if self.at == self.buf.len() {
            match self.rx.recv() {
                Ok(b) => {
                    self.buf = b;
                    self.at = 0;
                }
                Err(_) => return Ok(0),
            }
        }
        let n = out.len().min(self.buf.len() - self.at);
        out[..n].copy_from_slice(&self.buf[self.at..self.at + n]);
        self.at += n;
        Ok(n)
    }
}

impl Write for PipeWriter {
    fn write(&mut self, b: &[u8]) -> io::Result<usize> {
        self.tx
            .send(b.to_vec())
            .map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "peer closed"))?;
        Ok(b.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// System to enforcer.
    Sent,
    /// Enforcer to system.
    Received,
}

/// Every protocol line exchanged, in order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    pub lines: Vec<(Direction, String)>,
}

impl fmt::Display for Transcript {
    /// `> ` for lines sent by the system, `< ` for replies.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (d, l) in &self.lines {
            let tag = match d {
                Direction::Sent => '>',
                Direction::Received => '<',
            };
            writeln!(f, "{tag} {l}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub transcript: Transcript,
    /// The log reported in the enforcer's `final` message.
    pub final_log: Log,
    /// Monitor verdicts on the final log.
    pub verdicts: Vec<Verdict>,
}

impl Simulation {
    pub fn satisfied(&self) -> bool {
        self.verdicts.iter().all(|v| v.status != Status::Violated)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("protocol stream failed: {0}")]
    Io(#[from] io::Error),
    #[error("unexpected reply: {0}")]
    Protocol(String),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
}

fn reply_type(line: &str) -> Result<(String, bool), HarnessError> {
    let v: serde_json::Value =
        serde_json::from_str(line).map_err(|_| HarnessError::Protocol(line.to_string()))?;
    let kind = v["type"].as_str().unwrap_or_default().to_string();
    Ok((kind, v["proactive"].as_bool().unwrap_or(false)))
}

/// Plays `scenario` against `session` and checks the resulting log with the monitor.
pub fn simulate(session: Session, scenario: &Scenario) -> Result<Simulation, HarnessError> {
    let policy = session.policy().clone();
    let sig = session.signature().clone();
    let (mut to_enforcer, enforcer_in) = pipe();
    let (enforcer_out, from_enforcer) = pipe();
    let server = thread::spawn(move || serve(session, BufReader::new(enforcer_in), enforcer_out));
    let mut replies = BufReader::new(from_enforcer).lines();
    let mut transcript = Transcript::default();
    let mut send = |r: Request, t: &mut Transcript| -> io::Result<()> {
        let line = encode_request(&r);
        to_enforcer.write_all(line.as_bytes())?;
        to_enforcer.write_all(b"\n")?;
        t.lines.push((Direction::Sent, line));
        Ok(())
    };
    let mut final_text = None;
    let requests = scenario
        .steps
        .iter()
        .map(|(ts, events)| Request::Tick {
            ts: *ts,
            events: events.iter().map(WireEvent::from).collect(),
        })
        .chain(std::iter::once(Request::End));
    for req in requests {
        let is_end = req == Request::End;
        send(req, &mut transcript)?;
        loop {
            let line = replies
                .next()
                .ok_or_else(|| HarnessError::Protocol("stream closed".into()))??;
            let (kind, proactive) = reply_type(&line)?;
            transcript.lines.push((Direction::Received, line.clone()));
            match kind.as_str() {
                "final" => {
                    let v: serde_json::Value = serde_json::from_str(&line).expect("parsed above");
                    final_text = v["log"].as_str().map(String::from);
                    break;
                }
                "command" if !proactive && !is_end => break,
                "error" => return Err(HarnessError::Protocol(line)),
                _ => {}
            }
        }
    }
    drop(to_enforcer);
    server
        .join()
        .map_err(|_| HarnessError::Protocol("enforcer thread panicked".into()))??;
    let text = final_text.ok_or_else(|| HarnessError::Protocol("no final message".into()))?;
    let final_log = parse_log(&text, &sig).map_err(|e| HarnessError::Protocol(e.to_string()))?;
    let verdicts = monitor_log(&policy, &final_log)?;
    Ok(Simulation {
        transcript,
        final_log,
        verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{load_entry, load_scenario};

    fn phi1() -> Session {
        let e = load_entry("phi1").unwrap();
        Session::new(e.typed().unwrap(), e.signature.clone()).unwrap()
    }

    #[test]
    fn use_without_consent() {
        let sim = simulate(phi1(), &load_scenario("use-without-consent").unwrap()).unwrap();
        assert!(sim.satisfied());
        assert_eq!(sim.transcript.lines.len(), 4);
        assert!(sim.transcript.lines[1].1.contains(r#""suppress":[0]"#));
        assert_eq!(sim.final_log.points()[0].events.len(), 0);
    }

    #[test]
    fn consent_then_use() {
        let sim = simulate(phi1(), &load_scenario("consent-then-use").unwrap()).unwrap();
        assert!(sim.satisfied());
        assert_eq!(sim.final_log.len(), 2);
        assert!(sim
            .transcript
            .lines
            .iter()
            .filter(|(d, _)| *d == Direction::Received)
            .all(|(_, l)| !l.contains(r#""suppress":[0"#)));
    }

    #[test]
    fn empty_scenario() {
        let sim = simulate(phi1(), &load_scenario("empty").unwrap()).unwrap();
        assert!(sim.final_log.is_empty());
        assert_eq!(sim.transcript.to_string(), "> {\"type\":\"end\"}\n< {\"type\":\"final\",\"log\":\"\"}\n");
    }
}
