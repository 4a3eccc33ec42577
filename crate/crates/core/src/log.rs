//! Timestamped event logs and the `.log` text format.
//!
//! A log is a sequence of time-points `(ts, events)` whose timestamps never decrease.
//! Equal adjacent timestamps are allowed. Events inside a time-point form a set.
//!
//! ```text
//! # one record per time-point
//! @1 consent("Alice", "website.com", "ads");
//! @2 uses("website.com", "bday", "Alice", "ads") tick();
//! ```

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::lex::{Cursor, Pos, SyntaxError, Tok};
use crate::policy::{parse_term, Signature, Sort, Term, Value};

/// A ground event `name(a1, ..., ak)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Event {
    pub name: String,
    pub args: Vec<Value>,
}

impl Event {
    pub fn new(name: impl Into<String>, args: impl IntoIterator<Item = Value>) -> Self {
        Event {
            name: name.into(),
            args: args.into_iter().collect(),
        }
    }

    /// Convenience constructor for all-string events.
    pub fn strs(name: &str, args: &[&str]) -> Self {
        Event::new(name, args.iter().map(|a| Value::str(*a)))
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EventError {
    #[error("unknown event `{0}`")]
    Unknown(String),
    #[error("event `{name}` expects {expected} arguments, found {found}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("argument {index} of `{name}` must be {expected}, found {found}")]
    Sort {
        name: String,
        index: usize,
        expected: Sort,
        found: Sort,
    },
}

/// Checks an event against its schema.
pub fn validate_event(e: &Event, sig: &Signature) -> Result<(), EventError> {
    let schema = sig
        .get(&e.name)
        .ok_or_else(|| EventError::Unknown(e.name.clone()))?;
    if schema.arity() != e.args.len() {
        return Err(EventError::Arity {
            name: e.name.clone(),
            expected: schema.arity(),
            found: e.args.len(),
        });
    }
    for (index, (a, expected)) in e.args.iter().zip(schema.sorts()).enumerate() {
        if a.sort() != expected {
            return Err(EventError::Sort {
                name: e.name.clone(),
                index,
                expected,
                found: a.sort(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimePoint {
    pub ts: u64,
    pub events: BTreeSet<Event>,
}

impl TimePoint {
    pub fn new(ts: u64, events: impl IntoIterator<Item = Event>) -> Self {
        TimePoint {
            ts,
            events: events.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("timestamp {ts} of time-point {index} is smaller than timestamp {prev_ts} of time-point {prev_index}")]
pub struct DecreasingTimestamp {
    pub index: usize,
    pub ts: u64,
    pub prev_index: usize,
    pub prev_ts: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Decreasing(#[from] DecreasingTimestamp),
    #[error("{source} at {pos}")]
    Event {
        pos: Pos,
        #[source]
        source: EventError,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Log {
    points: Vec<TimePoint>,
}

impl Log {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_points(points: Vec<TimePoint>) -> Result<Self, DecreasingTimestamp> {
        let mut log = Log::new();
        for p in points {
            log.push(p)?;
        }
        Ok(log)
    }

    /// Appends a time-point, rejecting a timestamp below the last one.
    pub fn push(&mut self, tp: TimePoint) -> Result<(), DecreasingTimestamp> {
        if let Some(last) = self.points.last() {
            if tp.ts < last.ts {
                return Err(DecreasingTimestamp {
                    index: self.points.len(),
                    ts: tp.ts,
                    prev_index: self.points.len() - 1,
                    prev_ts: last.ts,
                });
            }
        }
        self.points.push(tp);
        Ok(())
    }

    /// Value-returning form of [`Log::push`].
    pub fn append(&self, tp: TimePoint) -> Result<Log, DecreasingTimestamp> {
        let mut out = self.clone();
        out.push(tp)?;
        Ok(out)
    }

    pub fn points(&self) -> &[TimePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn ts(&self, i: usize) -> u64 {
        self.points[i].ts
    }

    pub fn last_ts(&self) -> Option<u64> {
        self.points.last().map(|p| p.ts)
    }

    /// The first `n` time-points.
    pub fn prefix(&self, n: usize) -> Log {
        Log {
            points: self.points[..n.min(self.points.len())].to_vec(),
        }
    }

    /// All constants in the log.
    pub fn constants(&self) -> BTreeSet<Value> {
        self.points
            .iter()
            .flat_map(|p| p.events.iter())
            .flat_map(|e| e.args.iter().cloned())
            .collect()
    }
}

/// Renders a log in the `.log` format: one `@ts e1 e2 ...;` line per time-point,
/// events in sorted order.
pub fn serialize_log(log: &Log) -> String {
    let mut out = String::new();
    for p in &log.points {
        out.push('@');
        out.push_str(&p.ts.to_string());
        for e in &p.events {
            out.push(' ');
            out.push_str(&e.to_string());
        }
        out.push_str(";\n");
    }
    out
}

impl fmt::Display for Log {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_log(self))
    }
}

/// Parses a `.log` file, validating every event against `sig`.
pub fn parse_log(text: &str, sig: &Signature) -> Result<Log, LogError> {
    let mut cur = Cursor::new(text)?;
    let mut log = Log::new();
    while !cur.at_eof() {
        cur.expect_punct('@')?;
        let ts = match cur.peek() {
            Tok::Int(n) if *n >= 0 => *n as u64,
            _ => return Err(cur.error(&["non-negative timestamp"]).into()),
        };
        cur.next();
        let mut events = BTreeSet::new();
        while !cur.eat_punct(';') {
            let pos = cur.pos();
            let e = parse_event(&mut cur)?;
            validate_event(&e, sig).map_err(|source| LogError::Event { pos, source })?;
            events.insert(e);
        }
        log.push(TimePoint { ts, events })?;
    }
    Ok(log)
}

pub(crate) fn parse_event(cur: &mut Cursor) -> Result<Event, SyntaxError> {
    let name = cur.expect_ident("event or `;`")?;
    cur.expect_punct('(')?;
    let mut args = Vec::new();
    if !cur.eat_punct(')') {
        loop {
            let pos = cur.pos();
            match parse_term(cur)? {
                Term::Const(c) => args.push(c),
                Term::Var(v) => return Err(SyntaxError::new(pos, &["constant"], format!("`{v}`"))),
            }
            if cur.eat_punct(')') {
                break;
            }
            cur.expect_punct(',')?;
        }
    }
    Ok(Event { name, args })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::parse_signature;

    fn sig() -> Signature {
        parse_signature(
            "event uses(app: string, data: string, user: string, purpose: string) {observable, suppressable}\n\
             event consent(user: string, app: string, purpose: string) {observable}\n\
             event e() {observable}\nevent f() {observable}\nevent n(x: int) {observable}",
        )
        .unwrap()
    }

    #[test]
    fn consent_then_use() {
        let log = parse_log(
            r#"@1 consent("Alice","website.com","advertisement"); @2 uses("website.com","birthday","Alice","advertisement");"#,
            &sig(),
        )
        .unwrap();
        assert_eq!(log.len(), 2);
        assert_eq!(log.ts(1), 2);
        assert!(log.points()[1]
            .events
            .contains(&Event::strs("uses", &["website.com", "birthday", "Alice", "advertisement"])));
    }

    #[test]
    fn empty_input() {
        assert!(parse_log("", &sig()).unwrap().is_empty());
        assert_eq!(serialize_log(&Log::new()), "");
    }

    #[test]
    fn decreasing_timestamp() {
        let err = parse_log("@5 e(); @3 e();", &sig()).unwrap_err();
        assert_eq!(
            err,
            LogError::Decreasing(DecreasingTimestamp {
                index: 1,
                ts: 3,
                prev_index: 0,
                prev_ts: 5
            })
        );
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(
            parse_log("@1 g();", &sig()),
            Err(LogError::Event { source: EventError::Unknown(_), .. })
        ));
        assert!(matches!(
            parse_log("@1 n(\"a\");", &sig()),
            Err(LogError::Event { source: EventError::Sort { .. }, .. })
        ));
        assert!(matches!(parse_log("@1 n(x);", &sig()), Err(LogError::Syntax(_))));
        assert!(matches!(parse_log("@1 e()", &sig()), Err(LogError::Syntax(_))));
    }

    #[test]
    fn append_rules() {
        let one = Log::new().append(TimePoint::new(0, [])).unwrap();
        assert_eq!(one.len(), 1);

        let log = Log::from_points(vec![TimePoint::new(1, [Event::strs("e", &[])])]).unwrap();
        let two = log.append(TimePoint::new(1, [Event::strs("f", &[])])).unwrap();
        assert_eq!(two.len(), 2);

        let log = Log::from_points(vec![TimePoint::new(2, [Event::strs("e", &[])])]).unwrap();
        assert!(log.append(TimePoint::new(1, [])).is_err());
    }

    #[test]
    fn serialization_is_sorted_and_terminated() {
        let log = Log::from_points(vec![TimePoint::new(
            4,
            [Event::strs("f", &[]), Event::new("n", [Value::Int(-2)]), Event::strs("e", &[])],
        )])
        .unwrap();
        assert_eq!(serialize_log(&log), "@4 e() f() n(-2);\n");
        assert_eq!(parse_log(&serialize_log(&log), &sig()).unwrap(), log);
    }
}
