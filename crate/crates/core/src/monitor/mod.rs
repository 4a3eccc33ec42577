//! Evaluation of formulae over finite logs and per-time-point verdicts.
//!
//! Two evaluators implement the same point-based semantics. [`evaluate`] is the literal
//! reference; [`Evaluator`] computes satisfying relations and is what [`monitor_log`] and
//! the enforcer use. Quantifiers range over the [`ActiveDomain`]: the constants of the
//! formula and the log.
//!
//! Future operators see only the log at hand. A violation whose truth value could still
//! change once more time-points arrive is reported as [`Status::Pending`].

mod brute;
mod domain;
mod relational;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use brute::{evaluate, evaluate_in};
pub use domain::{ActiveDomain, Valuation};
pub use relational::{Evaluator, Rel};

use crate::log::Log;
use crate::policy::{Formula, Interval, TypedFormula};

pub(crate) use domain::tuples;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("time-point {index} out of range for a log of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("valuation misses free variable `{0}`")]
    MissingVariable(String),
}

pub(crate) fn check_args(f: &Formula, log: &Log, i: usize, v: &Valuation) -> Result<(), EvalError> {
    if i >= log.len() {
        return Err(EvalError::IndexOutOfRange {
            index: i,
            len: log.len(),
        });
    }
    if let Some(x) = f.free_vars().into_iter().find(|x| !v.contains_key(x)) {
        return Err(EvalError::MissingVariable(x));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Satisfied,
    Violated,
    /// False on the log so far, but a future operator's window is still open.
    Pending,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Satisfied => "satisfied",
            Status::Violated => "violated",
            Status::Pending => "pending",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub index: usize,
    pub ts: u64,
    pub status: Status,
    /// Valuations of the outermost universal block under which the body fails.
    pub witnesses: Vec<Valuation>,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "@{} (tp {}): {}", self.ts, self.index, self.status)?;
        for w in &self.witnesses {
            f.write_str(" ")?;
            fmt_valuation(f, w)?;
        }
        Ok(())
    }
}

/// `{x=1, y="a"}`
pub fn fmt_valuation(f: &mut impl fmt::Write, v: &Valuation) -> fmt::Result {
    f.write_str("{")?;
    for (k, (x, val)) in v.iter().enumerate() {
        if k > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{x}={val}")?;
    }
    f.write_str("}")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MonitorError {
    #[error("policy has free variables: {}", .0.join(", "))]
    NotClosed(Vec<String>),
}

/// How far into the future (in time units) the truth of `f` at a point can depend on.
/// `None` means unbounded.
pub fn horizon(f: &Formula) -> Option<u64> {
    use Formula::*;
    let child_max = |f: &Formula| -> Option<u64> {
        f.children()
            .into_iter()
            .map(horizon)
            .try_fold(0u64, |acc, h| h.map(|h| acc.max(h)))
    };
    match f {
        Next(iv, _) | Eventually(iv, _) | Always(iv, _) | Until(iv, _, _) => {
            Some(iv.hi()?.saturating_add(child_max(f)?))
        }
        _ => child_max(f),
    }
}

/// Checks every time-point of `log`.
///
/// For `ALWAYS ψ` (unbounded interval) there is one verdict per time-point, judging `ψ`;
/// when `ψ` starts with `FORALL`, each violation carries the falsifying instantiations.
/// Any other formula is judged once, at time-point 0. An empty log yields no verdicts.
pub fn monitor_log(f: &TypedFormula, log: &Log) -> Result<Vec<Verdict>, MonitorError> {
    let fv = f.formula().free_vars();
    if !fv.is_empty() {
        return Err(MonitorError::NotClosed(fv.into_iter().collect()));
    }
    if log.is_empty() {
        return Ok(vec![]);
    }
    let dom = ActiveDomain::new(f.formula(), log);
    let mut ev = Evaluator::new(log, &dom, f.sorts());
    let (body, indices): (&Formula, Vec<usize>) = match f.formula() {
        Formula::Always(iv, body) if *iv == Interval::FULL => (body, (0..log.len()).collect()),
        other => (other, vec![0]),
    };
    let h = horizon(body);
    let future = body.has_future();
    let last = log.last_ts().unwrap_or(0);
    let mut out = Vec::with_capacity(indices.len());
    for i in indices {
        let ts = log.ts(i);
        let violated = ev.violations(body, i);
        let status = if violated.is_empty() {
            Status::Satisfied
        } else if !future || h.is_some_and(|h| last > ts.saturating_add(h)) {
            Status::Violated
        } else {
            Status::Pending
        };
        let witnesses = match (status, body) {
            (Status::Satisfied, _) => vec![],
            (_, Formula::Forall(_, inner)) => ev.violations(inner, i).valuations().collect(),
            _ => vec![],
        };
        out.push(Verdict {
            index: i,
            ts,
            status,
            witnesses,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::log::parse_log;
    use crate::policy::{parse_policy, parse_signature, typecheck, Signature};

    const PHI1: &str = "ALWAYS (FORALL app,data,user,purpose. uses(app,data,user,purpose) IMPLIES ONCE consent(user,app,purpose))";

    fn sig() -> Signature {
        parse_signature(
            "event uses(app: string, data: string, user: string, purpose: string) {observable, suppressable}\n\
             event consent(user: string, app: string, purpose: string) {observable}\n\
             event request(u: string) {observable}\n\
             event delete(u: string) {observable, causable}",
        )
        .unwrap()
    }

    fn typed(text: &str) -> TypedFormula {
        typecheck(&parse_policy(text).unwrap(), &sig()).unwrap()
    }

    #[test]
    fn horizons() {
        let h = |s: &str| horizon(&parse_policy(s).unwrap());
        assert_eq!(h("ONCE e()"), Some(0));
        assert_eq!(h("EVENTUALLY [0,30] e()"), Some(30));
        assert_eq!(h("NEXT [1,2] EVENTUALLY [0,3] e() AND ONCE f()"), Some(5));
        assert_eq!(h("EVENTUALLY e()"), None);
    }

    #[test]
    fn phi1_witness() {
        let log = parse_log(
            r#"@1 uses("website.com","bday","Alice","ads"); @2 consent("Alice","website.com","ads");"#,
            &sig(),
        )
        .unwrap();
        let vs = monitor_log(&typed(PHI1), &log).unwrap();
        assert_eq!(vs[0].status, Status::Violated);
        assert_eq!(vs[1].status, Status::Satisfied);
        let w: Valuation = [
            ("app", "website.com"),
            ("data", "bday"),
            ("user", "Alice"),
            ("purpose", "ads"),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), crate::policy::Value::str(v)))
        .collect();
        assert_eq!(vs[0].witnesses, vec![w]);
        assert_eq!(
            vs[0].to_string(),
            r#"@1 (tp 0): violated {app="website.com", data="bday", purpose="ads", user="Alice"}"#
        );
    }

    #[test]
    fn empty_log_has_no_verdicts() {
        assert!(monitor_log(&typed(PHI1), &Log::new()).unwrap().is_empty());
    }

    #[test]
    fn open_deadline_is_pending() {
        let f = typed("ALWAYS (FORALL u. request(u) IMPLIES EVENTUALLY [0,30] delete(u))");
        let log = parse_log(r#"@0 request("a"); @30;"#, &sig()).unwrap();
        assert_eq!(monitor_log(&f, &log).unwrap()[0].status, Status::Pending);
        let log = parse_log(r#"@0 request("a"); @31;"#, &sig()).unwrap();
        assert_eq!(monitor_log(&f, &log).unwrap()[0].status, Status::Violated);
        let log = parse_log(r#"@0 request("a"); @30 delete("a");"#, &sig()).unwrap();
        assert!(monitor_log(&f, &log)
            .unwrap()
            .iter()
            .all(|v| v.status == Status::Satisfied));
    }

    #[test]
    fn non_always_formula_single_verdict() {
        let f = typed("EXISTS u. request(u)");
        let log = parse_log(r#"@0; @1 request("a");"#, &sig()).unwrap();
        let vs = monitor_log(&f, &log).unwrap();
        assert_eq!(vs.len(), 1);
        assert_eq!(vs[0].status, Status::Violated);
    }
}
