//! Online enforcement: a session receives the time-points proposed by the system,
//! answers each with a [`Command`] that suppresses or causes events, and keeps the
//! committed log compliant with an `ALWAYS ψ` policy.
//!
//! Bounded `EVENTUALLY` requirements become [`Obligation`]s that are discharged lazily:
//! the enforcer causes the required events only when the deadline is reached and the
//! system has not produced them itself.
//!
//! ```
//! use mfotl_core::enforcer::Session;
//! use mfotl_core::log::Event;
//! use mfotl_core::policy::{parse_policy, parse_signature, typecheck};
//!
//! let sig = parse_signature(
//!     "event uses(app: string, data: string, user: string, purpose: string) {observable, suppressable}\n\
//!      event consent(user: string, app: string, purpose: string) {observable}",
//! ).unwrap();
//! let policy = parse_policy(
//!     "ALWAYS (FORALL a,d,u,p. uses(a,d,u,p) IMPLIES ONCE consent(u,a,p))",
//! ).unwrap();
//! let mut s = Session::new(typecheck(&policy, &sig).unwrap(), sig).unwrap();
//! let r = s.react(2, &[Event::strs("uses", &["website.com", "bday", "Alice", "ads"])]).unwrap();
//! assert_eq!(r.command.suppress, vec![0]);
//! ```

mod plan;
pub mod harness;
pub mod protocol;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::enforceability::{analyze, CapabilityMap, Enforceability, EnforceabilityReport};
use crate::log::{validate_event, DecreasingTimestamp, Event, EventError, Log, TimePoint};
use crate::monitor::{tuples, ActiveDomain, Evaluator, Valuation};
use crate::policy::{Formula, Signature, TypedFormula};

pub use plan::Obligation;
use plan::{Plan, Planner};

const MAX_ROUNDS: usize = 16;

/// Instruction for one time-point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Command {
    pub ts: u64,
    /// Issued on the enforcer's own initiative, as a separate time-point.
    pub proactive: bool,
    /// Indices into the proposed event list.
    pub suppress: Vec<usize>,
    pub cause: Vec<Event>,
    pub violation: Option<ViolationNotice>,
}

impl Command {
    pub fn is_empty(&self) -> bool {
        self.suppress.is_empty() && self.cause.is_empty() && self.violation.is_none()
    }
}

/// The policy could not be kept at time-point `index`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViolationNotice {
    pub index: usize,
    pub witness: Valuation,
}

/// Answer to a proposed time-point. Overdue obligations are discharged first, each as
/// its own time-point at its deadline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reaction {
    pub proactive: Vec<Command>,
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("policy is not enforceable")]
    Refused(Box<EnforceabilityReport>),
    #[error(transparent)]
    Decreasing(#[from] DecreasingTimestamp),
    #[error(transparent)]
    Event(#[from] EventError),
}

/// Enforcement state for one system.
#[derive(Debug, Clone)]
pub struct Session {
    policy: TypedFormula,
    sig: Signature,
    caps: CapabilityMap,
    report: EnforceabilityReport,
    committed: Log,
    obligations: Vec<Obligation>,
    degraded: bool,
}

/// Starts a session, refusing policies that are not enforceable under `sig`.
pub fn init_session(policy: TypedFormula, sig: Signature) -> Result<Session, SessionError> {
    Session::new(policy, sig)
}

struct Assessment {
    plan: Plan,
    /// Requirements left unmet, with their valuations.
    failures: Vec<(Formula, Valuation)>,
}

/// Events the planner must leave in place (`pinned`) or must not add (`banned`).
#[derive(Default, Clone)]
struct Fixed {
    pinned: BTreeSet<Event>,
    banned: BTreeSet<Event>,
}

impl Session {
    pub fn new(policy: TypedFormula, sig: Signature) -> Result<Self, SessionError> {
        let caps = CapabilityMap::from(&sig);
        let report = analyze(&policy, &caps);
        if report.verdict == Enforceability::NotEnforceable {
            return Err(SessionError::Refused(Box::new(report)));
        }
        Ok(Session {
            policy,
            sig,
            caps,
            report,
            committed: Log::new(),
            obligations: Vec::new(),
            degraded: false,
        })
    }

    pub fn policy(&self) -> &TypedFormula {
        &self.policy
    }

    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    pub fn report(&self) -> &EnforceabilityReport {
        &self.report
    }

    pub fn committed(&self) -> &Log {
        &self.committed
    }

    pub fn obligations(&self) -> &[Obligation] {
        &self.obligations
    }

    /// Set once a violation could not be prevented.
    pub fn is_degraded(&self) -> bool {
        self.degraded
    }

    fn check_ts(&self, ts: u64) -> Result<(), DecreasingTimestamp> {
        match self.committed.last_ts() {
            Some(prev) if ts < prev => Err(DecreasingTimestamp {
                index: self.committed.len(),
                ts,
                prev_index: self.committed.len() - 1,
                prev_ts: prev,
            }),
            _ => Ok(()),
        }
    }

    /// Decides the time-point the system proposes at `ts`.
    pub fn react(&mut self, ts: u64, proposed: &[Event]) -> Result<Reaction, SessionError> {
        self.check_ts(ts)?;
        for e in proposed {
            validate_event(e, &self.sig)?;
        }
        let proactive = self.flush_while(|o| o.hi < ts);
        let due = self.take(|o| o.hi <= ts);
        let command = self.commit(ts, proposed, due, false);
        Ok(Reaction { proactive, command })
    }

    /// Discharges the obligations that cannot wait past `ts`.
    pub fn proactive_tick(&mut self, ts: u64) -> Result<Vec<Command>, SessionError> {
        self.check_ts(ts)?;
        Ok(self.flush_while(|o| o.hi <= ts))
    }

    /// Discharges every remaining obligation as early as its window allows.
    pub fn flush(&mut self) -> Vec<Command> {
        let mut out = Vec::new();
        for _ in 0..64 {
            if self.obligations.is_empty() {
                break;
            }
            let last = self.committed.last_ts().unwrap_or(0);
            let at = |o: &Obligation| o.lo.max(last).min(o.hi.max(last));
            let t = self.obligations.iter().map(at).min().unwrap_or(last);
            let due = self.take(|o| at(o) == t);
            out.push(self.commit(t, &[], due, true));
        }
        out
    }

    /// Flushes pending obligations and returns the committed log.
    pub fn finalize(mut self) -> Log {
        self.flush();
        self.committed
    }

    fn take(&mut self, pred: impl Fn(&Obligation) -> bool) -> Vec<Obligation> {
        let (due, keep) = std::mem::take(&mut self.obligations).into_iter().partition(|o| pred(o));
        self.obligations = keep;
        due
    }

    fn flush_while(&mut self, pred: impl Fn(&Obligation) -> bool) -> Vec<Command> {
        let mut out = Vec::new();
        for _ in 0..64 {
            let Some(t) = self.obligations.iter().filter(|o| pred(o)).map(|o| o.hi).min() else {
                break;
            };
            let t = t.max(self.committed.last_ts().unwrap_or(0));
            let due = self.take(|o| pred(o) && o.hi <= t);
            out.push(self.commit(t, &[], due, true));
        }
        out
    }

    /// Evaluates the candidate time-point `(ts, events)` and collects the actions needed
    /// to satisfy the policy and the due obligations there, or only the requirements in
    /// `only` when given.
    #[allow(clippy::too_many_arguments)]
    fn assess(
        &self,
        ts: u64,
        proposed: &BTreeSet<Event>,
        events: &BTreeSet<Event>,
        due: &[Obligation],
        fixed: &Fixed,
        act: bool,
        only: Option<&[(Formula, Valuation)]>,
    ) -> Assessment {
        let mut log = self.committed.clone();
        log.push(TimePoint { ts, events: events.clone() }).expect("timestamp checked");
        let dom = ActiveDomain::new(self.policy.formula(), &log);
        let mut ev = Evaluator::new(&log, &dom, self.policy.sorts());
        let i = log.len() - 1;
        let (mut pinned, mut banned) = (fixed.pinned.clone(), fixed.banned.clone());
        for o in due {
            polar_events(&o.target, &o.env, true, &mut pinned, &mut banned);
        }
        let mut planner = Planner {
            ev: &mut ev,
            policy: &self.policy,
            caps: &self.caps,
            i,
            proposed,
            pinned: &pinned,
            banned: &banned,
            act,
        };
        let body = match self.policy.formula() {
            Formula::Always(_, body) => &**body,
            other => other,
        };
        let mut needs: Vec<(&Formula, Valuation)> = Vec::new();
        match body {
            _ if only.is_some() => needs.extend(only.into_iter().flatten().map(|(f, env)| (f, env.clone()))),
            Formula::Forall(vs, inner) => {
                if inner.has_future() {
                    let sorts: Vec<_> = vs.iter().map(|v| self.policy.sort_of(v)).collect();
                    for t in tuples(&dom, &sorts) {
                        needs.push((&**inner, vs.iter().cloned().zip(t).collect()));
                    }
                } else {
                    for env in planner.ev.violations(inner, i).valuations() {
                        needs.push((&**inner, env));
                    }
                }
            }
            other => needs.push((other, Valuation::new())),
        }
        for o in due.iter().filter(|_| only.is_none()) {
            needs.push((&o.target, o.env.clone()));
        }
        let mut plan = Plan::default();
        let mut failures = Vec::new();
        for (f, env) in needs {
            match planner.plan(f, &env, true) {
                Some(p) => plan.merge(p),
                None => failures.push((f.clone(), env)),
            }
        }
        Assessment { plan, failures }
    }

    fn commit(&mut self, ts: u64, proposed: &[Event], due: Vec<Obligation>, proactive: bool) -> Command {
        let proposed_set: BTreeSet<Event> = proposed.iter().cloned().collect();
        let events = |s: &BTreeSet<Event>, c: &BTreeSet<Event>| -> BTreeSet<Event> {
            proposed_set.difference(s).chain(c.iter()).cloned().collect()
        };
        let mut fixed = Fixed::default();
        let (mut suppressed, mut caused) = (BTreeSet::new(), BTreeSet::new());
        for _ in 0..MAX_ROUNDS {
            (suppressed, caused) = (BTreeSet::new(), BTreeSet::new());
            for _ in 0..MAX_ROUNDS {
                let a = self.assess(ts, &proposed_set, &events(&suppressed, &caused), &due, &fixed, true, None);
                let before = (suppressed.len(), caused.len());
                suppressed.extend(a.plan.suppress);
                caused.extend(a.plan.cause.into_iter().filter(|e| !proposed_set.contains(e)));
                if before == (suppressed.len(), caused.len()) {
                    break;
                }
            }
            // Plans chosen for different requirements may undo each other: keep the
            // events an unmet requirement relies on and plan again.
            let failures = self.assess(ts, &proposed_set, &events(&suppressed, &caused), &due, &fixed, false, None).failures;
            let before = (fixed.pinned.len(), fixed.banned.len());
            if !failures.is_empty() {
                for e in &suppressed {
                    let mut s = suppressed.clone();
                    s.remove(e);
                    let left = self.assess(ts, &proposed_set, &events(&s, &caused), &due, &fixed, false, Some(&failures));
                    if left.failures.len() < failures.len() {
                        fixed.pinned.insert(e.clone());
                    }
                }
                for e in &caused {
                    let mut c = caused.clone();
                    c.remove(e);
                    let left = self.assess(ts, &proposed_set, &events(&suppressed, &c), &due, &fixed, false, Some(&failures));
                    if left.failures.len() < failures.len() {
                        fixed.banned.insert(e.clone());
                    }
                }
            }
            if failures.is_empty() || before == (fixed.pinned.len(), fixed.banned.len()) {
                break;
            }
        }
        // Undo every action that turns out to be unnecessary.
        let ok = |s: &BTreeSet<Event>, c: &BTreeSet<Event>| {
            self.assess(ts, &proposed_set, &events(s, c), &due, &fixed, false, None).failures.is_empty()
        };
        if ok(&suppressed, &caused) {
            loop {
                let mut changed = false;
                for e in suppressed.clone() {
                    let mut s = suppressed.clone();
                    s.remove(&e);
                    if ok(&s, &caused) {
                        suppressed = s;
                        changed = true;
                    }
                }
                for e in caused.clone() {
                    let mut c = caused.clone();
                    c.remove(&e);
                    if ok(&suppressed, &c) {
                        caused = c;
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
            }
        }
        let kept = events(&suppressed, &caused);
        let last = self.assess(ts, &proposed_set, &kept, &due, &fixed, false, None);
        let index = self.committed.len();
        self.committed
            .push(TimePoint { ts, events: kept })
            .expect("timestamp checked");
        let violation = last.failures.into_iter().next().map(|(_, witness)| ViolationNotice { index, witness });
        if violation.is_some() {
            self.degraded = true;
        }
        self.discharge(ts, index);
        for o in last.plan.obligations {
            if !self.obligations.contains(&o) {
                self.obligations.push(o);
            }
        }
        Command {
            ts,
            proactive,
            suppress: (0..proposed.len()).filter(|&k| suppressed.contains(&proposed[k])).collect(),
            cause: caused.into_iter().collect(),
            violation,
        }
    }

    /// Drops the obligations met by the time-point just committed.
    fn discharge(&mut self, ts: u64, index: usize) {
        if self.obligations.is_empty() {
            return;
        }
        let dom = ActiveDomain::new(self.policy.formula(), &self.committed);
        let mut ev = Evaluator::new(&self.committed, &dom, self.policy.sorts());
        let met: Vec<bool> = self
            .obligations
            .iter()
            .map(|o| {
                o.lo <= ts
                    && ts <= o.hi
                    && !o.target.has_future()
                    && ev.holds(&o.target, index, &o.env).unwrap_or(false)
            })
            .collect();
        let mut k = 0;
        self.obligations.retain(|_| {
            k += 1;
            !met[k - 1]
        });
    }
}

/// Obligations as (deadline, ground events a cause would produce) pairs, for display.
pub fn describe_obligation(o: &Obligation) -> (u64, Vec<Event>) {
    let mut out = Vec::new();
    collect_events(&o.target, &o.env, &mut out);
    (o.hi, out)
}

fn collect_events(f: &Formula, env: &BTreeMap<String, crate::policy::Value>, out: &mut Vec<Event>) {
    match f {
        Formula::Pred(name, args) if args.iter().all(|t| t.as_var().is_none_or(|v| env.contains_key(v))) => {
            out.push(plan::ground(name, args, env))
        }
        other => {
            for c in other.children() {
                collect_events(c, env, out)
            }
        }
    }
}

/// Ground atoms of `f` under `env`, split by whether they occur positively or negatively.
fn polar_events(
    f: &Formula,
    env: &BTreeMap<String, crate::policy::Value>,
    positive: bool,
    pos: &mut BTreeSet<Event>,
    neg: &mut BTreeSet<Event>,
) {
    match f {
        Formula::Pred(name, args) => {
            if args.iter().all(|t| t.as_var().is_none_or(|v| env.contains_key(v))) {
                let e = plan::ground(name, args, env);
                if positive { pos.insert(e) } else { neg.insert(e) };
            }
        }
        Formula::Not(a) => polar_events(a, env, !positive, pos, neg),
        Formula::Implies(a, b) => {
            polar_events(a, env, !positive, pos, neg);
            polar_events(b, env, positive, pos, neg);
        }
        other => {
            for c in other.children() {
                polar_events(c, env, positive, pos, neg)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monitor::{monitor_log, Status};
    use crate::policy::{parse_policy, parse_signature, typecheck};

    const PHI1: &str = "ALWAYS (FORALL a,d,u,p. uses(a,d,u,p) IMPLIES ONCE consent(u,a,p))";
    const DEL: &str = "ALWAYS (FORALL u. request(u) IMPLIES EVENTUALLY [0,30] delete(u))";

    fn sig() -> Signature {
        parse_signature(
            "event uses(app: string, data: string, user: string, purpose: string) {observable, suppressable}\n\
             event consent(user: string, app: string, purpose: string) {observable}\n\
             event request(u: string) {observable}\n\
             event delete(u: string) {observable, causable}",
        )
        .unwrap()
    }

    fn session(text: &str) -> Session {
        let s = sig();
        Session::new(typecheck(&parse_policy(text).unwrap(), &s).unwrap(), s).unwrap()
    }

    fn uses() -> Event {
        Event::strs("uses", &["website.com", "bday", "Alice", "ads"])
    }

    fn all_satisfied(policy: &TypedFormula, log: &Log) -> bool {
        monitor_log(policy, log).unwrap().iter().all(|v| v.status == Status::Satisfied)
    }

    #[test]
    fn suppresses_use_without_consent() {
        let mut s = session(PHI1);
        let r = s.react(2, &[uses()]).unwrap();
        assert_eq!(r.command.suppress, vec![0]);
        assert!(r.command.cause.is_empty() && r.command.violation.is_none());
        assert!(r.proactive.is_empty());
    }

    #[test]
    fn keeps_use_after_consent() {
        let mut s = session(PHI1);
        let c = Event::strs("consent", &["Alice", "website.com", "ads"]);
        assert!(s.react(1, &[c]).unwrap().command.is_empty());
        assert!(s.react(2, &[uses()]).unwrap().command.is_empty());
        let p = s.policy().clone();
        let log = s.finalize();
        assert_eq!(log.len(), 2);
        assert!(all_satisfied(&p, &log));
    }

    #[test]
    fn refuses_unenforceable() {
        let s = sig().observable_only();
        let f = typecheck(&parse_policy(PHI1).unwrap(), &s).unwrap();
        assert!(matches!(Session::new(f, s), Err(SessionError::Refused(_))));
    }

    #[test]
    fn trivial_policy() {
        let f = typecheck(&parse_policy("ALWAYS TRUE").unwrap(), &Signature::new()).unwrap();
        let mut s = Session::new(f, Signature::new()).unwrap();
        assert!(s.react(0, &[]).unwrap().command.is_empty());
        assert!(s.proactive_tick(5).unwrap().is_empty());
    }

    #[test]
    fn deadline_obligation() {
        let mut s = session(DEL);
        let r = s.react(0, &[Event::strs("request", &["Alice"])]).unwrap();
        assert!(r.command.is_empty());
        assert_eq!(s.obligations().len(), 1);
        assert_eq!(
            describe_obligation(&s.obligations()[0]),
            (30, vec![Event::strs("delete", &["Alice"])])
        );
        assert!(s.proactive_tick(10).unwrap().is_empty());
        let cmds = s.proactive_tick(30).unwrap();
        assert_eq!(cmds.len(), 1);
        assert_eq!(cmds[0].ts, 30);
        assert!(cmds[0].proactive);
        assert_eq!(cmds[0].cause, vec![Event::strs("delete", &["Alice"])]);
        assert!(s.obligations().is_empty());
        assert_eq!(s.committed().len(), 2);
    }

    #[test]
    fn obligation_met_by_system() {
        let mut s = session(DEL);
        s.react(0, &[Event::strs("request", &["Alice"])]).unwrap();
        s.react(12, &[Event::strs("delete", &["Alice"])]).unwrap();
        assert!(s.obligations().is_empty());
        assert!(s.proactive_tick(40).unwrap().is_empty());
    }

    #[test]
    fn overdue_obligation_flushed_at_deadline() {
        let mut s = session(DEL);
        s.react(0, &[Event::strs("request", &["Alice"])]).unwrap();
        let r = s.react(50, &[]).unwrap();
        assert_eq!(r.proactive.len(), 1);
        assert_eq!(r.proactive[0].ts, 30);
        let p = s.policy().clone();
        let log = s.finalize();
        assert_eq!(log.len(), 3);
        assert!(all_satisfied(&p, &log));
    }

    #[test]
    fn finalize_flushes() {
        let mut s = session(DEL);
        s.react(3, &[Event::strs("request", &["Bob"])]).unwrap();
        let log = s.finalize();
        assert_eq!(log.len(), 2);
        assert_eq!(log.ts(1), 3);
        assert!(log.points()[1].events.contains(&Event::strs("delete", &["Bob"])));
    }

    #[test]
    fn degraded_mode_reports_witness() {
        let s = parse_signature(
            "event a(x: string) {observable}\nevent c(n: int) {observable, causable}",
        )
        .unwrap();
        let f = typecheck(
            &parse_policy("ALWAYS (FORALL x. a(x) IMPLIES EXISTS n. c(n))").unwrap(),
            &s,
        )
        .unwrap();
        let mut sess = Session::new(f, s).unwrap();
        let r = sess.react(1, &[Event::strs("a", &["k"])]).unwrap();
        let v = r.command.violation.unwrap();
        assert_eq!(v.index, 0);
        assert_eq!(v.witness["x"], crate::policy::Value::str("k"));
        assert!(sess.is_degraded());
    }

    #[test]
    fn decreasing_timestamp_rejected() {
        let mut s = session(PHI1);
        s.react(5, &[]).unwrap();
        assert!(matches!(s.react(4, &[]), Err(SessionError::Decreasing(_))));
        assert_eq!(s.committed().len(), 1);
    }
}
