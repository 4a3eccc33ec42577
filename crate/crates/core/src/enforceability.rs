//! Static check of whether a policy can be enforced with the declared capabilities.
//!
//! Every subformula gets two labels computed bottom-up:
//!
//! * **CAU**: the enforcer can make it true at the current time-point.
//! * **SUP**: the enforcer can make it false at the current time-point.
//!
//! A label is either absent, present, or present only by inventing data values
//! (causing an event whose argument is an existentially chosen variable). A policy
//! `ALWAYS ψ` is transparently enforceable when `ψ` is CAU without invented values and
//! every future operator in `ψ` is bounded; enforceable-only when CAU needs invented
//! values; not enforceable otherwise.
//!
//! The rules describe a conservative fragment: some enforceable policies are rejected.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::policy::{pretty_print, Capabilities, Formula, Path, Signature, Term, TypedFormula};

/// Event name to capabilities, as declared by a signature.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CapabilityMap(BTreeMap<String, Capabilities>);

impl CapabilityMap {
    pub fn get(&self, event: &str) -> Capabilities {
        self.0.get(event).copied().unwrap_or_default()
    }

    pub fn set(&mut self, event: impl Into<String>, caps: Capabilities) {
        self.0.insert(event.into(), caps);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Capabilities)> {
        self.0.iter()
    }
}

impl From<&Signature> for CapabilityMap {
    fn from(sig: &Signature) -> Self {
        CapabilityMap(
            sig.iter()
                .map(|s| (s.name.clone(), s.capabilities))
                .collect(),
        )
    }
}

/// How well the enforcer can control a subformula's truth value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ability {
    No,
    /// Only by causing events with values the enforcer would have to make up.
    Fresh,
    Yes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Label {
    pub cau: Ability,
    pub sup: Ability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Enforceability {
    Transparent,
    EnforceableOnly,
    NotEnforceable,
}

impl Enforceability {
    /// Exit code used by the `check` command.
    pub fn exit_code(self) -> i32 {
        match self {
            Enforceability::Transparent => 0,
            Enforceability::EnforceableOnly => 1,
            Enforceability::NotEnforceable => 2,
        }
    }
}

impl fmt::Display for Enforceability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Enforceability::Transparent => "transparent",
            Enforceability::EnforceableOnly => "enforceable-only",
            Enforceability::NotEnforceable => "not-enforceable",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Blame {
    pub path: Path,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EnforceabilityReport {
    pub verdict: Enforceability,
    pub blame: Vec<Blame>,
    /// Capabilities the enforcement strategy relies on, per event.
    pub required_capabilities: BTreeMap<String, Capabilities>,
}

impl EnforceabilityReport {
    pub fn suppressed_events(&self) -> Vec<&str> {
        self.required_capabilities
            .iter()
            .filter(|(_, c)| c.suppressable)
            .map(|(e, _)| e.as_str())
            .collect()
    }

    pub fn caused_events(&self) -> Vec<&str> {
        self.required_capabilities
            .iter()
            .filter(|(_, c)| c.causable)
            .map(|(e, _)| e.as_str())
            .collect()
    }
}

struct Labeler<'a> {
    caps: &'a CapabilityMap,
}

impl Labeler<'_> {
    /// `fresh` holds the variables whose value the enforcer would pick when causing.
    fn cau(&self, f: &Formula, fresh: &BTreeSet<String>) -> Ability {
        use Formula::*;
        match f {
            True => Ability::Yes,
            False => Ability::No,
            Pred(name, args) => {
                if !self.caps.get(name).causable {
                    Ability::No
                } else if args.iter().any(|t| matches!(t, Term::Var(v) if fresh.contains(v))) {
                    Ability::Fresh
                } else {
                    Ability::Yes
                }
            }
            Not(a) => self.sup(a, fresh),
            And(a, b) if clash(a, true, b, true).is_some() => Ability::No,
            And(a, b) => self.cau(a, fresh).min(self.cau(b, fresh)),
            Or(a, b) => self.cau(a, fresh).max(self.cau(b, fresh)),
            Implies(a, b) => self.sup(a, fresh).max(self.cau(b, fresh)),
            Exists(vs, body) => self.cau(body, &with(fresh, vs)),
            Forall(vs, body) => self.cau(body, &without(fresh, vs)),
            Once(iv, a) if iv.contains(0) => self.cau(a, fresh),
            Since(iv, _, b) if iv.contains(0) => self.cau(b, fresh),
            Eventually(iv, a) if iv.is_bounded() => self.cau(a, fresh),
            _ => Ability::No,
        }
    }

    fn sup(&self, f: &Formula, fresh: &BTreeSet<String>) -> Ability {
        use Formula::*;
        match f {
            True => Ability::No,
            False => Ability::Yes,
            Pred(name, _) => {
                if self.caps.get(name).suppressable {
                    Ability::Yes
                } else {
                    Ability::No
                }
            }
            Not(a) => self.cau(a, fresh),
            And(a, b) => self.sup(a, fresh).max(self.sup(b, fresh)),
            Or(a, b) if clash(a, false, b, false).is_some() => Ability::No,
            Or(a, b) => self.sup(a, fresh).min(self.sup(b, fresh)),
            Implies(a, b) if clash(a, true, b, false).is_some() => Ability::No,
            Implies(a, b) => self.cau(a, fresh).min(self.sup(b, fresh)),
            Exists(vs, body) => self.sup(body, &without(fresh, vs)),
            Forall(vs, body) => self.sup(body, &with(fresh, vs)),
            Historically(iv, a) if iv.contains(0) => self.sup(a, fresh),
            Since(iv, a, b) => {
                if iv.contains(0) {
                    self.sup(a, fresh).min(self.sup(b, fresh))
                } else {
                    self.sup(a, fresh)
                }
            }
            Always(iv, a) if iv.is_bounded() => self.sup(a, fresh),
            _ => Ability::No,
        }
    }

    fn label(&self, f: &Formula) -> Label {
        let none = BTreeSet::new();
        Label {
            cau: self.cau(f, &none),
            sup: self.sup(f, &none),
        }
    }

    /// Explains why `f` does not reach `Ability::Yes` for the requested side.
    fn blame(&self, f: &Formula, want_cau: bool, fresh: &BTreeSet<String>, path: Path, out: &mut Vec<Blame>) {
        use Formula::*;
        let have = if want_cau { self.cau(f, fresh) } else { self.sup(f, fresh) };
        if have == Ability::Yes {
            return;
        }
        let mut push = |reason: String| out.push(Blame { path: path.clone(), reason });
        match f {
            True | False => push(format!(
                "{} cannot be made {}",
                pretty_print(f),
                if want_cau { "true" } else { "false" }
            )),
            Pred(name, args) => {
                if want_cau && self.caps.get(name).causable {
                    let vars: Vec<&str> = args
                        .iter()
                        .filter_map(|t| t.as_var().filter(|v| fresh.contains(*v)))
                        .collect();
                    push(format!(
                        "causing `{name}` requires inventing a value for {}",
                        vars.join(", ")
                    ));
                } else if want_cau {
                    push(format!("event `{name}` is not causable"));
                } else {
                    push(format!("event `{name}` is not suppressable"));
                }
            }
            Not(a) => self.blame(a, !want_cau, fresh, path.child(0), out),
            And(a, b) | Or(a, b) | Implies(a, b) => {
                let (wa, wb) = match f {
                    Implies(..) => (!want_cau, want_cau),
                    _ => (want_cau, want_cau),
                };
                let conjunctive = matches!(f, And(..)) == want_cau;
                if let Some(name) = clash(a, wa, b, wb).filter(|_| conjunctive) {
                    push(format!("event `{name}` would have to be both present and absent"));
                    return;
                }
                self.blame(a, wa, fresh, path.child(0), out);
                self.blame(b, wb, fresh, path.child(1), out);
            }
            Exists(vs, body) | Forall(vs, body) => {
                let picks = matches!(f, Exists(..)) == want_cau;
                let inner = if picks { with(fresh, vs) } else { without(fresh, vs) };
                self.blame(body, want_cau, &inner, path.child(0), out);
            }
            Next(..) | Until(..) => push("unsupported future operator".into()),
            Eventually(iv, _) | Always(iv, _) if !iv.is_bounded() => push("unbounded future".into()),
            Once(iv, a) if want_cau => {
                if iv.contains(0) {
                    self.blame(a, true, fresh, path.child(0), out)
                } else {
                    push("interval excludes the current time-point".into())
                }
            }
            Historically(iv, a) if !want_cau => {
                if iv.contains(0) {
                    self.blame(a, false, fresh, path.child(0), out)
                } else {
                    push("interval excludes the current time-point".into())
                }
            }
            Eventually(_, a) if want_cau => self.blame(a, true, fresh, path.child(0), out),
            Always(_, a) if !want_cau => self.blame(a, false, fresh, path.child(0), out),
            Since(iv, a, b) => {
                if want_cau {
                    if iv.contains(0) {
                        self.blame(b, true, fresh, path.child(1), out)
                    } else {
                        push("interval excludes the current time-point".into())
                    }
                } else {
                    self.blame(a, false, fresh, path.child(0), out);
                    if iv.contains(0) {
                        self.blame(b, false, fresh, path.child(1), out);
                    }
                }
            }
            Prev(..) => push("the previous time-point cannot be changed".into()),
            Once(..) => push("a past occurrence cannot be undone".into()),
            Historically(..) => push("the past cannot be made to hold".into()),
            Eventually(..) => push("a future occurrence cannot be prevented ahead of time".into()),
            Always(..) => push("future time-points cannot be guaranteed ahead of time".into()),
        }
    }

    /// Capabilities the strategy for `f` may use.
    fn required(&self, f: &Formula, want_cau: bool, fresh: &BTreeSet<String>, out: &mut BTreeMap<String, Capabilities>) {
        use Formula::*;
        let have = if want_cau { self.cau(f, fresh) } else { self.sup(f, fresh) };
        if have == Ability::No {
            return;
        }
        let mut both = |a: &Formula, wa: bool, b: &Formula, wb: bool, conjunctive: bool| {
            let la = if wa { self.cau(a, fresh) } else { self.sup(a, fresh) };
            let lb = if wb { self.cau(b, fresh) } else { self.sup(b, fresh) };
            if conjunctive || la == have {
                self.required(a, wa, fresh, out);
            }
            if conjunctive || lb == have {
                self.required(b, wb, fresh, out);
            }
        };
        match f {
            Pred(name, _) => {
                let entry = out.entry(name.clone()).or_insert(Capabilities::OBSERVABLE);
                if want_cau {
                    entry.causable = true;
                } else {
                    entry.suppressable = true;
                }
            }
            Not(a) => self.required(a, !want_cau, fresh, out),
            And(a, b) => both(a, want_cau, b, want_cau, want_cau),
            Or(a, b) => both(a, want_cau, b, want_cau, !want_cau),
            Implies(a, b) => both(a, !want_cau, b, want_cau, !want_cau),
            Exists(vs, body) | Forall(vs, body) => {
                let picks = matches!(f, Exists(..)) == want_cau;
                let inner = if picks { with(fresh, vs) } else { without(fresh, vs) };
                self.required(body, want_cau, &inner, out);
            }
            Once(_, a) | Eventually(_, a) | Historically(_, a) | Always(_, a) => {
                self.required(a, want_cau, fresh, out)
            }
            Since(iv, a, b) => {
                if !want_cau {
                    self.required(a, false, fresh, out);
                }
                if iv.contains(0) {
                    self.required(b, want_cau, fresh, out);
                }
            }
            _ => {}
        }
    }
}

fn with(fresh: &BTreeSet<String>, vs: &[String]) -> BTreeSet<String> {
    let mut s = fresh.clone();
    s.extend(vs.iter().cloned());
    s
}

fn without(fresh: &BTreeSet<String>, vs: &[String]) -> BTreeSet<String> {
    let mut s = fresh.clone();
    for v in vs {
        s.remove(v);
    }
    s
}

/// Event names occurring positively and negatively in `f`, taken as made true when `truth`.
fn polarities(f: &Formula, truth: bool, pos: &mut BTreeSet<String>, neg: &mut BTreeSet<String>) {
    use Formula::*;
    match f {
        Pred(name, _) => {
            if truth { pos } else { neg }.insert(name.clone());
        }
        Not(a) => polarities(a, !truth, pos, neg),
        Implies(a, b) => {
            polarities(a, !truth, pos, neg);
            polarities(b, truth, pos, neg);
        }
        other => {
            for c in other.children() {
                polarities(c, truth, pos, neg);
            }
        }
    }
}

/// An event name that making `a` equal `wa` and `b` equal `wb` at once may need both
/// present and absent.
fn clash(a: &Formula, wa: bool, b: &Formula, wb: bool) -> Option<String> {
    let (mut pa, mut na, mut pb, mut nb) = Default::default();
    polarities(a, wa, &mut pa, &mut na);
    polarities(b, wb, &mut pb, &mut nb);
    let pa: BTreeSet<String> = pa;
    pa.intersection(&nb).chain(na.intersection(&pb)).next().cloned()
}

/// CAU/SUP labels of a formula (no variables pre-marked as invented).
pub fn label(f: &Formula, caps: &CapabilityMap) -> Label {
    Labeler { caps }.label(f)
}

/// Future operators the enforcer does not handle, with a reason each. `inside` is set
/// below another temporal operator.
fn future_blame(f: &Formula, inside: bool, path: Path, out: &mut Vec<Blame>) {
    use Formula::*;
    let mut push = |reason: &str| out.push(Blame { path: path.clone(), reason: reason.into() });
    match f {
        Next(..) | Until(..) => push("unsupported future operator"),
        Eventually(iv, _) | Always(iv, _) if !iv.is_bounded() => push("unbounded future"),
        Eventually(..) | Always(..) if inside => push("future operator nested in a temporal operator"),
        _ => {}
    }
    let temporal = !matches!(f, True | False | Pred(..) | Not(..) | And(..) | Or(..) | Implies(..) | Exists(..) | Forall(..));
    for (i, c) in f.children().into_iter().enumerate() {
        future_blame(c, inside || temporal, path.child(i), out);
    }
}

/// Event names occurring inside (`.0`) and outside (`.1`) future operators, with the
/// path of the first future operator containing each inner name.
fn future_events(f: &Formula, under: Option<&Path>, path: Path, inner: &mut BTreeMap<String, Path>, outer: &mut BTreeSet<String>) {
    use Formula::*;
    match f {
        Pred(name, _) => match under {
            Some(p) => {
                inner.entry(name.clone()).or_insert_with(|| p.clone());
            }
            None => {
                outer.insert(name.clone());
            }
        },
        Next(..) | Eventually(..) | Always(..) | Until(..) if under.is_none() => {
            for (i, c) in f.children().into_iter().enumerate() {
                future_events(c, Some(&path), path.child(i), inner, outer);
            }
        }
        other => {
            for (i, c) in other.children().into_iter().enumerate() {
                future_events(c, under, path.child(i), inner, outer);
            }
        }
    }
}

/// Truth of `f` when the variables in `unseen` hold values that have not occurred in the
/// log up to the current time-point, if that alone decides it.
fn unseen_truth(f: &Formula, unseen: &BTreeSet<String>) -> Option<bool> {
    use Formula::*;
    let t = |g: &Formula| unseen_truth(g, unseen);
    match f {
        True => Some(true),
        False => Some(false),
        Pred(_, args) => args
            .iter()
            .any(|a| a.as_var().is_some_and(|v| unseen.contains(v)))
            .then_some(false),
        Not(a) => t(a).map(|b| !b),
        And(a, b) => match (t(a), t(b)) {
            (Some(false), _) | (_, Some(false)) => Some(false),
            (Some(true), Some(true)) => Some(true),
            _ => None,
        },
        Or(a, b) => match (t(a), t(b)) {
            (Some(true), _) | (_, Some(true)) => Some(true),
            (Some(false), Some(false)) => Some(false),
            _ => None,
        },
        Implies(a, b) => match (t(a), t(b)) {
            (Some(false), _) | (_, Some(true)) => Some(true),
            (Some(true), Some(false)) => Some(false),
            _ => None,
        },
        Exists(vs, body) | Forall(vs, body) => unseen_truth(body, &without(unseen, vs)),
        Prev(_, a) | Once(_, a) => t(a).filter(|b| !b),
        Historically(_, a) => t(a).filter(|b| *b),
        Since(_, _, b) => t(b).filter(|b| !b),
        Next(..) | Eventually(..) | Always(..) | Until(..) => None,
    }
}

/// Universal quantifiers whose body is not settled for values that have not occurred yet.
/// Under active-domain quantification such a policy can be broken retroactively by any
/// new value.
fn domain_blame(f: &Formula, positive: bool, path: Path, out: &mut Vec<Blame>) {
    use Formula::*;
    match f {
        Forall(vs, body) | Exists(vs, body) if matches!(f, Forall(..)) == positive => {
            let fv = body.free_vars();
            let used: Vec<&String> = vs.iter().filter(|v| fv.contains(*v)).take(12).collect();
            for mask in 1u32..(1 << used.len()) {
                let unseen: BTreeSet<String> = used
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| mask & (1 << k) != 0)
                    .map(|(_, v)| (*v).clone())
                    .collect();
                if unseen_truth(body, &unseen) != Some(positive) {
                    let names: Vec<&str> = unseen.iter().map(String::as_str).collect();
                    out.push(Blame {
                        path: path.clone(),
                        reason: format!(
                            "not guarded: a value of {} that has not occurred yet may falsify it",
                            names.join(", ")
                        ),
                    });
                    break;
                }
            }
        }
        _ => {}
    }
    match f {
        Not(a) => domain_blame(a, !positive, path.child(0), out),
        Implies(a, b) => {
            domain_blame(a, !positive, path.child(0), out);
            domain_blame(b, positive, path.child(1), out);
        }
        other => {
            for (i, c) in other.children().into_iter().enumerate() {
                domain_blame(c, positive, path.child(i), out);
            }
        }
    }
}

/// Decides enforceability of `ALWAYS ψ` under `caps`.
pub fn analyze(f: &TypedFormula, caps: &CapabilityMap) -> EnforceabilityReport {
    let not = |blame| EnforceabilityReport {
        verdict: Enforceability::NotEnforceable,
        blame,
        required_capabilities: BTreeMap::new(),
    };
    let body = match f.formula() {
        Formula::Always(iv, body) if iv.is_full() => body,
        _ => {
            return not(vec![Blame {
                path: Path::root(),
                reason: "top-level shape: enforcement needs `ALWAYS ψ`".into(),
            }])
        }
    };
    let labeler = Labeler { caps };
    let root = Path::root().child(0);
    let mut future = Vec::new();
    future_blame(body, false, root.clone(), &mut future);
    if !future.is_empty() {
        return not(future);
    }
    let (mut inner, mut outer) = (BTreeMap::new(), BTreeSet::new());
    future_events(body, None, root.clone(), &mut inner, &mut outer);
    let retrigger: Vec<Blame> = inner
        .into_iter()
        .filter(|(name, _)| outer.contains(name))
        .map(|(name, path)| Blame {
            path,
            reason: format!("event `{name}` occurs both inside and outside a future operator"),
        })
        .collect();
    if !retrigger.is_empty() {
        return not(retrigger);
    }
    let mut unguarded = Vec::new();
    domain_blame(body, true, root.clone(), &mut unguarded);
    if !unguarded.is_empty() {
        return not(unguarded);
    }
    let cau = labeler.cau(body, &BTreeSet::new());
    let mut blame = Vec::new();
    if cau != Ability::Yes {
        labeler.blame(body, true, &BTreeSet::new(), root, &mut blame);
    }
    let verdict = match cau {
        Ability::Yes => Enforceability::Transparent,
        Ability::Fresh => Enforceability::EnforceableOnly,
        Ability::No => return not(blame),
    };
    let mut required = BTreeMap::new();
    labeler.required(body, true, &BTreeSet::new(), &mut required);
    if verdict == Enforceability::Transparent {
        blame.clear();
    }
    EnforceabilityReport {
        verdict,
        blame,
        required_capabilities: required,
    }
}

/// Human-readable rendering of a report.
pub fn explain(report: &EnforceabilityReport, f: &TypedFormula) -> String {
    let strategy = format!(
        "strategy: suppress {{{}}} / cause {{{}}}",
        report.suppressed_events().join(", "),
        report.caused_events().join(", ")
    );
    let mut out = match report.verdict {
        Enforceability::Transparent => format!("transparently enforceable; {strategy}\n"),
        Enforceability::EnforceableOnly => {
            format!("enforceable, but not transparently enforceable; {strategy}\n")
        }
        Enforceability::NotEnforceable => "not enforceable\n".to_string(),
    };
    out.push_str("note: decided by a conservative CAU/SUP labeling of the policy\n");
    if report.verdict != Enforceability::Transparent {
        for b in &report.blame {
            let sub = f
                .formula()
                .at_path(&b.path)
                .map(pretty_print)
                .unwrap_or_default();
            out.push_str(&format!("  at {}: {}\n    in: {}\n", b.path, b.reason, sub));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{parse_policy, parse_signature, typecheck};

    const PHI1: &str = "ALWAYS (FORALL a,d,u,p. uses(a,d,u,p) IMPLIES ONCE consent(u,a,p))";

    fn sig() -> Signature {
        parse_signature(
            "event uses(app: string, data: string, user: string, purpose: string) {observable, suppressable}\n\
             event consent(user: string, app: string, purpose: string) {observable}\n\
             event request(u: string) {observable}\n\
             event delete(u: string) {observable, causable}\n\
             event log(u: string) {observable, causable}",
        )
        .unwrap()
    }

    fn check(text: &str, sig: &Signature) -> (EnforceabilityReport, TypedFormula) {
        let f = typecheck(&parse_policy(text).unwrap(), sig).unwrap();
        (analyze(&f, &CapabilityMap::from(sig)), f)
    }

    #[test]
    fn phi1_transparent() {
        let (r, f) = check(PHI1, &sig());
        assert_eq!(r.verdict, Enforceability::Transparent);
        assert!(r.blame.is_empty());
        assert_eq!(r.suppressed_events(), vec!["uses"]);
        let text = explain(&r, &f);
        assert!(text.starts_with("transparently enforceable; strategy: suppress {uses} / cause {}"));
        assert!(!text.contains("  at "));
    }

    #[test]
    fn phi1_observable_only() {
        let s = sig().observable_only();
        let (r, f) = check(PHI1, &s);
        assert_eq!(r.verdict, Enforceability::NotEnforceable);
        let uses_path = Path(vec![0, 0, 0]);
        assert!(r.blame.iter().any(|b| b.path == uses_path && b.reason.contains("uses")));
        let text = explain(&r, &f);
        assert!(text.contains("at 0.0.0: event `uses` is not suppressable"));
    }

    #[test]
    fn top_level_shape() {
        let (r, _) = check("FORALL u. request(u) IMPLIES delete(u)", &sig());
        assert_eq!(r.verdict, Enforceability::NotEnforceable);
        assert!(r.blame[0].reason.starts_with("top-level shape"));
    }

    #[test]
    fn bounded_eventually_is_transparent() {
        let (r, _) = check(
            "ALWAYS (FORALL u. request(u) IMPLIES EVENTUALLY [0,30] delete(u))",
            &sig(),
        );
        assert_eq!(r.verdict, Enforceability::Transparent);
        assert_eq!(r.caused_events(), vec!["delete"]);
    }

    #[test]
    fn unbounded_and_unsupported_future() {
        let (r, _) = check("ALWAYS (FORALL u. request(u) IMPLIES EVENTUALLY delete(u))", &sig());
        assert_eq!(r.verdict, Enforceability::NotEnforceable);
        assert_eq!(r.blame[0].reason, "unbounded future");
        let (r, _) = check("ALWAYS (FORALL u. request(u) IMPLIES NEXT delete(u))", &sig());
        assert_eq!(r.blame[0].reason, "unsupported future operator");
    }

    #[test]
    fn nested_future() {
        let (r, _) = check(
            "ALWAYS (FORALL u. request(u) IMPLIES EVENTUALLY [0,3] EVENTUALLY [0,3] delete(u))",
            &sig(),
        );
        assert_eq!(r.verdict, Enforceability::NotEnforceable);
        assert_eq!(r.blame[0].path, Path(vec![0, 0, 1, 0]));
        let (r, _) = check("ALWAYS (FORALL u. ONCE EVENTUALLY [0,0] request(u) IMPLIES delete(u))", &sig());
        assert_eq!(r.verdict, Enforceability::NotEnforceable);
    }

    #[test]
    fn future_event_in_condition() {
        let (r, _) = check("ALWAYS (FORALL u. log(u) IMPLIES EVENTUALLY [1,1] log(u))", &sig());
        assert_eq!(r.verdict, Enforceability::NotEnforceable);
        assert_eq!(r.blame[0].path, Path(vec![0, 0, 1]));
        assert!(r.blame[0].reason.contains("`log`"));
    }

    #[test]
    fn contradictory_conjuncts() {
        let (r, f) = check("ALWAYS (FORALL u. request(u) IMPLIES log(u) AND NOT log(u))", &sig());
        assert_eq!(r.verdict, Enforceability::NotEnforceable);
        assert!(explain(&r, &f).contains("`log` would have to be both present and absent"));
        let (r, _) = check("ALWAYS (FORALL u. request(u) IMPLIES log(u) AND delete(u))", &sig());
        assert_eq!(r.verdict, Enforceability::Transparent);
    }

    #[test]
    fn unguarded_quantifier() {
        let (r, f) = check("ALWAYS (FORALL u. delete(u))", &sig());
        assert_eq!(r.verdict, Enforceability::NotEnforceable);
        assert_eq!(r.blame[0].path, Path(vec![0]));
        assert!(explain(&r, &f).contains("not guarded"));
        let (r, _) = check("ALWAYS (FORALL u. NOT request(u) IMPLIES FALSE)", &sig());
        assert_eq!(r.verdict, Enforceability::NotEnforceable);
        let (r, _) = check("ALWAYS NOT (EXISTS u. NOT log(u))", &sig());
        assert_eq!(r.verdict, Enforceability::NotEnforceable);
        let (r, _) = check("ALWAYS (FORALL u, v. request(u) IMPLIES delete(u))", &sig());
        assert_eq!(r.verdict, Enforceability::Transparent);
    }

    #[test]
    fn invented_values_are_enforceable_only() {
        let (r, f) = check("ALWAYS (FORALL u. request(u) IMPLIES EXISTS v. log(v))", &sig());
        assert_eq!(r.verdict, Enforceability::EnforceableOnly);
        assert!(explain(&r, &f).contains("inventing a value for v"));
        let (r, _) = check("ALWAYS (FORALL u. request(u) IMPLIES EXISTS v. log(u))", &sig());
        assert_eq!(r.verdict, Enforceability::Transparent);
    }

    #[test]
    fn trivial_policy() {
        let (r, _) = check("ALWAYS TRUE", &Signature::new());
        assert_eq!(r.verdict, Enforceability::Transparent);
    }

    #[test]
    fn labels_are_dual_under_negation() {
        let caps = CapabilityMap::from(&sig());
        let f = parse_policy("uses(\"a\",\"b\",\"c\",\"d\") AND ONCE delete(\"x\")").unwrap();
        let l = label(&f, &caps);
        let n = label(&Formula::not(f), &caps);
        assert_eq!((l.cau, l.sup), (n.sup, n.cau));
    }
}
