//! Search for the cheapest set of actions at the current time-point that gives a
//! subformula a desired truth value.

use std::collections::BTreeSet;

use crate::enforceability::{label, Ability, CapabilityMap};
use crate::log::Event;
use crate::monitor::{tuples, Evaluator, Valuation};
use crate::policy::{Formula, Interval, Sort, Term, TypedFormula};

/// A pending requirement: `target` must hold under `env` at some time-point whose
/// timestamp lies in `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Obligation {
    pub lo: u64,
    pub hi: u64,
    pub target: Formula,
    pub env: Valuation,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub(crate) struct Plan {
    pub suppress: BTreeSet<Event>,
    pub cause: BTreeSet<Event>,
    pub obligations: Vec<Obligation>,
}

impl Plan {
    fn cost(&self) -> (usize, usize) {
        (self.cause.len() + self.obligations.len(), self.suppress.len())
    }

    pub fn merge(&mut self, other: Plan) {
        self.suppress.extend(other.suppress);
        self.cause.extend(other.cause);
        for o in other.obligations {
            if !self.obligations.contains(&o) {
                self.obligations.push(o);
            }
        }
    }
}

fn cheaper(a: Option<Plan>, b: Option<Plan>) -> Option<Plan> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if b.cost() < a.cost() { b } else { a }),
        (a, b) => a.or(b),
    }
}

fn both(a: Option<Plan>, b: Option<Plan>) -> Option<Plan> {
    let mut a = a?;
    a.merge(b?);
    Some(a)
}

/// Truth value of `f` that no log can change.
fn fixed(f: &Formula) -> Option<bool> {
    use Formula::*;
    match f {
        True => Some(true),
        False => Some(false),
        Pred(..) => None,
        Not(a) => fixed(a).map(|b| !b),
        And(a, b) => match (fixed(a), fixed(b)) {
            (Some(false), _) | (_, Some(false)) => Some(false),
            (Some(true), Some(true)) => Some(true),
            _ => None,
        },
        Or(a, b) => match (fixed(a), fixed(b)) {
            (Some(true), _) | (_, Some(true)) => Some(true),
            (Some(false), Some(false)) => Some(false),
            _ => None,
        },
        Implies(a, b) => match (fixed(a), fixed(b)) {
            (Some(false), _) | (_, Some(true)) => Some(true),
            (Some(true), Some(false)) => Some(false),
            _ => None,
        },
        Exists(_, a) => fixed(a).filter(|b| !b),
        Forall(_, a) => fixed(a).filter(|b| *b),
        Prev(_, a) | Next(_, a) | Once(_, a) | Eventually(_, a) => fixed(a).filter(|b| !b),
        Historically(_, a) | Always(_, a) => fixed(a).filter(|b| *b),
        Since(_, _, b) | Until(_, _, b) => fixed(b).filter(|b| !b),
    }
}

pub(crate) fn ground(name: &str, args: &[Term], env: &Valuation) -> Event {
    Event {
        name: name.to_string(),
        args: args
            .iter()
            .map(|t| match t {
                Term::Const(c) => c.clone(),
                Term::Var(x) => env[x].clone(),
            })
            .collect(),
    }
}

pub(crate) struct Planner<'p, 'a> {
    pub ev: &'p mut Evaluator<'a>,
    pub policy: &'a TypedFormula,
    pub caps: &'a CapabilityMap,
    /// Index of the time-point being decided (the last one of the evaluator's log).
    pub i: usize,
    /// Events proposed by the system at this time-point; only these can be suppressed.
    pub proposed: &'a BTreeSet<Event>,
    /// Events that due obligations need present; never suppressed.
    pub pinned: &'a BTreeSet<Event>,
    /// Events that due obligations need absent; never caused.
    pub banned: &'a BTreeSet<Event>,
    /// When false, only obligations may be added; the events stay as they are.
    pub act: bool,
}

impl<'a> Planner<'_, 'a> {
    fn ts(&self, j: usize) -> u64 {
        self.ev.log().ts(j)
    }

    fn holds(&mut self, f: &'a Formula, j: usize, env: &Valuation) -> bool {
        self.ev.holds(f, j, env).unwrap_or(false)
    }

    /// Earlier time-points inside the past window `iv` of the current one.
    fn past_window(&self, iv: &Interval) -> Vec<usize> {
        let now = self.ts(self.i);
        (0..self.i).filter(|&j| iv.contains(now - self.ts(j))).collect()
    }

    pub fn plan(&mut self, f: &'a Formula, env: &Valuation, want: bool) -> Option<Plan> {
        use Formula::*;
        if let Some(b) = fixed(f) {
            return (b == want).then(Plan::default);
        }
        if !f.has_future() && self.holds(f, self.i, env) == want {
            return Some(Plan::default());
        }
        match f {
            True | False | Prev(..) | Next(..) | Until(..) => None,
            Pred(name, args) => {
                if !self.act {
                    return None;
                }
                let e = ground(name, args, env);
                let caps = self.caps.get(name);
                let mut p = Plan::default();
                if want && caps.causable && !self.banned.contains(&e) {
                    p.cause.insert(e);
                } else if !want && caps.suppressable && self.proposed.contains(&e) && !self.pinned.contains(&e) {
                    p.suppress.insert(e);
                } else {
                    return None;
                }
                Some(p)
            }
            Not(a) => self.plan(a, env, !want),
            And(a, b) if want => {
                let pa = self.plan(a, env, true);
                both(pa, self.plan(b, env, true))
            }
            Or(a, b) if !want => {
                let pa = self.plan(a, env, false);
                both(pa, self.plan(b, env, false))
            }
            Implies(a, b) if !want => {
                let pa = self.plan(a, env, true);
                both(pa, self.plan(b, env, false))
            }
            And(a, b) | Or(a, b) => {
                let pa = self.plan(a, env, want);
                cheaper(pa, self.plan(b, env, want))
            }
            Implies(a, b) => {
                let pa = self.plan(a, env, false);
                cheaper(pa, self.plan(b, env, true))
            }
            Exists(vs, body) if want => self.some(vs, body, env, true),
            Exists(vs, body) => self.every(vs, body, env, false),
            Forall(vs, body) if want => self.every(vs, body, env, true),
            Forall(vs, body) => self.some(vs, body, env, false),
            Once(iv, a) => {
                let earlier = self.past_window(iv).into_iter().any(|j| self.holds(a, j, env));
                match (want, earlier) {
                    (true, true) => Some(Plan::default()),
                    (false, true) => None,
                    _ if iv.contains(0) => self.plan(a, env, want),
                    (true, false) => None,
                    (false, false) => Some(Plan::default()),
                }
            }
            Historically(iv, a) => {
                let broken = self.past_window(iv).into_iter().any(|j| !self.holds(a, j, env));
                match (want, broken) {
                    (false, true) => Some(Plan::default()),
                    (true, true) => None,
                    _ if iv.contains(0) => self.plan(a, env, want),
                    (true, false) => Some(Plan::default()),
                    (false, false) => None,
                }
            }
            Since(iv, a, b) => {
                // Earlier anchors: `b` held at j and `a` held at every point after j so far.
                let anchored = self.past_window(iv).into_iter().any(|j| {
                    self.holds(b, j, env) && (j + 1..self.i).all(|k| self.holds(a, k, env))
                });
                let now = iv.contains(0);
                if want {
                    let keep = if anchored { self.plan(a, env, true) } else { None };
                    let fresh = if now { self.plan(b, env, true) } else { None };
                    cheaper(keep, fresh)
                } else {
                    let keep = if anchored { self.plan(a, env, false) } else { Some(Plan::default()) };
                    let fresh = if now { self.plan(b, env, false) } else { Some(Plan::default()) };
                    both(keep, fresh)
                }
            }
            Eventually(iv, a) if want => {
                if iv.contains(0) && !a.has_future() && self.holds(a, self.i, env) {
                    return Some(Plan::default());
                }
                if label(a, self.caps).cau == Ability::No {
                    return None;
                }
                self.obligation(iv, (**a).clone(), env)
            }
            Always(iv, a) if !want => {
                if iv.contains(0) && !a.has_future() && !self.holds(a, self.i, env) {
                    return Some(Plan::default());
                }
                if label(a, self.caps).sup == Ability::No {
                    return None;
                }
                self.obligation(iv, Formula::not((**a).clone()), env)
            }
            Eventually(..) | Always(..) => None,
        }
    }

    fn obligation(&self, iv: &Interval, target: Formula, env: &Valuation) -> Option<Plan> {
        let now = self.ts(self.i);
        let hi = iv.hi()?;
        let fv = target.free_vars();
        let env = env
            .iter()
            .filter(|(k, _)| fv.contains(*k))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        Some(Plan {
            obligations: vec![Obligation {
                lo: now.saturating_add(iv.lo()),
                hi: now.saturating_add(hi),
                target,
                env,
            }],
            ..Plan::default()
        })
    }

    fn sorts(&self, vs: &[String]) -> Vec<Sort> {
        vs.iter().map(|v| self.policy.sort_of(v)).collect()
    }

    fn extend(env: &Valuation, vs: &[String], t: Vec<crate::policy::Value>) -> Valuation {
        let mut e = env.clone();
        for (x, v) in vs.iter().zip(t) {
            e.insert(x.clone(), v);
        }
        e
    }

    /// Cheapest instantiation of `vs` under which `body` gets the value `want`.
    fn some(&mut self, vs: &[String], body: &'a Formula, env: &Valuation, want: bool) -> Option<Plan> {
        let l = label(body, self.caps);
        if (if want { l.cau } else { l.sup }) == Ability::No {
            return None;
        }
        let mut best: Option<Plan> = None;
        for t in tuples(self.ev.domain(), &self.sorts(vs)) {
            let e = Self::extend(env, vs, t);
            best = cheaper(best, self.plan(body, &e, want));
            if best.as_ref().is_some_and(|p| p.cost() == (0, 0)) {
                break;
            }
        }
        best
    }

    /// Actions giving `body` the value `want` under every instantiation of `vs`.
    fn every(&mut self, vs: &[String], body: &'a Formula, env: &Valuation, want: bool) -> Option<Plan> {
        let mut env = env.clone();
        for v in vs {
            env.remove(v);
        }
        let env = &env;
        let envs: Vec<Valuation> = if body.has_future() {
            tuples(self.ev.domain(), &self.sorts(vs))
                .into_iter()
                .map(|t| Self::extend(env, vs, t))
                .collect()
        } else {
            let rel = if want {
                self.ev.violations(body, self.i)
            } else {
                self.ev.sat(body, self.i)
            };
            rel.matching(env)
                .map(|row| {
                    let mut e = env.clone();
                    e.extend(row);
                    e
                })
                .collect()
        };
        let mut acc = Plan::default();
        for e in envs {
            acc.merge(self.plan(body, &e, want)?);
        }
        Some(acc)
    }
}
