//! Reference evaluator: a literal transcription of the point-based semantics.
//!
//! Quantifiers enumerate the active domain; temporal operators scan the log. Nothing is
//! cached, so this is exponential in quantifier depth and quadratic in the log length per
//! temporal operator. It is the yardstick the relational evaluator is tested against.

use super::domain::{tuples, ActiveDomain, Valuation};
use super::EvalError;
use crate::log::{Event, Log};
use crate::policy::{Formula, Interval, Term, TypedFormula};

/// Evaluates `f` at time-point `i` under `v`, with the active domain of `f` and `log`.
pub fn evaluate(f: &TypedFormula, log: &Log, i: usize, v: &Valuation) -> Result<bool, EvalError> {
    let dom = ActiveDomain::new(f.formula(), log);
    evaluate_in(f, log, i, v, &dom)
}

/// Like [`evaluate`] with an explicit active domain.
pub fn evaluate_in(
    f: &TypedFormula,
    log: &Log,
    i: usize,
    v: &Valuation,
    dom: &ActiveDomain,
) -> Result<bool, EvalError> {
    super::check_args(f.formula(), log, i, v)?;
    let cx = Brute { f, log, dom };
    let mut env = v.clone();
    Ok(cx.eval(f.formula(), i, &mut env))
}

struct Brute<'a> {
    f: &'a TypedFormula,
    log: &'a Log,
    dom: &'a ActiveDomain,
}

fn dist(a: u64, b: u64) -> u64 {
    a - b
}

impl Brute<'_> {
    fn ts(&self, i: usize) -> u64 {
        self.log.ts(i)
    }

    fn eval(&self, f: &Formula, i: usize, env: &mut Valuation) -> bool {
        use Formula::*;
        match f {
            True => true,
            False => false,
            Pred(name, args) => {
                let e = Event {
                    name: name.clone(),
                    args: args
                        .iter()
                        .map(|t| match t {
                            Term::Const(c) => c.clone(),
                            Term::Var(x) => env[x].clone(),
                        })
                        .collect(),
                };
                self.log.points()[i].events.contains(&e)
            }
            Not(a) => !self.eval(a, i, env),
            And(a, b) => self.eval(a, i, env) && self.eval(b, i, env),
            Or(a, b) => self.eval(a, i, env) || self.eval(b, i, env),
            Implies(a, b) => !self.eval(a, i, env) || self.eval(b, i, env),
            Exists(vs, body) => self.quantify(vs, body, i, env, true),
            Forall(vs, body) => !self.quantify(vs, body, i, env, false),
            Prev(iv, a) => i > 0 && iv.contains(dist(self.ts(i), self.ts(i - 1))) && self.eval(a, i - 1, env),
            Next(iv, a) => {
                i + 1 < self.log.len()
                    && iv.contains(dist(self.ts(i + 1), self.ts(i)))
                    && self.eval(a, i + 1, env)
            }
            Once(iv, a) => (0..=i).any(|j| self.past(iv, i, j) && self.eval(a, j, env)),
            Historically(iv, a) => (0..=i).all(|j| !self.past(iv, i, j) || self.eval(a, j, env)),
            Eventually(iv, a) => {
                (i..self.log.len()).any(|j| self.future(iv, i, j) && self.eval(a, j, env))
            }
            Always(iv, a) => {
                (i..self.log.len()).all(|j| !self.future(iv, i, j) || self.eval(a, j, env))
            }
            Since(iv, a, b) => (0..=i).any(|j| {
                self.past(iv, i, j)
                    && self.eval(b, j, env)
                    && (j + 1..=i).all(|k| self.eval(a, k, env))
            }),
            Until(iv, a, b) => (i..self.log.len()).any(|j| {
                self.future(iv, i, j) && self.eval(b, j, env) && (i..j).all(|k| self.eval(a, k, env))
            }),
        }
    }

    fn past(&self, iv: &Interval, i: usize, j: usize) -> bool {
        iv.contains(dist(self.ts(i), self.ts(j)))
    }

    fn future(&self, iv: &Interval, i: usize, j: usize) -> bool {
        iv.contains(dist(self.ts(j), self.ts(i)))
    }

    /// Whether some instantiation of `vs` gives `body` the truth value `want`.
    fn quantify(&self, vs: &[String], body: &Formula, i: usize, env: &mut Valuation, want: bool) -> bool {
        let sorts: Vec<_> = vs.iter().map(|x| self.f.sort_of(x)).collect();
        let saved: Vec<_> = vs.iter().map(|x| env.get(x).cloned()).collect();
        let mut found = false;
        for t in tuples(self.dom, &sorts) {
            for (x, val) in vs.iter().zip(t) {
                env.insert(x.clone(), val);
            }
            if self.eval(body, i, env) == want {
                found = true;
                break;
            }
        }
        for (x, old) in vs.iter().zip(saved) {
            match old {
                Some(o) => env.insert(x.clone(), o),
                None => env.remove(x),
            };
        }
        found
    }
}
