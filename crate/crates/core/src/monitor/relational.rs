//! Relational evaluator: computes, for a subformula and a time-point, the finite set of
//! valuations of its free variables that satisfy it.
//!
//! Negation is pushed through connectives where it is cheap and otherwise taken as the
//! complement over the active domain. Conjunctions with a negated side whose variables are
//! covered by the other side become anti-joins. Results are memoized per
//! `(subformula, time-point, polarity)` for the lifetime of the evaluator.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::domain::{tuples, ActiveDomain, Valuation};
use super::EvalError;
use crate::log::Log;
use crate::policy::{Formula, Interval, Sort, Term, Value};

/// A finite relation over sorted variable names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rel {
    vars: Vec<String>,
    rows: BTreeSet<Vec<Value>>,
}

impl Rel {
    fn empty(vars: Vec<String>) -> Self {
        Rel {
            vars,
            rows: BTreeSet::new(),
        }
    }

    fn unit() -> Self {
        Rel {
            vars: vec![],
            rows: [vec![]].into_iter().collect(),
        }
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// Rows as valuations, in sorted order.
    pub fn valuations(&self) -> impl Iterator<Item = Valuation> + '_ {
        self.rows.iter().map(|r| {
            self.vars
                .iter()
                .cloned()
                .zip(r.iter().cloned())
                .collect::<Valuation>()
        })
    }

    /// Whether the restriction of `v` to this relation's variables is a row.
    pub fn contains(&self, v: &Valuation) -> bool {
        let key: Option<Vec<Value>> = self.vars.iter().map(|x| v.get(x).cloned()).collect();
        key.is_some_and(|k| self.rows.contains(&k))
    }

    /// Rows consistent with `v` on the shared variables.
    pub fn matching<'s>(&'s self, v: &'s Valuation) -> impl Iterator<Item = Valuation> + 's {
        self.valuations()
            .filter(move |row| row.iter().all(|(k, val)| v.get(k).is_none_or(|w| w == val)))
    }

    fn positions(&self, names: &[String]) -> Vec<usize> {
        names
            .iter()
            .map(|n| self.vars.iter().position(|v| v == n).expect("variable in relation"))
            .collect()
    }
}

fn sorted_union(a: &[String], b: &[String]) -> Vec<String> {
    let s: BTreeSet<&String> = a.iter().chain(b.iter()).collect();
    s.into_iter().cloned().collect()
}

fn subset(a: &[String], b: &[String]) -> bool {
    a.iter().all(|x| b.contains(x))
}

fn sorted_vars(f: &Formula) -> Vec<String> {
    f.free_vars().into_iter().collect()
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct Key {
    node: usize,
    at: usize,
    positive: bool,
}

pub struct Evaluator<'a> {
    log: &'a Log,
    dom: &'a ActiveDomain,
    sorts: &'a BTreeMap<String, Sort>,
    cache: HashMap<Key, Rel>,
}

impl<'a> Evaluator<'a> {
    pub fn new(log: &'a Log, dom: &'a ActiveDomain, sorts: &'a BTreeMap<String, Sort>) -> Self {
        Evaluator {
            log,
            dom,
            sorts,
            cache: HashMap::new(),
        }
    }

    pub fn log(&self) -> &'a Log {
        self.log
    }

    pub fn domain(&self) -> &'a ActiveDomain {
        self.dom
    }

    fn sort(&self, v: &str) -> Sort {
        self.sorts.get(v).copied().unwrap_or(Sort::Str)
    }

    /// Truth of `f` at `i` under `v` (which must cover the free variables of `f`).
    pub fn holds(&mut self, f: &'a Formula, i: usize, v: &Valuation) -> Result<bool, EvalError> {
        super::check_args(f, self.log, i, v)?;
        Ok(self.sat(f, i).contains(v))
    }

    /// Satisfying valuations of the free variables of `f` at `i`.
    pub fn sat(&mut self, f: &'a Formula, i: usize) -> Rel {
        self.cached(f, i, true)
    }

    /// Valuations of the free variables of `f` at `i` that falsify it.
    pub fn violations(&mut self, f: &'a Formula, i: usize) -> Rel {
        self.cached(f, i, false)
    }

    fn cached(&mut self, f: &'a Formula, i: usize, positive: bool) -> Rel {
        let key = Key {
            node: f as *const Formula as usize,
            at: i,
            positive,
        };
        if let Some(r) = self.cache.get(&key) {
            return r.clone();
        }
        let r = if positive {
            self.compute(f, i)
        } else {
            self.compute_not(f, i)
        };
        self.cache.insert(key, r.clone());
        r
    }

    // --- relational algebra over the active domain ---

    fn full(&self, vars: Vec<String>) -> Rel {
        let sorts: Vec<_> = vars.iter().map(|v| self.sort(v)).collect();
        Rel {
            rows: tuples(self.dom, &sorts).into_iter().collect(),
            vars,
        }
    }

    fn complement(&self, r: &Rel) -> Rel {
        let mut all = self.full(r.vars.clone());
        all.rows.retain(|row| !r.rows.contains(row));
        all
    }

    /// Adds the variables in `vars` missing from `r`, ranging over the active domain.
    fn extend(&self, r: Rel, vars: &[String]) -> Rel {
        if r.vars.as_slice() == vars {
            return r;
        }
        let missing: Vec<String> = vars.iter().filter(|v| !r.vars.contains(v)).cloned().collect();
        self.join(r, self.full(missing))
    }

    fn join(&self, a: Rel, b: Rel) -> Rel {
        let vars = sorted_union(&a.vars, &b.vars);
        let shared: Vec<String> = a.vars.iter().filter(|v| b.vars.contains(v)).cloned().collect();
        let (sa, sb) = (a.positions(&shared), b.positions(&shared));
        let mut index: HashMap<Vec<&Value>, Vec<&Vec<Value>>> = HashMap::new();
        for row in &b.rows {
            index.entry(sb.iter().map(|&k| &row[k]).collect()).or_default().push(row);
        }
        // For each output column, where to read it from.
        let src: Vec<(bool, usize)> = vars
            .iter()
            .map(|v| match a.vars.iter().position(|x| x == v) {
                Some(p) => (true, p),
                None => (false, b.vars.iter().position(|x| x == v).unwrap()),
            })
            .collect();
        let mut rows = BTreeSet::new();
        for ra in &a.rows {
            let key: Vec<&Value> = sa.iter().map(|&k| &ra[k]).collect();
            if let Some(matches) = index.get(&key) {
                for rb in matches {
                    rows.insert(
                        src.iter()
                            .map(|&(left, p)| if left { ra[p].clone() } else { rb[p].clone() })
                            .collect(),
                    );
                }
            }
        }
        Rel { vars, rows }
    }

    /// Rows of `a` with no match in `b`; `b`'s variables must be among `a`'s.
    fn antijoin(&self, mut a: Rel, b: &Rel) -> Rel {
        let pos = a.positions(&b.vars);
        a.rows
            .retain(|row| !b.rows.contains(&pos.iter().map(|&k| row[k].clone()).collect::<Vec<_>>()));
        a
    }

    fn union(&self, a: Rel, b: Rel) -> Rel {
        let vars = sorted_union(&a.vars, &b.vars);
        let mut a = self.extend(a, &vars);
        let b = self.extend(b, &vars);
        a.rows.extend(b.rows);
        a
    }

    fn intersect(&self, a: Rel, b: &Rel) -> Rel {
        debug_assert_eq!(a.vars, b.vars);
        Rel {
            rows: a.rows.intersection(&b.rows).cloned().collect(),
            vars: a.vars,
        }
    }

    fn project_out(&self, r: Rel, drop: &[String]) -> Rel {
        let keep: Vec<String> = r.vars.iter().filter(|v| !drop.contains(v)).cloned().collect();
        let pos = r.positions(&keep);
        Rel {
            rows: r
                .rows
                .iter()
                .map(|row| pos.iter().map(|&k| row[k].clone()).collect())
                .collect(),
            vars: keep,
        }
    }

    fn some_domain_empty(&self, vs: &[String]) -> bool {
        vs.iter().any(|v| self.dom.of(self.sort(v)).is_empty())
    }

    /// `a ∧ ¬b` given the relation of `a`.
    fn and_not(&mut self, a: Rel, b: &'a Formula, i: usize) -> Rel {
        let bvars = sorted_vars(b);
        if subset(&bvars, &a.vars) {
            let rb = self.sat(b, i);
            self.antijoin(a, &rb)
        } else {
            let nb = self.violations(b, i);
            self.join(a, nb)
        }
    }

    fn past_window(&self, iv: &Interval, i: usize) -> impl Iterator<Item = usize> + '_ {
        let ti = self.log.ts(i);
        let iv = *iv;
        (0..=i).filter(move |&j| iv.contains(ti - self.log.ts(j)))
    }

    fn future_window(&self, iv: &Interval, i: usize) -> impl Iterator<Item = usize> + '_ {
        let ti = self.log.ts(i);
        let iv = *iv;
        (i..self.log.len()).filter(move |&j| iv.contains(self.log.ts(j) - ti))
    }

    fn compute(&mut self, f: &'a Formula, i: usize) -> Rel {
        use Formula::*;
        match f {
            True => Rel::unit(),
            False => Rel::empty(vec![]),
            Pred(name, args) => self.atom(name, args, i),
            Not(a) => self.violations(a, i),
            And(a, b) => {
                if let Not(c) = &**b {
                    let ra = self.sat(a, i);
                    return self.and_not(ra, c, i);
                }
                if let Not(c) = &**a {
                    let rb = self.sat(b, i);
                    return self.and_not(rb, c, i);
                }
                let ra = self.sat(a, i);
                let rb = self.sat(b, i);
                self.join(ra, rb)
            }
            Or(a, b) => {
                let ra = self.sat(a, i);
                let rb = self.sat(b, i);
                self.union(ra, rb)
            }
            Implies(..) => {
                let bad = self.violations(f, i);
                self.complement(&bad)
            }
            Exists(vs, body) => {
                let vars = sorted_vars(f);
                if self.some_domain_empty(vs) {
                    return Rel::empty(vars);
                }
                let r = self.sat(body, i);
                self.project_out(r, vs)
            }
            Forall(vs, body) => {
                let vars = sorted_vars(f);
                if self.some_domain_empty(vs) {
                    return self.full(vars);
                }
                let bad = self.violations(body, i);
                let bad = self.project_out(bad, vs);
                self.complement(&bad)
            }
            Prev(iv, a) => {
                if i > 0 && iv.contains(self.log.ts(i) - self.log.ts(i - 1)) {
                    self.sat(a, i - 1)
                } else {
                    Rel::empty(sorted_vars(a))
                }
            }
            Next(iv, a) => {
                if i + 1 < self.log.len() && iv.contains(self.log.ts(i + 1) - self.log.ts(i)) {
                    self.sat(a, i + 1)
                } else {
                    Rel::empty(sorted_vars(a))
                }
            }
            Once(iv, a) | Eventually(iv, a) => {
                let window: Vec<usize> = if matches!(f, Once(..)) {
                    self.past_window(iv, i).collect()
                } else {
                    self.future_window(iv, i).collect()
                };
                let mut acc = Rel::empty(sorted_vars(a));
                for j in window {
                    let r = self.sat(a, j);
                    acc.rows.extend(r.rows);
                }
                acc
            }
            Historically(iv, a) | Always(iv, a) => {
                let window: Vec<usize> = if matches!(f, Historically(..)) {
                    self.past_window(iv, i).collect()
                } else {
                    self.future_window(iv, i).collect()
                };
                let mut acc = self.full(sorted_vars(a));
                for j in window {
                    let r = self.sat(a, j);
                    acc = self.intersect(acc, &r);
                }
                acc
            }
            Since(iv, a, b) => {
                let vars = sorted_vars(f);
                let window: Vec<usize> = self.past_window(iv, i).collect();
                let mut acc = Rel::empty(vars.clone());
                for j in window {
                    let rb = self.sat(b, j);
                    let mut cur = self.extend(rb, &vars);
                    for k in j + 1..=i {
                        if cur.is_empty() {
                            break;
                        }
                        let ra = self.sat(a, k);
                        cur = self.join(cur, ra);
                    }
                    acc.rows.extend(cur.rows);
                }
                acc
            }
            Until(iv, a, b) => {
                let vars = sorted_vars(f);
                let window: Vec<usize> = self.future_window(iv, i).collect();
                let mut acc = Rel::empty(vars.clone());
                for j in window {
                    let rb = self.sat(b, j);
                    let mut cur = self.extend(rb, &vars);
                    for k in i..j {
                        if cur.is_empty() {
                            break;
                        }
                        let ra = self.sat(a, k);
                        cur = self.join(cur, ra);
                    }
                    acc.rows.extend(cur.rows);
                }
                acc
            }
        }
    }

    fn compute_not(&mut self, f: &'a Formula, i: usize) -> Rel {
        use Formula::*;
        match f {
            True => Rel::empty(vec![]),
            False => Rel::unit(),
            Not(a) => self.sat(a, i),
            Implies(a, b) => {
                let ra = self.sat(a, i);
                self.and_not(ra, b, i)
            }
            Or(a, b) => {
                let na = self.violations(a, i);
                let nb = self.violations(b, i);
                self.join(na, nb)
            }
            And(a, b) => {
                let na = self.violations(a, i);
                let nb = self.violations(b, i);
                self.union(na, nb)
            }
            Forall(vs, body) => {
                if self.some_domain_empty(vs) {
                    return Rel::empty(sorted_vars(f));
                }
                let bad = self.violations(body, i);
                self.project_out(bad, vs)
            }
            _ => {
                let r = self.sat(f, i);
                self.complement(&r)
            }
        }
    }

    fn atom(&self, name: &str, args: &[Term], i: usize) -> Rel {
        let vars: Vec<String> = args
            .iter()
            .filter_map(|t| t.as_var().map(str::to_string))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut rows = BTreeSet::new();
        'events: for e in &self.log.points()[i].events {
            if e.name != name || e.args.len() != args.len() {
                continue;
            }
            let mut row: Vec<Option<&Value>> = vec![None; vars.len()];
            for (t, a) in args.iter().zip(&e.args) {
                match t {
                    Term::Const(c) => {
                        if c != a {
                            continue 'events;
                        }
                    }
                    Term::Var(x) => {
                        let k = vars.iter().position(|v| v == x).unwrap();
                        match row[k] {
                            Some(prev) if prev != a => continue 'events,
                            _ => row[k] = Some(a),
                        }
                    }
                }
            }
            rows.insert(row.into_iter().map(|v| v.unwrap().clone()).collect());
        }
        Rel { vars, rows }
    }
}
