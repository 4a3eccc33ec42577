use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// The two sorts of data values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sort {
    Str,
    Int,
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Str => f.write_str("string"),
            Sort::Int => f.write_str("int"),
        }
    }
}

/// A sorted constant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Str(String),
    Int(i64),
}

impl Value {
    pub fn sort(&self) -> Sort {
        match self {
            Value::Str(_) => Sort::Str,
            Value::Int(_) => Sort::Int,
        }
    }

    pub fn str(s: impl Into<String>) -> Self {
        Value::Str(s.into())
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_string())
    }
}

impl From<i64> for Value {
    fn from(n: i64) -> Self {
        Value::Int(n)
    }
}

/// Writes a double-quoted string literal with backslash escapes.
pub(crate) fn write_quoted(f: &mut impl fmt::Write, s: &str) -> fmt::Result {
    f.write_char('"')?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            '\r' => f.write_str("\\r")?,
            c => f.write_char(c)?,
        }
    }
    f.write_char('"')
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Str(s) => write_quoted(f, s),
            Value::Int(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Const(Value),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(c) => c.fmt(f),
        }
    }
}

/// A metric interval `[lo, hi]` over timestamp differences; `hi = None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Interval {
    lo: u64,
    hi: Option<u64>,
}

impl Interval {
    /// `[0, ∞)`, the interval used when none is written.
    pub const FULL: Interval = Interval { lo: 0, hi: None };

    pub fn new(lo: u64, hi: Option<u64>) -> Option<Self> {
        match hi {
            Some(h) if h < lo => None,
            _ => Some(Interval { lo, hi }),
        }
    }

    pub fn bounded(lo: u64, hi: u64) -> Option<Self> {
        Self::new(lo, Some(hi))
    }

    pub fn lo(&self) -> u64 {
        self.lo
    }

    pub fn hi(&self) -> Option<u64> {
        self.hi
    }

    pub fn is_full(&self) -> bool {
        *self == Self::FULL
    }

    pub fn is_bounded(&self) -> bool {
        self.hi.is_some()
    }

    pub fn contains(&self, d: u64) -> bool {
        d >= self.lo && self.hi.is_none_or(|h| d <= h)
    }

    /// True if every distance in `self` is also in `other`.
    pub fn is_subset_of(&self, other: &Interval) -> bool {
        self.lo >= other.lo
            && match (self.hi, other.hi) {
                (_, None) => true,
                (None, Some(_)) => false,
                (Some(a), Some(b)) => a <= b,
            }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hi {
            Some(h) => write!(f, "[{},{}]", self.lo, h),
            None => write!(f, "[{},*]", self.lo),
        }
    }
}

/// MFOTL formulae.
///
/// Equality is structural; source locations live in a separate [`SpanMap`](super::SpanMap).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    True,
    False,
    Pred(String, Vec<Term>),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Exists(Vec<String>, Box<Formula>),
    Forall(Vec<String>, Box<Formula>),
    Prev(Interval, Box<Formula>),
    Next(Interval, Box<Formula>),
    Once(Interval, Box<Formula>),
    Historically(Interval, Box<Formula>),
    Eventually(Interval, Box<Formula>),
    Always(Interval, Box<Formula>),
    Since(Interval, Box<Formula>, Box<Formula>),
    Until(Interval, Box<Formula>, Box<Formula>),
}

/// Position of a subformula: the child indices taken from the root.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Path(pub Vec<usize>);

impl Path {
    pub fn root() -> Self {
        Path(Vec::new())
    }

    pub fn child(&self, i: usize) -> Self {
        let mut v = self.0.clone();
        v.push(i);
        Path(v)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("root");
        }
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(".")?;
            }
            write!(f, "{i}")?;
        }
        Ok(())
    }
}

impl Formula {
    pub fn pred(name: impl Into<String>, args: Vec<Term>) -> Self {
        Formula::Pred(name.into(), args)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn exists<S: Into<String>>(vars: impl IntoIterator<Item = S>, body: Formula) -> Self {
        Formula::Exists(vars.into_iter().map(Into::into).collect(), Box::new(body))
    }

    pub fn forall<S: Into<String>>(vars: impl IntoIterator<Item = S>, body: Formula) -> Self {
        Formula::Forall(vars.into_iter().map(Into::into).collect(), Box::new(body))
    }

    pub fn once(i: Interval, f: Formula) -> Self {
        Formula::Once(i, Box::new(f))
    }

    pub fn always(i: Interval, f: Formula) -> Self {
        Formula::Always(i, Box::new(f))
    }

    pub fn eventually(i: Interval, f: Formula) -> Self {
        Formula::Eventually(i, Box::new(f))
    }

    /// Left-nested conjunction of a non-empty list; `True` for an empty one.
    pub fn conj(parts: impl IntoIterator<Item = Formula>) -> Self {
        parts
            .into_iter()
            .reduce(Formula::and)
            .unwrap_or(Formula::True)
    }

    /// Immediate subformulae, in path order.
    pub fn children(&self) -> Vec<&Formula> {
        use Formula::*;
        match self {
            True | False | Pred(..) => vec![],
            Not(a)
            | Exists(_, a)
            | Forall(_, a)
            | Prev(_, a)
            | Next(_, a)
            | Once(_, a)
            | Historically(_, a)
            | Eventually(_, a)
            | Always(_, a) => vec![a],
            And(a, b) | Or(a, b) | Implies(a, b) | Since(_, a, b) | Until(_, a, b) => vec![a, b],
        }
    }

    /// Binds the free variables with a `FORALL` placed directly under a top-level
    /// `ALWAYS`, or at the top otherwise.
    pub fn universal_closure(&self) -> Formula {
        let fv: Vec<String> = self.free_vars().into_iter().collect();
        if fv.is_empty() {
            return self.clone();
        }
        match self {
            Formula::Always(iv, body) => Formula::Always(*iv, Box::new(Formula::Forall(fv, body.clone()))),
            other => Formula::Forall(fv, Box::new(other.clone())),
        }
    }

    /// Same node with its immediate subformulae replaced, in path order.
    pub fn with_children(&self, kids: Vec<Formula>) -> Formula {
        use Formula::*;
        let mut it = kids.into_iter().map(Box::new);
        let mut k = || it.next().expect("one formula per child");
        match self {
            True | False | Pred(..) => self.clone(),
            Not(_) => Not(k()),
            And(..) => And(k(), k()),
            Or(..) => Or(k(), k()),
            Implies(..) => Implies(k(), k()),
            Exists(vs, _) => Exists(vs.clone(), k()),
            Forall(vs, _) => Forall(vs.clone(), k()),
            Prev(i, _) => Prev(*i, k()),
            Next(i, _) => Next(*i, k()),
            Once(i, _) => Once(*i, k()),
            Historically(i, _) => Historically(*i, k()),
            Eventually(i, _) => Eventually(*i, k()),
            Always(i, _) => Always(*i, k()),
            Since(i, ..) => Since(*i, k(), k()),
            Until(i, ..) => Until(*i, k(), k()),
        }
    }

    pub fn at_path(&self, path: &Path) -> Option<&Formula> {
        let mut cur = self;
        for &i in &path.0 {
            cur = *cur.children().get(i)?;
        }
        Some(cur)
    }

    pub fn interval(&self) -> Option<Interval> {
        use Formula::*;
        match self {
            Prev(i, _) | Next(i, _) | Once(i, _) | Historically(i, _) | Eventually(i, _)
            | Always(i, _) | Since(i, _, _) | Until(i, _, _) => Some(*i),
            _ => None,
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            Formula::Pred(_, args) => {
                for t in args {
                    if let Term::Var(v) = t {
                        if !bound.contains(v) {
                            out.insert(v.clone());
                        }
                    }
                }
            }
            Formula::Exists(vs, body) | Formula::Forall(vs, body) => {
                let n = bound.len();
                bound.extend(vs.iter().cloned());
                body.collect_free(bound, out);
                bound.truncate(n);
            }
            other => {
                for c in other.children() {
                    c.collect_free(bound, out);
                }
            }
        }
    }

    /// True if the formula contains `NEXT`, `EVENTUALLY`, `ALWAYS` or `UNTIL`.
    pub fn has_future(&self) -> bool {
        match self {
            Formula::Next(..) | Formula::Eventually(..) | Formula::Always(..) | Formula::Until(..) => {
                true
            }
            other => other.children().into_iter().any(Formula::has_future),
        }
    }

    /// All constants occurring in the formula.
    pub fn constants(&self) -> BTreeSet<Value> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| {
            if let Formula::Pred(_, args) = f {
                for t in args {
                    if let Term::Const(c) = t {
                        out.insert(c.clone());
                    }
                }
            }
        });
        out
    }

    /// Pre-order traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Formula)) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }

    pub fn depth(&self) -> usize {
        1 + self
            .children()
            .into_iter()
            .map(Formula::depth)
            .max()
            .unwrap_or(0)
    }

    /// Number of occurrences of variable `v` that are free in `self`.
    pub fn occurrences(&self, v: &str) -> usize {
        match self {
            Formula::Pred(_, args) => args.iter().filter(|t| t.as_var() == Some(v)).count(),
            Formula::Exists(vs, body) | Formula::Forall(vs, body) => {
                if vs.iter().any(|x| x == v) {
                    0
                } else {
                    body.occurrences(v)
                }
            }
            other => other.children().into_iter().map(|c| c.occurrences(v)).sum(),
        }
    }

    /// Replaces free occurrences of variables according to `subst`.
    pub fn substitute(&self, subst: &dyn Fn(&str) -> Option<Term>) -> Formula {
        self.subst_inner(subst, &mut Vec::new())
    }

    fn subst_inner(&self, subst: &dyn Fn(&str) -> Option<Term>, bound: &mut Vec<String>) -> Formula {
        use Formula::*;
        let b = |f: &Formula, bound: &mut Vec<String>| Box::new(f.subst_inner(subst, bound));
        match self {
            True => True,
            False => False,
            Pred(n, args) => Pred(
                n.clone(),
                args.iter()
                    .map(|t| match t {
                        Term::Var(v) if !bound.contains(v) => subst(v).unwrap_or_else(|| t.clone()),
                        _ => t.clone(),
                    })
                    .collect(),
            ),
            Not(a) => Not(b(a, bound)),
            And(x, y) => And(b(x, bound), b(y, bound)),
            Or(x, y) => Or(b(x, bound), b(y, bound)),
            Implies(x, y) => Implies(b(x, bound), b(y, bound)),
            Exists(vs, body) | Forall(vs, body) => {
                let n = bound.len();
                bound.extend(vs.iter().cloned());
                let nb = b(body, bound);
                bound.truncate(n);
                if matches!(self, Exists(..)) {
                    Exists(vs.clone(), nb)
                } else {
                    Forall(vs.clone(), nb)
                }
            }
            Prev(i, a) => Prev(*i, b(a, bound)),
            Next(i, a) => Next(*i, b(a, bound)),
            Once(i, a) => Once(*i, b(a, bound)),
            Historically(i, a) => Historically(*i, b(a, bound)),
            Eventually(i, a) => Eventually(*i, b(a, bound)),
            Always(i, a) => Always(*i, b(a, bound)),
            Since(i, x, y) => Since(*i, b(x, bound), b(y, bound)),
            Until(i, x, y) => Until(*i, b(x, bound), b(y, bound)),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::printer::pretty_print(self))
    }
}
