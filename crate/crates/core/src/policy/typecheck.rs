use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::ast::{Formula, Path, Sort, Term};
use super::signature::Signature;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("unknown event `{name}` at {path}")]
    UnknownEvent { name: String, path: Path },
    #[error("event `{name}` expects {expected} arguments, found {found} at {path}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
        path: Path,
    },
    #[error("argument {index} of `{name}` must be {expected}, found {found} at {path}")]
    Sort {
        name: String,
        index: usize,
        expected: Sort,
        found: Sort,
        path: Path,
    },
    #[error("free variable `{name}` at {path}")]
    FreeVariable { name: String, path: Path },
    #[error("variable `{name}` used both as {first} and {second} at {path}")]
    SortConflict {
        name: String,
        first: Sort,
        second: Sort,
        path: Path,
    },
}

impl TypeError {
    pub fn path(&self) -> &Path {
        match self {
            TypeError::UnknownEvent { path, .. }
            | TypeError::Arity { path, .. }
            | TypeError::Sort { path, .. }
            | TypeError::FreeVariable { path, .. }
            | TypeError::SortConflict { path, .. } => path,
        }
    }
}

/// A closed formula whose atoms agree with a signature, plus the sort of every variable.
///
/// Variable names are global for sorting purposes: a name bound in two places must have
/// the same sort in both. Variables with no occurrence default to `string`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedFormula {
    formula: Formula,
    sorts: BTreeMap<String, Sort>,
}

impl TypedFormula {
    pub fn formula(&self) -> &Formula {
        &self.formula
    }

    pub fn sort_of(&self, var: &str) -> Sort {
        self.sorts.get(var).copied().unwrap_or(Sort::Str)
    }

    pub fn sorts(&self) -> &BTreeMap<String, Sort> {
        &self.sorts
    }
}

impl fmt::Display for TypedFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.formula.fmt(f)
    }
}

/// Checks a policy against a signature; every problem found is reported.
pub fn typecheck(f: &Formula, sig: &Signature) -> Result<TypedFormula, Vec<TypeError>> {
    let mut cx = Checker {
        sig,
        sorts: BTreeMap::new(),
        errors: Vec::new(),
        bound: Vec::new(),
    };
    cx.walk(f, Path::root());
    if cx.errors.is_empty() {
        Ok(TypedFormula {
            formula: f.clone(),
            sorts: cx.sorts,
        })
    } else {
        Err(cx.errors)
    }
}

/// Typechecks while allowing free variables, returning their sorts alongside.
///
/// Used for open subformulae such as obligation bodies.
pub fn typecheck_open(f: &Formula, sig: &Signature) -> Result<TypedFormula, Vec<TypeError>> {
    match typecheck(f, sig) {
        Ok(t) => Ok(t),
        Err(errs) => {
            let real: Vec<_> = errs
                .iter()
                .filter(|e| !matches!(e, TypeError::FreeVariable { .. }))
                .cloned()
                .collect();
            if !real.is_empty() {
                return Err(real);
            }
            let closed = Formula::forall(f.free_vars(), f.clone());
            let t = typecheck(&closed, sig)?;
            Ok(TypedFormula {
                formula: f.clone(),
                sorts: t.sorts,
            })
        }
    }
}

struct Checker<'a> {
    sig: &'a Signature,
    sorts: BTreeMap<String, Sort>,
    errors: Vec<TypeError>,
    bound: Vec<String>,
}

impl Checker<'_> {
    fn walk(&mut self, f: &Formula, path: Path) {
        match f {
            Formula::Pred(name, args) => self.atom(name, args, path),
            Formula::Exists(vs, body) | Formula::Forall(vs, body) => {
                let n = self.bound.len();
                self.bound.extend(vs.iter().cloned());
                self.walk(body, path.child(0));
                self.bound.truncate(n);
            }
            other => {
                for (i, c) in other.children().into_iter().enumerate() {
                    self.walk(c, path.child(i));
                }
            }
        }
    }

    fn atom(&mut self, name: &str, args: &[Term], path: Path) {
        let Some(schema) = self.sig.get(name) else {
            self.errors.push(TypeError::UnknownEvent {
                name: name.to_string(),
                path,
            });
            return;
        };
        if schema.arity() != args.len() {
            self.errors.push(TypeError::Arity {
                name: name.to_string(),
                expected: schema.arity(),
                found: args.len(),
                path,
            });
            return;
        }
        for (index, (t, expected)) in args.iter().zip(schema.sorts()).enumerate() {
            match t {
                Term::Const(c) => {
                    if c.sort() != expected {
                        self.errors.push(TypeError::Sort {
                            name: name.to_string(),
                            index,
                            expected,
                            found: c.sort(),
                            path: path.clone(),
                        });
                    }
                }
                Term::Var(v) => {
                    if !self.bound.contains(v) {
                        let dup = self.errors.iter().any(
                            |e| matches!(e, TypeError::FreeVariable { name, .. } if name == v),
                        );
                        if !dup {
                            self.errors.push(TypeError::FreeVariable {
                                name: v.clone(),
                                path: path.clone(),
                            });
                        }
                    }
                    match self.sorts.get(v) {
                        Some(&s) if s != expected => self.errors.push(TypeError::SortConflict {
                            name: v.clone(),
                            first: s,
                            second: expected,
                            path: path.clone(),
                        }),
                        Some(_) => {}
                        None => {
                            self.sorts.insert(v.clone(), expected);
                        }
                    }
                }
            }
        }
    }
}
