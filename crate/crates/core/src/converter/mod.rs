//! Conversion of reified rules (`.rio`) into MFOTL policies.
//!
//! A rule lists condition atoms tagged with time variables, ordering constraints between
//! those time variables, and consequence atoms that hold at `now`:
//!
//! ```text
//! rule art7_1 {
//!   if: PersonalDataProcessing(ep, x, z)@now, isBasedOn(ep, ehc)@now,
//!       GiveConsent(ehc, w, x, epu)@t1, before(t1, now);
//!   then: AbleTo(ea, y, ed)@now, Demonstrate(ed, y, ehc)@now;
//! }
//! ```
//!
//! Untagged atoms are at `now`. `same(t1, t2)` merges two time variables. A group of
//! atoms at `t` with `before(t, u)` becomes `ONCE (...)` inside the group of `u`.
//! The result is
//!
//! ```text
//! ALWAYS FORALL <shared>. (EXISTS <condition-only>. <conditions>) IMPLIES (EXISTS <consequence-only>. <consequences>)
//! ```
//!
//! where `<shared>` are the variables that occur on both sides. An optional
//! `vars: a, b;` section declares extra condition variables; unused ones are kept in the
//! quantifier prefix so that lint reports them.

mod canonical;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

pub use canonical::canonical;

use crate::lex::{Cursor, Pos, SyntaxError};
use crate::policy::{
    lint, parse_terms, typecheck, Capabilities, EventSchema, Formula, Interval, Signature, Sort, Term,
    TypeError, Warning,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReifiedAtom {
    pub name: String,
    pub args: Vec<Term>,
    /// Time variable; `None` means `now`.
    pub time: Option<String>,
    pub pos: Pos,
}

impl ReifiedAtom {
    fn at(&self) -> &str {
        self.time.as_deref().unwrap_or(NOW)
    }

    fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| t.as_var())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Before,
    Same,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub kind: ConstraintKind,
    pub left: String,
    pub right: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReifiedRule {
    pub label: String,
    pub conditions: Vec<ReifiedAtom>,
    pub constraints: Vec<Constraint>,
    pub consequences: Vec<ReifiedAtom>,
    pub declared: Vec<String>,
}

const NOW: &str = "now";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RioError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("rule `{label}` has no conditions")]
    NoConditions { label: String },
    #[error("rule `{label}`: unknown ordering constraint `{name}`")]
    UnknownConstraint { label: String, name: String },
    #[error("rule `{label}`: consequence `{atom}` must hold at `now`")]
    ConsequenceNotNow { label: String, atom: String },
    #[error("rule `{label}`: `{var}` is used both as a time variable and as a data variable")]
    TimeVarClash { label: String, var: String },
    #[error("rule `{label}`: time variable `{var}` is not ordered before `now`")]
    Unreachable { label: String, var: String },
    #[error("rule `{label}`: ordering constraints on `{var}` are cyclic")]
    Cycle { label: String, var: String },
    #[error("rule `{label}`: time variable `{var}` is ordered before more than one time variable")]
    Ambiguous { label: String, var: String },
    #[error("rule `{label}`: `{var}` is ordered after `now`; only past constraints are supported")]
    Future { label: String, var: String },
}

/// Parses a `.rio` file; the first malformed rule aborts.
pub fn parse_rio(text: &str) -> Result<Vec<ReifiedRule>, RioError> {
    parse_rio_lenient(text)?.into_iter().collect()
}

/// Parses a `.rio` file rule by rule. A malformed rule yields an error entry and parsing
/// resumes after its closing brace. Only a tokenizer error is fatal.
pub fn parse_rio_lenient(text: &str) -> Result<Vec<Result<ReifiedRule, RioError>>, SyntaxError> {
    let mut cur = Cursor::new(text)?;
    let mut out = Vec::new();
    while !cur.at_eof() {
        match parse_rule(&mut cur) {
            Ok(r) => out.push(validate(r)),
            Err(e) => {
                out.push(Err(e.into()));
                while !cur.at_eof() && !cur.eat_punct('}') {
                    cur.next();
                }
            }
        }
    }
    Ok(out)
}

fn parse_rule(cur: &mut Cursor) -> Result<RawRule, SyntaxError> {
    if !cur.is_ident("rule") {
        return Err(cur.error(&["`rule`"]));
    }
    cur.next();
    let label = cur.expect_ident("rule label")?;
    cur.expect_punct('{')?;
    let mut raw = RawRule {
        label,
        items: vec![],
        consequences: vec![],
        declared: vec![],
    };
    while !cur.eat_punct('}') {
        let section = cur.expect_ident("`if`, `vars` or `then`")?;
        cur.expect_punct(':')?;
        match section.as_str() {
            "if" => raw.items.extend(parse_list(cur, parse_atom)?),
            "then" => raw.consequences.extend(parse_list(cur, parse_atom)?),
            "vars" => raw.declared.extend(parse_list(cur, |c| c.expect_ident("variable"))?),
            _ => return Err(SyntaxError::new(cur.pos(), &["`if`, `vars` or `then`"], format!("`{section}`"))),
        }
        if !cur.eat_punct(';') && !cur.is_punct('}') {
            return Err(cur.error(&["`;`", "`}`"]));
        }
    }
    Ok(raw)
}

fn parse_list<T>(
    cur: &mut Cursor,
    mut item: impl FnMut(&mut Cursor) -> Result<T, SyntaxError>,
) -> Result<Vec<T>, SyntaxError> {
    let mut out = Vec::new();
    if cur.is_punct(';') || cur.is_punct('}') {
        return Ok(out);
    }
    loop {
        out.push(item(cur)?);
        if !cur.eat_punct(',') {
            return Ok(out);
        }
    }
}

fn parse_atom(cur: &mut Cursor) -> Result<ReifiedAtom, SyntaxError> {
    let pos = cur.pos();
    let name = cur.expect_ident("atom")?;
    cur.expect_punct('(')?;
    let args = parse_terms(cur)?;
    let time = if cur.eat_punct('@') {
        Some(cur.expect_ident("time variable")?).filter(|t| t != NOW)
    } else {
        None
    };
    Ok(ReifiedAtom { name, args, time, pos })
}

struct RawRule {
    label: String,
    items: Vec<ReifiedAtom>,
    consequences: Vec<ReifiedAtom>,
    declared: Vec<String>,
}

/// Separates ordering constraints from condition atoms and checks the rule's invariants.
fn validate(raw: RawRule) -> Result<ReifiedRule, RioError> {
    let label = raw.label;
    let mut tvars: BTreeSet<String> = raw.items.iter().filter_map(|a| a.time.clone()).collect();
    tvars.insert(NOW.to_string());
    let mut conditions = Vec::new();
    let mut constraints = Vec::new();
    for item in raw.items {
        let kind = match item.name.as_str() {
            "before" => Some(ConstraintKind::Before),
            "same" => Some(ConstraintKind::Same),
            _ => None,
        };
        let temporal_args = !item.args.is_empty()
            && item.time.is_none()
            && item.args.iter().all(|t| t.as_var().is_some_and(|v| tvars.contains(v)));
        match kind {
            Some(kind) if item.args.len() == 2 && item.time.is_none() => {
                let vars: Vec<String> = item.args.iter().filter_map(|t| t.as_var().map(String::from)).collect();
                if vars.len() != 2 {
                    return Err(SyntaxError::new(item.pos, &["two time variables"], &item.name).into());
                }
                tvars.extend(vars.iter().cloned());
                constraints.push(Constraint {
                    kind,
                    left: vars[0].clone(),
                    right: vars[1].clone(),
                });
            }
            _ if temporal_args => {
                return Err(RioError::UnknownConstraint { label, name: item.name });
            }
            _ => conditions.push(item),
        }
    }
    if conditions.is_empty() {
        return Err(RioError::NoConditions { label });
    }
    if let Some(a) = raw.consequences.iter().find(|a| a.time.is_some()) {
        return Err(RioError::ConsequenceNotNow {
            label,
            atom: format!("{}@{}", a.name, a.at()),
        });
    }
    let clash = conditions
        .iter()
        .chain(raw.consequences.iter())
        .flat_map(|a| a.vars())
        .chain(raw.declared.iter().map(String::as_str))
        .find(|v| tvars.contains(*v));
    if let Some(v) = clash {
        return Err(RioError::TimeVarClash {
            label,
            var: v.to_string(),
        });
    }
    Ok(ReifiedRule {
        label,
        conditions,
        constraints,
        consequences: raw.consequences,
        declared: raw.declared,
    })
}

fn push_unique(out: &mut Vec<String>, v: &str) {
    if !out.iter().any(|x| x == v) {
        out.push(v.to_string());
    }
}

/// Time-variable groups after merging `same` constraints, with each group's successor.
struct Groups {
    rep: BTreeMap<String, String>,
    parent: BTreeMap<String, String>,
}

impl Groups {
    fn build(rule: &ReifiedRule) -> Result<Self, RioError> {
        let label = || rule.label.clone();
        let mut rep: BTreeMap<String, String> = BTreeMap::new();
        let mut all: BTreeSet<String> = rule.conditions.iter().map(|a| a.at().to_string()).collect();
        all.insert(NOW.to_string());
        for c in &rule.constraints {
            all.insert(c.left.clone());
            all.insert(c.right.clone());
        }
        for t in &all {
            rep.insert(t.clone(), t.clone());
        }
        fn find(rep: &BTreeMap<String, String>, t: &str) -> String {
            let mut t = t.to_string();
            while rep[&t] != t {
                t = rep[&t].clone();
            }
            t
        }
        for c in rule.constraints.iter().filter(|c| c.kind == ConstraintKind::Same) {
            let (a, b) = (find(&rep, &c.left), find(&rep, &c.right));
            // `now` stays the representative of its group.
            let (keep, drop) = if b == NOW { (b, a) } else { (a, b) };
            rep.insert(drop, keep);
        }
        let rep: BTreeMap<String, String> = all.iter().map(|t| (t.clone(), find(&rep, t))).collect();
        let mut parent = BTreeMap::new();
        for c in rule.constraints.iter().filter(|c| c.kind == ConstraintKind::Before) {
            let (a, b) = (rep[&c.left].clone(), rep[&c.right].clone());
            if a == NOW {
                return Err(RioError::Future {
                    label: label(),
                    var: c.right.clone(),
                });
            }
            if a == b {
                return Err(RioError::Cycle {
                    label: label(),
                    var: c.left.clone(),
                });
            }
            if let Some(old) = parent.insert(a.clone(), b.clone()) {
                if old != b {
                    return Err(RioError::Ambiguous { label: label(), var: a });
                }
            }
        }
        for t in rep.values() {
            let mut seen = BTreeSet::new();
            let mut at = t.clone();
            while at != NOW {
                if !seen.insert(at.clone()) {
                    return Err(RioError::Cycle { label: label(), var: at });
                }
                match parent.get(&at) {
                    Some(p) => at = p.clone(),
                    None => return Err(RioError::Unreachable { label: label(), var: at }),
                }
            }
        }
        Ok(Groups { rep, parent })
    }

    /// Groups from `g` (exclusive) down to `t`'s group, nearest to `g` first.
    fn chain_below(&self, g: &str, t: &str) -> Option<Vec<String>> {
        let mut path = vec![];
        let mut at = self.rep[t].clone();
        while at != g {
            path.push(at.clone());
            at = self.parent.get(&at)?.clone();
        }
        path.reverse();
        Some(path)
    }

    /// Conjunction for group `g`: its atoms and, in source order, `ONCE` of each
    /// earlier group attached to it.
    fn formula(&self, g: &str, atoms: &[ReifiedAtom]) -> Formula {
        let mut parts = Vec::new();
        let mut done = BTreeSet::new();
        for a in atoms {
            let Some(chain) = self.chain_below(g, a.at()) else { continue };
            match chain.first() {
                None => parts.push(Formula::Pred(a.name.clone(), a.args.clone())),
                Some(child) if done.insert(child.clone()) => {
                    parts.push(Formula::once(Interval::FULL, self.formula(child, atoms)))
                }
                Some(_) => {}
            }
        }
        if parts.is_empty() {
            Formula::True
        } else {
            Formula::conj(parts)
        }
    }
}

fn atoms_formula(atoms: &[ReifiedAtom]) -> Formula {
    if atoms.is_empty() {
        Formula::True
    } else {
        Formula::conj(atoms.iter().map(|a| Formula::Pred(a.name.clone(), a.args.clone())))
    }
}

fn quantify(exists: bool, vars: Vec<String>, body: Formula) -> Formula {
    match (vars.is_empty(), exists) {
        (true, _) => body,
        (false, true) => Formula::exists(vars, body),
        (false, false) => Formula::forall(vars, body),
    }
}

/// Converts one rule to a closed `ALWAYS` policy.
pub fn convert(rule: &ReifiedRule) -> Result<Formula, RioError> {
    let groups = Groups::build(rule)?;
    let mut cond_vars = Vec::new();
    for v in rule.conditions.iter().flat_map(|a| a.vars()) {
        push_unique(&mut cond_vars, v);
    }
    let mut cons_vars = Vec::new();
    for v in rule.consequences.iter().flat_map(|a| a.vars()) {
        push_unique(&mut cons_vars, v);
    }
    let shared: Vec<String> = cond_vars.iter().filter(|v| cons_vars.contains(v)).cloned().collect();
    let mut cond_only: Vec<String> = cond_vars.iter().filter(|v| !shared.contains(v)).cloned().collect();
    for v in &rule.declared {
        if !shared.contains(v) {
            push_unique(&mut cond_only, v);
        }
    }
    let cons_only: Vec<String> = cons_vars.iter().filter(|v| !cond_vars.contains(v)).cloned().collect();
    let antecedent = quantify(true, cond_only, groups.formula(NOW, &rule.conditions));
    let consequent = quantify(true, cons_only, atoms_formula(&rule.consequences));
    Ok(Formula::always(
        Interval::FULL,
        quantify(false, shared, Formula::implies(antecedent, consequent)),
    ))
}

/// All-observable signature covering the atoms of `rules`, with sorts taken from
/// constant arguments (string where only variables occur).
pub fn derive_signature(rules: &[ReifiedRule]) -> Signature {
    let mut schemas: BTreeMap<String, Vec<Sort>> = BTreeMap::new();
    for a in rules.iter().flat_map(|r| r.conditions.iter().chain(r.consequences.iter())) {
        let sorts = schemas.entry(a.name.clone()).or_insert_with(|| vec![Sort::Str; a.args.len()]);
        for (s, t) in sorts.iter_mut().zip(&a.args) {
            if let Term::Const(c) = t {
                *s = c.sort();
            }
        }
    }
    let mut sig = Signature::new();
    for (name, sorts) in schemas {
        let _ = sig.insert(EventSchema {
            params: sorts.into_iter().enumerate().map(|(k, s)| (format!("a{k}"), s)).collect(),
            name,
            capabilities: Capabilities::OBSERVABLE,
            doc: String::new(),
        });
    }
    sig
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvertedRule {
    pub label: String,
    pub formula: Formula,
    pub warnings: Vec<Warning>,
    /// Problems found against the supplied signature; empty when it typechecks.
    pub type_errors: Vec<TypeError>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleFailure {
    pub label: Option<String>,
    pub error: RioError,
}

/// Converts every rule of a file; failures are reported per rule.
pub fn convert_file(text: &str, sig: Option<&Signature>) -> Result<Vec<Result<ConvertedRule, RuleFailure>>, SyntaxError> {
    let parsed = parse_rio_lenient(text)?;
    let good: Vec<ReifiedRule> = parsed.iter().filter_map(|r| r.as_ref().ok().cloned()).collect();
    let derived;
    let sig = match sig {
        Some(s) => s,
        None => {
            derived = derive_signature(&good);
            &derived
        }
    };
    Ok(parsed
        .into_iter()
        .map(|r| {
            let rule = r.map_err(|error| RuleFailure { label: None, error })?;
            let formula = convert(&rule).map_err(|error| RuleFailure {
                label: Some(rule.label.clone()),
                error,
            })?;
            Ok(ConvertedRule {
                label: rule.label,
                warnings: lint(&formula),
                type_errors: typecheck(&formula, sig).err().unwrap_or_default(),
                formula,
            })
        })
        .collect())
}
