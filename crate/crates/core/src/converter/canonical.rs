use std::collections::BTreeSet;

use crate::policy::{pretty_print, Formula, Term};

/// Normal form for comparing policies up to presentation.
///
/// Free variables are closed by a `FORALL` under the top-level `ALWAYS`, unused quantified
/// variables are dropped, directly nested quantifiers of the same kind are merged,
/// conjunctions are flattened and sorted, and variables are renamed to `v0, v1, ...` in
/// order of first occurrence.
pub fn canonical(f: &Formula) -> Formula {
    let f = merge(&drop_unused(&f.universal_closure()));
    let f = sort_conj(&f, &|g| pretty_print(&rename(g, &mut |_| "_".to_string())));
    let mut order = Vec::new();
    first_occurrences(&f, &mut order);
    let index = |v: &str| order.iter().position(|x| x == v).unwrap_or(usize::MAX);
    let f = rename(&f, &mut |v| format!("v{}", index(v)));
    let f = sort_quantifiers(&f);
    sort_conj(&f, &pretty_print)
}

fn drop_unused(f: &Formula) -> Formula {
    let kids: Vec<Formula> = f.children().into_iter().map(drop_unused).collect();
    let g = f.with_children(kids);
    match &g {
        Formula::Exists(vs, body) | Formula::Forall(vs, body) => {
            let fv = body.free_vars();
            let used: Vec<String> = vs.iter().filter(|v| fv.contains(*v)).cloned().collect();
            if used.is_empty() {
                (**body).clone()
            } else if matches!(g, Formula::Exists(..)) {
                Formula::Exists(used, body.clone())
            } else {
                Formula::Forall(used, body.clone())
            }
        }
        _ => g,
    }
}

fn merge(f: &Formula) -> Formula {
    let kids: Vec<Formula> = f.children().into_iter().map(merge).collect();
    match f.with_children(kids) {
        Formula::Exists(mut vs, body) => match *body {
            Formula::Exists(ws, inner) => {
                vs.extend(ws);
                Formula::Exists(vs, inner)
            }
            b => Formula::Exists(vs, Box::new(b)),
        },
        Formula::Forall(mut vs, body) => match *body {
            Formula::Forall(ws, inner) => {
                vs.extend(ws);
                Formula::Forall(vs, inner)
            }
            b => Formula::Forall(vs, Box::new(b)),
        },
        g => g,
    }
}

fn conjuncts<'f>(f: &'f Formula, out: &mut Vec<&'f Formula>) {
    match f {
        Formula::And(a, b) => {
            conjuncts(a, out);
            conjuncts(b, out);
        }
        other => out.push(other),
    }
}

fn sort_conj(f: &Formula, key: &dyn Fn(&Formula) -> String) -> Formula {
    if let Formula::And(..) = f {
        let mut parts = Vec::new();
        conjuncts(f, &mut parts);
        let mut parts: Vec<Formula> = parts.into_iter().map(|p| sort_conj(p, key)).collect();
        parts.sort_by_cached_key(|p| key(p));
        return Formula::conj(parts);
    }
    let kids = f.children().into_iter().map(|c| sort_conj(c, key)).collect();
    f.with_children(kids)
}

fn first_occurrences(f: &Formula, order: &mut Vec<String>) {
    let add = |v: &str, order: &mut Vec<String>| {
        if !order.iter().any(|x| x == v) {
            order.push(v.to_string());
        }
    };
    match f {
        Formula::Pred(_, args) => {
            for v in args.iter().filter_map(Term::as_var) {
                add(v, order);
            }
        }
        Formula::Exists(vs, body) | Formula::Forall(vs, body) => {
            first_occurrences(body, order);
            for v in vs {
                add(v, order);
            }
        }
        other => {
            for c in other.children() {
                first_occurrences(c, order);
            }
        }
    }
}

fn rename(f: &Formula, map: &mut dyn FnMut(&str) -> String) -> Formula {
    match f {
        Formula::Pred(n, args) => Formula::Pred(
            n.clone(),
            args.iter()
                .map(|t| match t {
                    Term::Var(v) => Term::Var(map(v)),
                    c => c.clone(),
                })
                .collect(),
        ),
        Formula::Exists(vs, body) => {
            Formula::Exists(vs.iter().map(|v| map(v)).collect(), Box::new(rename(body, map)))
        }
        Formula::Forall(vs, body) => {
            Formula::Forall(vs.iter().map(|v| map(v)).collect(), Box::new(rename(body, map)))
        }
        other => {
            let kids = other.children().into_iter().map(|c| rename(c, map)).collect();
            other.with_children(kids)
        }
    }
}

fn sort_quantifiers(f: &Formula) -> Formula {
    let kids = f.children().into_iter().map(sort_quantifiers).collect();
    let num = |v: &String| v.trim_start_matches('v').parse::<usize>().unwrap_or(usize::MAX);
    match f.with_children(kids) {
        Formula::Exists(mut vs, b) => {
            vs.sort_by_key(num);
            Formula::Exists(dedup(vs), b)
        }
        Formula::Forall(mut vs, b) => {
            vs.sort_by_key(num);
            Formula::Forall(dedup(vs), b)
        }
        g => g,
    }
}

fn dedup(vs: Vec<String>) -> Vec<String> {
    let mut seen = BTreeSet::new();
    vs.into_iter().filter(|v| seen.insert(v.clone())).collect()
}
