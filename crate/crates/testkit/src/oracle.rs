//! Agreement between the reference and the relational evaluator.

use mfotl_core::log::Log;
use mfotl_core::monitor::{evaluate_in, ActiveDomain, Evaluator, Valuation};
use mfotl_core::policy::{typecheck_open, Formula, Signature, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Disagreement {
    pub formula: Formula,
    pub log: Log,
    pub index: usize,
    pub valuation: Valuation,
    pub reference: bool,
    pub relational: bool,
}

/// Every valuation of `vars` over the domain, sorted by `sort_of`.
pub fn valuations(vars: &[(String, Vec<Value>)]) -> Vec<Valuation> {
    let mut out = vec![Valuation::new()];
    for (v, vals) in vars {
        out = out
            .into_iter()
            .flat_map(|base| {
                vals.iter().map(move |x| {
                    let mut b = base.clone();
                    b.insert(v.clone(), x.clone());
                    b
                })
            })
            .collect();
    }
    out
}

/// Compares both evaluators on every time-point and every valuation of the free
/// variables. Returns the first disagreement.
pub fn compare(f: &Formula, log: &Log, sig: &Signature) -> Result<usize, Box<Disagreement>> {
    let typed = typecheck_open(f, sig).expect("generated formulae are well-typed");
    let dom = ActiveDomain::new(f, log);
    let vars: Vec<(String, Vec<Value>)> = f
        .free_vars()
        .into_iter()
        .map(|v| {
            let vals = dom.of(typed.sort_of(&v)).to_vec();
            (v, vals)
        })
        .collect();
    let vals = valuations(&vars);
    let mut ev = Evaluator::new(log, &dom, typed.sorts());
    let mut checks = 0;
    for i in 0..log.len() {
        for v in &vals {
            let reference = evaluate_in(&typed, log, i, v, &dom).expect("valid arguments");
            let relational = ev.holds(typed.formula(), i, v).expect("valid arguments");
            checks += 1;
            if reference != relational {
                return Err(Box::new(Disagreement {
                    formula: f.clone(),
                    log: log.clone(),
                    index: i,
                    valuation: v.clone(),
                    reference,
                    relational,
                }));
            }
        }
    }
    Ok(checks)
}
