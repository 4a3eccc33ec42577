use mfotl_core::corpus::load_corpus;
use mfotl_core::log::{Log, TimePoint};
use mfotl_core::monitor::{evaluate, evaluate_in, ActiveDomain, Evaluator, Valuation};
use mfotl_core::policy::{typecheck_open, Formula, Interval, Value};
use mfotl_testkit::{gen, oracle};
use proptest::prelude::*;

fn all_valuations(f: &Formula, log: &Log) -> Vec<Valuation> {
    let typed = typecheck_open(f, &gen::small_signature()).unwrap();
    let dom = ActiveDomain::new(f, log);
    let vars: Vec<(String, Vec<Value>)> = f
        .free_vars()
        .into_iter()
        .map(|v| {
            let vals = dom.of(typed.sort_of(&v)).to_vec();
            (v, vals)
        })
        .collect();
    oracle::valuations(&vars)
}

fn eval(f: &Formula, log: &Log, i: usize, v: &Valuation) -> bool {
    evaluate(&typecheck_open(f, &gen::small_signature()).unwrap(), log, i, v).unwrap()
}

fn eval_in(f: &Formula, log: &Log, i: usize, v: &Valuation, dom: &ActiveDomain) -> bool {
    evaluate_in(&typecheck_open(f, &gen::small_signature()).unwrap(), log, i, v, dom).unwrap()
}

proptest! {
    #[test]
    fn evaluators_agree(f in gen::small_formula(5), log in gen::small_log(4)) {
        if let Err(d) = oracle::compare(&f, &log, &gen::small_signature()) {
            prop_assert!(false, "{:?}", d);
        }
    }

    #[test]
    fn past_only_prefix_invariance(f in gen::small_formula(4), log in gen::small_log(4), extra in gen::small_log(2)) {
        prop_assume!(!f.has_future());
        let mut longer = log.clone();
        let base = log.last_ts().unwrap_or(0);
        for p in extra.points() {
            longer.push(TimePoint::new(base + p.ts, p.events.clone())).unwrap();
        }
        let dom = ActiveDomain::new(&f, &longer);
        for i in 0..log.len() {
            for v in all_valuations(&f, &longer) {
                prop_assert_eq!(eval_in(&f, &log, i, &v, &dom), eval_in(&f, &longer, i, &v, &dom));
            }
        }
    }

    #[test]
    fn once_historically_duality(f in gen::small_formula(3), iv in gen::interval(3), log in gen::small_log(4)) {
        let lhs = Formula::not(Formula::once(iv, f.clone()));
        let rhs = Formula::Historically(iv, Box::new(Formula::not(f)));
        for i in 0..log.len() {
            for v in all_valuations(&lhs, &log) {
                prop_assert_eq!(eval(&lhs, &log, i, &v), eval(&rhs, &log, i, &v));
            }
        }
    }

    #[test]
    fn eventually_always_duality(f in gen::small_formula(3), iv in gen::interval(3), log in gen::small_log(4)) {
        let lhs = Formula::not(Formula::eventually(iv, f.clone()));
        let rhs = Formula::always(iv, Formula::not(f));
        for i in 0..log.len() {
            for v in all_valuations(&lhs, &log) {
                prop_assert_eq!(eval(&lhs, &log, i, &v), eval(&rhs, &log, i, &v));
            }
        }
    }

    #[test]
    fn once_interval_monotone(
        f in gen::small_formula(3),
        (a, b, da, db) in (0u64..3, 0u64..3, 0u64..3, prop::option::of(0u64..3)),
        log in gen::small_log(4),
    ) {
        let narrow = Interval::bounded(a, a + b).unwrap();
        let wide = Interval::new(a.saturating_sub(da), db.map(|d| a + b + d)).unwrap();
        prop_assert!(narrow.is_subset_of(&wide));
        let n = Formula::once(narrow, f.clone());
        let w = Formula::once(wide, f);
        for i in 0..log.len() {
            for v in all_valuations(&n, &log) {
                prop_assert!(!eval(&n, &log, i, &v) || eval(&w, &log, i, &v));
            }
        }
    }

    #[test]
    fn corpus_policies_domain_independent(seed in any::<u64>(), fresh in 1usize..=3) {
        for e in load_corpus().unwrap() {
            let typed = e.typed().unwrap();
            let script = mfotl_testkit::sample(gen::guided_script(&typed, &e.signature, 3, 4), 1, seed).next().unwrap();
            let log = Log::from_points(script.steps.iter().map(|(ts, evs)| TimePoint::new(*ts, evs.clone())).collect()).unwrap();
            let dom = ActiveDomain::new(typed.formula(), &log);
            let big = dom.extended((0..fresh).map(|k| Value::str(format!("fresh{k}"))));
            for i in 0..log.len() {
                let v = Valuation::new();
                let small = Evaluator::new(&log, &dom, typed.sorts()).holds(typed.formula(), i, &v).unwrap();
                let large = Evaluator::new(&log, &big, typed.sorts()).holds(typed.formula(), i, &v).unwrap();
                prop_assert_eq!(small, large, "{} at {}", e.id, i);
            }
        }
    }
}
