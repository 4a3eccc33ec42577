use std::collections::BTreeMap;

use mfotl_core::converter::{convert, derive_signature, parse_rio};
use mfotl_core::policy::{parse_policy, pretty_print, typecheck, Formula};
use proptest::prelude::*;

/// A rule with past time variables `t1..tk` arranged in a tree below `now`.
#[derive(Debug, Clone)]
struct Rule {
    parents: Vec<usize>,
    conditions: Vec<(String, usize)>,
    consequences: Vec<String>,
}

impl Rule {
    fn tvar(k: usize) -> String {
        if k == 0 { "now".into() } else { format!("t{k}") }
    }

    fn depth(&self, k: usize) -> usize {
        if k == 0 { 0 } else { 1 + self.depth(self.parents[k - 1]) }
    }

    fn text(&self) -> String {
        let mut items: Vec<String> = self
            .conditions
            .iter()
            .map(|(atom, t)| format!("{atom}@{}", Self::tvar(*t)))
            .collect();
        for (k, p) in self.parents.iter().enumerate() {
            items.push(format!("before({}, {})", Self::tvar(k + 1), Self::tvar(*p)));
        }
        format!("rule r {{ if: {}; then: {} }}", items.join(", "), self.consequences.join(", "))
    }
}

fn atom() -> impl Strategy<Value = String> {
    let term = prop_oneof![
        4 => prop::sample::select(vec!["x", "y", "z"]).prop_map(String::from),
        1 => Just("\"k\"".to_string()),
    ];
    (prop::sample::select(vec![("a", 1usize), ("b", 2), ("c", 1)]), prop::collection::vec(term, 2))
        .prop_map(|((name, n), args)| format!("{name}({})", args[..n].join(", ")))
}

fn rule() -> impl Strategy<Value = Rule> {
    (0usize..4)
        .prop_flat_map(|k| {
            let parents: Vec<BoxedStrategy<usize>> = (0..k).map(|i| (0..=i).boxed()).collect();
            (
                parents,
                prop::collection::vec((atom(), 0..=k), 1..6),
                prop::collection::vec(
                    prop::sample::select(vec!["d(x)", "d(w)", "e(y, w)", "e(x, z)"]).prop_map(String::from),
                    1..3,
                ),
            )
        })
        .prop_map(|(parents, conditions, consequences)| Rule {
            parents,
            conditions,
            consequences,
        })
}

/// Atom occurrences with the number of `ONCE` operators above each.
fn placed(f: &Formula, depth: usize, out: &mut BTreeMap<(String, usize), usize>) {
    match f {
        Formula::Pred(..) => *out.entry((pretty_print(f), depth)).or_default() += 1,
        Formula::Once(_, a) => placed(a, depth + 1, out),
        other => other.children().into_iter().for_each(|c| placed(c, depth, out)),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn converted_rules_are_closed_and_well_typed(r in rule()) {
        let rules = parse_rio(&r.text()).unwrap();
        let f = convert(&rules[0]).unwrap();
        prop_assert!(f.free_vars().is_empty(), "{}", pretty_print(&f));
        prop_assert!(typecheck(&f, &derive_signature(&rules)).is_ok(), "{}", pretty_print(&f));
        prop_assert_eq!(parse_policy(&pretty_print(&f)).unwrap(), f);
    }

    #[test]
    fn each_atom_lands_once_under_its_time_depth(r in rule()) {
        let rules = parse_rio(&r.text()).unwrap();
        let f = convert(&rules[0]).unwrap();
        let mut got = BTreeMap::new();
        placed(&f, 0, &mut got);
        let mut want = BTreeMap::new();
        for (atom, t) in &r.conditions {
            let p = pretty_print(&parse_policy(atom).unwrap());
            *want.entry((p, r.depth(*t))).or_default() += 1;
        }
        for atom in &r.consequences {
            let p = pretty_print(&parse_policy(atom).unwrap());
            *want.entry((p, 0)).or_default() += 1;
        }
        prop_assert_eq!(got, want, "{}", r.text());
    }
}
