//! Proptest strategies.
//!
//! Two families: small well-typed formulae and logs over [`small_signature`] for
//! semantic checks, and syntactically wide ones for parse/print round-trips.

use std::collections::BTreeSet;

use mfotl_core::corpus::Scenario;
use mfotl_core::log::{Event, Log, TimePoint};
use mfotl_core::policy::{parse_signature, Formula, Interval, Signature, Sort, Term, TypedFormula, Value};
use proptest::prelude::*;
use proptest::sample::select;

/// `p(int)`, `q(int, string)`, `r(string)`, all observable, causable and suppressable.
pub fn small_signature() -> Signature {
    parse_signature(
        "event p(a: int) {observable, causable, suppressable}\n\
         event q(a: int, b: string) {observable, causable, suppressable}\n\
         event r(b: string) {observable, causable, suppressable}",
    )
    .expect("valid signature")
}

const INT_VARS: [&str; 2] = ["x", "y"];
const STR_VARS: [&str; 2] = ["u", "w"];
const INTS: [i64; 3] = [0, 1, 2];
const STRS: [&str; 3] = ["a", "b", "c"];

fn int_term() -> impl Strategy<Value = Term> {
    prop_oneof![
        select(&INT_VARS[..]).prop_map(Term::var),
        select(&INTS[..]).prop_map(|n| Term::Const(Value::Int(n))),
    ]
}

fn str_term() -> impl Strategy<Value = Term> {
    prop_oneof![
        select(&STR_VARS[..]).prop_map(Term::var),
        select(&STRS[..]).prop_map(|s| Term::Const(Value::str(s))),
    ]
}

fn small_atom() -> impl Strategy<Value = Formula> {
    prop_oneof![
        int_term().prop_map(|t| Formula::pred("p", vec![t])),
        (int_term(), str_term()).prop_map(|(a, b)| Formula::pred("q", vec![a, b])),
        str_term().prop_map(|t| Formula::pred("r", vec![t])),
        Just(Formula::True),
        Just(Formula::False),
    ]
}

/// Intervals with bounds up to `max`, a third of them unbounded.
pub fn interval(max: u64) -> impl Strategy<Value = Interval> {
    (0..=max, prop::option::weighted(0.67, 0..=max))
        .prop_map(|(lo, span)| Interval::new(lo, span.map(|s| lo + s)).expect("lo <= hi"))
}

fn bounded_interval(max: u64) -> impl Strategy<Value = Interval> {
    (0..=max, 0..=max).prop_map(|(lo, s)| Interval::bounded(lo, lo + s).expect("lo <= hi"))
}

fn small_var() -> impl Strategy<Value = String> {
    select(&["x", "y", "u", "w"][..]).prop_map(String::from)
}

fn unary(inner: BoxedStrategy<Formula>) -> BoxedStrategy<Formula> {
    let iv = || interval(3);
    prop_oneof![
        inner.clone().prop_map(Formula::not),
        (small_var(), inner.clone()).prop_map(|(v, f)| Formula::exists([v], f)),
        (small_var(), inner.clone()).prop_map(|(v, f)| Formula::forall([v], f)),
        (iv(), inner.clone()).prop_map(|(i, f)| Formula::Prev(i, Box::new(f))),
        (iv(), inner.clone()).prop_map(|(i, f)| Formula::Next(i, Box::new(f))),
        (iv(), inner.clone()).prop_map(|(i, f)| Formula::once(i, f)),
        (iv(), inner.clone()).prop_map(|(i, f)| Formula::Historically(i, Box::new(f))),
        (iv(), inner.clone()).prop_map(|(i, f)| Formula::eventually(i, f)),
        (iv(), inner).prop_map(|(i, f)| Formula::always(i, f)),
    ]
    .boxed()
}

fn binary(inner: BoxedStrategy<Formula>) -> BoxedStrategy<Formula> {
    let pair = || (inner.clone(), inner.clone());
    prop_oneof![
        pair().prop_map(|(a, b)| Formula::and(a, b)),
        pair().prop_map(|(a, b)| Formula::or(a, b)),
        pair().prop_map(|(a, b)| Formula::implies(a, b)),
        (interval(3), pair()).prop_map(|(i, (a, b))| Formula::Since(i, Box::new(a), Box::new(b))),
        (interval(3), pair()).prop_map(|(i, (a, b))| Formula::Until(i, Box::new(a), Box::new(b))),
    ]
    .boxed()
}

/// Well-typed formulae over [`small_signature`] with depth at most `depth`, possibly
/// open in `x, y` (int) and `u, w` (string).
pub fn small_formula(depth: u32) -> BoxedStrategy<Formula> {
    small_atom()
        .boxed()
        .prop_recursive(depth.saturating_sub(1), 48, 2, |inner| {
            prop_oneof![unary(inner.clone()), binary(inner)]
        })
        .boxed()
}

fn small_event() -> impl Strategy<Value = Event> {
    prop_oneof![
        select(&INTS[..]).prop_map(|n| Event::new("p", [Value::Int(n)])),
        (select(&INTS[..]), select(&STRS[..])).prop_map(|(n, s)| Event::new("q", [Value::Int(n), Value::str(s)])),
        select(&STRS[..]).prop_map(|s| Event::new("r", [Value::str(s)])),
    ]
}

fn points_to_log(steps: Vec<(u64, Vec<Event>)>) -> Log {
    let mut ts = 0;
    let points = steps
        .into_iter()
        .map(|(gap, evs)| {
            ts += gap;
            TimePoint::new(ts, evs)
        })
        .collect();
    Log::from_points(points).expect("monotone")
}

/// Logs over [`small_signature`] with at most `max_points` time-points and gaps of 0 to 2.
pub fn small_log(max_points: usize) -> impl Strategy<Value = Log> {
    prop::collection::vec((0u64..=2, prop::collection::vec(small_event(), 0..=3)), 0..=max_points)
        .prop_map(points_to_log)
}

/// Closed enforceable-shaped policies `ALWAYS ψ` over [`small_signature`] with
/// bounded future operators.
pub fn small_policy() -> BoxedStrategy<Formula> {
    let past = small_atom().boxed().prop_recursive(2, 16, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
            (interval(3), inner.clone()).prop_map(|(i, f)| Formula::once(i, f)),
            (bounded_interval(3), inner).prop_map(|(i, f)| Formula::eventually(i, f)),
        ]
    });
    (past.clone(), past)
        .prop_map(|(a, b)| {
            let body = Formula::implies(a, b);
            let fv: Vec<String> = body.free_vars().into_iter().collect();
            let body = if fv.is_empty() { body } else { Formula::forall(fv, body) };
            Formula::always(Interval::FULL, body)
        })
        .boxed()
}

const KEYWORDS: [&str; 16] = [
    "TRUE", "FALSE", "NOT", "AND", "OR", "IMPLIES", "EXISTS", "FORALL", "PREVIOUS", "NEXT", "ONCE",
    "HISTORICALLY", "EVENTUALLY", "ALWAYS", "SINCE", "UNTIL",
];

fn ident() -> impl Strategy<Value = String> {
    "[a-zA-Z][a-zA-Z0-9_]{0,6}".prop_filter("keyword", |s| !KEYWORDS.contains(&s.as_str()))
}

/// Any value: strings with quotes, escapes and non-ASCII text; the full `i64` range.
pub fn value() -> impl Strategy<Value = Value> {
    prop_oneof![
        any::<i64>().prop_map(Value::Int),
        "(\\PC|[\"\\\\\n\t\r]){0,8}".prop_map(Value::Str),
    ]
}

fn term() -> impl Strategy<Value = Term> {
    prop_oneof![ident().prop_map(Term::Var), value().prop_map(Term::Const)]
}

fn var_list() -> impl Strategy<Value = Vec<String>> {
    prop::collection::btree_set(ident(), 1..=3).prop_map(|s| s.into_iter().collect())
}

/// Syntactically arbitrary formulae, ignoring sorts and signatures.
pub fn any_formula() -> BoxedStrategy<Formula> {
    let leaf = prop_oneof![
        1 => Just(Formula::True),
        1 => Just(Formula::False),
        6 => (ident(), prop::collection::vec(term(), 0..=3)).prop_map(|(n, a)| Formula::Pred(n, a)),
    ];
    leaf.prop_recursive(6, 64, 2, |inner| {
        let b = |f: Formula| Box::new(f);
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(x, y)| Formula::and(x, y)),
            (inner.clone(), inner.clone()).prop_map(|(x, y)| Formula::or(x, y)),
            (inner.clone(), inner.clone()).prop_map(|(x, y)| Formula::implies(x, y)),
            (var_list(), inner.clone()).prop_map(move |(v, f)| Formula::Exists(v, b(f))),
            (var_list(), inner.clone()).prop_map(move |(v, f)| Formula::Forall(v, b(f))),
            (interval(100), inner.clone()).prop_map(move |(i, f)| Formula::Prev(i, b(f))),
            (interval(100), inner.clone()).prop_map(move |(i, f)| Formula::Next(i, b(f))),
            (interval(100), inner.clone()).prop_map(move |(i, f)| Formula::Once(i, b(f))),
            (interval(100), inner.clone()).prop_map(move |(i, f)| Formula::Historically(i, b(f))),
            (interval(100), inner.clone()).prop_map(move |(i, f)| Formula::Eventually(i, b(f))),
            (interval(100), inner.clone()).prop_map(move |(i, f)| Formula::Always(i, b(f))),
            (interval(100), inner.clone(), inner.clone()).prop_map(move |(i, x, y)| Formula::Since(i, b(x), b(y))),
            (interval(100), inner.clone(), inner).prop_map(move |(i, x, y)| Formula::Until(i, b(x), b(y))),
        ]
    })
    .boxed()
}

/// `e(s: string, n: int)`, `f(s: string)`, `g(a: int, b: int, s: string)`, `h()`.
pub fn wide_signature() -> Signature {
    parse_signature(
        "event e(s: string, n: int) {observable}\n\
         event f(s: string) {observable}\n\
         event g(a: int, b: int, s: string) {observable}\n\
         event h() {observable}",
    )
    .expect("valid signature")
}

fn str_value() -> impl Strategy<Value = Value> {
    "(\\PC|[\"\\\\\n\t\r]){0,8}".prop_map(Value::Str)
}

fn wide_event() -> impl Strategy<Value = Event> {
    let int = || any::<i64>().prop_map(Value::Int);
    prop_oneof![
        (str_value(), int()).prop_map(|(s, n)| Event::new("e", [s, n])),
        str_value().prop_map(|s| Event::new("f", [s])),
        (int(), int(), str_value()).prop_map(|(a, b, s)| Event::new("g", [a, b, s])),
        Just(Event::new("h", [])),
    ]
}

/// Logs over [`wide_signature`] with arbitrary strings, integers and large timestamps.
pub fn wide_log() -> impl Strategy<Value = Log> {
    (
        0u64..u64::MAX / 2,
        prop::collection::vec((0u64..1_000_000, prop::collection::vec(wide_event(), 0..=4)), 0..=6),
    )
        .prop_map(|(start, steps)| {
            let mut steps = steps;
            if let Some(first) = steps.first_mut() {
                first.0 += start;
            }
            points_to_log(steps)
        })
}

/// Scripts proposing events of `sig` with string arguments drawn from `d0, d1, ...`
/// (`domain` values) and integer arguments from `0..domain`.
pub fn script(sig: &Signature, domain: usize, max_points: usize) -> BoxedStrategy<Scenario> {
    let schemas: Vec<(String, Vec<Sort>)> = sig.iter().map(|s| (s.name.clone(), s.sorts().collect())).collect();
    let strs: Vec<Value> = (0..domain).map(|k| Value::str(format!("d{k}"))).collect();
    let ints: Vec<Value> = (0..domain as i64).map(Value::Int).collect();
    let event = select(schemas).prop_flat_map(move |(name, sorts)| {
        let args: Vec<BoxedStrategy<Value>> = sorts
            .iter()
            .map(|s| match s {
                Sort::Str => select(strs.clone()).boxed(),
                Sort::Int => select(ints.clone()).boxed(),
            })
            .collect();
        args.prop_map(move |a| Event::new(name.clone(), a))
    });
    prop::collection::vec(
        (0u64..=3, prop::collection::btree_set(event, 0..=4)),
        0..=max_points,
    )
    .prop_map(|steps| {
        let mut ts = 0;
        Scenario {
            name: "fuzz".into(),
            signature_file: String::new(),
            steps: steps
                .into_iter()
                .map(|(gap, evs): (u64, BTreeSet<Event>)| {
                    ts += gap;
                    (ts, evs.into_iter().collect())
                })
                .collect(),
        }
    })
    .boxed()
}

/// Scripts biased towards `policy`: each time-point instantiates a random subset of the
/// policy's atoms under one random valuation over `d0, d1, ...`, plus some unrelated
/// events from [`script`].
pub fn guided_script(policy: &TypedFormula, sig: &Signature, domain: usize, max_points: usize) -> BoxedStrategy<Scenario> {
    let mut atoms: Vec<(String, Vec<Term>)> = vec![];
    policy.formula().visit(&mut |f| {
        if let Formula::Pred(n, args) = f {
            if !atoms.iter().any(|(m, a)| m == n && a == args) {
                atoms.push((n.clone(), args.clone()));
            }
        }
    });
    let vars: Vec<(String, Sort)> = policy.sorts().iter().map(|(v, s)| (v.clone(), *s)).collect();
    let value = move |s: Sort, k: usize| match s {
        Sort::Str => Value::str(format!("d{k}")),
        Sort::Int => Value::Int(k as i64),
    };
    let n_atoms = atoms.len();
    let point = (
        prop::collection::vec(0..domain, vars.len()),
        prop::collection::vec(any::<bool>(), n_atoms),
    )
        .prop_map(move |(pick, keep)| {
            let env: Vec<(String, Value)> = vars.iter().zip(&pick).map(|((v, s), k)| (v.clone(), value(*s, *k))).collect();
            atoms
                .iter()
                .zip(&keep)
                .filter(|(_, k)| **k)
                .map(|((name, args), _)| {
                    let vals = args.iter().map(|t| match t {
                        Term::Var(v) => env.iter().find(|(x, _)| x == v).map(|(_, x)| x.clone()).expect("typed variable"),
                        Term::Const(c) => c.clone(),
                    });
                    Event::new(name.clone(), vals)
                })
                .collect::<Vec<Event>>()
        });
    (prop::collection::vec(point, max_points), script(sig, domain, max_points))
        .prop_map(|(guided, mut s)| {
            for ((_, evs), extra) in s.steps.iter_mut().zip(guided) {
                let mut all: BTreeSet<Event> = evs.drain(..).collect();
                all.extend(extra);
                evs.extend(all);
            }
            s
        })
        .boxed()
}
