use std::fmt::Write;

use super::ast::{Formula, Interval, Term};

// Binding strength, loosest first.
const SINCE: u8 = 0;
const IMPLIES: u8 = 1;
const OR: u8 = 2;
const AND: u8 = 3;
const UNARY: u8 = 4;

/// Renders a formula with the fewest parentheses that still re-parse to the same tree.
///
/// Default `[0,*]` intervals are omitted.
pub fn pretty_print(f: &Formula) -> String {
    let mut out = String::new();
    print(f, SINCE, true, &mut out);
    out
}

fn level(f: &Formula) -> u8 {
    use Formula::*;
    match f {
        Since(..) | Until(..) => SINCE,
        Implies(..) => IMPLIES,
        Or(..) => OR,
        And(..) => AND,
        _ => UNARY,
    }
}

fn write_interval(i: &Interval, out: &mut String) {
    if !i.is_full() {
        let _ = write!(out, " {i}");
    }
}

/// `tail` is true when nothing follows this subformula before the enclosing
/// parenthesis closes, so a quantifier body may extend to the end.
fn print(f: &Formula, min: u8, tail: bool, out: &mut String) {
    let quantifier = matches!(f, Formula::Exists(..) | Formula::Forall(..));
    let needs_parens = if quantifier { !tail } else { level(f) < min };
    if needs_parens {
        out.push('(');
        print(f, SINCE, true, out);
        out.push(')');
        return;
    }
    use Formula::*;
    match f {
        True => out.push_str("TRUE"),
        False => out.push_str("FALSE"),
        Pred(name, args) => {
            out.push_str(name);
            out.push('(');
            for (i, t) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let _ = match t {
                    Term::Var(v) => write!(out, "{v}"),
                    Term::Const(c) => write!(out, "{c}"),
                };
            }
            out.push(')');
        }
        Not(a) => {
            out.push_str("NOT ");
            print(a, UNARY, tail, out);
        }
        And(a, b) => binary(a, b, "AND", AND, UNARY, tail, out),
        Or(a, b) => binary(a, b, "OR", OR, AND, tail, out),
        Implies(a, b) => binary(a, b, "IMPLIES", OR, IMPLIES, tail, out),
        Since(i, a, b) | Until(i, a, b) => {
            print(a, SINCE, false, out);
            out.push_str(if matches!(f, Since(..)) { " SINCE" } else { " UNTIL" });
            write_interval(i, out);
            out.push(' ');
            print(b, IMPLIES, tail, out);
        }
        Exists(vs, body) | Forall(vs, body) => {
            out.push_str(if matches!(f, Exists(..)) { "EXISTS " } else { "FORALL " });
            out.push_str(&vs.join(", "));
            out.push_str(". ");
            print(body, SINCE, true, out);
        }
        Prev(i, a) | Next(i, a) | Once(i, a) | Historically(i, a) | Eventually(i, a)
        | Always(i, a) => {
            out.push_str(match f {
                Prev(..) => "PREVIOUS",
                Next(..) => "NEXT",
                Once(..) => "ONCE",
                Historically(..) => "HISTORICALLY",
                Eventually(..) => "EVENTUALLY",
                _ => "ALWAYS",
            });
            write_interval(i, out);
            out.push(' ');
            print(a, UNARY, tail, out);
        }
    }
}

fn binary(a: &Formula, b: &Formula, op: &str, lmin: u8, rmin: u8, tail: bool, out: &mut String) {
    print(a, lmin, false, out);
    out.push(' ');
    out.push_str(op);
    out.push(' ');
    print(b, rmin, tail, out);
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse_policy;
    use super::*;

    fn e(n: &str) -> Formula {
        Formula::pred(n, vec![])
    }

    #[test]
    fn default_interval_elided() {
        assert_eq!(pretty_print(&Formula::once(Interval::FULL, e("e"))), "ONCE e()");
        assert_eq!(
            pretty_print(&Formula::once(Interval::bounded(2, 5).unwrap(), e("e"))),
            "ONCE [2,5] e()"
        );
    }

    #[test]
    fn implies_chain_is_right_associated() {
        let f = Formula::implies(e("a"), Formula::implies(e("b"), e("c")));
        assert_eq!(pretty_print(&f), "a() IMPLIES b() IMPLIES c()");
        let g = Formula::implies(Formula::implies(e("a"), e("b")), e("c"));
        assert_eq!(pretty_print(&g), "(a() IMPLIES b()) IMPLIES c()");
        assert_eq!(parse_policy(&pretty_print(&g)).unwrap(), g);
    }

    #[test]
    fn quantifier_in_non_tail_position_is_parenthesized() {
        let f = Formula::implies(Formula::exists(["x"], e("a")), e("b"));
        assert_eq!(pretty_print(&f), "(EXISTS x. a()) IMPLIES b()");
        let g = Formula::and(Formula::not(Formula::exists(["x"], e("a"))), e("b"));
        assert_eq!(pretty_print(&g), "NOT (EXISTS x. a()) AND b()");
        assert_eq!(parse_policy(&pretty_print(&g)).unwrap(), g);
    }

    #[test]
    fn strings_are_escaped() {
        let f = Formula::pred("e", vec![Term::Const("a\"b\\".into())]);
        let s = pretty_print(&f);
        assert_eq!(s, r#"e("a\"b\\")"#);
        assert_eq!(parse_policy(&s).unwrap(), f);
    }
}
