use std::collections::HashMap;

use thiserror::Error;

use super::ast::{Formula, Interval, Path, Term, Value};
use crate::lex::{Cursor, Pos, SyntaxError, Tok};

pub(crate) const KEYWORDS: &[&str] = &[
    "TRUE",
    "FALSE",
    "NOT",
    "AND",
    "OR",
    "IMPLIES",
    "EXISTS",
    "FORALL",
    "PREVIOUS",
    "NEXT",
    "ONCE",
    "HISTORICALLY",
    "EVENTUALLY",
    "ALWAYS",
    "SINCE",
    "UNTIL",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("malformed interval at {pos}: lower bound {lo} exceeds upper bound {hi}")]
    Interval { pos: Pos, lo: u64, hi: u64 },
    #[error("duplicate quantified variable `{name}` at {pos}")]
    DuplicateVar { pos: Pos, name: String },
}

/// Source position of every subformula, keyed by [`Path`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SpanMap(HashMap<Path, Pos>);

impl SpanMap {
    pub fn get(&self, path: &Path) -> Option<Pos> {
        self.0.get(path).copied()
    }
}

struct Span {
    pos: Pos,
    children: Vec<Span>,
}

impl Span {
    fn flatten(self, path: Path, out: &mut HashMap<Path, Pos>) {
        out.insert(path.clone(), self.pos);
        for (i, c) in self.children.into_iter().enumerate() {
            c.flatten(path.child(i), out);
        }
    }
}

/// Parses a policy in the keyword syntax.
pub fn parse_policy(text: &str) -> Result<Formula, ParseError> {
    parse_policy_spanned(text).map(|(f, _)| f)
}

pub fn parse_policy_spanned(text: &str) -> Result<(Formula, SpanMap), ParseError> {
    let mut p = Parser {
        cur: Cursor::new(text)?,
    };
    let (f, span) = p.formula()?;
    if !p.cur.at_eof() {
        return Err(p
            .cur
            .error(&["`AND`", "`OR`", "`IMPLIES`", "`SINCE`", "`UNTIL`", "end of input"])
            .into());
    }
    let mut map = HashMap::new();
    span.flatten(Path::root(), &mut map);
    Ok((f, SpanMap(map)))
}

/// Parses a comma-separated argument list after the opening parenthesis has been consumed.
pub(crate) fn parse_terms(cur: &mut Cursor) -> Result<Vec<Term>, SyntaxError> {
    let mut args = Vec::new();
    if cur.eat_punct(')') {
        return Ok(args);
    }
    loop {
        args.push(parse_term(cur)?);
        if cur.eat_punct(')') {
            return Ok(args);
        }
        if !cur.eat_punct(',') {
            return Err(cur.error(&["`,`", "`)`"]));
        }
    }
}

pub(crate) fn parse_term(cur: &mut Cursor) -> Result<Term, SyntaxError> {
    match cur.peek().clone() {
        Tok::Ident(v) if !KEYWORDS.contains(&v.as_str()) => {
            cur.next();
            Ok(Term::Var(v))
        }
        Tok::Str(s) => {
            cur.next();
            Ok(Term::Const(Value::Str(s)))
        }
        Tok::Int(n) => {
            cur.next();
            Ok(Term::Const(Value::Int(n)))
        }
        _ => Err(cur.error(&["variable", "constant"])),
    }
}

struct Parser {
    cur: Cursor,
}

type Parsed = Result<(Formula, Span), ParseError>;

fn leaf(pos: Pos) -> Span {
    Span {
        pos,
        children: vec![],
    }
}

fn node(pos: Pos, children: Vec<Span>) -> Span {
    Span { pos, children }
}

impl Parser {
    fn formula(&mut self) -> Parsed {
        let pos = self.cur.pos();
        let (mut lhs, mut lspan) = self.implies()?;
        loop {
            let until = if self.cur.is_ident("SINCE") {
                false
            } else if self.cur.is_ident("UNTIL") {
                true
            } else {
                return Ok((lhs, lspan));
            };
            self.cur.next();
            let iv = self.interval()?;
            let (rhs, rspan) = self.implies()?;
            lhs = if until {
                Formula::Until(iv, Box::new(lhs), Box::new(rhs))
            } else {
                Formula::Since(iv, Box::new(lhs), Box::new(rhs))
            };
            lspan = node(pos, vec![lspan, rspan]);
        }
    }

    fn implies(&mut self) -> Parsed {
        let pos = self.cur.pos();
        let (lhs, lspan) = self.or()?;
        if self.cur.is_ident("IMPLIES") {
            self.cur.next();
            let (rhs, rspan) = self.implies()?;
            return Ok((Formula::implies(lhs, rhs), node(pos, vec![lspan, rspan])));
        }
        Ok((lhs, lspan))
    }

    fn or(&mut self) -> Parsed {
        let pos = self.cur.pos();
        let (mut lhs, mut lspan) = self.and()?;
        while self.cur.is_ident("OR") {
            self.cur.next();
            let (rhs, rspan) = self.and()?;
            lhs = Formula::or(lhs, rhs);
            lspan = node(pos, vec![lspan, rspan]);
        }
        Ok((lhs, lspan))
    }

    fn and(&mut self) -> Parsed {
        let pos = self.cur.pos();
        let (mut lhs, mut lspan) = self.unary()?;
        while self.cur.is_ident("AND") {
            self.cur.next();
            let (rhs, rspan) = self.unary()?;
            lhs = Formula::and(lhs, rhs);
            lspan = node(pos, vec![lspan, rspan]);
        }
        Ok((lhs, lspan))
    }

    fn unary(&mut self) -> Parsed {
        let pos = self.cur.pos();
        let kw = match self.cur.peek() {
            Tok::Ident(s) => s.clone(),
            _ => return self.primary(),
        };
        let temporal: Option<fn(Interval, Box<Formula>) -> Formula> = match kw.as_str() {
            "PREVIOUS" => Some(Formula::Prev),
            "NEXT" => Some(Formula::Next),
            "ONCE" => Some(Formula::Once),
            "HISTORICALLY" => Some(Formula::Historically),
            "EVENTUALLY" => Some(Formula::Eventually),
            "ALWAYS" => Some(Formula::Always),
            _ => None,
        };
        if let Some(ctor) = temporal {
            self.cur.next();
            let iv = self.interval()?;
            let (body, span) = self.unary()?;
            return Ok((ctor(iv, Box::new(body)), node(pos, vec![span])));
        }
        match kw.as_str() {
            "NOT" => {
                self.cur.next();
                let (body, span) = self.unary()?;
                Ok((Formula::not(body), node(pos, vec![span])))
            }
            "EXISTS" | "FORALL" => {
                self.cur.next();
                let mut vars: Vec<String> = Vec::new();
                loop {
                    let vpos = self.cur.pos();
                    let v = match self.cur.peek().clone() {
                        Tok::Ident(v) if !KEYWORDS.contains(&v.as_str()) => v,
                        _ => return Err(self.cur.error(&["variable"]).into()),
                    };
                    self.cur.next();
                    if vars.contains(&v) {
                        return Err(ParseError::DuplicateVar { pos: vpos, name: v });
                    }
                    vars.push(v);
                    if !self.cur.eat_punct(',') {
                        break;
                    }
                }
                self.cur.expect_punct('.')?;
                let (body, span) = self.formula()?;
                let f = if kw == "EXISTS" {
                    Formula::Exists(vars, Box::new(body))
                } else {
                    Formula::Forall(vars, Box::new(body))
                };
                Ok((f, node(pos, vec![span])))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Parsed {
        let pos = self.cur.pos();
        match self.cur.peek().clone() {
            Tok::Punct('(') => {
                self.cur.next();
                let inner = self.formula()?;
                self.cur.expect_punct(')')?;
                Ok(inner)
            }
            Tok::Ident(s) if s == "TRUE" => {
                self.cur.next();
                Ok((Formula::True, leaf(pos)))
            }
            Tok::Ident(s) if s == "FALSE" => {
                self.cur.next();
                Ok((Formula::False, leaf(pos)))
            }
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                self.cur.next();
                self.cur.expect_punct('(')?;
                let args = parse_terms(&mut self.cur)?;
                Ok((Formula::Pred(name, args), leaf(pos)))
            }
            _ => Err(self
                .cur
                .error(&["`(`", "`TRUE`", "`FALSE`", "`NOT`", "quantifier", "temporal operator", "event"])
                .into()),
        }
    }

    /// Optional `[lo,hi]`, `[lo,*]` or `[lo,*)`; absent means `[0,*]`.
    fn interval(&mut self) -> Result<Interval, ParseError> {
        let pos = self.cur.pos();
        if !self.cur.eat_punct('[') {
            return Ok(Interval::FULL);
        }
        let lo = self.bound()?;
        self.cur.expect_punct(',')?;
        let hi = if self.cur.eat_punct('*') {
            if !self.cur.eat_punct(']') && !self.cur.eat_punct(')') {
                return Err(self.cur.error(&["`]`", "`)`"]).into());
            }
            None
        } else {
            let h = self.bound()?;
            self.cur.expect_punct(']')?;
            Some(h)
        };
        Interval::new(lo, hi).ok_or(ParseError::Interval {
            pos,
            lo,
            hi: hi.unwrap_or(0),
        })
    }

    fn bound(&mut self) -> Result<u64, ParseError> {
        match self.cur.peek().clone() {
            Tok::Int(n) if n >= 0 => {
                self.cur.next();
                Ok(n as u64)
            }
            _ => Err(self.cur.error(&["non-negative integer"]).into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(name: &str, vars: &[&str]) -> Formula {
        Formula::pred(name, vars.iter().map(|v| Term::var(*v)).collect())
    }

    #[test]
    fn phi1() {
        let f = parse_policy(
            "ALWAYS (FORALL a,d,u,p. uses(a,d,u,p) IMPLIES ONCE consent(u,a,p))",
        )
        .unwrap();
        let expected = Formula::always(
            Interval::FULL,
            Formula::forall(
                ["a", "d", "u", "p"],
                Formula::implies(
                    p("uses", &["a", "d", "u", "p"]),
                    Formula::once(Interval::FULL, p("consent", &["u", "a", "p"])),
                ),
            ),
        );
        assert_eq!(f, expected);
    }

    #[test]
    fn constants_and_intervals() {
        assert_eq!(parse_policy("TRUE").unwrap(), Formula::True);
        let f = parse_policy("ONCE [2,5] e()").unwrap();
        assert_eq!(
            f,
            Formula::once(Interval::bounded(2, 5).unwrap(), Formula::pred("e", vec![]))
        );
        let f = parse_policy("EVENTUALLY [3,*) e(\"a\", 4)").unwrap();
        assert_eq!(
            f,
            Formula::eventually(
                Interval::new(3, None).unwrap(),
                Formula::pred("e", vec![Term::Const("a".into()), Term::Const(4.into())])
            )
        );
    }

    #[test]
    fn precedence() {
        let f = parse_policy("NOT a() AND b() OR c() IMPLIES d() IMPLIES e()").unwrap();
        let a = Formula::pred("a", vec![]);
        let b = Formula::pred("b", vec![]);
        let c = Formula::pred("c", vec![]);
        let d = Formula::pred("d", vec![]);
        let e = Formula::pred("e", vec![]);
        let expected = Formula::implies(
            Formula::or(Formula::and(Formula::not(a), b), c),
            Formula::implies(d, e),
        );
        assert_eq!(f, expected);

        let g = parse_policy("a() SINCE b() OR c()").unwrap();
        assert!(matches!(g, Formula::Since(_, _, ref r) if matches!(**r, Formula::Or(..))));
    }

    #[test]
    fn quantifier_extends_right() {
        let f = parse_policy("a() AND EXISTS x. b(x) OR c(x)").unwrap();
        let Formula::And(_, rhs) = f else { panic!() };
        assert!(matches!(*rhs, Formula::Exists(_, ref body) if matches!(**body, Formula::Or(..))));
    }

    #[test]
    fn malformed_interval() {
        let err = parse_policy("ONCE [5,2] e()").unwrap_err();
        assert!(matches!(err, ParseError::Interval { lo: 5, hi: 2, .. }));
    }

    #[test]
    fn syntax_error_location() {
        let err = parse_policy("ALWAYS (\n  uses(a,) )").unwrap_err();
        let ParseError::Syntax(e) = err else { panic!("{err:?}") };
        assert_eq!((e.pos.line, e.pos.col), (2, 10));
        assert!(e.expected.iter().any(|x| x.contains("variable")));
    }

    #[test]
    fn duplicate_quantified_variable() {
        assert!(matches!(
            parse_policy("EXISTS x, x. e(x)"),
            Err(ParseError::DuplicateVar { .. })
        ));
    }

    #[test]
    fn spans_track_subformulae() {
        let (_, spans) = parse_policy_spanned("ALWAYS\n  (e() AND f())").unwrap();
        assert_eq!(spans.get(&Path(vec![0, 1])), Some(Pos { line: 2, col: 12 }));
    }
}
