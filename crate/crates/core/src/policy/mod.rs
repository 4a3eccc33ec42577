//! Formulae, signatures and capabilities, with the keyword concrete syntax.

mod ast;
mod lint;
mod parser;
mod printer;
mod signature;
mod typecheck;

pub use ast::{Formula, Interval, Path, Sort, Term, Value};
pub use lint::{lint, lint_with, LintConfig, Warning};
pub use parser::{parse_policy, parse_policy_spanned, ParseError, SpanMap};
pub use printer::pretty_print;
pub use signature::{parse_signature, Capabilities, EventSchema, Signature, SignatureError};
pub use typecheck::{typecheck, typecheck_open, TypeError, TypedFormula};

pub(crate) use parser::{parse_term, parse_terms};
