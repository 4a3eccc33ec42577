use std::fmt;

use serde::Serialize;

use super::ast::{Formula, Path};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Warning {
    /// A quantified variable that never occurs in the quantifier's body.
    UnusedVariable { var: String, path: Path },
    /// An existential variable in an antecedent that occurs exactly once, so it joins nothing.
    SingletonExistential { var: String, path: Path },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::UnusedVariable { var, path } => {
                write!(f, "unused variable `{var}` (quantifier at {path})")
            }
            Warning::SingletonExistential { var, path } => write!(
                f,
                "existential variable `{var}` occurs only once in an antecedent (quantifier at {path})"
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LintConfig {
    pub singletons: bool,
}

impl Default for LintConfig {
    fn default() -> Self {
        LintConfig { singletons: true }
    }
}

pub fn lint(f: &Formula) -> Vec<Warning> {
    lint_with(f, LintConfig::default())
}

pub fn lint_with(f: &Formula, cfg: LintConfig) -> Vec<Warning> {
    let mut out = Vec::new();
    walk(f, Path::root(), false, cfg, &mut out);
    out
}

fn walk(f: &Formula, path: Path, antecedent: bool, cfg: LintConfig, out: &mut Vec<Warning>) {
    match f {
        Formula::Exists(vs, body) | Formula::Forall(vs, body) => {
            for v in vs {
                let n = body.occurrences(v);
                if n == 0 {
                    out.push(Warning::UnusedVariable {
                        var: v.clone(),
                        path: path.clone(),
                    });
                } else if n == 1 && cfg.singletons && antecedent && matches!(f, Formula::Exists(..))
                {
                    out.push(Warning::SingletonExistential {
                        var: v.clone(),
                        path: path.clone(),
                    });
                }
            }
            walk(body, path.child(0), antecedent, cfg, out);
        }
        Formula::Implies(a, b) => {
            walk(a, path.child(0), true, cfg, out);
            walk(b, path.child(1), antecedent, cfg, out);
        }
        other => {
            for (i, c) in other.children().into_iter().enumerate() {
                walk(c, path.child(i), antecedent, cfg, out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_policy;
    use super::*;

    #[test]
    fn unused_variable() {
        let w = lint(&parse_policy("EXISTS x,y. e(x)").unwrap());
        assert_eq!(
            w,
            vec![Warning::UnusedVariable {
                var: "y".into(),
                path: Path::root()
            }]
        );
    }

    #[test]
    fn phi1_is_clean() {
        let f = parse_policy("ALWAYS (FORALL a,d,u,p. uses(a,d,u,p) IMPLIES ONCE consent(u,a,p))")
            .unwrap();
        assert!(lint(&f).is_empty());
    }

    #[test]
    fn singleton_only_in_antecedents() {
        let f = parse_policy("(EXISTS x. e(x)) IMPLIES EXISTS y. f(y)").unwrap();
        let w = lint(&f);
        assert_eq!(
            w,
            vec![Warning::SingletonExistential {
                var: "x".into(),
                path: Path(vec![0])
            }]
        );
        assert!(lint_with(&f, LintConfig { singletons: false }).is_empty());
    }

    #[test]
    fn shadowed_occurrences_do_not_count() {
        let w = lint(&parse_policy("EXISTS x. EXISTS x. e(x)").unwrap());
        assert!(matches!(&w[..], [Warning::UnusedVariable { path, .. }] if path.0.is_empty()));
    }
}
