use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::{write_quoted, Sort};
use crate::lex::{Cursor, Pos, SyntaxError, Tok};

/// What the enforcer can do with an event.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Capabilities {
    pub observable: bool,
    pub causable: bool,
    pub suppressable: bool,
}

impl Capabilities {
    pub const OBSERVABLE: Capabilities = Capabilities {
        observable: true,
        causable: false,
        suppressable: false,
    };

    pub fn with_causable(mut self) -> Self {
        self.causable = true;
        self
    }

    pub fn with_suppressable(mut self) -> Self {
        self.suppressable = true;
        self
    }

    /// Union of two capability sets.
    pub fn union(self, other: Capabilities) -> Self {
        Capabilities {
            observable: self.observable || other.observable,
            causable: self.causable || other.causable,
            suppressable: self.suppressable || other.suppressable,
        }
    }

    pub fn is_subset_of(&self, other: &Capabilities) -> bool {
        (!self.observable || other.observable)
            && (!self.causable || other.causable)
            && (!self.suppressable || other.suppressable)
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.observable {
            v.push("observable");
        }
        if self.causable {
            v.push("causable");
        }
        if self.suppressable {
            v.push("suppressable");
        }
        v
    }
}

impl fmt::Display for Capabilities {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.names().join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventSchema {
    pub name: String,
    pub params: Vec<(String, Sort)>,
    pub capabilities: Capabilities,
    pub doc: String,
}

impl EventSchema {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn sorts(&self) -> impl Iterator<Item = Sort> + '_ {
        self.params.iter().map(|(_, s)| *s)
    }
}

impl fmt::Display for EventSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "event {}(", self.name)?;
        for (i, (n, s)) in self.params.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{n}: {s}")?;
        }
        write!(f, ") {}", self.capabilities)?;
        if !self.doc.is_empty() {
            f.write_str(" ")?;
            write_quoted(f, &self.doc)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SignatureError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("duplicate event `{name}` at {pos}")]
    DuplicateEvent { pos: Pos, name: String },
    #[error("duplicate parameter `{param}` in event `{event}` at {pos}")]
    DuplicateParam {
        pos: Pos,
        event: String,
        param: String,
    },
    #[error("event `{name}` at {pos} is {capability} but not observable")]
    NotObservable {
        pos: Pos,
        name: String,
        capability: &'static str,
    },
}

/// The ontology: event schemas keyed by name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Signature {
    schemas: BTreeMap<String, EventSchema>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a schema after checking the same invariants the parser enforces.
    pub fn insert(&mut self, schema: EventSchema) -> Result<(), SignatureError> {
        self.insert_at(schema, Pos::default())
    }

    fn insert_at(&mut self, schema: EventSchema, pos: Pos) -> Result<(), SignatureError> {
        if self.schemas.contains_key(&schema.name) {
            return Err(SignatureError::DuplicateEvent {
                pos,
                name: schema.name,
            });
        }
        for (i, (p, _)) in schema.params.iter().enumerate() {
            if schema.params[..i].iter().any(|(q, _)| q == p) {
                return Err(SignatureError::DuplicateParam {
                    pos,
                    event: schema.name.clone(),
                    param: p.clone(),
                });
            }
        }
        let caps = schema.capabilities;
        if !caps.observable && (caps.causable || caps.suppressable) {
            return Err(SignatureError::NotObservable {
                pos,
                name: schema.name,
                capability: if caps.causable { "causable" } else { "suppressable" },
            });
        }
        self.schemas.insert(schema.name.clone(), schema);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&EventSchema> {
        self.schemas.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &EventSchema> {
        self.schemas.values()
    }

    pub fn len(&self) -> usize {
        self.schemas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schemas.is_empty()
    }

    pub fn capabilities(&self, name: &str) -> Capabilities {
        self.get(name).map(|s| s.capabilities).unwrap_or_default()
    }

    /// A copy with the capabilities of `name` replaced.
    pub fn with_capabilities(&self, name: &str, caps: Capabilities) -> Signature {
        let mut out = self.clone();
        if let Some(s) = out.schemas.get_mut(name) {
            s.capabilities = caps;
        }
        out
    }

    /// A copy in which every event is merely observable.
    pub fn observable_only(&self) -> Signature {
        let mut out = self.clone();
        for s in out.schemas.values_mut() {
            s.capabilities = Capabilities::OBSERVABLE;
        }
        out
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in self.schemas.values() {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}

/// Parses a `.sig` file: one `event name(p: sort, ...) {caps} "doc"` declaration each.
pub fn parse_signature(text: &str) -> Result<Signature, SignatureError> {
    let mut cur = Cursor::new(text)?;
    let mut sig = Signature::new();
    while !cur.at_eof() {
        let pos = cur.pos();
        if !cur.is_ident("event") {
            return Err(cur.error(&["`event`"]).into());
        }
        cur.next();
        let name = cur.expect_ident("event name")?;
        cur.expect_punct('(')?;
        let mut params = Vec::new();
        if !cur.eat_punct(')') {
            loop {
                let p = cur.expect_ident("parameter name")?;
                cur.expect_punct(':')?;
                let sort = match cur.peek() {
                    Tok::Ident(s) if s == "string" => Sort::Str,
                    Tok::Ident(s) if s == "int" => Sort::Int,
                    _ => return Err(cur.error(&["`string`", "`int`"]).into()),
                };
                cur.next();
                params.push((p, sort));
                if cur.eat_punct(')') {
                    break;
                }
                cur.expect_punct(',')?;
            }
        }
        cur.expect_punct('{')?;
        let mut caps = Capabilities::default();
        if !cur.eat_punct('}') {
            loop {
                match cur.peek() {
                    Tok::Ident(s) if s == "observable" => caps.observable = true,
                    Tok::Ident(s) if s == "causable" => caps.causable = true,
                    Tok::Ident(s) if s == "suppressable" => caps.suppressable = true,
                    _ => {
                        return Err(cur
                            .error(&["`observable`", "`causable`", "`suppressable`"])
                            .into())
                    }
                }
                cur.next();
                if cur.eat_punct('}') {
                    break;
                }
                cur.expect_punct(',')?;
            }
        }
        let doc = match cur.peek() {
            Tok::Str(s) => {
                let s = s.clone();
                cur.next();
                s
            }
            _ => String::new(),
        };
        sig.insert_at(
            EventSchema {
                name,
                params,
                capabilities: caps,
                doc,
            },
            pos,
        )?;
    }
    Ok(sig)
}
