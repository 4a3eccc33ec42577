//! Bundled policies, ontologies and system scripts for the consent and GDPR Art. 7(1)
//! examples.
//!
//! The files are embedded in the library and checked against the SHA-256 sums recorded
//! in `index.json` when loaded. [`export`] writes them to a directory.
//!
//! ```
//! let entries = mfotl_core::corpus::load_corpus().unwrap();
//! let v4 = entries.iter().find(|e| e.id == "art7-1-v4").unwrap();
//! assert!(v4.typed().is_ok());
//! ```

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::enforceability::Enforceability;
use crate::log::{parse_log, Event, Log};
use crate::policy::{parse_policy, parse_signature, typecheck, Formula, Signature, TypeError, TypedFormula};

const FILES: &[(&str, &str)] = &[
    ("index.json", include_str!("../corpus/index.json")),
    ("corpus.sig", include_str!("../corpus/corpus.sig")),
    ("corpus-observable.sig", include_str!("../corpus/corpus-observable.sig")),
    ("dapreco.sig", include_str!("../corpus/dapreco.sig")),
    ("phi1.mfotl", include_str!("../corpus/phi1.mfotl")),
    ("art7-1-dapreco.mfotl", include_str!("../corpus/art7-1-dapreco.mfotl")),
    ("art7-1-v2.mfotl", include_str!("../corpus/art7-1-v2.mfotl")),
    ("art7-1-v3.mfotl", include_str!("../corpus/art7-1-v3.mfotl")),
    ("art7-1-v4.mfotl", include_str!("../corpus/art7-1-v4.mfotl")),
    ("art7-1.rio", include_str!("../corpus/art7-1.rio")),
    ("scenarios/consent-then-use.log", include_str!("../corpus/scenarios/consent-then-use.log")),
    ("scenarios/use-without-consent.log", include_str!("../corpus/scenarios/use-without-consent.log")),
    ("scenarios/empty.log", include_str!("../corpus/scenarios/empty.log")),
    (
        "scenarios/processing-with-consent.log",
        include_str!("../corpus/scenarios/processing-with-consent.log"),
    ),
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusError {
    #[error("corpus file `{0}` does not match its recorded checksum")]
    Checksum(String),
    #[error("corpus file `{0}` is missing")]
    Missing(String),
    #[error("corpus manifest is invalid: {0}")]
    Manifest(String),
    #[error("corpus file `{file}` is invalid: {message}")]
    Invalid { file: String, message: String },
    #[error("unknown corpus entry `{0}`")]
    UnknownEntry(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
}

#[derive(Deserialize)]
struct Manifest {
    entries: Vec<EntryMeta>,
    scenarios: Vec<ScenarioMeta>,
    rules: Vec<String>,
    sha256: std::collections::BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct EntryMeta {
    id: String,
    policy: String,
    signature: String,
    provenance: String,
    expected_verdict: String,
    flaws: Option<String>,
}

#[derive(Deserialize)]
struct ScenarioMeta {
    name: String,
    file: String,
    signature: String,
}

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub id: String,
    /// The policy exactly as stored; may have free variables.
    pub policy: Formula,
    pub policy_file: String,
    pub signature: Signature,
    pub signature_file: String,
    pub provenance: String,
    /// Enforceability of the closed policy under the signature's capabilities.
    pub expected_verdict: Enforceability,
    /// Deliberate defects kept for lint and typecheck fixtures.
    pub flaws: Option<String>,
}

impl CorpusEntry {
    /// The policy with free variables universally quantified under `ALWAYS`.
    pub fn closed(&self) -> Formula {
        self.policy.universal_closure()
    }

    /// Typechecks the closed policy.
    pub fn typed(&self) -> Result<TypedFormula, Vec<TypeError>> {
        typecheck(&self.closed(), &self.signature)
    }
}

/// A scripted system: the time-points it proposes, in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub name: String,
    pub signature_file: String,
    pub steps: Vec<(u64, Vec<Event>)>,
}

impl Scenario {
    pub fn from_log(name: impl Into<String>, signature_file: impl Into<String>, log: &Log) -> Self {
        Scenario {
            name: name.into(),
            signature_file: signature_file.into(),
            steps: log
                .points()
                .iter()
                .map(|p| (p.ts, p.events.iter().cloned().collect()))
                .collect(),
        }
    }
}

/// Raw content of a bundled file, by relative path.
pub fn file(name: &str) -> Option<&'static str> {
    FILES.iter().find(|(n, _)| *n == name).map(|(_, c)| *c)
}

fn manifest() -> Result<Manifest, CorpusError> {
    let m: Manifest = serde_json::from_str(file("index.json").expect("embedded"))
        .map_err(|e| CorpusError::Manifest(e.to_string()))?;
    verify(&m, |name| file(name).map(|s| s.as_bytes().to_vec()))?;
    Ok(m)
}

fn verify(m: &Manifest, read: impl Fn(&str) -> Option<Vec<u8>>) -> Result<(), CorpusError> {
    for (name, sum) in &m.sha256 {
        let bytes = read(name).ok_or_else(|| CorpusError::Missing(name.clone()))?;
        if hex::encode(Sha256::digest(&bytes)) != *sum {
            return Err(CorpusError::Checksum(name.clone()));
        }
    }
    Ok(())
}

fn signature(name: &str) -> Result<Signature, CorpusError> {
    let text = file(name).ok_or_else(|| CorpusError::Missing(name.into()))?;
    parse_signature(text).map_err(|e| CorpusError::Invalid {
        file: name.into(),
        message: e.to_string(),
    })
}

/// Every bundled policy with its signature.
pub fn load_corpus() -> Result<Vec<CorpusEntry>, CorpusError> {
    let m = manifest()?;
    m.entries.iter().map(load_meta).collect()
}

fn load_meta(e: &EntryMeta) -> Result<CorpusEntry, CorpusError> {
    let invalid = |message: String| CorpusError::Invalid {
        file: e.policy.clone(),
        message,
    };
    let text = file(&e.policy).ok_or_else(|| CorpusError::Missing(e.policy.clone()))?;
    let policy = parse_policy(text).map_err(|err| invalid(err.to_string()))?;
    let expected_verdict = match e.expected_verdict.as_str() {
        "transparent" => Enforceability::Transparent,
        "enforceable-only" => Enforceability::EnforceableOnly,
        "not-enforceable" => Enforceability::NotEnforceable,
        other => return Err(CorpusError::Manifest(format!("unknown verdict `{other}`"))),
    };
    Ok(CorpusEntry {
        id: e.id.clone(),
        policy,
        policy_file: e.policy.clone(),
        signature: signature(&e.signature)?,
        signature_file: e.signature.clone(),
        provenance: e.provenance.clone(),
        expected_verdict,
        flaws: e.flaws.clone(),
    })
}

/// One corpus entry by id.
pub fn load_entry(id: &str) -> Result<CorpusEntry, CorpusError> {
    let m = manifest()?;
    let e = m
        .entries
        .iter()
        .find(|e| e.id == id)
        .ok_or_else(|| CorpusError::UnknownEntry(id.into()))?;
    load_meta(e)
}

pub fn scenario_names() -> Vec<String> {
    manifest()
        .map(|m| m.scenarios.into_iter().map(|s| s.name).collect())
        .unwrap_or_default()
}

/// A bundled system script by name.
pub fn load_scenario(name: &str) -> Result<Scenario, CorpusError> {
    let m = manifest()?;
    let s = m
        .scenarios
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| CorpusError::UnknownScenario(name.into()))?;
    let sig = signature(&s.signature)?;
    let text = file(&s.file).ok_or_else(|| CorpusError::Missing(s.file.clone()))?;
    let log = parse_log(text, &sig).map_err(|e| CorpusError::Invalid {
        file: s.file.clone(),
        message: e.to_string(),
    })?;
    Ok(Scenario::from_log(name, s.signature.clone(), &log))
}

/// Bundled `.rio` rule files, by name.
pub fn rule_files() -> Vec<(String, &'static str)> {
    manifest()
        .map(|m| {
            m.rules
                .into_iter()
                .filter_map(|r| file(&r).map(|c| (r, c)))
                .collect()
        })
        .unwrap_or_default()
}

/// Writes every bundled file under `dir`, returning the paths written.
pub fn export(dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for (name, content) in FILES {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, content)?;
        out.push(path);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enforceability::{analyze, CapabilityMap};
    use crate::policy::lint;

    #[test]
    fn checksums_match() {
        assert!(manifest().is_ok());
    }

    #[test]
    fn corrupt_file_detected() {
        let m: Manifest = serde_json::from_str(file("index.json").unwrap()).unwrap();
        let err = verify(&m, |name| {
            let mut b = file(name)?.as_bytes().to_vec();
            if name == "phi1.mfotl" {
                b.push(b' ');
            }
            Some(b)
        });
        assert_eq!(err, Err(CorpusError::Checksum("phi1.mfotl".into())));
    }

    #[test]
    fn entries_check_against_expected_verdicts() {
        let entries = load_corpus().unwrap();
        assert_eq!(entries.len(), 5);
        for e in &entries {
            let typed = e.typed().unwrap_or_else(|err| panic!("{}: {err:?}", e.id));
            let report = analyze(&typed, &CapabilityMap::from(&e.signature));
            assert_eq!(report.verdict, e.expected_verdict, "{}", e.id);
            assert_eq!(lint(&e.policy).is_empty(), e.flaws.is_none(), "{}", e.id);
        }
    }

    #[test]
    fn verbatim_entries_are_open() {
        for id in ["art7-1-dapreco", "art7-1-v2", "art7-1-v3"] {
            let e = load_entry(id).unwrap();
            let fv: Vec<String> = e.policy.free_vars().into_iter().collect();
            assert_eq!(fv, vec!["ehc", "y"], "{id}");
        }
        assert!(load_entry("art7-1-v4").unwrap().policy.free_vars().is_empty());
    }

    #[test]
    fn scenarios() {
        let s = load_scenario("consent-then-use").unwrap();
        assert_eq!(s.steps.len(), 2);
        assert_eq!(s.steps[0].0, 1);
        assert!(load_scenario("empty").unwrap().steps.is_empty());
        assert_eq!(load_scenario("use-without-consent").unwrap().steps.len(), 1);
        assert!(matches!(load_scenario("nope"), Err(CorpusError::UnknownScenario(_))));
        assert_eq!(scenario_names().len(), 4);
    }
}
