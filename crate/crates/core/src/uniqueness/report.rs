use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use crate::characteristics::CheckStatus;

/// A point where a verifier measured its worst (or first failing) margin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub label: String,
    pub s: Option<f64>,
    pub t: Option<f64>,
    pub value: f64,
}

impl Witness {
    pub fn new(label: impl Into<String>, s: Option<f64>, t: Option<f64>, value: f64) -> Self {
        Witness {
            label: label.into(),
            s,
            t,
            value,
        }
    }
}

/// One line of a verification report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifierEntry {
    pub name: String,
    pub status: CheckStatus,
    pub margin: Option<f64>,
    pub witnesses: Vec<Witness>,
    pub params: BTreeMap<String, Value>,
}

impl VerifierEntry {
    pub fn new(name: impl Into<String>, status: CheckStatus, margin: Option<f64>) -> Self {
        VerifierEntry {
            name: name.into(),
            status,
            margin: margin.filter(|m| m.is_finite()),
            witnesses: Vec::new(),
            params: BTreeMap::new(),
        }
    }

    pub fn error(name: impl Into<String>, message: impl Into<String>) -> Self {
        VerifierEntry::new(name, CheckStatus::Error, None).param("error", message.into())
    }

    pub fn param(mut self, key: &str, value: impl Into<Value>) -> Self {
        let v = value.into();
        // JSON has no infinities; keep them readable.
        let v = match v.as_f64() {
            Some(f) if !f.is_finite() => Value::String(f.to_string()),
            _ => v,
        };
        self.params.insert(key.to_string(), v);
        self
    }

    pub fn witness(mut self, w: Witness) -> Self {
        self.witnesses.push(w);
        self
    }

    /// Downgrade an asserted result to a reported one.
    pub fn informative(mut self) -> Self {
        if matches!(self.status, CheckStatus::Pass | CheckStatus::Fail) {
            self.status = CheckStatus::Informative;
        }
        self
    }
}

pub(crate) fn status(ok: bool) -> CheckStatus {
    if ok {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    }
}
