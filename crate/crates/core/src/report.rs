//! Machine-readable run reports.
//!
//! Reports contain no wall-clock data unless timings are requested, so the
//! JSON for fixed inputs and seed is byte-identical across runs.

use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::ert::{ErtResult, Kind};
use crate::kernel::{State, XReal};

pub const SCHEMA: &str = "ertkit-report/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
    Inconclusive,
}

impl Status {
    /// 0 success, 1 a check failed, 3 inconclusive. Input errors (2) never
    /// produce a report.
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Failed => 1,
            Status::Inconclusive => 3,
        }
    }

    /// The worse of two statuses.
    pub fn and(self, o: Status) -> Status {
        match (self, o) {
            (Status::Failed, _) | (_, Status::Failed) => Status::Failed,
            (Status::Inconclusive, _) | (_, Status::Inconclusive) => Status::Inconclusive,
            _ => Status::Ok,
        }
    }
}

/// An `XReal` as an exact string plus its float approximation (`null` for
/// infinity).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Number {
    pub exact: String,
    pub float: Option<f64>,
}

impl From<&XReal> for Number {
    fn from(x: &XReal) -> Self {
        Number {
            exact: x.to_string(),
            float: (!x.is_infinite()).then(|| x.to_f64()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StateResult {
    pub state: State,
    pub value: Number,
    pub kind: Kind,
    pub evaluations: u64,
}

impl StateResult {
    pub fn new(state: &State, r: &ErtResult) -> Self {
        StateResult {
            state: state.clone(),
            value: Number::from(&r.value),
            kind: r.kind,
            evaluations: r.evaluations,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    pub tool: String,
    pub command: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub program_sha256: Option<String>,
    pub status: Status,
    pub results: Vec<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<String, f64>>,
}

impl RunReport {
    pub fn new(command: &[String]) -> Self {
        RunReport {
            schema: SCHEMA,
            tool: format!("ertkit {}", env!("CARGO_PKG_VERSION")),
            command: command.to_vec(),
            program_sha256: None,
            status: Status::Ok,
            results: Vec::new(),
            timings: None,
        }
    }

    pub fn program(mut self, source: &str) -> Self {
        self.program_sha256 = Some(sha256_hex(source));
        self
    }

    pub fn push(&mut self, status: Status, item: impl Serialize) {
        self.status = self.status.and(status);
        self.results.push(serde_json::to_value(item).expect("report items serialise"));
    }

    pub fn time(&mut self, label: &str, secs: f64) {
        self.timings.get_or_insert_with(BTreeMap::new).insert(label.to_string(), secs);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

pub fn sha256_hex(s: &str) -> String {
    Sha256::digest(s.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}
