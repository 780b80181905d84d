//! Run manifests: every file-producing subcommand writes `manifest.json`
//! describing its inputs, the exact flag values it ran with, and the
//! files it produced, so a run can be replayed byte-for-byte.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<String>,
    /// Flag values echoed as strings, keyed by flag name.
    pub flags: BTreeMap<String, String>,
    pub version: String,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hit_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, inputs: Vec<String>) -> Self {
        RunManifest {
            command: command.to_string(),
            inputs,
            flags: BTreeMap::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_seconds: 0.0,
            outputs: Vec::new(),
            hit_fraction: None,
            warnings: Vec::new(),
        }
    }

    pub fn flag(&mut self, name: &str, value: impl ToString) {
        self.flags.insert(name.to_string(), value.to_string());
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}
