//! JSON instance files.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "mode": "sp",                       // np | sp | dp
//!   "fleet": {
//!     "speed": 80.0,                    // km/h
//!     "endurance": 40.0,                // minutes, one-way range
//!     "alpha": 0.1,                     // budget slack over K*
//!     "k_hard_cap": 200,                // optional
//!     "round_trip": false               // optional, default false
//!   },
//!   "priority": {
//!     "classes": 2,
//!     "weights": [0.7, 0.3],            // sum to 1
//!     "initial_values": [3.0, 0.0]      // a_r, dynamic priority only
//!   },
//!   "nodes": [
//!     {"id": 0, "coords": [12.1, 3.4], "lambda": 0.8, "class_probs": [0.4, 0.6]},
//!     {"id": 1, "coords": [2.0, 9.5], "lambda": 0.3, "fixed_class": 1}
//!   ],
//!   "facilities": [{"id": 0, "coords": [5.0, 5.0]}]
//! }
//! ```
//!
//! Travel times are not stored; they are recomputed from the coordinates.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DemandNode, Facility, FleetParams, Instance, Mode, PriorityParams};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub schema_version: u32,
    pub mode: Mode,
    pub fleet: FleetParams,
    pub priority: PriorityParams,
    pub nodes: Vec<DemandNode>,
    pub facilities: Vec<Facility>,
}

impl From<&Instance> for InstanceFile {
    fn from(inst: &Instance) -> Self {
        InstanceFile {
            schema_version: SCHEMA_VERSION,
            mode: inst.mode,
            fleet: inst.fleet.clone(),
            priority: inst.priority.clone(),
            nodes: inst.nodes.clone(),
            facilities: inst.facilities.clone(),
        }
    }
}

impl InstanceFile {
    pub fn into_instance(self) -> Result<Instance> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Validation(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        Instance::new(self.mode, self.nodes, self.facilities, self.fleet, self.priority)
    }
}

impl Instance {
    pub fn from_json_str(text: &str) -> Result<Instance> {
        let file: InstanceFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        file.into_instance()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&InstanceFile::from(self)).expect("instance serializes")
    }
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Instance::from_json_str(&text)
}

pub fn write_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = instance.to_json_string();
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Preset;

    #[test]
    fn round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        for preset in [Preset::SpPaper, Preset::DpPaper] {
            let inst = preset.generate(11).unwrap();
            let path = dir.path().join("inst.json");
            write_instance(&inst, &path).unwrap();
            assert_eq!(read_instance(&path).unwrap(), inst);
        }
    }

    #[test]
    fn missing_speed_names_the_field() {
        let text = r#"{
  "schema_version": 1,
  "mode": "np",
  "fleet": {"endurance": 40.0, "alpha": 0.1},
  "priority": {"classes": 1, "weights": [1.0]},
  "nodes": [{"id": 0, "coords": [0.0, 0.0], "lambda": 0.5}],
  "facilities": [{"id": 0, "coords": [1.0, 1.0]}]
}"#;
        let err = Instance::from_json_str(text).unwrap_err();
        match &err {
            Error::Parse { message, .. } => assert!(message.contains("speed"), "{message}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_probability_sum_is_a_validation_error() {
        let text = r#"{
  "schema_version": 1,
  "mode": "sp",
  "fleet": {"speed": 80.0, "endurance": 40.0, "alpha": 0.1},
  "priority": {"classes": 2, "weights": [0.7, 0.3]},
  "nodes": [{"id": 0, "coords": [0.0, 0.0], "lambda": 0.5, "class_probs": [0.5, 0.4]}],
  "facilities": [{"id": 0, "coords": [1.0, 1.0]}]
}"#;
        let err = Instance::from_json_str(text).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("class_probs must sum to 1"));
    }

    #[test]
    fn malformed_json_reports_line() {
        let err = Instance::from_json_str("{\n  \"schema_version\": 1,\n  oops\n}").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
