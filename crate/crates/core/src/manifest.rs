//! Presence-condition manifest: the JSON document that decouples extraction
//! from generation. All downstream subcommands consume this format.
//!
//! ```json
//! {
//!   "vars": ["C4", "C5", "C6"],
//!   "feature_model": "true",
//!   "entries": [
//!     { "pc": "C4 || C5",
//!       "units": [ { "file": "b.c", "lines": [2] } ],
//!       "lcu_weight": 1,
//!       "absolute_weight": 1 }
//!   ]
//! }
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::{CodeUnit, PcEntry, PcMap};
use crate::formula::{parse_formula, PropFormula, VarTable};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestUnit {
    pub file: String,
    pub lines: Vec<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub pc: String,
    pub units: Vec<ManifestUnit>,
    pub lcu_weight: u64,
    pub absolute_weight: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub vars: Vec<String>,
    #[serde(default)]
    pub feature_model: Option<String>,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("invalid manifest JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid formula {text:?} in manifest: {message}")]
    Formula { text: String, message: String },
}

impl Manifest {
    pub fn from_pcmap(map: &PcMap) -> Manifest {
        Manifest {
            vars: map.vars.names().map(|s| s.to_string()).collect(),
            feature_model: Some(map.feature_model.print(&map.vars)),
            entries: map
                .entries
                .iter()
                .map(|e| ManifestEntry {
                    pc: e.pc.print(&map.vars),
                    units: e
                        .units
                        .iter()
                        .map(|u| ManifestUnit {
                            file: u.file.clone(),
                            lines: u.lines.clone(),
                        })
                        .collect(),
                    lcu_weight: e.lcu_weight,
                    absolute_weight: e.absolute_weight,
                })
                .collect(),
        }
    }

    pub fn to_pcmap(&self) -> Result<PcMap, ManifestError> {
        let mut vars = VarTable::new();
        for name in &self.vars {
            vars.intern(name);
        }
        let parse = |text: &str, vars: &mut VarTable| -> Result<PropFormula, ManifestError> {
            parse_formula(text, vars).map_err(|e| ManifestError::Formula {
                text: text.to_string(),
                message: e.to_string(),
            })
        };
        let feature_model = match &self.feature_model {
            Some(text) => parse(text, &mut vars)?,
            None => PropFormula::True,
        };
        let mut entries = Vec::with_capacity(self.entries.len());
        for entry in &self.entries {
            let pc = parse(&entry.pc, &mut vars)?;
            entries.push(PcEntry {
                pc,
                units: entry
                    .units
                    .iter()
                    .map(|u| CodeUnit {
                        file: u.file.clone(),
                        lines: u.lines.clone(),
                    })
                    .collect(),
                lcu_weight: entry.lcu_weight,
                absolute_weight: entry.absolute_weight,
            });
        }
        Ok(PcMap {
            entries,
            vars,
            feature_model,
        })
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Manifest, ManifestError> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::{build_pcmap, scan_str};
    use crate::formula::semantically_equal;

    #[test]
    fn manifest_round_trips_through_json() {
        let text = "#if A || B\nx();\n#endif\n#if A\ny();\nz();\n#endif\n";
        let mut vars = VarTable::new();
        let instances = scan_str(text, "m.c", &mut vars).unwrap();
        let map = build_pcmap(instances, PropFormula::True, vars);

        let manifest = Manifest::from_pcmap(&map);
        let json = manifest.to_json();
        let reloaded = Manifest::from_json(&json).unwrap();
        let map2 = reloaded.to_pcmap().unwrap();

        assert_eq!(map.entries.len(), map2.entries.len());
        for (a, b) in map.entries.iter().zip(&map2.entries) {
            assert!(semantically_equal(&a.pc, &b.pc, map.vars.len()));
            assert_eq!(a.units, b.units);
            assert_eq!(a.lcu_weight, b.lcu_weight);
            assert_eq!(a.absolute_weight, b.absolute_weight);
        }
        let names_a: Vec<&str> = map.vars.names().collect();
        let names_b: Vec<&str> = map2.vars.names().collect();
        assert_eq!(names_a, names_b);
    }

    #[test]
    fn missing_feature_model_defaults_to_true() {
        let json = r#"{ "vars": ["A"], "entries": [] }"#;
        let manifest = Manifest::from_json(json).unwrap();
        let map = manifest.to_pcmap().unwrap();
        assert_eq!(map.feature_model, PropFormula::True);
    }

    #[test]
    fn bad_formula_is_reported() {
        let json = r#"{ "vars": ["A"], "entries": [ { "pc": "A &&", "units": [], "lcu_weight": 0, "absolute_weight": 0 } ] }"#;
        let manifest = Manifest::from_json(json).unwrap();
        assert!(matches!(
            manifest.to_pcmap(),
            Err(ManifestError::Formula { .. })
        ));
    }
}
