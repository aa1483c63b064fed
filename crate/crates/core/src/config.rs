//! Reading and writing concrete configurations.
//!
//! Two formats: defconfig-style text (`NAME=y` / `# NAME is not set`, one
//! variable per line, unspecified variables default to false) and a JSON
//! object mapping names to booleans.

use thiserror::Error;

use crate::formula::{Assignment, VarTable};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown variable `{name}`")]
    UnknownVariable { line: u32, name: String },
    #[error("line {line}: cannot parse `{text}` (expected NAME=y, NAME=n, or `# NAME is not set`)")]
    BadLine { line: u32, text: String },
    #[error("invalid config JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Renders the defconfig-style text form, in interning order.
pub fn to_config_text(conf: &Assignment, vars: &VarTable) -> String {
    let mut out = String::new();
    for id in vars.ids() {
        let name = vars.name(id);
        if conf.get(id) {
            out.push_str(name);
            out.push_str("=y\n");
        } else {
            out.push_str("# ");
            out.push_str(name);
            out.push_str(" is not set\n");
        }
    }
    out
}

/// Renders the JSON form (object keys sorted by name).
pub fn to_config_json(conf: &Assignment, vars: &VarTable) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    let mut names: Vec<_> = vars.ids().map(|id| (vars.name(id).to_string(), id)).collect();
    names.sort();
    for (name, id) in names {
        map.insert(name, serde_json::Value::Bool(conf.get(id)));
    }
    serde_json::Value::Object(map)
}

/// Parses either format, detected by a leading `{`. Unknown variables are
/// errors unless `lenient`, in which case they are reported as warnings and
/// ignored. Unspecified variables are false.
pub fn parse_config(
    text: &str,
    vars: &VarTable,
    lenient: bool,
) -> Result<(Assignment, Vec<String>), ConfigError> {
    if text.trim_start().starts_with('{') {
        parse_config_json(text, vars, lenient)
    } else {
        parse_config_text(text, vars, lenient)
    }
}

fn parse_config_json(
    text: &str,
    vars: &VarTable,
    lenient: bool,
) -> Result<(Assignment, Vec<String>), ConfigError> {
    let raw: std::collections::BTreeMap<String, bool> = serde_json::from_str(text)?;
    let mut conf = Assignment::all_false(vars.len());
    let mut warnings = Vec::new();
    for (name, value) in raw {
        match vars.lookup(&name) {
            Some(id) => conf.set(id, value),
            None if lenient => warnings.push(format!("ignoring unknown variable `{name}`")),
            None => return Err(ConfigError::UnknownVariable { line: 0, name }),
        }
    }
    Ok((conf, warnings))
}

fn parse_config_text(
    text: &str,
    vars: &VarTable,
    lenient: bool,
) -> Result<(Assignment, Vec<String>), ConfigError> {
    let mut conf = Assignment::all_false(vars.len());
    let mut warnings = Vec::new();
    let mut apply = |name: &str, value: bool, line: u32| -> Result<(), ConfigError> {
        match vars.lookup(name) {
            Some(id) => conf.set(id, value),
            None if lenient => warnings.push(format!(
                "line {line}: ignoring unknown variable `{name}`"
            )),
            None => {
                return Err(ConfigError::UnknownVariable {
                    line,
                    name: name.to_string(),
                })
            }
        }
        Ok(())
    };

    for (i, raw) in text.lines().enumerate() {
        let line_no = (i + 1) as u32;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            // `# NAME is not set` is semantic; other comments are skipped.
            let rest = rest.trim();
            if let Some(name) = rest.strip_suffix(" is not set") {
                apply(name.trim(), false, line_no)?;
            }
            continue;
        }
        match line.split_once('=') {
            Some((name, value)) => {
                let value = match value.trim() {
                    "y" => true,
                    "n" => false,
                    _ => {
                        return Err(ConfigError::BadLine {
                            line: line_no,
                            text: raw.to_string(),
                        })
                    }
                };
                apply(name.trim(), value, line_no)?;
            }
            None => {
                return Err(ConfigError::BadLine {
                    line: line_no,
                    text: raw.to_string(),
                })
            }
        }
    }
    Ok((conf, warnings))
}
