//! Shared helpers: error-to-exit-code mapping, input loading, metric
//! resolution, and deterministic file emission.

use std::fmt;
use std::path::{Path, PathBuf};

use maxconf_core::extract::{ExtractError, PcMap};
use maxconf_core::formula::Assignment;
use maxconf_core::fuzz::{Bits, FuzzKind};
use maxconf_core::generate::GenError;
use maxconf_core::manifest::Manifest;
use maxconf_core::metrics::{self, CostFunction, MetricsError};
use maxconf_core::oracle::OracleError;

/// Exit codes: 1 usage, 2 input format, 3 infeasible.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    Infeasible(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Internal(_) => 1,
            CliError::Input(_) => 2,
            CliError::Infeasible(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m)
            | CliError::Input(m)
            | CliError::Infeasible(m)
            | CliError::Internal(m) => f.write_str(m),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn extract_error(e: ExtractError) -> CliError {
    match e {
        ExtractError::Io { .. } => CliError::Usage(e.to_string()),
        _ => CliError::Input(e.to_string()),
    }
}

pub fn gen_error(e: GenError) -> CliError {
    CliError::Infeasible(e.to_string())
}

pub fn metrics_error(e: MetricsError) -> CliError {
    CliError::Input(e.to_string())
}

pub fn oracle_error(e: OracleError) -> CliError {
    match e {
        OracleError::TooLarge { .. } => CliError::Usage(e.to_string()),
        OracleError::HardUnsat => CliError::Infeasible(e.to_string()),
    }
}

pub fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

pub fn write_file(path: &Path, content: &str) -> CliResult<()> {
    std::fs::write(path, content)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    write_file(path, &text)
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))
}

/// Expands files and directories into a sorted list of .c/.h files.
pub fn collect_sources(inputs: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found = Vec::new();
            walk_dir(input, &mut found)?;
            found.sort();
            files.extend(found);
        } else if input.is_file() {
            files.push(input.clone());
        } else {
            return Err(CliError::Usage(format!(
                "input path {} does not exist",
                input.display()
            )));
        }
    }
    Ok(files)
}

fn walk_dir(dir: &Path, out: &mut Vec<PathBuf>) -> CliResult<()> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    paths.sort();
    for path in paths {
        if path.is_dir() {
            walk_dir(&path, out)?;
        } else if matches!(
            path.extension().and_then(|e| e.to_str()),
            Some("c") | Some("h")
        ) {
            out.push(path);
        }
    }
    Ok(())
}

pub fn load_manifest(path: &Path) -> CliResult<PcMap> {
    let text = read_file(path)?;
    let manifest = Manifest::from_json(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    manifest
        .to_pcmap()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Resolves `lcu | absolute | free:K | costs:FILE` into a cost function.
/// `free:K` re-reads every source file named in the manifest (under
/// `--source-root`) to build the call graph.
pub fn resolve_metric(args: &crate::MetricArgs, map: &PcMap) -> CliResult<CostFunction> {
    let spec = args.metric.as_str();
    match spec {
        "lcu" => Ok(CostFunction::Lcu),
        "absolute" => Ok(CostFunction::Absolute),
        _ => {
            if let Some(depth) = spec.strip_prefix("free:") {
                let k: u32 = depth.parse().map_err(|_| {
                    CliError::Usage(format!("invalid depth in metric `{spec}` (want free:K)"))
                })?;
                if k == 0 {
                    return Err(CliError::Usage("free depth must be at least 1".into()));
                }
                let mut file_names: Vec<String> = map
                    .entries
                    .iter()
                    .flat_map(|e| e.units.iter().map(|u| u.file.clone()))
                    .collect();
                file_names.sort();
                file_names.dedup();
                let mut files = Vec::new();
                for name in file_names {
                    let path = args.source_root.join(&name);
                    let text = std::fs::read_to_string(&path).map_err(|e| {
                        CliError::Usage(format!(
                            "metric free:{k} needs source {}: {e}",
                            path.display()
                        ))
                    })?;
                    files.push((name, text));
                }
                Ok(metrics::reachable_sink_costs(
                    &files,
                    k,
                    &metrics::default_sinks(),
                ))
            } else if let Some(path) = spec.strip_prefix("costs:") {
                let text = read_file(Path::new(path))?;
                let costs = metrics::parse_line_costs(&text)
                    .map_err(|e| CliError::Input(format!("{path}: {e}")))?;
                Ok(CostFunction::LineCosts(costs))
            } else {
                Err(CliError::Usage(format!(
                    "unknown metric `{spec}` (expected lcu, absolute, free:K, or costs:FILE)"
                )))
            }
        }
    }
}

/// Loads one fuzzing seed: a 0/1 bit-string file, or (for cvf) a .config or
/// JSON configuration.
pub fn load_seed(path: &Path, kind: FuzzKind, map: &PcMap) -> CliResult<Bits> {
    let text = read_file(path)?;
    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(bits) = Bits::parse(trimmed) {
            return Ok(bits);
        }
        break;
    }
    if kind == FuzzKind::ConfVar {
        let (conf, _) = maxconf_core::config::parse_config(&text, &map.vars, false)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        return Ok(Bits(conf.values().to_vec()));
    }
    Err(CliError::Input(format!(
        "{}: expected a 0/1 bit string of the search-space length",
        path.display()
    )))
}

/// Short human-readable form: names of enabled variables or `(none)`.
pub fn enabled_names_line(conf: &Assignment, vars: &maxconf_core::formula::VarTable) -> String {
    let names: Vec<&str> = conf.enabled_names(vars).collect();
    if names.is_empty() {
        "(none)".to_string()
    } else {
        names.join(", ")
    }
}
