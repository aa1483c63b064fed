//! Cost functions over source locations and the derived per-condition
//! weights and coverage ratios.
//!
//! Three kinds of cost are supported: `Lcu` weighs a condition by the number
//! of code units it controls (its occurrence count), `Absolute` by the total
//! number of governed lines, and `LineCosts` by summing an arbitrary
//! per-line cost map. [`reachable_sink_costs`] builds such a map from a
//! lightweight call graph: a line costs one per call that reaches a
//! deallocation sink (`free` by default) within a bounded number of
//! indirection levels.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::extract::PcMap;
use crate::formula::Assignment;

/// `(file, line)` key for per-line costs.
pub type LineKey = (String, u32);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CostFunction {
    /// Weight = number of code units controlled by the condition.
    Lcu,
    /// Weight = total number of lines controlled by the condition.
    Absolute,
    /// Weight = sum of per-line costs over all controlled lines; absent
    /// lines cost zero.
    LineCosts(BTreeMap<LineKey, u64>),
}

impl CostFunction {
    /// Weight of one entry of the map under this cost function.
    pub fn entry_weight(&self, map: &PcMap, entry_index: usize) -> u64 {
        let entry = &map.entries[entry_index];
        match self {
            CostFunction::Lcu => entry.lcu_weight,
            CostFunction::Absolute => entry.absolute_weight,
            CostFunction::LineCosts(costs) => entry
                .units
                .iter()
                .flat_map(|u| u.lines.iter().map(|&l| (u.file.clone(), l)))
                .map(|key| costs.get(&key).copied().unwrap_or(0))
                .sum(),
        }
    }
}

/// Per-entry weights under one cost function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricReport {
    pub weights: Vec<u64>,
    pub total: u64,
}

/// Computes the weight of every entry: occurrence count for `Lcu`, governed
/// line count for `Absolute`, summed line costs otherwise.
pub fn weigh(map: &PcMap, cost: &CostFunction) -> MetricReport {
    let weights: Vec<u64> = (0..map.entries.len())
        .map(|i| cost.entry_weight(map, i))
        .collect();
    let total = weights.iter().sum();
    MetricReport { weights, total }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no configurable units: the map has no code units to cover")]
    NoConfigurableUnits,
}

/// Covered/total logical code units for a set of configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CcuReport {
    pub covered: usize,
    pub total: usize,
}

impl CcuReport {
    pub fn fraction(&self) -> f64 {
        self.covered as f64 / self.total as f64
    }

    pub fn percent(&self) -> f64 {
        100.0 * self.fraction()
    }
}

/// Configuration code coverage: the ratio of code units whose condition is
/// enabled by at least one of the given configurations to all code units.
pub fn ccu(map: &PcMap, confs: &[Assignment]) -> Result<CcuReport, MetricsError> {
    let total = map.total_units();
    if total == 0 {
        return Err(MetricsError::NoConfigurableUnits);
    }
    let covered = map
        .entries
        .iter()
        .filter(|e| confs.iter().any(|c| e.pc.evaluate(c)))
        .map(|e| e.units.len())
        .sum();
    Ok(CcuReport { covered, total })
}

/// Metric score of one total configuration: the sum of entry weights over
/// the enabled entries. With `count_unique` and the `Lcu` cost the score is
/// the number of enabled entries instead of their occurrence-weighted sum.
pub fn score_assignment(
    map: &PcMap,
    conf: &Assignment,
    cost: &CostFunction,
    count_unique: bool,
) -> u64 {
    let enabled = (0..map.entries.len()).filter(|&i| map.entries[i].pc.evaluate(conf));
    if count_unique && *cost == CostFunction::Lcu {
        enabled.count() as u64
    } else {
        enabled.map(|i| cost.entry_weight(map, i)).sum()
    }
}

const C_KEYWORDS: &[&str] = &[
    "if", "while", "for", "switch", "return", "sizeof", "do", "else", "case", "goto", "defined",
];

const C_TYPE_KEYWORDS: &[&str] = &[
    "int", "void", "char", "long", "short", "unsigned", "signed", "float", "double", "struct",
    "union", "enum", "static", "const", "inline", "extern", "register", "volatile", "bool",
];

#[derive(Debug, Clone, PartialEq)]
enum CTok {
    Ident(String),
    Punct(char),
}

/// Tokenizes C-ish source just enough for call detection: skips comments,
/// string/char literals, preprocessor lines, and numbers.
fn tokenize_c(text: &str) -> Vec<(CTok, u32)> {
    let mut tokens = Vec::new();
    let mut in_block_comment = false;
    for (i, line) in text.lines().enumerate() {
        let line_no = (i + 1) as u32;
        let bytes = line.as_bytes();
        let mut p = 0;
        if !in_block_comment && line.trim_start().starts_with('#') {
            continue;
        }
        while p < bytes.len() {
            if in_block_comment {
                if bytes[p] == b'*' && bytes.get(p + 1) == Some(&b'/') {
                    in_block_comment = false;
                    p += 2;
                } else {
                    p += 1;
                }
                continue;
            }
            let b = bytes[p];
            match b {
                b'/' if bytes.get(p + 1) == Some(&b'/') => break,
                b'/' if bytes.get(p + 1) == Some(&b'*') => {
                    in_block_comment = true;
                    p += 2;
                }
                b'"' | b'\'' => {
                    let quote = b;
                    p += 1;
                    while p < bytes.len() {
                        if bytes[p] == b'\\' {
                            p += 2;
                        } else if bytes[p] == quote {
                            p += 1;
                            break;
                        } else {
                            p += 1;
                        }
                    }
                }
                b'_' | b'a'..=b'z' | b'A'..=b'Z' => {
                    let start = p;
                    while p < bytes.len()
                        && (bytes[p] == b'_' || bytes[p].is_ascii_alphanumeric())
                    {
                        p += 1;
                    }
                    tokens.push((CTok::Ident(line[start..p].to_string()), line_no));
                }
                b'0'..=b'9' => {
                    while p < bytes.len()
                        && (bytes[p].is_ascii_alphanumeric() || bytes[p] == b'.' || bytes[p] == b'_')
                    {
                        p += 1;
                    }
                }
                _ if b.is_ascii_whitespace() => p += 1,
                _ => {
                    tokens.push((CTok::Punct(b as char), line_no));
                    p += 1;
                }
            }
        }
    }
    tokens
}

/// Scans one file's tokens for function definitions and call sites.
/// A definition is `identifier (args) {` at top nesting; a call is
/// `identifier (` that is neither a definition nor preceded by a type
/// keyword, with control keywords excluded. Function pointers and macro
/// bodies are out of scope and contribute nothing.
fn scan_calls(
    tokens: &[(CTok, u32)],
    file: &str,
    defs: &mut HashMap<String, BTreeSet<String>>,
    sites: &mut Vec<(String, u32, String)>,
) {
    let mut depth: i32 = 0;
    let mut current_fn: Option<String> = None;
    let mut i = 0;
    while i < tokens.len() {
        match &tokens[i].0 {
            CTok::Punct('{') => {
                depth += 1;
                i += 1;
            }
            CTok::Punct('}') => {
                depth -= 1;
                if depth <= 0 {
                    depth = depth.max(0);
                    current_fn = None;
                }
                i += 1;
            }
            CTok::Ident(name) => {
                let line = tokens[i].1;
                let followed_by_paren =
                    matches!(tokens.get(i + 1), Some((CTok::Punct('('), _)));
                if !followed_by_paren {
                    i += 1;
                    continue;
                }
                // Find the matching close paren.
                let mut j = i + 2;
                let mut paren_depth = 1;
                while j < tokens.len() && paren_depth > 0 {
                    match tokens[j].0 {
                        CTok::Punct('(') => paren_depth += 1,
                        CTok::Punct(')') => paren_depth -= 1,
                        _ => {}
                    }
                    j += 1;
                }
                let opens_body = matches!(tokens.get(j), Some((CTok::Punct('{'), _)));
                let is_definition = depth == 0 && opens_body;
                if is_definition {
                    defs.entry(name.clone()).or_default();
                    current_fn = Some(name.clone());
                    i = j; // continue at `{`
                    continue;
                }
                let is_keyword = C_KEYWORDS.contains(&name.as_str());
                let after_type_keyword = matches!(
                    tokens.get(i.wrapping_sub(1)),
                    Some((CTok::Ident(prev), _)) if C_TYPE_KEYWORDS.contains(&prev.as_str())
                ) && i > 0;
                if !is_keyword && !after_type_keyword {
                    sites.push((file.to_string(), line, name.clone()));
                    if let Some(caller) = &current_fn {
                        defs.entry(caller.clone())
                            .or_default()
                            .insert(name.clone());
                    }
                }
                i += 1;
            }
            _ => i += 1,
        }
    }
}

/// Builds a `LineCosts` map where each line costs the number of calls on it
/// to functions from which a sink is reachable in at most `k - 1` call-graph
/// edges (`k = 1` counts only direct sink calls). `files` holds
/// `(display path, content)` pairs; unresolvable callees contribute nothing.
pub fn reachable_sink_costs(
    files: &[(String, String)],
    k: u32,
    sinks: &BTreeSet<String>,
) -> CostFunction {
    assert!(k >= 1, "indirection depth starts at 1");
    let mut defs: HashMap<String, BTreeSet<String>> = HashMap::new();
    let mut sites: Vec<(String, u32, String)> = Vec::new();
    for (path, text) in files {
        let tokens = tokenize_c(text);
        scan_calls(&tokens, path, &mut defs, &mut sites);
    }

    // Distance from each function to a sink call, over reversed call edges.
    let mut callers: HashMap<&str, Vec<&str>> = HashMap::new();
    for (caller, callees) in &defs {
        for callee in callees {
            callers.entry(callee).or_default().push(caller);
        }
    }
    let mut dist: HashMap<String, u32> = HashMap::new();
    let mut queue = VecDeque::new();
    for sink in sinks {
        dist.insert(sink.clone(), 0);
        queue.push_back(sink.clone());
    }
    while let Some(f) = queue.pop_front() {
        let d = dist[&f];
        if let Some(cs) = callers.get(f.as_str()) {
            // Sorted for deterministic traversal; distances are minimal
            // regardless of order (BFS).
            let mut cs: Vec<&str> = cs.clone();
            cs.sort_unstable();
            for caller in cs {
                if !dist.contains_key(caller) {
                    dist.insert(caller.to_string(), d + 1);
                    queue.push_back(caller.to_string());
                }
            }
        }
    }

    let mut costs: BTreeMap<LineKey, u64> = BTreeMap::new();
    for (file, line, callee) in sites {
        if let Some(&d) = dist.get(&callee) {
            if d < k {
                *costs.entry((file, line)).or_insert(0) += 1;
            }
        }
    }
    CostFunction::LineCosts(costs)
}

/// Default deallocation sink set.
pub fn default_sinks() -> BTreeSet<String> {
    BTreeSet::from(["free".to_string()])
}

/// Parses `{ "file:line": cost }` into a line-cost map.
pub fn parse_line_costs(text: &str) -> Result<BTreeMap<LineKey, u64>, String> {
    let raw: BTreeMap<String, u64> =
        serde_json::from_str(text).map_err(|e| format!("invalid cost JSON: {e}"))?;
    let mut out = BTreeMap::new();
    for (key, cost) in raw {
        let (file, line) = key
            .rsplit_once(':')
            .ok_or_else(|| format!("cost key {key:?} is not of the form \"file:line\""))?;
        let line: u32 = line
            .parse()
            .map_err(|_| format!("cost key {key:?} has a non-numeric line"))?;
        out.insert((file.to_string(), line), cost);
    }
    Ok(out)
}
