//! Presence-condition extraction from preprocessor-conditional sources.
//!
//! The scanner is line oriented: a conditional directive is a line whose
//! first non-whitespace character is `#` followed by `if`, `ifdef`,
//! `ifndef`, `elif`, `else`, or `endif` (continuation backslashes are joined
//! first). Every line inside a conditional region is attributed to the
//! conjunction of the enclosing branch conditions; later branches of an
//! `#if`/`#elif`/`#else` chain accumulate the negations of their earlier
//! siblings. Lines outside any directive, or under a literally true
//! condition such as `#if 1`, are not configurable and produce no entries.
//!
//! A contiguous run of governed lines is one code unit; nested directives
//! split units, so a condition that reappears (textually or after nesting)
//! controls several units. [`build_pcmap`] merges semantically equal
//! conditions into a single entry holding the set of all its units, and
//! drops entries that are unsatisfiable together with the feature model.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::formula::{
    conjoin, normal_form_key, parse_cpp_expr, semantically_equal, Assignment, CppExprError,
    PropFormula, VarTable,
};
use crate::solver;

/// One source position, 1-based line.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SourceLocation {
    pub file: String,
    pub line: u32,
}

impl fmt::Display for SourceLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file, self.line)
    }
}

/// A contiguous block of lines governed by one presence-condition instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeUnit {
    pub file: String,
    /// Strictly increasing, non-empty.
    pub lines: Vec<u32>,
}

impl CodeUnit {
    pub fn locations(&self) -> impl Iterator<Item = SourceLocation> + '_ {
        self.lines.iter().map(|&line| SourceLocation {
            file: self.file.clone(),
            line,
        })
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

/// Raw scanner output: one presence-condition instance and its unit.
#[derive(Debug, Clone)]
pub struct PcInstance {
    pub pc: PropFormula,
    pub unit: CodeUnit,
}

/// Unique presence condition with all the units it controls.
#[derive(Debug, Clone)]
pub struct PcEntry {
    pub pc: PropFormula,
    pub units: Vec<CodeUnit>,
    /// Number of code units (instance count).
    pub lcu_weight: u64,
    /// Total number of governed lines.
    pub absolute_weight: u64,
}

/// Unique presence conditions of a component plus the feature model.
#[derive(Debug, Clone)]
pub struct PcMap {
    pub entries: Vec<PcEntry>,
    pub vars: VarTable,
    pub feature_model: PropFormula,
}

impl PcMap {
    pub fn total_units(&self) -> usize {
        self.entries.iter().map(|e| e.units.len()).sum()
    }
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("{file}:{line}: unbalanced directive: {message}")]
    UnbalancedDirective {
        file: String,
        line: u32,
        message: String,
    },
    #[error("{file}:{line}: unsupported `#if` expression: {message}")]
    UnsupportedExpression {
        file: String,
        line: u32,
        message: String,
    },
    #[error("{file}:{line}: {message}")]
    Syntax {
        file: String,
        line: u32,
        message: String,
    },
    #[error("cannot read {file}: {source}")]
    Io {
        file: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DirectiveKind {
    If,
    Ifdef,
    Ifndef,
    Elif,
    Else,
    Endif,
}

/// Recognizes conditional directives; other `#` lines (e.g. `#define`,
/// `#include`) are ordinary governed lines.
fn conditional_directive(line: &str) -> Option<(DirectiveKind, &str)> {
    let trimmed = line.trim_start();
    let rest = trimmed.strip_prefix('#')?;
    let rest = rest.trim_start();
    let word_end = rest
        .char_indices()
        .find(|(_, c)| !c.is_ascii_alphabetic())
        .map(|(i, _)| i)
        .unwrap_or(rest.len());
    let kind = match &rest[..word_end] {
        "if" => DirectiveKind::If,
        "ifdef" => DirectiveKind::Ifdef,
        "ifndef" => DirectiveKind::Ifndef,
        "elif" => DirectiveKind::Elif,
        "else" => DirectiveKind::Else,
        "endif" => DirectiveKind::Endif,
        _ => return None,
    };
    Some((kind, &rest[word_end..]))
}

struct Frame {
    parent_pc: PropFormula,
    /// Conditions of the branches seen so far, in order.
    branch_conds: Vec<PropFormula>,
    current_pc: PropFormula,
    in_else: bool,
    open_line: u32,
}

struct Scanner<'v> {
    file: String,
    vars: &'v mut VarTable,
    stack: Vec<Frame>,
    current_unit: Vec<u32>,
    instances: Vec<PcInstance>,
}

impl<'v> Scanner<'v> {
    fn current_pc(&self) -> PropFormula {
        self.stack
            .last()
            .map(|f| f.current_pc.clone())
            .unwrap_or(PropFormula::True)
    }

    fn flush(&mut self) {
        if self.current_unit.is_empty() {
            return;
        }
        let lines = std::mem::take(&mut self.current_unit);
        let pc = self.current_pc();
        debug_assert!(pc != PropFormula::True);
        self.instances.push(PcInstance {
            pc,
            unit: CodeUnit {
                file: self.file.clone(),
                lines,
            },
        });
    }

    fn body_line(&mut self, line: u32) {
        if self.current_pc() == PropFormula::True {
            return;
        }
        self.current_unit.push(line);
    }

    fn parse_condition(&mut self, text: &str, line: u32) -> Result<PropFormula, ExtractError> {
        parse_cpp_expr(text, self.vars).map_err(|e| match e {
            CppExprError::Unsupported { message, .. } => ExtractError::UnsupportedExpression {
                file: self.file.clone(),
                line,
                message,
            },
            CppExprError::Syntax(s) => ExtractError::Syntax {
                file: self.file.clone(),
                line,
                message: s.to_string(),
            },
        })
    }

    fn single_identifier(&self, text: &str, line: u32) -> Result<String, ExtractError> {
        let name = text.trim();
        let valid = !name.is_empty()
            && name
                .chars()
                .all(|c| c == '_' || c.is_ascii_alphanumeric())
            && !name.starts_with(|c: char| c.is_ascii_digit());
        if !valid {
            return Err(ExtractError::Syntax {
                file: self.file.clone(),
                line,
                message: format!("expected a single identifier, found `{}`", name),
            });
        }
        Ok(name.to_string())
    }

    fn directive(
        &mut self,
        kind: DirectiveKind,
        rest: &str,
        line: u32,
    ) -> Result<(), ExtractError> {
        self.flush();
        match kind {
            DirectiveKind::If | DirectiveKind::Ifdef | DirectiveKind::Ifndef => {
                let cond = match kind {
                    DirectiveKind::If => self.parse_condition(rest, line)?,
                    DirectiveKind::Ifdef => {
                        let name = self.single_identifier(rest, line)?;
                        PropFormula::Var(self.vars.intern(&name))
                    }
                    DirectiveKind::Ifndef => {
                        let name = self.single_identifier(rest, line)?;
                        PropFormula::not(PropFormula::Var(self.vars.intern(&name)))
                    }
                    _ => unreachable!(),
                };
                let parent_pc = self.current_pc();
                let current_pc = conjoin(vec![parent_pc.clone(), cond.clone()]);
                self.stack.push(Frame {
                    parent_pc,
                    branch_conds: vec![cond],
                    current_pc,
                    in_else: false,
                    open_line: line,
                });
            }
            DirectiveKind::Elif => {
                let cond = self.parse_condition(rest, line)?;
                let file = self.file.clone();
                let frame =
                    self.stack
                        .last_mut()
                        .ok_or_else(|| ExtractError::UnbalancedDirective {
                            file: file.clone(),
                            line,
                            message: "`#elif` without matching `#if`".into(),
                        })?;
                if frame.in_else {
                    return Err(ExtractError::UnbalancedDirective {
                        file,
                        line,
                        message: "`#elif` after `#else`".into(),
                    });
                }
                let mut parts = vec![frame.parent_pc.clone()];
                parts.extend(frame.branch_conds.iter().cloned().map(PropFormula::not));
                parts.push(cond.clone());
                frame.current_pc = conjoin(parts);
                frame.branch_conds.push(cond);
            }
            DirectiveKind::Else => {
                let file = self.file.clone();
                let frame =
                    self.stack
                        .last_mut()
                        .ok_or_else(|| ExtractError::UnbalancedDirective {
                            file: file.clone(),
                            line,
                            message: "`#else` without matching `#if`".into(),
                        })?;
                if frame.in_else {
                    return Err(ExtractError::UnbalancedDirective {
                        file,
                        line,
                        message: "duplicate `#else`".into(),
                    });
                }
                let mut parts = vec![frame.parent_pc.clone()];
                parts.extend(frame.branch_conds.iter().cloned().map(PropFormula::not));
                frame.current_pc = conjoin(parts);
                frame.in_else = true;
            }
            DirectiveKind::Endif => {
                if self.stack.pop().is_none() {
                    return Err(ExtractError::UnbalancedDirective {
                        file: self.file.clone(),
                        line,
                        message: "`#endif` without matching `#if`".into(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Scans source text, attributing every governed line to its full presence
/// condition. `file_label` is recorded in the emitted locations.
pub fn scan_str(
    text: &str,
    file_label: &str,
    vars: &mut VarTable,
) -> Result<Vec<PcInstance>, ExtractError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut scanner = Scanner {
        file: file_label.to_string(),
        vars,
        stack: Vec::new(),
        current_unit: Vec::new(),
        instances: Vec::new(),
    };

    let mut i = 0;
    while i < lines.len() {
        let line_no = (i + 1) as u32;
        if let Some((kind, after_keyword)) = conditional_directive(lines[i]) {
            // Join continuation lines before parsing the expression.
            let mut expr = after_keyword.to_string();
            while expr.trim_end().ends_with('\\') && i + 1 < lines.len() {
                let without = expr.trim_end().trim_end_matches('\\').to_string();
                i += 1;
                expr = format!("{} {}", without, lines[i]);
            }
            scanner.directive(kind, &expr, line_no)?;
        } else {
            scanner.body_line(line_no);
        }
        i += 1;
    }

    if let Some(frame) = scanner.stack.last() {
        return Err(ExtractError::UnbalancedDirective {
            file: scanner.file.clone(),
            line: frame.open_line,
            message: "missing `#endif`".into(),
        });
    }
    scanner.flush();
    Ok(scanner.instances)
}

/// Reads and scans one file.
pub fn scan_file(path: &Path, vars: &mut VarTable) -> Result<Vec<PcInstance>, ExtractError> {
    let label = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ExtractError::Io {
        file: label.clone(),
        source,
    })?;
    scan_str(&text, &label, vars)
}

/// Merges instances with semantically equal conditions into entries, drops
/// entries dead under the feature model, and computes the weights.
pub fn build_pcmap(
    instances: Vec<PcInstance>,
    feature_model: PropFormula,
    vars: VarTable,
) -> PcMap {
    let mut entries: Vec<PcEntry> = Vec::new();
    // Normal-form keys give a sound fast path; a miss falls back to SAT-based
    // equivalence against each existing entry.
    let mut by_key: HashMap<String, usize> = HashMap::new();

    for instance in instances {
        let key = normal_form_key(&instance.pc);
        let found = by_key.get(&key).copied().or_else(|| {
            entries
                .iter()
                .position(|e| semantically_equal(&e.pc, &instance.pc, vars.len()))
        });
        match found {
            Some(idx) => {
                entries[idx].units.push(instance.unit);
                by_key.insert(key, idx);
            }
            None => {
                by_key.insert(key, entries.len());
                entries.push(PcEntry {
                    pc: instance.pc,
                    units: vec![instance.unit],
                    lcu_weight: 0,
                    absolute_weight: 0,
                });
            }
        }
    }

    // Dead code elimination: drop conditions unsatisfiable with the model.
    entries.retain(|e| {
        solver::sat(&[feature_model.clone(), e.pc.clone()], vars.len()).is_some()
    });

    for entry in &mut entries {
        entry.lcu_weight = entry.units.len() as u64;
        entry.absolute_weight = entry.units.iter().map(|u| u.lines.len() as u64).sum();
    }

    PcMap {
        entries,
        vars,
        feature_model,
    }
}

/// Indices of the entries whose condition evaluates true under `conf`.
pub fn enabled_entries(map: &PcMap, conf: &Assignment) -> std::collections::BTreeSet<usize> {
    map.entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.pc.evaluate(conf))
        .map(|(i, _)| i)
        .collect()
}

/// Loads a feature-model file: one formula per line, conjoined. Blank lines
/// and lines starting with `#` are ignored. A missing path means `True`.
pub fn load_feature_model(path: &Path, vars: &mut VarTable) -> Result<PropFormula, ExtractError> {
    let label = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ExtractError::Io {
        file: label.clone(),
        source,
    })?;
    parse_feature_model(&text, &label, vars)
}

pub fn parse_feature_model(
    text: &str,
    file_label: &str,
    vars: &mut VarTable,
) -> Result<PropFormula, ExtractError> {
    let mut parts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let f = crate::formula::parse_formula(trimmed, vars).map_err(|e| ExtractError::Syntax {
            file: file_label.to_string(),
            line: (i + 1) as u32,
            message: e.to_string(),
        })?;
        parts.push(f);
    }
    Ok(conjoin(parts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;

    const NESTED_BRANCHES: &str = "\
#if C1
   free(p1);
#endif

#if C2
  #if C1
    free(p2);
    x++;
    printf(\"x\");
  #else
    free(p3);
  #endif
#endif
";

    const REPEATED_CONDITION: &str = "\
#if C4 || C5
   free(p1);
#endif

#if C5
   printf(\"a\");
#endif

#if !C5 && C6
   free(p2);
#endif

#if C5
   printf(\"b\");
   p = malloc(4);
#endif
";

    fn pc_text(instances: &[PcInstance], vars: &VarTable) -> Vec<(String, Vec<u32>)> {
        instances
            .iter()
            .map(|i| (i.pc.print(vars), i.unit.lines.clone()))
            .collect()
    }

    #[test]
    fn nested_branches_attribution() {
        let mut vars = VarTable::new();
        let instances = scan_str(NESTED_BRANCHES, "a.c", &mut vars).unwrap();
        assert_eq!(
            pc_text(&instances, &vars),
            vec![
                ("C1".to_string(), vec![2]),
                ("C2 && C1".to_string(), vec![7, 8, 9]),
                ("C2 && !C1".to_string(), vec![11]),
            ]
        );
    }

    #[test]
    fn repeated_condition_yields_two_instances() {
        let mut vars = VarTable::new();
        let instances = scan_str(REPEATED_CONDITION, "b.c", &mut vars).unwrap();
        assert_eq!(
            pc_text(&instances, &vars),
            vec![
                ("C4 || C5".to_string(), vec![2]),
                ("C5".to_string(), vec![6]),
                ("!C5 && C6".to_string(), vec![10]),
                ("C5".to_string(), vec![14, 15]),
            ]
        );
    }

    #[test]
    fn no_directives_means_no_instances() {
        let mut vars = VarTable::new();
        let instances = scan_str("int main() {\n  return 0;\n}\n", "plain.c", &mut vars).unwrap();
        assert!(instances.is_empty());
    }

    #[test]
    fn merging_collects_units_and_weights() {
        let mut vars = VarTable::new();
        let instances = scan_str(REPEATED_CONDITION, "b.c", &mut vars).unwrap();
        let map = build_pcmap(instances, PropFormula::True, vars);
        assert_eq!(map.entries.len(), 3);
        assert_eq!(map.total_units(), 4);
        let c5 = &map.entries[1];
        assert_eq!(c5.pc.print(&map.vars), "C5");
        assert_eq!(c5.units.len(), 2);
        assert_eq!(c5.lcu_weight, 2);
        assert_eq!(c5.absolute_weight, 3);
        assert_eq!(map.entries[0].lcu_weight, 1);
        assert_eq!(map.entries[2].lcu_weight, 1);
    }

    #[test]
    fn contradictory_instances_are_dropped() {
        let mut vars = VarTable::new();
        let pc = parse_formula("C1 && !C1", &mut vars).unwrap();
        let instances = vec![PcInstance {
            pc,
            unit: CodeUnit {
                file: "x.c".into(),
                lines: vec![5],
            },
        }];
        let map = build_pcmap(instances, PropFormula::True, vars);
        assert!(map.entries.is_empty());
    }

    #[test]
    fn feature_model_kills_dead_entries() {
        let mut vars = VarTable::new();
        let instances = scan_str(REPEATED_CONDITION, "b.c", &mut vars).unwrap();
        let fm = parse_formula("!C5", &mut vars).unwrap();
        let map = build_pcmap(instances, fm, vars);
        // The bare C5 entry is dead under !C5.
        let texts: Vec<String> = map.entries.iter().map(|e| e.pc.print(&map.vars)).collect();
        assert_eq!(texts, vec!["C4 || C5".to_string(), "!C5 && C6".to_string()]);
    }

    #[test]
    fn enabled_entries_by_evaluation() {
        let mut vars = VarTable::new();
        let instances = scan_str(REPEATED_CONDITION, "b.c", &mut vars).unwrap();
        let map = build_pcmap(instances, PropFormula::True, vars);
        let c4 = map.vars.lookup("C4").unwrap();
        let c5 = map.vars.lookup("C5").unwrap();

        let mut only_c4 = Assignment::all_false(map.vars.len());
        only_c4.set(c4, true);
        let enabled = enabled_entries(&map, &only_c4);
        assert_eq!(enabled.len(), 1);
        assert!(enabled.contains(&0));

        let mut only_c5 = Assignment::all_false(map.vars.len());
        only_c5.set(c5, true);
        let enabled = enabled_entries(&map, &only_c5);
        assert_eq!(enabled, std::collections::BTreeSet::from([0, 1]));

        let none = enabled_entries(&map, &Assignment::all_false(map.vars.len()));
        assert!(none.is_empty());
    }

    #[test]
    fn elif_chain_accumulates_negations() {
        let text = "\
#if A
a();
#elif B
b();
#else
c();
#endif
";
        let mut vars = VarTable::new();
        let instances = scan_str(text, "chain.c", &mut vars).unwrap();
        assert_eq!(
            pc_text(&instances, &vars),
            vec![
                ("A".to_string(), vec![2]),
                ("!A && B".to_string(), vec![4]),
                ("!A && !B".to_string(), vec![6]),
            ]
        );
    }

    #[test]
    fn ifdef_and_ifndef_normalize() {
        let text = "\
#ifdef FOO
x();
#endif
#ifndef BAR
y();
#endif
";
        let mut vars = VarTable::new();
        let instances = scan_str(text, "d.c", &mut vars).unwrap();
        assert_eq!(
            pc_text(&instances, &vars),
            vec![
                ("FOO".to_string(), vec![2]),
                ("!BAR".to_string(), vec![5]),
            ]
        );
    }

    #[test]
    fn literally_true_blocks_are_excluded() {
        let text = "\
#if 1
always();
#endif
#if 1
  #if A
conditional();
  #endif
#endif
";
        let mut vars = VarTable::new();
        let instances = scan_str(text, "t.c", &mut vars).unwrap();
        assert_eq!(pc_text(&instances, &vars), vec![("A".to_string(), vec![6])]);
    }

    #[test]
    fn units_split_at_nested_directives() {
        let text = "\
#if A
x();
#if B
y();
#endif
z();
#endif
";
        let mut vars = VarTable::new();
        let instances = scan_str(text, "split.c", &mut vars).unwrap();
        assert_eq!(
            pc_text(&instances, &vars),
            vec![
                ("A".to_string(), vec![2]),
                ("A && B".to_string(), vec![4]),
                ("A".to_string(), vec![6]),
            ]
        );
        // After merging, A controls two units.
        let map = build_pcmap(instances, PropFormula::True, vars);
        assert_eq!(map.entries[0].lcu_weight, 2);
    }

    #[test]
    fn continuation_lines_join_for_directives() {
        let text = "#if A && \\\n    B\nbody();\n#endif\n";
        let mut vars = VarTable::new();
        let instances = scan_str(text, "cont.c", &mut vars).unwrap();
        assert_eq!(
            pc_text(&instances, &vars),
            vec![("A && B".to_string(), vec![3])]
        );
    }

    #[test]
    fn unbalanced_directives_are_errors() {
        let mut vars = VarTable::new();
        match scan_str("#if A\nx();\n", "u.c", &mut vars) {
            Err(ExtractError::UnbalancedDirective { line: 1, .. }) => {}
            other => panic!("expected missing #endif, got {other:?}"),
        }
        match scan_str("#else\n", "u.c", &mut vars) {
            Err(ExtractError::UnbalancedDirective { line: 1, .. }) => {}
            other => panic!("expected stray #else, got {other:?}"),
        }
        match scan_str("#endif\n", "u.c", &mut vars) {
            Err(ExtractError::UnbalancedDirective { line: 1, .. }) => {}
            other => panic!("expected stray #endif, got {other:?}"),
        }
        match scan_str("#if A\n#else\n#elif B\n#endif\n", "u.c", &mut vars) {
            Err(ExtractError::UnbalancedDirective { line: 3, .. }) => {}
            other => panic!("expected #elif after #else, got {other:?}"),
        }
    }

    #[test]
    fn arithmetic_conditions_are_rejected() {
        let mut vars = VarTable::new();
        match scan_str("#if X > 1\nx();\n#endif\n", "a.c", &mut vars) {
            Err(ExtractError::UnsupportedExpression { line: 1, .. }) => {}
            other => panic!("expected UnsupportedExpression, got {other:?}"),
        }
    }

    #[test]
    fn defined_normalizes_to_variable() {
        let text = "#if defined(FOO) && !defined BAR\nx();\n#endif\n";
        let mut vars = VarTable::new();
        let instances = scan_str(text, "d.c", &mut vars).unwrap();
        assert_eq!(
            pc_text(&instances, &vars),
            vec![("FOO && !BAR".to_string(), vec![2])]
        );
    }

    #[test]
    fn non_conditional_directives_are_body_lines() {
        let text = "#if A\n#define X 1\n#include <x.h>\n#endif\n";
        let mut vars = VarTable::new();
        let instances = scan_str(text, "inc.c", &mut vars).unwrap();
        assert_eq!(
            pc_text(&instances, &vars),
            vec![("A".to_string(), vec![2, 3])]
        );
    }
}
