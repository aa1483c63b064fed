//! Brute-force reference implementations, used by the test suites and the
//! `verify` subcommand. Everything here enumerates exhaustively and is
//! limited to small inputs; none of it shares search logic with the
//! components it cross-checks.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use thiserror::Error;

use crate::extract::{ExtractError, PcMap};
use crate::formula::{parse_cpp_expr, Assignment, CppExprError, PropFormula};
use crate::metrics::{weigh, CostFunction};
use crate::solver::SoftConstraint;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("instance too large for exhaustive checking: {actual} > {limit} {what}")]
    TooLarge {
        what: &'static str,
        limit: usize,
        actual: usize,
    },
    #[error("hard constraints are unsatisfiable")]
    HardUnsat,
}

pub const MAX_BRUTE_VARS: usize = 20;
pub const MAX_COVER_VARS: usize = 12;
pub const MAX_COVER_ENTRIES: usize = 12;

/// All `2^n` assignments, all-false first (variable i is bit i).
pub fn enumerate_assignments(num_vars: usize) -> impl Iterator<Item = Assignment> {
    assert!(num_vars < 64);
    (0u64..(1u64 << num_vars)).map(move |bits| {
        Assignment::from_values((0..num_vars).map(|i| bits >> i & 1 == 1).collect())
    })
}

fn check_var_bound(num_vars: usize) -> Result<(), OracleError> {
    if num_vars > MAX_BRUTE_VARS {
        return Err(OracleError::TooLarge {
            what: "variables",
            limit: MAX_BRUTE_VARS,
            actual: num_vars,
        });
    }
    Ok(())
}

/// Exhaustive satisfiability of a conjunction; first model in enumeration
/// order, if any.
pub fn brute_sat(
    hard: &[PropFormula],
    num_vars: usize,
) -> Result<Option<Assignment>, OracleError> {
    check_var_bound(num_vars)?;
    Ok(enumerate_assignments(num_vars).find(|a| hard.iter().all(|f| f.evaluate(a))))
}

/// Exhaustive MaxSAT: the optimal weight and every optimal assignment.
pub fn brute_maxsat(
    hard: &[PropFormula],
    soft: &[SoftConstraint],
    num_vars: usize,
) -> Result<(u64, Vec<Assignment>), OracleError> {
    check_var_bound(num_vars)?;
    let mut best: Option<u64> = None;
    let mut winners = Vec::new();
    for a in enumerate_assignments(num_vars) {
        if !hard.iter().all(|f| f.evaluate(&a)) {
            continue;
        }
        let weight: u64 = soft
            .iter()
            .filter(|sc| sc.formula.evaluate(&a))
            .map(|sc| sc.weight)
            .sum();
        match best {
            None => {
                best = Some(weight);
                winners = vec![a];
            }
            Some(b) if weight > b => {
                best = Some(weight);
                winners = vec![a];
            }
            Some(b) if weight == b => winners.push(a),
            _ => {}
        }
    }
    match best {
        Some(weight) => Ok((weight, winners)),
        None => Err(OracleError::HardUnsat),
    }
}

/// Exact minimum number of feature-model-respecting configurations that
/// jointly enable every nonzero-weight entry. Dynamic programming over
/// covered-entry bitmasks, which enumerates cover sizes in increasing order.
pub fn brute_min_cover(map: &PcMap, cost: &CostFunction) -> Result<usize, OracleError> {
    let num_vars = map.vars.len();
    if num_vars > MAX_COVER_VARS {
        return Err(OracleError::TooLarge {
            what: "variables",
            limit: MAX_COVER_VARS,
            actual: num_vars,
        });
    }
    let weights = weigh(map, cost).weights;
    let targets: Vec<usize> = (0..map.entries.len())
        .filter(|&i| weights[i] > 0)
        .collect();
    if targets.len() > MAX_COVER_ENTRIES {
        return Err(OracleError::TooLarge {
            what: "entries",
            limit: MAX_COVER_ENTRIES,
            actual: targets.len(),
        });
    }
    if targets.is_empty() {
        return Ok(0);
    }

    // Distinct enabled-sets over the target entries, FM-valid rows only.
    let mut masks: BTreeSet<u32> = BTreeSet::new();
    for a in enumerate_assignments(num_vars) {
        if !map.feature_model.evaluate(&a) {
            continue;
        }
        let mut mask = 0u32;
        for (bit, &entry) in targets.iter().enumerate() {
            if map.entries[entry].pc.evaluate(&a) {
                mask |= 1 << bit;
            }
        }
        masks.insert(mask);
    }

    let full: u32 = if targets.len() == 32 {
        u32::MAX
    } else {
        (1u32 << targets.len()) - 1
    };
    // BFS layers = cover size.
    let mut best: Vec<Option<usize>> = vec![None; (full as usize) + 1];
    best[0] = Some(0);
    let mut frontier: Vec<u32> = vec![0];
    let mut size = 0usize;
    while !frontier.is_empty() {
        if best[full as usize].is_some() {
            return Ok(best[full as usize].unwrap());
        }
        size += 1;
        let mut next = Vec::new();
        for &covered in &frontier {
            for &mask in &masks {
                let merged = covered | mask;
                if best[merged as usize].is_none() {
                    best[merged as usize] = Some(size);
                    next.push(merged);
                }
            }
        }
        frontier = next;
    }
    match best[full as usize] {
        Some(size) => Ok(size),
        // Unreachable for maps built by build_pcmap (each entry is
        // individually satisfiable with the feature model), but a
        // hand-crafted map could have an uncoverable entry.
        None => Err(OracleError::HardUnsat),
    }
}

/// Reference presence-condition walker: parses the directive structure into
/// an explicit tree by recursive descent, then assigns every governed line
/// the conjunction of its branch path. Independent of the scanner's
/// stack-based attribution; returns `True` for lines outside all directives.
/// Directive lines themselves are absent from the result.
pub fn reference_pc_walk(
    text: &str,
    file_label: &str,
) -> Result<BTreeMap<u32, PropFormula>, ExtractError> {
    let mut vars = crate::formula::VarTable::new();
    reference_pc_walk_with(text, file_label, &mut vars)
}

/// As [`reference_pc_walk`], interning into a caller-provided table so the
/// result can be compared against another extraction of the same file.
pub fn reference_pc_walk_with(
    text: &str,
    file_label: &str,
    vars: &mut crate::formula::VarTable,
) -> Result<BTreeMap<u32, PropFormula>, ExtractError> {
    enum Node {
        Line(u32),
        Group(Group),
    }
    struct Group {
        /// `(condition, children)` per branch; `None` condition = `#else`.
        branches: Vec<(Option<PropFormula>, Vec<Node>)>,
    }

    enum LineItem {
        Body(u32),
        If(PropFormula, u32),
        Elif(PropFormula, u32),
        Else(u32),
        Endif(u32),
    }

    // Tokenize lines into directive items (with continuation joining).
    let raw_lines: Vec<&str> = text.lines().collect();
    let mut items: Vec<LineItem> = Vec::new();
    let mut i = 0;
    while i < raw_lines.len() {
        let line_no = (i + 1) as u32;
        let trimmed = raw_lines[i].trim_start();
        let directive = trimmed
            .strip_prefix('#')
            .map(|rest| rest.trim_start())
            .and_then(|rest| {
                let end = rest
                    .char_indices()
                    .find(|(_, c)| !c.is_ascii_alphabetic())
                    .map(|(p, _)| p)
                    .unwrap_or(rest.len());
                match &rest[..end] {
                    kw @ ("if" | "ifdef" | "ifndef" | "elif" | "else" | "endif") => {
                        Some((kw.to_string(), rest[end..].to_string()))
                    }
                    _ => None,
                }
            });
        match directive {
            None => items.push(LineItem::Body(line_no)),
            Some((keyword, mut expr)) => {
                while expr.trim_end().ends_with('\\') && i + 1 < raw_lines.len() {
                    let without = expr.trim_end().trim_end_matches('\\').to_string();
                    i += 1;
                    expr = format!("{} {}", without, raw_lines[i]);
                }
                let parse = |text: &str, vars: &mut crate::formula::VarTable| {
                    parse_cpp_expr(text, vars).map_err(|e| match e {
                        CppExprError::Unsupported { message, .. } => {
                            ExtractError::UnsupportedExpression {
                                file: file_label.to_string(),
                                line: line_no,
                                message,
                            }
                        }
                        CppExprError::Syntax(s) => ExtractError::Syntax {
                            file: file_label.to_string(),
                            line: line_no,
                            message: s.to_string(),
                        },
                    })
                };
                let item = match keyword.as_str() {
                    "if" => LineItem::If(parse(&expr, vars)?, line_no),
                    "ifdef" => LineItem::If(
                        PropFormula::Var(vars.intern(expr.trim())),
                        line_no,
                    ),
                    "ifndef" => LineItem::If(
                        PropFormula::not(PropFormula::Var(vars.intern(expr.trim()))),
                        line_no,
                    ),
                    "elif" => LineItem::Elif(parse(&expr, vars)?, line_no),
                    "else" => LineItem::Else(line_no),
                    "endif" => LineItem::Endif(line_no),
                    _ => unreachable!(),
                };
                items.push(item);
            }
        }
        i += 1;
    }

    // Recursive-descent parse of the directive tree.
    struct ParserState<'a> {
        items: &'a [LineItem],
        pos: usize,
        file: String,
    }

    impl ParserState<'_> {
        fn parse_nodes(&mut self, inside_group: bool) -> Result<Vec<Node>, ExtractError> {
            let mut nodes = Vec::new();
            while self.pos < self.items.len() {
                match &self.items[self.pos] {
                    LineItem::Body(line) => {
                        nodes.push(Node::Line(*line));
                        self.pos += 1;
                    }
                    LineItem::If(cond, line) => {
                        let cond = cond.clone();
                        let open_line = *line;
                        self.pos += 1;
                        nodes.push(Node::Group(self.parse_group(cond, open_line)?));
                    }
                    LineItem::Elif(..) | LineItem::Else(_) | LineItem::Endif(_) => {
                        if inside_group {
                            return Ok(nodes);
                        }
                        let line = match &self.items[self.pos] {
                            LineItem::Elif(_, l) | LineItem::Else(l) | LineItem::Endif(l) => *l,
                            _ => unreachable!(),
                        };
                        return Err(ExtractError::UnbalancedDirective {
                            file: self.file.clone(),
                            line,
                            message: "conditional continuation without `#if`".into(),
                        });
                    }
                }
            }
            Ok(nodes)
        }

        fn parse_group(
            &mut self,
            first_cond: PropFormula,
            open_line: u32,
        ) -> Result<Group, ExtractError> {
            let mut branches = Vec::new();
            let mut pending: Option<PropFormula> = Some(first_cond);
            let mut saw_else = false;
            loop {
                let children = self.parse_nodes(true)?;
                match self.items.get(self.pos) {
                    Some(LineItem::Elif(cond, line)) => {
                        if saw_else {
                            return Err(ExtractError::UnbalancedDirective {
                                file: self.file.clone(),
                                line: *line,
                                message: "`#elif` after `#else`".into(),
                            });
                        }
                        branches.push((pending.take(), children));
                        pending = Some(cond.clone());
                        self.pos += 1;
                    }
                    Some(LineItem::Else(line)) => {
                        if saw_else {
                            return Err(ExtractError::UnbalancedDirective {
                                file: self.file.clone(),
                                line: *line,
                                message: "duplicate `#else`".into(),
                            });
                        }
                        branches.push((pending.take(), children));
                        pending = None;
                        saw_else = true;
                        self.pos += 1;
                    }
                    Some(LineItem::Endif(_)) => {
                        branches.push((pending.take(), children));
                        self.pos += 1;
                        return Ok(Group { branches });
                    }
                    _ => {
                        return Err(ExtractError::UnbalancedDirective {
                            file: self.file.clone(),
                            line: open_line,
                            message: "missing `#endif`".into(),
                        })
                    }
                }
            }
        }
    }

    let mut parser = ParserState {
        items: &items,
        pos: 0,
        file: file_label.to_string(),
    };
    let roots = parser.parse_nodes(false)?;

    // Walk the tree accumulating raw conjunctions; no folding, semantic
    // comparison downstream copes with the constants.
    fn walk(nodes: &[Node], context: &PropFormula, out: &mut BTreeMap<u32, PropFormula>) {
        for node in nodes {
            match node {
                Node::Line(line) => {
                    out.insert(*line, context.clone());
                }
                Node::Group(group) => {
                    let mut earlier: Vec<PropFormula> = Vec::new();
                    for (cond, children) in &group.branches {
                        let mut parts = vec![context.clone()];
                        parts.extend(earlier.iter().cloned().map(PropFormula::not));
                        if let Some(cond) = cond {
                            parts.push(cond.clone());
                            earlier.push(cond.clone());
                        }
                        let branch_pc = PropFormula::And(parts);
                        walk(children, &branch_pc, out);
                    }
                }
            }
        }
    }

    let mut out = BTreeMap::new();
    walk(&roots, &PropFormula::True, &mut out);
    Ok(out)
}

/// Independent t-tuple coverage check: collects the exhibited value patterns
/// per variable combination and requires all `2^t` of them.
pub fn exhaustive_tuple_check(rows: &[Assignment], num_vars: usize, t: usize) -> bool {
    fn combos(n: usize, t: usize, start: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == t {
            out.push(prefix.clone());
            return;
        }
        for v in start..n {
            prefix.push(v);
            combos(n, t, v + 1, prefix, out);
            prefix.pop();
        }
    }
    let mut all = Vec::new();
    combos(num_vars, t, 0, &mut Vec::new(), &mut all);
    for combo in all {
        let mut seen: HashSet<usize> = HashSet::new();
        for row in rows {
            let mut pattern = 0usize;
            for (bit, &var) in combo.iter().enumerate() {
                if row.values()[var] {
                    pattern |= 1 << bit;
                }
            }
            seen.insert(pattern);
        }
        if seen.len() != 1 << t {
            return false;
        }
    }
    true
}
