//! Covering arrays: import, greedy generation, and metric scoring.
//!
//! A t-way covering array over boolean variables exhibits every value
//! combination of every t variables in some row. Arrays may be imported from
//! CSV (header of variable names, rows of 0/1) or generated greedily: each
//! new row embeds one still-uncovered tuple, the remaining positions are
//! filled randomly, and the best of a small candidate pool is kept. Rows are
//! total assignments, so scoring decides condition enablement by direct
//! evaluation.

use thiserror::Error;

use crate::extract::PcMap;
use crate::formula::{Assignment, VarTable};
use crate::metrics::{score_assignment, CostFunction};
use crate::rng::Rng;

#[derive(Debug, Clone)]
pub struct CoveringArray {
    /// Interaction strength for generated arrays; imported arrays are
    /// scored as-is.
    pub strength: Option<u32>,
    pub rows: Vec<Assignment>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CitError {
    #[error("row {row}, column {col}: {message}")]
    Format {
        row: usize,
        col: usize,
        message: String,
    },
    #[error("covering array needs at least {t} variables, got {actual}")]
    TooFewVariables { t: u32, actual: usize },
}

/// Parses CSV text with a header row of variable names and 0/1 value rows.
/// Header variables must exist in `vars`; variables absent from the header
/// default to false so that rows stay total.
pub fn import_array(text: &str, vars: &VarTable) -> Result<CoveringArray, CitError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| CitError::Format {
        row: 0,
        col: 0,
        message: "empty file (missing header row)".into(),
    })?;
    let mut columns = Vec::new();
    for (col, name) in header.split(',').enumerate() {
        let name = name.trim();
        let id = vars.lookup(name).ok_or_else(|| CitError::Format {
            row: 1,
            col: col + 1,
            message: format!("unknown variable `{name}`"),
        })?;
        columns.push(id);
    }

    let mut rows = Vec::new();
    for (line_idx, line) in lines {
        let row_no = line_idx + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != columns.len() {
            return Err(CitError::Format {
                row: row_no,
                col: cells.len(),
                message: format!(
                    "expected {} values, found {}",
                    columns.len(),
                    cells.len()
                ),
            });
        }
        let mut assignment = Assignment::all_false(vars.len());
        for (col, cell) in cells.iter().enumerate() {
            let value = match cell.trim() {
                "0" => false,
                "1" => true,
                other => {
                    return Err(CitError::Format {
                        row: row_no,
                        col: col + 1,
                        message: format!("expected 0 or 1, found `{other}`"),
                    })
                }
            };
            assignment.set(columns[col], value);
        }
        rows.push(assignment);
    }
    Ok(CoveringArray {
        strength: None,
        rows,
    })
}

/// Renders an array as CSV with all variables in interning order.
pub fn write_array_csv(array: &CoveringArray, vars: &VarTable) -> String {
    let mut out = String::new();
    let names: Vec<&str> = vars.names().collect();
    out.push_str(&names.join(","));
    out.push('\n');
    for row in &array.rows {
        let cells: Vec<&str> = vars
            .ids()
            .map(|id| if row.get(id) { "1" } else { "0" })
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// All sorted index combinations of size `t` from `0..n`, lexicographic.
fn combinations(n: usize, t: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut combo: Vec<usize> = (0..t).collect();
    if t == 0 || t > n {
        return out;
    }
    loop {
        out.push(combo.clone());
        // Advance the rightmost index that can still move.
        let mut i = t;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if combo[i] != i + n - t {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        combo[i] += 1;
        for j in i + 1..t {
            combo[j] = combo[j - 1] + 1;
        }
    }
}

/// Tuple tracker: one bit per (variable combination, value pattern).
struct TupleSpace {
    combos: Vec<Vec<usize>>,
    t: usize,
    covered: Vec<bool>,
    remaining: usize,
}

impl TupleSpace {
    fn new(n: usize, t: usize) -> TupleSpace {
        let combos = combinations(n, t);
        let total = combos.len() << t;
        TupleSpace {
            combos,
            t,
            covered: vec![false; total],
            remaining: total,
        }
    }

    fn pattern_of(&self, combo: &[usize], row: &Assignment) -> usize {
        let mut pattern = 0usize;
        for (bit, &var) in combo.iter().enumerate() {
            if row.values()[var] {
                pattern |= 1 << bit;
            }
        }
        pattern
    }

    fn count_new(&self, row: &Assignment) -> usize {
        self.combos
            .iter()
            .enumerate()
            .filter(|(ci, combo)| {
                let idx = (*ci << self.t) | self.pattern_of(combo, row);
                !self.covered[idx]
            })
            .count()
    }

    fn mark(&mut self, row: &Assignment) {
        for (ci, combo) in self.combos.iter().enumerate() {
            let mut pattern = 0usize;
            for (bit, &var) in combo.iter().enumerate() {
                if row.values()[var] {
                    pattern |= 1 << bit;
                }
            }
            let idx = (ci << self.t) | pattern;
            if !self.covered[idx] {
                self.covered[idx] = true;
                self.remaining -= 1;
            }
        }
    }

    /// First uncovered (combo index, pattern) in lexicographic order.
    fn first_uncovered(&self) -> Option<(usize, usize)> {
        self.covered
            .iter()
            .position(|&c| !c)
            .map(|idx| (idx >> self.t, idx & ((1 << self.t) - 1)))
    }
}

const CANDIDATE_POOL: usize = 16;

/// Greedy one-row-at-a-time construction: each row embeds the first
/// still-uncovered tuple, fills the rest randomly, and the candidate
/// covering the most new tuples wins. Every row covers at least one new
/// tuple, so at most `2^t · C(n, t)` rows are emitted; the covering
/// invariant is verified before returning.
pub fn generate_array(vars: &VarTable, t: u32, rng_seed: u64) -> Result<CoveringArray, CitError> {
    let n = vars.len();
    if n < t as usize {
        return Err(CitError::TooFewVariables { t, actual: n });
    }
    let mut rng = Rng::new(rng_seed);
    let mut space = TupleSpace::new(n, t as usize);
    let mut rows: Vec<Assignment> = Vec::new();

    while space.remaining > 0 {
        let (combo_idx, pattern) = space.first_uncovered().expect("remaining > 0");
        let combo = space.combos[combo_idx].clone();
        let mut best: Option<(usize, Assignment)> = None;
        for _ in 0..CANDIDATE_POOL {
            let mut values: Vec<bool> = (0..n).map(|_| rng.bool()).collect();
            for (bit, &var) in combo.iter().enumerate() {
                values[var] = pattern >> bit & 1 == 1;
            }
            let candidate = Assignment::from_values(values);
            let gain = space.count_new(&candidate);
            if best.as_ref().is_none_or(|(b, _)| gain > *b) {
                best = Some((gain, candidate));
            }
        }
        let (gain, row) = best.unwrap();
        debug_assert!(gain >= 1, "embedded tuple is always new");
        space.mark(&row);
        rows.push(row);
    }

    let array = CoveringArray {
        strength: Some(t),
        rows,
    };
    debug_assert!(verify_coverage(&array.rows, n, t as usize).is_ok());
    Ok(array)
}

/// Exhaustively checks the covering property; returns the first missing
/// (variable indices, value pattern) on failure.
pub fn verify_coverage(
    rows: &[Assignment],
    num_vars: usize,
    t: usize,
) -> Result<(), (Vec<usize>, Vec<bool>)> {
    for combo in combinations(num_vars, t) {
        for pattern in 0..(1usize << t) {
            let exhibited = rows.iter().any(|row| {
                combo
                    .iter()
                    .enumerate()
                    .all(|(bit, &var)| row.values()[var] == (pattern >> bit & 1 == 1))
            });
            if !exhibited {
                let values = (0..t).map(|bit| pattern >> bit & 1 == 1).collect();
                return Err((combo, values));
            }
        }
    }
    Ok(())
}

/// Per-row metric scores plus the best score and the first 1-based step
/// attaining it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrayScore {
    /// `(step, score)`, step is the 1-based row index.
    pub rows: Vec<(usize, u64)>,
    pub best_score: u64,
    pub best_step: usize,
    /// Rows that violate the feature model (reported, not filtered).
    pub fm_violations: usize,
}

/// Scores every row by evaluating which conditions it enables. Empty arrays
/// score best 0 at step 0.
pub fn score_array(
    array: &CoveringArray,
    map: &PcMap,
    cost: &CostFunction,
    lcu_count_unique: bool,
) -> ArrayScore {
    let mut rows = Vec::with_capacity(array.rows.len());
    let mut best_score = 0;
    let mut best_step = 0;
    let mut fm_violations = 0;
    for (i, row) in array.rows.iter().enumerate() {
        let step = i + 1;
        let score = score_assignment(map, row, cost, lcu_count_unique);
        if !map.feature_model.evaluate(row) {
            fm_violations += 1;
        }
        if best_step == 0 || score > best_score {
            best_score = score;
            best_step = step;
        }
        rows.push((step, score));
    }
    ArrayScore {
        rows,
        best_score,
        best_step,
        fm_violations,
    }
}
