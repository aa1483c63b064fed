//! SAT solving and exact weighted partial MaxSAT.
//!
//! The SAT core is a conventional CDCL solver: two watched literals, 1-UIP
//! conflict analysis with activity-based (VSIDS-like) branching, and
//! geometric restarts. Branching is deterministic: ties break toward the
//! lowest variable index and decisions always try `false` first, so the
//! first model found under a fixed input is reproducible run to run.
//!
//! MaxSAT is solved exactly by linear lower-bound strengthening: solve,
//! measure the satisfied soft weight, assert "achieve strictly more" through
//! a weighted sequential counter over per-constraint indicator variables,
//! and repeat until unsatisfiable. The last model is optimal.

use std::collections::BTreeSet;
use std::io::{self, Write};

use thiserror::Error;

use crate::cnf::{CnfBuilder, CnfInstance, Lit};
use crate::formula::{Assignment, PropFormula, VarTable};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolverError {
    #[error("hard constraints are unsatisfiable")]
    HardUnsat,
}

const UNASSIGNED: i8 = 0;

/// Stateful CDCL solver over a fixed variable count. Single-owner: use one
/// instance per thread.
pub struct SatSolver {
    num_vars: usize,
    clauses: Vec<Vec<Lit>>,
    watches: Vec<Vec<usize>>,
    assign: Vec<i8>,
    level: Vec<u32>,
    reason: Vec<Option<usize>>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    activity_inc: f64,
    ok: bool,
}

impl SatSolver {
    pub fn new(num_vars: usize) -> Self {
        SatSolver {
            num_vars,
            clauses: Vec::new(),
            watches: vec![Vec::new(); num_vars * 2],
            assign: vec![UNASSIGNED; num_vars],
            level: vec![0; num_vars],
            reason: vec![None; num_vars],
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            activity: vec![0.0; num_vars],
            activity_inc: 1.0,
            ok: true,
        }
    }

    pub fn from_cnf(cnf: &CnfInstance) -> Self {
        let mut solver = SatSolver::new(cnf.num_vars());
        for clause in &cnf.clauses {
            solver.add_clause(clause.clone());
        }
        solver
    }

    fn lit_value(&self, lit: Lit) -> i8 {
        let v = self.assign[lit.var()];
        if lit.is_positive() {
            v
        } else {
            -v
        }
    }

    fn current_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    /// Adds a clause at decision level zero. Duplicated literals are merged
    /// and tautologies dropped.
    pub fn add_clause(&mut self, mut clause: Vec<Lit>) {
        if !self.ok {
            return;
        }
        debug_assert_eq!(self.current_level(), 0);
        clause.sort_unstable();
        clause.dedup();
        for pair in clause.windows(2) {
            if pair[0].var() == pair[1].var() {
                return; // x ∨ !x
            }
        }
        // Everything assigned at this point sits at the root level, so
        // satisfied clauses vanish and false literals can be dropped.
        if clause.iter().any(|&l| self.lit_value(l) == 1) {
            return;
        }
        clause.retain(|&l| self.lit_value(l) != -1);
        match clause.len() {
            0 => self.ok = false,
            1 => {
                let lit = clause[0];
                match self.lit_value(lit) {
                    1 => {}
                    -1 => self.ok = false,
                    _ => self.enqueue(lit, None),
                }
            }
            _ => {
                let idx = self.clauses.len();
                self.watches[clause[0].code()].push(idx);
                self.watches[clause[1].code()].push(idx);
                self.clauses.push(clause);
            }
        }
    }

    fn enqueue(&mut self, lit: Lit, reason: Option<usize>) {
        debug_assert_eq!(self.lit_value(lit), UNASSIGNED);
        self.assign[lit.var()] = if lit.is_positive() { 1 } else { -1 };
        self.level[lit.var()] = self.current_level();
        self.reason[lit.var()] = reason;
        self.trail.push(lit);
    }

    /// Propagates pending assignments; returns a conflicting clause index.
    fn propagate(&mut self) -> Option<usize> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = !p;
            let watchers = std::mem::take(&mut self.watches[false_lit.code()]);
            let mut kept = Vec::with_capacity(watchers.len());
            let mut conflict = None;
            let mut i = 0;
            while i < watchers.len() {
                let ci = watchers[i];
                i += 1;
                // Keep the falsified literal in slot 1.
                if self.clauses[ci][0] == false_lit {
                    self.clauses[ci].swap(0, 1);
                }
                debug_assert_eq!(self.clauses[ci][1], false_lit);
                let first = self.clauses[ci][0];
                if self.lit_value(first) == 1 {
                    kept.push(ci);
                    continue;
                }
                // Look for a replacement watch.
                let mut moved = false;
                for k in 2..self.clauses[ci].len() {
                    let candidate = self.clauses[ci][k];
                    if self.lit_value(candidate) != -1 {
                        self.clauses[ci].swap(1, k);
                        self.watches[candidate.code()].push(ci);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                // Clause is unit or conflicting.
                kept.push(ci);
                if self.lit_value(first) == -1 {
                    kept.extend_from_slice(&watchers[i..]);
                    conflict = Some(ci);
                    break;
                }
                self.enqueue(first, Some(ci));
            }
            self.watches[false_lit.code()] = kept;
            if conflict.is_some() {
                self.qhead = self.trail.len();
                return conflict;
            }
        }
        None
    }

    fn bump(&mut self, var: usize) {
        self.activity[var] += self.activity_inc;
        if self.activity[var] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.activity_inc *= 1e-100;
        }
    }

    /// First-UIP conflict analysis; returns the learnt clause (asserting
    /// literal first) and the backjump level.
    fn analyze(&mut self, conflict: usize) -> (Vec<Lit>, u32) {
        let mut learnt: Vec<Lit> = Vec::new();
        let mut seen = vec![false; self.num_vars];
        let mut open_at_current = 0usize;
        let mut clause_idx = conflict;
        let mut first_round = true;
        let mut trail_pos = self.trail.len();
        let current = self.current_level();

        let asserting = loop {
            // The first literal of a reason clause is the implied literal
            // itself, already accounted for on the trail walk.
            let skip = usize::from(!first_round);
            first_round = false;
            let lits: Vec<Lit> = self.clauses[clause_idx][skip..].to_vec();
            for q in lits {
                let v = q.var();
                if seen[v] || self.level[v] == 0 {
                    continue;
                }
                seen[v] = true;
                self.bump(v);
                if self.level[v] == current {
                    open_at_current += 1;
                } else {
                    learnt.push(q);
                }
            }
            // Walk the trail backwards to the next marked literal.
            loop {
                trail_pos -= 1;
                if seen[self.trail[trail_pos].var()] {
                    break;
                }
            }
            let p = self.trail[trail_pos];
            seen[p.var()] = false;
            open_at_current -= 1;
            if open_at_current == 0 {
                break !p;
            }
            clause_idx = self.reason[p.var()].expect("non-decision literal has a reason");
        };

        let backjump = learnt.iter().map(|l| self.level[l.var()]).max().unwrap_or(0);
        // Put a literal of the backjump level second, so both watches sit on
        // the highest decision levels in the clause.
        if let Some(pos) = (0..learnt.len()).find(|&i| self.level[learnt[i].var()] == backjump) {
            learnt.swap(0, pos);
        }
        let mut clause = vec![asserting];
        clause.extend(learnt);
        (clause, backjump)
    }

    fn backtrack(&mut self, target_level: u32) {
        while self.current_level() > target_level {
            let limit = self.trail_lim.pop().unwrap();
            while self.trail.len() > limit {
                let lit = self.trail.pop().unwrap();
                self.assign[lit.var()] = UNASSIGNED;
                self.reason[lit.var()] = None;
            }
        }
        self.qhead = self.trail.len();
    }

    /// Lowest-index unassigned variable among those with maximal activity,
    /// decided to `false` first.
    fn decide(&mut self) -> Lit {
        let mut best: Option<usize> = None;
        for v in 0..self.num_vars {
            if self.assign[v] != UNASSIGNED {
                continue;
            }
            match best {
                None => best = Some(v),
                Some(b) if self.activity[v] > self.activity[b] => best = Some(v),
                _ => {}
            }
        }
        Lit::negative(best.expect("decide called with all variables assigned"))
    }

    /// Solves the current clause set; returns a total model or `None`.
    pub fn solve(&mut self) -> Option<Vec<bool>> {
        if !self.ok {
            return None;
        }
        let mut conflicts_since_restart = 0u64;
        let mut restart_limit = 100u64;
        loop {
            if let Some(conflict) = self.propagate() {
                if self.current_level() == 0 {
                    self.ok = false;
                    return None;
                }
                let (learnt, backjump) = self.analyze(conflict);
                self.backtrack(backjump);
                let asserting = learnt[0];
                if learnt.len() == 1 {
                    self.enqueue(asserting, None);
                } else {
                    let idx = self.clauses.len();
                    self.watches[learnt[0].code()].push(idx);
                    self.watches[learnt[1].code()].push(idx);
                    self.clauses.push(learnt);
                    self.enqueue(asserting, Some(idx));
                }
                self.activity_inc /= 0.95;
                conflicts_since_restart += 1;
                if conflicts_since_restart >= restart_limit {
                    conflicts_since_restart = 0;
                    restart_limit = restart_limit * 3 / 2;
                    self.backtrack(0);
                }
            } else if self.trail.len() == self.num_vars {
                return Some(self.assign.iter().map(|&v| v == 1).collect());
            } else {
                let decision = self.decide();
                self.trail_lim.push(self.trail.len());
                self.enqueue(decision, None);
            }
        }
    }
}

/// Solves a CNF instance and returns the model restricted to original vars.
pub fn solve_cnf(cnf: &CnfInstance) -> Option<Assignment> {
    let mut solver = SatSolver::from_cnf(cnf);
    solver
        .solve()
        .map(|model| Assignment::from_values(model[..cnf.num_original_vars].to_vec()))
}

/// Satisfiability of the conjunction of `hard`. Returns a total assignment
/// over `num_vars` variables, or `None` when unsatisfiable. The empty list is
/// trivially satisfiable (all-false model).
pub fn sat(hard: &[PropFormula], num_vars: usize) -> Option<Assignment> {
    let mut builder = CnfBuilder::new(num_vars);
    for f in hard {
        builder.assert_formula(f);
    }
    solve_cnf(&builder.finish())
}

/// Soft constraint: a formula worth `weight` when satisfied. Weights are
/// positive; zero-weight conditions are filtered out before solving.
#[derive(Debug, Clone)]
pub struct SoftConstraint {
    pub formula: PropFormula,
    pub weight: u64,
}

/// Outcome of a MaxSAT call: the optimal model plus the induced partition of
/// soft-constraint indices.
#[derive(Debug, Clone)]
pub struct MaxSatResult {
    pub model: Assignment,
    pub satisfied: BTreeSet<usize>,
    pub unsatisfied: BTreeSet<usize>,
    pub total_weight: u64,
}

fn measure(model: &Assignment, soft: &[SoftConstraint]) -> (BTreeSet<usize>, u64) {
    let mut satisfied = BTreeSet::new();
    let mut weight = 0u64;
    for (i, sc) in soft.iter().enumerate() {
        if sc.formula.evaluate(model) {
            satisfied.insert(i);
            weight = weight.saturating_add(sc.weight);
        }
    }
    (satisfied, weight)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Appends clauses forcing `Σ weight_i · var_i ≥ bound` (weighted sequential
/// counter, one-directional implications).
///
/// The counter is pseudo-polynomial: its size is the item count times the
/// bound, so weights are divided by their common divisor first.
fn encode_weighted_at_least(
    builder: &mut CnfBuilder,
    items: &[(usize, u64)],
    bound: u64,
) {
    if bound == 0 {
        return;
    }
    let total: u64 = items
        .iter()
        .fold(0u64, |acc, &(_, w)| acc.saturating_add(w));
    if bound > total {
        builder.add_clause(Vec::new());
        return;
    }
    // Σ g·w'_i·b_i ≥ bound  ⇔  Σ w'_i·b_i ≥ ⌈bound / g⌉.
    let g = items.iter().fold(0u64, |acc, &(_, w)| gcd(acc, w)).max(1);
    let items: Vec<(usize, u64)> = items.iter().map(|&(v, w)| (v, w / g)).collect();
    let bound = bound.div_ceil(g);
    let n = items.len();
    let k = bound as usize;
    // sums[i][j] ⇔ "the first i items reach weight ≥ j+1"; only the
    // implication toward the items is encoded, which suffices when the
    // top-right cell is asserted.
    let mut sums: Vec<Vec<usize>> = Vec::with_capacity(n);
    for _ in 0..n {
        sums.push((0..k).map(|_| builder.fresh_var()).collect());
    }
    for (i, &(item_var, weight)) in items.iter().enumerate() {
        for j in 1..=k as u64 {
            let s = Lit::positive(sums[i][(j - 1) as usize]);
            // s_{i,j} -> s_{i-1,j} ∨ item_i
            let mut clause_a = vec![!s];
            if i > 0 {
                clause_a.push(Lit::positive(sums[i - 1][(j - 1) as usize]));
            }
            clause_a.push(Lit::positive(item_var));
            builder.add_clause(clause_a);
            // s_{i,j} -> s_{i-1,j} ∨ s_{i-1,j-w}; tautological when j ≤ w.
            if j > weight {
                let mut clause_b = vec![!s];
                if i > 0 {
                    clause_b.push(Lit::positive(sums[i - 1][(j - 1) as usize]));
                    clause_b.push(Lit::positive(sums[i - 1][(j - weight - 1) as usize]));
                }
                builder.add_clause(clause_b);
            }
        }
    }
    builder.add_clause(vec![Lit::positive(sums[n - 1][k - 1])]);
}

/// Exact weighted partial MaxSAT over `num_vars` original variables.
///
/// Maximizes the total weight of satisfied soft constraints subject to every
/// hard constraint holding. Errors with [`SolverError::HardUnsat`] when the
/// hard constraints are contradictory.
pub fn max_sat(
    hard: &[PropFormula],
    soft: &[SoftConstraint],
    num_vars: usize,
) -> Result<MaxSatResult, SolverError> {
    let mut base = CnfBuilder::new(num_vars);
    for f in hard {
        base.assert_formula(f);
    }
    let mut indicators: Vec<(usize, u64)> = Vec::with_capacity(soft.len());
    for sc in soft {
        let formula_lit = base.encode(&sc.formula);
        let indicator = base.fresh_var();
        base.add_clause(vec![Lit::negative(indicator), formula_lit]);
        indicators.push((indicator, sc.weight));
    }

    let mut best_model = match solve_cnf(&base.clone().finish()) {
        Some(model) => model,
        None => return Err(SolverError::HardUnsat),
    };
    let (mut best_satisfied, mut best_weight) = measure(&best_model, soft);

    let total: u64 = soft
        .iter()
        .fold(0u64, |acc, sc| acc.saturating_add(sc.weight));
    while best_weight < total {
        let target = best_weight + 1;
        let mut attempt = base.clone();
        encode_weighted_at_least(&mut attempt, &indicators, target);
        match solve_cnf(&attempt.finish()) {
            None => break,
            Some(model) => {
                let (satisfied, weight) = measure(&model, soft);
                debug_assert!(weight >= target);
                best_model = model;
                best_satisfied = satisfied;
                best_weight = weight;
            }
        }
    }

    let unsatisfied = (0..soft.len())
        .filter(|i| !best_satisfied.contains(i))
        .collect();
    Ok(MaxSatResult {
        model: best_model,
        satisfied: best_satisfied,
        unsatisfied,
        total_weight: best_weight,
    })
}

/// Writes the (hard, soft) instance in DIMACS WCNF for cross-checking with
/// external MaxSAT solvers. Soft formulas are reified to unit soft clauses;
/// the hard-clause weight on the `p` line is `1 + Σ soft weights`.
pub fn export_wcnf(
    hard: &[PropFormula],
    soft: &[SoftConstraint],
    vars: &VarTable,
    out: &mut impl Write,
) -> io::Result<()> {
    let mut builder = CnfBuilder::new(vars.len());
    for f in hard {
        builder.assert_formula(f);
    }
    let soft_lits: Vec<(Lit, u64)> = soft
        .iter()
        .map(|sc| (builder.encode(&sc.formula), sc.weight))
        .collect();
    let cnf = builder.finish();
    let top: u64 = soft
        .iter()
        .fold(1u64, |acc, sc| acc.saturating_add(sc.weight));

    for (i, name) in vars.names().enumerate() {
        writeln!(out, "c var {} = {}", i + 1, name)?;
    }
    writeln!(
        out,
        "p wcnf {} {} {}",
        cnf.num_vars(),
        cnf.clauses.len() + soft_lits.len(),
        top
    )?;
    for clause in &cnf.clauses {
        write!(out, "{top}")?;
        for lit in clause {
            write!(out, " {}", lit.dimacs())?;
        }
        writeln!(out, " 0")?;
    }
    for (lit, weight) in soft_lits {
        writeln!(out, "{} {} 0", weight, lit.dimacs())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{parse_formula, VarTable};

    fn setup(texts: &[&str]) -> (Vec<PropFormula>, VarTable) {
        let mut vars = VarTable::new();
        let formulas = texts
            .iter()
            .map(|t| parse_formula(t, &mut vars).unwrap())
            .collect();
        (formulas, vars)
    }

    #[test]
    fn sat_finds_the_forced_model() {
        // Verified by enumerating all eight assignments: the only models set
        // C4=1, C5=0, C6=1.
        let (formulas, vars) = setup(&["C4 || C5", "!C5 && C6"]);
        let model = sat(&formulas, vars.len()).unwrap();
        assert!(model.get(vars.lookup("C4").unwrap()));
        assert!(!model.get(vars.lookup("C5").unwrap()));
        assert!(model.get(vars.lookup("C6").unwrap()));
    }

    #[test]
    fn sat_reports_contradiction() {
        let (formulas, vars) = setup(&["C5", "!C5"]);
        assert!(sat(&formulas, vars.len()).is_none());
    }

    #[test]
    fn sat_of_empty_conjunction_is_trivial() {
        assert!(sat(&[], 3).is_some());
    }

    #[test]
    fn max_sat_prefers_the_heavier_branch() {
        // Soft: C4||C5 (1), C5 (2), !C5&&C6 (1). Optimum sets C5, weight 3.
        let (formulas, vars) = setup(&["C4 || C5", "C5", "!C5 && C6"]);
        let soft: Vec<SoftConstraint> = formulas
            .iter()
            .zip([1u64, 2, 1])
            .map(|(f, weight)| SoftConstraint {
                formula: f.clone(),
                weight,
            })
            .collect();
        let result = max_sat(&[], &soft, vars.len()).unwrap();
        assert_eq!(result.total_weight, 3);
        assert!(result.model.get(vars.lookup("C5").unwrap()));
        assert_eq!(result.satisfied, BTreeSet::from([0, 1]));
        assert_eq!(result.unsatisfied, BTreeSet::from([2]));
    }

    #[test]
    fn max_sat_with_dropped_middle_constraint() {
        // Without the C5 soft constraint the optimum flips: C4 and C6 true,
        // C5 false, weight 2.
        let (formulas, vars) = setup(&["C4 || C5", "!C5 && C6"]);
        let soft: Vec<SoftConstraint> = formulas
            .iter()
            .map(|f| SoftConstraint {
                formula: f.clone(),
                weight: 1,
            })
            .collect();
        let result = max_sat(&[], &soft, vars.len()).unwrap();
        assert_eq!(result.total_weight, 2);
        assert!(result.model.get(vars.lookup("C4").unwrap()));
        assert!(!result.model.get(vars.lookup("C5").unwrap()));
        assert!(result.model.get(vars.lookup("C6").unwrap()));
    }

    #[test]
    fn hard_constraint_forces_soft_violation() {
        let (formulas, vars) = setup(&["!C1", "C1"]);
        let soft = vec![SoftConstraint {
            formula: formulas[1].clone(),
            weight: 5,
        }];
        let result = max_sat(&formulas[..1], &soft, vars.len()).unwrap();
        assert_eq!(result.total_weight, 0);
        assert_eq!(result.unsatisfied, BTreeSet::from([0]));
        assert!(result.satisfied.is_empty());
    }

    #[test]
    fn contradictory_hard_constraints_error() {
        let (formulas, vars) = setup(&["C1", "!C1"]);
        assert_eq!(
            max_sat(&formulas, &[], vars.len()).unwrap_err(),
            SolverError::HardUnsat
        );
    }

    #[test]
    fn extreme_weights_terminate_with_the_right_partition() {
        // Regression: the strengthening loop once overflowed past the total
        // weight and re-solved forever. Saturating totals plus the
        // best-equals-total early exit end the search after the first model
        // when everything is satisfied, and gcd normalization keeps the
        // counter small for huge commensurate weights.
        let (formulas, vars) = setup(&["C1", "!C1 && C2", "C2"]);
        let soft: Vec<SoftConstraint> = formulas
            .iter()
            .map(|f| SoftConstraint {
                formula: f.clone(),
                weight: u64::MAX / 2,
            })
            .collect();
        let result = max_sat(&[], &soft, vars.len()).unwrap();
        // C1 and !C1&&C2 are exclusive; two of the three can hold.
        assert_eq!(result.satisfied.len(), 2);
        assert_eq!(result.total_weight, (u64::MAX / 2) * 2);

        // Single max-weight constraint: satisfied immediately, loop exits.
        let soft = vec![SoftConstraint {
            formula: formulas[0].clone(),
            weight: u64::MAX,
        }];
        let result = max_sat(&[], &soft, vars.len()).unwrap();
        assert_eq!(result.total_weight, u64::MAX);
        assert_eq!(result.satisfied.len(), 1);
    }

    #[test]
    fn gcd_normalization_matches_plain_weights() {
        let (formulas, vars) = setup(&["C1 || C2", "C2", "!C2 && C3"]);
        let scaled: Vec<SoftConstraint> = formulas
            .iter()
            .zip([1u64, 2, 1])
            .map(|(f, w)| SoftConstraint {
                formula: f.clone(),
                weight: w * (1 << 40),
            })
            .collect();
        let result = max_sat(&[], &scaled, vars.len()).unwrap();
        assert_eq!(result.total_weight, 3 * (1 << 40));
        assert_eq!(result.satisfied, BTreeSet::from([0, 1]));
    }

    #[test]
    fn wcnf_export_shape() {
        let (formulas, vars) = setup(&["C1 || C2", "C2"]);
        let soft = vec![SoftConstraint {
            formula: formulas[1].clone(),
            weight: 4,
        }];
        let mut out = Vec::new();
        export_wcnf(&formulas[..1], &soft, &vars, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let header = text
            .lines()
            .find(|l| l.starts_with("p wcnf"))
            .expect("missing p line");
        let fields: Vec<&str> = header.split_whitespace().collect();
        assert_eq!(fields[0], "p");
        assert_eq!(fields[1], "wcnf");
        // top weight = 1 + Σ soft weights
        assert_eq!(fields[4], "5");
        assert!(text.lines().any(|l| l == "c var 1 = C1"));
        assert!(text.lines().any(|l| l.starts_with("4 ") && l.ends_with(" 0")));
    }
}
