//! Equisatisfiable CNF encoding of formulas (Tseitin-style).
//!
//! The transformation is structure preserving: one fresh auxiliary variable
//! per `And`/`Or` node with defining clauses in both directions, so every CNF
//! model restricted to the original variables satisfies the source formula,
//! and every model of the source extends to exactly one CNF model. Negation
//! costs nothing (literal polarity), so deeply nested presence conditions
//! stay linear in size.

use crate::formula::PropFormula;

/// Signed literal over original plus auxiliary solver variables.
///
/// Encoded minisat-style as `var << 1 | sign` so a literal doubles as an
/// index into watch lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit(u32);

impl Lit {
    pub fn new(var: usize, positive: bool) -> Lit {
        Lit(((var as u32) << 1) | u32::from(!positive))
    }

    pub fn positive(var: usize) -> Lit {
        Lit::new(var, true)
    }

    pub fn negative(var: usize) -> Lit {
        Lit::new(var, false)
    }

    pub fn var(self) -> usize {
        (self.0 >> 1) as usize
    }

    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    /// Dense index usable for watch lists (`2 * var + sign`).
    pub fn code(self) -> usize {
        self.0 as usize
    }

    /// Signed DIMACS form: 1-based, negative for negated literals.
    pub fn dimacs(self) -> i64 {
        let v = self.var() as i64 + 1;
        if self.is_positive() {
            v
        } else {
            -v
        }
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

/// Clausal form of one or more formulas over a shared variable space.
#[derive(Debug, Clone)]
pub struct CnfInstance {
    pub clauses: Vec<Vec<Lit>>,
    pub num_original_vars: usize,
    pub num_aux_vars: usize,
}

impl CnfInstance {
    pub fn num_vars(&self) -> usize {
        self.num_original_vars + self.num_aux_vars
    }
}

/// Incremental Tseitin encoder. Multiple formulas may be encoded into the
/// same variable space; auxiliary variables are numbered after the originals
/// in construction order, which keeps instances reproducible.
#[derive(Debug, Clone)]
pub struct CnfBuilder {
    num_original: usize,
    next_var: usize,
    clauses: Vec<Vec<Lit>>,
    const_true: Option<usize>,
}

impl CnfBuilder {
    pub fn new(num_original_vars: usize) -> Self {
        CnfBuilder {
            num_original: num_original_vars,
            next_var: num_original_vars,
            clauses: Vec::new(),
            const_true: None,
        }
    }

    pub fn fresh_var(&mut self) -> usize {
        let v = self.next_var;
        self.next_var += 1;
        v
    }

    pub fn add_clause(&mut self, clause: Vec<Lit>) {
        self.clauses.push(clause);
    }

    /// Literal that is true in every model; materialized on first use.
    fn const_true_lit(&mut self) -> Lit {
        let var = match self.const_true {
            Some(v) => v,
            None => {
                let v = self.fresh_var();
                self.clauses.push(vec![Lit::positive(v)]);
                self.const_true = Some(v);
                v
            }
        };
        Lit::positive(var)
    }

    /// Encodes `f` and returns a literal equivalent to it. Constants fold to
    /// the shared always-true variable (or its negation).
    pub fn encode(&mut self, f: &PropFormula) -> Lit {
        let folded = f.fold();
        self.encode_folded(&folded)
    }

    fn encode_folded(&mut self, f: &PropFormula) -> Lit {
        match f {
            PropFormula::True => self.const_true_lit(),
            PropFormula::False => !self.const_true_lit(),
            PropFormula::Var(v) => Lit::positive(v.index()),
            PropFormula::Not(inner) => !self.encode_folded(inner),
            PropFormula::And(children) => {
                let lits: Vec<Lit> = children.iter().map(|c| self.encode_folded(c)).collect();
                let gate = Lit::positive(self.fresh_var());
                // gate -> each child; all children -> gate.
                let mut long = Vec::with_capacity(lits.len() + 1);
                long.push(gate);
                for &l in &lits {
                    self.clauses.push(vec![!gate, l]);
                    long.push(!l);
                }
                self.clauses.push(long);
                gate
            }
            PropFormula::Or(children) => {
                let lits: Vec<Lit> = children.iter().map(|c| self.encode_folded(c)).collect();
                let gate = Lit::positive(self.fresh_var());
                // each child -> gate; gate -> some child.
                let mut long = Vec::with_capacity(lits.len() + 1);
                long.push(!gate);
                for &l in &lits {
                    self.clauses.push(vec![gate, !l]);
                    long.push(l);
                }
                self.clauses.push(long);
                gate
            }
        }
    }

    /// Encodes `f` and asserts it true. `True` adds nothing; `False` adds the
    /// empty clause.
    pub fn assert_formula(&mut self, f: &PropFormula) {
        match f.fold() {
            PropFormula::True => {}
            PropFormula::False => self.clauses.push(Vec::new()),
            folded => {
                let root = self.encode_folded(&folded);
                self.clauses.push(vec![root]);
            }
        }
    }

    pub fn finish(self) -> CnfInstance {
        CnfInstance {
            clauses: self.clauses,
            num_original_vars: self.num_original,
            num_aux_vars: self.next_var - self.num_original,
        }
    }
}

/// Converts a single formula to an equisatisfiable CNF, asserted true.
pub fn to_cnf(f: &PropFormula, num_original_vars: usize) -> CnfInstance {
    let mut builder = CnfBuilder::new(num_original_vars);
    builder.assert_formula(f);
    builder.finish()
}
