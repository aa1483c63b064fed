//! Propositional formulas over named boolean configuration variables.
//!
//! Presence conditions, feature models, and configuration formulas are all
//! values of [`PropFormula`]. Variable names are interned into a [`VarTable`]
//! in first-appearance order; that order fixes the dense indices used by
//! [`Assignment`] vectors and by every bit-string encoding downstream.
//!
//! The concrete syntax is infix with `!`, `&&`, `||`, parentheses, and the
//! literals `true`/`false`; `!` binds tighter than `&&`, which binds tighter
//! than `||`. [`parse_cpp_expr`] additionally accepts the directive dialect:
//! `defined(X)` / `defined X` normalize to the bare variable, `0`/`1` map to
//! the boolean literals, and anything arithmetic is rejected.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

/// Index of an interned configuration variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn from_index(index: usize) -> Self {
        VarId(index as u32)
    }
}

/// Append-only interning table mapping variable names to dense indices.
///
/// Interning the same name twice yields the same id; indices form a bijection
/// onto `0..len()`. The table is grown while parsing inputs and treated as
/// frozen afterwards.
#[derive(Debug, Default, Clone)]
pub struct VarTable {
    names: Vec<String>,
    by_name: HashMap<String, VarId>,
}

impl VarTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> VarId {
        if let Some(&id) = self.by_name.get(name) {
            return id;
        }
        let id = VarId(self.names.len() as u32);
        self.names.push(name.to_string());
        self.by_name.insert(name.to_string(), id);
        id
    }

    pub fn lookup(&self, name: &str) -> Option<VarId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: VarId) -> &str {
        &self.names[id.index()]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Variable names in interning order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(|s| s.as_str())
    }

    pub fn ids(&self) -> impl Iterator<Item = VarId> {
        (0..self.names.len() as u32).map(VarId)
    }
}

/// Propositional formula tree.
///
/// `And`/`Or` children are non-empty by construction everywhere in this
/// crate; [`conjoin`]/[`disjoin`] fold away empty and constant cases.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PropFormula {
    True,
    False,
    Var(VarId),
    Not(Box<PropFormula>),
    And(Vec<PropFormula>),
    Or(Vec<PropFormula>),
}

impl PropFormula {
    pub fn var(id: VarId) -> Self {
        PropFormula::Var(id)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: PropFormula) -> Self {
        PropFormula::Not(Box::new(f))
    }

    /// Standard boolean semantics under a total assignment.
    pub fn evaluate(&self, assignment: &Assignment) -> bool {
        match self {
            PropFormula::True => true,
            PropFormula::False => false,
            PropFormula::Var(v) => assignment.get(*v),
            PropFormula::Not(f) => !f.evaluate(assignment),
            PropFormula::And(fs) => fs.iter().all(|f| f.evaluate(assignment)),
            PropFormula::Or(fs) => fs.iter().any(|f| f.evaluate(assignment)),
        }
    }

    /// Collects every variable occurring in the formula.
    pub fn collect_vars(&self, out: &mut BTreeSet<VarId>) {
        match self {
            PropFormula::True | PropFormula::False => {}
            PropFormula::Var(v) => {
                out.insert(*v);
            }
            PropFormula::Not(f) => f.collect_vars(out),
            PropFormula::And(fs) | PropFormula::Or(fs) => {
                for f in fs {
                    f.collect_vars(out);
                }
            }
        }
    }

    pub fn vars(&self) -> BTreeSet<VarId> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    /// Constant folding: removes `True`/`False` below the root, flattens
    /// nested `And`/`Or`, and cancels double negation. The result is
    /// semantically equal to the input.
    pub fn fold(&self) -> PropFormula {
        match self {
            PropFormula::True => PropFormula::True,
            PropFormula::False => PropFormula::False,
            PropFormula::Var(v) => PropFormula::Var(*v),
            PropFormula::Not(f) => match f.fold() {
                PropFormula::True => PropFormula::False,
                PropFormula::False => PropFormula::True,
                PropFormula::Not(inner) => *inner,
                other => PropFormula::not(other),
            },
            PropFormula::And(fs) => {
                let mut out = Vec::new();
                for f in fs {
                    match f.fold() {
                        PropFormula::True => {}
                        PropFormula::False => return PropFormula::False,
                        PropFormula::And(inner) => out.extend(inner),
                        other => out.push(other),
                    }
                }
                match out.len() {
                    0 => PropFormula::True,
                    1 => out.pop().unwrap(),
                    _ => PropFormula::And(out),
                }
            }
            PropFormula::Or(fs) => {
                let mut out = Vec::new();
                for f in fs {
                    match f.fold() {
                        PropFormula::False => {}
                        PropFormula::True => return PropFormula::True,
                        PropFormula::Or(inner) => out.extend(inner),
                        other => out.push(other),
                    }
                }
                match out.len() {
                    0 => PropFormula::False,
                    1 => out.pop().unwrap(),
                    _ => PropFormula::Or(out),
                }
            }
        }
    }

    /// Minimally parenthesized infix form using names from `vars`.
    pub fn print(&self, vars: &VarTable) -> String {
        let mut s = String::new();
        self.print_prec(vars, 0, &mut s);
        s
    }

    // Precedence: Or = 1, And = 2, Not = 3, atoms = 4. A child is
    // parenthesized when its level is below the context's requirement.
    fn print_prec(&self, vars: &VarTable, min_level: u8, out: &mut String) {
        let level = match self {
            PropFormula::Or(_) => 1,
            PropFormula::And(_) => 2,
            PropFormula::Not(_) => 3,
            _ => 4,
        };
        let parens = level < min_level;
        if parens {
            out.push('(');
        }
        match self {
            PropFormula::True => out.push_str("true"),
            PropFormula::False => out.push_str("false"),
            PropFormula::Var(v) => out.push_str(vars.name(*v)),
            PropFormula::Not(f) => {
                out.push('!');
                f.print_prec(vars, 4, out);
            }
            PropFormula::And(fs) => {
                for (i, f) in fs.iter().enumerate() {
                    if i > 0 {
                        out.push_str(" && ");
                    }
                    f.print_prec(vars, 2, out);
                }
            }
            PropFormula::Or(fs) => {
                for (i, f) in fs.iter().enumerate() {
                    if i > 0 {
                        out.push_str(" || ");
                    }
                    f.print_prec(vars, 1, out);
                }
            }
        }
        if parens {
            out.push(')');
        }
    }
}

/// Conjunction of `parts` with constant folding applied.
pub fn conjoin(parts: Vec<PropFormula>) -> PropFormula {
    PropFormula::And(parts).fold()
}

/// Disjunction of `parts` with constant folding applied.
pub fn disjoin(parts: Vec<PropFormula>) -> PropFormula {
    PropFormula::Or(parts).fold()
}

/// Total assignment of configuration variables, dense over a [`VarTable`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    values: Vec<bool>,
}

impl Assignment {
    pub fn all_false(len: usize) -> Self {
        Assignment {
            values: vec![false; len],
        }
    }

    pub fn from_values(values: Vec<bool>) -> Self {
        Assignment { values }
    }

    pub fn get(&self, id: VarId) -> bool {
        self.values[id.index()]
    }

    pub fn set(&mut self, id: VarId, value: bool) {
        self.values[id.index()] = value;
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    /// Names of the variables set to true, in interning order.
    pub fn enabled_names<'a>(&'a self, vars: &'a VarTable) -> impl Iterator<Item = &'a str> {
        vars.ids()
            .filter(|id| self.get(*id))
            .map(move |id| vars.name(id))
    }
}

/// Error for malformed formula text, with the byte offset of the problem.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at byte {offset}: {message}")]
pub struct SyntaxError {
    pub offset: usize,
    pub message: String,
}

/// Errors from the `#if` expression dialect.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CppExprError {
    #[error("{0}")]
    Syntax(#[from] SyntaxError),
    /// Arithmetic or other non-boolean constructs; reported rather than
    /// silently treated as opaque atoms.
    #[error("unsupported expression at byte {offset}: {message}")]
    Unsupported { offset: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token<'a> {
    Ident(&'a str),
    True,
    False,
    Not,
    AndAnd,
    OrOr,
    LParen,
    RParen,
    Eof,
}

struct Lexer<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
    cpp: bool,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str, cpp: bool) -> Self {
        Lexer {
            text,
            bytes: text.as_bytes(),
            pos: 0,
            cpp,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn next_token(&mut self) -> Result<(Token<'a>, usize), CppExprError> {
        self.skip_ws();
        let start = self.pos;
        if self.pos >= self.bytes.len() {
            return Ok((Token::Eof, start));
        }
        let b = self.bytes[self.pos];
        match b {
            b'(' => {
                self.pos += 1;
                Ok((Token::LParen, start))
            }
            b')' => {
                self.pos += 1;
                Ok((Token::RParen, start))
            }
            b'!' => {
                // `!=` is arithmetic, not negation.
                if self.cpp && self.bytes.get(self.pos + 1) == Some(&b'=') {
                    return Err(CppExprError::Unsupported {
                        offset: start,
                        message: "comparison operator `!=`".into(),
                    });
                }
                self.pos += 1;
                Ok((Token::Not, start))
            }
            b'&' => {
                if self.bytes.get(self.pos + 1) == Some(&b'&') {
                    self.pos += 2;
                    Ok((Token::AndAnd, start))
                } else if self.cpp {
                    Err(CppExprError::Unsupported {
                        offset: start,
                        message: "bitwise operator `&`".into(),
                    })
                } else {
                    Err(self.syntax(start, "expected `&&`"))
                }
            }
            b'|' => {
                if self.bytes.get(self.pos + 1) == Some(&b'|') {
                    self.pos += 2;
                    Ok((Token::OrOr, start))
                } else if self.cpp {
                    Err(CppExprError::Unsupported {
                        offset: start,
                        message: "bitwise operator `|`".into(),
                    })
                } else {
                    Err(self.syntax(start, "expected `||`"))
                }
            }
            b'_' | b'a'..=b'z' | b'A'..=b'Z' => {
                let mut end = self.pos;
                while end < self.bytes.len()
                    && (self.bytes[end] == b'_' || self.bytes[end].is_ascii_alphanumeric())
                {
                    end += 1;
                }
                let word = &self.text[self.pos..end];
                self.pos = end;
                match word {
                    "true" => Ok((Token::True, start)),
                    "false" => Ok((Token::False, start)),
                    _ => Ok((Token::Ident(word), start)),
                }
            }
            b'0'..=b'9' if self.cpp => {
                let mut end = self.pos;
                while end < self.bytes.len()
                    && (self.bytes[end].is_ascii_alphanumeric() || self.bytes[end] == b'_')
                {
                    end += 1;
                }
                let num = &self.text[self.pos..end];
                self.pos = end;
                match num {
                    "0" => Ok((Token::False, start)),
                    "1" => Ok((Token::True, start)),
                    _ => Err(CppExprError::Unsupported {
                        offset: start,
                        message: format!("numeric literal `{num}`"),
                    }),
                }
            }
            _ => {
                let ch = self.text[self.pos..].chars().next().unwrap();
                if self.cpp {
                    Err(CppExprError::Unsupported {
                        offset: start,
                        message: format!("operator `{ch}` (only boolean expressions are supported)"),
                    })
                } else {
                    Err(self.syntax(start, &format!("unexpected character `{ch}`")))
                }
            }
        }
    }

    fn syntax(&self, offset: usize, message: &str) -> CppExprError {
        CppExprError::Syntax(SyntaxError {
            offset,
            message: message.to_string(),
        })
    }
}

struct Parser<'a, 'v> {
    lexer: Lexer<'a>,
    vars: &'v mut VarTable,
    current: Token<'a>,
    current_offset: usize,
}

impl<'a, 'v> Parser<'a, 'v> {
    fn new(text: &'a str, vars: &'v mut VarTable, cpp: bool) -> Result<Self, CppExprError> {
        let mut lexer = Lexer::new(text, cpp);
        let (current, current_offset) = lexer.next_token()?;
        Ok(Parser {
            lexer,
            vars,
            current,
            current_offset,
        })
    }

    fn advance(&mut self) -> Result<(), CppExprError> {
        let (tok, off) = self.lexer.next_token()?;
        self.current = tok;
        self.current_offset = off;
        Ok(())
    }

    fn parse_or(&mut self) -> Result<PropFormula, CppExprError> {
        let first = self.parse_and()?;
        if self.current != Token::OrOr {
            return Ok(first);
        }
        let mut children = vec![first];
        while self.current == Token::OrOr {
            self.advance()?;
            children.push(self.parse_and()?);
        }
        Ok(PropFormula::Or(children))
    }

    fn parse_and(&mut self) -> Result<PropFormula, CppExprError> {
        let first = self.parse_unary()?;
        if self.current != Token::AndAnd {
            return Ok(first);
        }
        let mut children = vec![first];
        while self.current == Token::AndAnd {
            self.advance()?;
            children.push(self.parse_unary()?);
        }
        Ok(PropFormula::And(children))
    }

    fn parse_unary(&mut self) -> Result<PropFormula, CppExprError> {
        if self.current == Token::Not {
            self.advance()?;
            return Ok(PropFormula::not(self.parse_unary()?));
        }
        self.parse_atom()
    }

    fn parse_atom(&mut self) -> Result<PropFormula, CppExprError> {
        match self.current {
            Token::True => {
                self.advance()?;
                Ok(PropFormula::True)
            }
            Token::False => {
                self.advance()?;
                Ok(PropFormula::False)
            }
            Token::Ident("defined") if self.lexer.cpp => {
                self.advance()?;
                // `defined(X)` and `defined X` both normalize to `X`.
                let parenthesized = self.current == Token::LParen;
                if parenthesized {
                    self.advance()?;
                }
                let name = match self.current {
                    Token::Ident(name) => name.to_string(),
                    _ => {
                        return Err(CppExprError::Syntax(SyntaxError {
                            offset: self.current_offset,
                            message: "expected identifier after `defined`".into(),
                        }))
                    }
                };
                self.advance()?;
                if parenthesized {
                    if self.current != Token::RParen {
                        return Err(CppExprError::Syntax(SyntaxError {
                            offset: self.current_offset,
                            message: "expected `)` after `defined(NAME`".into(),
                        }));
                    }
                    self.advance()?;
                }
                Ok(PropFormula::Var(self.vars.intern(&name)))
            }
            Token::Ident(name) => {
                let id = self.vars.intern(name);
                self.advance()?;
                Ok(PropFormula::Var(id))
            }
            Token::LParen => {
                self.advance()?;
                let inner = self.parse_or()?;
                if self.current != Token::RParen {
                    return Err(CppExprError::Syntax(SyntaxError {
                        offset: self.current_offset,
                        message: "expected `)`".into(),
                    }));
                }
                self.advance()?;
                Ok(inner)
            }
            _ => Err(CppExprError::Syntax(SyntaxError {
                offset: self.current_offset,
                message: "expected identifier, literal, `!`, or `(`".into(),
            })),
        }
    }

    fn parse_full(&mut self) -> Result<PropFormula, CppExprError> {
        let f = self.parse_or()?;
        if self.current != Token::Eof {
            return Err(CppExprError::Syntax(SyntaxError {
                offset: self.current_offset,
                message: "trailing input after formula".into(),
            }));
        }
        Ok(f)
    }
}

/// Parses the strict formula grammar, interning new variable names.
pub fn parse_formula(text: &str, vars: &mut VarTable) -> Result<PropFormula, SyntaxError> {
    let result = Parser::new(text, vars, false).and_then(|mut p| p.parse_full());
    result.map_err(|e| match e {
        CppExprError::Syntax(s) => s,
        // Unsupported cannot arise outside cpp mode.
        CppExprError::Unsupported { offset, message } => SyntaxError { offset, message },
    })
}

/// Parses a `#if`-style directive expression.
///
/// Accepts the strict grammar plus `defined(X)`/`defined X` (normalized to
/// `X`) and the integer literals `0`/`1`. Arithmetic comparisons and other
/// numeric constructs yield [`CppExprError::Unsupported`].
pub fn parse_cpp_expr(text: &str, vars: &mut VarTable) -> Result<PropFormula, CppExprError> {
    Parser::new(text, vars, true).and_then(|mut p| p.parse_full())
}

/// Sound syntactic canonical form used as a fast path for semantic equality:
/// negation normal form, flattened, with sorted and deduplicated children.
/// Equal keys imply semantically equal formulas; distinct keys decide nothing.
pub fn normal_form_key(f: &PropFormula) -> String {
    #[derive(PartialEq, Eq, PartialOrd, Ord)]
    enum Nf {
        True,
        False,
        Lit(u32, bool),
        // `true` = conjunction; children kept sorted and deduplicated.
        Node(bool, Vec<Nf>),
    }

    fn build(f: &PropFormula, negated: bool) -> Nf {
        match f {
            PropFormula::True => {
                if negated {
                    Nf::False
                } else {
                    Nf::True
                }
            }
            PropFormula::False => {
                if negated {
                    Nf::True
                } else {
                    Nf::False
                }
            }
            PropFormula::Var(v) => Nf::Lit(v.index() as u32, negated),
            PropFormula::Not(inner) => build(inner, !negated),
            PropFormula::And(fs) | PropFormula::Or(fs) => {
                let is_and = matches!(f, PropFormula::And(_)) != negated;
                let mut parts: Vec<Nf> = Vec::new();
                for child in fs {
                    let key = build(child, negated);
                    match key {
                        Nf::False if is_and => return Nf::False,
                        Nf::True if !is_and => return Nf::True,
                        Nf::True if is_and => {}
                        Nf::False if !is_and => {}
                        Nf::Node(inner_and, inner) if inner_and == is_and => parts.extend(inner),
                        other => parts.push(other),
                    }
                }
                parts.sort();
                parts.dedup();
                match parts.len() {
                    0 => {
                        if is_and {
                            Nf::True
                        } else {
                            Nf::False
                        }
                    }
                    1 => parts.pop().unwrap(),
                    _ => Nf::Node(is_and, parts),
                }
            }
        }
    }

    fn render(nf: &Nf, out: &mut String) {
        match nf {
            Nf::True => out.push('T'),
            Nf::False => out.push('F'),
            Nf::Lit(index, negated) => {
                if *negated {
                    out.push('!');
                }
                out.push_str(&index.to_string());
            }
            Nf::Node(is_and, children) => {
                out.push('(');
                out.push(if *is_and { '&' } else { '|' });
                for child in children {
                    out.push(' ');
                    render(child, out);
                }
                out.push(')');
            }
        }
    }

    let mut out = String::new();
    render(&build(f, false), &mut out);
    out
}

/// True iff `f ↔ g` is a tautology, decided by one SAT call on the
/// negated biconditional (with a normal-form hash as a fast path).
pub fn semantically_equal(f: &PropFormula, g: &PropFormula, num_vars: usize) -> bool {
    if normal_form_key(f) == normal_form_key(g) {
        return true;
    }
    let difference = PropFormula::Or(vec![
        PropFormula::And(vec![f.clone(), PropFormula::not(g.clone())]),
        PropFormula::And(vec![PropFormula::not(f.clone()), g.clone()]),
    ]);
    crate::solver::sat(&[difference], num_vars).is_none()
}
