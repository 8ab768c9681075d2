//! A small text language for describing experiments on the toy systems.
//!
//! A script declares how many systems it uses, prepares one state, and then
//! transforms, measures, and asserts. Example:
//!
//! ```text
//! systems 2
//! prepare bell0
//! measure z on 1 as r
//! assert outcome r == 0 => state == prod(1|2, 1|2)
//! assert outcome r == 1 => state == prod(3|4, 3|4)
//! ```
//!
//! Scripts run in two modes: *epistemic*, which branches over every
//! measurement outcome with exact rational probabilities and checks the
//! assertions on every branch, and *Monte Carlo*, which delegates to the
//! ontic sampler and checks assertions per trial (probability assertions
//! use the three-sigma band).
//!
//! Grammar sketch:
//!
//! ```text
//! program   := "systems" INT step*
//! step      := "prepare" stateExpr
//!            | "transform" permExpr ["on" syslist]
//!            | "measure" partExpr "on" syslist "as" IDENT
//!            | "assert" predExpr
//! stateExpr := term ("|" term)*
//!            | "bell" DIGIT | "ghz" | "full"
//!            | "prod" "(" stateExpr ("," stateExpr)* ")"
//!            | "corr" "(" cycles ")"
//! term      := INT | "(" INT ("," INT)* ")"
//! permExpr  := cycles | "cnot" | "swap" | "bellinv" "(" IDENT ")"
//! partExpr  := "z" | "x" | "y" | "bell"
//!            | "{" stateExpr ("," stateExpr)+ "}"
//! predExpr  := "outcome" IDENT "==" INT ["=>" predExpr]
//!            | "state" ["on" syslist] "==" stateExpr
//!            | "prob" IDENT INT "==" INT "/" INT
//! ```
//!
//! `#` starts a comment. Cell labels are `1..4`; `bell0..bell3` are the
//! four relation states, `corr((..))` the relation state of any
//! permutation, `prod` a conjunction, `full` the fully mixed state.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::measurements::{
    bell_analogue, bell_permutations, relation_state, Axis, Measurement, MeasurementAction,
};
use crate::ontic::{EpistemicState, SystemShape};
use crate::sim::{
    run_trials, within_three_sigma, Branch, Fraction, Program, RunConfig, Step, TransformSpec,
};
use crate::transforms::Permutation;
use crate::validity::{Catalog, ValidityError};

#[derive(Debug, Error, PartialEq)]
#[error("line {line}, column {col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum DslError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("line {line}, column {col}: {message}")]
    Semantic {
        line: usize,
        col: usize,
        message: String,
    },
    #[error(transparent)]
    Validity(#[from] ValidityError),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
    #[error(transparent)]
    Measure(#[from] crate::measurements::MeasureError),
    #[error(transparent)]
    Ontic(#[from] crate::ontic::OnticError),
    #[error(transparent)]
    Transform(#[from] crate::transforms::TransformError),
}

// ---------------------------------------------------------------------------
// Tokens
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Ident(String),
    Int(u64),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Pipe,
    EqEq,
    FatArrow,
    Slash,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Ident(s) => write!(f, "'{s}'"),
            Token::Int(v) => write!(f, "'{v}'"),
            Token::LParen => write!(f, "'('"),
            Token::RParen => write!(f, "')'"),
            Token::LBrace => write!(f, "'{{'"),
            Token::RBrace => write!(f, "'}}'"),
            Token::Comma => write!(f, "','"),
            Token::Pipe => write!(f, "'|'"),
            Token::EqEq => write!(f, "'=='"),
            Token::FatArrow => write!(f, "'=>'"),
            Token::Slash => write!(f, "'/'"),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

fn lex(text: &str) -> Result<Vec<(Token, Span)>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();
    while let Some(&ch) = chars.peek() {
        let span = Span { line, col };
        match ch {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '#' => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        break;
                    }
                }
                line += 1;
                col = 1;
            }
            '(' => {
                chars.next();
                col += 1;
                out.push((Token::LParen, span));
            }
            ')' => {
                chars.next();
                col += 1;
                out.push((Token::RParen, span));
            }
            '{' => {
                chars.next();
                col += 1;
                out.push((Token::LBrace, span));
            }
            '}' => {
                chars.next();
                col += 1;
                out.push((Token::RBrace, span));
            }
            ',' => {
                chars.next();
                col += 1;
                out.push((Token::Comma, span));
            }
            '|' => {
                chars.next();
                col += 1;
                out.push((Token::Pipe, span));
            }
            '/' => {
                chars.next();
                col += 1;
                out.push((Token::Slash, span));
            }
            '=' => {
                chars.next();
                col += 1;
                match chars.peek() {
                    Some('=') => {
                        chars.next();
                        col += 1;
                        out.push((Token::EqEq, span));
                    }
                    Some('>') => {
                        chars.next();
                        col += 1;
                        out.push((Token::FatArrow, span));
                    }
                    _ => {
                        return Err(ParseError {
                            line: span.line,
                            col: span.col,
                            message: "expected '==' or '=>'".into(),
                        })
                    }
                }
            }
            c if c.is_ascii_digit() => {
                let mut v = 0u64;
                while let Some(&d) = chars.peek() {
                    if let Some(digit) = d.to_digit(10) {
                        v = v * 10 + digit as u64;
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                out.push((Token::Int(v), span));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        s.push(d);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                out.push((Token::Ident(s), span));
            }
            other => {
                return Err(ParseError {
                    line,
                    col,
                    message: format!("unexpected character '{other}'"),
                })
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// AST
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub enum StateExpr {
    /// Union of cells, each a coordinate tuple (canonically sorted).
    Cells(Vec<Vec<u16>>),
    /// `bell0..bell3`: the four standard relation states.
    Bell(u8),
    Ghz,
    Full,
    Prod(Vec<StateExpr>),
    /// `corr((..))`: the relation state of a permutation, canonical cycles.
    Corr(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum PermExpr {
    /// Canonical single-system cycle notation.
    Cycles(String),
    Cnot,
    Swap,
    BellInv(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum PartExpr {
    Axis(Axis),
    Bell,
    Explicit(Vec<StateExpr>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum PredExpr {
    Outcome {
        name: String,
        value: usize,
        implies: Option<Box<PredExpr>>,
    },
    StateEq {
        on: Option<Vec<usize>>,
        state: StateExpr,
    },
    Prob {
        name: String,
        outcome: usize,
        num: u64,
        den: u64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum StepAst {
    Prepare(StateExpr),
    Transform(PermExpr, Option<Vec<usize>>),
    Measure(PartExpr, Vec<usize>, String),
    Assert(PredExpr),
}

/// A parsed script: the declared system count and the step list with source
/// positions for diagnostics.
#[derive(Clone, Debug)]
pub struct ProgramAst {
    pub systems: usize,
    pub steps: Vec<(StepAst, Span)>,
}

impl PartialEq for ProgramAst {
    fn eq(&self, other: &Self) -> bool {
        self.systems == other.systems
            && self.steps.len() == other.steps.len()
            && self
                .steps
                .iter()
                .zip(&other.steps)
                .all(|((a, _), (b, _))| a == b)
    }
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser {
    tokens: Vec<(Token, Span)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&(Token, Span)> {
        self.tokens.get(self.pos)
    }

    fn span(&self) -> Span {
        self.tokens
            .get(self.pos.min(self.tokens.len().saturating_sub(1)))
            .map(|(_, s)| *s)
            .unwrap_or(Span { line: 1, col: 1 })
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        let span = self.span();
        ParseError {
            line: span.line,
            col: span.col,
            message: message.into(),
        }
    }

    fn next(&mut self, what: &str) -> Result<(Token, Span), ParseError> {
        let t = self
            .peek()
            .cloned()
            .ok_or_else(|| self.err(format!("expected {what}, found end of input")))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, tok: Token) -> Result<Span, ParseError> {
        let (t, s) = self.next(&tok.to_string())?;
        if t == tok {
            Ok(s)
        } else {
            Err(ParseError {
                line: s.line,
                col: s.col,
                message: format!("expected {tok}, found {t}"),
            })
        }
    }

    fn expect_int(&mut self, what: &str) -> Result<(u64, Span), ParseError> {
        let (t, s) = self.next(what)?;
        match t {
            Token::Int(v) => Ok((v, s)),
            other => Err(ParseError {
                line: s.line,
                col: s.col,
                message: format!("expected {what}, found {other}"),
            }),
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, Span), ParseError> {
        let (t, s) = self.next(what)?;
        match t {
            Token::Ident(v) => Ok((v, s)),
            other => Err(ParseError {
                line: s.line,
                col: s.col,
                message: format!("expected {what}, found {other}"),
            }),
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some((Token::Ident(s), _)) if s == kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn parse_program(&mut self) -> Result<ProgramAst, ParseError> {
        if !self.eat_keyword("systems") {
            return Err(self.err("expected 'systems <count>' header"));
        }
        let (systems, s) = self.expect_int("system count")?;
        if systems == 0 || systems > crate::ontic::MAX_SYSTEMS as u64 {
            return Err(ParseError {
                line: s.line,
                col: s.col,
                message: format!("system count must be 1..={}", crate::ontic::MAX_SYSTEMS),
            });
        }
        let mut steps = Vec::new();
        while let Some((tok, span)) = self.peek().cloned() {
            let step = match &tok {
                Token::Ident(kw) if kw == "prepare" => {
                    self.pos += 1;
                    StepAst::Prepare(self.parse_state_expr()?)
                }
                Token::Ident(kw) if kw == "transform" => {
                    self.pos += 1;
                    let perm = self.parse_perm_expr()?;
                    let on = if self.eat_keyword("on") {
                        Some(self.parse_syslist()?)
                    } else {
                        None
                    };
                    StepAst::Transform(perm, on)
                }
                Token::Ident(kw) if kw == "measure" => {
                    self.pos += 1;
                    let part = self.parse_part_expr()?;
                    if !self.eat_keyword("on") {
                        return Err(self.err("expected 'on <systems>' after the partition"));
                    }
                    let on = self.parse_syslist()?;
                    if !self.eat_keyword("as") {
                        return Err(self.err("expected 'as <name>' to bind the outcome"));
                    }
                    let (name, _) = self.expect_ident("outcome binding name")?;
                    StepAst::Measure(part, on, name)
                }
                Token::Ident(kw) if kw == "assert" => {
                    self.pos += 1;
                    StepAst::Assert(self.parse_pred_expr()?)
                }
                other => {
                    return Err(ParseError {
                        line: span.line,
                        col: span.col,
                        message: format!(
                            "expected a step (prepare/transform/measure/assert), found {other}"
                        ),
                    })
                }
            };
            steps.push((step, span));
        }
        Ok(ProgramAst {
            systems: systems as usize,
            steps,
        })
    }

    fn parse_state_expr(&mut self) -> Result<StateExpr, ParseError> {
        match self.peek().cloned() {
            Some((Token::Ident(name), span)) => {
                self.pos += 1;
                match name.as_str() {
                    "ghz" => Ok(StateExpr::Ghz),
                    "full" => Ok(StateExpr::Full),
                    "bell0" => Ok(StateExpr::Bell(0)),
                    "bell1" => Ok(StateExpr::Bell(1)),
                    "bell2" => Ok(StateExpr::Bell(2)),
                    "bell3" => Ok(StateExpr::Bell(3)),
                    "prod" => {
                        self.expect(Token::LParen)?;
                        let mut factors = vec![self.parse_state_expr()?];
                        while matches!(self.peek(), Some((Token::Comma, _))) {
                            self.pos += 1;
                            factors.push(self.parse_state_expr()?);
                        }
                        self.expect(Token::RParen)?;
                        Ok(StateExpr::Prod(factors))
                    }
                    "corr" => {
                        self.expect(Token::LParen)?;
                        let cycles = self.parse_cycles()?;
                        self.expect(Token::RParen)?;
                        Ok(StateExpr::Corr(cycles))
                    }
                    other => Err(ParseError {
                        line: span.line,
                        col: span.col,
                        message: format!("unknown state constant '{other}'"),
                    }),
                }
            }
            Some((Token::Int(_) | Token::LParen, _)) => {
                let mut cells = vec![self.parse_cell_term()?];
                while matches!(self.peek(), Some((Token::Pipe, _))) {
                    self.pos += 1;
                    cells.push(self.parse_cell_term()?);
                }
                cells.sort();
                cells.dedup();
                Ok(StateExpr::Cells(cells))
            }
            _ => Err(self.err("expected a state expression")),
        }
    }

    fn parse_cell_term(&mut self) -> Result<Vec<u16>, ParseError> {
        match self.next("a cell label or tuple")? {
            (Token::Int(v), s) => {
                if !(1..=4).contains(&v) {
                    return Err(ParseError {
                        line: s.line,
                        col: s.col,
                        message: format!("cell label {v} out of range 1..4"),
                    });
                }
                Ok(vec![v as u16])
            }
            (Token::LParen, _) => {
                let mut coords = Vec::new();
                loop {
                    let (v, s) = self.expect_int("a cell label")?;
                    if !(1..=4).contains(&v) {
                        return Err(ParseError {
                            line: s.line,
                            col: s.col,
                            message: format!("cell label {v} out of range 1..4"),
                        });
                    }
                    coords.push(v as u16);
                    match self.next("',' or ')'")? {
                        (Token::Comma, _) => continue,
                        (Token::RParen, _) => break,
                        (other, s) => {
                            return Err(ParseError {
                                line: s.line,
                                col: s.col,
                                message: format!("expected ',' or ')', found {other}"),
                            })
                        }
                    }
                }
                Ok(coords)
            }
            (other, s) => Err(ParseError {
                line: s.line,
                col: s.col,
                message: format!("expected a cell label or tuple, found {other}"),
            }),
        }
    }

    /// Cycle groups like `(123)(4)`; digits must be cell labels.
    fn parse_cycles(&mut self) -> Result<String, ParseError> {
        let mut text = String::new();
        let start = self.span();
        while matches!(self.peek(), Some((Token::LParen, _))) {
            self.pos += 1;
            let (v, s) = self.expect_int("cycle cells")?;
            text.push('(');
            for d in v.to_string().chars() {
                if !('1'..='4').contains(&d) {
                    return Err(ParseError {
                        line: s.line,
                        col: s.col,
                        message: format!("cycle label {d} out of range 1..4"),
                    });
                }
                text.push(d);
            }
            text.push(')');
            self.expect(Token::RParen)?;
        }
        if text.is_empty() {
            return Err(ParseError {
                line: start.line,
                col: start.col,
                message: "expected cycle notation like (12)(34)".into(),
            });
        }
        // normalize through the permutation type
        let perm = Permutation::from_cycles(&text).map_err(|e| ParseError {
            line: start.line,
            col: start.col,
            message: e.to_string(),
        })?;
        Ok(perm.to_cycles())
    }

    fn parse_perm_expr(&mut self) -> Result<PermExpr, ParseError> {
        match self.peek().cloned() {
            Some((Token::Ident(name), span)) => {
                self.pos += 1;
                match name.as_str() {
                    "cnot" => Ok(PermExpr::Cnot),
                    "swap" => Ok(PermExpr::Swap),
                    "bellinv" => {
                        self.expect(Token::LParen)?;
                        let (ident, _) = self.expect_ident("an outcome binding")?;
                        self.expect(Token::RParen)?;
                        Ok(PermExpr::BellInv(ident))
                    }
                    other => Err(ParseError {
                        line: span.line,
                        col: span.col,
                        message: format!("unknown transformation '{other}'"),
                    }),
                }
            }
            Some((Token::LParen, _)) => Ok(PermExpr::Cycles(self.parse_cycles()?)),
            _ => Err(self.err("expected a transformation")),
        }
    }

    fn parse_part_expr(&mut self) -> Result<PartExpr, ParseError> {
        match self.peek().cloned() {
            Some((Token::Ident(name), span)) => {
                self.pos += 1;
                match name.as_str() {
                    "z" => Ok(PartExpr::Axis(Axis::Z)),
                    "x" => Ok(PartExpr::Axis(Axis::X)),
                    "y" => Ok(PartExpr::Axis(Axis::Y)),
                    "bell" => Ok(PartExpr::Bell),
                    other => Err(ParseError {
                        line: span.line,
                        col: span.col,
                        message: format!("unknown partition '{other}'"),
                    }),
                }
            }
            Some((Token::LBrace, _)) => {
                self.pos += 1;
                let mut outcomes = vec![self.parse_state_expr()?];
                while matches!(self.peek(), Some((Token::Comma, _))) {
                    self.pos += 1;
                    outcomes.push(self.parse_state_expr()?);
                }
                self.expect(Token::RBrace)?;
                if outcomes.len() < 2 {
                    return Err(self.err("a partition needs at least two outcomes"));
                }
                Ok(PartExpr::Explicit(outcomes))
            }
            _ => Err(self.err("expected a partition")),
        }
    }

    fn parse_syslist(&mut self) -> Result<Vec<usize>, ParseError> {
        let mut list = Vec::new();
        loop {
            let (v, s) = self.expect_int("a system index")?;
            if v == 0 || v > crate::ontic::MAX_SYSTEMS as u64 {
                return Err(ParseError {
                    line: s.line,
                    col: s.col,
                    message: format!("system index {v} out of range"),
                });
            }
            list.push(v as usize);
            if matches!(self.peek(), Some((Token::Comma, _))) {
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok(list)
    }

    fn parse_pred_expr(&mut self) -> Result<PredExpr, ParseError> {
        if self.eat_keyword("outcome") {
            let (name, _) = self.expect_ident("an outcome binding")?;
            self.expect(Token::EqEq)?;
            let (value, _) = self.expect_int("an outcome index")?;
            let implies = if matches!(self.peek(), Some((Token::FatArrow, _))) {
                self.pos += 1;
                Some(Box::new(self.parse_pred_expr()?))
            } else {
                None
            };
            return Ok(PredExpr::Outcome {
                name,
                value: value as usize,
                implies,
            });
        }
        if self.eat_keyword("state") {
            let on = if self.eat_keyword("on") {
                Some(self.parse_syslist()?)
            } else {
                None
            };
            self.expect(Token::EqEq)?;
            let state = self.parse_state_expr()?;
            return Ok(PredExpr::StateEq { on, state });
        }
        if self.eat_keyword("prob") {
            let (name, _) = self.expect_ident("an outcome binding")?;
            let (outcome, _) = self.expect_int("an outcome index")?;
            self.expect(Token::EqEq)?;
            let (num, _) = self.expect_int("a numerator")?;
            self.expect(Token::Slash)?;
            let (den, s) = self.expect_int("a denominator")?;
            if den == 0 {
                return Err(ParseError {
                    line: s.line,
                    col: s.col,
                    message: "zero denominator".into(),
                });
            }
            return Ok(PredExpr::Prob {
                name,
                outcome: outcome as usize,
                num,
                den,
            });
        }
        Err(self.err("expected an assertion (outcome/state/prob)"))
    }
}

/// Parse a script.
pub fn parse(text: &str) -> Result<ProgramAst, ParseError> {
    let tokens = lex(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let ast = parser.parse_program()?;
    if parser.pos != parser.tokens.len() {
        return Err(parser.err("trailing input after the last step"));
    }
    Ok(ast)
}

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

fn print_state(e: &StateExpr) -> String {
    match e {
        StateExpr::Cells(cells) => cells
            .iter()
            .map(|c| {
                if c.len() == 1 {
                    c[0].to_string()
                } else {
                    format!(
                        "({})",
                        c.iter()
                            .map(u16::to_string)
                            .collect::<Vec<_>>()
                            .join(",")
                    )
                }
            })
            .collect::<Vec<_>>()
            .join("|"),
        StateExpr::Bell(k) => format!("bell{k}"),
        StateExpr::Ghz => "ghz".into(),
        StateExpr::Full => "full".into(),
        StateExpr::Prod(fs) => format!(
            "prod({})",
            fs.iter().map(print_state).collect::<Vec<_>>().join(", ")
        ),
        StateExpr::Corr(c) => format!("corr({c})"),
    }
}

fn print_pred(p: &PredExpr) -> String {
    match p {
        PredExpr::Outcome {
            name,
            value,
            implies,
        } => match implies {
            None => format!("outcome {name} == {value}"),
            Some(q) => format!("outcome {name} == {value} => {}", print_pred(q)),
        },
        PredExpr::StateEq { on, state } => match on {
            None => format!("state == {}", print_state(state)),
            Some(sys) => format!(
                "state on {} == {}",
                sys.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
                print_state(state)
            ),
        },
        PredExpr::Prob {
            name,
            outcome,
            num,
            den,
        } => format!("prob {name} {outcome} == {num}/{den}"),
    }
}

/// Canonical text of a program; `parse(print(p)) == p`.
pub fn print(ast: &ProgramAst) -> String {
    let mut out = format!("systems {}\n", ast.systems);
    for (step, _) in &ast.steps {
        match step {
            StepAst::Prepare(s) => out.push_str(&format!("prepare {}\n", print_state(s))),
            StepAst::Transform(p, on) => {
                let perm = match p {
                    PermExpr::Cycles(c) => c.clone(),
                    PermExpr::Cnot => "cnot".into(),
                    PermExpr::Swap => "swap".into(),
                    PermExpr::BellInv(r) => format!("bellinv({r})"),
                };
                match on {
                    None => out.push_str(&format!("transform {perm}\n")),
                    Some(sys) => out.push_str(&format!(
                        "transform {perm} on {}\n",
                        sys.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
                    )),
                }
            }
            StepAst::Measure(part, on, name) => {
                let p = match part {
                    PartExpr::Axis(Axis::Z) => "z".to_string(),
                    PartExpr::Axis(Axis::X) => "x".to_string(),
                    PartExpr::Axis(Axis::Y) => "y".to_string(),
                    PartExpr::Bell => "bell".to_string(),
                    PartExpr::Explicit(outcomes) => format!(
                        "{{{}}}",
                        outcomes
                            .iter()
                            .map(print_state)
                            .collect::<Vec<_>>()
                            .join(", ")
                    ),
                };
                out.push_str(&format!(
                    "measure {p} on {} as {name}\n",
                    on.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
                ));
            }
            StepAst::Assert(pred) => out.push_str(&format!("assert {}\n", print_pred(pred))),
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Compilation: AST -> executable program + assert schedule
// ---------------------------------------------------------------------------

/// Lazily built catalogs for resolution and validation.
#[derive(Default)]
pub struct CatalogCache {
    slots: [Option<Catalog>; 3],
}

impl CatalogCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Seed a slot (e.g. from a file cache).
    pub fn put(&mut self, catalog: Catalog) {
        let n = catalog.shape().n_systems();
        if (1..=3).contains(&n) {
            self.slots[n - 1] = Some(catalog);
        }
    }

    pub fn get(&mut self, n: usize) -> Result<&Catalog, ValidityError> {
        if !(1..=3).contains(&n) {
            return Err(ValidityError::TooManySystems(n));
        }
        if self.slots[n - 1].is_none() {
            let shape = SystemShape::new(n).unwrap();
            self.slots[n - 1] = Some(Catalog::enumerate(shape, n < 3)?);
        }
        Ok(self.slots[n - 1].as_ref().unwrap())
    }
}

/// A compiled script: the executable program plus the assertion schedule;
/// `prefix_measures` counts the measurements preceding each assertion.
pub struct CompiledScript {
    pub shape: SystemShape,
    pub program: Program,
    pub asserts: Vec<ScheduledAssert>,
    /// Update rule applied to coarse (nonmaximal) measurements.
    pub update_rule: crate::measurements::UpdateRule,
    pub has_coarse: bool,
}

pub struct ScheduledAssert {
    pub pred: PredExpr,
    pub span: Span,
    pub text: String,
    /// Number of executable steps preceding the assertion.
    pub after_step: usize,
    /// Number of measurements preceding the assertion (for per-trial lookup).
    pub prefix_measures: usize,
}

fn semantic(span: Span, message: impl Into<String>) -> DslError {
    DslError::Semantic {
        line: span.line,
        col: span.col,
        message: message.into(),
    }
}

fn resolve_state(expr: &StateExpr, span: Span) -> Result<EpistemicState, DslError> {
    match expr {
        StateExpr::Cells(cells) => {
            let n = cells[0].len();
            if cells.iter().any(|c| c.len() != n) {
                return Err(semantic(span, "cells must all have the same arity"));
            }
            let shape = SystemShape::new(n)?;
            let tuples: Vec<&[u16]> = cells.iter().map(Vec::as_slice).collect();
            Ok(EpistemicState::from_tuples(shape, &tuples)?)
        }
        StateExpr::Bell(k) => Ok(relation_state(&bell_permutations()[*k as usize])),
        StateExpr::Ghz => Ok(EpistemicState::from_tuples(
            SystemShape::new(3).unwrap(),
            &[
                &[1, 1, 1],
                &[1, 2, 2],
                &[2, 1, 2],
                &[2, 2, 1],
                &[3, 3, 3],
                &[3, 4, 4],
                &[4, 3, 4],
                &[4, 4, 3],
            ],
        )
        .expect("fixed cells")),
        StateExpr::Full => Err(semantic(
            span,
            "'full' needs a shape from context; use it inside prod(..) or as the prepared state",
        )),
        StateExpr::Prod(factors) => {
            let mut resolved: Option<EpistemicState> = None;
            for f in factors {
                let part = match f {
                    StateExpr::Full => EpistemicState::fully_mixed(SystemShape::new(1).unwrap()),
                    other => resolve_state(other, span)?,
                };
                resolved = Some(match resolved {
                    None => part,
                    Some(acc) => acc.conjoin(&part)?,
                });
            }
            resolved.ok_or_else(|| semantic(span, "empty product"))
        }
        StateExpr::Corr(cycles) => {
            let perm = Permutation::from_cycles(cycles)?;
            Ok(relation_state(&perm))
        }
    }
}

/// `full` as a prepared state takes the declared shape; elsewhere it means
/// one fully mixed elementary system.
fn resolve_prepared(
    expr: &StateExpr,
    span: Span,
    shape: SystemShape,
) -> Result<EpistemicState, DslError> {
    let state = match expr {
        StateExpr::Full => EpistemicState::fully_mixed(shape),
        other => resolve_state(other, span)?,
    };
    if state.shape() != shape {
        return Err(semantic(
            span,
            format!(
                "prepared state has {} system(s), script declares {}",
                state.shape().n_systems(),
                shape.n_systems()
            ),
        ));
    }
    Ok(state)
}

pub fn compile(ast: &ProgramAst, cats: &mut CatalogCache) -> Result<CompiledScript, DslError> {
    compile_with_rule(ast, cats, crate::measurements::UpdateRule::default())
}

/// Compile with an explicit update rule for coarse measurements (which are
/// executable in epistemic mode only).
pub fn compile_with_rule(
    ast: &ProgramAst,
    cats: &mut CatalogCache,
    update_rule: crate::measurements::UpdateRule,
) -> Result<CompiledScript, DslError> {
    let shape = SystemShape::new(ast.systems)?;
    let mut has_coarse = false;
    let mut steps: Vec<Step> = Vec::new();
    let mut asserts: Vec<ScheduledAssert> = Vec::new();
    let mut measures_so_far = 0usize;
    let mut measure_names: Vec<String> = Vec::new();

    for (step, span) in &ast.steps {
        match step {
            StepAst::Prepare(expr) => {
                let state = resolve_prepared(expr, *span, shape)?;
                steps.push(Step::Prepare(state));
            }
            StepAst::Transform(perm, on) => {
                let spec = match perm {
                    PermExpr::Cycles(c) => {
                        let small = Permutation::from_cycles(c)?;
                        let systems = on.clone().unwrap_or_else(|| vec![1]);
                        if systems.len() != 1 {
                            return Err(semantic(
                                *span,
                                "cycle transformations act on one system",
                            ));
                        }
                        TransformSpec::Fixed(small.embed_at(&systems, shape)?)
                    }
                    PermExpr::Cnot => {
                        let systems = on.clone().unwrap_or_else(|| vec![1, 2]);
                        if systems.len() != 2 {
                            return Err(semantic(*span, "cnot acts on two systems"));
                        }
                        TransformSpec::Fixed(
                            crate::transforms::cnot_analogue().embed_at(&systems, shape)?,
                        )
                    }
                    PermExpr::Swap => {
                        let systems = on.clone().unwrap_or_else(|| vec![1, 2]);
                        if systems.len() != 2 {
                            return Err(semantic(*span, "swap acts on two systems"));
                        }
                        let mut order: Vec<usize> = (1..=shape.n_systems()).collect();
                        order.swap(systems[0] - 1, systems[1] - 1);
                        TransformSpec::Fixed(Permutation::system_reorder(shape, &order)?)
                    }
                    PermExpr::BellInv(name) => {
                        let systems = on
                            .clone()
                            .ok_or_else(|| semantic(*span, "bellinv needs 'on <system>'"))?;
                        if systems.len() != 1 {
                            return Err(semantic(*span, "bellinv acts on one system"));
                        }
                        if !measure_names.contains(name) {
                            return Err(semantic(
                                *span,
                                format!("bellinv refers to unknown outcome '{name}'"),
                            ));
                        }
                        TransformSpec::RelationInverse {
                            measurement: name.clone(),
                            system: systems[0],
                        }
                    }
                };
                steps.push(Step::Transform(spec));
            }
            StepAst::Measure(part, on, name) => {
                let (m, perms) = match part {
                    PartExpr::Axis(axis) => {
                        if on.len() != 1 {
                            return Err(semantic(*span, "axis partitions act on one system"));
                        }
                        let base = axis.partition(cats.get(1)?);
                        let m = if shape.n_systems() == 1 {
                            base
                        } else {
                            base.on_subsystems(on, shape)?
                        };
                        (m, None)
                    }
                    PartExpr::Bell => {
                        if on.len() != 2 {
                            return Err(semantic(*span, "bell acts on two systems"));
                        }
                        let base = bell_analogue(cats.get(2)?);
                        let m = if shape.n_systems() == 2 && on == &[1, 2] {
                            base
                        } else {
                            base.on_subsystems(on, shape)?
                        };
                        (m, Some(bell_permutations().to_vec()))
                    }
                    PartExpr::Explicit(exprs) => {
                        let outcomes: Result<Vec<EpistemicState>, DslError> = exprs
                            .iter()
                            .map(|e| resolve_state(e, *span))
                            .collect();
                        let outcomes = outcomes?;
                        if outcomes.iter().any(|o| o.shape() != shape) {
                            return Err(semantic(
                                *span,
                                "partition outcomes must cover all declared systems",
                            ));
                        }
                        if on != &(1..=shape.n_systems()).collect::<Vec<_>>() {
                            return Err(semantic(
                                *span,
                                "explicit partitions act on all systems in order",
                            ));
                        }
                        let catalog = cats.get(shape.n_systems())?;
                        let m = Measurement::new(outcomes, catalog)?;
                        if matches!(m.action(), MeasurementAction::Coarse) {
                            has_coarse = true;
                        }
                        (m, None)
                    }
                };
                measure_names.push(name.clone());
                steps.push(Step::Measure {
                    m,
                    name: name.clone(),
                    perms,
                });
                measures_so_far += 1;
            }
            StepAst::Assert(pred) => {
                // validate references
                validate_pred(pred, *span, &measure_names)?;
                asserts.push(ScheduledAssert {
                    pred: pred.clone(),
                    span: *span,
                    text: print_pred(pred),
                    after_step: steps.len(),
                    prefix_measures: measures_so_far,
                });
            }
        }
    }
    let program = Program { shape, steps };
    if !has_coarse {
        program.validate()?;
    }
    Ok(CompiledScript {
        shape,
        program,
        asserts,
        update_rule,
        has_coarse,
    })
}

fn validate_pred(pred: &PredExpr, span: Span, names: &[String]) -> Result<(), DslError> {
    match pred {
        PredExpr::Outcome { name, implies, .. } => {
            if !names.contains(name) {
                return Err(semantic(span, format!("unknown outcome binding '{name}'")));
            }
            if let Some(q) = implies {
                validate_pred(q, span, names)?;
            }
            Ok(())
        }
        PredExpr::Prob { name, .. } => {
            if !names.contains(name) {
                return Err(semantic(span, format!("unknown outcome binding '{name}'")));
            }
            Ok(())
        }
        PredExpr::StateEq { .. } => Ok(()),
    }
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Mode {
    Epistemic,
    MonteCarlo,
}

/// One assertion's verdict.
#[derive(Clone, Debug, Serialize)]
pub struct AssertResult {
    pub text: String,
    pub pass: bool,
    pub detail: String,
}

/// Exact probability of a final branch, rendered.
#[derive(Clone, Debug, Serialize)]
pub struct BranchSummary {
    pub outcomes: Vec<(String, usize)>,
    pub probability: String,
    pub state: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct OutcomeStats {
    pub measurement: String,
    pub counts: Vec<u64>,
    pub expected: Vec<String>,
    pub chi_square: f64,
}

/// Result of running a script.
#[derive(Clone, Debug, Serialize)]
pub struct ScriptReport {
    pub mode: String,
    pub n_trials: Option<usize>,
    pub asserts: Vec<AssertResult>,
    pub branches: Vec<BranchSummary>,
    pub stats: Vec<OutcomeStats>,
}

impl ScriptReport {
    pub fn passed(&self) -> bool {
        self.asserts.iter().all(|a| a.pass)
    }
}

impl fmt::Display for ScriptReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mode: {}", self.mode)?;
        if !self.branches.is_empty() {
            writeln!(f, "branches:")?;
            for b in &self.branches {
                let outs: Vec<String> = b
                    .outcomes
                    .iter()
                    .map(|(n, k)| format!("{n}={k}"))
                    .collect();
                writeln!(
                    f,
                    "  p={} [{}] state {}",
                    b.probability,
                    outs.join(", "),
                    b.state
                )?;
            }
        }
        for s in &self.stats {
            writeln!(
                f,
                "measurement {}: counts {:?}, expected {:?}, chi2 {:.3}",
                s.measurement, s.counts, s.expected, s.chi_square
            )?;
        }
        for a in &self.asserts {
            writeln!(
                f,
                "[{}] assert {}{}",
                if a.pass { "pass" } else { "FAIL" },
                a.text,
                if a.detail.is_empty() {
                    String::new()
                } else {
                    format!(" ({})", a.detail)
                }
            )?;
        }
        write!(
            f,
            "result: {}",
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

/// Walk the program's steps, keeping the full branch set; at each assert
/// position, record the verdict for every branch prefix.
struct BranchWalk {
    branches: Vec<Branch>,
    /// per scheduled assert: (prefix bindings, pass, detail) per branch
    assert_rows: Vec<Vec<(Vec<(String, usize)>, bool, String)>>,
}

fn eval_pred_on_branch(
    pred: &PredExpr,
    branch: &Branch,
    branches: &[Branch],
) -> Result<(bool, String), DslError> {
    match pred {
        PredExpr::Outcome {
            name,
            value,
            implies,
        } => {
            let got = branch.outcome_of(name);
            match implies {
                None => Ok((
                    got == Some(*value),
                    format!("outcome {name} = {got:?}"),
                )),
                Some(q) => {
                    if got == Some(*value) {
                        eval_pred_on_branch(q, branch, branches)
                    } else {
                        Ok((true, String::new())) // antecedent false
                    }
                }
            }
        }
        PredExpr::StateEq { on, state } => {
            let span = Span { line: 0, col: 0 };
            let want = resolve_state(state, span)?;
            let got = match on {
                None => branch.state,
                Some(sys) => branch.state.marginal(sys)?,
            };
            Ok((got == want, format!("state = {got}")))
        }
        PredExpr::Prob {
            name,
            outcome,
            num,
            den,
        } => {
            // branch-independent: aggregate over all branches
            let p = branches
                .iter()
                .filter(|b| b.outcome_of(name) == Some(*outcome))
                .fold(Fraction::ZERO, |acc, b| acc.add(b.prob));
            Ok((
                p == Fraction::new(*num, *den),
                format!("exact probability {p}"),
            ))
        }
    }
}

fn walk_branches(script: &CompiledScript, cats: &mut CatalogCache) -> Result<BranchWalk, DslError> {
    let relations: HashMap<String, Vec<Permutation>> = script
        .program
        .steps
        .iter()
        .filter_map(|s| match s {
            Step::Measure {
                name,
                perms: Some(ps),
                ..
            } => Some((name.clone(), ps.clone())),
            _ => None,
        })
        .collect();

    let mut branches: Vec<Branch> = Vec::new();
    let mut assert_rows: Vec<Vec<(Vec<(String, usize)>, bool, String)>> = Vec::new();
    let mut assert_cursor = 0usize;
    let mut steps_done = 0usize;

    let flush_asserts = |branches: &[Branch],
                         steps_done: usize,
                         assert_cursor: &mut usize,
                         assert_rows: &mut Vec<Vec<(Vec<(String, usize)>, bool, String)>>|
     -> Result<(), DslError> {
        while *assert_cursor < script.asserts.len()
            && script.asserts[*assert_cursor].after_step == steps_done
        {
            let pred = &script.asserts[*assert_cursor].pred;
            let mut rows = Vec::new();
            for b in branches {
                let (pass, detail) = eval_pred_on_branch(pred, b, branches)?;
                rows.push((b.outcomes.clone(), pass, detail));
            }
            assert_rows.push(rows);
            *assert_cursor += 1;
        }
        Ok(())
    };

    flush_asserts(&branches, steps_done, &mut assert_cursor, &mut assert_rows)?;
    for step in &script.program.steps {
        match step {
            Step::Prepare(s) => {
                branches = vec![Branch {
                    state: *s,
                    prob: Fraction::ONE,
                    outcomes: Vec::new(),
                }];
            }
            Step::Transform(spec) => {
                for b in &mut branches {
                    let p = match spec {
                        TransformSpec::Fixed(p) => p.clone(),
                        TransformSpec::RelationInverse {
                            measurement,
                            system,
                        } => {
                            let k = b.outcome_of(measurement).ok_or_else(|| {
                                semantic(
                                    Span { line: 0, col: 0 },
                                    format!("no outcome bound for '{measurement}'"),
                                )
                            })?;
                            relations[measurement][k]
                                .invert()
                                .embed_at(&[*system], script.shape)?
                        }
                    };
                    b.state = p.apply_state(&b.state)?;
                }
            }
            Step::Measure { m, name, .. } => {
                let coarse = matches!(m.action(), MeasurementAction::Coarse);
                let mut next = Vec::new();
                for b in &branches {
                    let total = b.state.size() as u64;
                    for (k, o) in m.outcomes().iter().enumerate() {
                        let common = b.state.members().intersection(o.members()).len() as u64;
                        if common == 0 {
                            continue;
                        }
                        let mut nb = b.clone();
                        nb.prob = b.prob.mul(Fraction::new(common, total));
                        nb.state = if coarse {
                            let catalog = cats.get(script.shape.n_systems())?;
                            m.epistemic_update_with(&b.state, k, script.update_rule, catalog)?
                        } else {
                            m.epistemic_update(&b.state, k)?
                        };
                        nb.outcomes.push((name.clone(), k));
                        next.push(nb);
                    }
                }
                branches = next;
            }
        }
        steps_done += 1;
        flush_asserts(&branches, steps_done, &mut assert_cursor, &mut assert_rows)?;
    }
    debug_assert_eq!(assert_rows.len(), script.asserts.len());
    Ok(BranchWalk {
        branches,
        assert_rows,
    })
}

/// Run a compiled script.
pub fn execute(
    script: &CompiledScript,
    mode: Mode,
    cfg: &RunConfig,
    cats: &mut CatalogCache,
) -> Result<ScriptReport, DslError> {
    let walk = walk_branches(script, cats)?;
    match mode {
        Mode::Epistemic => {
            let asserts = script
                .asserts
                .iter()
                .zip(&walk.assert_rows)
                .map(|(sa, rows)| {
                    let failing: Vec<&(Vec<(String, usize)>, bool, String)> =
                        rows.iter().filter(|(_, pass, _)| !pass).collect();
                    AssertResult {
                        text: sa.text.clone(),
                        pass: failing.is_empty(),
                        detail: match failing.first() {
                            None => format!("{} branch(es) checked", rows.len()),
                            Some((outs, _, detail)) => {
                                format!("fails on branch {outs:?}: {detail}")
                            }
                        },
                    }
                })
                .collect();
            let branches = walk
                .branches
                .iter()
                .map(|b| BranchSummary {
                    outcomes: b.outcomes.clone(),
                    probability: b.prob.to_string(),
                    state: b.state.to_string(),
                })
                .collect();
            Ok(ScriptReport {
                mode: "epistemic".into(),
                n_trials: None,
                asserts,
                branches,
                stats: Vec::new(),
            })
        }
        Mode::MonteCarlo => {
            if script.has_coarse {
                return Err(semantic(
                    Span { line: 0, col: 0 },
                    "coarse measurements have no fixed ontic dynamics; run in epistemic mode",
                ));
            }
            let report = run_trials(&script.program, cfg)?;
            let mut asserts = Vec::new();
            for (sa, rows) in script.asserts.iter().zip(&walk.assert_rows) {
                match &sa.pred {
                    PredExpr::Prob {
                        name,
                        outcome,
                        num,
                        den,
                    } => {
                        let stats = report.stats_for(name).expect("validated name");
                        let p = *num as f64 / *den as f64;
                        let count = stats.counts.get(*outcome).copied().unwrap_or(0);
                        let pass = within_three_sigma(count, report.n_trials, p);
                        asserts.push(AssertResult {
                            text: sa.text.clone(),
                            pass,
                            detail: format!(
                                "{count}/{} trials vs expected {num}/{den}",
                                report.n_trials
                            ),
                        });
                    }
                    _ => {
                        // per-trial: look up the branch verdict by binding prefix
                        let mut failures = 0u64;
                        for rec in &report.records {
                            let prefix: Vec<(String, usize)> = rec
                                .steps
                                .iter()
                                .take(sa.prefix_measures)
                                .map(|s| (s.measurement.clone(), s.outcome))
                                .collect();
                            let verdict = rows
                                .iter()
                                .find(|(outs, _, _)| *outs == prefix)
                                .map(|(_, pass, _)| *pass)
                                .unwrap_or(false);
                            if !verdict {
                                failures += 1;
                            }
                        }
                        asserts.push(AssertResult {
                            text: sa.text.clone(),
                            pass: failures == 0,
                            detail: format!(
                                "{failures}/{} trials violate the assertion",
                                report.n_trials
                            ),
                        });
                    }
                }
            }
            let stats = report
                .stats
                .iter()
                .map(|s| OutcomeStats {
                    measurement: s.name.clone(),
                    counts: s.counts.clone(),
                    expected: s.expected.iter().map(Fraction::to_string).collect(),
                    chi_square: s.chi_square,
                })
                .collect();
            Ok(ScriptReport {
                mode: "monte-carlo".into(),
                n_trials: Some(report.n_trials),
                asserts,
                branches: Vec::new(),
                stats,
            })
        }
    }
}

/// Parse, compile, and run a script source in one call.
pub fn run_source(
    text: &str,
    mode: Mode,
    cfg: &RunConfig,
    cats: &mut CatalogCache,
) -> Result<ScriptReport, DslError> {
    run_source_with_rule(text, mode, cfg, cats, crate::measurements::UpdateRule::default())
}

pub fn run_source_with_rule(
    text: &str,
    mode: Mode,
    cfg: &RunConfig,
    cats: &mut CatalogCache,
    rule: crate::measurements::UpdateRule,
) -> Result<ScriptReport, DslError> {
    let ast = parse(text)?;
    let script = compile_with_rule(&ast, cats, rule)?;
    let cfg = RunConfig::new(cfg.seed, cfg.n_trials, script.shape);
    execute(&script, mode, &cfg, cats)
}

/// Parse a bare state literal (the `stateExpr` grammar) into a state, e.g.
/// for command-line validity checks.
pub fn parse_state_literal(text: &str) -> Result<EpistemicState, DslError> {
    let tokens = lex(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let expr = parser.parse_state_expr()?;
    if parser.pos != parser.tokens.len() {
        return Err(parser.err("trailing input after the state literal").into());
    }
    match &expr {
        StateExpr::Full => Err(semantic(
            Span { line: 1, col: 1 },
            "'full' needs a system count; write the cells explicitly",
        )),
        other => resolve_state(other, Span { line: 1, col: 1 }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cache() -> CatalogCache {
        CatalogCache::new()
    }

    #[test]
    fn parse_simple_script() {
        let ast = parse("systems 1\nprepare 1|3\nmeasure x on 1 as r\nassert outcome r == 0\n")
            .unwrap();
        assert_eq!(ast.systems, 1);
        assert_eq!(ast.steps.len(), 3);
        assert!(matches!(ast.steps[0].0, StepAst::Prepare(_)));
    }

    #[test]
    fn parse_cycles_normalizes() {
        let ast = parse("systems 1\nprepare 1|2\ntransform (123)\n").unwrap();
        match &ast.steps[1].0 {
            StepAst::Transform(PermExpr::Cycles(c), None) => assert_eq!(c, "(123)(4)"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = parse("systems 1\nprepare 1|\n").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.col >= 10, "col = {}", err.col);

        let err = parse("systems 1\nprepare 9\n").unwrap_err();
        assert_eq!(err.line, 2);

        let err = parse("systems 1\nfoo\n").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.message.contains("expected a step"));
    }

    #[test]
    fn print_parse_round_trip() {
        let sources = [
            "systems 1\nprepare 1|3\nmeasure x on 1 as r\nassert outcome r == 0\n",
            "systems 2\nprepare bell0\nmeasure z on 1 as r\n\
             assert outcome r == 0 => state == prod(1|2, 1|2)\n",
            "systems 2\nprepare prod(1|3, 1|3)\ntransform cnot on 1,2\n\
             assert state == bell0\n",
            "systems 3\nprepare prod(1|3, bell0)\nmeasure bell on 1,2 as r\n\
             transform bellinv(r) on 3\nassert state on 3 == 1|3\n",
            "systems 1\nprepare 1|2\nmeasure z on 1 as a\nmeasure x on 1 as b\n\
             assert prob a 0 == 1/1\nassert prob b 0 == 1/2\n",
            "systems 2\nprepare corr((1423))\nmeasure y on 1 as r\n\
             assert outcome r == 0 => state == prod(1|4, 2|4)\n",
        ];
        for src in sources {
            let ast = parse(src).unwrap();
            let printed = print(&ast);
            let reparsed = parse(&printed).unwrap();
            assert_eq!(ast, reparsed, "round trip failed for {src:?}");
        }
    }

    #[test]
    fn epistemic_execution_interference() {
        let mut cats = cache();
        let cfg = RunConfig::new(7, 1000, SystemShape::new(1).unwrap());
        let report = run_source(
            "systems 1\nprepare 1|3\nmeasure x on 1 as r\nassert outcome r == 0\n\
             assert prob r 0 == 1/1\n",
            Mode::Epistemic,
            &cfg,
            &mut cats,
        )
        .unwrap();
        assert!(report.passed(), "{report}");
        assert_eq!(report.branches.len(), 1);
    }

    #[test]
    fn epistemic_execution_steering() {
        let mut cats = cache();
        let cfg = RunConfig::new(7, 1000, SystemShape::new(2).unwrap());
        let report = run_source(
            "systems 2\nprepare bell0\nmeasure z on 1 as r\n\
             assert outcome r == 0 => state == prod(1|2, 1|2)\n\
             assert outcome r == 1 => state == prod(3|4, 3|4)\n\
             assert prob r 0 == 1/2\n",
            Mode::Epistemic,
            &cfg,
            &mut cats,
        )
        .unwrap();
        assert!(report.passed(), "{report}");
        assert_eq!(report.branches.len(), 2);
    }

    #[test]
    fn monte_carlo_execution_converges() {
        let mut cats = cache();
        let cfg = RunConfig::new(7, 10_000, SystemShape::new(1).unwrap());
        let report = run_source(
            "systems 1\nprepare 1|2\nmeasure x on 1 as r\nassert prob r 0 == 1/2\n",
            Mode::MonteCarlo,
            &cfg,
            &mut cats,
        )
        .unwrap();
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn teleportation_script_runs_in_both_modes() {
        let mut cats = cache();
        let src = "systems 3\nprepare prod(1|3, bell0)\nmeasure bell on 1,2 as r\n\
                   transform bellinv(r) on 3\nassert state on 3 == 1|3\n";
        let cfg = RunConfig::new(7, 2000, SystemShape::new(3).unwrap());
        let e = run_source(src, Mode::Epistemic, &cfg, &mut cats).unwrap();
        assert!(e.passed(), "{e}");
        assert_eq!(e.branches.len(), 4);
        let mc = run_source(src, Mode::MonteCarlo, &cfg, &mut cats).unwrap();
        assert!(mc.passed(), "{mc}");
    }

    #[test]
    fn cnot_script_builds_correlation() {
        let mut cats = cache();
        let cfg = RunConfig::new(7, 100, SystemShape::new(2).unwrap());
        let report = run_source(
            "systems 2\nprepare prod(1|3, 1|3)\ntransform cnot on 1,2\n\
             assert state == bell0\n",
            Mode::Epistemic,
            &cfg,
            &mut cats,
        )
        .unwrap();
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn semantic_errors() {
        let mut cats = cache();
        // wrong shape
        let ast = parse("systems 2\nprepare 1|2\n").unwrap();
        assert!(compile(&ast, &mut cats).is_err());
        // unknown binding
        let ast = parse("systems 1\nprepare 1|2\nassert outcome r == 0\n").unwrap();
        assert!(compile(&ast, &mut cats).is_err());
        // singleton outcome in explicit partition
        let ast = parse("systems 1\nprepare 1|2\nmeasure {1, 2|3|4} on 1 as r\n").unwrap();
        assert!(compile(&ast, &mut cats).is_err());
    }
}
