//! Textual front end for operator expressions.
//!
//! Grammar:
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := [coeff '*'] atom
//! coeff := number | identifier
//! atom  := 'u' | 'd/d'dim | 'd2/d'dim'2' | 'int['dim']' | 'frac['dim ',' identifier ']'
//! ```
//!
//! Identifiers become named parameter slots; `frac`'s second argument names
//! the fractional-order slot. A minus between terms folds into the following
//! term's coefficient (numeric negation for fixed coefficients, a structural
//! `-1` scale for slots). Numbers are unsigned decimal literals with
//! optional scientific notation.

use crate::error::{Error, Result};
use crate::operator::{AtomicTerm, Coefficient, OperatorExpr, Term};

/// Source position of a token (1-based line and column).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

/// Parsed operator expression, one node per source term.
#[derive(Debug, Clone)]
pub struct OperatorAst {
    pub dims: Vec<String>,
    pub terms: Vec<AstTerm>,
}

#[derive(Debug, Clone)]
pub struct AstTerm {
    /// Whether the term was introduced by a '-' separator.
    pub negated: bool,
    pub coeff: Option<AstCoeff>,
    pub atom: AstAtom,
    /// Start of the term in the source, for error reporting.
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AstCoeff {
    Number(f64),
    Ident(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum AstAtom {
    Identity,
    Deriv { dim: String, order: u32 },
    Integral { dim: String },
    Fractional { dim: String, order_slot: String },
}

impl OperatorAst {
    /// Structural equality, ignoring source positions.
    pub fn structural_eq(&self, other: &Self) -> bool {
        self.dims == other.dims
            && self.terms.len() == other.terms.len()
            && self
                .terms
                .iter()
                .zip(&other.terms)
                .all(|(a, b)| a.negated == b.negated && a.coeff == b.coeff && a.atom == b.atom)
    }

    /// Renders the AST back to grammar-valid text.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, term) in self.terms.iter().enumerate() {
            if i == 0 {
                debug_assert!(!term.negated, "leading minus is not grammar-valid");
            } else {
                out.push_str(if term.negated { " - " } else { " + " });
            }
            if let Some(coeff) = &term.coeff {
                match coeff {
                    AstCoeff::Number(v) => out.push_str(&format!("{v}*")),
                    AstCoeff::Ident(name) => out.push_str(&format!("{name}*")),
                }
            }
            match &term.atom {
                AstAtom::Identity => out.push('u'),
                AstAtom::Deriv { dim, order: 1 } => out.push_str(&format!("d/d{dim}")),
                AstAtom::Deriv { dim, .. } => out.push_str(&format!("d2/d{dim}2")),
                AstAtom::Integral { dim } => out.push_str(&format!("int[{dim}]")),
                AstAtom::Fractional { dim, order_slot } => {
                    out.push_str(&format!("frac[{dim},{order_slot}]"))
                }
            }
        }
        out
    }

    /// Lowers the AST to an [`OperatorExpr`], checking slot uniqueness.
    pub fn to_expr(&self) -> Result<OperatorExpr> {
        let mut terms = Vec::with_capacity(self.terms.len());
        let mut order_param: Option<String> = None;
        let mut bound: Vec<(String, &'static str)> = Vec::new();
        for term in &self.terms {
            let sign = if term.negated { -1.0 } else { 1.0 };
            let coeff = match &term.coeff {
                None => Coefficient::Fixed(sign),
                Some(AstCoeff::Number(v)) => Coefficient::Fixed(sign * v),
                Some(AstCoeff::Ident(name)) => {
                    check_binding(&mut bound, name, "coefficient", term.pos)?;
                    Coefficient::Slot {
                        name: name.clone(),
                        scale: sign,
                    }
                }
            };
            let dim_index = |name: &String| -> Result<usize> {
                self.dims.iter().position(|d| d == name).ok_or_else(|| {
                    parse_err(term.pos, format!("unknown dimension name `{name}`"))
                })
            };
            let atomic = match &term.atom {
                AstAtom::Identity => AtomicTerm::Identity,
                AstAtom::Deriv { dim, order } => AtomicTerm::PartialDeriv {
                    dim: dim_index(dim)?,
                    order: *order,
                },
                AstAtom::Integral { dim } => AtomicTerm::IntegralFromZero {
                    dim: dim_index(dim)?,
                },
                AstAtom::Fractional { dim, order_slot } => {
                    check_binding(&mut bound, order_slot, "fractional order", term.pos)?;
                    match &order_param {
                        None => order_param = Some(order_slot.clone()),
                        Some(existing) if existing == order_slot => {}
                        Some(existing) => {
                            return Err(parse_err(
                                term.pos,
                                format!(
                                    "fractional order slot `{order_slot}` conflicts with \
                                     `{existing}`; all fractional terms must share one order slot"
                                ),
                            ))
                        }
                    }
                    AtomicTerm::FractionalDeriv {
                        dim: dim_index(dim)?,
                    }
                }
            };
            terms.push(Term { coeff, atomic });
        }
        OperatorExpr::new(terms, order_param)
    }
}

fn check_binding(
    bound: &mut Vec<(String, &'static str)>,
    name: &str,
    role: &'static str,
    pos: Pos,
) -> Result<()> {
    if let Some((_, previous)) = bound.iter().find(|(n, _)| n == name) {
        // The same identifier may bind the shared fractional order twice
        // (one per fractional term); any other duplicate is an error.
        if !(*previous == "fractional order" && role == "fractional order") {
            return Err(parse_err(
                pos,
                format!("parameter `{name}` already bound as a {previous}"),
            ));
        }
        return Ok(());
    }
    bound.push((name.to_string(), role));
    Ok(())
}

/// Parses an operator expression over the named dimensions.
pub fn parse_operator(text: &str, dims: &[String]) -> Result<OperatorExpr> {
    parse_ast(text, dims)?.to_expr()
}

/// Parses to the AST form, keeping source positions.
pub fn parse_ast(text: &str, dims: &[String]) -> Result<OperatorAst> {
    if dims.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one dimension name is required".into(),
        ));
    }
    let tokens = lex(text)?;
    Parser {
        dims,
        tokens: &tokens,
        at: 0,
        end: end_pos(text),
    }
    .parse()
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Number(f64),
    Plus,
    Minus,
    Star,
    Slash,
    LBracket,
    RBracket,
    Comma,
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "`{w}`"),
            Tok::Number(v) => write!(f, "number `{v}`"),
            Tok::Plus => write!(f, "`+`"),
            Tok::Minus => write!(f, "`-`"),
            Tok::Star => write!(f, "`*`"),
            Tok::Slash => write!(f, "`/`"),
            Tok::LBracket => write!(f, "`[`"),
            Tok::RBracket => write!(f, "`]`"),
            Tok::Comma => write!(f, "`,`"),
        }
    }
}

fn parse_err(pos: Pos, message: String) -> Error {
    Error::Parse {
        line: pos.line,
        column: pos.column,
        message,
    }
}

fn end_pos(text: &str) -> Pos {
    let line = text.lines().count().max(1);
    let column = text.lines().last().map_or(1, |l| l.chars().count() + 1);
    Pos { line, column }
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>> {
    let mut tokens = Vec::new();
    let mut line = 1usize;
    let mut column = 1usize;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, column };
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next().unwrap();
            if c == '\n' {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
            c
        };
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                bump(&mut chars);
            }
            '+' => {
                bump(&mut chars);
                tokens.push((Tok::Plus, pos));
            }
            '-' => {
                bump(&mut chars);
                tokens.push((Tok::Minus, pos));
            }
            '*' => {
                bump(&mut chars);
                tokens.push((Tok::Star, pos));
            }
            '/' => {
                bump(&mut chars);
                tokens.push((Tok::Slash, pos));
            }
            '[' => {
                bump(&mut chars);
                tokens.push((Tok::LBracket, pos));
            }
            ']' => {
                bump(&mut chars);
                tokens.push((Tok::RBracket, pos));
            }
            ',' => {
                bump(&mut chars);
                tokens.push((Tok::Comma, pos));
            }
            '0'..='9' => {
                let mut s = String::new();
                while matches!(chars.peek(), Some('0'..='9')) {
                    s.push(bump(&mut chars));
                }
                if matches!(chars.peek(), Some('.')) {
                    s.push(bump(&mut chars));
                    while matches!(chars.peek(), Some('0'..='9')) {
                        s.push(bump(&mut chars));
                    }
                }
                if matches!(chars.peek(), Some('e' | 'E')) {
                    s.push(bump(&mut chars));
                    if matches!(chars.peek(), Some('+' | '-')) {
                        s.push(bump(&mut chars));
                    }
                    if !matches!(chars.peek(), Some('0'..='9')) {
                        return Err(parse_err(pos, format!("malformed number `{s}`")));
                    }
                    while matches!(chars.peek(), Some('0'..='9')) {
                        s.push(bump(&mut chars));
                    }
                }
                let value: f64 = s
                    .parse()
                    .map_err(|_| parse_err(pos, format!("malformed number `{s}`")))?;
                tokens.push((Tok::Number(value), pos));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while matches!(chars.peek(), Some(c) if c.is_ascii_alphanumeric() || *c == '_') {
                    s.push(bump(&mut chars));
                }
                tokens.push((Tok::Word(s), pos));
            }
            other => {
                return Err(parse_err(pos, format!("unexpected character `{other}`")));
            }
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    dims: &'a [String],
    tokens: &'a [(Tok, Pos)],
    at: usize,
    end: Pos,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&(Tok, Pos)> {
        self.tokens.get(self.at)
    }

    fn next(&mut self) -> Option<&'a (Tok, Pos)> {
        let t = self.tokens.get(self.at);
        self.at += 1;
        t
    }

    fn here(&self) -> Pos {
        self.peek().map_or(self.end, |(_, p)| *p)
    }

    fn expect(&mut self, want: &Tok, context: &str) -> Result<Pos> {
        match self.next() {
            Some((tok, pos)) if tok == want => Ok(*pos),
            Some((tok, pos)) => Err(parse_err(
                *pos,
                format!("expected {want} {context}, found {tok}"),
            )),
            None => Err(parse_err(
                self.end,
                format!("expected {want} {context}, found end of input"),
            )),
        }
    }

    fn expect_word(&mut self, context: &str) -> Result<(String, Pos)> {
        match self.next() {
            Some((Tok::Word(w), pos)) => Ok((w.clone(), *pos)),
            Some((tok, pos)) => Err(parse_err(
                *pos,
                format!("expected {context}, found {tok}"),
            )),
            None => Err(parse_err(
                self.end,
                format!("expected {context}, found end of input"),
            )),
        }
    }

    fn parse(mut self) -> Result<OperatorAst> {
        let mut terms = Vec::new();
        if self.peek().is_none() {
            return Err(parse_err(self.end, "empty operator expression".into()));
        }
        terms.push(self.term(false)?);
        while let Some((tok, pos)) = self.peek() {
            let negated = match tok {
                Tok::Plus => false,
                Tok::Minus => true,
                other => {
                    return Err(parse_err(
                        *pos,
                        format!("expected `+` or `-` between terms, found {other}"),
                    ))
                }
            };
            self.next();
            terms.push(self.term(negated)?);
        }
        Ok(OperatorAst {
            dims: self.dims.to_vec(),
            terms,
        })
    }

    fn term(&mut self, negated: bool) -> Result<AstTerm> {
        let pos = self.here();
        let coeff = match self.peek() {
            Some((Tok::Number(v), _)) => {
                let v = *v;
                self.next();
                self.expect(&Tok::Star, "after a numeric coefficient")?;
                Some(AstCoeff::Number(v))
            }
            Some((Tok::Word(_), _))
                if matches!(self.tokens.get(self.at + 1), Some((Tok::Star, _))) =>
            {
                let (name, word_pos) = self.expect_word("identifier")?;
                self.check_slot_name(&name, word_pos)?;
                self.next(); // the '*'
                Some(AstCoeff::Ident(name))
            }
            _ => None,
        };
        let atom = self.atom()?;
        Ok(AstTerm {
            negated,
            coeff,
            atom,
            pos,
        })
    }

    fn atom(&mut self) -> Result<AstAtom> {
        let (word, pos) = self.expect_word("an operator atom")?;
        match word.as_str() {
            "u" => Ok(AstAtom::Identity),
            "d" | "d2" => {
                let order = if word == "d" { 1 } else { 2 };
                self.expect(&Tok::Slash, "in a derivative atom")?;
                let (denom, dpos) = self.expect_word("a `d<dim>` denominator")?;
                let dim = self.deriv_dim(&denom, order, dpos)?;
                Ok(AstAtom::Deriv { dim, order })
            }
            "int" => {
                self.expect(&Tok::LBracket, "after `int`")?;
                let (dim, dpos) = self.expect_word("a dimension name")?;
                self.check_dim(&dim, dpos)?;
                self.expect(&Tok::RBracket, "to close `int[`")?;
                Ok(AstAtom::Integral { dim })
            }
            "frac" => {
                self.expect(&Tok::LBracket, "after `frac`")?;
                let (dim, dpos) = self.expect_word("a dimension name")?;
                self.check_dim(&dim, dpos)?;
                self.expect(&Tok::Comma, "between the dimension and the order slot")?;
                let (order_slot, spos) = self.expect_word("an order-slot identifier")?;
                self.check_slot_name(&order_slot, spos)?;
                self.expect(&Tok::RBracket, "to close `frac[`")?;
                Ok(AstAtom::Fractional { dim, order_slot })
            }
            other => Err(parse_err(
                pos,
                format!("expected an operator atom (`u`, `d/d<dim>`, `d2/d<dim>2`, `int[<dim>]`, `frac[<dim>,<slot>]`), found `{other}`"),
            )),
        }
    }

    /// Resolves the `d<dim>` (order 1) or `d<dim>2` (order 2) denominator.
    fn deriv_dim(&self, denom: &str, order: u32, pos: Pos) -> Result<String> {
        let inner = denom
            .strip_prefix('d')
            .and_then(|rest| {
                if order == 2 {
                    rest.strip_suffix('2')
                } else {
                    Some(rest)
                }
            })
            .ok_or_else(|| {
                parse_err(
                    pos,
                    format!("malformed derivative denominator `{denom}`"),
                )
            })?;
        self.check_dim(inner, pos)?;
        Ok(inner.to_string())
    }

    fn check_dim(&self, name: &str, pos: Pos) -> Result<()> {
        if self.dims.iter().any(|d| d == name) {
            Ok(())
        } else {
            Err(parse_err(
                pos,
                format!(
                    "unknown dimension name `{name}` (declared: {})",
                    self.dims.join(", ")
                ),
            ))
        }
    }

    fn check_slot_name(&self, name: &str, pos: Pos) -> Result<()> {
        const RESERVED: [&str; 5] = ["u", "d", "d2", "int", "frac"];
        if RESERVED.contains(&name) || self.dims.iter().any(|d| d == name) {
            return Err(parse_err(
                pos,
                format!("`{name}` cannot be used as a parameter name"),
            ));
        }
        // `d<dim>` and `d<dim>2` also collide with derivative denominators.
        for dim in self.dims {
            if name == format!("d{dim}") || name == format!("d{dim}2") {
                return Err(parse_err(
                    pos,
                    format!("`{name}` cannot be used as a parameter name"),
                ));
            }
        }
        Ok(())
    }
}
