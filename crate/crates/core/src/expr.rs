//! Scalar expression language used for Hamiltonians `H(x)` and custom `psi(w)`.
//!
//! Grammar (whitespace-insensitive, explicit `*` required):
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = ("-" | "+") unary | power ;
//! power   = primary [ "^" unary ] ;          (* exponent must be constant *)
//! primary = number | variable | "pi" | func "(" expr ")" | "(" expr ")" ;
//! func    = "ln" | "exp" | "sqrt" | "sin" | "cos" | "tan" | "arctan" | "atan" ;
//! number  = digits [ "." digits ] [ ("e" | "E") ["+" | "-"] digits ] ;
//! ```
//!
//! Variables are `x1 .. xn` for an `n`-dimensional expression, or the single
//! symbol `w` for univariate expressions.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("variable `{name}` at position {pos} is out of range for dimension {dimension}")]
    VariableOutOfRange {
        name: String,
        pos: usize,
        dimension: usize,
    },
    #[error("exponent at position {pos} must be a constant expression")]
    NonConstantExponent { pos: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("expected a point of dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("domain violation in `{op}`")]
    Domain { op: &'static str },
    #[error("variable index {index} out of range for dimension {dimension}")]
    VariableOutOfRange { index: usize, dimension: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Neg,
    Ln,
    Exp,
    Sqrt,
    Sin,
    Cos,
    Tan,
    Arctan,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Neg => "neg",
            Func::Ln => "ln",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Arctan => "arctan",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "ln" => Func::Ln,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "arctan" | "atan" => Func::Arctan,
            _ => return None,
        })
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Neg => -v,
            Func::Ln => v.ln(),
            Func::Exp => v.exp(),
            Func::Sqrt => v.sqrt(),
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tan => v.tan(),
            Func::Arctan => v.atan(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div => a / b,
        }
    }
}

/// Expression tree node. Variables are zero-based indices.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Unary(Func, Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    /// Power with a constant real exponent.
    Pow(Box<Node>, f64),
}

/// How variables are spelled in source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Variables {
    /// `x1 .. xn`.
    Indexed(usize),
    /// A single named variable, e.g. `w`.
    Single(String),
}

impl Variables {
    pub fn dimension(&self) -> usize {
        match self {
            Variables::Indexed(n) => *n,
            Variables::Single(_) => 1,
        }
    }

    fn name(&self, index: usize) -> String {
        match self {
            Variables::Indexed(_) => format!("x{}", index + 1),
            Variables::Single(s) => s.clone(),
        }
    }
}

/// Immutable parsed scalar expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    vars: Variables,
}

impl Expression {
    /// Parses an expression over `x1 .. x{dimension}`.
    pub fn parse(text: &str, dimension: usize) -> Result<Self, ParseError> {
        Self::parse_with(text, Variables::Indexed(dimension))
    }

    /// Parses a univariate expression in `w`.
    pub fn parse_univariate(text: &str) -> Result<Self, ParseError> {
        Self::parse_with(text, Variables::Single("w".to_string()))
    }

    /// Parses and evaluates a variable-free expression such as `sqrt(2.5)`.
    pub fn parse_constant(text: &str) -> Result<f64, ParseError> {
        let e = Self::parse(text, 0)?;
        e.eval(&[]).map_err(|err| ParseError::Syntax {
            pos: 0,
            msg: err.to_string(),
        })
    }

    pub fn parse_with(text: &str, vars: Variables) -> Result<Self, ParseError> {
        let tokens = lex(text)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            vars: &vars,
            len: text.len(),
        };
        let root = p.expr()?;
        if let Some(t) = p.peek() {
            return Err(ParseError::Syntax {
                pos: t.pos,
                msg: format!("unexpected {}", t.kind.describe()),
            });
        }
        Ok(Expression { root, vars })
    }

    pub fn from_node(root: Node, vars: Variables) -> Self {
        Expression { root, vars }
    }

    pub fn constant(value: f64, vars: Variables) -> Self {
        Expression {
            root: Node::Const(value),
            vars,
        }
    }

    pub fn node(&self) -> &Node {
        &self.root
    }

    pub fn variables(&self) -> &Variables {
        &self.vars
    }

    pub fn dimension(&self) -> usize {
        self.vars.dimension()
    }

    /// True when the tree is a single constant.
    pub fn as_constant(&self) -> Option<f64> {
        match self.root {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    /// Evaluates at `point`. Any non-finite intermediate is a domain violation.
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        let n = self.dimension();
        if point.len() != n {
            return Err(EvalError::DimensionMismatch {
                expected: n,
                got: point.len(),
            });
        }
        eval_node(&self.root, point)
    }

    /// Univariate shortcut.
    pub fn eval1(&self, w: f64) -> Result<f64, EvalError> {
        self.eval(&[w])
    }

    /// Symbolic partial derivative with respect to the zero-based variable `var`.
    pub fn differentiate(&self, var: usize) -> Result<Expression, EvalError> {
        let n = self.dimension();
        if var >= n {
            return Err(EvalError::VariableOutOfRange {
                index: var,
                dimension: n,
            });
        }
        Ok(Expression {
            root: diff(&self.root, var),
            vars: self.vars.clone(),
        })
    }

    /// All first partials.
    pub fn gradient(&self) -> Vec<Expression> {
        (0..self.dimension())
            .map(|i| Expression {
                root: diff(&self.root, i),
                vars: self.vars.clone(),
            })
            .collect()
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, &self.root, &self.vars)
    }
}

fn write_node(f: &mut fmt::Formatter<'_>, node: &Node, vars: &Variables) -> fmt::Result {
    match node {
        Node::Const(c) => write_const(f, *c),
        Node::Var(i) => write!(f, "{}", vars.name(*i)),
        Node::Unary(Func::Neg, a) => {
            write!(f, "(-")?;
            write_node(f, a, vars)?;
            write!(f, ")")
        }
        Node::Unary(func, a) => {
            write!(f, "{}(", func.name())?;
            write_node(f, a, vars)?;
            write!(f, ")")
        }
        Node::Binary(op, a, b) => {
            write!(f, "(")?;
            write_node(f, a, vars)?;
            write!(f, " {} ", op.symbol())?;
            write_node(f, b, vars)?;
            write!(f, ")")
        }
        Node::Pow(a, c) => {
            write!(f, "(")?;
            write_node(f, a, vars)?;
            write!(f, ")^")?;
            write_const(f, *c)
        }
    }
}

fn write_const(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    if c < 0.0 || (c == 0.0 && c.is_sign_negative()) {
        write!(f, "(-{:?})", -c)
    } else {
        write!(f, "{c:?}")
    }
}

fn eval_node(node: &Node, x: &[f64]) -> Result<f64, EvalError> {
    let (v, op) = match node {
        Node::Const(c) => return Ok(*c),
        Node::Var(i) => return Ok(x[*i]),
        Node::Unary(func, a) => {
            let a = eval_node(a, x)?;
            (func.apply(a), func.name())
        }
        Node::Binary(bin, a, b) => {
            let a = eval_node(a, x)?;
            let b = eval_node(b, x)?;
            (bin.apply(a, b), bin.symbol())
        }
        Node::Pow(a, c) => {
            let a = eval_node(a, x)?;
            (a.powf(*c), "^")
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::Domain { op })
    }
}

// Smart constructors with trivial simplification.

fn is_const(n: &Node, v: f64) -> bool {
    matches!(n, Node::Const(c) if *c == v)
}

fn fold(op: BinOp, a: &Node, b: &Node) -> Option<Node> {
    if let (Node::Const(x), Node::Const(y)) = (a, b) {
        let v = op.apply(*x, *y);
        if v.is_finite() {
            return Some(Node::Const(v));
        }
    }
    None
}

pub(crate) fn add(a: Node, b: Node) -> Node {
    if let Some(c) = fold(BinOp::Add, &a, &b) {
        return c;
    }
    if is_const(&a, 0.0) {
        return b;
    }
    if is_const(&b, 0.0) {
        return a;
    }
    Node::Binary(BinOp::Add, Box::new(a), Box::new(b))
}

pub(crate) fn sub(a: Node, b: Node) -> Node {
    if let Some(c) = fold(BinOp::Sub, &a, &b) {
        return c;
    }
    if is_const(&b, 0.0) {
        return a;
    }
    if is_const(&a, 0.0) {
        return neg(b);
    }
    Node::Binary(BinOp::Sub, Box::new(a), Box::new(b))
}

pub(crate) fn mul(a: Node, b: Node) -> Node {
    if let Some(c) = fold(BinOp::Mul, &a, &b) {
        return c;
    }
    if is_const(&a, 0.0) || is_const(&b, 0.0) {
        return Node::Const(0.0);
    }
    if is_const(&a, 1.0) {
        return b;
    }
    if is_const(&b, 1.0) {
        return a;
    }
    if is_const(&a, -1.0) {
        return neg(b);
    }
    if is_const(&b, -1.0) {
        return neg(a);
    }
    Node::Binary(BinOp::Mul, Box::new(a), Box::new(b))
}

pub(crate) fn div(a: Node, b: Node) -> Node {
    if let Some(c) = fold(BinOp::Div, &a, &b) {
        return c;
    }
    if is_const(&b, 1.0) {
        return a;
    }
    Node::Binary(BinOp::Div, Box::new(a), Box::new(b))
}

pub(crate) fn neg(a: Node) -> Node {
    match a {
        Node::Const(c) => Node::Const(-c),
        Node::Unary(Func::Neg, inner) => *inner,
        other => Node::Unary(Func::Neg, Box::new(other)),
    }
}

pub(crate) fn func(f: Func, a: Node) -> Node {
    if f == Func::Neg {
        return neg(a);
    }
    Node::Unary(f, Box::new(a))
}

pub(crate) fn pow(a: Node, c: f64) -> Node {
    if c == 1.0 {
        return a;
    }
    if c == 0.0 {
        return Node::Const(1.0);
    }
    if let Node::Const(x) = a {
        let v = x.powf(c);
        if v.is_finite() {
            return Node::Const(v);
        }
    }
    Node::Pow(Box::new(a), c)
}

fn diff(node: &Node, var: usize) -> Node {
    match node {
        Node::Const(_) => Node::Const(0.0),
        Node::Var(i) => Node::Const(if *i == var { 1.0 } else { 0.0 }),
        Node::Unary(f, u) => {
            let du = diff(u, var);
            if is_const(&du, 0.0) {
                return Node::Const(0.0);
            }
            let u = (**u).clone();
            match f {
                Func::Neg => neg(du),
                Func::Ln => div(du, u),
                Func::Exp => mul(du, func(Func::Exp, u)),
                Func::Sqrt => div(du, mul(Node::Const(2.0), func(Func::Sqrt, u))),
                Func::Sin => mul(du, func(Func::Cos, u)),
                Func::Cos => neg(mul(du, func(Func::Sin, u))),
                Func::Tan => mul(du, add(Node::Const(1.0), pow(func(Func::Tan, u), 2.0))),
                Func::Arctan => div(du, add(Node::Const(1.0), pow(u, 2.0))),
            }
        }
        Node::Binary(op, a, b) => {
            let da = diff(a, var);
            let db = diff(b, var);
            let (a, b) = ((**a).clone(), (**b).clone());
            match op {
                BinOp::Add => add(da, db),
                BinOp::Sub => sub(da, db),
                BinOp::Mul => add(mul(da, b), mul(a, db)),
                BinOp::Div => {
                    if is_const(&db, 0.0) {
                        div(da, b)
                    } else {
                        div(sub(mul(da, b.clone()), mul(a, db)), pow(b, 2.0))
                    }
                }
            }
        }
        Node::Pow(u, c) => {
            let du = diff(u, var);
            if is_const(&du, 0.0) {
                return Node::Const(0.0);
            }
            mul(mul(Node::Const(*c), pow((**u).clone(), c - 1.0)), du)
        }
    }
}

// Lexer

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

impl TokKind {
    fn describe(&self) -> String {
        match self {
            TokKind::Num(v) => format!("number {v}"),
            TokKind::Ident(s) => format!("identifier `{s}`"),
            TokKind::Op(c) => format!("operator `{c}`"),
            TokKind::LParen => "`(`".to_string(),
            TokKind::RParen => "`)`".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let lit = &text[start..i];
            let v: f64 = lit.parse().map_err(|_| ParseError::Syntax {
                pos: start,
                msg: format!("malformed number `{lit}`"),
            })?;
            out.push(Token {
                kind: TokKind::Num(v),
                pos: start,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                kind: TokKind::Ident(text[start..i].to_string()),
                pos: start,
            });
            continue;
        }
        let kind = match c {
            '+' | '-' | '*' | '/' | '^' => TokKind::Op(c),
            '(' => TokKind::LParen,
            ')' => TokKind::RParen,
            _ => {
                let ch = text[start..].chars().next().unwrap_or(c);
                return Err(ParseError::Syntax {
                    pos: start,
                    msg: format!("unexpected character `{ch}`"),
                });
            }
        };
        out.push(Token { kind, pos: start });
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    vars: &'a Variables,
    len: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn peek_op(&self, ops: &[char]) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: TokKind::Op(c),
                ..
            }) if ops.contains(c) => Some(*c),
            _ => None,
        }
    }

    fn end_pos(&self) -> usize {
        self.len
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        while let Some(op) = self.peek_op(&['+', '-']) {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Node::Binary(BinOp::Add, Box::new(lhs), Box::new(rhs))
            } else {
                Node::Binary(BinOp::Sub, Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek_op(&['*', '/']) {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Node::Binary(BinOp::Mul, Box::new(lhs), Box::new(rhs))
            } else {
                Node::Binary(BinOp::Div, Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        match self.peek_op(&['-', '+']) {
            Some('-') => {
                self.pos += 1;
                Ok(Node::Unary(Func::Neg, Box::new(self.unary()?)))
            }
            Some(_) => {
                self.pos += 1;
                self.unary()
            }
            None => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.primary()?;
        if self.peek_op(&['^']).is_some() {
            self.pos += 1;
            let exp_pos = self.peek().map_or(self.end_pos(), |t| t.pos);
            let exponent = self.unary()?;
            let c = if has_var(&exponent) {
                None
            } else {
                eval_node(&exponent, &[]).ok()
            };
            return match c {
                Some(c) => Ok(Node::Pow(Box::new(base), c)),
                None => Err(ParseError::NonConstantExponent { pos: exp_pos }),
            };
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node, ParseError> {
        let end = self.end_pos();
        let Some(tok) = self.next() else {
            return Err(ParseError::Syntax {
                pos: end,
                msg: "unexpected end of input".to_string(),
            });
        };
        match tok.kind {
            TokKind::Num(v) => Ok(Node::Const(v)),
            TokKind::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            TokKind::Ident(name) => {
                if let Some(f) = Func::from_name(&name) {
                    match self.next() {
                        Some(Token {
                            kind: TokKind::LParen,
                            ..
                        }) => {}
                        other => {
                            return Err(ParseError::Syntax {
                                pos: other.map_or(end, |t| t.pos),
                                msg: format!("expected `(` after `{name}`"),
                            })
                        }
                    }
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Node::Unary(f, Box::new(arg)));
                }
                if name == "pi" {
                    return Ok(Node::Const(std::f64::consts::PI));
                }
                self.variable(&name, tok.pos)
            }
            other => Err(ParseError::Syntax {
                pos: tok.pos,
                msg: format!("unexpected {}", other.describe()),
            }),
        }
    }

    fn variable(&self, name: &str, pos: usize) -> Result<Node, ParseError> {
        match self.vars {
            Variables::Single(sym) if sym == name => Ok(Node::Var(0)),
            Variables::Indexed(n) => {
                let idx = name
                    .strip_prefix('x')
                    .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
                    .and_then(|d| d.parse::<usize>().ok());
                match idx {
                    Some(k) if k >= 1 && k <= *n => Ok(Node::Var(k - 1)),
                    Some(_) => Err(ParseError::VariableOutOfRange {
                        name: name.to_string(),
                        pos,
                        dimension: *n,
                    }),
                    None => Err(ParseError::UnknownIdentifier {
                        name: name.to_string(),
                        pos,
                    }),
                }
            }
            Variables::Single(_) => Err(ParseError::UnknownIdentifier {
                name: name.to_string(),
                pos,
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        let end = self.end_pos();
        match self.next() {
            Some(Token {
                kind: TokKind::RParen,
                ..
            }) => Ok(()),
            Some(t) => Err(ParseError::Syntax {
                pos: t.pos,
                msg: format!("expected `)`, found {}", t.kind.describe()),
            }),
            None => Err(ParseError::Syntax {
                pos: end,
                msg: "expected `)`".to_string(),
            }),
        }
    }
}

fn has_var(node: &Node) -> bool {
    match node {
        Node::Const(_) => false,
        Node::Var(_) => true,
        Node::Unary(_, a) | Node::Pow(a, _) => has_var(a),
        Node::Binary(_, a, b) => has_var(a) || has_var(b),
    }
}
