//! One-variable arithmetic expressions in `u`.
//!
//! Grammar (standard precedence, `^` binds tighter than unary minus and is
//! right-associative):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | 'u' | func '(' expr ')' | 'pow' '(' expr ',' expr ')' | '(' expr ')'
//! func    := sqrt | exp | log | abs | sin | cos
//! ```
//!
//! Numbers are decimal literals with an optional exponent. There is no
//! implicit multiplication: `2u` is rejected.
//!
//! Parsed expressions are compiled to a small postfix program which is what
//! [`Expr::eval`] runs. The tree is kept for printing and for locating the
//! offending sub-expression when evaluation leaves the real domain.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at column {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier `{name}` at column {pos}")]
    UnknownIdentifier { pos: usize, name: String },
    #[error("`{expr}` is not a finite real number at u = {input}")]
    EvalDomain { expr: String, input: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Exp,
    Log,
    Abs,
    Sin,
    Cos,
}

impl Func {
    const ALL: [Func; 6] = [
        Func::Sqrt,
        Func::Exp,
        Func::Log,
        Func::Abs,
        Func::Sin,
        Func::Cos,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sqrt => x.sqrt(),
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Abs => x.abs(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
        }
    }
}

/// Expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var,
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

fn binary(op: BinOp, a: f64, b: f64) -> f64 {
    match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => a / b,
        BinOp::Pow => real_pow(a, b),
    }
}

// Negative base with a non-integer exponent has no real value.
fn real_pow(base: f64, exponent: f64) -> f64 {
    if base < 0.0 && exponent.fract() != 0.0 {
        f64::NAN
    } else {
        base.powf(exponent)
    }
}

impl Node {
    /// Checked tree evaluation; the error names the innermost failing node.
    pub fn eval(&self, u: f64) -> Result<f64, ExprError> {
        let value = match self {
            Node::Const(c) => *c,
            Node::Var => u,
            Node::Neg(a) => -a.eval(u)?,
            Node::Binary(op, a, b) => binary(*op, a.eval(u)?, b.eval(u)?),
            Node::Call(func, a) => func.apply(a.eval(u)?),
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(ExprError::EvalDomain {
                expr: self.to_string(),
                input: u,
            })
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Const(_) | Node::Var => 1,
            Node::Neg(a) | Node::Call(_, a) => 1 + a.depth(),
            Node::Binary(_, a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    fn contains_var(&self) -> bool {
        match self {
            Node::Const(_) => false,
            Node::Var => true,
            Node::Neg(a) | Node::Call(_, a) => a.contains_var(),
            Node::Binary(_, a, b) => a.contains_var() || b.contains_var(),
        }
    }

    fn compile(&self, code: &mut Vec<Op>) {
        match self {
            Node::Const(c) => code.push(Op::Const(*c)),
            Node::Var => code.push(Op::Var),
            Node::Neg(a) => {
                a.compile(code);
                code.push(Op::Neg);
            }
            Node::Binary(op, a, b) => {
                a.compile(code);
                b.compile(code);
                code.push(Op::Binary(*op));
            }
            Node::Call(func, a) => {
                a.compile(code);
                code.push(Op::Call(*func));
            }
        }
    }
}

/// Fully parenthesized form; `{:?}` on f64 is the shortest string that
/// parses back to the same bits, so printing then parsing is lossless.
impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => {
                write!(f, "(-{:?})", -c)
            }
            Node::Const(c) => write!(f, "{c:?}"),
            Node::Var => f.write_str("u"),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Binary(op, a, b) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a}{sym}{b})")
            }
            Node::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    Var,
    Neg,
    Binary(BinOp),
    Call(Func),
}

/// A parsed expression. Immutable; evaluation is pure.
#[derive(Debug, Clone)]
pub struct Expr {
    source: String,
    root: Node,
    code: Vec<Op>,
    stack_size: usize,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ExprError> {
        let mut parser = Parser::new(src)?;
        let root = parser.expr()?;
        match parser.peek() {
            Token::End => Ok(Expr::from_node_with_source(root, src.trim().to_string())),
            tok => Err(parser.unexpected(tok, "end of input")),
        }
    }

    pub fn constant(value: f64) -> Expr {
        Expr::from_node(Node::Const(value))
    }

    pub fn from_node(root: Node) -> Expr {
        let source = root.to_string();
        Expr::from_node_with_source(root, source)
    }

    fn from_node_with_source(root: Node, source: String) -> Expr {
        let mut code = Vec::new();
        root.compile(&mut code);
        let mut depth = 0usize;
        let mut stack_size = 0usize;
        for op in &code {
            match op {
                Op::Const(_) | Op::Var => depth += 1,
                Op::Binary(_) => depth -= 1,
                Op::Neg | Op::Call(_) => {}
            }
            stack_size = stack_size.max(depth);
        }
        Expr {
            source,
            root,
            code,
            stack_size,
        }
    }

    /// The text this expression was parsed from (trimmed).
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn node(&self) -> &Node {
        &self.root
    }

    /// True when the expression does not mention `u`.
    pub fn is_constant(&self) -> bool {
        !self.root.contains_var()
    }

    /// Evaluate at `u`. Any non-finite intermediate value is an error.
    pub fn eval(&self, u: f64) -> Result<f64, ExprError> {
        let (value, ok) = if self.stack_size <= INLINE_STACK {
            run(&self.code, u, &mut [0.0; INLINE_STACK])
        } else {
            run(&self.code, u, &mut vec![0.0; self.stack_size])
        };
        if ok {
            Ok(value)
        } else {
            // Slow path only to name the failing sub-expression.
            match self.root.eval(u) {
                Err(e) => Err(e),
                Ok(_) => Err(ExprError::EvalDomain {
                    expr: self.root.to_string(),
                    input: u,
                }),
            }
        }
    }
}

const INLINE_STACK: usize = 32;

fn run(code: &[Op], u: f64, stack: &mut [f64]) -> (f64, bool) {
    let mut sp = 0usize;
    let mut finite = true;
    for op in code {
        let value = match *op {
            Op::Const(c) => {
                stack[sp] = c;
                sp += 1;
                continue;
            }
            Op::Var => {
                stack[sp] = u;
                sp += 1;
                continue;
            }
            Op::Neg => -stack[sp - 1],
            Op::Call(func) => func.apply(stack[sp - 1]),
            Op::Binary(op) => {
                sp -= 1;
                binary(op, stack[sp - 1], stack[sp])
            }
        };
        finite &= value.is_finite();
        stack[sp - 1] = value;
    }
    let value = stack[0];
    (value, finite && value.is_finite())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

impl FromStr for Expr {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expr::parse(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Num(x) => write!(f, "number {x}"),
            Token::Ident(s) => write!(f, "`{s}`"),
            Token::Plus => f.write_str("`+`"),
            Token::Minus => f.write_str("`-`"),
            Token::Star => f.write_str("`*`"),
            Token::Slash => f.write_str("`/`"),
            Token::Caret => f.write_str("`^`"),
            Token::LParen => f.write_str("`(`"),
            Token::RParen => f.write_str("`)`"),
            Token::Comma => f.write_str("`,`"),
            Token::End => f.write_str("end of input"),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let pos = i + 1;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => out.push((pos, Token::Plus)),
            b'-' => out.push((pos, Token::Minus)),
            b'*' => out.push((pos, Token::Star)),
            b'/' => out.push((pos, Token::Slash)),
            b'^' => out.push((pos, Token::Caret)),
            b'(' => out.push((pos, Token::LParen)),
            b')' => out.push((pos, Token::RParen)),
            b',' => out.push((pos, Token::Comma)),
            b'0'..=b'9' | b'.' => {
                let start = i;
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
                let text = &src[start..i];
                let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
                    pos,
                    msg: format!("malformed number `{text}`"),
                })?;
                out.push((pos, Token::Num(value)));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((pos, Token::Ident(src[start..i].to_string())));
                continue;
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(ExprError::Syntax {
                    pos,
                    msg: format!("unexpected character `{ch}`"),
                });
            }
        }
        i += 1;
    }
    out.push((src.len() + 1, Token::End));
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    at: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Parser, ExprError> {
        let tokens = tokenize(src)?;
        if tokens.len() == 1 {
            return Err(ExprError::Syntax {
                pos: 1,
                msg: "empty expression".into(),
            });
        }
        Ok(Parser { tokens, at: 0 })
    }

    fn peek(&self) -> Token {
        self.tokens[self.at].1.clone()
    }

    fn pos(&self) -> usize {
        self.tokens[self.at].0
    }

    fn bump(&mut self) -> Token {
        let tok = self.peek();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        tok
    }

    fn unexpected(&self, tok: Token, wanted: &str) -> ExprError {
        ExprError::Syntax {
            pos: self.pos(),
            msg: format!("expected {wanted}, found {tok}"),
        }
    }

    fn expect(&mut self, want: Token) -> Result<(), ExprError> {
        let tok = self.peek();
        if tok == want {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(tok, &want.to_string()))
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Token::Plus => BinOp::Add,
                Token::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Token::Star => BinOp::Mul,
                Token::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.peek() == Token::Minus {
            self.bump();
            Ok(Node::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.primary()?;
        if self.peek() == Token::Caret {
            self.bump();
            let exponent = self.unary()?;
            Ok(Node::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)))
        } else {
            Ok(base)
        }
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        let pos = self.pos();
        match self.bump() {
            Token::Num(x) => {
                self.reject_juxtaposition()?;
                Ok(Node::Const(x))
            }
            Token::LParen => {
                let inner = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(inner)
            }
            Token::Ident(name) if name == "u" => {
                self.reject_juxtaposition()?;
                Ok(Node::Var)
            }
            Token::Ident(name) if name == "pow" => {
                self.expect(Token::LParen)?;
                let base = self.expr()?;
                self.expect(Token::Comma)?;
                let exponent = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(Node::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)))
            }
            Token::Ident(name) => {
                let func = Func::ALL
                    .into_iter()
                    .find(|f| f.name() == name)
                    .ok_or(ExprError::UnknownIdentifier { pos, name })?;
                self.expect(Token::LParen)?;
                let arg = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(Node::Call(func, Box::new(arg)))
            }
            tok => {
                self.at = self.at.saturating_sub(1);
                let _ = pos;
                Err(self.unexpected(tok, "a number, `u`, a function or `(`"))
            }
        }
    }

    // `2u`, `2(u)` and `u u` would otherwise read as two adjacent operands.
    fn reject_juxtaposition(&self) -> Result<(), ExprError> {
        match self.peek() {
            tok @ (Token::Num(_) | Token::Ident(_) | Token::LParen) => Err(ExprError::Syntax {
                pos: self.pos(),
                msg: format!("missing operator before {tok} (no implicit multiplication)"),
            }),
            _ => Ok(()),
        }
    }
}
