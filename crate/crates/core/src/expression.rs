//! Glucose-model expressions.
//!
//! An [`Expr`] is lowered from a derivation tree, evaluated one time step at
//! a time, and rendered as fully parenthesized text. [`parse_expr`] reads
//! that text back (and also ordinary infix text with the usual precedence).

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::VarName;
use crate::mapper::{DerivationTree, Node};
use crate::simulate::PatientSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }

    fn from_symbol(s: &str) -> Option<Self> {
        Some(match s {
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            "/" => BinOp::Div,
            _ => return None,
        })
    }

    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div => a / b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    /// Only reachable from the worked-example grammar.
    Abs,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Abs => "Abs",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().as_str() {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    /// Radians; poles and overflow come back as non-finite values.
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Exp => x.exp(),
            Func::Abs => x.abs(),
        }
    }
}

/// Input series an expression can reference with a lag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    /// Estimated glucose.
    GL,
    CH,
    IS,
    IL,
}

impl Channel {
    pub fn as_str(self) -> &'static str {
        match self {
            Channel::GL => "GL",
            Channel::CH => "CH",
            Channel::IS => "IS",
            Channel::IL => "IL",
        }
    }

    fn from_var(name: VarName) -> Option<Self> {
        Some(match name {
            VarName::GL => Channel::GL,
            VarName::CH => Channel::CH,
            VarName::IS => Channel::IS,
            VarName::IL => Channel::IL,
            VarName::K => return None,
        })
    }
}

/// A `dd.dd` constant, stored as a count of hundredths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Constant(u16);

impl Constant {
    pub const MAX_HUNDREDTHS: u16 = 9999;

    pub fn from_hundredths(h: u16) -> Option<Self> {
        (h <= Self::MAX_HUNDREDTHS).then_some(Constant(h))
    }

    /// Accepts `d`, `dd`, `d.d`, `dd.dd` and similar (at most two digits on
    /// either side of the point).
    pub fn from_decimal(text: &str) -> Option<Self> {
        let (int, frac) = match text.split_once('.') {
            Some((i, f)) => (i, f),
            None => (text, ""),
        };
        let all_digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
        if int.is_empty() || int.len() > 2 || frac.len() > 2 || !all_digits(int) || !all_digits(frac) {
            return None;
        }
        if text.contains('.') && frac.is_empty() {
            return None;
        }
        let int: u16 = int.parse().ok()?;
        let frac: u16 = match frac.len() {
            0 => 0,
            1 => frac.parse::<u16>().ok()? * 10,
            _ => frac.parse().ok()?,
        };
        Constant::from_hundredths(int * 100 + frac)
    }

    pub fn hundredths(self) -> u16 {
        self.0
    }

    #[inline]
    pub fn value(self) -> f64 {
        f64::from(self.0) / 100.0
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}.{:02}", self.0 / 100, self.0 % 100)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expr {
    BinOp {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    UnaryFn {
        func: Func,
        arg: Box<Expr>,
    },
    VarRef {
        channel: Channel,
        lag: u32,
    },
    TimeK,
    Const(Constant),
    /// Free variable of the worked-example grammar (`X`); evaluates to `k`.
    Input(String),
}

impl Expr {
    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::BinOp {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn unary(func: Func, arg: Expr) -> Expr {
        Expr::UnaryFn {
            func,
            arg: Box::new(arg),
        }
    }

    pub fn var(channel: Channel, lag: u32) -> Expr {
        Expr::VarRef { channel, lag }
    }

    /// Panics if `text` is not a valid `dd.dd` constant.
    pub fn constant(text: &str) -> Expr {
        Expr::Const(Constant::from_decimal(text).expect("valid constant"))
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::BinOp { lhs, rhs, .. } => 1 + lhs.depth().max(rhs.depth()),
            Expr::UnaryFn { arg, .. } => 1 + arg.depth(),
            _ => 1,
        }
    }

    pub fn max_lag(&self) -> u32 {
        match self {
            Expr::BinOp { lhs, rhs, .. } => lhs.max_lag().max(rhs.max_lag()),
            Expr::UnaryFn { arg, .. } => arg.max_lag(),
            Expr::VarRef { lag, .. } => *lag,
            _ => 0,
        }
    }

    /// Value of the expression at step `ctx.k`.
    pub fn eval(&self, ctx: &EvalContext<'_>) -> f64 {
        match self {
            Expr::BinOp { op, lhs, rhs } => op.apply(lhs.eval(ctx), rhs.eval(ctx)),
            Expr::UnaryFn { func, arg } => func.apply(arg.eval(ctx)),
            Expr::VarRef { channel, lag } => ctx.read(*channel, *lag),
            Expr::TimeK | Expr::Input(_) => ctx.k as f64,
            Expr::Const(c) => c.value(),
        }
    }

    /// Fully parenthesized canonical text.
    pub fn render(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::BinOp { op, lhs, rhs } => write!(f, "({lhs} {} {rhs})", op.symbol()),
            Expr::UnaryFn { func, arg } => write!(f, "{}({arg})", func.name()),
            Expr::VarRef { channel, lag: 0 } => write!(f, "{}[k]", channel.as_str()),
            Expr::VarRef { channel, lag } => write!(f, "{}[k-{lag}]", channel.as_str()),
            Expr::TimeK => f.write_str("k"),
            Expr::Const(c) => c.fmt(f),
            Expr::Input(name) => f.write_str(name),
        }
    }
}

/// Evaluation state for one step `k` (1-based).
///
/// `gl_hat` holds the estimated glucose for steps `1..=k`; CH, IS and IL are
/// read from the actual series. Indices before step 1 clamp to step 1.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext<'a> {
    pub k: usize,
    pub gl_hat: &'a [f64],
    pub series: &'a PatientSeries,
}

impl EvalContext<'_> {
    #[inline]
    fn read(&self, channel: Channel, lag: u32) -> f64 {
        let idx = self.k.saturating_sub(lag as usize).max(1) - 1;
        match channel {
            Channel::GL => self.gl_hat[idx],
            Channel::CH => self.series.ch()[idx],
            Channel::IS => self.series.is()[idx],
            Channel::IL => self.series.il()[idx],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LowerError {
    #[error("malformed derivation tree: {0}")]
    MalformedTree(String),
}

/// Lower a derivation tree to an [`Expr`].
///
/// Each branch is read as an infix sequence of its children: operands, binary
/// operators, function names and parentheses. Operators within one choice
/// associate to the left, so `<a> <op> <b> <op> <c>` becomes
/// `((a op b) op c)`. Branches whose leaves spell a decimal become constants.
pub fn from_derivation(tree: &DerivationTree<'_>) -> Result<Expr, LowerError> {
    lower_node(&tree.root)
}

#[derive(Debug)]
enum Item {
    Operand(Expr),
    Op(BinOp),
    Func(Func),
    Open,
    Close,
}

fn malformed(msg: impl Into<String>) -> LowerError {
    LowerError::MalformedTree(msg.into())
}

fn lower_node(node: &Node<'_>) -> Result<Expr, LowerError> {
    match classify(node)? {
        Item::Operand(e) => Ok(e),
        other => Err(malformed(format!("expected an operand, found {other:?}"))),
    }
}

fn classify(node: &Node<'_>) -> Result<Item, LowerError> {
    match node {
        Node::Leaf { text, .. } => classify_text(text),
        Node::Variable { name, index, .. } => {
            let expr = match (Channel::from_var(*name), index) {
                (None, _) => Expr::TimeK,
                (Some(channel), Some(index)) => {
                    let digits: String = index.iter().map(Node::yield_text).collect();
                    let lag = digits
                        .parse::<u32>()
                        .map_err(|_| malformed(format!("bad lag `{digits}` for {}", channel.as_str())))?;
                    Expr::VarRef { channel, lag }
                }
                (Some(channel), None) => return Err(malformed(format!("{} without a lag", channel.as_str()))),
            };
            Ok(Item::Operand(expr))
        }
        Node::Branch { children, .. } => {
            if let [only] = children.as_slice() {
                return classify(only);
            }
            if let Some(c) = numeric_branch(node) {
                return Ok(Item::Operand(Expr::Const(c)));
            }
            let items = children.iter().map(classify).collect::<Result<Vec<_>, _>>()?;
            let mut pos = 0;
            let expr = parse_items(&items, &mut pos)?;
            if pos != items.len() {
                return Err(malformed(format!("unexpected trailing symbols in `{}`", node.yield_text())));
            }
            Ok(Item::Operand(expr))
        }
    }
}

/// Constant spelled by a branch made only of digit and `.` leaves. Bails out
/// at the first other leaf so large subtrees are not stringified.
fn numeric_branch(node: &Node<'_>) -> Option<Constant> {
    fn collect(node: &Node<'_>, buf: &mut String) -> bool {
        match node {
            Node::Leaf { text, .. } => {
                buf.len() + text.len() <= 5 && text.bytes().all(|b| b.is_ascii_digit() || b == b'.') && {
                    buf.push_str(text);
                    true
                }
            }
            Node::Branch { children, .. } => children.iter().all(|c| collect(c, buf)),
            Node::Variable { .. } => false,
        }
    }
    let mut buf = String::with_capacity(5);
    if collect(node, &mut buf) {
        Constant::from_decimal(&buf)
    } else {
        None
    }
}

fn classify_text(text: &str) -> Result<Item, LowerError> {
    if let Some(op) = BinOp::from_symbol(text) {
        return Ok(Item::Op(op));
    }
    if let Some(func) = Func::from_name(text) {
        return Ok(Item::Func(func));
    }
    match text {
        "(" => return Ok(Item::Open),
        ")" => return Ok(Item::Close),
        "X" => return Ok(Item::Operand(Expr::Input("X".into()))),
        _ => {}
    }
    Constant::from_decimal(text)
        .map(|c| Item::Operand(Expr::Const(c)))
        .ok_or_else(|| malformed(format!("unknown terminal `{text}`")))
}

// seq := term (op term)*      term := func ( seq ) | ( seq ) | operand
fn parse_items(items: &[Item], pos: &mut usize) -> Result<Expr, LowerError> {
    let mut acc = parse_term(items, pos)?;
    while let Some(Item::Op(op)) = items.get(*pos) {
        *pos += 1;
        let rhs = parse_term(items, pos)?;
        acc = Expr::bin(*op, acc, rhs);
    }
    Ok(acc)
}

fn parse_term(items: &[Item], pos: &mut usize) -> Result<Expr, LowerError> {
    let item = items.get(*pos).ok_or_else(|| malformed("missing operand"))?;
    *pos += 1;
    match item {
        Item::Operand(e) => Ok(e.clone()),
        Item::Open => {
            let inner = parse_items(items, pos)?;
            expect_close(items, pos)?;
            Ok(inner)
        }
        Item::Func(func) => {
            if !matches!(items.get(*pos), Some(Item::Open)) {
                return Err(malformed(format!("{} without `(`", func.name())));
            }
            *pos += 1;
            let arg = parse_items(items, pos)?;
            expect_close(items, pos)?;
            Ok(Expr::unary(*func, arg))
        }
        other => Err(malformed(format!("unexpected {other:?}"))),
    }
}

fn expect_close(items: &[Item], pos: &mut usize) -> Result<(), LowerError> {
    match items.get(*pos) {
        Some(Item::Close) => {
            *pos += 1;
            Ok(())
        }
        _ => Err(malformed("unbalanced parentheses")),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse expression at byte {position}: {message}")]
pub struct ExprParseError {
    pub position: usize,
    pub message: String,
}

/// Read expression text.
///
/// Accepts the canonical rendering (`(cos(GL[k-11]) * 46.98)`), phenotype
/// spellings (`GL[k_05]`, `K`) and the `GL(k-1)` form. Unparenthesized text
/// uses the usual precedence: `*` and `/` bind tighter than `+` and `-`, and
/// both levels associate to the left.
pub fn parse_expr(text: &str) -> Result<Expr, ExprParseError> {
    let mut p = Reader { src: text.as_bytes(), pos: 0 };
    let e = p.sum()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Reader<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn error(&self, message: impl Into<String>) -> ExprParseError {
        ExprParseError {
            position: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ExprParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{}`", c as char)))
        }
    }

    fn sum(&mut self) -> Result<Expr, ExprParseError> {
        let mut acc = self.product()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(acc),
            };
            self.pos += 1;
            acc = Expr::bin(op, acc, self.product()?);
        }
    }

    fn product(&mut self) -> Result<Expr, ExprParseError> {
        let mut acc = self.atom()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(acc),
            };
            self.pos += 1;
            acc = Expr::bin(op, acc, self.atom()?);
        }
    }

    fn word(&mut self) -> &str {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphabetic()) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("")
    }

    fn atom(&mut self) -> Result<Expr, ExprParseError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.sum()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while self.pos < self.src.len() && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.') {
                    self.pos += 1;
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                Constant::from_decimal(text).map(Expr::Const).ok_or(ExprParseError {
                    position: start,
                    message: format!("`{text}` is not a dd.dd constant"),
                })
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                let word = self.word().to_string();
                if let Some(func) = Func::from_name(&word) {
                    self.expect(b'(')?;
                    let arg = self.sum()?;
                    self.expect(b')')?;
                    return Ok(Expr::unary(func, arg));
                }
                let channel = match word.as_str() {
                    "k" | "K" => return Ok(Expr::TimeK),
                    "X" => return Ok(Expr::Input(word)),
                    "GL" => Channel::GL,
                    "CH" => Channel::CH,
                    "IS" => Channel::IS,
                    "IL" => Channel::IL,
                    _ => {
                        return Err(ExprParseError {
                            position: start,
                            message: format!("unknown name `{word}`"),
                        })
                    }
                };
                let close = match self.peek() {
                    Some(b'[') => b']',
                    Some(b'(') => b')',
                    _ => return Err(self.error(format!("{word} needs a time index"))),
                };
                self.pos += 1;
                let lag = self.lag()?;
                self.expect(close)?;
                Ok(Expr::VarRef { channel, lag })
            }
            Some(c) => Err(self.error(format!("unexpected `{}`", c as char))),
        }
    }

    // k | k-<n> | k_<digits>
    fn lag(&mut self) -> Result<u32, ExprParseError> {
        if self.peek() != Some(b'k') {
            return Err(self.error("time index must start with `k`"));
        }
        self.pos += 1;
        let digits = |r: &mut Self| -> Result<u32, ExprParseError> {
            r.skip_ws();
            let start = r.pos;
            while r.pos < r.src.len() && r.src[r.pos].is_ascii_digit() {
                r.pos += 1;
            }
            std::str::from_utf8(&r.src[start..r.pos])
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| r.error("expected a lag"))
        };
        if self.src.get(self.pos) == Some(&b'_') {
            self.pos += 1;
            return digits(self);
        }
        if self.eat(b'-') {
            return digits(self);
        }
        Ok(0)
    }
}
