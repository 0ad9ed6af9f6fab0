//! Closed-form perturbation profiles `f(x, y)`.
//!
//! A small recursive-descent parser for arithmetic expressions over the
//! variables `x` and `y`. Supported syntax:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('+' | '-') unary | power
//! power   := atom ('^' unary)?            right associative
//! atom    := number | 'x' | 'y' | 'pi' | call | '(' expr ')'
//! call    := ident '(' expr (',' expr)* ')'
//! ```
//!
//! Functions: `sin`, `cos`, `exp`, `sqrt`, `abs` (one argument) and the
//! smooth window `cosq(x, R)` = cos²(πx/(2R)) for |x| < R, zero otherwise.
//! Unary minus binds looser than `^`, so `-x^2` is `-(x^2)`.

use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {pos}: expected {expected}")]
    Syntax { pos: usize, expected: String },
    #[error("unknown identifier `{name}` at offset {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("domain error in `{subexpr}`: {reason}")]
    Domain { subexpr: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
    Cosq,
}

impl Func {
    fn lookup(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "cosq" => Func::Cosq,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Cosq => "cosq",
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Cosq => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    X,
    Y,
    Pi,
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// Smooth window cos²(πx/(2R)) on |x| < R, zero elsewhere. C¹ across |x| = R.
pub fn cosq(x: f64, radius: f64) -> f64 {
    if x.abs() < radius {
        let c = (PI * x / (2.0 * radius)).cos();
        c * c
    } else {
        0.0
    }
}

/// Parsed, immutable expression tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionTree {
    root: Node,
}

impl ExpressionTree {
    pub fn parse(text: &str) -> Result<Self, ExprError> {
        parse_expression(text)
    }

    pub fn evaluate(&self, x: f64, y: f64) -> Result<f64, ExprError> {
        eval(&self.root, x, y)
    }

    /// True when the expression never mentions `y`.
    pub fn is_y_independent(&self) -> bool {
        !mentions_y(&self.root)
    }
}

impl fmt::Display for ExpressionTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(&self.root, f)
    }
}

pub fn parse_expression(text: &str) -> Result<ExpressionTree, ExprError> {
    if text.trim().is_empty() {
        return Err(ExprError::Syntax {
            pos: 0,
            expected: "an expression".into(),
        });
    }
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let root = parser.expr()?;
    match parser.peek() {
        Tok::End => Ok(ExpressionTree { root }),
        _ => Err(parser.error("operator or end of input")),
    }
}

pub fn evaluate(tree: &ExpressionTree, x: f64, y: f64) -> Result<f64, ExprError> {
    tree.evaluate(x, y)
}

fn mentions_y(node: &Node) -> bool {
    match node {
        Node::Y => true,
        Node::Num(_) | Node::X | Node::Pi => false,
        Node::Neg(a) => mentions_y(a),
        Node::Bin(_, a, b) => mentions_y(a) || mentions_y(b),
        Node::Call(_, args) => args.iter().any(mentions_y),
    }
}

fn domain(node: &Node, reason: &str) -> ExprError {
    ExprError::Domain {
        subexpr: ExpressionTree { root: node.clone() }.to_string(),
        reason: reason.to_string(),
    }
}

fn eval(node: &Node, x: f64, y: f64) -> Result<f64, ExprError> {
    let value = match node {
        Node::Num(v) => *v,
        Node::X => x,
        Node::Y => y,
        Node::Pi => PI,
        Node::Neg(a) => -eval(a, x, y)?,
        Node::Bin(op, a, b) => {
            let l = eval(a, x, y)?;
            let r = eval(b, x, y)?;
            match op {
                BinOp::Add => l + r,
                BinOp::Sub => l - r,
                BinOp::Mul => l * r,
                BinOp::Div => {
                    if r == 0.0 {
                        return Err(domain(node, "division by zero"));
                    }
                    l / r
                }
                BinOp::Pow => l.powf(r),
            }
        }
        Node::Call(func, args) => {
            let a = eval(&args[0], x, y)?;
            match func {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Exp => a.exp(),
                Func::Abs => a.abs(),
                Func::Sqrt => {
                    if a < 0.0 {
                        return Err(domain(node, "square root of a negative number"));
                    }
                    a.sqrt()
                }
                Func::Cosq => {
                    let radius = eval(&args[1], x, y)?;
                    if !(radius > 0.0) {
                        return Err(domain(node, "window radius must be positive"));
                    }
                    cosq(a, radius)
                }
            }
        }
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(domain(node, "non-finite value"))
    }
}

// Pretty printer: fully parenthesised, numbers in shortest round-trip form.
fn write_node(node: &Node, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match node {
        Node::Num(v) => {
            if *v < 0.0 {
                write!(f, "({v:?})")
            } else {
                write!(f, "{v:?}")
            }
        }
        Node::X => f.write_str("x"),
        Node::Y => f.write_str("y"),
        Node::Pi => f.write_str("pi"),
        Node::Neg(a) => {
            f.write_str("(-")?;
            write_node(a, f)?;
            f.write_str(")")
        }
        Node::Bin(op, a, b) => {
            f.write_str("(")?;
            write_node(a, f)?;
            write!(f, " {} ", op.symbol())?;
            write_node(b, f)?;
            f.write_str(")")
        }
        Node::Call(func, args) => {
            write!(f, "{}(", func.name())?;
            for (i, arg) in args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write_node(arg, f)?;
            }
            f.write_str(")")
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
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
        match c {
            '+' | '-' | '*' | '/' | '^' => {
                out.push((Tok::Op(c), start));
                i += 1;
            }
            '(' => {
                out.push((Tok::LParen, start));
                i += 1;
            }
            ')' => {
                out.push((Tok::RParen, start));
                i += 1;
            }
            ',' => {
                out.push((Tok::Comma, start));
                i += 1;
            }
            '0'..='9' | '.' => {
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
                let lexeme = &text[start..i];
                let value = lexeme.parse::<f64>().map_err(|_| ExprError::Syntax {
                    pos: start,
                    expected: format!("a number, found `{lexeme}`"),
                })?;
                out.push((Tok::Num(value), start));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
            }
            _ => {
                return Err(ExprError::Syntax {
                    pos: start,
                    expected: format!("a token, found `{c}`"),
                })
            }
        }
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].0
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let tok = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn error(&self, expected: &str) -> ExprError {
        ExprError::Syntax {
            pos: self.offset(),
            expected: expected.to_string(),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ExprError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(what))
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Tok::Op('-') => {
                self.bump();
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        let pos = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => match name.as_str() {
                "x" => Ok(Node::X),
                "y" => Ok(Node::Y),
                "pi" => Ok(Node::Pi),
                _ => {
                    let func = Func::lookup(&name).ok_or(ExprError::UnknownIdentifier {
                        name: name.clone(),
                        pos,
                    })?;
                    self.expect(Tok::LParen, &format!("`(` after `{name}`"))?;
                    let mut args = vec![self.expr()?];
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        args.push(self.expr()?);
                    }
                    if args.len() != func.arity() {
                        return Err(ExprError::Syntax {
                            pos,
                            expected: format!(
                                "{} argument(s) to `{name}`, found {}",
                                func.arity(),
                                args.len()
                            ),
                        });
                    }
                    self.expect(Tok::RParen, "`,` or `)`")?;
                    Ok(Node::Call(func, args))
                }
            },
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(ExprError::Syntax {
                    pos,
                    expected: "a number, variable, function call or `(`".into(),
                })
            }
        }
    }
}

/// Sampled structural diagnostics for a profile; never rejects.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileReport {
    /// max |f| sampled on R < |x| ≤ 2R.
    pub support_violation: f64,
    /// max over sampled x of the y-period mismatch in value and in y-slope.
    pub periodicity_defect: f64,
    /// Sign of a trapezoid estimate of ∬f over [−R, R] × [0, 2π]; 0 inside `tol`.
    pub mean_sign: i8,
    pub mean_estimate: f64,
    /// Samples where evaluation failed (domain errors).
    pub evaluation_failures: usize,
}

pub fn validate_profile(
    tree: &ExpressionTree,
    radius: f64,
    n_samples: usize,
    tol: f64,
) -> ProfileReport {
    assert!(radius > 0.0, "support radius must be positive");
    assert!(n_samples >= 16, "need at least 16 samples");
    let mut failures = 0usize;
    let mut sample = |x: f64, y: f64| match tree.evaluate(x, y) {
        Ok(v) => v,
        Err(_) => {
            failures += 1;
            0.0
        }
    };

    let mut support_violation = 0.0f64;
    for k in 1..=n_samples {
        let x = radius * (1.0 + k as f64 / n_samples as f64);
        for q in 0..n_samples {
            let y = 2.0 * PI * q as f64 / n_samples as f64;
            support_violation = support_violation
                .max(sample(x, y).abs())
                .max(sample(-x, y).abs());
        }
    }

    // The slope is compared through the same difference stencil at y = 0 and
    // y = 2π, so truncation error cancels and only genuine mismatch remains.
    let h = 0.05;
    let mut periodicity_defect = 0.0f64;
    for k in 0..n_samples {
        let x = -2.0 * radius + 4.0 * radius * k as f64 / (n_samples - 1) as f64;
        let f0 = sample(x, 0.0);
        let f1 = sample(x, 2.0 * PI);
        let d0 = (sample(x, h) - sample(x, -h)) / (2.0 * h);
        let d1 = (sample(x, 2.0 * PI + h) - sample(x, 2.0 * PI - h)) / (2.0 * h);
        periodicity_defect = periodicity_defect.max((f0 - f1).abs()).max((d0 - d1).abs());
    }

    let hx = 2.0 * radius / (n_samples - 1) as f64;
    let hy = 2.0 * PI / n_samples as f64;
    let mut mean_estimate = 0.0;
    for k in 0..n_samples {
        let x = -radius + hx * k as f64;
        let wx = if k == 0 || k == n_samples - 1 {
            0.5
        } else {
            1.0
        };
        for q in 0..n_samples {
            mean_estimate += wx * sample(x, hy * q as f64);
        }
    }
    mean_estimate *= hx * hy;
    let mean_sign = if mean_estimate > tol {
        1
    } else if mean_estimate < -tol {
        -1
    } else {
        0
    };

    ProfileReport {
        support_violation,
        periodicity_defect,
        mean_sign,
        mean_estimate,
        evaluation_failures: failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn at(text: &str, x: f64, y: f64) -> f64 {
        parse_expression(text).unwrap().evaluate(x, y).unwrap()
    }

    #[test]
    fn arithmetic_and_window() {
        assert_eq!(at("x + 2*y", 1.0, 2.0), 5.0);
        assert_eq!(at("cosq(x, 1.0)", 0.0, 0.0), 1.0);
        assert!(at("(1 + cos(y)) * cosq(x, 1.0)", 0.5, PI).abs() < 1e-16);
        assert_eq!(at("exp(0)", 0.0, 0.0), 1.0);
        assert_eq!(at("cosq(x,1.0)", 1.0, 0.0), 0.0);
        assert_eq!(at("cosq(x,1.0)", 1.5, 0.0), 0.0);
    }

    #[test]
    fn precedence() {
        assert_eq!(at("1 + 2 * 3", 0.0, 0.0), 7.0);
        assert_eq!(at("2 ^ 3 ^ 2", 0.0, 0.0), 512.0);
        assert_eq!(at("-2^2", 0.0, 0.0), -4.0);
        assert_eq!(at("2^-1", 0.0, 0.0), 0.5);
        assert_eq!(at("8 / 4 / 2", 0.0, 0.0), 1.0);
        assert_eq!(at("1 - 2 - 3", 0.0, 0.0), -4.0);
        assert_eq!(at("(1 - 2) * 3", 0.0, 0.0), -3.0);
        assert_eq!(at("2*pi", 0.0, 0.0), 2.0 * PI);
        assert_eq!(at("1.5e1 + 2E-1", 0.0, 0.0), 15.2);
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_expression("1 + * 2") {
            Err(ExprError::Syntax { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_expression("(x + 1"),
            Err(ExprError::Syntax { pos: 6, .. })
        ));
        assert!(matches!(
            parse_expression("x y"),
            Err(ExprError::Syntax { .. })
        ));
        assert!(matches!(
            parse_expression("cosq(x)"),
            Err(ExprError::Syntax { .. })
        ));
        assert!(matches!(
            parse_expression(""),
            Err(ExprError::Syntax { pos: 0, .. })
        ));
        assert!(matches!(
            parse_expression("x # 2"),
            Err(ExprError::Syntax { pos: 2, .. })
        ));
    }

    #[test]
    fn unknown_identifiers() {
        assert_eq!(
            parse_expression("tan(x)"),
            Err(ExprError::UnknownIdentifier {
                name: "tan".into(),
                pos: 0
            })
        );
        assert!(matches!(
            parse_expression("x + z"),
            Err(ExprError::UnknownIdentifier { pos: 4, .. })
        ));
    }

    #[test]
    fn domain_errors_name_the_subexpression() {
        let tree = parse_expression("1 + sqrt(x - 2)").unwrap();
        match tree.evaluate(0.0, 0.0) {
            Err(ExprError::Domain { subexpr, .. }) => assert_eq!(subexpr, "sqrt((x - 2.0))"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_expression("1/x").unwrap().evaluate(0.0, 0.0),
            Err(ExprError::Domain { .. })
        ));
        assert!(matches!(
            parse_expression("exp(x)").unwrap().evaluate(1e4, 0.0),
            Err(ExprError::Domain { .. })
        ));
    }

    #[test]
    fn y_independence() {
        assert!(parse_expression("cosq(x, 1)").unwrap().is_y_independent());
        assert!(!parse_expression("cosq(x, 1) * cos(y)")
            .unwrap()
            .is_y_independent());
    }

    #[test]
    fn validate_examples() {
        let r = validate_profile(
            &parse_expression("(1+cos(y))*cosq(x,1)").unwrap(),
            1.0,
            32,
            1e-12,
        );
        assert_eq!(r.support_violation, 0.0);
        assert!(r.periodicity_defect < 1e-13);
        assert_eq!(r.mean_sign, 1);
        assert_eq!(r.evaluation_failures, 0);

        let r = validate_profile(&parse_expression("cosq(x,2)").unwrap(), 1.0, 32, 1e-12);
        assert!(r.support_violation > 0.0);

        let r = validate_profile(&parse_expression("-cosq(x,1)").unwrap(), 1.0, 32, 1e-12);
        assert_eq!(r.mean_sign, -1);

        let r = validate_profile(&parse_expression("0*x").unwrap(), 1.0, 32, 1e-12);
        assert_eq!(r.mean_sign, 0);

        let r = validate_profile(
            &parse_expression("cosq(x,1)*cos(y/2)").unwrap(),
            1.0,
            32,
            1e-12,
        );
        assert!(r.periodicity_defect > 0.1);
    }

    #[test]
    fn window_is_c1_at_the_boundary() {
        let h = 1e-6;
        for r in [0.5, 1.0, 3.0] {
            let left = cosq(r - h, r);
            assert!(left < 1e-10);
            let slope_in = (cosq(r - h, r) - cosq(r - 2.0 * h, r)) / h;
            let slope_out = (cosq(r + 2.0 * h, r) - cosq(r + h, r)) / h;
            assert!(
                (slope_in - slope_out).abs() < 50.0 * h,
                "slope jump at R={r}"
            );
        }
    }

    #[test]
    fn integer_harmonics_are_periodic() {
        for k in 1..=6 {
            let text = format!("cosq(x,1)*(2 + sin({k}*y) + 0.5*cos({k}*y))");
            let r = validate_profile(&parse_expression(&text).unwrap(), 1.0, 24, 1e-12);
            assert!(
                r.periodicity_defect <= 1e-13,
                "k={k}: {}",
                r.periodicity_defect
            );
        }
    }

    fn arb_expr() -> impl Strategy<Value = String> {
        let leaf = prop_oneof![
            Just("x".to_string()),
            Just("y".to_string()),
            Just("pi".to_string()),
            (0.0f64..10.0).prop_map(|v| format!("{v}")),
        ];
        leaf.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                (
                    inner.clone(),
                    inner.clone(),
                    prop::sample::select(vec!['+', '-', '*'])
                )
                    .prop_map(|(a, b, op)| format!("({a}) {op} ({b})")),
                inner.clone().prop_map(|a| format!("-{a}")),
                inner.clone().prop_map(|a| format!("sin({a})")),
                inner.clone().prop_map(|a| format!("cos({a})")),
                inner.clone().prop_map(|a| format!("abs({a})")),
                inner.clone().prop_map(|a| format!("cosq({a}, 1.5)")),
                inner.prop_map(|a| format!("exp(cos({a}))")),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_round_trips(text in arb_expr(), pts in prop::collection::vec((-3.0f64..3.0, 0.0f64..7.0), 100)) {
            let tree = parse_expression(&text).unwrap();
            let again = parse_expression(&tree.to_string()).unwrap();
            for (x, y) in pts {
                let a = tree.evaluate(x, y);
                let b = again.evaluate(x, y);
                match (a, b) {
                    (Ok(a), Ok(b)) => prop_assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0)),
                    (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
                }
            }
        }

        #[test]
        fn evaluation_is_deterministic(text in arb_expr(), x in -3.0f64..3.0, y in 0.0f64..7.0) {
            let tree = parse_expression(&text).unwrap();
            let a = tree.evaluate(x, y).ok().map(f64::to_bits);
            let b = tree.evaluate(x, y).ok().map(f64::to_bits);
            prop_assert_eq!(a, b);
        }
    }
}
