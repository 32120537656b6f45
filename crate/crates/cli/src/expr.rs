//! A tiny arithmetic language for field components and closed forms.
//!
//! Grammar: numbers, named variables, `pi`, `+ - * / ^`, parentheses and the
//! functions `sqrt cos sin exp abs min max`. `^` binds tightest and is
//! right-associative; unary minus binds looser than `^`, so `-x^2 = -(x^2)`.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct ExprError {
    /// Zero-based character offset into the source.
    pub position: usize,
    pub message: String,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at column {}: {}", self.position + 1, self.message)
    }
}

impl std::error::Error for ExprError {}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sqrt,
    Cos,
    Sin,
    Exp,
    Abs,
    Min,
    Max,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "sqrt" => (Func::Sqrt, 1),
            "cos" => (Func::Cos, 1),
            "sin" => (Func::Sin, 1),
            "exp" => (Func::Exp, 1),
            "abs" => (Func::Abs, 1),
            "min" => (Func::Min, 2),
            "max" => (Func::Max, 2),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

impl Node {
    fn eval(&self, vars: &[f64]) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::Var(k) => vars[*k],
            Node::Neg(a) => -a.eval(vars),
            Node::Add(a, b) => a.eval(vars) + b.eval(vars),
            Node::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Node::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Node::Div(a, b) => a.eval(vars) / b.eval(vars),
            Node::Pow(a, b) => a.eval(vars).powf(b.eval(vars)),
            Node::Call(f, args) => {
                let x = args[0].eval(vars);
                match f {
                    Func::Sqrt => x.sqrt(),
                    Func::Cos => x.cos(),
                    Func::Sin => x.sin(),
                    Func::Exp => x.exp(),
                    Func::Abs => x.abs(),
                    Func::Min => x.min(args[1].eval(vars)),
                    Func::Max => x.max(args[1].eval(vars)),
                }
            }
        }
    }
}

/// A parsed expression with its variables bound to slots.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    source: String,
}

impl Expr {
    /// Parses `source`; `names[k]` is the variable stored in slot `k`.
    pub fn parse(source: &str, names: &[&str]) -> Result<Expr, ExprError> {
        let tokens = tokenize(source)?;
        let mut p = Parser { tokens, pos: 0, names, end: source.chars().count() };
        let root = p.expr()?;
        if let Some(t) = p.peek() {
            return Err(ExprError { position: t.at, message: format!("unexpected {}", t.kind.describe()) });
        }
        Ok(Expr { root, source: source.to_string() })
    }

    pub fn eval(&self, vars: &[f64]) -> f64 {
        self.root.eval(vars)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// The value when it does not depend on any variable.
    pub fn constant(&self) -> Option<f64> {
        fn uses_vars(n: &Node) -> bool {
            match n {
                Node::Num(_) => false,
                Node::Var(_) => true,
                Node::Neg(a) => uses_vars(a),
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
                    uses_vars(a) || uses_vars(b)
                }
                Node::Call(_, args) => args.iter().any(uses_vars),
            }
        }
        (!uses_vars(&self.root)).then(|| self.root.eval(&[]))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

impl Kind {
    fn describe(&self) -> String {
        match self {
            Kind::Num(v) => format!("number {v}"),
            Kind::Ident(s) => format!("name '{s}'"),
            Kind::Op(c) => format!("'{c}'"),
            Kind::LParen => "'('".into(),
            Kind::RParen => "')'".into(),
            Kind::Comma => "','".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: Kind,
    at: usize,
}

fn tokenize(source: &str) -> Result<Vec<Token>, ExprError> {
    let chars: Vec<char> = source.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let at = i;
        let kind = if c.is_ascii_digit() || c == '.' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                j += 1;
            }
            if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                let mut k = j + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    while k < chars.len() && chars[k].is_ascii_digit() {
                        k += 1;
                    }
                    j = k;
                }
            }
            let text: String = chars[i..j].iter().collect();
            i = j;
            Kind::Num(text.parse().map_err(|_| ExprError { position: at, message: format!("bad number '{text}'") })?)
        } else if c.is_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            let text: String = chars[i..j].iter().collect();
            i = j;
            Kind::Ident(text)
        } else {
            i += 1;
            match c {
                '+' | '-' | '*' | '/' | '^' => Kind::Op(c),
                '(' => Kind::LParen,
                ')' => Kind::RParen,
                ',' => Kind::Comma,
                _ => return Err(ExprError { position: at, message: format!("unexpected character '{c}'") }),
            }
        };
        out.push(Token { kind, at });
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    names: &'a [&'a str],
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn here(&self) -> usize {
        self.peek().map(|t| t.at).unwrap_or(self.end)
    }

    fn eat(&mut self, kind: &Kind) -> bool {
        if self.peek().map(|t| &t.kind) == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: Kind) -> Result<(), ExprError> {
        if self.eat(&kind) {
            Ok(())
        } else {
            Err(self.error(format!("expected {}", kind.describe())))
        }
    }

    fn error(&self, message: String) -> ExprError {
        let message = match self.peek() {
            Some(t) => format!("{message}, found {}", t.kind.describe()),
            None => format!("{message}, found end of input"),
        };
        ExprError { position: self.here(), message }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(&Kind::Op('+')) {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(&Kind::Op('-')) {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(&Kind::Op('*')) {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(&Kind::Op('/')) {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat(&Kind::Op('-')) {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat(&Kind::Op('+')) {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.primary()?;
        if self.eat(&Kind::Op('^')) {
            return Ok(Node::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        let Some(token) = self.peek().cloned() else {
            return Err(self.error("expected a value".into()));
        };
        match token.kind {
            Kind::Num(v) => {
                self.pos += 1;
                Ok(Node::Num(v))
            }
            Kind::LParen => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(Kind::RParen)?;
                Ok(inner)
            }
            Kind::Ident(name) => {
                self.pos += 1;
                if self.eat(&Kind::LParen) {
                    let Some((func, arity)) = Func::lookup(&name) else {
                        return Err(ExprError { position: token.at, message: format!("unknown function '{name}'") });
                    };
                    let mut args = vec![self.expr()?];
                    while self.eat(&Kind::Comma) {
                        args.push(self.expr()?);
                    }
                    self.expect(Kind::RParen)?;
                    if args.len() != arity {
                        return Err(ExprError {
                            position: token.at,
                            message: format!("{name} takes {arity} argument(s), got {}", args.len()),
                        });
                    }
                    return Ok(Node::Call(func, args));
                }
                if let Some(k) = self.names.iter().position(|n| *n == name) {
                    return Ok(Node::Var(k));
                }
                if name == "pi" {
                    return Ok(Node::Num(std::f64::consts::PI));
                }
                let known = if self.names.is_empty() { "none".to_string() } else { self.names.join(", ") };
                Err(ExprError { position: token.at, message: format!("unknown name '{name}' (variables: {known})") })
            }
            _ => Err(self.error("expected a value".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(src: &str, names: &[&str], vars: &[f64]) -> f64 {
        Expr::parse(src, names).unwrap().eval(vars)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("1 + 2 * 3", &[], &[]), 7.0);
        assert_eq!(eval("(1 + 2) * 3", &[], &[]), 9.0);
        assert_eq!(eval("2 ^ 3 ^ 2", &[], &[]), 512.0);
        assert_eq!(eval("-2 ^ 2", &[], &[]), -4.0);
        assert_eq!(eval("2 ^ -1", &[], &[]), 0.5);
        assert_eq!(eval("8 / 4 / 2", &[], &[]), 1.0);
        assert_eq!(eval("1 - 2 - 3", &[], &[]), -4.0);
        assert_eq!(eval("1.5e1 + .5", &[], &[]), 15.5);
    }

    #[test]
    fn variables_and_functions() {
        let names = ["x_a", "x_b", "t"];
        let vars = [3.0, 4.0, 0.5];
        assert_eq!(eval("sqrt(x_a^2 + x_b^2)", &names, &vars), 5.0);
        assert_eq!(eval("min(x_a, x_b) - max(x_a, t)", &names, &vars), 0.0);
        assert_eq!(eval("abs(t - x_a)", &names, &vars), 2.5);
        assert!((eval("pi/2 - x_a", &names, &vars) - (std::f64::consts::FRAC_PI_2 - 3.0)).abs() < 1e-15);
        assert_eq!(eval("cos(0) + sin(0) + exp(0)", &[], &[]), 2.0);
    }

    #[test]
    fn constants_are_detected() {
        assert_eq!(Expr::parse("-1", &["x"]).unwrap().constant(), Some(-1.0));
        assert_eq!(Expr::parse("x + 1", &["x"]).unwrap().constant(), None);
    }

    #[test]
    fn errors_report_positions() {
        let e = Expr::parse("1 + * 2", &[]).unwrap_err();
        assert_eq!(e.position, 4);
        let e = Expr::parse("x_a + y", &["x_a"]).unwrap_err();
        assert_eq!(e.position, 6);
        assert!(e.message.contains("unknown name 'y'"));
        let e = Expr::parse("sqrt(1, 2)", &[]).unwrap_err();
        assert_eq!(e.position, 0);
        let e = Expr::parse("(1 + 2", &[]).unwrap_err();
        assert_eq!(e.position, 6);
        assert!(e.to_string().starts_with("at column 7"));
        let e = Expr::parse("2 $ 3", &[]).unwrap_err();
        assert_eq!(e.position, 2);
        let e = Expr::parse("foo(1)", &[]).unwrap_err();
        assert!(e.message.contains("unknown function"));
        assert!(Expr::parse("1 2", &[]).is_err());
        assert!(Expr::parse("", &[]).is_err());
    }
}
