use super::{BinOp, Cond, Expr, Func, ParseError, Tag};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
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
    EqEq,
    End,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let single = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(t) = single {
            out.push(Spanned {
                tok: t,
                line: l0,
                col: c0,
            });
            i += 1;
            col += 1;
            continue;
        }
        if c == '=' {
            if chars.get(i + 1) == Some(&'=') {
                out.push(Spanned {
                    tok: Tok::EqEq,
                    line: l0,
                    col: c0,
                });
                i += 2;
                col += 2;
                continue;
            }
            return Err(ParseError::new(l0, c0, "expected '=='"));
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text
                .parse()
                .map_err(|_| ParseError::new(l0, c0, format!("malformed number '{text}'")))?;
            col += i - start;
            out.push(Spanned {
                tok: Tok::Num(v),
                line: l0,
                col: c0,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            out.push(Spanned {
                tok: Tok::Ident(text),
                line: l0,
                col: c0,
            });
            continue;
        }
        return Err(ParseError::new(l0, c0, format!("unexpected character '{c}'")));
    }
    out.push(Spanned {
        tok: Tok::End,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    n: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        let s = &self.toks[self.pos];
        (s.line, s.col)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let (l, c) = self.here();
        Err(ParseError::new(l, c, msg))
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Ident(s) if s == kw => {
                self.bump();
                Ok(())
            }
            _ => self.err(format!("expected '{kw}'")),
        }
    }

    fn variable(&self, name: &str) -> Result<Option<usize>, ParseError> {
        let Some(digits) = name.strip_prefix('x') else {
            return Ok(None);
        };
        if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
            return Ok(None);
        }
        let k: usize = digits.parse().unwrap_or(0);
        if k == 0 || k > self.n {
            return self.err(format!("variable '{name}' out of range 1..={}", self.n));
        }
        Ok(Some(k - 1))
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        if matches!(self.peek(), Tok::Ident(s) if s == "if") {
            return self.conditional();
        }
        self.additive()
    }

    fn conditional(&mut self) -> Result<Expr, ParseError> {
        self.expect_keyword("if")?;
        let cond = self.condition()?;
        self.expect_keyword("then")?;
        let then = self.expr()?;
        self.expect_keyword("else")?;
        let els = self.expr()?;
        Ok(Expr::If {
            cond,
            then: Box::new(then),
            els: Box::new(els),
        })
    }

    fn var_token(&mut self) -> Result<usize, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => match self.variable(&s)? {
                Some(v) => {
                    self.bump();
                    Ok(v)
                }
                None => self.err(format!("expected a variable, found '{s}'")),
            },
            _ => self.err("expected a variable"),
        }
    }

    fn condition(&mut self) -> Result<Cond, ParseError> {
        if matches!(self.peek(), Tok::Ident(s) if s == "tag") {
            self.bump();
            self.expect(Tok::LParen, "'('")?;
            let var = self.var_token()?;
            self.expect(Tok::RParen, "')'")?;
            self.expect(Tok::EqEq, "'=='")?;
            let tag = match self.peek() {
                Tok::Ident(s) if s == "Q" => Tag::Q,
                Tok::Ident(s) if s == "I" => Tag::I,
                _ => return self.err("expected tag 'Q' or 'I'"),
            };
            self.bump();
            return Ok(Cond::Tag { var, tag });
        }
        let var = self.var_token()?;
        self.expect(Tok::EqEq, "'=='")?;
        let neg = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        match self.bump() {
            Tok::Num(v) => Ok(Cond::Equals {
                var,
                value: if neg { -v } else { v },
            }),
            _ => {
                self.pos -= 1;
                self.err("expected a numeric literal")
            }
        }
    }

    fn additive(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.multiplicative()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let mut base = self.primary()?;
        while *self.peek() == Tok::Caret {
            self.bump();
            match self.bump() {
                Tok::Num(v) if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 => {
                    base = Expr::Pow(Box::new(base), v as u32);
                }
                _ => {
                    self.pos -= 1;
                    return self.err("exponent must be a non-negative integer literal");
                }
            }
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(v) = self.variable(&name)? {
                    self.bump();
                    return Ok(Expr::Var(v));
                }
                let func = match name.as_str() {
                    "abs" => Func::Abs,
                    "sqrt" => Func::Sqrt,
                    "min" => Func::Min,
                    "max" => Func::Max,
                    "if" => return self.conditional(),
                    _ => return self.err(format!("unknown identifier '{name}'")),
                };
                self.bump();
                self.expect(Tok::LParen, "'('")?;
                let mut args = vec![self.expr()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    args.push(self.expr()?);
                }
                self.expect(Tok::RParen, "')'")?;
                let ok = match func {
                    Func::Abs | Func::Sqrt => args.len() == 1,
                    Func::Min | Func::Max => args.len() >= 2,
                };
                if !ok {
                    return self.err(format!("wrong number of arguments for '{name}'"));
                }
                Ok(Expr::Call(func, args))
            }
            Tok::End => self.err("unexpected end of input"),
            other => self.err(format!("unexpected token {other:?}")),
        }
    }
}

pub(super) fn parse(src: &str, n: usize) -> Result<Expr, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, n };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.err("trailing input");
    }
    Ok(e)
}
