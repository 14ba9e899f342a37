use std::collections::HashMap;
use std::sync::Arc;

use indexmap::IndexMap;

use super::ast::{Def, Expr, ExprKind, Lambda, Literal, Name, Program, Tag};
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;
use crate::builtins::{self, Arity};

const KEYWORDS: &[&str] = &["def", "rep", "nbr", "true", "false", "infinity"];
const MAX_DEPTH: usize = 200;

/// Parses a self-contained program.
pub fn parse(source: &str) -> Result<Program, ParseError> {
    Parser::new(source, None)?.program()
}

/// Parses `source` with the definitions of `prelude` in scope. The returned
/// program contains the prelude definitions followed by the new ones.
pub fn parse_with_prelude(source: &str, prelude: &Program) -> Result<Program, ParseError> {
    Parser::new(source, Some(prelude))?.program()
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    prelude: Option<&'a Program>,
    def_arity: HashMap<String, usize>,
    scopes: Vec<Vec<Name>>,
    owner: Name,
    lambda_count: usize,
    depth: usize,
}

fn slotted(mut e: Expr, slot: usize) -> Expr {
    e.slot = slot as u16;
    e
}

fn apply(target: Expr, args: Vec<Expr>) -> Expr {
    let args = args.into_iter().enumerate().map(|(i, a)| slotted(a, i + 1)).collect();
    Expr::new(0, ExprKind::Apply { target: Box::new(slotted(target, 0)), args })
}

fn builtin_ref(name: &str) -> Expr {
    Expr::new(0, ExprKind::BuiltinRef(name.into()))
}

fn binary_symbol(tok: &Tok) -> Option<&'static str> {
    match tok {
        Tok::Plus | Tok::Minus | Tok::Star | Tok::Slash | Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge | Tok::EqEq | Tok::NotEq | Tok::AndAnd | Tok::OrOr => {
            tok.symbol()
        }
        _ => None,
    }
}

impl<'a> Parser<'a> {
    fn new(source: &str, prelude: Option<&'a Program>) -> Result<Self, ParseError> {
        let tokens = tokenize(source)?;
        let mut def_arity = HashMap::new();
        if let Some(p) = prelude {
            for def in p.defs.values() {
                def_arity.insert(def.name.to_string(), def.params.len());
            }
        }
        // Forward references: collect `def name(a, b, ...)` headers up front.
        for (i, t) in tokens.iter().enumerate() {
            if t.tok != Tok::Ident("def".into()) {
                continue;
            }
            if let (Some(Tok::Ident(name)), Some(Tok::LParen)) = (tokens.get(i + 1).map(|t| &t.tok), tokens.get(i + 2).map(|t| &t.tok)) {
                let mut arity = 0;
                let mut j = i + 3;
                while let Some(Token { tok: Tok::Ident(_) | Tok::Comma, .. }) = tokens.get(j) {
                    if matches!(tokens[j].tok, Tok::Ident(_)) {
                        arity += 1;
                    }
                    j += 1;
                }
                def_arity.entry(name.clone()).or_insert(arity);
            }
        }
        Ok(Self { tokens, pos: 0, prelude, def_arity, scopes: Vec::new(), owner: "main".into(), lambda_count: 0, depth: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn here(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: impl Into<String>) -> ParseError {
        let t = self.here();
        ParseError::new(t.line, t.col, message)
    }

    fn expect(&mut self, tok: Tok) -> Result<Token, ParseError> {
        if *self.peek() == tok {
            Ok(self.bump())
        } else {
            Err(self.error_here(format!("expected {}, found {}", tok.describe(), self.peek().describe())))
        }
    }

    fn is_keyword(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == word)
    }

    fn ident(&mut self) -> Result<(Name, Token), ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let t = self.bump();
                Ok((s.as_str().into(), t))
            }
            other => Err(self.error_here(format!("expected identifier, found {}", other.describe()))),
        }
    }

    fn program(mut self) -> Result<Program, ParseError> {
        let mut defs: IndexMap<Name, Arc<Def>> = self.prelude.map(|p| p.defs.clone()).unwrap_or_default();
        let mut main = None;
        loop {
            if *self.peek() == Tok::Eof {
                break;
            }
            if self.is_keyword("def") {
                let def = self.def()?;
                defs.insert(def.name.clone(), Arc::new(def));
                continue;
            }
            self.owner = "main".into();
            self.lambda_count = 0;
            let e = self.expr()?;
            if *self.peek() != Tok::Eof {
                return Err(self.error_here(format!("expected end of input after main expression, found {}", self.peek().describe())));
            }
            main = Some(slotted(e, 0));
        }
        if main.is_none() && defs.len() == self.prelude.map_or(0, |p| p.defs.len()) {
            return Err(self.error_here("empty program: expected a definition or an expression"));
        }
        Ok(Program { defs, main })
    }

    fn def(&mut self) -> Result<Def, ParseError> {
        self.bump();
        let (name, tok) = self.ident()?;
        if builtins::lookup(&name).is_some() || &*name == "sense" {
            return Err(ParseError::new(tok.line, tok.col, format!("definition `{name}` shadows a builtin")));
        }
        let already = self.prelude.is_some_and(|p| p.defs.contains_key(&name))
            || self.tokens[..self.pos - 2].windows(2).any(|w| w[0].tok == Tok::Ident("def".into()) && w[1].tok == Tok::Ident(name.to_string()));
        if already {
            return Err(ParseError::new(tok.line, tok.col, format!("duplicate definition `{name}`")));
        }
        let params = self.params()?;
        self.expect(Tok::LBrace)?;
        self.owner = name.clone();
        self.lambda_count = 0;
        self.scopes.push(params.clone());
        let body = self.expr();
        self.scopes.pop();
        let body = body?;
        self.expect(Tok::RBrace)?;
        Ok(Def { name, params, body: slotted(body, 0) })
    }

    fn params(&mut self) -> Result<Vec<Name>, ParseError> {
        self.expect(Tok::LParen)?;
        let mut params: Vec<Name> = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let (p, tok) = self.ident()?;
                if params.contains(&p) {
                    return Err(ParseError::new(tok.line, tok.col, format!("duplicate parameter `{p}`")));
                }
                params.push(p);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        Ok(params)
    }

    fn looks_like_lambda(&self) -> bool {
        if *self.peek() != Tok::LParen {
            return false;
        }
        let mut i = 1;
        if *self.peek_at(i) == Tok::RParen {
            return *self.peek_at(i + 1) == Tok::Arrow;
        }
        loop {
            if !matches!(self.peek_at(i), Tok::Ident(_)) {
                return false;
            }
            i += 1;
            match self.peek_at(i) {
                Tok::Comma => i += 1,
                Tok::RParen => return *self.peek_at(i + 1) == Tok::Arrow,
                _ => return false,
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.error_here("expression nests too deeply"));
        }
        let result = if self.looks_like_lambda() { self.lambda() } else { self.binary(0) };
        self.depth -= 1;
        result
    }

    fn lambda(&mut self) -> Result<Expr, ParseError> {
        let params = self.params()?;
        self.expect(Tok::Arrow)?;
        let tag = Tag(format!("{}#{}", self.owner, self.lambda_count).into());
        self.lambda_count += 1;
        self.scopes.push(params.clone());
        let body = self.expr();
        self.scopes.pop();
        let body = slotted(body?, 0);
        Ok(Expr::new(0, ExprKind::Lambda(Arc::new(Lambda { params, body, tag }))))
    }

    fn binary(&mut self, level: usize) -> Result<Expr, ParseError> {
        const LEVELS: &[&[Tok]] = &[
            &[Tok::OrOr],
            &[Tok::AndAnd],
            &[Tok::EqEq, Tok::NotEq],
            &[Tok::Lt, Tok::Le, Tok::Gt, Tok::Ge],
            // infix `min`, as in `d min nbr{d}`
            &[],
            &[Tok::Plus, Tok::Minus],
            &[Tok::Star, Tok::Slash],
        ];
        const MIN_LEVEL: usize = 4;
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        loop {
            let infix_min = level == MIN_LEVEL && matches!(self.peek(), Tok::Ident(s) if &**s == "min");
            if !infix_min && !LEVELS[level].contains(self.peek()) {
                break;
            }
            // `mux(s, a, -)`: an operator directly before `,` or `)` is a value, not infix.
            if matches!(self.peek_at(1), Tok::Comma | Tok::RParen) {
                break;
            }
            let op = if infix_min {
                self.bump();
                "min"
            } else {
                self.bump().tok.symbol().expect("operator token")
            };
            let rhs = self.binary(level + 1)?;
            lhs = apply(builtin_ref(op), vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        let tok = self.peek().clone();
        if let Some(sym) = binary_symbol(&tok).or(if tok == Tok::Bang { Some("!") } else { None }) {
            if matches!(self.peek_at(1), Tok::Comma | Tok::RParen) {
                self.bump();
                return Ok(builtin_ref(sym));
            }
        }
        match tok {
            Tok::Bang => {
                self.bump();
                let operand = self.unary()?;
                Ok(apply(builtin_ref("!"), vec![operand]))
            }
            Tok::Minus => {
                self.bump();
                match self.peek().clone() {
                    Tok::Num(n) if !matches!(self.peek_at(1), Tok::LParen) => {
                        self.bump();
                        Ok(Expr::new(0, ExprKind::Literal(Literal::Num(-n))))
                    }
                    Tok::Ident(s) if s == "infinity" => {
                        self.bump();
                        Ok(Expr::new(0, ExprKind::Literal(Literal::Num(f64::NEG_INFINITY))))
                    }
                    _ => {
                        let operand = self.unary()?;
                        Ok(apply(builtin_ref("neg"), vec![operand]))
                    }
                }
            }
            _ => self.postfix(),
        }
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let start = self.here().clone();
        let mut e = self.primary()?;
        while *self.peek() == Tok::LParen {
            let call = self.here().clone();
            self.bump();
            let mut args = Vec::new();
            if *self.peek() != Tok::RParen {
                loop {
                    args.push(self.expr()?);
                    if *self.peek() == Tok::Comma {
                        self.bump();
                    } else {
                        break;
                    }
                }
            }
            self.expect(Tok::RParen)?;
            let expected = match &e.kind {
                ExprKind::DefRef(name) => Some((name.clone(), self.def_arity.get(&**name).copied())),
                ExprKind::BuiltinRef(name) => match builtins::lookup(name).map(|b| b.arity) {
                    Some(Arity::Fixed(n)) => Some((name.clone(), Some(n))),
                    _ => None,
                },
                _ => None,
            };
            if let Some((name, Some(n))) = expected {
                if n != args.len() {
                    let (line, col) = if matches!(e.kind, ExprKind::DefRef(_) | ExprKind::BuiltinRef(_)) && start.tok != Tok::LParen {
                        (start.line, start.col)
                    } else {
                        (call.line, call.col)
                    };
                    return Err(ParseError::new(line, col, format!("`{name}` expects {n} argument(s), got {}", args.len())));
                }
            }
            e = apply(e, args);
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let tok = self.here().clone();
        match tok.tok.clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(Expr::new(0, ExprKind::Literal(Literal::Num(n))))
            }
            Tok::LParen => {
                if self.looks_like_lambda() {
                    return self.lambda();
                }
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(word) => match word.as_str() {
                "true" | "false" => {
                    self.bump();
                    Ok(Expr::new(0, ExprKind::Literal(Literal::Bool(word == "true"))))
                }
                "infinity" => {
                    self.bump();
                    Ok(Expr::new(0, ExprKind::Literal(Literal::Num(f64::INFINITY))))
                }
                "rep" => {
                    self.bump();
                    self.expect(Tok::LParen)?;
                    let init = self.expr()?;
                    self.expect(Tok::RParen)?;
                    self.expect(Tok::LBrace)?;
                    let update = self.expr()?;
                    self.expect(Tok::RBrace)?;
                    Ok(Expr::new(0, ExprKind::Rep { init: Box::new(slotted(init, 0)), update: Box::new(slotted(update, 1)) }))
                }
                "nbr" => {
                    self.bump();
                    let close = match self.peek() {
                        Tok::LBrace => Tok::RBrace,
                        Tok::LParen => Tok::RParen,
                        other => return Err(self.error_here(format!("expected `{{` after `nbr`, found {}", other.describe()))),
                    };
                    self.bump();
                    let body = self.expr()?;
                    self.expect(close)?;
                    Ok(Expr::new(0, ExprKind::Nbr(Box::new(slotted(body, 0)))))
                }
                "sense" => {
                    self.bump();
                    let open = self.expect(Tok::LParen).map_err(|_| ParseError::new(tok.line, tok.col, "`sense` must be called with a sensor name"))?;
                    let name = match self.peek().clone() {
                        Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                            self.bump();
                            s
                        }
                        _ => return Err(ParseError::new(open.line, open.col, "`sense` expects a sensor name")),
                    };
                    self.expect(Tok::RParen)?;
                    let arg = Expr::new(0, ExprKind::Literal(Literal::Sensor(name.as_str().into())));
                    Ok(apply(builtin_ref("sense"), vec![arg]))
                }
                "def" => Err(self.error_here("`def` is only allowed at top level")),
                _ => {
                    self.bump();
                    self.resolve(&word, &tok)
                }
            },
            other => Err(self.error_here(format!("expected expression, found {}", other.describe()))),
        }
    }

    fn resolve(&self, word: &str, tok: &Token) -> Result<Expr, ParseError> {
        if self.scopes.iter().rev().any(|s| s.iter().any(|p| &**p == word)) {
            return Ok(Expr::new(0, ExprKind::Var(word.into())));
        }
        if self.def_arity.contains_key(word) {
            return Ok(Expr::new(0, ExprKind::DefRef(word.into())));
        }
        if builtins::lookup(word).is_some() {
            return Ok(builtin_ref(word));
        }
        Err(ParseError::new(tok.line, tok.col, format!("unresolved identifier `{word}`")))
    }
}
