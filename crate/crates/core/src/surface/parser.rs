//! Recursive-descent parser for `.hott` modules.
//!
//! Precedence, loosest first: binders (`fun`, `Sig`, `(x : A) ->`) and
//! `->` (right-assoc), `=` (non-assoc, optional `in T`), `@` (left-assoc
//! concatenation), application, postfix projections.

use crate::diagnostic::{Category, Diagnostic, Location};

use super::lexer::{Tok, Token};

#[derive(Clone, Debug, PartialEq)]
pub struct Binder {
    pub names: Vec<String>,
    pub ty: Expr,
    pub implicit: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    Ident(String),
    Hole,
    Type,
    Lam(Vec<(String, bool)>, Box<Expr>),
    Pi(Vec<Binder>, Box<Expr>),
    Arrow(Box<Expr>, Box<Expr>),
    Sigma(String, Box<Expr>, Box<Expr>),
    Pair(Box<Expr>, Box<Expr>),
    Proj1(Box<Expr>),
    Proj2(Box<Expr>),
    Eq(Box<Expr>, Box<Expr>, Option<Box<Expr>>),
    Concat(Box<Expr>, Box<Expr>),
    App(Box<Expr>, Box<Expr>, bool),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub loc: Location,
}

impl Expr {
    fn new(kind: ExprKind, loc: Location) -> Expr {
        Expr { kind, loc }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeclKind {
    Def,
    Postulate,
    Check,
    Eval,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceDecl {
    pub kind: DeclKind,
    pub name: Option<String>,
    pub binders: Vec<Binder>,
    pub ty: Option<Expr>,
    pub body: Option<Expr>,
    pub loc: Location,
}

pub struct Parser<'t> {
    toks: &'t [Token],
    pos: usize,
    eof: Location,
}

type PResult<T> = Result<T, Diagnostic>;

impl<'t> Parser<'t> {
    pub fn new(toks: &'t [Token], file: &str) -> Parser<'t> {
        let eof = toks
            .last()
            .map(|t| t.loc.clone())
            .unwrap_or_else(|| Location::new(file, 1, 1));
        Parser { toks, pos: 0, eof }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|t| &t.tok)
    }

    fn loc(&self) -> Location {
        self.toks
            .get(self.pos)
            .map(|t| t.loc.clone())
            .unwrap_or_else(|| self.eof.clone())
    }

    fn error(&self, expected: &[&str]) -> Diagnostic {
        let found = match self.peek() {
            Some(t) => t.to_string(),
            None => "end of input".to_string(),
        };
        Diagnostic::new(
            Category::Parse,
            format!("expected one of {{{}}}, found {found}", expected.join(", ")),
        )
        .at(self.loc())
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<()> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(self.error(&[what]))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    pub fn module(&mut self) -> PResult<Vec<SurfaceDecl>> {
        let mut decls = Vec::new();
        while self.peek().is_some() {
            decls.push(self.decl()?);
        }
        Ok(decls)
    }

    fn decl(&mut self) -> PResult<SurfaceDecl> {
        let loc = self.loc();
        let kind = match self.peek() {
            Some(Tok::Keyword("def")) => DeclKind::Def,
            Some(Tok::Keyword("postulate")) => DeclKind::Postulate,
            Some(Tok::Keyword("check")) => DeclKind::Check,
            Some(Tok::Keyword("eval")) => DeclKind::Eval,
            _ => return Err(self.error(&["def", "postulate", "check", "eval"])),
        };
        self.pos += 1;
        let mut d = SurfaceDecl { kind, name: None, binders: vec![], ty: None, body: None, loc };
        match kind {
            DeclKind::Def | DeclKind::Postulate => {
                d.name = Some(self.ident()?);
                while let Some(b) = self.binder_group(false)? {
                    d.binders.push(b);
                }
                self.expect(Tok::Colon, ":")?;
                d.ty = Some(self.term()?);
                if kind == DeclKind::Def {
                    self.expect(Tok::ColonEq, ":=")?;
                    d.body = Some(self.term()?);
                }
            }
            DeclKind::Check => {
                d.body = Some(self.term()?);
                self.expect(Tok::Colon, ":")?;
                d.ty = Some(self.term()?);
            }
            DeclKind::Eval => d.body = Some(self.term()?),
        }
        Ok(d)
    }

    /// `(x y : A)` or `{x : A}`. With `need_arrow_check` the caller has
    /// already verified the lookahead.
    fn binder_group(&mut self, _need_arrow_check: bool) -> PResult<Option<Binder>> {
        if !self.at_binder() {
            return Ok(None);
        }
        let implicit = self.peek() == Some(&Tok::LBrace);
        self.pos += 1;
        let mut names = Vec::new();
        while let Some(Tok::Ident(_)) = self.peek() {
            names.push(self.ident()?);
        }
        self.expect(Tok::Colon, ":")?;
        let ty = self.term()?;
        self.expect(if implicit { Tok::RBrace } else { Tok::RParen }, if implicit { "}" } else { ")" })?;
        Ok(Some(Binder { names, ty, implicit }))
    }

    fn at_binder(&self) -> bool {
        if !matches!(self.peek(), Some(Tok::LParen) | Some(Tok::LBrace)) {
            return false;
        }
        let mut k = 1;
        while let Some(Tok::Ident(_)) = self.peek_at(k) {
            k += 1;
        }
        k > 1 && self.peek_at(k) == Some(&Tok::Colon)
    }

    pub fn term(&mut self) -> PResult<Expr> {
        let loc = self.loc();
        match self.peek() {
            Some(Tok::Keyword("fun")) => {
                self.pos += 1;
                let mut names = Vec::new();
                loop {
                    match self.peek() {
                        Some(Tok::Ident(_)) => names.push((self.ident()?, false)),
                        Some(Tok::Underscore) => {
                            self.pos += 1;
                            names.push(("_".to_string(), false));
                        }
                        Some(Tok::LBrace) => {
                            self.pos += 1;
                            names.push((self.ident()?, true));
                            self.expect(Tok::RBrace, "}")?;
                        }
                        _ => break,
                    }
                }
                if names.is_empty() {
                    return Err(self.error(&["identifier"]));
                }
                self.expect(Tok::FatArrow, "=>")?;
                let body = self.term()?;
                Ok(Expr::new(ExprKind::Lam(names, Box::new(body)), loc))
            }
            Some(Tok::Keyword("Sig")) => {
                self.pos += 1;
                self.expect(Tok::LParen, "(")?;
                let name = self.ident()?;
                self.expect(Tok::Colon, ":")?;
                let fst = self.term()?;
                self.expect(Tok::RParen, ")")?;
                self.expect(Tok::Comma, ",")?;
                let snd = self.term()?;
                Ok(Expr::new(ExprKind::Sigma(name, Box::new(fst), Box::new(snd)), loc))
            }
            _ if self.at_binder() => {
                let mut binders = Vec::new();
                while let Some(b) = self.binder_group(true)? {
                    binders.push(b);
                }
                self.expect(Tok::Arrow, "->")?;
                let cod = self.term()?;
                Ok(Expr::new(ExprKind::Pi(binders, Box::new(cod)), loc))
            }
            _ => {
                let lhs = self.eq_expr()?;
                if self.eat(&Tok::Arrow) {
                    let rhs = self.term()?;
                    Ok(Expr::new(ExprKind::Arrow(Box::new(lhs), Box::new(rhs)), loc))
                } else {
                    Ok(lhs)
                }
            }
        }
    }

    fn eq_expr(&mut self) -> PResult<Expr> {
        let loc = self.loc();
        let lhs = self.concat_expr()?;
        if !self.eat(&Tok::Eq) {
            return Ok(lhs);
        }
        let rhs = self.concat_expr()?;
        let ty = if self.eat(&Tok::Keyword("in")) {
            Some(Box::new(self.concat_expr()?))
        } else {
            None
        };
        if self.peek() == Some(&Tok::Eq) {
            return Err(Diagnostic::new(Category::Parse, "`=` is non-associative; add parentheses")
                .at(self.loc()));
        }
        Ok(Expr::new(ExprKind::Eq(Box::new(lhs), Box::new(rhs), ty), loc))
    }

    fn concat_expr(&mut self) -> PResult<Expr> {
        let loc = self.loc();
        let mut lhs = self.app_expr()?;
        while self.eat(&Tok::At) {
            let rhs = self.app_expr()?;
            lhs = Expr::new(ExprKind::Concat(Box::new(lhs), Box::new(rhs)), loc.clone());
        }
        Ok(lhs)
    }

    fn starts_atom(&self) -> bool {
        matches!(
            self.peek(),
            Some(Tok::Ident(_))
                | Some(Tok::Underscore)
                | Some(Tok::Keyword("Type"))
                | Some(Tok::LParen)
        )
    }

    fn app_expr(&mut self) -> PResult<Expr> {
        let loc = self.loc();
        let mut head = self.postfix()?;
        loop {
            if self.peek() == Some(&Tok::LBrace) && !self.at_binder() {
                self.pos += 1;
                let arg = self.term()?;
                self.expect(Tok::RBrace, "}")?;
                head = Expr::new(ExprKind::App(Box::new(head), Box::new(arg), true), loc.clone());
            } else if self.starts_atom() && !self.at_binder() {
                let arg = self.postfix()?;
                head = Expr::new(ExprKind::App(Box::new(head), Box::new(arg), false), loc.clone());
            } else {
                return Ok(head);
            }
        }
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.atom()?;
        loop {
            let loc = e.loc.clone();
            if self.eat(&Tok::Dot1) {
                e = Expr::new(ExprKind::Proj1(Box::new(e)), loc);
            } else if self.eat(&Tok::Dot2) {
                e = Expr::new(ExprKind::Proj2(Box::new(e)), loc);
            } else {
                return Ok(e);
            }
        }
    }

    fn atom(&mut self) -> PResult<Expr> {
        let loc = self.loc();
        match self.peek() {
            Some(Tok::Ident(_)) => Ok(Expr::new(ExprKind::Ident(self.ident()?), loc)),
            Some(Tok::Underscore) => {
                self.pos += 1;
                Ok(Expr::new(ExprKind::Hole, loc))
            }
            Some(Tok::Keyword("Type")) => {
                self.pos += 1;
                Ok(Expr::new(ExprKind::Type, loc))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let first = self.term()?;
                if self.eat(&Tok::Comma) {
                    let second = self.term()?;
                    self.expect(Tok::RParen, ")")?;
                    Ok(Expr::new(ExprKind::Pair(Box::new(first), Box::new(second)), loc))
                } else {
                    self.expect(Tok::RParen, ")")?;
                    Ok(first)
                }
            }
            _ => Err(self.error(&["identifier", "_", "Type", "("])),
        }
    }
}

pub fn parse_module(file: &str, toks: &[Token]) -> Result<Vec<SurfaceDecl>, Diagnostic> {
    Parser::new(toks, file).module()
}

pub fn parse_expr(file: &str, toks: &[Token]) -> Result<Expr, Diagnostic> {
    let mut p = Parser::new(toks, file);
    let e = p.term()?;
    if p.peek().is_some() {
        return Err(p.error(&["end of input"]));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::lexer::tokenize;

    fn module(s: &str) -> Vec<SurfaceDecl> {
        parse_module("t", &tokenize("t", s).unwrap()).unwrap()
    }

    fn expr(s: &str) -> ExprKind {
        parse_expr("t", &tokenize("t", s).unwrap()).unwrap().kind
    }

    #[test]
    fn def_with_binder() {
        let d = module("def idS1 (x : S1) : S1 := x");
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, DeclKind::Def);
        assert_eq!(d[0].binders.len(), 1);
        assert_eq!(d[0].binders[0].names, vec!["x".to_string()]);
    }

    #[test]
    fn postulate_shape() {
        let d = module("postulate funext : {A : Type} -> Type");
        assert_eq!(d[0].kind, DeclKind::Postulate);
        assert!(d[0].body.is_none());
    }

    #[test]
    fn def_arrow_type_no_binders() {
        let d = module("def f : S1 -> T2 := S1-rec T2 Tb Tp");
        assert!(d[0].binders.is_empty());
        assert!(matches!(d[0].ty.as_ref().unwrap().kind, ExprKind::Arrow(..)));
        match &d[0].body.as_ref().unwrap().kind {
            ExprKind::App(f, _, false) => match &f.kind {
                ExprKind::App(..) => {}
                k => panic!("not left-assoc: {k:?}"),
            },
            k => panic!("{k:?}"),
        }
    }

    #[test]
    fn arrow_right_assoc() {
        match expr("A -> B -> C") {
            ExprKind::Arrow(_, r) => assert!(matches!(r.kind, ExprKind::Arrow(..))),
            k => panic!("{k:?}"),
        }
    }

    #[test]
    fn concat_left_assoc() {
        match expr("p @ q @ r") {
            ExprKind::Concat(l, _) => assert!(matches!(l.kind, ExprKind::Concat(..))),
            k => panic!("{k:?}"),
        }
    }

    #[test]
    fn eq_non_assoc() {
        assert!(matches!(expr("a = b in A"), ExprKind::Eq(_, _, Some(_))));
        assert!(parse_expr("t", &tokenize("t", "a = b = c").unwrap()).is_err());
    }

    #[test]
    fn pairs_and_projections() {
        assert!(matches!(expr("(a, b).1"), ExprKind::Proj1(_)));
        assert!(matches!(expr("Sig (x : A), B"), ExprKind::Sigma(..)));
    }

    #[test]
    fn implicit_application() {
        assert!(matches!(expr("f {A} x"), ExprKind::App(_, _, false)));
        match expr("f {A}") {
            ExprKind::App(_, _, true) => {}
            k => panic!("{k:?}"),
        }
    }

    #[test]
    fn parse_error_lists_expected() {
        let e = parse_module("t", &tokenize("t", "def x S1").unwrap()).unwrap_err();
        assert_eq!(e.category, Category::Parse);
        assert!(e.message.contains(":"), "{}", e.message);
    }
}
