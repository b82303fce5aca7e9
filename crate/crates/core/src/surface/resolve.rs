//! Scope resolution: surface names become de Bruijn indices, keywords
//! become core formers, and `_` becomes a numbered hole.

use std::rc::Rc;

use crate::diagnostic::{Category, Diagnostic, Location};
use crate::term::{Const, Prim, RcTerm, Term};

use super::parser::{Binder, DeclKind, Expr, ExprKind, SurfaceDecl};

/// A declaration whose expressions are core terms (possibly with holes).
#[derive(Clone, Debug)]
pub struct ResolvedDecl {
    pub kind: DeclKind,
    pub name: Option<String>,
    pub ty: Option<RcTerm>,
    pub body: Option<RcTerm>,
    pub loc: Location,
    /// Source location of every hole, indexed by hole id.
    pub holes: Vec<Location>,
}

pub fn is_keyword(s: &str) -> bool {
    s == "Id" || Prim::from_keyword(s).is_some() || Const::from_keyword(s).is_some()
}

pub struct Resolver<'g> {
    is_global: &'g dyn Fn(&str) -> bool,
    locals: Vec<String>,
    holes: Vec<Location>,
}

impl<'g> Resolver<'g> {
    pub fn new(is_global: &'g dyn Fn(&str) -> bool) -> Resolver<'g> {
        Resolver { is_global, locals: Vec::new(), holes: Vec::new() }
    }

    pub fn into_holes(self) -> Vec<Location> {
        self.holes
    }

    fn bind(&mut self, name: &str, loc: &Location) -> Result<(), Diagnostic> {
        if is_keyword(name) {
            return Err(Diagnostic::new(
                Category::Scope,
                format!("cannot bind reserved name {name}"),
            )
            .at(loc.clone()));
        }
        self.locals.push(name.to_string());
        Ok(())
    }

    fn unbind(&mut self, n: usize) {
        let len = self.locals.len();
        self.locals.truncate(len - n);
    }

    fn lookup(&self, name: &str) -> Option<usize> {
        self.locals.iter().rev().position(|n| n == name)
    }

    fn hole(&mut self, loc: &Location) -> RcTerm {
        self.holes.push(loc.clone());
        Rc::new(Term::Hole(self.holes.len() as u32 - 1))
    }

    /// `binders -> body`, where `body` is resolved under the binders.
    pub fn pi(
        &mut self,
        binders: &[Binder],
        body: impl FnOnce(&mut Self) -> Result<RcTerm, Diagnostic>,
    ) -> Result<RcTerm, Diagnostic> {
        let mut doms = Vec::new();
        let mut bound = 0;
        for b in binders {
            for n in &b.names {
                let ty = self.expr(&b.ty)?;
                doms.push((n.clone(), b.implicit, ty));
                self.bind(n, &b.ty.loc)?;
                bound += 1;
            }
        }
        let mut out = body(self)?;
        self.unbind(bound);
        for (name, implicit, dom) in doms.into_iter().rev() {
            out = Rc::new(Term::Pi { name: name.into(), implicit, dom, cod: out });
        }
        Ok(out)
    }

    pub fn expr(&mut self, e: &Expr) -> Result<RcTerm, Diagnostic> {
        Ok(match &e.kind {
            ExprKind::Ident(_) | ExprKind::App(..) => return self.spine(e),
            ExprKind::Hole => self.hole(&e.loc),
            ExprKind::Type => Rc::new(Term::Universe),
            ExprKind::Lam(names, body) => {
                for (n, _) in names {
                    self.bind(n, &e.loc)?;
                }
                let mut out = self.expr(body)?;
                self.unbind(names.len());
                for (n, implicit) in names.iter().rev() {
                    out = Rc::new(Term::Lam { name: n.as_str().into(), implicit: *implicit, body: out });
                }
                out
            }
            ExprKind::Pi(binders, cod) => self.pi(binders, |r| r.expr(cod))?,
            ExprKind::Arrow(dom, cod) => {
                let dom = self.expr(dom)?;
                self.locals.push("_".into());
                let cod = self.expr(cod);
                self.unbind(1);
                Rc::new(Term::Pi { name: "_".into(), implicit: false, dom, cod: cod? })
            }
            ExprKind::Sigma(name, fst, snd) => {
                let fst = self.expr(fst)?;
                self.bind(name, &e.loc)?;
                let snd = self.expr(snd);
                self.unbind(1);
                Rc::new(Term::Sigma { name: name.as_str().into(), fst, snd: snd? })
            }
            ExprKind::Pair(a, b) => Rc::new(Term::Pair(self.expr(a)?, self.expr(b)?)),
            ExprKind::Proj1(a) => Rc::new(Term::Proj1(self.expr(a)?)),
            ExprKind::Proj2(a) => Rc::new(Term::Proj2(self.expr(a)?)),
            ExprKind::Eq(a, b, ty) => {
                let lhs = self.expr(a)?;
                let rhs = self.expr(b)?;
                let ty = match ty {
                    Some(t) => self.expr(t)?,
                    None => self.hole(&e.loc),
                };
                Rc::new(Term::Id { ty, lhs, rhs })
            }
            ExprKind::Concat(a, b) => Term::prim(Prim::Concat, vec![self.expr(a)?, self.expr(b)?]),
        })
    }

    fn spine(&mut self, e: &Expr) -> Result<RcTerm, Diagnostic> {
        let mut args = Vec::new();
        let mut head = e;
        while let ExprKind::App(f, a, implicit) = &head.kind {
            args.push((&**a, *implicit));
            head = f;
        }
        args.reverse();

        let name = match &head.kind {
            ExprKind::Ident(n) => Some(n.as_str()),
            _ => None,
        };
        let former = match name {
            Some(n) if self.lookup(n).is_none() => {
                if n == "Id" {
                    Some(None)
                } else {
                    Prim::from_keyword(n).map(Some)
                }
            }
            _ => None,
        };
        let Some(former) = former else {
            let mut out = match name {
                Some(n) => self.ident(n, &head.loc)?,
                None => self.expr(head)?,
            };
            for (a, implicit) in args {
                out = Rc::new(Term::App { fun: out, arg: self.expr(a)?, implicit });
            }
            return Ok(out);
        };

        let arity = match former {
            Some(p) => p.arity(),
            None => 3,
        };
        let mut explicit = Vec::new();
        for (a, implicit) in args.iter().take(arity) {
            if *implicit {
                return Err(Diagnostic::new(
                    Category::Scope,
                    format!("{} takes no implicit arguments", name.unwrap_or("?")),
                )
                .at(a.loc.clone()));
            }
            explicit.push(self.expr(a)?);
        }
        let missing = arity - explicit.len();
        let mut full: Vec<RcTerm> = explicit.iter().map(|t| Term::weaken(t, missing)).collect();
        for k in (0..missing).rev() {
            full.push(Term::var(k));
        }
        let mut out = match former {
            Some(p) => Term::prim(p, full),
            None => Rc::new(Term::Id {
                ty: full[0].clone(),
                lhs: full[1].clone(),
                rhs: full[2].clone(),
            }),
        };
        for k in (0..missing).rev() {
            out = Rc::new(Term::Lam { name: eta_name(k).into(), implicit: false, body: out });
        }
        for (a, implicit) in args.iter().skip(arity) {
            out = Rc::new(Term::App { fun: out, arg: self.expr(a)?, implicit: *implicit });
        }
        Ok(out)
    }

    fn ident(&mut self, n: &str, loc: &Location) -> Result<RcTerm, Diagnostic> {
        if let Some(i) = self.lookup(n) {
            return Ok(Term::var(i));
        }
        if let Some(c) = Const::from_keyword(n) {
            return Ok(Term::constant(c));
        }
        if (self.is_global)(n) {
            return Ok(Rc::new(Term::Global(n.into())));
        }
        Err(Diagnostic::new(Category::Scope, format!("unbound identifier {n}")).at(loc.clone()))
    }
}

fn eta_name(k: usize) -> &'static str {
    ["x", "y", "z", "w", "v", "u"].get(k).copied().unwrap_or("a")
}

pub fn resolve_decl(
    d: &SurfaceDecl,
    is_global: &dyn Fn(&str) -> bool,
) -> Result<ResolvedDecl, Diagnostic> {
    let mut r = Resolver::new(is_global);
    let (ty, body) = match d.kind {
        DeclKind::Def | DeclKind::Postulate => {
            let name = d.name.as_deref().unwrap_or_default();
            if is_keyword(name) {
                return Err(Diagnostic::new(Category::Scope, format!("cannot redefine reserved name {name}"))
                    .at(d.loc.clone()));
            }
            let ty = r.pi(&d.binders, |r| r.expr(d.ty.as_ref().expect("typed decl")))?;
            let body = match &d.body {
                Some(b) => {
                    let mut n = 0;
                    for bg in &d.binders {
                        for name in &bg.names {
                            r.bind(name, &bg.ty.loc)?;
                            n += 1;
                        }
                    }
                    let mut out = r.expr(b)?;
                    r.unbind(n);
                    for bg in d.binders.iter().rev() {
                        for name in bg.names.iter().rev() {
                            out = Rc::new(Term::Lam {
                                name: name.as_str().into(),
                                implicit: bg.implicit,
                                body: out,
                            });
                        }
                    }
                    Some(out)
                }
                None => None,
            };
            (Some(ty), body)
        }
        DeclKind::Check => (
            Some(r.expr(d.ty.as_ref().expect("check has type"))?),
            Some(r.expr(d.body.as_ref().expect("check has body"))?),
        ),
        DeclKind::Eval => (None, Some(r.expr(d.body.as_ref().expect("eval has body"))?)),
    };
    Ok(ResolvedDecl {
        kind: d.kind,
        name: d.name.clone(),
        ty,
        body,
        loc: d.loc.clone(),
        holes: r.into_holes(),
    })
}

/// Resolves a standalone expression (CLI `eval -e`).
pub fn resolve_expr(
    e: &Expr,
    is_global: &dyn Fn(&str) -> bool,
) -> Result<(RcTerm, Vec<Location>), Diagnostic> {
    let mut r = Resolver::new(is_global);
    let t = r.expr(e)?;
    Ok((t, r.into_holes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{lexer::tokenize, parser::parse_expr};

    fn resolve(s: &str) -> Result<RcTerm, Diagnostic> {
        let e = parse_expr("t", &tokenize("t", s).unwrap()).unwrap();
        let globals = |n: &str| n == "f";
        resolve_expr(&e, &globals).map(|(t, _)| t)
    }

    #[test]
    fn identity_lambda() {
        assert_eq!(resolve("fun x => x").unwrap(), Term::lam("x", Term::var(0)));
    }

    #[test]
    fn constant_in_lambda() {
        assert_eq!(
            resolve("fun x => loop").unwrap(),
            Term::lam("x", Term::constant(Const::Loop))
        );
    }

    #[test]
    fn unbound_identifier() {
        let e = resolve("foo").unwrap_err();
        assert_eq!(e.category, Category::Scope);
        assert_eq!(e.message, "unbound identifier foo");
        assert_eq!(e.location, Some(Location::new("t", 1, 1)));
    }

    #[test]
    fn partial_primitive_is_eta_expanded() {
        let t = resolve("S1-rec T2 Tb Tp").unwrap();
        let expect = Term::lam(
            "x",
            Term::prim(
                Prim::CircleRec,
                vec![
                    Term::constant(Const::Torus),
                    Term::constant(Const::TB),
                    Term::constant(Const::TP),
                    Term::var(0),
                ],
            ),
        );
        assert_eq!(t, expect);
    }

    #[test]
    fn partial_id_with_free_variable() {
        // fun y => Id S1 y  ~>  fun y => fun x => Id S1 y x
        let t = resolve("fun y => Id S1 y").unwrap();
        let expect = Term::lam(
            "y",
            Term::lam(
                "x",
                Rc::new(Term::Id {
                    ty: Term::constant(Const::Circle),
                    lhs: Term::var(1),
                    rhs: Term::var(0),
                }),
            ),
        );
        assert_eq!(t, expect);
    }

    #[test]
    fn eq_sugar_leaves_type_hole() {
        let t = resolve("base = base").unwrap();
        assert!(matches!(&*t, Term::Id { ty, .. } if matches!(**ty, Term::Hole(0))));
    }

    #[test]
    fn locals_shadow_globals() {
        assert_eq!(resolve("fun f => f").unwrap(), Term::lam("f", Term::var(0)));
        assert_eq!(*resolve("f").unwrap(), Term::Global("f".into()));
    }

    #[test]
    fn reserved_names_cannot_be_bound() {
        assert_eq!(resolve("fun base => base").unwrap_err().category, Category::Scope);
    }
}
