//! Pretty printer for core terms. Output re-parses to an alpha-equal term
//! when the term is closed under the supplied names.

use std::collections::HashSet;

use crate::surface::is_keyword;
use crate::surface::lexer::RESERVED;
use crate::term::{Name, Prim, Term};

// Precedence levels, loosest first.
const BINDER: u8 = 0;
const EQ: u8 = 1;
const CONCAT: u8 = 2;
const APP: u8 = 3;
const ATOM: u8 = 4;

struct Printer {
    /// Names of bound variables, outermost first.
    scope: Vec<String>,
    avoid: HashSet<String>,
    out: String,
}

/// Prints `t` with free de Bruijn indices named by `names` (outermost
/// first).
pub fn print_term(t: &Term, names: &[Name]) -> String {
    let mut avoid: HashSet<String> = t.globals().iter().map(|g| g.to_string()).collect();
    avoid.extend(names.iter().map(|n| n.to_string()));
    let mut p = Printer { scope: names.iter().map(|n| n.to_string()).collect(), avoid, out: String::new() };
    p.term(t, BINDER);
    p.out
}

fn valid_hint(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic())
        && s.chars().all(|c| c.is_alphanumeric() || "-'*_".contains(c))
        && !s.ends_with('-')
}

impl Printer {
    fn fresh(&self, hint: &str) -> String {
        let base = if valid_hint(hint) { hint } else { "x" };
        let taken = |s: &str| {
            self.scope.iter().any(|n| n == s) || self.avoid.contains(s) || is_keyword(s) || RESERVED.contains(&s)
        };
        if !taken(base) {
            return base.to_string();
        }
        (1..).map(|k| format!("{base}{k}")).find(|s| !taken(s)).expect("infinite supply")
    }

    fn push(&mut self, s: &str) {
        self.out.push_str(s);
    }

    fn paren(&mut self, cond: bool, f: impl FnOnce(&mut Self)) {
        if cond {
            self.push("(");
        }
        f(self);
        if cond {
            self.push(")");
        }
    }

    fn under<T>(&mut self, name: String, f: impl FnOnce(&mut Self) -> T) -> T {
        self.scope.push(name);
        let r = f(self);
        self.scope.pop();
        r
    }

    fn term(&mut self, t: &Term, prec: u8) {
        match t {
            Term::Var(i) => {
                let d = self.scope.len();
                if *i < d {
                    let n = self.scope[d - 1 - i].clone();
                    self.push(&n);
                } else {
                    self.push(&format!("#{}", i - d));
                }
            }
            Term::Universe => self.push("Type"),
            Term::Const(c) => self.push(c.keyword()),
            Term::Global(n) => self.push(n),
            Term::Hole(_) => self.push("_"),
            Term::Meta(m) => self.push(&format!("?{}", m.0)),
            Term::Pi { .. } => self.paren(prec > BINDER, |p| p.pi(t)),
            Term::Sigma { name, fst, snd } => self.paren(prec > BINDER, |p| {
                let x = p.fresh(name);
                p.push(&format!("Sig ({x} : "));
                p.term(fst, BINDER);
                p.push("), ");
                p.under(x, |p| p.term(snd, BINDER));
            }),
            Term::Lam { .. } => self.paren(prec > BINDER, |p| p.lam(t)),
            Term::Pair(a, b) => {
                self.push("(");
                self.term(a, BINDER);
                self.push(", ");
                self.term(b, BINDER);
                self.push(")");
            }
            Term::Proj1(a) | Term::Proj2(a) => {
                self.term(a, ATOM);
                self.push(if matches!(t, Term::Proj1(_)) { ".1" } else { ".2" });
            }
            Term::Prim(Prim::Concat, args) => self.paren(prec > CONCAT, |p| {
                p.term(&args[0], CONCAT);
                p.push(" @ ");
                p.term(&args[1], APP);
            }),
            Term::Prim(prim, args) => self.paren(prec > APP, |p| {
                p.push(prim.keyword());
                for a in args.iter() {
                    p.push(" ");
                    p.term(a, ATOM);
                }
            }),
            Term::Id { ty, lhs, rhs } => self.paren(prec > APP, |p| {
                p.push("Id ");
                p.term(ty, ATOM);
                p.push(" ");
                p.term(lhs, ATOM);
                p.push(" ");
                p.term(rhs, ATOM);
            }),
            Term::App { .. } => self.paren(prec > APP, |p| p.app(t)),
        }
    }

    fn app(&mut self, t: &Term) {
        let mut args = Vec::new();
        let mut head = t;
        while let Term::App { fun, arg, implicit } = head {
            args.push((arg, *implicit));
            head = fun;
        }
        // A prim or `Id` head already absorbs arguments, so only
        // applications of other heads can be flattened.
        self.term(head, if matches!(head, Term::Prim(..) | Term::Id { .. }) { APP } else { ATOM });
        for (a, implicit) in args.into_iter().rev() {
            if implicit {
                self.push(" {");
                self.term(a, BINDER);
                self.push("}");
            } else {
                self.push(" ");
                self.term(a, ATOM);
            }
        }
    }

    fn lam(&mut self, t: &Term) {
        self.push("fun");
        let mut cur = t;
        let mut bound = 0;
        while let Term::Lam { name, implicit, body } = cur {
            let x = self.fresh(name);
            if *implicit {
                self.push(&format!(" {{{x}}}"));
            } else {
                self.push(&format!(" {x}"));
            }
            self.scope.push(x);
            bound += 1;
            cur = body;
        }
        self.push(" => ");
        self.term(cur, BINDER);
        for _ in 0..bound {
            self.scope.pop();
        }
    }

    fn pi(&mut self, t: &Term) {
        let mut cur = t;
        let mut bound = 0;
        let mut binders = 0;
        while let Term::Pi { name, implicit, dom, cod } = cur {
            if !implicit && !cod.has_free(0) {
                if binders > 0 {
                    self.push(" -> ");
                    binders = 0;
                }
                self.term(dom, EQ);
                self.push(" -> ");
                self.scope.push("_".into());
            } else {
                let x = self.fresh(name);
                if binders > 0 {
                    self.push(" ");
                }
                let (l, r) = if *implicit { ("{", "}") } else { ("(", ")") };
                self.push(&format!("{l}{x} : "));
                self.term(dom, BINDER);
                self.push(r);
                self.scope.push(x);
                binders += 1;
            }
            bound += 1;
            cur = cod;
        }
        if binders > 0 {
            self.push(" -> ");
        }
        self.term(cur, BINDER);
        for _ in 0..bound {
            self.scope.pop();
        }
    }
}
