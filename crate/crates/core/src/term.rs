//! Core syntax. Binders are de Bruijn indices; names survive only as
//! printing hints and are ignored by equality.

use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

pub type Name = Rc<str>;
pub type RcTerm = Rc<Term>;

/// Identifier of an elaboration metavariable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MetaId(pub u32);

/// Nullary constructors of the two higher inductive types.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Const {
    Circle,
    Base,
    Loop,
    Torus,
    TB,
    TP,
    TQ,
    TT,
}

impl Const {
    pub const ALL: [Const; 8] = [
        Const::Circle,
        Const::Base,
        Const::Loop,
        Const::Torus,
        Const::TB,
        Const::TP,
        Const::TQ,
        Const::TT,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            Const::Circle => "S1",
            Const::Base => "base",
            Const::Loop => "loop",
            Const::Torus => "T2",
            Const::TB => "Tb",
            Const::TP => "Tp",
            Const::TQ => "Tq",
            Const::TT => "Tt",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Const> {
        Const::ALL.iter().copied().find(|c| c.keyword() == s)
    }
}

/// Primitive term formers with a fixed number of explicit arguments.
///
/// Index arguments (the type and endpoints of a path) are never stored;
/// the kernel recovers them from the signature in [`crate::prims`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Prim {
    Refl,
    J,
    Concat,
    Inv,
    Transport,
    Ap,
    Apd,
    ApConcat,
    CtCong,
    TransportConcat,
    CircleRec,
    CircleRecBeta,
    CircleInd,
    CircleIndBeta,
    TorusRec,
    TorusRecBetaP,
    TorusRecBetaQ,
    TorusRecBetaT,
    TorusInd,
    TorusIndBetaP,
    TorusIndBetaQ,
}

impl Prim {
    pub const ALL: [Prim; 21] = [
        Prim::Refl,
        Prim::J,
        Prim::Concat,
        Prim::Inv,
        Prim::Transport,
        Prim::Ap,
        Prim::Apd,
        Prim::ApConcat,
        Prim::CtCong,
        Prim::TransportConcat,
        Prim::CircleRec,
        Prim::CircleRecBeta,
        Prim::CircleInd,
        Prim::CircleIndBeta,
        Prim::TorusRec,
        Prim::TorusRecBetaP,
        Prim::TorusRecBetaQ,
        Prim::TorusRecBetaT,
        Prim::TorusInd,
        Prim::TorusIndBetaP,
        Prim::TorusIndBetaQ,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            Prim::Refl => "refl",
            Prim::J => "J",
            Prim::Concat => "concat",
            Prim::Inv => "inv",
            Prim::Transport => "transport",
            Prim::Ap => "ap",
            Prim::Apd => "apd",
            Prim::ApConcat => "ap-concat",
            Prim::CtCong => "ct-cong",
            Prim::TransportConcat => "transport-concat",
            Prim::CircleRec => "S1-rec",
            Prim::CircleRecBeta => "S1-rec-beta",
            Prim::CircleInd => "S1-ind",
            Prim::CircleIndBeta => "S1-ind-beta",
            Prim::TorusRec => "T2-rec",
            Prim::TorusRecBetaP => "T2-rec-beta-p",
            Prim::TorusRecBetaQ => "T2-rec-beta-q",
            Prim::TorusRecBetaT => "T2-rec-beta-t",
            Prim::TorusInd => "T2-ind",
            Prim::TorusIndBetaP => "T2-ind-beta-p",
            Prim::TorusIndBetaQ => "T2-ind-beta-q",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Prim> {
        Prim::ALL.iter().copied().find(|p| p.keyword() == s)
    }

    /// Number of explicit arguments stored in a `Term::Prim` node.
    pub fn arity(self) -> usize {
        match self {
            Prim::Refl | Prim::Inv => 1,
            Prim::Concat | Prim::Ap | Prim::Apd | Prim::CtCong => 2,
            Prim::Transport | Prim::ApConcat => 3,
            Prim::TransportConcat => 4,
            Prim::J => 5,
            Prim::CircleRecBeta | Prim::CircleIndBeta => 3,
            Prim::CircleRec | Prim::CircleInd => 4,
            Prim::TorusRecBetaP
            | Prim::TorusRecBetaQ
            | Prim::TorusRecBetaT
            | Prim::TorusIndBetaP
            | Prim::TorusIndBetaQ => 5,
            Prim::TorusRec | Prim::TorusInd => 6,
        }
    }
}

#[derive(Clone, Debug)]
pub enum Term {
    Var(usize),
    Universe,
    Pi {
        name: Name,
        implicit: bool,
        dom: RcTerm,
        cod: RcTerm,
    },
    Lam {
        name: Name,
        implicit: bool,
        body: RcTerm,
    },
    App {
        fun: RcTerm,
        arg: RcTerm,
        implicit: bool,
    },
    Sigma {
        name: Name,
        fst: RcTerm,
        snd: RcTerm,
    },
    Pair(RcTerm, RcTerm),
    Proj1(RcTerm),
    Proj2(RcTerm),
    Id {
        ty: RcTerm,
        lhs: RcTerm,
        rhs: RcTerm,
    },
    Const(Const),
    Prim(Prim, Rc<[RcTerm]>),
    Global(Name),
    /// Surface-only placeholder; never present after elaboration.
    Hole(u32),
    /// Elaboration-time metavariable; removed by zonking.
    Meta(MetaId),
}

/// Alpha-equivalence: name hints are not compared.
impl PartialEq for Term {
    fn eq(&self, other: &Term) -> bool {
        use Term::*;
        match (self, other) {
            (Var(a), Var(b)) => a == b,
            (Universe, Universe) => true,
            (
                Pi { implicit: i1, dom: d1, cod: c1, .. },
                Pi { implicit: i2, dom: d2, cod: c2, .. },
            ) => i1 == i2 && d1 == d2 && c1 == c2,
            (Lam { implicit: i1, body: b1, .. }, Lam { implicit: i2, body: b2, .. }) => {
                i1 == i2 && b1 == b2
            }
            (
                App { fun: f1, arg: a1, implicit: i1 },
                App { fun: f2, arg: a2, implicit: i2 },
            ) => i1 == i2 && f1 == f2 && a1 == a2,
            (Sigma { fst: a1, snd: b1, .. }, Sigma { fst: a2, snd: b2, .. }) => {
                a1 == a2 && b1 == b2
            }
            (Pair(a1, b1), Pair(a2, b2)) => a1 == a2 && b1 == b2,
            (Proj1(a), Proj1(b)) | (Proj2(a), Proj2(b)) => a == b,
            (
                Id { ty: t1, lhs: l1, rhs: r1 },
                Id { ty: t2, lhs: l2, rhs: r2 },
            ) => t1 == t2 && l1 == l2 && r1 == r2,
            (Const(a), Const(b)) => a == b,
            (Prim(p1, a1), Prim(p2, a2)) => p1 == p2 && a1 == a2,
            (Global(a), Global(b)) => a == b,
            (Hole(a), Hole(b)) => a == b,
            (Meta(a), Meta(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Term {}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("shift produced a negative de Bruijn index ({index} by {by})")]
pub struct ShiftError {
    pub index: usize,
    pub by: isize,
}

impl Term {
    pub fn var(i: usize) -> RcTerm {
        Rc::new(Term::Var(i))
    }

    pub fn prim(p: Prim, args: Vec<RcTerm>) -> RcTerm {
        debug_assert_eq!(args.len(), p.arity());
        Rc::new(Term::Prim(p, args.into()))
    }

    pub fn lam(name: &str, body: RcTerm) -> RcTerm {
        Rc::new(Term::Lam { name: name.into(), implicit: false, body })
    }

    pub fn app(fun: RcTerm, arg: RcTerm) -> RcTerm {
        Rc::new(Term::App { fun, arg, implicit: false })
    }

    pub fn constant(c: Const) -> RcTerm {
        Rc::new(Term::Const(c))
    }

    /// Rebuilds a node from its immediate children, keeping the node's own
    /// data. `map` receives each child together with the number of binders
    /// the child sits under relative to `self`.
    fn map_children<E>(
        &self,
        map: &mut impl FnMut(&RcTerm, usize) -> Result<RcTerm, E>,
    ) -> Result<Term, E> {
        use Term::*;
        Ok(match self {
            Var(_) | Universe | Const(_) | Global(_) | Hole(_) | Meta(_) => self.clone(),
            Pi { name, implicit, dom, cod } => Pi {
                name: name.clone(),
                implicit: *implicit,
                dom: map(dom, 0)?,
                cod: map(cod, 1)?,
            },
            Lam { name, implicit, body } => Lam {
                name: name.clone(),
                implicit: *implicit,
                body: map(body, 1)?,
            },
            App { fun, arg, implicit } => App {
                fun: map(fun, 0)?,
                arg: map(arg, 0)?,
                implicit: *implicit,
            },
            Sigma { name, fst, snd } => Sigma {
                name: name.clone(),
                fst: map(fst, 0)?,
                snd: map(snd, 1)?,
            },
            Pair(a, b) => Pair(map(a, 0)?, map(b, 0)?),
            Proj1(a) => Proj1(map(a, 0)?),
            Proj2(a) => Proj2(map(a, 0)?),
            Id { ty, lhs, rhs } => Id {
                ty: map(ty, 0)?,
                lhs: map(lhs, 0)?,
                rhs: map(rhs, 0)?,
            },
            Prim(p, args) => Prim(
                *p,
                args.iter()
                    .map(|a| map(a, 0))
                    .collect::<Result<Vec<_>, E>>()?
                    .into(),
            ),
        })
    }

    fn shift_at(t: &RcTerm, by: isize, cutoff: usize) -> Result<RcTerm, ShiftError> {
        match &**t {
            Term::Var(i) if *i >= cutoff => {
                let shifted = *i as isize + by;
                if shifted < 0 {
                    return Err(ShiftError { index: *i, by });
                }
                Ok(Rc::new(Term::Var(shifted as usize)))
            }
            Term::Var(_) | Term::Universe | Term::Const(_) | Term::Global(_) => Ok(t.clone()),
            other => Ok(Rc::new(
                other.map_children(&mut |c, k| Term::shift_at(c, by, cutoff + k))?,
            )),
        }
    }

    /// Displaces every free variable with index `>= cutoff` by `by`.
    pub fn shift(t: &RcTerm, by: isize, cutoff: usize) -> Result<RcTerm, ShiftError> {
        if by == 0 {
            return Ok(t.clone());
        }
        Term::shift_at(t, by, cutoff)
    }

    /// Shift by a non-negative amount, which can never fail.
    pub fn weaken(t: &RcTerm, by: usize) -> RcTerm {
        Term::shift(t, by as isize, 0).expect("weakening is total")
    }

    fn subst_at(t: &RcTerm, with: &RcTerm, index: usize, depth: usize) -> RcTerm {
        match &**t {
            Term::Var(i) if *i == index + depth => Term::weaken(with, depth),
            Term::Var(i) if *i > index + depth => Rc::new(Term::Var(i - 1)),
            Term::Var(_) | Term::Universe | Term::Const(_) | Term::Global(_) => t.clone(),
            other => {
                let out: Result<Term, std::convert::Infallible> = other
                    .map_children(&mut |c, k| Ok(Term::subst_at(c, with, index, depth + k)));
                match out {
                    Ok(t) => Rc::new(t),
                    Err(never) => match never {},
                }
            }
        }
    }

    /// Replaces `Var(index)` with `with` and closes the gap left behind.
    pub fn subst(t: &RcTerm, with: &RcTerm, index: usize) -> RcTerm {
        Term::subst_at(t, with, index, 0)
    }

    /// True if `Var(index)` (relative to this term) occurs free.
    pub fn has_free(&self, index: usize) -> bool {
        let mut found = false;
        self.visit_free(index, &mut found);
        found
    }

    fn visit_free(&self, index: usize, found: &mut bool) {
        if *found {
            return;
        }
        if let Term::Var(i) = self {
            if *i == index {
                *found = true;
            }
            return;
        }
        let _ = self.map_children(&mut |c, k| -> Result<RcTerm, ()> {
            c.visit_free(index + k, found);
            Ok(c.clone())
        });
    }

    /// Largest free index + 1, i.e. the minimal context depth for scoping.
    pub fn scope_depth(&self) -> usize {
        fn go(t: &Term, binders: usize, max: &mut usize) {
            if let Term::Var(i) = t {
                if *i >= binders {
                    *max = (*max).max(i - binders + 1);
                }
                return;
            }
            let _ = t.map_children(&mut |c, k| -> Result<RcTerm, ()> {
                go(c, binders + k, max);
                Ok(c.clone())
            });
        }
        let mut max = 0;
        go(self, 0, &mut max);
        max
    }

    /// Calls `f` on every subterm in pre-order.
    pub fn for_each(&self, f: &mut impl FnMut(&Term)) {
        f(self);
        let _ = self.map_children(&mut |c, _| -> Result<RcTerm, ()> {
            c.for_each(f);
            Ok(c.clone())
        });
    }

    pub fn contains_holes(&self) -> bool {
        let mut found = false;
        self.for_each(&mut |t| {
            if matches!(t, Term::Hole(_) | Term::Meta(_)) {
                found = true;
            }
        });
        found
    }

    /// Names of every `Global` referenced, in first-occurrence order.
    pub fn globals(&self) -> Vec<Name> {
        let mut out: Vec<Name> = Vec::new();
        self.for_each(&mut |t| {
            if let Term::Global(n) = t {
                if !out.contains(n) {
                    out.push(n.clone());
                }
            }
        });
        out
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        let mut n = 0;
        self.for_each(&mut |_| n += 1);
        n
    }

    /// Rewrites holes/metas bottom-up via `f`, which receives the number of
    /// binders crossed so far.
    pub fn replace_metas(
        t: &RcTerm,
        depth: usize,
        f: &mut impl FnMut(&Term, usize) -> Option<RcTerm>,
    ) -> RcTerm {
        if let Some(r) = f(t, depth) {
            return r;
        }
        match &**t {
            Term::Var(_) | Term::Universe | Term::Const(_) | Term::Global(_) => t.clone(),
            other => {
                let out: Result<Term, std::convert::Infallible> = other
                    .map_children(&mut |c, k| Ok(Term::replace_metas(c, depth + k, f)));
                match out {
                    Ok(t) => Rc::new(t),
                    Err(never) => match never {},
                }
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::print::print_term(self, &[]))
    }
}

#[derive(PartialEq, Eq, Hash)]
enum ShareKey {
    Var(usize),
    Universe,
    Pi(Name, bool, usize, usize),
    Lam(Name, bool, usize),
    App(usize, usize, bool),
    Sigma(Name, usize, usize),
    Pair(usize, usize),
    Proj1(usize),
    Proj2(usize),
    Id(usize, usize, usize),
    Const(Const),
    Prim(Prim, Vec<usize>),
    Global(Name),
    Hole(u32),
    Meta(u32),
}

/// Hash-consing table: structurally identical subterms, name hints
/// included, are mapped to a single node.
#[derive(Default)]
pub struct Sharing {
    table: HashMap<ShareKey, RcTerm>,
    info: HashMap<usize, Info>,
}

/// Tree size, and one more than the largest free de Bruijn index.
#[derive(Clone, Copy)]
struct Info {
    size: usize,
    free: usize,
}

impl Info {
    fn leaf(free: usize) -> Info {
        Info { size: 1, free }
    }

    fn join(self, other: Info) -> Info {
        Info { size: self.size + other.size, free: self.free.max(other.free) }
    }

    fn bind(self) -> Info {
        Info { size: self.size, free: self.free.saturating_sub(1) }
    }
}

fn addr(t: &RcTerm) -> usize {
    Rc::as_ptr(t) as usize
}

impl Sharing {
    pub fn new() -> Sharing {
        Sharing::default()
    }

    pub fn share(&mut self, t: &RcTerm) -> RcTerm {
        let (key, node, info) = match &**t {
            Term::Var(i) => (ShareKey::Var(*i), Term::Var(*i), Info::leaf(i + 1)),
            Term::Universe => (ShareKey::Universe, Term::Universe, Info::leaf(0)),
            Term::Const(c) => (ShareKey::Const(*c), Term::Const(*c), Info::leaf(0)),
            Term::Global(n) => (ShareKey::Global(n.clone()), Term::Global(n.clone()), Info::leaf(0)),
            Term::Hole(h) => (ShareKey::Hole(*h), Term::Hole(*h), Info::leaf(0)),
            Term::Meta(m) => (ShareKey::Meta(m.0), Term::Meta(*m), Info::leaf(0)),
            Term::Pi { name, implicit, dom, cod } => {
                let (dom, cod) = (self.share(dom), self.share(cod));
                let info = Info::leaf(0).join(self.info(&dom)).join(self.info(&cod).bind());
                let key = ShareKey::Pi(name.clone(), *implicit, addr(&dom), addr(&cod));
                (key, Term::Pi { name: name.clone(), implicit: *implicit, dom, cod }, info)
            }
            Term::Lam { name, implicit, body } => {
                let body = self.share(body);
                let info = Info::leaf(0).join(self.info(&body).bind());
                (ShareKey::Lam(name.clone(), *implicit, addr(&body)), Term::Lam { name: name.clone(), implicit: *implicit, body }, info)
            }
            Term::App { fun, arg, implicit } => {
                let (fun, arg) = (self.share(fun), self.share(arg));
                let info = Info::leaf(0).join(self.info(&fun)).join(self.info(&arg));
                (ShareKey::App(addr(&fun), addr(&arg), *implicit), Term::App { fun, arg, implicit: *implicit }, info)
            }
            Term::Sigma { name, fst, snd } => {
                let (fst, snd) = (self.share(fst), self.share(snd));
                let info = Info::leaf(0).join(self.info(&fst)).join(self.info(&snd).bind());
                (ShareKey::Sigma(name.clone(), addr(&fst), addr(&snd)), Term::Sigma { name: name.clone(), fst, snd }, info)
            }
            Term::Pair(a, b) => {
                let (a, b) = (self.share(a), self.share(b));
                let info = Info::leaf(0).join(self.info(&a)).join(self.info(&b));
                (ShareKey::Pair(addr(&a), addr(&b)), Term::Pair(a, b), info)
            }
            Term::Proj1(p) => {
                let p = self.share(p);
                let info = Info::leaf(0).join(self.info(&p));
                (ShareKey::Proj1(addr(&p)), Term::Proj1(p), info)
            }
            Term::Proj2(p) => {
                let p = self.share(p);
                let info = Info::leaf(0).join(self.info(&p));
                (ShareKey::Proj2(addr(&p)), Term::Proj2(p), info)
            }
            Term::Id { ty, lhs, rhs } => {
                let (ty, lhs, rhs) = (self.share(ty), self.share(lhs), self.share(rhs));
                let info = Info::leaf(0).join(self.info(&ty)).join(self.info(&lhs)).join(self.info(&rhs));
                (ShareKey::Id(addr(&ty), addr(&lhs), addr(&rhs)), Term::Id { ty, lhs, rhs }, info)
            }
            Term::Prim(p, args) => {
                let args: Vec<RcTerm> = args.iter().map(|a| self.share(a)).collect();
                let info = args.iter().fold(Info::leaf(0), |acc, a| acc.join(self.info(a)));
                (ShareKey::Prim(*p, args.iter().map(addr).collect()), Term::Prim(*p, args.into()), info)
            }
        };
        if let Some(hit) = self.table.get(&key) {
            return hit.clone();
        }
        let rc = Rc::new(node);
        self.info.insert(addr(&rc), info);
        self.table.insert(key, rc.clone());
        rc
    }

    fn info(&self, t: &RcTerm) -> Info {
        self.info.get(&addr(t)).copied().unwrap_or(Info { size: 0, free: usize::MAX })
    }

    /// Tree size of a node returned by [`Sharing::share`]; 0 for others.
    pub fn size(&self, t: &RcTerm) -> usize {
        self.info(t).size
    }

    /// True if `t` was returned by [`Sharing::share`] and has no free
    /// variables.
    pub fn is_closed(&self, t: &RcTerm) -> bool {
        self.info(t).free == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> RcTerm {
        Term::constant(Const::Base)
    }

    #[test]
    fn shift_free_var() {
        assert_eq!(*Term::shift(&Term::var(0), 1, 0).unwrap(), Term::Var(1));
    }

    #[test]
    fn shift_leaves_bound_var() {
        let t = Term::lam("x", Term::var(0));
        assert_eq!(Term::shift(&t, 1, 0).unwrap(), t);
    }

    #[test]
    fn shift_under_binder() {
        let t = Term::lam("x", Term::var(1));
        assert_eq!(Term::shift(&t, 1, 0).unwrap(), Term::lam("x", Term::var(2)));
    }

    #[test]
    fn shift_negative_fails() {
        assert!(Term::shift(&Term::var(0), -1, 0).is_err());
        assert_eq!(*Term::shift(&Term::var(2), -1, 0).unwrap(), Term::Var(1));
    }

    #[test]
    fn subst_examples() {
        assert_eq!(Term::subst(&Term::var(0), &base(), 0), base());
        assert_eq!(*Term::subst(&Term::var(1), &base(), 0), Term::Var(0));
        let t = Term::lam("x", Term::app(Term::var(1), Term::var(0)));
        assert_eq!(
            Term::subst(&t, &base(), 0),
            Term::lam("x", Term::app(base(), Term::var(0)))
        );
    }

    #[test]
    fn subst_weakens_replacement_under_binders() {
        // (fun y => x) [x := z] with z free at index 3
        let t = Term::lam("y", Term::var(1));
        assert_eq!(
            Term::subst(&t, &Term::var(3), 0),
            Term::lam("y", Term::var(4))
        );
    }

    #[test]
    fn names_ignored_by_equality() {
        assert_eq!(Term::lam("x", Term::var(0)), Term::lam("y", Term::var(0)));
    }

    #[test]
    fn arities_match_keywords() {
        for p in Prim::ALL {
            assert_eq!(Prim::from_keyword(p.keyword()), Some(p));
        }
        for c in Const::ALL {
            assert_eq!(Const::from_keyword(c.keyword()), Some(c));
        }
    }
}
