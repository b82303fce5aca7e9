//! Definitional equality with metavariable solving.
//!
//! Conversion is untyped with eta for functions and pairs. Metavariables
//! are solved only when applied to distinct bound variables; everything
//! else is compared structurally, unfolding definitions lazily after a
//! same-name fast path.

use std::collections::{HashMap, HashSet};
use std::rc::Rc;

use crate::context::Solution;
use crate::eval::{EResult, Eval, EvalError};
use crate::term::{MetaId, RcTerm, Term};
use crate::value::{Closure, Env, Frame, Head, Level, Value};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UnifyError {
    Mismatch,
    Occurs(MetaId),
    Scope(MetaId),
    Eval(EvalError),
}

impl From<EvalError> for UnifyError {
    fn from(e: EvalError) -> Self {
        UnifyError::Eval(e)
    }
}

pub type UResult<T> = Result<T, UnifyError>;

struct Renaming {
    map: HashMap<Level, Level>,
    dom: usize,
    cod: usize,
}

impl Renaming {
    fn lift(&mut self) {
        self.map.insert(self.dom, self.cod);
        self.dom += 1;
        self.cod += 1;
    }

    fn unlift(&mut self) {
        self.dom -= 1;
        self.cod -= 1;
        self.map.remove(&self.dom);
    }
}

impl<'a> Eval<'a> {
    /// Decides definitional equality. Never solves metavariables of
    /// hole-free values since none occur.
    pub fn conv(&self, depth: usize, a: &Value, b: &Value) -> EResult<bool> {
        let snap = self.metas.snapshot();
        match self.unify(depth, a, b) {
            Ok(()) => Ok(true),
            Err(UnifyError::Eval(e)) => Err(e),
            Err(_) => {
                self.metas.restore(snap);
                Ok(false)
            }
        }
    }

    fn unify_closures(&self, depth: usize, a: &Closure, b: &Closure) -> UResult<()> {
        let x = Value::var(depth);
        let va = self.instantiate(a, x.clone())?;
        let vb = self.instantiate(b, x)?;
        self.unify(depth + 1, &va, &vb)
    }

    pub fn unify(&self, depth: usize, a: &Value, b: &Value) -> UResult<()> {
        if a.ptr_eq(b) {
            return Ok(());
        }
        let a = self.force(a)?;
        let b = self.force(b)?;
        if let Some(r) = self.try_solve(depth, &a, &b)? {
            return r;
        }
        if let Some(r) = self.try_solve(depth, &b, &a)? {
            return r;
        }
        match (&a, &b) {
            (Value::Glued(ga), Value::Glued(gb)) => {
                if ga.name == gb.name && ga.spine.len() == gb.spine.len() {
                    let snap = self.metas.snapshot();
                    match self.unify_spines(depth, &ga.spine, &gb.spine) {
                        Ok(()) => return Ok(()),
                        Err(UnifyError::Eval(e)) => return Err(e.into()),
                        Err(_) => self.metas.restore(snap),
                    }
                }
                let (ua, ub) = (self.unfold(ga)?, self.unfold(gb)?);
                self.unify(depth, &ua, &ub)
            }
            (Value::Glued(ga), _) => {
                let ua = self.unfold(ga)?;
                self.unify(depth, &ua, &b)
            }
            (_, Value::Glued(gb)) => {
                let ub = self.unfold(gb)?;
                self.unify(depth, &a, &ub)
            }
            (Value::Lam(_, _, ca), Value::Lam(_, _, cb)) => self.unify_closures(depth, ca, cb),
            (Value::Lam(_, i, ca), other @ Value::Neutral(_)) | (other @ Value::Neutral(_), Value::Lam(_, i, ca)) => {
                let x = Value::var(depth);
                let body = self.instantiate(ca, x.clone())?;
                let applied = self.apply(other.clone(), x, *i)?;
                self.unify(depth + 1, &body, &applied)
            }
            (Value::Pair(a1, b1), Value::Pair(a2, b2)) => {
                self.unify(depth, a1, a2)?;
                self.unify(depth, b1, b2)
            }
            (Value::Pair(a1, b1), other @ Value::Neutral(_)) | (other @ Value::Neutral(_), Value::Pair(a1, b1)) => {
                let fst = self.proj1(other.clone())?;
                self.unify(depth, a1, &fst)?;
                let snd = self.proj2(other.clone())?;
                self.unify(depth, b1, &snd)
            }
            (Value::Universe, Value::Universe) => Ok(()),
            (Value::Pi(_, i1, d1, c1), Value::Pi(_, i2, d2, c2)) if i1 == i2 => {
                self.unify(depth, d1, d2)?;
                self.unify_closures(depth, c1, c2)
            }
            (Value::Sigma(_, d1, c1), Value::Sigma(_, d2, c2)) => {
                self.unify(depth, d1, d2)?;
                self.unify_closures(depth, c1, c2)
            }
            (Value::Id(t1, x1, y1), Value::Id(t2, x2, y2)) => {
                self.unify(depth, t1, t2)?;
                self.unify(depth, x1, x2)?;
                self.unify(depth, y1, y2)
            }
            (Value::Refl(x), Value::Refl(y)) => self.unify(depth, x, y),
            (Value::Const(c1), Value::Const(c2)) if c1 == c2 => Ok(()),
            (Value::Neutral(n1), Value::Neutral(n2)) => {
                self.unify_heads(depth, &n1.head, &n2.head)?;
                self.unify_spines(depth, &n1.spine, &n2.spine)
            }
            _ => Err(UnifyError::Mismatch),
        }
    }

    fn unify_heads(&self, depth: usize, a: &Head, b: &Head) -> UResult<()> {
        match (a, b) {
            (Head::Var(x), Head::Var(y)) if x == y => Ok(()),
            (Head::Postulate(x), Head::Postulate(y)) if x == y => Ok(()),
            (Head::Prim(p1, a1), Head::Prim(p2, a2)) if p1 == p2 => {
                for (x, y) in a1.iter().zip(a2.iter()) {
                    self.unify(depth, x, y)?;
                }
                Ok(())
            }
            (Head::Meta(m1, e1), Head::Meta(m2, e2)) if m1 == m2 => self.unify_envs(depth, e1, e2),
            _ => Err(UnifyError::Mismatch),
        }
    }

    fn unify_envs(&self, depth: usize, a: &Env, b: &Env) -> UResult<()> {
        if a.ptr_eq(b) {
            return Ok(());
        }
        for (x, y) in a.to_vec().iter().zip(b.to_vec().iter()) {
            self.unify(depth, x, y)?;
        }
        Ok(())
    }

    fn unify_spines(&self, depth: usize, a: &[Frame], b: &[Frame]) -> UResult<()> {
        if a.len() != b.len() {
            return Err(UnifyError::Mismatch);
        }
        for (fa, fb) in a.iter().zip(b) {
            match (fa, fb) {
                (Frame::App(x, i1), Frame::App(y, i2)) if i1 == i2 => self.unify(depth, x, y)?,
                (Frame::Proj1, Frame::Proj1) | (Frame::Proj2, Frame::Proj2) => {}
                _ => return Err(UnifyError::Mismatch),
            }
        }
        Ok(())
    }

    /// If `lhs` is an unsolved metavariable, tries to solve it with `rhs`.
    fn try_solve(&self, depth: usize, lhs: &Value, rhs: &Value) -> UResult<Option<UResult<()>>> {
        let Value::Neutral(n) = lhs else { return Ok(None) };
        let Head::Meta(m, env) = &n.head else { return Ok(None) };
        if let Value::Neutral(n2) = rhs {
            if let Head::Meta(m2, _) = &n2.head {
                if m2 == m {
                    return Ok(None);
                }
            }
        }
        if n.spine.is_empty() && env.len() == depth && self.is_identity(env)? && self.clean(*m, rhs) {
            self.metas.solve_value(*m, env.clone(), rhs.clone());
            return Ok(Some(Ok(())));
        }
        let Some(ren) = self.pattern(depth, env, &n.spine)? else {
            return Ok(None);
        };
        if !matches!(rhs, Value::Pair(..) | Value::Lam(..)) {
            return Ok(Some(self.solve(*m, ren, &n.spine, rhs)));
        }
        // A failed solution may still be found by eta-expanding.
        let snap = self.metas.snapshot();
        match self.solve(*m, ren, &n.spine, rhs) {
            Err(UnifyError::Occurs(_) | UnifyError::Scope(_)) => {
                self.metas.restore(snap);
                Ok(None)
            }
            r => Ok(Some(r)),
        }
    }

    fn is_identity(&self, env: &Env) -> UResult<bool> {
        let mut cur = env.len();
        for v in env.iter() {
            cur -= 1;
            if self.force(v)?.as_var() != Some(cur) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// True if `v` mentions no metavariable other than unsolved ones
    /// distinct from `m`, so it can stand as the solution of `m` as is.
    fn clean(&self, m: MetaId, v: &Value) -> bool {
        let mut seen = HashSet::new();
        self.clean_in(m, v, &mut seen)
    }

    fn clean_in(&self, m: MetaId, v: &Value, seen: &mut HashSet<usize>) -> bool {
        // Only shared nodes can be reached twice.
        let mut first = |rc: usize, p: usize| rc == 1 || seen.insert(p);
        match v {
            Value::Universe | Value::Const(_) => true,
            Value::Pi(_, _, a, c) | Value::Sigma(_, a, c) => {
                self.clean_in(m, a, seen) && self.clean_closure(m, c, seen)
            }
            Value::Lam(_, _, c) => self.clean_closure(m, c, seen),
            Value::Pair(a, b) => self.clean_in(m, a, seen) && self.clean_in(m, b, seen),
            Value::Id(a, x, y) => self.clean_in(m, a, seen) && self.clean_in(m, x, seen) && self.clean_in(m, y, seen),
            Value::Refl(a) => self.clean_in(m, a, seen),
            Value::Neutral(n) => {
                if !first(Rc::strong_count(n), Rc::as_ptr(n) as *const () as usize) {
                    return true;
                }
                let head_ok = match &n.head {
                    Head::Var(_) | Head::Postulate(_) => true,
                    Head::Meta(m2, env) => *m2 != m && !self.metas.is_solved(*m2) && self.clean_env(m, env, seen),
                    Head::Prim(_, args) => args.iter().all(|a| self.clean_in(m, a, seen)),
                };
                head_ok && self.clean_spine(m, &n.spine, seen)
            }
            Value::Glued(g) => {
                if !first(Rc::strong_count(g), Rc::as_ptr(g) as *const () as usize) {
                    return true;
                }
                self.clean_spine(m, &g.spine, seen)
            }
        }
    }

    fn clean_spine(&self, m: MetaId, spine: &[Frame], seen: &mut HashSet<usize>) -> bool {
        spine.iter().all(|f| match f {
            Frame::App(a, _) => self.clean_in(m, a, seen),
            Frame::Proj1 | Frame::Proj2 => true,
        })
    }

    fn clean_env(&self, m: MetaId, env: &Env, seen: &mut HashSet<usize>) -> bool {
        for (key, rc, v) in env.nodes() {
            if rc > 1 && !seen.insert(key) {
                return true;
            }
            if !self.clean_in(m, v, seen) {
                return false;
            }
        }
        true
    }

    /// Closure bodies are not searched for solved metas; any meta at all
    /// sends the solution down the renaming path.
    fn clean_closure(&self, m: MetaId, c: &Closure, seen: &mut HashSet<usize>) -> bool {
        !c.body.contains_holes() && self.clean_env(m, &c.env, seen)
    }

    /// True if no unsolved metavariable can be reached from `v`.
    pub fn settled(&self, v: &Value) -> bool {
        let mut seen = HashSet::new();
        self.settled_in(v, &mut seen)
    }

    fn settled_in(&self, v: &Value, seen: &mut HashSet<usize>) -> bool {
        let mut first = |rc: usize, p: usize| rc == 1 || seen.insert(p);
        match v {
            Value::Universe | Value::Const(_) => true,
            Value::Pi(_, _, a, c) | Value::Sigma(_, a, c) => self.settled_in(a, seen) && self.settled_closure(c, seen),
            Value::Lam(_, _, c) => self.settled_closure(c, seen),
            Value::Pair(a, b) => self.settled_in(a, seen) && self.settled_in(b, seen),
            Value::Id(a, x, y) => self.settled_in(a, seen) && self.settled_in(x, seen) && self.settled_in(y, seen),
            Value::Refl(a) => self.settled_in(a, seen),
            Value::Neutral(n) => {
                if !first(Rc::strong_count(n), Rc::as_ptr(n) as *const () as usize) {
                    return true;
                }
                let head_ok = match &n.head {
                    Head::Var(_) | Head::Postulate(_) => true,
                    Head::Meta(m, env) => self.settled_meta(*m, seen) && self.settled_env(env, seen),
                    Head::Prim(_, args) => args.iter().all(|a| self.settled_in(a, seen)),
                };
                head_ok
                    && n.spine.iter().all(|f| match f {
                        Frame::App(a, _) => self.settled_in(a, seen),
                        Frame::Proj1 | Frame::Proj2 => true,
                    })
            }
            Value::Glued(g) => {
                if !first(Rc::strong_count(g), Rc::as_ptr(g) as *const () as usize) {
                    return true;
                }
                g.spine.iter().all(|f| match f {
                    Frame::App(a, _) => self.settled_in(a, seen),
                    Frame::Proj1 | Frame::Proj2 => true,
                })
            }
        }
    }

    /// True if every metavariable in `t` is solved, transitively.
    pub fn settled_term(&self, t: &Term) -> bool {
        let mut seen = HashSet::new();
        self.settled_term_in(t, &mut seen)
    }

    fn settled_env(&self, env: &Env, seen: &mut HashSet<usize>) -> bool {
        for (key, rc, v) in env.nodes() {
            if rc > 1 && !seen.insert(key) {
                return true;
            }
            if !self.settled_in(v, seen) {
                return false;
            }
        }
        true
    }

    fn settled_closure(&self, c: &Closure, seen: &mut HashSet<usize>) -> bool {
        self.settled_term_in(&c.body, seen) && self.settled_env(&c.env, seen)
    }

    fn settled_term_in(&self, t: &Term, seen: &mut HashSet<usize>) -> bool {
        let mut ok = true;
        t.for_each(&mut |s| match s {
            Term::Hole(_) => ok = false,
            Term::Meta(m) if ok => ok = self.settled_meta(*m, seen),
            _ => {}
        });
        ok
    }

    fn settled_meta(&self, m: MetaId, seen: &mut HashSet<usize>) -> bool {
        // Meta ids are tagged so they cannot collide with addresses.
        if !seen.insert(usize::MAX - m.0 as usize) {
            return true;
        }
        match self.metas.solution(m) {
            None => false,
            Some(Solution::Term(t)) => self.settled_term_in(&t, seen),
            Some(Solution::Value(_, v, _)) => self.settled_in(&v, seen),
        }
    }

    /// Inverts a pattern spine: the meta's environment and arguments must
    /// be distinct bound variables.
    fn pattern(&self, depth: usize, env: &Env, spine: &[Frame]) -> UResult<Option<Renaming>> {
        let mut map = HashMap::new();
        let mut next = 0;
        let mut add = |v: &Value, map: &mut HashMap<Level, Level>| -> UResult<bool> {
            let v = self.force(v)?;
            match v.as_var() {
                Some(l) if !map.contains_key(&l) => {
                    map.insert(l, next);
                    next += 1;
                    Ok(true)
                }
                _ => Ok(false),
            }
        };
        for v in env.to_vec() {
            if !add(&v, &mut map)? {
                return Ok(None);
            }
        }
        for f in spine {
            match f {
                Frame::App(v, _) => {
                    if !add(v, &mut map)? {
                        return Ok(None);
                    }
                }
                _ => return Ok(None),
            }
        }
        let cod = map.len();
        Ok(Some(Renaming { map, dom: depth, cod }))
    }

    fn solve(&self, m: MetaId, mut ren: Renaming, spine: &[Frame], rhs: &Value) -> UResult<()> {
        let mut body = self.rename(m, &mut ren, rhs)?;
        for f in spine.iter().rev() {
            let implicit = matches!(f, Frame::App(_, true));
            body = Rc::new(Term::Lam { name: "x".into(), implicit, body });
        }
        self.metas.solve(m, body);
        Ok(())
    }

    fn rename_closure(&self, m: MetaId, ren: &mut Renaming, clo: &Closure) -> UResult<RcTerm> {
        let v = self.instantiate(clo, Value::var(ren.dom))?;
        ren.lift();
        let out = self.rename(m, ren, &v);
        ren.unlift();
        out
    }

    fn rename(&self, m: MetaId, ren: &mut Renaming, v: &Value) -> UResult<RcTerm> {
        let v = self.force(v)?;
        Ok(match &v {
            Value::Universe => Rc::new(Term::Universe),
            Value::Const(c) => Term::constant(*c),
            Value::Pi(name, implicit, dom, cod) => Rc::new(Term::Pi {
                name: name.clone(),
                implicit: *implicit,
                dom: self.rename(m, ren, dom)?,
                cod: self.rename_closure(m, ren, cod)?,
            }),
            Value::Lam(name, implicit, body) => Rc::new(Term::Lam {
                name: name.clone(),
                implicit: *implicit,
                body: self.rename_closure(m, ren, body)?,
            }),
            Value::Sigma(name, fst, snd) => Rc::new(Term::Sigma {
                name: name.clone(),
                fst: self.rename(m, ren, fst)?,
                snd: self.rename_closure(m, ren, snd)?,
            }),
            Value::Pair(a, b) => Rc::new(Term::Pair(self.rename(m, ren, a)?, self.rename(m, ren, b)?)),
            Value::Id(a, x, y) => Rc::new(Term::Id {
                ty: self.rename(m, ren, a)?,
                lhs: self.rename(m, ren, x)?,
                rhs: self.rename(m, ren, y)?,
            }),
            Value::Refl(a) => Term::prim(crate::term::Prim::Refl, vec![self.rename(m, ren, a)?]),
            Value::Neutral(n) => {
                let head = match &n.head {
                    Head::Var(l) => match ren.map.get(l) {
                        Some(&t) => Term::var(ren.cod - 1 - t),
                        None => return Err(UnifyError::Scope(m)),
                    },
                    Head::Meta(m2, env) => {
                        if *m2 == m {
                            return Err(UnifyError::Occurs(m));
                        }
                        // The other meta must see a prefix of the solution's
                        // own context. Entries past the longest such prefix
                        // are pruned: the meta is narrowed to a fresh one
                        // that cannot depend on them.
                        let entries = env.to_vec();
                        let mut k = 0;
                        for e in &entries {
                            let e = self.force(e)?;
                            match e.as_var().and_then(|l| ren.map.get(&l)) {
                                Some(&t) if t == k => k += 1,
                                _ => break,
                            }
                        }
                        if k == entries.len() {
                            Rc::new(Term::Meta(*m2))
                        } else {
                            let old = self.metas.entry(*m2);
                            let m3 = self.metas.fresh(k, old.loc, old.hole, old.what);
                            self.metas.solve(*m2, Rc::new(Term::Meta(m3)));
                            Rc::new(Term::Meta(m3))
                        }
                    }
                    Head::Postulate(name) => Rc::new(Term::Global(name.clone())),
                    Head::Prim(p, args) => Term::prim(
                        *p,
                        args.iter().map(|a| self.rename(m, ren, a)).collect::<UResult<Vec<_>>>()?,
                    ),
                };
                self.rename_spine(m, ren, head, &n.spine)?
            }
            Value::Glued(g) => {
                let head = Rc::new(Term::Global(g.name.clone()));
                match self.rename_spine(m, ren, head, &g.spine) {
                    Ok(t) => t,
                    Err(UnifyError::Scope(_)) => {
                        let u = self.unfold(g)?;
                        self.rename(m, ren, &u)?
                    }
                    Err(e) => return Err(e),
                }
            }
        })
    }

    fn rename_spine(&self, m: MetaId, ren: &mut Renaming, mut head: RcTerm, spine: &[Frame]) -> UResult<RcTerm> {
        for f in spine {
            head = match f {
                Frame::App(a, implicit) => Rc::new(Term::App {
                    fun: head,
                    arg: self.rename(m, ren, a)?,
                    implicit: *implicit,
                }),
                Frame::Proj1 => Rc::new(Term::Proj1(head)),
                Frame::Proj2 => Rc::new(Term::Proj2(head)),
            };
        }
        Ok(head)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::{Globals, MetaStore};
    use crate::term::Const;

    fn pair(a: Value, b: Value) -> Value {
        Value::Pair(Rc::new(a), Rc::new(b))
    }

    const BASE: Value = Value::Const(Const::Base);
    const LOOP: Value = Value::Const(Const::Loop);

    #[test]
    fn solves_a_closed_meta() {
        let g = Globals::new();
        let ms = MetaStore::new();
        let ev = Eval::new(&g, &ms, 1000);
        let m = ms.fresh(0, None, None, "t");
        let vm = ev.eval(&Env::new(), &Term::Meta(m)).unwrap();
        assert!(!ev.settled(&vm));
        ev.unify(0, &vm, &pair(BASE, LOOP)).unwrap();
        assert!(ms.is_solved(m));
        assert!(ev.settled(&vm));
        let q = ev.quote(0, &vm, true).unwrap();
        assert_eq!(q, Rc::new(Term::Pair(Term::constant(Const::Base), Term::constant(Const::Loop))));
    }

    #[test]
    fn meta_over_a_variable() {
        let g = Globals::new();
        let ms = MetaStore::new();
        let ev = Eval::new(&g, &ms, 1000);
        let m = ms.fresh(1, None, None, "t");
        let env = Env::new().push(Value::var(0));
        let vm = ev.eval(&env, &Term::Meta(m)).unwrap();
        ev.unify(1, &vm, &pair(Value::var(0), Value::var(0))).unwrap();
        let at_base = ev.normalize(&Env::new().push(BASE), &Term::Meta(m)).unwrap();
        assert_eq!(at_base, Rc::new(Term::Pair(Term::constant(Const::Base), Term::constant(Const::Base))));
    }

    #[test]
    fn occurs_check() {
        let g = Globals::new();
        let ms = MetaStore::new();
        let ev = Eval::new(&g, &ms, 1000);
        let m = ms.fresh(0, None, None, "t");
        let vm = ev.eval(&Env::new(), &Term::Meta(m)).unwrap();
        assert!(ev.unify(0, &vm, &pair(vm.clone(), BASE)).is_err());
        assert!(!ms.is_solved(m));
    }

    #[test]
    fn failed_conversion_rolls_back() {
        let g = Globals::new();
        let ms = MetaStore::new();
        let ev = Eval::new(&g, &ms, 1000);
        let m = ms.fresh(0, None, None, "t");
        let vm = ev.eval(&Env::new(), &Term::Meta(m)).unwrap();
        assert!(!ev.conv(0, &pair(vm.clone(), BASE), &pair(LOOP, LOOP)).unwrap());
        assert!(!ms.is_solved(m));
    }

    #[test]
    fn eta_against_neutrals_only() {
        let g = Globals::new();
        let ms = MetaStore::new();
        let ev = Eval::new(&g, &ms, 1000);
        let f = Value::var(0);
        let env = Env::new().push(f.clone());
        let expanded = ev.eval(&env, &Term::lam("x", Term::app(Term::var(1), Term::var(0)))).unwrap();
        assert!(ev.conv(1, &expanded, &f).unwrap());
        assert!(ev.conv(1, &f, &expanded).unwrap());
        let p = ev.eval(&env, &Rc::new(Term::Pair(
            Rc::new(Term::Proj1(Term::var(0))),
            Rc::new(Term::Proj2(Term::var(0))),
        ))).unwrap();
        assert!(ev.conv(1, &p, &f).unwrap());
        assert!(!ev.conv(1, &expanded, &BASE).unwrap());
        assert!(!ev.conv(1, &p, &Value::Universe).unwrap());
    }

    #[test]
    fn distinct_constants() {
        let g = Globals::new();
        let ms = MetaStore::new();
        let ev = Eval::new(&g, &ms, 1000);
        assert!(ev.conv(0, &BASE, &BASE).unwrap());
        assert!(!ev.conv(0, &BASE, &LOOP).unwrap());
        assert!(!ev.conv(2, &Value::var(0), &Value::var(1)).unwrap());
    }
}
