//! Bidirectional elaboration and checking of declarations.
//!
//! Holes and implicit arguments become metavariables solved by
//! unification; elaborated terms are zonked and must be meta-free before
//! they enter the global environment.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use crate::context::{GlobalEntry, Globals, Locals, MetaStore};
use crate::diagnostic::{Category, Diagnostic, Location};
use crate::eval::{EvalError, Eval, DEFAULT_STEP_BUDGET};
use crate::prims::Signatures;
use crate::print::print_term;
use crate::surface::{DeclKind, ResolvedDecl};
use crate::term::{Const, MetaId, Name, Prim, RcTerm, Sharing, Term};
use crate::unify::UnifyError;
use crate::value::{Closure, Env, Frame, Head, Value};

type R<T> = Result<T, Diagnostic>;

fn eval_err(e: EvalError) -> Diagnostic {
    match e {
        EvalError::StepBudget(_) => Diagnostic::new(Category::StepBudget, e.to_string()),
        EvalError::Internal(_) => Diagnostic::new(Category::TypeMismatch, e.to_string()),
    }
}

/// Substitutes solved metavariables, recursively. `depth` is the context
/// depth `t` lives at.
pub fn zonk(ev: &Eval, t: &RcTerm, depth: usize) -> R<RcTerm> {
    let mut err = None;
    let out = Term::replace_metas(t, depth, &mut |node, d| match node {
        Term::Meta(m) => match ev.meta_term(*m) {
            Ok(sol) => sol.map(|sol| {
                let n = ev.metas.depth(*m);
                zonk(ev, &Term::weaken(&sol, d.saturating_sub(n)), d).unwrap_or_else(|e| {
                    err = Some(e);
                    sol
                })
            }),
            Err(e) => {
                err = Some(eval_err(e));
                None
            }
        },
        _ => None,
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

fn metas_in(t: &Term, out: &mut Vec<MetaId>) {
    t.for_each(&mut |s| {
        if let Term::Meta(m) = s {
            if !out.contains(m) {
                out.push(*m);
            }
        }
    });
}

/// A solved implicit argument whose type has not been checked yet: the
/// meta, the type its binder demands and the context it was created in.
type Obligation = (MetaId, Value, Locals);

struct Elab<'a> {
    ev: Eval<'a>,
    sigs: &'a Signatures,
    holes: &'a [Location],
    loc: Location,
    obligations: RefCell<Vec<Obligation>>,
    memo: Option<Memo<'a>>,
}

/// Subterms smaller than this are always checked afresh.
const MEMO_MIN_SIZE: usize = 24;

/// Check results for hash-consed subterms, keyed by node and context.
/// Entries keep both alive so that addresses are not reused.
struct Memo<'a> {
    sharing: &'a Sharing,
    table: RefCell<HashMap<(usize, usize), MemoEntry>>,
}

struct MemoEntry {
    _term: RcTerm,
    _env: Env,
    ty: Value,
    out: RcTerm,
}

impl<'a> Elab<'a> {
    fn eval(&self, cx: &Locals, t: &Term) -> R<Value> {
        self.ev.eval(&cx.env, t).map_err(eval_err)
    }

    fn whnf(&self, v: &Value) -> R<Value> {
        self.ev.whnf(v).map_err(eval_err)
    }

    fn quote(&self, depth: usize, v: &Value) -> R<RcTerm> {
        self.ev.quote(depth, v, false).map_err(eval_err)
    }

    fn instantiate(&self, c: &Closure, v: Value) -> R<Value> {
        self.ev.instantiate(c, v).map_err(eval_err)
    }

    fn error(&self, cat: Category, msg: impl Into<String>) -> Diagnostic {
        Diagnostic::new(cat, msg).at(self.loc.clone())
    }

    fn fresh_meta(&self, cx: &Locals, hole: Option<u32>, what: &'static str) -> (RcTerm, Value) {
        let loc = hole.and_then(|h| self.holes.get(h as usize).cloned()).or_else(|| Some(self.loc.clone()));
        let m = self.ev.metas.fresh(cx.depth(), loc, hole, what);
        (Rc::new(Term::Meta(m)), Value::neutral(Head::Meta(m, cx.env.clone()), Vec::new()))
    }

    /// Printed normal form for diagnostics; falls back to the folded form
    /// when the unfolded one is unwieldy.
    fn show(&self, cx: &Locals, v: &Value) -> String {
        let render = |unfold: bool| -> Option<String> {
            let t = self.ev.quote(cx.depth(), v, unfold).ok()?;
            let z: RcTerm = zonk(&self.ev, &t, cx.depth()).ok()?;
            Some(print_term(&z, &cx.names))
        };
        match render(true) {
            Some(s) if s.len() <= 600 => s,
            _ => render(false).unwrap_or_else(|| "<unprintable>".into()),
        }
    }

    fn classify(&self, expected: &Value, actual: &Value) -> Category {
        let (Ok(e), Ok(a)) = (self.whnf(expected), self.whnf(actual)) else {
            return Category::NotConvertible;
        };
        let same = match (&e, &a) {
            (Value::Const(x), Value::Const(y)) => x == y,
            _ => std::mem::discriminant(&e) == std::mem::discriminant(&a),
        };
        if same {
            Category::NotConvertible
        } else {
            Category::TypeMismatch
        }
    }

    fn mismatch(&self, cx: &Locals, expected: &Value, actual: &Value, what: &str) -> Diagnostic {
        let cat = self.classify(expected, actual);
        let msg = match cat {
            Category::TypeMismatch => format!("{what} has the wrong type"),
            _ => format!("{what}: the two sides are not definitionally equal"),
        };
        self.error(cat, msg).with_forms(self.show(cx, expected), self.show(cx, actual))
    }

    fn unify_or(&self, cx: &Locals, expected: &Value, actual: &Value, what: &str) -> R<()> {
        match self.ev.unify(cx.depth(), actual, expected) {
            Ok(()) => Ok(()),
            Err(UnifyError::Eval(e)) => Err(eval_err(e)),
            Err(_) => Err(self.mismatch(cx, expected, actual, what)),
        }
    }

    fn const_type(&self, c: Const) -> R<Value> {
        let id = |ty: Value, x: Value, y: Value| Value::Id(Rc::new(ty), Rc::new(x), Rc::new(y));
        let cell = |c| Value::Const(c);
        Ok(match c {
            Const::Circle | Const::Torus => Value::Universe,
            Const::Base => cell(Const::Circle),
            Const::TB => cell(Const::Torus),
            Const::Loop => id(cell(Const::Circle), cell(Const::Base), cell(Const::Base)),
            Const::TP | Const::TQ => id(cell(Const::Torus), cell(Const::TB), cell(Const::TB)),
            Const::TT => {
                let path = id(cell(Const::Torus), cell(Const::TB), cell(Const::TB));
                let pq = self.ev.prim(Prim::Concat, vec![cell(Const::TP), cell(Const::TQ)]).map_err(eval_err)?;
                let qp = self.ev.prim(Prim::Concat, vec![cell(Const::TQ), cell(Const::TP)]).map_err(eval_err)?;
                id(path, pq, qp)
            }
        })
    }

    /// Applies leading implicit arguments as fresh metavariables.
    fn insert(&self, cx: &Locals, mut t: RcTerm, mut ty: Value) -> R<(RcTerm, Value)> {
        loop {
            match self.whnf(&ty)? {
                Value::Pi(_, true, dom, cod) => {
                    let (m, mv) = self.fresh_meta(cx, None, "an implicit argument");
                    self.oblige(&m, &dom, cx);
                    t = Rc::new(Term::App { fun: t, arg: m, implicit: true });
                    ty = self.instantiate(&cod, mv)?;
                }
                _ => return Ok((t, ty)),
            }
        }
    }

    fn infer(&self, cx: &Locals, t: &RcTerm) -> R<(RcTerm, Value)> {
        match &**t {
            Term::Var(i) => match cx.type_of(*i) {
                Some(ty) => Ok((t.clone(), ty.clone())),
                None => Err(self.error(Category::Scope, format!("variable #{i} is out of scope"))),
            },
            Term::Universe => Ok((t.clone(), Value::Universe)),
            Term::Const(c) => Ok((t.clone(), self.const_type(*c)?)),
            Term::Global(n) => match self.ev.globals.get(n) {
                Some(e) => Ok((t.clone(), e.ty.clone())),
                None => Err(self.error(Category::Scope, format!("unbound identifier {n}"))),
            },
            Term::Pi { name, implicit, dom, cod } => {
                let dom = self.check(cx, dom, &Value::Universe)?;
                let dv = self.eval(cx, &dom)?;
                let cod = self.check(&cx.bind(name.clone(), dv), cod, &Value::Universe)?;
                Ok((Rc::new(Term::Pi { name: name.clone(), implicit: *implicit, dom, cod }), Value::Universe))
            }
            Term::Sigma { name, fst, snd } => {
                let fst = self.check(cx, fst, &Value::Universe)?;
                let fv = self.eval(cx, &fst)?;
                let snd = self.check(&cx.bind(name.clone(), fv), snd, &Value::Universe)?;
                Ok((Rc::new(Term::Sigma { name: name.clone(), fst, snd }), Value::Universe))
            }
            Term::Id { ty, lhs, rhs } => {
                if let Term::Hole(h) = &**ty {
                    return self.infer_id_hole(cx, *h, lhs, rhs);
                }
                let ty = self.check(cx, ty, &Value::Universe)?;
                let tv = self.eval(cx, &ty)?;
                let lhs = self.check(cx, lhs, &tv)?;
                let rhs = self.check(cx, rhs, &tv)?;
                Ok((Rc::new(Term::Id { ty, lhs, rhs }), Value::Universe))
            }
            Term::Lam { name, implicit, body } => {
                let (_, a) = self.fresh_meta(cx, None, "the type of a lambda binder");
                let inner = cx.bind(name.clone(), a.clone());
                let (body, bty) = self.infer(&inner, body)?;
                let cod = self.quote(inner.depth(), &bty)?;
                Ok((
                    Rc::new(Term::Lam { name: name.clone(), implicit: *implicit, body }),
                    Value::Pi(name.clone(), *implicit, Rc::new(a), Closure { env: cx.env.clone(), body: cod }),
                ))
            }
            Term::App { fun, arg, implicit } => {
                let (f, fty) = self.infer(cx, fun)?;
                let (f, fty) = if *implicit { (f, fty) } else { self.insert(cx, f, fty)? };
                match self.whnf(&fty)? {
                    Value::Pi(_, i, dom, cod) if i == *implicit => {
                        let a = self.check(cx, arg, &dom)?;
                        self.discharge()?;
                        let av = self.eval(cx, &a)?;
                        let ty = self.instantiate(&cod, av)?;
                        Ok((Rc::new(Term::App { fun: f, arg: a, implicit: *implicit }), ty))
                    }
                    other => Err(self
                        .error(
                            Category::TypeMismatch,
                            if *implicit {
                                "implicit application of a term whose type is not an implicit function type"
                            } else {
                                "application of a term whose type is not a function type"
                            },
                        )
                        .with_forms("a function type".into(), self.show(cx, &other))),
                }
            }
            Term::Pair(a, b) => {
                let (a, aty) = self.infer(cx, a)?;
                let (b, bty) = self.infer(cx, b)?;
                let snd = Term::weaken(&self.quote(cx.depth(), &bty)?, 1);
                Ok((
                    Rc::new(Term::Pair(a, b)),
                    Value::Sigma("_".into(), Rc::new(aty), Closure { env: cx.env.clone(), body: snd }),
                ))
            }
            Term::Proj1(p) | Term::Proj2(p) => {
                let (p, pty) = self.infer(cx, p)?;
                let Value::Sigma(_, fst, snd) = self.whnf(&pty)? else {
                    return Err(self
                        .error(Category::TypeMismatch, "projection from a term whose type is not a Sigma type")
                        .with_forms("a Sigma type".into(), self.show(cx, &pty)));
                };
                if matches!(&**t, Term::Proj1(_)) {
                    Ok((Rc::new(Term::Proj1(p)), (*fst).clone()))
                } else {
                    let pv = self.eval(cx, &p)?;
                    let first = self.ev.proj1(pv).map_err(eval_err)?;
                    Ok((Rc::new(Term::Proj2(p)), self.instantiate(&snd, first)?))
                }
            }
            Term::Prim(p, args) => self.prim(cx, *p, args, None),
            Term::Hole(h) => {
                let (_, ty) = self.fresh_meta(cx, None, "the type of a hole");
                let (m, _) = self.fresh_meta(cx, Some(*h), "a hole");
                Ok((m, ty))
            }
            Term::Meta(_) => Err(self.error(Category::TypeMismatch, "unexpected metavariable in input")),
        }
    }

    /// `a = b` without a type: the hole is solved from `a`, and `b` must
    /// agree with that solution.
    fn infer_id_hole(&self, cx: &Locals, h: u32, lhs: &RcTerm, rhs: &RcTerm) -> R<(RcTerm, Value)> {
        let checkable = |t: &Term| matches!(t, Term::Lam { .. } | Term::Hole(_) | Term::Pair(..));
        let (first, second, swapped) = if checkable(lhs) && !checkable(rhs) { (rhs, lhs, true) } else { (lhs, rhs, false) };
        let (hole, hv) = self.fresh_meta(cx, Some(h), "the type of an equation");
        let (a, aty) = self.infer(cx, first)?;
        let (a, aty) = self.insert(cx, a, aty)?;
        self.unify_or(cx, &hv, &aty, "equation type")?;
        let b = if checkable(second) {
            self.check(cx, second, &hv)?
        } else {
            let (b, bty) = self.infer(cx, second)?;
            let (b, bty) = self.insert(cx, b, bty)?;
            match self.ev.unify(cx.depth(), &bty, &hv) {
                Ok(()) => b,
                Err(UnifyError::Eval(e)) => return Err(eval_err(e)),
                Err(_) => {
                    return Err(self
                        .error(Category::NotConvertible, format!("conflicting solutions for hole ?{h}"))
                        .with_forms(self.show(cx, &hv), self.show(cx, &bty)))
                }
            }
        };
        let (lhs, rhs) = if swapped { (b, a) } else { (a, b) };
        Ok((Rc::new(Term::Id { ty: hole, lhs, rhs }), Value::Universe))
    }

    fn check(&self, cx: &Locals, t: &RcTerm, ty: &Value) -> R<RcTerm> {
        let Some(memo) = &self.memo else { return self.check_fresh(cx, t, ty) };
        if memo.sharing.size(t) < MEMO_MIN_SIZE {
            return self.check_fresh(cx, t, ty);
        }
        // Closed subterms with meta-free elaborations are shared across
        // contexts.
        let closed = memo.sharing.is_closed(t);
        let ctx = |cx: &Locals| cx.env.nodes().next().map_or(0, |(a, _, _)| a);
        let key = (Rc::as_ptr(t) as usize, if closed { 0 } else { ctx(cx) });
        let hit = {
            let table = memo.table.borrow();
            table.get(&key).or_else(|| table.get(&(key.0, ctx(cx)))).map(|e| (e.ty.clone(), e.out.clone()))
        };
        if let Some((seen, out)) = hit {
            // A lambda can have several types, so a mismatch is not final.
            let snap = self.ev.metas.snapshot();
            match self.ev.unify(cx.depth(), &seen, ty) {
                Ok(()) => return Ok(out),
                Err(UnifyError::Eval(e)) => return Err(eval_err(e)),
                Err(_) => self.ev.metas.restore(snap),
            }
        }
        let out = self.check_fresh(cx, t, ty)?;
        let key = if closed && out.contains_holes() { (key.0, ctx(cx)) } else { key };
        if self.ev.settled(ty) && self.ev.settled_term(&out) {
            let entry = MemoEntry { _term: t.clone(), _env: cx.env.clone(), ty: ty.clone(), out: out.clone() };
            memo.table.borrow_mut().insert(key, entry);
        }
        Ok(out)
    }

    fn check_fresh(&self, cx: &Locals, t: &RcTerm, ty: &Value) -> R<RcTerm> {
        let tyw = self.whnf(ty)?;
        match (&**t, &tyw) {
            (Term::Lam { name, implicit, body }, Value::Pi(_, i, dom, cod)) if implicit == i => {
                let inner = cx.bind(name.clone(), (**dom).clone());
                let cv = self.instantiate(cod, Value::var(cx.depth()))?;
                let body = self.check(&inner, body, &cv)?;
                Ok(Rc::new(Term::Lam { name: name.clone(), implicit: *implicit, body }))
            }
            (_, Value::Pi(name, true, dom, cod)) => {
                let inner = cx.bind(name.clone(), (**dom).clone());
                let cv = self.instantiate(cod, Value::var(cx.depth()))?;
                let body = self.check(&inner, &Term::weaken(t, 1), &cv)?;
                Ok(Rc::new(Term::Lam { name: name.clone(), implicit: true, body }))
            }
            (Term::Pair(a, b), Value::Sigma(_, fst, snd)) => {
                let a = self.check(cx, a, fst)?;
                let av = self.eval(cx, &a)?;
                let sv = self.instantiate(snd, av)?;
                let b = self.check(cx, b, &sv)?;
                Ok(Rc::new(Term::Pair(a, b)))
            }
            (Term::Hole(h), _) => Ok(self.fresh_meta(cx, Some(*h), "a hole").0),
            (Term::Prim(p, args), _) => {
                let (e, ety) = self.prim(cx, *p, args, Some(ty))?;
                self.unify_or(cx, ty, &ety, &format!("{} application", p.keyword()))?;
                Ok(e)
            }
            _ => {
                let (e, ety) = self.infer(cx, t)?;
                let (e, ety) = self.insert(cx, e, ety)?;
                self.unify_or(cx, ty, &ety, "term")?;
                Ok(e)
            }
        }
    }

    /// Elaborates a primitive application by instantiating its signature
    /// with metavariables and solving them from the arguments.
    fn prim(&self, cx: &Locals, p: Prim, args: &[RcTerm], expected: Option<&Value>) -> R<(RcTerm, Value)> {
        let Some(sig) = self.sigs.get(p) else {
            return Err(self.error(Category::Scope, format!("{} is not available here", p.keyword())));
        };
        let mut env = crate::value::Env::new();
        let mut explicit: Vec<(Value, Value)> = Vec::new();
        let mut cur = &sig.ty;
        while let Term::Pi { implicit, dom, cod, .. } = &**cur {
            let dv = self.ev.eval(&env, dom).map_err(eval_err)?;
            let hole = match (*implicit, args.get(explicit.len()).map(|a| &**a)) {
                (false, Some(Term::Hole(h))) => Some(*h),
                _ => None,
            };
            let (m, mv) = self.fresh_meta(cx, hole, "an argument of a primitive");
            if *implicit {
                self.oblige(&m, &dv, cx);
            } else {
                explicit.push((dv, mv.clone()));
            }
            env = env.push(mv);
            cur = cod;
        }
        let result = self.ev.eval(&env, cur).map_err(eval_err)?;

        if let Some(exp) = expected {
            let snap = self.ev.metas.snapshot();
            match self.ev.unify(cx.depth(), &result, exp) {
                Ok(()) => {}
                Err(UnifyError::Eval(e)) => return Err(eval_err(e)),
                Err(_) => self.ev.metas.restore(snap),
            }
        }

        let mut out: Vec<Option<RcTerm>> = vec![None; args.len()];
        for _ in 0..args.len() {
            let j = self.next_arg(args, &explicit, &out)?;
            let (dv, mv) = &explicit[j];
            let e = match &*args[j] {
                Term::Hole(_) => self.quote(cx.depth(), mv)?,
                _ => {
                    let e = self.check(cx, &args[j], dv)?;
                    let v = self.eval(cx, &e)?;
                    let what = format!("argument {} of {}", j + 1, p.keyword());
                    self.unify_or(cx, mv, &v, &what)?;
                    self.discharge()?;
                    e
                }
            };
            out[j] = Some(e);
        }
        let args: Vec<RcTerm> = out.into_iter().map(|a| a.expect("every argument elaborated")).collect();
        Ok((Term::prim(p, args), result))
    }

    /// Chooses which primitive argument to elaborate next: arguments whose
    /// expected type is fully known come first, then those whose type is
    /// at least rigid; lambdas go after other arguments of the same class.
    fn next_arg(&self, args: &[RcTerm], explicit: &[(Value, Value)], done: &[Option<RcTerm>]) -> R<usize> {
        let left: Vec<usize> = (0..args.len()).filter(|&j| done[j].is_none()).collect();
        if let [only] = left.as_slice() {
            return Ok(*only);
        }
        let mut rigid = Vec::with_capacity(args.len());
        let mut known = Vec::with_capacity(args.len());
        for (j, (dv, _)) in explicit.iter().enumerate() {
            let forced = self.ev.force(dv).map_err(eval_err)?;
            let flex = matches!(&forced, Value::Neutral(n) if matches!(n.head, Head::Meta(..)));
            rigid.push(done[j].is_none() && !flex);
            let solved = !flex && self.ev.settled(&forced);
            known.push(done[j].is_none() && solved);
        }
        let pending = |j: usize| done[j].is_none();
        let is_lam = |j: usize| matches!(&*args[j], Term::Lam { .. });
        let pick = (0..args.len())
            .find(|&j| known[j] && !is_lam(j))
            .or_else(|| (0..args.len()).find(|&j| known[j]))
            .or_else(|| (0..args.len()).find(|&j| rigid[j] && !is_lam(j)))
            .or_else(|| (0..args.len()).find(|&j| rigid[j]))
            .or_else(|| (0..args.len()).find(|&j| pending(j) && !is_lam(j)))
            .or_else(|| (0..args.len()).find(|&j| pending(j)));
        pick.ok_or_else(|| self.error(Category::TypeMismatch, "no argument left to elaborate"))
    }

    fn oblige(&self, m: &RcTerm, ty: &Value, cx: &Locals) {
        if let Term::Meta(id) = &**m {
            self.obligations.borrow_mut().push((*id, ty.clone(), cx.clone()));
        }
    }

    /// Checks solved implicit arguments against their binder types where
    /// the type of the solution can be read off. Points erased from
    /// primitive applications are often only recoverable this way.
    fn discharge(&self) -> R<()> {
        loop {
            let pending = std::mem::take(&mut *self.obligations.borrow_mut());
            let mut kept = Vec::new();
            let mut progress = false;
            for (m, ty, cx) in pending {
                if !self.ev.metas.is_solved(m) {
                    kept.push((m, ty, cx));
                    continue;
                }
                progress = true;
                let v = self.eval(&cx, &Term::Meta(m))?;
                if let Some(actual) = self.value_type(&cx, &v)? {
                    self.unify_or(&cx, &ty, &actual, "implicit argument")?;
                }
            }
            self.obligations.borrow_mut().extend(kept);
            if !progress {
                return Ok(());
            }
        }
    }

    /// Type of an already elaborated value, when it is headed by a
    /// variable, a global or a primitive with a simple result type.
    fn value_type(&self, cx: &Locals, v: &Value) -> R<Option<Value>> {
        let v = self.ev.force(v).map_err(eval_err)?;
        let global_ty = |n: &str| self.ev.globals.get(n).map(|e| e.ty.clone());
        let (mut cur, mut ty, spine) = match &v {
            Value::Glued(g) => {
                let Some(ty) = global_ty(&g.name) else { return Ok(None) };
                (self.ev.global(&g.name).map_err(eval_err)?, ty, g.spine.clone())
            }
            Value::Neutral(n) => {
                let head = Value::neutral(n.head.clone(), Vec::new());
                let ty = match &n.head {
                    Head::Var(l) => cx.types.get(*l).cloned(),
                    Head::Postulate(p) => global_ty(p),
                    Head::Prim(p, args) => self.prim_type(cx, *p, args)?,
                    Head::Meta(..) => None,
                };
                let Some(ty) = ty else { return Ok(None) };
                (head, ty, n.spine.clone())
            }
            Value::Refl(a) => {
                return Ok(self
                    .value_type(cx, a)?
                    .map(|t| Value::Id(Rc::new(t), a.clone(), a.clone())))
            }
            Value::Const(c) => return Ok(Some(self.const_type(*c)?)),
            Value::Universe | Value::Pi(..) | Value::Sigma(..) | Value::Id(..) => {
                return Ok(Some(Value::Universe))
            }
            _ => return Ok(None),
        };
        for frame in &spine {
            ty = match (self.whnf(&ty)?, frame) {
                (Value::Pi(_, _, _, cod), Frame::App(a, _)) => self.instantiate(&cod, a.clone())?,
                (Value::Sigma(_, fst, _), Frame::Proj1) => (*fst).clone(),
                (Value::Sigma(_, _, snd), Frame::Proj2) => {
                    let first = self.ev.proj1(cur.clone()).map_err(eval_err)?;
                    self.instantiate(&snd, first)?
                }
                _ => return Ok(None),
            };
            cur = self.ev.apply_frame(cur, frame).map_err(eval_err)?;
        }
        Ok(Some(ty))
    }

    fn prim_type(&self, cx: &Locals, p: Prim, args: &[Value]) -> R<Option<Value>> {
        let path = |v: &Value| -> R<Option<(Value, Value, Value)>> {
            Ok(match self.value_type(cx, v)? {
                Some(t) => match self.whnf(&t)? {
                    Value::Id(a, x, y) => Some(((*a).clone(), (*x).clone(), (*y).clone())),
                    _ => None,
                },
                None => None,
            })
        };
        let id = |a: Value, x: Value, y: Value| Some(Value::Id(Rc::new(a), Rc::new(x), Rc::new(y)));
        Ok(match p {
            Prim::Concat => match (path(&args[0])?, path(&args[1])?) {
                (Some((a, x, _)), Some((_, _, z))) => id(a, x, z),
                _ => None,
            },
            Prim::Inv => path(&args[0])?.and_then(|(a, x, y)| id(a, y, x)),
            Prim::Ap => {
                let Some((_, x, y)) = path(&args[1])? else { return Ok(None) };
                let fx = self.ev.apply(args[0].clone(), x.clone(), false).map_err(eval_err)?;
                let fy = self.ev.apply(args[0].clone(), y, false).map_err(eval_err)?;
                // A lambda has no type of its own; fall back to the type of f x.
                let b = match self.value_type(cx, &args[0])? {
                    Some(fty) => match self.whnf(&fty)? {
                        Value::Pi(_, _, _, cod) => Some(self.instantiate(&cod, x)?),
                        _ => None,
                    },
                    None => self.value_type(cx, &fx)?,
                };
                match b {
                    Some(b) => id(b, fx, fy),
                    None => None,
                }
            }
            Prim::CtCong => match (path(&args[0])?, path(&args[1])?) {
                (Some((pa, p, p1)), Some((qa, q, q1))) => match (self.whnf(&pa)?, self.whnf(&qa)?) {
                    (Value::Id(a, x, _), Value::Id(_, _, z)) => {
                        let lhs = self.ev.prim(Prim::Concat, vec![p, q]).map_err(eval_err)?;
                        let rhs = self.ev.prim(Prim::Concat, vec![p1, q1]).map_err(eval_err)?;
                        id(Value::Id(a, x, z), lhs, rhs)
                    }
                    _ => None,
                },
                _ => None,
            },
            Prim::Transport => match path(&args[1])? {
                Some((_, _, y)) => Some(self.ev.apply(args[0].clone(), y, false).map_err(eval_err)?),
                None => None,
            },
            _ => None,
        })
    }

    fn zonk(&self, t: &RcTerm) -> R<RcTerm> {
        zonk(&self.ev, t, 0)
    }

    /// Fails with an unsolved-hole diagnostic if any metavariable remains.
    fn ensure_solved(&self, terms: &[&RcTerm]) -> R<()> {
        let mut left = Vec::new();
        for t in terms {
            metas_in(t, &mut left);
        }
        if left.is_empty() {
            return Ok(());
        }
        let mut holes = Vec::new();
        let mut others = Vec::new();
        for m in &left {
            let e = self.ev.metas.entry(*m);
            match e.hole {
                Some(h) => {
                    let at = e.loc.as_ref().map(|l| format!(" at {l}")).unwrap_or_default();
                    holes.push((h, format!("?{h}{at}"), e.loc));
                }
                None => others.push(e.what),
            }
        }
        holes.sort_by_key(|h| h.0);
        let mut msg = String::new();
        if !holes.is_empty() {
            msg.push_str("unsolved holes: ");
            msg.push_str(&holes.iter().map(|h| h.1.as_str()).collect::<Vec<_>>().join(", "));
        }
        if !others.is_empty() {
            others.dedup();
            if !msg.is_empty() {
                msg.push_str("; ");
            }
            msg.push_str(&format!("could not infer {}", others.join(", ")));
        }
        let loc = holes.iter().find_map(|h| h.2.clone()).unwrap_or_else(|| self.loc.clone());
        Err(Diagnostic::new(Category::UnsolvedHole, msg).at(loc))
    }
}

/// Checks a closed term as a type and returns it zonked.
pub fn check_closed_type(globals: &Globals, sigs: &Signatures, t: &RcTerm, holes: &[Location]) -> R<RcTerm> {
    let metas = MetaStore::new();
    let el = Elab {
        ev: Eval::new(globals, &metas, DEFAULT_STEP_BUDGET),
        sigs,
        holes,
        loc: Location::new("<builtin>", 1, 1),
        obligations: RefCell::default(),
        memo: None,
    };
    let ty = el.check(&Locals::new(), t, &Value::Universe)?;
    el.discharge()?;
    let ty = el.zonk(&ty)?;
    el.ensure_solved(&[&ty])?;
    Ok(ty)
}

/// Result of checking one declaration.
#[derive(Clone, Debug)]
pub enum Outcome {
    Defined { name: Name, ty: RcTerm },
    Postulated { name: Name, ty: RcTerm },
    Checked { term: RcTerm, ty: RcTerm },
    Evaluated { normal: RcTerm, ty: RcTerm },
}

impl Outcome {
    pub fn ty(&self) -> &RcTerm {
        match self {
            Outcome::Defined { ty, .. }
            | Outcome::Postulated { ty, .. }
            | Outcome::Checked { ty, .. }
            | Outcome::Evaluated { ty, .. } => ty,
        }
    }
}

/// Sequential checker owning the growing global environment.
pub struct Checker {
    globals: Rc<Globals>,
    sigs: Rc<Signatures>,
    budget: u64,
    last_steps: u64,
}

impl Checker {
    pub fn new(budget: u64) -> Checker {
        Checker::with_globals(Rc::new(Globals::new()), budget)
    }

    pub fn with_globals(globals: Rc<Globals>, budget: u64) -> Checker {
        Checker { globals, sigs: Signatures::standard(), budget, last_steps: 0 }
    }

    pub fn globals(&self) -> &Rc<Globals> {
        &self.globals
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    /// Reduction steps spent on the last declaration.
    pub fn last_steps(&self) -> u64 {
        self.last_steps
    }

    pub fn check_declaration(&mut self, d: &ResolvedDecl) -> R<Outcome> {
        let label = match &d.name {
            Some(n) => n.clone(),
            None => match d.kind {
                DeclKind::Check => "check".into(),
                _ => "eval".into(),
            },
        };
        let metas = MetaStore::new();
        let (result, steps) = {
            let el = Elab {
                ev: Eval::new(&self.globals, &metas, self.budget),
                sigs: &self.sigs,
                holes: &d.holes,
                loc: d.loc.clone(),
                obligations: RefCell::default(),
                memo: None,
            };
            let r = self.elaborate(&el, d);
            (r, el.ev.steps())
        };
        self.last_steps = steps;
        let (outcome, entry) = result.map_err(|e| e.in_decl(&label))?;
        if let Some(entry) = entry {
            Rc::make_mut(&mut self.globals).insert(entry);
        }
        Ok(outcome)
    }

    fn elaborate(&self, el: &Elab, d: &ResolvedDecl) -> R<(Outcome, Option<GlobalEntry>)> {
        let cx = Locals::new();
        let ty = match &d.ty {
            Some(t) => Some(el.check(&cx, t, &Value::Universe)?),
            None => None,
        };
        match d.kind {
            DeclKind::Def | DeclKind::Postulate => {
                let name: Name = d.name.as_deref().unwrap_or_default().into();
                if self.globals.contains(&name) {
                    return Err(el.error(Category::Scope, format!("{name} is already defined")));
                }
                let ty = ty.expect("declaration has a type");
                let tv = el.eval(&cx, &ty)?;
                let body = match &d.body {
                    Some(b) => Some(el.check(&cx, b, &tv)?),
                    None => None,
                };
                el.discharge()?;
                let ty = el.zonk(&ty)?;
                let body = body.map(|b| el.zonk(&b)).transpose()?;
                match &body {
                    Some(b) => el.ensure_solved(&[&ty, b])?,
                    None => el.ensure_solved(&[&ty])?,
                }
                let tv = el.eval(&cx, &ty)?;
                let def = match &body {
                    Some(b) => Some((b.clone(), el.eval(&cx, b)?)),
                    None => None,
                };
                let outcome = if def.is_some() {
                    Outcome::Defined { name: name.clone(), ty: ty.clone() }
                } else {
                    Outcome::Postulated { name: name.clone(), ty: ty.clone() }
                };
                Ok((outcome, Some(GlobalEntry { name, ty_term: ty, ty: tv, def })))
            }
            DeclKind::Check => {
                let ty = ty.expect("check has a type");
                let tv = el.eval(&cx, &ty)?;
                let body = el.check(&cx, d.body.as_ref().expect("check has a term"), &tv)?;
                el.discharge()?;
                let (ty, term) = (el.zonk(&ty)?, el.zonk(&body)?);
                el.ensure_solved(&[&ty, &term])?;
                Ok((Outcome::Checked { term, ty }, None))
            }
            DeclKind::Eval => {
                let (term, tv) = el.infer(&cx, d.body.as_ref().expect("eval has a term"))?;
                el.discharge()?;
                let ty = el.zonk(&el.quote(0, &tv)?)?;
                let term = el.zonk(&term)?;
                el.ensure_solved(&[&ty, &term])?;
                let normal = el.ev.normalize(&cx.env, &term).map_err(eval_err)?;
                Ok((Outcome::Evaluated { normal, ty }, None))
            }
        }
    }

    /// Re-checks the stored body of a definition against its stored type.
    pub fn recheck(&self, name: &str) -> R<bool> {
        let Some(entry) = self.globals.get(name) else {
            return Err(Diagnostic::new(Category::Scope, format!("unbound identifier {name}")));
        };
        let Some((body, _)) = &entry.def else { return Ok(true) };
        self.check_term(body, &entry.ty)
    }

    /// Checks an elaborated closed term against a type, without holes.
    pub fn check_term(&self, body: &RcTerm, ty: &Value) -> R<bool> {
        self.check_terms(&[(body.clone(), ty.clone())]).remove(0)
    }

    /// Checks several closed terms against their types. Identical
    /// subterms met in the same context are checked once for the whole
    /// batch; the step budget also covers the whole batch.
    pub fn check_terms(&self, items: &[(RcTerm, Value)]) -> Vec<R<bool>> {
        let metas = MetaStore::new();
        let mut sharing = Sharing::new();
        let bodies: Vec<RcTerm> = items.iter().map(|(b, _)| sharing.share(b)).collect();
        let el = Elab {
            ev: Eval::new(&self.globals, &metas, self.budget),
            sigs: &self.sigs,
            holes: &[],
            loc: Location::new("<recheck>", 1, 1),
            obligations: RefCell::default(),
            memo: Some(Memo { sharing: &sharing, table: RefCell::default() }),
        };
        let one = |body: &RcTerm, ty: &Value| -> R<bool> {
            el.obligations.borrow_mut().clear();
            let b = el.check(&Locals::new(), body, ty)?;
            el.discharge()?;
            Ok(!el.zonk(&b)?.contains_holes())
        };
        bodies.iter().zip(items).map(|(body, (_, ty))| one(body, ty)).collect()
    }

    /// Definitional equality of two closed, elaborated terms.
    pub fn convertible(&self, a: &RcTerm, b: &RcTerm) -> R<bool> {
        let metas = MetaStore::new();
        let ev = Eval::new(&self.globals, &metas, self.budget);
        let env = crate::value::Env::new();
        let va = ev.eval(&env, a).map_err(eval_err)?;
        let vb = ev.eval(&env, b).map_err(eval_err)?;
        ev.conv(0, &va, &vb).map_err(eval_err)
    }

    /// Full normal form of a closed, elaborated term.
    pub fn normalize(&self, t: &RcTerm) -> R<RcTerm> {
        let metas = MetaStore::new();
        let ev = Eval::new(&self.globals, &metas, self.budget);
        ev.normalize(&crate::value::Env::new(), t).map_err(eval_err)
    }

    /// Elaborates a closed term in inference mode, for `eval -e`.
    pub fn infer_closed(&self, t: &RcTerm, holes: &[Location]) -> R<(RcTerm, RcTerm)> {
        let metas = MetaStore::new();
        let el = Elab {
            ev: Eval::new(&self.globals, &metas, self.budget),
            sigs: &self.sigs,
            holes,
            loc: Location::new("<expr>", 1, 1),
            obligations: RefCell::default(),
            memo: None,
        };
        let (term, tv) = el.infer(&Locals::new(), t)?;
        el.discharge()?;
        let ty = el.zonk(&el.quote(0, &tv)?)?;
        let term = el.zonk(&term)?;
        el.ensure_solved(&[&ty, &term])?;
        Ok((term, ty))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::Session;

    fn infer(s: &str) -> R<String> {
        Session::new(DEFAULT_STEP_BUDGET).eval_expr(s).map(|(_, ty)| print_term(&ty, &[]))
    }

    fn check(src: &str) -> Option<Category> {
        Session::new(DEFAULT_STEP_BUDGET).check_source("t.hott", src).error.map(|d| d.category)
    }

    #[test]
    fn infers_path_types() {
        assert_eq!(infer("refl base").unwrap(), "Id S1 base base");
        assert_eq!(infer("loop @ inv loop").unwrap(), "Id S1 base base");
        assert_eq!(infer("Tt").unwrap(), "Id (Id T2 Tb Tb) (Tp @ Tq) (Tq @ Tp)");
        assert_eq!(infer("ap (fun x => (x, x)) loop").unwrap(), "Id (Sig (x : S1), S1) (base, base) (base, base)");
    }

    #[test]
    fn holes_are_solved_from_the_type() {
        assert_eq!(check("def a : Id S1 base base := refl _\n"), None);
        assert_eq!(check("def b : Id _ base base := loop\n"), None);
        assert_eq!(check("def c : Id S1 base base := _\n"), Some(Category::UnsolvedHole));
    }

    #[test]
    fn rejections_are_categorised() {
        assert_eq!(check("def a : S1 := Tb\n"), Some(Category::TypeMismatch));
        let src = "def a : Id (Id S1 base base) loop (refl base) := refl loop\n";
        assert_eq!(check(src), Some(Category::NotConvertible));
        assert_eq!(check("def a : S1 := loop\n"), Some(Category::TypeMismatch));
        assert!(check("def a : Id S1 base base := refl Tb\n").is_some());
    }

    #[test]
    fn implicit_binders() {
        let src = "def sym {A : Type} {x y : A} (p : Id A x y) : Id A y x := inv p\n\
                   def back : Id S1 base base := sym loop\n\
                   def explicit : Id S1 base base := sym {S1} {base} {base} loop\n";
        assert_eq!(check(src), None);
    }

    #[test]
    fn batch_results_follow_input_order() {
        let mut s = Session::new(DEFAULT_STEP_BUDGET);
        assert!(s.check_source("t.hott", "def u : S1 := base\n").ok());
        let c = &s.checker;
        let metas = MetaStore::new();
        let ev = Eval::new(c.globals(), &metas, DEFAULT_STEP_BUDGET);
        let circle = ev.eval(&Env::new(), &Term::constant(Const::Circle)).unwrap();
        let torus = ev.eval(&Env::new(), &Term::constant(Const::Torus)).unwrap();
        let items = vec![
            (Term::constant(Const::Base), circle.clone()),
            (Term::constant(Const::Base), torus),
            (Rc::new(Term::Global("u".into())), circle),
        ];
        let r = c.check_terms(&items);
        assert_eq!(r.len(), 3);
        assert!(matches!(r[0], Ok(true)));
        assert!(r[1].is_err());
        assert!(matches!(r[2], Ok(true)));
    }

    #[test]
    fn convertible_unfolds_definitions() {
        let mut s = Session::new(DEFAULT_STEP_BUDGET);
        let r = s.check_source("t.hott", "def two : Sig (x : S1), S1 := (base, base)\n");
        assert!(r.ok(), "{:?}", r.error);
        let c = &s.checker;
        let g = Rc::new(Term::Global("two".into()));
        let p = Rc::new(Term::Pair(Term::constant(Const::Base), Term::constant(Const::Base)));
        assert!(c.convertible(&g, &p).unwrap());
        assert!(!c.convertible(&g, &Term::constant(Const::Base)).unwrap());
    }
}
