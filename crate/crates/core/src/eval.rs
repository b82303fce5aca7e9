//! Evaluation, forcing and read-back.

use std::cell::Cell;
use std::rc::Rc;

use crate::context::{Globals, MetaStore, Solution};
use crate::term::{Const, MetaId, Prim, RcTerm, Term};
use crate::value::{Closure, Env, Frame, Glued, Head, Level, Value};

pub const DEFAULT_STEP_BUDGET: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("reduction exceeded the step budget of {0} steps")]
    StepBudget(u64),
    #[error("internal evaluator error: {0}")]
    Internal(String),
}

pub type EResult<T> = Result<T, EvalError>;

pub struct Eval<'a> {
    pub globals: &'a Globals,
    pub metas: &'a MetaStore,
    steps: Cell<u64>,
    budget: u64,
}

fn internal<T>(msg: impl Into<String>) -> EResult<T> {
    Err(EvalError::Internal(msg.into()))
}

/// Positions of the arguments a primitive inspects before reducing.
pub fn principal_args(p: Prim) -> &'static [usize] {
    match p {
        Prim::J => &[4],
        Prim::Concat => &[0, 1],
        Prim::Inv => &[0],
        Prim::Transport => &[1],
        Prim::Ap | Prim::Apd => &[1],
        Prim::ApConcat => &[1, 2],
        Prim::CtCong => &[0, 1],
        Prim::TransportConcat => &[1, 2],
        Prim::CircleRec | Prim::CircleInd => &[3],
        Prim::TorusRec | Prim::TorusInd => &[5],
        Prim::Refl
        | Prim::CircleRecBeta
        | Prim::CircleIndBeta
        | Prim::TorusRecBetaP
        | Prim::TorusRecBetaQ
        | Prim::TorusRecBetaT
        | Prim::TorusIndBetaP
        | Prim::TorusIndBetaQ => &[],
    }
}

impl<'a> Eval<'a> {
    pub fn new(globals: &'a Globals, metas: &'a MetaStore, budget: u64) -> Eval<'a> {
        Eval { globals, metas, steps: Cell::new(0), budget }
    }

    pub fn steps(&self) -> u64 {
        self.steps.get()
    }

    fn tick(&self) -> EResult<()> {
        let n = self.steps.get() + 1;
        self.steps.set(n);
        if n > self.budget {
            return Err(EvalError::StepBudget(self.budget));
        }
        Ok(())
    }

    pub fn eval(&self, env: &Env, t: &Term) -> EResult<Value> {
        self.tick()?;
        Ok(match t {
            Term::Var(i) => match env.get(*i) {
                Some(v) => v.clone(),
                None => return internal(format!("unbound index {i} at depth {}", env.len())),
            },
            Term::Universe => Value::Universe,
            Term::Const(c) => Value::Const(*c),
            Term::Pi { name, implicit, dom, cod } => Value::Pi(
                name.clone(),
                *implicit,
                Rc::new(self.eval(env, dom)?),
                Closure { env: env.clone(), body: cod.clone() },
            ),
            Term::Lam { name, implicit, body } => {
                Value::Lam(name.clone(), *implicit, Closure { env: env.clone(), body: body.clone() })
            }
            Term::App { fun, arg, implicit } => {
                let f = self.eval(env, fun)?;
                let a = self.eval(env, arg)?;
                self.apply(f, a, *implicit)?
            }
            Term::Sigma { name, fst, snd } => Value::Sigma(
                name.clone(),
                Rc::new(self.eval(env, fst)?),
                Closure { env: env.clone(), body: snd.clone() },
            ),
            Term::Pair(a, b) => Value::Pair(Rc::new(self.eval(env, a)?), Rc::new(self.eval(env, b)?)),
            Term::Proj1(p) => {
                let p = self.eval(env, p)?;
                self.proj1(p)?
            }
            Term::Proj2(p) => {
                let p = self.eval(env, p)?;
                self.proj2(p)?
            }
            Term::Id { ty, lhs, rhs } => Value::Id(
                Rc::new(self.eval(env, ty)?),
                Rc::new(self.eval(env, lhs)?),
                Rc::new(self.eval(env, rhs)?),
            ),
            Term::Prim(p, args) => {
                let vals = args.iter().map(|a| self.eval(env, a)).collect::<EResult<Vec<_>>>()?;
                self.prim(*p, vals)?
            }
            Term::Global(name) => self.global(name)?,
            Term::Hole(h) => return internal(format!("hole {h} reached the evaluator")),
            Term::Meta(m) => self.meta(env, *m)?,
        })
    }

    pub fn global(&self, name: &str) -> EResult<Value> {
        let Some(entry) = self.globals.get(name) else {
            return internal(format!("unknown global {name}"));
        };
        Ok(match &entry.def {
            Some((_, v)) => Value::Glued(Rc::new(Glued {
                name: entry.name.clone(),
                def: v.clone(),
                spine: Vec::new(),
                unfolded: Default::default(),
            })),
            None => Value::neutral(Head::Postulate(entry.name.clone()), Vec::new()),
        })
    }

    fn meta(&self, env: &Env, m: MetaId) -> EResult<Value> {
        let depth = self.metas.depth(m);
        let prefix = env.prefix(depth);
        match self.solved_meta(&prefix, m)? {
            Some(v) => Ok(v),
            None => Ok(Value::neutral(Head::Meta(m, prefix), Vec::new())),
        }
    }

    /// Value of a solved meta in `env`, which must have the meta's depth.
    fn solved_meta(&self, env: &Env, m: MetaId) -> EResult<Option<Value>> {
        match self.metas.solution(m) {
            Some(Solution::Value(e, v, _)) if e.ptr_eq(env) => Ok(Some(v)),
            Some(_) => {
                let t = self.meta_term(m)?.expect("meta is solved");
                Ok(Some(self.eval(env, &t)?))
            }
            None => Ok(None),
        }
    }

    /// The solution of `m` as a term in the meta's own context.
    pub fn meta_term(&self, m: MetaId) -> EResult<Option<RcTerm>> {
        match self.metas.solution(m) {
            None => Ok(None),
            Some(Solution::Term(t)) => Ok(Some(t)),
            Some(Solution::Value(_, v, cell)) => {
                if let Some(t) = cell.get() {
                    return Ok(Some(t.clone()));
                }
                let t = self.quote(self.metas.depth(m), &v, false)?;
                let _ = cell.set(t.clone());
                Ok(Some(t))
            }
        }
    }

    pub fn instantiate(&self, clo: &Closure, v: Value) -> EResult<Value> {
        self.eval(&clo.env.push(v), &clo.body)
    }

    fn push_frame(&self, v: &Value, frame: Frame) -> Option<Value> {
        match v {
            Value::Neutral(n) => {
                let mut spine = n.spine.clone();
                spine.push(frame);
                Some(Value::neutral(n.head.clone(), spine))
            }
            Value::Glued(g) => {
                let mut spine = g.spine.clone();
                spine.push(frame);
                Some(Value::Glued(Rc::new(Glued {
                    name: g.name.clone(),
                    def: g.def.clone(),
                    spine,
                    unfolded: Default::default(),
                })))
            }
            _ => None,
        }
    }

    pub fn apply(&self, f: Value, a: Value, implicit: bool) -> EResult<Value> {
        match &f {
            Value::Lam(_, _, clo) => self.instantiate(clo, a),
            _ => match self.push_frame(&f, Frame::App(a, implicit)) {
                Some(v) => Ok(v),
                None => internal(format!("applying a non-function {f:?}")),
            },
        }
    }

    pub fn proj1(&self, p: Value) -> EResult<Value> {
        match &p {
            Value::Pair(a, _) => Ok((**a).clone()),
            _ => match self.push_frame(&p, Frame::Proj1) {
                Some(v) => Ok(v),
                None => internal(format!("projecting from a non-pair {p:?}")),
            },
        }
    }

    pub fn proj2(&self, p: Value) -> EResult<Value> {
        match &p {
            Value::Pair(_, b) => Ok((**b).clone()),
            _ => match self.push_frame(&p, Frame::Proj2) {
                Some(v) => Ok(v),
                None => internal(format!("projecting from a non-pair {p:?}")),
            },
        }
    }

    pub fn apply_frame(&self, v: Value, frame: &Frame) -> EResult<Value> {
        match frame {
            Frame::App(a, i) => self.apply(v, a.clone(), *i),
            Frame::Proj1 => self.proj1(v),
            Frame::Proj2 => self.proj2(v),
        }
    }

    pub fn apply_spine(&self, mut v: Value, spine: &[Frame]) -> EResult<Value> {
        for f in spine {
            v = self.apply_frame(v, f)?;
        }
        Ok(v)
    }

    pub fn unfold(&self, g: &Glued) -> EResult<Value> {
        if let Some(v) = g.unfolded.get() {
            return Ok(v.clone());
        }
        let v = self.apply_spine(g.def.clone(), &g.spine)?;
        let _ = g.unfolded.set(v.clone());
        Ok(v)
    }

    /// True if re-running this neutral could make progress because a
    /// metavariable it is blocked on has since been solved.
    fn meta_blocked(&self, v: &Value) -> bool {
        match v {
            Value::Neutral(n) => match &n.head {
                Head::Meta(m, _) => self.metas.is_solved(*m),
                Head::Prim(p, args) => principal_args(*p).iter().any(|&i| self.meta_blocked(&args[i])),
                _ => false,
            },
            _ => false,
        }
    }

    /// Resolves solved metavariables at the head, without unfolding
    /// definitions.
    pub fn force(&self, v: &Value) -> EResult<Value> {
        let mut cur = v.clone();
        loop {
            let next = match &cur {
                Value::Neutral(n) if self.meta_blocked(&cur) => match &n.head {
                    Head::Meta(m, env) => {
                        let h = self.solved_meta(env, *m)?.expect("blocked meta is solved");
                        self.apply_spine(h, &n.spine)?
                    }
                    Head::Prim(p, args) => {
                        let args = args.iter().map(|a| self.force(a)).collect::<EResult<Vec<_>>>()?;
                        let h = self.prim(*p, args)?;
                        self.apply_spine(h, &n.spine)?
                    }
                    _ => unreachable!("only meta and prim heads block"),
                },
                _ => return Ok(cur),
            };
            cur = next;
        }
    }

    /// Weak head normal form: forces metas and unfolds definitions.
    pub fn whnf(&self, v: &Value) -> EResult<Value> {
        let mut cur = self.force(v)?;
        while let Value::Glued(g) = &cur {
            let next = self.unfold(g)?;
            cur = self.force(&next)?;
        }
        Ok(cur)
    }

    fn refl_point(&self, v: &Value) -> EResult<Option<Value>> {
        Ok(match self.whnf(v)? {
            Value::Refl(a) => Some((*a).clone()),
            _ => None,
        })
    }

    fn is_const(&self, v: &Value, c: Const) -> EResult<bool> {
        Ok(matches!(self.whnf(v)?, Value::Const(k) if k == c))
    }

    /// Applies a primitive to evaluated explicit arguments, reducing by its
    /// definitional rule when the principal arguments allow.
    pub fn prim(&self, p: Prim, args: Vec<Value>) -> EResult<Value> {
        let stuck = |args: Vec<Value>| Ok(Value::stuck_prim(p, args));
        match p {
            Prim::Refl => Ok(Value::Refl(Rc::new(args[0].clone()))),
            Prim::J => match self.refl_point(&args[4])? {
                Some(_) => self.apply(args[1].clone(), args[2].clone(), false),
                None => stuck(args),
            },
            Prim::Transport => match self.refl_point(&args[1])? {
                Some(_) => Ok(args[2].clone()),
                None => stuck(args),
            },
            Prim::Ap | Prim::Apd => match self.refl_point(&args[1])? {
                Some(a) => Ok(Value::Refl(Rc::new(self.apply(args[0].clone(), a, false)?))),
                None => stuck(args),
            },
            Prim::Inv => match self.refl_point(&args[0])? {
                Some(_) => Ok(args[0].clone()),
                None => stuck(args),
            },
            Prim::Concat => {
                if let Some(a) = self.refl_point(&args[0])? {
                    if self.refl_point(&args[1])?.is_some() {
                        return Ok(Value::Refl(Rc::new(a)));
                    }
                }
                stuck(args)
            }
            Prim::ApConcat => {
                if let Some(a) = self.refl_point(&args[1])? {
                    if self.refl_point(&args[2])?.is_some() {
                        let fa = self.apply(args[0].clone(), a, false)?;
                        return Ok(Value::Refl(Rc::new(Value::Refl(Rc::new(fa)))));
                    }
                }
                stuck(args)
            }
            Prim::CtCong => {
                if let Some(p0) = self.refl_point(&args[0])? {
                    if let Some(q0) = self.refl_point(&args[1])? {
                        let c = self.prim(Prim::Concat, vec![p0, q0])?;
                        return Ok(Value::Refl(Rc::new(c)));
                    }
                }
                stuck(args)
            }
            Prim::TransportConcat => {
                if self.refl_point(&args[1])?.is_some() && self.refl_point(&args[2])?.is_some() {
                    return Ok(Value::Refl(Rc::new(args[3].clone())));
                }
                stuck(args)
            }
            Prim::CircleRec | Prim::CircleInd => {
                if self.is_const(&args[3], Const::Base)? {
                    Ok(args[1].clone())
                } else {
                    stuck(args)
                }
            }
            Prim::TorusRec | Prim::TorusInd => {
                if self.is_const(&args[5], Const::TB)? {
                    Ok(args[1].clone())
                } else {
                    stuck(args)
                }
            }
            Prim::CircleRecBeta
            | Prim::CircleIndBeta
            | Prim::TorusRecBetaP
            | Prim::TorusRecBetaQ
            | Prim::TorusRecBetaT
            | Prim::TorusIndBetaP
            | Prim::TorusIndBetaQ => stuck(args),
        }
    }

    /// Reads a value back as a term at `depth`. With `unfold`, definitions
    /// are expanded and the result is a full normal form; otherwise global
    /// references are kept by name.
    pub fn quote(&self, depth: usize, v: &Value, unfold: bool) -> EResult<RcTerm> {
        self.tick()?;
        let v = self.force(v)?;
        Ok(match &v {
            Value::Universe => Rc::new(Term::Universe),
            Value::Const(c) => Term::constant(*c),
            Value::Pi(name, implicit, dom, cod) => Rc::new(Term::Pi {
                name: name.clone(),
                implicit: *implicit,
                dom: self.quote(depth, dom, unfold)?,
                cod: self.quote_closure(depth, cod, unfold)?,
            }),
            Value::Lam(name, implicit, body) => Rc::new(Term::Lam {
                name: name.clone(),
                implicit: *implicit,
                body: self.quote_closure(depth, body, unfold)?,
            }),
            Value::Sigma(name, fst, snd) => Rc::new(Term::Sigma {
                name: name.clone(),
                fst: self.quote(depth, fst, unfold)?,
                snd: self.quote_closure(depth, snd, unfold)?,
            }),
            Value::Pair(a, b) => {
                Rc::new(Term::Pair(self.quote(depth, a, unfold)?, self.quote(depth, b, unfold)?))
            }
            Value::Id(a, x, y) => Rc::new(Term::Id {
                ty: self.quote(depth, a, unfold)?,
                lhs: self.quote(depth, x, unfold)?,
                rhs: self.quote(depth, y, unfold)?,
            }),
            Value::Refl(a) => Term::prim(Prim::Refl, vec![self.quote(depth, a, unfold)?]),
            Value::Neutral(n) => {
                let head = self.quote_head(depth, &n.head, unfold)?;
                self.quote_spine(depth, head, &n.spine, unfold)?
            }
            Value::Glued(g) => {
                if unfold {
                    let u = self.unfold(g)?;
                    self.quote(depth, &u, unfold)?
                } else {
                    self.quote_spine(depth, Rc::new(Term::Global(g.name.clone())), &g.spine, unfold)?
                }
            }
        })
    }

    pub fn quote_closure(&self, depth: usize, clo: &Closure, unfold: bool) -> EResult<RcTerm> {
        let body = self.instantiate(clo, Value::var(depth))?;
        self.quote(depth + 1, &body, unfold)
    }

    fn quote_head(&self, depth: usize, head: &Head, unfold: bool) -> EResult<RcTerm> {
        Ok(match head {
            Head::Var(l) => Term::var(level_to_index(depth, *l)?),
            Head::Meta(m, _) => Rc::new(Term::Meta(*m)),
            Head::Postulate(n) => Rc::new(Term::Global(n.clone())),
            Head::Prim(p, args) => Term::prim(
                *p,
                args.iter().map(|a| self.quote(depth, a, unfold)).collect::<EResult<Vec<_>>>()?,
            ),
        })
    }

    fn quote_spine(&self, depth: usize, mut head: RcTerm, spine: &[Frame], unfold: bool) -> EResult<RcTerm> {
        for f in spine {
            head = match f {
                Frame::App(a, implicit) => Rc::new(Term::App {
                    fun: head,
                    arg: self.quote(depth, a, unfold)?,
                    implicit: *implicit,
                }),
                Frame::Proj1 => Rc::new(Term::Proj1(head)),
                Frame::Proj2 => Rc::new(Term::Proj2(head)),
            };
        }
        Ok(head)
    }

    /// Full normal form of a closed-over term.
    pub fn normalize(&self, env: &Env, t: &Term) -> EResult<RcTerm> {
        let v = self.eval(env, t)?;
        self.quote(env.len(), &v, true)
    }
}

pub fn level_to_index(depth: usize, level: Level) -> EResult<usize> {
    if level < depth {
        Ok(depth - 1 - level)
    } else {
        internal(format!("level {level} escapes depth {depth}"))
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::Const;

    fn base() -> RcTerm {
        Term::constant(Const::Base)
    }

    fn with_eval<T>(budget: u64, f: impl FnOnce(&Eval) -> T) -> T {
        let g = Globals::new();
        let ms = MetaStore::new();
        f(&Eval::new(&g, &ms, budget))
    }

    #[test]
    fn beta() {
        let t = Term::app(Term::lam("x", Term::var(0)), base());
        let n = with_eval(100, |ev| ev.normalize(&Env::new(), &t)).unwrap();
        assert_eq!(n, base());
    }

    #[test]
    fn budget_stops_self_application() {
        let w = Term::lam("x", Term::app(Term::var(0), Term::var(0)));
        let omega = Term::app(w.clone(), w);
        let r = with_eval(1000, |ev| ev.eval(&Env::new(), &omega).map(|_| ()));
        assert_eq!(r, Err(EvalError::StepBudget(1000)));
    }

    #[test]
    fn transport_along_loop_is_stuck() {
        let fam = Term::lam("x", Term::constant(Const::Circle));
        let t = Term::prim(Prim::Transport, vec![fam, Term::constant(Const::Loop), base()]);
        let n = with_eval(100, |ev| ev.normalize(&Env::new(), &t)).unwrap();
        assert_eq!(n, t);
    }

    #[test]
    fn transport_along_refl_computes() {
        let fam = Term::lam("x", Term::constant(Const::Circle));
        let t = Term::prim(Prim::Transport, vec![fam, Term::prim(Prim::Refl, vec![base()]), base()]);
        let n = with_eval(100, |ev| ev.normalize(&Env::new(), &t)).unwrap();
        assert_eq!(n, base());
    }

    #[test]
    fn open_terms_keep_their_variables() {
        let env = Env::new().push(Value::var(0)).push(Value::var(1));
        let t = Term::app(Term::lam("y", Term::var(1)), Term::var(0));
        let n = with_eval(100, |ev| ev.normalize(&env, &t)).unwrap();
        assert_eq!(n, Term::var(0));
        let n = with_eval(100, |ev| ev.normalize(&env, &Term::var(1))).unwrap();
        assert_eq!(n, Term::var(1));
    }

    #[test]
    fn solved_meta_by_value() {
        let g = Globals::new();
        let ms = MetaStore::new();
        let ev = Eval::new(&g, &ms, 100);
        let m = ms.fresh(0, None, None, "test");
        ms.solve_value(m, Env::new(), Value::Const(Const::Loop));
        let n = ev.normalize(&Env::new(), &Term::Meta(m)).unwrap();
        assert_eq!(n, Term::constant(Const::Loop));
        assert_eq!(ev.meta_term(m).unwrap(), Some(Term::constant(Const::Loop)));
    }

    #[test]
    fn levels_and_indices() {
        assert_eq!(level_to_index(3, 0), Ok(2));
        assert_eq!(level_to_index(3, 2), Ok(0));
        assert!(level_to_index(3, 3).is_err());
    }
}
