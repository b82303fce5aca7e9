//! Semantic domain for normalization by evaluation.
//!
//! Variables in values are de Bruijn *levels*. Definitions are kept
//! glued: a reference to a global carries its name and spine alongside a
//! lazily computed unfolding, so conversion can compare names first.

use std::cell::OnceCell;
use std::fmt;
use std::rc::Rc;

use crate::term::{Const, MetaId, Name, Prim, RcTerm};

pub type Level = usize;

/// Persistent list of values, innermost binder first.
#[derive(Clone, Default)]
pub struct Env(Option<Rc<EnvNode>>);

struct EnvNode {
    value: Value,
    next: Env,
    len: usize,
}

impl Env {
    pub fn new() -> Env {
        Env(None)
    }

    pub fn len(&self) -> usize {
        self.0.as_ref().map_or(0, |n| n.len)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_none()
    }

    pub fn push(&self, value: Value) -> Env {
        Env(Some(Rc::new(EnvNode { value, next: self.clone(), len: self.len() + 1 })))
    }

    /// Value of de Bruijn index `i`.
    pub fn get(&self, i: usize) -> Option<&Value> {
        let mut cur = self;
        for _ in 0..i {
            cur = &cur.0.as_ref()?.next;
        }
        cur.0.as_ref().map(|n| &n.value)
    }

    /// The outermost `n` entries.
    pub fn prefix(&self, n: usize) -> Env {
        let mut cur = self;
        let mut drop = self.len().saturating_sub(n);
        while drop > 0 {
            cur = &cur.0.as_ref().expect("length checked").next;
            drop -= 1;
        }
        cur.clone()
    }

    /// Entries from outermost to innermost.
    pub fn to_vec(&self) -> Vec<Value> {
        let mut out = Vec::with_capacity(self.len());
        let mut cur = self;
        while let Some(n) = &cur.0 {
            out.push(n.value.clone());
            cur = &n.next;
        }
        out.reverse();
        out
    }

    /// Entries from innermost to outermost.
    pub fn iter(&self) -> impl Iterator<Item = &Value> {
        let mut cur = self;
        std::iter::from_fn(move || {
            let n = cur.0.as_ref()?;
            cur = &n.next;
            Some(&n.value)
        })
    }

    /// Nodes from innermost to outermost, as address, reference count and
    /// entry.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize, &Value)> {
        let mut cur = self;
        std::iter::from_fn(move || {
            let n = cur.0.as_ref()?;
            cur = &n.next;
            Some((Rc::as_ptr(n) as *const () as usize, Rc::strong_count(n), &n.value))
        })
    }

    pub fn ptr_eq(&self, other: &Env) -> bool {
        match (&self.0, &other.0) {
            (None, None) => true,
            (Some(a), Some(b)) => Rc::ptr_eq(a, b),
            _ => false,
        }
    }
}

#[derive(Clone)]
pub struct Closure {
    pub env: Env,
    pub body: RcTerm,
}

#[derive(Clone)]
pub enum Head {
    Var(Level),
    /// Metavariable applied to the environment prefix it was created in.
    Meta(MetaId, Env),
    Postulate(Name),
    /// A primitive whose principal arguments are not canonical enough to
    /// reduce. Arguments are kept exactly as received.
    Prim(Prim, Rc<[Value]>),
}

#[derive(Clone)]
pub enum Frame {
    App(Value, bool),
    Proj1,
    Proj2,
}

pub struct Neutral {
    pub head: Head,
    pub spine: Vec<Frame>,
}

pub struct Glued {
    pub name: Name,
    pub def: Value,
    pub spine: Vec<Frame>,
    pub unfolded: OnceCell<Value>,
}

#[derive(Clone)]
pub enum Value {
    Universe,
    Pi(Name, bool, Rc<Value>, Closure),
    Lam(Name, bool, Closure),
    Sigma(Name, Rc<Value>, Closure),
    Pair(Rc<Value>, Rc<Value>),
    Id(Rc<Value>, Rc<Value>, Rc<Value>),
    Refl(Rc<Value>),
    Const(Const),
    Neutral(Rc<Neutral>),
    Glued(Rc<Glued>),
}

impl Value {
    pub fn var(level: Level) -> Value {
        Value::Neutral(Rc::new(Neutral { head: Head::Var(level), spine: Vec::new() }))
    }

    pub fn neutral(head: Head, spine: Vec<Frame>) -> Value {
        Value::Neutral(Rc::new(Neutral { head, spine }))
    }

    pub fn stuck_prim(p: Prim, args: Vec<Value>) -> Value {
        Value::neutral(Head::Prim(p, args.into()), Vec::new())
    }

    pub fn as_var(&self) -> Option<Level> {
        match self {
            Value::Neutral(n) if n.spine.is_empty() => match n.head {
                Head::Var(l) => Some(l),
                _ => None,
            },
            _ => None,
        }
    }

    /// Cheap identity check used as a conversion fast path.
    pub fn ptr_eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Neutral(a), Value::Neutral(b)) => Rc::ptr_eq(a, b),
            (Value::Glued(a), Value::Glued(b)) => Rc::ptr_eq(a, b),
            (Value::Universe, Value::Universe) => true,
            (Value::Const(a), Value::Const(b)) => a == b,
            _ => false,
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Universe => f.write_str("Type"),
            Value::Pi(n, i, _, _) => write!(f, "Pi({n}, implicit={i}, ..)"),
            Value::Lam(n, _, _) => write!(f, "Lam({n}, ..)"),
            Value::Sigma(n, _, _) => write!(f, "Sigma({n}, ..)"),
            Value::Pair(a, b) => write!(f, "Pair({a:?}, {b:?})"),
            Value::Id(a, x, y) => write!(f, "Id({a:?}, {x:?}, {y:?})"),
            Value::Refl(a) => write!(f, "Refl({a:?})"),
            Value::Const(c) => f.write_str(c.keyword()),
            Value::Neutral(n) => {
                match &n.head {
                    Head::Var(l) => write!(f, "#{l}")?,
                    Head::Meta(m, _) => write!(f, "?{}", m.0)?,
                    Head::Postulate(p) => write!(f, "{p}")?,
                    Head::Prim(p, args) => write!(f, "{}{:?}", p.keyword(), args)?,
                }
                write!(f, "[{} frames]", n.spine.len())
            }
            Value::Glued(g) => write!(f, "{}[{} frames]", g.name, g.spine.len()),
        }
    }
}
