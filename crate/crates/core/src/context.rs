//! Global environment of checked declarations, and the metavariable store
//! used while elaborating a single declaration.

use std::cell::{OnceCell, RefCell};
use std::collections::HashMap;
use std::rc::Rc;

use crate::diagnostic::Location;
use crate::term::{MetaId, Name, RcTerm};
use crate::value::{Env, Value};

pub struct GlobalEntry {
    pub name: Name,
    pub ty_term: RcTerm,
    pub ty: Value,
    /// `None` for postulates.
    pub def: Option<(RcTerm, Value)>,
}

impl GlobalEntry {
    pub fn is_postulate(&self) -> bool {
        self.def.is_none()
    }
}

/// Immutable snapshot; extending returns a new snapshot.
#[derive(Clone, Default)]
pub struct Globals {
    map: HashMap<Name, Rc<GlobalEntry>>,
    order: Vec<Name>,
}

impl Globals {
    pub fn new() -> Globals {
        Globals::default()
    }

    pub fn get(&self, name: &str) -> Option<&Rc<GlobalEntry>> {
        self.map.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.map.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Names in declaration order.
    pub fn names(&self) -> &[Name] {
        &self.order
    }

    pub fn extend(&self, entry: GlobalEntry) -> Globals {
        let mut next = self.clone();
        next.insert(entry);
        next
    }

    pub fn insert(&mut self, entry: GlobalEntry) {
        let name = entry.name.clone();
        if self.map.insert(name.clone(), Rc::new(entry)).is_none() {
            self.order.push(name);
        }
    }

    /// Every postulate reachable from `name` through definitions and types.
    pub fn postulates_used_by(&self, name: &str) -> Vec<Name> {
        let mut seen: Vec<Name> = Vec::new();
        let mut postulates = Vec::new();
        let mut stack: Vec<Name> = vec![name.into()];
        while let Some(n) = stack.pop() {
            if seen.contains(&n) {
                continue;
            }
            seen.push(n.clone());
            let Some(e) = self.get(&n) else { continue };
            if e.is_postulate() {
                postulates.push(n.clone());
            }
            stack.extend(e.ty_term.globals());
            if let Some((body, _)) = &e.def {
                stack.extend(body.globals());
            }
        }
        postulates.sort();
        postulates
    }
}

#[derive(Clone)]
pub enum Solution {
    Term(RcTerm),
    /// A value living in the meta's own context, whose environment was
    /// `env`: the identity on bound variables. The term is read back on
    /// first demand.
    Value(Env, Value, Rc<OnceCell<RcTerm>>),
}

#[derive(Clone)]
pub struct MetaEntry {
    /// Depth of the local context the meta was created in.
    pub depth: usize,
    pub solution: Option<Solution>,
    pub loc: Option<Location>,
    /// Surface hole id if the meta came from a `_`.
    pub hole: Option<u32>,
    pub what: &'static str,
}

#[derive(Default)]
pub struct MetaStore {
    entries: RefCell<Vec<MetaEntry>>,
    /// Every solution write, with the value it replaced.
    trail: RefCell<Vec<(u32, Option<Solution>)>>,
}

/// Position in the solution trail of a [`MetaStore`].
#[derive(Clone, Copy, Debug)]
pub struct Snapshot(usize);

impl MetaStore {
    pub fn new() -> MetaStore {
        MetaStore::default()
    }

    pub fn fresh(&self, depth: usize, loc: Option<Location>, hole: Option<u32>, what: &'static str) -> MetaId {
        let mut e = self.entries.borrow_mut();
        e.push(MetaEntry { depth, solution: None, loc, hole, what });
        MetaId(e.len() as u32 - 1)
    }

    pub fn depth(&self, m: MetaId) -> usize {
        self.entries.borrow()[m.0 as usize].depth
    }

    pub fn solution(&self, m: MetaId) -> Option<Solution> {
        self.entries.borrow().get(m.0 as usize).and_then(|e| e.solution.clone())
    }

    pub fn is_solved(&self, m: MetaId) -> bool {
        self.entries.borrow().get(m.0 as usize).is_some_and(|e| e.solution.is_some())
    }

    pub fn solve(&self, m: MetaId, t: RcTerm) {
        self.write(m, Solution::Term(t));
    }

    pub fn solve_value(&self, m: MetaId, env: Env, v: Value) {
        self.write(m, Solution::Value(env, v, Rc::new(OnceCell::new())));
    }

    fn write(&self, m: MetaId, sol: Solution) {
        let old = self.entries.borrow_mut()[m.0 as usize].solution.replace(sol);
        self.trail.borrow_mut().push((m.0, old));
    }

    pub fn entry(&self, m: MetaId) -> MetaEntry {
        self.entries.borrow()[m.0 as usize].clone()
    }

    pub fn len(&self) -> usize {
        self.entries.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot(self.trail.borrow().len())
    }

    /// Undoes every solution written since `snap`; metas created since
    /// then are left in place but unsolved.
    pub fn restore(&self, snap: Snapshot) {
        let mut trail = self.trail.borrow_mut();
        let mut e = self.entries.borrow_mut();
        while trail.len() > snap.0 {
            let (m, old) = trail.pop().expect("trail is longer than the snapshot");
            e[m as usize].solution = old;
        }
    }

    pub fn unsolved(&self) -> Vec<(MetaId, MetaEntry)> {
        self.entries
            .borrow()
            .iter()
            .enumerate()
            .filter(|(_, e)| e.solution.is_none())
            .map(|(i, e)| (MetaId(i as u32), e.clone()))
            .collect()
    }
}

/// Local typing context: a telescope of bound variables.
#[derive(Clone, Default)]
pub struct Locals {
    pub env: Env,
    pub names: Vec<Name>,
    pub types: Vec<Value>,
}

impl Locals {
    pub fn new() -> Locals {
        Locals::default()
    }

    pub fn depth(&self) -> usize {
        self.names.len()
    }

    /// Extends with a fresh variable of type `ty`.
    pub fn bind(&self, name: Name, ty: Value) -> Locals {
        let level = self.depth();
        let mut next = self.clone();
        next.env = self.env.push(Value::var(level));
        next.names.push(name);
        next.types.push(ty);
        next
    }

    /// Type of de Bruijn index `i`.
    pub fn type_of(&self, i: usize) -> Option<&Value> {
        let d = self.depth();
        if i < d {
            self.types.get(d - 1 - i)
        } else {
            None
        }
    }
}

/// The checking context handed to the kernel: globals plus locals.
#[derive(Clone, Default)]
pub struct Context {
    pub globals: Rc<Globals>,
    pub locals: Locals,
}

impl Context {
    pub fn new(globals: Rc<Globals>) -> Context {
        Context { globals, locals: Locals::new() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{Const, Term};

    fn entry(name: &str, ty: RcTerm, body: Option<RcTerm>) -> GlobalEntry {
        GlobalEntry { name: name.into(), ty_term: ty, ty: Value::Universe, def: body.map(|b| (b, Value::Universe)) }
    }

    fn global(n: &str) -> RcTerm {
        Rc::new(Term::Global(n.into()))
    }

    #[test]
    fn restore_undoes_solutions() {
        let ms = MetaStore::new();
        let a = ms.fresh(0, None, None, "a");
        let snap = ms.snapshot();
        ms.solve(a, Term::constant(Const::Base));
        let b = ms.fresh(0, None, None, "b");
        ms.solve_value(b, Env::new(), Value::Const(Const::Loop));
        assert!(ms.is_solved(a) && ms.is_solved(b));
        ms.restore(snap);
        assert!(!ms.is_solved(a) && !ms.is_solved(b));
        assert_eq!(ms.len(), 2);
        assert_eq!(ms.unsolved().len(), 2);
    }

    #[test]
    fn nested_snapshots() {
        let ms = MetaStore::new();
        let a = ms.fresh(0, None, None, "a");
        let b = ms.fresh(0, None, None, "b");
        ms.solve(a, Term::constant(Const::Base));
        let snap = ms.snapshot();
        ms.solve(b, Term::constant(Const::Base));
        ms.restore(snap);
        assert!(ms.is_solved(a));
        assert!(!ms.is_solved(b));
    }

    #[test]
    fn postulate_walk_follows_types_and_bodies() {
        let mut g = Globals::new();
        g.insert(entry("ax", Rc::new(Term::Universe), None));
        g.insert(entry("ty-ax", Rc::new(Term::Universe), None));
        g.insert(entry("unused", Rc::new(Term::Universe), None));
        g.insert(entry("d", global("ty-ax"), Some(global("ax"))));
        g.insert(entry("top", Rc::new(Term::Universe), Some(Term::app(global("d"), global("d")))));
        let got: Vec<String> = g.postulates_used_by("top").iter().map(|n| n.to_string()).collect();
        assert_eq!(got, ["ax", "ty-ax"]);
        assert_eq!(g.postulates_used_by("ax").len(), 1);
    }

    #[test]
    fn extend_leaves_the_original() {
        let g = Globals::new();
        let h = g.extend(entry("x", Rc::new(Term::Universe), None));
        assert!(g.is_empty());
        assert!(h.contains("x"));
        assert_eq!(h.names().len(), 1);
    }
}
