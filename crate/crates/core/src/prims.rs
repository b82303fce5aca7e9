//! Typing signatures of the primitive term formers.
//!
//! Each signature is a closed type written in surface syntax. Binders in
//! braces are recovered by unification at every use; the remaining
//! binders are the stored arguments, in order.

use std::collections::HashMap;
use std::rc::Rc;

use crate::context::Globals;
use crate::diagnostic::{Category, Diagnostic};
use crate::kernel;
use crate::surface::{parse_expr, resolve_expr, tokenize};
use crate::term::{Prim, RcTerm, Term};

const TORUS_CELLS: &str = "(C : Type) (b : C) (p q : Id C b b) (t : Id (Id C b b) (p @ q) (q @ p))";

const TORUS_IND_CELLS: &str = "(E : T2 -> Type) (b : E Tb) \
     (p : Id (E Tb) (transport E Tp b) b) (q : Id (E Tb) (transport E Tq b) b) \
     (t : Id (Id (E Tb) (transport E (Tq @ Tp) b) b) \
        (inv (ap (fun a => transport E a b) Tt) \
           @ ((transport-concat E Tp Tq b @ ap (fun u => transport E Tq u) p) @ q)) \
        ((transport-concat E Tq Tp b @ ap (fun u => transport E Tp u) q) @ p))";

/// Surface source of the signature of `p`.
pub fn source(p: Prim) -> String {
    match p {
        Prim::Refl => "{A : Type} (a : A) -> Id A a a".into(),
        Prim::J => "{A : Type} (E : (x y : A) -> Id A x y -> Type) (d : (x : A) -> E x x (refl x)) \
                    (a b : A) (p : Id A a b) -> E a b p"
            .into(),
        Prim::Concat => "{A : Type} {x y z : A} (p : Id A x y) (q : Id A y z) -> Id A x z".into(),
        Prim::Inv => "{A : Type} {x y : A} (p : Id A x y) -> Id A y x".into(),
        Prim::Transport => "{A : Type} {x y : A} (P : A -> Type) (p : Id A x y) (u : P x) -> P y".into(),
        Prim::Ap => "{A B : Type} {x y : A} (f : A -> B) (p : Id A x y) -> Id B (f x) (f y)".into(),
        Prim::Apd => "{A : Type} {B : A -> Type} {x y : A} (f : (z : A) -> B z) (p : Id A x y) \
                      -> Id (B y) (transport B p (f x)) (f y)"
            .into(),
        Prim::ApConcat => "{A B : Type} {x y z : A} (f : A -> B) (p : Id A x y) (q : Id A y z) \
                           -> Id (Id B (f x) (f z)) (ap f (p @ q)) (ap f p @ ap f q)"
            .into(),
        Prim::CtCong => "{A : Type} {x y z : A} {p p' : Id A x y} {q q' : Id A y z} \
                         (beta : Id (Id A x y) p p') (gamma : Id (Id A y z) q q') \
                         -> Id (Id A x z) (p @ q) (p' @ q')"
            .into(),
        Prim::TransportConcat => "{A : Type} {x y z : A} (P : A -> Type) (p : Id A x y) (q : Id A y z) (u : P x) \
                                  -> Id (P z) (transport P (p @ q) u) (transport P q (transport P p u))"
            .into(),
        Prim::CircleRec => "(C : Type) (b : C) (l : Id C b b) (x : S1) -> C".into(),
        Prim::CircleRecBeta => {
            "(C : Type) (b : C) (l : Id C b b) -> Id (Id C b b) (ap (S1-rec C b l) loop) l".into()
        }
        Prim::CircleInd => "(E : S1 -> Type) (b : E base) (l : Id (E base) (transport E loop b) b) (x : S1) -> E x".into(),
        Prim::CircleIndBeta => "(E : S1 -> Type) (b : E base) (l : Id (E base) (transport E loop b) b) \
                                -> Id (Id (E base) (transport E loop b) b) (apd (S1-ind E b l) loop) l"
            .into(),
        Prim::TorusRec => format!("{TORUS_CELLS} (x : T2) -> C"),
        Prim::TorusRecBetaP => format!("{TORUS_CELLS} -> Id (Id C b b) (ap (T2-rec C b p q t) Tp) p"),
        Prim::TorusRecBetaQ => format!("{TORUS_CELLS} -> Id (Id C b b) (ap (T2-rec C b p q t) Tq) q"),
        Prim::TorusRecBetaT => {
            let f = "(T2-rec C b p q t)";
            let bp = "(T2-rec-beta-p C b p q t)";
            let bq = "(T2-rec-beta-q C b p q t)";
            format!(
                "{TORUS_CELLS} -> Id (Id (Id C b b) (ap {f} (Tp @ Tq)) (q @ p)) \
                 ((ap-concat {f} Tp Tq @ ct-cong {bp} {bq}) @ t) \
                 ((ap (fun r => ap {f} r) Tt @ ap-concat {f} Tq Tp) @ ct-cong {bq} {bp})"
            )
        }
        Prim::TorusInd => format!("{TORUS_IND_CELLS} (x : T2) -> E x"),
        Prim::TorusIndBetaP => format!(
            "{TORUS_IND_CELLS} -> Id (Id (E Tb) (transport E Tp b) b) (apd (T2-ind E b p q t) Tp) p"
        ),
        Prim::TorusIndBetaQ => format!(
            "{TORUS_IND_CELLS} -> Id (Id (E Tb) (transport E Tq b) b) (apd (T2-ind E b p q t) Tq) q"
        ),
    }
}

pub struct Signature {
    pub prim: Prim,
    /// Elaborated closed Pi type.
    pub ty: RcTerm,
    /// Implicitness of each binder of the telescope.
    pub binders: Vec<bool>,
}

#[derive(Default)]
pub struct Signatures {
    table: HashMap<Prim, Signature>,
}

impl Signatures {
    pub fn get(&self, p: Prim) -> Option<&Signature> {
        self.table.get(&p)
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Parses and checks every signature as a closed type. A primitive's
    /// signature may only mention primitives earlier in [`Prim::ALL`].
    pub fn build() -> Result<Signatures, Diagnostic> {
        let mut sigs = Signatures::default();
        let globals = Globals::new();
        for &p in Prim::ALL.iter() {
            let src = source(p);
            let file = format!("<signature of {}>", p.keyword());
            let toks = tokenize(&file, &src)?;
            let expr = parse_expr(&file, &toks)?;
            let (term, holes) = resolve_expr(&expr, &|_| false)?;
            let ty = kernel::check_closed_type(&globals, &sigs, &term, &holes)
                .map_err(|d| d.in_decl(p.keyword()))?;
            let mut binders = Vec::new();
            let mut cur = &ty;
            while let Term::Pi { implicit, cod, .. } = &**cur {
                binders.push(*implicit);
                cur = cod;
            }
            let explicit = binders.iter().filter(|i| !**i).count();
            if explicit != p.arity() {
                return Err(Diagnostic::new(
                    Category::TypeMismatch,
                    format!("signature has {explicit} explicit binders, expected {}", p.arity()),
                )
                .in_decl(p.keyword()));
            }
            sigs.table.insert(p, Signature { prim: p, ty, binders });
        }
        Ok(sigs)
    }

    /// The checked table, built once per thread.
    pub fn standard() -> Rc<Signatures> {
        thread_local! {
            static SIGS: Rc<Signatures> =
                Rc::new(Signatures::build().unwrap_or_else(|d| panic!("primitive signatures are ill-typed: {d}")));
        }
        SIGS.with(|s| s.clone())
    }
}
