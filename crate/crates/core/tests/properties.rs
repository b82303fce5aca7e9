//! Structural invariants of terms, over randomly generated terms.

use std::rc::Rc;

use proptest::prelude::*;

use pathcheck_core::print::print_term;
use pathcheck_core::surface::{parse_expr, resolve_expr, tokenize};
use pathcheck_core::term::{Const, Name, Prim, RcTerm, Term};

const GLOBALS: [&str; 3] = ["f", "concat-assoc", "x'"];
const HINTS: [&str; 4] = ["x", "y", "p", "f"];

fn name() -> impl Strategy<Value = Name> {
    prop::sample::select(&HINTS[..]).prop_map(Name::from)
}

fn leaf(depth: usize) -> BoxedStrategy<RcTerm> {
    let mut options: Vec<BoxedStrategy<RcTerm>> = vec![
        Just(Rc::new(Term::Universe)).boxed(),
        prop::sample::select(&Const::ALL[..]).prop_map(Term::constant).boxed(),
        prop::sample::select(&GLOBALS[..]).prop_map(|g| Rc::new(Term::Global(g.into()))).boxed(),
    ];
    if depth > 0 {
        options.push((0..depth).prop_map(Term::var).boxed());
    }
    prop::strategy::Union::new(options).boxed()
}

/// Terms whose free variables are all below `depth`.
fn term(depth: usize, fuel: u32) -> BoxedStrategy<RcTerm> {
    if fuel == 0 {
        return leaf(depth);
    }
    let sub = move |d: usize| term(d, fuel - 1);
    prop_oneof![
        2 => leaf(depth),
        1 => (name(), any::<bool>(), sub(depth), sub(depth + 1))
            .prop_map(|(name, implicit, dom, cod)| Rc::new(Term::Pi { name, implicit, dom, cod })),
        1 => (name(), any::<bool>(), sub(depth + 1))
            .prop_map(|(name, implicit, body)| Rc::new(Term::Lam { name, implicit, body })),
        2 => (sub(depth), sub(depth), any::<bool>())
            .prop_map(|(fun, arg, implicit)| Rc::new(Term::App { fun, arg, implicit })),
        1 => (name(), sub(depth), sub(depth + 1))
            .prop_map(|(name, fst, snd)| Rc::new(Term::Sigma { name, fst, snd })),
        1 => (sub(depth), sub(depth)).prop_map(|(a, b)| Rc::new(Term::Pair(a, b))),
        1 => sub(depth).prop_map(|a| Rc::new(Term::Proj1(a))),
        1 => sub(depth).prop_map(|a| Rc::new(Term::Proj2(a))),
        1 => (sub(depth), sub(depth), sub(depth))
            .prop_map(|(ty, lhs, rhs)| Rc::new(Term::Id { ty, lhs, rhs })),
        2 => prop::sample::select(&Prim::ALL[..]).prop_flat_map(move |p| {
            prop::collection::vec(sub(depth), p.arity()).prop_map(move |args| Term::prim(p, args))
        }),
    ]
    .boxed()
}

fn reparse(text: &str) -> RcTerm {
    let toks = tokenize("t", text).unwrap_or_else(|d| panic!("{text}: {d}"));
    let e = parse_expr("t", &toks).unwrap_or_else(|d| panic!("{text}: {d}"));
    let (t, _) = resolve_expr(&e, &|n| GLOBALS.contains(&n)).unwrap_or_else(|d| panic!("{text}: {d}"));
    t
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn shift_by_zero_is_identity(t in term(3, 4), cutoff in 0usize..4) {
        prop_assert_eq!(Term::shift(&t, 0, cutoff).unwrap(), t);
    }

    #[test]
    fn shifts_cancel(t in term(3, 4), by in 0usize..3, cutoff in 0usize..4) {
        let up = Term::shift(&t, by as isize, cutoff).unwrap();
        prop_assert_eq!(Term::shift(&up, -(by as isize), cutoff).unwrap(), t);
    }

    #[test]
    fn substituting_into_a_weakened_term_is_identity(t in term(3, 4), u in term(3, 2)) {
        prop_assert_eq!(Term::subst(&Term::weaken(&t, 1), &u, 0), t);
    }

    #[test]
    fn substitution_removes_the_variable(t in term(2, 4)) {
        let closed = Rc::new(Term::Const(Const::Base));
        let s = Term::subst(&t, &closed, 0);
        prop_assert!(s.scope_depth() <= 1);
    }

    #[test]
    fn printed_terms_parse_back(t in term(0, 4)) {
        let text = print_term(&t, &[]);
        prop_assert_eq!(reparse(&text), t, "{}", text);
    }

    #[test]
    fn printing_with_free_names(t in term(2, 3)) {
        let names: Vec<Name> = vec!["a".into(), "b".into()];
        let text = print_term(&t, &names);
        let wrapped = format!("fun a => fun b => {text}");
        let back = reparse(&wrapped);
        let want = Term::lam("a", Term::lam("b", t));
        prop_assert_eq!(back, want, "{}", wrapped);
    }
}
