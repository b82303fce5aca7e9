//! Normalizer and conversion properties on the shipped corpus.

use pathcheck_core::corpus::{self, Corpus, SpotCheck, MAPS_NAME, PRELUDE_NAME};
use pathcheck_core::driver::Session;
use pathcheck_core::eval::DEFAULT_STEP_BUDGET;
use pathcheck_core::kernel::Checker;
use pathcheck_core::term::{Name, Term};

fn maps_session() -> Session {
    let c = Corpus::standard().unwrap();
    let mut s = Session::new(DEFAULT_STEP_BUDGET);
    for file in [PRELUDE_NAME, MAPS_NAME] {
        let r = s.check_source(file, c.source(file).unwrap());
        assert!(r.error.is_none(), "{file}: {:?}", r.error);
    }
    s
}

#[test]
fn normal_forms_of_prelude_and_maps() {
    let s = maps_session();
    let names: Vec<Name> = s.globals().names().to_vec();
    let mut out = SpotCheck::default();
    corpus::check_normal_forms(&s, &names, &mut out);
    assert!(out.definitions >= 40, "{}", out.definitions);
    assert!(out.not_idempotent.is_empty(), "{:?}", out.not_idempotent);
    assert!(out.not_preserved.is_empty(), "{:?}", out.not_preserved);
}

#[test]
fn conversion_is_an_equivalence_on_samples() {
    let s = maps_session();
    let mut out = SpotCheck::default();
    corpus::check_conversion(&s, &mut out);
    assert!(out.pairs >= 100, "{}", out.pairs);
    assert!(out.conv_failures.is_empty(), "{:?}", out.conv_failures);
}

#[test]
fn samples_are_closed_and_distinct() {
    let s = maps_session();
    let sample = corpus::sample_subterms(&s, 50, 400);
    assert_eq!(sample.len(), 50);
    for (i, t) in sample.iter().enumerate() {
        assert_eq!(t.scope_depth(), 0);
        assert!(sample[..i].iter().all(|u| u != t));
    }
}

#[test]
fn wrong_type_is_not_preserved() {
    let s = maps_session();
    let g = s.globals();
    let checker = Checker::with_globals(g.clone(), DEFAULT_STEP_BUDGET);
    let body = g.get("H-base").unwrap().def.clone().unwrap().0;
    let n = checker.normalize(&body).unwrap();
    // refl Tq does not have the type of the loop at base after f.
    let other = g.get("beta-f").unwrap().ty.clone();
    assert!(checker.check_term(&n, &other).is_err());
    let own = g.get("H-base").unwrap().ty.clone();
    assert_eq!(checker.check_term(&n, &own), Ok(true));
}

#[test]
fn batch_results_line_up_with_inputs() {
    let s = maps_session();
    let g = s.globals();
    let checker = Checker::with_globals(g.clone(), DEFAULT_STEP_BUDGET);
    let hb = g.get("H-base").unwrap();
    let bf = g.get("beta-f").unwrap();
    let items = vec![
        (hb.def.clone().unwrap().0, hb.ty.clone()),
        (hb.def.clone().unwrap().0, bf.ty.clone()),
        (bf.def.clone().unwrap().0, bf.ty.clone()),
    ];
    let r = checker.check_terms(&items);
    assert_eq!(r[0], Ok(true));
    assert!(r[1].is_err());
    assert_eq!(r[2], Ok(true));
}

#[test]
fn tt_is_a_stuck_two_cell() {
    let s = maps_session();
    let checker = Checker::with_globals(s.globals().clone(), DEFAULT_STEP_BUDGET);
    let tt = Term::constant(pathcheck_core::term::Const::TT);
    let n = checker.normalize(&tt).unwrap();
    assert_eq!(*n, *tt);
    let (refl_pq, _) = s.eval_expr("refl (Tp @ Tq)").unwrap();
    assert_eq!(checker.convertible(&tt, &refl_pq), Ok(false));
}
