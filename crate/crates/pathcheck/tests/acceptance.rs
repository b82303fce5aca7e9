//! Acceptance run: one PASS or FAIL line per criterion. Time limits are
//! pinned below; a criterion that misses its limit fails.

use std::path::PathBuf;
use std::process::{Command, ExitCode, Output};
use std::time::{Duration, Instant};

use pathcheck_core::corpus::{self, Corpus, ALLOWED_POSTULATES, PRELUDE, PRELUDE_MIN_DECLS, SAMPLE_COUNT};
use pathcheck_core::driver::Session;
use pathcheck_core::eval::DEFAULT_STEP_BUDGET;
use pathcheck_core::print::print_term;

const RULES_LIMIT: Duration = Duration::from_secs(1);
const LOOP_LIMIT: Duration = Duration::from_secs(1);
const PRELUDE_LIMIT: Duration = Duration::from_secs(5);
const THEOREM_LIMIT: Duration = Duration::from_secs(60);
const NEGATIVE_LIMIT: Duration = Duration::from_secs(5);
const SPOT_LIMIT: Duration = Duration::from_secs(30);
const MIN_NEGATIVES: usize = 6;
const MIN_PAIRS: usize = 100;

const WITNESSES: &str = "
postulate E1 : S1 -> Type
postulate e1 : E1 base
postulate l1 : Id (E1 base) (transport E1 loop e1) e1
postulate E2 : T2 -> Type
postulate e2 : E2 Tb
postulate p2 : Id (E2 Tb) (transport E2 Tp e2) e2
postulate q2 : Id (E2 Tb) (transport E2 Tq e2) e2
postulate t2 : Id (Id (E2 Tb) (transport E2 (Tq @ Tp) e2) e2)
  (inv (ap (fun a => transport E2 a e2) Tt) @ ((transport-concat E2 Tp Tq e2 @ ap (fun u => transport E2 Tq u) p2) @ q2))
  ((transport-concat E2 Tq Tp e2 @ ap (fun u => transport E2 Tp u) q2) @ p2)
def f : S1 -> T2 := S1-rec T2 Tb Tp
";

const RULES: [(&str, &str); 13] = [
    ("J (fun x y p => Id S1 y x) (fun x => refl x) base base (refl base)", "refl base"),
    ("transport (fun x => Id S1 x base) (refl base) loop", "loop"),
    ("ap f (refl base)", "refl Tb"),
    ("apd f (refl base)", "refl Tb"),
    ("concat (refl base) (refl base)", "refl base"),
    ("inv (refl Tb)", "refl Tb"),
    ("ap-concat f (refl base) (refl base)", "refl (refl Tb)"),
    ("ct-cong (refl (refl base)) (refl (refl base))", "refl (refl base)"),
    ("transport-concat (fun x => Id S1 x base) (refl base) (refl base) loop", "refl loop"),
    ("S1-rec T2 Tb Tp base", "Tb"),
    ("S1-ind E1 e1 l1 base", "e1"),
    ("T2-rec S1 base loop loop (refl (loop @ loop)) Tb", "base"),
    ("T2-ind E2 e2 p2 q2 t2 Tb", "e2"),
];

struct Outcome {
    ok: bool,
    detail: String,
}

fn pass(detail: String) -> Outcome {
    Outcome { ok: true, detail }
}

fn fail(detail: String) -> Outcome {
    Outcome { ok: false, detail }
}

fn within(limit: Duration, took: Duration, mut o: Outcome) -> Outcome {
    o.detail = format!("{}; {:.2}s (limit {}s)", o.detail, took.as_secs_f64(), limit.as_secs());
    o.ok &= took < limit;
    o
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let o = f();
    within(limit, start.elapsed(), o)
}

fn corpus_file(file: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(file).display().to_string()
}

fn pathcheck(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pathcheck")).args(args).output().expect("binary runs")
}

fn full_run(format: &str) -> Output {
    let files: Vec<String> = ["prelude.hott", "torus_maps.hott", "torus_equiv.hott"].iter().map(|f| corpus_file(f)).collect();
    let mut args = vec!["check", "--format", format];
    args.extend(files.iter().map(String::as_str));
    pathcheck(&args)
}

fn witness_session() -> Result<Session, String> {
    let mut s = Session::new(DEFAULT_STEP_BUDGET);
    if let Some(d) = s.check_source("prelude.hott", PRELUDE).error {
        return Err(d.to_string());
    }
    if let Some(d) = s.check_source("witnesses.hott", WITNESSES).error {
        return Err(d.to_string());
    }
    Ok(s)
}

fn computation_rules() -> Outcome {
    let s = match witness_session() {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let mut wrong = Vec::new();
    for (e, want) in RULES {
        match s.eval_expr(e) {
            Ok((n, _)) if print_term(&n, &[]) == want => {}
            Ok((n, _)) => wrong.push(format!("{e} ~> {}", print_term(&n, &[]))),
            Err(d) => wrong.push(format!("{e}: {d}")),
        }
    }
    if wrong.is_empty() {
        pass(format!("{} rule instances exact", RULES.len()))
    } else {
        fail(wrong.join(" | "))
    }
}

fn loop_is_propositional() -> Outcome {
    let s = match witness_session() {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let term = |e: &str| s.eval_expr(e).map(|(t, _)| t).map_err(|d| d.to_string());
    let conv = match (term("ap f loop"), term("Tp")) {
        (Ok(a), Ok(b)) => s.checker.convertible(&a, &b).map_err(|d| d.to_string()),
        (Err(e), _) | (_, Err(e)) => Err(e),
    };
    let mut t = s.fork();
    let beta = t.check_source("beta.hott", "def w : Id (Id T2 Tb Tb) (ap f loop) Tp := S1-rec-beta T2 Tb Tp\n");
    let refl = t.check_source("refl.hott", "def v : Id (Id T2 Tb Tb) (ap f loop) Tp := refl Tp\n");
    match conv {
        Ok(false) if beta.ok() && !refl.ok() => {
            pass("ap f loop is not convertible to Tp; S1-rec-beta inhabits the path type".into())
        }
        other => fail(format!("conv {other:?}, beta ok {}, refl rejected {}", beta.ok(), !refl.ok())),
    }
}

fn prelude_accepted() -> Outcome {
    let o = pathcheck(&["check", &corpus_file("prelude.hott")]);
    let c = match Corpus::standard() {
        Ok(c) => c,
        Err(d) => return fail(d.to_string()),
    };
    let mut s = Session::new(DEFAULT_STEP_BUDGET);
    let r = c.verify_prelude(&mut s);
    let exports = c.manifest.entry(corpus::PRELUDE_NAME).map_or(0, |e| e.exports.len());
    let detail = format!(
        "exit {:?}, {} declarations accepted (at least {PRELUDE_MIN_DECLS}), {exports} manifest exports",
        o.status.code(),
        r.accepted()
    );
    if o.status.code() == Some(0) && r.ok() && r.accepted() >= PRELUDE_MIN_DECLS {
        pass(detail)
    } else {
        fail(format!("{detail}; {:?}", r.problems))
    }
}

fn theorem() -> Outcome {
    let o = full_run("text");
    let out = String::from_utf8_lossy(&o.stdout).into_owned();
    let last = out.lines().last().unwrap_or_default().to_string();
    let want = ["EVAL F (base, base) ~> Tb", "EVAL G Tb ~> (base, base)", "EVAL H base ~> Tq", "EVAL epsilon base ~> refl (base, base)"];
    let missing: Vec<&str> = want.iter().copied().filter(|w| !out.lines().any(|l| l == *w)).collect();
    let staged = Corpus::standard().map(|c| c.verify_all().1.iter().all(|r| r.ok())).unwrap_or(false);
    let detail = format!("exit {:?}, last line `{last}`", o.status.code());
    if o.status.code() == Some(0) && last == "OK torus-equiv : Equiv (Prod S1 S1) T2" && missing.is_empty() && staged {
        pass(format!("{detail}, 4 basepoint evals, manifest stages clean"))
    } else {
        fail(format!("{detail}, missing evals {missing:?}, stages clean {staged}"))
    }
}

fn negatives() -> Outcome {
    let c = match Corpus::standard() {
        Ok(c) => c,
        Err(d) => return fail(d.to_string()),
    };
    let results = c.run_negative_suite();
    let bad: Vec<String> =
        results.iter().filter(|r| !r.passed()).map(|r| format!("{}: got {:?}", r.file, r.got)).collect();
    let detail = format!("{} of {} files rejected as annotated", results.len() - bad.len(), results.len());
    if bad.is_empty() && results.len() >= MIN_NEGATIVES {
        pass(detail)
    } else {
        fail(format!("{detail}; {}", bad.join(", ")))
    }
}

fn spot_checks(session: &Session) -> Outcome {
    let r = corpus::spot_check(session);
    let detail = format!(
        "{} definitions idempotent and preserved, {} conversion pairs (from {SAMPLE_COUNT} samples)",
        r.definitions, r.pairs
    );
    if r.ok() && r.pairs >= MIN_PAIRS {
        pass(detail)
    } else {
        fail(format!(
            "{detail}; not idempotent {:?}, not preserved {:?}, conversion {:?}",
            r.not_idempotent, r.not_preserved, r.conv_failures
        ))
    }
}

fn determinism() -> Outcome {
    let a = full_run("json-lines");
    let b = full_run("json-lines");
    let lines = a.stdout.iter().filter(|&&c| c == b'\n').count();
    if a.status.code() == Some(0) && a.stdout == b.stdout && a.stderr == b.stderr {
        pass(format!("two runs, {lines} json lines, byte-identical"))
    } else {
        fail(format!("exit {:?}, stdout equal {}", a.status.code(), a.stdout == b.stdout))
    }
}

fn audit(session: &Session) -> Outcome {
    let mut got = corpus::postulate_audit(session);
    got.sort();
    if got == ALLOWED_POSTULATES {
        pass(format!("{got:?}"))
    } else {
        fail(format!("reached {got:?}, expected {ALLOWED_POSTULATES:?}"))
    }
}

fn main() -> ExitCode {
    let verified = Corpus::standard().map(|c| c.verify_all());
    let session = match &verified {
        Ok((s, stages)) if stages.iter().all(|r| r.ok()) => Some(s),
        _ => None,
    };
    let need = |name: &str, f: &dyn Fn(&Session) -> Outcome| match session {
        Some(s) => f(s),
        None => fail(format!("corpus did not verify, cannot run {name}")),
    };
    let results = [
        ("computation rules", timed(RULES_LIMIT, computation_rules)),
        ("loop rule is propositional", timed(LOOP_LIMIT, loop_is_propositional)),
        ("prelude", timed(PRELUDE_LIMIT, prelude_accepted)),
        ("full theorem", timed(THEOREM_LIMIT, theorem)),
        ("negative suite", timed(NEGATIVE_LIMIT, negatives)),
        ("metatheory spot-checks", timed(SPOT_LIMIT, || need("spot-checks", &spot_checks))),
        ("determinism", determinism()),
        ("postulate audit", need("audit", &audit)),
    ];
    let mut all = true;
    for (i, (name, o)) in results.iter().enumerate() {
        println!("{} {}. {name}: {}", if o.ok { "PASS" } else { "FAIL" }, i + 1, o.detail);
        all &= o.ok;
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
