//! The shipped corpus and the harness that runs it against its manifest.

use std::path::{Path, PathBuf};
use std::rc::Rc;

use crate::diagnostic::{Category, Diagnostic};
use crate::driver::{Report, Session};
use crate::kernel::Checker;
use crate::term::{Name, RcTerm, Term};
use crate::eval::DEFAULT_STEP_BUDGET;
use crate::print::print_term;
use crate::surface::DeclKind;

/// File name of the prelude, which the CLI loads implicitly.
pub const PRELUDE_NAME: &str = "prelude.hott";

pub const PRELUDE: &str = include_str!("../../../corpus/prelude.hott");

pub const MAPS_NAME: &str = "torus_maps.hott";
pub const EQUIV_NAME: &str = "torus_equiv.hott";

/// Least number of declarations the prelude must export.
pub const PRELUDE_MIN_DECLS: usize = 25;

/// Name of the final theorem.
pub const THEOREM: &str = "torus-equiv";

/// Postulates the final theorem is allowed to rest on.
pub const ALLOWED_POSTULATES: [&str; 4] = ["S1-is-1type", "funext", "funext-hap", "hap-funext"];

/// Directory of the shipped corpus in the source tree.
pub fn default_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expect {
    Accept,
    Reject(Category),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Export {
    pub name: String,
    pub ty: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalExpect {
    pub expr: String,
    pub normal: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub path: String,
    pub expect: Expect,
    pub exports: Vec<Export>,
    pub evals: Vec<EvalExpect>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<Entry>,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Manifest, Diagnostic> {
        let mut entries: Vec<Entry> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let err = |msg: String| Diagnostic::new(Category::Parse, format!("manifest line {}: {msg}", i + 1));
            let line = raw.trim_end();
            let body = line.trim_start();
            if body.is_empty() || body.starts_with("--") {
                continue;
            }
            let indented = body.len() < line.len();
            if !indented {
                let words: Vec<&str> = body.split_whitespace().collect();
                let (expect, path) = match words.as_slice() {
                    ["accept", path] => (Expect::Accept, *path),
                    ["reject", cat, path] => {
                        let c = Category::parse(cat).ok_or_else(|| err(format!("unknown category {cat}")))?;
                        (Expect::Reject(c), *path)
                    }
                    _ => return Err(err(format!("expected `accept PATH` or `reject CATEGORY PATH`, found `{body}`"))),
                };
                entries.push(Entry { path: path.into(), expect, exports: Vec::new(), evals: Vec::new() });
                continue;
            }
            let Some(entry) = entries.last_mut() else {
                return Err(err("indented line before any file".into()));
            };
            if let Some(rest) = body.strip_prefix("export ") {
                let (name, ty) = match rest.split_once(" : ") {
                    Some((n, t)) => (n.trim(), Some(t.trim().to_string())),
                    None => (rest.trim(), None),
                };
                entry.exports.push(Export { name: name.into(), ty });
            } else if let Some(rest) = body.strip_prefix("eval ") {
                let Some((expr, normal)) = rest.split_once(" => ") else {
                    return Err(err("expected `eval EXPR => NORMAL`".into()));
                };
                entry.evals.push(EvalExpect { expr: expr.trim().into(), normal: normal.trim().into() });
            } else {
                return Err(err(format!("unknown directive `{body}`")));
            }
        }
        Ok(Manifest { entries })
    }

    pub fn entry(&self, path: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.path == path)
    }

    pub fn negatives(&self) -> impl Iterator<Item = (&Entry, Category)> {
        self.entries.iter().filter_map(|e| match e.expect {
            Expect::Reject(c) => Some((e, c)),
            Expect::Accept => None,
        })
    }
}

/// Manifest plus the text of every file it names.
pub struct Corpus {
    pub root: PathBuf,
    pub manifest: Manifest,
    sources: Vec<(String, String)>,
}

impl Corpus {
    pub fn load(root: &Path) -> Result<Corpus, Diagnostic> {
        let read = |p: &Path| {
            std::fs::read_to_string(p)
                .map_err(|e| Diagnostic::new(Category::Usage, format!("cannot read {}: {e}", p.display())))
        };
        let manifest = Manifest::parse(&read(&root.join("manifest"))?)?;
        let mut sources = Vec::new();
        for e in &manifest.entries {
            sources.push((e.path.clone(), read(&root.join(&e.path))?));
        }
        Ok(Corpus { root: root.to_path_buf(), manifest, sources })
    }

    pub fn standard() -> Result<Corpus, Diagnostic> {
        Corpus::load(&default_root())
    }

    pub fn source(&self, path: &str) -> Option<&str> {
        self.sources.iter().find(|(p, _)| p == path).map(|(_, t)| t.as_str())
    }

    fn stage(&self, session: &mut Session, path: &str) -> StageReport {
        let mut report = StageReport { file: path.into(), reports: Vec::new(), problems: Vec::new() };
        let (Some(entry), Some(text)) = (self.manifest.entry(path), self.source(path)) else {
            report.problems.push(format!("{path} is not in the manifest"));
            return report;
        };
        let result = session.check_source(path, text);
        report.reports = result.reports;
        if let Some(d) = result.error {
            report.problems.push(d.to_string());
            return report;
        }
        let globals = session.globals().clone();
        for x in &entry.exports {
            match globals.get(&x.name) {
                None => report.problems.push(format!("missing export {}", x.name)),
                Some(g) => {
                    if let Some(want) = &x.ty {
                        let got = print_term(&g.ty_term, &[]);
                        if &got != want {
                            report.problems.push(format!("{}: expected type {want}, found {got}", x.name));
                        }
                    }
                }
            }
        }
        for ev in &entry.evals {
            let hit = report.reports.iter().find(|r| r.kind == DeclKind::Eval && r.name == ev.expr);
            match hit.and_then(|r| r.normal.as_deref()) {
                None => report.problems.push(format!("no eval directive for {}", ev.expr)),
                Some(n) if n != ev.normal => {
                    report.problems.push(format!("eval {}: expected {}, found {n}", ev.expr, ev.normal))
                }
                Some(_) => {}
            }
        }
        report
    }

    /// Checks the prelude in a session that has not loaded it yet.
    pub fn verify_prelude(&self, session: &mut Session) -> StageReport {
        let mut r = self.stage(session, PRELUDE_NAME);
        let n = r.accepted();
        if r.problems.is_empty() && n < PRELUDE_MIN_DECLS {
            r.problems.push(format!("prelude has {n} declarations, expected at least {PRELUDE_MIN_DECLS}"));
        }
        r
    }

    pub fn verify_maps(&self, session: &mut Session) -> StageReport {
        self.stage(session, MAPS_NAME)
    }

    pub fn verify_equivalence(&self, session: &mut Session) -> StageReport {
        self.stage(session, EQUIV_NAME)
    }

    /// Runs the three stages in order in a fresh session.
    pub fn verify_all(&self) -> (Session, Vec<StageReport>) {
        let mut session = Session::new(DEFAULT_STEP_BUDGET);
        let mut stages = vec![self.verify_prelude(&mut session)];
        if stages[0].ok() {
            stages.push(self.verify_maps(&mut session));
        }
        if stages.iter().all(StageReport::ok) {
            stages.push(self.verify_equivalence(&mut session));
        }
        (session, stages)
    }

    /// Checks every negative file on top of the prelude.
    pub fn run_negative_suite(&self) -> Vec<NegativeResult> {
        let mut base = Session::new(DEFAULT_STEP_BUDGET);
        let prelude = base.check_source(PRELUDE_NAME, self.source(PRELUDE_NAME).unwrap_or(PRELUDE));
        let mut out = Vec::new();
        for (entry, expected) in self.manifest.negatives() {
            let got = match (&prelude.error, self.source(&entry.path)) {
                (Some(d), _) => Some(d.category),
                (None, Some(text)) => {
                    let mut s = base.fork();
                    s.check_source(&entry.path, text).error.map(|d| d.category)
                }
                (None, None) => None,
            };
            out.push(NegativeResult { file: entry.path.clone(), expected, got });
        }
        out
    }
}

/// Outcome of checking one manifest file.
#[derive(Clone, Debug)]
pub struct StageReport {
    pub file: String,
    pub reports: Vec<Report>,
    pub problems: Vec<String>,
}

impl StageReport {
    pub fn ok(&self) -> bool {
        self.problems.is_empty()
    }

    /// Accepted definitions and postulates.
    pub fn accepted(&self) -> usize {
        self.reports
            .iter()
            .filter(|r| r.ok() && matches!(r.kind, DeclKind::Def | DeclKind::Postulate))
            .count()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NegativeResult {
    pub file: String,
    pub expected: Category,
    /// Category of the rejection; `None` if the file was accepted.
    pub got: Option<Category>,
}

impl NegativeResult {
    pub fn passed(&self) -> bool {
        self.got == Some(self.expected)
    }
}

/// Postulates reachable from the final theorem.
pub fn postulate_audit(session: &Session) -> Vec<String> {
    session.globals().postulates_used_by(THEOREM).into_iter().map(|n| n.to_string()).collect()
}

/// Step budget for normalizing every definition in full.
pub const SPOT_CHECK_BUDGET: u64 = u64::MAX;

/// Steps allowed when normalizing a sampled subterm; samples whose normal
/// form costs more are skipped.
pub const SAMPLE_STEP_BUDGET: u64 = 200_000;

/// Number of closed subterms sampled for the conversion properties.
pub const SAMPLE_COUNT: usize = 120;

/// Outcome of the normalizer and conversion spot-checks.
#[derive(Clone, Debug, Default)]
pub struct SpotCheck {
    pub definitions: usize,
    /// Definitions whose normal form changes when normalized again.
    pub not_idempotent: Vec<String>,
    /// Definitions whose normal form fails to check against their type.
    pub not_preserved: Vec<String>,
    /// Distinct ordered pairs on which conversion was evaluated.
    pub pairs: usize,
    pub conv_failures: Vec<String>,
}

impl SpotCheck {
    pub fn ok(&self) -> bool {
        self.not_idempotent.is_empty() && self.not_preserved.is_empty() && self.conv_failures.is_empty()
    }
}

/// Normalizes the named definitions twice and re-checks the normal forms
/// against the stored types. Postulates and unknown names are skipped.
pub fn check_normal_forms(session: &Session, only: &[Name], out: &mut SpotCheck) {
    let globals = session.globals().clone();
    let checker = Checker::with_globals(globals.clone(), SPOT_CHECK_BUDGET);
    let mut items = Vec::new();
    let mut names = Vec::new();
    for name in only {
        let Some(entry) = globals.get(name) else { continue };
        let Some((body, _)) = &entry.def else { continue };
        out.definitions += 1;
        let n1 = match checker.normalize(body) {
            Ok(n) => n,
            Err(e) => {
                out.not_idempotent.push(format!("{name}: {e}"));
                continue;
            }
        };
        match checker.normalize(&n1) {
            Ok(n2) if n2 == n1 => {}
            Ok(_) => out.not_idempotent.push(name.to_string()),
            Err(e) => out.not_idempotent.push(format!("{name}: {e}")),
        }
        items.push((n1, entry.ty.clone()));
        names.push(name.clone());
    }
    for (name, r) in names.iter().zip(checker.check_terms(&items)) {
        match r {
            Ok(true) => {}
            Ok(false) => out.not_preserved.push(format!("{name}: unsolved metavariables")),
            Err(e) => out.not_preserved.push(format!("{name}: {e}")),
        }
    }
}

/// Closed subterms of definition bodies, first occurrence order, at most
/// `limit` of them and none larger than `max_size` nodes.
pub fn sample_subterms(session: &Session, limit: usize, max_size: usize) -> Vec<RcTerm> {
    let globals = session.globals();
    let mut seen: Vec<RcTerm> = Vec::new();
    // Spread the sample over the corpus: few terms from each definition.
    let per_def = 3;
    for name in globals.names() {
        let Some((body, _)) = globals.get(name).and_then(|e| e.def.clone()) else { continue };
        let mut taken = 0;
        body.for_each(&mut |t| {
            if taken >= per_def || seen.len() >= limit {
                return;
            }
            if matches!(t, Term::Var(_) | Term::Universe | Term::Const(_)) || t.scope_depth() != 0 {
                return;
            }
            let size = t.size();
            if size > max_size || seen.iter().any(|s| **s == *t) {
                return;
            }
            seen.push(Rc::new(t.clone()));
            taken += 1;
        });
    }
    seen
}

/// Reflexivity, symmetry and transitivity of conversion on sampled
/// subterms, their normal forms and beta-expanded copies.
pub fn check_conversion(session: &Session, out: &mut SpotCheck) {
    let globals = session.globals().clone();
    let full = Checker::with_globals(globals.clone(), SPOT_CHECK_BUDGET);
    let cheap = Checker::with_globals(globals, SAMPLE_STEP_BUDGET);
    let mut triples = Vec::new();
    for t in sample_subterms(session, SAMPLE_COUNT * 2, 400) {
        if triples.len() >= SAMPLE_COUNT {
            break;
        }
        let Ok(n) = cheap.normalize(&t) else { continue };
        let wrapped = Term::app(Term::lam("x", Term::var(0)), t.clone());
        triples.push((t, wrapped, n));
    }
    // Types where inference alone determines them; lambdas usually fail.
    let types: Vec<Option<RcTerm>> = triples.iter().map(|(t, _, _)| full.infer_closed(t, &[]).ok().map(|(_, ty)| ty)).collect();
    let mut failures = Vec::new();
    let mut errors = Vec::new();
    let mut pairs = 0;
    let mut conv = |a: &RcTerm, b: &RcTerm, what: &str| -> Option<bool> {
        pairs += 1;
        match full.convertible(a, b) {
            Ok(r) => Some(r),
            Err(e) => {
                errors.push(format!("{what}: {e}"));
                None
            }
        }
    };
    let show = |t: &RcTerm| print_term(t, &[]);
    for (i, (t, w, n)) in triples.iter().enumerate() {
        if conv(t, t, "reflexivity") == Some(false) {
            failures.push(format!("not reflexive: {}", show(t)));
        }
        let tw = conv(t, w, "beta");
        let wn = conv(w, n, "beta");
        let tn = conv(t, n, "normal form");
        let nt = conv(n, t, "normal form");
        if tw != Some(true) || wn != Some(true) || tn != Some(true) {
            failures.push(format!("not convertible with its normal form or beta copy: {}", show(t)));
        }
        if tn != nt {
            failures.push(format!("not symmetric: {}", show(t)));
        }
        // The next sample of the same type, usually not convertible, for
        // symmetry and transitivity through a second term.
        let Some(ty) = &types[i] else { continue };
        let Some(j) = (1..triples.len()).map(|k| (i + k) % triples.len()).find(|&j| types[j].as_ref() == Some(ty)) else {
            continue;
        };
        let (u, _, m) = &triples[j];
        let tu = conv(t, u, "same type");
        let ut = conv(u, t, "same type");
        if tu != ut {
            failures.push(format!("not symmetric: {} and {}", show(t), show(u)));
        }
        let um = conv(u, m, "same type");
        let tm = conv(t, m, "same type");
        if tu == Some(true) && um == Some(true) && tm != Some(true) {
            failures.push(format!("not transitive: {} and {}", show(t), show(u)));
        }
    }
    out.pairs += pairs;
    out.conv_failures.extend(errors);
    out.conv_failures.extend(failures);
}

/// Runs both spot-checks on a session holding the checked corpus.
pub fn spot_check(session: &Session) -> SpotCheck {
    let mut out = SpotCheck::default();
    let names = session.globals().names().to_vec();
    check_normal_forms(session, &names, &mut out);
    check_conversion(session, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lines() {
        let m = Manifest::parse(
            "-- c\naccept a.hott\n  export f : S1 -> T2\n  export g\n  eval f base => Tb\nreject scope b.hott\n",
        )
        .unwrap();
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.entries[0].exports[0], Export { name: "f".into(), ty: Some("S1 -> T2".into()) });
        assert_eq!(m.entries[0].exports[1].ty, None);
        assert_eq!(m.entries[0].evals[0], EvalExpect { expr: "f base".into(), normal: "Tb".into() });
        assert_eq!(m.entries[1].expect, Expect::Reject(Category::Scope));
    }

    #[test]
    fn manifest_errors() {
        assert!(Manifest::parse("  export f\n").is_err());
        assert!(Manifest::parse("reject nonsense a.hott\n").is_err());
        assert!(Manifest::parse("accept a.hott\n  frobnicate\n").is_err());
    }

    #[test]
    fn shipped_manifest_parses() {
        let c = Corpus::standard().unwrap();
        assert_eq!(c.manifest.entries[0].path, PRELUDE_NAME);
        assert!(c.manifest.negatives().count() >= 6);
    }
}
