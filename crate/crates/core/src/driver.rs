//! Checking whole source files and reporting per-declaration results.

use std::rc::Rc;
use std::time::Instant;

use serde::Serialize;

use crate::diagnostic::{Category, Diagnostic};
use crate::kernel::{Checker, Outcome};
use crate::print::print_term;
use crate::surface::{parse_expr, parse_module, resolve_decl, resolve_expr, tokenize, DeclKind};
use crate::term::RcTerm;

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub kind: DeclKind,
    /// Declared name, or the printed term of a `check` or `eval`.
    pub name: String,
    /// Printed type; absent on failure.
    pub ty: Option<String>,
    /// Printed normal form of an `eval`.
    pub normal: Option<String>,
    pub status: Option<Category>,
    pub steps: u64,
    pub duration_ms: Option<f64>,
}

impl Report {
    pub fn ok(&self) -> bool {
        self.status.is_none()
    }

    pub fn text_line(&self) -> String {
        match (&self.status, self.kind) {
            (Some(c), _) => format!("FAIL {} [{}]", self.name, c),
            (None, DeclKind::Eval) => format!(
                "EVAL {} ~> {}",
                self.name,
                self.normal.as_deref().unwrap_or_default()
            ),
            (None, _) => format!("OK {} : {}", self.name, self.ty.as_deref().unwrap_or_default()),
        }
    }

    pub fn json_line(&self) -> String {
        #[derive(Serialize)]
        struct Record<'a> {
            name: &'a str,
            status: &'a str,
            #[serde(rename = "type")]
            ty: Option<&'a str>,
            #[serde(skip_serializing_if = "Option::is_none")]
            normal: Option<&'a str>,
            #[serde(rename = "duration-ms")]
            duration_ms: Option<f64>,
        }
        let rec = Record {
            name: &self.name,
            status: self.status.map_or("ok", |c| c.as_str()),
            ty: self.ty.as_deref(),
            normal: self.normal.as_deref(),
            duration_ms: self.duration_ms,
        };
        serde_json::to_string(&rec).expect("records serialize")
    }
}

/// Result of checking one file: reports for every declaration reached,
/// and the diagnostic that stopped checking, if any.
#[derive(Clone, Debug, Default)]
pub struct FileResult {
    pub reports: Vec<Report>,
    pub error: Option<Diagnostic>,
}

impl FileResult {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

pub struct Session {
    pub checker: Checker,
    /// Record wall-clock durations (makes reports nondeterministic).
    pub timing: bool,
}

impl Session {
    pub fn new(budget: u64) -> Session {
        Session { checker: Checker::new(budget), timing: false }
    }

    /// New session sharing this one's global environment.
    pub fn fork(&self) -> Session {
        let checker = Checker::with_globals(self.checker.globals().clone(), self.checker.budget());
        Session { checker, timing: self.timing }
    }

    /// Checks every declaration of `text` in order, stopping at the first
    /// failure since later declarations may depend on it.
    pub fn check_source(&mut self, file: &str, text: &str) -> FileResult {
        let mut out = FileResult::default();
        let decls = match tokenize(file, text).and_then(|t| parse_module(file, &t)) {
            Ok(d) => d,
            Err(e) => {
                out.error = Some(e);
                return out;
            }
        };
        for d in &decls {
            let start = Instant::now();
            let globals = self.checker.globals().clone();
            let resolved = resolve_decl(d, &|n| globals.contains(n));
            let mut report = Report {
                kind: d.kind,
                name: d.name.clone().unwrap_or_default(),
                ty: None,
                normal: None,
                status: None,
                steps: 0,
                duration_ms: None,
            };
            let result = resolved.and_then(|r| {
                if report.name.is_empty() {
                    if let Some(b) = &r.body {
                        report.name = print_term(b, &[]);
                    }
                }
                self.checker.check_declaration(&r)
            });
            report.steps = self.checker.last_steps();
            if self.timing {
                report.duration_ms = Some(start.elapsed().as_secs_f64() * 1000.0);
            }
            match result {
                Ok(outcome) => {
                    report.ty = Some(print_term(outcome.ty(), &[]));
                    if let Outcome::Evaluated { normal, .. } = &outcome {
                        report.normal = Some(print_term(normal, &[]));
                    }
                    out.reports.push(report);
                }
                Err(e) => {
                    let e = match &d.name {
                        Some(n) => e.in_decl(n),
                        None => e,
                    };
                    report.status = Some(e.category);
                    out.reports.push(report);
                    out.error = Some(e);
                    return out;
                }
            }
        }
        out
    }

    /// Elaborates and normalizes a standalone expression.
    pub fn eval_expr(&self, text: &str) -> Result<(RcTerm, RcTerm), Diagnostic> {
        let file = "<expr>";
        let toks = tokenize(file, text)?;
        let e = parse_expr(file, &toks)?;
        let globals = self.checker.globals().clone();
        let (t, holes) = resolve_expr(&e, &|n| globals.contains(n))?;
        let (term, ty) = self.checker.infer_closed(&t, &holes)?;
        let normal = self.checker.normalize(&term)?;
        Ok((normal, ty))
    }

    pub fn globals(&self) -> &Rc<crate::context::Globals> {
        self.checker.globals()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::DEFAULT_STEP_BUDGET;

    #[test]
    fn stops_at_the_first_failure() {
        let mut s = Session::new(DEFAULT_STEP_BUDGET);
        let r = s.check_source("t.hott", "def a : S1 := base\ndef b : S1 := Tb\ndef c : S1 := a\n");
        assert_eq!(r.reports.len(), 2);
        assert_eq!(r.reports[1].text_line(), "FAIL b [type-mismatch]");
        let e = r.error.unwrap();
        assert_eq!(e.decl.as_deref(), Some("b"));
        assert!(s.globals().contains("a") && !s.globals().contains("c"));
    }

    #[test]
    fn report_lines() {
        let mut s = Session::new(DEFAULT_STEP_BUDGET);
        let r = s.check_source("t.hott", "def a : S1 := base\neval (fun x => x) a\n");
        assert!(r.ok());
        assert_eq!(r.reports[0].text_line(), "OK a : S1");
        assert_eq!(r.reports[1].text_line(), "EVAL (fun x => x) a ~> base");
        assert_eq!(r.reports[0].json_line(), r#"{"name":"a","status":"ok","type":"S1","duration-ms":null}"#);
        assert_eq!(
            r.reports[1].json_line(),
            r#"{"name":"(fun x => x) a","status":"ok","type":"S1","normal":"base","duration-ms":null}"#
        );
    }

    #[test]
    fn forks_share_globals_but_not_later_additions() {
        let mut s = Session::new(DEFAULT_STEP_BUDGET);
        assert!(s.check_source("t.hott", "def a : S1 := base\n").ok());
        let mut t = s.fork();
        assert!(t.check_source("u.hott", "def b : S1 := a\n").ok());
        assert!(!s.globals().contains("b"));
    }
}
