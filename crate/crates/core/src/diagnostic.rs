use std::fmt;
use std::rc::Rc;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    Lex,
    Parse,
    Scope,
    TypeMismatch,
    UnsolvedHole,
    NotConvertible,
    StepBudget,
    Usage,
}

impl Category {
    pub const ALL: [Category; 8] = [
        Category::Lex,
        Category::Parse,
        Category::Scope,
        Category::TypeMismatch,
        Category::UnsolvedHole,
        Category::NotConvertible,
        Category::StepBudget,
        Category::Usage,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Lex => "lex",
            Category::Parse => "parse",
            Category::Scope => "scope",
            Category::TypeMismatch => "type-mismatch",
            Category::UnsolvedHole => "unsolved-hole",
            Category::NotConvertible => "not-convertible",
            Category::StepBudget => "step-budget",
            Category::Usage => "usage",
        }
    }

    pub fn parse(s: &str) -> Option<Category> {
        Category::ALL.iter().copied().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Location {
    pub file: Rc<str>,
    pub line: u32,
    pub column: u32,
}

impl Location {
    pub fn new(file: &str, line: u32, column: u32) -> Location {
        Location { file: file.into(), line, column }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub category: Category,
    pub location: Option<Location>,
    pub message: String,
    pub expected: Option<String>,
    pub actual: Option<String>,
    /// Declaration the diagnostic arose in, if any.
    pub decl: Option<String>,
}

impl Diagnostic {
    pub fn new(category: Category, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            category,
            location: None,
            message: message.into(),
            expected: None,
            actual: None,
            decl: None,
        }
    }

    pub fn at(mut self, loc: Location) -> Diagnostic {
        if self.location.is_none() {
            self.location = Some(loc);
        }
        self
    }

    pub fn with_forms(mut self, expected: String, actual: String) -> Diagnostic {
        self.expected = Some(expected);
        self.actual = Some(actual);
        self
    }

    pub fn in_decl(mut self, name: &str) -> Diagnostic {
        if self.decl.is_none() {
            self.decl = Some(name.to_string());
        }
        self
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(loc) = &self.location {
            write!(f, "{loc}: ")?;
        }
        write!(f, "error[{}]", self.category)?;
        if let Some(d) = &self.decl {
            write!(f, " in {d}")?;
        }
        write!(f, ": {}", self.message)?;
        if let Some(e) = &self.expected {
            write!(f, "\n  expected: {e}")?;
        }
        if let Some(a) = &self.actual {
            write!(f, "\n  actual:   {a}")?;
        }
        Ok(())
    }
}

impl std::error::Error for Diagnostic {}
