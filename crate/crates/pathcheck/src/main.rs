use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pathcheck_core::corpus::{PRELUDE, PRELUDE_NAME};
use pathcheck_core::diagnostic::{Category, Diagnostic};
use pathcheck_core::driver::{FileResult, Session};
use pathcheck_core::eval::DEFAULT_STEP_BUDGET;
use pathcheck_core::print::print_term;

#[derive(Parser)]
#[command(name = "pathcheck", version, about = "Type checker for .hott files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check files in the given order.
    Check {
        #[command(flatten)]
        opts: Opts,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Load files, then print the normal form of an expression.
    Eval {
        #[command(flatten)]
        opts: Opts,
        /// Expression to normalize.
        #[arg(short = 'e', long = "expr")]
        expr: Option<String>,
        files: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct Opts {
    /// Reduction step budget per declaration.
    #[arg(long, default_value_t = DEFAULT_STEP_BUDGET)]
    step_budget: u64,
    /// Do not load the built-in prelude.
    #[arg(long)]
    no_prelude: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Print reduction step counts to stderr.
    #[arg(long)]
    trace: bool,
    /// Record wall-clock durations in json-lines output.
    #[arg(long)]
    timing: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    JsonLines,
}

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;

struct Run {
    session: Session,
    opts: Opts,
    out: std::io::StdoutLock<'static>,
}

impl Run {
    fn new(opts: Opts) -> Run {
        let mut session = Session::new(opts.step_budget);
        session.timing = opts.timing;
        Run { session, opts, out: std::io::stdout().lock() }
    }

    fn emit(&mut self, result: &FileResult) {
        for r in &result.reports {
            let line = match self.opts.format {
                Format::Text => r.text_line(),
                Format::JsonLines => r.json_line(),
            };
            let _ = writeln!(self.out, "{line}");
            if self.opts.trace {
                eprintln!("trace: {}: {} steps", r.name, r.steps);
            }
        }
    }

    /// Loads the built-in prelude unless disabled or given explicitly.
    fn prelude(&mut self, files: &[PathBuf]) -> Result<(), u8> {
        let explicit = files.iter().any(|f| f.file_name().is_some_and(|n| n == PRELUDE_NAME));
        if self.opts.no_prelude || explicit {
            return Ok(());
        }
        let r = self.session.check_source(PRELUDE_NAME, PRELUDE);
        match r.error {
            Some(d) => Err(fail(&d)),
            None => Ok(()),
        }
    }

    fn files(&mut self, files: &[PathBuf], quiet: bool) -> Result<(), u8> {
        let mut texts = Vec::new();
        for f in files {
            texts.push((f, read(f)?));
        }
        for (f, text) in texts {
            let r = self.session.check_source(&f.display().to_string(), &text);
            if !quiet {
                self.emit(&r);
            }
            if let Some(d) = &r.error {
                let _ = self.out.flush();
                return Err(fail(d));
            }
        }
        Ok(())
    }
}

fn fail(d: &Diagnostic) -> u8 {
    eprintln!("{d}");
    if d.category == Category::Usage {
        EXIT_USAGE
    } else {
        EXIT_FAIL
    }
}

fn read(path: &Path) -> Result<String, u8> {
    std::fs::read_to_string(path).map_err(|e| {
        fail(&Diagnostic::new(Category::Usage, format!("cannot read {}: {e}", path.display())))
    })
}

fn run(cli: Cli) -> Result<(), u8> {
    match cli.command {
        Command::Check { opts, files } => {
            let mut run = Run::new(opts);
            run.prelude(&files)?;
            run.files(&files, false)
        }
        Command::Eval { opts, expr, files } => {
            let Some(expr) = expr else {
                return Err(fail(&Diagnostic::new(Category::Usage, "eval requires an expression (-e EXPR)")));
            };
            let mut run = Run::new(opts);
            run.prelude(&files)?;
            run.files(&files, true)?;
            match run.session.eval_expr(&expr) {
                Ok((normal, ty)) => {
                    let normal = print_term(&normal, &[]);
                    let line = match run.opts.format {
                        Format::Text => normal,
                        Format::JsonLines => serde_json::json!({
                            "name": expr,
                            "status": "ok",
                            "type": print_term(&ty, &[]),
                            "normal": normal,
                            "duration-ms": null,
                        })
                        .to_string(),
                    };
                    let _ = writeln!(run.out, "{line}");
                    Ok(())
                }
                Err(d) => Err(fail(&d)),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}
