//! Text to core terms: lexing, parsing, scope resolution.

pub mod lexer;
pub mod parser;
pub mod resolve;

pub use lexer::{tokenize, Tok, Token};
pub use parser::{parse_expr, parse_module, Binder, DeclKind, Expr, ExprKind, SurfaceDecl};
pub use resolve::{is_keyword, resolve_decl, resolve_expr, ResolvedDecl};
