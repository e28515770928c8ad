//! Mini-language front end: lexing, parsing, include expansion,
//! canonical variable naming and pretty-printing.

pub mod ast;
pub mod canon;
pub mod format;
pub mod lexer;
pub mod parser;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use ast::{Expr, ExprId, ExprKind, Program, Span, Stmt, StmtKind};
pub use canon::{canonicalize, Canonical, Resolved, VarRegistry};
pub use format::format_program;
pub use lexer::{tokenize, Tok, Token};
pub use parser::parse_program;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FrontendError {
    #[error("{line}:{col}: unexpected character `{found}`")]
    Lex {
        file: u32,
        line: u32,
        col: u32,
        found: String,
    },
    #[error("{line}:{col}: {message}")]
    Parse {
        file: u32,
        line: u32,
        col: u32,
        message: String,
    },
    #[error("{line}:{col}: unresolved name `{name}`")]
    UnresolvedName {
        file: u32,
        line: u32,
        col: u32,
        name: String,
    },
    #[error("{line}:{col}: {message}")]
    Invalid {
        file: u32,
        line: u32,
        col: u32,
        message: String,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl FrontendError {
    pub fn file(&self) -> Option<u32> {
        match self {
            FrontendError::Lex { file, .. }
            | FrontendError::Parse { file, .. }
            | FrontendError::UnresolvedName { file, .. }
            | FrontendError::Invalid { file, .. } => Some(*file),
            FrontendError::Io { .. } => None,
        }
    }

    /// Message prefixed with the file name from `files`.
    pub fn render(&self, files: &[String]) -> String {
        match self.file().and_then(|f| files.get(f as usize)) {
            Some(name) => format!("{name}:{self}"),
            None => self.to_string(),
        }
    }
}

/// Parses one translation unit. `read` maps a path to its contents;
/// `include` directives are resolved relative to the including file and
/// each file is loaded at most once. Included items follow the directive.
pub fn load_unit_with<F>(main: &Path, mut read: F) -> Result<Program, FrontendError>
where
    F: FnMut(&Path) -> std::io::Result<String>,
{
    let mut program = Program::default();
    let mut seen = BTreeSet::new();
    let mut next_id = 0;
    let items = load_file(main, &mut read, &mut program.files, &mut seen, &mut next_id)?;
    program.items = items;
    Ok(program)
}

/// [`load_unit_with`] reading from the file system.
pub fn load_unit(main: &Path) -> Result<Program, FrontendError> {
    load_unit_with(main, |p| std::fs::read_to_string(p))
}

/// Parses a single in-memory source named `name`; includes are rejected.
pub fn parse_source(name: &str, source: &str) -> Result<Program, FrontendError> {
    let tokens = tokenize(source)?;
    let (items, _) = parser::parse_items(&tokens, 0, 0)?;
    Ok(Program {
        items,
        files: vec![name.to_string()],
    })
}

fn load_file<F>(
    path: &Path,
    read: &mut F,
    files: &mut Vec<String>,
    seen: &mut BTreeSet<PathBuf>,
    next_id: &mut ExprId,
) -> Result<Vec<ast::Item>, FrontendError>
where
    F: FnMut(&Path) -> std::io::Result<String>,
{
    let key = normalize(path);
    if !seen.insert(key) {
        return Ok(Vec::new());
    }
    let source = read(path).map_err(|e| FrontendError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let file = files.len() as u32;
    files.push(path.display().to_string());
    let tokens = lexer::tokenize_file(&source, file)?;
    let (items, next) = parser::parse_items(&tokens, file, *next_id)?;
    *next_id = next;
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        if let ast::Item::Include(rel, _) = &item {
            let target = path.parent().unwrap_or(Path::new("")).join(rel);
            out.push(item.clone());
            out.extend(load_file(&target, read, files, seen, next_id)?);
        } else {
            out.push(item);
        }
    }
    Ok(out)
}

fn normalize(path: &Path) -> PathBuf {
    let mut out = PathBuf::new();
    for c in path.components() {
        match c {
            std::path::Component::CurDir => {}
            std::path::Component::ParentDir if out.file_name().is_some() => {
                out.pop();
            }
            other => out.push(other),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn includes_load_once() {
        let files: HashMap<&str, &str> = [
            (
                "dir/main.ml4u",
                "include \"shared.ml4u\"; include \"./shared.ml4u\"; int a;",
            ),
            ("dir/shared.ml4u", "int b; float f(float x) { return x; }"),
        ]
        .into_iter()
        .collect();
        let p = load_unit_with(Path::new("dir/main.ml4u"), |p| {
            files
                .get(p.to_str().unwrap().trim_start_matches("./"))
                .or_else(|| files.get(normalize(p).to_str().unwrap()))
                .map(|s| s.to_string())
                .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::NotFound, "missing"))
        })
        .unwrap();
        assert_eq!(p.files.len(), 2);
        assert_eq!(p.globals().count(), 2);
        assert!(p.function("f").is_some());
    }

    #[test]
    fn missing_include_is_io_error() {
        let err = load_unit_with(Path::new("m.ml4u"), |p| {
            if p == Path::new("m.ml4u") {
                Ok("include \"nope.ml4u\";".into())
            } else {
                Err(std::io::Error::new(std::io::ErrorKind::NotFound, "missing"))
            }
        })
        .unwrap_err();
        assert!(matches!(err, FrontendError::Io { .. }));
    }

    #[test]
    fn render_names_file() {
        let err = parse_source("a.ml4u", "int x").unwrap_err();
        assert!(err.render(&["a.ml4u".into()]).starts_with("a.ml4u:1:"));
    }
}
