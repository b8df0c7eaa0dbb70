//! The mini verification language: syntax tree, parser, printer and checks.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod typeck;

pub use ast::*;
pub use printer::{print_expr, print_method, print_node, print_program};
pub use test::{Test, TestCall};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LangError {
    #[error("line {}:{}: syntax error: {message}", span.line, span.col)]
    Syntax { span: Span, message: String },
    #[error("line {}: type error: {message}", span.line)]
    Type { span: Span, message: String },
    #[error("shape error: {message}")]
    Shape { message: String },
}

impl LangError {
    pub fn line(&self) -> Option<u32> {
        match self {
            LangError::Syntax { span, .. } | LangError::Type { span, .. } => Some(span.line),
            LangError::Shape { .. } => None,
        }
    }
}

fn parse_unchecked(source: &str, name: &str) -> Result<Program, LangError> {
    let mut p = parser::Parser::new(source)?;
    let mut prog = p.program(name)?;
    propagate_method_trust(&mut prog);
    Ok(prog)
}

/// A trusted method makes every node inside it trusted. Patched markers win.
fn propagate_method_trust(p: &mut Program) {
    let trusted: Vec<bool> = p.methods.iter().map(|m| m.trust.trusted).collect();
    for (i, m) in p.methods.iter_mut().enumerate() {
        if !trusted[i] {
            continue;
        }
        let mut one = Program { methods: vec![m.clone()], source_name: String::new() };
        for_each_trust_mut(&mut one, &mut |_, t| {
            if !t.trusted {
                *t = TrustTag::user();
            }
        });
        if let Some(updated) = one.methods.pop() {
            *m = updated;
        }
    }
}

pub fn parse_program(source: &str) -> Result<Program, LangError> {
    parse_named(source, "")
}

/// Parses and type-checks a compilation unit.
pub fn parse_named(source: &str, name: &str) -> Result<Program, LangError> {
    let prog = parse_unchecked(source, name)?;
    typeck::check_program(&prog, true)?;
    Ok(prog)
}

/// Parses a test: a single parameterless method with literal inputs, one
/// call and trailing asserts.
pub fn parse_test(source: &str) -> Result<Test, LangError> {
    let prog = parse_unchecked(source, "")?;
    typeck::check_program(&prog, false)?;
    match prog.methods.as_slice() {
        [m] => test::test_from_method(m),
        _ => Err(LangError::Shape { message: "a test file holds exactly one method".into() }),
    }
}
