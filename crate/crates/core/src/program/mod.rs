//! Source programs, whole-program tests and per-line test derivation.

pub mod syntax;
pub mod value;

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{json, Value as Json};

use crate::corpus::DocCorpus;
use crate::literal::Literal;
use crate::runtime::{Runtime, RuntimeError};
pub use syntax::SyntaxError;
pub use value::{Column, ColumnData, Table, Tensor, Value};

#[derive(Debug, thiserror::Error)]
pub enum ProgramError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("line {line}: unknown API `{callee}`")]
    UnknownCallee { line: usize, callee: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("tests file: {0}")]
    Tests(String),
    #[error("test {test} does not provide input `{var}`")]
    MissingInput { test: usize, var: String },
    #[error("source program fails test {test} at line {line}: {message}")]
    SourceFailure { test: usize, line: usize, message: String },
    #[error("source program output differs from the expectation of test {test}")]
    SourceMismatch { test: usize },
    #[error("runtime unavailable: {0}")]
    Runtime(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CallSite {
    pub line_index: usize,
    pub callee: String,
    /// Variables consumed by the call.
    pub operands: Vec<String>,
    pub positional_args: Vec<Literal>,
    pub keyword_args: Vec<(String, Literal)>,
    pub binds: String,
}

impl CallSite {
    /// Literal arguments in source order.
    pub fn literals(&self) -> impl Iterator<Item = &Literal> {
        self.positional_args.iter().chain(self.keyword_args.iter().map(|(_, v)| v))
    }

    pub fn render(&self) -> String {
        self.to_call().render()
    }

    fn to_call(&self) -> syntax::Call {
        syntax::Call {
            binds: self.binds.clone(),
            callee: self.callee.clone(),
            operands: self.operands.clone(),
            positional: self.positional_args.clone(),
            keyword: self.keyword_args.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SourceProgram {
    pub input_vars: Vec<String>,
    pub lines: Vec<CallSite>,
}

impl SourceProgram {
    /// Canonical text: input declaration then one call per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        if !self.input_vars.is_empty() {
            out.push_str(&format!("input {}\n", self.input_vars.join(", ")));
        }
        for l in &self.lines {
            out.push_str(&l.render());
            out.push('\n');
        }
        out
    }

    /// Variable holding the program result.
    pub fn output_var(&self) -> Option<&str> {
        self.lines.last().map(|l| l.binds.as_str()).or(self.input_vars.first().map(String::as_str))
    }
}

/// Parses and resolves a program against the corpus of its library.
pub fn parse_program(source_text: &str, corpus: &DocCorpus) -> Result<SourceProgram, ProgramError> {
    let program = parse_program_unresolved(source_text)?;
    for l in &program.lines {
        if corpus.get(&l.callee).is_none() {
            return Err(ProgramError::UnknownCallee { line: l.line_index, callee: l.callee.clone() });
        }
    }
    Ok(program)
}

/// Parses without checking callees, e.g. for migrated programs that use
/// reshaping operations outside the corpus.
pub fn parse_program_unresolved(source_text: &str) -> Result<SourceProgram, ProgramError> {
    let parsed = syntax::parse(source_text, true)?;
    let lines = parsed
        .calls
        .into_iter()
        .enumerate()
        .map(|(i, c)| CallSite {
            line_index: i,
            callee: c.callee,
            operands: c.operands,
            positional_args: c.positional,
            keyword_args: c.keyword,
            binds: c.binds,
        })
        .collect();
    Ok(SourceProgram { input_vars: parsed.inputs, lines })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestCase {
    pub inputs: BTreeMap<String, Value>,
    pub expected_output: Value,
    /// Line whose result the expectation refers to; `None` for the whole
    /// program.
    pub line_scope: Option<usize>,
}

/// Parses `{"tests": [{"inputs": {...}, "expected_output": V}, ...]}`.
pub fn parse_tests(text: &str) -> Result<Vec<TestCase>, ProgramError> {
    let bad = |m: String| ProgramError::Tests(m);
    let root: Json = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    let tests = root.get("tests").and_then(Json::as_array).ok_or_else(|| bad("missing `tests` array".into()))?;
    let mut out = Vec::with_capacity(tests.len());
    for (i, t) in tests.iter().enumerate() {
        let inputs = t
            .get("inputs")
            .and_then(Json::as_object)
            .ok_or_else(|| bad(format!("test {i}: missing `inputs` object")))?
            .iter()
            .map(|(k, v)| Value::from_json(v).map(|v| (k.clone(), v)))
            .collect::<Result<BTreeMap<_, _>, _>>()
            .map_err(|m| bad(format!("test {i}: {m}")))?;
        let expected = t.get("expected_output").ok_or_else(|| bad(format!("test {i}: missing `expected_output`")))?;
        let expected_output = Value::from_json(expected).map_err(|m| bad(format!("test {i}: {m}")))?;
        out.push(TestCase { inputs, expected_output, line_scope: None });
    }
    Ok(out)
}

pub fn tests_to_json(tests: &[TestCase]) -> Json {
    let items: Vec<Json> = tests
        .iter()
        .map(|t| {
            let inputs: serde_json::Map<String, Json> = t.inputs.iter().map(|(k, v)| (k.clone(), v.to_json())).collect();
            json!({ "inputs": inputs, "expected_output": t.expected_output.to_json() })
        })
        .collect();
    json!({ "tests": items })
}

pub fn load_tests(path: impl AsRef<Path>) -> Result<Vec<TestCase>, ProgramError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ProgramError::Io { path: path.display().to_string(), source })?;
    parse_tests(&text)
}

/// Values bound while running a program on one test input.
pub type Environment = BTreeMap<String, Value>;

/// Runs `program` line by line, returning the environment after each line.
pub fn trace_program(
    program: &SourceProgram,
    inputs: &Environment,
    runtime: &dyn Runtime,
    test_index: usize,
) -> Result<Vec<Environment>, ProgramError> {
    for var in &program.input_vars {
        if !inputs.contains_key(var) {
            return Err(ProgramError::MissingInput { test: test_index, var: var.clone() });
        }
    }
    let mut env = inputs.clone();
    let mut trace = Vec::with_capacity(program.lines.len());
    for l in &program.lines {
        let code = l.render();
        let value = runtime.eval(&code, &operand_env(l, &env)).map_err(|e| match e {
            RuntimeError::Adapter(m) => ProgramError::Runtime(m),
            other => ProgramError::SourceFailure { test: test_index, line: l.line_index, message: other.message().to_string() },
        })?;
        env.insert(l.binds.clone(), value);
        trace.push(env.clone());
    }
    Ok(trace)
}

/// The subset of `env` a call reads.
pub fn operand_env(call: &CallSite, env: &Environment) -> Environment {
    call.operands.iter().filter_map(|o| env.get(o).map(|v| (o.clone(), v.clone()))).collect()
}

/// Derives line tests: entry `k` holds, for every whole-program test, the
/// observed result of lines `0..=k` of the source program.
pub fn generate_line_tests(
    program: &SourceProgram,
    tests: &[TestCase],
    runtime: &dyn Runtime,
) -> Result<Vec<Vec<TestCase>>, ProgramError> {
    let mut per_line: Vec<Vec<TestCase>> = vec![Vec::with_capacity(tests.len()); program.lines.len()];
    for (ti, test) in tests.iter().enumerate() {
        let trace = trace_program(program, &test.inputs, runtime, ti)?;
        let final_value = match program.lines.last() {
            Some(l) => &trace.last().expect("non-empty")[&l.binds],
            None => match program.input_vars.first().and_then(|v| test.inputs.get(v)) {
                Some(v) => v,
                None => continue,
            },
        };
        if !final_value.approx_eq(&test.expected_output) {
            return Err(ProgramError::SourceMismatch { test: ti });
        }
        for (k, l) in program.lines.iter().enumerate() {
            per_line[k].push(TestCase {
                inputs: test.inputs.clone(),
                expected_output: trace[k][&l.binds].clone(),
                line_scope: Some(k),
            });
        }
    }
    Ok(per_line)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_print_round_trip() {
        let text = "input x\nh = mf.layers.Conv2D(filters=32, kernel_size=3, strides=(2, 2))\ny = mf.layers.ReLU()\n";
        let p = parse_program_unresolved(text).unwrap();
        assert_eq!(p.lines[0].keyword_args.len(), 3);
        let again = parse_program_unresolved(&p.render()).unwrap();
        assert_eq!(p, again);
        assert_eq!(p.render(), again.render());
        assert_eq!(p.output_var(), Some("y"));
    }

    #[test]
    fn empty_program() {
        let p = parse_program_unresolved("").unwrap();
        assert!(p.lines.is_empty());
        assert!(p.input_vars.is_empty());
    }

    #[test]
    fn undefined_operand_is_scoping_error() {
        let err = parse_program_unresolved("input x\ny = mf.math.abs(z)\n").unwrap_err();
        assert!(matches!(err, ProgramError::Syntax(SyntaxError::Scope { .. })), "{err}");
    }

    #[test]
    fn tests_file_round_trip() {
        let text = r#"{"tests":[{"inputs":{"x":{"tensor":{"shape":[2],"data":[1.0,2.0]}}},"expected_output":{"tensor":{"shape":[2],"data":[2.0,4.0]}}}]}"#;
        let tests = parse_tests(text).unwrap();
        assert_eq!(tests.len(), 1);
        let back = parse_tests(&tests_to_json(&tests).to_string()).unwrap();
        assert_eq!(back, tests);
        assert!(parse_tests("{}").is_err());
    }
}
