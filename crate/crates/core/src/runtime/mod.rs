//! Execution backends: an in-process mock library pair and an external
//! adapter process speaking newline-delimited JSON.

pub mod external;
pub mod mock;

use std::collections::HashMap;
use std::sync::Mutex;

use crate::program::{Environment, Value};

pub use external::{spawn_external, ExternalConfig, ExternalRuntime};
pub use mock::MockRuntime;

#[derive(Debug, Clone, PartialEq, Eq, Hash, thiserror::Error)]
pub enum RuntimeError {
    /// The evaluated code raised; the message is the interpreter's text.
    #[error("{0}")]
    Raised(String),
    #[error("{0}")]
    Timeout(String),
    /// The backend itself failed (crash, protocol violation).
    #[error("adapter failure: {0}")]
    Adapter(String),
}

impl RuntimeError {
    pub fn message(&self) -> &str {
        match self {
            RuntimeError::Raised(m) | RuntimeError::Timeout(m) | RuntimeError::Adapter(m) => m,
        }
    }
}

/// Evaluates mini-syntax code in an environment and returns the value bound
/// by the last line. Implementations serialize their own evaluations.
pub trait Runtime: Send + Sync {
    fn backend(&self) -> &str;
    fn eval(&self, code: &str, inputs: &Environment) -> Result<Value, RuntimeError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalStatus {
    Pass,
    ValueMismatch,
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub status: EvalStatus,
    pub observed: Option<Value>,
    pub message: Option<String>,
}

impl EvalResult {
    pub fn from_outcome(outcome: &Result<Value, RuntimeError>, expected: &Value) -> EvalResult {
        match outcome {
            Ok(v) if v.approx_eq(expected) => EvalResult { status: EvalStatus::Pass, observed: Some(v.clone()), message: None },
            Ok(v) => EvalResult { status: EvalStatus::ValueMismatch, observed: Some(v.clone()), message: None },
            Err(e) => EvalResult { status: EvalStatus::Error, observed: None, message: Some(e.message().to_string()) },
        }
    }

    pub fn passed(&self) -> bool {
        self.status == EvalStatus::Pass
    }
}

/// Runs `code` on `inputs` and compares with `expected`. Adapter failures
/// are returned as errors rather than folded into the result.
pub fn evaluate(runtime: &dyn Runtime, code: &str, inputs: &Environment, expected: &Value) -> Result<EvalResult, RuntimeError> {
    match runtime.eval(code, inputs) {
        Err(e @ RuntimeError::Adapter(_)) => Err(e),
        outcome => Ok(EvalResult::from_outcome(&outcome, expected)),
    }
}

type CacheKey = (usize, usize, String);

/// Memoized outcomes keyed by (line, test, code). The environment for a given
/// line and test is fixed once earlier lines are migrated, so the key
/// identifies the evaluation.
#[derive(Default)]
pub struct EvalCache {
    entries: Mutex<HashMap<CacheKey, Result<Value, RuntimeError>>>,
    hits: Mutex<u64>,
}

impl EvalCache {
    pub fn get_or_eval(
        &self,
        key: (usize, usize, &str),
        eval: impl FnOnce() -> Result<Value, RuntimeError>,
    ) -> Result<Value, RuntimeError> {
        let owned = (key.0, key.1, key.2.to_string());
        if let Some(hit) = self.entries.lock().expect("cache lock").get(&owned) {
            *self.hits.lock().expect("cache lock") += 1;
            return hit.clone();
        }
        let outcome = eval();
        if !matches!(outcome, Err(RuntimeError::Adapter(_))) {
            self.entries.lock().expect("cache lock").insert(owned, outcome.clone());
        }
        outcome
    }

    pub fn hits(&self) -> u64 {
        *self.hits.lock().expect("cache lock")
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Strips run-specific content from an error message so that two messages
/// can be compared: hexadecimal addresses and bracketed value dumps.
pub fn normalize_message(message: &str) -> String {
    let mut out = String::with_capacity(message.len());
    let mut depth = 0usize;
    let mut chars = message.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '[' => {
                if depth == 0 {
                    out.push_str("[…]");
                }
                depth += 1;
            }
            ']' if depth > 0 => depth -= 1,
            _ if depth > 0 => {}
            '0' if chars.peek() == Some(&'x') && chars.clone().nth(1).is_some_and(|c| c.is_ascii_hexdigit()) => {
                chars.next();
                while chars.peek().is_some_and(|c| c.is_ascii_hexdigit()) {
                    chars.next();
                }
                out.push_str("0x…");
            }
            c if c.is_whitespace() => {
                if !out.ends_with(' ') {
                    out.push(' ');
                }
            }
            c => out.push(c),
        }
    }
    out.trim().to_string()
}
