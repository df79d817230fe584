//! Literal values that appear as call arguments, documented defaults and hole
//! candidates.

use std::cmp::Ordering;
use std::fmt;

use serde_json::Value as Json;

/// A literal argument value.
///
/// Floats compare by bit pattern so that literals can be deduplicated and
/// used as map keys.
#[derive(Debug, Clone)]
pub enum Literal {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    Tuple(Vec<i64>),
}

impl Literal {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Literal::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Literal::Int(_) => "int",
            Literal::Float(_) => "float",
            Literal::Bool(_) => "bool",
            Literal::Str(_) => "string",
            Literal::Tuple(_) => "tuple",
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Literal::Bool(_) => 0,
            Literal::Int(_) => 1,
            Literal::Float(_) => 2,
            Literal::Str(_) => 3,
            Literal::Tuple(_) => 4,
        }
    }

    /// Integer components of this literal: the value itself for ints, the
    /// elements for tuples, nothing otherwise.
    pub fn int_components(&self) -> Vec<i64> {
        match self {
            Literal::Int(v) => vec![*v],
            Literal::Tuple(vs) => vs.clone(),
            _ => Vec::new(),
        }
    }

    pub fn to_json(&self) -> Json {
        match self {
            Literal::Int(v) => Json::from(*v),
            Literal::Float(v) => Json::from(*v),
            Literal::Bool(v) => Json::from(*v),
            Literal::Str(v) => Json::from(v.clone()),
            Literal::Tuple(vs) => Json::from(vs.clone()),
        }
    }

    /// Converts a JSON scalar (or an array of integers) into a literal.
    pub fn from_json(json: &Json) -> Option<Literal> {
        match json {
            Json::Bool(b) => Some(Literal::Bool(*b)),
            Json::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Some(Literal::Int(i))
                } else {
                    n.as_f64().map(Literal::Float)
                }
            }
            Json::String(s) => Some(Literal::Str(s.clone())),
            Json::Array(items) => items
                .iter()
                .map(|v| v.as_i64())
                .collect::<Option<Vec<_>>>()
                .map(Literal::Tuple),
            _ => None,
        }
    }

    /// Compact rendering: no spaces inside tuples.
    pub fn compact(&self) -> String {
        match self {
            Literal::Tuple(vs) => {
                let parts: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
                format!("({})", parts.join(","))
            }
            other => other.to_string(),
        }
    }
}

impl PartialEq for Literal {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Literal {}

impl std::hash::Hash for Literal {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            Literal::Int(v) => v.hash(state),
            Literal::Float(v) => v.to_bits().hash(state),
            Literal::Bool(v) => v.hash(state),
            Literal::Str(v) => v.hash(state),
            Literal::Tuple(v) => v.hash(state),
        }
    }
}

impl PartialOrd for Literal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Literal {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Literal::Int(a), Literal::Int(b)) => a.cmp(b),
            (Literal::Float(a), Literal::Float(b)) => a.total_cmp(b),
            (Literal::Bool(a), Literal::Bool(b)) => a.cmp(b),
            (Literal::Str(a), Literal::Str(b)) => a.cmp(b),
            (Literal::Tuple(a), Literal::Tuple(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Int(v) => write!(f, "{v}"),
            Literal::Float(v) => write!(f, "{v:?}"),
            Literal::Bool(v) => write!(f, "{v}"),
            Literal::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
            Literal::Tuple(vs) => {
                let parts: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
                write!(f, "({})", parts.join(", "))
            }
        }
    }
}
