//! Normalized documentation corpora.
//!
//! A corpus file is JSON of the form
//!
//! ```json
//! {"library": "mt", "language": "python", "entries": [
//!   {"name": "mt.nn.Conv2d", "description": "...",
//!    "params": [{"name": "stride", "type": "int_pair", "required": false,
//!                "default": [1, 1], "description": "..."}],
//!    "relations": ["stride[0] > 0"]}
//! ]}
//! ```
//!
//! Parameter types are `int`, `float`, `bool`, `string`, `int_pair` or an
//! object `{"enum": ["a", "b"]}`. Relations use the grammar of
//! [`crate::constraints::expr`] and may mention parameter names (tuple
//! components by index) and the shape symbols `in_shape`, `out_shape`,
//! `in_rank` and `out_rank`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::Deserialize;
use serde_json::{json, Value as Json};

use crate::constraints::expr::{parse_relation, Expr, SymVar};
use crate::literal::Literal;

/// Symbols a relation may use besides parameter names.
pub const SHAPE_SYMBOLS: [&str; 4] = ["in_shape", "out_shape", "in_rank", "out_rank"];

/// Integer seed values always offered to integer holes.
pub const DEFAULT_SEED_POOL: [i64; 5] = [-1, 0, 1, 2, 3];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TypeTag {
    Int,
    Float,
    Bool,
    Str,
    IntPair,
    Enum(Vec<String>),
}

impl TypeTag {
    /// Whether `lit` is a well-typed value of this tag.
    pub fn admits(&self, lit: &Literal) -> bool {
        match (self, lit) {
            (TypeTag::Int, Literal::Int(_)) => true,
            (TypeTag::Float, Literal::Float(_)) => true,
            (TypeTag::Bool, Literal::Bool(_)) => true,
            (TypeTag::Str, Literal::Str(_)) => true,
            (TypeTag::IntPair, Literal::Tuple(v)) => v.len() == 2,
            (TypeTag::Enum(values), Literal::Str(s)) => values.contains(s),
            _ => false,
        }
    }

    fn to_json(&self) -> Json {
        match self {
            TypeTag::Int => json!("int"),
            TypeTag::Float => json!("float"),
            TypeTag::Bool => json!("bool"),
            TypeTag::Str => json!("string"),
            TypeTag::IntPair => json!("int_pair"),
            TypeTag::Enum(values) => json!({ "enum": values }),
        }
    }

    fn from_json(json: &Json) -> Result<TypeTag, String> {
        match json {
            Json::String(s) => match s.as_str() {
                "int" => Ok(TypeTag::Int),
                "float" => Ok(TypeTag::Float),
                "bool" => Ok(TypeTag::Bool),
                "string" => Ok(TypeTag::Str),
                "int_pair" => Ok(TypeTag::IntPair),
                other => Err(format!("unknown type tag `{other}`")),
            },
            Json::Object(map) => {
                let values = map
                    .get("enum")
                    .and_then(|v| v.as_array())
                    .ok_or_else(|| "object type must be {\"enum\": [...]}".to_string())?;
                let values = values
                    .iter()
                    .map(|v| v.as_str().map(str::to_string))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| "enum values must be strings".to_string())?;
                Ok(TypeTag::Enum(values))
            }
            _ => Err("type must be a string or an enum object".into()),
        }
    }

    /// Coerces a JSON default into a literal of this type.
    fn literal_from_json(&self, json: &Json) -> Option<Literal> {
        let lit = Literal::from_json(json)?;
        let lit = match (self, lit) {
            (TypeTag::Float, Literal::Int(v)) => Literal::Float(v as f64),
            (_, lit) => lit,
        };
        self.admits(&lit).then_some(lit)
    }
}

impl fmt::Display for TypeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeTag::Int => f.write_str("int"),
            TypeTag::Float => f.write_str("float"),
            TypeTag::Bool => f.write_str("bool"),
            TypeTag::Str => f.write_str("string"),
            TypeTag::IntPair => f.write_str("int_pair"),
            TypeTag::Enum(v) => write!(f, "enum({})", v.join("|")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub type_tag: TypeTag,
    pub required: bool,
    pub default: Option<Literal>,
    pub description: String,
}

/// A documented relationship between parameters, kept with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    pub text: String,
    pub expr: Expr<SymVar>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiEntry {
    pub qualified_name: String,
    pub description: String,
    pub params: Vec<ParamSpec>,
    pub relationship_constraints: Vec<Relation>,
}

impl ApiEntry {
    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Last dotted component, e.g. `Conv2d` for `mt.nn.Conv2d`.
    pub fn short_name(&self) -> &str {
        self.qualified_name.rsplit('.').next().unwrap_or(&self.qualified_name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocCorpus {
    pub library_id: String,
    pub language_id: String,
    pub entries: Vec<ApiEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corpus schema error{}: {message}", entry_suffix(*.entry))]
    Schema { entry: Option<usize>, message: String },
    #[error("corpus validation error{}: {message}", entry_suffix(*.entry))]
    Validation { entry: Option<usize>, message: String },
}

fn entry_suffix(entry: Option<usize>) -> String {
    entry.map(|i| format!(" in entry {i}")).unwrap_or_default()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParam {
    name: String,
    #[serde(rename = "type")]
    type_tag: Json,
    required: bool,
    #[serde(default)]
    default: Option<Json>,
    #[serde(default)]
    description: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    name: String,
    description: String,
    params: Vec<RawParam>,
    #[serde(default)]
    relations: Vec<String>,
}

impl DocCorpus {
    pub fn get(&self, name: &str) -> Option<&ApiEntry> {
        self.entries.iter().find(|e| e.qualified_name == name)
    }

    pub fn from_json_str(text: &str) -> Result<DocCorpus, CorpusError> {
        let root: Json = serde_json::from_str(text)
            .map_err(|e| CorpusError::Schema { entry: None, message: e.to_string() })?;
        let schema = |message: String| CorpusError::Schema { entry: None, message };
        let obj = root.as_object().ok_or_else(|| schema("top level must be an object".into()))?;
        for key in obj.keys() {
            if !matches!(key.as_str(), "library" | "language" | "entries") {
                return Err(schema(format!("unknown top-level field `{key}`")));
            }
        }
        let library = obj
            .get("library")
            .and_then(Json::as_str)
            .ok_or_else(|| schema("missing string field `library`".into()))?;
        let language = obj
            .get("language")
            .and_then(Json::as_str)
            .ok_or_else(|| schema("missing string field `language`".into()))?;
        let raw_entries = obj
            .get("entries")
            .and_then(Json::as_array)
            .ok_or_else(|| schema("missing array field `entries`".into()))?;

        let mut entries = Vec::with_capacity(raw_entries.len());
        for (i, raw) in raw_entries.iter().enumerate() {
            let raw: RawEntry = serde_json::from_value(raw.clone())
                .map_err(|e| CorpusError::Schema { entry: Some(i), message: e.to_string() })?;
            entries.push(convert_entry(i, raw)?);
        }
        let corpus = DocCorpus {
            library_id: library.to_string(),
            language_id: language.to_string(),
            entries,
        };
        corpus.validate()?;
        Ok(corpus)
    }

    /// Checks every corpus invariant.
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.entries.is_empty() {
            return Err(CorpusError::Validation { entry: None, message: "corpus has no entries".into() });
        }
        let mut names = HashSet::new();
        for (i, entry) in self.entries.iter().enumerate() {
            let invalid = |message: String| CorpusError::Validation { entry: Some(i), message };
            if !names.insert(entry.qualified_name.as_str()) {
                return Err(invalid(format!("duplicate API name `{}`", entry.qualified_name)));
            }
            let mut params = HashSet::new();
            for p in &entry.params {
                if !params.insert(p.name.as_str()) {
                    return Err(invalid(format!("duplicate parameter `{}`", p.name)));
                }
                if p.required && p.default.is_some() {
                    return Err(invalid(format!("required parameter `{}` has a default", p.name)));
                }
                if let TypeTag::Enum(values) = &p.type_tag {
                    if values.is_empty() {
                        return Err(invalid(format!("enum parameter `{}` has no values", p.name)));
                    }
                }
                if let Some(d) = &p.default {
                    if !p.type_tag.admits(d) {
                        return Err(invalid(format!(
                            "default {d} of `{}` does not match type {}",
                            p.name, p.type_tag
                        )));
                    }
                }
            }
            for rel in &entry.relationship_constraints {
                check_relation_symbols(entry, &rel.expr).map_err(|m| invalid(format!("relation `{}`: {m}", rel.text)))?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Json {
        let entries: Vec<Json> = self
            .entries
            .iter()
            .map(|e| {
                let params: Vec<Json> = e
                    .params
                    .iter()
                    .map(|p| {
                        let mut obj = json!({
                            "name": p.name,
                            "type": p.type_tag.to_json(),
                            "required": p.required,
                            "description": p.description,
                        });
                        if let Some(d) = &p.default {
                            obj["default"] = d.to_json();
                        }
                        obj
                    })
                    .collect();
                let mut obj = json!({
                    "name": e.qualified_name,
                    "description": e.description,
                    "params": params,
                });
                if !e.relationship_constraints.is_empty() {
                    let rels: Vec<&str> = e.relationship_constraints.iter().map(|r| r.text.as_str()).collect();
                    obj["relations"] = json!(rels);
                }
                obj
            })
            .collect();
        json!({ "library": self.library_id, "language": self.language_id, "entries": entries })
    }
}

fn convert_entry(index: usize, raw: RawEntry) -> Result<ApiEntry, CorpusError> {
    let schema = |message: String| CorpusError::Schema { entry: Some(index), message };
    let mut params = Vec::with_capacity(raw.params.len());
    for p in raw.params {
        let type_tag = TypeTag::from_json(&p.type_tag).map_err(|m| schema(format!("parameter `{}`: {m}", p.name)))?;
        let default = match &p.default {
            None | Some(Json::Null) => None,
            Some(json) => Some(type_tag.literal_from_json(json).ok_or_else(|| {
                CorpusError::Validation {
                    entry: Some(index),
                    message: format!("default {json} of `{}` does not match type {type_tag}", p.name),
                }
            })?),
        };
        params.push(ParamSpec {
            name: p.name,
            type_tag,
            required: p.required,
            default,
            description: p.description,
        });
    }
    let mut relations = Vec::with_capacity(raw.relations.len());
    for text in raw.relations {
        let expr = parse_relation(&text).map_err(|e| schema(format!("relation `{text}`: {e}")))?;
        relations.push(Relation { text, expr });
    }
    Ok(ApiEntry {
        qualified_name: raw.name,
        description: raw.description,
        params,
        relationship_constraints: relations,
    })
}

/// Every variable of a relation must be a parameter (tuple parameters need a
/// component index) or a shape symbol.
pub fn check_relation_symbols(entry: &ApiEntry, expr: &Expr<SymVar>) -> Result<(), String> {
    let mut problem = None;
    expr.visit_vars(&mut |v: &SymVar| {
        if problem.is_some() {
            return;
        }
        if SHAPE_SYMBOLS.contains(&v.name.as_str()) {
            let indexed = v.name.ends_with("shape");
            if indexed != v.index.is_some() {
                problem = Some(format!("`{v}`: shapes need an index, ranks take none"));
            }
            return;
        }
        match entry.param(&v.name) {
            None => problem = Some(format!("unknown symbol `{}`", v.name)),
            Some(p) => match (&p.type_tag, v.index) {
                (TypeTag::IntPair, Some(0 | 1)) => {}
                (TypeTag::IntPair, _) => problem = Some(format!("`{v}`: pair parameters need index 0 or 1")),
                (_, Some(_)) => problem = Some(format!("`{v}`: only pair parameters take an index")),
                _ => {}
            },
        }
    });
    problem.map_or(Ok(()), Err)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<DocCorpus, CorpusError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
    DocCorpus::from_json_str(&text)
}

/// Candidate literal pools per type tag: documented defaults of `entry`
/// merged with the engine-wide integer seed pool. Integer pools also receive
/// the components of pair defaults since pairs are filled one integer hole at
/// a time.
pub fn default_value_pool(entry: &ApiEntry, seed_pool: &[i64]) -> BTreeMap<TypeTag, Vec<Literal>> {
    let mut pools: BTreeMap<TypeTag, Vec<Literal>> = BTreeMap::new();
    pools.insert(TypeTag::Int, seed_pool.iter().map(|&v| Literal::Int(v)).collect());
    pools.insert(TypeTag::Bool, vec![Literal::Bool(false), Literal::Bool(true)]);
    for p in &entry.params {
        if let TypeTag::Enum(values) = &p.type_tag {
            pools
                .entry(p.type_tag.clone())
                .or_insert_with(|| values.iter().cloned().map(Literal::Str).collect());
        }
        let Some(d) = &p.default else { continue };
        match &p.type_tag {
            TypeTag::IntPair => {
                let ints = pools.entry(TypeTag::Int).or_default();
                ints.extend(d.int_components().into_iter().map(Literal::Int));
                pools.entry(TypeTag::IntPair).or_default().push(d.clone());
            }
            TypeTag::Enum(_) | TypeTag::Bool => {}
            tag => pools.entry(tag.clone()).or_default().push(d.clone()),
        }
    }
    for (tag, pool) in pools.iter_mut() {
        if !matches!(tag, TypeTag::Enum(_)) {
            pool.sort();
        }
        pool.dedup();
    }
    pools
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv_corpus_json() -> String {
        r#"{"library": "tf", "language": "python", "entries": [
            {"name": "Conv2D", "description": "2D convolution layer",
             "params": [
                {"name": "filters", "type": "int", "required": true, "description": "output channels"},
                {"name": "kernel_size", "type": "int", "required": true, "description": "window"},
                {"name": "strides", "type": "int_pair", "required": false, "default": [1, 1], "description": ""}
             ]},
            {"name": "Dense", "description": "densely connected layer",
             "params": [{"name": "units", "type": "int", "required": true, "description": ""}]}
        ]}"#
        .to_string()
    }

    #[test]
    fn loads_two_entries() {
        let c = DocCorpus::from_json_str(&conv_corpus_json()).unwrap();
        assert_eq!(c.entries.len(), 2);
        assert_eq!(c.entries[0].qualified_name, "Conv2D");
        assert_eq!(c.entries[1].qualified_name, "Dense");
        assert_eq!(c.entries[0].params[2].default, Some(Literal::Tuple(vec![1, 1])));
    }

    #[test]
    fn empty_entries_rejected() {
        let err = DocCorpus::from_json_str(r#"{"library":"a","language":"b","entries":[]}"#).unwrap_err();
        assert!(matches!(err, CorpusError::Validation { entry: None, .. }), "{err}");
    }

    #[test]
    fn required_with_default_rejected() {
        let text = r#"{"library":"a","language":"b","entries":[{"name":"f","description":"",
            "params":[{"name":"x","type":"int","required":true,"default":1,"description":""}]}]}"#;
        let err = DocCorpus::from_json_str(text).unwrap_err();
        assert!(matches!(err, CorpusError::Validation { entry: Some(0), .. }), "{err}");
    }

    #[test]
    fn duplicate_names_rejected() {
        let text = r#"{"library":"a","language":"b","entries":[
            {"name":"f","description":"","params":[]},
            {"name":"f","description":"","params":[]}]}"#;
        let err = DocCorpus::from_json_str(text).unwrap_err();
        assert!(matches!(err, CorpusError::Validation { entry: Some(1), .. }), "{err}");
    }

    #[test]
    fn malformed_entry_reports_index() {
        let text = r#"{"library":"a","language":"b","entries":[
            {"name":"f","description":"","params":[]},
            {"name":"g","params":[]}]}"#;
        let err = DocCorpus::from_json_str(text).unwrap_err();
        assert!(matches!(err, CorpusError::Schema { entry: Some(1), .. }), "{err}");
    }

    #[test]
    fn empty_enum_and_unknown_relation_symbol_rejected() {
        let text = r#"{"library":"a","language":"b","entries":[{"name":"f","description":"",
            "params":[{"name":"m","type":{"enum":[]},"required":true,"description":""}]}]}"#;
        assert!(matches!(DocCorpus::from_json_str(text), Err(CorpusError::Validation { .. })));
        let text = r#"{"library":"a","language":"b","entries":[{"name":"f","description":"",
            "params":[{"name":"k","type":"int","required":true,"description":""}],
            "relations":["k > zz"]}]}"#;
        let err = DocCorpus::from_json_str(text).unwrap_err();
        assert!(err.to_string().contains("unknown symbol `zz`"), "{err}");
    }

    #[test]
    fn round_trip_through_json() {
        let c = DocCorpus::from_json_str(&conv_corpus_json()).unwrap();
        let again = DocCorpus::from_json_str(&c.to_json().to_string()).unwrap();
        assert_eq!(c, again);
    }

    fn entry_with_defaults(params: Vec<ParamSpec>) -> ApiEntry {
        ApiEntry {
            qualified_name: "Conv2d".into(),
            description: String::new(),
            params,
            relationship_constraints: vec![],
        }
    }

    fn param(name: &str, tag: TypeTag, default: Option<Literal>) -> ParamSpec {
        ParamSpec { name: name.into(), type_tag: tag, required: default.is_none(), default, description: String::new() }
    }

    #[test]
    fn pool_merges_defaults_with_seed() {
        let e = entry_with_defaults(vec![
            param("stride", TypeTag::Int, Some(Literal::Int(1))),
            param("padding", TypeTag::Int, Some(Literal::Int(0))),
            param("dilation", TypeTag::Int, Some(Literal::Int(7))),
        ]);
        let pools = default_value_pool(&e, &DEFAULT_SEED_POOL);
        let ints: Vec<i64> = pools[&TypeTag::Int].iter().filter_map(Literal::as_int).collect();
        assert_eq!(ints, vec![-1, 0, 1, 2, 3, 7]);
    }

    #[test]
    fn pool_without_defaults_is_seed() {
        let e = entry_with_defaults(vec![param("k", TypeTag::Int, None)]);
        let pools = default_value_pool(&e, &DEFAULT_SEED_POOL);
        let ints: Vec<i64> = pools[&TypeTag::Int].iter().filter_map(Literal::as_int).collect();
        assert_eq!(ints, vec![-1, 0, 1, 2, 3]);
    }

    #[test]
    fn bool_pool_is_closed() {
        let e = entry_with_defaults(vec![param("bias", TypeTag::Bool, Some(Literal::Bool(true)))]);
        let pools = default_value_pool(&e, &DEFAULT_SEED_POOL);
        assert_eq!(pools[&TypeTag::Bool], vec![Literal::Bool(false), Literal::Bool(true)]);
    }
}
