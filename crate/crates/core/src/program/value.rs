//! Runtime values exchanged with execution backends and stored in tests.
//!
//! JSON notation: scalars are plain JSON (`1` is an int, `1.0` a float),
//! tensors are `{"tensor": {"shape": [2, 3], "data": [...]}}` in row-major
//! order, tables are `{"table": [{"name": "age", "type": "int", "values":
//! [...]}]}`.

use std::fmt;

use serde_json::{json, Value as Json};

/// Absolute tolerance for float comparison.
pub const FLOAT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Tensor, String> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(format!("tensor of shape {shape:?} needs {n} elements, got {}", data.len()));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Tensor {
        let n = shape.iter().product();
        Tensor { shape, data: vec![0.0; n] }
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Row-major strides.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.shape.len()];
        for i in (0..self.shape.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.shape[i + 1];
        }
        strides
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Int(Vec<i64>),
    Float(Vec<f64>),
    Bool(Vec<bool>),
    Str(Vec<String>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Int(v) => v.len(),
            ColumnData::Float(v) => v.len(),
            ColumnData::Bool(v) => v.len(),
            ColumnData::Str(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            ColumnData::Int(_) => "int",
            ColumnData::Float(_) => "float",
            ColumnData::Bool(_) => "bool",
            ColumnData::Str(_) => "string",
        }
    }

    /// Rows picked by index, in the given order.
    pub fn take(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Int(v) => ColumnData::Int(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Float(v) => ColumnData::Float(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Bool(v) => ColumnData::Bool(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Str(v) => ColumnData::Str(rows.iter().map(|&r| v[r].clone()).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<Column>,
}

impl Table {
    pub fn new(columns: Vec<Column>) -> Result<Table, String> {
        if let Some(first) = columns.first() {
            let n = first.data.len();
            if let Some(bad) = columns.iter().find(|c| c.data.len() != n) {
                return Err(format!("column `{}` has {} rows, expected {n}", bad.name, bad.data.len()));
            }
        }
        Ok(Table { columns })
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.data.len())
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn take(&self, rows: &[usize]) -> Table {
        Table {
            columns: self
                .columns
                .iter()
                .map(|c| Column { name: c.name.clone(), data: c.data.take(rows) })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    Tensor(Tensor),
    Table(Table),
}

fn close(a: f64, b: f64) -> bool {
    (a.is_nan() && b.is_nan()) || a == b || (a - b).abs() <= FLOAT_TOLERANCE
}

impl Value {
    pub fn kind(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Bool(_) => "bool",
            Value::Str(_) => "string",
            Value::Tensor(_) => "tensor",
            Value::Table(_) => "table",
        }
    }

    pub fn as_tensor(&self) -> Option<&Tensor> {
        match self {
            Value::Tensor(t) => Some(t),
            _ => None,
        }
    }

    /// Equality under the float tolerance; shapes, ints, bools and strings
    /// compare exactly.
    pub fn approx_eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Float(a), Value::Float(b)) => close(*a, *b),
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::Tensor(a), Value::Tensor(b)) => {
                a.shape == b.shape && a.data.iter().zip(&b.data).all(|(x, y)| close(*x, *y))
            }
            (Value::Table(a), Value::Table(b)) => {
                a.columns.len() == b.columns.len()
                    && a.columns.iter().zip(&b.columns).all(|(x, y)| {
                        x.name == y.name
                            && match (&x.data, &y.data) {
                                (ColumnData::Float(p), ColumnData::Float(q)) => {
                                    p.len() == q.len() && p.iter().zip(q).all(|(u, v)| close(*u, *v))
                                }
                                (p, q) => p == q,
                            }
                    })
            }
            _ => false,
        }
    }

    pub fn to_json(&self) -> Json {
        match self {
            Value::Int(v) => json!(v),
            Value::Float(v) => json!(v),
            Value::Bool(v) => json!(v),
            Value::Str(v) => json!(v),
            Value::Tensor(t) => json!({ "tensor": { "shape": t.shape, "data": t.data } }),
            Value::Table(t) => {
                let cols: Vec<Json> = t
                    .columns
                    .iter()
                    .map(|c| {
                        let values = match &c.data {
                            ColumnData::Int(v) => json!(v),
                            ColumnData::Float(v) => json!(v),
                            ColumnData::Bool(v) => json!(v),
                            ColumnData::Str(v) => json!(v),
                        };
                        json!({ "name": c.name, "type": c.data.type_name(), "values": values })
                    })
                    .collect();
                json!({ "table": cols })
            }
        }
    }

    pub fn from_json(json: &Json) -> Result<Value, String> {
        match json {
            Json::Bool(b) => Ok(Value::Bool(*b)),
            Json::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Ok(Value::Int(i))
                } else {
                    n.as_f64().map(Value::Float).ok_or_else(|| format!("unsupported number {n}"))
                }
            }
            Json::String(s) => Ok(Value::Str(s.clone())),
            Json::Object(map) => {
                if let Some(t) = map.get("tensor") {
                    let shape = t
                        .get("shape")
                        .and_then(Json::as_array)
                        .ok_or("tensor needs a `shape` array")?
                        .iter()
                        .map(|d| d.as_u64().map(|d| d as usize).ok_or("tensor shape entries must be non-negative ints"))
                        .collect::<Result<Vec<_>, _>>()?;
                    let data = t
                        .get("data")
                        .and_then(Json::as_array)
                        .ok_or("tensor needs a `data` array")?
                        .iter()
                        .map(|d| d.as_f64().ok_or("tensor data must be numbers"))
                        .collect::<Result<Vec<_>, _>>()?;
                    return Tensor::new(shape, data).map(Value::Tensor);
                }
                if let Some(cols) = map.get("table") {
                    let cols = cols.as_array().ok_or("table must be an array of columns")?;
                    let mut columns = Vec::with_capacity(cols.len());
                    for c in cols {
                        let name = c.get("name").and_then(Json::as_str).ok_or("column needs a `name`")?;
                        let ty = c.get("type").and_then(Json::as_str).ok_or("column needs a `type`")?;
                        let values = c.get("values").and_then(Json::as_array).ok_or("column needs `values`")?;
                        let bad = || format!("column `{name}` has values that are not {ty}");
                        let data = match ty {
                            "int" => ColumnData::Int(values.iter().map(Json::as_i64).collect::<Option<_>>().ok_or_else(bad)?),
                            "float" => ColumnData::Float(values.iter().map(Json::as_f64).collect::<Option<_>>().ok_or_else(bad)?),
                            "bool" => ColumnData::Bool(values.iter().map(Json::as_bool).collect::<Option<_>>().ok_or_else(bad)?),
                            "string" => ColumnData::Str(
                                values.iter().map(|v| v.as_str().map(str::to_string)).collect::<Option<_>>().ok_or_else(bad)?,
                            ),
                            other => return Err(format!("unknown column type `{other}`")),
                        };
                        columns.push(Column { name: name.to_string(), data });
                    }
                    return Table::new(columns).map(Value::Table);
                }
                Err("object values must be `tensor` or `table`".into())
            }
            _ => Err(format!("unsupported value {json}")),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Tensor(t) if t.data.len() > 8 => write!(f, "tensor{:?}", t.shape),
            Value::Table(t) => write!(f, "table[{} rows x {} cols]", t.rows(), t.columns.len()),
            other => write!(f, "{}", other.to_json()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let vals = [
            Value::Int(3),
            Value::Float(1.0),
            Value::Bool(true),
            Value::Str("x".into()),
            Value::Tensor(Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.5, -1.0]).unwrap()),
            Value::Table(
                Table::new(vec![
                    Column { name: "age".into(), data: ColumnData::Int(vec![3, 4]) },
                    Column { name: "name".into(), data: ColumnData::Str(vec!["a".into(), "b".into()]) },
                ])
                .unwrap(),
            ),
        ];
        for v in vals {
            let text = v.to_json().to_string();
            let back = Value::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
            assert_eq!(back, v, "{text}");
        }
        assert_eq!(Value::Float(1.0).to_json().to_string(), "1.0");
    }

    #[test]
    fn tolerance_applies_to_floats_only() {
        let a = Value::Tensor(Tensor::new(vec![2], vec![1.0, 2.0]).unwrap());
        let b = Value::Tensor(Tensor::new(vec![2], vec![1.0 + 5e-7, 2.0]).unwrap());
        let c = Value::Tensor(Tensor::new(vec![2], vec![1.0 + 5e-6, 2.0]).unwrap());
        let d = Value::Tensor(Tensor::new(vec![1, 2], vec![1.0, 2.0]).unwrap());
        assert!(a.approx_eq(&b));
        assert!(!a.approx_eq(&c));
        assert!(!a.approx_eq(&d));
        assert!(!Value::Int(1).approx_eq(&Value::Float(1.0)));
    }

    #[test]
    fn invariants_are_checked() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        let bad = Table::new(vec![
            Column { name: "a".into(), data: ColumnData::Int(vec![1]) },
            Column { name: "b".into(), data: ColumnData::Int(vec![]) },
        ]);
        assert!(bad.is_err());
        assert_eq!(Tensor::zeros(vec![2, 3, 4]).strides(), vec![12, 4, 1]);
    }
}
