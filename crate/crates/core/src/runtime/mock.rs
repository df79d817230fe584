//! Deterministic in-process mock of a source library (`mf.*`, Keras/dplyr
//! flavoured) and a target library (`mt.*`, PyTorch/pandas flavoured).
//!
//! Layers with weights use fixed formulas so that source and target agree
//! exactly when their parameters correspond:
//!
//! * convolution weight `w[o][c][a][b] = ((7o + 5c + 3a + 2b) mod 11 - 5) / 10`
//! * dense weight `W[u][f] = ((3f + 5u) mod 7 - 3) / 4`
//!
//! Source image layers are channels-first except the global pooling layers,
//! which read channels-last input; their target counterparts are
//! channels-first and need a permutation first.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};

use crate::literal::Literal;
use crate::program::syntax::{self, Call};
use crate::program::{Column, ColumnData, Environment, Table, Tensor, Value};

use super::{Runtime, RuntimeError};

/// Message templates. Each one matches exactly one error pattern.
pub mod messages {
    fn list(dims: &[i64]) -> String {
        let parts: Vec<String> = dims.iter().map(|d| d.to_string()).collect();
        format!("[{}]", parts.join(", "))
    }

    pub fn negative_dimension(kind: &str, dims: &[i64]) -> String {
        format!("Trying to create {kind} with negative dimension: {}", list(dims))
    }

    pub fn rank_mismatch(expected: usize, got: usize, weight: Option<&[i64]>) -> String {
        match weight {
            Some(w) => format!(
                "Expected {expected}-dimensional input for {expected}-dimensional weight {}, but got {got}-dimensional input instead",
                list(w)
            ),
            None => format!("Expected {expected}-dimensional input, but got {got}-dimensional input instead"),
        }
    }

    pub fn size_mismatch(expected: i64, unit: &str, weight: &[i64], got: usize) -> String {
        format!("Expected {expected}-{unit} input for weight {}, but got {got}-{unit} input instead", list(weight))
    }

    pub fn out_of_range(op: &str, arg: &str, position: usize, rank: usize, value: i64) -> String {
        let r = rank as i64;
        format!("{op}(): argument {arg} (position {position}) must be in range [{}, {}], not {value}", -r, r - 1)
    }

    pub fn unsupported(subject: &str) -> String {
        format!("{subject} is not supported")
    }

    pub fn not_allowed(op: &str, subject: &str) -> String {
        format!("{op}(): {subject} is not allowed")
    }

    pub fn not_found(what: &str) -> String {
        format!("{what} is not found")
    }
}

use messages as msg;

#[derive(Debug, Default, Clone, Copy)]
pub struct MockRuntime;

impl Runtime for MockRuntime {
    fn backend(&self) -> &str {
        "mock"
    }

    fn eval(&self, code: &str, inputs: &Environment) -> Result<Value, RuntimeError> {
        run_code(code, inputs).map_err(RuntimeError::Raised)
    }
}

/// Executes code and returns the value of its last binding.
pub fn run_code(code: &str, inputs: &Environment) -> Result<Value, String> {
    let parsed = syntax::parse(code, false).map_err(|e| format!("malformed program {e} is not accepted"))?;
    let mut env: HashMap<&str, Value> = inputs.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
    let mut last = None;
    for call in &parsed.calls {
        let mut operands = Vec::with_capacity(call.operands.len());
        for name in &call.operands {
            operands.push(env.get(name.as_str()).ok_or_else(|| format!("name {name} is not defined"))?);
        }
        let value = call_op(call, &operands)?;
        env.insert(&call.binds, value);
        last = Some(call.binds.as_str());
    }
    let last = last.ok_or_else(|| "empty program is not supported".to_string())?;
    Ok(env.remove(last).expect("bound above"))
}

/// Operation names known to the mock, for documentation and tests.
pub const OPERATIONS: &[&str] = &[
    "mf.math.scale",
    "mf.math.shift",
    "mf.math.abs",
    "mf.math.negate",
    "mf.math.clip",
    "mf.math.reduce_sum",
    "mf.math.reduce_mean",
    "mf.layers.Conv2D",
    "mf.layers.Dense",
    "mf.layers.ReLU",
    "mf.layers.GlobalAveragePooling2D",
    "mf.layers.GlobalMaxPooling2D",
    "mf.layers.Flatten",
    "mf.layers.Dropout",
    "mf.layers.Softmax",
    "mf.layers.UpSampling2D",
    "mf.dplyr.filter",
    "mf.dplyr.arrange",
    "mf.dplyr.slice_head",
    "mf.dplyr.distinct",
    "mt.mul",
    "mt.add",
    "mt.sub",
    "mt.div",
    "mt.abs",
    "mt.neg",
    "mt.clamp",
    "mt.sum",
    "mt.mean",
    "mt.transpose",
    "mt.permute",
    "mt.float",
    "mt.flatten",
    "mt.nn.Conv2d",
    "mt.nn.Linear",
    "mt.nn.ReLU",
    "mt.nn.Sigmoid",
    "mt.nn.Tanh",
    "mt.nn.GlobalAvgPool2d",
    "mt.nn.GlobalMaxPool2d",
    "mt.nn.Flatten",
    "mt.nn.Dropout",
    "mt.nn.Softmax",
    "mt.nn.Upsample",
    "mt.pandas.query",
    "mt.pandas.sort_values",
    "mt.pandas.head",
    "mt.pandas.drop_duplicates",
];

struct Args {
    op: String,
    values: BTreeMap<String, Literal>,
}

impl Args {
    fn get(&self, name: &str) -> &Literal {
        &self.values[name]
    }

    fn type_error(&self, name: &str) -> String {
        msg::unsupported(&format!("{}(): argument {name} of type {}", self.op, self.get(name).kind_name()))
    }

    fn int(&self, name: &str) -> Result<i64, String> {
        match self.get(name) {
            Literal::Int(v) => Ok(*v),
            _ => Err(self.type_error(name)),
        }
    }

    fn float(&self, name: &str) -> Result<f64, String> {
        match self.get(name) {
            Literal::Int(v) => Ok(*v as f64),
            Literal::Float(v) => Ok(*v),
            _ => Err(self.type_error(name)),
        }
    }

    fn pair(&self, name: &str) -> Result<(i64, i64), String> {
        match self.get(name) {
            Literal::Int(v) => Ok((*v, *v)),
            Literal::Tuple(v) if v.len() == 2 => Ok((v[0], v[1])),
            _ => Err(self.type_error(name)),
        }
    }

    fn string(&self, name: &str) -> Result<&str, String> {
        match self.get(name) {
            Literal::Str(s) => Ok(s),
            _ => Err(self.type_error(name)),
        }
    }

    fn boolean(&self, name: &str) -> Result<bool, String> {
        match self.get(name) {
            Literal::Bool(b) => Ok(*b),
            _ => Err(self.type_error(name)),
        }
    }
}

type Signature<'a> = &'a [(&'a str, Option<Literal>)];

fn bind(call: &Call, sig: Signature) -> Result<Args, String> {
    let op = call.callee.rsplit('.').next().unwrap_or(&call.callee).to_string();
    let mut values = BTreeMap::new();
    if call.positional.len() > sig.len() {
        return Err(msg::not_allowed(&op, "extra positional argument"));
    }
    for (lit, (name, _)) in call.positional.iter().zip(sig) {
        values.insert(name.to_string(), lit.clone());
    }
    for (k, v) in &call.keyword {
        if !sig.iter().any(|(name, _)| name == k) {
            return Err(msg::not_allowed(&op, &format!("keyword {k}")));
        }
        if values.insert(k.clone(), v.clone()).is_some() {
            return Err(msg::not_allowed(&op, &format!("repeated argument {k}")));
        }
    }
    for (name, default) in sig {
        if !values.contains_key(*name) {
            match default {
                Some(d) => {
                    values.insert(name.to_string(), d.clone());
                }
                None => return Err(msg::not_allowed(&op, &format!("omitted argument {name}"))),
            }
        }
    }
    Ok(Args { op, values })
}

fn one_operand<'a>(call: &Call, operands: &[&'a Value]) -> Result<&'a Value, String> {
    match operands {
        [v] => Ok(v),
        _ => Err(msg::not_allowed(short(call), "multiple input")),
    }
}

fn short(call: &Call) -> &str {
    call.callee.rsplit('.').next().unwrap_or(&call.callee)
}

fn tensor<'a>(call: &Call, operands: &[&'a Value]) -> Result<&'a Tensor, String> {
    match one_operand(call, operands)? {
        Value::Tensor(t) => Ok(t),
        other => Err(msg::unsupported(&format!("{} input", other.kind()))),
    }
}

fn table<'a>(call: &Call, operands: &[&'a Value]) -> Result<&'a Table, String> {
    match one_operand(call, operands)? {
        Value::Table(t) => Ok(t),
        other => Err(msg::unsupported(&format!("{} input", other.kind()))),
    }
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Value {
    Value::Tensor(Tensor { shape: t.shape.clone(), data: t.data.iter().map(|&x| f(x)).collect() })
}

fn call_op(call: &Call, operands: &[&Value]) -> Result<Value, String> {
    let f = |v: f64| Some(Literal::Float(v));
    let i = |v: i64| Some(Literal::Int(v));
    let p = |a: i64, b: i64| Some(Literal::Tuple(vec![a, b]));
    let s = |v: &str| Some(Literal::Str(v.into()));
    let b = |v: bool| Some(Literal::Bool(v));
    match call.callee.as_str() {
        "mf.math.scale" => {
            let a = bind(call, &[("factor", None)])?;
            let k = a.float("factor")?;
            Ok(map(tensor(call, operands)?, |x| x * k))
        }
        "mf.math.shift" => {
            let a = bind(call, &[("offset", None)])?;
            let k = a.float("offset")?;
            Ok(map(tensor(call, operands)?, |x| x + k))
        }
        "mt.mul" | "mt.add" | "mt.sub" | "mt.div" => {
            let a = bind(call, &[("other", None)])?;
            let k = a.float("other")?;
            let t = tensor(call, operands)?;
            Ok(match call.callee.as_str() {
                "mt.mul" => map(t, |x| x * k),
                "mt.add" => map(t, |x| x + k),
                "mt.sub" => map(t, |x| x - k),
                _ => {
                    if k == 0.0 {
                        return Err(msg::unsupported("division by zero"));
                    }
                    map(t, |x| x / k)
                }
            })
        }
        "mf.math.abs" | "mt.abs" => {
            bind(call, &[])?;
            Ok(map(tensor(call, operands)?, f64::abs))
        }
        "mf.math.negate" | "mt.neg" => {
            bind(call, &[])?;
            Ok(map(tensor(call, operands)?, |x| -x))
        }
        "mf.layers.ReLU" | "mt.nn.ReLU" => {
            bind(call, &[])?;
            Ok(map(tensor(call, operands)?, |x| x.max(0.0)))
        }
        "mt.nn.Sigmoid" => {
            bind(call, &[])?;
            Ok(map(tensor(call, operands)?, |x| 1.0 / (1.0 + (-x).exp())))
        }
        "mt.nn.Tanh" => {
            bind(call, &[])?;
            Ok(map(tensor(call, operands)?, f64::tanh))
        }
        "mf.math.clip" => {
            let a = bind(call, &[("min_value", None), ("max_value", None)])?;
            let (lo, hi) = (a.float("min_value")?, a.float("max_value")?);
            Ok(map(tensor(call, operands)?, |x| x.max(lo).min(hi)))
        }
        "mt.clamp" => {
            let a = bind(call, &[("min", None), ("max", None)])?;
            let (lo, hi) = (a.float("min")?, a.float("max")?);
            Ok(map(tensor(call, operands)?, |x| x.max(lo).min(hi)))
        }
        "mf.math.reduce_sum" | "mf.math.reduce_mean" => {
            let a = bind(call, &[("axis", None)])?;
            let t = tensor(call, operands)?;
            let op = if call.callee.ends_with("sum") { "reduce_sum" } else { "reduce_mean" };
            let d = normalize_dim(op, "axis", 1, t.rank(), a.int("axis")?)?;
            Ok(Value::Tensor(reduce(t, d, call.callee.ends_with("mean"))))
        }
        "mt.sum" | "mt.mean" => {
            let a = bind(call, &[("dim", None)])?;
            let t = tensor(call, operands)?;
            let d = normalize_dim(short(call), "dim", 1, t.rank(), a.int("dim")?)?;
            Ok(Value::Tensor(reduce(t, d, call.callee == "mt.mean")))
        }
        "mt.transpose" => {
            let a = bind(call, &[("dim0", None), ("dim1", None)])?;
            let t = tensor(call, operands)?;
            let d0 = normalize_dim("transpose", "dim0", 1, t.rank(), a.int("dim0")?)?;
            let d1 = normalize_dim("transpose", "dim1", 2, t.rank(), a.int("dim1")?)?;
            let mut perm: Vec<usize> = (0..t.rank()).collect();
            perm.swap(d0, d1);
            Ok(Value::Tensor(permute(t, &perm)))
        }
        "mt.permute" => {
            let t = tensor(call, operands)?;
            if !call.keyword.is_empty() {
                return Err(msg::not_allowed("permute", "keyword argument"));
            }
            let dims = call
                .positional
                .iter()
                .map(|l| l.as_int().ok_or_else(|| msg::unsupported(&format!("permute(): argument dims of type {}", l.kind_name()))))
                .collect::<Result<Vec<_>, _>>()?;
            if dims.len() != t.rank() {
                return Err(msg::rank_mismatch(dims.len(), t.rank(), None));
            }
            let mut perm = Vec::with_capacity(dims.len());
            for (k, &d) in dims.iter().enumerate() {
                perm.push(normalize_dim("permute", "dims", k + 1, t.rank(), d)?);
            }
            let distinct: HashSet<usize> = perm.iter().copied().collect();
            if distinct.len() != perm.len() {
                return Err(msg::not_allowed("permute", "repeated dim"));
            }
            Ok(Value::Tensor(permute(t, &perm)))
        }
        "mt.float" => {
            bind(call, &[])?;
            Ok(Value::Tensor(tensor(call, operands)?.clone()))
        }
        "mt.flatten" => {
            bind(call, &[])?;
            let t = tensor(call, operands)?;
            flatten_from(t, 1).map(Value::Tensor)
        }
        "mf.layers.Flatten" => {
            bind(call, &[])?;
            let t = tensor(call, operands)?;
            flatten_from(t, 1).map(Value::Tensor)
        }
        "mt.nn.Flatten" => {
            let a = bind(call, &[("start_dim", i(1))])?;
            let t = tensor(call, operands)?;
            let d = normalize_dim("flatten", "start_dim", 1, t.rank(), a.int("start_dim")?)?;
            flatten_from(t, d).map(Value::Tensor)
        }
        "mf.layers.Dropout" => {
            let a = bind(call, &[("rate", None)])?;
            dropout_check(a.float("rate")?)?;
            Ok(Value::Tensor(tensor(call, operands)?.clone()))
        }
        "mt.nn.Dropout" => {
            let a = bind(call, &[("p", f(0.5))])?;
            dropout_check(a.float("p")?)?;
            Ok(Value::Tensor(tensor(call, operands)?.clone()))
        }
        "mf.layers.Softmax" => {
            let a = bind(call, &[("axis", i(-1))])?;
            let t = tensor(call, operands)?;
            let d = normalize_dim("softmax", "axis", 1, t.rank(), a.int("axis")?)?;
            Ok(Value::Tensor(softmax(t, d)))
        }
        "mt.nn.Softmax" => {
            let a = bind(call, &[("dim", None)])?;
            let t = tensor(call, operands)?;
            let d = normalize_dim("softmax", "dim", 1, t.rank(), a.int("dim")?)?;
            Ok(Value::Tensor(softmax(t, d)))
        }
        "mf.layers.GlobalAveragePooling2D" | "mf.layers.GlobalMaxPooling2D" => {
            bind(call, &[])?;
            let t = tensor(call, operands)?;
            if t.rank() != 4 {
                return Err(msg::rank_mismatch(4, t.rank(), None));
            }
            // channels-last: pool over axes 1 and 2
            let nchw = permute(t, &[0, 3, 1, 2]);
            Ok(Value::Tensor(global_pool(&nchw, call.callee.contains("Max"))))
        }
        "mt.nn.GlobalAvgPool2d" | "mt.nn.GlobalMaxPool2d" => {
            bind(call, &[])?;
            let t = tensor(call, operands)?;
            if t.rank() != 4 {
                return Err(msg::rank_mismatch(4, t.rank(), None));
            }
            Ok(Value::Tensor(global_pool(t, call.callee.contains("Max"))))
        }
        "mf.layers.Conv2D" => {
            let a = bind(
                call,
                &[("filters", None), ("kernel_size", None), ("strides", p(1, 1)), ("padding", s("valid"))],
            )?;
            let t = tensor(call, operands)?;
            let filters = a.int("filters")?;
            let (k0, k1) = a.pair("kernel_size")?;
            let stride = a.pair("strides")?;
            let pad = match a.string("padding")? {
                "valid" => (0, 0),
                "same" => ((k0 - 1) / 2, (k1 - 1) / 2),
                other => return Err(msg::unsupported(&format!("padding mode {other}"))),
            };
            let in_ch = t.shape.get(1).map_or(0, |&c| c as i64);
            conv2d(t, in_ch, filters, (k0, k1), stride, pad).map(Value::Tensor)
        }
        "mt.nn.Conv2d" => {
            let a = bind(
                call,
                &[
                    ("in_channels", None),
                    ("out_channels", None),
                    ("kernel_size", None),
                    ("stride", p(1, 1)),
                    ("padding", p(0, 0)),
                ],
            )?;
            let t = tensor(call, operands)?;
            conv2d(
                t,
                a.int("in_channels")?,
                a.int("out_channels")?,
                a.pair("kernel_size")?,
                a.pair("stride")?,
                a.pair("padding")?,
            )
            .map(Value::Tensor)
        }
        "mf.layers.Dense" => {
            let a = bind(call, &[("units", None)])?;
            let t = tensor(call, operands)?;
            let features = t.shape.get(1).map_or(0, |&f| f as i64);
            dense(t, features, a.int("units")?).map(Value::Tensor)
        }
        "mt.nn.Linear" => {
            let a = bind(call, &[("in_features", None), ("out_features", None)])?;
            let t = tensor(call, operands)?;
            dense(t, a.int("in_features")?, a.int("out_features")?).map(Value::Tensor)
        }
        "mf.layers.UpSampling2D" => {
            let a = bind(call, &[("size", p(2, 2))])?;
            upsample(tensor(call, operands)?, a.pair("size")?, "size").map(Value::Tensor)
        }
        "mt.nn.Upsample" => {
            let a = bind(call, &[("scale_factor", None)])?;
            upsample(tensor(call, operands)?, a.pair("scale_factor")?, "scale_factor").map(Value::Tensor)
        }
        "mf.dplyr.filter" => {
            let a = bind(call, &[("column", None), ("threshold", None)])?;
            let t = table(call, operands)?;
            filter_rows(t, a.string("column")?, "gt", a.float("threshold")?).map(Value::Table)
        }
        "mt.pandas.query" => {
            let a = bind(call, &[("column", None), ("op", None), ("value", None)])?;
            let t = table(call, operands)?;
            filter_rows(t, a.string("column")?, a.string("op")?, a.float("value")?).map(Value::Table)
        }
        "mf.dplyr.arrange" => {
            let a = bind(call, &[("column", None), ("desc", b(false))])?;
            sort_rows(table(call, operands)?, a.string("column")?, a.boolean("desc")?).map(Value::Table)
        }
        "mt.pandas.sort_values" => {
            let a = bind(call, &[("by", None), ("ascending", b(true))])?;
            sort_rows(table(call, operands)?, a.string("by")?, !a.boolean("ascending")?).map(Value::Table)
        }
        "mf.dplyr.slice_head" => {
            let a = bind(call, &[("n", None)])?;
            head(table(call, operands)?, a.int("n")?).map(Value::Table)
        }
        "mt.pandas.head" => {
            let a = bind(call, &[("n", i(5))])?;
            head(table(call, operands)?, a.int("n")?).map(Value::Table)
        }
        "mf.dplyr.distinct" | "mt.pandas.drop_duplicates" => {
            bind(call, &[])?;
            Ok(Value::Table(distinct(table(call, operands)?)))
        }
        other => Err(format!("{other} is not defined")),
    }
}

fn normalize_dim(op: &str, arg: &str, position: usize, rank: usize, d: i64) -> Result<usize, String> {
    let r = rank as i64;
    if rank == 0 || d < -r || d >= r {
        return Err(msg::out_of_range(op, arg, position, rank, d));
    }
    Ok(if d < 0 { (d + r) as usize } else { d as usize })
}

fn dropout_check(p: f64) -> Result<(), String> {
    if !(0.0..=1.0).contains(&p) {
        return Err(msg::unsupported("dropout probability outside [0, 1]"));
    }
    Ok(())
}

/// Multi-index iteration helper: calls `f(flat_index, coords)` in row-major
/// order.
fn for_each_index(shape: &[usize], mut f: impl FnMut(usize, &[usize])) {
    let n: usize = shape.iter().product();
    let mut idx = vec![0usize; shape.len()];
    for flat in 0..n {
        f(flat, &idx);
        for d in (0..shape.len()).rev() {
            idx[d] += 1;
            if idx[d] < shape[d] {
                break;
            }
            idx[d] = 0;
        }
    }
}

fn permute(t: &Tensor, perm: &[usize]) -> Tensor {
    let shape: Vec<usize> = perm.iter().map(|&p| t.shape[p]).collect();
    let strides = t.strides();
    let mut data = vec![0.0; t.data.len()];
    for_each_index(&shape, |flat, idx| {
        let src: usize = idx.iter().zip(perm).map(|(&i, &p)| i * strides[p]).sum();
        data[flat] = t.data[src];
    });
    Tensor { shape, data }
}

fn reduce(t: &Tensor, dim: usize, mean: bool) -> Tensor {
    let mut shape = t.shape.clone();
    let len = shape.remove(dim);
    let mut out = Tensor::zeros(shape);
    let out_strides = out.strides();
    for_each_index(&t.shape, |flat, idx| {
        let mut o = 0;
        let mut k = 0;
        for (d, &i) in idx.iter().enumerate() {
            if d != dim {
                o += i * out_strides[k];
                k += 1;
            }
        }
        out.data[o] += t.data[flat];
    });
    if mean && len > 0 {
        for v in &mut out.data {
            *v /= len as f64;
        }
    }
    out
}

fn softmax(t: &Tensor, dim: usize) -> Tensor {
    let moved: Vec<usize> = (0..t.rank()).filter(|&d| d != dim).chain([dim]).collect();
    let p = permute(t, &moved);
    let len = t.shape[dim].max(1);
    let mut data = p.data.clone();
    for row in data.chunks_mut(len) {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|x| (x - m).exp()).sum();
        for x in row.iter_mut() {
            *x = (*x - m).exp() / sum;
        }
    }
    let back: Vec<usize> = {
        let mut inv = vec![0; moved.len()];
        for (i, &m) in moved.iter().enumerate() {
            inv[m] = i;
        }
        inv
    };
    permute(&Tensor { shape: p.shape, data }, &back)
}

fn flatten_from(t: &Tensor, start: usize) -> Result<Tensor, String> {
    if t.rank() < 2 && start > 0 {
        return Err(msg::rank_mismatch(2, t.rank(), None));
    }
    let mut shape: Vec<usize> = t.shape[..start].to_vec();
    shape.push(t.shape[start..].iter().product());
    Ok(Tensor { shape, data: t.data.clone() })
}

fn global_pool(t: &Tensor, max: bool) -> Tensor {
    let (n, c, h, w) = (t.shape[0], t.shape[1], t.shape[2], t.shape[3]);
    let mut out = Tensor::zeros(vec![n, c]);
    for (i, chunk) in t.data.chunks(h * w).enumerate().take(n * c) {
        out.data[i] = if max {
            chunk.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        } else {
            chunk.iter().sum::<f64>() / chunk.len().max(1) as f64
        };
    }
    out
}

fn conv_weight(o: usize, c: usize, a: usize, b: usize) -> f64 {
    ((7 * o + 5 * c + 3 * a + 2 * b) % 11) as f64 / 10.0 - 0.5
}

fn conv2d(
    t: &Tensor,
    in_channels: i64,
    out_channels: i64,
    kernel: (i64, i64),
    stride: (i64, i64),
    pad: (i64, i64),
) -> Result<Tensor, String> {
    let weight = [out_channels, in_channels, kernel.0, kernel.1];
    if t.rank() != 4 {
        return Err(msg::rank_mismatch(4, t.rank(), Some(&weight)));
    }
    if weight.iter().any(|&d| d < 0) {
        return Err(msg::negative_dimension("tensor", &weight));
    }
    if stride.0 <= 0 || stride.1 <= 0 {
        return Err(msg::unsupported("non-positive stride"));
    }
    if pad.0 < 0 || pad.1 < 0 {
        return Err(msg::unsupported("negative padding"));
    }
    if kernel.0 == 0 || kernel.1 == 0 {
        return Err(msg::unsupported("non-positive kernel_size"));
    }
    let (n, c, h, w) = (t.shape[0], t.shape[1], t.shape[2] as i64, t.shape[3] as i64);
    if in_channels != c as i64 {
        return Err(msg::size_mismatch(in_channels, "channel", &weight, c));
    }
    let (hp, wp) = (h + 2 * pad.0, w + 2 * pad.1);
    if hp < kernel.0 || wp < kernel.1 {
        return Err(msg::unsupported("oversized kernel"));
    }
    let ho = ((hp - kernel.0) / stride.0 + 1) as usize;
    let wo = ((wp - kernel.1) / stride.1 + 1) as usize;
    let oc = out_channels as usize;
    let (kh, kw) = (kernel.0 as usize, kernel.1 as usize);
    let mut out = Tensor::zeros(vec![n, oc, ho, wo]);
    let (hu, wu) = (h as usize, w as usize);
    for bi in 0..n {
        for o in 0..oc {
            for y in 0..ho {
                for x in 0..wo {
                    let mut acc = 0.0;
                    for ci in 0..c {
                        for a in 0..kh {
                            let iy = (y as i64) * stride.0 + a as i64 - pad.0;
                            if iy < 0 || iy >= h {
                                continue;
                            }
                            for bb in 0..kw {
                                let ix = (x as i64) * stride.1 + bb as i64 - pad.1;
                                if ix < 0 || ix >= w {
                                    continue;
                                }
                                let v = t.data[((bi * c + ci) * hu + iy as usize) * wu + ix as usize];
                                acc += v * conv_weight(o, ci, a, bb);
                            }
                        }
                    }
                    out.data[((bi * oc + o) * ho + y) * wo + x] = acc;
                }
            }
        }
    }
    Ok(out)
}

fn dense_weight(u: usize, f: usize) -> f64 {
    ((3 * f + 5 * u) % 7) as f64 / 4.0 - 0.75
}

fn dense(t: &Tensor, in_features: i64, out_features: i64) -> Result<Tensor, String> {
    let weight = [out_features, in_features];
    if t.rank() != 2 {
        return Err(msg::rank_mismatch(2, t.rank(), Some(&weight)));
    }
    if weight.iter().any(|&d| d < 0) {
        return Err(msg::negative_dimension("tensor", &weight));
    }
    let (n, f) = (t.shape[0], t.shape[1]);
    if in_features != f as i64 {
        return Err(msg::size_mismatch(in_features, "feature", &weight, f));
    }
    let units = out_features as usize;
    let mut out = Tensor::zeros(vec![n, units]);
    for r in 0..n {
        for u in 0..units {
            out.data[r * units + u] = (0..f).map(|k| t.data[r * f + k] * dense_weight(u, k)).sum();
        }
    }
    Ok(out)
}

fn upsample(t: &Tensor, scale: (i64, i64), name: &str) -> Result<Tensor, String> {
    if t.rank() != 4 {
        return Err(msg::rank_mismatch(4, t.rank(), None));
    }
    let (n, c, h, w) = (t.shape[0], t.shape[1], t.shape[2], t.shape[3]);
    let dims = [n as i64, c as i64, h as i64 * scale.0, w as i64 * scale.1];
    if dims.iter().any(|&d| d < 0) {
        return Err(msg::negative_dimension("tensor", &dims));
    }
    if scale.0 == 0 || scale.1 == 0 {
        return Err(msg::unsupported(&format!("non-positive {name}")));
    }
    let (ho, wo) = (dims[2] as usize, dims[3] as usize);
    let mut out = Tensor::zeros(vec![n, c, ho, wo]);
    let (s0, s1) = (scale.0 as usize, scale.1 as usize);
    for_each_index(&out.shape.clone(), |flat, idx| {
        let src = ((idx[0] * c + idx[1]) * h + idx[2] / s0) * w + idx[3] / s1;
        out.data[flat] = t.data[src];
    });
    Ok(out)
}

fn numeric_column<'a>(t: &'a Table, name: &str) -> Result<&'a Column, String> {
    t.column(name).ok_or_else(|| msg::not_found(&format!("column {name}")))
}

fn filter_rows(t: &Table, column: &str, op: &str, value: f64) -> Result<Table, String> {
    let col = numeric_column(t, column)?;
    let cmp = |x: f64| match op {
        "gt" => Ok(x > value),
        "lt" => Ok(x < value),
        "ge" => Ok(x >= value),
        "le" => Ok(x <= value),
        "eq" => Ok(x == value),
        other => Err(msg::unsupported(&format!("comparison operator {other}"))),
    };
    let mut keep = Vec::new();
    for r in 0..t.rows() {
        let x = match &col.data {
            ColumnData::Int(v) => v[r] as f64,
            ColumnData::Float(v) => v[r],
            _ => return Err(msg::unsupported(&format!("{} comparison", col.data.type_name()))),
        };
        if cmp(x)? {
            keep.push(r);
        }
    }
    Ok(t.take(&keep))
}

fn sort_rows(t: &Table, column: &str, descending: bool) -> Result<Table, String> {
    let col = numeric_column(t, column)?;
    let mut order: Vec<usize> = (0..t.rows()).collect();
    let key_cmp = |a: usize, b: usize| -> Ordering {
        match &col.data {
            ColumnData::Int(v) => v[a].cmp(&v[b]),
            ColumnData::Float(v) => v[a].total_cmp(&v[b]),
            ColumnData::Bool(v) => v[a].cmp(&v[b]),
            ColumnData::Str(v) => v[a].cmp(&v[b]),
        }
    };
    if descending {
        order.sort_by(|&a, &b| key_cmp(b, a));
    } else {
        order.sort_by(|&a, &b| key_cmp(a, b));
    }
    Ok(t.take(&order))
}

fn head(t: &Table, n: i64) -> Result<Table, String> {
    if n < 0 {
        return Err(msg::negative_dimension("table", &[n]));
    }
    let rows: Vec<usize> = (0..t.rows().min(n as usize)).collect();
    Ok(t.take(&rows))
}

fn distinct(t: &Table) -> Table {
    let mut seen = HashSet::new();
    let mut keep = Vec::new();
    for r in 0..t.rows() {
        let key: Vec<String> = t
            .columns
            .iter()
            .map(|c| match &c.data {
                ColumnData::Int(v) => v[r].to_string(),
                ColumnData::Float(v) => format!("{:?}", v[r]),
                ColumnData::Bool(v) => v[r].to_string(),
                ColumnData::Str(v) => format!("{:?}", v[r]),
            })
            .collect();
        if seen.insert(key) {
            keep.push(r);
        }
    }
    t.take(&keep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vector(data: &[f64]) -> Value {
        Value::Tensor(Tensor::new(vec![data.len()], data.to_vec()).unwrap())
    }

    fn env(v: Value) -> Environment {
        [("x".to_string(), v)].into_iter().collect()
    }

    fn run(code: &str, x: Value) -> Result<Value, String> {
        run_code(code, &env(x))
    }

    #[test]
    fn scale_doubles() {
        let out = run("y = mf.math.scale(x, factor=2.0)", vector(&[1.0, 2.0, 3.0])).unwrap();
        assert!(out.approx_eq(&vector(&[2.0, 4.0, 6.0])));
        let out = run("y = mt.mul(x, 2.0)", vector(&[1.0, 2.0, 3.0])).unwrap();
        assert!(out.approx_eq(&vector(&[2.0, 4.0, 6.0])));
    }

    #[test]
    fn chained_lines_bind_in_order() {
        let out = run("a = mf.math.scale(x, factor=2.0)\nb = mf.math.shift(a, offset=1.0)", vector(&[1.0, 2.0])).unwrap();
        assert!(out.approx_eq(&vector(&[3.0, 5.0])));
    }

    fn image(n: usize, c: usize, h: usize, w: usize) -> Value {
        let len = n * c * h * w;
        Value::Tensor(Tensor::new(vec![n, c, h, w], (0..len).map(|i| ((i * 37) % 17) as f64 / 8.0 - 1.0).collect()).unwrap())
    }

    #[test]
    fn conv_pairs_agree() {
        let x = image(2, 1, 7, 7);
        let src = run("y = mf.layers.Conv2D(x, filters=2, kernel_size=3, strides=(2, 2))", x.clone()).unwrap();
        let tgt = run("y = mt.nn.Conv2d(x, 1, 2, (3, 3), stride=(2, 2), padding=(0, 0))", x).unwrap();
        assert_eq!(src.as_tensor().unwrap().shape, vec![2, 2, 3, 3]);
        assert!(src.approx_eq(&tgt));
    }

    #[test]
    fn global_pool_needs_permute() {
        let x = image(2, 5, 5, 3);
        let src = run("y = mf.layers.GlobalAveragePooling2D(x)", x.clone()).unwrap();
        let direct = run("y = mt.nn.GlobalAvgPool2d(x)", x.clone()).unwrap();
        let chained = run("_y0 = mt.permute(x, 0, 3, 1, 2)\ny = mt.nn.GlobalAvgPool2d(_y0)", x).unwrap();
        assert!(!src.approx_eq(&direct));
        assert!(src.approx_eq(&chained));
    }

    #[test]
    fn dense_pairs_agree() {
        let x = Value::Tensor(Tensor::new(vec![2, 3], vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.0]).unwrap());
        let src = run("y = mf.layers.Dense(x, units=4)", x.clone()).unwrap();
        let tgt = run("y = mt.nn.Linear(x, 3, 4)", x).unwrap();
        assert!(src.approx_eq(&tgt));
    }

    #[test]
    fn error_catalog() {
        let x = image(1, 1, 5, 5);
        let err = |code: &str| run(code, x.clone()).unwrap_err();
        assert_eq!(
            err("y = mt.nn.Conv2d(x, -1, 2, (3, 3))"),
            "Trying to create tensor with negative dimension: [2, -1, 3, 3]"
        );
        assert_eq!(err("y = mt.nn.Conv2d(x, 1, 2, (3, 3), stride=(0, 1))"), "non-positive stride is not supported");
        assert_eq!(
            err("y = mt.nn.Conv2d(x, 2, 2, (3, 3))"),
            "Expected 2-channel input for weight [2, 2, 3, 3], but got 1-channel input instead"
        );
        assert_eq!(err("y = mt.nn.Conv2d(x, 1, 2, (7, 3))"), "oversized kernel is not supported");
        assert_eq!(
            err("y = mt.permute(x, 0, 4, 1, 2)"),
            "permute(): argument dims (position 2) must be in range [-4, 3], not 4"
        );
        assert_eq!(err("y = mt.permute(x, 0, 0, 1, 2)"), "permute(): repeated dim is not allowed");
        assert_eq!(err("y = mt.nn.Upsample(x, (0, 2))"), "non-positive scale_factor is not supported");
        assert_eq!(
            err("y = mt.nn.Linear(x, 3, 4)"),
            "Expected 2-dimensional input for 2-dimensional weight [4, 3], but got 4-dimensional input instead"
        );
        assert_eq!(err("y = nope.op(x)"), "nope.op is not defined");
    }

    #[test]
    fn tables() {
        let t = Value::Table(
            Table::new(vec![
                Column { name: "age".into(), data: ColumnData::Int(vec![40, 20, 30, 20]) },
                Column { name: "name".into(), data: ColumnData::Str(vec!["a".into(), "b".into(), "c".into(), "b".into()]) },
            ])
            .unwrap(),
        );
        let f1 = run("y = mf.dplyr.filter(x, column=\"age\", threshold=25)", t.clone()).unwrap();
        let f2 = run("y = mt.pandas.query(x, \"age\", \"gt\", 25)", t.clone()).unwrap();
        assert!(f1.approx_eq(&f2));
        let Value::Table(ft) = &f1 else { panic!() };
        assert_eq!(ft.rows(), 2);
        let s1 = run("y = mf.dplyr.arrange(x, column=\"age\", desc=true)", t.clone()).unwrap();
        let s2 = run("y = mt.pandas.sort_values(x, \"age\", ascending=false)", t.clone()).unwrap();
        assert!(s1.approx_eq(&s2));
        let d = run("y = mt.pandas.drop_duplicates(x)", t.clone()).unwrap();
        let Value::Table(dt) = &d else { panic!() };
        assert_eq!(dt.rows(), 3);
        assert_eq!(run("y = mt.pandas.head(x, -1)", t.clone()).unwrap_err(), "Trying to create table with negative dimension: [-1]");
        assert_eq!(run("y = mt.pandas.sort_values(x, \"zip\")", t).unwrap_err(), "column zip is not found");
    }

    #[test]
    fn reductions_and_softmax() {
        let x = Value::Tensor(Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let s = run("y = mt.sum(x, 1)", x.clone()).unwrap();
        assert!(s.approx_eq(&Value::Tensor(Tensor::new(vec![2], vec![6.0, 15.0]).unwrap())));
        let m = run("y = mt.mean(x, 0)", x.clone()).unwrap();
        assert!(m.approx_eq(&Value::Tensor(Tensor::new(vec![3], vec![2.5, 3.5, 4.5]).unwrap())));
        let sm = run("y = mt.nn.Softmax(x, -1)", x.clone()).unwrap();
        let t = sm.as_tensor().unwrap();
        assert!((t.data[..3].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let tr = run("y = mt.transpose(x, 0, 1)", x.clone()).unwrap();
        assert_eq!(tr.as_tensor().unwrap().data, vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(
            run("y = mt.nn.Softmax(x, 3)", x).unwrap_err(),
            "softmax(): argument dim (position 1) must be in range [-2, 1], not 3"
        );
    }
}
