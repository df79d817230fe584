//! Brute-force oracles shared by the integration tests and the acceptance
//! target. They recompute results from first principles without the
//! library's data structures.

#![allow(dead_code)]

use std::collections::BTreeMap;

use apimorph::constraints::expr::{BinOp, Expr};
use apimorph::constraints::{Assignment, Constraint, ConstraintSet, HoleDomain, Provenance};
use apimorph::corpus::{ApiEntry, DocCorpus, ParamSpec, TypeTag};
use apimorph::literal::Literal;
use apimorph::matching::{tokenize_and_stem, EmbeddingTable};
use apimorph::sketch::{generate_sketches, hole_domains};
use apimorph::program::parse_program_unresolved;
use rand::Rng;

// ---------------------------------------------------------------------------
// matching

/// Twelve source and twelve target descriptions with deliberate overlap,
/// repeats, one zero-overlap pair and one identical pair.
pub fn mock_12x12() -> (DocCorpus, DocCorpus) {
    let source = [
        "multiplies every element of the tensor by a constant factor",
        "adds a constant offset to every element",
        "absolute value of every element element element",
        "flips sign entrywise",
        "sum of tensor elements along an axis",
        "mean of tensor elements along an axis",
        "2d convolution layer over images",
        "densely connected layer with a weight matrix",
        "rectified linear unit activation",
        "global average pooling for spatial data",
        "keeps rows where a column is greater than a threshold",
        "orders rows by a column",
    ];
    let target = [
        "multiplies each element of the input by a scalar",
        "adds a scalar to each element",
        "absolute value of each element",
        "returns additive inverse",
        "sum of each row in the given dimension",
        "mean value of each row in the given dimension",
        "applies a 2d convolution over an input signal",
        "densely connected layer with a weight matrix",
        "rectified linear unit function",
        "global average pooling over an input signal",
        "query rows with a boolean comparison",
        "sort rows by the values of a column",
    ];
    let make = |lib: &str, docs: &[&str]| DocCorpus {
        library_id: lib.into(),
        language_id: "python".into(),
        entries: docs
            .iter()
            .enumerate()
            .map(|(i, d)| ApiEntry {
                qualified_name: format!("{lib}.api{i:02}"),
                description: d.to_string(),
                params: vec![],
                relationship_constraints: vec![],
            })
            .collect(),
    };
    (make("src", &source), make("tgt", &target))
}

/// Raw token lists, one per description, source first.
pub fn token_lists(source: &DocCorpus, target: &DocCorpus) -> Vec<Vec<String>> {
    source.entries.iter().chain(&target.entries).map(|e| tokenize_and_stem(&e.description)).collect()
}

/// Term weight `count(t, d) / sum over all documents of count(t, ·)`, as a
/// map from token to weight, computed by direct counting.
pub fn oracle_weights(docs: &[Vec<String>]) -> Vec<BTreeMap<String, f64>> {
    docs.iter()
        .map(|d| {
            let mut w = BTreeMap::new();
            for t in d {
                if w.contains_key(t) {
                    continue;
                }
                let here = d.iter().filter(|x| *x == t).count() as f64;
                let everywhere: usize = docs.iter().map(|o| o.iter().filter(|x| *x == t).count()).sum();
                w.insert(t.clone(), here / everywhere as f64);
            }
            w
        })
        .collect()
}

pub fn oracle_dense(weights: &BTreeMap<String, f64>, vocab: &[String]) -> Vec<f64> {
    vocab.iter().map(|t| weights.get(t).copied().unwrap_or(0.0)).collect()
}

pub fn oracle_embed(weights: &BTreeMap<String, f64>, table: &EmbeddingTable) -> Vec<f64> {
    let mut out = vec![0.0; table.dimension()];
    for (t, w) in weights {
        if let Some(v) = table.get(t) {
            for k in 0..out.len() {
                out[k] += w * v[k];
            }
        }
    }
    out
}

pub fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

/// Small deterministic table in which `flip`/`invers` and
/// `entrywis`/`addit` point in similar directions.
pub fn mock_embeddings() -> EmbeddingTable {
    let mut text = String::new();
    let rows = [
        ("flip", [1.0, 0.1, 0.0, 0.0]),
        ("inverse", [0.9, 0.2, 0.0, 0.1]),
        ("sign", [0.2, 1.0, 0.0, 0.0]),
        ("additive", [0.3, 0.8, 0.1, 0.0]),
        ("entrywise", [0.0, 0.0, 1.0, 0.2]),
        ("returns", [0.0, 0.1, 0.9, 0.1]),
        ("element", [0.1, 0.0, 0.8, 0.3]),
        ("tensor", [0.0, 0.0, 0.1, 1.0]),
        ("rows", [0.5, -0.5, 0.0, 0.3]),
    ];
    for (w, v) in rows {
        text.push_str(&format!("{w} {} {} {} {}\n", v[0], v[1], v[2], v[3]));
    }
    EmbeddingTable::from_text(&text).unwrap()
}

// ---------------------------------------------------------------------------
// enumeration

/// A constraint in a tiny test-side language, evaluated independently of the
/// library's expression evaluator and translated into an [`Expr`].
#[derive(Debug, Clone)]
pub enum Spec {
    /// `a op k`
    Unary(usize, BinOp, i64),
    /// `a op b`
    Pair(usize, BinOp, usize),
    /// `a + b op k`
    SumCmp(usize, usize, BinOp, i64),
    /// `(a - b) / k == c`, floor division, `k != 0`
    DivEq(usize, usize, i64, usize),
    /// `a != b or c == k`
    Either(usize, usize, usize, i64),
    /// `list[a] op b`, negative indices count from the end
    Select(Vec<i64>, usize, BinOp, usize),
}

const CMPS: [BinOp; 6] = [BinOp::Eq, BinOp::Ne, BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge];

fn cmp(op: BinOp, a: i64, b: i64) -> bool {
    match op {
        BinOp::Eq => a == b,
        BinOp::Ne => a != b,
        BinOp::Lt => a < b,
        BinOp::Le => a <= b,
        BinOp::Gt => a > b,
        BinOp::Ge => a >= b,
        _ => unreachable!(),
    }
}

fn floor_div(a: i64, b: i64) -> i64 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

impl Spec {
    pub fn eval(&self, v: &dyn Fn(usize) -> i64) -> bool {
        match self {
            Spec::Unary(a, op, k) => cmp(*op, v(*a), *k),
            Spec::Pair(a, op, b) => cmp(*op, v(*a), v(*b)),
            Spec::SumCmp(a, b, op, k) => cmp(*op, v(*a) + v(*b), *k),
            Spec::DivEq(a, b, k, c) => floor_div(v(*a) - v(*b), *k) == v(*c),
            Spec::Either(a, b, c, k) => v(*a) != v(*b) || v(*c) == *k,
            Spec::Select(list, a, op, b) => {
                let n = list.len() as i64;
                let i = v(*a);
                let p = if i < 0 { i + n } else { i };
                (0..n).contains(&p) && cmp(*op, list[p as usize], v(*b))
            }
        }
    }

    pub fn to_expr(&self) -> Expr<usize> {
        let var = |h: usize| Expr::Var(h);
        match self {
            Spec::Unary(a, op, k) => Expr::bin(*op, var(*a), Expr::int(*k)),
            Spec::Pair(a, op, b) => Expr::bin(*op, var(*a), var(*b)),
            Spec::SumCmp(a, b, op, k) => Expr::bin(*op, Expr::bin(BinOp::Add, var(*a), var(*b)), Expr::int(*k)),
            Spec::DivEq(a, b, k, c) => Expr::bin(
                BinOp::Eq,
                Expr::bin(BinOp::Div, Expr::bin(BinOp::Sub, var(*a), var(*b)), Expr::int(*k)),
                var(*c),
            ),
            Spec::Either(a, b, c, k) => {
                Expr::bin(BinOp::Ne, var(*a), var(*b)).or(Expr::bin(BinOp::Eq, var(*c), Expr::int(*k)))
            }
            Spec::Select(list, a, op, b) => Expr::bin(*op, Expr::Select(list.clone(), Box::new(var(*a))), var(*b)),
        }
    }
}

pub struct Instance {
    pub set: ConstraintSet,
    pub specs: Vec<Spec>,
}

/// A random integer-parameter API, its size-1 sketch with domains from a
/// random source call and seed pool, and random constraints over its holes.
/// The domain product stays at or below `max_product`.
pub fn random_instance(rng: &mut impl Rng, max_product: u128) -> Instance {
    loop {
        let n_params = rng.gen_range(1..=4);
        let params: Vec<ParamSpec> = (0..n_params)
            .map(|i| ParamSpec {
                name: format!("p{i}"),
                type_tag: if rng.gen_bool(0.3) { TypeTag::IntPair } else { TypeTag::Int },
                required: rng.gen_bool(0.5),
                default: None,
                description: String::new(),
            })
            .collect();
        let entry = ApiEntry { qualified_name: "t.op".into(), description: String::new(), params, relationship_constraints: vec![] };
        let mut args = vec!["x".to_string()];
        args.extend((0..rng.gen_range(0..4)).map(|i| format!("a{i}={}", rng.gen_range(-4..12))));
        let source = parse_program_unresolved(&format!("input x\ny = s.op({})", args.join(", "))).unwrap();
        let pool: Vec<i64> = (0..rng.gen_range(1..7)).map(|_| rng.gen_range(-3..6)).collect();
        let sketch = generate_sketches(&entry, 1, &[]).remove(0);
        let sketch = hole_domains(&sketch, &source.lines[0], &entry, &pool, &[]);
        if !sketch.feasible || sketch.search_space() > max_product || sketch.holes.is_empty() {
            continue;
        }
        let ids: Vec<usize> = sketch.holes.iter().map(|h| h.id).collect();
        let pick = |rng: &mut dyn rand::RngCore| ids[rng.gen_range(0..ids.len())];
        let op = |rng: &mut dyn rand::RngCore| CMPS[rng.gen_range(0..CMPS.len())];
        let specs: Vec<Spec> = (0..rng.gen_range(0..5))
            .map(|_| match rng.gen_range(0..6) {
                0 => Spec::Unary(pick(rng), op(rng), rng.gen_range(-3..8)),
                1 => Spec::Pair(pick(rng), op(rng), pick(rng)),
                2 => Spec::SumCmp(pick(rng), pick(rng), op(rng), rng.gen_range(-3..12)),
                3 => Spec::DivEq(pick(rng), pick(rng), [-2, 1, 2, 3][rng.gen_range(0..4)], pick(rng)),
                4 => Spec::Either(pick(rng), pick(rng), pick(rng), rng.gen_range(-2..5)),
                _ => Spec::Select((0..rng.gen_range(1..5)).map(|_| rng.gen_range(-2..6)).collect(), pick(rng), op(rng), pick(rng)),
            })
            .collect();
        let set = ConstraintSet {
            holes: sketch
                .holes
                .iter()
                .map(|h| HoleDomain { id: h.id, type_tag: h.type_tag.clone(), values: h.domain.clone() })
                .collect(),
            constraints: specs.iter().map(|s| Constraint::new(s.to_expr(), Provenance::Spec, "random")).collect(),
        };
        return Instance { set, specs };
    }
}

/// Every in-domain assignment satisfying the test-side semantics, in
/// lexicographic order of (hole id, domain index).
pub fn exhaustive(instance: &Instance) -> Vec<Assignment> {
    let mut holes = instance.set.holes.clone();
    holes.sort_by_key(|h| h.id);
    let mut out = Vec::new();
    let mut idx = vec![0usize; holes.len()];
    if holes.iter().any(|h| h.values.is_empty()) {
        return out;
    }
    loop {
        let a: Assignment = holes.iter().zip(&idx).map(|(h, &i)| (h.id, h.values[i].clone())).collect();
        let value = |h: usize| a[&h].as_int().expect("integer holes");
        if instance.specs.iter().all(|s| s.eval(&value)) {
            out.push(a);
        }
        // odometer, last hole fastest
        let mut k = holes.len();
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < holes[k].values.len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

pub fn ints(a: &Assignment) -> Vec<(usize, i64)> {
    a.iter().map(|(h, v)| (*h, v.as_int().unwrap_or(i64::MIN))).collect()
}

pub fn lit(v: i64) -> Literal {
    Literal::Int(v)
}
