//! Program sketches: one target call, optionally preceded by reshaping
//! calls, with every parameter left as a typed hole.
//!
//! Holes of the target call are numbered first, from `#1`, in parameter
//! order; pair parameters take two consecutive integer holes. Holes of the
//! reshaping calls follow in chain order.

use std::fmt;

use crate::constraints::{Assignment, HoleId};
use crate::corpus::{default_value_pool, ApiEntry, TypeTag};
use crate::literal::Literal;
use crate::program::syntax::Call;
use crate::program::CallSite;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReshapeKind {
    Permute,
    Cast,
    Flatten,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReshapingOp {
    /// Qualified callee in the target runtime.
    pub name: String,
    pub kind: ReshapeKind,
    /// Number of integer holes.
    pub arity: usize,
}

/// Reshaping operations of the mock target library, in the order they are
/// tried.
pub fn default_reshaping_vocab() -> Vec<ReshapingOp> {
    vec![
        ReshapingOp { name: "mt.permute".into(), kind: ReshapeKind::Permute, arity: 4 },
        ReshapingOp { name: "mt.float".into(), kind: ReshapeKind::Cast, arity: 0 },
        ReshapingOp { name: "mt.flatten".into(), kind: ReshapeKind::Flatten, arity: 0 },
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hole {
    pub id: HoleId,
    pub type_tag: TypeTag,
    pub domain: Vec<Literal>,
    /// Parameter name (`kernel_size[0]` for pair components) or reshape slot
    /// (`dims[2]`).
    pub bound_param: String,
    /// Position of the owning call in the chain.
    pub call: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TemplateArg {
    Hole(HoleId),
    Pair(HoleId, HoleId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArgSlot {
    /// `None` for positional arguments.
    pub keyword: Option<String>,
    pub arg: TemplateArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CallRole {
    Reshape(ReshapeKind),
    Target,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CallTemplate {
    pub callee: String,
    pub role: CallRole,
    pub args: Vec<ArgSlot>,
}

impl CallTemplate {
    fn short_name(&self) -> &str {
        self.callee.rsplit('.').next().unwrap_or(&self.callee)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sketch {
    pub chain: Vec<CallTemplate>,
    pub holes: Vec<Hole>,
    /// False when some hole has an empty domain.
    pub feasible: bool,
}

impl Sketch {
    pub fn size(&self) -> usize {
        self.chain.len()
    }

    pub fn target_index(&self) -> usize {
        self.chain.iter().position(|c| c.role == CallRole::Target).expect("sketch has a target call")
    }

    pub fn target(&self) -> &CallTemplate {
        &self.chain[self.target_index()]
    }

    pub fn hole(&self, id: HoleId) -> Option<&Hole> {
        self.holes.iter().find(|h| h.id == id)
    }

    pub fn holes_of_call(&self, call: usize) -> impl Iterator<Item = &Hole> {
        self.holes.iter().filter(move |h| h.call == call)
    }

    /// Holes belonging to reshaping calls.
    pub fn reshape_holes(&self) -> impl Iterator<Item = &Hole> {
        let target = self.target_index();
        self.holes.iter().filter(move |h| h.call != target)
    }

    /// Product of the domain sizes, saturating.
    pub fn search_space(&self) -> u128 {
        self.holes.iter().fold(1u128, |acc, h| acc.saturating_mul(h.domain.len() as u128))
    }

    fn render_with(&self, value: &impl Fn(HoleId) -> String) -> String {
        let calls: Vec<String> = self
            .chain
            .iter()
            .map(|c| {
                let args: Vec<String> = c
                    .args
                    .iter()
                    .map(|slot| {
                        let text = match slot.arg {
                            TemplateArg::Hole(h) => value(h),
                            TemplateArg::Pair(a, b) => format!("({},{})", value(a), value(b)),
                        };
                        match &slot.keyword {
                            Some(k) => format!("{k}={text}"),
                            None => text,
                        }
                    })
                    .collect();
                format!("{}({})", c.short_name(), args.join(","))
            })
            .collect();
        calls.join("; ")
    }
}

impl fmt::Display for Sketch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_with(&|h| format!("#{h}")))
    }
}

/// Sketches for one target API in nondecreasing size: the bare call, then
/// every sequence of reshaping operations (in vocabulary order) prepended to
/// it, up to `max_size` calls in total.
pub fn generate_sketches(api: &ApiEntry, max_size: usize, vocab: &[ReshapingOp]) -> Vec<Sketch> {
    let mut out = Vec::new();
    for size in 1..=max_size.max(1) {
        let prefixes = sequences(vocab.len(), size - 1);
        for prefix in prefixes {
            out.push(build_sketch(api, &prefix.iter().map(|&i| &vocab[i]).collect::<Vec<_>>()));
        }
    }
    out
}

/// All index sequences of length `len` over `0..n`, lexicographically.
fn sequences(n: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..n).map(move |i| {
                    let mut p = prefix.clone();
                    p.push(i);
                    p
                })
            })
            .collect();
    }
    out
}

fn build_sketch(api: &ApiEntry, prefix: &[&ReshapingOp]) -> Sketch {
    let target_call = prefix.len();
    let mut holes = Vec::new();
    let mut next_id = 1;
    let mut new_hole = |type_tag: TypeTag, bound_param: String, call: usize, holes: &mut Vec<Hole>| {
        let id = next_id;
        next_id += 1;
        holes.push(Hole { id, type_tag, domain: vec![], bound_param, call });
        id
    };
    let mut target_args = Vec::new();
    for p in &api.params {
        let arg = match &p.type_tag {
            TypeTag::IntPair => {
                let a = new_hole(TypeTag::Int, format!("{}[0]", p.name), target_call, &mut holes);
                let b = new_hole(TypeTag::Int, format!("{}[1]", p.name), target_call, &mut holes);
                TemplateArg::Pair(a, b)
            }
            tag => TemplateArg::Hole(new_hole(tag.clone(), p.name.clone(), target_call, &mut holes)),
        };
        target_args.push(ArgSlot { keyword: (!p.required).then(|| p.name.clone()), arg });
    }
    let mut chain = Vec::with_capacity(prefix.len() + 1);
    for (ci, op) in prefix.iter().enumerate() {
        let args = (0..op.arity)
            .map(|k| ArgSlot { keyword: None, arg: TemplateArg::Hole(new_hole(TypeTag::Int, format!("dims[{k}]"), ci, &mut holes)) })
            .collect();
        chain.push(CallTemplate { callee: op.name.clone(), role: CallRole::Reshape(op.kind), args });
    }
    chain.push(CallTemplate { callee: api.qualified_name.clone(), role: CallRole::Target, args: target_args });
    let feasible = holes.is_empty();
    Sketch { chain, holes, feasible }
}

fn push_unique(out: &mut Vec<Literal>, v: Literal) {
    if !out.contains(&v) {
        out.push(v);
    }
}

/// Populates hole domains: literals of the source call that fit the hole's
/// type, in source order with tuples expanded, then the target entry's value
/// pool, then `observed_dims` (operand shape dimensions seen in line tests).
/// Booleans always range over `[false, true]`; enum holes over their
/// declared values. Integers are accepted for float holes.
pub fn hole_domains(
    sketch: &Sketch,
    source_call: &CallSite,
    target_entry: &ApiEntry,
    seed_pool: &[i64],
    observed_dims: &[i64],
) -> Sketch {
    let mut observed = observed_dims.to_vec();
    observed.sort_unstable();
    let pools = default_value_pool(target_entry, seed_pool);
    let mut src_ints = Vec::new();
    let mut src_floats = Vec::new();
    let mut src_strs = Vec::new();
    for lit in source_call.literals() {
        match lit {
            Literal::Int(_) | Literal::Tuple(_) => {
                for v in lit.int_components() {
                    push_unique(&mut src_ints, Literal::Int(v));
                }
            }
            Literal::Float(_) => push_unique(&mut src_floats, lit.clone()),
            Literal::Str(_) => push_unique(&mut src_strs, lit.clone()),
            Literal::Bool(_) => {}
        }
    }
    let mut out = sketch.clone();
    for hole in &mut out.holes {
        let mut domain = Vec::new();
        match &hole.type_tag {
            TypeTag::Int => {
                let pool = pools.get(&TypeTag::Int).into_iter().flatten().cloned();
                for v in src_ints.iter().cloned().chain(pool).chain(observed.iter().map(|&d| Literal::Int(d))) {
                    push_unique(&mut domain, v);
                }
            }
            TypeTag::Float => {
                let as_float = |l: &Literal| match l {
                    Literal::Int(v) => Literal::Float(*v as f64),
                    other => other.clone(),
                };
                let pool = pools.get(&TypeTag::Float).into_iter().flatten().cloned();
                for v in src_floats.iter().cloned().chain(src_ints.iter().map(as_float)).chain(pool) {
                    push_unique(&mut domain, v);
                }
            }
            TypeTag::Bool => domain = vec![Literal::Bool(false), Literal::Bool(true)],
            TypeTag::Str => {
                for v in src_strs.iter().cloned().chain(pools.get(&TypeTag::Str).into_iter().flatten().cloned()) {
                    push_unique(&mut domain, v);
                }
            }
            tag @ TypeTag::Enum(values) => {
                for v in src_strs.iter().filter(|v| tag.admits(v)).cloned() {
                    push_unique(&mut domain, v);
                }
                for v in values {
                    push_unique(&mut domain, Literal::Str(v.clone()));
                }
            }
            TypeTag::IntPair => unreachable!("pairs are split into integer holes"),
        }
        hole.domain = domain;
    }
    out.feasible = out.holes.iter().all(|h| !h.domain.is_empty());
    out
}

/// A fully concrete call chain.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateProgram {
    pub calls: Vec<ConcreteCall>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcreteCall {
    pub callee: String,
    pub positional: Vec<Literal>,
    pub keyword: Vec<(String, Literal)>,
}

impl CandidateProgram {
    /// Compact display form with short callee names, e.g.
    /// `permute(0,3,1,2); GlobalAvgPool2d()`.
    pub fn compact(&self) -> String {
        let calls: Vec<String> = self
            .calls
            .iter()
            .map(|c| {
                let mut args: Vec<String> = c.positional.iter().map(Literal::compact).collect();
                args.extend(c.keyword.iter().map(|(k, v)| format!("{k}={}", v.compact())));
                format!("{}({})", c.callee.rsplit('.').next().unwrap_or(&c.callee), args.join(","))
            })
            .collect();
        calls.join("; ")
    }

    /// Executable lines consuming `operand` and binding the final result to
    /// `binds`; intermediates are named `_{binds}{k}`.
    pub fn code_lines(&self, operand: &str, binds: &str) -> Vec<String> {
        let mut prev = operand.to_string();
        let n = self.calls.len();
        self.calls
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let name = if k + 1 == n { binds.to_string() } else { format!("_{binds}{k}") };
                let call = Call {
                    binds: name.clone(),
                    callee: c.callee.clone(),
                    operands: vec![prev.clone()],
                    positional: c.positional.clone(),
                    keyword: c.keyword.clone(),
                };
                prev = name;
                call.render()
            })
            .collect()
    }

    pub fn code(&self, operand: &str, binds: &str) -> String {
        self.code_lines(operand, binds).join("\n")
    }
}

/// Substitutes an assignment into a sketch. Holes missing from `a` are left
/// as their `#id` placeholder text in the compact form only; callers pass
/// total assignments.
pub fn realize(sketch: &Sketch, a: &Assignment) -> CandidateProgram {
    let value = |h: HoleId| a.get(&h).cloned().unwrap_or(Literal::Str(format!("#{h}")));
    let calls = sketch
        .chain
        .iter()
        .map(|c| {
            let mut positional = Vec::new();
            let mut keyword = Vec::new();
            for slot in &c.args {
                let v = match slot.arg {
                    TemplateArg::Hole(h) => value(h),
                    TemplateArg::Pair(x, y) => {
                        let comps: Vec<i64> = [value(x), value(y)].iter().filter_map(Literal::as_int).collect();
                        if comps.len() == 2 {
                            Literal::Tuple(comps)
                        } else {
                            Literal::Str(format!("(#{x},#{y})"))
                        }
                    }
                };
                match &slot.keyword {
                    Some(k) => keyword.push((k.clone(), v)),
                    None => positional.push(v),
                }
            }
            ConcreteCall { callee: c.callee.clone(), positional, keyword }
        })
        .collect();
    CandidateProgram { calls }
}
