//! Constraint sets over sketch holes and their compilation from
//! documentation.

pub mod enumerate;
pub mod expr;

use std::collections::BTreeMap;
use std::fmt;

use crate::corpus::{ApiEntry, TypeTag};
use crate::literal::Literal;
use crate::program::Value;
use crate::sketch::{CallRole, ReshapeKind, Sketch};

pub use crate::sketch::realize;
pub use enumerate::{enumerate, Enumeration};
use expr::{BinOp, Expr, SymVar};

pub type HoleId = usize;
pub type Assignment = BTreeMap<HoleId, Literal>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Typing,
    Spec,
    Relation,
    Learned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub expr: Expr<HoleId>,
    pub provenance: Provenance,
    /// Where the constraint came from, e.g. the relation text.
    pub origin: String,
}

impl Constraint {
    pub fn new(expr: Expr<HoleId>, provenance: Provenance, origin: &str) -> Constraint {
        Constraint { expr, provenance, origin: origin.to_string() }
    }

    pub fn render(&self) -> String {
        self.expr.render(&|h: &HoleId| format!("#{h}"))
    }

    pub fn holds(&self, a: &Assignment) -> bool {
        self.expr.holds(&|h: &HoleId| a.get(h).cloned())
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoleDomain {
    pub id: HoleId,
    pub type_tag: TypeTag,
    pub values: Vec<Literal>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConstraintSet {
    pub holes: Vec<HoleDomain>,
    pub constraints: Vec<Constraint>,
}

impl ConstraintSet {
    /// A new set with `c` appended.
    pub fn add_learned(&self, c: Constraint) -> ConstraintSet {
        let mut next = self.clone();
        next.constraints.push(Constraint { provenance: Provenance::Learned, ..c });
        next
    }

    /// Whether `a` is total, in-domain and satisfies every constraint.
    pub fn admits(&self, a: &Assignment) -> bool {
        a.len() == self.holes.len()
            && self.holes.iter().all(|h| {
                a.get(&h.id).is_some_and(|v| h.type_tag.admits(v) && h.values.contains(v))
            })
            && self.constraints.iter().all(|c| c.holds(a))
    }

    pub fn count_by_provenance(&self) -> BTreeMap<Provenance, usize> {
        let mut out = BTreeMap::new();
        for c in &self.constraints {
            *out.entry(c.provenance).or_insert(0) += 1;
        }
        out
    }
}

/// Shapes observed for one line test: the line's tensor operand and the
/// expected result. `None` when the value is not a tensor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ShapeContext {
    pub in_shape: Option<Vec<i64>>,
    pub out_shape: Option<Vec<i64>>,
}

impl ShapeContext {
    pub fn from_values(input: Option<&Value>, output: &Value) -> ShapeContext {
        let shape = |v: &Value| v.as_tensor().map(|t| t.shape.iter().map(|&d| d as i64).collect());
        ShapeContext { in_shape: input.and_then(shape), out_shape: shape(output) }
    }
}

/// Shape of the target call's operand after the reshaping prefix, as
/// expressions over reshape holes. `None` when it cannot be expressed.
fn reshaped_input(sketch: &Sketch, in_shape: &[i64]) -> Option<Vec<Expr<HoleId>>> {
    let mut consts: Option<Vec<i64>> = Some(in_shape.to_vec());
    let mut exprs: Vec<Expr<HoleId>> = in_shape.iter().map(|&d| Expr::int(d)).collect();
    for (ci, call) in sketch.chain.iter().enumerate() {
        let CallRole::Reshape(kind) = call.role else { continue };
        match kind {
            ReshapeKind::Cast => {}
            ReshapeKind::Flatten => {
                let c = consts.as_ref()?;
                if c.is_empty() {
                    return None;
                }
                let flat = vec![c[0], c[1..].iter().product()];
                exprs = flat.iter().map(|&d| Expr::int(d)).collect();
                consts = Some(flat);
            }
            ReshapeKind::Permute => {
                let c = consts.take()?;
                exprs = sketch.holes_of_call(ci).map(|h| Expr::Select(c.clone(), Box::new(Expr::Var(h.id)))).collect();
            }
        }
    }
    Some(exprs)
}

/// Compiles documentation knowledge into constraints over the holes of a
/// sketch targeting `entry`.
///
/// Hole typing and enum membership are always present. With `use_spec`,
/// documented relations are instantiated once per distinct shape context,
/// and permutation holes are restricted to valid, distinct dimensions.
pub fn compile_spec_constraints(
    entry: &ApiEntry,
    sketch: &Sketch,
    shape_contexts: &[ShapeContext],
    use_spec: bool,
) -> ConstraintSet {
    let mut set = ConstraintSet {
        holes: sketch
            .holes
            .iter()
            .map(|h| HoleDomain { id: h.id, type_tag: h.type_tag.clone(), values: h.domain.clone() })
            .collect(),
        constraints: Vec::new(),
    };
    for h in &sketch.holes {
        if let TypeTag::Enum(values) = &h.type_tag {
            let member = values
                .iter()
                .map(|v| Expr::bin(BinOp::Eq, Expr::Var(h.id), Expr::Const(Literal::Str(v.clone()))))
                .reduce(Expr::or)
                .unwrap_or(Expr::Const(Literal::Bool(false)));
            set.constraints.push(Constraint::new(member, Provenance::Typing, &format!("{} is one of {}", h.bound_param, h.type_tag)));
        }
    }
    if !use_spec {
        return set;
    }
    let mut contexts = shape_contexts.to_vec();
    contexts.sort();
    contexts.dedup();

    // permutation holes
    for (ci, call) in sketch.chain.iter().enumerate() {
        if call.role != CallRole::Reshape(ReshapeKind::Permute) {
            continue;
        }
        let holes: Vec<HoleId> = sketch.holes_of_call(ci).map(|h| h.id).collect();
        let mut ranks: Vec<usize> = contexts.iter().filter_map(|c| c.in_shape.as_ref().map(Vec::len)).collect();
        ranks.sort_unstable();
        ranks.dedup();
        let rank = match ranks.as_slice() {
            [r] if *r == holes.len() => *r as i64,
            _ => {
                set.constraints.push(Constraint::new(
                    Expr::Const(Literal::Bool(false)),
                    Provenance::Spec,
                    "permutation arity differs from the input rank",
                ));
                continue;
            }
        };
        for &h in &holes {
            let range = Expr::bin(BinOp::Ge, Expr::Var(h), Expr::int(-rank))
                .and(Expr::bin(BinOp::Le, Expr::Var(h), Expr::int(rank - 1)));
            set.constraints.push(Constraint::new(range, Provenance::Spec, "permute dims in range"));
        }
        let axes: Vec<i64> = (0..rank).collect();
        for (i, &a) in holes.iter().enumerate() {
            for &b in &holes[i + 1..] {
                let distinct = Expr::bin(
                    BinOp::Ne,
                    Expr::Select(axes.clone(), Box::new(Expr::Var(a))),
                    Expr::Select(axes.clone(), Box::new(Expr::Var(b))),
                );
                set.constraints.push(Constraint::new(distinct, Provenance::Spec, "permute dims distinct"));
            }
        }
    }

    // documented relations
    let target = sketch.target_index();
    let param_hole = |v: &SymVar| -> Option<HoleId> {
        let name = match v.index {
            Some(i) => format!("{}[{i}]", v.name),
            None => v.name.clone(),
        };
        sketch.holes_of_call(target).find(|h| h.bound_param == name).map(|h| h.id)
    };
    for rel in &entry.relationship_constraints {
        let mut uses_shapes = false;
        rel.expr.visit_vars(&mut |v: &SymVar| uses_shapes |= crate::corpus::SHAPE_SYMBOLS.contains(&v.name.as_str()));
        if !uses_shapes {
            let compiled = rel
                .expr
                .try_map_vars(&mut |v: &SymVar| param_hole(v).map(Expr::Var).ok_or(()))
                .unwrap_or(Expr::Const(Literal::Bool(false)));
            set.constraints.push(Constraint::new(compiled, Provenance::Spec, &rel.text));
            continue;
        }
        for ctx in &contexts {
            let input = ctx.in_shape.as_ref().and_then(|s| reshaped_input(sketch, s));
            let compiled = rel.expr.try_map_vars(&mut |v: &SymVar| -> Result<Expr<HoleId>, ()> {
                let pick = |dims: &[Expr<HoleId>], i: i64| {
                    let len = dims.len() as i64;
                    let p = if i < 0 { i + len } else { i };
                    if (0..len).contains(&p) {
                        Ok(dims[p as usize].clone())
                    } else {
                        Err(())
                    }
                };
                match (v.name.as_str(), v.index) {
                    ("in_shape", Some(i)) => pick(input.as_ref().ok_or(())?, i),
                    ("in_rank", None) => Ok(Expr::int(input.as_ref().ok_or(())?.len() as i64)),
                    ("out_shape", Some(i)) => {
                        let out: Vec<Expr<HoleId>> = ctx.out_shape.as_ref().ok_or(())?.iter().map(|&d| Expr::int(d)).collect();
                        pick(&out, i)
                    }
                    ("out_rank", None) => Ok(Expr::int(ctx.out_shape.as_ref().ok_or(())?.len() as i64)),
                    _ => param_hole(v).map(Expr::Var).ok_or(()),
                }
            });
            let compiled = compiled.unwrap_or(Expr::Const(Literal::Bool(false)));
            set.constraints.push(Constraint::new(compiled, Provenance::Relation, &rel.text));
        }
    }
    set
}
