//! Backtracking search with forward checking over finite hole domains.
//!
//! Solutions come out in lexicographic order of (hole id, domain index).
//! The search can be resumed strictly after any previously emitted solution,
//! which is how learned constraints take effect mid-stream.

use crate::literal::Literal;

use super::expr::Expr;
use super::{Assignment, Constraint, ConstraintSet, HoleId};

/// Upper bound on search nodes per call to [`Enumeration::next`] multiplied
/// by the budget; guards against domains whose product is huge but whose
/// solutions are sparse.
const NODES_PER_SOLUTION: u64 = 2_000;

struct Compiled {
    expr: Expr<usize>,
    /// Largest variable position; the constraint is decided once it is set.
    last: Option<usize>,
    /// Second largest variable position; forward checking applies once it is
    /// set and only `last` is open.
    second: Option<usize>,
}

pub struct Enumeration {
    set: ConstraintSet,
    ids: Vec<HoleId>,
    domains: Vec<Vec<Literal>>,
    compiled: Vec<Compiled>,
    cursor: Option<Vec<usize>>,
    emitted: usize,
    budget: usize,
    nodes: u64,
    truncated: bool,
}

impl Enumeration {
    pub fn new(set: ConstraintSet, budget: usize) -> Self {
        let mut holes: Vec<_> = set.holes.iter().collect();
        holes.sort_by_key(|h| h.id);
        let ids: Vec<HoleId> = holes.iter().map(|h| h.id).collect();
        let domains = holes
            .iter()
            .map(|h| h.values.iter().filter(|v| h.type_tag.admits(v)).cloned().collect())
            .collect();
        let mut e = Enumeration {
            set: ConstraintSet { holes: vec![], constraints: vec![] },
            ids,
            domains,
            compiled: vec![],
            cursor: None,
            emitted: 0,
            budget,
            nodes: 0,
            truncated: false,
        };
        for c in &set.constraints {
            let compiled = e.compile(c);
            e.compiled.push(compiled);
        }
        e.set = set;
        e
    }

    fn compile(&self, c: &Constraint) -> Compiled {
        let mut positions = Vec::new();
        let expr = c
            .expr
            .try_map_vars(&mut |h: &HoleId| -> Result<Expr<usize>, ()> {
                match self.ids.binary_search(h) {
                    Ok(p) => {
                        positions.push(p);
                        Ok(Expr::Var(p))
                    }
                    // unknown hole: the constraint can never be satisfied
                    Err(_) => Ok(Expr::Const(Literal::Bool(false))),
                }
            })
            .expect("mapping is infallible");
        positions.sort_unstable();
        positions.dedup();
        let last = positions.last().copied();
        let second = positions.len().checked_sub(2).map(|i| positions[i]);
        Compiled { expr, last, second }
    }

    /// Adds a learned constraint; enumeration continues after the last
    /// emitted assignment.
    pub fn add_learned(&mut self, c: Constraint) {
        let compiled = self.compile(&c);
        self.compiled.push(compiled);
        self.set.constraints.push(c);
    }

    pub fn constraint_set(&self) -> &ConstraintSet {
        &self.set
    }

    pub fn emitted(&self) -> usize {
        self.emitted
    }

    /// Whether the stream ended because of the budget or node limit rather
    /// than by exhausting the space.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    /// Domain of a hole after typing, in enumeration order.
    pub fn domain(&self, hole: HoleId) -> Option<&[Literal]> {
        self.ids.binary_search(&hole).ok().map(|p| self.domains[p].as_slice())
    }

    pub fn next_assignment(&mut self) -> Option<Assignment> {
        if self.emitted >= self.budget {
            self.truncated = true;
            return None;
        }
        let node_limit = (self.budget as u64).saturating_mul(NODES_PER_SOLUTION);
        let n = self.ids.len();
        let cursor = self.cursor.clone();
        let mut values: Vec<Option<Literal>> = vec![None; n];
        let mut chosen = vec![0usize; n];

        // constant constraints decide the whole stream
        if self.compiled.iter().any(|c| c.last.is_none() && !c.expr.holds(&|_: &usize| None)) {
            return None;
        }
        if n == 0 {
            if cursor.is_some() {
                return None;
            }
            self.cursor = Some(vec![]);
            self.emitted += 1;
            return Some(Assignment::new());
        }
        // node consistency for unary constraints
        let mut masks: Vec<Vec<bool>> = self.domains.iter().map(|d| vec![true; d.len()]).collect();
        for c in self.compiled.iter().filter(|c| c.second.is_none()) {
            let Some(p) = c.last else { continue };
            for (i, v) in self.domains[p].iter().enumerate() {
                if masks[p][i] && !c.expr.holds(&|q: &usize| (*q == p).then(|| v.clone())) {
                    masks[p][i] = false;
                }
            }
        }
        let found = self.search(0, masks, cursor.as_deref(), &mut values, &mut chosen, node_limit);
        if found {
            self.cursor = Some(chosen.clone());
            self.emitted += 1;
            Some(self.ids.iter().copied().zip(values.into_iter().map(|v| v.expect("total"))).collect())
        } else {
            None
        }
    }

    fn search(
        &mut self,
        depth: usize,
        masks: Vec<Vec<bool>>,
        tight: Option<&[usize]>,
        values: &mut Vec<Option<Literal>>,
        chosen: &mut Vec<usize>,
        node_limit: u64,
    ) -> bool {
        let n = self.ids.len();
        if depth == n {
            return true;
        }
        let start = match tight {
            Some(c) if depth == n - 1 => c[depth] + 1,
            Some(c) => c[depth],
            None => 0,
        };
        for i in start..self.domains[depth].len() {
            if !masks[depth][i] {
                continue;
            }
            self.nodes += 1;
            if self.nodes > node_limit {
                self.truncated = true;
                return false;
            }
            values[depth] = Some(self.domains[depth][i].clone());
            chosen[depth] = i;
            if let Some(next_masks) = self.propagate(depth, &masks, values) {
                let still_tight = tight.filter(|c| c[depth] == i);
                if self.search(depth + 1, next_masks, still_tight, values, chosen, node_limit) {
                    return true;
                }
                if self.truncated {
                    return false;
                }
            }
        }
        values[depth] = None;
        false
    }

    /// Checks constraints completed at `depth` and prunes the domains of
    /// constraints left with a single open variable. `None` on a conflict or
    /// wipe-out.
    fn propagate(&self, depth: usize, masks: &[Vec<bool>], values: &[Option<Literal>]) -> Option<Vec<Vec<bool>>> {
        let lookup = |p: &usize| values[*p].clone();
        for c in &self.compiled {
            if c.last == Some(depth) && c.second.is_some() && !c.expr.holds(&lookup) {
                return None;
            }
        }
        let mut next = masks.to_vec();
        for c in &self.compiled {
            if c.second != Some(depth) {
                continue;
            }
            let open = c.last.expect("second implies last");
            let mut any = false;
            for (i, v) in self.domains[open].iter().enumerate() {
                if !next[open][i] {
                    continue;
                }
                let ok = c.expr.holds(&|p: &usize| if *p == open { Some(v.clone()) } else { values[*p].clone() });
                next[open][i] = ok;
                any |= ok;
            }
            if !any {
                return None;
            }
        }
        Some(next)
    }
}

impl Iterator for Enumeration {
    type Item = Assignment;

    fn next(&mut self) -> Option<Assignment> {
        self.next_assignment()
    }
}

/// All satisfying assignments, up to `budget`.
pub fn enumerate(set: &ConstraintSet, budget: usize) -> Vec<Assignment> {
    Enumeration::new(set.clone(), budget).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::expr::BinOp;
    use crate::constraints::{HoleDomain, Provenance};
    use crate::corpus::TypeTag;

    fn ints(id: HoleId, vs: &[i64]) -> HoleDomain {
        HoleDomain { id, type_tag: TypeTag::Int, values: vs.iter().map(|&v| Literal::Int(v)).collect() }
    }

    fn cmp(op: BinOp, a: HoleId, b: HoleId) -> Constraint {
        Constraint::new(Expr::bin(op, Expr::Var(a), Expr::Var(b)), Provenance::Relation, "test")
    }

    fn as_tuples(v: &[Assignment]) -> Vec<Vec<i64>> {
        v.iter().map(|a| a.values().map(|l| l.as_int().unwrap()).collect()).collect()
    }

    #[test]
    fn less_than_on_two_holes() {
        let set = ConstraintSet { holes: vec![ints(1, &[1, 2]), ints(2, &[1, 2])], constraints: vec![cmp(BinOp::Lt, 1, 2)] };
        assert_eq!(as_tuples(&enumerate(&set, 100)), vec![vec![1, 2]]);
    }

    #[test]
    fn unconstrained_count_is_product() {
        let set = ConstraintSet { holes: vec![ints(1, &[1, 2, 3]), ints(2, &[0, 1]), ints(3, &[5, 6, 7, 8])], constraints: vec![] };
        let all = enumerate(&set, 1000);
        assert_eq!(all.len(), 24);
        assert_eq!(as_tuples(&all[..2]), vec![vec![1, 0, 5], vec![1, 0, 6]]);
    }

    #[test]
    fn follows_domain_order_not_value_order() {
        let set = ConstraintSet { holes: vec![ints(1, &[3, -1, 0])], constraints: vec![] };
        assert_eq!(as_tuples(&enumerate(&set, 10)), vec![vec![3], vec![-1], vec![0]]);
    }

    #[test]
    fn budget_stops_stream() {
        let set = ConstraintSet { holes: vec![ints(1, &[1, 2, 3]), ints(2, &[1, 2, 3])], constraints: vec![] };
        let mut e = Enumeration::new(set, 4);
        assert_eq!(e.by_ref().count(), 4);
        assert!(e.truncated());
    }

    #[test]
    fn learned_constraint_applies_after_cursor() {
        let set = ConstraintSet { holes: vec![ints(1, &[-1, 0, 1]), ints(2, &[-1, 0, 1])], constraints: vec![] };
        let mut e = Enumeration::new(set, 100);
        let first = e.next().unwrap();
        assert_eq!(first.values().cloned().collect::<Vec<_>>(), vec![Literal::Int(-1), Literal::Int(-1)]);
        e.add_learned(Constraint::new(
            Expr::bin(BinOp::Ge, Expr::Var(1), Expr::int(0)),
            Provenance::Learned,
            "h >= 0",
        ));
        let rest = as_tuples(&e.collect::<Vec<_>>());
        assert_eq!(rest.len(), 6);
        assert_eq!(rest[0], vec![0, -1]);
    }

    #[test]
    fn contradiction_empties_stream() {
        let mut set = ConstraintSet { holes: vec![ints(1, &[1, 2])], constraints: vec![] };
        set = set.add_learned(Constraint::new(Expr::Const(Literal::Bool(false)), Provenance::Learned, "false"));
        assert!(enumerate(&set, 10).is_empty());
    }

    #[test]
    fn typing_filters_domain() {
        let set = ConstraintSet {
            holes: vec![HoleDomain { id: 1, type_tag: TypeTag::Int, values: vec![Literal::Int(1), Literal::Str("a".into())] }],
            constraints: vec![],
        };
        assert_eq!(enumerate(&set, 10).len(), 1);
    }

    #[test]
    fn zero_holes_yield_one_empty_assignment() {
        let set = ConstraintSet { holes: vec![], constraints: vec![] };
        let all = enumerate(&set, 10);
        assert_eq!(all.len(), 1);
        assert!(all[0].is_empty());
    }
}
