//! Mutation probes that validate fault hypotheses.

use crate::constraints::{Assignment, Constraint};
use crate::literal::Literal;
use crate::runtime::{normalize_message, RuntimeError};

use super::{FaultHypothesis, HypothesisKind};

#[derive(Debug, Clone, PartialEq)]
pub enum ProbeOutcome {
    Confirmed(Constraint),
    /// The boundary was tightened once (`>=` became `>`).
    Refined(Constraint),
    Rejected,
}

impl ProbeOutcome {
    pub fn constraint(&self) -> Option<&Constraint> {
        match self {
            ProbeOutcome::Confirmed(c) | ProbeOutcome::Refined(c) => Some(c),
            ProbeOutcome::Rejected => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub outcome: ProbeOutcome,
    /// Mutated candidates executed, at most two.
    pub evaluations: usize,
}

/// Mutates the suspect hole and re-executes through `run`, which returns
/// `Ok(None)` when the mutated candidate runs without raising (whether or
/// not its output is right) and `Ok(Some(message))` when it raises.
///
/// An unchanged message rejects the hypothesis; a new message or a clean
/// run confirms it. For `h >= 0` the first probe is `h = 0`; if that raises
/// a different error, `h = 1` is tried and the constraint tightens to `h > 0`
/// unless `1` reproduces the error of `0`.
///
/// `domain` is the hole's domain and `constraints` the constraints already
/// in force; `!=` probes pick the first domain value that differs from the
/// suspect and keeps every constraint mentioning only this hole satisfied.
pub fn probe(
    hypothesis: &FaultHypothesis,
    assignment: &Assignment,
    original_message: &str,
    domain: &[Literal],
    constraints: &[Constraint],
    run: &mut dyn FnMut(&Assignment) -> Result<Option<String>, RuntimeError>,
) -> Result<ProbeResult, RuntimeError> {
    let original = normalize_message(original_message);
    let h = hypothesis.hole;
    let with = |v: Literal| {
        let mut a = assignment.clone();
        a.insert(h, v);
        a
    };
    let changed = |outcome: &Option<String>| match outcome {
        None => true,
        Some(m) => normalize_message(m) != original,
    };
    let confirmed = |evaluations| ProbeResult { outcome: ProbeOutcome::Confirmed(hypothesis.constraint(false)), evaluations };
    let rejected = |evaluations| ProbeResult { outcome: ProbeOutcome::Rejected, evaluations };

    let mutation = match &hypothesis.kind {
        HypothesisKind::NonNegative => {
            let first = run(&with(Literal::Int(0)))?;
            if !changed(&first) {
                return Ok(rejected(1));
            }
            let Some(e0) = first else { return Ok(confirmed(1)) };
            let second = run(&with(Literal::Int(1)))?;
            let tightened = match &second {
                None => true,
                Some(e1) => normalize_message(e1) != normalize_message(&e0),
            };
            return Ok(if tightened {
                ProbeResult { outcome: ProbeOutcome::Refined(hypothesis.constraint(true)), evaluations: 2 }
            } else {
                confirmed(2)
            });
        }
        HypothesisKind::EqualTo(v) => Some(v.clone()),
        HypothesisKind::NotEqual | HypothesisKind::DistinctFrom(_) => {
            let avoid = match &hypothesis.kind {
                HypothesisKind::DistinctFrom(o) => assignment.get(o).cloned(),
                _ => None,
            };
            let unary: Vec<&Constraint> =
                constraints.iter().filter(|c| c.expr.variables().into_iter().eq([h])).collect();
            domain
                .iter()
                .filter(|v| **v != hypothesis.suspect && Some(*v) != avoid.as_ref())
                .find(|v| {
                    let a = with((*v).clone());
                    unary.iter().all(|c| c.holds(&a))
                })
                .cloned()
        }
    };
    let Some(value) = mutation else { return Ok(rejected(0)) };
    let outcome = run(&with(value))?;
    Ok(if changed(&outcome) { confirmed(1) } else { rejected(1) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::expr::{BinOp, Expr};
    use crate::constraints::Provenance;

    fn hyp(kind: HypothesisKind, suspect: i64) -> FaultHypothesis {
        FaultHypothesis {
            hole: 1,
            param: "in_channels".into(),
            suspect: Literal::Int(suspect),
            kind,
            condition: vec![],
            hyponym_type: 1,
            score: 1.0,
        }
    }

    fn assignment(v: i64) -> Assignment {
        [(1, Literal::Int(v)), (2, Literal::Int(7))].into_iter().collect()
    }

    fn ints(vs: &[i64]) -> Vec<Literal> {
        vs.iter().map(|&v| Literal::Int(v)).collect()
    }

    /// A fake layer: negative channels fail with a dimension error, zero
    /// channels with a different one, anything else runs.
    fn layer(a: &Assignment) -> Result<Option<String>, RuntimeError> {
        Ok(match a[&1].as_int().unwrap() {
            v if v < 0 => Some(format!("Trying to create tensor with negative dimension: [{v}, 3]")),
            0 => Some("Expected 0-channel input for weight [2, 0], but got 1-channel input instead".into()),
            _ => None,
        })
    }

    #[test]
    fn negative_then_zero_then_one_refines() {
        let h = hyp(HypothesisKind::NonNegative, -2);
        let msg = "Trying to create tensor with negative dimension: [-2, 3]";
        let r = probe(&h, &assignment(-2), msg, &ints(&[-2, -1, 0, 1]), &[], &mut layer).unwrap();
        assert_eq!(r.evaluations, 2);
        assert_eq!(r.outcome.constraint().unwrap().render(), "#1 > 0");
        assert!(matches!(r.outcome, ProbeOutcome::Refined(_)));
    }

    #[test]
    fn identical_message_rejects() {
        let h = hyp(HypothesisKind::NonNegative, -2);
        let mut always = |_: &Assignment| Ok(Some("Trying to create tensor with negative dimension: [5, -1]".to_string()));
        let r = probe(&h, &assignment(-2), "Trying to create tensor with negative dimension: [-2, -1]", &[], &[], &mut always).unwrap();
        assert_eq!(r.outcome, ProbeOutcome::Rejected);
        assert_eq!(r.evaluations, 1);
    }

    #[test]
    fn immediate_pass_confirms_original() {
        let h = hyp(HypothesisKind::NonNegative, -2);
        let mut pass = |_: &Assignment| Ok(None);
        let r = probe(&h, &assignment(-2), "Trying to create tensor with negative dimension: [-2]", &[], &[], &mut pass).unwrap();
        assert_eq!(r.outcome.constraint().unwrap().render(), "#1 >= 0");
        assert_eq!(r.evaluations, 1);
    }

    #[test]
    fn not_equal_skips_values_ruled_out() {
        let h = hyp(HypothesisKind::NotEqual, 0);
        let known = Constraint::new(Expr::bin(BinOp::Ne, Expr::Var(1), Expr::int(-1)), Provenance::Learned, "");
        let mut seen = Vec::new();
        let mut record = |a: &Assignment| {
            seen.push(a[&1].clone());
            Ok(None)
        };
        let r = probe(&h, &assignment(0), "non-positive stride is not supported", &ints(&[0, -1, 2]), &[known], &mut record).unwrap();
        assert_eq!(seen, ints(&[2]));
        assert_eq!(r.outcome.constraint().unwrap().render(), "#1 != 0");
        let none = probe(&h, &assignment(0), "x is not supported", &ints(&[0]), &[], &mut |_| Ok(None)).unwrap();
        assert_eq!(none, ProbeResult { outcome: ProbeOutcome::Rejected, evaluations: 0 });
    }

    #[test]
    fn adapter_failure_surfaces() {
        let h = hyp(HypothesisKind::EqualTo(Literal::Int(3)), 2);
        let mut broken = |_: &Assignment| Err(RuntimeError::Adapter("pipe closed".into()));
        assert!(probe(&h, &assignment(2), "m", &[], &[], &mut broken).is_err());
    }
}
