//! Learning constraints from interpreter error messages.
//!
//! A message is classified by one of four lexico-syntactic patterns over
//! part-of-speech tags, the pattern and its capture point at suspect holes
//! of the failing candidate, and mutation probes decide which suspicions
//! become learned constraints.
//!
//! | type | tag sequence                          | capture example                  |
//! |------|---------------------------------------|----------------------------------|
//! | 1    | Noun* Prep Adj Noun                   | `tensor with negative dimension` |
//! | 2    | Noun Cardinal                         | `position 1`                     |
//! | 3    | Conj Verb (Adj or NumAdj) Noun        | `but got 4-dimensional input`    |
//! | 4    | Verb Adverb PastParticiple            | `is not supported`               |
//!
//! The adjective of type 1 is required and must be lexical: with an optional
//! or numeric adjective, dimension-mismatch messages such as `input for
//! 3-dimensional weight` would be captured by type 1 before type 3.

pub mod probe;
pub mod tagger;

use std::collections::BTreeSet;

use crate::constraints::expr::{BinOp, Expr};
use crate::constraints::{Assignment, Constraint, HoleId, Provenance};
use crate::literal::Literal;
use crate::matching::embedding::EmbeddingTable;
use crate::matching::stem::stem;
use crate::sketch::{Sketch, TemplateArg};

pub use probe::{probe, ProbeOutcome, ProbeResult};
use tagger::{Tag, Token};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HyponymPattern {
    pub type_id: u8,
    pub pos_sequence: &'static str,
    pub extraction_rule: &'static str,
}

pub const PATTERNS: [HyponymPattern; 4] = [
    HyponymPattern {
        type_id: 1,
        pos_sequence: "Noun* Preposition Adjective Noun",
        extraction_rule: "the adjective names the violated property; negative-valued holes are suspects",
    },
    HyponymPattern {
        type_id: 2,
        pos_sequence: "Noun Cardinal",
        extraction_rule: "the cardinal is the 1-based argument position in the named call",
    },
    HyponymPattern {
        type_id: 3,
        pos_sequence: "Conjunction Verb Adjective|NumericAdjective Noun",
        extraction_rule: "holes holding the expected size should hold the size actually got",
    },
    HyponymPattern {
        type_id: 4,
        pos_sequence: "Verb Adverb PastParticiple",
        extraction_rule: "the subject phrase before the verb names the parameter or value at fault",
    },
];

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub pattern: &'static HyponymPattern,
    /// Token range of the capture, end exclusive.
    pub span: (usize, usize),
    pub capture: String,
    pub tokens: Vec<Token>,
}

impl Classification {
    pub fn type_id(&self) -> u8 {
        self.pattern.type_id
    }
}

fn find(tags: &[Tag], len: usize, accept: impl Fn(&[Tag]) -> bool) -> Option<usize> {
    (0..tags.len().saturating_sub(len - 1)).find(|&i| accept(&tags[i..i + len]))
}

/// First matching pattern in type order, or `None`.
pub fn classify(message: &str) -> Option<Classification> {
    use Tag::*;
    let tokens = tagger::tag(message);
    let tags: Vec<Tag> = tokens.iter().map(|t| t.tag).collect();
    let span = if let Some(i) = find(&tags, 3, |w| w == [Preposition, Adjective, Noun]) {
        let mut start = i;
        while start > 0 && tags[start - 1] == Noun {
            start -= 1;
        }
        Some((0, start, i + 3))
    } else if let Some(i) = find(&tags, 2, |w| w == [Noun, Cardinal]) {
        Some((1, i, i + 2))
    } else if let Some(i) =
        find(&tags, 4, |w| w[0] == Conjunction && w[1] == Verb && matches!(w[2], Adjective | NumericAdjective) && w[3] == Noun)
    {
        Some((2, i, i + 4))
    } else {
        find(&tags, 3, |w| w == [Verb, Adverb, PastParticiple]).map(|i| (3, i, i + 3))
    };
    let (p, start, end) = span?;
    let capture = tokens[start..end].iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ");
    Some(Classification { pattern: &PATTERNS[p], span: (start, end), capture, tokens })
}

#[derive(Debug, Clone, PartialEq)]
pub enum HypothesisKind {
    /// `h >= 0`, refinable to `h > 0`.
    NonNegative,
    /// `h != suspect`.
    NotEqual,
    /// `h == value`.
    EqualTo(Literal),
    /// `h != other`.
    DistinctFrom(HoleId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaultHypothesis {
    pub hole: HoleId,
    pub param: String,
    pub suspect: Literal,
    pub kind: HypothesisKind,
    /// Hole values under which the fault was observed; the constraint only
    /// applies while they all hold.
    pub condition: Vec<(HoleId, Literal)>,
    pub hyponym_type: u8,
    pub score: f64,
}

impl FaultHypothesis {
    fn core(&self, refined: bool) -> Expr<HoleId> {
        let h = Expr::Var(self.hole);
        match &self.kind {
            HypothesisKind::NonNegative if refined => Expr::bin(BinOp::Gt, h, Expr::int(0)),
            HypothesisKind::NonNegative => Expr::bin(BinOp::Ge, h, Expr::int(0)),
            HypothesisKind::NotEqual => Expr::bin(BinOp::Ne, h, Expr::Const(self.suspect.clone())),
            HypothesisKind::EqualTo(v) => Expr::bin(BinOp::Eq, h, Expr::Const(v.clone())),
            HypothesisKind::DistinctFrom(o) => Expr::bin(BinOp::Ne, h, Expr::Var(*o)),
        }
    }

    /// The constraint this hypothesis proposes; `refined` tightens `>=` to
    /// `>`.
    pub fn constraint(&self, refined: bool) -> Constraint {
        let escape = self
            .condition
            .iter()
            .map(|(h, v)| Expr::bin(BinOp::Ne, Expr::Var(*h), Expr::Const(v.clone())))
            .reduce(Expr::or);
        let expr = match escape {
            Some(e) => e.or(self.core(refined)),
            None => self.core(refined),
        };
        let origin = format!("type {} hypothesis on {}", self.hyponym_type, self.param);
        Constraint::new(expr, Provenance::Learned, &origin)
    }
}

fn bigrams(s: &str) -> Vec<String> {
    let padded: Vec<char> = format!("^{}$", s.to_ascii_lowercase()).chars().collect();
    padded.windows(2).map(|w| w.iter().collect()).collect()
}

/// Dice coefficient over padded character bigrams.
pub fn ngram_similarity(a: &str, b: &str) -> f64 {
    let (x, y) = (bigrams(a), bigrams(b));
    if x.is_empty() || y.is_empty() {
        return 0.0;
    }
    let mut pool = y.clone();
    let mut common = 0;
    for g in &x {
        if let Some(p) = pool.iter().position(|h| h == g) {
            pool.swap_remove(p);
            common += 1;
        }
    }
    2.0 * common as f64 / (x.len() + y.len()) as f64
}

/// Similarity of a message word to a parameter name: the best of the whole
/// name and its underscore-separated parts, and of embedding cosine when a
/// table covers both stems.
pub fn word_param_similarity(word: &str, param: &str, table: Option<&EmbeddingTable>) -> f64 {
    let base = param.split('[').next().unwrap_or(param);
    let mut best = ngram_similarity(word, base);
    for part in base.split('_').filter(|p| !p.is_empty()) {
        best = best.max(ngram_similarity(word, part));
        if let Some(t) = table {
            if let (Some(a), Some(b)) = (t.get(&stem(&word.to_ascii_lowercase())), t.get(&stem(part))) {
                if let Ok(c) = crate::matching::cosine(a, b) {
                    best = best.max(c);
                }
            }
        }
    }
    best
}

fn parse_int(text: &str) -> Option<i64> {
    text.parse().ok()
}

fn numeric_value(word: &str) -> Option<f64> {
    if word.eq_ignore_ascii_case("zero") {
        return Some(0.0);
    }
    word.parse::<f64>().ok().filter(|_| word.chars().any(|c| c.is_ascii_digit()))
}

fn literal_matches_number(lit: &Literal, x: f64) -> bool {
    match lit {
        Literal::Int(v) => *v as f64 == x,
        Literal::Float(v) => *v == x,
        _ => false,
    }
}

/// The call named by a leading `name():` prefix, if any.
fn named_call(tokens: &[Token], sketch: &Sketch) -> (Option<usize>, usize) {
    let texts: Vec<&str> = tokens.iter().take(4).map(|t| t.text.as_str()).collect();
    if texts.len() == 4 && texts[1..] == ["(", ")", ":"] {
        let name = texts[0].to_ascii_lowercase();
        let call = sketch
            .chain
            .iter()
            .position(|c| c.callee.rsplit('.').next().unwrap_or(&c.callee).to_ascii_lowercase() == name);
        return (call, 4);
    }
    (None, 0)
}

/// Sibling holes that condition a constraint on hole `h`: other holes of
/// the same reshaping call, or every reshaping hole for a target hole.
fn condition_for(sketch: &Sketch, h: HoleId, a: &Assignment) -> Vec<(HoleId, Literal)> {
    let Some(hole) = sketch.hole(h) else { return vec![] };
    let target = sketch.target_index();
    sketch
        .holes
        .iter()
        .filter(|o| o.id != h && if hole.call == target { o.call != target } else { o.call == hole.call })
        .filter_map(|o| a.get(&o.id).map(|v| (o.id, v.clone())))
        .collect()
}

/// Suspect holes of the failing candidate, best first (score descending,
/// then hole id).
pub fn hypothesize(
    classification: &Classification,
    sketch: &Sketch,
    assignment: &Assignment,
    table: Option<&EmbeddingTable>,
) -> Vec<FaultHypothesis> {
    let tokens = &classification.tokens;
    let type_id = classification.type_id();
    let param = |h: HoleId| sketch.hole(h).map(|x| x.bound_param.clone()).unwrap_or_default();
    let make = |h: HoleId, kind: HypothesisKind, score: f64, conditioned: bool| FaultHypothesis {
        hole: h,
        param: param(h),
        suspect: assignment[&h].clone(),
        kind,
        condition: if conditioned { condition_for(sketch, h, assignment) } else { vec![] },
        hyponym_type: type_id,
        score,
    };
    let mut out: Vec<FaultHypothesis> = Vec::new();
    let (named, body_start) = named_call(tokens, sketch);
    match type_id {
        1 => {
            let mentioned: BTreeSet<i64> = tokens.iter().filter(|t| t.tag == Tag::Cardinal).filter_map(|t| parse_int(&t.text)).collect();
            for hole in &sketch.holes {
                if let Some(v) = assignment.get(&hole.id).and_then(Literal::as_int).filter(|v| *v < 0) {
                    let score = if mentioned.contains(&v) { 1.0 } else { 0.5 };
                    out.push(make(hole.id, HypothesisKind::NonNegative, score, false));
                }
            }
        }
        2 => {
            let (start, _) = classification.span;
            let Some(position) = parse_int(&tokens[start + 1].text) else { return vec![] };
            let call = named.unwrap_or_else(|| sketch.target_index());
            let slot = usize::try_from(position).ok().and_then(|p| p.checked_sub(1)).and_then(|p| sketch.chain[call].args.get(p));
            let Some(slot) = slot else { return vec![] };
            let holes = match slot.arg {
                TemplateArg::Hole(h) => vec![h],
                TemplateArg::Pair(a, b) => vec![a, b],
            };
            // "..., not v" names the offending value
            let offending = tokens
                .windows(2)
                .rev()
                .find(|w| w[0].text == "not" && w[1].tag == Tag::Cardinal)
                .and_then(|w| w[1].text.parse::<f64>().ok());
            let picked: Vec<HoleId> = match offending {
                Some(v) if holes.iter().any(|h| literal_matches_number(&assignment[h], v)) => {
                    holes.into_iter().filter(|h| literal_matches_number(&assignment[h], v)).collect()
                }
                _ => holes,
            };
            let reshape = call != sketch.target_index();
            for h in picked {
                out.push(make(h, HypothesisKind::NotEqual, 1.0, !reshape));
            }
        }
        3 => {
            let size_of = |t: &Token| t.text.split_once('-').and_then(|(n, unit)| Some((parse_int(n)?, unit.to_string())));
            let (start, _) = classification.span;
            let Some((got, unit)) = size_of(&tokens[start + 2]) else { return vec![] };
            let Some((expected, _)) = tokens[..start].iter().find(|t| t.tag == Tag::NumericAdjective).and_then(size_of) else {
                return vec![];
            };
            if expected == got {
                return vec![];
            }
            for hole in &sketch.holes {
                if assignment.get(&hole.id).and_then(Literal::as_int) == Some(expected) {
                    let score = word_param_similarity(&unit, &hole.bound_param, table);
                    out.push(make(hole.id, HypothesisKind::EqualTo(Literal::Int(got)), score, true));
                }
            }
        }
        4 => {
            let (verb, _) = classification.span;
            let mut subject_start = verb;
            while subject_start > body_start && tokens[subject_start - 1].tag != Tag::Punctuation {
                subject_start -= 1;
            }
            let subject = &tokens[subject_start..verb];
            let scope: Vec<&crate::sketch::Hole> = match named {
                Some(c) => sketch.holes_of_call(c).collect(),
                None => sketch.holes.iter().collect(),
            };
            if subject.iter().any(|t| matches!(t.text.to_ascii_lowercase().as_str(), "repeated" | "duplicate")) {
                for (i, hole) in scope.iter().enumerate() {
                    let v = &assignment[&hole.id];
                    if let Some(earlier) = scope[..i].iter().find(|o| &assignment[&o.id] == v) {
                        out.push(make(hole.id, HypothesisKind::DistinctFrom(earlier.id), 1.0, false));
                    }
                }
            } else {
                let numbers: Vec<f64> = subject.iter().filter_map(|t| numeric_value(&t.text)).collect();
                let words: Vec<&str> = subject
                    .iter()
                    .filter(|t| matches!(t.tag, Tag::Noun | Tag::Adjective))
                    .map(|t| t.text.as_str())
                    .collect();
                let mut scored: Vec<(HoleId, f64)> = Vec::new();
                for hole in &scope {
                    let v = &assignment[&hole.id];
                    let by_value = if numbers.iter().any(|&x| literal_matches_number(v, x)) { 1.0 } else { 0.0 };
                    let by_name = words
                        .iter()
                        .map(|w| word_param_similarity(w, &hole.bound_param, table))
                        .fold(0.0, f64::max);
                    let score = f64::max(by_value, by_name);
                    if score > 0.0 {
                        scored.push((hole.id, score));
                    }
                }
                // keep the best-scoring parameter only
                let best = scored.iter().map(|s| s.1).fold(0.0, f64::max);
                for (h, s) in scored {
                    if s >= best - 1e-12 {
                        out.push(make(h, HypothesisKind::NotEqual, s, true));
                    }
                }
            }
        }
        _ => {}
    }
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.hole.cmp(&b.hole)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::DocCorpus;
    use crate::sketch::{default_reshaping_vocab, generate_sketches};

    #[test]
    fn table_examples() {
        let cases = [
            ("Trying to create tensor with negative dimension -1: [-1, 100, -1, -1]", 1, "tensor with negative dimension"),
            ("embedding(): argument weight (position 1) must be Tensor, not int", 2, "position 1"),
            (
                "Expected 3-dimensional input for 3-dimensional weight [2, 2, 3], but got 4-dimensional input of size [100, 50, 40, 1] instead",
                3,
                "but got 4-dimensional input",
            ),
            ("non-positive stride is not supported", 4, "is not supported"),
        ];
        for (msg, ty, capture) in cases {
            let c = classify(msg).unwrap_or_else(|| panic!("{msg}"));
            assert_eq!(c.type_id(), ty, "{msg}");
            assert_eq!(c.capture, capture);
        }
    }

    #[test]
    fn unrelated_messages_do_not_classify() {
        for msg in ["", "segmentation fault", "out of memory", "CUDA error: device-side assert triggered", "killed"] {
            assert!(classify(msg).is_none(), "{msg}");
        }
    }

    fn conv_sketch() -> Sketch {
        let text = r#"{"library": "mt", "language": "python", "entries": [
            {"name": "mt.nn.Conv2d", "description": "conv",
             "params": [
                {"name": "in_channels", "type": "int", "required": true, "description": ""},
                {"name": "out_channels", "type": "int", "required": true, "description": ""},
                {"name": "kernel_size", "type": "int_pair", "required": true, "description": ""},
                {"name": "stride", "type": "int_pair", "required": false, "default": [1, 1], "description": ""},
                {"name": "padding", "type": "int_pair", "required": false, "default": [0, 0], "description": ""}
             ]}]}"#;
        let entry = DocCorpus::from_json_str(text).unwrap().entries.remove(0);
        generate_sketches(&entry, 2, &default_reshaping_vocab()).remove(1)
    }

    fn assign(vals: &[i64]) -> Assignment {
        vals.iter().enumerate().map(|(i, &v)| (i + 1, Literal::Int(v))).collect()
    }

    #[test]
    fn negative_dimension_suspects_negative_holes() {
        let sketch = conv_sketch();
        let a = assign(&[-2, 40, 3, 3, 1, 1, 0, 0, 0, 1, 2, 3]);
        let c = classify("Trying to create tensor with negative dimension: [40, -2, 3, 3]").unwrap();
        let hs = hypothesize(&c, &sketch, &a, None);
        assert_eq!(hs.len(), 1);
        assert_eq!(hs[0].param, "in_channels");
        assert_eq!(hs[0].constraint(false).render(), "#1 >= 0");
        let none = assign(&[2, 40, 3, 3, 1, 1, 0, 0, 0, 1, 2, 3]);
        assert!(hypothesize(&c, &sketch, &none, None).is_empty());
    }

    #[test]
    fn position_points_at_named_call_slot() {
        let sketch = conv_sketch();
        let a = assign(&[1, 2, 3, 3, 1, 1, 0, 0, 0, 4, 2, 3]);
        let c = classify("permute(): argument dims (position 2) must be in range [-4, 3], not 4").unwrap();
        let hs = hypothesize(&c, &sketch, &a, None);
        assert_eq!(hs.len(), 1);
        assert_eq!(hs[0].hole, 10);
        assert_eq!(hs[0].constraint(false).render(), "#10 != 4");
    }

    #[test]
    fn size_mismatch_is_conditioned_on_reshape_holes() {
        let sketch = conv_sketch();
        let a = assign(&[2, 3, 1, 1, 1, 1, 0, 0, 0, 1, 2, 3]);
        let c = classify("Expected 2-channel input for weight [3, 2, 1, 1], but got 5-channel input instead").unwrap();
        let hs = hypothesize(&c, &sketch, &a, None);
        assert_eq!(hs[0].param, "in_channels");
        assert_eq!(hs[0].constraint(false).render(), "#9 != 0 or #10 != 1 or #11 != 2 or #12 != 3 or #1 == 5");
        assert!(!hs[0].constraint(false).holds(&a));
    }

    #[test]
    fn unsupported_value_names_parameter() {
        let sketch = conv_sketch();
        let a = assign(&[1, 2, 3, 3, 0, 1, 0, 0, 0, 1, 2, 3]);
        let c = classify("non-positive stride is not supported").unwrap();
        let hs = hypothesize(&c, &sketch, &a, None);
        let params: Vec<&str> = hs.iter().map(|h| h.param.as_str()).collect();
        assert_eq!(params, vec!["stride[0]", "stride[1]"]);
        let c = classify("permute(): repeated dim is not allowed").unwrap();
        let a = assign(&[1, 2, 3, 3, 1, 1, 0, 0, 0, 1, 1, 3]);
        let hs = hypothesize(&c, &sketch, &a, None);
        assert_eq!(hs.len(), 1);
        assert_eq!(hs[0].constraint(false).render(), "#11 != #10");
    }

    #[test]
    fn ngram_similarity_basics() {
        assert_eq!(ngram_similarity("stride", "stride"), 1.0);
        assert_eq!(ngram_similarity("stride", "padding"), 0.0);
        assert!(word_param_similarity("kernel", "kernel_size[0]", None) > word_param_similarity("kernel", "in_channels", None));
    }
}
