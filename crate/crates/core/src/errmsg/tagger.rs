//! Rule-based part-of-speech tagging for interpreter error messages.
//!
//! The lexicon is closed for function words (prepositions, conjunctions,
//! auxiliaries, adverbs); content words are tagged by suffix and shape, and
//! anything unrecognized is a noun.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    Noun,
    Preposition,
    /// Lexical adjective, e.g. `negative`, `non-positive`.
    Adjective,
    /// Number-prefixed adjective, e.g. `3-dimensional`.
    NumericAdjective,
    Cardinal,
    Conjunction,
    Verb,
    Adverb,
    PastParticiple,
    Determiner,
    To,
    Punctuation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub text: String,
    pub tag: Tag,
}

const PREPOSITIONS: &[&str] = &[
    "with", "of", "for", "in", "on", "at", "from", "by", "into", "outside", "within", "without", "over", "under",
    "between", "than", "after", "before",
];
const CONJUNCTIONS: &[&str] = &["but", "and", "or", "nor", "yet", "so"];
const VERBS: &[&str] = &[
    "is", "are", "was", "were", "be", "being", "got", "get", "gets", "has", "have", "had", "must", "can", "cannot",
    "should", "may", "does", "do", "did", "create", "expected", "trying", "requires", "require", "received",
];
const ADVERBS: &[&str] = &["not", "never", "only", "also", "instead", "already", "still", "too"];
const PAST_PARTICIPLES: &[&str] = &[
    "found", "given", "known", "done", "made", "seen", "set", "built", "shown", "supported", "allowed", "defined",
    "recognized", "accepted", "implemented", "expected", "permitted",
];
const DETERMINERS: &[&str] = &["the", "a", "an", "this", "that", "these", "those", "each", "every", "any", "no"];
const ADJECTIVES: &[&str] = &[
    "negative", "positive", "invalid", "empty", "extra", "multiple", "oversized", "unknown", "wrong", "different",
    "same", "valid", "incompatible", "illegal", "unsupported", "new", "large", "small", "zero", "repeated",
    "duplicate", "missing", "malformed", "omitted", "non-negative", "non-positive",
];
const NUMBER_WORDS: &[&str] = &["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"];
const ADJECTIVE_SUFFIXES: &[&str] = &["ive", "ous", "ible", "able", "ional", "ical"];

fn is_number(s: &str) -> bool {
    let body = s.strip_prefix('-').unwrap_or(s);
    !body.is_empty()
        && body.chars().next().is_some_and(|c| c.is_ascii_digit())
        && body.parse::<f64>().is_ok()
}

fn word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.'
}

/// Splits a message into words and single-character punctuation tokens. A
/// leading `-` belongs to a word only when a digit follows; trailing dots
/// are punctuation.
pub fn tokenize(message: &str) -> Vec<String> {
    let chars: Vec<char> = message.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let starts_word = c.is_ascii_alphanumeric()
            || c == '_'
            || (c == '-' && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit()));
        if !starts_word {
            out.push(c.to_string());
            i += 1;
            continue;
        }
        let start = i;
        i += 1;
        while i < chars.len() && word_char(chars[i]) {
            i += 1;
        }
        let mut word: String = chars[start..i].iter().collect();
        let mut trailing = 0;
        while word.ends_with('.') || word.ends_with('-') {
            word.pop();
            trailing += 1;
        }
        out.push(word);
        for _ in 0..trailing {
            out.push(".".into());
        }
    }
    out
}

pub fn tag_word(word: &str) -> Tag {
    let lower = word.to_ascii_lowercase();
    let w = lower.as_str();
    if !w.chars().next().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        return Tag::Punctuation;
    }
    if is_number(w) || (NUMBER_WORDS.contains(&w) && w != "zero") {
        return Tag::Cardinal;
    }
    if let Some((head, tail)) = w.split_once('-') {
        if is_number(head) && tail.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
            return Tag::NumericAdjective;
        }
    }
    if PREPOSITIONS.contains(&w) {
        return Tag::Preposition;
    }
    if CONJUNCTIONS.contains(&w) {
        return Tag::Conjunction;
    }
    if w == "to" {
        return Tag::To;
    }
    if DETERMINERS.contains(&w) {
        return Tag::Determiner;
    }
    if ADVERBS.contains(&w) || (w.len() > 4 && w.ends_with("ly")) {
        return Tag::Adverb;
    }
    if ADJECTIVES.contains(&w) {
        return Tag::Adjective;
    }
    if VERBS.contains(&w) {
        return Tag::Verb;
    }
    if PAST_PARTICIPLES.contains(&w) || (w.len() > 4 && w.ends_with("ed") && !w.contains('_')) {
        return Tag::PastParticiple;
    }
    let hyphenated_words = w.contains('-') && w.split('-').all(|p| p.chars().all(|c| c.is_ascii_alphabetic()));
    if hyphenated_words || (!w.contains('_') && ADJECTIVE_SUFFIXES.iter().any(|s| w.len() > s.len() + 2 && w.ends_with(s))) {
        return Tag::Adjective;
    }
    Tag::Noun
}

pub fn tag(message: &str) -> Vec<Token> {
    tokenize(message)
        .into_iter()
        .map(|text| {
            let tag = tag_word(&text);
            Token { text, tag }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(msg: &str) -> Vec<(String, Tag)> {
        tag(msg).into_iter().map(|t| (t.text, t.tag)).collect()
    }

    #[test]
    fn splits_punctuation_and_numbers() {
        assert_eq!(
            tokenize("dimension -1: [-1, 100]"),
            vec!["dimension", "-1", ":", "[", "-1", ",", "100", "]"]
        );
        assert_eq!(tokenize("softmax(): not 3."), vec!["softmax", "(", ")", ":", "not", "3", "."]);
        assert_eq!(tokenize("mt.nope is"), vec!["mt.nope", "is"]);
    }

    #[test]
    fn tags_table_examples() {
        use Tag::*;
        let t = tags("tensor with negative dimension");
        assert_eq!(t.iter().map(|x| x.1).collect::<Vec<_>>(), vec![Noun, Preposition, Adjective, Noun]);
        assert_eq!(tag_word("3-dimensional"), NumericAdjective);
        assert_eq!(tag_word("non-positive"), Adjective);
        assert_eq!(tag_word("position"), Noun);
        assert_eq!(tag_word("1"), Cardinal);
        assert_eq!(tag_word("but"), Conjunction);
        assert_eq!(tag_word("got"), Verb);
        assert_eq!(tag_word("not"), Adverb);
        assert_eq!(tag_word("supported"), PastParticiple);
        assert_eq!(tag_word("kernel_size"), Noun);
        assert_eq!(tag_word("positional"), Adjective);
    }
}
