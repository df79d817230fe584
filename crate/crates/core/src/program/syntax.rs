//! The mini call syntax.
//!
//! ```text
//! input x
//! h = mf.layers.Conv2D(x, filters=32, kernel_size=3, strides=(2, 2))
//! y = mf.layers.ReLU()
//! ```
//!
//! Identifier arguments are data operands; everything else is a literal
//! parameter. A call without operands consumes the previous line's result
//! (the first declared input on the first line). `#` starts a comment.

use std::collections::HashSet;

use crate::literal::Literal;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SyntaxError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: `{name}` is used before it is defined")]
    Scope { line: usize, name: String },
    #[error("line {line}: `{name}` is assigned twice")]
    Reassigned { line: usize, name: String },
}

/// One parsed call, before callee resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Call {
    pub binds: String,
    pub callee: String,
    pub operands: Vec<String>,
    pub positional: Vec<Literal>,
    pub keyword: Vec<(String, Literal)>,
}

impl Call {
    /// Canonical text with explicit operands.
    pub fn render(&self) -> String {
        let mut args: Vec<String> = self.operands.clone();
        args.extend(self.positional.iter().map(|l| l.to_string()));
        args.extend(self.keyword.iter().map(|(k, v)| format!("{k}={v}")));
        format!("{} = {}({})", self.binds, self.callee, args.join(", "))
    }
}

/// A parsed text: declared inputs and calls, with operands made explicit.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Parsed {
    pub inputs: Vec<String>,
    pub calls: Vec<Call>,
}

/// Parses program text. With `strict_scope`, every operand must be an input
/// or an earlier binding; otherwise unknown names are taken as externally
/// supplied (the runtime's environment).
pub fn parse(text: &str, strict_scope: bool) -> Result<Parsed, SyntaxError> {
    let mut parsed = Parsed::default();
    let mut defined: HashSet<String> = HashSet::new();
    let mut previous: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| SyntaxError::Parse { line: line_no, message };
        if let Some(rest) = line.strip_prefix("input ") {
            for name in rest.split(',').map(str::trim) {
                if !is_ident(name) {
                    return Err(err(format!("bad input name `{name}`")));
                }
                if !defined.insert(name.to_string()) {
                    return Err(SyntaxError::Reassigned { line: line_no, name: name.to_string() });
                }
                parsed.inputs.push(name.to_string());
                if previous.is_none() {
                    previous = Some(name.to_string());
                }
            }
            continue;
        }
        let mut call = parse_call(line).map_err(err)?;
        if call.operands.is_empty() {
            match &previous {
                Some(p) => call.operands.push(p.clone()),
                None => {
                    return Err(err("call has no operand and no earlier value to consume".into()));
                }
            }
        }
        if strict_scope {
            for op in &call.operands {
                if !defined.contains(op) {
                    return Err(SyntaxError::Scope { line: line_no, name: op.clone() });
                }
            }
        }
        if !defined.insert(call.binds.clone()) && strict_scope {
            return Err(SyntaxError::Reassigned { line: line_no, name: call.binds.clone() });
        }
        previous = Some(call.binds.clone());
        parsed.calls.push(call);
    }
    Ok(parsed)
}

fn strip_comment(line: &str) -> &str {
    let mut in_str: Option<char> = None;
    for (i, c) in line.char_indices() {
        match in_str {
            Some(q) if c == q => in_str = None,
            Some(_) => {}
            None if c == '"' || c == '\'' => in_str = Some(c),
            None if c == '#' => return &line[..i],
            None => {}
        }
    }
    line
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_dotted(s: &str) -> bool {
    !s.is_empty() && s.split('.').all(is_ident)
}

fn parse_call(line: &str) -> Result<Call, String> {
    let (lhs, rhs) = line.split_once('=').ok_or("expected `name = Callee(...)`")?;
    let binds = lhs.trim();
    if !is_ident(binds) {
        return Err(format!("bad variable name `{binds}`"));
    }
    let rhs = rhs.trim();
    let open = rhs.find('(').ok_or("expected `(` after the callee")?;
    let callee = rhs[..open].trim();
    if !is_dotted(callee) {
        return Err(format!("bad callee `{callee}`"));
    }
    let body = rhs[open + 1..].strip_suffix(')').ok_or("expected `)` at end of line")?;
    let mut call = Call {
        binds: binds.to_string(),
        callee: callee.to_string(),
        operands: vec![],
        positional: vec![],
        keyword: vec![],
    };
    for arg in split_args(body)? {
        let arg = arg.trim();
        if arg.is_empty() {
            return Err("empty argument".into());
        }
        if let Some((k, v)) = split_keyword(arg) {
            if call.keyword.iter().any(|(name, _)| name == k) {
                return Err(format!("keyword `{k}` given twice"));
            }
            call.keyword.push((k.to_string(), parse_literal(v.trim())?));
            continue;
        }
        if !call.keyword.is_empty() {
            return Err("positional argument after keyword argument".into());
        }
        if is_ident(arg) && !matches!(arg, "true" | "false" | "True" | "False") {
            if !call.positional.is_empty() {
                return Err(format!("operand `{arg}` after literal arguments"));
            }
            call.operands.push(arg.to_string());
        } else {
            call.positional.push(parse_literal(arg)?);
        }
    }
    Ok(call)
}

fn split_keyword(arg: &str) -> Option<(&str, &str)> {
    let (k, v) = arg.split_once('=')?;
    let k = k.trim();
    (is_ident(k) && !v.starts_with('=')).then_some((k, v))
}

/// Splits on top-level commas, respecting parentheses and string quotes.
fn split_args(body: &str) -> Result<Vec<&str>, String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut in_str: Option<char> = None;
    let mut start = 0;
    for (i, c) in body.char_indices() {
        match in_str {
            Some(q) if c == q => in_str = None,
            Some(_) => {}
            None => match c {
                '"' | '\'' => in_str = Some(c),
                '(' => depth += 1,
                ')' => {
                    depth -= 1;
                    if depth < 0 {
                        return Err("unbalanced `)`".into());
                    }
                }
                ',' if depth == 0 => {
                    out.push(&body[start..i]);
                    start = i + 1;
                }
                _ => {}
            },
        }
    }
    if in_str.is_some() {
        return Err("unterminated string".into());
    }
    if depth != 0 {
        return Err("unbalanced `(`".into());
    }
    let last = &body[start..];
    if !last.trim().is_empty() || !out.is_empty() {
        out.push(last);
    }
    Ok(out)
}

pub fn parse_literal(text: &str) -> Result<Literal, String> {
    match text {
        "true" | "True" => return Ok(Literal::Bool(true)),
        "false" | "False" => return Ok(Literal::Bool(false)),
        _ => {}
    }
    if let Some(inner) = text.strip_prefix('(').and_then(|t| t.strip_suffix(')')) {
        let items = inner
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<i64>().map_err(|_| format!("tuple element `{s}` is not an integer")))
            .collect::<Result<Vec<_>, _>>()?;
        if items.is_empty() {
            return Err("empty tuple".into());
        }
        return Ok(Literal::Tuple(items));
    }
    for q in ['"', '\''] {
        if let Some(inner) = text.strip_prefix(q).and_then(|t| t.strip_suffix(q)) {
            if text.len() >= 2 {
                return Ok(Literal::Str(unescape(inner)));
            }
        }
    }
    if let Ok(v) = text.parse::<i64>() {
        return Ok(Literal::Int(v));
    }
    if text.contains(['.', 'e', 'E']) && !text.chars().any(|c| c.is_ascii_alphabetic() && c != 'e' && c != 'E') {
        if let Ok(v) = text.parse::<f64>() {
            return Ok(Literal::Float(v));
        }
    }
    Err(format!("cannot parse literal `{text}`"))
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('n') => out.push('\n'),
                Some(other) => out.push(other),
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyword_call() {
        let p = parse("input x\nh = Conv2D(filters=32, kernel_size=3, strides=(2,2))\n", true).unwrap();
        let c = &p.calls[0];
        assert_eq!(c.operands, vec!["x"]);
        assert_eq!(c.keyword.len(), 3);
        assert_eq!(c.keyword[2], ("strides".to_string(), Literal::Tuple(vec![2, 2])));
        assert_eq!(c.render(), "h = Conv2D(x, filters=32, kernel_size=3, strides=(2, 2))");
    }

    #[test]
    fn literals() {
        assert_eq!(parse_literal("-3").unwrap(), Literal::Int(-3));
        assert_eq!(parse_literal("0.5").unwrap(), Literal::Float(0.5));
        assert_eq!(parse_literal("1e-3").unwrap(), Literal::Float(1e-3));
        assert_eq!(parse_literal("'age'").unwrap(), Literal::Str("age".into()));
        assert_eq!(parse_literal("\"a,b\"").unwrap(), Literal::Str("a,b".into()));
        assert_eq!(parse_literal("(0, -1)").unwrap(), Literal::Tuple(vec![0, -1]));
        assert_eq!(parse_literal("False").unwrap(), Literal::Bool(false));
        assert!(parse_literal("abc").is_err());
        assert!(parse_literal("(1.5, 2)").is_err());
    }

    #[test]
    fn implicit_operand_chains() {
        let p = parse("input x\na = f.g(2)\nb = f.h()\n", true).unwrap();
        assert_eq!(p.calls[0].operands, vec!["x"]);
        assert_eq!(p.calls[1].operands, vec!["a"]);
    }

    #[test]
    fn scope_errors() {
        let err = parse("input x\ny = f.g(z)\n", true).unwrap_err();
        assert_eq!(err, SyntaxError::Scope { line: 2, name: "z".into() });
        assert!(parse("y = f.g(z)\n", false).is_ok());
        assert!(matches!(parse("input x\nx = f.g()\n", true), Err(SyntaxError::Reassigned { .. })));
    }

    #[test]
    fn comments_and_strings() {
        let p = parse("input t # the table\nu = q.f(t, column=\"a#b\")  # trailing\n", true).unwrap();
        assert_eq!(p.calls[0].keyword[0].1, Literal::Str("a#b".into()));
    }

    #[test]
    fn malformed_lines() {
        for bad in ["y = f.g(", "y f.g()", "1y = f.g()", "y = f.g(a=1, 2)", "y = f.g(1, x)", "y = f.g(a=1, a=2)"] {
            assert!(parse(&format!("input x\n{bad}"), true).is_err(), "{bad}");
        }
    }
}
