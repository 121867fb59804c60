//! Shared helpers for the line-based text formats.

/// A significant (non-blank, non-comment) line with its 1-based number.
pub(crate) struct Line<'a> {
    pub number: usize,
    pub tokens: Vec<&'a str>,
}

/// Splits `text` into significant lines. Everything after `#` is a comment.
pub(crate) fn significant_lines(text: &str) -> impl Iterator<Item = Line<'_>> {
    text.lines().enumerate().filter_map(|(idx, raw)| {
        let body = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let tokens: Vec<&str> = body.split_whitespace().collect();
        if tokens.is_empty() {
            None
        } else {
            Some(Line { number: idx + 1, tokens })
        }
    })
}

/// Outcome of reading an unsigned integer token.
pub(crate) enum UintToken {
    Value(u64),
    Negative,
    Malformed,
}

pub(crate) fn read_uint(token: &str) -> UintToken {
    if let Some(rest) = token.strip_prefix('-') {
        if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
            return UintToken::Negative;
        }
        return UintToken::Malformed;
    }
    if token.is_empty() || !token.bytes().all(|b| b.is_ascii_digit()) {
        return UintToken::Malformed;
    }
    match token.parse() {
        Ok(v) => UintToken::Value(v),
        Err(_) => UintToken::Malformed,
    }
}

/// Checks the `<kind>-version 1` header on the first significant line.
pub(crate) fn expect_header(line: Option<&Line<'_>>, keyword: &str) -> Result<(), (usize, String)> {
    match line {
        Some(l) if l.tokens.len() == 2 && l.tokens[0] == keyword && l.tokens[1] == "1" => Ok(()),
        Some(l) => Err((l.number, format!("expected `{keyword} 1` header"))),
        None => Err((0, format!("missing `{keyword} 1` header"))),
    }
}
