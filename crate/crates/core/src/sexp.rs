//! S-expression reader for SMT-LIB 2 scripts and solver responses.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    /// Simple or `|quoted|` symbol, stored without the bars.
    Symbol(String),
    Numeral(String),
    Str(String),
    Keyword(String),
    List(Vec<Sexp>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at line {line}, column {col}: {msg}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl Sexp {
    pub fn as_symbol(&self) -> Option<&str> {
        match self {
            Sexp::Symbol(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(v) => Some(v),
            _ => None,
        }
    }

    /// The head symbol of a non-empty list.
    pub fn head(&self) -> Option<&str> {
        self.as_list().and_then(|l| l.first()).and_then(|h| h.as_symbol())
    }

    pub fn is_symbol(&self, s: &str) -> bool {
        self.as_symbol() == Some(s)
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Symbol(s) => write!(f, "{}", crate::term::fmt_symbol(s)),
            Sexp::Numeral(n) => write!(f, "{n}"),
            Sexp::Str(s) => write!(f, "\"{}\"", s.replace('"', "\"\"")),
            Sexp::Keyword(k) => write!(f, ":{k}"),
            Sexp::List(items) => {
                write!(f, "(")?;
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{it}")?;
                }
                write!(f, ")")
            }
        }
    }
}

struct Reader<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, msg: impl Into<String>) -> SyntaxError {
        SyntaxError { line: self.line, col: self.col, msg: msg.into() }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_ascii_whitespace() {
                self.bump();
            } else if c == b';' {
                while let Some(c) = self.bump() {
                    if c == b'\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn read(&mut self) -> Result<Sexp, SyntaxError> {
        self.skip_trivia();
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b'(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.peek() {
                        None => return Err(self.err("unclosed parenthesis")),
                        Some(b')') => {
                            self.bump();
                            return Ok(Sexp::List(items));
                        }
                        Some(_) => items.push(self.read()?),
                    }
                }
            }
            Some(b')') => Err(self.err("unexpected ')'")),
            Some(b'|') => {
                self.bump();
                let start = self.pos;
                loop {
                    match self.bump() {
                        None => return Err(self.err("unterminated quoted symbol")),
                        Some(b'|') => break,
                        Some(_) => {}
                    }
                }
                let s = String::from_utf8_lossy(&self.src[start..self.pos - 1]).into_owned();
                Ok(Sexp::Symbol(s))
            }
            Some(b'"') => {
                self.bump();
                let mut out = Vec::new();
                loop {
                    match self.bump() {
                        None => return Err(self.err("unterminated string")),
                        Some(b'"') => {
                            if self.peek() == Some(b'"') {
                                self.bump();
                                out.push(b'"');
                            } else {
                                break;
                            }
                        }
                        Some(c) => out.push(c),
                    }
                }
                Ok(Sexp::Str(String::from_utf8_lossy(&out).into_owned()))
            }
            Some(_) => {
                let start = self.pos;
                while let Some(c) = self.peek() {
                    if c.is_ascii_whitespace() || c == b'(' || c == b')' || c == b';' || c == b'"' {
                        break;
                    }
                    if c == b'|' {
                        return Err(self.err("'|' inside a simple symbol"));
                    }
                    self.bump();
                }
                let tok = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
                if let Some(k) = tok.strip_prefix(':') {
                    Ok(Sexp::Keyword(k.to_string()))
                } else if tok.bytes().all(|b| b.is_ascii_digit()) {
                    Ok(Sexp::Numeral(tok))
                } else if tok.bytes().next().is_some_and(|b| b.is_ascii_digit()) {
                    // decimals, #x.. and #b.. literals are outside Int/Bool
                    Err(self.err(format!("unsupported literal `{tok}`")))
                } else {
                    Ok(Sexp::Symbol(tok))
                }
            }
        }
    }
}

/// Parses every top-level s-expression in `text`.
pub fn parse_all(text: &str) -> Result<Vec<Sexp>, SyntaxError> {
    let mut r = Reader { src: text.as_bytes(), pos: 0, line: 1, col: 1 };
    let mut out = Vec::new();
    loop {
        r.skip_trivia();
        if r.peek().is_none() {
            return Ok(out);
        }
        out.push(r.read()?);
    }
}

/// Parses exactly one s-expression.
pub fn parse_one(text: &str) -> Result<Sexp, SyntaxError> {
    let mut all = parse_all(text)?;
    if all.len() != 1 {
        return Err(SyntaxError { line: 1, col: 1, msg: format!("expected one s-expression, found {}", all.len()) });
    }
    Ok(all.pop().unwrap())
}

/// Whether `text` holds at least one complete top-level expression with all
/// parentheses closed. Used to frame multi-line solver responses.
pub fn is_complete(text: &str) -> bool {
    let mut depth: i64 = 0;
    let mut seen = false;
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            ';' => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            '|' => {
                for c in chars.by_ref() {
                    if c == '|' {
                        break;
                    }
                }
                seen = true;
            }
            '"' => {
                while let Some(c) = chars.next() {
                    if c == '"' {
                        if chars.peek() == Some(&'"') {
                            chars.next();
                        } else {
                            break;
                        }
                    }
                }
                seen = true;
            }
            '(' => {
                depth += 1;
                seen = true;
            }
            ')' => depth -= 1,
            c if !c.is_whitespace() => seen = true,
            _ => {}
        }
    }
    seen && depth <= 0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_nested_lists_and_atoms() {
        let v = parse_all("(set-logic HORN) ; comment\n(declare-fun |A b| (Int) Bool)").unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].head(), Some("set-logic"));
        let l = v[1].as_list().unwrap();
        assert_eq!(l[1], Sexp::Symbol("A b".into()));
        assert_eq!(l[2], Sexp::List(vec![Sexp::Symbol("Int".into())]));
    }

    #[test]
    fn reports_unbalanced_input() {
        let e = parse_all("(assert (> x 1)").unwrap_err();
        assert!(e.msg.contains("unclosed"));
        assert!(parse_all(")").is_err());
    }

    #[test]
    fn keywords_and_strings() {
        let s = parse_one("(set-info :status \"a\"\"b\")").unwrap();
        let l = s.as_list().unwrap();
        assert_eq!(l[1], Sexp::Keyword("status".into()));
        assert_eq!(l[2], Sexp::Str("a\"b".into()));
    }

    #[test]
    fn completeness_framing() {
        assert!(is_complete("sat"));
        assert!(!is_complete("((x 1)\n"));
        assert!(is_complete("((x 1)\n (y |)|))"));
        assert!(!is_complete("   "));
    }

    #[test]
    fn rejects_decimals() {
        assert!(parse_all("(assert (> x 1.5))").is_err());
    }
}
