use crate::model::SourceSpan;

use super::{ParseError, ParseErrorKind};

#[derive(Clone, Debug)]
pub enum Sexp {
    Sym(String, SourceSpan),
    List(Vec<Sexp>, SourceSpan),
}

impl Sexp {
    pub fn span(&self) -> &SourceSpan {
        match self {
            Sexp::Sym(_, s) | Sexp::List(_, s) => s,
        }
    }

    pub fn as_sym(&self) -> Option<&str> {
        match self {
            Sexp::Sym(s, _) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(v, _) => Some(v),
            _ => None,
        }
    }

    /// The leading keyword of a list, if it is a symbol.
    pub fn head(&self) -> Option<&str> {
        self.as_list()?.first()?.as_sym()
    }
}

/// Reads exactly one top-level s-expression. Symbols are lower-cased since
/// HDDL is case-insensitive; `;` starts a line comment.
pub fn read(text: &str, file: &str) -> Result<Sexp, ParseError> {
    let mut lx = Lexer {
        chars: text.char_indices().peekable(),
        text,
        file,
        line: 1,
        col: 1,
    };
    lx.skip_ws();
    let e = match lx.next_expr()? {
        Some(e) => e,
        None => return Err(lx.error(ParseErrorKind::Lexical("empty input".into()), 0)),
    };
    lx.skip_ws();
    if lx.chars.peek().is_some() {
        return Err(lx.error(
            ParseErrorKind::Lexical("trailing input after the closing parenthesis".into()),
            1,
        ));
    }
    Ok(e)
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    text: &'a str,
    file: &'a str,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn span(&self, line: usize, col: usize, length: usize) -> SourceSpan {
        SourceSpan {
            file: self.file.to_string(),
            line,
            column: col,
            length,
        }
    }

    fn error(&self, kind: ParseErrorKind, length: usize) -> ParseError {
        ParseError {
            kind,
            span: self.span(self.line, self.col, length),
        }
    }

    fn bump(&mut self) -> Option<(usize, char)> {
        let c = self.chars.next()?;
        if c.1 == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_ws(&mut self) {
        while let Some(&(_, c)) = self.chars.peek() {
            if c == ';' {
                while let Some(&(_, c)) = self.chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn next_expr(&mut self) -> Result<Option<Sexp>, ParseError> {
        let (line, col) = (self.line, self.col);
        let Some(&(start, c)) = self.chars.peek() else {
            return Ok(None);
        };
        match c {
            '(' => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    match self.chars.peek() {
                        None => {
                            return Err(ParseError {
                                kind: ParseErrorKind::Lexical("unbalanced `(`".into()),
                                span: self.span(line, col, 1),
                            })
                        }
                        Some(&(end, ')')) => {
                            self.bump();
                            let len = self.text[start..=end].chars().count();
                            return Ok(Some(Sexp::List(items, self.span(line, col, len))));
                        }
                        Some(_) => items.push(self.next_expr()?.expect("peeked")),
                    }
                }
            }
            ')' => Err(self.error(ParseErrorKind::Lexical("unexpected `)`".into()), 1)),
            _ => {
                let mut s = String::new();
                while let Some(&(_, c)) = self.chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    if !(c.is_ascii_alphanumeric() || "-_?:.=<>/*+!".contains(c)) {
                        return Err(self.error(
                            ParseErrorKind::Lexical(format!("unexpected character `{c}`")),
                            1,
                        ));
                    }
                    s.push(c.to_ascii_lowercase());
                    self.bump();
                }
                let len = s.chars().count();
                Ok(Some(Sexp::Sym(s, self.span(line, col, len))))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_lists_with_spans_and_comments() {
        let e = read("; hi\n(define (Domain x)\n  (:types a))", "d.hddl").unwrap();
        let items = e.as_list().unwrap();
        assert_eq!(items[0].as_sym(), Some("define"));
        assert_eq!(items[1].head(), Some("domain"));
        let types = &items[2];
        assert_eq!((types.span().line, types.span().column), (3, 3));
        assert_eq!(e.span().line, 2);
    }

    #[test]
    fn lexical_errors_carry_positions() {
        let err = read("(a (b)", "f").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::Lexical(_)));
        assert_eq!((err.span.line, err.span.column), (1, 1));
        let err = read("(a) )", "f").unwrap_err();
        assert_eq!(err.span.column, 5);
        let err = read("(a \"b\")", "f").unwrap_err();
        assert_eq!(err.span.column, 4);
        assert!(read("", "f").is_err());
    }
}
