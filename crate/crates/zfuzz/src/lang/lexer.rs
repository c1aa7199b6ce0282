//! Hand-rolled tokenizer with Python-style significant indentation.
//!
//! Emits `Indent`/`Dedent`/`Newline` tokens from an indentation stack so the
//! parser can treat blocks structurally. Every token carries its line and
//! column for error reporting.

use crate::error::ZfuzzError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Int(i64),
    Float(f64),
    Str(String),
    Name(String),
    Keyword(Kw),
    Op(&'static str),
    Newline,
    Indent,
    Dedent,
    Eof,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kw {
    Def,
    If,
    Elif,
    Else,
    While,
    For,
    In,
    Range,
    Return,
    Break,
    Continue,
    Pass,
    And,
    Or,
    Not,
    True,
    False,
    None,
    Print,
    From,
    Import,
}

fn keyword(word: &str) -> Option<Kw> {
    Some(match word {
        "def" => Kw::Def,
        "if" => Kw::If,
        "elif" => Kw::Elif,
        "else" => Kw::Else,
        "while" => Kw::While,
        "for" => Kw::For,
        "in" => Kw::In,
        "range" => Kw::Range,
        "return" => Kw::Return,
        "break" => Kw::Break,
        "continue" => Kw::Continue,
        "pass" => Kw::Pass,
        "and" => Kw::And,
        "or" => Kw::Or,
        "not" => Kw::Not,
        "True" => Kw::True,
        "False" => Kw::False,
        "None" => Kw::None,
        "print" => Kw::Print,
        "from" => Kw::From,
        "import" => Kw::Import,
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, ZfuzzError> {
    let mut out = Vec::new();
    let mut indents: Vec<u32> = vec![0];
    // Depth of open brackets; newlines inside brackets are insignificant.
    let mut bracket_depth: u32 = 0;

    for (lineno, raw_line) in source.lines().enumerate() {
        let line_no = (lineno + 1) as u32;
        let continuing = bracket_depth > 0;

        let mut chars: Vec<char> = raw_line.chars().collect();
        // Measure indentation (tabs count as four columns).
        let mut width = 0u32;
        let mut i = 0usize;
        while i < chars.len() {
            match chars[i] {
                ' ' => width += 1,
                '\t' => width += 4 - (width % 4),
                _ => break,
            }
            i += 1;
        }

        // Blank and comment-only lines produce no tokens at all.
        // strip_comment preserves leading whitespace, so indices still align.
        let effective = strip_comment(raw_line);
        if effective.trim().is_empty() {
            continue;
        }

        if !continuing {
            let current = *indents.last().expect("indent stack never empty");
            if width > current {
                indents.push(width);
                out.push(Token {
                    tok: Tok::Indent,
                    line: line_no,
                    col: 1,
                });
            } else if width < current {
                while *indents.last().unwrap() > width {
                    indents.pop();
                    out.push(Token {
                        tok: Tok::Dedent,
                        line: line_no,
                        col: 1,
                    });
                }
                if *indents.last().unwrap() != width {
                    return Err(err(line_no, 1, "inconsistent indentation"));
                }
            }
        }

        chars = effective.chars().collect();
        let mut j = i;
        while j < chars.len() {
            let c = chars[j];
            let tok_col = j as u32 + 1;
            match c {
                ' ' | '\t' => {
                    j += 1;
                }
                '#' => break, // comment to end of line (strip_comment already cut quoted cases)
                '0'..='9' => {
                    let start = j;
                    while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                        j += 1;
                    }
                    let text: String = chars[start..j].iter().collect();
                    if text.matches('.').count() > 1 {
                        return Err(err(line_no, tok_col, "malformed number"));
                    }
                    let tok = if text.contains('.') {
                        Tok::Float(
                            text.parse::<f64>()
                                .map_err(|_| err(line_no, tok_col, "malformed number"))?,
                        )
                    } else {
                        Tok::Int(
                            text.parse::<i64>()
                                .map_err(|_| err(line_no, tok_col, "integer literal too large"))?,
                        )
                    };
                    out.push(Token {
                        tok,
                        line: line_no,
                        col: tok_col,
                    });
                }
                'a'..='z' | 'A'..='Z' | '_' => {
                    let start = j;
                    while j < chars.len()
                        && (chars[j].is_ascii_alphanumeric() || chars[j] == '_')
                    {
                        j += 1;
                    }
                    let word: String = chars[start..j].iter().collect();
                    let tok = match keyword(&word) {
                        Some(kw) => Tok::Keyword(kw),
                        None => Tok::Name(word),
                    };
                    out.push(Token {
                        tok,
                        line: line_no,
                        col: tok_col,
                    });
                }
                '"' | '\'' => {
                    let quote = c;
                    j += 1;
                    let mut s = String::new();
                    let mut closed = false;
                    while j < chars.len() {
                        let ch = chars[j];
                        if ch == '\\' {
                            j += 1;
                            let esc = chars.get(j).copied().ok_or_else(|| {
                                err(line_no, tok_col, "unterminated string escape")
                            })?;
                            s.push(match esc {
                                'n' => '\n',
                                't' => '\t',
                                '\\' => '\\',
                                '\'' => '\'',
                                '"' => '"',
                                other => {
                                    return Err(err(
                                        line_no,
                                        tok_col,
                                        &format!("unknown escape '\\{other}'"),
                                    ))
                                }
                            });
                            j += 1;
                        } else if ch == quote {
                            closed = true;
                            j += 1;
                            break;
                        } else {
                            s.push(ch);
                            j += 1;
                        }
                    }
                    if !closed {
                        return Err(err(line_no, tok_col, "unterminated string literal"));
                    }
                    out.push(Token {
                        tok: Tok::Str(s),
                        line: line_no,
                        col: tok_col,
                    });
                }
                '(' | '[' => {
                    bracket_depth += 1;
                    out.push(op_token(if c == '(' { "(" } else { "[" }, line_no, tok_col));
                    j += 1;
                }
                ')' | ']' => {
                    if bracket_depth == 0 {
                        return Err(err(line_no, tok_col, "unmatched closing bracket"));
                    }
                    bracket_depth -= 1;
                    out.push(op_token(if c == ')' { ")" } else { "]" }, line_no, tok_col));
                    j += 1;
                }
                _ => {
                    let two: String = chars[j..(j + 2).min(chars.len())].iter().collect();
                    let op2 = match two.as_str() {
                        "==" => Some("=="),
                        "!=" => Some("!="),
                        "<=" => Some("<="),
                        ">=" => Some(">="),
                        "//" => Some("//"),
                        _ => None,
                    };
                    if let Some(op) = op2 {
                        out.push(op_token(op, line_no, tok_col));
                        j += 2;
                        continue;
                    }
                    let op1 = match c {
                        '+' => "+",
                        '-' => "-",
                        '*' => "*",
                        '/' => "/",
                        '%' => "%",
                        '<' => "<",
                        '>' => ">",
                        '=' => "=",
                        ':' => ":",
                        ',' => ",",
                        _ => {
                            return Err(err(
                                line_no,
                                tok_col,
                                &format!("unexpected character '{c}'"),
                            ))
                        }
                    };
                    out.push(op_token(op1, line_no, tok_col));
                    j += 1;
                }
            }
        }

        if bracket_depth == 0 {
            out.push(Token {
                tok: Tok::Newline,
                line: line_no,
                col: (chars.len() + 1) as u32,
            });
        }
    }

    if bracket_depth > 0 {
        let last = source.lines().count() as u32;
        return Err(err(last.max(1), 1, "unclosed bracket at end of input"));
    }

    let last_line = source.lines().count().max(1) as u32;
    while indents.len() > 1 {
        indents.pop();
        out.push(Token {
            tok: Tok::Dedent,
            line: last_line,
            col: 1,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line: last_line,
        col: 1,
    });
    Ok(out)
}

/// Cut a `#` comment, honoring string quoting so a `#` inside a literal
/// survives.
fn strip_comment(line: &str) -> String {
    let mut out = String::new();
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for c in line.chars() {
        match quote {
            Some(q) => {
                out.push(c);
                if escaped {
                    escaped = false;
                } else if c == '\\' {
                    escaped = true;
                } else if c == q {
                    quote = None;
                }
            }
            None => {
                if c == '#' {
                    break;
                }
                if c == '"' || c == '\'' {
                    quote = Some(c);
                }
                out.push(c);
            }
        }
    }
    out
}

fn op_token(op: &'static str, line: u32, col: u32) -> Token {
    Token {
        tok: Tok::Op(op),
        line,
        col,
    }
}

fn err(line: u32, col: u32, message: &str) -> ZfuzzError {
    ZfuzzError::Parse {
        line,
        column: col,
        message: message.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn simple_assignment() {
        let toks = kinds("x = 1 + 2");
        assert_eq!(
            toks,
            vec![
                Tok::Name("x".into()),
                Tok::Op("="),
                Tok::Int(1),
                Tok::Op("+"),
                Tok::Int(2),
                Tok::Newline,
                Tok::Eof
            ]
        );
    }

    #[test]
    fn comment_and_blank_lines_skipped() {
        let toks = kinds("# header\n\nx = 1  # trailing\n");
        assert!(toks.contains(&Tok::Name("x".into())));
        assert_eq!(toks.iter().filter(|t| **t == Tok::Newline).count(), 1);
    }

    #[test]
    fn hash_inside_string_is_not_comment() {
        let toks = kinds("s = \"a#b\"");
        assert!(toks.contains(&Tok::Str("a#b".into())));
    }

    #[test]
    fn indent_dedent_pairing() {
        let toks = kinds("if x:\n    y = 1\nz = 2\n");
        let indents = toks.iter().filter(|t| **t == Tok::Indent).count();
        let dedents = toks.iter().filter(|t| **t == Tok::Dedent).count();
        assert_eq!(indents, 1);
        assert_eq!(dedents, 1);
    }

    #[test]
    fn newline_suppressed_inside_brackets() {
        let toks = kinds("xs = [1,\n      2]\n");
        assert_eq!(toks.iter().filter(|t| **t == Tok::Newline).count(), 1);
    }

    #[test]
    fn inconsistent_dedent_is_error() {
        let err = tokenize("if x:\n    y = 1\n  z = 2\n").unwrap_err();
        assert!(matches!(err, ZfuzzError::Parse { line: 3, .. }));
    }

    #[test]
    fn unterminated_string_is_error() {
        assert!(tokenize("s = \"abc").is_err());
    }
}
