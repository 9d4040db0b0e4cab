use chrono::NaiveDate;

use super::ast::{CompareOp, Location};
use super::CqlError;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    /// Double-quoted identifier.
    QName(String),
    /// Single-quoted string.
    Str(String),
    Number(f64),
    Date(NaiveDate),
    /// `//` comment text with the marker and one following space removed.
    LineComment(String),
    Colon,
    Dot,
    Comma,
    Minus,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Op(CompareOp),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::QName(s) => format!("quoted identifier \"{s}\""),
            Tok::Str(s) => format!("string '{s}'"),
            Tok::Number(n) => format!("number {n}"),
            Tok::Date(d) => format!("date @{d}"),
            Tok::LineComment(_) => "comment".to_string(),
            Tok::Colon => "`:`".to_string(),
            Tok::Dot => "`.`".to_string(),
            Tok::Comma => "`,`".to_string(),
            Tok::Minus => "`-`".to_string(),
            Tok::LParen => "`(`".to_string(),
            Tok::RParen => "`)`".to_string(),
            Tok::LBracket => "`[`".to_string(),
            Tok::RBracket => "`]`".to_string(),
            Tok::Op(op) => format!("`{}`", op.symbol()),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub location: Location,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    col: u32,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn location(&self) -> Location {
        Location::new(self.line, self.col)
    }
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, CqlError> {
    let mut cur = Cursor { chars: source.chars().peekable(), line: 1, col: 1 };
    let mut out = Vec::new();
    loop {
        while cur.peek().is_some_and(char::is_whitespace) {
            cur.bump();
        }
        let location = cur.location();
        let Some(c) = cur.bump() else {
            out.push(Token { tok: Tok::Eof, location });
            return Ok(out);
        };
        let lex_err = |message: String| CqlError::Lex { message, location };
        let tok = match c {
            '/' if cur.peek() == Some('/') => {
                cur.bump();
                let mut text = String::new();
                while let Some(c) = cur.peek() {
                    if c == '\n' {
                        break;
                    }
                    text.push(c);
                    cur.bump();
                }
                let text = text.strip_prefix(' ').unwrap_or(&text).trim_end().to_string();
                Tok::LineComment(text)
            }
            '/' if cur.peek() == Some('*') => {
                cur.bump();
                let mut prev = '\0';
                loop {
                    match cur.bump() {
                        Some('/') if prev == '*' => break,
                        Some(c) => prev = c,
                        None => return Err(lex_err("unterminated block comment".into())),
                    }
                }
                continue;
            }
            '\'' | '"' => Tok::from_quoted(c, read_quoted(&mut cur, c).map_err(lex_err)?),
            '@' => {
                let mut text = String::new();
                while let Some(c) = cur.peek().filter(|c| c.is_ascii_digit() || *c == '-') {
                    text.push(c);
                    cur.bump();
                }
                let date =
                    NaiveDate::parse_from_str(&text, "%Y-%m-%d").map_err(|_| lex_err(format!("invalid date literal @{text}")))?;
                Tok::Date(date)
            }
            c if c.is_ascii_digit() => {
                let mut text = String::from(c);
                while let Some(d) = cur.peek().filter(char::is_ascii_digit) {
                    text.push(d);
                    cur.bump();
                }
                // A '.' is only part of the number when a digit follows it.
                let mut lookahead = cur.chars.clone();
                if lookahead.next() == Some('.') && lookahead.next().is_some_and(|d| d.is_ascii_digit()) {
                    text.push('.');
                    cur.bump();
                    while let Some(d) = cur.peek().filter(char::is_ascii_digit) {
                        text.push(d);
                        cur.bump();
                    }
                }
                match text.parse::<f64>() {
                    Ok(n) if n.is_finite() => Tok::Number(n),
                    _ => return Err(lex_err(format!("number {text} is out of range"))),
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut text = String::from(c);
                while let Some(d) = cur.peek().filter(|d| d.is_ascii_alphanumeric() || *d == '_') {
                    text.push(d);
                    cur.bump();
                }
                Tok::Ident(text)
            }
            ':' => Tok::Colon,
            '.' => Tok::Dot,
            ',' => Tok::Comma,
            '-' => Tok::Minus,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            '=' => Tok::Op(CompareOp::Eq),
            '!' if cur.peek() == Some('=') => {
                cur.bump();
                Tok::Op(CompareOp::Ne)
            }
            '<' | '>' => {
                let eq = cur.peek() == Some('=');
                if eq {
                    cur.bump();
                }
                Tok::Op(match (c, eq) {
                    ('<', false) => CompareOp::Lt,
                    ('<', true) => CompareOp::Le,
                    ('>', false) => CompareOp::Gt,
                    _ => CompareOp::Ge,
                })
            }
            other => return Err(lex_err(format!("illegal character {other:?}"))),
        };
        out.push(Token { tok, location });
    }
}

impl Tok {
    fn from_quoted(quote: char, text: String) -> Tok {
        if quote == '"' {
            Tok::QName(text)
        } else {
            Tok::Str(text)
        }
    }
}

fn read_quoted(cur: &mut Cursor<'_>, quote: char) -> Result<String, String> {
    let kind = if quote == '"' { "quoted identifier" } else { "string literal" };
    let mut text = String::new();
    loop {
        match cur.bump() {
            None | Some('\n') => return Err(format!("unterminated {kind}")),
            Some(c) if c == quote => return Ok(text),
            Some('\\') => match cur.bump() {
                Some('n') => text.push('\n'),
                Some('r') => text.push('\r'),
                Some('t') => text.push('\t'),
                Some(c @ ('\\' | '\'' | '"')) => text.push(c),
                Some(c) => return Err(format!("invalid escape \\{c} in {kind}")),
                None => return Err(format!("unterminated {kind}")),
            },
            Some(c) => text.push(c),
        }
    }
}
