//! S-expression reader: turns source text into `Form` trees.
//!
//! Accepts the Lisp subset the compiler understands: lists, vectors, maps,
//! sets (`#{...}`), quote (`'x`), strings, numbers (ints and reals, including
//! trailing-dot reals like `13.`), keywords, symbols, booleans, `nil`, and
//! line comments. Commas read as whitespace.

use std::fmt;

use crate::value::{Keyword, Symbol};

#[derive(Clone, Debug, PartialEq)]
pub enum Form {
    Nil,
    Bool(bool),
    Int(i64),
    Real(f64),
    Str(String),
    Sym(Symbol),
    Key(Keyword),
    List(Vec<Form>),
    Vector(Vec<Form>),
    Map(Vec<(Form, Form)>),
    Set(Vec<Form>),
    Quoted(Box<Form>),
}

impl Form {
    pub fn sym(name: &str) -> Form {
        Form::Sym(Symbol::new(name))
    }

    pub fn as_sym(&self) -> Option<&Symbol> {
        match self {
            Form::Sym(s) => Some(s),
            _ => None,
        }
    }

    pub fn list(items: Vec<Form>) -> Form {
        Form::List(items)
    }
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Form::Nil => write!(f, "nil"),
            Form::Bool(b) => write!(f, "{b}"),
            Form::Int(i) => write!(f, "{i}"),
            Form::Real(r) => write!(f, "{}", crate::value::format_real(*r)),
            Form::Str(s) => write!(f, "{s:?}"),
            Form::Sym(s) => write!(f, "{s}"),
            Form::Key(k) => write!(f, "{k}"),
            Form::List(xs) => write_forms(f, "(", xs, ")"),
            Form::Vector(xs) => write_forms(f, "[", xs, "]"),
            Form::Map(pairs) => {
                write!(f, "{{")?;
                for (i, (k, v)) in pairs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{k} {v}")?;
                }
                write!(f, "}}")
            }
            Form::Set(xs) => write_forms(f, "#{", xs, "}"),
            Form::Quoted(inner) => write!(f, "'{inner}"),
        }
    }
}

fn write_forms(f: &mut fmt::Formatter<'_>, open: &str, xs: &[Form], close: &str) -> fmt::Result {
    write!(f, "{open}")?;
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            write!(f, " ")?;
        }
        write!(f, "{x}")?;
    }
    write!(f, "{close}")
}

#[derive(Clone, Debug, thiserror::Error, PartialEq)]
#[error("read error at {line}:{col}: {message}")]
pub struct ReadError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ReadError {
    fn new(pos: Pos, message: impl Into<String>) -> Self {
        ReadError {
            line: pos.line,
            col: pos.col,
            message: message.into(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Pos {
    line: usize,
    col: usize,
}

struct Lexer<'a> {
    src: &'a [u8],
    i: usize,
    line: usize,
    col: usize,
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Open(char),  // ( [ {
    Close(char), // ) ] }
    SetOpen,     // #{
    Quote,
    Str(String),
    Atom(String),
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            i: 0,
            line: 1,
            col: 1,
        }
    }

    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            col: self.col,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.i).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.i += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_blank(&mut self) {
        while let Some(c) = self.peek() {
            match c {
                b' ' | b'\t' | b'\r' | b'\n' | b',' => {
                    self.bump();
                }
                b';' => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn next_token(&mut self) -> Result<Option<(Pos, Token)>, ReadError> {
        self.skip_blank();
        let pos = self.pos();
        let c = match self.peek() {
            Some(c) => c,
            None => return Ok(None),
        };
        let tok = match c {
            b'(' | b'[' | b'{' => {
                self.bump();
                Token::Open(c as char)
            }
            b')' | b']' | b'}' => {
                self.bump();
                Token::Close(c as char)
            }
            b'\'' => {
                self.bump();
                Token::Quote
            }
            b'#' => {
                self.bump();
                match self.peek() {
                    Some(b'{') => {
                        self.bump();
                        Token::SetOpen
                    }
                    other => {
                        let what = other.map(|b| (b as char).to_string()).unwrap_or_default();
                        return Err(ReadError::new(pos, format!("unsupported syntax: #{what}")));
                    }
                }
            }
            b'"' => {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None => return Err(ReadError::new(pos, "unterminated string")),
                        Some(b'"') => break,
                        Some(b'\\') => match self.bump() {
                            Some(b'"') => s.push('"'),
                            Some(b'\\') => s.push('\\'),
                            Some(b'n') => s.push('\n'),
                            Some(b't') => s.push('\t'),
                            Some(b'r') => s.push('\r'),
                            Some(e) => {
                                return Err(ReadError::new(
                                    pos,
                                    format!("unknown string escape: \\{}", e as char),
                                ))
                            }
                            None => return Err(ReadError::new(pos, "unterminated string")),
                        },
                        Some(b) => s.push(b as char),
                    }
                }
                Token::Str(s)
            }
            b'\\' => return Err(ReadError::new(pos, "unsupported syntax: character literal")),
            b'@' | b'^' | b'`' | b'~' => {
                return Err(ReadError::new(
                    pos,
                    format!("unsupported syntax: {}", c as char),
                ))
            }
            _ => {
                let mut s = String::new();
                while let Some(c) = self.peek() {
                    if matches!(
                        c,
                        b' ' | b'\t'
                            | b'\r'
                            | b'\n'
                            | b','
                            | b'('
                            | b')'
                            | b'['
                            | b']'
                            | b'{'
                            | b'}'
                            | b'"'
                            | b';'
                            | b'\''
                    ) {
                        break;
                    }
                    s.push(self.bump().unwrap() as char);
                }
                Token::Atom(s)
            }
        };
        Ok(Some((pos, tok)))
    }
}

fn classify_atom(s: &str, pos: Pos) -> Result<Form, ReadError> {
    match s {
        "nil" => return Ok(Form::Nil),
        "true" => return Ok(Form::Bool(true)),
        "false" => return Ok(Form::Bool(false)),
        _ => {}
    }
    if let Some(name) = s.strip_prefix(':') {
        if name.is_empty() {
            return Err(ReadError::new(pos, "empty keyword"));
        }
        return Ok(Form::Key(Keyword::new(name)));
    }
    let numeric_start = {
        let b = s.as_bytes();
        b[0].is_ascii_digit()
            || (matches!(b[0], b'+' | b'-' | b'.')
                && b.len() > 1
                && (b[1].is_ascii_digit()
                    || (b[1] == b'.' && b.len() > 2 && b[2].is_ascii_digit())))
    };
    if numeric_start {
        if let Ok(i) = s.parse::<i64>() {
            return Ok(Form::Int(i));
        }
        // tolerate a trailing dot: "13." is the real 13.0
        let candidate = if s.ends_with('.') {
            format!("{s}0")
        } else {
            s.to_string()
        };
        if let Ok(r) = candidate.parse::<f64>() {
            return Ok(Form::Real(r));
        }
        return Err(ReadError::new(pos, format!("invalid number: {s}")));
    }
    Ok(Form::Sym(Symbol::new(s)))
}

struct Parser<'a> {
    lx: Lexer<'a>,
}

impl<'a> Parser<'a> {
    fn read_form(&mut self) -> Result<Option<Form>, ReadError> {
        let (pos, tok) = match self.lx.next_token()? {
            Some(t) => t,
            None => return Ok(None),
        };
        self.form_from(pos, tok).map(Some)
    }

    fn form_from(&mut self, pos: Pos, tok: Token) -> Result<Form, ReadError> {
        match tok {
            Token::Open('(') => Ok(Form::List(self.read_until(')', pos)?)),
            Token::Open('[') => Ok(Form::Vector(self.read_until(']', pos)?)),
            Token::Open('{') => {
                let items = self.read_until('}', pos)?;
                if items.len() % 2 != 0 {
                    return Err(ReadError::new(
                        pos,
                        "map literal needs an even number of forms",
                    ));
                }
                let mut pairs: Vec<(Form, Form)> = Vec::with_capacity(items.len() / 2);
                let mut it = items.into_iter();
                while let (Some(k), Some(v)) = (it.next(), it.next()) {
                    if pairs.iter().any(|(k2, _)| *k2 == k) {
                        return Err(ReadError::new(pos, format!("duplicate map key: {k}")));
                    }
                    pairs.push((k, v));
                }
                Ok(Form::Map(pairs))
            }
            Token::SetOpen => {
                let items = self.read_until('}', pos)?;
                for (i, x) in items.iter().enumerate() {
                    if items[..i].contains(x) {
                        return Err(ReadError::new(pos, format!("duplicate set element: {x}")));
                    }
                }
                Ok(Form::Set(items))
            }
            Token::Open(c) => Err(ReadError::new(pos, format!("unexpected {c}"))),
            Token::Close(c) => Err(ReadError::new(pos, format!("unmatched delimiter: {c}"))),
            Token::Quote => match self.read_form()? {
                Some(inner) => Ok(Form::Quoted(Box::new(inner))),
                None => Err(ReadError::new(pos, "quote at end of input")),
            },
            Token::Str(s) => Ok(Form::Str(s)),
            Token::Atom(s) => classify_atom(&s, pos),
        }
    }

    fn read_until(&mut self, close: char, open_pos: Pos) -> Result<Vec<Form>, ReadError> {
        let mut items = Vec::new();
        loop {
            let (pos, tok) = match self.lx.next_token()? {
                Some(t) => t,
                None => {
                    return Err(ReadError::new(
                        open_pos,
                        format!("unbalanced delimiter: expected {close} before end of input"),
                    ))
                }
            };
            match tok {
                Token::Close(c) if c == close => return Ok(items),
                Token::Close(c) => {
                    return Err(ReadError::new(
                        pos,
                        format!("mismatched delimiter: expected {close}, found {c}"),
                    ))
                }
                other => items.push(self.form_from(pos, other)?),
            }
        }
    }
}

/// Reads every form in `src`. Empty or comment-only input yields an empty vec.
pub fn read_forms(src: &str) -> Result<Vec<Form>, ReadError> {
    let mut parser = Parser {
        lx: Lexer::new(src),
    };
    let mut forms = Vec::new();
    while let Some(form) = parser.read_form()? {
        forms.push(form);
    }
    Ok(forms)
}

/// Reads exactly one form.
pub fn read_form(src: &str) -> Result<Form, ReadError> {
    let forms = read_forms(src)?;
    match forms.len() {
        1 => Ok(forms.into_iter().next().unwrap()),
        0 => Err(ReadError {
            line: 1,
            col: 1,
            message: "expected a form, got empty input".into(),
        }),
        n => Err(ReadError {
            line: 1,
            col: 1,
            message: format!("expected one form, got {n}"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_a_continuation_call() {
        let f = read_form("(cont 1 $state)").unwrap();
        assert_eq!(
            f,
            Form::List(vec![Form::sym("cont"), Form::Int(1), Form::sym("$state")])
        );
    }

    #[test]
    fn reads_set_literals() {
        let f = read_form("#{0 1}").unwrap();
        assert_eq!(f, Form::Set(vec![Form::Int(0), Form::Int(1)]));
    }

    #[test]
    fn reads_quoted_vector() {
        let f = read_form("'[1 2 3]").unwrap();
        assert_eq!(
            f,
            Form::Quoted(Box::new(Form::Vector(vec![
                Form::Int(1),
                Form::Int(2),
                Form::Int(3)
            ])))
        );
    }

    #[test]
    fn empty_input_reads_as_no_forms() {
        assert_eq!(read_forms("").unwrap(), vec![]);
        assert_eq!(read_forms("  ; just a comment\n").unwrap(), vec![]);
    }

    #[test]
    fn trailing_dot_reals_and_ints() {
        assert_eq!(read_form("13.").unwrap(), Form::Real(13.0));
        assert_eq!(read_form("-5").unwrap(), Form::Int(-5));
        assert_eq!(read_form("2.5e-2").unwrap(), Form::Real(0.025));
        assert_eq!(read_form("+7").unwrap(), Form::Int(7));
    }

    #[test]
    fn minus_alone_is_a_symbol() {
        assert_eq!(read_form("-").unwrap(), Form::sym("-"));
        assert_eq!(read_form("->sample").unwrap(), Form::sym("->sample"));
    }

    #[test]
    fn comments_and_commas_are_whitespace() {
        let forms = read_forms("{:a 1, :b 2} ; tail\n").unwrap();
        assert_eq!(
            forms,
            vec![Form::Map(vec![
                (Form::Key(Keyword::new("a")), Form::Int(1)),
                (Form::Key(Keyword::new("b")), Form::Int(2)),
            ])]
        );
    }

    #[test]
    fn unbalanced_input_reports_position() {
        let err = read_forms("(foo\n  (bar)").unwrap_err();
        assert_eq!((err.line, err.col), (1, 1));
        let err = read_forms("(foo]").unwrap_err();
        assert!(err.message.contains("mismatched"));
        assert_eq!((err.line, err.col), (1, 5));
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        assert!(read_forms("{:a 1 :a 2}").is_err());
        assert!(read_forms("#{1 1}").is_err());
    }

    #[test]
    fn strings_unescape_and_print_back() {
        let f = read_form("\"a\\n\\\"b\\\"\"").unwrap();
        assert_eq!(f, Form::Str("a\n\"b\"".into()));
        assert_eq!(read_form(&f.to_string()).unwrap(), f);
    }

    #[test]
    fn reserved_reader_macros_error() {
        assert!(read_forms("#(inc %)").is_err());
        assert!(read_forms("@foo").is_err());
        assert!(read_forms("\\c").is_err());
    }

    #[test]
    fn double_colon_keywords_keep_their_prefix() {
        let f = read_form("::mem").unwrap();
        assert_eq!(f, Form::Key(Keyword::new(":mem")));
        assert_eq!(f.to_string(), "::mem");
    }
}
