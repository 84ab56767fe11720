//! Tokenizer with Python-style indentation tracking.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::SyntaxError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    Name(String),
    /// Decimal digits, unsigned; sign is handled by the parser.
    Int(String),
    Str(String),
    Op(&'static str),
    Newline,
    Indent,
    Dedent,
    Eof,
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

const OPERATORS: [&str; 19] = [
    "==", "!=", "<=", ">=", "<", ">", "=", "(", ")", "[", "]", ",", ":", ".", "+", "-", "{", "}",
    "*",
];

pub(crate) fn tokenize(source: &str) -> Result<Vec<Token>, SyntaxError> {
    Lexer::new(source).run()
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    column: usize,
    indents: Vec<usize>,
    depth: usize,
    out: Vec<Token>,
}

impl Lexer {
    fn new(src: &str) -> Self {
        Lexer {
            chars: src.chars().collect(),
            pos: 0,
            line: 1,
            column: 1,
            indents: alloc::vec![0],
            depth: 0,
            out: Vec::new(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn push(&mut self, tok: Tok, line: usize, column: usize) {
        self.out.push(Token { tok, line, column });
    }

    fn err(&self, expected: impl Into<String>) -> SyntaxError {
        SyntaxError::new(self.line, self.column, expected)
    }

    fn run(mut self) -> Result<Vec<Token>, SyntaxError> {
        let mut at_line_start = true;
        loop {
            if at_line_start && self.depth == 0 {
                if !self.handle_indentation()? {
                    break;
                }
                at_line_start = false;
            }
            let Some(c) = self.peek() else { break };
            let (line, column) = (self.line, self.column);
            match c {
                '\n' => {
                    self.bump();
                    if self.depth == 0 {
                        self.push(Tok::Newline, line, column);
                        at_line_start = true;
                    }
                }
                ' ' | '\r' => {
                    self.bump();
                }
                '\t' => return Err(self.err("spaces (tab characters are not allowed)")),
                '#' => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                '\\' => return Err(self.err("end of statement (line continuation is not supported)")),
                '\'' | '"' => {
                    let s = self.string(c)?;
                    self.push(Tok::Str(s), line, column);
                }
                c if c.is_ascii_digit() => {
                    let mut digits = String::new();
                    while let Some(d) = self.peek() {
                        if d.is_ascii_digit() {
                            digits.push(d);
                            self.bump();
                        } else if d.is_alphabetic() || d == '_' {
                            return Err(self.err("integer literal"));
                        } else {
                            break;
                        }
                    }
                    self.push(Tok::Int(digits), line, column);
                }
                c if c.is_alphabetic() || c == '_' => {
                    let mut ident = String::new();
                    while let Some(d) = self.peek() {
                        if d.is_alphanumeric() || d == '_' {
                            ident.push(d);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    if matches!(self.peek(), Some('\'' | '"')) {
                        return Err(SyntaxError::new(
                            line,
                            column,
                            format!("plain string literal (prefixed strings such as {ident}'...' are not supported)"),
                        ));
                    }
                    self.push(Tok::Name(ident), line, column);
                }
                _ => {
                    let op = OPERATORS.iter().copied().find(|op| {
                        op.chars()
                            .enumerate()
                            .all(|(i, oc)| self.peek_at(i) == Some(oc))
                    });
                    let Some(op) = op else {
                        return Err(self.err(format!("a valid token, found {c:?}")));
                    };
                    for _ in 0..op.chars().count() {
                        self.bump();
                    }
                    match op {
                        "(" | "[" | "{" => self.depth += 1,
                        ")" | "]" | "}" => {
                            if self.depth == 0 {
                                return Err(SyntaxError::new(line, column, "matching opening bracket"));
                            }
                            self.depth -= 1;
                        }
                        _ => {}
                    }
                    self.push(Tok::Op(op), line, column);
                }
            }
        }
        if self.depth > 0 {
            return Err(self.err("closing bracket before end of input"));
        }
        let (line, column) = (self.line, self.column);
        if !matches!(self.out.last().map(|t| &t.tok), None | Some(Tok::Newline)) {
            self.push(Tok::Newline, line, column);
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(Tok::Dedent, line, column);
        }
        self.push(Tok::Eof, line, column);
        Ok(self.out)
    }

    /// Consumes leading whitespace of a logical line and emits INDENT/DEDENT.
    /// Returns false at end of input.
    fn handle_indentation(&mut self) -> Result<bool, SyntaxError> {
        loop {
            let mut width = 0;
            while let Some(c) = self.peek() {
                match c {
                    ' ' => {
                        width += 1;
                        self.bump();
                    }
                    '\t' => return Err(self.err("spaces (tab characters are not allowed)")),
                    '\r' => {
                        self.bump();
                    }
                    _ => break,
                }
            }
            match self.peek() {
                None => return Ok(false),
                Some('\n') => {
                    self.bump();
                    continue;
                }
                Some('#') => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                    continue;
                }
                Some(_) => {}
            }
            let current = *self.indents.last().unwrap_or(&0);
            let (line, column) = (self.line, self.column);
            if width > current {
                self.indents.push(width);
                self.push(Tok::Indent, line, column);
            } else {
                while width < *self.indents.last().unwrap_or(&0) {
                    self.indents.pop();
                    self.push(Tok::Dedent, line, column);
                }
                if width != *self.indents.last().unwrap_or(&0) {
                    return Err(SyntaxError::new(
                        line,
                        column,
                        "indentation matching an enclosing block",
                    ));
                }
            }
            return Ok(true);
        }
    }

    fn string(&mut self, quote: char) -> Result<String, SyntaxError> {
        let (line, column) = (self.line, self.column);
        self.bump();
        let mut value = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => {
                    return Err(SyntaxError::new(line, column, "closing quote of string literal"))
                }
                Some(c) if c == quote => return Ok(value),
                Some('\\') => match self.bump() {
                    Some('n') => value.push('\n'),
                    Some('t') => value.push('\t'),
                    Some('r') => value.push('\r'),
                    Some('\\') => value.push('\\'),
                    Some('\'') => value.push('\''),
                    Some('"') => value.push('"'),
                    Some('\n') | None => {
                        return Err(SyntaxError::new(line, column, "closing quote of string literal"))
                    }
                    Some(other) => {
                        value.push('\\');
                        value.push(other);
                    }
                },
                Some(c) => value.push(c),
            }
        }
    }
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Name(n) => format!("name '{n}'"),
            Tok::Int(d) => format!("integer {d}"),
            Tok::Str(_) => "string literal".to_string(),
            Tok::Op(op) => format!("'{op}'"),
            Tok::Newline => "end of line".to_string(),
            Tok::Indent => "indent".to_string(),
            Tok::Dedent => "dedent".to_string(),
            Tok::Eof => "end of input".to_string(),
        }
    }
}
