//! Hand-written lexer and recursive-descent parser for action prompts.
//!
//! ```text
//! prompt := [target '.'] ident '(' [arg {',' arg}] ')'
//! arg    := ident '=' value | value
//! value  := number | string | ident | '[' [value {',' value} [',']] ']'
//! ```

use std::fmt;

use serde::Serialize;

use super::DslError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    PreProcessing,
    PostProcessing,
    /// No pipeline prefix; only `collect_data`.
    Bare,
}

impl Target {
    pub const PRE: &'static str = "pre_processing_pipeline";
    pub const POST: &'static str = "post_processing_pipeline";

    pub fn prefix(self) -> Option<&'static str> {
        match self {
            Target::PreProcessing => Some(Self::PRE),
            Target::PostProcessing => Some(Self::POST),
            Target::Bare => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Value {
    Number(f64),
    Str(String),
    Ident(String),
    List(Vec<Value>),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(n) => write!(f, "{n}"),
            Value::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    if c == '"' || c == '\\' {
                        f.write_str("\\")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str("\"")
            }
            Value::Ident(s) => f.write_str(s),
            Value::List(items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionPrompt {
    pub target: Target,
    pub method: String,
    pub positional: Vec<Value>,
    /// Keyword arguments in source order; names are unique.
    pub kwargs: Vec<(String, Value)>,
}

impl ActionPrompt {
    pub fn kwarg(&self, name: &str) -> Option<&Value> {
        self.kwargs.iter().find(|(k, _)| k == name).map(|(_, v)| v)
    }
}

/// Canonical text: positional arguments first, then keywords.
impl fmt::Display for ActionPrompt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = self.target.prefix() {
            write!(f, "{p}.")?;
        }
        write!(f, "{}(", self.method)?;
        let mut first = true;
        let mut sep = |f: &mut fmt::Formatter<'_>| {
            let s = if first { "" } else { ", " };
            first = false;
            f.write_str(s)
        };
        for v in &self.positional {
            sep(f)?;
            write!(f, "{v}")?;
        }
        for (k, v) in &self.kwargs {
            sep(f)?;
            write!(f, "{k}={v}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Str(String),
    Dot,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Eq,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(n) => format!("number {n}"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Dot => "`.`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Eq => "`=`".into(),
            Tok::End => "end of line".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

/// Splits `text` into tokens. `line` is the script line of the first
/// character; columns are 1-based and count characters. `#` starts a
/// comment running to the end of its line.
fn lex(text: &str, line: usize) -> Result<Vec<Token>, DslError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut line_start) = (0, line, 0);
    while i < chars.len() {
        let c = chars[i];
        let col = i - line_start + 1;
        let single = |tok| Token { tok, line, col };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                line_start = i;
            }
            c if c.is_whitespace() => i += 1,
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '.' if !chars.get(i + 1).is_some_and(char::is_ascii_digit) => {
                out.push(single(Tok::Dot));
                i += 1;
            }
            '(' | ')' | '[' | ']' | ',' | '=' => {
                out.push(single(match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    ',' => Tok::Comma,
                    _ => Tok::Eq,
                }));
                i += 1;
            }
            '"' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None | Some('\n') => return Err(DslError::UnterminatedString { line, column: col }),
                        Some('"') => break,
                        Some('\\') if matches!(chars.get(i + 1), Some('"') | Some('\\')) => {
                            s.push(chars[i + 1]);
                            i += 2;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                i += 1;
                out.push(single(Tok::Str(s)));
            }
            c if c.is_ascii_digit() || c == '.' || ((c == '-' || c == '+') && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit() || *n == '.')) => {
                let start = i;
                i += 1;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '-' || chars[j] == '+') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let n: f64 = text
                    .parse()
                    .map_err(|_| DslError::Syntax { line, column: col, message: format!("malformed number `{text}`") })?;
                out.push(single(Tok::Number(n)));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(single(Tok::Ident(chars[start..i].iter().collect())));
            }
            other => return Err(DslError::Syntax { line, column: col, message: format!("unexpected character `{other}`") }),
        }
    }
    let col = chars.len() - line_start + 1;
    out.push(Token { tok: Tok::End, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    warnings: Vec<String>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(t: &Token, message: String) -> DslError {
        DslError::Syntax { line: t.line, column: t.col, message }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token, DslError> {
        let t = self.next();
        if t.tok == want {
            Ok(t)
        } else {
            Err(Self::error(&t, format!("expected {what}, found {}", t.tok.describe())))
        }
    }

    fn at_end(&self) -> bool {
        self.peek().tok == Tok::End
    }

    fn prompt(&mut self) -> Result<ActionPrompt, DslError> {
        let first = self.next();
        let Tok::Ident(head) = first.tok.clone() else {
            return Err(Self::error(&first, format!("expected a prompt, found {}", first.tok.describe())));
        };
        let (target, method) = if self.peek().tok == Tok::Dot {
            let target = match head.as_str() {
                Target::PRE => Target::PreProcessing,
                Target::POST => Target::PostProcessing,
                _ => return Err(DslError::UnknownTarget { line: first.line, column: first.col, target: head }),
            };
            self.next();
            let m = self.next();
            match m.tok.clone() {
                Tok::Ident(name) => (target, name),
                other => return Err(Self::error(&m, format!("expected a method name, found {}", other.describe()))),
            }
        } else if head == "collect_data" {
            (Target::Bare, head)
        } else {
            return Err(DslError::UnknownTarget { line: first.line, column: first.col, target: head });
        };
        self.expect(Tok::LParen, "`(`")?;
        let mut prompt = ActionPrompt { target, method, positional: Vec::new(), kwargs: Vec::new() };
        if self.peek().tok == Tok::RParen {
            self.next();
            return Ok(prompt);
        }
        loop {
            if let (Tok::Ident(name), Tok::Eq) = (self.peek().tok.clone(), self.peek_at(1).clone()) {
                let at = self.next();
                self.next();
                let v = self.value()?;
                if prompt.kwargs.iter().any(|(k, _)| *k == name) {
                    return Err(Self::error(&at, format!("duplicate keyword `{name}`")));
                }
                prompt.kwargs.push((name, v));
            } else {
                let v = self.value()?;
                prompt.positional.push(v);
            }
            let t = self.next();
            match t.tok.clone() {
                Tok::Comma => continue,
                Tok::RParen => break,
                // A `]` closing the call where `)` belongs, at the end of the
                // prompt: accepted with a warning.
                Tok::RBracket if matches!(self.peek().tok, Tok::End | Tok::Ident(_)) => {
                    self.warnings.push(format!("line {}:{}: `]` closes the call; read as `)`", t.line, t.col));
                    break;
                }
                other => return Err(Self::error(&t, format!("expected `,` or `)`, found {}", other.describe()))),
            }
        }
        Ok(prompt)
    }

    fn value(&mut self) -> Result<Value, DslError> {
        let t = self.next();
        match t.tok.clone() {
            Tok::Number(n) => Ok(Value::Number(n)),
            Tok::Str(s) => Ok(Value::Str(s)),
            Tok::Ident(s) => Ok(Value::Ident(s)),
            Tok::LBracket => {
                let mut items = Vec::new();
                loop {
                    if self.peek().tok == Tok::RBracket {
                        self.next();
                        break;
                    }
                    items.push(self.value()?);
                    let sep = self.next();
                    match sep.tok.clone() {
                        Tok::Comma => {}
                        Tok::RBracket => break,
                        other => return Err(Self::error(&sep, format!("expected `,` or `]`, found {}", other.describe()))),
                    }
                }
                Ok(Value::List(items))
            }
            other => Err(Self::error(&t, format!("expected a value, found {}", other.describe()))),
        }
    }
}

/// Parses one prompt plus any recovery warnings.
pub fn parse_prompt_with_warnings(text: &str) -> Result<(ActionPrompt, Vec<String>), DslError> {
    let mut p = Parser { toks: lex(text, 1)?, pos: 0, warnings: Vec::new() };
    let prompt = p.prompt()?;
    if !p.at_end() {
        let t = p.peek().clone();
        return Err(Parser::error(&t, format!("unexpected {} after the prompt", t.tok.describe())));
    }
    Ok((prompt, p.warnings))
}

/// Parses a single prompt line.
pub fn parse_prompt(text: &str) -> Result<ActionPrompt, DslError> {
    parse_prompt_with_warnings(text).map(|(p, _)| p)
}

/// Every prompt on one logical line, with the script line of each.
pub(super) fn parse_logical_line(text: &str, line: usize) -> Result<(Vec<(ActionPrompt, usize)>, Vec<String>), DslError> {
    let mut p = Parser { toks: lex(text, line)?, pos: 0, warnings: Vec::new() };
    let mut out = Vec::new();
    while !p.at_end() {
        let at = p.peek().line;
        out.push((p.prompt()?, at));
    }
    Ok((out, p.warnings))
}

/// Groups physical lines into logical ones: a line whose brackets are
/// still open continues onto the next. Returns (first line number, text).
pub(super) fn logical_lines(text: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    let mut depth = 0i32;
    for (i, raw) in text.lines().enumerate() {
        if current.is_empty() {
            start = i + 1;
        } else {
            current.push('\n');
        }
        current.push_str(raw);
        let mut in_str = false;
        let mut chars = raw.chars();
        while let Some(c) = chars.next() {
            match c {
                '\\' if in_str => {
                    chars.next();
                }
                '"' => in_str = !in_str,
                '#' if !in_str => break,
                '(' | '[' if !in_str => depth += 1,
                ')' | ']' if !in_str => depth -= 1,
                _ => {}
            }
        }
        if depth <= 0 || in_str {
            out.push((start, std::mem::take(&mut current)));
            depth = 0;
        }
    }
    if !current.is_empty() {
        out.push((start, current));
    }
    out
}
