//! Hand-written lexer and recursive-descent parser for the policy language.
//!
//! ```text
//! policy ::= 'permit' 'subjects' 'with' attrs 'may' TOKEN 'on' 'resources'
//!            ['of' 'type' TOKEN] ['named' STRING] ['when' conds] 'in' 'domain' TOKEN
//! attrs  ::= attr (',' attr)*        attr ::= TOKEN ['=' STRING]
//! conds  ::= cond ('and' cond)*
//! cond   ::= 'time' 'between' HHMM 'and' HHMM | 'day' 'in' '[' day (',' day)* ']'
//! ```
//!
//! Keywords are reserved and cannot be used as tokens. `#` starts a comment
//! running to the end of the line.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use super::{AttrTerm, Condition, Day, Policy, PolicyError};
use crate::model::MAX_TOKEN_LEN;

const KEYWORDS: [&str; 16] = [
    "permit", "subjects", "with", "may", "on", "resources", "of", "type", "named", "when", "and",
    "in", "domain", "time", "between", "day",
];

pub(crate) fn is_reserved(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

/// Double-quoted string with `"` and `\` escaped by a backslash.
pub(crate) fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        if ch == '"' || ch == '\\' {
            out.push('\\');
        }
        out.push(ch);
    }
    out.push('"');
    out
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{line}:{column}: expected {}, found {found}{}", expected.join(" or "), note.as_ref().map(|n| format!(" ({n})")).unwrap_or_default())]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub expected: Vec<String>,
    pub found: String,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    Str(String),
    Time(u16),
    Comma,
    Equals,
    LBracket,
    RBracket,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "'{w}'"),
            Tok::Str(s) => write!(f, "string {}", quote(s)),
            Tok::Time(m) => write!(f, "time {:02}:{:02}", m / 60, m % 60),
            Tok::Comma => f.write_str("','"),
            Tok::Equals => f.write_str("'='"),
            Tok::LBracket => f.write_str("'['"),
            Tok::RBracket => f.write_str("']'"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.chars().peekable(),
            line: 1,
            column: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let ch = self.chars.next()?;
        if ch == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(ch)
    }

    fn error(&self, line: usize, column: usize, expected: &str, found: String) -> ParseError {
        ParseError {
            line,
            column,
            expected: vec![expected.to_owned()],
            found,
            note: None,
        }
    }

    fn tokens(mut self) -> Result<Vec<Spanned>, ParseError> {
        let mut out = Vec::new();
        loop {
            while let Some(&ch) = self.chars.peek() {
                if ch == '#' {
                    while self.chars.peek().is_some_and(|&c| c != '\n') {
                        self.bump();
                    }
                } else if ch.is_whitespace() {
                    self.bump();
                } else {
                    break;
                }
            }
            let (line, column) = (self.line, self.column);
            let Some(&ch) = self.chars.peek() else {
                out.push(Spanned { tok: Tok::Eof, line, column });
                return Ok(out);
            };
            let tok = match ch {
                ',' | '=' | '[' | ']' => {
                    self.bump();
                    match ch {
                        ',' => Tok::Comma,
                        '=' => Tok::Equals,
                        '[' => Tok::LBracket,
                        _ => Tok::RBracket,
                    }
                }
                '"' => {
                    self.bump();
                    let mut s = String::new();
                    loop {
                        match self.bump() {
                            None => {
                                return Err(self.error(line, column, "closing '\"'", "end of input".into()))
                            }
                            Some('"') => break,
                            Some('\\') => match self.bump() {
                                Some(c @ ('"' | '\\')) => s.push(c),
                                other => {
                                    let found = other.map_or("end of input".into(), |c| format!("'\\{c}'"));
                                    return Err(self.error(self.line, self.column - 1, "escape \\\" or \\\\", found));
                                }
                            },
                            Some(c) => s.push(c),
                        }
                    }
                    Tok::Str(s)
                }
                '0'..='9' => {
                    let mut raw = String::new();
                    while let Some(&c) = self.chars.peek() {
                        if c.is_ascii_digit() || c == ':' {
                            raw.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    let minutes = parse_hhmm(&raw)
                        .ok_or_else(|| self.error(line, column, "time HH:MM", format!("{raw:?}")))?;
                    Tok::Time(minutes)
                }
                'a'..='z' => {
                    let mut w = String::new();
                    while let Some(&c) = self.chars.peek() {
                        if c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' {
                            w.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    if w.len() > MAX_TOKEN_LEN {
                        return Err(self.error(line, column, "token of at most 64 characters", format!("'{w}'")));
                    }
                    Tok::Word(w)
                }
                other => return Err(self.error(line, column, "token", format!("{other:?}"))),
            };
            out.push(Spanned { tok, line, column });
        }
    }
}

/// `HH:MM` with two-digit fields; `24:00` is the end of day.
fn parse_hhmm(raw: &str) -> Option<u16> {
    let (h, m) = raw.split_once(':')?;
    if h.len() != 2 || m.len() != 2 || !h.bytes().chain(m.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let (h, m): (u16, u16) = (h.parse().ok()?, m.parse().ok()?);
    match (h, m) {
        (24, 0) => Some(1440),
        (0..=23, 0..=59) => Some(h * 60 + m),
        _ => None,
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn advance(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &[&str]) -> Result<T, ParseError> {
        self.fail_at(self.peek(), expected, None)
    }

    fn fail_at<T>(&self, at: &Spanned, expected: &[&str], note: Option<String>) -> Result<T, ParseError> {
        Err(ParseError {
            line: at.line,
            column: at.column,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: at.tok.to_string(),
            note,
        })
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Word(w) if w == kw)
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.at_keyword(kw) {
            self.advance();
            Ok(())
        } else {
            self.fail(&[&format!("'{kw}'")])
        }
    }

    fn token(&mut self, what: &str) -> Result<String, ParseError> {
        match &self.peek().tok {
            Tok::Word(w) if !is_reserved(w) => {
                let w = w.clone();
                self.advance();
                Ok(w)
            }
            _ => self.fail(&[what]),
        }
    }

    fn string(&mut self) -> Result<String, ParseError> {
        match &self.peek().tok {
            Tok::Str(s) => {
                let s = s.clone();
                self.advance();
                Ok(s)
            }
            _ => self.fail(&["string"]),
        }
    }

    fn punct(&mut self, tok: Tok) -> Result<(), ParseError> {
        if self.peek().tok == tok {
            self.advance();
            Ok(())
        } else {
            self.fail(&[&tok.to_string()])
        }
    }

    fn time(&mut self) -> Result<u16, ParseError> {
        match self.peek().tok {
            Tok::Time(m) => {
                self.advance();
                Ok(m)
            }
            _ => self.fail(&["time HH:MM"]),
        }
    }

    fn policy(&mut self) -> Result<Policy, ParseError> {
        let start = self.peek().clone();
        self.keyword("permit")?;
        self.keyword("subjects")?;
        self.keyword("with")?;
        let mut attrs = vec![self.attr()?];
        while self.peek().tok == Tok::Comma {
            self.advance();
            attrs.push(self.attr()?);
        }
        if !self.at_keyword("may") {
            return self.fail(&["','", "'='", "'may'"]);
        }
        self.advance();
        let action = self.token("action")?;
        self.keyword("on")?;
        self.keyword("resources")?;
        let mut resource_type = None;
        if self.at_keyword("of") {
            self.advance();
            self.keyword("type")?;
            resource_type = Some(self.token("resource type")?);
        }
        let mut resource_name = None;
        if self.at_keyword("named") {
            self.advance();
            resource_name = Some(self.string()?);
        }
        let mut context = Vec::new();
        if self.at_keyword("when") {
            self.advance();
            context.push(self.condition()?);
            while self.at_keyword("and") {
                self.advance();
                context.push(self.condition()?);
            }
        }
        if !self.at_keyword("in") {
            let mut expected = Vec::new();
            if resource_type.is_none() && resource_name.is_none() && context.is_empty() {
                expected.push("'of'");
            }
            if resource_name.is_none() && context.is_empty() {
                expected.push("'named'");
            }
            if context.is_empty() {
                expected.push("'when'");
            } else {
                expected.push("'and'");
            }
            expected.push("'in'");
            return self.fail(&expected);
        }
        self.advance();
        self.keyword("domain")?;
        let domain = self.token("domain")?;
        if self.peek().tok != Tok::Eof {
            return self.fail(&["end of input"]);
        }
        Policy::new(attrs, action, resource_type, resource_name, context, domain).or_else(|e| {
            let note = Some(e.to_string());
            let expected = match e {
                PolicyError::DuplicateCondition(_) => ["at most one condition of each kind"],
                _ => ["valid policy"],
            };
            self.fail_at(&start, &expected, note)
        })
    }

    fn attr(&mut self) -> Result<AttrTerm, ParseError> {
        let name = self.token("attribute name")?;
        if self.peek().tok == Tok::Equals {
            self.advance();
            Ok(AttrTerm::with_value(name, self.string()?))
        } else {
            Ok(AttrTerm::named(name))
        }
    }

    fn condition(&mut self) -> Result<Condition, ParseError> {
        let at = self.peek().clone();
        if self.at_keyword("time") {
            self.advance();
            self.keyword("between")?;
            let start = self.time()?;
            self.keyword("and")?;
            let end = self.time()?;
            let cond = Condition::TimeWindow { start, end };
            match cond.validate() {
                Ok(()) => Ok(cond),
                Err(e) => self.fail_at(&at, &["time window with start < end"], Some(e.to_string())),
            }
        } else if self.at_keyword("day") {
            self.advance();
            self.keyword("in")?;
            self.punct(Tok::LBracket)?;
            let mut days = BTreeSet::new();
            days.insert(self.day()?);
            while self.peek().tok == Tok::Comma {
                self.advance();
                days.insert(self.day()?);
            }
            self.punct(Tok::RBracket)?;
            Ok(Condition::DaySet(days))
        } else {
            self.fail(&["'time'", "'day'"])
        }
    }

    fn day(&mut self) -> Result<Day, ParseError> {
        if let Tok::Word(w) = &self.peek().tok {
            if let Some(d) = Day::parse(w) {
                self.advance();
                return Ok(d);
            }
        }
        self.fail(&["mon", "tue", "wed", "thu", "fri", "sat", "sun"])
    }
}

/// Parses one policy. Whitespace and comments may appear between any two
/// tokens.
pub fn parse_policy(text: &str) -> Result<Policy, ParseError> {
    let toks = Lexer::new(text).tokens()?;
    Parser { toks, pos: 0 }.policy()
}
