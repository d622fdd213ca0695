//! Line-oriented `key = value` text with dotted keys.
//!
//! ```text
//! # comment
//! model.tau = 0.5
//! d.kind = "fourier"
//! d.cos = 0.2, 0.05
//! ```
//!
//! Keys match `[a-z0-9_.]+` (no empty segments); values are a number, a
//! double-quoted string (escapes `\"` and `\\`), or a comma-separated list of
//! numbers. Report files use the same grammar, so they parse back as configs.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number(f64),
    Text(String),
    /// Two or more numbers; a one-element list is stored as [`Value::Number`].
    List(Vec<f64>),
}

impl Value {
    pub fn list(values: Vec<f64>) -> Self {
        if values.len() == 1 {
            Value::Number(values[0])
        } else {
            Value::List(values)
        }
    }

    pub fn text(s: impl Into<String>) -> Self {
        Value::Text(s.into())
    }

    pub fn flag(b: bool) -> Self {
        Value::Text(if b { "true" } else { "false" }.into())
    }
}

/// 17 significant digits, exponent form, independent of locale.
pub fn format_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Number(x) => f.write_str(&format_number(*x)),
            Value::Text(s) => {
                f.write_char('"')?;
                for c in s.chars() {
                    if c == '"' || c == '\\' {
                        f.write_char('\\')?;
                    }
                    f.write_char(c)?;
                }
                f.write_char('"')
            }
            Value::List(xs) => {
                let parts: Vec<String> = xs.iter().map(|&x| format_number(x)).collect();
                f.write_str(&parts.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: Value,
    origin: String,
    line: usize,
}

/// Parsed key/value pairs, ordered by key.
#[derive(Debug, Clone, Default)]
pub struct Config {
    entries: BTreeMap<String, Entry>,
}

impl PartialEq for Config {
    fn eq(&self, other: &Self) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((ka, a), (kb, b))| ka == kb && a.value == b.value)
    }
}

impl Config {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses a whole file; `origin` names it in error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut config = Config::new();
        for (i, raw) in text.lines().enumerate() {
            let mut cur = Cursor::new(raw, origin, i + 1);
            cur.skip_spaces();
            if cur.at_end_or_comment() {
                continue;
            }
            let key_col = cur.column();
            let key = cur.key()?;
            if config.entries.contains_key(&key) {
                return Err(cur.error_at(key_col, format!("duplicate key `{key}`")));
            }
            cur.skip_spaces();
            cur.expect('=')?;
            cur.skip_spaces();
            let value = cur.value(false)?;
            config.entries.insert(
                key,
                Entry {
                    value,
                    origin: origin.to_string(),
                    line: i + 1,
                },
            );
        }
        Ok(config)
    }

    /// Applies one `key=value` override. Besides the file grammar, a bare
    /// word (`d.kind=fourier`, `sweep.param=d.value`) is accepted as text to
    /// spare shell quoting.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let mut cur = Cursor::new(spec, "--set", 1);
        cur.skip_spaces();
        let key = cur.key()?;
        cur.skip_spaces();
        cur.expect('=')?;
        cur.skip_spaces();
        let value = cur.value(true)?;
        self.entries.insert(
            key,
            Entry {
                value,
                origin: "--set".into(),
                line: 1,
            },
        );
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.entries.insert(
            key.to_string(),
            Entry {
                value,
                origin: "<generated>".into(),
                line: 0,
            },
        );
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.get(key).map(|e| &e.value)
    }

    pub fn remove(&mut self, key: &str) -> Option<Value> {
        self.entries.remove(key).map(|e| e.value)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Serializes in key order; `parse(to_text(c)) == c`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, e) in &self.entries {
            let _ = writeln!(out, "{k} = {}", e.value);
        }
        out
    }

    pub(crate) fn unknown(&self, key: &str) -> CliError {
        let e = &self.entries[key];
        CliError::UnknownKey {
            origin: e.origin.clone(),
            line: e.line,
            key: key.to_string(),
        }
    }
}

fn is_key_char(c: char) -> bool {
    c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '.'
}

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    origin: &'a str,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &str, origin: &'a str, line: usize) -> Self {
        Self {
            chars: text.chars().collect(),
            pos: 0,
            origin,
            line,
        }
    }

    fn column(&self) -> usize {
        self.pos + 1
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn error_at(&self, column: usize, message: impl Into<String>) -> CliError {
        CliError::Parse {
            origin: self.origin.to_string(),
            line: self.line,
            column,
            message: message.into(),
        }
    }

    fn error(&self, message: impl Into<String>) -> CliError {
        self.error_at(self.column(), message)
    }

    fn skip_spaces(&mut self) {
        while matches!(self.peek(), Some(' ' | '\t' | '\r')) {
            self.pos += 1;
        }
    }

    fn at_end_or_comment(&self) -> bool {
        matches!(self.peek(), None | Some('#'))
    }

    fn expect(&mut self, c: char) -> Result<()> {
        match self.peek() {
            Some(got) if got == c => {
                self.pos += 1;
                Ok(())
            }
            Some(got) => Err(self.error(format!("expected `{c}`, found `{got}`"))),
            None => Err(self.error(format!("expected `{c}`, found end of line"))),
        }
    }

    fn key(&mut self) -> Result<String> {
        let start = self.pos;
        while self.peek().is_some_and(is_key_char) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(match self.peek() {
                Some(c) => self.error(format!("invalid character `{c}` in key")),
                None => self.error("expected a key"),
            });
        }
        let key: String = self.chars[start..self.pos].iter().collect();
        if key.split('.').any(str::is_empty) {
            return Err(self.error_at(start + 1, format!("empty segment in key `{key}`")));
        }
        if let Some(c) = self.peek().filter(|c| !matches!(c, ' ' | '\t' | '\r' | '=')) {
            return Err(self.error(format!("invalid character `{c}` in key")));
        }
        Ok(key)
    }

    fn value(&mut self, lenient: bool) -> Result<Value> {
        let value = match self.peek() {
            None | Some('#') => return Err(self.error("missing value")),
            Some('"') => self.quoted()?,
            Some(c) if lenient && (c.is_ascii_alphabetic() || c == '_') && !self.looks_numeric() => {
                self.bare_word()?
            }
            Some(_) => self.numbers()?,
        };
        self.skip_spaces();
        if !self.at_end_or_comment() {
            return Err(self.error("unexpected text after value"));
        }
        Ok(value)
    }

    fn looks_numeric(&self) -> bool {
        let rest: String = self.chars[self.pos..].iter().take_while(|c| !matches!(c, ',' | ' ' | '#')).collect();
        rest.parse::<f64>().is_ok()
    }

    fn bare_word(&mut self) -> Result<Value> {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        {
            self.pos += 1;
        }
        Ok(Value::Text(self.chars[start..self.pos].iter().collect()))
    }

    fn quoted(&mut self) -> Result<Value> {
        let open = self.column();
        self.pos += 1;
        let mut s = String::new();
        loop {
            match self.peek() {
                None => return Err(self.error_at(open, "unterminated string")),
                Some('"') => {
                    self.pos += 1;
                    return Ok(Value::Text(s));
                }
                Some('\\') => {
                    self.pos += 1;
                    match self.peek() {
                        Some(c @ ('"' | '\\')) => {
                            s.push(c);
                            self.pos += 1;
                        }
                        _ => return Err(self.error("invalid escape; only \\\" and \\\\ are allowed")),
                    }
                }
                Some(c) => {
                    s.push(c);
                    self.pos += 1;
                }
            }
        }
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '+' | '-'))
        {
            self.pos += 1;
        }
        let token: String = self.chars[start..self.pos].iter().collect();
        if token.is_empty() {
            return Err(match self.peek() {
                Some(c) => self.error(format!("expected a number, found `{c}` (strings must be quoted)")),
                None => self.error("expected a number"),
            });
        }
        match token.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => Err(self.error_at(start + 1, format!("invalid number `{token}`"))),
        }
    }

    fn numbers(&mut self) -> Result<Value> {
        let mut xs = vec![self.number()?];
        loop {
            self.skip_spaces();
            if self.peek() != Some(',') {
                break;
            }
            self.pos += 1;
            self.skip_spaces();
            xs.push(self.number()?);
        }
        Ok(Value::list(xs))
    }
}

/// Typed access that remembers which keys were read, so leftovers can be
/// reported as unknown.
pub struct Reader<'a> {
    config: &'a Config,
    used: RefCell<BTreeSet<String>>,
}

impl<'a> Reader<'a> {
    pub fn new(config: &'a Config) -> Self {
        Self {
            config,
            used: RefCell::new(BTreeSet::new()),
        }
    }

    fn raw(&self, key: &str) -> Option<&'a Value> {
        let v = self.config.get(key);
        if v.is_some() {
            self.used.borrow_mut().insert(key.to_string());
        }
        v
    }

    pub fn has(&self, key: &str) -> bool {
        self.config.get(key).is_some()
    }

    pub fn number(&self, key: &str) -> Result<Option<f64>> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Number(x)) => Ok(Some(*x)),
            Some(_) => Err(CliError::invalid(key, "expected a single number")),
        }
    }

    pub fn number_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.number(key)?.unwrap_or(default))
    }

    pub fn require_number(&self, key: &str) -> Result<f64> {
        self.number(key)?.ok_or_else(|| CliError::MissingKey(key.into()))
    }

    /// A non-negative integer given as a number.
    pub fn count_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.number(key)? {
            None => Ok(default),
            Some(x) if x >= 0.0 && x.fract() == 0.0 && x <= u32::MAX as f64 => Ok(x as usize),
            Some(_) => Err(CliError::invalid(key, "expected a non-negative integer")),
        }
    }

    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Number(x)) => Ok(Some(vec![*x])),
            Some(Value::List(xs)) => Ok(Some(xs.clone())),
            Some(Value::Text(_)) => Err(CliError::invalid(key, "expected a number list")),
        }
    }

    pub fn require_list(&self, key: &str) -> Result<Vec<f64>> {
        self.list(key)?.ok_or_else(|| CliError::MissingKey(key.into()))
    }

    pub fn text(&self, key: &str) -> Result<Option<String>> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Text(s)) => Ok(Some(s.clone())),
            Some(_) => Err(CliError::invalid(key, "expected a quoted string")),
        }
    }

    pub fn require_text(&self, key: &str) -> Result<String> {
        self.text(key)?.ok_or_else(|| CliError::MissingKey(key.into()))
    }

    pub fn flag_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.text(key)?.as_deref() {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(_) => Err(CliError::invalid(key, "expected \"true\" or \"false\"")),
        }
    }

    /// Fails on the first key (in file order) that was never read.
    pub fn finish(self) -> Result<()> {
        let used = self.used.into_inner();
        let mut unused: Vec<&String> = self.config.entries.keys().filter(|k| !used.contains(*k)).collect();
        unused.sort_by_key(|k| self.config.entries[*k].line);
        match unused.first() {
            Some(k) => Err(self.config.unknown(k)),
            None => Ok(()),
        }
    }
}
