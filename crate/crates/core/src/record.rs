//! Flat `field=value` records, one per line, fields separated by single
//! spaces. Shared by the wire protocol, transcripts and matrix files.

use std::fmt;

use thiserror::Error;

/// A malformed record, naming the field at fault.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("field `{field}`: {message}")]
pub struct DecodeError {
    pub field: String,
    pub message: String,
}

impl DecodeError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Ordered fields of one record line.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Record {
    fields: Vec<(String, String)>,
}

impl Record {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a field. Values must be non-empty tokens without whitespace.
    pub fn field(mut self, name: &str, value: impl fmt::Display) -> Self {
        self.fields.push((name.to_string(), value.to_string()));
        self
    }

    pub fn parse(line: &str) -> Result<Self, DecodeError> {
        let line = line.strip_suffix('\n').unwrap_or(line);
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.is_empty() {
            return Err(DecodeError::new("line", "empty record"));
        }
        let mut fields: Vec<(String, String)> = Vec::new();
        for token in line.split(' ') {
            let (name, value) = token
                .split_once('=')
                .ok_or_else(|| DecodeError::new(token, "expected `field=value`"))?;
            if name.is_empty() {
                return Err(DecodeError::new(token, "empty field name"));
            }
            if value.is_empty() {
                return Err(DecodeError::new(name, "empty value"));
            }
            if fields.iter().any(|(n, _)| n == name) {
                return Err(DecodeError::new(name, "duplicate field"));
            }
            fields.push((name.to_string(), value.to_string()));
        }
        Ok(Self { fields })
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, name: &str) -> Result<&str, DecodeError> {
        self.get(name)
            .ok_or_else(|| DecodeError::new(name, "missing"))
    }

    pub fn parse_field<T: std::str::FromStr>(&self, name: &str) -> Result<T, DecodeError> {
        let raw = self.require(name)?;
        raw.parse()
            .map_err(|_| DecodeError::new(name, format!("cannot parse `{raw}`")))
    }

    /// Rejects any field not in `allowed`.
    pub fn only(&self, allowed: &[&str]) -> Result<(), DecodeError> {
        match self.fields.iter().find(|(n, _)| !allowed.contains(&n.as_str())) {
            Some((n, _)) => Err(DecodeError::new(n.clone(), "unexpected field")),
            None => Ok(()),
        }
    }
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (n, v)) in self.fields.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{n}={v}")?;
        }
        Ok(())
    }
}

/// True when `value` can be stored as a record value.
pub fn is_token(value: &str) -> bool {
    !value.is_empty() && !value.chars().any(char::is_whitespace)
}
