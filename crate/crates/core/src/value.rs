//! Typed literals and the values a query can return.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Datatype tag of a literal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LiteralType {
    Integer,
    Float,
    String,
    Date,
}

impl LiteralType {
    pub fn parse(tag: &str) -> Option<Self> {
        match tag {
            "integer" => Some(Self::Integer),
            "float" => Some(Self::Float),
            "string" => Some(Self::String),
            "date" => Some(Self::Date),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Integer => "integer",
            Self::Float => "float",
            Self::String => "string",
            Self::Date => "date",
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, Self::Integer | Self::Float)
    }
}

impl fmt::Display for LiteralType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid {kind} literal {value:?}")]
pub struct LiteralError {
    pub kind: LiteralType,
    pub value: String,
}

/// A typed literal. The lexical form is normalised on construction so that
/// equal values of the same datatype compare equal structurally.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawLiteral")]
pub struct Literal {
    #[serde(rename = "type")]
    kind: LiteralType,
    #[serde(rename = "literal")]
    lexical: String,
}

impl Literal {
    pub fn new(kind: LiteralType, value: &str) -> Result<Self, LiteralError> {
        let bad = || LiteralError { kind, value: value.to_string() };
        let lexical = match kind {
            LiteralType::Integer => value.trim().parse::<i64>().map_err(|_| bad())?.to_string(),
            LiteralType::Float => {
                let v = value.trim().parse::<f64>().map_err(|_| bad())?;
                if !v.is_finite() {
                    return Err(bad());
                }
                format_float(v)
            }
            LiteralType::String => value.to_string(),
            LiteralType::Date => {
                let v = value.trim();
                if !is_date(v) {
                    return Err(bad());
                }
                v.to_string()
            }
        };
        Ok(Self { kind, lexical })
    }

    pub fn integer(v: i64) -> Self {
        Self { kind: LiteralType::Integer, lexical: v.to_string() }
    }

    pub fn float(v: f64) -> Self {
        Self { kind: LiteralType::Float, lexical: format_float(v) }
    }

    pub fn string(v: impl Into<String>) -> Self {
        Self { kind: LiteralType::String, lexical: v.into() }
    }

    pub fn kind(&self) -> LiteralType {
        self.kind
    }

    pub fn lexical(&self) -> &str {
        &self.lexical
    }

    pub fn as_f64(&self) -> Option<f64> {
        if self.kind.is_numeric() {
            self.lexical.parse().ok()
        } else {
            None
        }
    }

    /// Value comparison. Integers and floats compare numerically; any other
    /// cross-datatype pair is incomparable.
    pub fn compare(&self, other: &Literal) -> Option<Ordering> {
        match (self.kind, other.kind) {
            (a, b) if a.is_numeric() && b.is_numeric() => self.as_f64()?.partial_cmp(&other.as_f64()?),
            (LiteralType::String, LiteralType::String) | (LiteralType::Date, LiteralType::Date) => {
                Some(self.lexical.cmp(&other.lexical))
            }
            _ => None,
        }
    }

    pub fn value_eq(&self, other: &Literal) -> bool {
        self.compare(other) == Some(Ordering::Equal)
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LiteralType::Integer => f.write_str(&self.lexical),
            LiteralType::String => write!(f, "{:?}", self.lexical),
            LiteralType::Float => write!(f, "\"{}\"^^xsd:float", self.lexical),
            LiteralType::Date => write!(f, "\"{}\"^^xsd:date", self.lexical),
        }
    }
}

#[derive(Deserialize)]
struct RawLiteral {
    #[serde(rename = "type")]
    kind: LiteralType,
    literal: serde_json::Value,
}

impl TryFrom<RawLiteral> for Literal {
    type Error = LiteralError;

    fn try_from(raw: RawLiteral) -> Result<Self, Self::Error> {
        let text = match &raw.literal {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        Literal::new(raw.kind, &text)
    }
}

fn format_float(v: f64) -> String {
    let s = format!("{v}");
    if s == "-0" {
        "0".to_string()
    } else {
        s
    }
}

/// `YYYY`, `YYYY-MM` or `YYYY-MM-DD`.
fn is_date(s: &str) -> bool {
    let parts: Vec<&str> = s.split('-').collect();
    let digits = |p: &str, n: usize| p.len() == n && p.bytes().all(|b| b.is_ascii_digit());
    match parts.as_slice() {
        [y] => digits(y, 4),
        [y, m] => digits(y, 4) && digits(m, 2),
        [y, m, d] => digits(y, 4) && digits(m, 2) && digits(d, 2),
        _ => false,
    }
}

/// One member of an answer set: an entity id or a literal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Entity(String),
    Literal(Literal),
}

impl Value {
    pub fn entity(id: impl Into<String>) -> Self {
        Value::Entity(id.into())
    }

    pub fn as_entity(&self) -> Option<&str> {
        match self {
            Value::Entity(id) => Some(id),
            Value::Literal(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Entity(id) => f.write_str(id),
            Value::Literal(l) => write!(f, "{l}"),
        }
    }
}

/// Result of executing a query. Set semantics; empty is a legal value.
pub type AnswerSet = BTreeSet<Value>;

/// NA sentinel text.
pub const NA: &str = "NA";

/// An answer as reported by a system or a dataset: a value set or NA.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Answer {
    Na,
    Values(AnswerSet),
}

impl Answer {
    pub fn is_na(&self) -> bool {
        matches!(self, Answer::Na)
    }

    pub fn values(&self) -> Option<&AnswerSet> {
        match self {
            Answer::Na => None,
            Answer::Values(v) => Some(v),
        }
    }
}

impl From<AnswerSet> for Answer {
    fn from(v: AnswerSet) -> Self {
        Answer::Values(v)
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Answer::Na => f.write_str(NA),
            Answer::Values(v) => {
                let items: Vec<String> = v.iter().map(Value::to_string).collect();
                write!(f, "{{{}}}", items.join(", "))
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum AnswerRecord {
    Sentinel(String),
    Values(Vec<Value>),
}

impl Serialize for Answer {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Answer::Na => s.serialize_str(NA),
            Answer::Values(v) => v.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Answer {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match AnswerRecord::deserialize(d)? {
            AnswerRecord::Sentinel(s) if s == NA => Ok(Answer::Na),
            AnswerRecord::Sentinel(s) => {
                Err(serde::de::Error::custom(format!("expected \"NA\" or a list of values, found {s:?}")))
            }
            AnswerRecord::Values(v) => Ok(Answer::Values(v.into_iter().collect())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn answer_serde() {
        assert_eq!(serde_json::to_string(&Answer::Na).unwrap(), "\"NA\"");
        let a: Answer = serde_json::from_str(r#"["m.2","m.1","m.1"]"#).unwrap();
        assert_eq!(a.values().unwrap().len(), 2);
        assert_eq!(serde_json::to_string(&a).unwrap(), r#"["m.1","m.2"]"#);
        assert!(serde_json::from_str::<Answer>("\"NK\"").is_err());
    }

    #[test]
    fn float_lexical_is_normalised() {
        assert_eq!(Literal::new(LiteralType::Float, "1.50").unwrap().lexical(), "1.5");
        assert_eq!(Literal::new(LiteralType::Float, "2.0").unwrap(), Literal::float(2.0));
    }

    #[test]
    fn numerics_coerce_but_other_kinds_do_not() {
        let i = Literal::integer(3);
        let f = Literal::float(3.0);
        assert!(i.value_eq(&f));
        assert_ne!(i, f);
        let s = Literal::string("3");
        assert_eq!(i.compare(&s), None);
        let d = Literal::new(LiteralType::Date, "2003").unwrap();
        assert_eq!(d.compare(&i), None);
    }

    #[test]
    fn rejects_malformed_literals() {
        assert!(Literal::new(LiteralType::Integer, "1.5").is_err());
        assert!(Literal::new(LiteralType::Date, "03-01-2001").is_err());
        assert!(Literal::new(LiteralType::Float, "nan").is_err());
    }

    #[test]
    fn value_serialises_untagged() {
        let v = Value::entity("m.01");
        assert_eq!(serde_json::to_string(&v).unwrap(), "\"m.01\"");
        let l = Value::Literal(Literal::integer(7));
        assert_eq!(serde_json::to_string(&l).unwrap(), r#"{"type":"integer","literal":"7"}"#);
        let back: Value = serde_json::from_str(r#"{"type":"integer","literal":"7"}"#).unwrap();
        assert_eq!(back, l);
    }
}
