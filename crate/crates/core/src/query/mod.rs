//! Logical forms: the canonical query AST shared by both surface dialects.
//!
//! SPARQL and s-expressions lower into one [`CanonicalQuery`]. Lowering sorts
//! patterns and renames variables into a canonical labelling, so two surface
//! forms that denote the same graph pattern compare equal structurally.

mod sexpr;
mod sparql;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::value::Literal;

pub use sexpr::{parse_sexpr, render_sexpr};
pub use sparql::{parse_sparql, render_sparql};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Entity(String),
    Class(String),
    Literal(Literal),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }
}

/// Pattern predicate: a relation reference or the instance-of marker.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Predicate {
    Relation(String),
    Type,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pattern {
    pub subject: Term,
    pub predicate: Predicate,
    pub object: Term,
}

impl Pattern {
    pub fn new(subject: Term, predicate: Predicate, object: Term) -> Self {
        Self { subject, predicate, object }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Comparator {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Eq => "=",
            Comparator::Ne => "!=",
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
        }
    }

    /// The comparator with its operands swapped (`a < b` iff `b > a`).
    pub fn flipped(self) -> Self {
        match self {
            Comparator::Lt => Comparator::Gt,
            Comparator::Le => Comparator::Ge,
            Comparator::Gt => Comparator::Lt,
            Comparator::Ge => Comparator::Le,
            c => c,
        }
    }

    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            Comparator::Eq => ord == Equal,
            Comparator::Ne => ord != Equal,
            Comparator::Lt => ord == Less,
            Comparator::Le => ord != Greater,
            Comparator::Gt => ord == Greater,
            Comparator::Ge => ord != Less,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Filter {
    pub var: String,
    pub op: Comparator,
    pub value: Literal,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Aggregate {
    None,
    Count,
    /// Forward relation chain from the projected variable to the value
    /// being maximised.
    ArgMax(Vec<String>),
    ArgMin(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AstError {
    #[error("projection variable ?{0} is not bound by any pattern")]
    ProjectionUnbound(String),
    #[error("filter variable ?{0} is not bound by any pattern")]
    FilterUnbound(String),
    #[error("type assertion object must be a class")]
    TypeObjectNotClass,
    #[error("class {0} used outside a type assertion")]
    MisplacedClass(String),
    #[error("literal used as pattern subject")]
    LiteralSubject,
    #[error("empty relation path in aggregate")]
    EmptyAggregatePath,
}

/// Canonical query: one projected variable over a basic graph pattern with
/// filters and an optional aggregate. Constructed only through
/// [`CanonicalQuery::new`], which validates and normalises.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalQuery {
    projection: String,
    distinct: bool,
    patterns: Vec<Pattern>,
    filters: Vec<Filter>,
    aggregate: Aggregate,
}

impl CanonicalQuery {
    pub fn new(
        projection: &str,
        distinct: bool,
        patterns: Vec<Pattern>,
        filters: Vec<Filter>,
        aggregate: Aggregate,
    ) -> Result<Self, AstError> {
        Self::new_with_names(projection, distinct, patterns, filters, aggregate).map(|(q, _)| q)
    }

    /// Like [`CanonicalQuery::new`], also returning the map from canonical
    /// variable names back to the caller's names.
    pub fn new_with_names(
        projection: &str,
        distinct: bool,
        patterns: Vec<Pattern>,
        filters: Vec<Filter>,
        aggregate: Aggregate,
    ) -> Result<(Self, BTreeMap<String, String>), AstError> {
        let mut bound = BTreeSet::new();
        for p in &patterns {
            if matches!(p.subject, Term::Literal(_)) {
                return Err(AstError::LiteralSubject);
            }
            if let Term::Class(c) = &p.subject {
                return Err(AstError::MisplacedClass(c.clone()));
            }
            match (&p.predicate, &p.object) {
                (Predicate::Type, Term::Class(_)) => {}
                (Predicate::Type, _) => return Err(AstError::TypeObjectNotClass),
                (Predicate::Relation(_), Term::Class(c)) => return Err(AstError::MisplacedClass(c.clone())),
                _ => {}
            }
            for t in [&p.subject, &p.object] {
                if let Term::Var(v) = t {
                    bound.insert(v.clone());
                }
            }
        }
        if !bound.contains(projection) {
            return Err(AstError::ProjectionUnbound(projection.to_string()));
        }
        for f in &filters {
            if !bound.contains(&f.var) {
                return Err(AstError::FilterUnbound(f.var.clone()));
            }
        }
        if let Aggregate::ArgMax(p) | Aggregate::ArgMin(p) = &aggregate {
            if p.is_empty() {
                return Err(AstError::EmptyAggregatePath);
            }
        }
        Ok(canonicalize(projection, distinct, patterns, filters, aggregate))
    }

    pub fn projection(&self) -> &str {
        &self.projection
    }

    pub fn distinct(&self) -> bool {
        self.distinct
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    pub fn filters(&self) -> &[Filter] {
        &self.filters
    }

    pub fn aggregate(&self) -> &Aggregate {
        &self.aggregate
    }

    /// Variables in canonical order (projection first).
    pub fn variables(&self) -> Vec<String> {
        let mut out = vec![self.projection.clone()];
        for p in &self.patterns {
            for t in [&p.subject, &p.object] {
                if let Term::Var(v) = t {
                    if !out.contains(v) {
                        out.push(v.clone());
                    }
                }
            }
        }
        out
    }

    /// Relation ids used by patterns and the aggregate path. The instance-of
    /// marker is not a relation.
    pub fn relations(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self
            .patterns
            .iter()
            .filter_map(|p| match &p.predicate {
                Predicate::Relation(r) => Some(r.clone()),
                Predicate::Type => None,
            })
            .collect();
        if let Aggregate::ArgMax(path) | Aggregate::ArgMin(path) = &self.aggregate {
            out.extend(path.iter().cloned());
        }
        out
    }

    pub fn entities(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for p in &self.patterns {
            for t in [&p.subject, &p.object] {
                if let Term::Entity(e) = t {
                    out.insert(e.clone());
                }
            }
        }
        out
    }

    pub fn classes(&self) -> BTreeSet<String> {
        self.patterns
            .iter()
            .filter_map(|p| match &p.object {
                Term::Class(c) => Some(c.clone()),
                _ => None,
            })
            .collect()
    }
}

impl fmt::Display for CanonicalQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_sparql(self).unwrap_or_else(|_| render_sexpr(self).unwrap_or_else(|_| format!("{self:?}"))))
    }
}

const EXHAUSTIVE_VAR_LIMIT: usize = 7;

fn canonicalize(
    projection: &str,
    distinct: bool,
    patterns: Vec<Pattern>,
    filters: Vec<Filter>,
    aggregate: Aggregate,
) -> (CanonicalQuery, BTreeMap<String, String>) {
    let mut others: Vec<String> = Vec::new();
    let mut note = |t: &Term| {
        if let Term::Var(v) = t {
            if v != projection && !others.contains(v) {
                others.push(v.clone());
            }
        }
    };
    for p in &patterns {
        note(&p.subject);
        note(&p.object);
    }

    let build = |order: &[usize]| {
        let mut names: BTreeMap<&str, String> = BTreeMap::new();
        names.insert(projection, "x".to_string());
        for (slot, &i) in order.iter().enumerate() {
            names.insert(others[i].as_str(), format!("x{slot}"));
        }
        let rename = |t: &Term| match t {
            Term::Var(v) => Term::Var(names[v.as_str()].clone()),
            other => other.clone(),
        };
        let mut ps: Vec<Pattern> =
            patterns.iter().map(|p| Pattern::new(rename(&p.subject), p.predicate.clone(), rename(&p.object))).collect();
        ps.sort();
        ps.dedup();
        let mut fs: Vec<Filter> = filters
            .iter()
            .map(|f| Filter { var: names[f.var.as_str()].clone(), op: f.op, value: f.value.clone() })
            .collect();
        fs.sort();
        fs.dedup();
        (ps, fs)
    };

    let mut best_order: Vec<usize> = (0..others.len()).collect();
    let mut best = build(&best_order);
    if others.len() <= EXHAUSTIVE_VAR_LIMIT {
        let mut order: Vec<usize> = (0..others.len()).collect();
        permute(&mut order, 0, &mut |perm| {
            let cand = build(perm);
            if cand < best {
                best = cand;
                best_order = perm.to_vec();
            }
        });
    }
    let mut names = BTreeMap::new();
    names.insert("x".to_string(), projection.to_string());
    for (slot, &i) in best_order.iter().enumerate() {
        names.insert(format!("x{slot}"), others[i].clone());
    }
    let (patterns, filters) = best;
    (CanonicalQuery { projection: "x".to_string(), distinct, patterns, filters, aggregate }, names)
}

fn permute(items: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// Parse failure. `message` is what the syntax verifier feeds back to the
/// generator.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message} (at byte {position})")]
pub struct SyntaxError {
    pub position: usize,
    pub message: String,
}

impl SyntaxError {
    pub fn new(position: usize, message: impl Into<String>) -> Self {
        Self { position, message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RenderError {
    #[error("query cannot be expressed in this dialect: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dialect {
    Sparql,
    Sexpr,
}

impl Dialect {
    /// Guesses the dialect of surface text: s-expressions open with a paren.
    pub fn detect(text: &str) -> Self {
        if text.trim_start().starts_with('(') {
            Dialect::Sexpr
        } else {
            Dialect::Sparql
        }
    }

    pub fn parse(self, text: &str) -> Result<(CanonicalQuery, BTreeMap<String, String>), SyntaxError> {
        match self {
            Dialect::Sparql => sparql::parse_with_names(text),
            Dialect::Sexpr => sexpr::parse_with_names(text),
        }
    }
}

/// Sentinel text for "no logical form exists".
pub const NK: &str = "NK";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedForm {
    pub dialect: Dialect,
    pub surface: String,
    pub query: CanonicalQuery,
    /// Canonical variable name -> name used in `surface`.
    pub var_names: BTreeMap<String, String>,
}

impl ParsedForm {
    pub fn surface_var(&self, canonical: &str) -> String {
        self.var_names.get(canonical).cloned().unwrap_or_else(|| canonical.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MalformedForm {
    pub dialect: Dialect,
    pub surface: String,
    pub error: SyntaxError,
}

/// A logical form as produced by a generator or a dataset: the NK sentinel,
/// a parsed query, or surface text that failed to parse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LogicalForm {
    Nk,
    Parsed(ParsedForm),
    Malformed(MalformedForm),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormError {
    #[error("logical form is NK")]
    NkInput,
    #[error("logical form does not parse: {0}")]
    Unparsed(SyntaxError),
}

impl LogicalForm {
    pub fn parse(dialect: Dialect, text: &str) -> Self {
        let surface = text.trim();
        if surface == NK {
            return LogicalForm::Nk;
        }
        match dialect.parse(surface) {
            Ok((query, var_names)) => {
                LogicalForm::Parsed(ParsedForm { dialect, surface: surface.to_string(), query, var_names })
            }
            Err(error) => LogicalForm::Malformed(MalformedForm { dialect, surface: surface.to_string(), error }),
        }
    }

    /// Parses text whose dialect is detected from its shape.
    pub fn from_text(text: &str) -> Self {
        Self::parse(Dialect::detect(text), text)
    }

    /// Extracts a logical form from a generator reply, tolerating code
    /// fences and a leading `sparql:` label.
    pub fn from_reply(reply: &str) -> Self {
        let text = reply_body(reply);
        if text.trim_matches('"') == NK {
            return LogicalForm::Nk;
        }
        Self::from_text(text)
    }

    pub fn from_query(dialect: Dialect, query: &CanonicalQuery) -> Result<Self, RenderError> {
        let surface = match dialect {
            Dialect::Sparql => render_sparql(query)?,
            Dialect::Sexpr => render_sexpr(query)?,
        };
        Ok(Self::parse(dialect, &surface))
    }

    pub fn is_nk(&self) -> bool {
        matches!(self, LogicalForm::Nk)
    }

    pub fn query(&self) -> Option<&CanonicalQuery> {
        match self {
            LogicalForm::Parsed(p) => Some(&p.query),
            _ => None,
        }
    }

    pub fn try_query(&self) -> Result<&CanonicalQuery, FormError> {
        match self {
            LogicalForm::Nk => Err(FormError::NkInput),
            LogicalForm::Parsed(p) => Ok(&p.query),
            LogicalForm::Malformed(m) => Err(FormError::Unparsed(m.error.clone())),
        }
    }

    /// Surface text; `NK` for the sentinel.
    pub fn surface(&self) -> &str {
        match self {
            LogicalForm::Nk => NK,
            LogicalForm::Parsed(p) => &p.surface,
            LogicalForm::Malformed(m) => &m.surface,
        }
    }

    pub fn dialect(&self) -> Option<Dialect> {
        match self {
            LogicalForm::Nk => None,
            LogicalForm::Parsed(p) => Some(p.dialect),
            LogicalForm::Malformed(m) => Some(m.dialect),
        }
    }
}

/// Strips code fences and a leading `sparql:` style label from a model
/// reply.
pub fn reply_body(reply: &str) -> &str {
    let mut text = reply.trim();
    if let Some(rest) = text.strip_prefix("```") {
        let rest = rest.trim_start_matches(|c: char| c.is_ascii_alphanumeric());
        text = rest.rsplit_once("```").map(|(body, _)| body).unwrap_or(rest).trim();
    }
    for label in ["sparql:", "SPARQL:", "s-expression:"] {
        if let Some(rest) = text.strip_prefix(label) {
            text = rest.trim();
        }
    }
    text
}

/// Relation ids of a logical form, inverse relations normalised to their
/// base id, the instance-of marker excluded.
pub fn extract_relations(lf: &LogicalForm) -> Result<BTreeSet<String>, FormError> {
    lf.try_query().map(CanonicalQuery::relations)
}

/// Entity ids of a logical form; class objects of type assertions excluded.
pub fn extract_entities(lf: &LogicalForm) -> Result<BTreeSet<String>, FormError> {
    lf.try_query().map(CanonicalQuery::entities)
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum FormRecord {
    Sentinel(String),
    Form { dialect: Dialect, text: String },
}

impl Serialize for LogicalForm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            LogicalForm::Nk => FormRecord::Sentinel(NK.to_string()).serialize(s),
            LogicalForm::Parsed(_) | LogicalForm::Malformed(_) => FormRecord::Form {
                dialect: self.dialect().expect("non-NK has a dialect"),
                text: self.surface().to_string(),
            }
            .serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for LogicalForm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match FormRecord::deserialize(d)? {
            FormRecord::Sentinel(s) if s == NK => Ok(LogicalForm::Nk),
            FormRecord::Sentinel(s) => {
                Err(serde::de::Error::custom(format!("expected \"NK\" or {{dialect, text}}, found {s:?}")))
            }
            FormRecord::Form { dialect, text } => Ok(LogicalForm::parse(dialect, &text)),
        }
    }
}
