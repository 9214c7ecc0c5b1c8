//! S-expression dialect: `AND`, `JOIN`, `R`, the comparison functions
//! `lt`/`le`/`gt`/`ge`, `COUNT`, `ARGMAX` and `ARGMIN`.

use std::collections::{BTreeMap, BTreeSet};

use super::{Aggregate, CanonicalQuery, Comparator, Filter, Pattern, Predicate, RenderError, SyntaxError, Term};
use crate::value::{Literal, LiteralType};

const XSD_NS: &str = "http://www.w3.org/2001/XMLSchema#";

#[derive(Debug, Clone)]
enum Node {
    Atom { pos: usize, text: String, quoted: bool },
    List { pos: usize, items: Vec<Node> },
}

impl Node {
    fn pos(&self) -> usize {
        match self {
            Node::Atom { pos, .. } | Node::List { pos, .. } => *pos,
        }
    }
}

fn read(text: &str) -> Result<Node, SyntaxError> {
    let mut stack: Vec<(usize, Vec<Node>)> = Vec::new();
    let mut top: Option<Node> = None;
    let bytes: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    let push = |stack: &mut Vec<(usize, Vec<Node>)>, top: &mut Option<Node>, node: Node| match stack.last_mut() {
        Some((_, items)) => {
            items.push(node);
            Ok(())
        }
        None if top.is_none() => {
            *top = Some(node);
            Ok(())
        }
        None => Err(SyntaxError::new(node.pos(), "trailing input after expression")),
    };
    while i < bytes.len() {
        let (pos, c) = bytes[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '(' => {
                stack.push((pos, Vec::new()));
                i += 1;
            }
            ')' => {
                let (start, items) = stack.pop().ok_or_else(|| SyntaxError::new(pos, "unbalanced ')'"))?;
                push(&mut stack, &mut top, Node::List { pos: start, items })?;
                i += 1;
            }
            '"' => {
                let mut s = String::new();
                let mut j = i + 1;
                loop {
                    match bytes.get(j).map(|&(_, c)| c) {
                        None => return Err(SyntaxError::new(pos, "unterminated string literal")),
                        Some('\\') => {
                            if let Some(&(_, e)) = bytes.get(j + 1) {
                                s.push(match e {
                                    'n' => '\n',
                                    't' => '\t',
                                    'r' => '\r',
                                    e => e,
                                });
                            }
                            j += 2;
                        }
                        Some('"') => break,
                        Some(ch) => {
                            s.push(ch);
                            j += 1;
                        }
                    }
                }
                j += 1;
                // Optional datatype suffix stays attached to the atom.
                let mut suffix = String::new();
                while let Some(&(_, ch)) = bytes.get(j) {
                    if ch.is_whitespace() || ch == '(' || ch == ')' {
                        break;
                    }
                    suffix.push(ch);
                    j += 1;
                }
                push(&mut stack, &mut top, Node::Atom { pos, text: format!("{s}\u{0}{suffix}"), quoted: true })?;
                i = j;
            }
            _ => {
                let mut j = i;
                let mut s = String::new();
                while let Some(&(_, ch)) = bytes.get(j) {
                    if ch.is_whitespace() || ch == '(' || ch == ')' {
                        break;
                    }
                    s.push(ch);
                    j += 1;
                }
                push(&mut stack, &mut top, Node::Atom { pos, text: s, quoted: false })?;
                i = j;
            }
        }
    }
    if let Some((pos, _)) = stack.last() {
        return Err(SyntaxError::new(*pos, "unbalanced '('"));
    }
    top.ok_or_else(|| SyntaxError::new(0, "empty expression"))
}

fn datatype(tag: &str) -> Option<LiteralType> {
    let tag = tag.strip_prefix('<').and_then(|t| t.strip_suffix('>')).unwrap_or(tag);
    let local = tag.strip_prefix("xsd:").or_else(|| tag.strip_prefix(XSD_NS))?;
    match local {
        "integer" | "int" | "long" => Some(LiteralType::Integer),
        "float" | "double" | "decimal" => Some(LiteralType::Float),
        "string" => Some(LiteralType::String),
        "date" | "dateTime" | "gYear" | "gYearMonth" => Some(LiteralType::Date),
        _ => None,
    }
}

/// Interprets an atom in value position as a literal, if it is one.
fn literal_atom(text: &str, quoted: bool, pos: usize) -> Result<Option<Literal>, SyntaxError> {
    let (body, suffix) = if quoted {
        let (b, s) = text.split_once('\u{0}').expect("quoted atoms carry a separator");
        (b, s)
    } else {
        match text.split_once("^^") {
            Some((b, s)) => (b, s),
            None => (text, ""),
        }
    };
    let kind = if let Some(tag) = suffix.strip_prefix("^^") {
        Some(datatype(tag).ok_or_else(|| SyntaxError::new(pos, format!("datatype {tag} not supported")))?)
    } else if quoted && suffix.is_empty() {
        Some(LiteralType::String)
    } else if quoted {
        return Err(SyntaxError::new(pos, format!("unexpected text {suffix:?} after string")));
    } else if !suffix.is_empty() {
        Some(datatype(suffix).ok_or_else(|| SyntaxError::new(pos, format!("datatype {suffix} not supported")))?)
    } else if body.parse::<i64>().is_ok() {
        Some(LiteralType::Integer)
    } else if body.parse::<f64>().is_ok_and(f64::is_finite)
        && body.starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '.')
    {
        Some(LiteralType::Float)
    } else {
        None
    };
    match kind {
        None => Ok(None),
        Some(k) => Literal::new(k, body).map(Some).map_err(|e| SyntaxError::new(pos, e.to_string())),
    }
}

struct Lowering {
    patterns: Vec<Pattern>,
    filters: Vec<Filter>,
    fresh: usize,
}

impl Lowering {
    fn fresh(&mut self) -> String {
        self.fresh += 1;
        format!("v{}", self.fresh)
    }

    fn head(items: &[Node]) -> Result<(usize, &str), SyntaxError> {
        match items.first() {
            Some(Node::Atom { pos, text, quoted: false }) => Ok((*pos, text.as_str())),
            Some(n) => Err(SyntaxError::new(n.pos(), "expected a function name")),
            None => Err(SyntaxError::new(0, "empty list")),
        }
    }

    fn atom(node: &Node, what: &str) -> Result<String, SyntaxError> {
        match node {
            Node::Atom { text, quoted: false, .. } => Ok(text.clone()),
            other => Err(SyntaxError::new(other.pos(), format!("expected {what}"))),
        }
    }

    fn arity(items: &[Node], pos: usize, name: &str, n: usize) -> Result<(), SyntaxError> {
        if items.len() != n + 1 {
            return Err(SyntaxError::new(pos, format!("{name} takes {n} arguments, found {}", items.len() - 1)));
        }
        Ok(())
    }

    /// Adds patterns constraining `var` to the set denoted by `node`.
    fn set(&mut self, node: &Node, var: &str) -> Result<(), SyntaxError> {
        let items = match node {
            Node::Atom { text, quoted: false, pos } => {
                if literal_atom(text, false, *pos)?.is_some() {
                    return Err(SyntaxError::new(*pos, format!("literal {text} where a set is expected")));
                }
                self.patterns.push(Pattern::new(Term::var(var), Predicate::Type, Term::Class(text.clone())));
                return Ok(());
            }
            Node::Atom { pos, .. } => return Err(SyntaxError::new(*pos, "string literal where a set is expected")),
            Node::List { items, .. } => items,
        };
        let (pos, head) = Self::head(items)?;
        match head {
            "AND" => {
                if items.len() < 3 {
                    return Err(SyntaxError::new(pos, "AND takes at least 2 arguments"));
                }
                for arg in &items[1..] {
                    self.set(arg, var)?;
                }
            }
            "JOIN" => {
                Self::arity(items, pos, "JOIN", 2)?;
                let (rel, inverse) = self.relation(&items[1])?;
                let other = self.value(&items[2])?;
                let here = Term::var(var);
                let p = if inverse {
                    Pattern::new(other, Predicate::Relation(rel), here)
                } else {
                    Pattern::new(here, Predicate::Relation(rel), other)
                };
                if matches!(p.subject, Term::Literal(_)) {
                    return Err(SyntaxError::new(
                        items[2].pos(),
                        "literal cannot be the subject of a reversed relation",
                    ));
                }
                self.patterns.push(p);
            }
            "lt" | "le" | "gt" | "ge" => {
                Self::arity(items, pos, head, 2)?;
                let rel = Self::atom(&items[1], "a relation")?;
                let lit = match &items[2] {
                    Node::Atom { text, quoted, pos } => literal_atom(text, *quoted, *pos)?,
                    _ => None,
                }
                .ok_or_else(|| SyntaxError::new(items[2].pos(), format!("{head} needs a literal")))?;
                let op = match head {
                    "lt" => Comparator::Lt,
                    "le" => Comparator::Le,
                    "gt" => Comparator::Gt,
                    _ => Comparator::Ge,
                };
                let y = self.fresh();
                self.patterns.push(Pattern::new(Term::var(var), Predicate::Relation(rel), Term::var(y.clone())));
                self.filters.push(Filter { var: y, op, value: lit });
            }
            "R" => return Err(SyntaxError::new(pos, "R is only valid as a JOIN relation")),
            "COUNT" | "ARGMAX" | "ARGMIN" => {
                return Err(SyntaxError::new(pos, format!("{head} is only valid at the top level")))
            }
            other => return Err(SyntaxError::new(pos, format!("unknown function {other}"))),
        }
        Ok(())
    }

    fn relation(&mut self, node: &Node) -> Result<(String, bool), SyntaxError> {
        match node {
            Node::Atom { .. } => Ok((Self::atom(node, "a relation")?, false)),
            Node::List { items, .. } => {
                let (pos, head) = Self::head(items)?;
                if head != "R" {
                    return Err(SyntaxError::new(pos, format!("expected a relation, found {head}")));
                }
                Self::arity(items, pos, "R", 1)?;
                Ok((Self::atom(&items[1], "a relation")?, true))
            }
        }
    }

    /// JOIN target: an entity, a literal, or a nested set expression.
    fn value(&mut self, node: &Node) -> Result<Term, SyntaxError> {
        match node {
            Node::Atom { text, quoted, pos } => Ok(match literal_atom(text, *quoted, *pos)? {
                Some(l) => Term::Literal(l),
                None => Term::Entity(text.clone()),
            }),
            Node::List { .. } => {
                let y = self.fresh();
                self.set(node, &y)?;
                Ok(Term::var(y))
            }
        }
    }

    fn path(node: &Node, out: &mut Vec<String>) -> Result<(), SyntaxError> {
        match node {
            Node::Atom { .. } => {
                out.push(Self::atom(node, "a relation")?);
                Ok(())
            }
            Node::List { items, .. } => {
                let (pos, head) = Self::head(items)?;
                if head != "JOIN" {
                    return Err(SyntaxError::new(pos, "aggregate path must be a relation or a JOIN chain"));
                }
                Self::arity(items, pos, "JOIN", 2)?;
                Self::path(&items[1], out)?;
                Self::path(&items[2], out)
            }
        }
    }
}

pub(super) fn parse_with_names(text: &str) -> Result<(CanonicalQuery, BTreeMap<String, String>), SyntaxError> {
    let root = read(text)?;
    let mut low = Lowering { patterns: Vec::new(), filters: Vec::new(), fresh: 0 };
    let proj = "x";
    let mut aggregate = Aggregate::None;
    let body = match &root {
        Node::List { items, .. } => match Lowering::head(items)? {
            (pos, "COUNT") => {
                Lowering::arity(items, pos, "COUNT", 1)?;
                aggregate = Aggregate::Count;
                &items[1]
            }
            (pos, f @ ("ARGMAX" | "ARGMIN")) => {
                Lowering::arity(items, pos, f, 2)?;
                let mut path = Vec::new();
                Lowering::path(&items[2], &mut path)?;
                aggregate = if f == "ARGMAX" { Aggregate::ArgMax(path) } else { Aggregate::ArgMin(path) };
                &items[1]
            }
            _ => &root,
        },
        Node::Atom { .. } => &root,
    };
    low.set(body, proj)?;
    CanonicalQuery::new_with_names(proj, true, low.patterns, low.filters, aggregate)
        .map_err(|e| SyntaxError::new(0, e.to_string()))
}

/// Parses an s-expression into a canonical query. S-expressions denote
/// sets, so the result is always `DISTINCT`.
pub fn parse_sexpr(text: &str) -> Result<CanonicalQuery, SyntaxError> {
    parse_with_names(text).map(|(q, _)| q)
}

fn render_value(t: &Term) -> String {
    match t {
        Term::Var(v) => v.clone(),
        Term::Entity(e) | Term::Class(e) => e.clone(),
        Term::Literal(l) => match l.kind() {
            LiteralType::Float if l.lexical().parse::<i64>().is_ok() => format!("\"{}\"^^xsd:float", l.lexical()),
            LiteralType::Integer | LiteralType::Float => l.lexical().to_string(),
            LiteralType::String => super::sparql::quote(l.lexical()),
            LiteralType::Date => format!("\"{}\"^^xsd:date", l.lexical()),
        },
    }
}

struct Renderer<'a> {
    q: &'a CanonicalQuery,
    used: Vec<bool>,
    filters_used: Vec<bool>,
    visited: BTreeSet<String>,
}

impl Renderer<'_> {
    fn unsupported(why: &str) -> RenderError {
        RenderError::Unsupported(format!("s-expression: {why}"))
    }

    /// Renders the set of bindings of `var`, excluding the edge it was
    /// reached by (already marked used).
    fn node(&mut self, var: &str) -> Result<String, RenderError> {
        if !self.visited.insert(var.to_string()) {
            return Err(Self::unsupported("cyclic pattern graph"));
        }
        let here = Term::var(var);
        let mut parts = Vec::new();
        for i in 0..self.q.patterns().len() {
            let p = &self.q.patterns()[i];
            if self.used[i] || p.subject != here || p.predicate != Predicate::Type {
                continue;
            }
            self.used[i] = true;
            parts.push(render_value(&p.object));
        }
        for i in 0..self.q.patterns().len() {
            if self.used[i] {
                continue;
            }
            let p = self.q.patterns()[i].clone();
            let Predicate::Relation(rel) = &p.predicate else { continue };
            if p.subject == here {
                self.used[i] = true;
                match &p.object {
                    Term::Var(y) => {
                        if let Some(cmp) = self.comparison(rel, y)? {
                            parts.push(cmp);
                        } else {
                            let inner = self.nested(y)?;
                            parts.push(format!("(JOIN {rel} {inner})"));
                        }
                    }
                    other => parts.push(format!("(JOIN {rel} {})", render_value(other))),
                }
            } else if p.object == here {
                self.used[i] = true;
                match &p.subject {
                    Term::Var(y) => {
                        let inner = self.nested(y)?;
                        parts.push(format!("(JOIN (R {rel}) {inner})"));
                    }
                    other => parts.push(format!("(JOIN (R {rel}) {})", render_value(other))),
                }
            }
        }
        if self.q.filters().iter().zip(&self.filters_used).any(|(f, u)| !u && f.var == var) {
            return Err(Self::unsupported("filter on a variable with other constraints"));
        }
        let Some(last) = parts.pop() else {
            return Err(Self::unsupported("unconstrained variable"));
        };
        Ok(parts.into_iter().rev().fold(last, |acc, p| format!("(AND {p} {acc})")))
    }

    /// A bare class inside JOIN would read back as an entity.
    fn nested(&mut self, var: &str) -> Result<String, RenderError> {
        let inner = self.node(var)?;
        if !inner.starts_with('(') {
            return Err(Self::unsupported("inner variable constrained only by a class"));
        }
        Ok(inner)
    }

    /// `(lt r lit)` when `y` is reached only by this edge and constrained
    /// only by one ordering filter.
    fn comparison(&mut self, rel: &str, y: &str) -> Result<Option<String>, RenderError> {
        if self.visited.contains(y) {
            return Err(Self::unsupported("cyclic pattern graph"));
        }
        let here = Term::var(y);
        let touches =
            self.q.patterns().iter().zip(&self.used).any(|(p, u)| !u && (p.subject == here || p.object == here));
        let fs: Vec<usize> = (0..self.q.filters().len()).filter(|&i| self.q.filters()[i].var == y).collect();
        if touches || fs.len() != 1 {
            return Ok(None);
        }
        let f = &self.q.filters()[fs[0]];
        let name = match f.op {
            Comparator::Lt => "lt",
            Comparator::Le => "le",
            Comparator::Gt => "gt",
            Comparator::Ge => "ge",
            Comparator::Eq | Comparator::Ne => return Err(Self::unsupported("equality filter")),
        };
        self.filters_used[fs[0]] = true;
        Ok(Some(format!("({name} {rel} {})", render_value(&Term::Literal(f.value.clone())))))
    }
}

/// Renders an s-expression. Only tree-shaped patterns rooted at the
/// projection can be expressed.
pub fn render_sexpr(q: &CanonicalQuery) -> Result<String, RenderError> {
    if !q.distinct() {
        return Err(Renderer::unsupported("bag semantics"));
    }
    let mut r = Renderer {
        q,
        used: vec![false; q.patterns().len()],
        filters_used: vec![false; q.filters().len()],
        visited: BTreeSet::new(),
    };
    let body = r.node(q.projection())?;
    if r.used.iter().any(|u| !u) || r.filters_used.iter().any(|u| !u) {
        return Err(Renderer::unsupported("pattern graph is not a tree rooted at the answer"));
    }
    Ok(match q.aggregate() {
        Aggregate::None => body,
        Aggregate::Count => format!("(COUNT {body})"),
        Aggregate::ArgMax(p) | Aggregate::ArgMin(p) => {
            let name = if matches!(q.aggregate(), Aggregate::ArgMax(_)) { "ARGMAX" } else { "ARGMIN" };
            let mut path = p.last().expect("non-empty path").clone();
            for rel in p.iter().rev().skip(1) {
                path = format!("(JOIN {rel} {path})");
            }
            format!("({name} {body} {path})")
        }
    })
}
