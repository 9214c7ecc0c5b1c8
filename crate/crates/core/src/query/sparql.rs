//! SPARQL subset: `SELECT [DISTINCT]` of one variable (optionally under
//! `COUNT`) over a basic graph pattern with `FILTER` comparisons. Ids use the
//! `ns:` prefix.

use std::collections::BTreeMap;

use super::{Aggregate, CanonicalQuery, Comparator, Filter, Pattern, Predicate, RenderError, SyntaxError, Term};
use crate::kb::TYPE_PREDICATE;
use crate::value::{Literal, LiteralType};

const FREEBASE_NS: &str = "http://rdf.freebase.com/ns/";
const XSD_NS: &str = "http://www.w3.org/2001/XMLSchema#";

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Var(String),
    /// Prefixed name; prefix without the colon.
    Name(String, String),
    Iri(String),
    Str(String),
    Num(String),
    Punct(&'static str),
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("word {w}"),
            Tok::Var(v) => format!("variable ?{v}"),
            Tok::Name(p, l) => format!("{p}:{l}"),
            Tok::Iri(i) => format!("<{i}>"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Num(n) => format!("number {n}"),
            Tok::Punct(p) => format!("'{p}'"),
        }
    }
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '.' | '-')
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, SyntaxError> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let at = |i: usize| chars.get(i).map(|&(_, c)| c);
    let pos = |i: usize| chars.get(i).map(|&(p, _)| p).unwrap_or(text.len());
    while i < chars.len() {
        let (start, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i].1 != '\n' {
                i += 1;
            }
            continue;
        }
        let two: String = chars[i..chars.len().min(i + 2)].iter().map(|&(_, c)| c).collect();
        if let Some(p) = ["^^", "!=", "<=", ">="].into_iter().find(|p| *p == two) {
            out.push((start, Tok::Punct(p)));
            i += 2;
            continue;
        }
        match c {
            '{' | '}' | '(' | ')' | '.' | ',' | ';' | '=' | '>' | '*' => {
                let p = ["{", "}", "(", ")", ".", ",", ";", "=", ">", "*"]
                    .into_iter()
                    .find(|p| p.starts_with(c))
                    .expect("listed");
                out.push((start, Tok::Punct(p)));
                i += 1;
            }
            '<' => {
                // IRI if a closing '>' follows before any whitespace.
                let mut j = i + 1;
                while j < chars.len() && !chars[j].1.is_whitespace() && chars[j].1 != '>' {
                    j += 1;
                }
                if j < chars.len() && chars[j].1 == '>' && j > i + 1 {
                    let iri: String = chars[i + 1..j].iter().map(|&(_, c)| c).collect();
                    out.push((start, Tok::Iri(iri)));
                    i = j + 1;
                } else {
                    out.push((start, Tok::Punct("<")));
                    i += 1;
                }
            }
            '?' | '$' => {
                let mut j = i + 1;
                while at(j).is_some_and(|c| c.is_alphanumeric() || c == '_') {
                    j += 1;
                }
                if j == i + 1 {
                    return Err(SyntaxError::new(start, "empty variable name"));
                }
                out.push((start, Tok::Var(chars[i + 1..j].iter().map(|&(_, c)| c).collect())));
                i = j;
            }
            '"' | '\'' => {
                let quote = c;
                let mut j = i + 1;
                let mut s = String::new();
                loop {
                    match at(j) {
                        None => return Err(SyntaxError::new(start, "unterminated string literal")),
                        Some('\\') => {
                            match at(j + 1) {
                                Some('n') => s.push('\n'),
                                Some('t') => s.push('\t'),
                                Some(e) => s.push(e),
                                None => return Err(SyntaxError::new(start, "unterminated string literal")),
                            }
                            j += 2;
                        }
                        Some(q) if q == quote => break,
                        Some(ch) => {
                            s.push(ch);
                            j += 1;
                        }
                    }
                }
                i = j + 1;
                // Language tags carry no meaning here.
                if at(i) == Some('@') {
                    i += 1;
                    while at(i).is_some_and(|c| c.is_alphanumeric() || c == '-') {
                        i += 1;
                    }
                }
                out.push((start, Tok::Str(s)));
            }
            c if c.is_ascii_digit() || ((c == '-' || c == '+') && at(i + 1).is_some_and(|d| d.is_ascii_digit())) => {
                let mut j = i + 1;
                while at(j).is_some_and(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E')) {
                    j += 1;
                }
                // A trailing '.' terminates the triple rather than the number.
                while j > i + 1 && chars[j - 1].1 == '.' {
                    j -= 1;
                }
                out.push((start, Tok::Num(chars[i..j].iter().map(|&(_, c)| c).collect())));
                i = j;
            }
            c if c.is_alphabetic() || c == '_' || c == ':' => {
                let mut j = i;
                while at(j).is_some_and(|c| is_name_char(c) || c == ':') {
                    j += 1;
                }
                while j > i + 1 && chars[j - 1].1 == '.' {
                    j -= 1;
                }
                let word: String = chars[i..j].iter().map(|&(_, c)| c).collect();
                let tok = match word.split_once(':') {
                    Some((prefix, local)) => Tok::Name(prefix.to_string(), local.to_string()),
                    None => Tok::Word(word),
                };
                out.push((start, tok));
                i = j;
            }
            other => {
                return Err(SyntaxError::new(pos(i), format!("unexpected character {other:?}")));
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
    text: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|(_, t)| t.clone());
        self.at += 1;
        t
    }

    fn unexpected(&self, expected: &str) -> SyntaxError {
        match self.peek() {
            Some(Tok::Word(w)) if !is_keyword(w) => SyntaxError::new(self.pos(), format!("word {w} not defined")),
            Some(t) => SyntaxError::new(self.pos(), format!("expected {expected}, found {}", t.describe())),
            None => SyntaxError::new(self.pos(), format!("expected {expected}, found end of query")),
        }
    }

    fn keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Word(w)) if w.eq_ignore_ascii_case(kw)) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), SyntaxError> {
        if self.keyword(kw) {
            Ok(())
        } else {
            Err(self.unexpected(kw))
        }
    }

    fn punct(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Punct(q)) if *q == p) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), SyntaxError> {
        if self.punct(p) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("'{p}'")))
        }
    }

    fn var(&mut self) -> Result<String, SyntaxError> {
        match self.peek() {
            Some(Tok::Var(v)) => {
                let v = v.clone();
                self.at += 1;
                Ok(v)
            }
            _ => Err(self.unexpected("a variable")),
        }
    }

    /// Id of a prefixed name or full Freebase IRI.
    fn id(&self, tok: &Tok, pos: usize) -> Result<Option<String>, SyntaxError> {
        match tok {
            Tok::Name(p, local) if p == "ns" || p.is_empty() => Ok(Some(local.clone())),
            Tok::Name(p, _) => Err(SyntaxError::new(pos, format!("prefix {p}: not defined"))),
            Tok::Iri(iri) => match iri.strip_prefix(FREEBASE_NS) {
                Some(local) => Ok(Some(local.to_string())),
                None => Err(SyntaxError::new(pos, format!("IRI <{iri}> outside the ns: namespace"))),
            },
            _ => Ok(None),
        }
    }

    fn literal(&mut self) -> Result<Option<Literal>, SyntaxError> {
        let pos = self.pos();
        let (kind, text) = match self.peek() {
            Some(Tok::Num(n)) => {
                let kind = if n.contains(['.', 'e', 'E']) { LiteralType::Float } else { LiteralType::Integer };
                (kind, n.clone())
            }
            Some(Tok::Str(s)) => (LiteralType::String, s.clone()),
            _ => return Ok(None),
        };
        self.at += 1;
        let kind = if self.punct("^^") {
            let dpos = self.pos();
            let tag = match self.next() {
                Some(Tok::Name(p, local)) if p == "xsd" => local,
                Some(Tok::Iri(iri)) if iri.starts_with(XSD_NS) => iri[XSD_NS.len()..].to_string(),
                _ => return Err(SyntaxError::new(dpos, "expected an xsd datatype after ^^")),
            };
            datatype(&tag).ok_or_else(|| SyntaxError::new(dpos, format!("datatype xsd:{tag} not supported")))?
        } else {
            kind
        };
        Literal::new(kind, &text).map(Some).map_err(|e| SyntaxError::new(pos, e.to_string()))
    }

    fn term(&mut self, class_position: bool) -> Result<Term, SyntaxError> {
        let pos = self.pos();
        if let Some(Tok::Var(v)) = self.peek() {
            let v = v.clone();
            self.at += 1;
            return Ok(Term::Var(v));
        }
        if let Some(tok) = self.peek().cloned() {
            if let Some(id) = self.id(&tok, pos)? {
                self.at += 1;
                return Ok(if class_position { Term::Class(id) } else { Term::Entity(id) });
            }
        }
        if let Some(lit) = self.literal()? {
            return Ok(Term::Literal(lit));
        }
        Err(self.unexpected("a term"))
    }

    fn predicate(&mut self) -> Result<Predicate, SyntaxError> {
        let pos = self.pos();
        if self.keyword("a") {
            return Ok(Predicate::Type);
        }
        if let Some(tok) = self.peek().cloned() {
            if let Some(id) = self.id(&tok, pos)? {
                self.at += 1;
                return Ok(if id == TYPE_PREDICATE { Predicate::Type } else { Predicate::Relation(id) });
            }
        }
        Err(self.unexpected("a relation"))
    }

    fn comparator(&mut self) -> Option<Comparator> {
        let c = match self.peek() {
            Some(Tok::Punct("=")) => Comparator::Eq,
            Some(Tok::Punct("!=")) => Comparator::Ne,
            Some(Tok::Punct("<")) => Comparator::Lt,
            Some(Tok::Punct("<=")) => Comparator::Le,
            Some(Tok::Punct(">")) => Comparator::Gt,
            Some(Tok::Punct(">=")) => Comparator::Ge,
            _ => return None,
        };
        self.at += 1;
        Some(c)
    }

    fn filter(&mut self) -> Result<Filter, SyntaxError> {
        self.expect_punct("(")?;
        let filter = if let Some(Tok::Var(_)) = self.peek() {
            let var = self.var()?;
            let op = self.comparator().ok_or_else(|| self.unexpected("a comparison operator"))?;
            let value = self.literal()?.ok_or_else(|| self.unexpected("a literal"))?;
            Filter { var, op, value }
        } else {
            let value = self.literal()?.ok_or_else(|| self.unexpected("a variable or literal"))?;
            let op = self.comparator().ok_or_else(|| self.unexpected("a comparison operator"))?;
            let var = self.var()?;
            Filter { var, op: op.flipped(), value }
        };
        self.expect_punct(")")?;
        Ok(filter)
    }

    fn query(&mut self) -> Result<(CanonicalQuery, BTreeMap<String, String>), SyntaxError> {
        while self.keyword("PREFIX") {
            match (self.next(), self.next()) {
                (Some(Tok::Name(_, local)), Some(Tok::Iri(_))) if local.is_empty() => {}
                _ => return Err(SyntaxError::new(self.pos(), "malformed PREFIX declaration")),
            }
        }
        self.expect_keyword("SELECT")?;
        let mut distinct = self.keyword("DISTINCT");
        let mut aggregate = Aggregate::None;
        let proj_pos = self.pos();
        let projection = if self.punct("(") {
            self.expect_keyword("COUNT")?;
            self.expect_punct("(")?;
            distinct = self.keyword("DISTINCT");
            let v = self.var()?;
            self.expect_punct(")")?;
            self.expect_keyword("AS")?;
            self.var()?;
            self.expect_punct(")")?;
            aggregate = Aggregate::Count;
            v
        } else {
            self.var()?
        };
        self.keyword("WHERE");
        self.expect_punct("{")?;
        let mut patterns = Vec::new();
        let mut filters = Vec::new();
        loop {
            if self.punct("}") {
                break;
            }
            if self.punct(".") {
                continue;
            }
            if self.keyword("FILTER") {
                filters.push(self.filter()?);
                continue;
            }
            let subject = self.term(false)?;
            let predicate = self.predicate()?;
            let object = self.term(predicate == Predicate::Type)?;
            patterns.push(Pattern::new(subject, predicate, object));
            let filter_next = matches!(self.peek(), Some(Tok::Word(w)) if w.eq_ignore_ascii_case("FILTER"));
            if !filter_next && !matches!(self.peek(), Some(Tok::Punct(".")) | Some(Tok::Punct("}"))) {
                return Err(self.unexpected("'.' or '}'"));
            }
        }
        if self.peek().is_some() {
            return Err(self.unexpected("end of query"));
        }
        let _ = self.text;
        CanonicalQuery::new_with_names(&projection, distinct, patterns, filters, aggregate)
            .map_err(|e| SyntaxError::new(proj_pos, e.to_string()))
    }
}

fn is_keyword(w: &str) -> bool {
    ["select", "distinct", "where", "filter", "count", "as", "prefix", "a"].iter().any(|k| w.eq_ignore_ascii_case(k))
}

fn datatype(tag: &str) -> Option<LiteralType> {
    match tag {
        "integer" | "int" | "long" => Some(LiteralType::Integer),
        "float" | "double" | "decimal" => Some(LiteralType::Float),
        "string" => Some(LiteralType::String),
        "date" | "dateTime" | "gYear" | "gYearMonth" => Some(LiteralType::Date),
        _ => None,
    }
}

pub(super) fn parse_with_names(text: &str) -> Result<(CanonicalQuery, BTreeMap<String, String>), SyntaxError> {
    let toks = lex(text)?;
    Parser { toks, at: 0, end: text.len(), text }.query()
}

/// Parses the SPARQL subset into a canonical query.
pub fn parse_sparql(text: &str) -> Result<CanonicalQuery, SyntaxError> {
    parse_with_names(text).map(|(q, _)| q)
}

pub(crate) fn render_term(t: &Term) -> String {
    match t {
        Term::Var(v) => format!("?{v}"),
        Term::Entity(e) | Term::Class(e) => format!("ns:{e}"),
        Term::Literal(l) => render_literal(l),
    }
}

fn render_literal(l: &Literal) -> String {
    match l.kind() {
        LiteralType::Integer => l.lexical().to_string(),
        LiteralType::String => quote(l.lexical()),
        LiteralType::Float => format!("{}^^xsd:float", quote(l.lexical())),
        LiteralType::Date => format!("{}^^xsd:date", quote(l.lexical())),
    }
}

pub(super) fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub(crate) fn render_pattern(p: &Pattern) -> String {
    let pred = match &p.predicate {
        Predicate::Relation(r) => format!("ns:{r}"),
        Predicate::Type => format!("ns:{TYPE_PREDICATE}"),
    };
    format!("{} {pred} {}", render_term(&p.subject), render_term(&p.object))
}

/// Renders canonical SPARQL text. Argmax/argmin have no form in the subset.
pub fn render_sparql(q: &CanonicalQuery) -> Result<String, RenderError> {
    let distinct = if q.distinct() { "DISTINCT " } else { "" };
    let head = match q.aggregate() {
        Aggregate::None => format!("SELECT {distinct}?{}", q.projection()),
        Aggregate::Count => format!("SELECT (COUNT({distinct}?{}) AS ?count)", q.projection()),
        Aggregate::ArgMax(_) | Aggregate::ArgMin(_) => {
            return Err(RenderError::Unsupported("ARGMAX/ARGMIN in SPARQL".into()))
        }
    };
    let mut body: Vec<String> = q.patterns().iter().map(render_pattern).collect();
    for f in q.filters() {
        body.push(format!("FILTER (?{} {} {})", f.var, f.op.symbol(), render_literal(&f.value)));
    }
    Ok(format!("{head} WHERE {{ {} }}", body.join(" . ")))
}
