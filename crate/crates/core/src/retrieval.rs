//! Retrieval context for generation: candidate classes, relations and
//! entity-rooted paths.

use std::collections::BTreeSet;
use std::io::Write;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use crate::executor::execute;
use crate::kb::{KnowledgeBase, Range};
use crate::query::{parse_sparql, render_sparql, CanonicalQuery};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkedEntity {
    pub mention: String,
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationEntry {
    pub id: String,
    pub signature: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalContext {
    pub classes: Vec<String>,
    pub relations: Vec<RelationEntry>,
    #[serde(with = "sparql_list")]
    pub paths: Vec<CanonicalQuery>,
    pub linked_entities: Vec<LinkedEntity>,
}

mod sparql_list {
    use super::*;

    pub fn serialize<S: serde::Serializer>(qs: &[CanonicalQuery], s: S) -> Result<S::Ok, S::Error> {
        let texts =
            qs.iter().map(|q| render_sparql(q).map_err(serde::ser::Error::custom)).collect::<Result<Vec<_>, _>>()?;
        texts.serialize(s)
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<CanonicalQuery>, D::Error> {
        let texts = Vec::<String>::deserialize(d)?;
        texts.iter().map(|t| parse_sparql(t).map_err(serde::de::Error::custom)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Caps {
    pub classes: usize,
    pub relations: usize,
    pub paths: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Self { classes: 10, relations: 10, paths: 5 }
    }
}

impl RetrievalContext {
    pub fn capped(mut self, caps: Caps) -> Self {
        self.classes.truncate(caps.classes);
        self.relations.truncate(caps.relations);
        self.paths.truncate(caps.paths);
        self
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("retriever command {command:?}: {message}")]
    Subprocess { command: String, message: String },
}

pub trait Retriever: Send + Sync {
    fn retrieve(
        &self,
        kb: &KnowledgeBase,
        question: &str,
        linked: &[LinkedEntity],
    ) -> Result<RetrievalContext, RetrievalError>;
}

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "of", "in", "on", "at", "to", "for", "by", "with", "and", "or", "is", "are", "was", "were", "be",
    "been", "what", "which", "who", "whom", "whose", "where", "when", "how", "did", "do", "does", "that", "this",
    "these", "those", "from", "as", "it", "its", "into", "has", "have", "had", "same",
];

fn normalize(token: &str) -> Option<String> {
    let t = token.to_lowercase();
    if t.is_empty() || STOPWORDS.contains(&t.as_str()) {
        return None;
    }
    Some(match t.strip_suffix('s') {
        Some(stem) if t.chars().count() > 3 => stem.to_string(),
        _ => t,
    })
}

/// Content tokens: split on non-alphanumerics (which covers `.` and `_` in
/// ids), stopwords dropped, a plural `s` stripped.
pub fn tokens(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter_map(normalize).collect()
}

fn trigrams(text: &str) -> BTreeSet<String> {
    let cleaned: String = text.to_lowercase().chars().map(|c| if c.is_alphanumeric() { c } else { ' ' }).collect();
    let padded: Vec<char> = format!(" {} ", cleaned.split_whitespace().collect::<Vec<_>>().join(" ")).chars().collect();
    padded.windows(3).map(|w| w.iter().collect()).collect()
}

/// Token overlap count plus trigram Jaccard similarity.
pub fn lexical_score(question: &str, item: &str) -> (usize, f64) {
    let overlap = tokens(question).intersection(&tokens(item)).count();
    let (a, b) = (trigrams(question), trigrams(item));
    let union = a.union(&b).count();
    let jac = if union == 0 { 0.0 } else { a.intersection(&b).count() as f64 / union as f64 };
    (overlap, jac)
}

fn rank(question: &str, items: impl Iterator<Item = (String, String)>, cap: usize) -> Vec<String> {
    let mut scored: Vec<(f64, String)> = items
        .filter_map(|(id, text)| {
            let (overlap, jac) = lexical_score(question, &text);
            (overlap >= 1).then_some((overlap as f64 + jac, id))
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    scored.into_iter().take(cap).map(|(_, id)| id).collect()
}

pub fn relation_signature(kb: &KnowledgeBase, id: &str) -> Option<String> {
    let def = kb.relation(id)?;
    let range = match &def.range {
        Range::Class(c) => c.as_str(),
        Range::Literal(t) => t.as_str(),
    };
    Some(format!("{id} (type:{} R type:{range})", def.domain))
}

fn item_text(id: &str, label: &str) -> String {
    format!("{label} {id}")
}

/// Lexical baseline retriever.
#[derive(Debug, Clone, Default)]
pub struct LexicalRetriever {
    pub caps: Caps,
    pub max_path_len: usize,
}

impl LexicalRetriever {
    pub fn new(caps: Caps) -> Self {
        Self { caps, max_path_len: 2 }
    }
}

pub fn retrieve_lexical(
    kb: &KnowledgeBase,
    question: &str,
    linked: &[LinkedEntity],
    caps: Caps,
    max_path_len: usize,
) -> RetrievalContext {
    let classes = rank(question, kb.classes().map(|c| (c.id.clone(), item_text(&c.id, &c.label))), caps.classes);
    let relations = rank(question, kb.relations().map(|r| (r.id.clone(), item_text(&r.id, ""))), caps.relations)
        .into_iter()
        .map(|id| RelationEntry { signature: relation_signature(kb, &id).expect("ranked from kb"), id })
        .collect();
    let rel_score = |r: &str| {
        let (o, j) = lexical_score(question, r);
        o as f64 + j
    };
    let mut paths: Vec<(f64, String, CanonicalQuery)> = Vec::new();
    let mut seen = BTreeSet::new();
    for le in linked {
        let Ok(found) = kb.paths_from_entity(&le.id, max_path_len.max(1)) else { continue };
        for q in found {
            if !seen.insert(q.clone()) || execute(kb, &q).is_empty() {
                continue;
            }
            let score: f64 = q.relations().iter().map(|r| rel_score(r)).sum();
            let text = render_sparql(&q).unwrap_or_default();
            paths.push((score, text, q));
        }
    }
    paths.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    RetrievalContext {
        classes,
        relations,
        paths: paths.into_iter().take(caps.paths).map(|(_, _, q)| q).collect(),
        linked_entities: linked.iter().filter(|l| kb.has_entity(&l.id)).cloned().collect(),
    }
}

impl Retriever for LexicalRetriever {
    fn retrieve(
        &self,
        kb: &KnowledgeBase,
        question: &str,
        linked: &[LinkedEntity],
    ) -> Result<RetrievalContext, RetrievalError> {
        Ok(retrieve_lexical(kb, question, linked, self.caps, self.max_path_len))
    }
}

/// Per-field union in retriever order, first occurrence kept, then capped.
pub fn retrieve_union(
    retrievers: &[&dyn Retriever],
    kb: &KnowledgeBase,
    question: &str,
    linked: &[LinkedEntity],
    caps: Caps,
) -> Result<RetrievalContext, RetrievalError> {
    let mut out = RetrievalContext::default();
    for r in retrievers {
        let ctx = r.retrieve(kb, question, linked)?;
        for c in ctx.classes {
            if !out.classes.contains(&c) {
                out.classes.push(c);
            }
        }
        for rel in ctx.relations {
            if !out.relations.iter().any(|x| x.id == rel.id) {
                out.relations.push(rel);
            }
        }
        for p in ctx.paths {
            if !out.paths.contains(&p) {
                out.paths.push(p);
            }
        }
        for l in ctx.linked_entities {
            if !out.linked_entities.contains(&l) {
                out.linked_entities.push(l);
            }
        }
    }
    Ok(out.capped(caps))
}

/// External retriever: runs a command, writes `{question, linked_entities}`
/// as JSON to its stdin and reads a context JSON from its stdout. Ids the
/// KB lacks and paths that execute empty are dropped.
#[derive(Debug, Clone)]
pub struct SubprocessRetriever {
    pub program: String,
    pub args: Vec<String>,
    pub caps: Caps,
}

impl SubprocessRetriever {
    fn err(&self, message: impl Into<String>) -> RetrievalError {
        RetrievalError::Subprocess { command: self.program.clone(), message: message.into() }
    }
}

impl Retriever for SubprocessRetriever {
    fn retrieve(
        &self,
        kb: &KnowledgeBase,
        question: &str,
        linked: &[LinkedEntity],
    ) -> Result<RetrievalContext, RetrievalError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| self.err(e.to_string()))?;
        let input = serde_json::json!({ "question": question, "linked_entities": linked });
        child
            .stdin
            .take()
            .expect("piped stdin")
            .write_all(input.to_string().as_bytes())
            .map_err(|e| self.err(e.to_string()))?;
        let output = child.wait_with_output().map_err(|e| self.err(e.to_string()))?;
        if !output.status.success() {
            return Err(self.err(format!(
                "exited with {}: {}",
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        let mut ctx: RetrievalContext =
            serde_json::from_slice(&output.stdout).map_err(|e| self.err(format!("bad output: {e}")))?;
        ctx.classes.retain(|c| kb.has_class(c));
        ctx.relations.retain(|r| kb.has_relation(&r.id));
        ctx.paths.retain(|p| {
            p.relations().iter().all(|r| kb.has_relation(r))
                && p.classes().iter().all(|c| kb.has_class(c))
                && p.entities().iter().all(|e| kb.has_entity(e))
                && !execute(kb, p).is_empty()
        });
        ctx.linked_entities.retain(|l| kb.has_entity(&l.id));
        Ok(ctx.capped(self.caps))
    }
}
