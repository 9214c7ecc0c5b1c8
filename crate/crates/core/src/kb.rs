//! In-memory knowledge base: typed schema, entities, facts and the indexes
//! the executor joins against.
//!
//! A [`KnowledgeBase`] is validated once when it is built and never mutated
//! afterwards. [`KnowledgeBase::delete_elements`] returns a fresh value, which
//! is how unanswerability is injected.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::query::{Aggregate, CanonicalQuery, Pattern, Predicate, Term};
use crate::value::{LiteralType, Value};

/// Predicate id used by the surface syntaxes for instance-of assertions.
pub const TYPE_PREDICATE: &str = "type.object.type";

pub const SCHEMA_FILE: &str = "schema.json";
pub const DATA_FILE: &str = "data.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum KbError {
    #[error("{}:{line}: {message}", path.display())]
    Format { path: PathBuf, line: usize, message: String },
    #[error("dangling reference to {id}: {message}")]
    Referential { id: String, message: String },
    #[error("unknown {kind} id {id}")]
    UnknownId { kind: &'static str, id: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaClass {
    pub id: String,
    #[serde(default)]
    pub label: String,
}

/// Range of a relation: another class, or a literal datatype.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Range {
    Class(String),
    Literal(LiteralType),
}

impl Range {
    pub fn parse(text: &str) -> Self {
        match LiteralType::parse(text) {
            Some(t) => Range::Literal(t),
            None => Range::Class(text.to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            Range::Class(c) => c,
            Range::Literal(t) => t.as_str(),
        }
    }

    pub fn class(&self) -> Option<&str> {
        match self {
            Range::Class(c) => Some(c),
            Range::Literal(_) => None,
        }
    }
}

impl Serialize for Range {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Range {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(Range::parse(&s))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationDef {
    pub id: String,
    pub domain: String,
    pub range: Range,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    #[serde(default)]
    pub label: String,
    #[serde(default)]
    pub classes: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fact {
    pub subject: String,
    pub relation: String,
    pub object: Value,
}

/// Identifies one fact in a [`DeletionPlan`].
pub type FactKey = Fact;

impl Serialize for Fact {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        FactRecord::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Fact {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rec = FactRecord::deserialize(d)?;
        Fact::try_from(rec).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FactRecord {
    s: String,
    r: String,
    o: ObjectRecord,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum ObjectRecord {
    Entity {
        entity: String,
    },
    Literal {
        literal: serde_json::Value,
        #[serde(rename = "type")]
        kind: String,
    },
}

impl From<&Fact> for FactRecord {
    fn from(f: &Fact) -> Self {
        let o = match &f.object {
            Value::Entity(id) => ObjectRecord::Entity { entity: id.clone() },
            Value::Literal(l) => ObjectRecord::Literal {
                literal: serde_json::Value::String(l.lexical().to_string()),
                kind: l.kind().as_str().to_string(),
            },
        };
        FactRecord { s: f.subject.clone(), r: f.relation.clone(), o }
    }
}

impl TryFrom<FactRecord> for Fact {
    type Error = String;

    fn try_from(rec: FactRecord) -> Result<Self, Self::Error> {
        let object = match rec.o {
            ObjectRecord::Entity { entity } => Value::Entity(entity),
            ObjectRecord::Literal { literal, kind } => {
                let kind = LiteralType::parse(&kind).ok_or_else(|| format!("unknown literal type tag {kind:?}"))?;
                let text = match literal {
                    serde_json::Value::String(s) => s,
                    other => other.to_string(),
                };
                let lit = crate::value::Literal::new(kind, &text).map_err(|e| e.to_string())?;
                Value::Literal(lit)
            }
        };
        Ok(Fact { subject: rec.s, relation: rec.r, object })
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct SchemaFile {
    #[serde(default)]
    classes: Vec<SchemaClass>,
    #[serde(default)]
    relations: Vec<RelationDef>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum DataRecord {
    Fact(FactRecord),
    Entity(Entity),
}

/// Lists of ids to remove from a knowledge base.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeletionPlan {
    #[serde(default)]
    pub classes: Vec<String>,
    #[serde(default)]
    pub relations: Vec<String>,
    #[serde(default)]
    pub entities: Vec<String>,
    #[serde(default)]
    pub facts: Vec<FactKey>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl DeletionPlan {
    pub fn load(path: &Path) -> Result<Self, KbError> {
        let text = read(path)?;
        serde_json::from_str(&text).map_err(|e| KbError::Format {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty() && self.relations.is_empty() && self.entities.is_empty() && self.facts.is_empty()
    }

    /// The part of this plan whose ids still resolve in `kb`.
    pub fn restrict_to(&self, kb: &KnowledgeBase) -> DeletionPlan {
        DeletionPlan {
            classes: self.classes.iter().filter(|c| kb.has_class(c)).cloned().collect(),
            relations: self.relations.iter().filter(|r| kb.has_relation(r)).cloned().collect(),
            entities: self.entities.iter().filter(|e| kb.has_entity(e)).cloned().collect(),
            facts: self.facts.iter().filter(|f| kb.has_fact(f)).cloned().collect(),
            seed: self.seed,
        }
    }
}

/// Result of [`KnowledgeBase::lookup`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Element<'a> {
    Class(&'a SchemaClass),
    Relation(&'a RelationDef),
    Entity(&'a Entity),
    NotFound,
}

#[derive(Debug, Clone, Default)]
pub struct KnowledgeBase {
    classes: BTreeMap<String, SchemaClass>,
    relations: BTreeMap<String, RelationDef>,
    entities: BTreeMap<String, Entity>,
    facts: Vec<Fact>,
    by_subject: HashMap<String, Vec<usize>>,
    by_object: HashMap<Value, Vec<usize>>,
    by_relation: HashMap<String, Vec<usize>>,
    by_class: HashMap<String, Vec<String>>,
    cotyped: BTreeSet<(String, String)>,
}

impl PartialEq for KnowledgeBase {
    fn eq(&self, other: &Self) -> bool {
        self.classes == other.classes
            && self.relations == other.relations
            && self.entities == other.entities
            && self.facts == other.facts
            && self.cotyped == other.cotyped
    }
}

impl Eq for KnowledgeBase {}

/// Relation steps of a path; `true` marks a step taken backwards.
type Steps = Vec<(String, bool)>;

impl KnowledgeBase {
    /// Builds and validates a knowledge base. Duplicate facts collapse.
    pub fn from_parts(
        classes: Vec<SchemaClass>,
        relations: Vec<RelationDef>,
        entities: Vec<Entity>,
        facts: Vec<Fact>,
    ) -> Result<Self, KbError> {
        let kb = Self::assemble(classes, relations, entities, facts, None)?;
        kb.validate()?;
        Ok(kb)
    }

    fn assemble(
        classes: Vec<SchemaClass>,
        relations: Vec<RelationDef>,
        entities: Vec<Entity>,
        mut facts: Vec<Fact>,
        cotyped: Option<BTreeSet<(String, String)>>,
    ) -> Result<Self, KbError> {
        let mut kb = KnowledgeBase::default();
        for c in classes {
            if c.id.is_empty() {
                return Err(KbError::Referential { id: String::new(), message: "class id must be non-empty".into() });
            }
            if kb.classes.insert(c.id.clone(), c.clone()).is_some() {
                return Err(KbError::Referential { id: c.id, message: "duplicate class id".into() });
            }
        }
        for r in relations {
            if r.id.is_empty() || r.id == TYPE_PREDICATE {
                return Err(KbError::Referential { id: r.id, message: "invalid relation id".into() });
            }
            if kb.relations.insert(r.id.clone(), r.clone()).is_some() {
                return Err(KbError::Referential { id: r.id, message: "duplicate relation id".into() });
            }
        }
        for e in entities {
            if e.id.is_empty() {
                return Err(KbError::Referential { id: String::new(), message: "entity id must be non-empty".into() });
            }
            if kb.entities.insert(e.id.clone(), e.clone()).is_some() {
                return Err(KbError::Referential { id: e.id, message: "duplicate entity id".into() });
            }
        }
        facts.sort();
        facts.dedup();
        kb.facts = facts;
        kb.cotyped = cotyped.unwrap_or_else(|| {
            let mut pairs = BTreeSet::new();
            for e in kb.entities.values() {
                for a in &e.classes {
                    for b in &e.classes {
                        if a < b {
                            pairs.insert((a.clone(), b.clone()));
                        }
                    }
                }
            }
            pairs
        });
        kb.reindex();
        Ok(kb)
    }

    fn reindex(&mut self) {
        self.by_subject.clear();
        self.by_object.clear();
        self.by_relation.clear();
        self.by_class.clear();
        for (i, f) in self.facts.iter().enumerate() {
            self.by_subject.entry(f.subject.clone()).or_default().push(i);
            self.by_object.entry(f.object.clone()).or_default().push(i);
            self.by_relation.entry(f.relation.clone()).or_default().push(i);
        }
        for e in self.entities.values() {
            for c in &e.classes {
                self.by_class.entry(c.clone()).or_default().push(e.id.clone());
            }
        }
    }

    /// Full referential validation of schema and data.
    pub fn validate(&self) -> Result<(), KbError> {
        let dangling = |id: &str, message: String| KbError::Referential { id: id.to_string(), message };
        for r in self.relations.values() {
            if !self.classes.contains_key(&r.domain) {
                return Err(dangling(&r.domain, format!("domain of relation {}", r.id)));
            }
            if let Range::Class(c) = &r.range {
                if !self.classes.contains_key(c) {
                    return Err(dangling(c, format!("range of relation {}", r.id)));
                }
            }
        }
        for e in self.entities.values() {
            for c in &e.classes {
                if !self.classes.contains_key(c) {
                    return Err(dangling(c, format!("class of entity {}", e.id)));
                }
            }
        }
        for (a, b) in &self.cotyped {
            if !self.classes.contains_key(a) || !self.classes.contains_key(b) {
                return Err(dangling(a, "co-typing table out of sync".into()));
            }
        }
        for f in &self.facts {
            let Some(rel) = self.relations.get(&f.relation) else {
                return Err(dangling(&f.relation, format!("relation of fact {}", fact_text(f))));
            };
            let Some(subj) = self.entities.get(&f.subject) else {
                return Err(dangling(&f.subject, format!("subject of fact {}", fact_text(f))));
            };
            if !subj.classes.contains(&rel.domain) {
                return Err(dangling(&f.subject, format!("subject lacks domain class {} of {}", rel.domain, rel.id)));
            }
            match (&f.object, &rel.range) {
                (Value::Entity(o), Range::Class(c)) => {
                    let Some(obj) = self.entities.get(o) else {
                        return Err(dangling(o, format!("object of fact {}", fact_text(f))));
                    };
                    if !obj.classes.contains(c) {
                        return Err(dangling(o, format!("object lacks range class {c} of {}", rel.id)));
                    }
                }
                (Value::Literal(l), Range::Literal(t)) if l.kind() == *t => {}
                (obj, range) => {
                    return Err(dangling(
                        &f.relation,
                        format!("object {obj} inconsistent with range {}", range.as_str()),
                    ))
                }
            }
        }
        Ok(())
    }

    /// Loads a schema JSON file and a JSON Lines data file.
    pub fn load(schema_path: &Path, data_path: &Path) -> Result<Self, KbError> {
        let schema_text = read(schema_path)?;
        let schema: SchemaFile = serde_json::from_str(&schema_text).map_err(|e| KbError::Format {
            path: schema_path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        let file = fs::File::open(data_path).map_err(|source| KbError::Io { path: data_path.to_path_buf(), source })?;
        let mut entities = Vec::new();
        let mut facts = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| KbError::Io { path: data_path.to_path_buf(), source })?;
            if line.trim().is_empty() {
                continue;
            }
            let format_err = |message: String| KbError::Format { path: data_path.to_path_buf(), line: i + 1, message };
            let rec: DataRecord = serde_json::from_str(&line).map_err(|e| format_err(e.to_string()))?;
            match rec {
                DataRecord::Entity(e) => entities.push(e),
                DataRecord::Fact(f) => facts.push(Fact::try_from(f).map_err(format_err)?),
            }
        }
        Self::from_parts(schema.classes, schema.relations, entities, facts)
    }

    /// Loads `schema.json` and `data.jsonl` from a directory.
    pub fn load_dir(dir: &Path) -> Result<Self, KbError> {
        Self::load(&dir.join(SCHEMA_FILE), &dir.join(DATA_FILE))
    }

    /// Writes `schema.json` and `data.jsonl` into `dir`.
    pub fn save_dir(&self, dir: &Path) -> Result<(), KbError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| KbError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let schema = SchemaFile {
            classes: self.classes.values().cloned().collect(),
            relations: self.relations.values().cloned().collect(),
        };
        let schema_path = dir.join(SCHEMA_FILE);
        let mut text = serde_json::to_string_pretty(&schema).expect("schema serialises");
        text.push('\n');
        fs::write(&schema_path, text).map_err(io(&schema_path))?;
        let data_path = dir.join(DATA_FILE);
        let mut out = fs::File::create(&data_path).map_err(io(&data_path))?;
        for e in self.entities.values() {
            let line = serde_json::to_string(e).expect("entity serialises");
            writeln!(out, "{line}").map_err(io(&data_path))?;
        }
        for f in &self.facts {
            let line = serde_json::to_string(f).expect("fact serialises");
            writeln!(out, "{line}").map_err(io(&data_path))?;
        }
        Ok(())
    }

    /// Removes the planned elements, cascading so the result stays valid:
    /// a class takes its relations and type assertions with it, a relation
    /// its facts, an entity every fact that mentions it.
    pub fn delete_elements(&self, plan: &DeletionPlan) -> Result<Self, KbError> {
        for c in &plan.classes {
            if !self.has_class(c) {
                return Err(KbError::UnknownId { kind: "class", id: c.clone() });
            }
        }
        for r in &plan.relations {
            if !self.has_relation(r) {
                return Err(KbError::UnknownId { kind: "relation", id: r.clone() });
            }
        }
        for e in &plan.entities {
            if !self.has_entity(e) {
                return Err(KbError::UnknownId { kind: "entity", id: e.clone() });
            }
        }
        for f in &plan.facts {
            if !self.has_fact(f) {
                return Err(KbError::UnknownId { kind: "fact", id: fact_text(f) });
            }
        }
        let dead_classes: BTreeSet<&str> = plan.classes.iter().map(String::as_str).collect();
        let mut dead_relations: BTreeSet<&str> = plan.relations.iter().map(String::as_str).collect();
        for r in self.relations.values() {
            let range_dead = r.range.class().is_some_and(|c| dead_classes.contains(c));
            if dead_classes.contains(r.domain.as_str()) || range_dead {
                dead_relations.insert(&r.id);
            }
        }
        let dead_entities: BTreeSet<&str> = plan.entities.iter().map(String::as_str).collect();
        let dead_facts: BTreeSet<&Fact> = plan.facts.iter().collect();

        let classes = self.classes.values().filter(|c| !dead_classes.contains(c.id.as_str())).cloned().collect();
        let relations = self.relations.values().filter(|r| !dead_relations.contains(r.id.as_str())).cloned().collect();
        let entities = self
            .entities
            .values()
            .filter(|e| !dead_entities.contains(e.id.as_str()))
            .map(|e| Entity {
                classes: e.classes.iter().filter(|c| !dead_classes.contains(c.as_str())).cloned().collect(),
                ..e.clone()
            })
            .collect::<Vec<_>>();
        let facts: Vec<Fact> = self
            .facts
            .iter()
            .filter(|f| {
                !dead_facts.contains(f)
                    && !dead_relations.contains(f.relation.as_str())
                    && !dead_entities.contains(f.subject.as_str())
                    && !f.object.as_entity().is_some_and(|o| dead_entities.contains(o))
            })
            .cloned()
            .collect();
        // Facts whose endpoints lost a domain/range class through class
        // deletion have already gone with their relation.
        let cotyped = self
            .cotyped
            .iter()
            .filter(|(a, b)| !dead_classes.contains(a.as_str()) && !dead_classes.contains(b.as_str()))
            .cloned()
            .collect();
        let kb = Self::assemble(classes, relations, entities, facts, Some(cotyped))?;
        kb.validate()?;
        Ok(kb)
    }

    pub fn lookup(&self, id: &str) -> Element<'_> {
        if let Some(c) = self.classes.get(id) {
            Element::Class(c)
        } else if let Some(r) = self.relations.get(id) {
            Element::Relation(r)
        } else if let Some(e) = self.entities.get(id) {
            Element::Entity(e)
        } else {
            Element::NotFound
        }
    }

    pub fn has_class(&self, id: &str) -> bool {
        self.classes.contains_key(id)
    }

    pub fn has_relation(&self, id: &str) -> bool {
        self.relations.contains_key(id)
    }

    pub fn has_entity(&self, id: &str) -> bool {
        self.entities.contains_key(id)
    }

    pub fn has_fact(&self, fact: &Fact) -> bool {
        self.facts.binary_search(fact).is_ok()
    }

    pub fn class(&self, id: &str) -> Option<&SchemaClass> {
        self.classes.get(id)
    }

    pub fn relation(&self, id: &str) -> Option<&RelationDef> {
        self.relations.get(id)
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.get(id)
    }

    /// Classes of an entity; `None` when the entity is absent.
    pub fn entity_classes(&self, id: &str) -> Option<&BTreeSet<String>> {
        self.entities.get(id).map(|e| &e.classes)
    }

    /// Display label of an entity, falling back to its id.
    pub fn label_of<'a>(&'a self, id: &'a str) -> &'a str {
        match self.entities.get(id) {
            Some(e) if !e.label.is_empty() => &e.label,
            _ => id,
        }
    }

    pub fn classes(&self) -> impl Iterator<Item = &SchemaClass> {
        self.classes.values()
    }

    pub fn relations(&self) -> impl Iterator<Item = &RelationDef> {
        self.relations.values()
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn facts_with_subject(&self, id: &str) -> impl Iterator<Item = &Fact> {
        self.indexed(self.by_subject.get(id))
    }

    pub fn facts_with_object(&self, value: &Value) -> impl Iterator<Item = &Fact> {
        self.indexed(self.by_object.get(value))
    }

    pub fn facts_with_relation(&self, id: &str) -> impl Iterator<Item = &Fact> {
        self.indexed(self.by_relation.get(id))
    }

    pub fn instances_of(&self, class: &str) -> impl Iterator<Item = &str> {
        self.by_class.get(class).into_iter().flatten().map(String::as_str)
    }

    fn indexed<'a>(&'a self, ids: Option<&'a Vec<usize>>) -> impl Iterator<Item = &'a Fact> {
        ids.into_iter().flatten().map(move |&i| &self.facts[i])
    }

    /// True when some entity carried both classes at load time, or they are
    /// the same class.
    pub fn classes_compatible(&self, a: &str, b: &str) -> bool {
        if a == b {
            return true;
        }
        let key = if a < b { (a.to_string(), b.to_string()) } else { (b.to_string(), a.to_string()) };
        self.cotyped.contains(&key)
    }

    /// Path queries rooted at `entity`: chains of up to `max_len` relation
    /// hops (either direction) that reach at least one value. Class-ranged
    /// endpoints carry the range type assertion. Ordered by relation-id
    /// sequence.
    pub fn paths_from_entity(&self, entity: &str, max_len: usize) -> Result<Vec<CanonicalQuery>, KbError> {
        if !self.has_entity(entity) {
            return Err(KbError::UnknownId { kind: "entity", id: entity.to_string() });
        }
        let root = Value::entity(entity);
        let mut found: BTreeSet<Steps> = BTreeSet::new();
        let mut frontier: Vec<(Steps, BTreeSet<Value>)> = vec![(Vec::new(), BTreeSet::from([root]))];
        for _ in 0..max_len.max(1) {
            let mut next = Vec::new();
            for (steps, nodes) in &frontier {
                let mut reach: BTreeMap<(String, bool), BTreeSet<Value>> = BTreeMap::new();
                for node in nodes {
                    if let Value::Entity(id) = node {
                        for f in self.facts_with_subject(id) {
                            reach.entry((f.relation.clone(), false)).or_default().insert(f.object.clone());
                        }
                    }
                    for f in self.facts_with_object(node) {
                        reach.entry((f.relation.clone(), true)).or_default().insert(Value::entity(&f.subject));
                    }
                }
                for (step, targets) in reach {
                    let mut path = steps.clone();
                    path.push(step);
                    found.insert(path.clone());
                    next.push((path, targets));
                }
            }
            frontier = next;
        }
        let mut out = Vec::new();
        for steps in found {
            out.push(self.path_query(entity, &steps));
        }
        Ok(out)
    }

    fn path_query(&self, root: &str, steps: &[(String, bool)]) -> CanonicalQuery {
        let mut patterns = Vec::new();
        let mut prev = Term::Entity(root.to_string());
        let last = steps.len() - 1;
        let mut end_class = None;
        for (i, (rel, inverse)) in steps.iter().enumerate() {
            let var = if i == last { "x".to_string() } else { format!("x{i}") };
            let next = Term::Var(var);
            let def = self.relations.get(rel).expect("fact relations exist");
            let (s, o) = if *inverse {
                end_class = Some(def.domain.clone());
                (next.clone(), prev)
            } else {
                end_class = def.range.class().map(str::to_string);
                (prev, next.clone())
            };
            patterns.push(Pattern::new(s, Predicate::Relation(rel.clone()), o));
            prev = next;
        }
        if let Some(c) = end_class {
            patterns.push(Pattern::new(prev, Predicate::Type, Term::Class(c)));
        }
        CanonicalQuery::new("x", true, patterns, Vec::new(), Aggregate::None).expect("path queries are well formed")
    }
}

fn fact_text(f: &Fact) -> String {
    format!("({} {} {})", f.subject, f.relation, f.object)
}

fn read(path: &Path) -> Result<String, KbError> {
    fs::read_to_string(path).map_err(|source| KbError::Io { path: path.to_path_buf(), source })
}
