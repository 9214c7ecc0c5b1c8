//! Random knowledge bases and queries shared by the property suites.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use funkbqa::dataset::{DatasetSplit, QAExample};
use funkbqa::executor::execute;
use funkbqa::gateway::{Backend, Conversation, GatewayError, Role};
use funkbqa::kb::{Entity, Fact, KnowledgeBase, Range, RelationDef, SchemaClass};
use funkbqa::query::{
    render_sparql, Aggregate, CanonicalQuery, Comparator, Dialect, Filter, LogicalForm, Pattern, Predicate, Term,
};
use funkbqa::retrieval::LinkedEntity;
use funkbqa::value::{Literal, LiteralType, Value};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const CLASSES: usize = 4;

fn class_id(i: usize) -> String {
    format!("t.c{i}")
}

pub fn random_literal(rng: &mut ChaCha8Rng, kind: LiteralType) -> Literal {
    match kind {
        LiteralType::Integer => Literal::integer(rng.gen_range(0..6)),
        LiteralType::Float => Literal::float(f64::from(rng.gen_range(0..12)) / 2.0),
        LiteralType::String => Literal::string(["red", "green", "blue"][rng.gen_range(0..3)]),
        LiteralType::Date => Literal::new(LiteralType::Date, &format!("{}", 2000 + rng.gen_range(0..4))).unwrap(),
    }
}

/// A consistent knowledge base with at most `max_entities` entities.
pub fn random_kb(rng: &mut ChaCha8Rng, max_entities: usize) -> KnowledgeBase {
    let classes: Vec<SchemaClass> =
        (0..CLASSES).map(|i| SchemaClass { id: class_id(i), label: format!("class {i}") }).collect();
    let mut relations = Vec::new();
    for i in 0..5 {
        let d = rng.gen_range(0..CLASSES);
        relations.push(RelationDef {
            id: format!("t.c{d}.r{i}"),
            domain: class_id(d),
            range: Range::Class(class_id(rng.gen_range(0..CLASSES))),
        });
    }
    for (i, kind) in
        [LiteralType::Integer, LiteralType::Float, LiteralType::Date, LiteralType::String].into_iter().enumerate()
    {
        let d = rng.gen_range(0..CLASSES);
        relations.push(RelationDef {
            id: format!("t.c{d}.{kind}{i}"),
            domain: class_id(d),
            range: Range::Literal(kind),
        });
    }
    let n = rng.gen_range(1..=max_entities);
    let entities: Vec<Entity> = (0..n)
        .map(|i| {
            let mut cs = std::collections::BTreeSet::new();
            cs.insert(class_id(rng.gen_range(0..CLASSES)));
            if rng.gen_bool(0.3) {
                cs.insert(class_id(rng.gen_range(0..CLASSES)));
            }
            Entity { id: format!("m.e{i}"), label: format!("entity {i}"), classes: cs }
        })
        .collect();
    let mut facts = Vec::new();
    for _ in 0..n * 3 {
        let rel = relations.choose(rng).unwrap();
        let subjects: Vec<&Entity> = entities.iter().filter(|e| e.classes.contains(&rel.domain)).collect();
        let Some(s) = subjects.choose(rng) else { continue };
        let object = match &rel.range {
            Range::Class(c) => {
                let objs: Vec<&Entity> = entities.iter().filter(|e| e.classes.contains(c)).collect();
                let Some(o) = objs.choose(rng) else { continue };
                Value::entity(o.id.clone())
            }
            Range::Literal(k) => Value::Literal(random_literal(rng, *k)),
        };
        facts.push(Fact { subject: s.id.clone(), relation: rel.id.clone(), object });
    }
    KnowledgeBase::from_parts(classes, relations, entities, facts).unwrap()
}

const VARS: [&str; 3] = ["x", "y", "z"];

fn random_term(rng: &mut ChaCha8Rng, kb: &KnowledgeBase, nvars: usize) -> Term {
    if rng.gen_bool(0.75) {
        Term::var(VARS[rng.gen_range(0..nvars)])
    } else {
        let ents: Vec<&str> = kb.entities().map(|e| e.id.as_str()).collect();
        Term::Entity(ents.choose(rng).unwrap().to_string())
    }
}

/// A valid query of one to three patterns over `kb`'s vocabulary, with
/// optional filters and aggregate. Sometimes mentions an unknown id.
pub fn random_query(rng: &mut ChaCha8Rng, kb: &KnowledgeBase) -> CanonicalQuery {
    let rels: Vec<&RelationDef> = kb.relations().collect();
    let literal_rels: Vec<&str> =
        rels.iter().filter(|r| matches!(r.range, Range::Literal(_))).map(|r| r.id.as_str()).collect();
    loop {
        let nvars = rng.gen_range(1..=3);
        let npat = rng.gen_range(1..=3);
        let mut patterns = Vec::new();
        for i in 0..npat {
            let subject = if i == 0 { Term::var("x") } else { random_term(rng, kb, nvars) };
            if rng.gen_bool(0.2) {
                let c = class_id(rng.gen_range(0..CLASSES));
                let subject = if subject.as_var().is_some() { subject } else { Term::var("x") };
                patterns.push(Pattern::new(subject, Predicate::Type, Term::Class(c)));
                continue;
            }
            let rel = rels.choose(rng).unwrap();
            let object = match &rel.range {
                Range::Literal(k) if rng.gen_bool(0.3) => Term::Literal(random_literal(rng, *k)),
                _ => random_term(rng, kb, nvars),
            };
            let (subject, object) = if i > 0 && rng.gen_bool(0.3) && !matches!(object, Term::Literal(_)) {
                (object, subject)
            } else {
                (subject, object)
            };
            let id = if rng.gen_bool(0.03) { "t.unknown".to_string() } else { rel.id.clone() };
            patterns.push(Pattern::new(subject, Predicate::Relation(id), object));
        }
        let mut filters = Vec::new();
        if rng.gen_bool(0.3) {
            let kind =
                [LiteralType::Integer, LiteralType::Float, LiteralType::Date, LiteralType::String][rng.gen_range(0..4)];
            let op = [Comparator::Eq, Comparator::Ne, Comparator::Lt, Comparator::Le, Comparator::Gt, Comparator::Ge]
                [rng.gen_range(0..6)];
            filters.push(Filter {
                var: VARS[rng.gen_range(0..nvars)].to_string(),
                op,
                value: random_literal(rng, kind),
            });
        }
        let aggregate = match rng.gen_range(0..10) {
            0 => Aggregate::Count,
            1 | 2 => {
                let mut path = vec![literal_rels.choose(rng).unwrap().to_string()];
                if rng.gen_bool(0.3) {
                    path.insert(0, rels.choose(rng).unwrap().id.clone());
                }
                if rng.gen_bool(0.5) {
                    Aggregate::ArgMax(path)
                } else {
                    Aggregate::ArgMin(path)
                }
            }
            _ => Aggregate::None,
        };
        if let Ok(q) = CanonicalQuery::new("x", true, patterns, filters, aggregate) {
            return q;
        }
    }
}

/// `n` answerable questions over `kb` whose gold forms render as SPARQL and
/// execute non-empty; linked entities are the entities each form mentions.
pub fn synthetic_split(rng: &mut ChaCha8Rng, kb: &KnowledgeBase, n: usize) -> DatasetSplit {
    let mut examples = Vec::new();
    while examples.len() < n {
        let q = random_query(rng, kb);
        if !matches!(q.aggregate(), Aggregate::None) || execute(kb, &q).is_empty() {
            continue;
        }
        let Ok(lf) = LogicalForm::from_query(Dialect::Sparql, &q) else { continue };
        let linked =
            q.entities().into_iter().map(|id| LinkedEntity { mention: kb.label_of(&id).to_string(), id }).collect();
        let mut ex = QAExample::answerable(format!("[q{:03}] which one?", examples.len()), linked, lf, kb);
        ex.id = Some(format!("q{}", examples.len()));
        examples.push(ex);
    }
    DatasetSplit { name: "synthetic".into(), examples }
}

/// Deterministic stand-in for a generator. Generation turns cycle through a
/// per-question pool of replies; selection prompts get "1"; equivalence
/// prompts agree or disagree by prompt length; other prompts are echoed.
pub struct ScriptedBackend {
    pools: BTreeMap<String, Vec<String>>,
}

fn marker(text: &str) -> Option<&str> {
    let at = text.rfind("[q")?;
    text.get(at..at + 6)
}

impl ScriptedBackend {
    /// Pools mix each gold form with random forms over `kb`, NK and broken
    /// text.
    pub fn for_split(rng: &mut ChaCha8Rng, kb: &KnowledgeBase, split: &DatasetSplit) -> Self {
        let mut pools = BTreeMap::new();
        for ex in &split.examples {
            let mut pool = vec![ex.gold_lf.surface().to_string()];
            for _ in 0..rng.gen_range(1..=4) {
                pool.push(match rng.gen_range(0..6) {
                    0 => "NK".to_string(),
                    1 => "SELECT DISTINCT ?x WHERE { ?x".to_string(),
                    _ => loop {
                        let q = random_query(rng, kb);
                        if let Ok(text) = render_sparql(&q) {
                            break text;
                        }
                    },
                });
            }
            pool.shuffle(rng);
            pools.insert(marker(&ex.question).expect("marked question").to_string(), pool);
        }
        Self { pools }
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, conv: &Conversation) -> Result<String, GatewayError> {
        let opening = conv.messages().first().map_or("", |m| m.content.as_str());
        let last = conv.last_user().unwrap_or("");
        if opening.starts_with("Translate the following question") {
            let pool = marker(opening).and_then(|m| self.pools.get(m)).ok_or(GatewayError::EmptyConversation)?;
            let turn = conv.messages().iter().filter(|m| m.role == Role::User).count();
            return Ok(pool[(turn - 1) % pool.len()].clone());
        }
        if last.contains("orig_nl_qn") {
            return Ok("1".into());
        }
        if last.contains("Question originally asked") {
            return Ok(if last.len().is_multiple_of(2) {
                "Hence, they are same."
            } else {
                "Hence, they are different."
            }
            .into());
        }
        Ok(last.lines().last().unwrap_or("").to_string())
    }
}

/// Independent compatibility: two classes are compatible when they are equal
/// or some entity carries both.
fn cotyped(kb: &KnowledgeBase, a: &str, b: &str) -> bool {
    a == b || kb.entities().any(|e| e.classes.contains(a) && e.classes.contains(b))
}

pub struct V2aFixtures {
    pub compatible: Vec<String>,
    pub incompatible: Vec<String>,
}

/// Single-edge forms whose entity end carries the relation's class are
/// compatible; entities lacking it, and variables joining two relations
/// whose domains never co-occur, are not.
pub fn v2a_fixtures(kb: &KnowledgeBase) -> V2aFixtures {
    let mut out = V2aFixtures { compatible: Vec::new(), incompatible: Vec::new() };
    let class_rels: Vec<_> = kb.relations().filter(|r| matches!(r.range, Range::Class(_))).collect();
    for f in kb.facts() {
        let Some(o) = f.object.as_entity() else { continue };
        let def = kb.relation(&f.relation).unwrap();
        out.compatible.push(format!(
            "SELECT DISTINCT ?x WHERE {{ ?x ns:{} ns:{o} . ?x ns:type.object.type ns:{} }}",
            f.relation, def.domain
        ));
    }
    for e in kb.entities() {
        for r in &class_rels {
            let Range::Class(c) = &r.range else { unreachable!() };
            if !e.classes.contains(c) {
                out.incompatible.push(format!("SELECT DISTINCT ?x WHERE {{ ?x ns:{} ns:{} }}", r.id, e.id));
            }
        }
    }
    for a in &class_rels {
        for b in &class_rels {
            if a.id < b.id && !cotyped(kb, &a.domain, &b.domain) {
                out.incompatible.push(format!("SELECT DISTINCT ?x WHERE {{ ?x ns:{} ?y . ?x ns:{} ?z }}", a.id, b.id));
            }
        }
    }
    out
}

/// A form and, half the time, an equivalent rewrite of it in the other
/// dialect; otherwise an unrelated form, NK, or broken text.
pub fn random_pair(rng: &mut ChaCha8Rng, kb: &KnowledgeBase) -> (LogicalForm, LogicalForm) {
    let form = |rng: &mut ChaCha8Rng| match rng.gen_range(0..10) {
        0 => LogicalForm::Nk,
        1 => LogicalForm::from_text("SELECT DISTINCT ?x WHERE { ?x ns:"),
        _ => loop {
            let q = random_query(rng, kb);
            if let Ok(lf) = LogicalForm::from_query(Dialect::Sparql, &q) {
                break lf;
            }
        },
    };
    let a = form(rng);
    let b = match a.query() {
        Some(q) if rng.gen_bool(0.5) => LogicalForm::from_query(Dialect::Sexpr, q).unwrap_or_else(|_| a.clone()),
        _ => form(rng),
    };
    (a, b)
}
