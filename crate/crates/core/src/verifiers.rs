//! Strong and weak verifiers over a candidate logical form.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::executor::execute;
use crate::gateway::{Conversation, GatewayError, GenerationGateway, TemplateError, Templates};
use crate::kb::{KnowledgeBase, Range, TYPE_PREDICATE};
use crate::query::{reply_body, LogicalForm, ParsedForm, Predicate, Term};
use crate::value::{AnswerSet, LiteralType, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VerifierId {
    V1,
    V2a,
    V2b,
    V2c,
    V3,
    V4a,
    #[serde(rename = "V4a-int")]
    V4aInt,
    V4b,
}

impl fmt::Display for VerifierId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerifierId::V1 => "V1",
            VerifierId::V2a => "V2a",
            VerifierId::V2b => "V2b",
            VerifierId::V2c => "V2c",
            VerifierId::V3 => "V3",
            VerifierId::V4a => "V4a",
            VerifierId::V4aInt => "V4a-int",
            VerifierId::V4b => "V4b",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strength {
    Strong,
    Weak,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub verifier: VerifierId,
    pub strength: Strength,
    pub passed: bool,
    /// Empty when passed.
    pub feedback: String,
    /// Back-translated question (V3 only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
}

impl Verdict {
    fn pass(verifier: VerifierId, strength: Strength) -> Self {
        Self { verifier, strength, passed: true, feedback: String::new(), payload: None }
    }

    fn fail(verifier: VerifierId, strength: Strength, feedback: String) -> Self {
        debug_assert!(!feedback.is_empty());
        Self { verifier, strength, passed: false, feedback, payload: None }
    }

    fn with_strength(mut self, s: Strength) -> Self {
        self.strength = s;
        self
    }
}

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

/// Message fed back when the generator answers NK mid-loop.
pub const NK_NUDGE: &str = "NK is not an executable query. Return your best executable sparql query using the candidate entities, relations and entity types provided earlier.";

/// Which verifiers are strong and weak, and the answer checks' settings.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifierSuite {
    /// Moves V4b from the weak to the strong set.
    pub answerable_mode: bool,
    /// Classes whose instances are connector nodes, never final answers.
    pub mediator_classes: BTreeSet<String>,
}

impl VerifierSuite {
    pub fn strong(&self) -> Vec<VerifierId> {
        use VerifierId::*;
        let mut v = vec![V1, V2a, V2b, V2c, V4a, V4aInt];
        if self.answerable_mode {
            v.push(V4b);
        }
        v
    }

    pub fn weak(&self) -> Vec<VerifierId> {
        use VerifierId::*;
        if self.answerable_mode {
            vec![V3]
        } else {
            vec![V3, V4b]
        }
    }

    pub fn strength(&self, id: VerifierId) -> Strength {
        if self.strong().contains(&id) {
            Strength::Strong
        } else {
            Strength::Weak
        }
    }

    /// Runs the strong verifiers in order, stopping at the first failure,
    /// then (if all passed) every weak verifier.
    pub fn verify(
        &self,
        lf: &LogicalForm,
        question: &str,
        question_entities: &BTreeSet<String>,
        kb: &KnowledgeBase,
        gw: &GenerationGateway,
        templates: &Templates,
    ) -> Result<VerifyReport, VerifyError> {
        let mut report = VerifyReport::default();
        let v1 = v1_syntax(lf, templates)?;
        let passed = v1.passed;
        report.strong.push(v1);
        let LogicalForm::Parsed(pf) = lf else { return Ok(report) };
        if !passed {
            return Ok(report);
        }
        for check in [v2a_type_compatibility, v2b_schema_presence, v2c_literal_casting] {
            let v = check(pf, kb, templates)?;
            let ok = v.passed;
            report.strong.push(v);
            if !ok {
                return Ok(report);
            }
        }
        let (v4a, v4a_int, v4b, answer) = v4_answer_consistency(pf, kb, question_entities, self, templates)?;
        report.answer = Some(answer);
        let mut strong_answer = vec![v4a, v4a_int];
        let mut weak_v4b = None;
        if self.answerable_mode {
            strong_answer.push(v4b);
        } else {
            weak_v4b = Some(v4b);
        }
        for v in strong_answer {
            let ok = v.passed;
            report.strong.push(v);
            if !ok {
                return Ok(report);
            }
        }
        let v3 = v3_question_lf_agreement(pf, question, gw, templates)?.with_strength(self.strength(VerifierId::V3));
        report.back_translation = v3.payload.clone();
        report.weak.push(v3);
        report.weak.extend(weak_v4b);
        Ok(report)
    }
}

/// Verdicts of one verification round.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    /// In order, ending at the first failure.
    pub strong: Vec<Verdict>,
    /// Empty unless every strong verifier passed.
    pub weak: Vec<Verdict>,
    /// Executed answer, once execution ran.
    pub answer: Option<AnswerSet>,
    pub back_translation: Option<String>,
}

impl VerifyReport {
    pub fn strong_passed(&self) -> bool {
        self.answer.is_some() && self.strong.iter().all(|v| v.passed)
    }

    pub fn weak_passed(&self) -> usize {
        self.weak.iter().filter(|v| v.passed).count()
    }

    pub fn all_passed(&self) -> bool {
        self.strong_passed() && self.weak.iter().all(|v| v.passed)
    }

    /// Feedback of every failed verdict, in order.
    pub fn feedback(&self) -> Vec<&str> {
        self.strong.iter().chain(&self.weak).filter(|v| !v.passed).map(|v| v.feedback.as_str()).collect()
    }
}

fn py_list<S: AsRef<str>>(items: &[S]) -> String {
    let quoted: Vec<String> = items.iter().map(|s| format!("'{}'", s.as_ref())).collect();
    format!("[{}]", quoted.join(", "))
}

fn kb_feedback(templates: &Templates, issue: &str) -> Result<String, TemplateError> {
    templates.render("fb-kb-inconsistency", &[("issue", issue)])
}

pub fn v1_syntax(lf: &LogicalForm, templates: &Templates) -> Result<Verdict, TemplateError> {
    let s = Strength::Strong;
    Ok(match lf {
        LogicalForm::Parsed(_) => Verdict::pass(VerifierId::V1, s),
        LogicalForm::Nk => Verdict::fail(
            VerifierId::V1,
            s,
            templates.render("fb-syntax", &[("sparql", crate::query::NK), ("error", NK_NUDGE)])?,
        ),
        LogicalForm::Malformed(m) => Verdict::fail(
            VerifierId::V1,
            s,
            templates.render("fb-syntax", &[("sparql", &m.surface), ("error", &m.error.message)])?,
        ),
    })
}

/// What a relation end or type assertion requires of a term.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Need {
    Class(String),
    Literal(LiteralType),
}

impl Need {
    fn name(&self) -> &str {
        match self {
            Need::Class(c) => c,
            Need::Literal(t) => t.as_str(),
        }
    }
}

fn compatible(kb: &KnowledgeBase, a: &Need, b: &Need) -> bool {
    match (a, b) {
        (Need::Class(x), Need::Class(y)) => kb.classes_compatible(x, y),
        (Need::Literal(x), Need::Literal(y)) => x == y || (x.is_numeric() && y.is_numeric()),
        _ => false,
    }
}

/// Constraints incident on `term`, labelled as in feedback text. References
/// the KB lacks are skipped.
fn needs(pf: &ParsedForm, kb: &KnowledgeBase, term: &Term) -> Vec<(String, Need)> {
    let mut out: Vec<(String, Need)> = Vec::new();
    for p in pf.query.patterns() {
        let need = match &p.predicate {
            Predicate::Type => match &p.object {
                Term::Class(c) if &p.subject == term && kb.has_class(c) => {
                    Some((format!("{TYPE_PREDICATE} {c}"), Need::Class(c.clone())))
                }
                _ => None,
            },
            Predicate::Relation(r) => kb.relation(r).and_then(|def| {
                if &p.subject == term {
                    Some((r.clone(), Need::Class(def.domain.clone())))
                } else if &p.object == term {
                    Some((
                        r.clone(),
                        match &def.range {
                            Range::Class(c) => Need::Class(c.clone()),
                            Range::Literal(t) => Need::Literal(*t),
                        },
                    ))
                } else {
                    None
                }
            }),
        };
        if let Some(n) = need {
            if !out.contains(&n) {
                out.push(n);
            }
        }
    }
    out
}

/// Fails on the first term whose constraints conflict: entity terms
/// first, then variables.
pub fn v2a_type_compatibility(
    pf: &ParsedForm,
    kb: &KnowledgeBase,
    templates: &Templates,
) -> Result<Verdict, TemplateError> {
    let id = VerifierId::V2a;
    let mut seen = BTreeSet::new();
    for p in pf.query.patterns() {
        for t in [&p.subject, &p.object] {
            let Term::Entity(e) = t else { continue };
            if !seen.insert(e.clone()) {
                continue;
            }
            let Some(classes) = kb.entity_classes(e) else { continue };
            let missing: Vec<(String, Need)> = needs(pf, kb, t)
                .into_iter()
                .filter(|(_, n)| match n {
                    Need::Class(c) => !classes.contains(c),
                    Need::Literal(_) => true,
                })
                .collect();
            if !missing.is_empty() {
                let labels: Vec<&str> = missing.iter().map(|(l, _)| l.as_str()).collect();
                let names: Vec<&str> = missing.iter().map(|(_, n)| n.name()).collect();
                let issue = format!(
                    "The types of relations don't match for entity {e} in the query. The assigned relation types by {} are {}. These types are not associated with this entity in the KB.",
                    py_list(&labels),
                    py_list(&names)
                );
                return Ok(Verdict::fail(id, Strength::Strong, kb_feedback(templates, &issue)?));
            }
        }
    }
    for var in pf.query.variables() {
        let ns = needs(pf, kb, &Term::var(&var));
        let conflict = ns.iter().enumerate().any(|(i, (_, a))| ns[i + 1..].iter().any(|(_, b)| !compatible(kb, a, b)));
        if conflict {
            let labels: Vec<&str> = ns.iter().map(|(l, _)| l.as_str()).collect();
            let names: Vec<&str> = ns.iter().map(|(_, n)| n.name()).collect();
            let issue = format!(
                "The types of relations don't match for variable ?{} in the query. The assigned relation types by {} are {}. These types are mutually incompatible...",
                pf.surface_var(&var),
                py_list(&labels),
                py_list(&names)
            );
            return Ok(Verdict::fail(id, Strength::Strong, kb_feedback(templates, &issue)?));
        }
    }
    Ok(Verdict::pass(id, Strength::Strong))
}

/// Ids referenced by the form that the KB lacks, as (classes, relations,
/// entities).
pub fn absent_ids(pf: &ParsedForm, kb: &KnowledgeBase) -> (Vec<String>, Vec<String>, Vec<String>) {
    let q = &pf.query;
    (
        q.classes().into_iter().filter(|c| !kb.has_class(c)).collect(),
        q.relations().into_iter().filter(|r| !kb.has_relation(r)).collect(),
        q.entities().into_iter().filter(|e| !kb.has_entity(e)).collect(),
    )
}

pub fn v2b_schema_presence(
    pf: &ParsedForm,
    kb: &KnowledgeBase,
    templates: &Templates,
) -> Result<Verdict, TemplateError> {
    let id = VerifierId::V2b;
    let (classes, relations, entities) = absent_ids(pf, kb);
    let mut parts = Vec::new();
    for (kind, ids) in [("classes", &classes), ("relations", &relations), ("entities", &entities)] {
        if !ids.is_empty() {
            parts.push(format!("The {kind} {} are not present in the KB.", py_list(ids)));
        }
    }
    if parts.is_empty() {
        Ok(Verdict::pass(id, Strength::Strong))
    } else {
        Ok(Verdict::fail(id, Strength::Strong, kb_feedback(templates, &parts.join(" "))?))
    }
}

pub fn v2c_literal_casting(
    pf: &ParsedForm,
    kb: &KnowledgeBase,
    templates: &Templates,
) -> Result<Verdict, TemplateError> {
    let id = VerifierId::V2c;
    let q = &pf.query;
    let mut issues = Vec::new();
    let mut check = |lit: &crate::value::Literal, rel: &str| {
        let Some(def) = kb.relation(rel) else { return };
        match &def.range {
            Range::Literal(t) if *t != lit.kind() => issues.push(format!(
                "The literal {lit} used with relation {rel} is not correctly type cast. Values of {rel} are of type {t}; cast the literal as {t}, for example \"{}\"^^xsd:{t}.",
                lit.lexical()
            )),
            Range::Class(c) => issues.push(format!(
                "The literal {lit} is used with relation {rel}, whose values are entities of class {c}."
            )),
            Range::Literal(_) => {}
        }
    };
    for p in q.patterns() {
        if let (Predicate::Relation(r), Term::Literal(l)) = (&p.predicate, &p.object) {
            check(l, r);
        }
    }
    for f in q.filters() {
        for p in q.patterns() {
            if let Predicate::Relation(r) = &p.predicate {
                if p.object == Term::var(&f.var) {
                    check(&f.value, r);
                }
            }
        }
    }
    issues.dedup();
    if issues.is_empty() {
        Ok(Verdict::pass(id, Strength::Strong))
    } else {
        Ok(Verdict::fail(id, Strength::Strong, kb_feedback(templates, &issues.join(" "))?))
    }
}

/// First non-empty line of a reply, without surrounding quotes.
fn first_line(reply: &str) -> String {
    reply.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("").trim_matches('"').to_string()
}

/// Whether an equivalence explanation concludes the two questions match.
/// The last verdict phrase wins; a reply with neither counts as different.
pub fn equivalence_says_same(reply: &str) -> bool {
    let same = reply.rfind("Hence, they are same");
    let diff = reply.rfind("Hence, they are different");
    match (same, diff) {
        (Some(s), Some(d)) => s > d,
        (Some(_), None) => true,
        _ => false,
    }
}

pub fn v3_question_lf_agreement(
    pf: &ParsedForm,
    question: &str,
    gw: &GenerationGateway,
    templates: &Templates,
) -> Result<Verdict, VerifyError> {
    let id = VerifierId::V3;
    let naturalized =
        gw.complete(&Conversation::user(templates.render("v3-naturalize", &[("sparql", &pf.surface)])?))?;
    let naturalized = reply_body(&naturalized).to_string();
    let back = gw.complete(&Conversation::user(templates.render("v3-backtranslate", &[("sparql", &naturalized)])?))?;
    let back = first_line(&back);
    let same = back == question || {
        let reply = gw.complete(&Conversation::user(
            templates.render("v3-equivalence", &[("back_translation", &back), ("question", question)])?,
        ))?;
        equivalence_says_same(&reply)
    };
    let mut v = if same {
        Verdict::pass(id, Strength::Weak)
    } else {
        Verdict::fail(
            id,
            Strength::Weak,
            templates.render("fb-qlf-disagreement", &[("back_translation", &back), ("question", question)])?,
        )
    };
    v.payload = Some(back);
    Ok(v)
}

/// Executes the form and applies the answer checks: V4a (answer contains a
/// question entity), V4a-int (answer is only mediator nodes) and V4b
/// (empty answer). V4b's strength follows the suite's mode.
pub fn v4_answer_consistency(
    pf: &ParsedForm,
    kb: &KnowledgeBase,
    question_entities: &BTreeSet<String>,
    suite: &VerifierSuite,
    templates: &Templates,
) -> Result<(Verdict, Verdict, Verdict, AnswerSet), TemplateError> {
    let answer = execute(kb, &pf.query);
    let overlap: Vec<&str> =
        answer.iter().filter_map(Value::as_entity).filter(|e| question_entities.contains(*e)).collect();
    let v4a = if overlap.is_empty() {
        Verdict::pass(VerifierId::V4a, Strength::Strong)
    } else {
        let labels: Vec<&str> = overlap.iter().map(|e| kb.label_of(e)).collect();
        Verdict::fail(
            VerifierId::V4a,
            Strength::Strong,
            templates.render("fb-answer-entity", &[("answer", &labels.join(", "))])?,
        )
    };
    let mediators_only = !answer.is_empty()
        && answer.iter().all(|v| {
            v.as_entity()
                .and_then(|e| kb.entity_classes(e))
                .is_some_and(|cs| !cs.is_empty() && cs.is_subset(&suite.mediator_classes))
        });
    let v4a_int = if mediators_only {
        Verdict::fail(VerifierId::V4aInt, Strength::Strong, templates.render("fb-intermediate-node", &[])?)
    } else {
        Verdict::pass(VerifierId::V4aInt, Strength::Strong)
    };
    let s = suite.strength(VerifierId::V4b);
    let v4b = if answer.is_empty() {
        Verdict::fail(VerifierId::V4b, s, templates.render("fb-empty-answer", &[])?)
    } else {
        Verdict::pass(VerifierId::V4b, s)
    };
    Ok((v4a, v4a_int, v4b, answer))
}
