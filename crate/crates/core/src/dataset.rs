//! Question-answer datasets, few-shot sampling and unanswerability injection.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::executor::{bindings, execute};
use crate::kb::{DeletionPlan, Fact, KbError, KnowledgeBase};
use crate::query::LogicalForm;
use crate::retrieval::LinkedEntity;
use crate::value::{Answer, AnswerSet, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Label {
    Answerable,
    SchemaUnans,
    DataUnans,
}

impl Label {
    pub fn is_answerable(self) -> bool {
        self == Label::Answerable
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Answerable => "answerable",
            Label::SchemaUnans => "schema-unans",
            Label::DataUnans => "data-unans",
        })
    }
}

/// Fine-grained reason a question is unanswerable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    MissingClass,
    MissingRelation,
    MissingTopicEntity,
    MissingEntity,
    MissingFact,
    #[serde(rename = "n/a")]
    NotApplicable,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::MissingClass,
        Category::MissingRelation,
        Category::MissingTopicEntity,
        Category::MissingEntity,
        Category::MissingFact,
        Category::NotApplicable,
    ];

    pub fn fits(self, label: Label) -> bool {
        use Category::*;
        match label {
            Label::Answerable => self == NotApplicable,
            Label::SchemaUnans => matches!(self, MissingClass | MissingRelation | MissingTopicEntity),
            Label::DataUnans => matches!(self, MissingEntity | MissingFact),
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::MissingClass => "missing-class",
            Category::MissingRelation => "missing-relation",
            Category::MissingTopicEntity => "missing-topic-entity",
            Category::MissingEntity => "missing-entity",
            Category::MissingFact => "missing-fact",
            Category::NotApplicable => "n/a",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAExample {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub question: String,
    #[serde(default)]
    pub linked_entities: Vec<LinkedEntity>,
    pub gold_lf: LogicalForm,
    pub gold_answer: Answer,
    #[serde(default)]
    pub complete_kb_answer: AnswerSet,
    pub label: Label,
    pub category: Category,
}

impl QAExample {
    /// An answerable example whose answers are filled in by executing
    /// `gold_lf` on `kb`.
    pub fn answerable(
        question: impl Into<String>,
        linked_entities: Vec<LinkedEntity>,
        gold_lf: LogicalForm,
        kb: &KnowledgeBase,
    ) -> Self {
        let answer = gold_lf.query().map(|q| execute(kb, q)).unwrap_or_default();
        Self {
            id: None,
            question: question.into(),
            linked_entities,
            gold_lf,
            gold_answer: Answer::Values(answer.clone()),
            complete_kb_answer: answer,
            label: Label::Answerable,
            category: Category::NotApplicable,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self.label {
            Label::SchemaUnans if !self.gold_lf.is_nk() => {
                return Err("schema-unans example must have gold_lf \"NK\"".into())
            }
            Label::SchemaUnans | Label::DataUnans if !self.gold_answer.is_na() => {
                return Err(format!("{} example must have gold_answer \"NA\"", self.label))
            }
            Label::DataUnans | Label::Answerable if self.gold_lf.is_nk() => {
                return Err(format!("{} example cannot have gold_lf \"NK\"", self.label))
            }
            Label::Answerable if self.gold_answer.is_na() => {
                return Err("answerable example cannot have gold_answer \"NA\"".into())
            }
            _ => {}
        }
        if !self.category.fits(self.label) {
            return Err(format!("category {} does not fit label {}", self.category, self.label));
        }
        Ok(())
    }

    pub fn linked_ids(&self) -> BTreeSet<String> {
        self.linked_entities.iter().map(|l| l.id.clone()).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetSplit {
    pub name: String,
    pub examples: Vec<QAExample>,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Format { path: PathBuf, line: usize, message: String },
    #[error("example {index}: {reason}")]
    Precondition { index: usize, reason: String },
    #[error("need {needed} {stratum} examples, split has {available}")]
    InsufficientExamples { stratum: &'static str, needed: usize, available: usize },
    #[error(transparent)]
    Kb(#[from] KbError),
}

/// Reads a JSON Lines split. Blank lines are skipped; every record is
/// validated. The split is named after the file stem.
pub fn load_split(path: &Path) -> Result<DatasetSplit, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })?;
    let format = |line: usize, message: String| DatasetError::Format { path: path.to_path_buf(), line, message };
    let mut examples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ex: QAExample = serde_json::from_str(line).map_err(|e| format(i + 1, e.to_string()))?;
        ex.validate().map_err(|m| format(i + 1, m))?;
        examples.push(ex);
    }
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(DatasetSplit { name, examples })
}

pub fn split_to_jsonl(split: &DatasetSplit) -> String {
    let mut out = String::new();
    for ex in &split.examples {
        out.push_str(&serde_json::to_string(ex).expect("examples serialise"));
        out.push('\n');
    }
    out
}

pub fn save_split(split: &DatasetSplit, path: &Path) -> Result<(), DatasetError> {
    let io = |source| DatasetError::Io { path: path.to_path_buf(), source };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(split_to_jsonl(split).as_bytes()).map_err(io)
}

/// Relabels a split against `kb` with `plan` applied. Every source example
/// must have a gold form that executes non-empty on `kb`.
pub fn inject_unanswerability(
    kb: &KnowledgeBase,
    split: &DatasetSplit,
    plan: &DeletionPlan,
) -> Result<(KnowledgeBase, DatasetSplit), DatasetError> {
    let pruned = kb.delete_elements(plan)?;
    let dead_entities: BTreeSet<&str> = plan.entities.iter().map(String::as_str).collect();
    let mut examples = Vec::with_capacity(split.examples.len());
    for (index, ex) in split.examples.iter().enumerate() {
        let precondition = |reason: &str| DatasetError::Precondition { index, reason: reason.to_string() };
        let q = ex.gold_lf.query().ok_or_else(|| precondition("gold_lf is not an executable query"))?;
        let complete = execute(kb, q);
        if complete.is_empty() {
            return Err(precondition("gold_lf executes empty on the source knowledge base"));
        }
        let mut out = ex.clone();
        out.complete_kb_answer = complete;
        let topic_gone = q.entities().iter().any(|e| !pruned.has_entity(e));
        let schema = if q.classes().iter().any(|c| !pruned.has_class(c)) {
            Some(Category::MissingClass)
        } else if q.relations().iter().any(|r| !pruned.has_relation(r)) {
            Some(Category::MissingRelation)
        } else if topic_gone {
            Some(Category::MissingTopicEntity)
        } else {
            None
        };
        if let Some(category) = schema {
            out.label = Label::SchemaUnans;
            out.category = category;
            out.gold_lf = LogicalForm::Nk;
            out.gold_answer = Answer::Na;
        } else {
            let now = execute(&pruned, q);
            if now.is_empty() {
                let entity_hit = bindings(kb, q)
                    .iter()
                    .any(|b| b.values().filter_map(Value::as_entity).any(|e| dead_entities.contains(e)));
                out.label = Label::DataUnans;
                out.category = if entity_hit { Category::MissingEntity } else { Category::MissingFact };
                out.gold_answer = Answer::Na;
            } else {
                out.label = Label::Answerable;
                out.category = Category::NotApplicable;
                out.gold_answer = Answer::Values(now);
            }
        }
        examples.push(out);
    }
    Ok((pruned, DatasetSplit { name: split.name.clone(), examples }))
}

/// How many elements of each kind [`random_plan`] deletes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanSizes {
    pub classes: usize,
    pub relations: usize,
    pub entities: usize,
    pub facts: usize,
}

/// A deletion plan drawn uniformly from `kb`, reproducible from `seed`.
pub fn random_plan(kb: &KnowledgeBase, sizes: PlanSizes, seed: u64) -> DeletionPlan {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = |ids: Vec<String>, n: usize, rng: &mut ChaCha8Rng| -> Vec<String> {
        let mut chosen: Vec<String> = ids.choose_multiple(rng, n).cloned().collect();
        chosen.sort();
        chosen
    };
    let classes = pick(kb.classes().map(|c| c.id.clone()).collect(), sizes.classes, &mut rng);
    let relations = pick(kb.relations().map(|r| r.id.clone()).collect(), sizes.relations, &mut rng);
    let entities = pick(kb.entities().map(|e| e.id.clone()).collect(), sizes.entities, &mut rng);
    let mut facts: Vec<Fact> = kb.facts().choose_multiple(&mut rng, sizes.facts).cloned().collect();
    facts.sort();
    DeletionPlan { classes, relations, entities, facts, seed: Some(seed) }
}

/// Stratified uniform sample of answerable and unanswerable examples. The
/// answerable draw comes first; each stratum keeps its source order.
pub fn sample_fewshots(
    split: &DatasetSplit,
    n_ans: usize,
    n_unans: usize,
    seed: u64,
) -> Result<DatasetSplit, DatasetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut examples = Vec::with_capacity(n_ans + n_unans);
    for (stratum, answerable, n) in [("answerable", true, n_ans), ("unanswerable", false, n_unans)] {
        let pool: Vec<usize> =
            (0..split.examples.len()).filter(|&i| split.examples[i].label.is_answerable() == answerable).collect();
        if pool.len() < n {
            return Err(DatasetError::InsufficientExamples { stratum, needed: n, available: pool.len() });
        }
        let mut chosen: Vec<usize> = pool.choose_multiple(&mut rng, n).copied().collect();
        chosen.sort_unstable();
        examples.extend(chosen.into_iter().map(|i| split.examples[i].clone()));
    }
    Ok(DatasetSplit { name: "fewshot".into(), examples })
}
