//! Logical-form match (EM-s), answer F1 and per-slice reports.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Category, Label, QAExample};
use crate::executor::execute;
use crate::kb::KnowledgeBase;
use crate::par;
use crate::pipeline::PipelineOutcome;
use crate::query::{extract_entities, extract_relations, LogicalForm};
use crate::value::{Answer, AnswerSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmS {
    Match,
    Mismatch,
    /// One side could not be parsed; scores 0.
    ParseFail,
}

impl EmS {
    pub fn score(self) -> u8 {
        u8::from(self == EmS::Match)
    }
}

/// Approximate form equivalence: same relations, same entities and the same
/// answer on `kb`. NK matches only NK.
pub fn em_s(pred: &LogicalForm, gold: &LogicalForm, kb: &KnowledgeBase) -> EmS {
    match (pred.is_nk(), gold.is_nk()) {
        (true, true) => return EmS::Match,
        (true, false) | (false, true) => return EmS::Mismatch,
        _ => {}
    }
    let (Some(p), Some(g)) = (pred.query(), gold.query()) else { return EmS::ParseFail };
    let same = extract_relations(pred).ok() == extract_relations(gold).ok()
        && extract_entities(pred).ok() == extract_entities(gold).ok()
        && execute(kb, p) == execute(kb, g);
    if same {
        EmS::Match
    } else {
        EmS::Mismatch
    }
}

fn set_f1(pred: &AnswerSet, gold: &AnswerSet) -> f64 {
    if pred.is_empty() && gold.is_empty() {
        return 1.0;
    }
    let hits = pred.intersection(gold).count() as f64;
    if hits == 0.0 {
        return 0.0;
    }
    let p = hits / pred.len() as f64;
    let r = hits / gold.len() as f64;
    2.0 * p * r / (p + r)
}

/// Answer F1. NA against NA scores 1, NA against a set 0. The lenient
/// variant also gives full credit to a prediction equal to the answer on
/// the complete knowledge base.
pub fn f1_answers(pred: &Answer, gold: &Answer, complete_kb_answer: &AnswerSet, lenient: bool) -> f64 {
    let regular = match (pred, gold) {
        (Answer::Na, Answer::Na) => 1.0,
        (Answer::Values(p), Answer::Values(g)) => set_f1(p, g),
        _ => 0.0,
    };
    match pred {
        Answer::Values(p) if lenient && !complete_kb_answer.is_empty() && p == complete_kb_answer => 1.0,
        _ => regular,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    #[serde(default)]
    pub id: Option<String>,
    pub question: String,
    pub label: Label,
    pub category: Category,
    pub em_s: u8,
    pub f1_r: f64,
    pub f1_l: f64,
    pub parse_fail: bool,
}

pub fn evaluate_one(ex: &QAExample, out: &PipelineOutcome, kb: &KnowledgeBase) -> EvaluationRecord {
    let em = em_s(&out.lf, &ex.gold_lf, kb);
    EvaluationRecord {
        id: ex.id.clone(),
        question: ex.question.clone(),
        label: ex.label,
        category: ex.category,
        em_s: em.score(),
        f1_r: f1_answers(&out.answer, &ex.gold_answer, &ex.complete_kb_answer, false),
        f1_l: f1_answers(&out.answer, &ex.gold_answer, &ex.complete_kb_answer, true),
        parse_fail: em == EmS::ParseFail,
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("{predictions} predictions for {examples} examples")]
    LengthMismatch { predictions: usize, examples: usize },
    #[error("prediction {index} is for {found:?}, expected {expected:?}")]
    Misaligned { index: usize, expected: String, found: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
}

/// Scores predictions against gold examples, matched by position.
pub fn evaluate(
    examples: &[QAExample],
    outcomes: &[PipelineOutcome],
    kb: &KnowledgeBase,
) -> Result<Vec<EvaluationRecord>, MetricsError> {
    if examples.len() != outcomes.len() {
        return Err(MetricsError::LengthMismatch { predictions: outcomes.len(), examples: examples.len() });
    }
    for (index, (ex, out)) in examples.iter().zip(outcomes).enumerate() {
        if ex.question != out.question || (ex.id.is_some() && out.id.is_some() && ex.id != out.id) {
            return Err(MetricsError::Misaligned { index, expected: ex.question.clone(), found: out.question.clone() });
        }
    }
    let pairs: Vec<(&QAExample, &PipelineOutcome)> = examples.iter().zip(outcomes).collect();
    Ok(par::map(&pairs, |(ex, out)| evaluate_one(ex, out, kb)))
}

/// Mean scores over one slice, as percentages. `None` for an empty slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceReport {
    pub slice: String,
    pub count: usize,
    pub f1_r: Option<f64>,
    pub f1_l: Option<f64>,
    pub em_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub total: usize,
    pub slices: Vec<SliceReport>,
}

fn slice(name: &str, records: &[&EvaluationRecord]) -> SliceReport {
    let mean = |f: &dyn Fn(&EvaluationRecord) -> f64| {
        (!records.is_empty()).then(|| 100.0 * records.iter().map(|r| f(r)).sum::<f64>() / records.len() as f64)
    };
    SliceReport {
        slice: name.to_string(),
        count: records.len(),
        f1_r: mean(&|r| r.f1_r),
        f1_l: mean(&|r| r.f1_l),
        em_s: mean(&|r| f64::from(r.em_s)),
    }
}

/// Overall, answerable, unanswerable, per-label and per-category means.
pub fn aggregate(records: &[EvaluationRecord]) -> Report {
    let pick = |keep: &dyn Fn(&EvaluationRecord) -> bool| records.iter().filter(|r| keep(r)).collect::<Vec<_>>();
    let mut slices = vec![
        slice("overall", &pick(&|_| true)),
        slice("answerable", &pick(&|r| r.label == Label::Answerable)),
        slice("unanswerable", &pick(&|r| r.label != Label::Answerable)),
        slice("schema-unans", &pick(&|r| r.label == Label::SchemaUnans)),
        slice("data-unans", &pick(&|r| r.label == Label::DataUnans)),
    ];
    for c in Category::ALL.into_iter().filter(|c| *c != Category::NotApplicable) {
        slices.push(slice(&c.to_string(), &pick(&|r| r.category == c)));
    }
    Report { total: records.len(), slices }
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialise") + "\n"
    }

    /// Aligned text table; empty slices show `n/a`.
    pub fn to_table(&self) -> String {
        let cell = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.1}"));
        let width = self.slices.iter().map(|s| s.slice.len()).max().unwrap_or(5).max(5);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>5}  {:>6}  {:>6}  {:>6}", "slice", "n", "F1(R)", "F1(L)", "EM-s");
        for s in &self.slices {
            let _ = writeln!(
                out,
                "{:<width$}  {:>5}  {:>6}  {:>6}  {:>6}",
                s.slice,
                s.count,
                cell(s.f1_r),
                cell(s.f1_l),
                cell(s.em_s)
            );
        }
        out
    }
}

pub fn records_to_csv(records: &[EvaluationRecord]) -> Result<String, MetricsError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "question", "label", "category", "em_s", "f1_r", "f1_l", "parse_fail"])?;
    for r in records {
        w.write_record([
            r.id.clone().unwrap_or_default(),
            r.question.clone(),
            r.label.to_string(),
            r.category.to_string(),
            r.em_s.to_string(),
            r.f1_r.to_string(),
            r.f1_l.to_string(),
            r.parse_fail.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| MetricsError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
}

pub fn write_csv(records: &[EvaluationRecord], path: &Path) -> Result<(), MetricsError> {
    std::fs::write(path, records_to_csv(records)?)?;
    Ok(())
}
