//! Per-question orchestration: generation, verify-and-repair, and the
//! consensus step over the candidate set.

use std::collections::BTreeSet;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetSplit, QAExample};
use crate::gateway::{Backend, Conversation, GatewayError, GenerationGateway, TemplateError, Templates};
use crate::kb::KnowledgeBase;
use crate::par;
use crate::query::{render_sparql, LogicalForm};
use crate::retrieval::{
    relation_signature, retrieve_union, Caps, LexicalRetriever, RetrievalContext, RetrievalError, Retriever,
};
use crate::value::{Answer, AnswerSet};
use crate::verifiers::{Verdict, VerifierId, VerifierSuite, VerifyError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FunConfig {
    /// Repair rounds; up to `n + 1` logical forms are verified.
    pub n: usize,
    pub answerable_mode: bool,
}

impl Default for FunConfig {
    fn default() -> Self {
        Self { n: 4, answerable_mode: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    #[serde(flatten)]
    pub fun: FunConfig,
    pub caps: Caps,
    pub max_path_len: usize,
    pub mediator_classes: BTreeSet<String>,
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            fun: FunConfig::default(),
            caps: Caps::default(),
            max_path_len: 2,
            mediator_classes: BTreeSet::new(),
            workers: 1,
        }
    }
}

impl PipelineConfig {
    pub fn suite(&self) -> VerifierSuite {
        VerifierSuite { answerable_mode: self.fun.answerable_mode, mediator_classes: self.mediator_classes.clone() }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("config: {0}")]
    Config(String),
}

impl From<VerifyError> for PipelineError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Gateway(g) => PipelineError::Gateway(g),
            VerifyError::Template(t) => PipelineError::Template(t),
        }
    }
}

/// One completion request: the latest user message, the conversation
/// length and the reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub prompt: String,
    pub turns: usize,
    pub reply: String,
}

struct Recorder {
    inner: GenerationGateway,
    log: Mutex<Vec<Exchange>>,
}

impl Backend for Arc<Recorder> {
    fn complete(&self, conv: &Conversation) -> Result<String, GatewayError> {
        let reply = self.inner.complete(conv)?;
        self.log.lock().unwrap_or_else(|e| e.into_inner()).push(Exchange {
            prompt: conv.last_user().unwrap_or_default().to_string(),
            turns: conv.messages().len(),
            reply: reply.clone(),
        });
        Ok(reply)
    }
}

/// Gateway wrapper that keeps every exchange of one question.
#[derive(Clone)]
pub struct RecordingGateway {
    recorder: Arc<Recorder>,
    gw: GenerationGateway,
}

impl RecordingGateway {
    pub fn new(inner: &GenerationGateway) -> Self {
        let recorder = Arc::new(Recorder { inner: inner.clone(), log: Mutex::new(Vec::new()) });
        let gw = GenerationGateway::new(recorder.clone());
        Self { recorder, gw }
    }

    pub fn gateway(&self) -> &GenerationGateway {
        &self.gw
    }

    /// Exchanges since the previous call.
    pub fn take(&self) -> Vec<Exchange> {
        std::mem::take(&mut *self.recorder.log.lock().unwrap_or_else(|e| e.into_inner()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub lf: LogicalForm,
    pub answer: AnswerSet,
    pub weak_profile: Vec<(VerifierId, bool)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub back_translation: Option<String>,
    /// 1-based.
    pub iteration: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    /// The request that produced this form.
    pub generation: Exchange,
    pub lf: LogicalForm,
    pub verdicts: Vec<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<AnswerSet>,
    pub feedback: Vec<String>,
    pub admitted: bool,
    /// Requests made by the verifiers.
    pub checks: Vec<Exchange>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConsensusBranch {
    NonEmptyConsensus,
    EmptyAnswer,
    NoConsensus,
    SelfConsistency,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusTrace {
    pub branch: ConsensusBranch,
    pub candidates: Vec<Candidate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_iteration: Option<usize>,
    pub selection_fallback: bool,
    pub exchanges: Vec<Exchange>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionTrace {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<RetrievalContext>,
    pub iterations: Vec<IterationTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consensus: Option<ConsensusTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineOutcome {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub question: String,
    pub lf: LogicalForm,
    pub answer: Answer,
    pub confident: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub trace: QuestionTrace,
}

impl PipelineOutcome {
    pub fn failed(example: &QAExample, error: String, mut trace: QuestionTrace) -> Self {
        trace.error = Some(error.clone());
        Self {
            id: example.id.clone(),
            question: example.question.clone(),
            lf: LogicalForm::Nk,
            answer: Answer::Na,
            confident: false,
            error: Some(error),
            trace,
        }
    }
}

fn join_bar<I: IntoIterator<Item = String>>(items: I) -> String {
    items.into_iter().collect::<Vec<_>>().join(" | ")
}

/// The question block of the generation prompt, up to `sparql:`.
pub fn render_question_block(
    templates: &Templates,
    question: &str,
    ctx: &RetrievalContext,
) -> Result<String, TemplateError> {
    let entities = join_bar(ctx.linked_entities.iter().map(|l| format!("{} {}", l.mention, l.id)));
    let paths = join_bar(ctx.paths.iter().filter_map(|p| render_sparql(p).ok()));
    let classes = join_bar(ctx.classes.iter().cloned());
    let relations = join_bar(ctx.relations.iter().map(|r| r.signature.clone()));
    templates.render(
        "pun-question",
        &[
            ("question", question),
            ("entities", &entities),
            ("paths", &paths),
            ("classes", &classes),
            ("relations", &relations),
        ],
    )
}

/// Context shown for a few-shot exemplar: its linked entities and the
/// classes and relations of its gold form.
fn exemplar_context(kb: &KnowledgeBase, ex: &QAExample) -> RetrievalContext {
    let q = ex.gold_lf.query();
    RetrievalContext {
        classes: q.map(|q| q.classes().into_iter().collect()).unwrap_or_default(),
        relations: q
            .map(|q| {
                q.relations()
                    .into_iter()
                    .map(|id| crate::retrieval::RelationEntry {
                        signature: relation_signature(kb, &id).unwrap_or_else(|| id.clone()),
                        id,
                    })
                    .collect()
            })
            .unwrap_or_default(),
        paths: Vec::new(),
        linked_entities: ex.linked_entities.clone(),
    }
}

/// The full generation prompt: header, NK exemplar (default mode only),
/// few-shot exemplars, then the question block. Parts are separated by a
/// blank line.
pub fn render_generation_prompt(
    templates: &Templates,
    kb: &KnowledgeBase,
    question: &str,
    ctx: &RetrievalContext,
    fewshots: &[QAExample],
    answerable_mode: bool,
) -> Result<String, TemplateError> {
    let mut parts = Vec::new();
    if answerable_mode {
        parts.push(templates.render("pun-header-answerable", &[])?);
    } else {
        parts.push(templates.render("pun-header", &[])?);
        parts.push(templates.render("pun-nk-exemplar", &[])?);
    }
    for ex in fewshots {
        let block = render_question_block(templates, &ex.question, &exemplar_context(kb, ex))?;
        parts.push(format!("{block}{}", ex.gold_lf.surface()));
    }
    parts.push(render_question_block(templates, question, ctx)?);
    Ok(parts.join("\n\n"))
}

/// Generates the initial logical form. Returns the form and the
/// conversation so far.
pub fn pun_generate(
    gw: &GenerationGateway,
    templates: &Templates,
    kb: &KnowledgeBase,
    question: &str,
    ctx: &RetrievalContext,
    fewshots: &[QAExample],
    answerable_mode: bool,
) -> Result<(LogicalForm, Conversation), PipelineError> {
    let prompt = render_generation_prompt(templates, kb, question, ctx, fewshots, answerable_mode)?;
    let mut conv = Conversation::user(prompt);
    let reply = gw.complete(&conv)?;
    conv.push_assistant(reply.clone());
    Ok((LogicalForm::from_reply(&reply), conv))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunResult {
    pub confident: bool,
    pub lf: LogicalForm,
    /// Set when confident.
    pub answer: Option<AnswerSet>,
    pub candidates: Vec<Candidate>,
    pub iterations: Vec<IterationTrace>,
}

/// Inputs shared by every iteration of one question.
pub struct FunInputs<'a> {
    pub question: &'a str,
    pub question_entities: &'a BTreeSet<String>,
    pub kb: &'a KnowledgeBase,
    pub templates: &'a Templates,
    pub suite: &'a VerifierSuite,
}

fn admits(suite: &VerifierSuite, report: &crate::verifiers::VerifyReport) -> bool {
    if !report.strong_passed() {
        return false;
    }
    // With V4b strong the only weak check is V3, so "at least one weak
    // pass" would coincide with full success; the plain
    // self-consistency pool takes every strong-passing form instead.
    suite.answerable_mode || report.weak_passed() >= 1
}

/// The verify-and-repair loop, starting from the form produced by
/// [`pun_generate`] in `conv`.
pub fn fun(
    rec: &RecordingGateway,
    input: &FunInputs<'_>,
    cfg: &FunConfig,
    mut conv: Conversation,
    lf0: LogicalForm,
    first: Exchange,
) -> Result<FunResult, (PipelineError, Vec<IterationTrace>)> {
    let gw = rec.gateway();
    let mut lf = lf0;
    let mut generation = first;
    let mut candidates = Vec::new();
    let mut iterations: Vec<IterationTrace> = Vec::new();
    for i in 1..=cfg.n + 1 {
        let report =
            match input.suite.verify(&lf, input.question, input.question_entities, input.kb, gw, input.templates) {
                Ok(r) => r,
                Err(e) => return Err((e.into(), iterations)),
            };
        let feedback: Vec<String> = report.feedback().into_iter().map(str::to_string).collect();
        let confident = report.all_passed();
        let admitted = !confident && admits(input.suite, &report);
        iterations.push(IterationTrace {
            iteration: i,
            generation: generation.clone(),
            lf: lf.clone(),
            verdicts: report.strong.iter().chain(&report.weak).cloned().collect(),
            answer: report.answer.clone(),
            feedback: feedback.clone(),
            admitted,
            checks: rec.take(),
        });
        if confident {
            return Ok(FunResult { confident: true, lf, answer: report.answer, candidates, iterations });
        }
        if admitted {
            candidates.push(Candidate {
                lf: lf.clone(),
                answer: report.answer.clone().unwrap_or_default(),
                weak_profile: report.weak.iter().map(|v| (v.verifier, v.passed)).collect(),
                back_translation: report.back_translation.clone(),
                iteration: i,
            });
        }
        if i == cfg.n + 1 {
            break;
        }
        conv.push_user(feedback.join("\n"));
        let reply = match gw.complete(&conv) {
            Ok(r) => r,
            Err(e) => return Err((e.into(), iterations)),
        };
        conv.push_assistant(reply.clone());
        generation = rec.take().pop().expect("generation was recorded");
        lf = LogicalForm::from_reply(&reply);
    }
    Ok(FunResult { confident: false, lf, answer: None, candidates, iterations })
}

/// Index into `candidates` picked by the selection prompt, and whether the
/// reply had to be ignored. A single candidate needs no request.
pub fn select_best(
    gw: &GenerationGateway,
    templates: &Templates,
    question: &str,
    candidates: &[&Candidate],
) -> Result<(usize, bool), PipelineError> {
    assert!(!candidates.is_empty(), "select_best needs candidates");
    if candidates.len() == 1 {
        return Ok((0, false));
    }
    let lines: Vec<String> = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let text = c.back_translation.clone().unwrap_or_else(|| c.lf.surface().to_string());
            format!("{}. pred_nl: {text}", i + 1)
        })
        .collect();
    let prompt = templates.render(
        "scun-select",
        &[("question", question), ("candidates", &lines.join("\n")), ("count", &candidates.len().to_string())],
    )?;
    let reply = gw.complete(&Conversation::user(prompt))?;
    Ok(match parse_selection(&reply, candidates.len()) {
        Some(k) => (k - 1, false),
        None => (0, true),
    })
}

/// First integer in the reply that is a valid 1-based index.
pub fn parse_selection(reply: &str, len: usize) -> Option<usize> {
    reply
        .split(|c: char| !c.is_ascii_digit())
        .filter(|t| !t.is_empty())
        .filter_map(|t| t.parse::<usize>().ok())
        .find(|&k| (1..=len).contains(&k))
}

/// Groups of candidates sharing a non-empty answer, ordered by first
/// appearance.
fn answer_groups(candidates: &[Candidate]) -> Vec<(&AnswerSet, Vec<&Candidate>)> {
    let mut groups: Vec<(&AnswerSet, Vec<&Candidate>)> = Vec::new();
    for c in candidates.iter().filter(|c| !c.answer.is_empty()) {
        match groups.iter_mut().find(|(a, _)| **a == c.answer) {
            Some((_, g)) => g.push(c),
            None => groups.push((&c.answer, vec![c])),
        }
    }
    groups
}

/// Most popular non-empty answer; ties go to the earliest group.
fn most_popular(candidates: &[Candidate]) -> Option<(&AnswerSet, Vec<&Candidate>)> {
    answer_groups(candidates).into_iter().fold(None, |best: Option<(&AnswerSet, Vec<&Candidate>)>, g| match best {
        Some(b) if b.1.len() >= g.1.len() => Some(b),
        _ => Some(g),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Consensus {
    pub lf: LogicalForm,
    pub answer: Answer,
    pub trace: ConsensusTrace,
}

fn consensus(
    branch: ConsensusBranch,
    pool: &[&Candidate],
    picked: Option<(usize, bool)>,
    answer: Answer,
    all: &[Candidate],
) -> Consensus {
    let chosen = picked.map(|(k, _)| pool[k]);
    Consensus {
        lf: chosen.map(|c| c.lf.clone()).unwrap_or(LogicalForm::Nk),
        answer: if chosen.is_some() { answer } else { Answer::Na },
        trace: ConsensusTrace {
            branch,
            candidates: all.to_vec(),
            selected_iteration: chosen.map(|c| c.iteration),
            selection_fallback: picked.is_some_and(|(_, f)| f),
            exchanges: Vec::new(),
        },
    }
}

/// Consensus over the candidate set: a non-empty answer backed by more
/// than half of the set, else any empty-answer candidate, else NK.
pub fn scun(
    gw: &GenerationGateway,
    templates: &Templates,
    question: &str,
    candidates: &[Candidate],
) -> Result<Consensus, PipelineError> {
    let threshold = candidates.len() / 2;
    if let Some((answer, supporters)) = most_popular(candidates) {
        if supporters.len() > threshold {
            let picked = select_best(gw, templates, question, &supporters)?;
            let answer = Answer::Values(answer.clone());
            return Ok(consensus(ConsensusBranch::NonEmptyConsensus, &supporters, Some(picked), answer, candidates));
        }
    }
    let empties: Vec<&Candidate> = candidates.iter().filter(|c| c.answer.is_empty()).collect();
    if !empties.is_empty() {
        let picked = select_best(gw, templates, question, &empties)?;
        return Ok(consensus(ConsensusBranch::EmptyAnswer, &empties, Some(picked), Answer::Na, candidates));
    }
    Ok(consensus(ConsensusBranch::NoConsensus, &[], None, Answer::Na, candidates))
}

/// Plain self-consistency: the most frequent non-empty answer, no
/// threshold, ties broken by the selection prompt among its supporters.
pub fn self_consistency(
    gw: &GenerationGateway,
    templates: &Templates,
    question: &str,
    candidates: &[Candidate],
) -> Result<Consensus, PipelineError> {
    match most_popular(candidates) {
        Some((answer, supporters)) => {
            let picked = select_best(gw, templates, question, &supporters)?;
            let answer = Answer::Values(answer.clone());
            Ok(consensus(ConsensusBranch::SelfConsistency, &supporters, Some(picked), answer, candidates))
        }
        None => Ok(consensus(ConsensusBranch::SelfConsistency, &[], None, Answer::Na, candidates)),
    }
}

/// Everything needed to answer questions against one knowledge base.
pub struct Pipeline {
    pub gateway: GenerationGateway,
    pub templates: Templates,
    /// Falls back to the lexical retriever when empty.
    pub retrievers: Vec<Box<dyn Retriever>>,
    pub fewshots: Vec<QAExample>,
    pub config: PipelineConfig,
}

impl Pipeline {
    pub fn new(gateway: GenerationGateway, config: PipelineConfig) -> Self {
        Self { gateway, templates: Templates::default(), retrievers: Vec::new(), fewshots: Vec::new(), config }
    }

    pub fn retrieve(&self, kb: &KnowledgeBase, ex: &QAExample) -> Result<RetrievalContext, RetrievalError> {
        let lexical = LexicalRetriever { caps: self.config.caps, max_path_len: self.config.max_path_len };
        let rs: Vec<&dyn Retriever> = if self.retrievers.is_empty() {
            vec![&lexical]
        } else {
            self.retrievers.iter().map(|r| r.as_ref()).collect()
        };
        retrieve_union(&rs, kb, &ex.question, &ex.linked_entities, self.config.caps)
    }

    /// Answers one question. Failures are reported in the outcome.
    pub fn run_question(&self, kb: &KnowledgeBase, ex: &QAExample) -> PipelineOutcome {
        let mut trace = QuestionTrace { id: ex.id.clone(), question: ex.question.clone(), ..Default::default() };
        let ctx = match self.retrieve(kb, ex) {
            Ok(c) => c,
            Err(e) => return PipelineOutcome::failed(ex, e.to_string(), trace),
        };
        trace.context = Some(ctx.clone());
        let rec = RecordingGateway::new(&self.gateway);
        let mode = self.config.fun.answerable_mode;
        let (lf0, conv) =
            match pun_generate(rec.gateway(), &self.templates, kb, &ex.question, &ctx, &self.fewshots, mode) {
                Ok(x) => x,
                Err(e) => return PipelineOutcome::failed(ex, e.to_string(), trace),
            };
        let first = rec.take().pop().expect("generation was recorded");
        let suite = self.config.suite();
        let qents: BTreeSet<String> = ctx.linked_entities.iter().map(|l| l.id.clone()).collect();
        let input = FunInputs {
            question: &ex.question,
            question_entities: &qents,
            kb,
            templates: &self.templates,
            suite: &suite,
        };
        let result = match fun(&rec, &input, &self.config.fun, conv, lf0, first) {
            Ok(r) => r,
            Err((e, its)) => {
                trace.iterations = its;
                return PipelineOutcome::failed(ex, e.to_string(), trace);
            }
        };
        trace.iterations = result.iterations;
        let (lf, answer, confident) = if result.confident {
            (result.lf, Answer::Values(result.answer.unwrap_or_default()), true)
        } else {
            let decided = if mode {
                self_consistency(rec.gateway(), &self.templates, &ex.question, &result.candidates)
            } else {
                scun(rec.gateway(), &self.templates, &ex.question, &result.candidates)
            };
            match decided {
                Ok(mut c) => {
                    c.trace.exchanges = rec.take();
                    trace.consensus = Some(c.trace);
                    (c.lf, c.answer, false)
                }
                Err(e) => return PipelineOutcome::failed(ex, e.to_string(), trace),
            }
        };
        PipelineOutcome { id: ex.id.clone(), question: ex.question.clone(), lf, answer, confident, error: None, trace }
    }

    /// Answers every question of a split on at most `config.workers`
    /// threads. Output order matches input order.
    pub fn run_dataset(&self, kb: &KnowledgeBase, split: &DatasetSplit) -> Vec<PipelineOutcome> {
        par::map_bounded(&split.examples, self.config.workers, |ex| self.run_question(kb, ex))
    }

    pub fn run_dataset_seq(&self, kb: &KnowledgeBase, split: &DatasetSplit) -> Vec<PipelineOutcome> {
        par::map_seq(&split.examples, |ex| self.run_question(kb, ex))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{MatchKind, MockBackend, MockRule};
    use crate::value::Value;

    fn cand(iteration: usize, answer: &[&str]) -> Candidate {
        Candidate {
            lf: LogicalForm::from_text(&format!("SELECT DISTINCT ?x WHERE {{ ?x ns:r{iteration} ns:e }}")),
            answer: answer.iter().map(|a| Value::entity(*a)).collect(),
            weak_profile: vec![],
            back_translation: Some(format!("question {iteration}")),
            iteration,
        }
    }

    fn silent() -> GenerationGateway {
        GenerationGateway::mock(MockBackend::default())
    }

    #[test]
    fn four_candidates_three_agree() {
        let l = vec![cand(1, &["m.01"]), cand(2, &["m.02"]), cand(3, &["m.01"]), cand(4, &["m.01"])];
        let gw = GenerationGateway::mock(MockBackend::new(vec![MockRule::new(
            MatchKind::Substring,
            "of the 3 predicted",
            "2",
        )]));
        let c = scun(&gw, &Templates::default(), "q", &l).unwrap();
        assert_eq!(c.answer, Answer::Values([Value::entity("m.01")].into()));
        assert_eq!(c.trace.selected_iteration, Some(3));
        assert_eq!(c.trace.branch, ConsensusBranch::NonEmptyConsensus);
    }

    #[test]
    fn exactly_half_is_not_consensus() {
        let l = vec![cand(1, &["a"]), cand(2, &["a"]), cand(3, &["b"]), cand(4, &["c"])];
        let c = scun(&silent(), &Templates::default(), "q", &l).unwrap();
        assert_eq!((c.lf, c.answer), (LogicalForm::Nk, Answer::Na));
    }

    #[test]
    fn unparseable_selection_falls_back_to_earliest() {
        let l = vec![cand(1, &[]), cand(2, &["x"]), cand(3, &[])];
        let gw = GenerationGateway::mock(MockBackend::new(vec![MockRule::new(
            MatchKind::Substring,
            "orig_nl_qn",
            "Neither seems right.",
        )]));
        let c = scun(&gw, &Templates::default(), "q", &l).unwrap();
        assert_eq!(c.trace.branch, ConsensusBranch::EmptyAnswer);
        assert_eq!(c.trace.selected_iteration, Some(1));
        assert!(c.trace.selection_fallback);
        assert_eq!(c.answer, Answer::Na);
    }

    #[test]
    fn selection_reply_parsing() {
        assert_eq!(parse_selection("2", 2), Some(2));
        assert_eq!(parse_selection("Option 7 is out; 1 is closest", 2), Some(1));
        assert_eq!(parse_selection("none", 3), None);
        assert_eq!(parse_selection("0", 3), None);
    }

    #[test]
    fn recorder_keeps_prompts() {
        let gw = GenerationGateway::mock(MockBackend::new(vec![MockRule::new(MatchKind::Exact, "hi", "yo")]));
        let rec = RecordingGateway::new(&gw);
        let mut conv = Conversation::user("first");
        conv.push_assistant("x");
        conv.push_user("hi");
        assert_eq!(rec.gateway().complete(&conv).unwrap(), "yo");
        assert_eq!(rec.take(), vec![Exchange { prompt: "hi".into(), turns: 3, reply: "yo".into() }]);
        assert!(rec.take().is_empty());
        assert_eq!(gw.calls(), 1);
    }
}
