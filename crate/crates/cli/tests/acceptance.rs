//! One line per acceptance criterion; exits non-zero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use funkbqa::dataset::{inject_unanswerability, load_split, random_plan, split_to_jsonl, Label, PlanSizes};
use funkbqa::executor::{brute_force_execute, execute, execute_batch, execute_batch_seq};
use funkbqa::gateway::{GenerationGateway, MatchKind, MockBackend, MockRule, Templates};
use funkbqa::kb::{DeletionPlan, KnowledgeBase};
use funkbqa::metrics::{em_s, f1_answers, EmS};
use funkbqa::pipeline::{scun, Candidate, ConsensusBranch, Pipeline, PipelineConfig, PipelineOutcome};
use funkbqa::query::{Dialect, LogicalForm, ParsedForm};
use funkbqa::value::{Answer, AnswerSet, Value};
use funkbqa::verifiers::{v2a_type_compatibility, v2b_schema_presence, VerifierId};
use rand::seq::SliceRandom;
use rand::Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn timed(limit: Duration, start: Instant) -> Check {
    let took = start.elapsed();
    ensure!(took < limit, "took {took:?}, limit {limit:?}");
    Ok(format!("{} ms", took.as_millis()))
}

fn austen(kb: &str) -> PipelineOutcome {
    let f = common::fixtures();
    let kb = KnowledgeBase::load_dir(&f.join("austen").join(kb)).unwrap();
    let split = load_split(&f.join("austen.jsonl")).unwrap();
    let gw = GenerationGateway::mock(MockBackend::load(&f.join("austen.json")).unwrap());
    Pipeline::new(gw, PipelineConfig::default()).run_dataset(&kb, &split).remove(0)
}

fn three_kbs() -> Check {
    let start = Instant::now();
    let works = LogicalForm::from_text(
        "SELECT DISTINCT ?x WHERE { ns:m.0ja ns:book.author.works_written ?x . ?x ns:type.object.type ns:book.book }",
    );
    let kb3 = austen("kb3");
    ensure!(kb3.confident && kb3.trace.iterations.len() == 3, "kb3 not confident at the third form");
    ensure!(matches!(&kb3.answer, Answer::Values(v) if !v.is_empty()), "kb3 answer {:?}", kb3.answer);
    let kb2 = austen("kb2");
    let branch = kb2.trace.consensus.as_ref().map(|c| c.branch);
    ensure!(kb2.lf == works && kb2.answer == Answer::Na, "kb2 gave {} / {:?}", kb2.lf.surface(), kb2.answer);
    ensure!(branch == Some(ConsensusBranch::EmptyAnswer), "kb2 branch {branch:?}");
    let kb1 = austen("kb1");
    ensure!(kb1.lf.is_nk() && kb1.answer == Answer::Na, "kb1 gave {} / {:?}", kb1.lf.surface(), kb1.answer);
    let c = kb1.trace.consensus.as_ref().ok_or("kb1 has no consensus step")?;
    let answers: BTreeSet<_> = c.candidates.iter().map(|c| &c.answer).collect();
    ensure!(
        c.candidates.len() == 3 && answers.len() == 3,
        "kb1 candidates {} distinct {}",
        c.candidates.len(),
        answers.len()
    );
    for (name, first) in [("kb1", &kb1), ("kb2", &kb2), ("kb3", &kb3)] {
        let again = austen(name);
        let text = serde_json::to_string_pretty(&again.trace).unwrap() + "\n";
        ensure!(serde_json::to_string_pretty(&first.trace).unwrap() + "\n" == text, "{name} rerun differs");
        let golden =
            std::fs::read_to_string(common::fixtures().join("austen").join(format!("trace-{name}.json"))).unwrap();
        ensure!(golden == text, "{name} differs from the pinned trace");
    }
    timed(Duration::from_secs(5), start)
}

const ENTITY_FEEDBACK: &str = "The generated sparql has a semantic issue warning:  The types of relations don't match for entity m.0123lk0s in the query. The assigned relation types by ['music.genre.recordings'] are ['music.genre']. These types are not associated with this entity in the KB. Please generate again a different executable sparql using the same context and constraints. DO NOT APOLOGIZE - just return the best you can try.";

const DISAGREEMENT_FEEDBACK: &str = "The question that you answer is NOT same as what you've been asked for! You have answered the question \"What genres are associated with the artist of the recording who m i (feat. 일리닛, new champ, myk)?\" but you were asked to answer \"what is the musical genre of the recording who m i (feat. 일리닛, new champ, myk)?\". Please generate again a different executable sparql using the relations, classes and entities provided earlier. DO NOT APOLOGIZE - just return the best you can try.";

fn music() -> Check {
    let start = Instant::now();
    let f = common::fixtures();
    let kb = KnowledgeBase::load_dir(&f.join("music/kb")).unwrap();
    let split = load_split(&f.join("music.jsonl")).unwrap();
    let gw = GenerationGateway::mock(MockBackend::load(&f.join("music.json")).unwrap());
    let o = Pipeline::new(gw, PipelineConfig::default()).run_dataset(&kb, &split).remove(0);
    let its = &o.trace.iterations;
    ensure!(its.len() == 3, "{} iterations", its.len());
    let failed = |i: usize| its[i].verdicts.iter().filter(|v| !v.passed).map(|v| v.verifier).collect::<Vec<_>>();
    ensure!(failed(0) == [VerifierId::V2a], "first failures {:?}", failed(0));
    ensure!(failed(1) == [VerifierId::V3], "second failures {:?}", failed(1));
    ensure!(failed(2).is_empty() && o.confident, "third form not confident");
    ensure!(its[0].feedback == [ENTITY_FEEDBACK], "first feedback differs");
    ensure!(its[1].feedback == [DISAGREEMENT_FEEDBACK], "second feedback differs");
    ensure!(
        its[1].generation.prompt == ENTITY_FEEDBACK && its[2].generation.prompt == DISAGREEMENT_FEEDBACK,
        "feedback not sent back"
    );
    timed(Duration::from_secs(2), start)
}

fn executor() -> Check {
    let start = Instant::now();
    let mut rng = common::rng(0xe4ec);
    let mut queries = 0;
    for _ in 0..50 {
        let kb = common::random_kb(&mut rng, 30);
        let qs: Vec<_> = (0..12).map(|_| common::random_query(&mut rng, &kb)).collect();
        for q in &qs {
            let oracle = brute_force_execute(&kb, q).map_err(|e| e.to_string())?;
            ensure!(execute(&kb, q) == oracle, "mismatch on {q:?}");
            queries += 1;
        }
        ensure!(execute_batch(&kb, &qs) == execute_batch_seq(&kb, &qs), "parallel batch differs");
    }
    Ok(format!("{queries} queries, {}", timed(Duration::from_secs(60), start)?))
}

fn parsed(text: &str) -> ParsedForm {
    match LogicalForm::parse(Dialect::Sparql, text) {
        LogicalForm::Parsed(pf) => pf,
        other => panic!("{text}: {other:?}"),
    }
}

fn verifiers() -> Check {
    let templates = Templates::default();
    let mut rng = common::rng(0x7e1);
    let (mut deleted, mut tries) = (0, 0);
    while deleted < 200 {
        tries += 1;
        ensure!(tries < 10_000, "only {deleted} deletion cases found");
        let kb = common::random_kb(&mut rng, 12);
        let q = common::random_query(&mut rng, &kb);
        let Ok(LogicalForm::Parsed(pf)) = LogicalForm::from_query(Dialect::Sparql, &q) else { continue };
        let mut plans = Vec::new();
        plans.extend(
            q.classes()
                .into_iter()
                .filter(|c| kb.has_class(c))
                .map(|c| (c.clone(), DeletionPlan { classes: vec![c], ..Default::default() })),
        );
        plans.extend(
            q.relations()
                .into_iter()
                .filter(|r| kb.has_relation(r))
                .map(|r| (r.clone(), DeletionPlan { relations: vec![r], ..Default::default() })),
        );
        plans.extend(
            q.entities()
                .into_iter()
                .filter(|e| kb.has_entity(e))
                .map(|e| (e.clone(), DeletionPlan { entities: vec![e], ..Default::default() })),
        );
        let Some((id, plan)) = plans.choose(&mut rng) else { continue };
        let v = v2b_schema_presence(&pf, &kb.delete_elements(plan).unwrap(), &templates).unwrap();
        ensure!(!v.passed && v.feedback.contains(id.as_str()), "deleting {id} left {} passing", pf.surface);
        deleted += 1;
    }
    let (mut compatible, mut incompatible, mut seed) = (0, 0, 0u64);
    while compatible < 50 || incompatible < 50 {
        let kb = common::random_kb(&mut common::rng(seed), 8);
        seed += 1;
        let fx = common::v2a_fixtures(&kb);
        for text in &fx.compatible {
            ensure!(v2a_type_compatibility(&parsed(text), &kb, &templates).unwrap().passed, "rejected {text}");
            compatible += 1;
        }
        for text in &fx.incompatible {
            ensure!(!v2a_type_compatibility(&parsed(text), &kb, &templates).unwrap().passed, "accepted {text}");
            incompatible += 1;
        }
    }
    Ok(format!("{deleted} deletions, {compatible} compatible, {incompatible} incompatible"))
}

fn cand(iteration: usize, answer: AnswerSet) -> Candidate {
    Candidate {
        lf: LogicalForm::from_text(&format!("SELECT DISTINCT ?x WHERE {{ ?x ns:r{iteration} ns:e }}")),
        answer,
        weak_profile: vec![],
        back_translation: Some(format!("question {iteration}")),
        iteration,
    }
}

fn one(id: &str) -> AnswerSet {
    [Value::entity(id)].into()
}

fn consensus() -> Check {
    let gw = GenerationGateway::mock(MockBackend::new(vec![MockRule::new(MatchKind::Substring, "pred_nl", "1")]));
    let silent = GenerationGateway::mock(MockBackend::default());
    let t = Templates::default();
    let mut rng = common::rng(0x5c);
    let mut cases = 0;
    for len in 2..=6usize {
        for _ in 0..8 {
            for support in [len / 2, len / 2 + 1] {
                let mut answers: Vec<_> =
                    (0..len).map(|i| if i < support { one("m.top") } else { one(&format!("m.o{i}")) }).collect();
                answers.shuffle(&mut rng);
                let l: Vec<_> = answers.into_iter().enumerate().map(|(i, a)| cand(i + 1, a)).collect();
                let c = scun(&gw, &t, "q", &l).map_err(|e| e.to_string())?;
                if support > len / 2 {
                    ensure!(c.answer == Answer::Values(one("m.top")), "|L|={len} support={support}: {:?}", c.answer);
                } else {
                    ensure!(c.lf.is_nk() && c.answer == Answer::Na, "|L|={len} support={support}: {}", c.lf.surface());
                }
                cases += 1;
            }
            let distinct: Vec<_> = (0..len).map(|i| cand(i + 1, one(&format!("m.d{i}")))).collect();
            let c = scun(&gw, &t, "q", &distinct).map_err(|e| e.to_string())?;
            ensure!(c.lf.is_nk() && c.answer == Answer::Na, "all distinct at |L|={len}");
            let mut with_empty = distinct.clone();
            let k = rng.gen_range(0..len);
            with_empty[k].answer = AnswerSet::new();
            let c = scun(&silent, &t, "q", &with_empty).map_err(|e| e.to_string())?;
            ensure!(c.lf == with_empty[k].lf && c.answer == Answer::Na, "empty candidate not chosen at |L|={len}");
            cases += 2;
        }
    }
    Ok(format!("{cases} pools"))
}

fn random_answer(rng: &mut rand_chacha::ChaCha8Rng) -> (Answer, AnswerSet) {
    let set: AnswerSet = (0..5).filter(|_| rng.gen_bool(0.4)).map(|i| Value::entity(format!("m.{i}"))).collect();
    (if rng.gen_bool(0.25) { Answer::Na } else { Answer::Values(set.clone()) }, set)
}

#[derive(serde::Deserialize)]
struct DialectPair {
    sexpr: String,
    sparql: String,
}

fn metrics() -> Check {
    let mut rng = common::rng(0x3e7);
    for _ in 0..1000 {
        let ((pred, _), (gold, _), (_, complete)) =
            (random_answer(&mut rng), random_answer(&mut rng), random_answer(&mut rng));
        let (r, l) = (f1_answers(&pred, &gold, &complete, false), f1_answers(&pred, &gold, &complete, true));
        if l < r {
            return Err(format!("{pred:?} {gold:?}: lenient {l} < regular {r}"));
        }
    }
    let mut matches = 0;
    for _ in 0..100 {
        let kb = common::random_kb(&mut rng, 10);
        let (a, b) = common::random_pair(&mut rng, &kb);
        for f in [&a, &b] {
            if f.is_nk() || f.query().is_some() {
                ensure!(em_s(f, f, &kb) == EmS::Match, "not reflexive on {}", f.surface());
            }
        }
        let ab = em_s(&a, &b, &kb);
        ensure!(ab == em_s(&b, &a, &kb), "not symmetric on {} / {}", a.surface(), b.surface());
        if ab == EmS::Match {
            matches += 1;
            if let (Some(p), Some(g)) = (a.query(), b.query()) {
                ensure!(execute(&kb, p) == execute(&kb, g), "match with different answers");
            }
        }
    }
    let kb = KnowledgeBase::load_dir(&common::fixtures().join("library")).unwrap();
    let text = std::fs::read_to_string(common::fixtures().join("dialect_pairs.jsonl")).unwrap();
    let pairs: Vec<DialectPair> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    ensure!(pairs.len() >= 20, "{} dialect pairs", pairs.len());
    for p in &pairs {
        let (s, q) = (LogicalForm::parse(Dialect::Sexpr, &p.sexpr), LogicalForm::parse(Dialect::Sparql, &p.sparql));
        ensure!(em_s(&s, &q, &kb) == EmS::Match, "{} / {}", p.sexpr, p.sparql);
    }
    Ok(format!("1000 records, 100 pairs ({matches} matches), {} dialect pairs", pairs.len()))
}

fn kb_bytes(kb: &KnowledgeBase) -> Vec<u8> {
    let dir = tempfile::tempdir().unwrap();
    kb.save_dir(dir.path()).unwrap();
    [std::fs::read(dir.path().join("schema.json")).unwrap(), std::fs::read(dir.path().join("data.jsonl")).unwrap()]
        .concat()
}

fn injection() -> Check {
    let start = Instant::now();
    let sizes = PlanSizes { classes: 1, relations: 1, entities: 4, facts: 15 };
    let mut labels = std::collections::BTreeMap::new();
    for seed in 0..4u64 {
        let mut rng = common::rng(0x1a0 + seed);
        let kb = common::random_kb(&mut rng, 40);
        let split = common::synthetic_split(&mut rng, &kb, 50);
        ensure!(split.examples.len() == 50, "split has {} questions", split.examples.len());
        let plan = random_plan(&kb, sizes, seed);
        let (pruned, out) = inject_unanswerability(&kb, &split, &plan).map_err(|e| e.to_string())?;
        for (before, after) in split.examples.iter().zip(&out.examples) {
            *labels.entry(after.label).or_insert(0) += 1;
            let q = before.gold_lf.query().unwrap();
            match after.label {
                Label::SchemaUnans => {
                    let LogicalForm::Parsed(pf) = &before.gold_lf else { unreachable!() };
                    let v = v2b_schema_presence(pf, &pruned, &Templates::default()).unwrap();
                    ensure!(!v.passed, "schema-unans {} passes V2b", pf.surface);
                }
                Label::DataUnans => {
                    ensure!(
                        execute(&pruned, q).is_empty() && !execute(&kb, q).is_empty(),
                        "data-unans {} not empty-on-reduced",
                        before.gold_lf.surface()
                    );
                }
                Label::Answerable => {}
            }
        }
        let (again_kb, again) = inject_unanswerability(&kb, &split, &random_plan(&kb, sizes, seed)).unwrap();
        ensure!(
            split_to_jsonl(&again) == split_to_jsonl(&out) && kb_bytes(&again_kb) == kb_bytes(&pruned),
            "re-injection differs"
        );
    }
    let counts = labels.iter().map(|(l, n)| format!("{l} {n}")).collect::<Vec<_>>().join(", ");
    Ok(format!("{counts}, {}", timed(Duration::from_secs(30), start)?))
}

fn answerable_mode() -> Check {
    let mut bad = 0;
    for seed in 0..3 {
        let mut rng = common::rng(0xa5 + seed);
        let kb = common::random_kb(&mut rng, 30);
        let split = common::synthetic_split(&mut rng, &kb, 50);
        let backend = common::ScriptedBackend::for_split(&mut rng, &kb, &split);
        let mut config = PipelineConfig::default();
        config.fun.answerable_mode = true;
        config.workers = 4;
        let outcomes = Pipeline::new(GenerationGateway::new(backend), config).run_dataset(&kb, &split);
        ensure!(outcomes.len() == 50, "{} outcomes", outcomes.len());
        ensure!(outcomes.iter().all(|o| o.error.is_none()), "pipeline errors");
        bad += outcomes.iter().filter(|o| !o.lf.is_nk() && o.answer == Answer::Na).count();
    }
    ensure!(bad == 0, "{bad} outcomes pair a form with NA");
    Ok("150 questions".into())
}

fn cli_run(manifest: &Path, out: &Path) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_funkbqa"))
        .args(["run", "--manifest"])
        .arg(manifest)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(o.status.success(), "run failed: {}", String::from_utf8_lossy(&o.stderr));
    Ok(())
}

fn reproducible_run() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let f = common::fixtures();
    let manifest = dir.path().join("run.json");
    let text = serde_json::json!({
        "kb": f.join("austen/kb1"),
        "dataset": f.join("austen.jsonl"),
        "backend": "mock",
        "mock": f.join("austen.json"),
        "seed": 3,
    });
    std::fs::write(&manifest, serde_json::to_string_pretty(&text).unwrap()).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    cli_run(&manifest, &a)?;
    cli_run(&manifest, &b)?;
    let files = ["manifest.json", "outcomes.jsonl", "traces.jsonl", "report.json", "records.csv"];
    for file in files {
        ensure!(std::fs::read(a.join(file)).ok() == std::fs::read(b.join(file)).ok(), "{file} differs");
    }
    Ok(format!("{} files identical", files.len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("three-kb walkthrough", three_kbs),
        ("music repair trace", music),
        ("executor vs brute force", executor),
        ("verifier properties", verifiers),
        ("consensus thresholds", consensus),
        ("metric properties", metrics),
        ("injection soundness", injection),
        ("answerable mode", answerable_mode),
        ("reproducible cli run", reproducible_run),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or(p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
