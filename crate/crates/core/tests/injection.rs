mod common;

use std::time::Instant;

use funkbqa::dataset::{
    inject_unanswerability, load_split, random_plan, sample_fewshots, save_split, split_to_jsonl, Category,
    DatasetError, Label, PlanSizes,
};
use funkbqa::executor::execute;
use funkbqa::gateway::Templates;
use funkbqa::kb::KnowledgeBase;
use funkbqa::query::LogicalForm;
use funkbqa::value::Answer;
use funkbqa::verifiers::v2b_schema_presence;

const SIZES: PlanSizes = PlanSizes { classes: 1, relations: 1, entities: 4, facts: 15 };

fn kb_bytes(kb: &KnowledgeBase) -> (Vec<u8>, Vec<u8>) {
    let dir = tempfile::tempdir().unwrap();
    kb.save_dir(dir.path()).unwrap();
    (std::fs::read(dir.path().join("schema.json")).unwrap(), std::fs::read(dir.path().join("data.jsonl")).unwrap())
}

#[test]
fn injected_labels_are_sound() {
    let start = Instant::now();
    let mut labels = std::collections::BTreeMap::new();
    for seed in 0..8u64 {
        let mut rng = common::rng(seed);
        let kb = common::random_kb(&mut rng, 40);
        let split = common::synthetic_split(&mut rng, &kb, 50);
        let plan = random_plan(&kb, SIZES, seed);
        let (pruned, out) = inject_unanswerability(&kb, &split, &plan).unwrap();
        for (before, after) in split.examples.iter().zip(&out.examples) {
            *labels.entry(after.label).or_insert(0) += 1;
            let q = before.gold_lf.query().unwrap();
            assert!(!execute(&kb, q).is_empty());
            assert!(after.category.fits(after.label));
            assert_eq!(after.complete_kb_answer, execute(&kb, q));
            match after.label {
                Label::SchemaUnans => {
                    let LogicalForm::Parsed(pf) = &before.gold_lf else { unreachable!() };
                    let v = v2b_schema_presence(pf, &pruned, &Templates::default()).unwrap();
                    assert!(!v.passed, "{}", pf.surface);
                    assert_eq!((&after.gold_lf, &after.gold_answer), (&LogicalForm::Nk, &Answer::Na));
                }
                Label::DataUnans => {
                    assert!(execute(&pruned, after.gold_lf.query().unwrap()).is_empty());
                    assert_eq!(after.gold_answer, Answer::Na);
                }
                Label::Answerable => {
                    assert_eq!(after.gold_answer, Answer::Values(execute(&pruned, q)));
                }
            }
        }
        let (again_kb, again) = inject_unanswerability(&kb, &split, &random_plan(&kb, SIZES, seed)).unwrap();
        assert_eq!(split_to_jsonl(&again), split_to_jsonl(&out));
        assert_eq!(kb_bytes(&again_kb), kb_bytes(&pruned));
    }
    assert!(labels.len() == 3, "{labels:?}");
    assert!(start.elapsed().as_secs() < 30);
}

#[test]
fn missing_entity_vs_missing_fact() {
    let kb = KnowledgeBase::load_dir(&common::fixtures().join("library")).unwrap();
    let ex = funkbqa::dataset::QAExample::answerable(
        "which books did the prize winner write?",
        vec![],
        LogicalForm::from_text("(JOIN (R book.author.works_written) (JOIN (R award.award.winner) m.w1))"),
        &kb,
    );
    let split = funkbqa::dataset::DatasetSplit { name: "t".into(), examples: vec![ex] };
    let by_entity = funkbqa::kb::DeletionPlan { entities: vec!["m.a3".into()], ..Default::default() };
    let (_, out) = inject_unanswerability(&kb, &split, &by_entity).unwrap();
    assert_eq!((out.examples[0].label, out.examples[0].category), (Label::DataUnans, Category::MissingEntity));
    let fact = kb.facts().iter().find(|f| f.relation == "award.award.winner").unwrap().clone();
    let by_fact = funkbqa::kb::DeletionPlan { facts: vec![fact], ..Default::default() };
    let (_, out) = inject_unanswerability(&kb, &split, &by_fact).unwrap();
    assert_eq!((out.examples[0].label, out.examples[0].category), (Label::DataUnans, Category::MissingFact));
    let by_topic = funkbqa::kb::DeletionPlan { entities: vec!["m.w1".into()], ..Default::default() };
    let (_, out) = inject_unanswerability(&kb, &split, &by_topic).unwrap();
    assert_eq!((out.examples[0].label, out.examples[0].category), (Label::SchemaUnans, Category::MissingTopicEntity));
}

#[test]
fn empty_gold_answer_is_rejected() {
    let kb = KnowledgeBase::load_dir(&common::fixtures().join("library")).unwrap();
    let mut ex =
        funkbqa::dataset::QAExample::answerable("q", vec![], LogicalForm::from_text("(JOIN book.book.pages 1)"), &kb);
    ex.gold_answer = Answer::Values(Default::default());
    let split = funkbqa::dataset::DatasetSplit { name: "t".into(), examples: vec![ex] };
    let err = inject_unanswerability(&kb, &split, &Default::default()).unwrap_err();
    assert!(matches!(err, DatasetError::Precondition { index: 0, .. }), "{err}");
}

#[test]
fn splits_round_trip_and_sample() {
    let mut rng = common::rng(3);
    let kb = common::random_kb(&mut rng, 40);
    let split = common::synthetic_split(&mut rng, &kb, 30);
    let (_, out) = inject_unanswerability(&kb, &split, &random_plan(&kb, SIZES, 3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dev.jsonl");
    save_split(&out, &path).unwrap();
    let back = load_split(&path).unwrap();
    assert_eq!(back.name, "dev");
    assert_eq!(back.examples, out.examples);

    let n_ans = out.examples.iter().filter(|e| e.label.is_answerable()).count().min(3);
    let n_unans = out.examples.iter().filter(|e| !e.label.is_answerable()).count().min(2);
    let shots = sample_fewshots(&out, n_ans, n_unans, 9).unwrap();
    assert_eq!(shots, sample_fewshots(&out, n_ans, n_unans, 9).unwrap());
    let labels: Vec<bool> = shots.examples.iter().map(|e| e.label.is_answerable()).collect();
    assert_eq!(labels.iter().filter(|a| **a).count(), n_ans);
    assert!(labels.windows(2).all(|w| w[0] >= w[1]), "answerable first: {labels:?}");
    let err = sample_fewshots(&out, out.examples.len() + 1, 0, 9).unwrap_err();
    assert!(matches!(err, DatasetError::InsufficientExamples { .. }));
}
