mod common;

use funkbqa::gateway::{GenerationGateway, MatchKind, MockBackend, MockRule, Templates};
use funkbqa::kb::KnowledgeBase;
use funkbqa::pipeline::{render_generation_prompt, select_best, Candidate};
use funkbqa::query::{parse_sparql, LogicalForm};
use funkbqa::retrieval::{LinkedEntity, RelationEntry, RetrievalContext};

#[test]
fn newspaper_question_prompt_matches_golden() {
    let rel =
        |id: &str, d: &str, r: &str| RelationEntry { id: id.into(), signature: format!("{id} (type:{d} R type:{r})") };
    let ctx = RetrievalContext {
        classes: vec!["education.school_newspaper".into(), "book.newspaper".into()],
        relations: vec![
            rel("education.school_newspaper.school", "education.school_newspaper", "education.educational_institution"),
            rel("book.newspaper_issue.newspaper", "book.newspaper_issue", "book.newspaper"),
        ],
        paths: vec![parse_sparql(
            "SELECT DISTINCT ?x WHERE { ns:m.0hpsvmv ns:book.newspaper.circulation_areas ?a . ?a ns:periodicals.newspapers ?x . ?x ns:type.object.type ns:book.newspaper }",
        )
        .unwrap()],
        linked_entities: vec![LinkedEntity { mention: "the onion".into(), id: "m.0hpsvmv".into() }],
    };
    let prompt = render_generation_prompt(
        &Templates::default(),
        &KnowledgeBase::default(),
        "which school newspaper deals with the same subject as the onion?",
        &ctx,
        &[],
        false,
    )
    .unwrap();
    let golden = std::fs::read_to_string(common::fixtures().join("onion_prompt.txt")).unwrap();
    assert_eq!(prompt, golden);
}

fn paraphrase(iteration: usize, text: &str) -> Candidate {
    Candidate {
        lf: LogicalForm::from_text(&format!("SELECT DISTINCT ?x WHERE {{ ?x ns:film.film.r{iteration} ns:m.0sf }}")),
        answer: Default::default(),
        weak_profile: vec![],
        back_translation: Some(text.into()),
        iteration,
    }
}

#[test]
fn selection_prompt_and_choice() {
    let cands = [
        paraphrase(1, "Which surfing films has Sarah Finn directed the casting for?"),
        paraphrase(2, "Which surfing films has Sarah Finn been the casting director for?"),
    ];
    let expected = "orig_nl_qn = which surf films has sarah finn served as the casting director?\n\
1. pred_nl: Which surfing films has Sarah Finn directed the casting for?\n\
2. pred_nl: Which surfing films has Sarah Finn been the casting director for?\n\
of the 2 predicted nl questions, which is closest to the original nl question. Even if none is very close, return the one that is semantically closest? Please explain your answer as well";
    let gw = GenerationGateway::mock(MockBackend::new(vec![MockRule::new(MatchKind::Exact, expected, "2")]));
    let refs: Vec<&Candidate> = cands.iter().collect();
    let picked = select_best(
        &gw,
        &Templates::default(),
        "which surf films has sarah finn served as the casting director?",
        &refs,
    )
    .unwrap();
    assert_eq!(picked, (1, false));
    assert_eq!(gw.calls(), 1);
    assert_eq!(select_best(&gw, &Templates::default(), "q", &refs[..1]).unwrap(), (0, false));
    assert_eq!(gw.calls(), 1);
}
