use funkbqa::gateway::{GenerationGateway, MatchKind, MockBackend, MockRule, Templates};
use funkbqa::pipeline::{scun, Candidate, ConsensusBranch};
use funkbqa::query::LogicalForm;
use funkbqa::value::{Answer, AnswerSet, Value};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cand(iteration: usize, answer: AnswerSet) -> Candidate {
    Candidate {
        lf: LogicalForm::from_text(&format!("SELECT DISTINCT ?x WHERE {{ ?x ns:r{iteration} ns:e }}")),
        answer,
        weak_profile: vec![],
        back_translation: Some(format!("question {iteration}")),
        iteration,
    }
}

fn set(id: &str) -> AnswerSet {
    [Value::entity(id)].into()
}

fn first_choice() -> GenerationGateway {
    GenerationGateway::mock(MockBackend::new(vec![MockRule::new(MatchKind::Substring, "pred_nl", "1")]))
}

/// `support` copies of one answer, every other candidate distinct, in a
/// shuffled order.
fn pool(len: usize, support: usize, seed: u64) -> Vec<Candidate> {
    let mut answers: Vec<AnswerSet> =
        (0..len).map(|i| if i < support { set("m.top") } else { set(&format!("m.o{i}")) }).collect();
    answers.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    answers.into_iter().enumerate().map(|(i, a)| cand(i + 1, a)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn majority_threshold(len in 2usize..=6, seed in any::<u64>()) {
        let t = len / 2;
        for support in [t, t + 1] {
            let l = pool(len, support, seed);
            let c = scun(&first_choice(), &Templates::default(), "q", &l).unwrap();
            let consensus = support > len / 2;
            if consensus {
                prop_assert_eq!(c.trace.branch, ConsensusBranch::NonEmptyConsensus);
                prop_assert_eq!(&c.answer, &Answer::Values(set("m.top")));
                let chosen = &l[c.trace.selected_iteration.unwrap() - 1];
                prop_assert_eq!(&chosen.answer, &set("m.top"));
                prop_assert_eq!(&c.lf, &chosen.lf);
            } else {
                prop_assert_eq!(c.trace.branch, ConsensusBranch::NoConsensus);
                prop_assert_eq!((c.lf, c.answer), (LogicalForm::Nk, Answer::Na));
            }
        }
    }

    #[test]
    fn all_distinct_is_nk(len in 2usize..=6, seed in any::<u64>()) {
        let l = pool(len, 1, seed);
        let c = scun(&first_choice(), &Templates::default(), "q", &l).unwrap();
        prop_assert_eq!((c.lf, c.answer), (LogicalForm::Nk, Answer::Na));
    }

    #[test]
    fn single_empty_candidate_is_chosen(len in 2usize..=6, seed in any::<u64>()) {
        let mut l = pool(len, 1, seed);
        let k = (seed % len as u64) as usize;
        l[k].answer = AnswerSet::new();
        let silent = GenerationGateway::mock(MockBackend::default());
        let c = scun(&silent, &Templates::default(), "q", &l).unwrap();
        prop_assert_eq!(c.trace.branch, ConsensusBranch::EmptyAnswer);
        prop_assert_eq!(c.trace.selected_iteration, Some(k + 1));
        prop_assert_eq!((c.lf, c.answer), (l[k].lf.clone(), Answer::Na));
        prop_assert!(c.trace.exchanges.is_empty());
    }
}
