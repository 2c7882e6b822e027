mod common;

use common::*;
use proptest::prelude::*;
use uxsim_core::{AnswerValue, SurveyAnswer};
use uxsim_study::{compute_sus, sus_from_survey, SusError};

#[test]
fn worked_examples() {
    assert_eq!(compute_sus(&[3; 10]).unwrap(), 50.0);
    assert_eq!(compute_sus(&[5, 1, 5, 1, 5, 1, 5, 1, 5, 1]).unwrap(), 100.0);
    assert_eq!(compute_sus(&[1, 5, 1, 5, 1, 5, 1, 5, 1, 5]).unwrap(), 0.0);
    assert_eq!(compute_sus(&[4, 2, 4, 2, 4, 2, 4, 2, 4, 2]).unwrap(), 75.0);
}

#[test]
fn bad_inputs() {
    assert_eq!(compute_sus(&[3; 9]), Err(SusError::MissingItems { found: 9 }));
    assert!(matches!(compute_sus(&[3, 3, 3, 3, 6, 3, 3, 3, 3, 3]), Err(SusError::OutOfScale { item: 5, value: 6 })));
    assert!(compute_sus(&[0; 10]).is_err());
}

#[test]
fn every_table_score_has_answers() {
    for &(_, _, _, _, _, sus, _) in &TABLE {
        assert_eq!(compute_sus(&sus_answers_for(sus)).unwrap(), sus);
    }
}

#[test]
fn survey_answers_are_matched_by_tag() {
    let qs = placeholder_sus();
    let mut answers: Vec<SurveyAnswer> =
        (1..=10).rev().map(|i| SurveyAnswer { id: format!("sus_{i}"), answer: AnswerValue::Scale(if i % 2 == 1 { 5 } else { 1 }) }).collect();
    assert_eq!(sus_from_survey(&qs, &answers).unwrap(), 100.0);
    answers.retain(|a| a.id != "sus_4");
    assert!(matches!(sus_from_survey(&qs, &answers), Err(SusError::MissingItems { found: 9 })));
}

proptest! {
    #[test]
    fn score_is_bounded_and_quantized(a in proptest::array::uniform10(1i64..=5)) {
        let s = compute_sus(&a).unwrap();
        prop_assert!((0.0..=100.0).contains(&s));
        prop_assert_eq!((s / 2.5).fract(), 0.0);
    }

    #[test]
    fn agreement_moves_the_score_the_right_way(a in proptest::array::uniform10(1i64..=5), item in 0usize..10) {
        let base = compute_sus(&a).unwrap();
        let mut up = a;
        prop_assume!(up[item] < 5);
        up[item] += 1;
        let s = compute_sus(&up).unwrap();
        // Odd items are positively worded, even items negatively.
        if item % 2 == 0 { prop_assert_eq!(s, base + 2.5) } else { prop_assert_eq!(s, base - 2.5) }
    }
}
