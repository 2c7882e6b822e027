//! System Usability Scale scoring.

use uxsim_core::{SurveyAnswer, SurveyQuestion};

pub const SUS_ITEMS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SusError {
    #[error("SUS needs exactly {SUS_ITEMS} tagged answers, found {found}")]
    MissingItems { found: usize },
    #[error("SUS item {item} must be within 1..=5, got {value}")]
    OutOfScale { item: usize, value: i64 },
}

/// Item number for a `sus:N` tag.
pub fn sus_item(tag: &str) -> Option<usize> {
    let n: usize = tag.strip_prefix("sus:")?.trim().parse().ok()?;
    (1..=SUS_ITEMS).contains(&n).then_some(n)
}

/// Score from the ten answers in item order.
pub fn compute_sus(answers: &[i64]) -> Result<f64, SusError> {
    if answers.len() != SUS_ITEMS {
        return Err(SusError::MissingItems { found: answers.len() });
    }
    let mut sum = 0;
    for (i, &a) in answers.iter().enumerate() {
        if !(1..=5).contains(&a) {
            return Err(SusError::OutOfScale { item: i + 1, value: a });
        }
        // Item 1 is odd (positively worded).
        sum += if i % 2 == 0 { a - 1 } else { 5 - a };
    }
    Ok(2.5 * sum as f64)
}

/// Collects the `sus:1`..`sus:10` answers of a survey and scores them.
pub fn sus_from_survey(questions: &[SurveyQuestion], answers: &[SurveyAnswer]) -> Result<f64, SusError> {
    let mut items: [Option<i64>; SUS_ITEMS] = [None; SUS_ITEMS];
    let mut found = 0;
    for q in questions {
        let Some(n) = q.instrument_tag.as_deref().and_then(sus_item) else { continue };
        let Some(v) = answers.iter().find(|a| a.id == q.id).and_then(|a| a.answer.as_scale()) else { continue };
        if items[n - 1].replace(v).is_none() {
            found += 1;
        }
    }
    if found != SUS_ITEMS {
        return Err(SusError::MissingItems { found });
    }
    compute_sus(&items.map(|v| v.expect("all ten present")))
}

/// The ten SUS items as 1..5 Likert questions with ids `sus_1`..`sus_10`.
/// Item wording is supplied by the caller.
pub fn sus_questions<S: AsRef<str>>(texts: &[S; SUS_ITEMS]) -> Vec<SurveyQuestion> {
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| SurveyQuestion::likert(format!("sus_{}", i + 1), t.as_ref(), 1, 5).tagged(format!("sus:{}", i + 1)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags() {
        assert_eq!(sus_item("sus:1"), Some(1));
        assert_eq!(sus_item("sus:10"), Some(10));
        assert_eq!(sus_item("sus:11"), None);
        assert_eq!(sus_item("nps:1"), None);
    }

    #[test]
    fn errors() {
        assert_eq!(compute_sus(&[3; 9]), Err(SusError::MissingItems { found: 9 }));
        let mut a = [3; 10];
        a[4] = 6;
        assert_eq!(compute_sus(&a), Err(SusError::OutOfScale { item: 5, value: 6 }));
    }
}
