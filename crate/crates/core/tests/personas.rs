use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uxsim_core::persona::{generate_batch, generate_persona, plan_assignments, quota_counts, sample_demographics};
use uxsim_core::{
    Assignment, BatchOptions, DemographicField, DemographicSpec, Persona, PersonaBatch, PersonaError, PromptSet,
    SamplingMode,
};
use uxsim_llm::{Gateway, MockProvider, MockRule};

const SPIDER: &str = "buy a large, inflatable spider decoration for halloween";

fn sheet(name: &str, gender: &str, with_habits: bool) -> String {
    let habits = if with_habits {
        "Shopping Habits:\nBuys most things online on Sunday mornings and always checks the return policy.\n\n"
    } else {
        ""
    };
    format!(
        "Persona: {name}\n\nBackground:\nGrew up near the coast and now lives in a small apartment with a cat.\n\n\
         Demographics:\nAge: 34\nGender: {gender}\nEducation: Bachelor's degree\nProfession: Pharmacist\nIncome: $72,000\n\n\
         Financial Situation:\nComfortable, saving for a house deposit.\n\n{habits}\
         Professional Life:\nWorks rotating shifts at a hospital pharmacy.\n\n\
         Personal Style:\nMinimal, dark colours, good boots.\n\nIntent:\n{SPIDER}\n"
    )
}

fn gender_spec(mode: SamplingMode) -> DemographicSpec {
    DemographicSpec::new(vec![DemographicField::uniform("gender", ["male", "female", "non-binary"])], mode).unwrap()
}

/// Replies with a fresh, well-formed sheet per call.
fn sheet_writer() -> Arc<MockProvider> {
    let n = AtomicUsize::new(0);
    Arc::new(MockProvider::new().with_rule(MockRule::for_label("persona").respond_with(move |_| {
        let i = n.fetch_add(1, Ordering::Relaxed);
        sheet(&format!("Person {i}"), "unspecified", true)
    })))
}

#[test]
fn parses_full_sheet() {
    let p = Persona::parse(&sheet("Rowan Ellis", "Male", true)).unwrap();
    assert_eq!(p.name, "Rowan Ellis");
    assert_eq!(p.intent, SPIDER);
    assert_eq!(p.age(), Some(34));
    assert_eq!(p.gender(), Some("Male"));
    assert_eq!(p.income(), Some(72000.0));
    assert!(p.missing_core_demographics().is_empty());
    assert_eq!(Persona::parse(&p.to_text()).unwrap(), p);
    let example = Persona::example();
    assert_eq!(example.intent, SPIDER);
    assert!(example.missing_core_demographics().is_empty());
}

#[test]
fn missing_section_is_malformed() {
    let err = Persona::parse(&sheet("A", "Male", false)).unwrap_err();
    assert!(err.to_string().contains("Shopping Habits"), "{err}");
}

#[test]
fn unparsed_age_is_flagged() {
    let text = sheet("A", "Male", true).replace("Age: 34", "Age: mid-thirties");
    let p = Persona::parse(&text).unwrap();
    assert_eq!(p.age(), None);
    assert_eq!(p.demographic("age"), Some("mid-thirties"));
    assert!(p.flags.contains(&"age_unparsed".to_string()));
}

#[tokio::test]
async fn generated_persona_follows_assignment() {
    let provider =
        Arc::new(MockProvider::new().with_rule(MockRule::for_label("persona").reply(sheet("Jo", "female", true))));
    let gw = Gateway::mock(provider.clone());
    let prompts = PromptSet::default();
    let mut assignment = Assignment::new();
    assignment.insert("gender".into(), "female".into());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = generate_persona(&gw, &prompts, &Persona::example(), &assignment, &mut rng).await.unwrap();
    assert_eq!(p.gender(), Some("female"));
    assert_eq!(p.intent, SPIDER);
    let prompt = provider.requests()[0].transcript();
    assert!(prompt.contains("- have the gender female"));
    assert!(prompt.contains(&Persona::example().background));
}

#[tokio::test]
async fn assignment_overrides_disagreeing_sheet() {
    let provider = Arc::new(MockProvider::always(sheet("Jo", "Male", true)));
    let mut assignment = Assignment::new();
    assignment.insert("gender".into(), "non-binary".into());
    assignment.insert("age".into(), "18-25".into());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p = generate_persona(&Gateway::mock(provider), &PromptSet::default(), &Persona::example(), &assignment, &mut rng)
        .await
        .unwrap();
    assert_eq!(p.gender(), Some("non-binary"));
    assert!((18..=25).contains(&p.age().unwrap()));
    assert!(p.flags.contains(&"age_adjusted".to_string()));
    assert!(p.satisfies(&assignment));
}

#[tokio::test]
async fn sheet_without_shopping_habits_is_schema_violation() {
    let provider = Arc::new(MockProvider::always(sheet("Jo", "Male", false)));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let err = generate_persona(
        &Gateway::mock(provider.clone()),
        &PromptSet::default(),
        &Persona::example(),
        &Assignment::new(),
        &mut rng,
    )
    .await
    .unwrap_err();
    assert!(matches!(err, PersonaError::SchemaViolation(ref m) if m.contains("Shopping Habits")), "{err:?}");
    assert_eq!(provider.request_count(), 4);
}

#[test]
fn degenerate_field_always_samples_its_label() {
    let spec = DemographicSpec::new(vec![DemographicField::new("x", [("only", 1.0)])], SamplingMode::WeightedRandom).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..50 {
        assert_eq!(sample_demographics(&spec, &mut rng)["x"], "only");
    }
}

#[test]
fn spec_validation() {
    assert!(DemographicSpec::new(vec![DemographicField::new("x", Vec::<(&str, f64)>::new())], SamplingMode::ExactQuota).is_err());
    assert!(DemographicSpec::new(vec![DemographicField::new("x", [("a", 0.0)])], SamplingMode::ExactQuota).is_err());
    assert!(DemographicSpec::new(vec![DemographicField::new("x", [("a", -1.0), ("b", 2.0)])], SamplingMode::ExactQuota).is_err());
    let dup = vec![DemographicField::uniform("x", ["a"]), DemographicField::uniform("X", ["b"])];
    assert!(DemographicSpec::new(dup, SamplingMode::ExactQuota).is_err());
}

#[test]
fn exact_quota_21_is_7_7_7() {
    let spec = gender_spec(SamplingMode::ExactQuota);
    assert_eq!(quota_counts(&spec.fields[0], 21), vec![7, 7, 7]);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let plan = plan_assignments(&spec, 21, &mut rng);
    for g in ["male", "female", "non-binary"] {
        assert_eq!(plan.iter().filter(|a| a["gender"] == g).count(), 7);
    }
}

proptest! {
    #[test]
    fn quota_counts_sum_and_stay_within_one(
        weights in prop::collection::vec(0.0f64..10.0, 1..6),
        n in 1usize..500,
    ) {
        prop_assume!(weights.iter().sum::<f64>() > 0.0);
        let values: Vec<(String, f64)> = weights.iter().enumerate().map(|(i, w)| (format!("v{i}"), *w)).collect();
        let field = DemographicField::new("f", values);
        let counts = quota_counts(&field, n);
        prop_assert_eq!(counts.iter().sum::<usize>(), n);
        let total: f64 = weights.iter().sum();
        for (c, w) in counts.iter().zip(&weights) {
            prop_assert!((*c as f64 - n as f64 * w / total).abs() < 1.0);
        }
    }
}

#[tokio::test]
async fn first_persona_uses_the_seed() {
    let gw = Gateway::mock(sheet_writer());
    let batch = generate_batch(&gw, &PromptSet::default(), &gender_spec(SamplingMode::WeightedRandom), &Persona::example(), 1, 5, BatchOptions::default())
        .await
        .unwrap();
    assert_eq!(batch.personas.len(), 1);
    assert_eq!(batch.provenance[0].example_index, 0);
}

#[tokio::test]
async fn batches_are_reproducible() {
    let run = |seed| async move {
        let gw = Gateway::mock(sheet_writer());
        generate_batch(&gw, &PromptSet::default(), &gender_spec(SamplingMode::WeightedRandom), &Persona::example(), 12, seed, BatchOptions::default())
            .await
            .unwrap()
    };
    let a = run(42).await;
    let b = run(42).await;
    let idx = |b: &PersonaBatch| b.provenance.iter().map(|p| (p.example_index, p.assignment.clone())).collect::<Vec<_>>();
    assert_eq!(idx(&a), idx(&b));
    assert_eq!(a.personas, b.personas);
    assert!(a.provenance_is_valid());
    assert!(a.provenance.iter().any(|p| p.example_index > 0));
}

#[tokio::test]
async fn example_is_the_chosen_predecessor() {
    let provider = sheet_writer();
    let gw = Gateway::mock(provider.clone());
    let batch = generate_batch(&gw, &PromptSet::default(), &gender_spec(SamplingMode::ExactQuota), &Persona::example(), 15, 11, BatchOptions::default())
        .await
        .unwrap();
    let requests = provider.requests();
    for (p, req) in batch.provenance.iter().zip(&requests) {
        let example = if p.example_index == 0 { &batch.seed_example } else { batch.generated(p.example_index).unwrap() };
        assert!(req.transcript().contains(&format!("Persona: {}\n", example.name)), "persona {}", p.index);
    }
}

#[tokio::test]
async fn windowed_batches_keep_the_diversity_rule() {
    let gw = Gateway::mock(sheet_writer());
    let batch = generate_batch(&gw, &PromptSet::default(), &gender_spec(SamplingMode::WeightedRandom), &Persona::example(), 40, 3, BatchOptions { window: 4 })
        .await
        .unwrap();
    assert!(batch.provenance_is_valid());
    for p in &batch.provenance {
        assert!(p.example_index == 0 || p.example_index + 4 <= p.index, "{p:?}");
    }
}

#[tokio::test]
async fn failures_leave_a_marked_partial_batch() {
    let n = AtomicUsize::new(0);
    let provider = Arc::new(MockProvider::new().with_rule(MockRule::any().respond_with(move |_| {
        let i = n.fetch_add(1, Ordering::Relaxed);
        // The second persona exhausts its retries (4 calls).
        sheet(&format!("P{i}"), "x", !(1..=4).contains(&i))
    })));
    let err = generate_batch(&Gateway::mock(provider), &PromptSet::default(), &gender_spec(SamplingMode::WeightedRandom), &Persona::example(), 3, 1, BatchOptions::default())
        .await
        .unwrap_err();
    let PersonaError::Incomplete { failed, batch } = err else { panic!("{err:?}") };
    assert_eq!(failed, 1);
    assert_eq!(batch.personas.len(), 2);
    assert!(batch.provenance[1].error.is_some());
    assert!(batch.provenance_is_valid());
    let dir = tempfile::tempdir().unwrap();
    batch.write_dir(dir.path()).unwrap();
    assert!(dir.path().join("persona_0001.txt").exists());
    assert!(!dir.path().join("persona_0002.txt").exists());
    assert_eq!(PersonaBatch::read_dir(dir.path()).unwrap(), *batch);
}

#[tokio::test]
async fn thousand_persona_batch() {
    let started = std::time::Instant::now();
    let gw = Gateway::mock(sheet_writer());
    let spec = DemographicSpec::new(
        vec![
            DemographicField::uniform("gender", ["male", "female", "non-binary"]),
            DemographicField::new("shopping frequency", [("weekly", 2.0), ("monthly", 1.0), ("yearly", 1.0)]),
        ],
        SamplingMode::WeightedRandom,
    )
    .unwrap();
    let batch = generate_batch(&gw, &PromptSet::default(), &spec, &Persona::example(), 1000, 2024, BatchOptions::default())
        .await
        .unwrap();
    assert_eq!(batch.personas.len(), 1000);
    assert!(batch.provenance_is_valid());
    for g in ["male", "female", "non-binary"] {
        let share = batch.personas.iter().filter(|p| p.gender() == Some(g)).count() as f64 / 1000.0;
        assert!((share - 1.0 / 3.0).abs() <= 0.05, "{g}: {share}");
    }
    assert!(batch.personas.iter().zip(&batch.provenance).all(|(p, prov)| p.satisfies(&prov.assignment)));
    assert!(started.elapsed().as_secs_f64() < 10.0);
}
