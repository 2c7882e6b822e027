use uxsim_web::corpus::{bundled_corpus_dir, run_corpus};

#[tokio::test]
async fn fixture_corpus_matches_golden_labels() {
    let results = run_corpus(&bundled_corpus_dir()).await.unwrap();
    assert!(results.len() >= 10, "corpus has {} pages", results.len());
    let mut failures = Vec::new();
    for r in &results {
        if !r.passed() {
            failures.push(format!("{}:\n  {}\n--- html ---\n{}", r.name, r.mismatches.join("\n  "), r.page.html));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n\n"));
}

#[tokio::test]
async fn reparsing_is_deterministic() {
    let first = run_corpus(&bundled_corpus_dir()).await.unwrap();
    let second = run_corpus(&bundled_corpus_dir()).await.unwrap();
    for (a, b) in first.iter().zip(&second) {
        assert_eq!(a.page.html, b.page.html, "{}", a.name);
        let ids = |p: &uxsim_web::ParsedPage| p.elements.iter().map(|e| e.semantic_id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&a.page), ids(&b.page));
    }
}
