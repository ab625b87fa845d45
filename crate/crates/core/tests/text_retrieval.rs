mod common;

use datatrace_core::retrieval::ceil_fraction;
use datatrace_core::{build_index, load_index, retrieve, tokenize, Corpus, Cutoff, Error, TrainingSample};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{exact_ceil, oracle_tokens, random_captions, OracleIndex};

fn corpus(docs: &[(String, String)]) -> Corpus {
    let samples = docs
        .iter()
        .map(|(id, caption)| TrainingSample {
            id: id.clone(),
            caption: caption.clone(),
            image_path: format!("{id}.png").into(),
        })
        .collect();
    Corpus::new(samples, ".").unwrap()
}

fn pairs(captions: &[&str]) -> Vec<(String, String)> {
    captions
        .iter()
        .enumerate()
        .map(|(i, c)| (format!("s{i}"), c.to_string()))
        .collect()
}

#[test]
fn hand_computed_scores() {
    // N = 3; df(red) = 2, df(dress) = 1, df(shoes) = 1, df(blue) = 1, df(shirt) = 1
    let docs = pairs(&["red dress", "blue shirt", "red shoes"]);
    let index = build_index(&corpus(&docs)).unwrap();
    let hits = retrieve(&index, "red dress", Cutoff::TopK(3)).unwrap();
    let idf_red = (4.0f64 / 3.0).ln() + 1.0;
    let idf_rare = 2.0f64.ln() + 1.0;
    let q_norm = (idf_red * idf_red + idf_rare * idf_rare).sqrt();
    let ids: Vec<&str> = hits.ids().collect();
    assert_eq!(ids, ["s0", "s2"]);
    assert!((hits.candidates[0].text_score - 1.0).abs() < 1e-12);
    let expected = idf_red * idf_red / (q_norm * q_norm);
    assert!((hits.candidates[1].text_score - expected).abs() < 1e-12);
}

#[test]
fn tie_break_is_by_id() {
    let docs = vec![
        ("b".to_string(), "green hat".to_string()),
        ("a".to_string(), "green hat".to_string()),
        ("c".to_string(), "green coat".to_string()),
    ];
    let index = build_index(&corpus(&docs)).unwrap();
    let hits = retrieve(&index, "green hat", Cutoff::TopK(3)).unwrap();
    let ids: Vec<&str> = hits.ids().collect();
    assert_eq!(ids, ["a", "b", "c"]);
}

#[test]
fn fraction_cutoff_keeps_at_least_one() {
    let docs = pairs(&["red dress", "red shirt", "red shoes", "red hat"]);
    let index = build_index(&corpus(&docs)).unwrap();
    let hits = retrieve(&index, "red", Cutoff::TopFraction(0.002)).unwrap();
    assert_eq!(hits.len(), 1);
}

#[test]
fn unknown_words_give_empty_result() {
    let docs = pairs(&["red dress", "blue shirt"]);
    let index = build_index(&corpus(&docs)).unwrap();
    assert!(retrieve(&index, "zebra", Cutoff::TopK(5)).unwrap().is_empty());
}

#[test]
fn invalid_cutoffs_are_rejected() {
    let docs = pairs(&["red dress"]);
    let index = build_index(&corpus(&docs)).unwrap();
    for cutoff in [Cutoff::TopK(0), Cutoff::TopFraction(0.0), Cutoff::TopFraction(1.5)] {
        assert!(matches!(retrieve(&index, "red", cutoff), Err(Error::InvalidCutoff(_))));
    }
}

#[test]
fn captions_without_tokens_cannot_be_indexed() {
    let docs = pairs(&["a b", "- !"]);
    assert!(matches!(build_index(&corpus(&docs)), Err(Error::NoTokens)));
}

#[test]
fn reloaded_index_ranks_identically() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let docs = random_captions(&mut rng, 300, 60);
    let index = build_index(&corpus(&docs)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("index.jsonl");
    index.save(&path).unwrap();
    let loaded = load_index(&path).unwrap();
    for (_, caption) in docs.iter().take(30) {
        let a = retrieve(&index, caption, Cutoff::TopK(25)).unwrap();
        let b = retrieve(&loaded, caption, Cutoff::TopK(25)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn corrupt_index_files_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("index.jsonl");
    std::fs::write(&path, "{\"format\":\"tfidf-index\",\"version\":99}\n").unwrap();
    assert!(matches!(
        load_index(&path),
        Err(Error::VersionMismatch { found: 99, .. })
    ));
    std::fs::write(&path, "not json\n").unwrap();
    assert!(matches!(load_index(&path), Err(Error::CorruptIndex(_))));
}

proptest! {
    #[test]
    fn tokenizer_matches_reference(text in "[ -~]{0,60}") {
        prop_assert_eq!(tokenize(&text), oracle_tokens(&text));
    }

    #[test]
    fn ceil_fraction_is_exact_for_short_decimals(millis in 1u32..=1000, n in 0usize..100_000) {
        let f = millis as f64 / 1000.0;
        prop_assert_eq!(ceil_fraction(f, n), exact_ceil(f, n));
    }

    #[test]
    fn rankings_match_brute_force(seed in any::<u64>(), n in 1usize..80, k in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let docs = random_captions(&mut rng, n, 25);
        let Ok(index) = build_index(&corpus(&docs)) else { return Ok(()) };
        let oracle = OracleIndex::build(&docs);
        let prompt = &docs[(seed % n as u64) as usize].1;
        let got = retrieve(&index, prompt, Cutoff::TopK(k)).unwrap();
        let mut want = oracle.rank(prompt);
        want.truncate(k);
        let got: Vec<(String, f64)> = got.candidates.into_iter().map(|c| (c.id, c.text_score)).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn larger_k_extends_the_ranking(seed in any::<u64>(), k in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let docs = random_captions(&mut rng, 60, 15);
        let Ok(index) = build_index(&corpus(&docs)) else { return Ok(()) };
        let prompt = &docs[0].1;
        let short = retrieve(&index, prompt, Cutoff::TopK(k)).unwrap();
        let long = retrieve(&index, prompt, Cutoff::TopK(k + 5)).unwrap();
        prop_assert_eq!(&long.candidates[..short.len()], &short.candidates[..]);
        prop_assert!(short.candidates.iter().all(|c| c.text_score > 0.0 && c.text_score <= 1.0));
    }
}
