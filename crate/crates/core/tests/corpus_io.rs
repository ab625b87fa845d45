use datatrace_core::corpus::{parse_manifest, Issue};
use datatrace_core::image_features::{parse_embeddings, sidecar_header, sidecar_row};
use datatrace_core::{load_embeddings, load_manifest, validate_corpus, Error};

#[test]
fn image_paths_resolve_against_the_manifest_directory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("img")).unwrap();
    std::fs::write(dir.path().join("img/a.png"), b"x").unwrap();
    let path = dir.path().join("manifest.jsonl");
    std::fs::write(
        &path,
        "{\"id\":\"a\",\"image\":\"img/a.png\",\"caption\":\"red\"}\n\n{\"id\":\"b\",\"image\":\"img/b.png\",\"caption\":\" \"}\n",
    )
    .unwrap();
    let corpus = load_manifest(&path).unwrap();
    assert_eq!(corpus.len(), 2);
    assert_eq!(corpus.image_path(&corpus.samples()[0]), dir.path().join("img/a.png"));
    let report = validate_corpus(&corpus);
    let ids: Vec<&str> = report.issues.iter().map(Issue::id).collect();
    assert_eq!(ids, ["b", "b"]);
    assert!(report.issues.iter().any(|i| matches!(i, Issue::MissingImage { .. })));
    assert!(report.issues.iter().any(|i| matches!(i, Issue::EmptyCaption { .. })));
}

#[test]
fn manifest_errors_carry_line_numbers() {
    let err = parse_manifest(
        "{\"id\":\"a\",\"image\":\"a.png\",\"caption\":\"x\"}\n{\"id\":\"b\"}\n",
        ".",
    )
    .unwrap_err();
    assert!(matches!(err, Error::MalformedRecord { line: 2, .. }));
    let dup = "{\"id\":\"a\",\"image\":\"a.png\",\"caption\":\"x\"}\n".repeat(2);
    assert!(matches!(parse_manifest(&dup, "."), Err(Error::DuplicateId(id)) if id == "a"));
    assert!(matches!(parse_manifest("\n", "."), Err(Error::EmptyManifest)));
    assert!(matches!(
        load_manifest(std::path::Path::new("/no/such/manifest.jsonl")),
        Err(Error::MalformedInput { .. })
    ));
}

#[test]
fn exclusion_keeps_order_and_rejects_unknown_ids() {
    let text: String = (0..5)
        .map(|i| format!("{{\"id\":\"s{i}\",\"image\":\"s{i}.png\",\"caption\":\"c\"}}\n"))
        .collect();
    let corpus = parse_manifest(&text, ".").unwrap();
    let reduced = corpus.exclude(&["s3", "s1"]).unwrap();
    assert_eq!(reduced.ids().collect::<Vec<_>>(), ["s0", "s2", "s4"]);
    assert!(matches!(corpus.exclude(&["zz"]), Err(Error::UnknownId(_))));
}

#[test]
fn sidecar_round_trip_and_validation() {
    let text = format!(
        "{}\n{}\n{}\n",
        sidecar_header(2, "m"),
        sidecar_row("a", &[0.1, 0.2]),
        sidecar_row("b", &[1.0 / 3.0, -2.5e-7])
    );
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("emb.jsonl");
    std::fs::write(&path, &text).unwrap();
    let store = load_embeddings(&path).unwrap();
    assert_eq!(store.model_tag(), "m");
    assert_eq!(store.get("b").unwrap(), [1.0 / 3.0, -2.5e-7]);

    let bad_dim = format!("{}\n{}\n", sidecar_header(2, "m"), sidecar_row("a", &[1.0]));
    assert!(matches!(parse_embeddings(&bad_dim), Err(Error::DimMismatch { .. })));
    let zero = format!("{}\n{}\n", sidecar_header(2, "m"), sidecar_row("a", &[0.0, 0.0]));
    assert!(matches!(parse_embeddings(&zero), Err(Error::ZeroEmbedding(_))));
    assert!(matches!(
        parse_embeddings("{\"id\":\"a\"}\n"),
        Err(Error::MissingHeader(_))
    ));
    let nan = format!("{}\n{{\"id\":\"a\",\"vec\":[1.0,null]}}\n", sidecar_header(2, "m"));
    assert!(parse_embeddings(&nan).is_err());
}
