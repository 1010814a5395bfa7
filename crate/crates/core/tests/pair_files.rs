use std::fs;

use cinet::dataset::{build_pairs, load_pairs, save_pairs, InputMode, PairConfig, PairSet};
use cinet::lda::SceneLength;
use cinet::Error;
use tempfile::TempDir;

fn tiny(mode: InputMode) -> PairSet {
    build_pairs(&PairConfig {
        k_max: 3,
        corpora_per_k: 2,
        test_corpora_per_k: 1,
        num_scenes: 5,
        scene_len: SceneLength::Fixed(6),
        vocab_size: 9,
        gibbs_iterations: 10,
        seeds_per_positive: 1,
        mode,
        seed: 12,
        ..PairConfig::default()
    })
    .unwrap()
}

#[test]
fn round_trip_preserves_every_field() {
    let dir = TempDir::new().unwrap();
    for mode in [
        InputMode::ContextGivenObject,
        InputMode::ObjectGivenContext,
        InputMode::Concat,
    ] {
        let set = tiny(mode);
        let path = dir.path().join(format!("{mode}.jsonl"));
        save_pairs(&set, &path).unwrap();
        assert_eq!(load_pairs(&path).unwrap(), set);
    }
}

#[test]
fn empty_set_round_trips() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("empty.jsonl");
    let set = PairSet::new(InputMode::Concat, 4);
    save_pairs(&set, &path).unwrap();
    let back = load_pairs(&path).unwrap();
    assert!(back.pairs.is_empty());
    assert_eq!(back.input_dim(), 8);
}

#[test]
fn truncated_file_reports_the_broken_line() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("pairs.jsonl");
    save_pairs(&tiny(InputMode::ContextGivenObject), &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let n_lines = text.lines().count();
    fs::write(&path, &text[..text.len() - 40]).unwrap();
    match load_pairs(&path) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, n_lines),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn first_bad_line_aborts_the_load() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("pairs.jsonl");
    save_pairs(&tiny(InputMode::ContextGivenObject), &path).unwrap();
    let mut lines: Vec<String> = fs::read_to_string(&path)
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    lines[2] = "{\"x\": oops".into();
    lines[5] = "also broken".into();
    fs::write(&path, lines.join("\n")).unwrap();
    let err = load_pairs(&path).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
}

#[test]
fn wrong_step_width_is_rejected() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("pairs.jsonl");
    save_pairs(&tiny(InputMode::ContextGivenObject), &path).unwrap();
    let text =
        fs::read_to_string(&path)
            .unwrap()
            .replacen("\"vocab_size\":9", "\"vocab_size\":10", 1);
    fs::write(&path, text).unwrap();
    assert!(matches!(
        load_pairs(&path),
        Err(Error::Parse { line: 2, .. })
    ));
}

#[test]
fn future_format_version_is_rejected() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("pairs.jsonl");
    save_pairs(&tiny(InputMode::ContextGivenObject), &path).unwrap();
    let text = fs::read_to_string(&path).unwrap().replacen(
        "\"format_version\":1",
        "\"format_version\":7",
        1,
    );
    fs::write(&path, text).unwrap();
    assert!(matches!(
        load_pairs(&path),
        Err(Error::FormatVersion { found: 7, .. })
    ));
}

#[test]
fn building_is_reproducible() {
    assert_eq!(tiny(InputMode::Concat), tiny(InputMode::Concat));
}

#[test]
fn desk_configuration_is_balanced() {
    let set = build_pairs(&PairConfig {
        gibbs_iterations: 1,
        ..PairConfig::default()
    })
    .unwrap();
    let pos = set.pairs.iter().filter(|p| p.y == 1).count() as f64;
    let neg = set.pairs.len() as f64 - pos;
    let ratio = pos / neg;
    assert!((0.9..=1.1).contains(&ratio), "positive:negative = {ratio}");
    assert!(set
        .pairs
        .iter()
        .all(|p| (p.y == 1) == (p.meta.k0 < p.meta.truth_k)));
}
