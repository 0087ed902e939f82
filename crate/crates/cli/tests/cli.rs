//! The `blendkit` binary end to end against the bundled fixtures.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Runs the binary from the workspace root with a private cache directory.
fn blendkit(cache: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blendkit"))
        .current_dir(workspace_root())
        .env_remove("BLENDKIT_CONFIG")
        .env_remove("BLENDKIT_OFFLINE")
        .env("BLENDKIT_CACHE_DIR", cache)
        .arg("--config")
        .arg("blendkit.toml")
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn blend_prints_the_golden_response() {
    let cache = TempDir::new().unwrap();
    let out = blendkit(cache.path(), &["blend", "star_wars", "shampoo", "--offline"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let golden = std::fs::read_to_string(workspace_root().join("fixtures/golden/star_wars_shampoo.json")).unwrap();
    assert_eq!(stdout(&out), golden);

    let again = blendkit(cache.path(), &["blend", "star_wars", "shampoo", "--offline"]);
    assert_eq!(again.stdout, out.stdout);
}

#[test]
fn blend_writes_to_file() {
    let cache = TempDir::new().unwrap();
    let path = cache.path().join("out/blend.json");
    let out = blendkit(
        cache.path(),
        &["blend", "star_wars", "shampoo", "--offline", "--strategies", "no_gpt,half_gpt", "--out", path.to_str().unwrap()],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("blends, 0 warnings"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!(v["concepts"].get("full_gpt").is_none());
    assert_eq!(v["request"]["strategies"], serde_json::json!(["no_gpt", "half_gpt"]));
}

#[test]
fn exit_codes() {
    let cache = TempDir::new().unwrap();
    let unknown = blendkit(cache.path(), &["blend", "dune", "shampoo", "--offline"]);
    assert_eq!(unknown.status.code(), Some(3));
    assert!(stderr(&unknown).contains("unknown_domain"));

    let miss = blendkit(cache.path(), &["blend", "star_wars", "toaster", "--offline"]);
    assert_eq!(miss.status.code(), Some(4));
    assert!(stderr(&miss).contains("missing: "));

    let bad_strategy = blendkit(cache.path(), &["blend", "star_wars", "shampoo", "--strategies", "some_gpt"]);
    assert_eq!(bad_strategy.status.code(), Some(2));
    let bad_cutoff = blendkit(cache.path(), &["blend", "star_wars", "shampoo", "--offline", "--cutoff", "3"]);
    assert_eq!(bad_cutoff.status.code(), Some(2));
    assert!(stdout(&bad_cutoff).is_empty());
}

#[test]
fn catalog_commands() {
    let cache = TempDir::new().unwrap();
    let related = blendkit(cache.path(), &["related", "cookie"]);
    assert!(related.status.success());
    assert_eq!(stdout(&related), "food\nchocolate\n");

    let domains = blendkit(cache.path(), &["domains"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&domains)).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
}

#[test]
fn eval_writes_a_report() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("report.json");
    let out = blendkit(
        dir.path(),
        &[
            "eval",
            "fixtures/eval/annotations.csv",
            "--attributes",
            "fixtures/eval/attribute_counts.csv",
            "--out",
            report.to_str().unwrap(),
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("catchphrases"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let concepts: u64 = v["strategies"].as_array().unwrap().iter().map(|s| s["concepts"].as_u64().unwrap()).sum();
    assert_eq!(concepts, 13);
    assert_eq!(v["attributes"].as_array().unwrap().len(), 4);
}

#[test]
fn ingest_reproduces_the_shipped_kb_without_attributes() {
    let dir = TempDir::new().unwrap();
    let kb = dir.path().join("sw.json");
    let out = blendkit(
        dir.path(),
        &[
            "ingest",
            "star_wars",
            "--plot",
            "fixtures/domains/star_wars/plot.txt",
            "--display-name",
            "Star Wars",
            "--gazetteer",
            "fixtures/domains/star_wars/gazetteer.tsv",
            "--coref",
            "fixtures/domains/star_wars/coref.json",
            "--out",
            kb.to_str().unwrap(),
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let fresh: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&kb).unwrap()).unwrap();
    let shipped: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(workspace_root().join("fixtures/kb/star_wars.json")).unwrap())
            .unwrap();
    assert_eq!(fresh["sentences"], shipped["sentences"]);
    assert_eq!(fresh["entities"], shipped["entities"]);
    assert_eq!(fresh["attributes"].as_array().map_or(0, Vec::len), 0);

    // Offline attribute fetch fills the same slots as the shipped file.
    let attrs = blendkit(dir.path(), &["attributes", "star_wars", "--kb", kb.to_str().unwrap(), "--offline", "--allow-missing"]);
    assert!(attrs.status.success(), "{}", stderr(&attrs));
    let filled: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&kb).unwrap()).unwrap();
    assert_eq!(filled["attributes"], shipped["attributes"]);

    let strict = blendkit(dir.path(), &["attributes", "star_wars", "--kb", kb.to_str().unwrap(), "--offline"]);
    assert_eq!(strict.status.code(), Some(4));
}

#[test]
fn seed_fixtures_into_a_new_store() {
    let dir = TempDir::new().unwrap();
    let store = dir.path().join("store");
    let out = blendkit(
        dir.path(),
        &["seed-fixtures", "fixtures/llm/authored/star_wars_shampoo.toml", "--into", store.to_str().unwrap()],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains(" responses -> "));
    assert!(store.join("manifest.json").is_file());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(store.join("manifest.json")).unwrap()).unwrap();
    let authored =
        std::fs::read_to_string(workspace_root().join("fixtures/llm/authored/star_wars_shampoo.toml")).unwrap();
    let expected = authored.matches("[[response]]").count();
    assert_eq!(manifest["entries"].as_object().unwrap().len(), expected);
}
