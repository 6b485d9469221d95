use sha2::{Digest, Sha256};
use srcr_core::metrics::CompressionConfig;
use srcr_core::results::{bundled_fixtures, load_scores, BUNDLED_TABLES};
use srcr_core::Rational;

const CHECKSUMS: [(&str, &str); 6] = [
    (
        "gptq-quantization-only-results.csv",
        "160d9f496b956afad61e7c2b2c85667b90ca5582a6a9079d154243a9f1c051e8",
    ),
    (
        "gptq-vs-nf4-llm-int8-results.csv",
        "de38989b65f2b11ae98b887e4d846b2657886c11dbafd135715118252d239ada",
    ),
    (
        "sparsegpt-gptq-semi-structured-joint-results.csv",
        "7c44cb04da25dccc4994cd8cd685790139a1e7879b5e4c0acfaa2e22a7f934b0",
    ),
    (
        "sparsegpt-gptq-unstructured-joint-results.csv",
        "f78a53ceb0d6a49a1e894f5b02c053b4a265c520f8630328228c8ac17c023290",
    ),
    (
        "sparsegpt-semi-structured-pruning-only-results.csv",
        "aff0172e96c2f8415d1ce96f1c39cdc97db5b1182eca2a0e2c706362f8c8681a",
    ),
    (
        "sparsegpt-unstructured-pruning-only-results.csv",
        "a4cff4b7062f3d0e746fe074810fb7a88aa3ee6b3ed7593c293927777ec7c743",
    ),
];

fn fixture_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/paper_tables")
}

#[test]
fn bundled_tables_match_checksums() {
    for (name, expected) in CHECKSUMS {
        let (_, text) = BUNDLED_TABLES
            .iter()
            .find(|(n, _)| n.ends_with(name))
            .unwrap_or_else(|| panic!("{name} not bundled"));
        assert_eq!(
            hex::encode(Sha256::digest(text.as_bytes())),
            expected,
            "{name}"
        );
    }
}

#[test]
fn fixture_files_on_disk_match_bundled_copies() {
    for (name, expected) in CHECKSUMS {
        let bytes = std::fs::read(fixture_dir().join(name)).unwrap();
        assert_eq!(hex::encode(Sha256::digest(&bytes)), expected, "{name}");
    }
}

#[test]
fn row_counts_per_table() {
    // (table, configuration rows); four task records per row
    let expected = [
        ("gptq-quantization-only-results.csv", 10),
        ("gptq-vs-nf4-llm-int8-results.csv", 16),
        ("sparsegpt-gptq-semi-structured-joint-results.csv", 16),
        ("sparsegpt-gptq-unstructured-joint-results.csv", 12),
        ("sparsegpt-semi-structured-pruning-only-results.csv", 14),
        ("sparsegpt-unstructured-pruning-only-results.csv", 10),
    ];
    for (name, rows) in expected {
        let (_, text) = BUNDLED_TABLES
            .iter()
            .find(|(n, _)| n.ends_with(name))
            .unwrap();
        assert_eq!(text.lines().count(), 1 + 4 * rows, "{name}");
    }
}

#[test]
fn spot_cells() {
    let d = bundled_fixtures().unwrap();
    let joint = CompressionConfig::joint(Rational::new(1, 4), Rational::from_integer(4)).unwrap();
    let r = d.get("llama", &joint, "math").unwrap();
    assert_eq!((r.score, r.stderr), (10.5, 0.5));
    let two = CompressionConfig::quantization(Rational::from_integer(2)).unwrap();
    assert_eq!(d.get("mistral", &two, "mean").unwrap().score, 5.8);
    let nm = CompressionConfig::nm(2, 6, Rational::from_integer(16)).unwrap();
    assert_eq!(d.get("llama", &nm, "bbh").unwrap().score, 45.3);
    let nf4 = CompressionConfig::quantization(Rational::from_integer(4)).unwrap();
    assert_eq!(d.get("llama@nf4", &nf4, "math").unwrap().score, 16.8);
}

#[test]
fn directory_load_equals_bundled() {
    let from_disk = load_scores(&fixture_dir(), None).unwrap();
    let bundled = bundled_fixtures().unwrap();
    assert_eq!(from_disk.len(), bundled.len());
    for r in bundled.records() {
        assert_eq!(from_disk.get(&r.model, &r.config, &r.task), Some(r));
    }
}
