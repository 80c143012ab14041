use std::fs;
use std::path::PathBuf;

use speceval::lang::parse_unit;
use speceval::runtime::{check_specs, execute, load_tests, measure_coverage, DEFAULT_STEP_LIMIT};

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn ids() -> Vec<String> {
    let mut ids: Vec<String> = fs::read_dir(corpus_dir().join("programs"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "sj"))
        .map(|p| p.file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    ids.sort();
    ids
}

#[test]
fn corpus_programs_meet_expected_outputs_and_specs() {
    for id in ids() {
        let text = fs::read_to_string(corpus_dir().join(format!("programs/{id}.sj"))).unwrap();
        let unit = parse_unit(&text).unwrap_or_else(|e| panic!("{id}: {e}"));
        let tests = load_tests(&corpus_dir().join(format!("tests/{id}.jsonl"))).unwrap();
        for t in &tests {
            let r = execute(&unit, t, DEFAULT_STEP_LIMIT);
            let got = r.result.unwrap_or_else(|e| panic!("{id} {t}: {e}"));
            if let Some(exp) = &t.expected {
                assert_eq!(got.as_ref(), Some(exp), "{id} {t}");
            }
        }
        for v in check_specs(&unit, &tests) {
            assert!(v.correct, "{id}: {:?}", v);
        }
        let cov = measure_coverage(&unit, &tests);
        assert!(
            cov.branch_coverage() >= 0.9,
            "{id}: branch {}",
            cov.branch_coverage()
        );
    }
}
