#![allow(dead_code)]

use std::fs;
use std::path::PathBuf;

use speceval::lang::{parse_unit, SourceUnit};
use speceval::runtime::{load_tests, TestCase};

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub struct Program {
    pub id: String,
    pub unit: SourceUnit,
    pub tests: Vec<TestCase>,
}

pub fn programs() -> Vec<Program> {
    let dir = corpus_dir();
    let mut ids: Vec<String> = fs::read_dir(dir.join("programs"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "sj"))
        .map(|p| p.file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    ids.sort();
    ids.into_iter()
        .map(|id| {
            let text = fs::read_to_string(dir.join(format!("programs/{id}.sj"))).unwrap();
            let unit = parse_unit(&text).unwrap_or_else(|e| panic!("{id}: {e}"));
            let tests = load_tests(&dir.join(format!("tests/{id}.jsonl"))).unwrap();
            Program { id, unit, tests }
        })
        .collect()
}

pub fn program(id: &str) -> Program {
    programs().into_iter().find(|p| p.id == id).unwrap()
}
