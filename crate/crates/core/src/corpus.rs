//! The program corpus: loading, validation, structural statistics, the
//! integrity manifest and coverage-guided test augmentation.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::lang::{
    check_unit, parse_unit, print_clause, BinOp, Expr, SourceUnit, Stmt, StmtKind, TypeTag,
};
use crate::runtime::{
    execute, measure_coverage, parse_tests, TestCase, Trace, Value, DEFAULT_STEP_LIMIT,
};
use crate::taskgen::raw_mutant;
use crate::write_atomic;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureClass {
    Sequential,
    BranchOnly,
    SingleLoop,
    NestedLoop,
}

impl fmt::Display for StructureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StructureClass::Sequential => "sequential",
            StructureClass::BranchOnly => "branch-only",
            StructureClass::SingleLoop => "single-loop",
            StructureClass::NestedLoop => "nested-loop",
        })
    }
}

fn loop_depth(stmts: &[Stmt]) -> usize {
    stmts
        .iter()
        .map(|s| {
            let inner = s
                .blocks()
                .into_iter()
                .map(|b| loop_depth(b))
                .max()
                .unwrap_or(0);
            inner + usize::from(s.loop_id().is_some())
        })
        .max()
        .unwrap_or(0)
}

pub fn max_loop_depth(unit: &SourceUnit) -> usize {
    unit.methods
        .iter()
        .map(|m| loop_depth(&m.body))
        .max()
        .unwrap_or(0)
}

pub fn classify_structure(unit: &SourceUnit) -> StructureClass {
    let mut branches = false;
    for m in &unit.methods {
        m.walk(&mut |s| branches |= matches!(s.kind, StmtKind::If { .. }));
    }
    match max_loop_depth(unit) {
        0 if branches => StructureClass::BranchOnly,
        0 => StructureClass::Sequential,
        1 => StructureClass::SingleLoop,
        _ => StructureClass::NestedLoop,
    }
}

/// Sum over methods of one plus the decision points: conditionals, loops
/// and short-circuit operators in code.
pub fn cyclomatic_complexity(unit: &SourceUnit) -> u32 {
    let mut total = 0;
    for m in &unit.methods {
        let mut decisions = 0;
        m.walk(&mut |s| {
            if matches!(s.kind, StmtKind::If { .. }) || s.loop_id().is_some() {
                decisions += 1;
            }
            for e in s.own_exprs() {
                e.walk(&mut |x| {
                    if matches!(x, Expr::Binary(BinOp::And | BinOp::Or, ..)) {
                        decisions += 1;
                    }
                });
            }
        });
        total += 1 + decisions;
    }
    total
}

/// Non-blank lines that are not specification or plain comments.
pub fn lines_of_code(text: &str) -> u32 {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with("//"))
        .count() as u32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryStats {
    pub loc: u32,
    pub cyclomatic: u32,
    pub structure: StructureClass,
    pub clauses: usize,
    pub tests: usize,
    pub line_coverage: f64,
    pub branch_coverage: f64,
}

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub id: String,
    pub unit: SourceUnit,
    pub tests: Vec<TestCase>,
    pub stats: EntryStats,
    pub program_sha256: String,
    pub tests_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub program_sha256: String,
    pub tests_sha256: String,
    pub stats: EntryStats,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub programs: usize,
    pub avg_loc: f64,
    pub avg_cyclomatic: f64,
    pub avg_tests: f64,
    pub avg_branch_coverage: f64,
    pub structure: BTreeMap<StructureClass, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub schema: u32,
    pub entries: Vec<ManifestEntry>,
    pub aggregate: AggregateStats,
    /// SHA-256 over every entry's file hashes, in id order.
    pub hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationFailure {
    pub entry: String,
    pub reason: String,
}

impl fmt::Display for ValidationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entry, self.reason)
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{} invalid entr{}:\n{}", .0.len(), if .0.len() == 1 { "y" } else { "ies" },
        .0.iter().map(|f| format!("  {f}")).collect::<Vec<_>>().join("\n"))]
    Validation(Vec<ValidationFailure>),
    #[error("manifest mismatch: {0}")]
    ManifestMismatch(String),
    #[error("missing {0}")]
    Missing(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Validate one program and its suite: both parse, every expected output
/// matches and every ground-truth clause survives runtime checking.
pub fn validate_entry(
    id: &str,
    program: &str,
    tests_text: &str,
) -> Result<CorpusEntry, ValidationFailure> {
    let fail = |reason: String| ValidationFailure {
        entry: id.to_string(),
        reason,
    };
    let unit = parse_unit(program).map_err(|e| fail(format!("program: {e}")))?;
    check_unit(&unit).map_err(|e| fail(format!("program: {e}")))?;
    let tests = parse_tests(tests_text, &format!("{id}.jsonl")).map_err(|e| fail(e.to_string()))?;
    if tests.is_empty() {
        return Err(fail("empty test suite".into()));
    }
    if unit.specs.is_empty() {
        return Err(fail("no ground-truth specification".into()));
    }
    for t in &tests {
        let r = execute(&unit, t, DEFAULT_STEP_LIMIT);
        match (&r.result, &t.expected) {
            (Err(e), _) => return Err(fail(format!("test {t} faults: {e}"))),
            (Ok(got), Some(want)) if got.as_ref() != Some(want) => {
                let got = got.as_ref().map_or("nothing".into(), Value::to_string);
                return Err(fail(format!("test {t} returned {got}")));
            }
            _ => {}
        }
    }
    let trace = Trace::record(&unit, &tests, DEFAULT_STEP_LIMIT);
    for v in trace.check(&unit.specs) {
        if !v.correct {
            let by = v
                .counterexample
                .as_ref()
                .map_or("a runtime fault".into(), |c| {
                    format!("test #{} {}", c.test_index, c.test)
                });
            return Err(fail(format!(
                "`{}` is refuted by {by}",
                print_clause(&v.clause)
            )));
        }
    }
    let cov = measure_coverage(&unit, &tests);
    let stats = EntryStats {
        loc: lines_of_code(program),
        cyclomatic: cyclomatic_complexity(&unit),
        structure: classify_structure(&unit),
        clauses: unit.specs.len(),
        tests: tests.len(),
        line_coverage: cov.line_coverage(),
        branch_coverage: cov.branch_coverage(),
    };
    Ok(CorpusEntry {
        id: id.to_string(),
        program_sha256: sha256_hex(program.as_bytes()),
        tests_sha256: sha256_hex(tests_text.as_bytes()),
        unit,
        tests,
        stats,
    })
}

/// Program ids under `root/programs`, sorted.
pub fn program_ids(root: &Path) -> Result<Vec<String>, CorpusError> {
    let dir = root.join("programs");
    if !dir.is_dir() {
        return Err(CorpusError::Missing(dir));
    }
    let rd = fs::read_dir(&dir).map_err(|source| CorpusError::Io {
        path: dir.clone(),
        source,
    })?;
    let mut ids: Vec<String> = rd
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "sj"))
        .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .collect();
    ids.sort();
    Ok(ids)
}

/// Validate every entry under `root` in parallel, without consulting the
/// manifest. All failures are reported together.
pub fn scan_corpus(root: &Path) -> Result<Vec<CorpusEntry>, CorpusError> {
    let ids = program_ids(root)?;
    if ids.is_empty() {
        log::warn!("corpus at {} has no programs", root.display());
    }
    let results: Vec<Result<CorpusEntry, ValidationFailure>> = ids
        .par_iter()
        .map(|id| {
            let program =
                read(&root.join(format!("programs/{id}.sj"))).map_err(|e| ValidationFailure {
                    entry: id.clone(),
                    reason: e.to_string(),
                })?;
            let tests =
                read(&root.join(format!("tests/{id}.jsonl"))).map_err(|e| ValidationFailure {
                    entry: id.clone(),
                    reason: e.to_string(),
                })?;
            validate_entry(id, &program, &tests)
        })
        .collect();
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(e) => entries.push(e),
            Err(f) => failures.push(f),
        }
    }
    if failures.is_empty() {
        Ok(entries)
    } else {
        Err(CorpusError::Validation(failures))
    }
}

pub fn build_manifest(entries: &[CorpusEntry]) -> CorpusManifest {
    let n = entries.len();
    let avg = |f: &dyn Fn(&EntryStats) -> f64| {
        if n == 0 {
            0.0
        } else {
            entries.iter().map(|e| f(&e.stats)).sum::<f64>() / n as f64
        }
    };
    let mut structure = BTreeMap::new();
    for e in entries {
        *structure.entry(e.stats.structure).or_insert(0) += 1;
    }
    let mut h = Sha256::new();
    for e in entries {
        h.update(format!("{}\0{}\0{}\n", e.id, e.program_sha256, e.tests_sha256).as_bytes());
    }
    CorpusManifest {
        schema: MANIFEST_SCHEMA,
        entries: entries
            .iter()
            .map(|e| ManifestEntry {
                id: e.id.clone(),
                program_sha256: e.program_sha256.clone(),
                tests_sha256: e.tests_sha256.clone(),
                stats: e.stats.clone(),
            })
            .collect(),
        aggregate: AggregateStats {
            programs: n,
            avg_loc: avg(&|s| f64::from(s.loc)),
            avg_cyclomatic: avg(&|s| f64::from(s.cyclomatic)),
            avg_tests: avg(&|s| s.tests as f64),
            avg_branch_coverage: avg(&|s| s.branch_coverage),
            structure,
        },
        hash: hex::encode(h.finalize()),
    }
}

pub fn read_manifest(root: &Path) -> Result<CorpusManifest, CorpusError> {
    let path = root.join(MANIFEST_FILE);
    if !path.exists() {
        return Err(CorpusError::Missing(path));
    }
    serde_json::from_str(&read(&path)?).map_err(|source| CorpusError::Json { path, source })
}

pub fn write_manifest(root: &Path, manifest: &CorpusManifest) -> Result<(), CorpusError> {
    let path = root.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes") + "\n";
    write_atomic(&path, text.as_bytes()).map_err(|source| CorpusError::Io { path, source })
}

/// Compare file hashes against a stored manifest.
pub fn verify_manifest(
    stored: &CorpusManifest,
    entries: &[CorpusEntry],
) -> Result<(), CorpusError> {
    let fresh = build_manifest(entries);
    if stored.hash == fresh.hash {
        return Ok(());
    }
    let old: BTreeMap<&str, &ManifestEntry> =
        stored.entries.iter().map(|e| (e.id.as_str(), e)).collect();
    let mut diffs = Vec::new();
    for e in &fresh.entries {
        match old.get(e.id.as_str()) {
            None => diffs.push(format!("{} is not in the manifest", e.id)),
            Some(o) if o.program_sha256 != e.program_sha256 => {
                diffs.push(format!("{}.sj changed", e.id))
            }
            Some(o) if o.tests_sha256 != e.tests_sha256 => {
                diffs.push(format!("{}.jsonl changed", e.id))
            }
            _ => {}
        }
    }
    for id in old.keys() {
        if !fresh.entries.iter().any(|e| e.id == *id) {
            diffs.push(format!("{id} is missing"));
        }
    }
    if diffs.is_empty() {
        diffs.push("corpus hash differs".into());
    }
    Err(CorpusError::ManifestMismatch(diffs.join("; ")))
}

/// A validated corpus whose files match its manifest.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub root: PathBuf,
    pub entries: Vec<CorpusEntry>,
    pub manifest: CorpusManifest,
}

impl Corpus {
    pub fn entry(&self, id: &str) -> Option<&CorpusEntry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

pub fn load_corpus(root: &Path) -> Result<Corpus, CorpusError> {
    let manifest = read_manifest(root)?;
    let entries = scan_corpus(root)?;
    verify_manifest(&manifest, &entries)?;
    Ok(Corpus {
        root: root.to_path_buf(),
        entries,
        manifest,
    })
}

/// Bounds for random test inputs.
pub const INT_RANGE: (i32, i32) = (-100, 100);
pub const MAX_LEN: usize = 12;

fn random_value(t: TypeTag, rng: &mut ChaCha8Rng) -> Value {
    match t {
        TypeTag::Int => Value::Int(rng.gen_range(INT_RANGE.0..=INT_RANGE.1)),
        TypeTag::Boolean => Value::Bool(rng.gen()),
        TypeTag::IntArray => {
            let n = rng.gen_range(0..=MAX_LEN);
            // A narrow value range makes duplicates and orderings likely.
            let hi = if rng.gen_bool(0.5) { 5 } else { INT_RANGE.1 };
            Value::IntArray((0..n).map(|_| rng.gen_range(-hi..=hi)).collect())
        }
        TypeTag::Str => {
            let n = rng.gen_range(0..=MAX_LEN);
            let alphabet = if rng.gen_bool(0.5) { "ab" } else { "abcdefxyz" };
            let chars: Vec<char> = alphabet.chars().collect();
            Value::Str(
                (0..n)
                    .map(|_| *chars.choose(rng).expect("alphabet"))
                    .collect(),
            )
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Augmentation {
    pub added: Vec<TestCase>,
    pub branch_coverage_before: f64,
    pub branch_coverage_after: f64,
    /// Sampled mutants no test refutes, as clause text.
    pub surviving_mutants: Vec<String>,
    pub candidates_tried: usize,
}

/// Add random type-directed tests that raise branch coverage or refute a
/// sampled mutant, trying at most `budget` candidates. Ground truth stays
/// correct on the grown suite; expected outputs come from the program.
pub fn augment_tests(entry: &CorpusEntry, seed: u64, budget: usize) -> Augmentation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = &entry.unit;
    let table = check_unit(unit).expect("entry was validated");
    let mut suite = entry.tests.clone();
    let before = measure_coverage(unit, &suite).branch_coverage();
    let mut coverage = before;

    let trace = Trace::record(unit, &suite, DEFAULT_STEP_LIMIT);
    let mut mutants = Vec::new();
    for gt in &unit.specs {
        for _ in 0..3 {
            if let Some(m) = raw_mutant(gt, &table, &mut rng) {
                if trace.holds(&m, &unit.specs) {
                    mutants.push(m);
                }
            }
        }
    }

    let entries: Vec<&str> = {
        let mut v: Vec<&str> = entry.tests.iter().map(|t| t.method.as_str()).collect();
        v.dedup();
        v
    };
    let mut added = Vec::new();
    let mut tried = 0;
    while tried < budget && !entries.is_empty() {
        tried += 1;
        let name = entries.choose(&mut rng).expect("non-empty");
        let Some(method) = unit.method(name) else {
            break;
        };
        let args: Vec<Value> = method
            .params
            .iter()
            .map(|p| random_value(p.ty, &mut rng))
            .collect();
        let mut t = TestCase::new(*name, args);
        match execute(unit, &t, DEFAULT_STEP_LIMIT).result {
            Ok(ret) => t.expected = ret,
            Err(_) => continue,
        }
        let mut grown = suite.clone();
        grown.push(t.clone());
        let trace = Trace::record(unit, &grown, DEFAULT_STEP_LIMIT);
        if !trace.check(&unit.specs).iter().all(|v| v.correct) {
            continue;
        }
        let cov = measure_coverage(unit, &grown).branch_coverage();
        let before_kill = mutants.len();
        mutants.retain(|m| trace.holds(m, &unit.specs));
        if cov > coverage || mutants.len() < before_kill {
            coverage = cov;
            suite = grown;
            added.push(t);
        }
    }
    let surviving_mutants: Vec<String> = mutants.iter().map(print_clause).collect();
    if !surviving_mutants.is_empty() {
        log::warn!(
            "{}: {} sampled mutants survive",
            entry.id,
            surviving_mutants.len()
        );
    }
    Augmentation {
        added,
        branch_coverage_before: before,
        branch_coverage_after: coverage,
        surviving_mutants,
        candidates_tried: tried,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(src: &str) -> SourceUnit {
        parse_unit(src).unwrap()
    }

    #[test]
    fn structure_classes() {
        let seq = unit("class A { public static int add(int a, int b) { return a + b; } }");
        assert_eq!(classify_structure(&seq), StructureClass::Sequential);
        let br =
            unit("class A { public static int f(int a) { if (a > 0) { return 1; } return 0; } }");
        assert_eq!(classify_structure(&br), StructureClass::BranchOnly);
        let one = unit("class A { public static void f(int n) { while (n > 0) { n--; } for (int i = 0; i < 2; i++) { } } }");
        assert_eq!(classify_structure(&one), StructureClass::SingleLoop);
        let two = unit("class A { public static void f(int n) { while (n > 0) { if (n > 3) { for (int i = 0; i < 2; i++) { } } n--; } } }");
        assert_eq!(classify_structure(&two), StructureClass::NestedLoop);
    }

    #[test]
    fn cyclomatic_counts_decisions() {
        let u = unit("class A { public static int f(int a, int b) { if (a > 0 && b > 0) { return 1; } while (a < b || a == 3) { a++; } return 0; } }");
        assert_eq!(cyclomatic_complexity(&u), 5);
    }

    #[test]
    fn loc_skips_comments_and_blanks() {
        assert_eq!(
            lines_of_code("class A {\n\n    //@ ensures true;\n    // note\n}\n"),
            2
        );
    }

    #[test]
    fn refuted_ground_truth_names_the_test() {
        let prog = "class A {\n    //@ ensures \\result > x;\n    public static int id(int x) {\n        return x;\n    }\n}\n";
        let tests = "{\"method\": \"id\", \"args\": [3], \"expected\": 3}\n";
        let err = validate_entry("id", prog, tests).unwrap_err();
        assert!(
            err.reason.contains("refuted by test #0 id(3)"),
            "{}",
            err.reason
        );
    }

    #[test]
    fn wrong_expected_output_is_reported() {
        let prog = "class A {\n    //@ ensures \\result == x;\n    public static int id(int x) {\n        return x;\n    }\n}\n";
        let err = validate_entry(
            "id",
            prog,
            "{\"method\": \"id\", \"args\": [3], \"expected\": 4}\n",
        )
        .unwrap_err();
        assert!(err.reason.contains("returned 3"), "{}", err.reason);
    }

    #[test]
    fn augmentation_reaches_every_branch() {
        let prog = "class FB {\n    //@ ensures 0 <= \\result && \\result <= 15;\n    public static int fb(int n) {\n        if (n % 15 == 0) {\n            return 15;\n        } else if (n % 3 == 0) {\n            return 3;\n        } else if (n % 5 == 0) {\n            return 5;\n        }\n        return 0;\n    }\n}\n";
        let e = validate_entry(
            "fb",
            prog,
            "{\"method\": \"fb\", \"args\": [7], \"expected\": 0}\n",
        )
        .unwrap();
        assert!(e.stats.branch_coverage < 1.0);
        let a = augment_tests(&e, 1, 400);
        assert_eq!(a.branch_coverage_after, 1.0);
        assert!(a.branch_coverage_after >= a.branch_coverage_before);
        assert!(a.candidates_tried <= 400);
    }

    #[test]
    fn straight_line_code_gains_nothing() {
        let prog = "class A {\n    //@ ensures \\result == a + b;\n    public static int add(int a, int b) {\n        return a + b;\n    }\n}\n";
        let e = validate_entry(
            "add",
            prog,
            "{\"method\": \"add\", \"args\": [1, 2], \"expected\": 3}\n",
        )
        .unwrap();
        let a = augment_tests(&e, 0, 25);
        assert_eq!(a.candidates_tried, 25);
        assert_eq!(a.branch_coverage_before, a.branch_coverage_after);
    }
}
