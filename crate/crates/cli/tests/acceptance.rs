//! End-to-end acceptance checks. Each check prints one PASS/FAIL line;
//! run with `--nocapture` to see them.

use std::collections::BTreeSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;

use speceval::corpus::{build_manifest, load_corpus, scan_corpus, Corpus};
use speceval::grade::grade;
use speceval::lang::{check_unit, parse_clause, parse_unit, print_clause, Anchor, SpecKind};
use speceval::metrics::{accuracy, avg_variance, jaccard, EvalReport, GradedResult};
use speceval::modelio::{build_prompt, parse_answer, query, ModelEndpoint};
use speceval::perturb::{perturb, PerturbKind};
use speceval::runtime::{check_equivalence, check_specs, execute, Trace, DEFAULT_STEP_LIMIT};
use speceval::taskgen::*;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn corpus() -> Corpus {
    load_corpus(&corpus_dir()).expect("bundled corpus loads")
}

fn inputs(c: &Corpus) -> Vec<ProgramInput<'_>> {
    c.entries
        .iter()
        .map(|e| ProgramInput {
            id: &e.id,
            unit: &e.unit,
            tests: &e.tests,
        })
        .collect()
}

fn speceval(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_speceval"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn preservation() -> Check {
    let c = corpus();
    ensure(c.entries.len() >= 20, || {
        format!("only {} programs", c.entries.len())
    })?;
    let mut runs = 0usize;
    for e in &c.entries {
        for kind in PerturbKind::ALL {
            let seed = perturbation_seed(0, &e.id, kind);
            let pu =
                perturb(&e.unit, kind, seed).map_err(|err| format!("{} {kind}: {err}", e.id))?;
            let tests: Vec<_> = e
                .tests
                .iter()
                .map(|t| {
                    let mut t = t.clone();
                    t.method = pu.method_name(&t.method);
                    t
                })
                .collect();
            for (t, t2) in e.tests.iter().zip(&tests) {
                let a = execute(&e.unit, t, DEFAULT_STEP_LIMIT).outcome();
                let b = execute(&pu.unit, t2, DEFAULT_STEP_LIMIT).outcome();
                ensure(a == b, || format!("{} {kind} on {t}: {a:?} vs {b:?}", e.id))?;
                runs += 1;
            }
            for v in check_specs(&pu.unit, &tests) {
                ensure(v.correct, || {
                    format!("{} {kind}: migrated clause refuted: {v:?}", e.id)
                })?;
            }
        }
    }
    Ok(format!(
        "{} programs x 5 kinds, {runs} test runs identical",
        c.entries.len()
    ))
}

fn ground_truth_validity() -> Check {
    let out = speceval(&["validate", "--corpus", s(&corpus_dir())]);
    ensure(out.status.success(), || {
        format!(
            "validate exited {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        )
    })?;
    let entries = scan_corpus(&corpus_dir()).map_err(|e| e.to_string())?;
    let mut clauses = 0;
    for e in &entries {
        for v in check_specs(&e.unit, &e.tests) {
            ensure(v.correct, || format!("{}: {v:?}", e.id))?;
            clauses += 1;
        }
    }
    let cov = build_manifest(&entries).aggregate.avg_branch_coverage;
    ensure(cov >= 0.90, || format!("average branch coverage {cov}"))?;
    Ok(format!(
        "{clauses} clauses hold, average branch coverage {:.2}%",
        cov * 100.0
    ))
}

fn mutant_refutation() -> Check {
    let c = corpus();
    let (tasks, stats) = build_all_tasks(&inputs(&c), &TaskGenConfig::default());
    let mut mutants = 0;
    for t in &tasks {
        let key = t.answer_key.as_ref().unwrap();
        let unit = parse_unit(&key.unit).map_err(|e| e.to_string())?;
        let table = check_unit(&unit).map_err(|e| e.to_string())?;
        let trace = Trace::record(&unit, &key.tests, DEFAULT_STEP_LIMIT);
        let refuted = |text: &str, anchor: &Anchor| -> Result<bool, String> {
            let clause =
                parse_clause(text, &table, anchor).map_err(|e| format!("{}: {e}", t.task_id))?;
            Ok(!trace.holds(&clause, &unit.specs))
        };
        match (&t.payload, &key.answer) {
            (
                Payload::Judgement {
                    candidate, anchor, ..
                },
                Answer::Judgement { truth: false, .. },
            ) => {
                mutants += 1;
                ensure(refuted(candidate, anchor)?, || {
                    format!("{}: `{candidate}` survives", t.task_id)
                })?;
            }
            (
                Payload::Selection {
                    options, anchor, ..
                },
                Answer::Selection { kinds, .. },
            ) => {
                for (o, k) in options.iter().zip(kinds) {
                    if *k == OptionKind::Mutant {
                        mutants += 1;
                        ensure(refuted(&o.clause, anchor)?, || {
                            format!("{}: `{}` survives", t.task_id, o.clause)
                        })?;
                    }
                }
            }
            _ => {}
        }
    }
    let rate = stats.unrefutable_rate();
    ensure(rate < 0.10, || format!("unrefutable mutant rate {rate}"))?;
    Ok(format!(
        "{mutants} emitted mutants all refuted; unrefutable rate {:.2}% of {} attempts",
        rate * 100.0,
        stats.mutation_attempts
    ))
}

fn full_run(out: &Path, extra: &[&str]) -> Result<PathBuf, String> {
    let corpus = corpus_dir();
    let base = ["--corpus", s(&corpus), "--output", s(out)];
    for cmd in ["gen-tasks", "run", "score"] {
        let mut args = vec![cmd];
        args.extend(base);
        args.extend(extra);
        let o = speceval(&args);
        ensure(o.status.success(), || {
            format!(
                "{cmd} exited {:?}: {}",
                o.status.code(),
                String::from_utf8_lossy(&o.stderr)
            )
        })?;
    }
    let runs: Vec<PathBuf> = fs::read_dir(out.join("runs"))
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .collect();
    ensure(runs.len() == 1, || {
        format!("expected one run, found {runs:?}")
    })?;
    Ok(runs.into_iter().next().unwrap())
}

fn oracle_ceiling() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = full_run(dir.path(), &["--endpoint", "oracle"])?;
    let report: EvalReport =
        serde_json::from_slice(&fs::read(run.join("report.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let programs = corpus().entries.len() as u64;
    ensure(
        report.models.len() == 1 && report.missing.is_empty(),
        || format!("unexpected report shape: {:?}", report.missing),
    )?;
    let m = &report.models[0];
    for cell in &m.cells {
        let name = format!("{}/{}", cell.category, cell.task_type);
        ensure(!cell.absent, || format!("{name} absent"))?;
        if cell.task_type == TaskType::Generation {
            ensure(
                cell.precision.map(|s| s.value) == Some(1.0)
                    && cell.recall.map(|s| s.value) == Some(1.0)
                    && cell.pass_count == Some(programs),
                || format!("{name}: {cell:?}"),
            )?;
        } else {
            ensure(cell.accuracy.map(|s| s.value) == Some(1.0), || {
                format!("{name}: {cell:?}")
            })?;
        }
    }
    ensure(m.cells.len() == 24, || format!("{} cells", m.cells.len()))?;
    for r in &m.perturbations {
        for v in [r.j_jud, r.j_sel, r.j_inf, r.v_prec, r.v_rec] {
            ensure(v.map(|s| s.value) == Some(0.0), || {
                format!("{}: {r:?}", r.kind)
            })?;
        }
    }
    ensure(m.perturbations.len() == 5, || {
        "perturbation rows missing".into()
    })?;
    Ok(format!(
        "24 cells perfect, #Pass {programs}, J = v = 0 for 5 kinds"
    ))
}

fn constant_judge() -> Check {
    let c = corpus();
    let endpoint: ModelEndpoint = "fixed:true".parse().map_err(|e: String| e)?;
    let mut graded = Vec::new();
    for seed in 0..10u64 {
        let cfg = TaskGenConfig {
            master_seed: seed,
            categories: vec![Category::Original],
            task_types: vec![TaskType::Judgement],
            ..TaskGenConfig::default()
        };
        for t in build_all_tasks(&inputs(&c), &cfg).0 {
            let key = t.answer_key.clone().unwrap();
            let public = t.public();
            let reply =
                query(&endpoint, &build_prompt(&public, 2), None).map_err(|e| e.to_string())?;
            graded.push(grade(
                &public,
                &key,
                &endpoint.name(),
                &parse_answer(t.task_type, &reply),
            ));
        }
    }
    ensure(graded.len() >= 200, || {
        format!("only {} builds", graded.len())
    })?;
    let acc = accuracy(&graded, |_| true).map_err(|e| e.to_string())?;
    ensure((acc - 0.5).abs() <= 0.1, || format!("accuracy {acc}"))?;
    Ok(format!(
        "accuracy {acc:.4} over {} judgement builds",
        graded.len()
    ))
}

fn metric_fixtures() -> Check {
    let results: Vec<GradedResult> = (0..204)
        .map(|i| GradedResult {
            task_id: format!("p{i}/original/judgement"),
            model: "m".into(),
            program: format!("p{i}"),
            category: Category::Original,
            task_type: TaskType::Judgement,
            success: i < 166,
            generation: None,
            note: None,
        })
        .collect();
    let acc = accuracy(&results, |_| true).map_err(|e| e.to_string())?;
    ensure((acc - 0.8137).abs() <= 1e-4, || format!("accuracy {acc}"))?;
    let set = |xs: &[&'static str]| xs.iter().copied().collect::<BTreeSet<_>>();
    let j = jaccard(&set(&["a", "b", "c"]), &set(&["b", "c", "d"]));
    ensure(j == 0.5, || format!("jaccard {j}"))?;
    let v = avg_variance(&[(0.5, 0.7), (0.0, 0.0)]);
    ensure(v == 0.2, || format!("avg_variance {v}"))?;
    Ok(format!("accuracy {acc:.4}, jaccard {j}, avg_variance {v}"))
}

/// Ground-truth clause text and a commuted rewrite of it.
const COMMUTED: [(&str, &str, &str); 6] = [
    (
        "add",
        "ensures \\result == a + b;",
        "ensures \\result == b + a;",
    ),
    (
        "midpoint",
        "ensures \\result == low + (high - low) / 2;",
        "ensures \\result == (high - low) / 2 + low;",
    ),
    (
        "sum_first_last",
        "ensures \\result == a[0] + a[a.length - 1];",
        "ensures \\result == a[a.length - 1] + a[0];",
    ),
    (
        "sum_to",
        "ensures \\result == n * (n + 1) / 2;",
        "ensures \\result == (1 + n) * n / 2;",
    ),
    (
        "int_square",
        "loop_invariant sum == i * n + j;",
        "loop_invariant sum == j + n * i;",
    ),
    (
        "swap",
        "ensures \\result == num2 * 10000 + num1;",
        "ensures \\result == num1 + 10000 * num2;",
    ),
];

fn equivalence_soundness() -> Check {
    let c = corpus();
    let (mut reflexive, mut trivial) = (0, 0);
    for e in &c.entries {
        let table = check_unit(&e.unit).map_err(|err| err.to_string())?;
        let trace = Trace::record(&e.unit, &e.tests, DEFAULT_STEP_LIMIT);
        let ctx = MutationContext {
            table: &table,
            trace: &trace,
            ground_truth: &e.unit.specs,
        };
        for g in &e.unit.specs {
            let same = check_equivalence(g, g, &e.unit, &e.tests).map_err(|err| err.to_string())?;
            ensure(same, || {
                format!("{}: `{}` not equivalent to itself", e.id, print_clause(g))
            })?;
            reflexive += 1;
            if g.kind != SpecKind::Ensures {
                continue;
            }
            // A clause some refuted mutant differs from carries behavior
            // that `ensures true` lacks.
            let refutable = (0..4u64).any(|seed| mutate_spec(g, &ctx, seed, 5, &[]).is_ok());
            if refutable {
                let t = parse_clause("ensures true;", &table, &g.anchor)
                    .map_err(|err| err.to_string())?;
                let eq =
                    check_equivalence(g, &t, &e.unit, &e.tests).map_err(|err| err.to_string())?;
                ensure(!eq, || {
                    format!(
                        "{}: `{}` judged equivalent to `ensures true`",
                        e.id,
                        print_clause(g)
                    )
                })?;
                trivial += 1;
            }
        }
    }
    for (id, original, rewrite) in COMMUTED {
        let e = c.entry(id).ok_or(format!("no program {id}"))?;
        let table = check_unit(&e.unit).map_err(|err| err.to_string())?;
        let g = e
            .unit
            .specs
            .iter()
            .find(|g| print_clause(g) == original)
            .ok_or(format!("{id}: no clause `{original}`"))?;
        let r = parse_clause(rewrite, &table, &g.anchor).map_err(|err| err.to_string())?;
        ensure(g.expr != r.expr, || {
            format!("{id}: rewrite is not a rewrite")
        })?;
        let eq = check_equivalence(g, &r, &e.unit, &e.tests).map_err(|err| err.to_string())?;
        ensure(eq, || {
            format!("{id}: `{rewrite}` not equivalent to `{original}`")
        })?;
    }
    Ok(format!(
        "{reflexive} clauses reflexive, {trivial} differ from `ensures true`, {} commuted rewrites equivalent",
        COMMUTED.len()
    ))
}

fn figure_programs() -> Check {
    let c = corpus();

    let pal = c.entry("palindrome").ok_or("no palindrome")?;
    let verdicts = check_specs(&pal.unit, &pal.tests);
    ensure(
        verdicts.len() == 5 && verdicts.iter().all(|v| v.correct),
        || format!("palindrome verdicts: {verdicts:?}"),
    )?;

    let fb = c.entry("fizzbuzz").ok_or("no fizzbuzz")?;
    let table = check_unit(&fb.unit).map_err(|e| e.to_string())?;
    let trace = Trace::record(&fb.unit, &fb.tests, DEFAULT_STEP_LIMIT);
    let anchor = Anchor::Method("fizzBuzz".into());
    let options = [
        "ensures (\\result == 15) <==> (n % 15 == 0);",
        "ensures (\\result == 15) <==> (n % 15 != 0);",
        "ensures (\\result != 15) <==> (n % 15 == 0);",
        "ensures (\\result == 15) <==> (n / 15 == 0);",
    ];
    for (i, text) in options.iter().enumerate() {
        let clause = parse_clause(text, &table, &anchor).map_err(|e| e.to_string())?;
        let holds = trace.holds(&clause, &fb.unit.specs);
        ensure(holds == (i == 0), || {
            format!("fizzbuzz option {i}: holds = {holds}")
        })?;
    }
    let ctx = MutationContext {
        table: &table,
        trace: &trace,
        ground_truth: &fb.unit.specs,
    };
    let mut mutants = 0;
    for g in &fb.unit.specs {
        for seed in 0..8u64 {
            if let Ok(m) = mutate_spec(g, &ctx, seed, 5, &[]) {
                ensure(!trace.holds(&m, &fb.unit.specs), || {
                    format!("`{}` survives", print_clause(&m))
                })?;
                mutants += 1;
            }
        }
    }

    let sq = c.entry("int_square").ok_or("no int_square")?;
    let mut fills = 0;
    for g in &sq.unit.specs {
        for site in mask_sites(&g.expr) {
            let (masked, hidden) = apply_mask(g, &site).ok_or("mask failed")?;
            let filled = fill_mask(&masked, &site, &hidden).ok_or("fill failed")?;
            ensure(&filled == g, || {
                format!("int_square: `{}` does not round-trip", print_clause(g))
            })?;
            fills += 1;
        }
    }
    let cfg = TaskGenConfig {
        task_types: vec![TaskType::Infilling],
        ..TaskGenConfig::default()
    };
    let input = ProgramInput {
        id: &sq.id,
        unit: &sq.unit,
        tests: &sq.tests,
    };
    let (tasks, _) = build_all_tasks(&[input], &cfg);
    ensure(tasks.len() == Category::ALL.len(), || {
        format!("{} infilling tasks", tasks.len())
    })?;
    for t in &tasks {
        let key = t.answer_key.clone().unwrap();
        let public = t.public();
        let reply = query(
            &ModelEndpoint::Oracle,
            &build_prompt(&public, 2),
            Some(&key),
        )
        .map_err(|e| e.to_string())?;
        let g = grade(
            &public,
            &key,
            "oracle",
            &parse_answer(TaskType::Infilling, &reply),
        );
        ensure(g.success, || format!("{}: {:?}", t.task_id, g.note))?;
    }
    Ok(format!(
        "palindrome 5/5 clauses hold; fizzbuzz option A alone holds, {mutants} mutants refuted; int_square {fills} masks round-trip, {} tasks graded",
        tasks.len()
    ))
}

fn determinism() -> Check {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let args = ["--endpoint", "oracle", "--seed", "11"];
    let ra = full_run(a.path(), &args)?;
    let rb = full_run(b.path(), &args)?;
    for (x, y, name) in [
        (
            a.path().join("tasks.jsonl"),
            b.path().join("tasks.jsonl"),
            "tasks.jsonl",
        ),
        (
            ra.join("report.json"),
            rb.join("report.json"),
            "report.json",
        ),
    ] {
        let (x, y) = (
            fs::read(x).map_err(|e| e.to_string())?,
            fs::read(y).map_err(|e| e.to_string())?,
        );
        ensure(x == y, || format!("{name} differs"))?;
    }
    Ok("tasks.jsonl and report.json byte-identical".into())
}

#[test]
fn acceptance() {
    let checks: [Criterion; 9] = [
        ("semantics preservation", preservation),
        ("ground-truth validity", ground_truth_validity),
        ("mutant refutation", mutant_refutation),
        ("oracle ceiling", oracle_ceiling),
        ("constant-judge baseline", constant_judge),
        ("metric fixtures", metric_fixtures),
        ("equivalence soundness", equivalence_soundness),
        ("worked examples", figure_programs),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    // The harness prints the test name without a newline.
    println!();
    for (i, (name, check)) in checks.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(why) => {
                println!("FAIL {}. {name}: {why}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
