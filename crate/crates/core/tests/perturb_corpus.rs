mod common;

use speceval::lang::print_unit;
use speceval::perturb::{perturb, PerturbKind};
use speceval::runtime::{check_specs, execute, DEFAULT_STEP_LIMIT};

#[test]
fn every_kind_preserves_outputs_and_specs() {
    for p in common::programs() {
        for kind in PerturbKind::ALL {
            for seed in 0..6u64 {
                let pu =
                    perturb(&p.unit, kind, seed).unwrap_or_else(|e| panic!("{} {kind}: {e}", p.id));
                let text = print_unit(&pu.unit);
                for t in &p.tests {
                    let mut t2 = t.clone();
                    t2.method = pu.method_name(&t.method);
                    let a = execute(&p.unit, t, DEFAULT_STEP_LIMIT).outcome();
                    let b = execute(&pu.unit, &t2, DEFAULT_STEP_LIMIT).outcome();
                    assert_eq!(a, b, "{} {kind} seed {seed} on {t}\n{text}", p.id);
                }
                let tests: Vec<_> = p
                    .tests
                    .iter()
                    .map(|t| {
                        let mut t = t.clone();
                        t.method = pu.method_name(&t.method);
                        t
                    })
                    .collect();
                for v in check_specs(&pu.unit, &tests) {
                    assert!(
                        v.correct,
                        "{} {kind} seed {seed}: {:?}\n{text}",
                        p.id, v.counterexample
                    );
                }
            }
        }
    }
}

mod random_inputs {
    use super::common;
    use proptest::prelude::*;
    use speceval::lang::TypeTag;
    use speceval::perturb::{perturb, PerturbKind};
    use speceval::runtime::{execute, TestCase, Value, DEFAULT_STEP_LIMIT};

    fn value(t: TypeTag) -> BoxedStrategy<Value> {
        match t {
            TypeTag::Int => (-60i32..60).prop_map(Value::Int).boxed(),
            TypeTag::Boolean => any::<bool>().prop_map(Value::Bool).boxed(),
            TypeTag::IntArray => prop::collection::vec(-6i32..6, 0..8)
                .prop_map(Value::IntArray)
                .boxed(),
            TypeTag::Str => "[abcx]{0,8}".prop_map(Value::Str).boxed(),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn variants_agree_off_the_suite(
            pick in any::<prop::sample::Index>(),
            kind in prop::sample::select(PerturbKind::ALL.to_vec()),
            seed in 0u64..1000,
            raw in prop::collection::vec(any::<prop::sample::Index>(), 4),
            pools in (value(TypeTag::Int), value(TypeTag::Int), value(TypeTag::Int), value(TypeTag::Int)),
            arrays in (value(TypeTag::IntArray), value(TypeTag::Str), value(TypeTag::Boolean)),
        ) {
            let programs = common::programs();
            let p = &programs[pick.index(programs.len())];
            let test = &p.tests[raw[0].index(p.tests.len())];
            let types = p.unit.method(&test.method).unwrap().param_types();
            let ints = [pools.0, pools.1, pools.2, pools.3];
            let args: Vec<Value> = types
                .iter()
                .enumerate()
                .map(|(i, t)| match t {
                    TypeTag::Int => ints[i % 4].clone(),
                    TypeTag::IntArray => arrays.0.clone(),
                    TypeTag::Str => arrays.1.clone(),
                    TypeTag::Boolean => arrays.2.clone(),
                })
                .collect();
            let pu = perturb(&p.unit, kind, seed).unwrap();
            let a = execute(&p.unit, &TestCase::new(test.method.clone(), args.clone()), DEFAULT_STEP_LIMIT).outcome();
            let b = execute(&pu.unit, &TestCase::new(pu.method_name(&test.method), args.clone()), DEFAULT_STEP_LIMIT).outcome();
            prop_assert_eq!(a, b, "{} {} {:?}", p.id, kind, args);
        }
    }
}
