//! End-to-end acceptance gate. Each test covers one criterion and prints a
//! single PASS/FAIL line.

mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use parlens::doctree::TraceIndex;
use parlens::dsl::{
    evaluate_packet, parse_format, print_format, EvalResult, PropertyId, Violation,
};
use parlens::graph::{
    build_graph, enumerate_paths, path_to_formula, ConjunctOrigin, EnumerateOptions,
};
use parlens::harness::{run_suite, Direction};
use parlens::pipeline::{
    self, CORPUS_DIR, DOCTREE_FILE, FORMAT_FILE, REFINEMENTS_FILE, TRACE_FILE,
};
use parlens::testgen::{
    generate_suite, mutate_field_level, read_corpus, solve, CaseKind, GenOptions, SolveOutcome,
    SolverOptions,
};
use parlens::triage::Classification;

use common::*;

fn criterion(n: usize, desc: &str, f: impl FnOnce() + std::panic::UnwindSafe) {
    match std::panic::catch_unwind(f) {
        Ok(()) => println!("criterion {n} ({desc}): PASS"),
        Err(e) => {
            println!("criterion {n} ({desc}): FAIL");
            std::panic::resume_unwind(e);
        }
    }
}

/// Runs fixture extraction in replay mode into `out`.
fn extract_fixture(out: &Path) -> parlens::config::PipelineConfig {
    let cfg = fixture_config(out);
    let gw = replay_gateway();
    pipeline::cmd_extract(&cfg, &gw, false).unwrap();
    cfg
}

#[test]
fn criterion_1_golden_worked_example() {
    criterion(1, "golden Router-Id worked example", || {
        let started = Instant::now();
        let out = tempfile::tempdir().unwrap();
        let cfg = extract_fixture(out.path());
        let spec =
            parse_format(&std::fs::read_to_string(out.path().join(FORMAT_FILE)).unwrap())
                .unwrap()
                .spec;

        // The Router-Id path formula: 4 domain + 4 field-level + 1 edge
        // conjuncts.
        let graph = build_graph(&spec);
        let paths = enumerate_paths(&spec, &graph, &EnumerateOptions::default()).unwrap();
        assert_eq!(paths.len(), 2);
        let router = paths
            .iter()
            .find(|p| p.steps.iter().any(|s| s.var.ends_with("RouterId")))
            .unwrap();
        let formula = path_to_formula(router);
        assert_eq!(formula.conjuncts.len(), 9);
        let count = |o: ConjunctOrigin| {
            formula.conjuncts.iter().filter(|c| c.origin == o).count()
        };
        assert_eq!(count(ConjunctOrigin::Domain), 4);
        assert_eq!(count(ConjunctOrigin::Node), 4);
        assert_eq!(count(ConjunctOrigin::Edge), 1);

        // A positive assignment satisfying the formula.
        let solver = SolverOptions::default();
        let base = match solve(&formula, &[], &solver) {
            SolveOutcome::Sat(asg) => asg,
            other => panic!("expected sat, got {other:?}"),
        };
        assert_eq!(base["Type"], 6);
        assert_eq!(base["Payload.Length"], 10);
        assert_eq!(base["Payload.Reserved"], 0);
        assert_eq!(base["Payload.RouterId"], 1);

        // ¬(Length ≥ 10) with every other field pinned to the base values.
        let length_neg = formula
            .field_level_targets()
            .find(|c| c.property == Some(PropertyId::constraint("RouterIdTLV", 0)))
            .unwrap();
        let case =
            mutate_field_level(&spec, router, &formula, length_neg, &base, &solver).unwrap();
        assert!(case.bytes[1] < 10, "Length must violate the bound");
        assert_eq!(case.bytes[0], 6, "Type pinned");
        assert_eq!(&case.bytes[2..4], &[0, 0], "Reserved pinned");
        assert_eq!(case.bytes[11], 1, "RouterId pinned");

        // The RouterId = 0 negative.
        let rid_neg = formula
            .field_level_targets()
            .find(|c| c.property == Some(PropertyId::constraint("RouterIdTLV", 2)))
            .unwrap();
        let case =
            mutate_field_level(&spec, router, &formula, rid_neg, &base, &solver).unwrap();
        assert_eq!(&case.bytes[4..12], &[0; 8], "RouterId zeroed");

        // Against the constraint-omitting parser, exactly the RouterId = 0
        // and all-ones cases are inconsistent, and both diagnose as
        // implementation errors from the recorded fixtures.
        let suite = generate_suite(&spec, &graph, &GenOptions::default()).unwrap();
        let buggy = target(env!("CARGO_BIN_EXE_ref-parser-buggy"), &[]);
        let (_, inconsistencies) = run_suite(&buggy, &suite.cases, 4).unwrap();
        let props: BTreeSet<String> = inconsistencies
            .iter()
            .map(|i| i.property.as_ref().unwrap().to_string())
            .collect();
        assert_eq!(
            props,
            BTreeSet::from(["RouterIdTLV.c2".to_string(), "RouterIdTLV.c3".to_string()])
        );
        let tree = parlens::doctree::DocTree::from_json(
            &std::fs::read_to_string(out.path().join(DOCTREE_FILE)).unwrap(),
        )
        .unwrap();
        let index = TraceIndex::from_json(
            &std::fs::read_to_string(out.path().join(TRACE_FILE)).unwrap(),
        )
        .unwrap();
        let gw = replay_gateway();
        for inc in &inconsistencies {
            let diag = parlens::triage::diagnose(inc, &spec, &tree, &index, &gw).unwrap();
            assert_eq!(diag.classification, Classification::ImplementationError);
        }
        let _ = cfg;
        assert!(started.elapsed() < Duration::from_secs(10), "criterion 1 must finish in 10 s");
    });
}

#[test]
fn criterion_2_brute_force_oracle_equivalence() {
    criterion(2, "accept sets equal exhaustive enumeration", || {
        let started = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(0xBABE_0002);
        for i in 0..20 {
            let src = random_small_spec(&mut rng);
            let spec = parse(&src);
            let brute = brute_force_accept_set(&spec, max_path_bytes(&spec));
            let formulas = formula_accept_set(&spec);
            assert_eq!(
                brute, formulas,
                "accept sets diverge for generated spec #{i}:\n{src}"
            );
        }
        assert!(started.elapsed() < Duration::from_secs(60), "criterion 2 must finish in 60 s");
    });
}

#[test]
fn criterion_3_generator_soundness() {
    criterion(3, "1000+ generated cases match the evaluator", || {
        let started = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(0xBABE_0003);
        let opts = GenOptions::default();
        let mut checked = 0usize;
        while checked < 1000 {
            let src = random_small_spec(&mut rng);
            let spec = parse(&src);
            let graph = build_graph(&spec);
            let suite = generate_suite(&spec, &graph, &opts).unwrap();
            for case in &suite.cases {
                match case.kind {
                    CaseKind::Positive => {
                        assert!(
                            evaluate_packet(&spec, &case.bytes).is_pass(),
                            "positive {} rejected:\n{src}",
                            case.name
                        );
                    }
                    CaseKind::FieldNegative => {
                        match evaluate_packet(&spec, &case.bytes) {
                            EvalResult::Fail(Violation::Constraint { property, .. }) => {
                                assert_eq!(
                                    Some(&property),
                                    case.property.as_ref(),
                                    "negative {} fails the wrong property:\n{src}",
                                    case.name
                                );
                            }
                            other => panic!(
                                "negative {} expected a constraint violation, got {other:?}:\n{src}",
                                case.name
                            ),
                        }
                    }
                    CaseKind::StructuralNegative => {
                        assert!(
                            !evaluate_packet(&spec, &case.bytes).is_pass(),
                            "structural negative {} accepted:\n{src}",
                            case.name
                        );
                    }
                }
                checked += 1;
            }
        }
        assert!(started.elapsed() < Duration::from_secs(60), "criterion 3 must finish in 60 s");
    });
}

fn walk_files(root: &Path) -> Vec<(String, Vec<u8>)> {
    fn go(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                go(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                // Run records carry wall-clock timings; everything else must
                // be byte-identical.
                if rel == pipeline::RECORDS_FILE {
                    continue;
                }
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    go(root, root, &mut out);
    out.sort();
    out
}

#[test]
fn criterion_4_replay_determinism() {
    criterion(4, "replay runs are byte-identical", || {
        let run = || {
            let out = tempfile::tempdir().unwrap();
            let mut cfg = fixture_config(out.path());
            cfg.target = Some(target(env!("CARGO_BIN_EXE_ref-parser-buggy"), &[]));
            let gw = replay_gateway();
            let summary = pipeline::cmd_all(&cfg, &gw, None, true, true).unwrap();
            assert!(summary.fixed_point);
            (walk_files(out.path()), out)
        };
        let (a, _keep_a) = run();
        let (b, _keep_b) = run();
        assert_eq!(a.len(), b.len(), "artifact sets differ");
        for ((na, ba), (nb, bb)) in a.iter().zip(b.iter()) {
            assert_eq!(na, nb, "artifact names differ");
            assert_eq!(ba, bb, "artifact {na} differs between runs");
        }
    });
}

#[test]
fn criterion_5_dsl_round_trip() {
    criterion(5, "parse(print(S)) is S for 500+ specs", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xBABE_0005);
        for i in 0..520 {
            let src = if i % 2 == 0 { random_rich_spec(&mut rng) } else { random_small_spec(&mut rng) };
            let spec = parse(&src);
            let printed = print_format(&spec);
            let reparsed = parse_format(&printed)
                .unwrap_or_else(|d| panic!("printed spec must reparse: {d:?}\n{printed}"))
                .spec;
            assert_eq!(
                print_format(&reparsed),
                printed,
                "round trip unstable for spec #{i}:\n{src}"
            );
        }
    });
}

#[test]
fn criterion_6_harness_verdict_mapping() {
    criterion(6, "reference parsers map to the right verdicts", || {
        let spec = parse_format(include_str!("../assets/babel_mini.pform")).unwrap().spec;
        let graph = build_graph(&spec);
        let suite = generate_suite(&spec, &graph, &GenOptions::default()).unwrap();

        let (_, clean) =
            run_suite(&target(env!("CARGO_BIN_EXE_ref-parser-correct"), &[]), &suite.cases, 4)
                .unwrap();
        assert!(clean.is_empty(), "correct parser must have no inconsistencies: {clean:?}");

        let (_, buggy) =
            run_suite(&target(env!("CARGO_BIN_EXE_ref-parser-buggy"), &[]), &suite.cases, 4)
                .unwrap();
        assert!(
            buggy.iter().any(|i| i.direction == Direction::ParserAcceptsInvalid),
            "buggy parser must accept at least one invalid packet"
        );

        let (_, crashing) =
            run_suite(&target(env!("CARGO_BIN_EXE_ref-parser-crashing"), &[]), &suite.cases, 4)
                .unwrap();
        let crash = crashing.iter().find(|i| i.direction == Direction::Crash);
        let crash = crash.expect("crashing parser must produce a crash inconsistency");

        // Crashes classify as implementation errors without consulting the
        // model at all.
        let out = tempfile::tempdir().unwrap();
        extract_fixture(out.path());
        let tree = parlens::doctree::DocTree::from_json(
            &std::fs::read_to_string(out.path().join(DOCTREE_FILE)).unwrap(),
        )
        .unwrap();
        let index = TraceIndex::from_json(
            &std::fs::read_to_string(out.path().join(TRACE_FILE)).unwrap(),
        )
        .unwrap();
        let gw = replay_gateway();
        let diag = parlens::triage::diagnose(crash, &spec, &tree, &index, &gw).unwrap();
        assert_eq!(diag.classification, Classification::ImplementationError);
        assert_eq!(gw.exchange_count(), 0, "crash triage must not call the model");
    });
}

#[test]
fn criterion_7_traceability_totality() {
    criterion(7, "every format property backtraces to a section", || {
        let out = tempfile::tempdir().unwrap();
        extract_fixture(out.path());
        let spec =
            parse_format(&std::fs::read_to_string(out.path().join(FORMAT_FILE)).unwrap())
                .unwrap()
                .spec;
        let tree = parlens::doctree::DocTree::from_json(
            &std::fs::read_to_string(out.path().join(DOCTREE_FILE)).unwrap(),
        )
        .unwrap();
        let index = TraceIndex::from_json(
            &std::fs::read_to_string(out.path().join(TRACE_FILE)).unwrap(),
        )
        .unwrap();
        for st in &spec.structs {
            for f in st.fields() {
                let p = PropertyId::field(&st.name, &f.name);
                let (section, content) = parlens::doctree::trace(&index, &tree, &p)
                    .unwrap_or_else(|e| panic!("field {p} must backtrace: {e}"));
                assert!(!content.trim().is_empty(), "{p} traces to empty section {section}");
            }
            for (i, _) in st.constraints() {
                let p = PropertyId::constraint(&st.name, i);
                let (section, content) = parlens::doctree::trace(&index, &tree, &p)
                    .unwrap_or_else(|e| panic!("constraint {p} must backtrace: {e}"));
                assert!(!content.trim().is_empty(), "{p} traces to empty section {section}");
            }
        }
        // The Router-Id constraints come from section 4.4.7 specifically.
        for i in 0..4 {
            let p = PropertyId::constraint("RouterIdTLV", i);
            let (section, _) = parlens::doctree::trace(&index, &tree, &p).unwrap();
            assert_eq!(section, "4.4.7");
        }
    });
}

#[test]
fn criterion_8_refinement_loop() {
    criterion(8, "format refinement reaches a fixed point", || {
        let out = tempfile::tempdir().unwrap();
        let mut cfg = fixture_config(out.path());
        cfg.target = Some(target(
            env!("CARGO_BIN_EXE_ref-parser-buggy"),
            &["--skip", "RouterId", "--skip", "Reserved"],
        ));
        let gw = replay_gateway();
        let summary = pipeline::cmd_all(&cfg, &gw, None, false, false).unwrap();
        assert!(summary.fixed_point, "loop must reach a fixed point");
        assert!(summary.cycles <= 3, "fixed point within 3 cycles, took {}", summary.cycles);

        // Exactly the over-strict Reserved constraint was removed.
        let audits: Vec<parlens::triage::RefineAudit> =
            std::fs::read_to_string(out.path().join(REFINEMENTS_FILE))
                .unwrap()
                .lines()
                .map(|l| serde_json::from_str(l).unwrap())
                .collect();
        assert_eq!(audits.len(), 1);
        assert_eq!(audits[0].property_id, "RouterIdTLV.c1");
        assert_eq!(audits[0].action, "removed");
        assert_eq!(audits[0].before, "Reserved == 0");

        let format_text = std::fs::read_to_string(out.path().join(FORMAT_FILE)).unwrap();
        assert!(!format_text.contains("Reserved == 0"), "constraint must be gone");
        assert!(format_text.contains("UINT16 Reserved;"), "field itself must remain");

        // The regenerated corpus dropped exactly the negatives of the
        // removed constraint: no case mutates Reserved any more, and the
        // three remaining field-level negatives are still present.
        let corpus = read_corpus(&out.path().join(CORPUS_DIR)).unwrap();
        let field_negs: Vec<_> =
            corpus.iter().filter(|c| c.kind == CaseKind::FieldNegative).collect();
        assert_eq!(field_negs.len(), 3);
        assert!(
            field_negs.iter().all(|c| !c.detail.contains("Reserved")),
            "Reserved negatives must be dropped: {:?}",
            field_negs.iter().map(|c| &c.detail).collect::<Vec<_>>()
        );

        // The surviving RouterId bugs are still reported.
        assert!(summary.implementation_errors >= 1);
    });
}
