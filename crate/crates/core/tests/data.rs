mod common;

use std::fs;

use drom::data::{
    generate_synthetic, inject_label_noise, load_manifest, parse_task_file, write_dataset,
    DataError, RoundSchedule, StreamOrder, SynthSpec,
};
use drom::linalg::{full_svd, nuclear_norm, SparseVec};
use drom::losses::{loss_and_subgradient, Label, LossKind};
use proptest::prelude::*;

fn spec(m: usize, d: usize, rank: usize, samples: usize, seed: u64) -> SynthSpec {
    SynthSpec {
        m,
        d,
        rank,
        samples,
        margin: 0.1,
        seed,
    }
}

#[test]
fn single_line_parses() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.txt"), "+1 3:0.5\n").unwrap();
    fs::write(dir.path().join("manifest.txt"), "a.txt\n").unwrap();
    let s = load_manifest::<f64>(&dir.path().join("manifest.txt"), None).unwrap();
    assert_eq!((s.m(), s.dim(), s.total_examples()), (1, 3, 1));
    let e = s.example(0, 0).unwrap();
    assert_eq!(e.label, Label::Pos);
    assert_eq!(e.x.to_dense(), vec![0.0, 0.0, 0.5]);
}

#[test]
fn parse_errors_name_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("good.txt"), "-1 2:1\n").unwrap();
    fs::write(dir.path().join("bad.txt"), "+1 1:1\n+2 1:1\n").unwrap();
    fs::write(dir.path().join("m.txt"), "# two tasks\ngood.txt\nbad.txt\n").unwrap();
    let e = load_manifest::<f64>(&dir.path().join("m.txt"), None).unwrap_err();
    assert!(matches!(e, DataError::Parse { line: 2, .. }));
    assert!(e.to_string().contains("bad.txt:2"), "{e}");

    fs::write(dir.path().join("empty.txt"), "\n").unwrap();
    fs::write(dir.path().join("m2.txt"), "good.txt\nempty.txt\n").unwrap();
    assert!(matches!(
        load_manifest::<f64>(&dir.path().join("m2.txt"), None),
        Err(DataError::EmptyTask(_))
    ));
    fs::write(dir.path().join("m3.txt"), "# nothing\n").unwrap();
    assert!(matches!(
        load_manifest::<f64>(&dir.path().join("m3.txt"), None),
        Err(DataError::EmptyManifest(_))
    ));
    assert!(matches!(
        load_manifest::<f64>(&dir.path().join("missing.txt"), None),
        Err(DataError::Io { .. })
    ));
}

/// Four sparse tasks whose largest index is below the declared width.
#[test]
fn declared_dimension_like_a_spam_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let mut manifest = String::new();
    for t in 0..4 {
        let body: String = (0..25)
            .map(|k| {
                let y = if (k + t) % 2 == 0 { "+1" } else { "-1" };
                format!("{y} {}:1 {}:0.25\n", 1 + k * 7 + t, 300 + k * 13)
            })
            .collect();
        fs::write(dir.path().join(format!("user{t}.txt")), body).unwrap();
        manifest.push_str(&format!("user{t}.txt\n"));
    }
    let path = dir.path().join("manifest.txt");
    fs::write(&path, manifest).unwrap();
    let s = load_manifest::<f64>(&path, Some(1458)).unwrap();
    assert_eq!((s.m(), s.dim()), (4, 1458));
    assert!(s.tasks().iter().all(|t| t.len() == 25));
    assert_eq!(load_manifest::<f64>(&path, None).unwrap().dim(), 300 + 24 * 13);
    assert!(matches!(
        load_manifest::<f64>(&path, Some(100)),
        Err(DataError::DimensionTooSmall { requested: 100, .. })
    ));
}

#[test]
fn serialization_round_trips_byte_for_byte() {
    let (s, _) = generate_synthetic::<f64>(&spec(3, 7, 2, 20, 4)).unwrap();
    let noisy = inject_label_noise(&s, 0.3, 1).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let manifest = write_dataset(&noisy, a.path()).unwrap();
    let loaded = load_manifest::<f64>(&manifest, Some(7)).unwrap();
    write_dataset(&loaded, b.path()).unwrap();
    for f in ["manifest.txt", "task0.txt", "task1.txt", "task2.txt"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    // Values survive exactly; only the flip bookkeeping is not serialized.
    for (x, y) in loaded.tasks().iter().zip(noisy.tasks()) {
        for (e, f) in x.examples.iter().zip(&y.examples) {
            assert_eq!((&e.x, e.label), (&f.x, f.label));
        }
    }
}

#[test]
fn whitespace_is_normalized() {
    let body = "  +1   2:1.5    1:-2 \n\n-1\t3:4\n";
    let parsed = parse_task_file::<f64>(body, "w.txt".as_ref()).unwrap();
    assert_eq!(parsed[0], (Label::Pos, vec![(0, -2.0), (1, 1.5)]));
    assert_eq!(parsed[1], (Label::Neg, vec![(2, 4.0)]));
}

#[test]
fn synthetic_rank_is_exact() {
    for (m, d) in [(5, 12), (8, 8), (3, 20)] {
        for r in 1..=m.min(d).min(4) {
            let (_, w) = generate_synthetic::<f64>(&spec(m, d, r, 5, r as u64)).unwrap();
            let svd = full_svd(&w).unwrap();
            assert_eq!(svd.sigma.iter().filter(|&&s| s > 1e-9).count(), r, "m {m} d {d} r {r}");
            for c in w.column_norms() {
                assert!((c - 1.0).abs() < 1e-12);
            }
        }
    }
    assert!(matches!(
        generate_synthetic::<f64>(&spec(3, 10, 4, 5, 0)),
        Err(DataError::Rank { rank: 4, max: 3 })
    ));
}

#[test]
fn noiseless_stream_is_separable_by_scaled_truth() {
    let sp = spec(4, 10, 2, 200, 6);
    let (s, w) = generate_synthetic::<f64>(&sp).unwrap();
    // Every margin is at least 0.1, so a = 10 puts every hinge loss at zero.
    let a = 1.0 / sp.margin;
    for (i, t) in s.tasks().iter().enumerate() {
        let wi: Vec<f64> = w.col(i).iter().map(|x| a * x).collect();
        for e in &t.examples {
            let (l, _) = loss_and_subgradient(LossKind::Hinge, &wi, &e.x, e.label).unwrap();
            assert_eq!(l, 0.0);
        }
    }
}

#[test]
fn full_rank_truth_has_larger_nuclear_norm() {
    for seed in 0..10 {
        let (_, low) = generate_synthetic::<f64>(&spec(4, 9, 1, 3, seed)).unwrap();
        let (_, high) = generate_synthetic::<f64>(&spec(4, 9, 4, 3, seed)).unwrap();
        // Unit columns: both have Frobenius norm 2.
        assert!((low.frobenius_norm() - high.frobenius_norm()).abs() < 1e-12);
        assert!(nuclear_norm(&high).unwrap() > nuclear_norm(&low).unwrap() + 1e-6, "seed {seed}");
    }
}

#[test]
fn synthetic_is_reproducible() {
    let a = generate_synthetic::<f64>(&spec(3, 6, 2, 15, 99)).unwrap();
    let b = generate_synthetic::<f64>(&spec(3, 6, 2, 15, 99)).unwrap();
    let c = generate_synthetic::<f64>(&spec(3, 6, 2, 15, 100)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.1, c.1);
}

#[test]
fn noise_extremes_and_rate() {
    let (s, _) = generate_synthetic::<f64>(&spec(2, 3, 1, 5000, 2)).unwrap();
    assert_eq!(inject_label_noise(&s, 0.0, 5).unwrap(), s);
    let all = inject_label_noise(&s, 1.0, 5).unwrap();
    assert_eq!(all.flipped_count(), 10_000);
    let quarter = inject_label_noise(&s, 0.25, 5).unwrap();
    let frac = quarter.flipped_count() as f64 / 10_000.0;
    assert!((frac - 0.25).abs() <= 0.02, "{frac}");
    for (t, u) in quarter.tasks().iter().zip(s.tasks()) {
        for (e, f) in t.examples.iter().zip(&u.examples) {
            assert_eq!(e.x, f.x);
            assert_eq!(e.clean_label(), f.label);
        }
    }
}

#[test]
fn scheduler_wraps_short_tasks() {
    let s = common::stream_from(
        1,
        &[
            vec![(vec![1.0], 1), (vec![2.0], 1), (vec![3.0], -1)],
            (0..7).map(|k| (vec![k as f64], 1)).collect(),
        ],
    );
    let seq = RoundSchedule::new(&s, StreamOrder::Sequential { wrap: true }, 0)
        .take(10)
        .unwrap();
    for (t, r) in seq.iter().enumerate() {
        assert_eq!(r, &vec![t % 3, t % 7]);
    }

    let shuffled = RoundSchedule::new(&s, StreamOrder::Shuffled, 4).take(12).unwrap();
    for pass in shuffled.chunks(3) {
        let mut seen: Vec<usize> = pass.iter().map(|r| r[0]).collect();
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2]);
    }

    let e = RoundSchedule::new(&s, StreamOrder::Sequential { wrap: false }, 0)
        .take(4)
        .unwrap_err();
    assert!(matches!(e, DataError::StreamExhausted { ref task, len: 3 } if task == "t0"));
    assert!(e.to_string().contains("t0"));
}

#[test]
fn stream_rejects_inconsistent_tasks() {
    let t = |dim: usize| drom::data::TaskData {
        name: "x".to_string(),
        examples: vec![drom::data::Example {
            x: SparseVec::<f64>::zeros(dim),
            label: Label::Neg,
            flipped: false,
        }],
    };
    assert!(drom::data::MultiTaskStream::new(3, vec![t(3), t(4)]).is_err());
    assert!(drom::data::MultiTaskStream::<f64>::new(3, vec![]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn one_example_per_task_per_round(lens in prop::collection::vec(1usize..9, 1..5), seed in 0u64..500,
                                      rounds in 1usize..40, shuffled in any::<bool>()) {
        let tasks: Vec<Vec<(Vec<f64>, i8)>> =
            lens.iter().map(|&n| (0..n).map(|k| (vec![k as f64], 1)).collect()).collect();
        let s = common::stream_from(1, &tasks);
        let order = if shuffled { StreamOrder::Shuffled } else { StreamOrder::Sequential { wrap: true } };
        let sched = RoundSchedule::new(&s, order, seed).take(rounds).unwrap();
        for r in &sched {
            prop_assert_eq!(r.len(), lens.len());
            for (i, &k) in r.iter().enumerate() {
                prop_assert!(k < lens[i]);
            }
        }
        // Each full pass over a task visits every example once.
        for (i, &n) in lens.iter().enumerate() {
            for pass in sched.chunks_exact(n) {
                let mut seen: Vec<usize> = pass.iter().map(|r| r[i]).collect();
                seen.sort();
                prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
            }
        }
        prop_assert_eq!(&RoundSchedule::new(&s, order, seed).take(rounds).unwrap(), &sched);
    }

    #[test]
    fn noise_is_monotone_in_probability(p in 0.0f64..1.0, q in 0.0f64..1.0, seed in 0u64..100) {
        let (s, _) = generate_synthetic::<f64>(&spec(2, 3, 1, 40, 1)).unwrap();
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        let a = inject_label_noise(&s, lo, seed).unwrap();
        let b = inject_label_noise(&s, hi, seed).unwrap();
        for (x, y) in a.tasks().iter().zip(b.tasks()) {
            for (e, f) in x.examples.iter().zip(&y.examples) {
                prop_assert!(!e.flipped || f.flipped);
            }
        }
    }
}
