use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use feedersim_core::calendar::DEFAULT_TIMEZONE;
use feedersim_core::profile_store::{load_store, save_store};
use feedersim_core::sampler::{feeder_metrics, SamplingReport};
use feedersim_core::{Direction, Profile, ProfileLabels, ProfileSet};

const TINY: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/tiny.toml");

fn feedersim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_feedersim"))
        .current_dir(dir)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .env_remove("FEEDERSIM_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = feedersim(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.insert(
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    files
}

fn pipeline(root: &Path, threads: &str) {
    ok(root, &["synth", "--config", TINY, "--out", "store"]);
    ok(root, &["summarize", "--store", "store", "--out", "summary"]);
    ok(
        root,
        &[
            "--threads",
            threads,
            "sample",
            "--store",
            "store",
            "--connections",
            "1,2,4",
            "--samples",
            "40",
            "--seed",
            "9",
            "--out",
            "run",
        ],
    );
    ok(
        root,
        &[
            "timing",
            "--store",
            "store",
            "--run",
            "run",
            "--connections",
            "2",
            "--out",
            "timing",
        ],
    );
    ok(
        root,
        &[
            "contribution",
            "--store",
            "store",
            "--with",
            "hp",
            "--without",
            "no-hp-no-ev",
            "--connections",
            "1,2",
            "--samples",
            "30",
            "--out",
            "contribution",
        ],
    );
    ok(
        root,
        &[
            "export", "--store", "store", "--panels", "hp-00003", "--out", "export",
        ],
    );
}

#[test]
fn tiny_pipeline_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path(), "1");
    pipeline(b.path(), "3");
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    assert_eq!(ta.keys().collect::<Vec<_>>(), tb.keys().collect::<Vec<_>>());
    for (path, bytes) in &ta {
        assert!(
            bytes == &tb[path],
            "{} differs between runs",
            path.display()
        );
    }
    for dir in [
        "store",
        "summary",
        "run",
        "timing",
        "contribution",
        "export",
    ] {
        assert!(
            ta.contains_key(&Path::new(dir).join("manifest.json")),
            "{dir} has no manifest"
        );
    }
    let heatmap =
        String::from_utf8(ta[Path::new("timing/all_offtake_n2_seed9_peak_heatmap.svg")].clone())
            .unwrap();
    assert_eq!(heatmap.matches(r#"class="cell""#).count(), 365 * 24);
}

#[test]
fn commands_leave_the_store_untouched() {
    let root = tempfile::tempdir().unwrap();
    ok(root.path(), &["synth", "--config", TINY, "--out", "store"]);
    let before = tree(&root.path().join("store"));
    ok(
        root.path(),
        &[
            "sample",
            "--store",
            "store",
            "--connections",
            "2",
            "--samples",
            "5",
            "--out",
            "run",
        ],
    );
    ok(
        root.path(),
        &[
            "timing", "--store", "store", "--run", "run", "--out", "timing",
        ],
    );
    assert_eq!(before, tree(&root.path().join("store")));
    let inside = feedersim(
        root.path(),
        &[
            "sample",
            "--store",
            "store",
            "--connections",
            "2",
            "--out",
            "store/run",
        ],
    );
    assert_eq!(inside.status.code(), Some(2));
}

#[test]
fn whole_population_single_sample_matches_direct_metrics() {
    let root = tempfile::tempdir().unwrap();
    ok(root.path(), &["synth", "--config", TINY, "--out", "store"]);
    ok(
        root.path(),
        &[
            "sample",
            "--store",
            "store",
            "--connections",
            "6",
            "--samples",
            "1",
            "--out",
            "run",
        ],
    );
    let report = SamplingReport::read_json(&root.path().join("run/report.json")).unwrap();
    let (set, _, _) = load_store(&root.path().join("store")).unwrap();
    let all: Vec<&Profile> = set.iter().collect();
    for direction in Direction::BOTH {
        let direct = feeder_metrics(&all, direction).unwrap();
        let r = report.result(6, direction).unwrap();
        // Summation order differs from the draw order; allow rounding.
        assert!((r.peak_kw.mean - direct.peak_kw).abs() < 1e-9);
        assert_eq!(r.peak_kw.min, r.peak_kw.max);
        let s = r.simultaneity.as_ref().unwrap().mean;
        assert!((s - direct.simultaneity.unwrap()).abs() < 1e-12);
    }
}

fn shifted_store(dir: &Path) {
    let base = |k: usize| -> Vec<f64> {
        (0..35_040)
            .map(|q| {
                let x = (q as f64 * 0.013 + k as f64 * 1.7).sin() * 2.0;
                let spike = if (q + 37 * k).is_multiple_of(997) {
                    3.0 + k as f64 * 0.1
                } else {
                    0.0
                };
                x + spike
            })
            .collect()
    };
    let mut profiles = Vec::new();
    for k in 0..12 {
        let power = base(k);
        profiles.push(
            Profile::new(format!("ref-{k}"), power.clone(), ProfileLabels::default()).unwrap(),
        );
        let labels = ProfileLabels {
            has_hp: true,
            ..ProfileLabels::default()
        };
        let shifted = power.iter().map(|v| v + 1.0).collect();
        profiles.push(Profile::new(format!("lct-{k}"), shifted, labels).unwrap());
    }
    let set = ProfileSet::new(2022, DEFAULT_TIMEZONE, profiles).unwrap();
    save_store(dir, &set, None).unwrap();
}

#[test]
fn contribution_of_a_one_kilowatt_shift() {
    let root = tempfile::tempdir().unwrap();
    shifted_store(&root.path().join("store"));
    ok(
        root.path(),
        &[
            "contribution",
            "--store",
            "store",
            "--with",
            "hp",
            "--without",
            "no-hp-no-ev",
            "--connections",
            "1,3,8",
            "--samples",
            "200",
            "--direction",
            "offtake",
            "--format",
            "table",
            "--out",
            "c",
        ],
    );
    let text = fs::read_to_string(root.path().join("c/contribution.csv")).unwrap();
    let mut rows = 0;
    for line in text
        .lines()
        .skip(1)
        .filter(|l| l.contains("peak_per_connection_kw"))
    {
        let mean: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!((mean - 1.0).abs() < 1e-9, "{line}");
        rows += 1;
    }
    assert_eq!(rows, 3);
    assert!(!root
        .path()
        .join("c/with/all_seed0_offtake_trend.svg")
        .exists());
}

#[test]
fn exit_codes_separate_usage_from_data_errors() {
    let root = tempfile::tempdir().unwrap();
    ok(root.path(), &["synth", "--config", TINY, "--out", "store"]);
    let code = |args: &[&str]| feedersim(root.path(), args).status.code();
    assert_eq!(code(&["sample", "--store", "store", "--bogus"]), Some(2));
    assert_eq!(
        code(&[
            "sample",
            "--store",
            "store",
            "--connections",
            "2,2",
            "--out",
            "x"
        ]),
        Some(2)
    );
    assert_eq!(
        code(&[
            "sample",
            "--store",
            "store",
            "--direction",
            "sideways",
            "--out",
            "x"
        ]),
        Some(2)
    );
    assert_eq!(
        code(&["--threads", "0", "sample", "--store", "store", "--out", "x"]),
        Some(2)
    );
    assert_eq!(
        code(&[
            "sample",
            "--store",
            "store",
            "--connections",
            "7",
            "--out",
            "x"
        ]),
        Some(1)
    );
    assert_eq!(
        code(&[
            "sample",
            "--store",
            "missing",
            "--connections",
            "2",
            "--out",
            "x"
        ]),
        Some(1)
    );
    assert_eq!(
        code(&["export", "--store", "store", "--panels", "nobody", "--out", "e"]),
        Some(2)
    );
}

#[test]
fn export_then_ingest_round_trips() {
    let root = tempfile::tempdir().unwrap();
    ok(root.path(), &["synth", "--config", TINY, "--out", "store"]);
    ok(
        root.path(),
        &[
            "export", "--store", "store", "--format", "table", "--out", "export",
        ],
    );
    ok(
        root.path(),
        &[
            "ingest",
            "--profiles",
            "export/profiles.csv",
            "--labels",
            "export/labels.csv",
            "--weather",
            "export/weather.csv",
            "--out",
            "again",
        ],
    );
    let read = |dir: &str| fs::read(root.path().join(dir).join("power.bin")).unwrap();
    assert_eq!(read("store"), read("again"));
    let diagnostics = fs::read_to_string(root.path().join("again/diagnostics.csv")).unwrap();
    assert_eq!(diagnostics.lines().count(), 1);
}
