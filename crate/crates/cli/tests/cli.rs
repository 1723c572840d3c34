use std::path::Path;
use std::process::{Command, Output};

const SUBCOMMANDS: [&str; 6] = [
    "generate-sbm",
    "analyze",
    "renormalize",
    "train",
    "compare",
    "random-control",
];

fn lrg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrg"))
        .args(args)
        .env_remove("LRG_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = lrg(args);
    assert!(
        o.status.success(),
        "lrg {args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn sbm(dir: &Path, sizes: &str, extra: &[&str]) {
    let mut args = vec!["generate-sbm", "--out", p(dir), "--sizes", sizes];
    args.extend_from_slice(extra);
    ok(&args);
}

#[test]
fn help_for_every_subcommand() {
    assert!(ok(&["--help"]).contains("Usage"));
    for cmd in SUBCOMMANDS {
        let out = ok(&[cmd, "--help"]);
        assert!(out.contains("Usage: lrg"), "{cmd}: {out}");
    }
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(lrg(&["analyze", "--graph", "x", "--bogus"]).status.code(), Some(64));
    assert_eq!(lrg(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(lrg(&["train"]).status.code(), Some(64));
    assert_eq!(lrg(&["renormalize", "--graph", "x"]).status.code(), Some(64));
}

#[test]
fn analyze_k2_and_bad_range() {
    let tmp = tempfile::tempdir().unwrap();
    let k2 = tmp.path().join("k2");
    sbm(&k2, "2", &["--p-in", "1", "--p-out", "0"]);
    let out_dir = tmp.path().join("an");
    let out = ok(&["analyze", "--graph", p(&k2), "--out", p(&out_dir)]);
    let s0: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("S(tau_min) = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((s0 - 1.0).abs() < 1e-3, "{out}");
    let peaks = std::fs::read_to_string(out_dir.join("peaks.csv")).unwrap();
    assert_eq!(peaks.lines().count(), 2, "{peaks}");
    assert!(out_dir.join("scan.csv").exists());
    assert!(out_dir.join("manifest.json").exists());

    let bad = lrg(&["analyze", "--graph", p(&k2), "--tau-min", "10", "--tau-max", "1"]);
    assert_eq!(bad.status.code(), Some(64));
}

#[test]
fn analyze_exit_codes_for_missing_data_and_no_peak() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = lrg(&["analyze", "--graph", p(&tmp.path().join("nope"))]);
    assert_eq!(missing.status.code(), Some(2));

    let k2 = tmp.path().join("k2");
    sbm(&k2, "2", &["--p-in", "1", "--p-out", "0"]);
    let o = lrg(&[
        "analyze", "--graph", p(&k2), "--tau-min", "100", "--tau-max", "1000",
        "--out", p(&tmp.path().join("an")),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--tau-max"));
}

#[test]
fn dataset_resolves_under_data_dir() {
    let tmp = tempfile::tempdir().unwrap();
    sbm(&tmp.path().join("k2"), "2", &["--p-in", "1", "--p-out", "0"]);
    let o = Command::new(env!("CARGO_BIN_EXE_lrg"))
        .args(["analyze", "--graph", "k2", "--out", p(&tmp.path().join("an"))])
        .env("LRG_DATA_DIR", tmp.path())
        .current_dir(tmp.path().join("k2"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn renormalize_rejects_zero_tau_and_collapses_at_huge_tau() {
    let tmp = tempfile::tempdir().unwrap();
    let g = tmp.path().join("g");
    sbm(&g, "6,6", &["--p-in", "0.8", "--p-out", "0.2"]);
    let zero = lrg(&["renormalize", "--graph", p(&g), "--tau", "0"]);
    assert_eq!(zero.status.code(), Some(64));

    let out = tmp.path().join("r");
    ok(&["renormalize", "--graph", p(&g), "--tau", "1e9", "--out", p(&out)]);
    let prov: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("provenance.json")).unwrap())
            .unwrap();
    let n = prov["n_nodes"].as_u64().unwrap();
    assert!(prov["n_macro_nodes"].as_u64().unwrap() < n, "{prov}");
    let partition = std::fs::read_to_string(out.join("partition.csv")).unwrap();
    assert_eq!(partition.lines().count() as u64, n + 1);
    assert!(out.join("graph/edges.tsv").exists());
}

#[test]
fn renormalize_is_idempotent_for_fixed_tau() {
    let tmp = tempfile::tempdir().unwrap();
    let g = tmp.path().join("g");
    sbm(&g, "8,8", &["--p-in", "0.7", "--p-out", "0.1"]);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        ok(&["renormalize", "--graph", p(&g), "--tau", "0.8", "--out", p(out)]);
    }
    for f in ["partition.csv", "provenance.json", "graph/edges.tsv", "graph/features.csv"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn train_compare_and_control_on_a_small_sbm() {
    let tmp = tempfile::tempdir().unwrap();
    let g = tmp.path().join("g");
    sbm(&g, "15,15", &["--p-in", "0.5", "--p-out", "0.05", "--masks"]);
    let fast = ["--seeds", "3", "--epochs", "30", "--lr", "0.01", "--hidden", "8", "--out-dim", "8"];

    let mut runs = Vec::new();
    for (variant, taus) in [("MB", None), ("MR", Some("0.5")), ("MR", Some("0.5"))] {
        let out = tmp.path().join(format!("{variant}{}", runs.len()));
        let mut args = vec!["train", "--dataset", p(&g), "--variant", variant, "--out", p(&out)];
        if let Some(t) = taus {
            args.extend(["--taus", t]);
        }
        args.extend(fast);
        let text = ok(&args);
        assert!(text.contains("over 3 seeds"), "{text}");
        let results = std::fs::read_to_string(out.join("results.csv")).unwrap();
        assert_eq!(results.lines().count(), 4, "{results}");
        assert!(out.join("curves.csv").exists());
        assert!(out.join("seed_1/metrics.jsonl").exists());
        runs.push(out);
    }
    for f in ["results.csv", "scores.csv", "curves.csv"] {
        assert_eq!(
            std::fs::read(runs[1].join(f)).unwrap(),
            std::fs::read(runs[2].join(f)).unwrap(),
            "{f} differs between identical runs"
        );
    }

    let cmp = tmp.path().join("cmp");
    let text = ok(&["compare", "--a", p(&runs[1]), "--b", p(&runs[0]), "--alt", "greater", "--out", p(&cmp)]);
    let verdict = text.trim_end().chars().last().unwrap();
    assert!(matches!(verdict, '+' | '-' | '='), "{text}");
    let csv = std::fs::read_to_string(cmp.join("comparisons.csv")).unwrap();
    assert!(csv.starts_with("variant_a,variant_b,alternative,p_value,verdict"));

    let ctl = tmp.path().join("ctl");
    let mut args = vec![
        "random-control", "--dataset", p(&g), "--range", "0,1", "--samples", "2",
        "--tau", "0.5", "--out", p(&ctl),
    ];
    args.extend(fast);
    ok(&args);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ctl.join("control_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["samples"].as_array().unwrap().len(), 2);
    let threshold = report["bonferroni_threshold"].as_f64().unwrap();
    assert!((threshold - 0.05 / 6.0).abs() < 1e-15);
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let tmp = tempfile::tempdir().unwrap();
    let k2 = tmp.path().join("k2");
    sbm(&k2, "2", &["--p-in", "1", "--p-out", "0"]);
    let cfg = tmp.path().join("lrg.toml");
    std::fs::write(
        &cfg,
        format!("[analyze]\ntau-min = 100.0\ntau-max = 1000.0\nout = \"{}\"\n", p(&tmp.path().join("an"))),
    )
    .unwrap();
    let from_file = lrg(&["--config", p(&cfg), "analyze", "--graph", p(&k2)]);
    assert_eq!(from_file.status.code(), Some(3));
    let overridden = lrg(&["--config", p(&cfg), "analyze", "--graph", p(&k2), "--tau-min", "0.01"]);
    assert!(overridden.status.success(), "{}", String::from_utf8_lossy(&overridden.stderr));
}

#[test]
fn every_run_writes_one_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let g = tmp.path().join("g");
    sbm(&g, "4,4", &[]);
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(g.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "generate-sbm");
    assert!(m["outputs"].as_array().unwrap().len() >= 3);

    let h = tmp.path().join("h");
    sbm(&h, "4,4", &[]);
    for f in ["edges.tsv", "features.csv", "labels.csv"] {
        assert_eq!(std::fs::read(g.join(f)).unwrap(), std::fs::read(h.join(f)).unwrap());
    }
}
