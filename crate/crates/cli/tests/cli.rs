use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn wordidx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wordidx"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &Path, name: &str, count: &str, width: &str, dist: &str) -> std::path::PathBuf {
    let out = dir.join(name);
    let o = wordidx(&[
        "gen",
        "--count",
        count,
        "--width",
        width,
        "--seed",
        "4",
        "--distribution",
        dist,
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn gen_is_sorted_and_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "a.txt", "10000", "256", "uniform");
    let b = gen(dir.path(), "b.txt", "10000", "256", "uniform");
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 10000);
    assert!(lines.iter().all(|l| l.len() == 64));
    assert!(lines.windows(2).all(|p| p[0] < p[1]));

    let one = gen(dir.path(), "one.txt", "1", "16", "clustered");
    assert_eq!(fs::read_to_string(one).unwrap().lines().count(), 1);
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let keys = gen(dir.path(), "k.txt", "600", "256", "clustered");
    for structure in ["gamma", "beta", "index"] {
        let o = wordidx(&[
            "verify",
            "--keys",
            path(&keys),
            "--structure",
            structure,
            "--queries",
            "1000",
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{structure}: {}",
            String::from_utf8_lossy(&o.stdout)
        );
    }
    let o = wordidx(&[
        "verify",
        "--keys",
        path(&keys),
        "--structure",
        "index",
        "--queries",
        "500",
        "--fault",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("counterexample"), "{stdout}");
    assert!(stdout.contains("FAIL"));

    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "0001\n0000\n").unwrap();
    let o = wordidx(&["verify", "--keys", path(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    assert_eq!(wordidx(&["verify"]).status.code(), Some(2));
    assert_eq!(
        wordidx(&["verify", "--keys", path(&keys), "--structure", "beta", "--fault"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn beta_verify_reports_fallback_rate() {
    let dir = tempfile::tempdir().unwrap();
    let keys = gen(dir.path(), "k.txt", "1024", "256", "uniform");
    let o = wordidx(&[
        "verify",
        "--keys",
        path(&keys),
        "--structure",
        "beta",
        "--queries",
        "100000",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("fallbacks"));
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let keys = gen(dir.path(), "k.txt", "500", "16", "uniform");
    let run = |args: &[&str]| wordidx(args).stdout;
    let bench = ["bench", "--keys", path(&keys), "--queries", "800", "--seed", "3"];
    assert_eq!(run(&bench), run(&bench));
    let t1 = dir.path().join("b1.toml");
    let t2 = dir.path().join("b2.toml");
    for t in [&t1, &t2] {
        let mut args = bench.to_vec();
        args.extend(["--out", path(t)]);
        assert!(wordidx(&args).status.success());
    }
    let toml = fs::read_to_string(&t1).unwrap();
    assert_eq!(toml, fs::read_to_string(&t2).unwrap());
    assert!(toml.contains("[config]") && toml.contains("seed = 3"));

    let verify = ["verify", "--keys", path(&keys), "--queries", "800", "--seed", "3"];
    assert_eq!(run(&verify), run(&verify));
    let mut sharded = verify.to_vec();
    sharded.extend(["--jobs", "3"]);
    assert_eq!(run(&verify), run(&sharded));
}

#[test]
fn build_then_query() {
    let dir = tempfile::tempdir().unwrap();
    let keys = gen(dir.path(), "k.txt", "300", "256", "uniform");
    let lines: Vec<String> = fs::read_to_string(&keys).unwrap().lines().map(String::from).collect();
    for format in ["hex", "bin"] {
        let idx = dir.path().join(format!("i.{format}"));
        let o = wordidx(&["build", "--keys", path(&keys), "--format", format, "--out", path(&idx)]);
        assert!(o.status.success());
        let o = wordidx(&["query", "--keys", path(&idx), &lines[41], "--prefix", ""]);
        let out = String::from_utf8(o.stdout).unwrap();
        assert!(out.contains(&format!("successor 42 {} rank 42", lines[41])), "{out}");
        assert!(out.contains("ranks 1..=300"), "{out}");
    }
    let max = "f".repeat(64);
    let out = String::from_utf8(wordidx(&["query", "--keys", path(&keys), &max]).stdout).unwrap();
    assert!(
        out.contains("successor none rank 300") || out.contains("successor 300"),
        "{out}"
    );
}

#[test]
fn trace_prints_the_default_example() {
    let o = wordidx(&["trace"]);
    assert!(o.status.success());
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("phase 3  x 0000 1000 1000 0000"));
    assert!(out.contains("output   1101 0000 0000 0000"));
    assert!(out.contains("multiplications 0"));
}
