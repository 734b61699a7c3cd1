use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use remote_estimation::solver::{self, PolicyFile};
use remote_estimation::{GaussianMixture, SampleBatch};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn remest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_remest"))
        .args(args)
        .output()
        .expect("spawn remest")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn printed(out: &Output, key: &str) -> f64 {
    let text = String::from_utf8_lossy(&out.stdout);
    let prefix = format!("{key} = ");
    text.lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no `{key}` in output:\n{text}"))
        .parse()
        .unwrap()
}

#[test]
fn solve_round_trips_printed_objective() {
    let dir = tempfile::tempdir().unwrap();
    let out = remest(&[
        "solve",
        "--model",
        s(&data("five_mode.json")),
        "--kappa",
        "0.5",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let shown = printed(&out, "objective");

    let model = GaussianMixture::load(data("five_mode.json")).unwrap();
    let file = PolicyFile::load(dir.path().join("policy.json")).unwrap();
    let again = solver::objective(&model, &file.policy().unwrap(), file.kappa_bar).unwrap();
    assert!((again - shown).abs() <= 1e-12, "{again} vs {shown}");
    assert!(dir.path().join("trace.csv").exists());
}

#[test]
fn solve_standard_normal() {
    let dir = tempfile::tempdir().unwrap();
    let out = remest(&[
        "solve",
        "--model",
        s(&data("standard_normal.json")),
        "--kappa",
        "0.5",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(printed(&out, "theta").abs() < 1e-12);
    assert!((printed(&out, "lambda") - 0.454_936_423_119_572_8).abs() < 1e-8);
}

#[test]
fn literal_update_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = remest(&[
        "solve",
        "--model",
        s(&data("five_mode.json")),
        "--kappa",
        "0.5",
        "--update",
        "literal",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!((printed(&out, "theta") - 0.0592).abs() < 1e-3);
    assert!((printed(&out, "lambda") - 1.5063).abs() < 2e-3);
}

#[test]
fn malformed_model_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"dim\": 1, \"components\": [").unwrap();
    let out = remest(&["solve", "--model", s(&bad), "--kappa", "0.5", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    assert!(!dir.path().join("policy.json").exists());
}

#[test]
fn missing_file_and_bad_flags_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let out = remest(&["solve", "--model", s(&missing), "--kappa", "0.5", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let out = remest(&[
        "solve",
        "--model",
        s(&data("five_mode.json")),
        "--kappa",
        "1.5",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let out = remest(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn iteration_cap_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = remest(&[
        "solve",
        "--model",
        s(&data("five_mode.json")),
        "--kappa",
        "0.5",
        "--max-inner-iters",
        "2",
        "--max-outer-iters",
        "1",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(dir.path().join("policy.json").exists());
}

fn write_batch(path: &Path, xs: &[f64]) {
    SampleBatch::from_scalars(xs).unwrap().write_csv(path).unwrap();
}

#[test]
fn fit_writes_model_and_bandwidth() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("x.csv");
    write_batch(&csv, &[0.0, 1.0, 2.0, 3.0, 4.0]);
    let out = remest(&["fit", "--samples", s(&csv), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let model = GaussianMixture::load(dir.path().join("model.json")).unwrap();
    assert_eq!(model.num_components(), 5);
    let bw = std::fs::read_to_string(dir.path().join("bandwidth.json")).unwrap();
    assert!(bw.contains("per_axis_h"));
}

#[test]
fn design_degenerate_batch_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("flat.csv");
    write_batch(&csv, &[3.0; 10]);
    let out = remest(&["design", "--samples", s(&csv), "--kappa", "0.5", "--delta", "0.01", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn design_two_samples_is_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("two.csv");
    write_batch(&csv, &[-0.3, 0.8]);
    let out = remest(&["design", "--samples", s(&csv), "--kappa", "0.5", "--delta", "0.01", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let p = PolicyFile::load(dir.path().join("policy.json")).unwrap();
    assert!(p.lambda.is_finite() && p.lambda > 0.0);
    assert!(p.theta[0].is_finite());
}

#[test]
fn design_on_large_batch_respects_true_capacity() {
    let model = GaussianMixture::load(data("five_mode.json")).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let batch = SampleBatch::draw(&model, 20_000, &mut rng).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("batch.csv");
    batch.write_csv(&csv).unwrap();
    let out = remest(&["design", "--samples", s(&csv), "--kappa", "0.5", "--delta", "0.01", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let policy = PolicyFile::load(dir.path().join("policy.json")).unwrap().policy().unwrap();
    assert!(solver::transmit_prob(&model, &policy).unwrap() <= 0.5);
}

#[test]
fn simulate_is_byte_identical_and_needs_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = remest(&[
        "solve",
        "--model",
        s(&data("five_mode.json")),
        "--kappa",
        "0.5",
        "--delta",
        "0.05",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let policy = dir.path().join("policy.json");
    let run = |sub: &str, format: &str| {
        let o = dir.path().join(sub);
        let out = remest(&[
            "simulate",
            "--model",
            s(&data("five_mode.json")),
            "--policy",
            s(&policy),
            "--n",
            "100,1000",
            "--kappa",
            "0.5",
            "--trials",
            "40",
            "--seed",
            "11",
            "--format",
            format,
            "--out",
            s(&o),
        ]);
        assert_eq!(out.status.code(), Some(0));
        let name = if format == "json" { "report.json" } else { "report.csv" };
        std::fs::read(o.join(name)).unwrap()
    };
    assert_eq!(run("a", "csv"), run("b", "csv"));
    assert_eq!(run("c", "json"), run("d", "json"));

    let out = remest(&[
        "simulate",
        "--model",
        s(&data("five_mode.json")),
        "--policy",
        s(&policy),
        "--n",
        "100",
        "--kappa",
        "0.5",
        "--trials",
        "10",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn experiment_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    let model = std::fs::read_to_string(data("five_mode.json")).unwrap();
    std::fs::write(
        &spec,
        format!(
            "{{\"true_model\": {model}, \"kappa_bar\": 0.5, \"delta_list\": [0.01, 0.1], \
             \"m_list\": [200, 800], \"batches_per_cell\": 3, \"seed\": 8}}"
        ),
    )
    .unwrap();
    let run = |sub: &str| {
        let o = dir.path().join(sub);
        let out = remest(&["experiment", "--spec", s(&spec), "--out", s(&o)]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        (
            std::fs::read(o.join("report.csv")).unwrap(),
            std::fs::read(o.join("report.json")).unwrap(),
        )
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a.0).unwrap().lines().count(), 5);
}
