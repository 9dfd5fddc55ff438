use std::fs;
use std::path::Path;
use std::process::Command;

use slocc_cli::cross_shell_edges;
use slocc_synth::qlearn::QMatrixFile;
use slocc_synth::slg::{build_slg, StateLinkGraph};

fn slocc(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("slocc").chain(args.iter().copied());
    let code = slocc_cli::run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

/// Only directory under `<out>/<label>`.
fn artifact_dir(out: &Path, label: &str) -> std::path::PathBuf {
    let mut dirs: Vec<_> = fs::read_dir(out.join(label))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(dirs.len(), 1);
    dirs.pop().unwrap()
}

#[test]
fn ghz_synthesis_with_the_plain_gate_set() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, out, _) = slocc(&[
        "synth",
        "--class",
        "A1.1",
        "--gates",
        "x,h,cnot",
        "--seed",
        "7",
        "--out",
        path(tmp.path()),
    ]);
    assert_eq!(code, 0, "{out}");
    let dir = artifact_dir(tmp.path(), "A1.1");
    let r = report(&dir);
    assert_eq!(r["circuit_length"], 4);
    assert_eq!(r["bfs_optimal_length"], 4);
    assert_eq!(r["status"], "pass");
    assert_eq!(r["verification"]["amplitudes_match"], true);
    assert!(r["verification"]["fidelity"].as_f64().unwrap() > 1.0 - 1e-12);
    for f in ["circuit.txt", "qmatrix.txt", "slg.dot", "report.json"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    assert!(!dir.join("circuit_pp.txt").exists());
    assert_eq!(dir.file_name().unwrap(), "85d89ec3");
}

#[test]
fn toffoli_is_needed_for_l071() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, out, _) = slocc(&[
        "synth",
        "--class",
        "L_0_7p1",
        "--gates",
        "x,h,cnot",
        "--out",
        path(tmp.path()),
    ]);
    assert_eq!(code, 3, "{out}");
    assert!(out.contains("no policy information at state {0000}"));
    let (code, out, _) = slocc(&[
        "synth",
        "--class",
        "L_0_7p1",
        "--gates",
        "x,h,cnot,ccnot",
        "--out",
        path(tmp.path()),
    ]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("status: pass"));
}

#[test]
fn b11_needs_ch_and_postprocessing() {
    let tmp = tempfile::tempdir().unwrap();
    let base = [
        "synth",
        "--class",
        "B1.1",
        "--seed",
        "7",
        "--out",
        path(tmp.path()),
    ];
    let (code, out, _) = slocc(&[&base[..], &["--gates", "x,h,cnot,ccnot"]].concat());
    assert_eq!(code, 3, "{out}");
    let (code, out, _) = slocc(&[&base[..], &["--gates", "x,h,cnot,ccnot,ch", "--qasm"]].concat());
    assert_eq!(code, 0, "{out}");

    let dir = tmp.path().join("B1.1").join("a413adef");
    let r = report(&dir);
    assert_eq!(r["extraction_error"], serde_json::Value::Null);
    assert_eq!(r["verification"]["support_pass"], true);
    assert_eq!(r["verification"]["amplitudes_match"], false);
    let theta = r["postprocess"]["angles"][0].as_f64().unwrap();
    assert!((theta - 2.0 * 2f64.sqrt().atan()).abs() < 1e-6, "{theta}");
    assert!((theta - 1.9106332).abs() < 1e-7);
    assert!(r["postprocess"]["residual"].as_f64().unwrap() <= 1e-9);
    let pp = fs::read_to_string(dir.join("circuit_pp.txt")).unwrap();
    assert!(pp.starts_with("INIT 0000\nU(1.91063323"));
    assert!(dir.join("circuit.qasm").is_file() && dir.join("circuit_pp.qasm").is_file());

    // the standalone command agrees with the one folded into synth
    let (code, out, _) = slocc(&[
        "postprocess",
        path(&dir.join("circuit.txt")),
        "--class",
        "B1.1",
        "--replace",
        "0",
    ]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("theta[0] = 1.910633236249"));
    assert!(out.ends_with(&pp));
}

const B11_RAW: &str = "INIT 0000\nH C\nCNOT C B\nCH C A\nCNOT A D\n";
const GHZ: &str = "INIT 0000\nH A\nCNOT A B\nCNOT A C\nCNOT A D\n";

#[test]
fn verify_reports_fidelity_and_amplitude_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    let b11 = tmp.path().join("b11.txt");
    fs::write(&b11, B11_RAW).unwrap();
    let (code, out, _) = slocc(&["verify", path(&b11), "--class", "B1.1"]);
    assert_eq!(code, 0);
    // |<(1/√3)(1,1,1)|(1/√2, 1/2, 1/2)>|²
    let w = 1.0 / 3f64.sqrt();
    let expected = (w * (0.5f64.sqrt() + 0.5 + 0.5)).powi(2);
    assert!((expected - ((1.0 + 2f64.sqrt()) / 6f64.sqrt()).powi(2)).abs() < 1e-15);
    let line = out.lines().find(|l| l.starts_with("fidelity: ")).unwrap();
    let fidelity: f64 = line["fidelity: ".len()..].parse().unwrap();
    assert!((fidelity - expected).abs() < 1e-11, "{fidelity}");
    assert!((fidelity - 0.9714).abs() < 1e-4);
    assert!(out.contains("support: pass"));
    assert!(out.contains("amplitudes: mismatch"));

    let ghz = tmp.path().join("ghz.txt");
    fs::write(&ghz, GHZ).unwrap();
    let (code, out, _) = slocc(&["verify", path(&ghz), "--class", "A1.1"]);
    assert_eq!(code, 0);
    assert!(out.contains("fidelity: 1.000000000000"));
    assert!(out.contains("amplitudes: match"));
    let (code, out, _) = slocc(&["verify", path(&ghz), "--class", "L_0_3p1_0_3p1"]);
    assert_eq!(code, 2);
    assert!(out.contains("support: fail"));
    // explicit term-sets carry no amplitudes
    let (code, out, _) = slocc(&["verify", path(&ghz), "--objective", "0000,1111"]);
    assert_eq!(code, 0);
    assert!(!out.contains("fidelity"));
}

#[test]
fn circuit_parse_errors_name_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.txt");
    fs::write(&bad, "INIT 0000\nH A\nCNOT A A\n").unwrap();
    let (code, _, err) = slocc(&["verify", path(&bad), "--class", "A1.1"]);
    assert_eq!(code, 1);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn catalog_listing() {
    let count = |args: &[&str]| {
        let (code, out, _) = slocc(&[&["catalog"], args].concat());
        assert_eq!(code, 0);
        out.lines().count() - 1
    };
    assert_eq!(count(&[]), 49);
    assert_eq!(count(&["--family", "G_abcd"]), 13);
    assert_eq!(count(&["--family", "L_abc2"]), 19);
    assert_eq!(count(&["--feasibility", "blue"]), 11);
    assert_eq!(count(&["--family", "L_abc2", "--feasibility", "blue"]), 7);

    let (_, out, _) = slocc(&["catalog", "--feasibility", "green"]);
    for id in ["A1.1", "R1.1", "L_0_5p3"] {
        assert!(
            out.lines().any(|l| l.split_whitespace().next() == Some(id)),
            "{id}"
        );
    }
    let (_, out, _) = slocc(&["catalog", "--class", "B1.1"]);
    let squash = |s: &str| s.split_whitespace().collect::<String>();
    assert!(squash(&out).contains(&squash("c=0, a=b ≠ 0")), "{out}");
    assert!(out.contains("{0000,0110,1111}"));

    assert_eq!(slocc(&["catalog", "--class", "Z9.9"]).0, 1);
    assert_eq!(slocc(&["catalog", "--family", "G_xyz"]).0, 1);
    assert_eq!(slocc(&["catalog", "--feasibility", "purple"]).0, 1);
}

fn train(out: &Path, gates: &str) -> std::path::PathBuf {
    let (code, text, _) = slocc(&[
        "train",
        "--objective",
        "0000,0101,1000,1110",
        "--gates",
        gates,
        "--seed",
        "7",
        "--out",
        path(out),
    ]);
    assert_eq!(code, 0, "{text}");
    let dirs: Vec<_> = fs::read_dir(out.join("0000_0101_1000_1110"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.join("qmatrix.txt").exists())
        .collect();
    let hash_of = |p: &Path| p.file_name().unwrap().to_str().unwrap().to_string();
    let expected = {
        let kinds = slocc_synth::gates::parse_gate_kinds(gates).unwrap();
        slocc_cli::config::gate_hash(&slocc_synth::gates::GateSet::new(&kinds).unwrap())
    };
    dirs.into_iter()
        .find(|p| hash_of(p) == expected)
        .unwrap()
        .join("qmatrix.txt")
}

#[test]
fn slg_export_for_psi7() {
    let tmp = tempfile::tempdir().unwrap();
    let plain = train(tmp.path(), "x,h,cnot");
    let toffoli = train(tmp.path(), "x,h,cnot,ccnot");

    let json_of = |q: &Path| {
        let (code, out, _) = slocc(&["slg", path(q), "--format", "json"]);
        assert_eq!(code, 0);
        StateLinkGraph::from_json(&out).unwrap()
    };
    let g = json_of(&plain);
    assert!(!g.edges.is_empty());
    assert_eq!(cross_shell_edges(&g), 0);
    let g = json_of(&toffoli);
    assert!(cross_shell_edges(&g) > 0);

    // JSON export matches a graph rebuilt from the persisted matrix
    let file = QMatrixFile::parse(&fs::read_to_string(&toffoli).unwrap()).unwrap();
    let rebuilt = build_slg(
        &file.q,
        &file.environment().unwrap(),
        &file.gate_set().unwrap(),
    );
    assert_eq!(g, rebuilt);
    assert_eq!(StateLinkGraph::from_json(&g.to_json()).unwrap(), g);

    // DOT edge lines cross shells only with the Toffoli
    let dot_cross = |q: &Path| {
        let (_, dot, _) = slocc(&["slg", path(q)]);
        dot.lines()
            .filter_map(|l| l.trim().split_once(" -> "))
            .filter(|(a, b)| {
                a.matches(',').count() != b.split(' ').next().unwrap().matches(',').count()
            })
            .count()
    };
    assert_eq!(dot_cross(&plain), 0);
    assert!(dot_cross(&toffoli) > 0);

    let saved = tmp.path().join("g.dot");
    let (code, out, _) = slocc(&["slg", path(&toffoli), "--out", path(&saved)]);
    assert_eq!(code, 0);
    assert!(out.contains("cross-shell"));
    assert!(fs::read_to_string(&saved)
        .unwrap()
        .starts_with("digraph slg {"));

    assert_eq!(slocc(&["slg", path(&toffoli), "--format", "svg"]).0, 1);
}

#[test]
fn slg_overlay_highlights_the_synthesized_path() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _, _) = slocc(&[
        "synth",
        "--class",
        "A1.1",
        "--gates",
        "x,h,cnot",
        "--seed",
        "7",
        "--out",
        path(tmp.path()),
    ]);
    assert_eq!(code, 0);
    let dir = artifact_dir(tmp.path(), "A1.1");
    let (code, dot, _) = slocc(&[
        "slg",
        path(&dir.join("qmatrix.txt")),
        "--overlay",
        path(&dir.join("circuit.txt")),
    ]);
    assert_eq!(code, 0);
    assert_eq!(dot.matches("color=red").count(), 4);
    assert_eq!(dot, fs::read_to_string(dir.join("slg.dot")).unwrap());
    let (code, _, _) = slocc(&[
        "slg",
        path(&dir.join("qmatrix.txt")),
        "--format",
        "json",
        "--overlay",
        path(&dir.join("circuit.txt")),
    ]);
    assert_eq!(code, 1);
}

#[test]
fn config_file_with_flag_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    let out = tmp.path().join("art");
    fs::write(
        &cfg,
        format!(r#"{{"objective": "0000,0111", "gates": "x,h,cnot", "seed": 3, "episodes": 2000, "out": {:?}}}"#, path(&out)),
    )
    .unwrap();
    let (code, text, _) = slocc(&["synth", "--config", path(&cfg), "--seed", "5"]);
    assert_eq!(code, 0, "{text}");
    let r = report(&artifact_dir(&out, "0000_0111"));
    assert_eq!(r["config"]["seed"], 5);
    assert_eq!(r["config"]["episodes"], 2000);
    assert_eq!(r["config"]["gates"], "x,h,cnot");
    assert_eq!(r["config"]["alpha"], 0.8);
    assert_eq!(r["training"]["rng_seed"], 5);
    assert_eq!(r["target"], "0000_0111");

    fs::write(&cfg, r#"{"objective": "0000,0111", "sead": 3}"#).unwrap();
    assert_eq!(slocc(&["synth", "--config", path(&cfg)]).0, 1);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(slocc(&["synth"]).0, 1);
    assert_eq!(
        slocc(&["synth", "--class", "A1.1", "--objective", "0000,1111"]).0,
        1
    );
    assert_eq!(slocc(&["synth", "--class", "Q1.1"]).0, 1);
    assert_eq!(
        slocc(&["synth", "--class", "A1.1", "--gates", "x,swap"]).0,
        1
    );
    assert_eq!(slocc(&["synth", "--class", "A1.1", "--alpha", "1.5"]).0, 1);
    assert_eq!(
        slocc(&["synth", "--class", "A1.1", "--initial", "0000,0001"]).0,
        1
    );
    assert_eq!(slocc(&["frobnicate"]).0, 1);
    let (code, out, _) = slocc(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("synth"));
}

#[test]
fn non_convergence_still_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, out, _) = slocc(&[
        "synth",
        "--class",
        "A1.1",
        "--gates",
        "x,h,cnot",
        "--episodes",
        "20000",
        "--max-runs",
        "1",
        "--out",
        path(tmp.path()),
    ]);
    assert_eq!(code, 4, "{out}");
    let r = report(&artifact_dir(tmp.path(), "A1.1"));
    assert_eq!(r["training"]["converged"], false);
    assert_eq!(r["exit_code"], 4);
}

#[test]
fn binary_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_slocc");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap();
    let o = status(&["catalog", "--family", "G_abcd"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("13 class(es)"));
    let o = status(&[
        "synth",
        "--class",
        "B1.1",
        "--gates",
        "x,h,cnot",
        "--out",
        path(tmp.path()),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let o = status(&["synth", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
}
