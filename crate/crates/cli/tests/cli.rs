use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use selftest_core::acgame::{ac_game, AcKind};
use selftest_core::braiding::SWEEP_COLUMNS;
use selftest_core::game::TableStrategy;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_selftest"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawning selftest")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/hamiltonians").join(name).to_string_lossy().into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("selftest-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn field(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(key).filter(|r| r.starts_with(' ')))
        .and_then(|r| r.split_whitespace().next())
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
        .parse()
        .unwrap()
}

#[test]
fn value_of_reference_games() {
    for (game, want) in [("chsh", 0.853553), ("magic-square", 1.0), ("linearity", 1.0)] {
        let o = run(&["value", "--game", game]);
        assert!(o.status.success(), "{game}: {}", String::from_utf8_lossy(&o.stderr));
        assert!((field(&stdout(&o), "value") - want).abs() < 1e-6, "{game}");
    }
}

#[test]
fn braiding_value_is_two_thirds_plus_a_third_of_the_ac_value() {
    let o = run(&["value", "--game", "braiding", "--n", "1", "--ac", "chsh"]);
    assert!(o.status.success());
    let want = 2.0 / 3.0 + (0.5 + 0.5f64.sqrt() / 2.0) / 3.0;
    assert!((field(&stdout(&o), "value") - want).abs() < 1e-6);
}

#[test]
fn json_output_carries_the_exact_value() {
    let path = scratch("chsh.json");
    let o = run(&["value", "--game", "chsh", "--json", path.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!((v["value"].as_f64().unwrap() - (0.5 + 0.5f64.sqrt() / 2.0)).abs() < 1e-12);
}

#[test]
fn strategy_file_reproduces_the_honest_value() {
    let (g, s) = ac_game(AcKind::Chsh).unwrap();
    let path = scratch("chsh-strategy.json");
    std::fs::write(&path, TableStrategy::tabulate(&g.game, &s).unwrap().to_json()).unwrap();
    let arg = format!("file:{}", path.display());
    let o = run(&["value", "--game", "chsh", "--strategy", &arg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!((field(&stdout(&o), "value") - 0.853553).abs() < 1e-6);
}

#[test]
fn sampled_mode_requires_a_seed() {
    assert_eq!(run(&["value", "--game", "chsh", "--mode", "sampled"]).status.code(), Some(2));
    let a = run(&["value", "--game", "chsh", "--mode", "sampled", "--seed", "5", "--samples", "4000"]);
    let b = run(&["value", "--game", "chsh", "--mode", "sampled", "--seed", "5", "--samples", "4000"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!((field(&stdout(&a), "value") - 0.853553).abs() < 0.05);
}

#[test]
fn exit_codes() {
    // usage and configuration errors
    assert_eq!(run(&["value"]).status.code(), Some(2));
    assert_eq!(run(&["value", "--game", "chsh", "--strategy", "bogus"]).status.code(), Some(2));
    assert_eq!(run(&["value", "--game", "chsh", "--strategy", "perturbed:0.1"]).status.code(), Some(2));
    assert_eq!(run(&["hamiltonian", "/nonexistent/h.txt"]).status.code(), Some(2));
    // resource limits
    assert_eq!(run(&["value", "--game", "braiding", "--n", "30"]).status.code(), Some(3));
    assert_eq!(
        run(&["value", "--game", "hamiltonian", "--hamiltonian", &data("epr.txt")]).status.code(),
        Some(3)
    );
    // numeric failure: unnormalized state in a strategy file
    let path = scratch("bad-strategy.json");
    std::fs::write(&path, r#"{"qubits":1,"amplitudes":[[1.0,0.0],[1.0,0.0]],"registers":[[0],[]],"measurements":[]}"#)
        .unwrap();
    let arg = format!("file:{}", path.display());
    assert_eq!(run(&["value", "--game", "chsh", "--strategy", &arg]).status.code(), Some(4));
}

#[test]
fn parse_errors_name_the_line() {
    let path = scratch("bad-h.txt");
    std::fs::write(&path, "# header\n1.0 X:0 Z:0\n0.5 X:01 Z:1\n").unwrap();
    let o = run(&["hamiltonian", path.to_str().unwrap(), "--no-simulate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn sweep_csv_is_byte_identical_and_starts_honest() {
    let a = scratch("sweep-a.csv");
    let b = scratch("sweep-b.csv");
    for p in [&a, &b] {
        let o = run(&["sweep", "--n", "1", "--epsilons", "0,0.1,0.3", "--seed", "7", "--csv", p.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ta = std::fs::read(&a).unwrap();
    assert_eq!(ta, std::fs::read(&b).unwrap());
    let text = String::from_utf8(ta).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), SWEEP_COLUMNS.join(","));
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(first[0], 0.0);
    for v in &first[2..8] {
        assert!(v.abs() <= 1e-9);
    }
    assert!((first[8] - 1.0).abs() <= 1e-9);
}

#[test]
fn sweep_reads_a_descriptor() {
    let cfg = scratch("sweep.json");
    std::fs::write(&cfg, r#"{"n":1,"ac_game":"chsh","epsilons":[0.0,0.2],"seed":3}"#).unwrap();
    let from_file = run(&["sweep", "--config", cfg.to_str().unwrap()]);
    let from_flags = run(&["sweep", "--n", "1", "--ac", "chsh", "--epsilons", "0,0.2", "--seed", "3"]);
    assert!(from_file.status.success());
    assert_eq!(from_file.stdout, from_flags.stdout);
    assert_eq!(run(&["sweep", "--epsilons", "1.5"]).status.code(), Some(2));
}

#[test]
fn hamiltonian_sigma_z() {
    let o = run(&["hamiltonian", &data("sigma_z.txt")]);
    assert!(o.status.success());
    let t = stdout(&o);
    assert!((field(&t, "lambda_min") + 1.0).abs() < 1e-9);
    assert!((field(&t, "honest") - 1.0).abs() < 1e-9);
}

#[test]
fn honest_value_meets_the_bound_on_every_shipped_file() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/hamiltonians");
    let mut files: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert!(files.len() >= 5);
    for f in files {
        let o = run(&["hamiltonian", f.to_str().unwrap()]);
        assert!(o.status.success(), "{}", f.display());
        let t = stdout(&o);
        let lower = field(&t, "lower");
        let predicted = field(&t, "predicted");
        assert!(predicted >= lower - 1e-6, "{}: {predicted} < {lower}", f.display());
        if t.lines().any(|l| l.starts_with("honest ")) {
            let honest = field(&t, "honest");
            assert!((honest - predicted).abs() < 1e-9, "{}", f.display());
        } else {
            assert!(t.contains("simulate  skipped"), "{}", f.display());
        }
    }
}

#[test]
fn qma_parameters() {
    let o = run(&["hamiltonian", "--qma-params", "0.9", "0.5"]);
    assert!(o.status.success());
    let t = stdout(&o);
    assert!((field(&t, "p'") - 5.0 / 9.0).abs() < 1e-6);
    assert!((field(&t, "eta0") - 2.0 / 9.0).abs() < 1e-6);
}

#[test]
fn amplify_reports_copies() {
    let o = run(&["hamiltonian", &data("sigma_z.txt"), "--amplify", "0.5", "0.4", "--no-simulate"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("a = 2"), "{}", stdout(&o));
}
