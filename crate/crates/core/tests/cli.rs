use std::path::Path;
use std::process::{Command, Output};

fn rbb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rbb"))
        .args(args)
        .env_remove("RBB_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn run_to_file(dir: &Path, name: &str, args: &[&str]) -> String {
    let path = dir.join(name);
    let mut all: Vec<&str> = args.to_vec();
    let p = path.to_str().unwrap().to_string();
    all.extend(["--out", &p]);
    let o = rbb(&all);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn headers_are_exact() {
    let cases = [
        ("max-load", "n,m,rounds,rep,seed,max_load,normalized"),
        ("empty-fraction", "n,m,rounds,burn_in,rep,seed,mean_f,ci_low,ci_high"),
        ("convergence", "n,m,threshold,rep,seed,rounds_to_converge,capped"),
        ("traversal", "n,m,rep,seed,max_cover,min_cover,covered_fraction"),
    ];
    for (kind, header) in cases {
        let o = rbb(&["experiment", kind, "--n", "5", "--m", "5", "--reps", "2", "--rounds", "50"]);
        assert!(o.status.success(), "{kind}: {}", String::from_utf8_lossy(&o.stderr));
        let text = stdout(&o);
        assert_eq!(text.lines().next().unwrap(), header);
        assert_eq!(text.lines().count(), 3);
    }
    let o = rbb(&["check", "binomial_bound"]);
    assert_eq!(stdout(&o).lines().next().unwrap(), "name,verdict,statistic,threshold,seed");
}

#[test]
fn output_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["max-load", "empty-fraction", "convergence", "traversal"] {
        let args = ["experiment", kind, "--n", "6,12", "--m-mult", "1,3", "--reps", "5", "--rounds", "300", "--seed", "9"];
        let mut one: Vec<&str> = args.to_vec();
        one.extend(["--threads", "1"]);
        let mut four: Vec<&str> = args.to_vec();
        four.extend(["--threads", "4"]);
        let a = run_to_file(dir.path(), "a.csv", &one);
        let b = run_to_file(dir.path(), "b.csv", &four);
        assert_eq!(a, b, "{kind}");
        assert_eq!(a.lines().count(), 1 + 2 * 2 * 5);
    }
}

#[test]
fn seed_precedence() {
    let base = ["simulate", "--n", "8", "--m", "16", "--rounds", "20"];
    let default = stdout(&rbb(&base));
    let mut explicit: Vec<&str> = base.to_vec();
    explicit.extend(["--seed", "42"]);
    assert_eq!(default, stdout(&rbb(&explicit)));

    let env = Command::new(env!("CARGO_BIN_EXE_rbb")).args(base).env("RBB_SEED", "7").output().unwrap();
    let mut seven: Vec<&str> = base.to_vec();
    seven.extend(["--seed", "7"]);
    assert_eq!(stdout(&env), stdout(&rbb(&seven)));
    assert_ne!(stdout(&env), default);

    // flag beats the environment
    let both = Command::new(env!("CARGO_BIN_EXE_rbb")).args(explicit).env("RBB_SEED", "7").output().unwrap();
    assert_eq!(stdout(&both), default);
}

#[test]
fn exit_codes() {
    assert_eq!(rbb(&["check", "binomial_bound"]).status.code(), Some(0));
    assert_eq!(rbb(&["check", "negative_control_chi_square"]).status.code(), Some(1));
    assert_eq!(rbb(&["check", "no_such_check"]).status.code(), Some(2));
    assert_eq!(rbb(&["experiment", "max-load", "--reps", "0"]).status.code(), Some(2));
    assert_eq!(rbb(&["simulate", "--init", "bogus"]).status.code(), Some(2));
    assert_eq!(rbb(&["experiment", "nonsense"]).status.code(), Some(2));
}

#[test]
fn simulate_trace() {
    let o = rbb(&["simulate", "--n", "4", "--m", "8", "--rounds", "0"]);
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..5], ["0", "0", "0", "4", "16"]);
    assert_eq!(row[6], "2");
    // practical alpha n/(8m) = 1/16 on (2,2,2,2): ln(4 e^{1/8})
    let log_phi: f64 = row[5].parse().unwrap();
    assert!((log_phi - (4f64.ln() + 0.125)).abs() < 1e-12);
    let o = rbb(&["simulate", "--n", "4", "--m", "8", "--rounds", "10", "--every", "5"]);
    assert_eq!(stdout(&o).lines().count(), 4);
}

#[test]
fn oracle_and_plot() {
    let o = rbb(&["oracle", "--n", "2", "--m", "2"]);
    assert_eq!(stdout(&o), "state,probability\n2 0,0.25\n1 1,0.5\n0 2,0.25\n");

    let dir = tempfile::tempdir().unwrap();
    let csv = run_to_file(dir.path(), "f.csv", &["experiment", "empty-fraction", "--n", "10,20", "--m-mult", "1,2", "--reps", "2", "--rounds", "200"]);
    assert!(csv.starts_with("n,m,rounds,burn_in"));
    let input = dir.path().join("f.csv");
    let a = rbb(&["plot", input.to_str().unwrap()]);
    let b = rbb(&["plot", input.to_str().unwrap()]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let svg = stdout(&a);
    assert!(svg.contains("n = 10") && svg.contains("n = 20"));

    let out = dir.path().join("m.csv");
    let o = rbb(&["experiment", "max-load", "--n", "10", "--m-mult", "1,2", "--reps", "2", "--rounds", "50", "--plot", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(dir.path().join("m.svg").exists());
}

#[test]
fn json_format() {
    let o = rbb(&["experiment", "convergence", "--n", "5", "--m", "5", "--reps", "2", "--rounds", "100", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert!(v[0].get("rounds_to_converge").is_some());
}
