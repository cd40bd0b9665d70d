use std::path::PathBuf;
use std::process::{Command, Output};

fn csa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csa")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn tmp(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli_tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn simulate_writes_one_row_per_load() {
    let out = stdout(&csa(&["simulate", "--dist", "2:1", "--frame", "100", "--load", "0.2:0.6:0.2", "--trials", "5"]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "G,trials,throughput,throughput_ci95,plr,plr_ci95,mean_iters,mean_delay");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0.2,5,"));
}

#[test]
fn out_flag_writes_file() {
    let path = tmp("bound.csv");
    let out = csa(&["bound", "--rate", "0.5", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "rate,bound\n0.5,0.796812\n");
}

#[test]
fn config_file_supplies_flags_and_command_line_wins() {
    let cfg = tmp("sim.cfg");
    std::fs::write(&cfg, "# sweep\ndist = 2:1\nframe=50\nload=0.4\ntrials = 3\nseed=9\n").unwrap();
    let from_file = stdout(&csa(&["simulate", "--config", cfg.to_str().unwrap()]));
    let explicit = stdout(&csa(&["simulate", "--dist", "2:1", "--frame", "50", "--load", "0.4", "--trials", "3", "--seed", "9"]));
    assert_eq!(from_file, explicit);
    let overridden = stdout(&csa(&["simulate", "--config", cfg.to_str().unwrap(), "--trials", "4"]));
    assert!(overridden.lines().nth(1).unwrap().starts_with("0.4,4,"));
}

#[test]
fn bad_input_fails_with_one_line() {
    for args in [
        vec!["simulate", "--dist", "2:0.5", "--frame", "10", "--load", "1", "--trials", "1"],
        vec!["simulate", "--dist", "2:1", "--frame", "10", "--load", "1:0", "--trials", "1"],
        vec!["simulate", "--dist", "2:1", "--frame", "10", "--load", "1", "--trials", "0"],
        vec!["bound", "--rate", "1"],
        vec!["optimize", "--rate", "0.25", "--max-degree", "3"],
        vec!["frameless", "--users", "10", "--beta", "20", "--trials", "1"],
        vec!["convolutional", "--d", "3", "--frame", "10", "--load", "0.5", "--periods", "2", "--trials", "1"],
        vec!["fsa-upgrade", "--mode", "q", "--frame", "10", "--frames", "2", "--users", "5", "--trials", "1"],
        vec!["fsa-upgrade", "--mode", "a", "--frame", "10", "--frames", "2", "--users", "5", "--replicas", "2", "--trials", "1"],
        vec!["simulate-coded", "--ensemble", "/nonexistent/ens.txt", "--frame", "10", "--load", "1", "--trials", "1"],
        vec!["threshold"],
        vec!["simulate", "--config", "/nonexistent/cfg"],
    ] {
        let out = csa(&args);
        assert!(!out.status.success(), "{args:?} succeeded");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.lines().count(), 1, "{args:?}: {err}");
        assert!(err.starts_with("csa: error: "));
    }
}

#[test]
fn threshold_and_optimize_quote_the_distribution() {
    let out = stdout(&csa(&["threshold", "--dist", "3:1"]));
    assert_eq!(out.lines().nth(1).unwrap(), "\"3:1\",0.333333,0.818451,0.94048");
    let out = stdout(&csa(&["optimize", "--rate", "0.5", "--max-degree", "2"]));
    let row = out.lines().nth(1).unwrap();
    assert!(row.starts_with("\"2:1\",0.5,"), "{row}");
    let g: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    assert!((g - 0.5).abs() < 1e-3);
}

#[test]
fn variant_commands_end_with_summary() {
    for args in [
        vec!["frameless", "--users", "50", "--trials", "3"],
        vec!["convolutional", "--d", "2", "--frame", "20", "--load", "0.5", "--periods", "4", "--trials", "3"],
        vec!["fsa-upgrade", "--mode", "b", "--frame", "20", "--frames", "3", "--users", "15", "--trials", "3"],
    ] {
        let out = stdout(&csa(&args));
        let last = out.lines().last().unwrap();
        assert!(last.starts_with("summary,3,"), "{args:?}: {last}");
        let width = out.lines().next().unwrap().split(',').count();
        assert!(out.lines().all(|l| l.split(',').count() == width), "{args:?}");
    }
}
