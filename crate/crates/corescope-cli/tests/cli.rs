use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_corescope"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn corescope")
}

fn stdout_lines(output: &Output) -> Vec<serde_json::Value> {
    String::from_utf8_lossy(&output.stdout)
        .lines()
        .map(|line| serde_json::from_str(line).expect("progress line is JSON"))
        .collect()
}

fn write_tiny_config(dir: &Path) -> std::path::PathBuf {
    let config = serde_json::json!({
        "agenda_id": "tiny",
        "width": 40,
        "height": 40,
        "flatland_seed_value": 2,
        "max_num_cities": 3,
        "grid_mode": false,
        "max_rail_between_cities": 1,
        "max_rail_in_city": 2,
        "number_of_agents": 4,
        "speed_data": [[1, 0.25], [2, 0.25], [3, 0.25], [4, 0.25]],
        "schedule_id": [0, 1, 1],
        "earliest_malfunction": 3,
        "malfunction_duration": 12,
        "malfunction_train_id": [0, 2, 2],
        "number_of_shortest_paths_per_train": 10,
        "max_window_size_from_earliest": 60,
        "weight_route_change": 30,
        "weight_lateness_seconds": 1,
        "solver_runs": [0, 1, 1],
        "solver_budget": 500000,
        "scopers": [
            "online-unrestricted", "upper-bound", "max-speedup",
            "baseline", "heuristic", "random"
        ],
        "random_samples": 5,
        "heuristic_route_restricted": false,
        "master_seed": 814
    });
    let path = dir.join("tiny.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&config).unwrap()).unwrap();
    path
}

#[test]
fn test_gen_subcommands_reproduce_bit_exactly_from_seed() {
    let dir = tempfile::tempdir().unwrap();
    let gen = |store: &str| {
        let out = run(
            &[
                "gen-infra",
                "--store",
                store,
                "--width",
                "30",
                "--height",
                "30",
                "--max-num-cities",
                "3",
                "--number-of-agents",
                "5",
                "--speed",
                "1:1.0",
                "--seed",
                "99",
            ],
            dir.path(),
        );
        assert!(out.status.success(), "{out:?}");
        let out = run(
            &["gen-schedule", "--store", store, "--seed", "7"],
            dir.path(),
        );
        assert!(out.status.success(), "{out:?}");
        let out = run(
            &[
                "gen-malfunction",
                "--store",
                store,
                "--malfunction-train-id",
                "2",
                "--earliest-malfunction",
                "5",
                "--malfunction-duration",
                "10",
            ],
            dir.path(),
        );
        assert!(out.status.success(), "{out:?}");
    };
    gen("a");
    gen("b");
    for file in [
        "infra/0/infrastructure.json",
        "infra/0/schedule/0/schedule.json",
        "infra/0/schedule/0/resched/2/malfunction.json",
    ] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical-seed runs");
    }
}

#[test]
fn test_run_agenda_analyze_and_render_produce_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny_config(dir.path());
    let config = config.to_str().unwrap();

    let out = run(
        &["run-agenda", "--config", config, "--workers", "2", "--store", "s"],
        dir.path(),
    );
    assert!(out.status.success(), "{out:?}");
    let lines = stdout_lines(&out);
    assert!(lines.iter().any(|l| l["event"] == "infra-ready"));
    assert!(lines.iter().any(|l| l["event"] == "schedule-ready"));
    assert!(lines.iter().any(
        |l| l["event"] == "experiment-finished" && l["composite_id"] == "i0_s0_m0_r0"
    ));
    let summary = lines.last().unwrap();
    assert_eq!(summary["event"], "agenda-finished");
    assert_eq!(summary["executed"], 2);

    let out = run(
        &[
            "analyze", "--config", config, "--store", "s", "--bins", "4",
            "--min-time", "0", "--max-time", "1000",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{out:?}");
    let lines = stdout_lines(&out);
    let written: Vec<&str> = lines
        .iter()
        .filter(|l| l["event"] == "analysis-written")
        .map(|l| l["path"].as_str().unwrap())
        .collect();
    assert!(written.iter().any(|p| p.ends_with("metrics.csv")));
    assert!(written.iter().any(|p| p.ends_with("report.json")));
    assert!(written.iter().any(|p| p.ends_with("speedup_by_bin.svg")));

    let out = run(&["render", "--store", "s", "--infra-id", "0"], dir.path());
    assert!(out.status.success(), "{out:?}");
    let svg = dir.path().join("s/infra/0/infrastructure.svg");
    assert!(std::fs::read_to_string(svg).unwrap().starts_with("<svg"));
}

#[test]
fn test_run_experiment_executes_one_composite_id() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny_config(dir.path());
    let config = config.to_str().unwrap();
    let out = run(
        &[
            "run-experiment", "--config", config, "--id", "i0_s0_m1_r0", "--store", "s",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{out:?}");
    let lines = stdout_lines(&out);
    assert_eq!(lines[0]["composite_id"], "i0_s0_m1_r0");
    assert_eq!(lines[0]["scopers"], 6);
    assert!(dir
        .path()
        .join("s/runs/tiny/results/i0_s0_m1_r0.json")
        .exists());
}

#[test]
fn test_verify_lists_conflicts_and_fails_on_corrupted_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "gen-infra", "--store", "s", "--width", "30", "--height", "30",
            "--max-num-cities", "3", "--number-of-agents", "4",
            "--speed", "1:1.0", "--seed", "99",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{out:?}");
    let out = run(&["gen-schedule", "--store", "s", "--seed", "7"], dir.path());
    assert!(out.status.success(), "{out:?}");

    let schedule_path = dir.path().join("s/infra/0/schedule/0/schedule.json");
    let out = run(
        &["verify", "--store", "s", "--schedule", schedule_path.to_str().unwrap()],
        dir.path(),
    );
    assert!(out.status.success(), "clean schedule should verify: {out:?}");

    let mut schedule: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&schedule_path).unwrap()).unwrap();
    let first_run = schedule["runs"][0].clone();
    schedule["runs"][1]["waypoints"] = first_run["waypoints"].clone();
    schedule["runs"][1]["entries"] = first_run["entries"].clone();
    std::fs::write(&schedule_path, serde_json::to_vec_pretty(&schedule).unwrap()).unwrap();

    let out = run(
        &["verify", "--store", "s", "--schedule", schedule_path.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let lines = stdout_lines(&out);
    assert!(lines.iter().any(|l| l["event"] == "conflict"));
    let finished = lines.last().unwrap();
    assert!(finished["conflicts"].as_u64().unwrap() > 0);
}

#[test]
fn test_usage_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["analyze", "--store", "s"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{out:?}");

    let config = write_tiny_config(dir.path());
    let out = run(
        &[
            "run-experiment", "--config", config.to_str().unwrap(),
            "--id", "i9_s9_m9_r9", "--store", "s",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn test_missing_artifacts_exit_with_code_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["gen-schedule", "--store", "s", "--infra-id", "3"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["analyze", "--agenda-id", "ghost", "--store", "s"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn test_store_env_var_sets_default_root() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "gen-infra", "--width", "30", "--height", "30", "--max-num-cities", "3",
            "--number-of-agents", "4", "--speed", "1:1.0", "--seed", "99",
        ])
        .env("CORESCOPE_STORE", dir.path().join("from_env"))
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    assert!(dir
        .path()
        .join("from_env/infra/0/infrastructure.json")
        .exists());
}
