use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_multiplex-cli"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn fully_multiplexed_village_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("full.csv");
    fs::write(
        &edges,
        "# layers: a,b\n# nodes: v=3\nvillage,layer,src,dst\nv,a,0,1\nv,b,0,1\nv,a,1,2\nv,b,1,2\n",
    )
    .unwrap();
    let o = run(&["mpx", "--edges", path_str(&edges)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let row = text.lines().nth(1).unwrap();
    let score: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
    assert_eq!(score, 1.0);
}

#[test]
fn path_center_has_golden_centrality() {
    let o = run(&["centrality", "--edges", path_str(&configs().join("path3.csv")), "--layer", "advice"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let center: f64 = text
        .lines()
        .find(|l| l.starts_with("1,"))
        .and_then(|l| l.split(',').nth(1))
        .unwrap()
        .parse()
        .unwrap();
    assert!((center - (1.0 + 2f64.sqrt())).abs() < 1e-12);
    assert!(text.contains("# advice,0.7071067811865476,2,"));
}

#[test]
fn bundled_population_check_passes_everywhere() {
    let o = run(&["verify", "--prop", "2", "--config", path_str(&configs().join("verify_prop2.conf"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let checks: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(!checks.is_empty());
    assert!(checks.iter().all(|l| l.starts_with("PASS")), "{text}");
}

#[test]
fn bundled_regime_checks_pass() {
    for (prop, file) in [
        ("1", "verify_prop1.conf"),
        ("3", "verify_prop3_low.conf"),
        ("3", "verify_prop3_high.conf"),
        ("4", "verify_prop4_low.conf"),
        ("4", "verify_prop4_high.conf"),
    ] {
        let o = run(&["verify", "--prop", prop, "--config", path_str(&configs().join(file))]);
        assert!(o.status.success(), "{file}: {}", stderr(&o));
        assert!(!stdout(&o).lines().any(|l| l.starts_with("FAIL") || l.starts_with("SKIP")), "{file}");
    }
}

#[test]
fn failed_checks_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("wrong_branch.conf");
    let profiles = configs().join("profiles_driver.csv");
    fs::write(
        &conf,
        format!(
            "profiles = {}\nsplit = 1,0,1\nshare = 0.5\ntau = 2\nbranch = low\nq_grid = 0.95\ndelta_grid = 0.1\n",
            profiles.display()
        ),
    )
    .unwrap();
    let o = run(&["verify", "--prop", "4", "--config", path_str(&conf)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("FAIL"));
    assert!(stderr(&o).contains("checks failed"));
}

#[test]
fn stochastic_subcommands_require_a_seed() {
    let edges = configs().join("two_layer.csv");
    let o = run(&["simulate", "--edges", path_str(&edges), "--q", "0.3"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("explicit --seed"));
}

#[test]
fn unknown_flags_and_bad_inputs_are_rejected() {
    let edges = configs().join("two_layer.csv");
    let o = run(&["stats", "--edges", path_str(&edges), "--no-such-flag"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("--no-such-flag"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "# layers: a\n# nodes: v=2\nfrom,to\n0,1\n").unwrap();
    let o = run(&["stats", "--edges", path_str(&bad)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("village,layer,src,dst"));

    let o = run(&["verify", "--prop", "5", "--config", "x"]);
    assert!(!o.status.success());

    let conf = dir.path().join("typo.conf");
    fs::write(&conf, "q = 0.3\ndleta = 0.2\n").unwrap();
    let o = run(&["simulate", "--edges", path_str(&edges), "--config", path_str(&conf), "--seed", "1"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("unknown simulate config key `dleta`"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let edges = configs().join("two_layer.csv");
    let conf = configs().join("simulate.conf");
    let mut outputs = Vec::new();
    for (k, workers) in ["1", "2"].iter().enumerate() {
        let out = dir.path().join(format!("run{k}"));
        let o = run(&[
            "simulate",
            "--edges",
            path_str(&edges),
            "--config",
            path_str(&conf),
            "--reps",
            "8",
            "--seed",
            "42",
            "--workers",
            workers,
            "--out",
            path_str(&out),
            "-q",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push((fs::read(out.join("runs.csv")).unwrap(), fs::read_to_string(out.join("manifest.txt")).unwrap()));
    }
    assert_eq!(outputs[0].0, outputs[1].0);
    let manifest = &outputs[0].1;
    assert!(manifest.contains("subcommand = simulate"));
    assert!(manifest.contains("seed = 42"));
    assert!(manifest.contains("sha256:"));
}

#[test]
fn failed_runs_leave_no_output_and_reruns_replace_it() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["meanfield", "--profiles", "missing.csv", "--q", "0.2", "--delta", "0.3", "--out", path_str(&out)]);
    assert!(!o.status.success());
    assert!(!out.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);

    let profiles = configs().join("profiles_mixed.csv");
    for delta in ["0.3", "0.5"] {
        let o = run(&[
            "meanfield",
            "--profiles",
            path_str(&profiles),
            "--q",
            "0.2",
            "--delta",
            delta,
            "--out",
            path_str(&out),
            "-q",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("config.delta = 0.5"));
    let steady = fs::read_to_string(out.join("steady.csv")).unwrap();
    assert!(steady.starts_with("rho,residual,iterations\n"));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn synthetic_experiments_write_one_directory_per_world() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("rct.conf");
    fs::write(
        &conf,
        "villages = 16\nn_min = 40\nn_max = 60\nq = 0.3\ndelta = 0.2\nhorizon = 4\nworlds = 2\nseed = 5\n",
    )
    .unwrap();
    let out = dir.path().join("rct");
    let o = run(&["synth-rct", "--config", path_str(&conf), "--out", path_str(&out), "-q"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for world in ["world_000", "world_001"] {
        for file in ["outcomes.csv", "design.csv", "lasso_path.csv", "ols.csv"] {
            let text = fs::read_to_string(out.join(world).join(file)).unwrap();
            assert!(text.lines().count() > 1, "{world}/{file}");
        }
        let outcomes = fs::read_to_string(out.join(world).join("outcomes.csv")).unwrap();
        assert_eq!(outcomes.lines().count(), 17);
    }
    assert!(out.join("summary.csv").exists());
}

#[test]
fn grid_writes_the_results_table() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("grid.conf");
    fs::write(
        &conf,
        "synthetic_villages = 2\nvillage_size = 60\ntau = 1\nq_grid = 0.2, 0.4\ndelta_grid = 0.3\nreps = 3\n",
    )
    .unwrap();
    let out = dir.path().join("grid");
    let o = run(&["grid", "--config", path_str(&conf), "--seed", "9", "--out", path_str(&out), "-q"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(out.join("grid.csv")).unwrap();
    assert!(table.starts_with("q,delta,tau,prevalence_bin,frac_mpx_higher,mean_prevalence,n_runs\n"));
    let runs: usize = table.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(runs, 2 * 2 * 3);
}
