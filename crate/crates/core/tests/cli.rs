use std::path::Path;
use std::process::{Command, Output};

fn gflab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gflab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn report(out: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn constant_preset_is_symmetric_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = gflab(&["--preset", "constant"], dir.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    let r = report(dir.path());
    assert_eq!(r["observations"]["invariance.verdict"], "symmetric");
    assert_eq!(r["summary"]["success"], true);
}

#[test]
fn rotating_preset_exit_follows_expect_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = gflab(&["invariance", "--preset", "rotating"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(
        report(dir.path())["observations"]["invariance.verdict"],
        "not-symmetric"
    );
    let o = gflab(
        &["invariance", "--preset", "rotating", "--expect-failure"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let r = report(dir.path());
    for c in r["checks"].as_array().unwrap() {
        if c["verdict"] != "pass" {
            assert_eq!(c["expected_failure"], true, "{c}");
        }
    }
}

#[test]
fn verdicts_are_derivable_from_report() {
    let dir = tempfile::tempdir().unwrap();
    gflab(&["--preset", "step"], dir.path());
    let r = report(dir.path());
    for c in r["checks"].as_array().unwrap() {
        let v = c["value"].as_f64().unwrap();
        let holds = |b: &serde_json::Value| {
            if let Some(x) = b.get("at_most") {
                v <= x.as_f64().unwrap()
            } else if let Some(x) = b.get("at_least") {
                v >= x.as_f64().unwrap()
            } else {
                v > b["greater_than"].as_f64().unwrap()
            }
        };
        let expected = if holds(&c["pass_if"]) {
            "pass"
        } else if !c["fail_if"].is_null() && !holds(&c["fail_if"]) {
            "inconclusive"
        } else {
            "fail"
        };
        assert_eq!(c["verdict"], expected, "{c}");
    }
}

#[test]
fn from_file_preset_round_trips_and_missing_file_errors() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    gflab(
        &["invariance", "--preset", "rotating", "--expect-failure"],
        &first,
    );
    let exported = first.join("projection_field.csv");
    let cfg = dir.path().join("from_file.cfg");
    std::fs::write(
        &cfg,
        format!("preset = from-file\npreset.file = {}\n", exported.display()),
    )
    .unwrap();
    let second = dir.path().join("second");
    let o = gflab(
        &[
            "invariance",
            "--config",
            cfg.to_str().unwrap(),
            "--expect-failure",
        ],
        &second,
    );
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        report(&first)["checks"],
        report(&second)["checks"],
        "reimported field must reproduce the residuals"
    );

    std::fs::write(
        &cfg,
        "preset = from-file\npreset.file = /does/not/exist.csv\n",
    )
    .unwrap();
    let o = gflab(&["--config", cfg.to_str().unwrap()], &second);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "seed = 1\n\ngrid.size = 8\n").unwrap();
    let o = gflab(&["--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3") && err.contains("grid.size"), "{err}");
}

#[test]
fn oversized_locality_request_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("big.cfg");
    std::fs::write(&cfg, "grid.sizes = 32, 32\nfiber.dim = 4\n").unwrap();
    let o = gflab(&["locality", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("exceeds limit 2048"));
}

#[test]
fn irreducibility_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("d1.cfg");
    std::fs::write(&cfg, "grid.sizes = 12\nfiber.dim = 1\n").unwrap();
    let o = gflab(
        &["irreducibility", "--config", cfg.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let r = report(dir.path());
    assert_eq!(r["observations"]["irreducibility.verdict"], "irreducible");
    assert_eq!(r["observations"]["irreducibility.exhaustive"], true);

    std::fs::write(&cfg, "grid.sizes = 12\nfiber.dim = 2\n").unwrap();
    gflab(
        &["irreducibility", "--config", cfg.to_str().unwrap()],
        dir.path(),
    );
    let r = report(dir.path());
    assert_eq!(
        r["observations"]["irreducibility.verdict"],
        "not irreducible"
    );
    assert_eq!(
        r["observations"]["irreducibility.witness"],
        serde_json::json!([1])
    );
}

#[test]
fn identities_with_fixed_seed_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = || {
        let o = gflab(&["identities", "--seed", "42"], dir.path());
        assert_eq!(o.status.code(), Some(0));
        gflab::report::strip_timings(
            &std::fs::read_to_string(dir.path().join("report.json")).unwrap(),
        )
        .unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn simulate_writes_trajectory_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.cfg");
    std::fs::write(
        &cfg,
        "grid.sizes = 8, 8\nsimulate.kind = schrodinger\ntime.grid = 0.5, 1\n",
    )
    .unwrap();
    let o = gflab(&["simulate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let grid = gflab::grid::GridSpec::unit_torus(vec![8, 8]).unwrap();
    let file = std::fs::File::open(dir.path().join("trajectory.csv")).unwrap();
    let traj = gflab::io::read_trajectory_csv(std::io::BufReader::new(file), &grid, 2).unwrap();
    assert_eq!(traj.times(), &[0.0, 0.5, 1.0]);
    let n0 = traj.states()[0].norm();
    for s in traj.states() {
        assert!((s.norm() - n0).abs() <= 1e-12 * n0);
    }
    let r = report(dir.path());
    assert_eq!(r["artifacts"][0]["path"], "trajectory.csv");
}
