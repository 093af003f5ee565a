use std::fs;
use std::process::Command;

fn lab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_liouville-lab"))
}

#[test]
fn constants_prints_both_values() {
    let out = lab().args(["constants", "--alpha", "0.5", "--v0", "18"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("lambda1 = -1.343555"), "{text}");
    assert!(text.contains("lambda2 = 7.46419"), "{text}");
}

#[test]
fn integer_alpha_is_a_usage_error() {
    let out = lab().args(["constants", "--alpha", "1", "--v0", "18"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha must be non-integer"));
}

#[test]
fn bad_config_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "suite = \"family\"\nalpha = 3.0\nv0 = 18\nu0_list = [20, 16]\ntypo = 1\n").unwrap();
    let out = lab().args(["run", "--config", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for needle in ["alpha must be non-integer", "strictly increasing", "typo: unknown key"] {
        assert!(err.contains(needle), "missing {needle:?} in {err}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        "suite = \"family\"\nalpha = 0.5\nv0 = 18\nu0_list = [12, 18, 24, 30]\nseed = 5\n",
    )
    .unwrap();
    let mut outputs = Vec::new();
    for (name, jobs) in [("a", "1"), ("b", "4")] {
        let out = dir.path().join(name);
        let st = lab()
            .args(["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", jobs])
            .output()
            .unwrap();
        assert_eq!(st.status.code(), Some(0));
        outputs.push(fs::read(out.join("family.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    assert!(text.starts_with("u0,delta,mass,sup_dev,d_boundary,argmax_radius\n"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn failing_threshold_exits_with_one() {
    // a single low height is far from the mass quantum
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "suite = \"family\"\nalpha = 0.5\nv0 = 18\nu0_list = [1]\n").unwrap();
    let out = dir.path().join("o");
    let st = lab()
        .args(["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(1));
    let summary = fs::read_to_string(out.join("family.json")).unwrap();
    assert!(summary.contains("\"passed\": false"));
}
