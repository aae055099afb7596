use std::process::Command;

fn irsa() -> Command {
    Command::new(env!("CARGO_BIN_EXE_irsa"))
}

fn stdout_of(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn threshold_prints_json() {
    let text = stdout_of(irsa().args(["threshold", "--dist", "3:1.0", "--tol", "1e-7"]));
    let v: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
    assert!((v["g_star"].as_f64().unwrap() - 0.818469).abs() < 1e-5);
    assert!((v["gamma"].as_f64().unwrap() - 0.783499).abs() < 1e-5);
    assert_eq!(v["mean_degree"].as_f64().unwrap(), 3.0);
}

#[test]
fn predict_emits_csv() {
    let text = stdout_of(irsa().args(["predict", "--dist", "x3", "--m", "200", "--g", "0.6,0.7"]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "g,fep,plp");
    assert_eq!(lines.len(), 3);
    let cols: Vec<f64> = lines[2].split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(cols[0], 0.7);
    assert!((cols[1] - 0.0948973).abs() < 1e-6);
    assert!((cols[2] - 0.783499 * cols[1]).abs() < 1e-6);
}

#[test]
fn predict_needs_scaling_constants_for_unknown_distributions() {
    let out = irsa()
        .args(["predict", "--dist", "3:0.5,6:0.5", "--m", "100", "--g", "0.5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let text = stdout_of(irsa().args([
        "predict", "--dist", "3:0.5,6:0.5", "--m", "100", "--g", "0.5", "--alpha0", "0.45",
        "--beta0", "0.9",
    ]));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn simulate_writes_csv_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let run = || {
        stdout_of(irsa().args([
            "simulate", "--dist", "x3", "--m", "50", "--g-start", "0.5", "--g-stop", "0.7",
            "--g-step", "0.1", "--frames", "3000", "--seed", "4", "--workers", "2", "--floor",
            "--predict", "--out",
        ]).arg(&out));
        std::fs::read_to_string(&out).unwrap()
    };
    let first = run();
    let lines: Vec<&str> = first.lines().collect();
    assert_eq!(
        lines[0],
        "g,frames_run,frame_errors,packets_sent,packets_lost,fer,fer_ci,plr,plr_ci,fep_pred,plp_pred,fep_floor,plp_floor"
    );
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0.5,"));
    assert_eq!(run(), first);

    let meta = std::fs::read_to_string(dir.path().join("sweep.csv.meta.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&meta).unwrap();
    assert_eq!(v["seed"], 4);
    assert_eq!(v["config"]["m"], 50);
    assert_eq!(v["config"]["dist"], "3:1");
    assert!(v["version"].is_string());
}

#[test]
fn simulate_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "dist = \"lambda2\"\nm = 50\nload_grid = [0.5, 0.6]\nmax_frames = 2000\nseed = 1\nemit_prediction = true\n",
    )
    .unwrap();
    let text = stdout_of(irsa().args(["simulate", "--config"]).arg(&cfg));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].ends_with("fep_pred,plp_pred"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "dist = \"x3\"\nm = 50\nload_grid = []\n").unwrap();
    let out = irsa().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = irsa()
        .args(["simulate", "--dist", "2:0.7,3:0.4", "--m", "50", "--g-start", "0.5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = irsa()
        .args(["simulate", "--dist", "x5", "--m", "4", "--g-start", "0.5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = irsa()
        .args(["dump", "--dist", "x3", "--m", "2", "--g", "1.0", "--activity", "fixed:1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn dump_is_reproducible() {
    let args = ["dump", "--dist", "lambda2", "--m", "30", "--g", "0.5", "--seed", "8"];
    let a = stdout_of(irsa().args(args));
    let b = stdout_of(irsa().args(args));
    assert_eq!(a, b);
    assert!(a.starts_with("m=30\n"));
    let frame = irsa::FrameGraph::read_dump(a.as_bytes()).unwrap();
    assert_eq!(frame.num_slots(), 30);
}
