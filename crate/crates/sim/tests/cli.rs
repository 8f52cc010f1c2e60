use std::path::Path;
use std::process::Command;

use rofmimo::dump::{decode_frame, decode_linearization, load_topology, read_bytes};

const SMALL: &str = r#"
[run]
trials = 8
reference_trials = 400

[dither]
aps = [4]
fronthaul_gbps = [43.2]
combiners = ["zf", "lmmse"]
ed_db = { start = -6.0, stop = 0.0, step = 2.0 }
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rofmimo"))
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("small.toml");
    std::fs::write(&path, SMALL).unwrap();
    path
}

#[test]
fn dither_run_writes_csv_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("dither.csv");
    let dumps = dir.path().join("dumps");
    let status = bin()
        .args(["--experiment", "dither", "--jobs", "2", "--seed", "5"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .arg("--dump-dir")
        .arg(&dumps)
        .status()
        .unwrap();
    assert!(status.success());

    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    let meta = lines.next().unwrap();
    assert!(meta.starts_with("# rofmimo experiment=dither config_hash="), "{meta}");
    assert!(meta.contains("seed=5 trials=8"), "{meta}");
    let header = lines.next().unwrap();
    assert!(
        header.starts_with("experiment,deployment,combiner,aps,ues,fronthaul_bps,osr,"),
        "{header}"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4 * 2);
    assert!(rows.iter().all(|r| r.starts_with("dither,distributed,")));

    let topo = load_topology(&dumps.join("topology.toml")).unwrap();
    assert_eq!((topo.aps.len(), topo.ues.len()), (4, 1));
    let lin = decode_linearization(&read_bytes(&dumps.join("linearization.bin")).unwrap()).unwrap();
    assert_eq!((lin.gain.dim(), lin.spectrum.per_bin.len()), (4, 9));
    let frame = decode_frame(&read_bytes(&dumps.join("frame.bin")).unwrap()).unwrap();
    assert_eq!(frame.z_rf.ncols(), 9 * 450);
    assert!(frame.z_rf.iter().all(|&x| x == 1.0 || x == -1.0));
}

#[test]
fn same_seed_same_bytes_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let mut outputs = Vec::new();
    for jobs in ["1", "3"] {
        let out = dir.path().join(format!("run{jobs}.csv"));
        let status = bin()
            .args(["--experiment", "dither", "--jobs", jobs])
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn bad_invocations_fail() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");

    let missing = bin().arg("--out").arg(&out).output().unwrap();
    assert!(!missing.status.success());

    let unknown = bin()
        .args(["--experiment", "sideways"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(!unknown.status.success());

    let bad_cfg = dir.path().join("bad.toml");
    std::fs::write(&bad_cfg, "[run]\ntrials = 1\n").unwrap();
    let invalid = bin()
        .args(["--experiment", "dither"])
        .arg("--config")
        .arg(&bad_cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(!invalid.status.success());
    assert!(String::from_utf8_lossy(&invalid.stderr).contains("trials"));

    let absent = bin()
        .args(["--experiment", "dither", "--config", "/nonexistent/cfg.toml"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(!absent.status.success());
}
