use std::fs;
use std::process::Command;

fn eqsim(args: &[&str]) -> (bool, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_eqsim")).args(args).output().unwrap();
    (out.status.success(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

#[test]
fn codec_bench_prints_fixed_schema() {
    let (ok, out, _) = eqsim(&["--out", "csv", "codec-bench", "--corpus", "builtin:zero"]);
    assert!(ok);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("engine,ratio,compress_MBps,decompress_MBps"));
    let engines: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(engines, ["none", "rle", "snappy", "zstd"]);
}

#[test]
fn scale_bench_writes_identical_csv_per_seed_and_a_plot() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let csv = dir.path().join(format!("{name}.csv"));
        let svg = dir.path().join(format!("{name}.svg"));
        let args = [
            "--seed", "4", "--csv", csv.to_str().unwrap(), "--plot", svg.to_str().unwrap(),
            "scale-bench", "--modes", "2d-static,pixel", "--nodes", "1,2", "--frames", "10", "--size", "64x36",
            "--tile", "16x16",
        ];
        let (ok, _, err) = eqsim(&args);
        assert!(ok, "{err}");
        (fs::read_to_string(csv).unwrap(), fs::read_to_string(svg).unwrap())
    };
    let (a, plot) = run("a");
    let (b, _) = run("b");
    assert_eq!(a, b);
    assert!(a.starts_with("mode,nodes,heterogeneity,seed,totalSeconds\n"));
    assert_eq!(a.lines().count(), 5);
    assert_eq!(plot.matches("<polyline").count(), 2);
}

#[test]
fn rsp_and_object_bench_schemas() {
    let (ok, out, err) = eqsim(&["--out", "csv", "rsp-bench", "--members", "3", "--size", "100000", "--loss", "0.01"]);
    assert!(ok, "{err}");
    assert!(out.starts_with("members,bytes,seconds,MBps,retransmit_ratio\n3,100000,"));

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("payload.bin");
    fs::write(&file, vec![7u8; 300_000]).unwrap();
    let payload = format!("file:{}", file.display());
    let args = ["--out", "csv", "object-bench", "--clients", "0", "--payload", &payload, "--setting", "none"];
    let (ok, _, err) = eqsim(&args);
    assert!(!ok && err.contains("no clients"));
    let args = ["--out", "csv", "object-bench", "--clients", "1,2", "--payload", &payload, "--setting", "none,buffered"];
    let (ok, out, err) = eqsim(&args);
    assert!(ok, "{err}");
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "clients,setting,engine,seconds,MBps");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("1,none,rle,"));
}

#[test]
fn config_check_lists_channels_and_rejects_bad_files() {
    let fixtures = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures");
    let (ok, out, err) = eqsim(&["--out", "csv", "config-check", &format!("{fixtures}/display_wall.eqc")]);
    assert!(ok, "{err}");
    let wall = out.lines().filter(|l| l.starts_with("wall,")).count();
    assert_eq!(wall, 7);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.eqc");
    fs::write(&bad, "compound { channel \"x\" viewport [ 0 0 2 1 ] }\n").unwrap();
    let (ok, _, err) = eqsim(&["config-check", bad.to_str().unwrap()]);
    assert!(!ok);
    assert!(err.contains("bad.eqc"), "{err}");
}
