use std::path::Path;
use std::process::{Command, Output};

fn topoprompt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_topoprompt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_pgm(path: &Path, w: usize, h: usize, values: &[u8]) {
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    bytes.extend_from_slice(values);
    std::fs::write(path, bytes).unwrap();
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn no_arguments_prints_usage() {
    let out = topoprompt(&[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn help_lists_defaults() {
    let out = topoprompt(&["prompts", "--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("--min-persistence"));
    assert!(text.contains("0.05"));
}

#[test]
fn usage_and_runtime_errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(topoprompt(&["prompts", "--bogus"]).status.code(), Some(1));
    assert_eq!(
        topoprompt(&["prompts", "-i", "x.png", "--method", "grid", "--budget", "3"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(topoprompt(&["bench"]).status.code(), Some(1));
    let missing = dir.path().join("missing.png");
    let out = topoprompt(&["prompts", "-i", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not found"));
}

#[test]
fn grid_and_tda_prompts() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("img.pgm");
    let values: Vec<u8> = (0..64 * 48).map(|i| ((i * 37) % 251) as u8).collect();
    write_pgm(&img, 64, 48, &values);

    let grid = dir.path().join("grid.json");
    let out = topoprompt(&[
        "prompts",
        "--method",
        "grid",
        "--n",
        "16",
        "-i",
        img.to_str().unwrap(),
        "-o",
        grid.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&grid);
    assert_eq!(v["points"].as_array().unwrap().len(), 256);
    assert_eq!(v["schema"], "topoprompt/v1");
    assert_eq!(v["image"]["source"], img.to_str().unwrap());

    let tda = dir.path().join("tda.json");
    let out = topoprompt(&[
        "prompts",
        "--method",
        "tda",
        "--budget",
        "128",
        "-i",
        img.to_str().unwrap(),
        "-o",
        tda.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let n = json(&tda)["points"].as_array().unwrap().len();
    assert!((1..=128).contains(&n));
    assert!(topoprompt::import_prompts(&tda).is_ok());

    let out = topoprompt(&[
        "prompts",
        "--method",
        "random",
        "--count",
        "10",
        "--seed",
        "5",
        "-i",
        img.to_str().unwrap(),
        "-o",
        "-",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["points"].as_array().unwrap().len(), 10);
    assert_eq!(v["params"]["seed"], 5);
}

#[test]
fn diagram_csv() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("row.pgm");
    // 0 6 5.8 7 1 5 0 scaled by 10
    write_pgm(&img, 7, 1, &[0, 60, 58, 70, 10, 50, 0]);
    let out = topoprompt(&[
        "diagram",
        "--raw",
        "--connectivity",
        "4",
        "-i",
        img.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines,
        [
            "extremum_x,extremum_y,extremum_value,saddle_x,saddle_y,saddle_value,persistence",
            "3,0,70,,,,inf",
            "5,0,50,4,0,10,40",
            "1,0,60,2,0,58,2",
        ]
    );
}

#[test]
fn synth_then_bench_from_directory() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = topoprompt(&[
        "synth",
        "-o",
        data.to_str().unwrap(),
        "--n-images",
        "2",
        "--width",
        "256",
        "--height",
        "256",
        "--count",
        "12",
        "--noise-sigma",
        "0",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "image_000.png",
        "scene_000.json",
        "labels_000.png",
        "image_001.png",
    ] {
        assert!(data.join(f).exists(), "{f}");
    }
    let scene = json(&data.join("scene_001.json"));
    assert_eq!(scene["config"]["seed"], 43);
    assert_eq!(scene["ovals"].as_array().unwrap().len(), 12);

    let csv = dir.path().join("bench.csv");
    let out = topoprompt(&[
        "bench",
        "--dataset",
        data.to_str().unwrap(),
        "--generators",
        "grid16,random64,tda",
        "-o",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "generator,prompt_count,time_s,accuracy_pct,quality"
    );
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("tda,12,"));
    assert!(lines[3].contains(",100.000,"));
}

#[test]
fn bench_json_and_reproducible_outputs() {
    let args = [
        "bench",
        "--synth",
        "--n-images",
        "2",
        "--width",
        "128",
        "--height",
        "128",
        "--count",
        "6",
        "--generators",
        "grid8,tda",
        "--json",
    ];
    let a = topoprompt(&args);
    assert_eq!(
        a.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&a.stderr)
    );
    let report: topoprompt::BenchReport = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(report.rows.len(), 2);
    assert_eq!(report.images, 2);

    let b: topoprompt::BenchReport = serde_json::from_slice(&topoprompt(&args).stdout).unwrap();
    for (ra, rb) in report.rows.iter().zip(&b.rows) {
        assert_eq!(
            (ra.accuracy_pct, ra.prompt_count, ra.quality),
            (rb.accuracy_pct, rb.prompt_count, rb.quality)
        );
    }

    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("img.pgm");
    write_pgm(
        &img,
        9,
        9,
        &(0..81).map(|i| (i * 13 % 200) as u8).collect::<Vec<_>>(),
    );
    let p = |name: &str| {
        let path = dir.path().join(name);
        topoprompt(&[
            "prompts",
            "-i",
            img.to_str().unwrap(),
            "-o",
            path.to_str().unwrap(),
        ]);
        std::fs::read(path).unwrap()
    };
    assert_eq!(p("a.json"), p("b.json"));
}
