use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_armsearch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn kmedoids_matches_oracle_on_blobs() {
    let out = run(&[
        "kmedoids",
        "--generator",
        "gaussian_blobs",
        "--n",
        "150",
        "--k",
        "3",
        "--seed",
        "4",
        "--oracle-check",
    ]);
    let v = json(&out);
    assert_eq!(v["oracle_match"], true);
    assert_eq!(v["medoid_indices"].as_array().unwrap().len(), 3);
}

#[test]
fn kmedoids_reads_csv_input() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("pts.csv");
    std::fs::write(&f, "0,0\n0,1\n1,0\n10,10\n10,11\n11,10\n").unwrap();
    let v = json(&run(&[
        "kmedoids",
        "--input",
        path(&f),
        "--k",
        "2",
        "--algorithm",
        "pam",
    ]));
    let mut m: Vec<u64> = v["medoid_indices"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_u64().unwrap())
        .collect();
    m.sort_unstable();
    assert_eq!(m.len(), 2);
    assert!(m[0] < 3 && m[1] >= 3);
}

#[test]
fn gen_then_forest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let model = dir.path().join("m.json");
    let g = run(&[
        "gen",
        "--generator",
        "step_classification",
        "--n",
        "400",
        "--d",
        "4",
        "--out",
        path(&data),
    ]);
    assert!(g.status.success());
    let v = json(&run(&[
        "forest",
        "--input",
        path(&data),
        "--trees",
        "3",
        "--model-out",
        path(&model),
    ]));
    assert!(v["accuracy_or_mse"].as_f64().unwrap() > 0.6);
    assert_eq!(v["n_trees_completed"], 3);
    let text = std::fs::read_to_string(&model).unwrap();
    assert!(armsearch::forest::Forest::from_json(&text).is_ok());
}

#[test]
fn forest_csv_output_has_header_and_row() {
    let out = run(&[
        "forest",
        "--generator",
        "step_classification",
        "--n",
        "300",
        "--d",
        "3",
        "--trees",
        "2",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].contains("n_insertions"));
}

#[test]
fn mips_naive_and_bandit_agree() {
    let args = [
        "--generator",
        "normal_custom",
        "--n",
        "60",
        "--d",
        "1500",
        "--seed",
        "2",
    ];
    let naive = json(&run(
        &[&["mips", "--algorithm", "naive"][..], &args].concat()
    ));
    let bandit = json(&run(&[
        &["mips", "--sigma", "1", "--oracle-check"][..],
        &args,
    ]
    .concat()));
    assert_eq!(naive["winners"], bandit["winners"]);
    assert_eq!(bandit["oracle_match"], true);
}

#[test]
fn mp_recovers_loudest_note() {
    let v = json(&run(&[
        "mp",
        "--t",
        "1",
        "--components",
        "1",
        "--solver",
        "naive",
    ]));
    assert_eq!(v["components"][0]["name"], "G4");
}

#[test]
fn bench_scaling_writes_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = run(&[
        "bench",
        "scaling",
        "--algorithm",
        "naive_mips",
        "--generator",
        "normal_custom",
        "--n",
        "20",
        "--axis",
        "d",
        "--values",
        "100,200,400",
        "--seeds",
        "2",
        "--format",
        "csv",
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let f = std::fs::File::open(&out).unwrap();
    let recs = armsearch::bench::read_records(armsearch::bench::Format::Csv, f).unwrap();
    assert_eq!(recs.len(), 6);
}

#[test]
fn bench_tradeoff_json() {
    let o = run(&[
        "bench",
        "tradeoff",
        "--algorithm",
        "banditmips",
        "--generator",
        "normal_custom",
        "--n",
        "20",
        "--d",
        "500",
        "--deltas",
        "0.01,0.1",
        "--seeds",
        "2",
        "--sigma",
        "1",
    ]);
    assert!(o.status.success());
    let recs =
        armsearch::bench::read_records(armsearch::bench::Format::Json, &o.stdout[..]).unwrap();
    assert_eq!(recs.len(), 4);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["kmedoids", "--bogus"]).status.code(), Some(2));
    assert_eq!(
        run(&["kmedoids", "--generator", "nope"]).status.code(),
        Some(2)
    );
    assert_eq!(run(&["kmedoids"]).status.code(), Some(2));
    assert_eq!(
        run(&[
            "forest",
            "--generator",
            "step_classification",
            "--splitter",
            "x"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        run(&["mips", "--generator", "normal_custom", "--format", "xml"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn runtime_errors_exit_1() {
    let o = run(&["kmedoids", "--input", "/definitely/not/here.csv"]);
    assert_eq!(o.status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1,2\n3,x\n").unwrap();
    assert_eq!(
        run(&["kmedoids", "--input", path(&bad), "--k", "1"])
            .status
            .code(),
        Some(1)
    );
}
