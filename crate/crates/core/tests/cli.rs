use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use msvm::data::io::load_model;
use msvm::model::truncate;

fn msvm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msvm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let res = msvm(&[
            "gen",
            "--variant",
            "five-class",
            "--n",
            "200",
            "--seed",
            "7",
            "--out",
            path_str(out),
        ]);
        assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
        assert!(stdout(&res).contains("p = 10, J = 5, seed = 7"));
    }
    for file in ["train.csv", "test.csv", "mask.txt"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
    let train = fs::read_to_string(a.join("train.csv")).unwrap();
    assert_eq!(train.lines().count(), 201);
}

#[test]
fn gen_four_class_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let res = msvm(&[
        "gen",
        "--variant",
        "four-class",
        "--p",
        "500",
        "--s",
        "30",
        "--rho",
        "0.8",
        "--n",
        "20",
        "--seed",
        "3",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    let train = fs::read_to_string(dir.path().join("train.csv")).unwrap();
    assert_eq!(train.lines().next().unwrap().split(',').count(), 501);
    let mask = fs::read_to_string(dir.path().join("mask.txt")).unwrap();
    assert_eq!(mask.lines().count(), 500);
    assert!(
        msvm(&["gen", "--variant", "four-class", "--p", "20", "--s", "30"])
            .status
            .code()
            == Some(2)
    );
}

#[test]
fn train_and_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(msvm(&["gen", "--n", "200", "--seed", "11", "--out", path_str(d)])
        .status
        .success());
    let model = d.join("model.txt");
    let trace = d.join("trace.tsv");
    let res = msvm(&[
        "train",
        "--data",
        path_str(&d.join("train.csv")),
        "--reg",
        "elastic",
        "--lambda1",
        "0.05",
        "--lambda2",
        "1",
        "--trace",
        path_str(&trace),
        "--out",
        path_str(&model),
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    let text = stdout(&res);
    assert!(text.contains("converged\ttrue"), "{text}");
    let iterations: usize = text
        .lines()
        .find_map(|l| l.strip_prefix("iterations\t"))
        .unwrap()
        .parse()
        .unwrap();
    assert!(iterations <= 5000);
    assert_eq!(fs::read_to_string(&trace).unwrap().lines().count(), iterations + 1);

    let preds = d.join("pred.txt");
    let res = msvm(&[
        "predict",
        "--model",
        path_str(&model),
        "--data",
        path_str(&d.join("test.csv")),
        "--out",
        path_str(&preds),
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    assert!(stderr(&res).contains("accuracy\t"));
    let labels = fs::read_to_string(&preds).unwrap();
    assert_eq!(labels.lines().count(), 200);
    assert!(labels.lines().all(|l| (1..=5).contains(&l.parse::<usize>().unwrap())));
}

#[test]
fn huge_l1_gives_zero_weights() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(msvm(&["gen", "--n", "60", "--seed", "2", "--out", path_str(d)])
        .status
        .success());
    let model = d.join("model.txt");
    let res = msvm(&[
        "train",
        "--data",
        path_str(&d.join("train.csv")),
        "--lambda1",
        "1e6",
        "--out",
        path_str(&model),
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    let clf = load_model(&model).unwrap();
    assert!(truncate(clf.weights.view(), 1e-3).iter().all(|&v| v == 0.0));
}

#[test]
fn missing_file_is_a_usage_error() {
    let res = msvm(&["train", "--data", "/nonexistent/data.csv"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("/nonexistent/data.csv"));
    assert_eq!(msvm(&["train"]).status.code(), Some(2));
}

#[test]
fn separable_toy_is_predicted_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut csv = String::from("x1,x2,label\n");
    for k in 0..10 {
        let e = k as f64 * 0.1;
        csv.push_str(&format!("{},{},1\n", 5.0 + e, e));
        csv.push_str(&format!("{},{},2\n", -5.0 - e, e));
        csv.push_str(&format!("{},{},3\n", e, 5.0 + e));
    }
    let data = d.join("toy.csv");
    fs::write(&data, csv).unwrap();
    let model = d.join("m.txt");
    let res = msvm(&[
        "train",
        "--data",
        path_str(&data),
        "--lambda2",
        "0.01",
        "--out",
        path_str(&model),
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    let res = msvm(&["predict", "--model", path_str(&model), "--data", path_str(&data)]);
    assert_eq!(res.status.code(), Some(0));
    assert!(stderr(&res).contains("accuracy\t1.000000"), "{}", stderr(&res));

    // unlabeled input: predictions only
    let unlabeled = d.join("x.csv");
    fs::write(&unlabeled, "5,0\n-5,0\n0,5\n").unwrap();
    let res = msvm(&["predict", "--model", path_str(&model), "--data", path_str(&unlabeled)]);
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    assert_eq!(stdout(&res), "1\n2\n3\n");
    assert!(!stderr(&res).contains("accuracy"));

    // model p = 2, data p = 3
    let wide = d.join("wide.csv");
    fs::write(&wide, "1,2,3,1\n4,5,6,2\n").unwrap();
    let res = msvm(&["predict", "--model", path_str(&model), "--data", path_str(&wide)]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn cv_echoes_single_point_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(msvm(&["gen", "--n", "60", "--seed", "4", "--out", path_str(d)])
        .status
        .success());
    let data = d.join("train.csv");
    let res = msvm(&["cv", "--data", path_str(&data), "--grid1", "0.03", "--seed", "5"]);
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    assert!(
        stdout(&res).contains("selected\tlambda1=0.03\tlambda2=1"),
        "{}",
        stdout(&res)
    );

    let args = [
        "cv",
        "--data",
        path_str(&data),
        "--reg",
        "sup",
        "--grid1",
        "0,0.05",
        "--grid2",
        "0.01,0.1",
        "--seed",
        "5",
    ];
    let first = msvm(&args);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    assert_eq!(stdout(&first).lines().count(), 1 + 4 + 1);
    assert_eq!(stdout(&first), stdout(&msvm(&args)));

    let res = msvm(&["cv", "--data", path_str(&data), "--folds", "40"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn bench_single_trial_reports_zero_se() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.tsv");
    let res = msvm(&[
        "bench",
        "--trials",
        "1",
        "--n",
        "60",
        "--n-test",
        "200",
        "--lambda1",
        "0.02",
        "--lambda2",
        "0.1",
        "--reg",
        "elastic,group",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    let report = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines.len(), 1 + 2 + 2);
    for mean in &lines[3..] {
        let fields: Vec<&str> = mean.split('\t').collect();
        assert_eq!(fields[0], "mean");
        assert_eq!(fields[3], "0.000000");
    }
}

#[test]
fn non_convergence_exits_one_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(msvm(&["gen", "--n", "50", "--seed", "6", "--out", path_str(d)])
        .status
        .success());
    let model = d.join("model.txt");
    let res = msvm(&[
        "train",
        "--data",
        path_str(&d.join("train.csv")),
        "--maxit",
        "3",
        "--out",
        path_str(&model),
    ]);
    assert_eq!(res.status.code(), Some(1));
    assert!(stdout(&res).contains("converged\tfalse"));
    assert!(model.exists());
}
