use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rpsvr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rpsvr")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(text: &[u8]) -> serde_json::Value {
    serde_json::from_slice(text).expect("valid json")
}

#[test]
fn fit_two_point_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("l2.csv");
    fs::write(&train, "x,y\n0,0\n1,1\n").unwrap();
    let out = dir.path().join("out");
    for (tau1, tau2) in [("0", "1"), ("0.5", "1.5")] {
        let o = rpsvr(&[
            "fit", "--train", path(&train), "--kernel", "linear", "--C", "1", "--eps", "0.1", "--tau1", tau1, "--tau2", tau2, "--model", "m.json",
            "--out", path(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let model = json(&fs::read(out.join("m.json")).unwrap());
        assert!((model["bias"].as_f64().unwrap() - 0.1).abs() < 1e-8);
        // w = sum of coefficient * x over the two support points.
        let coef: Vec<f64> = model["coefficients"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        let xs: Vec<f64> = model["support_points"].as_array().unwrap().iter().map(|r| r[0].as_f64().unwrap()).collect();
        let w: f64 = coef.iter().zip(&xs).map(|(c, x)| c * x).sum();
        assert!((w - 0.8).abs() < 1e-8);
    }
}

#[test]
fn eval_identical_files_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("t.csv");
    fs::write(&f, "x,y\n0,1.5\n1,-2\n2,0.25\n").unwrap();
    let o = rpsvr(&["eval", "--truth", path(&f), "--pred", path(&f)]);
    assert!(o.status.success());
    let r = json(&o.stdout);
    assert_eq!(r["rmse"].as_f64(), Some(0.0));
    assert_eq!(r["k"].as_u64(), Some(3));
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = rpsvr(&["gen", "--kind", "type1", "--seed", "11", "--out", path(d)]);
        assert!(o.status.success());
    }
    for name in ["type1_train.csv", "type1_test.csv", "type1_manifest.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let seeded = dir.path().join("c");
    rpsvr(&["gen", "--kind", "type1", "--seed", "12", "--out", path(&seeded)]);
    assert_ne!(fs::read(a.join("type1_train.csv")).unwrap(), fs::read(seeded.join("type1_train.csv")).unwrap());
}

#[test]
fn fit_predict_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(rpsvr(&["gen", "--kind", "type2", "--n-train", "60", "--n-test", "80", "--out", path(d)]).status.success());
    let fit = rpsvr(&[
        "fit", "--train", path(&d.join("type2_train.csv")), "--q", "4", "--C", "1", "--eps", "0.2", "--tau1", "0.1", "--tau2", "1", "--out", path(d),
    ]);
    assert!(fit.status.success(), "{}", String::from_utf8_lossy(&fit.stderr));
    let pred = rpsvr(&["predict", "--model", path(&d.join("model.json")), "--data", path(&d.join("type2_test.csv")), "--out", path(d)]);
    assert!(pred.status.success());
    let text = fs::read_to_string(d.join("predictions.csv")).unwrap();
    assert!(text.starts_with("index,prediction\n"));
    assert_eq!(text.lines().count(), 81);
    let ev = rpsvr(&["eval", "--truth", path(&d.join("type2_test.csv")), "--pred", path(&d.join("predictions.csv"))]);
    assert!(ev.status.success());
    let rmse = json(&ev.stdout)["rmse"].as_f64().unwrap();
    assert!(rmse > 0.0 && rmse < 0.5, "rmse {rmse}");
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    assert_eq!(rpsvr(&["fit", "--train", path(&missing), "--out", path(dir.path())]).status.code(), Some(2));

    let ragged = dir.path().join("r.csv");
    fs::write(&ragged, "x,y\n1,2\n1\n").unwrap();
    let o = rpsvr(&["fit", "--train", path(&ragged), "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row"));

    let ok = dir.path().join("ok.csv");
    fs::write(&ok, "x,y\n0,0\n1,1\n").unwrap();
    let o = rpsvr(&["fit", "--train", path(&ok), "--tau1", "2", "--tau2", "1", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(rpsvr(&["gen", "--kind", "type9", "--out", path(dir.path())]).status.code(), Some(2));
    // clap's own usage errors also exit with 2.
    assert_eq!(rpsvr(&["fit", "--bogus"]).status.code(), Some(2));
}

#[test]
fn non_convergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(rpsvr(&["gen", "--kind", "type1", "--out", path(d)]).status.success());
    let o = rpsvr(&["fit", "--train", path(&d.join("type1_train.csv")), "--q", "4", "--C", "0.5", "--max-iter", "3", "--out", path(d)]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!d.join("model.json").exists());
}

#[test]
fn curves_and_bench_write_under_out() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("nested/out");
    let o = rpsvr(&["curves", "--kind", "loss", "--tau1", "0,0.5", "--tau2", "1,2", "--eps", "2", "--step", "0.5", "--out", path(&d)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(d.join("curves.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "u,tau2=1 tau1=0 eps=2,tau2=2 tau1=0.5 eps=2");
    assert_eq!(text.lines().count(), 26);

    let o = rpsvr(&["curves", "--kind", "loss", "--tau1", "-0.5", "--out", path(&d)]);
    assert_eq!(o.status.code(), Some(2));
    let o = rpsvr(&["curves", "--kind", "loss", "--tau1", "-0.5", "--allow-nonconvex", "--out", path(&d)]);
    assert!(o.status.success());

    let o = rpsvr(&["bench", "--kind", "type1", "--repeats", "2", "--out", path(&d)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["bench.csv", "bench.txt", "bench.json"] {
        assert!(d.join(f).exists(), "{f}");
    }
}

#[test]
fn gridsearch_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"source":{"type":"synth","kind":"type1","n_train":30,"n_test":40},"folds":3,"seed":5,
            "grid":{"kernel":"rbf","C":[0.5,1],"q":[4],"eps":[0.1,0.2],"tau1":[0.2,0.5],"tau2":[1,2]}}"#,
    )
    .unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (d, w) in [(&a, "1"), (&b, "3")] {
        let o = rpsvr(&["gridsearch", "--config", path(&cfg), "--workers", w, "--out", path(d)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(a.join("search.csv")).unwrap(), fs::read(b.join("search.csv")).unwrap());
}
