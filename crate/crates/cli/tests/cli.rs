use std::path::Path;
use std::process::{Command, Output};

use cpxr_ptf::model::{EvaluationArtifact, ModelBundle};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpxr-ptf"))
        .current_dir(dir)
        .env_remove("CPXR_PTF_SEED")
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Non-comment lines of a CSV file.
fn rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).map(String::from).collect()
}

fn synth(dir: &Path, n: usize) {
    ok(dir, &["synth", "--out", "soils.csv", "--retention", "ret.csv", "--truth", "truth.csv", "--n", &n.to_string()]);
}

#[test]
fn usage_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = run(d, &["fit-vg", "--retention", "missing.csv", "--out", "p.csv"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("missing.csv"));
    synth(d, 60);
    assert_eq!(code(&run(d, &["train", "--data", "soils.csv", "--config", "SWRC9", "--out", "m.json"])), 2);
    assert_eq!(
        code(&run(d, &["evaluate", "--data", "soils.csv", "--config", "SWRC1", "--reps", "0", "--out-dir", "e"])),
        2
    );
    assert_eq!(
        code(&run(d, &["train", "--data", "soils.csv", "--config", "SWRC1", "--method", "GBM", "--out", "m.json"])),
        2
    );
    assert_eq!(code(&run(d, &["bogus"])), 2);
    assert_eq!(code(&run(d, &["--version"])), 0);
}

#[test]
fn fit_vg_tolerates_a_minority_of_failures() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, 20);
    let mut text = std::fs::read_to_string(d.join("ret.csv")).unwrap();
    // Two points only: too few to fit.
    text.push_str("bad,10,0.4\nbad,100,0.3\n");
    std::fs::write(d.join("ret.csv"), text).unwrap();
    let out = ok(d, &["fit-vg", "--retention", "ret.csv", "--out", "params.csv"]);
    assert!(stderr(&out).contains("warning: sample bad"));
    assert_eq!(rows(&d.join("params.csv")).len(), 1 + 20);
    let log = rows(&d.join("params.log.csv"));
    assert_eq!(log.len(), 1 + 21);
    assert!(log.iter().any(|l| l.starts_with("bad,2,failed")));

    std::fs::write(d.join("few.csv"), "id,tension_cm,theta\na,1,0.4\nb,1,0.4\n").unwrap();
    assert_eq!(code(&run(d, &["fit-vg", "--retention", "few.csv", "--out", "p2.csv"])), 1);
}

#[test]
fn fitted_parameters_track_the_generator() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "synth",
            "--out",
            "soils.csv",
            "--retention",
            "ret.csv",
            "--truth",
            "truth.csv",
            "--n",
            "30",
            "--noise-sd",
            "0",
        ],
    );
    ok(d, &["fit-vg", "--retention", "ret.csv", "--out", "params.csv"]);
    let fitted = rows(&d.join("params.csv"));
    let truth = rows(&d.join("truth.csv"));
    for (f, t) in fitted[1..].iter().zip(&truth[1..]) {
        let f: Vec<&str> = f.split(',').collect();
        let t: Vec<&str> = t.split(',').collect();
        assert_eq!(f[0], t[0]);
        for (a, b) in f[1..5].iter().zip(&t[2..6]) {
            let (a, b): (f64, f64) = (a.parse().unwrap(), b.parse().unwrap());
            assert!((a - b).abs() <= 1e-3 * b.abs(), "{} {a} vs {b}", f[0]);
        }
    }
}

#[test]
fn derive_features_builds_targets_from_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("soils.csv"),
        "id,Sand,Silt,Clay,bulk_density,internal_diameter_cm,length_cm,ksat_cm_per_day\n\
         s1,40,40,20,1.4,5,10,12.5\n\
         s2,70,20,10,1.5,8,5,\n",
    )
    .unwrap();
    std::fs::write(d.join("params.csv"), "id,theta_r,theta_s,alpha_per_cm,n\ns1,0.05,0.45,0.02,1.6\n").unwrap();
    ok(d, &["derive-features", "--soils", "soils.csv", "--params", "params.csv", "--out", "derived.csv"]);
    let data = cpxr_ptf::io::read_soils(&d.join("derived.csv")).unwrap();
    let s1 = data.get("s1").unwrap();
    assert!(s1.feature("dg_mm").is_some() && s1.feature("sigma_g").is_some());
    assert_eq!(s1.value("theta_s"), Some(0.45));
    assert_eq!(s1.value("ln_n"), Some(1.6f64.ln()));
    assert_eq!(s1.value("ln_ksat"), Some(12.5f64.ln()));
    let theta_30 = s1.value("theta_30").unwrap();
    assert!(theta_30 < 0.45 && theta_30 > 0.05);
    let s2 = data.get("s2").unwrap();
    assert_eq!(s2.value("theta_10"), None);
    assert!(s2.feature("dg_mm").is_some());

    std::fs::write(d.join("bad.csv"), "id,sand,silt,clay\nx,84.6,14.4,3\n").unwrap();
    let out = run(d, &["derive-features", "--soils", "bad.csv", "--out", "o.csv"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("`x`"));
}

#[test]
fn train_writes_one_model_per_target() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, 120);
    ok(d, &["train", "--data", "soils.csv", "--config", "SWRC2", "--method", "CPXR", "--out", "swrc2.json"]);
    let bundle = ModelBundle::load(&d.join("swrc2.json")).unwrap();
    assert_eq!(bundle.models.len(), 10);
    assert_eq!(bundle.features().len(), 8);
    assert!(d.join("swrc2.metrics.json").is_file());

    ok(d, &["train", "--data", "soils.csv", "--config", "shc4", "--method", "mlr", "--out", "shc4.json"]);
    let bundle = ModelBundle::load(&d.join("shc4.json")).unwrap();
    assert_eq!(bundle.models.len(), 1);
    assert_eq!(bundle.models[0].target, "ln_ksat");
    assert_eq!(bundle.features().len(), 12);
}

#[test]
fn predict_parameters_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, 120);
    ok(d, &["train", "--data", "soils.csv", "--config", "SWRC4", "--out", "m.json"]);
    ok(d, &["predict", "--model", "m.json", "--data", "soils.csv", "--out", "pred.csv", "--curve", "curve.csv"]);
    let pred = rows(&d.join("pred.csv"));
    assert_eq!(pred[0], "id,theta_r,theta_s,ln_alpha,ln_n");
    assert_eq!(pred.len(), 121);
    let curve = rows(&d.join("curve.csv"));
    let first: Vec<String> = curve[1..].iter().filter(|l| l.starts_with("syn0001,")).cloned().collect();
    assert_eq!(first.len(), 50);
    let thetas: Vec<f64> = first.iter().map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(thetas.windows(2).all(|w| w[1] <= w[0]));

    std::fs::write(d.join("empty.csv"), rows(&d.join("soils.csv"))[0].clone() + "\n").unwrap();
    ok(d, &["predict", "--model", "m.json", "--data", "empty.csv", "--out", "empty_pred.csv"]);
    assert_eq!(rows(&d.join("empty_pred.csv")).len(), 1);

    std::fs::write(d.join("narrow.csv"), "id,sand,silt,clay\na,30,30,40\n").unwrap();
    let out = run(d, &["predict", "--model", "m.json", "--data", "narrow.csv", "--out", "x.csv"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("length_cm"), "{}", stderr(&out));
}

#[test]
fn evaluate_and_report_grid() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, 100);
    let mut inputs = Vec::new();
    for config in ["SHC1", "SHC2", "SHC3", "SHC4"] {
        let out_dir = format!("ev_{config}");
        ok(d, &["evaluate", "--data", "soils.csv", "--config", config, "--reps", "1", "--out-dir", &out_dir]);
        for m in ["CPXR", "MLR"] {
            inputs.push(format!("{out_dir}/evaluation_{config}_{m}.json"));
        }
        assert!(d.join(format!("{out_dir}/comparison_{config}.csv")).is_file());
    }
    let mut args = vec!["report", "--out", "table.csv", "--comparisons", "cmp.csv"];
    args.extend(inputs.iter().map(String::as_str));
    let out = ok(d, &args);
    let table = rows(&d.join("table.csv"));
    assert_eq!(table.len(), 1 + 8);
    assert!(table[1..].iter().all(|l| l.contains(",ln_ksat,")));
    // Each row carries test RMSLE and R².
    for l in &table[1..] {
        let cells: Vec<&str> = l.split(',').collect();
        assert!(!cells[7].is_empty() && !cells[8].is_empty(), "{l}");
    }
    let statements = String::from_utf8_lossy(&out.stdout);
    assert!(statements.contains("SHC1 MLR vs SHC1 CPXR"));
    assert!(statements.contains("SHC1 CPXR vs SHC2 CPXR"));
    assert!(rows(&d.join("cmp.csv")).len() > 1);
}

#[test]
fn repetitions_control_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, 80);
    std::fs::write(d.join("settings.json"), r#"{"repetitions": 2}"#).unwrap();
    ok(
        d,
        &[
            "evaluate",
            "--settings",
            "settings.json",
            "--data",
            "soils.csv",
            "--config",
            "SHC1",
            "--methods",
            "MLR",
            "--out-dir",
            "a",
        ],
    );
    let a = EvaluationArtifact::load(&d.join("a/evaluation_SHC1_MLR.json")).unwrap();
    assert_eq!(a.report.iterations, 20);
    ok(
        d,
        &[
            "evaluate",
            "--settings",
            "settings.json",
            "--reps",
            "1",
            "--data",
            "soils.csv",
            "--config",
            "SHC1",
            "--methods",
            "MLR",
            "--out-dir",
            "b",
        ],
    );
    let b = EvaluationArtifact::load(&d.join("b/evaluation_SHC1_MLR.json")).unwrap();
    assert_eq!(b.report.iterations, 10);
    assert_ne!(a.provenance.config_hash, b.provenance.config_hash);
    assert_eq!(rows(&d.join("b/predictions_SHC1_MLR.csv")).len(), 1 + 10 * 16);
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--out", "flag.csv", "--n", "20", "--seed", "5"]);
    let out = Command::new(env!("CARGO_BIN_EXE_cpxr-ptf"))
        .current_dir(d)
        .env("CPXR_PTF_SEED", "5")
        .args(["synth", "--out", "env.csv", "--n", "20"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let flag = std::fs::read(d.join("flag.csv")).unwrap();
    assert_eq!(flag, std::fs::read(d.join("env.csv")).unwrap());
    assert!(String::from_utf8_lossy(&flag).starts_with("# tool=cpxr-ptf version="));
    assert!(String::from_utf8_lossy(&flag).lines().next().unwrap().contains(" seed=5 "));
    ok(d, &["synth", "--out", "zero.csv", "--n", "20"]);
    assert_ne!(flag, std::fs::read(d.join("zero.csv")).unwrap());
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, 80);
    for jobs in ["1", "3"] {
        ok(
            d,
            &["--jobs", jobs, "evaluate", "--data", "soils.csv", "--config", "SWRC1", "--reps", "1", "--out-dir", jobs],
        );
        ok(d, &["--jobs", jobs, "fit-vg", "--retention", "ret.csv", "--out", &format!("p{jobs}.csv")]);
    }
    for name in
        ["evaluation_SWRC1_CPXR.json", "predictions_SWRC1_CPXR.csv", "summary_SWRC1.csv", "comparison_SWRC1.csv"]
    {
        assert_eq!(
            std::fs::read(d.join("1").join(name)).unwrap(),
            std::fs::read(d.join("3").join(name)).unwrap(),
            "{name}"
        );
    }
    assert_eq!(std::fs::read(d.join("p1.csv")).unwrap(), std::fs::read(d.join("p3.csv")).unwrap());
}
