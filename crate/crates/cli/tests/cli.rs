use std::process::{Command, Output};

use serde_json::Value;
use ymbubble::annulus::{default_annulus_points, model_columns_at, NeckSamples};
use ymbubble::exterior::GForm1;
use ymbubble::lie::LieElement;
use ymbubble::Exec;

fn ymbubble(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ymbubble")).args(args).output().expect("run ymbubble")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn pass_column(o: &Output) -> Vec<(String, bool)> {
    json(o)["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| (c["name"].as_str().unwrap().to_string(), c["passed"].as_bool().unwrap()))
        .collect()
}

#[test]
fn cp2_groisser_with_asd_bubble_is_excluded() {
    let o = ymbubble(&["obstruction", "--metric", "cp2", "--limit", "groisser:0.3", "--bubble", "bpst-singular:-"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json(&o)["verdict"], "excluded");
}

#[test]
fn flat_equal_chirality_is_compatible() {
    let o = ymbubble(&["obstruction", "--metric", "flat", "--limit", "bpst:+", "--bubble", "bpst-singular:+"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["verdict"], "compatible");
}

#[test]
fn missing_metric_is_an_error() {
    let o = ymbubble(&["obstruction", "--limit", "zero", "--bubble", "zero"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("metric"));
    assert!(o.stdout.is_empty());
}

#[test]
fn branch_exit_codes_follow_chirality() {
    for (pair, code) in [("+,+", 0), ("-,-", 0), ("+,-", 2), ("-,+", 2)] {
        assert_eq!(ymbubble(&["branch", "--chirality", pair]).status.code(), Some(code), "{pair}");
    }
    assert_eq!(ymbubble(&["branch", "--chirality", "+"]).status.code(), Some(1));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"metric":"flat","limit":"bpst:+","bubble":"bpst-singular:-"}"#).unwrap();
    let c = cfg.to_str().unwrap();
    assert_eq!(ymbubble(&["obstruction", "--config", c]).status.code(), Some(2));
    assert_eq!(ymbubble(&["obstruction", "--config", c, "--bubble", "bpst-singular:+"]).status.code(), Some(0));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"metrik":"flat"}"#).unwrap();
    assert_eq!(ymbubble(&["obstruction", "--config", bad.to_str().unwrap()]).status.code(), Some(1));
    let wrong = dir.path().join("wrong.json");
    std::fs::write(&wrong, r#"{"command":"neck"}"#).unwrap();
    assert_eq!(ymbubble(&["cp2", "--config", wrong.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn out_file_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cp2.csv");
    let o = ymbubble(&["cp2", "--t-grid", "0,0.5", "--csv", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    let body = std::fs::read_to_string(&out).unwrap();
    let mut lines = body.lines();
    assert!(lines.next().unwrap().starts_with("t,"));
    assert!(lines.all(|l| l.ends_with(",true")));
}

#[test]
fn annulus_fit_reads_samples() {
    let lambda = 1e-3;
    let q = LieElement::basis(2);
    let pts = default_annulus_points(lambda);
    // 0.5 r⁻⁴φ₀₁ + 2 dx³, both in the model family.
    let s = NeckSamples::from_fn(
        lambda,
        &pts,
        &|x| {
            let c = model_columns_at(x);
            Ok(GForm1::from_real(&(c[0] * 0.5 + c[15] * 2.0), &q))
        },
        Exec::Sequential,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("samples.json");
    std::fs::write(&path, serde_json::to_string(&s).unwrap()).unwrap();
    let o = ymbubble(&["annulus-fit", "--lambda", "1e-3", "--input", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    let comp = |c: &Value| -> Vec<f64> { c["c"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect() };
    let close = |got: Vec<f64>, want: [f64; 3]| got.iter().zip(want).all(|(g, w)| (g - w).abs() < 1e-10);
    assert!(close(comp(&v["a"][0]["value"]), [0.0, 0.0, 0.5]), "{}", v["a"][0]);
    assert!(close(comp(&v["beta"][3]), [0.0, 0.0, 2.0]), "{}", v["beta"][3]);
    assert!(close(comp(&v["beta"][0]), [0.0; 3]));
    assert_eq!(ymbubble(&["annulus-fit", "--lambda", "0.5"]).status.code(), Some(1));
}

#[test]
fn neck_report_is_monotone() {
    let o = ymbubble(&["neck", "--lambdas", "1e-2,1e-3,1e-4"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["monotone"], true);
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn verify_tolerance_and_seed() {
    let base = ymbubble(&["verify"]);
    assert_eq!(base.status.code(), Some(0));
    let pattern = pass_column(&base);
    assert!(pattern.iter().all(|(_, p)| *p));

    // Same pass/fail pattern under another seed.
    assert_eq!(pass_column(&ymbubble(&["verify", "--seed", "99"])), pattern);

    // At 1e-16 the exact checks still pass and the quadrature/FD ones do not.
    let tight = ymbubble(&["verify", "--tolerance", "1e-16"]);
    assert_eq!(tight.status.code(), Some(3));
    for c in json(&tight)["checks"].as_array().unwrap() {
        if c["kind"] == "exact" {
            assert_eq!(c["passed"], true, "{}", c["name"]);
        }
    }
    let failed: Vec<_> = pass_column(&tight).into_iter().filter(|(_, p)| !p).map(|(n, _)| n).collect();
    for name in ["stress_divergence_cp2", "pohozaev_conf_residual", "weyl_conformally_flat", "neck_fit_model"] {
        assert!(failed.iter().any(|n| n == name), "{name} should fail at 1e-16");
    }
    assert!(json(&tight)["checks"][0].get("wall_time_s").map_or(true, Value::is_null));
}
