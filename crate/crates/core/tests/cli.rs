use std::path::{Path, PathBuf};

use geohg::cli::{dispatch, Preset, OUT_DIR_ENV};

fn run(args: &[&str]) -> i32 {
    dispatch(std::iter::once("geohg").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(root: &Path) -> PathBuf {
    let data = root.join("data");
    assert_eq!(run(&["synth", "--cols", "20", "--rows", "20", "--seed", "5", "--out", s(&data)]), 0);
    data
}

fn header(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(String::from)
        .collect()
}

#[test]
fn synth_writes_every_input_file() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());
    for f in ["grid.toml", "landcover.txt", "categories.txt", "pois.csv", "labels.csv", "ledger.csv"] {
        assert!(data.join(f).is_file(), "{f} missing");
    }
}

#[test]
fn train_then_predict_from_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());
    let train = tmp.path().join("train");
    let pred = tmp.path().join("pred");
    let common = ["--max-epochs", "40", "--seed", "2", "--preset", "gdp"];
    let mut args = vec!["train", "--data", s(&data), "--out", s(&train)];
    args.extend(common);
    assert_eq!(run(&args), 0);
    let ckpt = train.join("checkpoint.txt");
    assert!(train.join("train_log.csv").is_file());

    let mut args = vec!["predict", "--data", s(&data), "--checkpoint", s(&ckpt), "--out", s(&pred)];
    args.extend(common);
    assert_eq!(run(&args), 0);
    let text = std::fs::read_to_string(pred.join("predictions.csv")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 400);
    let masked = rows.iter().filter(|r| r.ends_with(",1")).count();
    assert_eq!(masked, 300);

    let h = header(&pred.join("predictions.csv"));
    assert!(h.iter().any(|l| l == "# command=predict"));
    assert!(h.iter().any(|l| l == "# seed=2"));
    assert!(h.iter().any(|l| l.contains("\"theta_env\":0.4") && l.contains("\"theta_soc\":1.2")));
}

#[test]
fn pretrain_finetune_predict_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());
    let pre = tmp.path().join("pre");
    let ft = tmp.path().join("ft");
    let pred = tmp.path().join("pred");
    assert_eq!(run(&["pretrain", "--data", s(&data), "--ssl-epochs", "2", "--ssl-batch", "64", "--out", s(&pre)]), 0);
    assert!(pre.join("embeddings.csv").is_file());
    assert_eq!(
        run(&[
            "finetune",
            "--data",
            s(&data),
            "--checkpoint",
            s(&pre.join("checkpoint.txt")),
            "--embeddings",
            s(&pre.join("embeddings.csv")),
            "--max-epochs",
            "30",
            "--out",
            s(&ft),
        ]),
        0
    );
    assert_eq!(
        run(&["predict", "--data", s(&data), "--checkpoint", s(&ft.join("checkpoint.txt")), "--out", s(&pred)]),
        0
    );
    assert!(pred.join("predictions.csv").is_file());
}

#[test]
fn predict_refuses_an_untrained_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());
    let pre = tmp.path().join("pre");
    assert_eq!(run(&["pretrain", "--data", s(&data), "--ssl-epochs", "1", "--ssl-batch", "64", "--out", s(&pre)]), 0);
    let ckpt = pre.join("checkpoint.txt");
    assert_eq!(run(&["predict", "--data", s(&data), "--checkpoint", s(&ckpt), "--out", s(tmp.path())]), 1);
}

#[test]
fn featurize_and_build_graph_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());
    let out = tmp.path().join("o");
    assert_eq!(run(&["featurize", "--data", s(&data), "--out", s(&out)]), 0);
    assert_eq!(run(&["build-graph", "--data", s(&data), "--theta-env", "0.5", "--out", s(&out)]), 0);
    let g = geohg::hetgraph::load_graph(out.join("graph.txt")).unwrap();
    assert_eq!(g.edges_rnr.len(), geohg::hetgraph::rnr_edge_count(20, 20));
    assert!(header(&out.join("features.csv")).iter().any(|l| l == "# command=featurize"));
}

#[test]
fn baseline_report_and_timing_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(run(&["baseline", "--data", s(&data), "--method", "idw", "--out", s(&a)]), 0);
    assert_eq!(run(&["baseline", "--data", s(&data), "--method", "idw", "--timing", "--out", s(&b)]), 0);
    let ra: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    let rb: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(b.join("report.json")).unwrap()).unwrap();
    assert!(ra.get("runtime_s").is_none());
    assert!(rb["runtime_s"].as_f64().unwrap() >= 0.0);
    assert_eq!(ra["method"], "idw");
    assert_eq!(ra["n_eval"], 300);
    assert_eq!(ra["config"]["masked_ratio"], 0.75);
}

#[test]
fn sweep_is_independent_of_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());
    let mut summaries = Vec::new();
    for jobs in ["1", "3"] {
        let out = tmp.path().join(format!("sweep{jobs}"));
        let code = run(&[
            "sweep",
            "--data",
            s(&data),
            "--method",
            "uk",
            "--theta-env-grid",
            "0.2,0.6",
            "--masked-ratios",
            "0.5,0.8",
            "--seeds",
            "0,1",
            "--jobs",
            jobs,
            "--out",
            s(&out),
        ]);
        assert_eq!(code, 0);
        let text = std::fs::read_to_string(out.join("summary.csv")).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("uk,")).count(), 8);
        summaries.push(text);
    }
    assert_eq!(summaries[0], summaries[1]);
}

#[test]
fn similarity_map_from_pretrained_embeddings() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());
    let pre = tmp.path().join("pre");
    assert_eq!(run(&["pretrain", "--data", s(&data), "--ssl-epochs", "1", "--ssl-batch", "64", "--out", s(&pre)]), 0);
    let emb = pre.join("embeddings.csv");
    let out = tmp.path().join("sim");
    assert_eq!(run(&["similarity", "--data", s(&data), "--embeddings", s(&emb), "--anchor", "4,7", "--out", s(&out)]), 0);
    assert!(out.join("similarity.csv").is_file());
    assert_eq!(run(&["similarity", "--data", s(&data), "--embeddings", s(&emb), "--anchor", "40,7", "--out", s(&out)]), 1);
}

#[test]
fn usage_and_runtime_errors_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(&[]), 2);
    assert_eq!(run(&["frobnicate"]), 2);
    assert_eq!(run(&["eval", "--data", s(tmp.path()), "--method", "kriging"]), 2);
    assert_eq!(run(&["eval", "--data", s(&tmp.path().join("missing")), "--out", s(tmp.path())]), 1);
    let data = synth(tmp.path());
    assert_eq!(run(&["eval", "--data", s(&data), "--method", "idw", "--masked-ratio", "1.0", "--out", s(tmp.path())]), 1);
    assert_eq!(run(&["eval", "--data", s(&data), "--method", "idw", "--theta-env=-1", "--out", s(tmp.path())]), 1);
}

#[test]
fn output_directory_defaults_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());
    let root = tmp.path().join("env-out");
    std::env::set_var(OUT_DIR_ENV, &root);
    let code = run(&["eval", "--data", s(&data), "--method", "idw"]);
    std::env::remove_var(OUT_DIR_ENV);
    assert_eq!(code, 0);
    assert!(root.join("eval").join("report.json").is_file());
}

#[test]
fn presets_set_both_thresholds() {
    assert_eq!(Preset::Carbon.thresholds(), (0.6, 0.9));
    assert_eq!(Preset::Population.thresholds(), (0.2, 0.9));
    assert_eq!(Preset::Gdp.thresholds(), (0.4, 1.2));
    assert_eq!(Preset::Light.thresholds(), (0.2, 0.9));
    assert_eq!(Preset::Pm25.thresholds(), (0.8, 0.6));
}
