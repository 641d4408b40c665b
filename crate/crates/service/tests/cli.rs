use std::io::{Read, Write};
use std::path::Path;
use std::process::Command;

use clap::Parser;
use msje_service::cli::{run, Cli, Settings};

const CONFIG: &str = "\
# tiny shapes so the whole pipeline runs in seconds
joint_dim=16
w2v_dim=8
sentence_hidden=8
instruction_hidden=8
disc_hidden=8
batch=16
lr=0.003
epochs=2
tagger_epochs=2
adjudicator_epochs=5
tagging_lines=200
bigram_top_n=50
eval_subset_size=20
eval_subsets=2
";

fn msje(out: &Path, args: &[&str]) {
    let config = out.join("msje.conf");
    let mut argv = vec!["msje", "--out", out.to_str().unwrap(), "--config", config.to_str().unwrap(), "--seed", "3"];
    argv.extend_from_slice(args);
    let cli = Cli::try_parse_from(&argv).unwrap();
    run(&cli).unwrap_or_else(|e| panic!("{args:?}: {e:#}"));
}

#[test]
fn staged_pipeline_produces_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    std::fs::write(out.join("msje.conf"), CONFIG).unwrap();

    msje(out, &["ingest", "--synthetic", "90", "--split", "60"]);
    for f in ["train/recipes.jsonl", "train/images.jsonl", "val/recipes.jsonl", "ingredients.txt", "categories.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
    msje(out, &["train-extractor", "--dictionary", out.join("ingredients.txt").to_str().unwrap()]);
    msje(out, &["build-vocab"]);
    msje(out, &["train-w2v"]);
    msje(out, &["assign-categories", "--labels", out.join("categories.txt").to_str().unwrap()]);
    let assignments = std::fs::read_to_string(out.join("assignments.tsv")).unwrap();
    assert_eq!(assignments.lines().count(), 60);
    assert!(assignments.lines().all(|l| l.split('\t').count() == 3 && !l.contains("background")));
    msje(out, &["train-joint"]);
    let stats = std::fs::read_to_string(out.join("stats.csv")).unwrap();
    assert_eq!(stats.lines().next(), Some("epoch,L_tri,L_ma,L_sem_r,L_sem_im,val_medr"));
    assert_eq!(stats.lines().count(), 3);
    assert!(out.join("model/model.ckpt").exists());
    msje(out, &["evaluate"]);
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.starts_with("direction,MedR,R@1,R@5,R@10\nimage2recipe,"));
    msje(out, &["build-index"]);

    let query = out.join("q.json");
    std::fs::write(&query, r#"{"title": "test soup", "instructions": ["boil the water", "serve"], "k": 4}"#).unwrap();
    let bin = Command::new(env!("CARGO_BIN_EXE_msje"))
        .args(["--out", out.to_str().unwrap(), "query", "--recipe", query.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(bin.status.success(), "{}", String::from_utf8_lossy(&bin.stderr));
    let v: serde_json::Value = serde_json::from_slice(&bin.stdout).unwrap();
    let hits = v["results"].as_array().unwrap();
    assert_eq!(hits.len(), 4);
    assert!(hits.iter().all(|h| h["image_id"].is_string() && h["distance"].is_number()));

    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut server = Command::new(env!("CARGO_BIN_EXE_msje"))
        .args(["--out", out.to_str().unwrap(), "serve", "--addr", &format!("127.0.0.1:{port}")])
        .stderr(std::process::Stdio::null())
        .spawn()
        .unwrap();
    let health = (0..100).find_map(|_| {
        std::thread::sleep(std::time::Duration::from_millis(50));
        let mut s = std::net::TcpStream::connect(("127.0.0.1", port)).ok()?;
        s.write_all(b"GET /health HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").ok()?;
        let mut body = String::new();
        s.read_to_string(&mut body).ok()?;
        Some(body)
    });
    server.kill().unwrap();
    let health = health.expect("server never answered");
    assert!(health.starts_with("HTTP/1.1 200") && health.contains("\"status\":\"ok\""), "{health}");
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.conf");
    std::fs::write(&p, "batch=8\n\nlearning_rate=1\n").unwrap();
    let err = Settings::load(&p).unwrap_err().to_string();
    assert!(err.contains("bad.conf") && err.contains('3'), "{err}");
    std::fs::write(&p, "w2v_dim=12\nseed=4\n").unwrap();
    let s = Settings::load(&p).unwrap().with_seed(9);
    assert_eq!((s.pipeline.cbow.dim, s.pipeline.train.seed, s.tagger.seed), (12, 9, 9));
}

#[test]
fn every_subcommand_is_wired() {
    for sub in [
        "ingest", "build-vocab", "train-w2v", "train-extractor", "assign-categories", "train-joint", "evaluate",
        "build-index", "serve", "query",
    ] {
        let out = Command::new(env!("CARGO_BIN_EXE_msje")).args([sub, "--help"]).output().unwrap();
        assert!(out.status.success(), "{sub}");
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("--out") && text.contains("--seed") && text.contains("--config"), "{sub}");
    }
}
