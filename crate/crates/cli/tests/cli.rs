use std::path::Path;
use std::process::{Command, Output};

use mcas_core::embedding::{
    EmbeddingStore, EmbeddingsRequest, EmbeddingsResponse, EmbeddingItem, ResponseEmbedding,
};
use mcas_core::scores::Modality;
use mcas_core::synthetic::{Placement, SyntheticDataset, SyntheticShape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn mcas(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcas"))
        .args(args)
        .current_dir(dir)
        .env_remove("MCAS_ENDPOINT")
        .env_remove("MCAS_TOKEN")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture(seed: u64) -> (TempDir, SyntheticDataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = SyntheticShape {
        dim: 8,
        text_words: 3,
        image_prompts: 2,
        images_per_prompt: 2,
        targets: 6,
        images_per_target: 3,
    };
    let d = SyntheticDataset::generate(shape, Placement::Random, &mut rng);
    let dir = tempfile::tempdir().unwrap();
    d.write_fixture(dir.path()).unwrap();
    (dir, d)
}

const DATA: [&str; 4] = ["--manifest", "manifest.json", "--store", "store.jsonl"];

#[test]
fn init_writes_the_builtin_catalogue() {
    let dir = tempfile::tempdir().unwrap();
    let o = mcas(dir.path(), &["init", "--builtin", "appendix-a", "--out", "m.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("m.json")).unwrap()).unwrap();
    assert_eq!(m["targets"].as_array().unwrap().len(), 28);

    let again = mcas(dir.path(), &["init", "--out", "m.json"]);
    assert_eq!(again.status.code(), Some(1));
    assert!(stderr(&again).contains("--force"));
    assert_eq!(mcas(dir.path(), &["init", "--out", "m.json", "--force"]).status.code(), Some(0));
}

#[test]
fn unknown_builtin_and_bad_usage_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = mcas(dir.path(), &["init", "--builtin", "appendix-b", "--out", "m.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("appendix-b"));
    assert!(!dir.path().join("m.json").exists());
    assert_eq!(mcas(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(mcas(dir.path(), &["score"]).status.code(), Some(1));
    assert_eq!(mcas(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn embed_with_everything_cached() {
    let (dir, d) = fixture(1);
    let o = mcas(dir.path(), &["embed", "--manifest", "manifest.json", "--store", "store.jsonl"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), format!("fetched 0, cached {}", d.store.len()));
}

#[test]
fn embed_file_provider_with_empty_store_exits_2() {
    let (dir, _) = fixture(2);
    std::fs::remove_file(dir.path().join("store.jsonl")).unwrap();
    let o = mcas(dir.path(), &["embed", "--manifest", "manifest.json", "--store", "store.jsonl"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("sha256:"));
}

#[test]
fn embed_http_requires_an_endpoint() {
    let (dir, _) = fixture(3);
    let o = mcas(dir.path(), &["embed", "--manifest", "manifest.json", "--store", "new.jsonl", "--provider", "http"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn embed_http_service_down_exits_3() {
    let (dir, _) = fixture(4);
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let o = mcas(
        dir.path(),
        &[
            "embed", "--manifest", "manifest.json", "--store", "new.jsonl", "--provider", "http",
            "--endpoint", &format!("http://127.0.0.1:{port}"), "--max-retries", "1",
        ],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

/// Serves deterministic vectors derived from each item's id.
fn serve_embeddings(server: tiny_http::Server, seen_tokens: std::sync::mpsc::Sender<Option<String>>) {
    for mut req in server.incoming_requests() {
        let token = req
            .headers()
            .iter()
            .find(|h| h.field.equiv("Authorization"))
            .map(|h| h.value.to_string());
        let _ = seen_tokens.send(token);
        let mut body = String::new();
        req.as_reader().read_to_string(&mut body).unwrap();
        let parsed: EmbeddingsRequest = serde_json::from_str(&body).unwrap();
        let embeddings = parsed
            .items
            .iter()
            .map(|item| {
                let id = match item {
                    EmbeddingItem::Text { id, .. } | EmbeddingItem::Image { id, .. } => id.clone(),
                };
                let vector = id.bytes().skip(7).take(6).map(|b| b as f64 - 80.0).collect();
                ResponseEmbedding { id, vector }
            })
            .collect();
        let resp = EmbeddingsResponse {
            model: parsed.model,
            dim: 6,
            embeddings,
        };
        let _ = req.respond(tiny_http::Response::from_string(serde_json::to_string(&resp).unwrap()));
    }
}

#[test]
fn http_embed_then_score_and_report() {
    let (dir, d) = fixture(5);
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let url = format!("http://{}", server.server_addr().to_ip().unwrap());
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || serve_embeddings(server, tx));

    let embed = |store: &str| {
        Command::new(env!("CARGO_BIN_EXE_mcas"))
            .args(["embed", "--manifest", "manifest.json", "--store", store, "--provider", "http"])
            .args(["--model", "mock-clip", "--batch-size", "5"])
            .current_dir(dir.path())
            .env("MCAS_ENDPOINT", &url)
            .env("MCAS_TOKEN", "t0k")
            .output()
            .unwrap()
    };
    let first = embed("fresh.jsonl");
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    let n = d.store.len();
    assert_eq!(stdout(&first).trim(), format!("fetched {n}, cached 0"));
    let calls: Vec<_> = rx.try_iter().collect();
    assert_eq!(calls.len(), n.div_ceil(5));
    assert!(calls.iter().all(|t| t.as_deref() == Some("Bearer t0k")));

    let second = embed("fresh.jsonl");
    assert_eq!(stdout(&second).trim(), format!("fetched 0, cached {n}"));
    assert_eq!(rx.try_iter().count(), 0);

    let store = EmbeddingStore::open(dir.path().join("fresh.jsonl")).unwrap();
    assert_eq!(store.len(), n);
    assert_eq!(store.dim_for("mock-clip"), Some(6));

    let o = mcas(
        dir.path(),
        &["score", "--manifest", "manifest.json", "--store", "fresh.jsonl", "--model", "mock-clip"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["model_id"], "mock-clip");
}

#[test]
fn score_complete_fixture() {
    let (dir, d) = fixture(6);
    let o = mcas(dir.path(), &["score", DATA[0], DATA[1], DATA[2], DATA[3], "--out", "r.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    let per_target = report["per_target"].as_array().unwrap();
    assert_eq!(per_target.len(), d.manifest.targets.len());
    for (t, spec) in per_target.iter().zip(&d.manifest.targets) {
        assert_eq!(t["target_id"], spec.id.as_str());
        let sum: f64 = ["II", "ITP", "ITA", "TT"]
            .iter()
            .map(|k| t["components"][k].as_f64().unwrap())
            .sum();
        assert!((sum - t["mcas"].as_f64().unwrap()).abs() < 1e-12);
    }

    let clobber = mcas(dir.path(), &["score", DATA[0], DATA[1], DATA[2], DATA[3], "--out", "r.json"]);
    assert_eq!(clobber.status.code(), Some(1));
}

#[test]
fn score_with_one_image_embedding_missing_exits_2() {
    let (dir, d) = fixture(7);
    let dropped = d
        .store
        .records()
        .find(|r| r.kind == Modality::Image)
        .unwrap()
        .content_id
        .clone();
    let mut partial = EmbeddingStore::in_memory();
    for r in d.store.records().filter(|r| r.content_id != dropped) {
        partial.insert(r.clone()).unwrap();
    }
    partial.write_to(&dir.path().join("store.jsonl")).unwrap();
    let o = mcas(dir.path(), &["score", DATA[0], DATA[1], DATA[2], DATA[3]]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(&dropped), "{}", stderr(&o));
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn score_with_model_mismatch_exits_2() {
    let (dir, _) = fixture(8);
    let o = mcas(dir.path(), &["score", DATA[0], DATA[1], DATA[2], DATA[3], "--model", "ViT-L/14"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("ViT-L/14") && err.contains("synthetic"), "{err}");
}

#[test]
fn report_formats_are_deterministic() {
    let (dir, d) = fixture(9);
    assert_eq!(mcas(dir.path(), &["score", DATA[0], DATA[1], DATA[2], DATA[3]]).status.code(), Some(0));
    for format in ["json", "csv", "md", "chart"] {
        let a = mcas(dir.path(), &["report", "--in", "report.json", "--format", format]);
        let b = mcas(dir.path(), &["report", "--in", "report.json", "--format", format]);
        assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
        assert!(!a.stdout.is_empty());
        assert_eq!(a.stdout, b.stdout);
    }
    let csv = stdout(&mcas(dir.path(), &["report", "--in", "report.json", "--format", "csv"]));
    assert!(csv.starts_with("target_id,category,expected,II,ITP,ITA,TT,MCAS\n"));
    assert_eq!(csv.lines().take_while(|l| !l.is_empty()).count(), d.manifest.targets.len() + 1);

    let o = mcas(dir.path(), &["report", "--in", "report.json", "--format", "csv", "--out", "r.csv"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(dir.path().join("r.csv")).unwrap(), csv);
    let json = mcas(dir.path(), &["report", "--in", "report.json", "--format", "json"]);
    assert_eq!(json.stdout, std::fs::read(dir.path().join("report.json")).unwrap());
}

#[test]
fn report_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("x.json"), "{\"not\": \"a report\"}").unwrap();
    assert_eq!(mcas(dir.path(), &["report", "--in", "x.json", "--format", "csv"]).status.code(), Some(1));
    assert_eq!(mcas(dir.path(), &["report", "--in", "absent.json"]).status.code(), Some(1));
    assert_eq!(mcas(dir.path(), &["report", "--in", "x.json", "--format", "pdf"]).status.code(), Some(1));
}

#[test]
fn validate_complete_and_incomplete_trees() {
    let (dir, d) = fixture(10);
    let o = mcas(dir.path(), &["validate", DATA[0], DATA[1], DATA[2], DATA[3]]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("ok:"));

    let target = &d.manifest.targets[0].id;
    std::fs::remove_file(dir.path().join("images").join(target).join("0001.png")).unwrap();
    let o = mcas(dir.path(), &["validate", DATA[0], DATA[1]]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    let missing: Vec<&str> = out.lines().filter(|l| l.contains("MissingImage")).collect();
    assert_eq!(missing, [format!("error: MissingImage {target}/0001").as_str()]);
}

#[test]
fn validate_reports_missing_embeddings() {
    let (dir, d) = fixture(11);
    let mut partial = EmbeddingStore::in_memory();
    for r in d.store.records().skip(1) {
        partial.insert(r.clone()).unwrap();
    }
    partial.write_to(&dir.path().join("store.jsonl")).unwrap();
    let o = mcas(dir.path(), &["validate", DATA[0], DATA[1], DATA[2], DATA[3]]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout(&o).lines().filter(|l| l.contains("MissingEmbedding")).count(), 1);
}
