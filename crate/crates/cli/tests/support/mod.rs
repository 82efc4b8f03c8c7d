#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ea-refine"));
    cmd.env_remove("RUST_LOG").env_remove("EA_REFINE_API_KEY");
    cmd
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn wikidata_fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/wikidata")
}

pub fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), target).unwrap();
        }
    }
}

/// Copy of the e2e fixture (corpus, mock script, entity cache, config) in a
/// fresh directory.
pub fn e2e_workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&fixtures().join("e2e"), dir.path());
    dir
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&read(path)).unwrap()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes a one-locale corpus of `n` instances and predictions where the first
/// `hits` contain the reference mention.
pub fn planted_meta(dir: &Path, n: usize, hits: usize) -> (PathBuf, PathBuf) {
    let mut corpus = String::new();
    let mut preds = String::new();
    for i in 0..n {
        let mention = format!("개체{i}");
        corpus.push_str(
            &serde_json::json!({
                "id": format!("ko-{i}"),
                "source_locale": "en",
                "target_locale": "ko",
                "source": format!("Where is entity {i}?"),
                "wikidata_id": format!("Q{}", 900_000 + i),
                "targets": [{"translation": format!("{mention}은 어디에 있나요?"), "mention": mention}],
            })
            .to_string(),
        );
        corpus.push('\n');
        let prediction = if i < hits {
            format!("{mention}은 어디에 있나요?")
        } else {
            format!("엔티티 {i}은 어디에 있나요?")
        };
        preds.push_str(
            &serde_json::json!({"id": format!("ko-{i}"), "prediction": prediction}).to_string(),
        );
        preds.push('\n');
    }
    let corpus_path = dir.join("corpus.jsonl");
    let preds_path = dir.join("predictions.jsonl");
    std::fs::write(&corpus_path, corpus).unwrap();
    std::fs::write(&preds_path, preds).unwrap();
    (corpus_path, preds_path)
}

/// Minimal scoring service answering every pair with `score`.
pub fn stub_scorer(score: f64) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            if reader.read_line(&mut request_line).is_err() {
                continue;
            }
            let mut length = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        length = v.trim().parse().unwrap_or(0);
                    }
                }
            }
            let mut body = vec![0; length];
            let _ = reader.read_exact(&mut body);
            let reply = if request_line.starts_with("POST /score") {
                let request: serde_json::Value = serde_json::from_slice(&body).unwrap_or_default();
                let n = request["pairs"].as_array().map_or(0, |a| a.len());
                serde_json::json!({ "scores": vec![score; n] }).to_string()
            } else {
                r#"{"status":"ok"}"#.to_string()
            };
            let _ = write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                reply.len(),
                reply
            );
        }
    });
    format!("http://{addr}")
}
