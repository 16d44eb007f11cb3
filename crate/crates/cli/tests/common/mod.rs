#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ragsearch_cli::service::{serve_on, AppState, ServiceConfig};
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

/// Twenty queries over `mini_squad.json`, including an unmatched one and
/// one that analyzes to stopwords only.
pub const FIXTURE_QUERIES: [&str; 20] = [
    "In what country is Normandy located?",
    "Norse raiders from Denmark",
    "What were the Normans famed for?",
    "Catholic piety",
    "Romanesque architecture castles",
    "computational complexity theory",
    "inherent difficulty of problems",
    "time and storage resources",
    "P versus NP",
    "Millennium Prize Problems",
    "Amazon rainforest",
    "South America basin",
    "Eocene era rainforest",
    "Atlantic Ocean climate",
    "deforestation cattle ranching",
    "soy farming",
    "square kilometres",
    "Normans Amazon computation",
    "zebra quantum banjo",
    "the of and",
];

pub fn fixture_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mini_squad.json")
}

pub fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ragsearch"))
        .args(args)
        .env("RAGSEARCH_LOG", "error")
        .output()
        .expect("ragsearch binary runs")
}

/// Runs the CLI and returns stdout, panicking with stderr on failure.
pub fn cli_ok(args: &[&str]) -> String {
    let out = cli(args);
    assert!(
        out.status.success(),
        "ragsearch {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 stdout")
}

pub fn build_index(dir: &Path, input: &Path, extra: &[&str]) -> PathBuf {
    let out = dir.join("index.ragidx");
    let mut args = vec![
        "build",
        "--input",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    cli_ok(&args);
    out
}

pub struct TestServer {
    pub addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    handle: Option<JoinHandle<std::io::Result<()>>>,
}

impl TestServer {
    pub async fn start(index: &Path) -> TestServer {
        let state = AppState::load(ServiceConfig::new(index)).expect("index loads");
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        let (tx, rx) = oneshot::channel();
        let handle = tokio::spawn(serve_on(listener, state, async {
            let _ = rx.await;
        }));
        TestServer {
            addr,
            shutdown: Some(tx),
            handle: Some(handle),
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    pub async fn stop(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(handle) = self.handle.take() {
            handle.await.unwrap().unwrap();
        }
    }
}

pub fn search_url(server: &TestServer, query: &str, k: usize, scorer: &str) -> String {
    let mut url = reqwest::Url::parse(&server.url("/search")).unwrap();
    url.query_pairs_mut()
        .append_pair("q", query)
        .append_pair("k", &k.to_string())
        .append_pair("scorer", scorer);
    url.into()
}
