use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

fn pumpscope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pumpscope"))
        .args(args)
        .env_remove("PUMPSCOPE_BASE_URL")
        .env("RUST_LOG", "warn")
        .output()
        .expect("run pumpscope")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn synth(dir: &Path, n: &str, mix: &str, seed: &str) -> Output {
    pumpscope(&["synth", "--n", n, "--mix", mix, "--seed", seed, "--out-dir", p(dir), "--jobs", "2"])
}

fn analyze(corpus: &Path, out: &Path) -> Output {
    pumpscope(&[
        "analyze",
        "--manifest-path",
        p(&corpus.join("manifest.csv")),
        "--data-dir",
        p(&corpus.join("candles")),
        "--output-dir",
        p(out),
    ])
}

#[test]
fn synth_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(synth(a.path(), "10", "0.693,0.307,0", "1").status.code(), Some(0));
    assert_eq!(synth(b.path(), "10", "0.693,0.307,0", "1").status.code(), Some(0));
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    assert_eq!(ta.len(), 12);
    assert_eq!(ta, tb);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = synth(dir.path(), "10", "0.5,0.3,0.1", "1");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sum to 0.9"));
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none());

    let out = analyze(&dir.path().join("nowhere"), &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    let out = pumpscope(&["analyze", "--manifest-path", "m.csv", "--data-dir", ".", "--output-dir", "o", "--vwap-price-field", "median"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analyze_reports_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    assert_eq!(synth(&corpus, "8", "1,0,0", "3").status.code(), Some(0));
    let out = analyze(&corpus, &dir.path().join("r1"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r1 = dir.path().join("r1");
    assert_eq!(fs::read_to_string(r1.join("prevalence.csv")).unwrap().lines().nth(1), Some("8,8,0,100.0,0.0"));
    assert_eq!(fs::read_to_string(r1.join("profits_aggregate.csv")).unwrap().lines().count(), 5);
    assert_eq!(fs::read_to_string(r1.join("profits_per_event.csv")).unwrap().lines().count(), 1 + 8 * 4);
    assert!(out.stdout.is_empty());

    let victim = fs::read_dir(corpus.join("candles")).unwrap().next().unwrap().unwrap().path();
    fs::remove_file(&victim).unwrap();
    let out = analyze(&corpus, &dir.path().join("r2"));
    assert_eq!(out.status.code(), Some(1));
    let skips = fs::read_to_string(dir.path().join("r2").join("skips.csv")).unwrap();
    assert_eq!(skips.lines().count(), 2);
    assert!(skips.contains(",load,missing data file"), "{skips}");
    assert_eq!(fs::read_to_string(dir.path().join("r2").join("prevalence.csv")).unwrap().lines().nth(1), Some("7,7,0,100.0,0.0"));
}

#[test]
fn dormant_corpus_has_no_profits() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    assert_eq!(synth(&corpus, "5", "0,0,1", "4").status.code(), Some(0));
    let out = analyze(&corpus, &dir.path().join("r"));
    assert_eq!(out.status.code(), Some(1));
    let r = dir.path().join("r");
    assert_eq!(fs::read_to_string(r.join("profits_aggregate.csv")).unwrap().lines().count(), 1);
    assert_eq!(fs::read_to_string(r.join("span_stats.csv")).unwrap().lines().count(), 1);
    let skips = fs::read_to_string(r.join("skips.csv")).unwrap();
    assert_eq!(skips.lines().skip(1).filter(|l| l.ends_with(",profit,no accumulation")).count(), 5);
}

#[test]
fn analyze_is_byte_identical_across_runs_and_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    assert_eq!(synth(&corpus, "12", "0.5,0.25,0.25", "9").status.code(), Some(0));
    let run = |name: &str, jobs: &str| {
        pumpscope(&[
            "analyze",
            "--manifest-path",
            p(&corpus.join("manifest.csv")),
            "--data-dir",
            p(&corpus.join("candles")),
            "--output-dir",
            p(&dir.path().join(name)),
            "--jobs",
            jobs,
        ]);
        tree(&dir.path().join(name))
    };
    let a = run("a", "1");
    assert_eq!(a.len(), 9);
    assert_eq!(a, run("b", "4"));
}

/// Serves a flat candle for every minute of every requested range.
struct Stub {
    url: String,
    hits: Arc<AtomicUsize>,
    server: Arc<tiny_http::Server>,
    handle: Option<JoinHandle<()>>,
}

fn param(url: &str, name: &str) -> i64 {
    let q = url.split_once('?').unwrap().1;
    q.split('&').find_map(|kv| kv.strip_prefix(name)?.strip_prefix('=')?.parse().ok()).unwrap()
}

impl Stub {
    fn start() -> Stub {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").unwrap());
        let url = format!("http://{}", server.server_addr().to_ip().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let handle = {
            let (server, hits) = (Arc::clone(&server), Arc::clone(&hits));
            std::thread::spawn(move || {
                for req in server.incoming_requests() {
                    hits.fetch_add(1, Ordering::SeqCst);
                    let (start, end, limit) = (param(req.url(), "startTime"), param(req.url(), "endTime"), param(req.url(), "limit"));
                    let rows: Vec<String> = (start..=end)
                        .step_by(60_000)
                        .take(limit as usize)
                        .map(|t| format!("[\"1\",\"1\",\"1\",\"1\",\"0\",\"2\",\"0\",\"0\",1,{t},\"1\",\"MINUTE_1\",{t},{}]", t + 59_999))
                        .collect();
                    let _ = req.respond(tiny_http::Response::from_string(format!("[{}]", rows.join(","))));
                }
            })
        };
        Stub { url, hits, server, handle: Some(handle) }
    }
}

impl Drop for Stub {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn manifest(dir: &Path) -> PathBuf {
    let path = dir.join("manifest.csv");
    fs::write(
        &path,
        "symbol,target_date\nAAA_BTC,2018-03-01T12:00:00Z\nBBB_BTC,2018-03-05T18:30:00Z\nCCC_USDT,1530000000000\n",
    )
    .unwrap();
    path
}

fn fetch(manifest: &Path, out: &Path, extra: &[&str], env_url: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pumpscope"));
    cmd.args(["fetch", "--manifest-path", p(manifest), "--out-dir", p(out), "--requests-per-second", "500"])
        .args(extra)
        .env("RUST_LOG", "warn")
        .env_remove("PUMPSCOPE_BASE_URL");
    if let Some(url) = env_url {
        cmd.env("PUMPSCOPE_BASE_URL", url);
    }
    cmd.output().unwrap()
}

#[test]
fn fetch_writes_one_file_per_event_and_resumes() {
    let stub = Stub::start();
    let dir = tempfile::tempdir().unwrap();
    let m = manifest(dir.path());
    let out = dir.path().join("data");
    let res = fetch(&m, &out, &[], Some(&stub.url));
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let files = tree(&out);
    assert_eq!(files.len(), 3);
    for body in files.values() {
        assert_eq!(String::from_utf8_lossy(body).lines().count(), 1 + 8641);
    }
    let first_hits = stub.hits.load(Ordering::SeqCst);
    assert!(first_hits >= 3 * 18);

    let res = fetch(&m, &out, &["--base-url", &stub.url], None);
    assert_eq!(res.status.code(), Some(0));
    assert_eq!(stub.hits.load(Ordering::SeqCst), first_hits);
    assert_eq!(tree(&out), files);

    let report = dir.path().join("report");
    let res = pumpscope(&["analyze", "--manifest-path", p(&m), "--data-dir", p(&out), "--output-dir", p(&report)]);
    assert_eq!(res.status.code(), Some(0));
    let summary = fs::read_to_string(report.join("summary.json")).unwrap();
    assert!(summary.contains("\"mixed_quote_aggregation\": true"), "{summary}");
}

#[test]
fn unreachable_host_exits_3_without_partial_files() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let dir = tempfile::tempdir().unwrap();
    let m = manifest(dir.path());
    let out = dir.path().join("data");
    let url = format!("http://{addr}");
    let res = fetch(&m, &out, &["--base-url", &url, "--retry-limit", "1", "--retry-backoff-ms", "1"], None);
    assert_eq!(res.status.code(), Some(3));
    assert!(tree(&out).is_empty());
}
