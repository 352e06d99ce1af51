#![allow(dead_code)]

use std::io::{Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use clap::Parser;
use foodrec_cli::{run, Cli, Io};
use foodrec_server::testkit::{png, sample_foods, TestApp, PARTICIPANT_TOKEN};
use foodrec_server::{AnalysisMode, RunningServer};

pub struct Output {
    pub code: u8,
    pub out: String,
    pub err: String,
}

/// Runs `mfr` in-process against `server` with the participant token.
pub fn mfr(server: &str, state_dir: &Path, args: &[&str], stdin: &str) -> Output {
    let mut argv: Vec<String> = vec![
        "mfr".into(),
        "--server".into(),
        server.into(),
        "--token".into(),
        PARTICIPANT_TOKEN.into(),
        "--state-dir".into(),
        state_dir.display().to_string(),
    ];
    argv.extend(args.iter().map(|s| s.to_string()));
    let cli = Cli::try_parse_from(&argv).unwrap_or_else(|e| panic!("{e}"));
    let mut input = stdin.as_bytes();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(
        cli,
        &mut Io {
            stdin: &mut input,
            out: &mut out,
            err: &mut err,
        },
    );
    Output {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

/// An in-memory server on a real socket.
pub struct Server {
    pub app: TestApp,
    pub running: RunningServer,
}

impl Server {
    pub fn grid() -> Server {
        Self::with(
            Box::new(foodrec_core::GridStub::new()),
            AnalysisMode::Inline,
        )
    }

    pub fn with(analyzer: Box<dyn foodrec_core::Analyzer>, mode: AnalysisMode) -> Server {
        let app = TestApp::new(sample_foods(), analyzer, mode);
        let running = RunningServer::start(app.router.clone()).unwrap();
        Server { app, running }
    }

    pub fn url(&self) -> String {
        self.running.url()
    }

    pub fn occasions(&self) -> u64 {
        self.app.service.records().count_occasions().unwrap()
    }
}

/// Writes a before/after PNG pair named `<stem>-before.png` and
/// `<stem>-after.png`.
pub fn image_pair(dir: &Path, stem: &str, seed: u32) -> (PathBuf, PathBuf) {
    let before = dir.join(format!("{stem}-before.png"));
    let after = dir.join(format!("{stem}-after.png"));
    std::fs::write(&before, png(200, 100, seed)).unwrap();
    std::fs::write(&after, png(200, 100, seed + 1)).unwrap();
    (before, after)
}

pub fn capture(server: &str, state: &Path, pair: &(PathBuf, PathBuf)) -> Output {
    let out = mfr(
        server,
        state,
        &[
            "--participant",
            "p1",
            "--study",
            "study-1",
            "capture",
            pair.0.to_str().unwrap(),
            pair.1.to_str().unwrap(),
            "--time",
            "2021-05-01T12:30:00Z",
        ],
        "",
    );
    assert_eq!(out.code, 0, "{}", out.err);
    out
}

/// Occasion ids printed by `sync`, in order.
pub fn synced_ids(out: &Output) -> Vec<String> {
    out.out
        .lines()
        .filter_map(|l| l.split(" -> occasion ").nth(1))
        .map(|rest| rest.split_whitespace().next().unwrap().to_owned())
        .collect()
}

/// TCP proxy that can cut the connection carrying an upload after the
/// request has reached the server but before the response reaches the
/// client.
pub struct FaultProxy {
    addr: SocketAddr,
    drops: Arc<AtomicUsize>,
    dropped: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

const UPLOAD_LINE: &[u8] = b"POST /api/v1/occasions ";

impl FaultProxy {
    pub fn start(upstream: SocketAddr) -> FaultProxy {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let drops = Arc::new(AtomicUsize::new(0));
        let dropped = Arc::new(AtomicUsize::new(0));
        let stop = Arc::new(AtomicBool::new(false));
        let thread = {
            let (drops, dropped, stop) = (drops.clone(), dropped.clone(), stop.clone());
            std::thread::spawn(move || {
                for client in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(client) = client else { continue };
                    let Ok(server) = TcpStream::connect(upstream) else {
                        continue;
                    };
                    let (drops, dropped) = (drops.clone(), dropped.clone());
                    std::thread::spawn(move || relay(client, server, drops, dropped));
                }
            })
        };
        FaultProxy {
            addr,
            drops,
            dropped,
            stop,
            thread: Some(thread),
        }
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Cut the next `n` upload responses.
    pub fn drop_uploads(&self, n: usize) {
        self.drops.store(n, Ordering::SeqCst);
    }

    pub fn dropped(&self) -> usize {
        self.dropped.load(Ordering::SeqCst)
    }
}

impl Drop for FaultProxy {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn relay(client: TcpStream, server: TcpStream, drops: Arc<AtomicUsize>, dropped: Arc<AtomicUsize>) {
    let doomed = Arc::new(AtomicBool::new(false));
    let upstream = {
        let (mut from, mut to) = (client.try_clone().unwrap(), server.try_clone().unwrap());
        let doomed = doomed.clone();
        std::thread::spawn(move || {
            let mut buf = [0u8; 16 * 1024];
            let mut tail: Vec<u8> = Vec::new();
            loop {
                let n = match from.read(&mut buf) {
                    Ok(0) | Err(_) => break,
                    Ok(n) => n,
                };
                tail.extend_from_slice(&buf[..n]);
                if contains(&tail, UPLOAD_LINE) {
                    let claimed = drops
                        .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |d| d.checked_sub(1))
                        .is_ok();
                    if claimed {
                        doomed.store(true, Ordering::SeqCst);
                    }
                    tail.clear();
                }
                let keep = tail.len().saturating_sub(UPLOAD_LINE.len());
                tail.drain(..keep);
                if to.write_all(&buf[..n]).is_err() {
                    break;
                }
            }
            let _ = to.shutdown(Shutdown::Write);
        })
    };
    let (mut from, mut to) = (server, client);
    let mut buf = [0u8; 16 * 1024];
    loop {
        let n = match from.read(&mut buf) {
            Ok(0) | Err(_) => break,
            Ok(n) => n,
        };
        if doomed.load(Ordering::SeqCst) {
            dropped.fetch_add(1, Ordering::SeqCst);
            break;
        }
        if to.write_all(&buf[..n]).is_err() {
            break;
        }
    }
    let _ = to.shutdown(Shutdown::Both);
    let _ = from.shutdown(Shutdown::Both);
    let _ = upstream.join();
}

fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    haystack.windows(needle.len()).any(|w| w == needle)
}
