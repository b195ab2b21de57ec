// Serve a small cube over HTTP and query it: GET /meta, POST /policy and
// POST /preview, all against an ephemeral local port.

use std::io::{Read, Write};
use std::net::TcpStream;
use std::sync::Arc;

use asr::service::router;
use asr_core::{solve, ExerciseSchedule, GridSpec, MarketState, PolicyEngine, RunConfig, SolverOptions, VolumeCurve};
use serde_json::{json, Value};

fn request(addr: std::net::SocketAddr, method: &str, path: &str, body: &str) -> std::io::Result<(u16, Value)> {
    let mut stream = TcpStream::connect(addr)?;
    write!(
        stream,
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    let mut raw = String::new();
    stream.read_to_string(&mut raw)?;
    let status = raw.split_whitespace().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let payload = raw.split("\r\n\r\n").nth(1).unwrap_or("");
    Ok((status, serde_json::from_str(payload).unwrap_or(Value::Null)))
}

/// Returns the status codes of the three calls.
pub fn run_example() -> Result<Vec<u16>, Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::reference();
    cfg.contract.notional = 9.0e7;
    cfg.contract.days = 8;
    cfg.contract.exercise = ExerciseSchedule::Window { first: 3, last: 7 };
    cfg.market.volume = VolumeCurve::Constant(2.0e6);
    cfg.grid = GridSpec { n_q: 41, n_a: 9, q_max: 2.5e6, xi: 3.0, n_s: None, closed_form_terminal: false };
    let model = cfg.model()?;
    let engine = Arc::new(PolicyEngine::new(Arc::new(solve(&model, &cfg.grid, &SolverOptions::default())?))?);

    let rt = tokio::runtime::Runtime::new()?;
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let addr = listener.local_addr()?;
    rt.spawn(async move { axum::serve(listener, router(engine)).await });

    let mut codes = Vec::new();
    let (code, meta) = request(addr, "GET", "/meta", "")?;
    println!("/meta {code}: Pi = {}", meta["pi"]);
    codes.push(code);

    let query = json!({"n": 4, "s": 44.7, "q": 1.1e6, "a": 44.9}).to_string();
    let (code, ans) = request(addr, "POST", "/policy", &query)?;
    println!("/policy {code}: {ans}");
    codes.push(code);

    let preview = json!({"state": MarketState::initial(&model), "order": 2.0e5, "eps": 1.0}).to_string();
    let (code, ans) = request(addr, "POST", "/preview", &preview)?;
    println!("/preview {code}: {}", ans["state"]);
    codes.push(code);
    Ok(codes)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
