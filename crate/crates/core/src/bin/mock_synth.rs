//! Stand-in synthesizer for protocol tests. Reads one request line and
//! answers with a modification block that replaces an untrusted `ensures`
//! clause by `ensures true`.
//!
//! Flags: `--echo DIR` saves each request as `DIR/request-<attempt>.json`;
//! `--malformed` drops the `<patched>` tag; `--hang` never answers.

use coevolve::synthesis::{wire, Hunk};
use std::io::Read;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut input = String::new();
    if std::io::stdin().read_to_string(&mut input).is_err() {
        std::process::exit(2);
    }
    let req: serde_json::Value = match serde_json::from_str(input.trim()) {
        Ok(v) => v,
        Err(_) => std::process::exit(2),
    };
    let attempt = req["attempt"].as_u64().unwrap_or(0) as usize;
    if let Some(i) = args.iter().position(|a| a == "--echo") {
        if let Some(dir) = args.get(i + 1) {
            let _ = std::fs::write(format!("{dir}/request-{attempt}.json"), &input);
        }
    }
    if args.iter().any(|a| a == "--hang") {
        std::thread::sleep(std::time::Duration::from_secs(3600));
    }
    let program = req["program"].as_str().unwrap_or_default();
    let file = req["filename"].as_str().unwrap_or_default();
    let open: Vec<&str> = program
        .lines()
        .filter(|l| l.trim_start().starts_with("ensures ") && !l.contains("{:trusted}"))
        .collect();
    if open.is_empty() {
        println!("No modification needed.");
        return;
    }
    let line = open[attempt % open.len()];
    let indent = &line[..line.len() - line.trim_start().len()];
    let hunk = Hunk {
        file: file.to_string(),
        original: line.to_string(),
        patched: format!("{indent}ensures true // pr {{:trusted}}"),
    };
    let mut reply = wire::render(&[hunk]);
    if args.iter().any(|a| a == "--malformed") {
        reply = reply.split("<patched>").next().unwrap_or_default().to_string();
    }
    print!("The clause cannot be established on every path.\n\n{reply}");
}
