//! External synthesizer: one JSON request line in, modification blocks out.

use super::{wire, Patch, RepairContext, SynthError, SynthRequest, Synthesizer};
use serde::Serialize;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

/// Runs `sh -c cmd` once per requested patch.
pub struct Subprocess {
    pub cmd: String,
    pub timeout: Duration,
}

#[derive(Serialize)]
struct Envelope<'a> {
    #[serde(flatten)]
    request: &'a SynthRequest,
    attempt: usize,
}

impl Subprocess {
    pub fn new(cmd: &str, timeout: Duration) -> Subprocess {
        Subprocess { cmd: cmd.to_string(), timeout }
    }

    /// Sends one request and returns the raw reply.
    pub fn call(&self, req: &SynthRequest, attempt: usize) -> Result<String, SynthError> {
        let mut line = serde_json::to_string(&Envelope { request: req, attempt })
            .map_err(|e| SynthError::PluginFailure(e.to_string()))?;
        line.push('\n');
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.cmd)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| SynthError::PluginFailure(format!("{}: {e}", self.cmd)))?;
        if let Some(mut stdin) = child.stdin.take() {
            let _ = stdin.write_all(line.as_bytes());
        }
        let mut stdout = child.stdout.take().ok_or_else(|| SynthError::PluginFailure("no stdout".into()))?;
        let reader = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = stdout.read_to_string(&mut s);
            s
        });
        let deadline = Instant::now() + self.timeout;
        let status = loop {
            match child.try_wait() {
                Ok(Some(s)) => break s,
                Ok(None) if Instant::now() >= deadline => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(SynthError::PluginFailure(format!("timed out after {:?}", self.timeout)));
                }
                Ok(None) => std::thread::sleep(Duration::from_millis(5)),
                Err(e) => return Err(SynthError::PluginFailure(e.to_string())),
            }
        };
        let reply = reader.join().unwrap_or_default();
        if !status.success() {
            return Err(SynthError::PluginFailure(format!("exit status {status}")));
        }
        Ok(reply)
    }
}

impl Synthesizer for Subprocess {
    fn id(&self) -> String {
        format!("cmd:{}", self.cmd)
    }

    fn propose(&mut self, req: &SynthRequest, ctx: &RepairContext<'_>) -> Result<Vec<Patch>, SynthError> {
        let mut out: Vec<Patch> = Vec::new();
        for attempt in 0..req.k {
            let reply = self.call(req, attempt)?;
            let hunks = wire::parse(&reply).map_err(|e| SynthError::PluginFailure(format!("malformed reply: {e}")))?;
            if hunks.is_empty() {
                continue;
            }
            let p = Patch { hunks, synthesizer_id: self.id(), campaign: ctx.campaign };
            if !out.contains(&p) {
                out.push(p);
            }
        }
        Ok(out)
    }
}
