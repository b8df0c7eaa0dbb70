//! Results directory: one subdirectory per verified candidate plus a run log.

use super::{CampaignLog, Candidate, Outcome};
use serde::Serialize;
use std::fs;
use std::io;
use std::path::Path;

#[derive(Debug, Serialize)]
struct CandidateLog<'a> {
    candidate: usize,
    campaign: usize,
    tests: &'a [String],
    lineage: Vec<&'a str>,
    campaigns: Vec<&'a CampaignLog>,
}

#[derive(Debug, Serialize)]
struct RunLog<'a> {
    command: &'a str,
    input: &'a str,
    seed: u64,
    outcome: Outcome,
    campaigns: usize,
    candidates: Vec<String>,
    log: &'a [CampaignLog],
}

pub struct RunInfo<'a> {
    pub command: &'a str,
    pub input: &'a str,
    pub seed: u64,
    pub outcome: Outcome,
    pub campaigns: usize,
}

/// Writes `candidate-NNN/` directories and `run.json` under `dir`, first
/// removing those entries from an earlier run.
pub fn write_results(
    dir: &Path,
    file_name: &str,
    verified: &[(Candidate, Vec<String>)],
    log: &[CampaignLog],
    info: &RunInfo<'_>,
) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().to_string();
        if name.starts_with("candidate-") && entry.path().is_dir() {
            fs::remove_dir_all(entry.path())?;
        }
    }
    let mut names = Vec::new();
    for (i, (c, tests)) in verified.iter().enumerate() {
        let name = format!("candidate-{:03}", i + 1);
        let sub = dir.join(&name);
        fs::create_dir_all(&sub)?;
        fs::write(sub.join(file_name), &c.source)?;
        let mut transcript = String::new();
        for r in &c.lineage {
            transcript.push_str(&format!("## {} campaign {} by {}\n\n{}\n", r.id, r.campaign, r.synthesizer, r.text));
        }
        fs::write(sub.join("transcript.txt"), transcript)?;
        let campaigns: Vec<&CampaignLog> =
            log.iter().filter(|l| c.lineage.iter().any(|r| r.campaign == l.campaign)).collect();
        let cl = CandidateLog {
            candidate: i + 1,
            campaign: c.campaign,
            tests,
            lineage: c.lineage.iter().map(|r| r.id.as_str()).collect(),
            campaigns,
        };
        fs::write(sub.join("run.json"), to_json(&cl)?)?;
        names.push(name);
    }
    let run = RunLog {
        command: info.command,
        input: info.input,
        seed: info.seed,
        outcome: info.outcome,
        campaigns: info.campaigns,
        candidates: names,
        log,
    };
    fs::write(dir.join("run.json"), to_json(&run)?)
}

fn to_json<T: Serialize>(v: &T) -> io::Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(io::Error::other)?;
    s.push('\n');
    Ok(s)
}
