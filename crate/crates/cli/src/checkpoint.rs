//! Resumable accumulation over `[1, x]`.
//!
//! A checkpoint is canonical JSON holding the schema version, a SHA-256
//! fingerprint of every parameter that affects the result, the last index
//! folded in, and the partial accumulators as decimal strings.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u64 = 1;

/// Parameters that identify a run; worker count, chunk size and output
/// options are deliberately left out.
pub fn fingerprint(command: &str, params: &[(&str, String)]) -> String {
    let mut h = Sha256::new();
    h.update(format!("cannonball-checkpoint/{SCHEMA_VERSION}\n{command}\n"));
    for (k, v) in params {
        h.update(format!("{k}={v}\n"));
    }
    hex::encode(h.finalize())
}

pub struct Plan {
    pub path: Option<PathBuf>,
    pub every: u64,
    /// Stop without output once this index has been folded in.
    pub stop_after: Option<u64>,
}

pub enum Outcome<A> {
    Done(A),
    Stopped { last_n: u64 },
}

/// Accumulators saved as named decimal strings.
pub type Saved = Vec<(String, String)>;

pub struct Resumable<'a, A> {
    pub command: &'a str,
    pub fingerprint: String,
    pub x: u64,
    pub init: A,
    pub save: &'a dyn Fn(&A) -> Saved,
    pub load: &'a dyn Fn(&Saved) -> Result<A>,
}

struct Meta<'a> {
    command: &'a str,
    fingerprint: &'a str,
    x: u64,
}

pub fn run<A>(job: Resumable<'_, A>, plan: &Plan, mut step: impl FnMut(&mut A, u64, u64) -> Result<()>) -> Result<Outcome<A>> {
    let Resumable { command, fingerprint, x, init, save, load } = job;
    let meta = Meta { command, fingerprint: &fingerprint, x };
    let (mut acc, mut next) = match plan.path.as_deref().filter(|p| p.exists()) {
        Some(path) => {
            let (last_n, saved) = read(path, &meta)?;
            (load(&saved)?, last_n + 1)
        }
        None => (init, 1),
    };
    let every = plan.every.max(1);
    while next <= x {
        let end = next.saturating_add(every - 1).min(x);
        step(&mut acc, next, end)?;
        if let Some(path) = &plan.path {
            write(path, &meta, end, &save(&acc))?;
        }
        next = end + 1;
        if let Some(stop) = plan.stop_after {
            if end >= stop && end < x {
                return Ok(Outcome::Stopped { last_n: end });
            }
        }
    }
    if let Some(path) = &plan.path {
        if path.exists() {
            fs::remove_file(path).with_context(|| format!("cannot remove {}", path.display()))?;
        }
    }
    Ok(Outcome::Done(acc))
}

fn read(path: &Path, job: &Meta<'_>) -> Result<(u64, Saved)> {
    let raw = fs::read(path).with_context(|| format!("cannot read checkpoint {}", path.display()))?;
    let v: Value = serde_json::from_slice(&raw).with_context(|| format!("checkpoint {} is not valid JSON", path.display()))?;
    let version = v["schema_version"].as_u64();
    if version != Some(SCHEMA_VERSION) {
        bail!("checkpoint {} has schema version {:?}, expected {SCHEMA_VERSION}; refusing to resume", path.display(), version);
    }
    if v["command"].as_str() != Some(job.command) || v["fingerprint"].as_str() != Some(job.fingerprint) {
        bail!("checkpoint {} was written for a different configuration; refusing to resume", path.display());
    }
    let last_n = v["last_n"].as_str().and_then(|s| s.parse::<u64>().ok()).context("checkpoint has no valid last_n")?;
    if last_n > job.x {
        bail!("checkpoint {} is past the requested range", path.display());
    }
    let accs = v["accumulators"].as_object().context("checkpoint has no accumulators")?;
    let saved = accs
        .iter()
        .map(|(k, v)| Ok((k.clone(), v.as_str().context("accumulator is not a decimal string")?.to_string())))
        .collect::<Result<Saved>>()?;
    Ok((last_n, saved))
}

fn write(path: &Path, job: &Meta<'_>, last_n: u64, saved: &Saved) -> Result<()> {
    let accs: Map<String, Value> = saved.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": job.command,
        "fingerprint": job.fingerprint,
        "x": job.x.to_string(),
        "last_n": last_n.to_string(),
        "accumulators": accs,
    });
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, serde_json::to_vec_pretty(&doc)?).with_context(|| format!("cannot write {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("cannot move checkpoint into {}", path.display()))?;
    Ok(())
}

/// Looks up a saved accumulator by name.
pub fn field<'a>(saved: &'a Saved, name: &str) -> Result<&'a str> {
    saved.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str()).with_context(|| format!("checkpoint lacks {name}"))
}
