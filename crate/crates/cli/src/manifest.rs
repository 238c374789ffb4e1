use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::failure::Failure;
use crate::jobs::{execute, Job};

/// Record of one run: the resolved job plus digests of what went in and out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(flatten)]
    pub job: Job,
    pub seed: Option<u64>,
    pub version: String,
    pub workers: Option<usize>,
    /// Absolute input path to SHA-256 hex digest.
    pub inputs: BTreeMap<String, String>,
    /// Output file name, relative to the run directory, to SHA-256 hex digest.
    pub outputs: BTreeMap<String, String>,
    pub started_at: String,
    pub finished_at: String,
}

impl RunManifest {
    pub fn file_name(job: &Job) -> String {
        format!("{}.manifest.json", job.name())
    }

    pub fn read(path: &Path) -> Result<Self, Failure> {
        let file = File::open(path).map_err(|e| Failure::Usage(format!("cannot open manifest {}: {e}", path.display())))?;
        serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Failure::Usage(format!("{} is not a run manifest: {e}", path.display())))
    }
}

pub fn sha256_file(path: &Path) -> Result<String, Failure> {
    let mut file = File::open(path).map_err(|e| Failure::Runtime(format!("cannot read {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Runs `job` inside `out`, then writes its manifest there.
pub fn run_job(job: &Job, out: &Path, workers: Option<usize>) -> Result<RunManifest, Failure> {
    std::fs::create_dir_all(out).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", out.display())))?;
    let mut inputs = BTreeMap::new();
    for p in job.inputs() {
        inputs.insert(p.display().to_string(), sha256_file(p)?);
    }
    let started_at = now();
    let files = match workers {
        Some(k) => cmm_core::experiments::with_workers(k, || execute(job, out))??,
        None => execute(job, out)?,
    };
    let finished_at = now();
    let mut outputs = BTreeMap::new();
    for f in files {
        let digest = sha256_file(&out.join(&f))?;
        outputs.insert(f, digest);
    }
    let manifest = RunManifest {
        job: job.clone(),
        seed: job.seed(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        workers,
        inputs,
        outputs,
        started_at,
        finished_at,
    };
    let path = out.join(RunManifest::file_name(job));
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    eprintln!("manifest: {}", path.display());
    Ok(manifest)
}

/// Re-runs a manifest into `out` and compares every output digest.
pub fn replay(manifest_path: &Path, out: Option<PathBuf>, workers: Option<usize>) -> Result<(), Failure> {
    let original = RunManifest::read(manifest_path)?;
    for (path, digest) in &original.inputs {
        let now = sha256_file(Path::new(path))?;
        if &now != digest {
            return Err(Failure::Runtime(format!("input {path} changed since the recorded run")));
        }
    }
    let out = out.unwrap_or_else(|| {
        manifest_path
            .parent()
            .unwrap_or(Path::new("."))
            .join(format!("replay-{}", original.job.name()))
    });
    let rerun = run_job(&original.job, &out, workers.or(original.workers))?;
    let mismatched: Vec<&String> = original
        .outputs
        .iter()
        .filter(|(name, digest)| rerun.outputs.get(*name) != Some(*digest))
        .map(|(name, _)| name)
        .collect();
    if !mismatched.is_empty() || rerun.outputs.len() != original.outputs.len() {
        return Err(Failure::Runtime(format!(
            "replay differs from the recorded run: {}",
            mismatched.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        )));
    }
    println!("replay identical: {} outputs in {}", rerun.outputs.len(), out.display());
    Ok(())
}
