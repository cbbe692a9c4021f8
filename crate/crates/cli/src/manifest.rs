//! Run manifests: a small JSON sidecar written next to every output file so
//! a result can be traced back to the exact invocation that produced it.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    schema_version: u32,
    tool_version: &'a str,
    command_line: &'a [String],
    /// Input path → SHA-256 of the file contents, hex-encoded.
    input_hashes: &'a BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tokenizer_fingerprint: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    duration_seconds: f64,
    thread_count: usize,
}

/// Accumulates provenance while a subcommand runs, then writes one
/// `<output>.manifest.json` per output file.
pub struct ManifestBuilder {
    started: Instant,
    command_line: Vec<String>,
    input_hashes: BTreeMap<String, String>,
    tokenizer_fingerprint: Option<String>,
    seed: Option<u64>,
}

impl ManifestBuilder {
    pub fn start() -> Self {
        Self {
            started: Instant::now(),
            command_line: std::env::args().collect(),
            input_hashes: BTreeMap::new(),
            tokenizer_fingerprint: None,
            seed: None,
        }
    }

    /// Hashes one input file; call once per distinct input.
    pub fn hash_input(&mut self, path: &Path) -> anyhow::Result<()> {
        let key = path.display().to_string();
        if self.input_hashes.contains_key(&key) {
            return Ok(());
        }
        let digest = sha256_file(path)
            .with_context(|| format!("hashing input {}", path.display()))?;
        self.input_hashes.insert(key, digest);
        Ok(())
    }

    pub fn hash_inputs<P: AsRef<Path>>(&mut self, paths: &[P]) -> anyhow::Result<()> {
        for path in paths {
            self.hash_input(path.as_ref())?;
        }
        Ok(())
    }

    pub fn set_fingerprint(&mut self, fingerprint: &str) {
        self.tokenizer_fingerprint = Some(fingerprint.to_string());
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    /// Writes the manifest as `<output>.manifest.json` beside the output.
    pub fn write_beside(&self, output: &Path) -> anyhow::Result<()> {
        let path = manifest_path(output);
        let manifest = RunManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION"),
            command_line: &self.command_line,
            input_hashes: &self.input_hashes,
            tokenizer_fingerprint: self.tokenizer_fingerprint.as_deref(),
            seed: self.seed,
            duration_seconds: self.started.elapsed().as_secs_f64(),
            thread_count: rayon::current_num_threads(),
        };
        let mut file = File::create(&path)
            .with_context(|| format!("creating manifest {}", path.display()))?;
        serde_json::to_writer_pretty(&mut file, &manifest)?;
        file.write_all(b"\n")?;
        Ok(())
    }
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let file = File::open(path)?;
    let mut reader = BufReader::new(file);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = reader.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}
