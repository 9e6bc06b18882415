//! Output files are collected in memory and only written once a command has
//! finished computing, followed by a manifest listing their hashes.

use std::fs;
use std::path::Path;

use hsp_core::io::{write_pgm, MatrixFile, Table};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

#[derive(Debug, Serialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub schema_version: u32,
    pub command: &'a str,
    pub seed: u64,
    pub config: &'a C,
    pub artifacts: Vec<ArtifactEntry>,
}

impl Artifacts {
    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        debug_assert!(
            self.files.iter().all(|(n, _)| n != name),
            "duplicate artifact {name}"
        );
        self.files.push((name.to_string(), bytes));
    }

    pub fn extend(&mut self, other: Artifacts) {
        for (n, b) in other.files {
            self.add(&n, b);
        }
    }

    pub fn table(&mut self, name: &str, t: &Table) -> CliResult<()> {
        let mut buf = Vec::new();
        t.write(&mut buf).map_err(CliError::core(name))?;
        self.add(name, buf);
        Ok(())
    }

    pub fn matrix(&mut self, name: &str, m: &MatrixFile) -> CliResult<()> {
        let mut buf = Vec::new();
        m.write(&mut buf).map_err(CliError::core(name))?;
        self.add(name, buf);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut s = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Config(format!("cannot serialize {name}: {e}")))?;
        s.push('\n');
        self.add(name, s.into_bytes());
        Ok(())
    }

    /// Square render plus its `.json` scale sidecar.
    pub fn render(
        &mut self,
        stem: &str,
        values: &[f64],
        n: usize,
        description: &str,
    ) -> CliResult<()> {
        let mut buf = Vec::new();
        let scale = write_pgm(&mut buf, values, n, n, description).map_err(CliError::core(stem))?;
        self.add(&format!("{stem}.pgm"), buf);
        self.add(&format!("{stem}.pgm.json"), scale.to_json().into_bytes());
        Ok(())
    }

    /// Writes every file, then `<command>.manifest.json`.
    pub fn write<C: Serialize>(
        self,
        dir: &Path,
        command: &str,
        seed: u64,
        config: &C,
    ) -> CliResult<()> {
        fs::create_dir_all(dir)
            .map_err(CliError::io(format!("cannot create {}", dir.display())))?;
        let mut entries = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            fs::write(&path, bytes)
                .map_err(CliError::io(format!("cannot write {}", path.display())))?;
            entries.push(ArtifactEntry {
                path: name.clone(),
                sha256: hex::encode(Sha256::digest(bytes)),
                bytes: bytes.len(),
            });
        }
        let manifest = Manifest {
            schema_version: crate::config::SCHEMA_VERSION,
            command,
            seed,
            config,
            artifacts: entries,
        };
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Config(format!("cannot serialize manifest: {e}")))?;
        text.push('\n');
        let path = dir.join(format!("{command}.manifest.json"));
        fs::write(&path, text).map_err(CliError::io(format!("cannot write {}", path.display())))
    }
}
