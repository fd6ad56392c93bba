use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
    pub files: Vec<ManifestEntry>,
}

/// Output directory that records a checksum for every file it writes.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<ManifestEntry>,
}

impl OutputDir {
    pub fn create(dir: impl AsRef<Path>) -> Result<Self> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(OutputDir {
            dir: dir.as_ref().to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)?;
        self.files.retain(|e| e.file != name);
        self.files.push(ManifestEntry {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<PathBuf> {
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    /// Writes `manifest.json` and the timestamped `run.log`.
    pub fn finish(mut self, command: &str, config_text: &str, seed: u64) -> Result<Manifest> {
        self.files.sort_by(|a, b| a.file.cmp(&b.file));
        let manifest = Manifest {
            command: command.to_string(),
            config_sha256: sha256_hex(config_text.as_bytes()),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            files: self.files.clone(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.dir.join("manifest.json"), text)?;
        let stamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        fs::write(
            self.dir.join("run.log"),
            format!("finished {command} at unix time {stamp}\n"),
        )?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_checksums() {
        let tmp = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(tmp.path().join("o")).unwrap();
        out.write_text("b.csv", "x\n").unwrap();
        out.write_json("a.json", &[1, 2]).unwrap();
        let m = out.finish("verify heat", "seed = 1", 1).unwrap();
        assert_eq!(m.files[0].file, "a.json");
        assert_eq!(m.files[1].sha256, sha256_hex(b"x\n"));
        let back: Manifest = serde_json::from_str(
            &fs::read_to_string(tmp.path().join("o/manifest.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(back, m);
    }
}
