use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct FileEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub scenario: String,
    pub kind: String,
    pub seed: u64,
    pub files: Vec<FileEntry>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Artifact directory. Files are recorded as they are written so that a
/// failed run can take them back.
pub struct Output {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<FileEntry>,
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).map_err(io_error(dir))?;
        Ok(Self { dir: dir.to_path_buf(), created_dir, written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, file: &str, contents: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(file);
        fs::write(&path, contents).map_err(io_error(&path))?;
        self.written.push(FileEntry { file: file.to_string(), sha256: hex(&Sha256::digest(contents)), bytes: contents.len() });
        Ok(())
    }

    pub fn finish(mut self, scenario: &str, kind: &str, seed: u64) -> Result<Manifest, CliError> {
        let manifest = Manifest { scenario: scenario.to_string(), kind: kind.to_string(), seed, files: std::mem::take(&mut self.written) };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        let path = self.dir.join(MANIFEST);
        if let Err(e) = fs::write(&path, text) {
            self.written = manifest.files;
            self.discard();
            return Err(io_error(&path)(e));
        }
        Ok(manifest)
    }

    /// Removes everything this run wrote, and the directory if the run made it.
    pub fn discard(self) {
        for f in &self.written {
            let _ = fs::remove_file(self.dir.join(&f.file));
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashes_and_discard() {
        let root = tempfile::tempdir().unwrap();
        let dir = root.path().join("run");
        let mut out = Output::create(&dir).unwrap();
        out.write("a.csv", b"abc").unwrap();
        assert_eq!(out.written[0].sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        out.discard();
        assert!(!dir.exists());

        let mut out = Output::create(&dir).unwrap();
        out.write("a.csv", b"abc").unwrap();
        let m = out.finish("s", "fp-run", 1).unwrap();
        assert_eq!(m.files.len(), 1);
        assert!(dir.join(MANIFEST).exists());
    }
}
