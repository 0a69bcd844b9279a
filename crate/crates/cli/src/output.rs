use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliResult, Tag};

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Output directory of one run. Every file written through it is listed
/// in the manifest with its content hash.
pub struct OutputDir {
    root: PathBuf,
    outputs: Vec<FileEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root).tag("output")?;
        Ok(Self {
            root: root.to_path_buf(),
            outputs: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        std::fs::write(self.root.join(name), bytes).tag("output")?;
        self.record(name, bytes);
        Ok(())
    }

    /// Lists a file some other writer already placed under the root.
    pub fn record_existing(&mut self, name: &str) -> CliResult<()> {
        let bytes = std::fs::read(self.root.join(name)).tag("output")?;
        self.record(name, &bytes);
        Ok(())
    }

    fn record(&mut self, name: &str, bytes: &[u8]) {
        self.outputs.retain(|e| e.path != name);
        self.outputs.push(FileEntry {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
    }

    /// Writes `manifest.json`. No timestamps or absolute paths, so
    /// identical runs give identical manifests.
    pub fn finish(
        mut self,
        command: &str,
        seed: Option<u64>,
        inputs: &[FileEntry],
        config: serde_json::Value,
    ) -> CliResult<()> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            tool: &'static str,
            version: &'static str,
            command: &'a str,
            seed: Option<u64>,
            config: serde_json::Value,
            inputs: &'a [FileEntry],
            outputs: &'a [FileEntry],
        }
        self.outputs.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config,
            inputs,
            outputs: &self.outputs,
        };
        let text = serde_json::to_string_pretty(&manifest).tag("output")? + "\n";
        std::fs::write(self.root.join("manifest.json"), text).tag("output")
    }
}

/// Reads an input file and remembers its hash for the manifest.
pub fn read_input(path: &Path, inputs: &mut Vec<FileEntry>) -> CliResult<Vec<u8>> {
    let bytes = std::fs::read(path).map_err(|e| {
        crate::error::CliError::new(handcrop::ErrorKind::Io, "input", format!("{}: {e}", path.display()))
    })?;
    inputs.push(FileEntry {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
        bytes: bytes.len(),
    });
    Ok(bytes)
}

pub fn read_input_string(path: &Path, inputs: &mut Vec<FileEntry>) -> CliResult<String> {
    let bytes = read_input(path, inputs)?;
    String::from_utf8(bytes)
        .map_err(|_| crate::error::CliError::validation("input", format!("{} is not UTF-8", path.display())))
}
