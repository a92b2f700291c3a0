use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Output directory whose files appear only once fully written.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    /// Streams `fill` into a temporary file in the output directory and
    /// renames it to `name` on success.
    pub fn write<F>(&mut self, name: &str, fill: F) -> anyhow::Result<()>
    where
        F: FnOnce(&mut dyn Write) -> anyhow::Result<()>,
    {
        let target = self.root.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.root)
            .with_context(|| format!("creating a temporary file in {}", self.root.display()))?;
        {
            let mut buffered = std::io::BufWriter::new(tmp.as_file_mut());
            fill(&mut buffered)?;
            buffered.flush()?;
        }
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            tmp.as_file()
                .set_permissions(std::fs::Permissions::from_mode(0o644))?;
        }
        tmp.as_file().sync_all()?;
        tmp.persist(&target)
            .map_err(|e| e.error)
            .with_context(|| format!("writing {}", target.display()))?;
        log::info!("wrote {}", target.display());
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}

#[derive(Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub pipeline: &'a str,
    pub config_path: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub workers: usize,
    pub deterministic: bool,
    pub status: &'static str,
    pub exit_code: i32,
    pub error: Option<String>,
    pub outputs: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
