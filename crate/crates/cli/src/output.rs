use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Collects artifacts in a scratch directory inside the output directory and
/// moves them into place only on [`Staging::commit`]. Dropping without a
/// commit deletes everything staged.
pub struct Staging {
    out: PathBuf,
    dir: PathBuf,
    files: Vec<String>,
    committed: bool,
}

impl Staging {
    pub fn new(out: &Path) -> Result<Self> {
        fs::create_dir_all(out).with_context(|| format!("cannot create output directory `{}`", out.display()))?;
        let dir = out.join(format!(".varx-staging-{}", std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir(&dir).with_context(|| format!("cannot create `{}`", dir.display()))?;
        Ok(Self {
            out: out.to_path_buf(),
            dir,
            files: Vec::new(),
            committed: false,
        })
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing `{}`", path.display()))?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// CSV preceded by a `# config=` line holding the effective configuration.
    pub fn write_csv(&mut self, name: &str, config: &serde_json::Value, body: &str) -> Result<()> {
        self.write(name, format!("# config={config}\n{body}"))
    }

    pub fn write_json(&mut self, name: &str, value: &serde_json::Value) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text)
    }

    /// Move every staged file into the output directory; returns their final paths.
    pub fn commit(mut self) -> Result<Vec<PathBuf>> {
        let mut done = Vec::with_capacity(self.files.len());
        for name in &self.files {
            let target = self.out.join(name);
            fs::rename(self.dir.join(name), &target).with_context(|| format!("moving `{}` into place", target.display()))?;
            done.push(target);
        }
        fs::remove_dir(&self.dir)?;
        self.committed = true;
        Ok(done)
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}
