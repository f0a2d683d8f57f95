//! Plain-text run summary with a hashed file manifest.

use std::fmt::Display;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

/// Collects key/value lines while a run progresses, then writes
/// `summary.txt` listing every produced file with its SHA-256.
pub struct Summary {
    run: String,
    lines: Vec<(String, String)>,
    files: Vec<(PathBuf, String)>,
    started: std::time::Instant,
}

impl Summary {
    pub fn new(run: &str) -> Self {
        Summary {
            run: run.to_string(),
            lines: Vec::new(),
            files: Vec::new(),
            started: std::time::Instant::now(),
        }
    }

    pub fn kv(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.lines.push((key.to_string(), value.to_string()));
        self
    }

    /// Register an already-written output file; hashes its content.
    pub fn file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = std::fs::read(path)
            .with_context(|| format!("hashing output {}", path.display()))?;
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for b in digest {
            let _ = write!(hex, "{b:02x}");
        }
        self.files.push((path.to_path_buf(), hex));
        Ok(())
    }

    /// Write `summary.txt` into `dir`. File paths are listed relative to
    /// `dir` when possible.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let mut out = String::new();
        let _ = writeln!(out, "run: {}", self.run);
        for (k, v) in &self.lines {
            let _ = writeln!(out, "{k}: {v}");
        }
        let _ = writeln!(
            out,
            "wall_time_s: {:.3}",
            self.started.elapsed().as_secs_f64()
        );
        let _ = writeln!(out, "files:");
        for (path, hash) in &self.files {
            let shown = path.strip_prefix(dir).unwrap_or(path);
            let _ = writeln!(out, "  {} sha256={hash}", shown.display());
        }
        let path = dir.join("summary.txt");
        std::fs::write(&path, out)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_lists_hashed_files() {
        let dir = std::env::temp_dir().join("synrm_summary_test");
        std::fs::create_dir_all(&dir).unwrap();
        let data = dir.join("data.csv");
        std::fs::write(&data, "a,b\n1,2\n").unwrap();

        let mut s = Summary::new("solve");
        s.kv("torque_nm", 1.25);
        s.file(&data).unwrap();
        let path = s.write(&dir).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("run: solve\n"));
        assert!(text.contains("torque_nm: 1.25"));
        // sha256 of "a,b\n1,2\n"
        assert!(
            text.contains("data.csv sha256="),
            "manifest line missing: {text}"
        );
        let hash_line = text
            .lines()
            .find(|l| l.contains("data.csv"))
            .unwrap()
            .to_string();
        let hash = hash_line.split("sha256=").nth(1).unwrap();
        assert_eq!(hash.len(), 64);
        assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
        std::fs::remove_dir_all(&dir).ok();
    }
}
