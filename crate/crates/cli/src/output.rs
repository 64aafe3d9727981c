//! Artifact directory: CSV tables, text reports and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

/// Collects what a run writes so the manifest can list it.
pub struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
    timings: Vec<(String, Duration)>,
}

impl Artifacts {
    /// Creates the directory (and parents).
    pub fn create(dir: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            timings: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn csv<I, R, S>(&mut self, name: &str, header: &[&str], rows: I) -> csv::Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        let mut w = csv::Writer::from_path(self.dir.join(name))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn text(&mut self, name: &str, body: &str) -> std::io::Result<()> {
        fs::write(self.dir.join(name), body)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn time(&mut self, label: String, wall: Duration) {
        self.timings.push((label, wall));
    }

    /// Writes `manifest.txt`; `sections` are rendered in order after the
    /// artifact and timing lists.
    pub fn manifest(
        &mut self,
        header: &[(&str, String)],
        sections: &[(&str, String)],
    ) -> std::io::Result<()> {
        let mut s = String::from("# hschwarz run manifest\n");
        for (key, value) in header {
            let _ = writeln!(s, "{key} = {value}");
        }
        s += "\n[artifacts]\n";
        for f in &self.files {
            let _ = writeln!(s, "{f}");
        }
        s += "\n[timings]\n";
        for (label, wall) in &self.timings {
            let _ = writeln!(s, "{label} = {:.3}s", wall.as_secs_f64());
        }
        for (title, body) in sections {
            let _ = write!(s, "\n[{title}]\n{body}");
            if !body.ends_with('\n') {
                s.push('\n');
            }
        }
        fs::write(self.dir.join("manifest.txt"), s)
    }
}

/// Fixed-width scientific notation used in every table.
pub fn sci(v: f64) -> String {
    format!("{v:.6e}")
}
