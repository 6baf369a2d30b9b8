use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Where a command's tables go: named files under `--out`, or stdout with a
/// `# name` line before each table.
pub struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    pub fn new(dir: Option<&Path>) -> Result<Self> {
        if let Some(d) = dir {
            fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
        }
        Ok(Self { dir: dir.map(Path::to_path_buf) })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Hand `f` a writer for the named file (or stdout).
    pub fn emit(&self, name: &str, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        match &self.dir {
            Some(d) => {
                let path = d.join(name);
                let mut file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                f(&mut file)?;
                eprintln!("wrote {}", path.display());
            }
            None => {
                let mut out = std::io::stdout().lock();
                writeln!(out, "# {name}")?;
                f(&mut out)?;
            }
        }
        Ok(())
    }

    /// Plain numeric table; `f64` display round-trips exactly.
    pub fn table(&self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        self.emit(name, |w| {
            let mut c = csv::Writer::from_writer(w);
            c.write_record(header)?;
            for r in rows {
                c.write_record(r.iter().map(|v| v.to_string()))?;
            }
            c.flush()?;
            Ok(())
        })
    }
}
