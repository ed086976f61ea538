use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dynamap::io::{write_matrix, Format};
use dynamap::Mat;

/// Files written by one command, so a failed run can take them back.
pub struct Outputs {
    dir: PathBuf,
    format: Format,
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: &Path, format: Format) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
            written: Vec::new(),
        })
    }

    fn extension(&self) -> &'static str {
        match self.format {
            Format::Csv => "csv",
            Format::Binary => "bin",
        }
    }

    /// Writes `stem.csv` or `stem.bin`; refuses non-finite entries.
    pub fn matrix(&mut self, stem: &str, m: &Mat<f64>) -> Result<PathBuf> {
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if !m[(i, j)].is_finite() {
                    bail!("{stem}: entry ({i}, {j}) is {}", m[(i, j)]);
                }
            }
        }
        let path = self.dir.join(format!("{stem}.{}", self.extension()));
        self.written.push(path.clone());
        write_matrix(&path, m, self.format).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn text(&mut self, name: &str, content: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn paths(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn discard(&mut self) {
        for p in self.written.drain(..) {
            let _ = fs::remove_file(p);
        }
    }
}
