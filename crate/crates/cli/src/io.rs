use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

/// Output written to `<path>.partial` and renamed into place on `commit`.
///
/// A run that fails midway leaves only the `.partial` file behind.
pub struct PartialOutput {
    final_path: PathBuf,
    partial_path: PathBuf,
    writer: BufWriter<File>,
}

impl PartialOutput {
    pub fn create(path: &Path) -> Result<Self> {
        let mut partial = path.as_os_str().to_owned();
        partial.push(".partial");
        let partial_path = PathBuf::from(partial);
        let file = File::create(&partial_path)
            .with_context(|| format!("creating {}", partial_path.display()))?;
        Ok(Self {
            final_path: path.to_path_buf(),
            partial_path,
            writer: BufWriter::new(file),
        })
    }

    pub fn writer(&mut self) -> &mut BufWriter<File> {
        &mut self.writer
    }

    pub fn commit(mut self) -> Result<()> {
        self.writer.flush()?;
        self.writer.get_ref().sync_all()?;
        std::fs::rename(&self.partial_path, &self.final_path).with_context(|| {
            format!(
                "renaming {} to {}",
                self.partial_path.display(),
                self.final_path.display()
            )
        })
    }
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

/// Fails early when any input path is missing.
pub fn require_paths<'a>(paths: impl IntoIterator<Item = &'a PathBuf>) -> Result<()> {
    for p in paths {
        if !p.exists() {
            bail!("input {} does not exist", p.display());
        }
    }
    Ok(())
}
