use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::Failure;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Output directory together with the provenance stamped on every file.
#[derive(Debug, Clone)]
pub struct Sink {
    pub dir: PathBuf,
    pub config_hash: String,
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    config_sha256: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

impl Sink {
    pub fn new(dir: PathBuf, config_hash: String) -> Result<Self, Failure> {
        std::fs::create_dir_all(&dir).map_err(|e| Failure::Other(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir, config_hash })
    }

    fn header(&self) -> String {
        format!("# harmbal {VERSION}\n# config-sha256 {}\n", self.config_hash)
    }

    /// Writes rows as CSV below a `#` header block.
    pub fn csv<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<PathBuf, Failure> {
        let mut bytes = self.header().into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut bytes);
            for row in rows {
                w.serialize(row).map_err(|e| Failure::Other(e.to_string()))?;
            }
            w.flush().map_err(|e| Failure::Other(e.to_string()))?;
        }
        self.write(name, &bytes)
    }

    /// Writes a JSON object carrying the provenance fields next to `body`'s.
    pub fn json<T: Serialize>(&self, name: &str, body: &T) -> Result<PathBuf, Failure> {
        let stamped = Stamped { tool: "harmbal", version: VERSION, config_sha256: &self.config_hash, body };
        let mut bytes = serde_json::to_vec_pretty(&stamped).map_err(|e| Failure::Other(e.to_string()))?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn text(&self, name: &str, body: &str) -> Result<PathBuf, Failure> {
        let mut s = self.header();
        s.push_str(body);
        self.write(name, s.as_bytes())
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, Failure> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes).map_err(|e| Failure::Other(format!("cannot write {}: {e}", path.display())))?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }
}

/// Temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Reads a CSV written by [`Sink::csv`], skipping the header block.
#[cfg(test)]
pub fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Other(format!("cannot read {}: {e}", path.display())))?;
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    csv::Reader::from_reader(body.as_bytes())
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| Failure::Other(e.to_string()))
}
