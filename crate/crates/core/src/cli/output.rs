use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use specguard::Result;

pub const TOOL: &str = "specguard";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
}

impl Meta {
    pub fn new<C: Serialize>(command: &str, seed: u64, config: &C) -> Result<Self> {
        let bytes = serde_json::to_vec(config)?;
        Ok(Self {
            tool: TOOL,
            version: VERSION,
            command: command.to_string(),
            seed,
            config_sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }

    fn csv_comment(&self) -> String {
        format!(
            "# {} {} command={} seed={} config={}\n",
            self.tool, self.version, self.command, self.seed, self.config_sha256
        )
    }
}

/// Writes artifacts into one directory, each stamped with [`Meta`].
pub struct Outputs {
    dir: PathBuf,
    meta: Meta,
}

impl Outputs {
    pub fn new(dir: &Path, meta: Meta) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            meta,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Comment line with the metadata, then a header row and one row per item.
    pub fn csv<S: Serialize>(&self, name: &str, rows: &[S]) -> Result<PathBuf> {
        let path = self.path(name);
        let mut file = BufWriter::new(File::create(&path)?);
        file.write_all(self.meta.csv_comment().as_bytes())?;
        let mut w = csv::Writer::from_writer(file);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(path)
    }

    /// `{"_meta": ...}` first line, then one JSON value per line.
    pub fn jsonl<S: Serialize>(&self, name: &str, items: &[S]) -> Result<PathBuf> {
        let path = self.path(name);
        let mut w = BufWriter::new(File::create(&path)?);
        serde_json::to_writer(&mut w, &serde_json::json!({ "_meta": self.meta }))?;
        w.write_all(b"\n")?;
        for it in items {
            serde_json::to_writer(&mut w, it)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(path)
    }

    /// A JSON object with an added `_meta` key.
    pub fn json<S: Serialize>(&self, name: &str, value: &S) -> Result<PathBuf> {
        let path = self.path(name);
        let mut v = serde_json::to_value(value)?;
        if let Some(obj) = v.as_object_mut() {
            obj.insert("_meta".into(), serde_json::to_value(&self.meta)?);
        }
        fs::write(&path, serde_json::to_string_pretty(&v)? + "\n")?;
        Ok(path)
    }
}
