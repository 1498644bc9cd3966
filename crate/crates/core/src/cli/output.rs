//! Output files: JSON envelopes, hash-stamped CSVs, atomic replacement.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use super::config::RunConfig;
use super::Failure;
use crate::ewma::fmt_num;

/// Rounds every number in a JSON tree to 15 significant digits.
pub fn round_json(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            fmt_num(x)
                .parse::<f64>()
                .ok()
                .and_then(serde_json::Number::from_f64)
                .map(Value::Number)
                .unwrap_or(Value::Null)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_json).collect()),
        Value::Object(map) => {
            Value::Object(map.into_iter().map(|(k, v)| (k, round_json(v))).collect())
        }
        other => other,
    }
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Input(format!("cannot write {}: {e}", path.display()));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let result = fs::File::create(&tmp)
        .and_then(|mut f| {
            f.write_all(bytes)?;
            f.sync_all()
        })
        .and_then(|_| fs::rename(&tmp, path));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io)
}

/// Output sink for one run: knows the directory and the config stamp.
pub struct Outputs<'a> {
    pub config: &'a RunConfig,
    pub hash: String,
    written: Vec<PathBuf>,
}

impl<'a> Outputs<'a> {
    pub fn new(config: &'a RunConfig) -> Self {
        Self {
            config,
            hash: config.hash(),
            written: Vec::new(),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.config.output_dir.join(name)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// `{config_hash, config, result}` with rounded numbers and sorted keys.
    pub fn json<T: Serialize>(&mut self, name: &str, result: &T) -> Result<(), Failure> {
        let ser = |e: serde_json::Error| Failure::Input(format!("cannot serialize {name}: {e}"));
        let envelope = serde_json::json!({
            "config_hash": self.hash,
            "config": serde_json::to_value(self.config).map_err(ser)?,
            "result": serde_json::to_value(result).map_err(ser)?,
        });
        let mut text = serde_json::to_string_pretty(&round_json(envelope)).map_err(ser)?;
        text.push('\n');
        self.file(name, text.as_bytes())
    }

    /// CSV whose first line is `# config_hash=<hash>`; `fill` writes the body.
    pub fn csv<F>(&mut self, name: &str, fill: F) -> Result<(), Failure>
    where
        F: FnOnce(&mut Vec<u8>) -> csv::Result<()>,
    {
        let mut buf = format!("# config_hash={}\n", self.hash).into_bytes();
        fill(&mut buf).map_err(|e| Failure::Input(format!("cannot write {name}: {e}")))?;
        self.file(name, &buf)
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<(), Failure> {
        let text = format!("# config_hash={}\n{body}", self.hash);
        self.file(name, text.as_bytes())
    }

    fn file(&mut self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        let path = self.path(name);
        write_atomic(&path, bytes)?;
        log::info!("wrote {}", path.display());
        self.written.push(path);
        Ok(())
    }
}

/// Reads a CSV written by [`Outputs::csv`], skipping the hash line. Returns
/// the stamped hash and the records.
pub fn read_stamped_csv(path: &Path) -> Result<(Option<String>, Vec<csv::StringRecord>), Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
    let hash = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# config_hash="))
        .map(str::to_owned);
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let records = rdr
        .records()
        .collect::<csv::Result<Vec<_>>>()
        .map_err(|e| Failure::Input(format!("cannot parse {}: {e}", path.display())))?;
    Ok((hash, records))
}
