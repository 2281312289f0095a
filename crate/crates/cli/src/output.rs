//! CSV and flat-JSON artifacts with checksums for the manifest.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use heatlab_core::report::BoundReport;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Floats in CSV cells: 17 significant digits.
pub fn cell(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Artifacts {
    dir: PathBuf,
    config_hash: String,
    written: Vec<(String, String)>,
}

impl Artifacts {
    pub fn new(dir: &Path, config_hash: &str) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), config_hash: config_hash.to_string(), written: Vec::new() })
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    /// File names and SHA-256 digests, in write order.
    pub fn written(&self) -> &[(String, String)] {
        &self.written
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        let mut f = fs::File::create(self.dir.join(name))?;
        f.write_all(bytes)?;
        self.written.push((name.to_string(), sha256_hex(bytes)));
        Ok(())
    }

    /// First line is `# config_hash=<hex>`, then the header row.
    pub fn write_csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> io::Result<()>
    where
        I: IntoIterator<Item = Vec<f64>>,
    {
        let mut s = format!("# config_hash={}\n{}\n", self.config_hash, header.join(","));
        for row in rows {
            let cells: Vec<String> = row.into_iter().map(cell).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        self.put(name, s.as_bytes())
    }

    pub fn write_json(&mut self, name: &str, mut obj: Map<String, Value>) -> io::Result<()> {
        obj.insert("config_hash".into(), Value::String(self.config_hash.clone()));
        let mut text = serde_json::to_string_pretty(&Value::Object(obj)).expect("json map serializes");
        text.push('\n');
        self.put(name, text.as_bytes())
    }

    /// `manifest.json` is written last and is not listed in itself.
    pub fn write_manifest(&mut self, mut obj: Map<String, Value>, created_unix: u64) -> io::Result<()> {
        for (name, digest) in self.written.clone() {
            obj.insert(format!("sha256:{name}"), Value::String(digest));
        }
        obj.insert("created_unix".into(), Value::from(created_unix));
        self.write_json("manifest.json", obj)
    }
}

/// Flatten a report: nested maps become `constant:<k>` and `provenance:<k>`.
pub fn flat_report(r: &BoundReport) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("name".into(), r.name.clone().into());
    m.insert("samples".into(), r.samples.into());
    m.insert("worst_margin".into(), r.worst_margin.into());
    m.insert("threshold".into(), r.threshold.into());
    m.insert("verdict".into(), serde_json::to_value(r.verdict).unwrap());
    for (k, v) in &r.constants {
        m.insert(format!("constant:{k}"), (*v).into());
    }
    for (k, v) in &r.provenance {
        m.insert(format!("provenance:{k}"), v.clone().into());
    }
    m.insert("notes".into(), r.notes.join("; ").into());
    m
}
