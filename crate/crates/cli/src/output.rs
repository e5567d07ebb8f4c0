use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Value};

use crate::fail::Failure;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Writes files into the output directory, stamping each with the tool version and the
/// configuration hash.
pub struct Output {
    dir: PathBuf,
    command: String,
    hash: String,
    pub written: Vec<PathBuf>,
}

impl Output {
    pub fn new(dir: PathBuf, command: &str, hash: String) -> Result<Self, Failure> {
        std::fs::create_dir_all(&dir).map_err(|e| Failure::io(&dir, e))?;
        Ok(Self { dir, command: command.to_string(), hash, written: vec![] })
    }

    fn stamp(&self) -> String {
        format!("hamflow {VERSION} command={} config-sha256={}", self.command, self.hash)
    }

    fn write(&mut self, name: &str, body: &str) -> Result<PathBuf, Failure> {
        let path = self.dir.join(name);
        std::fs::write(&path, body).map_err(|e| Failure::io(&path, e))?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn csv(&mut self, name: &str, body: &str) -> Result<PathBuf, Failure> {
        let text = format!("# {}\n{body}", self.stamp());
        self.write(name, &text)
    }

    /// A JSON object with a `provenance` member added.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, Failure> {
        let mut v = serde_json::to_value(value).map_err(|e| Failure::config(e.to_string()))?;
        let prov = json!({ "tool": "hamflow", "version": VERSION, "command": self.command, "config_sha256": self.hash });
        match &mut v {
            Value::Object(m) => {
                m.insert("provenance".into(), prov);
            }
            other => v = json!({ "provenance": prov, "data": other }),
        }
        let text = serde_json::to_string_pretty(&v).map_err(|e| Failure::config(e.to_string()))?;
        self.write(name, &(text + "\n"))
    }

    /// An SVG document; the stamp goes into a comment after the XML prologue.
    pub fn svg(&mut self, name: &str, body: &str) -> Result<PathBuf, Failure> {
        let text = format!("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<!-- {} -->\n{body}", self.stamp());
        self.write(name, &text)
    }
}
