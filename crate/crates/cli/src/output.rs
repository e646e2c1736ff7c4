//! Number formatting and file emission. Every float is written with 17
//! significant digits unless `--round` asks for fewer.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::Value;

#[derive(Debug, Clone, Copy)]
pub struct Numbers {
    pub digits: u32,
}

impl Numbers {
    pub fn new(round: Option<u32>) -> Self {
        Self {
            digits: round.unwrap_or(17),
        }
    }

    pub fn fmt(&self, x: f64) -> String {
        format!("{:.*e}", (self.digits - 1) as usize, x)
    }

    fn round(&self, x: f64) -> f64 {
        if self.digits >= 17 || !x.is_finite() {
            x
        } else {
            self.fmt(x).parse().unwrap_or(x)
        }
    }

    /// Rounds every float inside a JSON document.
    pub fn round_json(&self, v: &mut Value) {
        match v {
            Value::Number(n) if n.is_f64() => {
                if let Some(x) = n.as_f64() {
                    if let Some(r) = serde_json::Number::from_f64(self.round(x)) {
                        *n = r;
                    }
                }
            }
            Value::Array(items) => items.iter_mut().for_each(|x| self.round_json(x)),
            Value::Object(map) => map.values_mut().for_each(|x| self.round_json(x)),
            _ => {}
        }
    }
}

/// A CSV table whose cells are already formatted.
#[derive(Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

pub fn render_json(value: &Value, numbers: Numbers) -> String {
    let mut v = value.clone();
    numbers.round_json(&mut v);
    let mut s = serde_json::to_string_pretty(&v).expect("JSON values always serialize");
    s.push('\n');
    s
}

/// `PREFIX` + `suffix`, e.g. `run` + `.meta.json`.
pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes `content` to `PREFIX+suffix`, or to standard output without a prefix.
pub fn emit(prefix: Option<&Path>, suffix: &str, content: &str) -> Result<()> {
    match prefix {
        Some(p) => {
            let path = with_suffix(p, suffix);
            fs::write(&path, content).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes()).context("writing to standard output")
        }
    }
}
