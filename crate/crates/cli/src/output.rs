//! File output: CSV tables, JSON records and the run manifest beside them.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use qanneal::{Error, Result};
use serde::Serialize;

/// Scientific notation with 17 significant digits.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: impl IntoIterator<Item = f64>) {
        self.rows.push(row.into_iter().map(num).collect());
    }

    pub fn push_raw(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn write_to<W: std::io::Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header)?;
        for r in &self.rows {
            out.write_record(r)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes to `path`, or stdout when `None`.
    pub fn emit(&self, path: Option<&Path>) -> Result<()> {
        let res = match path {
            Some(p) => {
                let f = std::fs::File::create(p).map_err(|e| io_err(p, e))?;
                self.write_to(f)
            }
            None => self.write_to(std::io::stdout().lock()),
        };
        res.map_err(|e| Error::Io {
            path: path.map_or("<stdout>".into(), |p| p.display().to_string()),
            source: std::io::Error::other(e),
        })
    }
}

/// Serializes with every float printed to 17 significant digits.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("records serialize");
    let mut s = String::new();
    render(&v, 0, &mut s);
    s.push('\n');
    s
}

fn render(v: &serde_json::Value, depth: usize, out: &mut String) {
    use serde_json::Value;
    let pad = |d: usize| "  ".repeat(d);
    match v {
        Value::Number(n) if n.is_f64() => {
            out.push_str(&num(n.as_f64().unwrap()));
        }
        Value::Array(a) if a.iter().all(|x| !x.is_array() && !x.is_object()) => {
            out.push('[');
            for (i, x) in a.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                render(x, depth, out);
            }
            out.push(']');
        }
        Value::Array(a) => {
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                out.push_str(&pad(depth + 1));
                render(x, depth + 1, out);
                out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(depth));
            out.push(']');
        }
        Value::Object(m) => {
            out.push_str("{\n");
            for (i, (k, x)) in m.iter().enumerate() {
                out.push_str(&pad(depth + 1));
                out.push_str(&serde_json::to_string(k).unwrap());
                out.push_str(": ");
                render(x, depth + 1, out);
                out.push_str(if i + 1 < m.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(depth));
            out.push('}');
        }
        other => out.push_str(&other.to_string()),
    }
}

pub fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| io_err(p, e)),
        None => {
            use std::io::Write;
            match std::io::stdout().lock().write_all(text.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(io_err(Path::new("<stdout>"), e)),
                _ => Ok(()),
            }
        }
    }
}

/// FNV-1a over a byte string.
pub fn digest(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{h:016x}")
}

#[derive(Debug, Serialize)]
pub struct Timing {
    pub started_unix: f64,
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub config_digest: String,
    pub seeds: Vec<u64>,
    pub version: &'static str,
    pub instance_digest: Option<String>,
    pub converged: Vec<(String, bool)>,
    /// The only fields that differ between identical reruns.
    pub timing: Timing,
}

pub struct Run {
    started: SystemTime,
    pub command_line: Vec<String>,
    pub config: String,
    pub seeds: Vec<u64>,
    pub instance_digest: Option<String>,
    pub converged: Vec<(String, bool)>,
}

impl Run {
    pub fn start(command_line: Vec<String>) -> Self {
        Self {
            started: SystemTime::now(),
            command_line,
            config: String::new(),
            seeds: Vec::new(),
            instance_digest: None,
            converged: Vec::new(),
        }
    }

    pub fn flag(&mut self, stage: &str, ok: bool) {
        self.converged.push((stage.to_string(), ok));
    }

    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|c| c.1)
    }

    fn manifest(&self) -> RunManifest {
        RunManifest {
            command_line: self.command_line.clone(),
            config_digest: digest(self.config.as_bytes()),
            seeds: self.seeds.clone(),
            version: env!("CARGO_PKG_VERSION"),
            instance_digest: self.instance_digest.clone(),
            converged: self.converged.clone(),
            timing: Timing {
                started_unix: self.started.duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64()),
                wall_clock_seconds: self.started.elapsed().map_or(0.0, |d| d.as_secs_f64()),
            },
        }
    }

    /// Writes `<out>.manifest.json` next to the data file, if there is one.
    pub fn finish(&self, out: Option<&Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.manifest()).expect("manifest serializes");
        match out {
            Some(p) => {
                let mut name = p.as_os_str().to_owned();
                name.push(".manifest.json");
                let path = PathBuf::from(name);
                std::fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
            }
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip_with_17_digits() {
        for x in [0.1, -7.214999999999999, 1e-300, 6.02e23] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            assert_eq!(s.trim_start_matches('-').split('e').next().unwrap().len(), 18);
        }
        assert_eq!(num(f64::INFINITY), "inf");
    }

    #[test]
    fn json_floats_are_full_precision() {
        #[derive(Serialize)]
        struct R {
            x: f64,
            v: Vec<f64>,
            n: usize,
        }
        let text = to_json(&R { x: 0.1, v: vec![1.0, 2.5], n: 3 });
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["x"].as_f64(), Some(0.1));
        assert_eq!(back["n"].as_u64(), Some(3));
        assert!(text.contains("1.0000000000000001e-1"));
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(digest(b""), "cbf29ce484222325");
        assert_ne!(digest(b"a"), digest(b"b"));
    }
}
