//! Deterministic JSON and CSV artifacts.

use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

#[derive(Clone, Debug)]
pub struct Artifact {
    pub name: String,
    pub body: String,
}

impl Artifact {
    pub fn json<T: Serialize>(name: &str, value: &T) -> Result<Self, CliError> {
        let mut body = serde_json::to_string_pretty(value).map_err(|e| CliError::Input(format!("{name}: {e}")))?;
        body.push('\n');
        Ok(Artifact { name: name.to_string(), body })
    }

    pub fn csv(name: &str, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Self, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::Input(format!("{name}: {e}"));
        w.write_record(header).map_err(fail)?;
        for row in rows {
            w.write_record(&row).map_err(fail)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Input(format!("{name}: {e}")))?;
        Ok(Artifact { name: name.to_string(), body: String::from_utf8(bytes).expect("csv output is utf-8") })
    }
}

/// Everything a command produced; `primary` goes to stdout when no output directory is set.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub primary: usize,
    /// Structured refusal payload; turns the exit status into 2.
    pub refusal: Option<Value>,
}

impl Outcome {
    pub fn single(artifact: Artifact) -> Self {
        Outcome { artifacts: vec![artifact], primary: 0, refusal: None }
    }

    pub fn write_to(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io { path: dir.to_path_buf(), source: e })?;
        let mut written = Vec::new();
        for a in &self.artifacts {
            let path = dir.join(&a.name);
            std::fs::write(&path, &a.body).map_err(|e| CliError::Io { path: path.clone(), source: e })?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Shortest round-trip form, exponent notation outside `[1e-4, 1e15)`.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".to_string()
    } else if !v.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(num(0.0), "0");
        assert_eq!(num(-0.0), "0");
        assert_eq!(num(0.5), "0.5");
        assert_eq!(num(1e-300), "1e-300");
        assert_eq!(num(-2.5e20), "-2.5e20");
        assert_eq!(num(123.25), "123.25");
    }

    #[test]
    fn csv_quoting() {
        let a = Artifact::csv("t.csv", &header(&["a", "b"]), vec![vec!["1".into(), "x,y".into()]]).unwrap();
        assert_eq!(a.body, "a,b\n1,\"x,y\"\n");
    }
}
