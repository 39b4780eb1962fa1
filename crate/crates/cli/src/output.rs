//! Outputs are collected in memory and written only after a run succeeds, so
//! a failed run leaves nothing behind.

use std::fs;
use std::path::{Component, Path, PathBuf};

use serde::Serialize;

#[derive(Debug, Default, Clone, PartialEq)]
pub struct OutputSet {
    files: Vec<(String, Vec<u8>)>,
}

/// Relative path made of plain components only.
fn is_confined(name: &str) -> bool {
    let p = Path::new(name);
    !name.is_empty() && p.components().all(|c| matches!(c, Component::Normal(_)))
}

impl OutputSet {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        let name = name.into();
        assert!(is_confined(&name), "output name {name:?} escapes the output directory");
        self.files.push((name, bytes));
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("serializable output");
        bytes.push(b'\n');
        self.add(name, bytes);
    }

    /// Moves every file of `other` under `prefix/`.
    pub fn nest(&mut self, prefix: &str, other: OutputSet) {
        for (name, bytes) in other.files {
            self.add(format!("{prefix}/{name}"), bytes);
        }
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn write_to(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        let mut written = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&path, bytes)?;
            written.push(path);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confinement() {
        assert!(is_confined("report.csv"));
        assert!(is_confined("run_000/report.csv"));
        for bad in ["", "../x", "/etc/passwd", "a/../../b", "./x"] {
            assert!(!is_confined(bad), "{bad}");
        }
    }

    #[test]
    fn writes_nested_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut inner = OutputSet::default();
        inner.add("a.txt", b"x".to_vec());
        let mut set = OutputSet::default();
        set.add_json("summary.json", &serde_json::json!({"k": 1}));
        set.nest("run_001", inner);
        let paths = set.write_to(dir.path()).unwrap();
        assert_eq!(paths.len(), 2);
        assert_eq!(fs::read_to_string(dir.path().join("run_001/a.txt")).unwrap(), "x");
        assert_eq!(set.names(), vec!["summary.json", "run_001/a.txt"]);
    }
}
