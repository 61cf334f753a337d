use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitHint {
    Train,
    Test,
}

impl FromStr for SplitHint {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(SplitHint::Train),
            "test" => Ok(SplitHint::Test),
            other => Err(format!("split must be train, test or empty, got {other:?}")),
        }
    }
}

impl fmt::Display for SplitHint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitHint::Train => "train",
            SplitHint::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// The `path` column as written; unique within a manifest.
    pub source_id: String,
    /// `path` resolved against the manifest's directory.
    pub path: PathBuf,
    pub label: String,
    pub split: Option<SplitHint>,
}

/// A labeled image dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset_name: String,
    pub entries: Vec<ManifestEntry>,
    /// Distinct labels, sorted.
    pub classes: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct Row {
    path: String,
    label: String,
    #[serde(default)]
    split: Option<String>,
}

impl Manifest {
    /// Builds a manifest from in-memory entries, checking every invariant
    /// except image existence.
    pub fn from_entries(dataset_name: impl Into<String>, entries: Vec<ManifestEntry>) -> Result<Self> {
        let dataset_name = dataset_name.into();
        let err = |msg: String| Error::Manifest {
            path: PathBuf::from(&dataset_name),
            msg,
        };
        if entries.is_empty() {
            return Err(err("no entries".into()));
        }
        let mut seen = HashSet::new();
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for e in &entries {
            if !seen.insert(e.source_id.as_str()) {
                return Err(err(format!("duplicate path {}", e.source_id)));
            }
            *counts.entry(e.label.as_str()).or_default() += 1;
        }
        if let Some((label, _)) = counts.iter().find(|(_, &n)| n < 2) {
            return Err(err(format!("class {label:?} has fewer than 2 samples")));
        }
        let classes = counts.keys().map(|s| s.to_string()).collect();
        Ok(Self {
            dataset_name,
            entries,
            classes,
        })
    }

    /// Reads a `path,label,split` CSV. Relative paths resolve against the
    /// manifest's directory and must exist.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::Manifest {
                path: path.to_path_buf(),
                msg: e.to_string(),
            })?
            .clone();
        let cols: Vec<&str> = headers.iter().collect();
        if cols.is_empty() || (cols != ["path", "label", "split"] && cols != ["path", "label"]) {
            if text.trim().is_empty() {
                return Err(Error::Manifest {
                    path: path.to_path_buf(),
                    msg: "no entries".into(),
                });
            }
            return Err(Error::ManifestRow {
                path: path.to_path_buf(),
                line: 1,
                msg: format!("header must be `path,label,split`, got {cols:?}"),
            });
        }
        let mut entries = Vec::new();
        for rec in reader.records() {
            let line = match &rec {
                Ok(r) => r.position().map_or(0, |p| p.line() as usize),
                Err(e) => e.position().map_or(0, |p| p.line() as usize),
            };
            let row_err = |msg: String| Error::ManifestRow {
                path: path.to_path_buf(),
                line,
                msg,
            };
            let rec = rec.map_err(|e| row_err(e.to_string()))?;
            let row: Row = rec
                .deserialize(Some(&rec_headers(&cols)))
                .map_err(|e| row_err(e.to_string()))?;
            if row.path.is_empty() || row.label.is_empty() {
                return Err(row_err("empty path or label".into()));
            }
            let split = match row.split.as_deref() {
                None | Some("") => None,
                Some(s) => Some(s.parse::<SplitHint>().map_err(row_err)?),
            };
            let resolved = base.join(&row.path);
            if !resolved.is_file() {
                return Err(row_err(format!("image not found: {}", resolved.display())));
            }
            entries.push(ManifestEntry {
                source_id: row.path,
                path: resolved,
                label: row.label,
                split,
            });
        }
        let name = path
            .parent()
            .and_then(|p| p.file_name())
            .or_else(|| path.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into());
        Self::from_entries(name, entries).map_err(|e| match e {
            Error::Manifest { msg, .. } => Error::Manifest {
                path: path.to_path_buf(),
                msg,
            },
            other => other,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Index of a label in [`Manifest::classes`].
    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.binary_search_by(|c| c.as_str().cmp(label)).ok()
    }

    /// Class index of every entry, in entry order.
    pub fn class_indices(&self) -> Vec<usize> {
        self.entries
            .iter()
            .map(|e| self.class_index(&e.label).expect("label collected at construction"))
            .collect()
    }

    pub fn entry(&self, source_id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.source_id == source_id)
    }

    /// True when every entry carries a split hint.
    pub fn fully_hinted(&self) -> bool {
        self.entries.iter().all(|e| e.split.is_some())
    }

    pub fn partially_hinted(&self) -> bool {
        let hinted = self.entries.iter().filter(|e| e.split.is_some()).count();
        hinted > 0 && hinted < self.entries.len()
    }

    pub fn class_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for e in &self.entries {
            *out.entry(e.label.clone()).or_default() += 1;
        }
        out
    }

    pub fn labels(&self) -> BTreeSet<&str> {
        self.classes.iter().map(String::as_str).collect()
    }
}

fn rec_headers(cols: &[&str]) -> csv::StringRecord {
    csv::StringRecord::from(cols.to_vec())
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    fn touch(dir: &Path, names: &[&str]) {
        for n in names {
            std::fs::write(dir.join(n), b"x").unwrap();
        }
    }

    #[test]
    fn parses_and_sorts_classes() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), &["a.png", "b.png", "c.png", "d.png"]);
        let m = write(
            dir.path(),
            "manifest.csv",
            "path,label,split\na.png,zeta,train\nb.png,alpha,\nc.png,zeta,test\nd.png,alpha,\n",
        );
        let man = Manifest::load(&m).unwrap();
        assert_eq!(man.len(), 4);
        assert_eq!(man.classes, vec!["alpha", "zeta"]);
        assert_eq!(man.entries[0].split, Some(SplitHint::Train));
        assert_eq!(man.entries[1].split, None);
        assert_eq!(man.entries[0].path, dir.path().join("a.png"));
        assert!(man.partially_hinted());
    }

    #[test]
    fn empty_file_has_no_entries() {
        let dir = tempfile::tempdir().unwrap();
        let m = write(dir.path(), "m.csv", "");
        let err = Manifest::load(&m).unwrap_err().to_string();
        assert!(err.contains("no entries"), "{err}");
        let m = write(dir.path(), "m2.csv", "path,label,split\n");
        assert!(Manifest::load(&m).unwrap_err().to_string().contains("no entries"));
    }

    #[test]
    fn missing_image_is_named() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), &["a.png", "b.png"]);
        let m = write(dir.path(), "m.csv", "path,label,split\na.png,x,\nb.png,x,\nghost.png,x,\n");
        let err = Manifest::load(&m).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("ghost.png"), "{text}");
        assert!(matches!(err, Error::ManifestRow { line: 4, .. }), "{err:?}");
    }

    #[test]
    fn malformed_rows_report_line() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), &["a.png", "b.png"]);
        let m = write(dir.path(), "m.csv", "path,label,split\na.png,x,\nb.png,x,validation\n");
        assert!(matches!(Manifest::load(&m).unwrap_err(), Error::ManifestRow { line: 3, .. }));
        let m = write(dir.path(), "h.csv", "file,class\na.png,x\n");
        assert!(matches!(Manifest::load(&m).unwrap_err(), Error::ManifestRow { line: 1, .. }));
    }

    #[test]
    fn singleton_class_rejected() {
        let e = |id: &str, l: &str| ManifestEntry {
            source_id: id.into(),
            path: id.into(),
            label: l.into(),
            split: None,
        };
        assert!(Manifest::from_entries("d", vec![e("a", "x"), e("b", "x"), e("c", "y")]).is_err());
        assert!(Manifest::from_entries("d", vec![e("a", "x"), e("a", "x")]).is_err());
    }
}
