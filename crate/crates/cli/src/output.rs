use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const TOOLKIT: &str = "skld";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Stamped into every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub toolkit: String,
    pub version: String,
    pub config_sha256: String,
}

impl Provenance {
    pub fn new(config_sha256: String) -> Self {
        Self {
            toolkit: TOOLKIT.to_owned(),
            version: VERSION.to_owned(),
            config_sha256,
        }
    }

    /// Comment line opening CSV and data files.
    pub fn comment(&self) -> String {
        format!(
            "# {} {} config_sha256={}\n",
            self.toolkit, self.version, self.config_sha256
        )
    }
}

/// JSON envelope of an experiment result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Document<T> {
    pub provenance: Provenance,
    pub experiment: String,
    pub result: T,
}

/// Output files collected in memory while an experiment runs and written in
/// one pass at the end.
#[derive(Debug)]
pub struct Artifacts {
    provenance: Provenance,
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn new(provenance: Provenance) -> Self {
        Self {
            provenance,
            files: Vec::new(),
        }
    }

    pub fn json<T: Serialize>(
        &mut self,
        name: &str,
        experiment: &str,
        result: &T,
    ) -> Result<(), CliError> {
        let doc = Document {
            provenance: self.provenance.clone(),
            experiment: experiment.to_owned(),
            result,
        };
        let mut bytes =
            serde_json::to_vec_pretty(&doc).map_err(|e| CliError::Usage(format!("{name}: {e}")))?;
        bytes.push(b'\n');
        self.files.push((name.to_owned(), bytes));
        Ok(())
    }

    /// CSV with a provenance comment line, then the header, then one row per
    /// record. Floats are written in shortest round-trip form.
    pub fn csv<R: Serialize>(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[R],
    ) -> Result<(), CliError> {
        let mut bytes = self.provenance.comment().into_bytes();
        {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(&mut bytes);
            let fail = |e: csv::Error| CliError::Usage(format!("{name}: {e}"));
            w.write_record(header).map_err(fail)?;
            for r in rows {
                w.serialize(r).map_err(fail)?;
            }
            w.flush().map_err(|e| CliError::io(name, e))?;
        }
        self.files.push((name.to_owned(), bytes));
        Ok(())
    }

    pub fn write_all(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        self.files
            .iter()
            .map(|(name, bytes)| {
                let path = dir.join(name);
                fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
                Ok(path)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_comment_header_and_unix_newlines() {
        let mut a = Artifacts::new(Provenance::new("ab".repeat(32)));
        a.csv("t.csv", &["x", "y"], &[(0.5, 1e-300), (2.0, -3.25)])
            .unwrap();
        let text = String::from_utf8(a.files[0].1.clone()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# skld ") && lines[0].ends_with(&"ab".repeat(32)));
        assert_eq!(lines[1], "x,y");
        assert_eq!(lines[2], "0.5,1e-300");
        assert_eq!(lines[3], "2.0,-3.25");
        assert!(!text.contains('\r'));
    }
}
