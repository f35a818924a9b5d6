use std::fs;
use std::path::{Path, PathBuf};

use qwalk_core::observables::ScalarField;
use qwalk_core::C64;
use serde::Serialize;

use crate::RunError;

/// Writes artifacts into one directory and remembers their paths.
pub struct Artifacts {
    dir: PathBuf,
    pub written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.to_path_buf(), source })?;
        Ok(Artifacts { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn csv<R, I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), RunError>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let path = self.dir.join(name);
        let csv_err = |source| RunError::Csv { path: path.clone(), source };
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(row).map_err(csv_err)?;
        }
        w.flush().map_err(|source| RunError::Io { path: path.clone(), source })?;
        self.written.push(path);
        Ok(())
    }

    /// One row per (j, p) in the columns j, p, re, im.
    pub fn fields(&mut self, name: &str, fields: &[ScalarField]) -> Result<(), RunError> {
        let rows = fields.iter().enumerate().flat_map(|(j, f)| {
            f.values().iter().enumerate().map(move |(p, v)| vec![j.to_string(), p.to_string(), num(v.re), num(v.im)])
        });
        self.csv(name, &["j", "p", "re", "im"], rows)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(value).expect("report values serialize");
        text.push('\n');
        fs::write(&path, text).map_err(|source| RunError::Io { path: path.clone(), source })?;
        self.written.push(path);
        Ok(())
    }
}

pub fn num(x: f64) -> String {
    x.to_string()
}

pub fn complex(z: C64) -> [f64; 2] {
    [z.re, z.im]
}
