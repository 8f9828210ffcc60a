use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use tljunction::battery::Tolerances;

/// Directory holding every file of one invocation.
pub struct RunDir {
    pub path: PathBuf,
    files: Vec<String>,
}

impl RunDir {
    /// Uses `explicit` when given, otherwise `<root>/<stem>`, suffixed with
    /// `-2`, `-3`, ... until the name is free.
    pub fn create(explicit: Option<&Path>, root: &Path, stem: &str) -> Result<Self> {
        let path = match explicit {
            Some(p) => p.to_path_buf(),
            None => {
                let mut p = root.join(stem);
                let mut n = 2;
                while p.exists() {
                    p = root.join(format!("{stem}-{n}"));
                    n += 1;
                }
                p
            }
        };
        fs::create_dir_all(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(RunDir {
            path,
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, body: &str) -> Result<()> {
        let p = self.path.join(name);
        fs::write(&p, body).with_context(|| format!("writing {}", p.display()))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }
}

/// Comma-separated table built row by row.
pub struct Csv(String);

impl Csv {
    pub fn new(header: &str) -> Self {
        Csv(format!("{header}\n"))
    }

    pub fn with_comment(comment: &str, header: &str) -> Self {
        Csv(format!("# {comment}\n{header}\n"))
    }

    pub fn row(&mut self, fields: &[&dyn std::fmt::Display]) {
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                self.0.push(',');
            }
            write!(self.0, "{f}").expect("write to string");
        }
        self.0.push('\n');
    }

    pub fn finish(self) -> String {
        self.0
    }
}

#[derive(Serialize)]
pub struct Versions {
    pub tljunction: &'static str,
    pub cli: &'static str,
}

/// Everything needed to reproduce a run.
#[derive(Serialize)]
pub struct RunManifest<'a, T: Serialize> {
    pub command: &'a str,
    pub argv: Vec<String>,
    pub versions: Versions,
    pub jobs: Option<usize>,
    pub scenario_path: Option<String>,
    /// Normalized scenario contents, so the run can be replayed without the file.
    pub scenario: Option<String>,
    pub parameters: T,
    pub tolerances: &'a Tolerances,
    pub output_dir: String,
    pub outputs: Vec<String>,
    /// Wall-clock allowance, when the command has one.
    pub budget_seconds: Option<f64>,
    pub elapsed_seconds: f64,
}

pub fn write_manifest<T: Serialize>(dir: &mut RunDir, manifest: RunManifest<'_, T>, start: Instant) -> Result<()> {
    let mut m = manifest;
    m.output_dir = dir.path.display().to_string();
    m.outputs = dir.files().to_vec();
    m.elapsed_seconds = start.elapsed().as_secs_f64();
    let body = serde_json::to_string_pretty(&m)? + "\n";
    dir.write("manifest.json", &body)
}
