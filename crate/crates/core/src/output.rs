//! CSV result files and the run manifest.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};

/// `%.12g`-style rendering: 12 significant digits, trailing zeros trimmed.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One CSV cell.
#[derive(Debug, Clone)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::I(x as i64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::I(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::S(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::S(x)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => fmt_float(*x),
            Cell::I(x) => x.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

/// `Some(r)` as `r`, `None` as `inf`.
pub fn steps_cell(r: Option<usize>) -> Cell {
    match r {
        Some(r) => Cell::I(r as i64),
        None => Cell::S("inf".into()),
    }
}

#[macro_export]
macro_rules! row {
    ($($x:expr),* $(,)?) => {
        vec![$($crate::output::Cell::from($x)),*]
    };
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    version: &'a str,
    started_unix: u64,
    wall_time_s: f64,
    threads: usize,
    config: &'a ExperimentConfig,
    files: &'a [String],
    summary: &'a serde_json::Value,
}

/// Output directory of one run. Every file goes through here so the
/// manifest lists all of them.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
    started: Instant,
    started_unix: u64,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
            started: Instant::now(),
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<Cell>]) -> Result<PathBuf> {
        let path = self.root.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(csv_error)?;
        w.write_record(header).map_err(csv_error)?;
        for r in rows {
            if r.len() != header.len() {
                return Err(Error::Numerical(format!("{name}: row has {} cells, header {}", r.len(), header.len())));
            }
            w.write_record(r.iter().map(Cell::render)).map_err(csv_error)?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(path)
    }

    /// Write `manifest.json` and return its path.
    pub fn finish(self, config: &ExperimentConfig, summary: &serde_json::Value) -> Result<PathBuf> {
        let path = self.root.join("manifest.json");
        let m = Manifest {
            experiment: config.kind.name(),
            version: env!("CARGO_PKG_VERSION"),
            started_unix: self.started_unix,
            wall_time_s: self.started.elapsed().as_secs_f64(),
            threads: crate::parallel::current_threads(),
            config,
            files: &self.files,
            summary,
        };
        let text = serde_json::to_string_pretty(&m).map_err(|e| Error::Numerical(e.to_string()))?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
