//! File writers. CSVs start with `#` comment lines carrying the run metadata,
//! then a mandatory header row; JSON files carry the same metadata under `meta`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use microhub::ca_model::VarianceParams;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub const TOOL: &str = "microhub";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub params_provenance: String,
    pub params: VarianceParams,
    pub config: ExperimentConfig,
}

impl Meta {
    pub fn new(command: &'static str, config: &ExperimentConfig, params: VarianceParams) -> Self {
        Self {
            tool: TOOL,
            version: VERSION,
            command,
            seed: config.seed,
            params_provenance: config.params.provenance(),
            params,
            config: config.clone(),
        }
    }

    fn preamble(&self) -> CliResult<Vec<String>> {
        Ok(vec![
            format!("# tool: {} {}", self.tool, self.version),
            format!("# command: {}", self.command),
            format!("# seed: {}", self.seed),
            format!("# params_provenance: {}", self.params_provenance),
            format!("# params: {}", serde_json::to_string(&self.params)?),
            format!("# config: {}", serde_json::to_string(&self.config)?),
        ])
    }
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("creating {}: {e}", dir.display())))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", path.display())))
}

pub fn write_csv(dir: &Path, name: &str, meta: &Meta, header: &[&str], rows: &[Vec<String>]) -> CliResult<PathBuf> {
    let path = dir.join(name);
    let mut out = create(&path)?;
    for line in meta.preamble()? {
        writeln!(out, "{line}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(CliError::Internal(format!("{name}: row has {} fields, header {}", row.len(), header.len())));
        }
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(path)
}

#[derive(Serialize)]
struct WithMeta<'a, T: Serialize> {
    meta: &'a Meta,
    #[serde(flatten)]
    body: &'a T,
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, meta: &Meta, body: &T) -> CliResult<PathBuf> {
    let path = dir.join(name);
    let mut out = create(&path)?;
    serde_json::to_writer_pretty(&mut out, &WithMeta { meta, body })?;
    writeln!(out)?;
    out.flush()?;
    Ok(path)
}

/// Plain decimal rendering; empty for absent values.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Read the data rows of a CSV written by [`write_csv`], keyed by the header.
pub fn read_csv(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
    let header = r.headers()?.iter().map(str::to_owned).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_owned).collect()))
        .collect::<Result<_, _>>()?;
    Ok((header, rows))
}

/// Sample mean and standard error; the error needs at least two values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: Option<f64>,
}

impl MeanStderr {
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let stderr = (xs.len() >= 2).then(|| {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        });
        Some(Self { mean, stderr })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_stderr() {
        assert!(MeanStderr::of(&[]).is_none());
        let one = MeanStderr::of(&[3.0]).unwrap();
        assert_eq!(one.mean, 3.0);
        assert!(one.stderr.is_none());
        let two = MeanStderr::of(&[1.0, 3.0]).unwrap();
        assert_eq!(two.mean, 2.0);
        assert!((two.stderr.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip_skips_preamble() {
        let dir = tempfile::tempdir().unwrap();
        let meta = Meta::new("test", &ExperimentConfig::default(), VarianceParams::recalibrated());
        let rows = vec![vec!["1".to_string(), "a,b".to_string()]];
        let p = write_csv(dir.path(), "x.csv", &meta, &["k", "v"], &rows).unwrap();
        let (h, r) = read_csv(&p).unwrap();
        assert_eq!(h, vec!["k", "v"]);
        assert_eq!(r, rows);
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("# tool: microhub"));
    }
}
