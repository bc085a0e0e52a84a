//! Output directory: CSV tables with a parameter header block, and one
//! `summary.toml` per run.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use sav_bottleneck::ModelParams;
use serde::Serialize;
use toml::{Table, Value};

use crate::error::CliError;

pub struct Output {
    dir: PathBuf,
    params: ModelParams,
    files: Vec<String>,
    summary: Table,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl Output {
    pub fn create(dir: &Path, command: &str, source: &str, params: ModelParams) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut summary = Table::new();
        summary.insert("command".into(), Value::String(command.into()));
        summary.insert("config".into(), Value::String(source.into()));
        let mut p = Table::new();
        for (k, v) in sav_bottleneck::params::PARAM_KEYS.iter().zip(param_values(&params)) {
            p.insert((*k).into(), Value::Float(v));
        }
        summary.insert("params".into(), Value::Table(p));
        Ok(Output {
            dir: dir.to_path_buf(),
            params,
            files: Vec::new(),
            summary,
        })
    }

    pub fn write_csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut file = File::create(&path).map_err(io_err(&path))?;
        file.write_all(self.params.header_block().as_bytes())
            .map_err(io_err(&path))?;
        let mut w = csv::Writer::from_writer(file);
        for row in rows {
            w.serialize(row).map_err(|source| CliError::Csv {
                path: path.clone(),
                source,
            })?;
        }
        w.flush().map_err(io_err(&path))?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// A `[name]` table in the summary, created on first use.
    pub fn section(&mut self, name: &str) -> &mut Table {
        let entry = self
            .summary
            .entry(name.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        match entry {
            Value::Table(t) => t,
            _ => unreachable!("summary sections are tables"),
        }
    }

    /// Writes `summary.toml` and returns the files written, summary last.
    pub fn finish(mut self, passed: bool) -> Result<Vec<String>, CliError> {
        self.summary.insert(
            "status".into(),
            Value::String(if passed { "ok" } else { "failed" }.into()),
        );
        self.files.push("summary.toml".into());
        let listed = self.files.iter().map(|f| Value::String(f.clone())).collect();
        self.summary.insert("files".into(), Value::Array(listed));
        let path = self.dir.join("summary.toml");
        let text = toml::to_string(&self.summary).expect("summary holds only plain values");
        fs::write(&path, text).map_err(io_err(&path))?;
        Ok(self.files)
    }
}

fn param_values(p: &ModelParams) -> [f64; 10] {
    [
        p.n_total, p.mu, p.kappa, p.theta, p.beta, p.gamma, p.t_f, p.f_n, p.f_a, p.m,
    ]
}
