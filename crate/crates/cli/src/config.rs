//! Identification run configuration (`identify <config.json>`).
//!
//! ```json
//! {
//!   "gp": { "population_size": 50, "iterations": 30, "max_adjunctions": 40, "seed": 3 },
//!   "data": { "csv": { "files": ["est.csv", "val.csv"], "input": "u", "output": "y" } },
//!   "split": { "estimation": [{ "record": 0 }], "validation": [{ "record": 1 }] },
//!   "auxiliary_trees": ["beta1", "beta2", "beta5"]
//! }
//! ```
//!
//! `data` may instead hold `{"synthetic": <SyntheticSpec>}`. Relative paths
//! are resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use tagnarx::data::{load_csv, split, Split, SyntheticSpec};
use tagnarx::narx::{g_narx, restrict};
use tagnarx::{Dataset64, GpConfig, Grammar, SplitSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub gp: GpConfig,
    pub data: DataSource,
    /// Defaults to all but the last record for estimation and the last for
    /// validation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitSpec>,
    /// Grammar file; the built-in NARX grammar when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grammar: Option<PathBuf>,
    /// Auxiliary trees to keep, e.g. `["beta1", "beta5"]` for FIR models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auxiliary_trees: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Csv(CsvSource),
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub files: Vec<PathBuf>,
    #[serde(default = "input_column")]
    pub input: String,
    #[serde(default = "output_column")]
    pub output: String,
}

pub fn input_column() -> String {
    "u".into()
}

pub fn output_column() -> String {
    "y".into()
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    /// Parses `text`; relative paths are made absolute against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_str(text).context("parsing run config")?;
        if let DataSource::Csv(c) = &mut cfg.data {
            for f in &mut c.files {
                *f = resolve(base, f);
            }
        }
        if let Some(g) = &mut cfg.grammar {
            *g = resolve(base, g);
        }
        cfg.gp.validate()?;
        Ok(cfg)
    }

    pub fn grammar(&self) -> Result<Grammar> {
        let g = match &self.grammar {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                Grammar::from_json(&text).with_context(|| format!("loading grammar {}", path.display()))?
            }
            None => g_narx(),
        };
        Ok(match &self.auxiliary_trees {
            Some(keep) => restrict(&g, keep)?,
            None => g,
        })
    }

    pub fn records(&self) -> Result<Vec<Dataset64>> {
        Ok(match &self.data {
            DataSource::Csv(c) => {
                if c.files.is_empty() {
                    bail!("data.csv.files is empty");
                }
                c.files
                    .iter()
                    .map(|f| {
                        load_csv(f, (c.input.as_str(), c.output.as_str()))
                            .with_context(|| format!("loading {}", f.display()))
                    })
                    .collect::<Result<_>>()?
            }
            DataSource::Synthetic(s) => s.generate().context("generating synthetic data")?,
        })
    }

    pub fn split(&self, records: &[Dataset64]) -> Result<Split<f64>> {
        let spec = match &self.split {
            Some(s) => s.clone(),
            None if records.len() >= 2 => SplitSpec::leave_last_out(records.len()),
            None => bail!("a single record needs an explicit `split`"),
        };
        let s = split(records, &spec)?;
        if !s.estimation_usable() {
            bail!("split has no estimation data");
        }
        if s.validation.is_empty() {
            bail!("split has no validation data");
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_paths() {
        let cfg = RunConfig::parse(r#"{"data": {"csv": {"files": ["a.csv", "/abs/b.csv"]}}}"#, Path::new("/cfg")).unwrap();
        assert_eq!(cfg.gp, GpConfig::default());
        let DataSource::Csv(c) = &cfg.data else { panic!() };
        assert_eq!(c.files, [PathBuf::from("/cfg/a.csv"), PathBuf::from("/abs/b.csv")]);
        assert_eq!((c.input.as_str(), c.output.as_str()), ("u", "y"));
    }

    #[test]
    fn rejects_unknown_fields_and_bad_gp() {
        assert!(RunConfig::parse(r#"{"data": {"csv": {"files": []}}, "extra": 1}"#, Path::new(".")).is_err());
        assert!(RunConfig::parse(r#"{"data": {"csv": {"files": []}}, "gp": {"iterations": 0}}"#, Path::new(".")).is_err());
    }

    #[test]
    fn restricted_grammar() {
        let cfg = RunConfig::parse(
            r#"{"data": {"csv": {"files": []}}, "auxiliary_trees": ["beta1", "beta5"]}"#,
            Path::new("."),
        )
        .unwrap();
        assert_eq!(cfg.grammar().unwrap().auxiliary_trees.len(), 2);
    }
}
