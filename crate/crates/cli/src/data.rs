//! Observation files: comma-delimited, header row required, one observation
//! per row.
//!
//! | model            | columns                    | non-response row        |
//! |------------------|----------------------------|-------------------------|
//! | bernoulli        | `y`                        | none                    |
//! | strata-binomial  | `X,kappa_obs`              | `kappa_obs = 0`         |
//! | poisson-binomial | `X,kappa_obs`              | `kappa_obs = 0`         |
//! | survey-geometric | `category_index,attempts`  | `0,0`                   |
//!
//! Survey categories are numbered from 1.

use std::io::Read;
use std::path::Path;

use gmle_core::{ObservationSet, Outcome};

use crate::config::ModelName;
use crate::error::{CliError, Result};

/// Limits needed to range-check rows.
#[derive(Debug, Clone, Copy)]
pub struct Limits {
    /// Largest admissible `kappa_obs`; `None` accepts any.
    pub max_kappa: Option<u32>,
    pub attempts: u32,
    pub categories: u32,
}

pub fn columns(model: ModelName) -> [&'static str; 2] {
    match model {
        ModelName::Bernoulli => ["y", ""],
        ModelName::StrataBinomial | ModelName::PoissonBinomial => ["X", "kappa_obs"],
        ModelName::SurveyGeometric => ["category_index", "attempts"],
    }
}

pub fn read_path(path: &Path, model: ModelName, limits: Limits) -> Result<Vec<Outcome>> {
    let file = std::fs::File::open(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read(file, model, limits)
}

pub fn read<R: Read>(input: R, model: ModelName, limits: Limits) -> Result<Vec<Outcome>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| CliError::Data(format!("header: {e}")))?
        .clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(CliError::Usage("input file is empty".into()));
    }
    let wanted = columns(model);
    let mut idx = [0usize; 2];
    for (slot, name) in wanted.iter().enumerate().filter(|(_, n)| !n.is_empty()) {
        idx[slot] = headers.iter().position(|h| h == *name).ok_or_else(|| {
            CliError::Data(format!(
                "line 1: missing column `{name}` (a {} file needs columns {})",
                model_label(model),
                wanted
                    .iter()
                    .filter(|n| !n.is_empty())
                    .copied()
                    .collect::<Vec<_>>()
                    .join(",")
            ))
        })?;
    }

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Data(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |slot: usize| -> Result<u32> {
            let raw = record.get(idx[slot]).unwrap_or("");
            raw.parse::<u32>().map_err(|_| {
                CliError::Data(format!(
                    "line {line}: `{}` = {raw:?} is not a non-negative integer",
                    wanted[slot]
                ))
            })
        };
        let outcome = match model {
            ModelName::Bernoulli => match field(0)? {
                y @ (0 | 1) => Outcome::Observed(y, 1),
                y => return Err(CliError::Data(format!("line {line}: y = {y} must be 0 or 1"))),
            },
            ModelName::StrataBinomial | ModelName::PoissonBinomial => {
                let (x, k) = (field(0)?, field(1)?);
                if k == 0 {
                    if x != 0 {
                        return Err(CliError::Data(format!(
                            "line {line}: non-response row (kappa_obs = 0) must have X = 0"
                        )));
                    }
                    Outcome::NonResponse
                } else if x > k {
                    return Err(CliError::Data(format!("line {line}: X = {x} exceeds kappa_obs = {k}")));
                } else if limits.max_kappa.is_some_and(|m| k > m) {
                    return Err(CliError::Data(format!(
                        "line {line}: kappa_obs = {k} exceeds the model maximum {}",
                        limits.max_kappa.unwrap_or_default()
                    )));
                } else {
                    Outcome::Observed(x, k)
                }
            }
            ModelName::SurveyGeometric => match (field(0)?, field(1)?) {
                (0, 0) => Outcome::NonResponse,
                (s, k) if !(1..=limits.categories).contains(&s) => {
                    return Err(CliError::Data(format!(
                        "line {line}: category_index = {s} outside 1..={} (k = {k})",
                        limits.categories
                    )))
                }
                (_, k) if !(1..=limits.attempts).contains(&k) => {
                    return Err(CliError::Data(format!(
                        "line {line}: attempts = {k} outside 1..={}",
                        limits.attempts
                    )))
                }
                (s, k) => Outcome::Observed(s, k),
            },
        };
        out.push(outcome);
    }
    if out.is_empty() {
        return Err(CliError::Usage("input file has no observations".into()));
    }
    Ok(out)
}

pub fn to_observation_set(outcomes: Vec<Outcome>) -> Result<ObservationSet> {
    Ok(ObservationSet::from_outcomes(outcomes)?)
}

fn model_label(model: ModelName) -> &'static str {
    match model {
        ModelName::Bernoulli => "bernoulli",
        ModelName::StrataBinomial => "strata-binomial",
        ModelName::SurveyGeometric => "survey-geometric",
        ModelName::PoissonBinomial => "poisson-binomial",
    }
}
