//! Number formatting and the csv layout of saved fits.

use std::io::Read;

use crate::config::ModelName;
use crate::error::{CliError, Result};

/// Marker row separating the weight table from the summary block.
pub const SUMMARY_MARKER: &str = "# summary";

/// Fixed 6 significant digits, switching to exponent form outside
/// `[1e-5, 1e6)`.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // rounding can carry into a new digit, e.g. 9.999996 -> 10.00000
        if s.trim_start_matches('-').replace('.', "").trim_start_matches('0').len() > 6 && decimals > 0 {
            let d = decimals - 1;
            return format!("{x:.d$}");
        }
        s
    } else {
        format!("{x:.5e}")
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn full(x: f64) -> String {
    if x != 0.0 && x.is_finite() && (x.abs() < 1e-4 || x.abs() >= 1e15) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub fn opt_full(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), full)
}

pub fn opt_sig6(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), sig6)
}

/// Column names of an atom's coordinates.
pub fn coordinate_names(model: ModelName, categories: u32) -> Vec<String> {
    match model {
        ModelName::Bernoulli => vec!["theta".into()],
        ModelName::StrataBinomial => vec!["pi".into(), "p".into()],
        ModelName::PoissonBinomial => vec!["lambda".into(), "p".into()],
        ModelName::SurveyGeometric => {
            let mut v = vec!["pi".to_string()];
            v.extend((1..=categories).map(|s| format!("q{s}")));
            v
        }
    }
}

/// A fit read back from its csv output.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedFit {
    pub coordinate_names: Vec<String>,
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub summary: Vec<(String, String)>,
}

impl SavedFit {
    pub fn summary_value(&self, key: &str) -> Option<&str> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

pub fn read_saved_fit<R: Read>(input: R) -> Result<SavedFit> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = reader.records();
    let bad = |msg: String| CliError::Data(msg);
    let header = records
        .next()
        .ok_or_else(|| bad("saved fit is empty".into()))?
        .map_err(|e| bad(e.to_string()))?;
    let width = header.len();
    if width < 2 || header.get(width - 1) != Some("weight") {
        return Err(bad("saved fit must start with a header ending in `weight`".into()));
    }
    let coordinate_names = header.iter().take(width - 1).map(String::from).collect();
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    let mut summary = Vec::new();
    let mut in_summary = false;
    for record in records {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.get(0) == Some(SUMMARY_MARKER) {
            in_summary = true;
            continue;
        }
        if in_summary {
            if let (Some(k), Some(v)) = (record.get(0), record.get(1)) {
                if k != "key" {
                    summary.push((k.to_string(), v.to_string()));
                }
            }
            continue;
        }
        if record.len() != width {
            return Err(bad(format!(
                "line {line}: expected {width} fields, found {}",
                record.len()
            )));
        }
        let nums: Vec<f64> = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| bad(format!("line {line}: `{f}` is not a number")))
            })
            .collect::<Result<_>>()?;
        weights.push(nums[width - 1]);
        atoms.push(nums[..width - 1].to_vec());
    }
    Ok(SavedFit {
        coordinate_names,
        atoms,
        weights,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.5), "0.500000");
        assert_eq!(sig6(0.0123456789), "0.0123457");
        assert_eq!(sig6(123.456789), "123.457");
        assert_eq!(sig6(1e-9), "1.00000e-9");
        assert_eq!(sig6(-0.25), "-0.250000");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(9.9999996), "10.0000");
        assert_eq!(sig6(42.0), "42.0000");
    }

    #[test]
    fn full_precision_round_trips() {
        for x in [0.1, 1.0 / 3.0, 2.5e-7, 1e-300, 123456.789, 0.0, 1e20] {
            assert_eq!(full(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(full(0.5), "0.5");
        assert_eq!(opt_full(None), "NA");
    }

    #[test]
    fn saved_fit_parses() {
        let text = "pi,p,weight\n0,0.5,0.25\n1,0.5,0.75\n# summary\nkey,value\neta_hat,0.5\n\"marginal (0, 1)\",0.5\n";
        let fit = read_saved_fit(text.as_bytes()).unwrap();
        assert_eq!(fit.coordinate_names, vec!["pi", "p"]);
        assert_eq!(fit.atoms, vec![vec![0.0, 0.5], vec![1.0, 0.5]]);
        assert_eq!(fit.weights, vec![0.25, 0.75]);
        assert_eq!(fit.summary_value("eta_hat"), Some("0.5"));
        assert_eq!(fit.summary_value("marginal (0, 1)"), Some("0.5"));
    }
}
