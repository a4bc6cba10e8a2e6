use std::io::Write;
use std::sync::Arc;

use gmle_core::estimators::{eta_gmle, eta_naive, EstimateReport};
use gmle_core::models::{Model, ObservationModel};
use gmle_core::sim::{run_table_with, TableRow};
use gmle_core::solver::{discrepancy, fit, multi_start_fit, FitResult};
use gmle_core::{ObservationSet, Outcome, ParameterGrid};

use crate::config::{Format, ModelName, RunConfig};
use crate::data::{self, Limits};
use crate::error::{CliError, Result};
use crate::output::{coordinate_names, full, opt_full, opt_sig6, sig6, SUMMARY_MARKER};

/// Verification passes when marginals and mean estimates agree this closely.
pub const VERIFY_TOL: f64 = 1e-5;

/// Atoms lighter than this are left out of the table-mode weight listing.
const SHOW_WEIGHT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    VerificationFailed,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::VerificationFailed => 3,
        }
    }
}

fn io(e: std::io::Error) -> CliError {
    CliError::Io {
        path: "<output>".into(),
        source: e,
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Data(format!("writing csv: {e}"))
}

/// Send csv bytes to `--out` when given, else to stdout.
fn emit_csv(cfg: &RunConfig, bytes: Vec<u8>, out: &mut dyn Write) -> Result<()> {
    match &cfg.out {
        Some(path) => std::fs::write(path, bytes).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        }),
        None => out.write_all(&bytes).map_err(io),
    }
}

fn load_observations(cfg: &mut RunConfig) -> Result<ObservationSet> {
    let limits = Limits {
        max_kappa: match cfg.model {
            ModelName::StrataBinomial => cfg.kappa,
            ModelName::PoissonBinomial => {
                Some(gmle_core::models::PoissonBinomialModel::new(cfg.lambda_max)?.overflow_level())
            }
            _ => None,
        },
        attempts: cfg.attempts,
        categories: cfg.categories,
    };
    let path = cfg
        .input
        .clone()
        .ok_or_else(|| CliError::Usage("no input file".into()))?;
    let outcomes = data::read_path(&path, cfg.model, limits)?;
    if cfg.model == ModelName::StrataBinomial && cfg.kappa.is_none() {
        let k = outcomes.iter().filter_map(|y| match y {
            Outcome::Observed(_, k) => Some(*k),
            Outcome::NonResponse => None,
        });
        cfg.kappa = Some(k.max().ok_or_else(|| {
            CliError::Usage("cannot infer --kappa from a file without respondents; pass --kappa".into())
        })?);
    }
    data::to_observation_set(outcomes)
}

fn eta_cells(report: &EstimateReport) -> Vec<(String, f64)> {
    match report.eta_hat.as_slice() {
        [x] => vec![("eta_hat".into(), *x)],
        many => many
            .iter()
            .enumerate()
            .map(|(i, x)| (format!("eta_hat_{}", i + 1), *x))
            .collect(),
    }
}

pub fn cmd_fit(mut cfg: RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<Status> {
    let obs = load_observations(&mut cfg)?;
    let model = cfg.build_model()?;
    let grid = cfg.build_grid()?;
    write!(out, "{}", cfg.header()).map_err(io)?;
    let m = model.as_dyn();
    let fitted = fit(m, &obs, &grid, cfg.mode, &cfg.solver)?;
    let report = eta_gmle(&fitted, m);
    let naive = (obs.respondents() > 0).then(|| eta_naive(&obs, m)).transpose()?;
    if cfg.format == Format::Csv {
        for w in &report.warnings {
            writeln!(err, "warning: {}", w.message()).map_err(io)?;
        }
    }
    match cfg.format {
        Format::Table => write_fit_table(&cfg, &obs, &fitted, &report, naive.as_ref(), out),
        Format::Csv => {
            let bytes = fit_csv(&cfg, &grid, &obs, &fitted, &report)?;
            emit_csv(&cfg, bytes, out)
        }
    }?;
    Ok(Status::Success)
}

fn write_fit_table(
    cfg: &RunConfig,
    obs: &ObservationSet,
    fitted: &FitResult,
    report: &EstimateReport,
    naive: Option<&EstimateReport>,
    out: &mut dyn Write,
) -> Result<()> {
    let mut rows: Vec<(String, String)> = eta_cells(report).into_iter().map(|(k, v)| (k, sig6(v))).collect();
    if let Some(n) = naive {
        for (k, v) in eta_cells(n) {
            rows.push((k.replace("eta_hat", "naive"), sig6(v)));
        }
    }
    rows.extend([
        ("loglik".into(), sig6(fitted.loglik())),
        ("kkt_gap".into(), sig6(fitted.kkt_gap)),
        ("iterations".into(), fitted.iterations.to_string()),
        ("converged".into(), fitted.converged.to_string()),
        ("observations".into(), obs.n().to_string()),
        ("respondents".into(), obs.respondents().to_string()),
    ]);
    if let Some(d) = report.diagnostics.get("delta_min") {
        rows.push(("delta_min".into(), sig6(*d)));
    }
    for (k, v) in rows {
        writeln!(out, "{k:<14}{v}").map_err(io)?;
    }
    for w in &report.warnings {
        writeln!(out, "warning: {}", w.message()).map_err(io)?;
    }

    writeln!(
        out,
        "\n{:<18}{:>8}  {:>12}  {:>12}",
        "outcome", "count", "empirical", "fitted"
    )
    .map_err(io)?;
    let n = obs.n() as f64;
    for ((y, c), f) in obs.entries().iter().zip(&fitted.fitted_marginals) {
        writeln!(
            out,
            "{:<18}{:>8}  {:>12}  {:>12}",
            y.to_string(),
            c,
            sig6(*c as f64 / n),
            sig6(*f)
        )
        .map_err(io)?;
    }

    let names = coordinate_names(cfg.model, cfg.categories).join(", ");
    writeln!(out, "\n{:<32}{:>12}", format!("atom ({names})"), "weight").map_err(io)?;
    let mut hidden = 0;
    for (atom, w) in fitted.g_hat.grid().iter().zip(fitted.g_hat.weights()) {
        if *w < SHOW_WEIGHT {
            hidden += 1;
            continue;
        }
        let coords: Vec<String> = atom.coords().iter().map(|c| sig6(*c)).collect();
        writeln!(out, "{:<32}{:>12}", format!("({})", coords.join(", ")), sig6(*w)).map_err(io)?;
    }
    if hidden > 0 {
        writeln!(out, "({hidden} atoms with weight below {SHOW_WEIGHT:e} not shown)").map_err(io)?;
    }
    Ok(())
}

fn fit_csv(
    cfg: &RunConfig,
    grid: &Arc<ParameterGrid>,
    obs: &ObservationSet,
    fitted: &FitResult,
    report: &EstimateReport,
) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    let mut header = coordinate_names(cfg.model, cfg.categories);
    header.push("weight".into());
    w.write_record(&header).map_err(csv_err)?;
    for (atom, weight) in grid.iter().zip(fitted.g_hat.weights()) {
        let mut rec: Vec<String> = atom.coords().iter().map(|c| full(*c)).collect();
        rec.push(full(*weight));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.write_record([SUMMARY_MARKER]).map_err(csv_err)?;
    w.write_record(["key", "value"]).map_err(csv_err)?;
    let mut summary: Vec<(String, String)> = eta_cells(report).into_iter().map(|(k, v)| (k, full(v))).collect();
    summary.extend([
        ("loglik".into(), full(fitted.loglik())),
        ("kkt_gap".into(), full(fitted.kkt_gap)),
        ("iterations".into(), fitted.iterations.to_string()),
        ("converged".into(), fitted.converged.to_string()),
        ("observations".into(), obs.n().to_string()),
        ("respondents".into(), obs.respondents().to_string()),
    ]);
    for ((y, _), f) in obs.entries().iter().zip(&fitted.fitted_marginals) {
        summary.push((format!("marginal {y}"), full(*f)));
    }
    for w_ in &report.warnings {
        summary.push(("warning".into(), w_.message().into()));
    }
    for (k, v) in summary {
        w.write_record([k, v]).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::Data(format!("writing csv: {e}")))
}

pub fn cmd_simulate(cfg: RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<Status> {
    let specs = cfg.population_specs()?;
    let grid = cfg.build_grid()?;
    let seed = cfg
        .seed
        .ok_or_else(|| CliError::Usage("simulate needs --seed".into()))?;
    write!(out, "{}", cfg.header()).map_err(io)?;
    let n_designs = specs.len();
    let reps = cfg.reps;
    let rows = run_table_with(&specs, reps, &grid, &cfg.solver, seed, |d, r| {
        if r + 1 == reps {
            let _ = writeln!(err, "design {}/{} done", d + 1, n_designs);
        }
    })?;
    match cfg.format {
        Format::Table => write_sim_table(&cfg, &rows, out)?,
        Format::Csv => emit_csv(&cfg, sim_csv(&rows)?, out)?,
    }
    Ok(Status::Success)
}

fn design_column(cfg: &RunConfig) -> &'static str {
    match cfg.preset {
        Some(crate::config::Preset::Table2) => "kappa",
        _ => "delta",
    }
}

fn write_sim_table(cfg: &RunConfig, rows: &[TableRow], out: &mut dyn Write) -> Result<()> {
    let line = |c: [&str; 6]| format!("{:<8}{:>12}{:>12}{:>12}{:>12}{:>8}", c[0], c[1], c[2], c[3], c[4], c[5]);
    writeln!(
        out,
        "{}",
        line([
            design_column(cfg),
            "naive mean",
            "naive sd",
            "gmle mean",
            "gmle sd",
            "reps"
        ])
    )
    .map_err(io)?;
    for row in rows {
        let cells = [
            row.spec.design_label().to_string(),
            sig6(row.naive.mean),
            opt_sig6(row.naive.sd),
            sig6(row.gmle.mean),
            opt_sig6(row.gmle.sd),
            row.gmle.n_reps.to_string(),
        ];
        writeln!(out, "{}", line(cells.each_ref().map(String::as_str))).map_err(io)?;
    }
    for row in rows.iter().filter(|r| r.n_converged < r.gmle.n_reps) {
        writeln!(
            out,
            "note: {} = {}: {}/{} fits reached the KKT tolerance (max gap {})",
            design_column(cfg),
            row.spec.design_label(),
            row.n_converged,
            row.gmle.n_reps,
            sig6(row.max_kkt_gap)
        )
        .map_err(io)?;
    }
    Ok(())
}

fn sim_csv(rows: &[TableRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["design", "naive_mean", "naive_sd", "gmle_mean", "gmle_sd", "n_reps"])
        .map_err(csv_err)?;
    for row in rows {
        w.write_record([
            full(row.spec.design_label()),
            full(row.naive.mean),
            opt_full(row.naive.sd),
            full(row.gmle.mean),
            opt_full(row.gmle.sd),
            row.gmle.n_reps.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::Data(format!("writing csv: {e}")))
}

/// Pairwise comparison of converged starts.
#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub converged: Vec<usize>,
    pub max_marginal_diff: f64,
    pub max_weight_diff: f64,
    pub eta_spread: f64,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.converged.len() >= 2 && self.max_marginal_diff <= VERIFY_TOL && self.eta_spread <= VERIFY_TOL
    }
}

pub fn compare_starts(fits: &[FitResult], model: &dyn ObservationModel) -> Verification {
    let converged: Vec<usize> = (0..fits.len()).filter(|&i| fits[i].converged).collect();
    let mut v = Verification {
        converged,
        max_marginal_diff: 0.0,
        max_weight_diff: 0.0,
        eta_spread: 0.0,
    };
    let etas: Vec<Vec<f64>> = v.converged.iter().map(|&i| eta_gmle(&fits[i], model).eta_hat).collect();
    for (a, &i) in v.converged.iter().enumerate() {
        for (b, &j) in v.converged.iter().enumerate().skip(a + 1) {
            let d = discrepancy(&fits[i], &fits[j]);
            v.max_marginal_diff = v.max_marginal_diff.max(d.max_marginal_diff);
            v.max_weight_diff = v.max_weight_diff.max(d.max_weight_diff);
            for (x, y) in etas[a].iter().zip(&etas[b]) {
                v.eta_spread = v.eta_spread.max((x - y).abs());
            }
        }
    }
    v
}

/// Half zeros, half ones.
pub fn example_one(n: u64) -> ObservationSet {
    let zeros = n / 2;
    let mut entries = vec![(Outcome::Observed(0, 1), zeros)];
    if n > zeros {
        entries.push((Outcome::Observed(1, 1), n - zeros));
    }
    ObservationSet::from_counts(entries.into_iter().filter(|(_, c)| *c > 0).collect()).expect("counts are positive")
}

pub fn cmd_verify(mut cfg: RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<Status> {
    let obs = match cfg.input {
        Some(_) => load_observations(&mut cfg)?,
        None if cfg.n == 0 => return Err(CliError::Usage("--n must be positive".into())),
        None => example_one(cfg.n),
    };
    let model: Model = cfg.build_model()?;
    let m = model.as_dyn();
    let grid = cfg.build_grid()?;
    write!(out, "{}", cfg.header()).map_err(io)?;
    let fits = multi_start_fit(m, &obs, &grid, cfg.mode, &cfg.solver)?;
    for (i, f) in fits.iter().enumerate().filter(|(_, f)| !f.converged) {
        writeln!(
            err,
            "start {i}: not converged after {} iterations (kkt gap {})",
            f.iterations,
            sig6(f.kkt_gap)
        )
        .map_err(io)?;
    }
    let v = compare_starts(&fits, m);
    match cfg.format {
        Format::Table => {
            writeln!(
                out,
                "{:<7}{:>11}{:>12}{:>14}{:>16}{:>12}",
                "start", "converged", "iterations", "kkt_gap", "loglik", "eta_hat"
            )
            .map_err(io)?;
            for (i, f) in fits.iter().enumerate() {
                let eta = eta_gmle(f, m)
                    .eta_hat
                    .iter()
                    .map(|x| sig6(*x))
                    .collect::<Vec<_>>()
                    .join(" ");
                writeln!(
                    out,
                    "{:<7}{:>11}{:>12}{:>14}{:>16}{:>12}",
                    i,
                    f.converged,
                    f.iterations,
                    sig6(f.kkt_gap),
                    sig6(f.loglik()),
                    eta
                )
                .map_err(io)?;
            }
            writeln!(out, "\nconverged starts          {}/{}", v.converged.len(), fits.len()).map_err(io)?;
            writeln!(out, "max marginal discrepancy  {}", sig6(v.max_marginal_diff)).map_err(io)?;
            writeln!(out, "max weight discrepancy    {}", sig6(v.max_weight_diff)).map_err(io)?;
            writeln!(out, "eta spread                {}", sig6(v.eta_spread)).map_err(io)?;
            writeln!(
                out,
                "result                    {}",
                if v.passed() { "PASS" } else { "FAIL" }
            )
            .map_err(io)?;
        }
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
            w.write_record(["start", "converged", "iterations", "kkt_gap", "loglik", "eta_hat"])
                .map_err(csv_err)?;
            for (i, f) in fits.iter().enumerate() {
                let eta = eta_gmle(f, m)
                    .eta_hat
                    .iter()
                    .map(|x| full(*x))
                    .collect::<Vec<_>>()
                    .join(" ");
                w.write_record([
                    i.to_string(),
                    f.converged.to_string(),
                    f.iterations.to_string(),
                    full(f.kkt_gap),
                    full(f.loglik()),
                    eta,
                ])
                .map_err(csv_err)?;
            }
            w.write_record([SUMMARY_MARKER]).map_err(csv_err)?;
            w.write_record(["key", "value"]).map_err(csv_err)?;
            for (k, val) in [
                ("converged_starts", v.converged.len().to_string()),
                ("max_marginal_diff", full(v.max_marginal_diff)),
                ("max_weight_diff", full(v.max_weight_diff)),
                ("eta_spread", full(v.eta_spread)),
                ("result", if v.passed() { "PASS" } else { "FAIL" }.into()),
            ] {
                w.write_record([k.to_string(), val]).map_err(csv_err)?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| CliError::Data(format!("writing csv: {e}")))?;
            emit_csv(&cfg, bytes, out)?;
        }
    }
    if v.converged.len() < 2 {
        writeln!(
            err,
            "verification needs at least 2 converged starts, got {}",
            v.converged.len()
        )
        .map_err(io)?;
    }
    Ok(if v.passed() {
        Status::Success
    } else {
        Status::VerificationFailed
    })
}
