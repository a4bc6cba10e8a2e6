use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use gmle_cli::output::read_saved_fit;
use gmle_core::estimators::plug_in_eta;
use gmle_core::models::StrataBinomialModel;
use gmle_core::{MixingDistribution, ParameterAtom, ParameterGrid};

fn gmle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmle"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn five_and_five() -> String {
    let mut s = String::from("X,kappa_obs\n");
    s.push_str(&"0,1\n".repeat(5));
    s.push_str(&"1,1\n".repeat(5));
    s
}

fn summary_line<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines().find_map(|l| l.strip_prefix(key).map(str::trim))
}

#[test]
fn fit_symmetric_kappa_one_data() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", &five_and_five());
    let o = gmle(&["fit", "--input", &input, "--kappa", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("# command = fit\n"));
    assert!(text.contains("# kappa = 1\n"));
    let eta: f64 = summary_line(&text, "eta_hat").unwrap().parse().unwrap();
    assert!((eta - 0.5).abs() < 1e-6, "{text}");
}

#[test]
fn kappa_is_read_off_the_data() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", "X,kappa_obs\n1,3\n2,2\n0,0\n");
    let o = gmle(&["fit", "--input", &input]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("# kappa = 3\n"));
}

#[test]
fn empty_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "empty.csv", "");
    let o = gmle(&["fit", "--input", &input, "--kappa", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("empty"));
}

#[test]
fn bad_rows_are_data_errors_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", "X,kappa_obs\n0,1\n1,x\n");
    let o = gmle(&["fit", "--input", &input, "--kappa", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let input = write(dir.path(), "e.csv", "X,kappa_obs\n0,1\n0,4\n");
    let o = gmle(&["fit", "--input", &input, "--kappa", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("kappa_obs = 4 exceeds the model maximum 2"));
}

#[test]
fn only_non_response_warns() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", "X,kappa_obs\n0,0\n0,0\n0,0\n");
    let o = gmle(&["fit", "--input", &input, "--kappa", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("A never observed"), "{text}");
    // the grid is symmetric in p, so the prior mean survives
    let eta: f64 = summary_line(&text, "eta_hat").unwrap().parse().unwrap();
    assert!((eta - 0.5).abs() < 1e-9);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(gmle(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(gmle(&["fit"]).status.code(), Some(1));
    assert_eq!(
        gmle(&["simulate", "--preset", "table1"]).status.code(),
        Some(1),
        "seed is required"
    );
    assert_eq!(
        gmle(&["simulate", "--preset", "table9", "--seed", "1"]).status.code(),
        Some(1)
    );
    assert_eq!(gmle(&["verify", "--seed", "1", "--starts", "1"]).status.code(), Some(1));
    assert_eq!(gmle(&["--help"]).status.code(), Some(0));
    assert_eq!(gmle(&["--version"]).status.code(), Some(0));
}

#[test]
fn csv_weights_round_trip_to_the_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "d.csv",
        "X,kappa_obs\n0,2\n1,2\n2,2\n1,1\n0,0\n0,0\n2,2\n1,2\n",
    );
    let out = dir.path().join("fit.csv");
    let o = gmle(&[
        "fit",
        "--input",
        &input,
        "--kappa",
        "2",
        "--grid-step",
        "0.1",
        "--format",
        "csv",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let saved = read_saved_fit(std::fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(saved.coordinate_names, vec!["pi", "p"]);
    assert_eq!(saved.atoms.len(), 121);
    let printed: f64 = saved.summary_value("eta_hat").unwrap().parse().unwrap();

    let atoms = saved
        .atoms
        .iter()
        .map(|c| ParameterAtom::new(c.clone()).unwrap())
        .collect();
    let grid = Arc::new(ParameterGrid::new(atoms).unwrap());
    let g = MixingDistribution::new(grid, saved.weights.clone()).unwrap();
    let eta = plug_in_eta(&g, &StrataBinomialModel::new(2).unwrap())[0];
    assert!((eta - printed).abs() <= 1e-9, "{eta} vs {printed}");
}

#[test]
fn simulate_single_rep_reports_na() {
    let o = gmle(&[
        "simulate",
        "--delta",
        "0.2",
        "--reps",
        "1",
        "--strata",
        "40",
        "--seed",
        "3",
        "--grid-step",
        "0.1",
        "--format",
        "csv",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "design,naive_mean,naive_sd,gmle_mean,gmle_sd,n_reps");
    let cells: Vec<&str> = rows[1].split(',').collect();
    assert_eq!(cells[0], "0.2");
    assert_eq!(cells[2], "NA");
    assert_eq!(cells[4], "NA");
    assert_eq!(cells[5], "1");
}

#[test]
fn simulate_table_layouts() {
    let base = [
        "simulate",
        "--reps",
        "2",
        "--strata",
        "20",
        "--seed",
        "5",
        "--grid-step",
        "0.25",
        "--format",
        "csv",
    ];
    let o = gmle(&[&base[..], &["--preset", "table1"]].concat());
    let designs: Vec<String> = stdout(&o)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').next().unwrap().to_string())
        .collect();
    assert_eq!(designs, ["0.3", "0.2", "0.1"]);
    let o = gmle(&[&base[..], &["--preset", "table2"]].concat());
    let designs: Vec<String> = stdout(&o)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').next().unwrap().to_string())
        .collect();
    assert_eq!(designs, ["1", "2", "3", "4", "5"]);
}

#[test]
fn verify_example_one_passes_with_distinct_weights() {
    let o = gmle(&[
        "verify",
        "--seed",
        "11",
        "--grid-lo",
        "0.25",
        "--grid-hi",
        "0.75",
        "--grid-step",
        "0.25",
        "--kkt-tol",
        "1e-9",
        "--max-iters",
        "100000",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("result                    PASS"));
    let weight: f64 = summary_line(&text, "max weight discrepancy").unwrap().parse().unwrap();
    assert!(weight > 0.1, "{text}");
}

#[test]
fn verify_single_atom_is_trivial() {
    let o = gmle(&[
        "verify",
        "--seed",
        "2",
        "--grid-lo",
        "0.5",
        "--grid-hi",
        "0.5",
        "--grid-step",
        "0.1",
        "--format",
        "csv",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for key in [
        "max_marginal_diff,0",
        "max_weight_diff,0",
        "eta_spread,0",
        "result,PASS",
    ] {
        assert!(text.lines().any(|l| l == key), "missing {key} in {text}");
    }
}

#[test]
fn verify_identifiable_grid_agrees_on_weights() {
    let dir = tempfile::tempdir().unwrap();
    // 2000 draws, 30% from theta = 0.1 and 70% from theta = 0.9
    let mut text = String::from("y\n");
    for i in 0..2000 {
        let ones = if i < 600 { i % 10 == 0 } else { i % 10 != 0 };
        text.push_str(if ones { "1\n" } else { "0\n" });
    }
    let input = write(dir.path(), "b.csv", &text);
    let o = gmle(&[
        "verify",
        "--input",
        &input,
        "--model",
        "bernoulli",
        "--seed",
        "4",
        "--grid-lo",
        "0.1",
        "--grid-hi",
        "0.9",
        "--grid-step",
        "0.8",
        "--kkt-tol",
        "1e-10",
        "--max-iters",
        "100000",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let weight: f64 = summary_line(&stdout(&o), "max weight discrepancy")
        .unwrap()
        .parse()
        .unwrap();
    assert!(weight < 1e-6, "{}", stdout(&o));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", &five_and_five());
    let cfg = write(
        dir.path(),
        "run.toml",
        &format!("input = {input:?}\nkappa = 1\ngrid-step = 0.25\nkkt-tol = 1e-8\n"),
    );
    let o = gmle(&["fit", "--config", &cfg, "--grid-step", "0.5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("# grid-step = 0.5\n"));
    assert!(text.contains("# kkt-tol = 1e-8\n"));

    let bad = write(dir.path(), "bad.toml", "colour = 3\n");
    assert_eq!(
        gmle(&["fit", "--config", &bad, "--input", &input]).status.code(),
        Some(1)
    );
}

#[test]
fn survey_and_poisson_files_fit() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "s.csv",
        "category_index,attempts\n1,1\n2,1\n2,2\n1,3\n0,0\n2,1\n",
    );
    let o = gmle(&[
        "fit",
        "--input",
        &input,
        "--model",
        "survey-geometric",
        "--attempts",
        "3",
        "--categories",
        "2",
        "--simplex-resolution",
        "4",
        "--grid-step",
        "0.25",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let e1: f64 = summary_line(&text, "eta_hat_1").unwrap().parse().unwrap();
    let e2: f64 = summary_line(&text, "eta_hat_2").unwrap().parse().unwrap();
    assert!((e1 + e2 - 1.0).abs() < 1e-5);

    let input = write(dir.path(), "p.csv", "X,kappa_obs\n1,2\n0,1\n3,4\n0,0\n2,3\n");
    let o = gmle(&[
        "fit",
        "--input",
        &input,
        "--model",
        "poisson-binomial",
        "--lambda-max",
        "6",
        "--lambda-step",
        "1",
        "--grid-step",
        "0.25",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
