use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_secure-onoff")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn read_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let j = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[j].parse().unwrap()).collect()
}

const S3_FEASIBLE: &[&str] =
    &["design", "--scenario", "s3", "--pb-db", "10", "--pe-db", "0", "--alpha", "5", "--rb", "2", "--rs", "1", "--eps", "0.4", "--delta", "0.1"];

#[test]
fn design_feasible_record() {
    let o = run(S3_FEASIBLE);
    assert_eq!(o.status.code(), Some(0));
    let (h, rows) = read_csv(&stdout(&o));
    assert_eq!(rows.len(), 1);
    assert!((column(&h, &rows, "p_so")[0] - (-1.0f64).exp()).abs() < 1e-15);
    let mu_e = h.iter().position(|c| c == "mu_e").unwrap();
    assert_eq!(rows[0][mu_e], "inf");
}

#[test]
fn design_infeasible_exits_two() {
    let mut args = S3_FEASIBLE.to_vec();
    let i = args.iter().position(|a| *a == "0.4").unwrap();
    args[i] = "0.2";
    let o = run(&args);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("3.678794e-1"));
}

#[test]
fn usage_errors_exit_one() {
    let o = run(&["design", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(run(&["design", "--scenario", "s1"]).status.code(), Some(1));
    assert_eq!(run(&["design", "--scenario", "s9", "--rb", "2", "--rs", "1"]).status.code(), Some(1));
    assert_eq!(run(&["figure", "9"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"scenario": "s3", "alpha": 5, "rb": 2, "rs": 1, "eps": 0.2, "format": "json"}"#).unwrap();
    let path = cfg.to_str().unwrap();
    assert_eq!(run(&["design", "--config", path]).status.code(), Some(2));
    let o = run(&["design", "--config", path, "--eps", "0.4"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["mu_e"], "inf");
    assert_eq!(v["feasible"], true);

    std::fs::write(&cfg, r#"{"scenario": "s3", "unknown-key": 1}"#).unwrap();
    assert_eq!(run(&["design", "--config", path]).status.code(), Some(1));
}

#[test]
fn design_out_file_copies_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("design.csv");
    let mut args = S3_FEASIBLE.to_vec();
    args.extend(["--out", out.to_str().unwrap()]);
    let o = run(&args);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), stdout(&o));
}

#[test]
fn sweep_log_axis() {
    let o = run(&["sweep", "--scenario", "s1", "--rb", "2", "--rs", "1", "--axis", "alpha", "--log", "0.01", "1000", "64"]);
    assert_eq!(o.status.code(), Some(0));
    let (h, rows) = read_csv(&stdout(&o));
    assert_eq!(h[0], "alpha");
    let axis = column(&h, &rows, "alpha");
    assert_eq!(axis.len(), 64);
    assert!(axis.windows(2).all(|w| w[1] > w[0]));
    assert_eq!((axis[0], axis[63]), (0.01, 1000.0));
}

#[test]
fn csv_round_trips_to_printed_precision() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig3.csv");
    let o = run(&["figure", "3", "--points", "11", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let (h, rows) = read_csv(&text);
    assert_eq!(h, ["eps", "throughput", "scenario", "alpha"]);
    assert_eq!(rows.len(), 3 * 3 * 11);
    // Re-emitting parsed values must reproduce the file byte for byte.
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&h).unwrap();
    for r in &rows {
        let eps: f64 = r[0].parse().unwrap();
        let eta: f64 = r[1].parse().unwrap();
        let alpha: f64 = r[3].parse().unwrap();
        let alpha_text = if alpha.is_infinite() { "inf".to_string() } else { format!("{alpha}") };
        w.write_record([format!("{eps}"), format!("{eta}"), r[2].clone(), alpha_text]).unwrap();
    }
    assert_eq!(String::from_utf8(w.into_inner().unwrap()).unwrap(), text);
}

fn figure_table(id: &str, dir: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let out = dir.join(format!("fig{id}.csv"));
    assert_eq!(run(&["figure", id, "--out", out.to_str().unwrap()]).status.code(), Some(0));
    read_csv(&std::fs::read_to_string(out).unwrap())
}

#[test]
fn figure_1_has_interior_peaks() {
    let dir = tempfile::tempdir().unwrap();
    let (h, rows) = figure_table("1", dir.path());
    assert_eq!(h, ["alpha", "throughput", "Pb_dB"]);
    let pb = column(&h, &rows, "Pb_dB");
    let eta = column(&h, &rows, "throughput");
    for p in [5.0, 10.0, 15.0, 20.0] {
        let series: Vec<f64> = pb.iter().zip(&eta).filter(|(q, _)| **q == p).map(|(_, e)| *e).collect();
        assert_eq!(series.len(), 64);
        if p >= 10.0 {
            let best = series.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            assert!(best > 0 && best < 63, "Pb {p} dB peak at index {best}");
        }
    }
}

#[test]
fn figure_2_is_nondecreasing() {
    let dir = tempfile::tempdir().unwrap();
    let (h, rows) = figure_table("2", dir.path());
    let pb = column(&h, &rows, "Pb_dB");
    let eta = column(&h, &rows, "throughput");
    for p in [5.0, 10.0, 15.0, 20.0] {
        let series: Vec<f64> = pb.iter().zip(&eta).filter(|(q, _)| **q == p).map(|(_, e)| *e).collect();
        assert!(series.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    }
}

#[test]
fn figure_5_frontier_reaches_loose_limit() {
    let dir = tempfile::tempdir().unwrap();
    let (h, rows) = figure_table("5", dir.path());
    let eps = column(&h, &rows, "eps_min");
    let alpha = column(&h, &rows, "alpha");
    // With a loose reliability constraint the bound is exp(-mu_b / P_e).
    let last_alpha1 = alpha.iter().rposition(|a| *a == 1.0).unwrap();
    assert!((eps[last_alpha1] - (-9.0f64).exp()).abs() < 1e-15);
    assert!(eps.iter().all(|e| *e > 0.0 && *e <= 1.0));
}

#[test]
fn mc_validate_passes_detects_and_repeats() {
    let base = ["mc-validate", "--scenario", "s2", "--alpha", "5", "--rb", "2", "--rs", "1", "--n-blocks", "200000", "--seed", "9"];
    let a = run(&base);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let (h, rows) = read_csv(&stdout(&a));
    assert_eq!(h, ["quantity", "closed_form", "mc_estimate", "se", "z_score"]);
    assert_eq!(rows.len(), 4);
    assert_eq!(stdout(&run(&base)), stdout(&a));

    let mut perturbed = base.to_vec();
    perturbed.extend(["--perturb", "0.1"]);
    let p = run(&perturbed);
    assert_ne!(p.status.code(), Some(0));
    let (h, rows) = read_csv(&stdout(&p));
    assert!(column(&h, &rows, "z_score").iter().any(|z| z.abs() > 3.0));
}

#[test]
fn mc_validate_degenerate_exits_three() {
    let o = run(&["mc-validate", "--scenario", "s3", "--pb-db", "-20", "--rb", "2", "--rs", "1", "--eps", "0.9", "--n-blocks", "10000"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("degenerate"));
}

#[test]
fn optimize_pilot_json() {
    let o = run(&["optimize-pilot", "--scenario", "s1", "--rb", "2", "--rs", "1", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["alpha_star"].as_f64().unwrap() - 2.28).abs() < 0.5);
    let bad = run(&["optimize-pilot", "--scenario", "s3", "--rb", "2", "--rs", "1", "--eps", "0.1"]);
    assert_eq!(bad.status.code(), Some(2));
}
