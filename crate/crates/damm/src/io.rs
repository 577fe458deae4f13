//! CSV and JSON plumbing shared by the command-line front end and examples.
//!
//! All tables are UTF-8, comma-separated, with a header row of series names
//! and one row per time step. Floats are written with Rust's shortest
//! round-trip formatting, so reading a file back reproduces the original
//! values bit for bit and reruns of a deterministic command are
//! byte-identical.

use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::Path;

use crate::bench::StudyReport;
use crate::density::ComponentParams;
use crate::error::{DammError, Result};
use crate::estimate::FitResult;
use crate::filter::FilterTrace;

/// Format a float for CSV: shortest representation that round-trips.
fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Write a table of named, equal-length columns.
pub fn write_columns(path: &Path, columns: &[(&str, &[f64])]) -> Result<()> {
    let n = columns.first().map(|(_, c)| c.len()).unwrap_or(0);
    for (name, col) in columns {
        if col.len() != n {
            return Err(DammError::Data(format!(
                "column {name} has {} rows, expected {n}",
                col.len()
            )));
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(columns.iter().map(|(name, _)| *name))?;
    for t in 0..n {
        w.write_record(columns.iter().map(|(_, col)| fmt(col[t])))?;
    }
    w.flush()?;
    Ok(())
}

/// Write observations with headers y1..yd.
pub fn write_dataset(path: &Path, data: &[Vec<f64>]) -> Result<()> {
    let d = data.first().map(Vec::len).unwrap_or(0);
    if d == 0 {
        return Err(DammError::Data("dataset is empty".into()));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((1..=d).map(|k| format!("y{k}")))?;
    for (t, row) in data.iter().enumerate() {
        if row.len() != d {
            return Err(DammError::Data(format!(
                "row {t} has {} columns, expected {d}",
                row.len()
            )));
        }
        w.write_record(row.iter().map(|v| fmt(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Read observations from a headered CSV; every column is taken as a series.
pub fn read_dataset(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let d = r.headers()?.len();
    if d == 0 {
        return Err(DammError::Data(format!("{}: no columns", path.display())));
    }
    let mut data = Vec::new();
    for (t, record) in r.records().enumerate() {
        let record = record?;
        if record.len() != d {
            return Err(DammError::Data(format!(
                "{}: row {t} has {} fields, expected {d}",
                path.display(),
                record.len()
            )));
        }
        let mut row = Vec::with_capacity(d);
        for (k, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                DammError::Data(format!(
                    "{}: row {t} column {k}: cannot parse {field:?} as a number",
                    path.display()
                ))
            })?;
            row.push(v);
        }
        data.push(row);
    }
    if data.is_empty() {
        return Err(DammError::Data(format!("{}: no data rows", path.display())));
    }
    Ok(data)
}

/// Natural-parameter column labels and values for one mixture component.
fn component_columns(prefix: &str, params: &ComponentParams) -> Vec<(String, f64)> {
    let mut cols = Vec::new();
    let mut push = |name: String, v: f64| cols.push((format!("{prefix}.{name}"), v));
    let corr_cols =
        |push: &mut dyn FnMut(String, f64), corr: &nalgebra::DMatrix<f64>| {
            for c in 0..corr.ncols() {
                for r in c + 1..corr.nrows() {
                    push(format!("corr[{c}][{r}]"), corr[(c, r)]);
                }
            }
        };
    match params {
        ComponentParams::Gaussian(p) => {
            push("mean".into(), p.mean);
            push("variance".into(), p.variance);
        }
        ComponentParams::StudentT(p) => {
            push("mean".into(), p.mean);
            push("scale".into(), p.scale);
            push("shape".into(), p.shape);
        }
        ComponentParams::MvGaussian(p) => {
            for (k, m) in p.mean.iter().enumerate() {
                push(format!("mean[{k}]"), *m);
            }
            for (k, s) in p.sd.iter().enumerate() {
                push(format!("sd[{k}]"), *s);
            }
            corr_cols(&mut push, &p.corr);
        }
        ComponentParams::MvStudentT(p) => {
            for (k, m) in p.mean.iter().enumerate() {
                push(format!("mean[{k}]"), *m);
            }
            for (k, s) in p.scale.iter().enumerate() {
                push(format!("scale[{k}]"), *s);
            }
            corr_cols(&mut push, &p.corr);
            push("shape".into(), p.shape);
        }
        ComponentParams::TCopula(p) => {
            corr_cols(&mut push, &p.corr);
            push("shape".into(), p.shape);
        }
        ComponentParams::GaussianCopula(p) => {
            corr_cols(&mut push, &p.corr);
        }
    }
    cols
}

/// Write a filtering trace: per-step log-likelihood contribution, mixture
/// weights, posterior responsibilities, and each component's natural
/// parameters as implied by information through t-1.
pub fn write_filter_trace(path: &Path, trace: &FilterTrace) -> Result<()> {
    let first = trace
        .steps
        .first()
        .ok_or_else(|| DammError::Data("empty filter trace".into()))?;
    let j = first.weights.len();

    let mut headers: Vec<String> = vec!["t".into(), "loglik".into()];
    for c in 1..=j {
        headers.push(format!("weight{c}"));
    }
    for c in 1..=j {
        headers.push(format!("xi{c}"));
    }
    for (c, params) in first.comps.iter().enumerate() {
        for (name, _) in component_columns(&format!("comp{}", c + 1), params) {
            headers.push(name);
        }
    }

    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&headers)?;
    for (t, step) in trace.steps.iter().enumerate() {
        let mut record: Vec<String> = vec![t.to_string(), fmt(step.loglik)];
        record.extend(step.weights.iter().map(|v| fmt(*v)));
        record.extend(step.xi.iter().map(|v| fmt(*v)));
        for (c, params) in step.comps.iter().enumerate() {
            for (_, v) in component_columns(&format!("comp{}", c + 1), params) {
                record.push(fmt(v));
            }
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Write a fit result as pretty-printed JSON (stable key order via serde).
pub fn write_fit_json(path: &Path, fit: &FitResult) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, fit)
        .map_err(|e| DammError::Data(format!("{}: {e}", path.display())))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Read a fit result back from JSON.
pub fn read_fit_json(path: &Path) -> Result<FitResult> {
    let file = File::open(path)?;
    serde_json::from_reader(file)
        .map_err(|e| DammError::Data(format!("{}: {e}", path.display())))
}

/// Write a study's metric table: one row per metric with its median over
/// successful replications, plus the ratio against the baseline metric it is
/// measured relative to.
pub fn write_metric_table(path: &Path, report: &StudyReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "study",
        "metric",
        "median",
        "relative_to",
        "ratio",
        "replications",
        "failures",
    ])?;
    for metric in &report.metrics {
        let (rel_name, ratio) = match &metric.relative_to {
            Some(base) => {
                let base_median = report.median_of(base).ok_or_else(|| {
                    DammError::Data(format!("metric table references unknown baseline {base}"))
                })?;
                (base.as_str(), fmt(metric.median / base_median))
            }
            None => ("", String::new()),
        };
        w.write_record([
            report.study.name(),
            &metric.name,
            &fmt(metric.median),
            rel_name,
            &ratio,
            &report.replications.to_string(),
            &report.failures.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Write per-replication metric values in long format (plot-ready).
pub fn write_replication_table(path: &Path, report: &StudyReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["study", "metric", "replication", "value"])?;
    for metric in &report.metrics {
        for (rep, value) in metric.per_replication.iter().enumerate() {
            w.write_record([
                report.study.name(),
                &metric.name,
                &rep.to_string(),
                &fmt(*value),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::{fit_ml, CoefficientTemplate, EstimationConfig};
    use crate::evaluate::MetricReport;
    use crate::filter::filter_pass;
    use crate::model::{Family, ModelSpec};
    use crate::simulate::{replication_rng, simulate_damm};
    use tempfile::tempdir;

    #[test]
    fn dataset_round_trips_exactly() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let data = vec![
            vec![0.1, -2.5e-17, f64::MAX],
            vec![1.0 / 3.0, 6.02e23, -0.0],
            vec![f64::MIN_POSITIVE, 2.0_f64.sqrt(), 1e-308],
        ];
        write_dataset(&path, &data).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(back.len(), data.len());
        for (a, b) in data.iter().flatten().zip(back.iter().flatten()) {
            assert!(a.to_bits() == b.to_bits() || (*a == 0.0 && *b == 0.0));
        }
    }

    #[test]
    fn dataset_rejects_ragged_and_bad_rows() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "y1,y2\n1.0,2.0\n3.0,oops\n").unwrap();
        let err = read_dataset(&path).unwrap_err().to_string();
        assert!(err.contains("row 1"), "unexpected message: {err}");
        assert!(err.contains("oops"), "unexpected message: {err}");

        let ragged = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(write_dataset(&dir.path().join("r.csv"), &ragged).is_err());
    }

    #[test]
    fn column_writer_checks_lengths() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("cols.csv");
        let a = [1.0, 2.0];
        let b = [3.0];
        assert!(write_columns(&path, &[("a", &a), ("b", &b)]).is_err());
        write_columns(&path, &[("a", &a), ("b", &a)]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "a,b\n1,1\n2,2\n");
    }

    #[test]
    fn fit_json_round_trips() {
        let spec = ModelSpec::new(Family::UniGaussian, 2, 1).unwrap();
        let mut rng = replication_rng(7, 0);
        let template = CoefficientTemplate::new(spec.clone()).unwrap();
        let mut truth = crate::model::GasCoefficients::zeros(&spec);
        truth.kappa[1] = -1.0;
        truth.kappa[3] = 1.0;
        let (data, _) = simulate_damm(&spec, &truth, 200, &mut rng).unwrap();
        let config = EstimationConfig {
            max_iterations: 30,
            restarts: 1,
            gradient_tolerance: 1e-3,
            ..EstimationConfig::default()
        };
        let fit = fit_ml(&template, &data, &config).unwrap();

        let dir = tempdir().unwrap();
        let path = dir.path().join("fit.json");
        write_fit_json(&path, &fit).unwrap();
        let back = read_fit_json(&path).unwrap();
        assert_eq!(back.loglik, fit.loglik);
        assert_eq!(back.np, fit.np);
        assert_eq!(back.coefficients.kappa, fit.coefficients.kappa);

        let text = std::fs::read_to_string(&path).unwrap();
        for key in ["coefficients", "loglik", "aic", "bic", "np", "converged"] {
            assert!(text.contains(key), "JSON is missing {key}");
        }
    }

    #[test]
    fn trace_has_t_rows_and_mixture_columns() {
        let spec = ModelSpec::new(Family::MvGaussian, 2, 2).unwrap();
        let mut coeffs = crate::model::GasCoefficients::zeros(&spec);
        for (k, kappa) in coeffs.kappa.iter_mut().enumerate() {
            *kappa = 0.01 * (k as f64 + 1.0);
        }
        let mut rng = replication_rng(11, 0);
        let (data, _) = simulate_damm(&spec, &coeffs, 25, &mut rng).unwrap();
        let trace = filter_pass(&spec, &coeffs, &data, None).unwrap();

        let dir = tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_filter_trace(&path, &trace).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        for col in ["t", "loglik", "weight1", "weight2", "xi1", "comp1.mean[0]", "comp2.corr[0][1]"]
        {
            assert!(header.split(',').any(|h| h == col), "missing column {col}");
        }
        assert_eq!(lines.count(), 25);
    }

    #[test]
    fn metric_table_ratio_is_median_over_baseline_median() {
        let report = StudyReport {
            study: crate::bench::Study::Corr,
            t_len: 10,
            replications: 3,
            failures: 1,
            metrics: vec![
                MetricReport {
                    name: "base_mse".into(),
                    per_replication: vec![2.0, 4.0, 6.0],
                    median: 4.0,
                    relative_to: None,
                },
                MetricReport {
                    name: "model_mse".into(),
                    per_replication: vec![1.0, 2.0, 3.0],
                    median: 2.0,
                    relative_to: Some("base_mse".into()),
                },
            ],
            notes: vec![],
        };
        let dir = tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        write_metric_table(&path, &report).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let row: Vec<&str> = text.lines().nth(2).unwrap().split(',').collect();
        assert_eq!(row[1], "model_mse");
        assert_eq!(row[4], "0.5");
        assert_eq!(row[6], "1");

        write_replication_table(&dir.path().join("reps.csv"), &report).unwrap();
        let text = std::fs::read_to_string(dir.path().join("reps.csv")).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(text.lines().nth(1).unwrap().ends_with("base_mse,0,2"));
    }
}
