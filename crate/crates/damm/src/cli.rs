//! Command-line front end: five subcommands driven by one TOML run file.
//!
//! Every command reads its settings from `--config` (see [`crate::config`]
//! for the schema). Input paths in the run file resolve against the run
//! file's directory; output names resolve against `--out` (default: the
//! current directory, created if missing). Given the same run file and seed,
//! every command is deterministic and reruns are byte-identical.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::warn;

use crate::bench::{run_study, BenchConfig};
use crate::config::{RunConfig, SimulateKind};
use crate::error::{DammError, Result};
use crate::estimate::fit_ml;
use crate::filter::filter_pass;
use crate::io;
use crate::simulate::{
    forecast_path, replication_rng, simulate_corr_series, simulate_damm, simulate_dgp,
    simulate_mixfix, simulate_sdmm, weight_pattern_series,
};

#[derive(Parser, Debug)]
#[command(name = "damm", version, about = "Score-driven dynamic mixture models")]
pub struct Cli {
    /// TOML run file; see the config schema docs.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the run file's seed (default 0).
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads for replicated studies (default: one per processor).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Directory for output files, created if missing.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
pub enum Command {
    /// Simulate a model path or one of the benchmark designs.
    Simulate,
    /// Fit coefficients to a data CSV by maximum likelihood.
    Fit,
    /// Run the score-driven filter at given coefficients over a data CSV.
    Filter,
    /// Simulate the predictive distribution from the end of a sample.
    Forecast,
    /// Run a replicated Monte Carlo study and write its metric table.
    Bench,
}

/// Entry point for the binary: logging from `DAMM_LOG`, then dispatch.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DAMM_LOG", "warn"))
        .init();
    match run(Cli::parse()) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

/// Parse arguments from an iterator and run; used by tests.
pub fn run_from<I, T>(args: I) -> Result<Vec<PathBuf>>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)
        .map_err(|e| DammError::Config(format!("arguments: {e}")))?;
    run(cli)
}

/// Dispatch a parsed command line; returns the files produced.
pub fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| DammError::Config("missing --config PATH".into()))?;
    let config = RunConfig::from_path(config_path)?;
    let base_dir = config_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();
    let seed = cli.seed.or(config.seed).unwrap_or(0);
    let out_dir = cli.out.unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)?;

    match cli.command {
        Command::Simulate => cmd_simulate(&config, seed, &base_dir, &out_dir),
        Command::Fit => cmd_fit(&config, seed, &base_dir, &out_dir),
        Command::Filter => cmd_filter(&config, seed, &base_dir, &out_dir),
        Command::Forecast => cmd_forecast(&config, seed, &base_dir, &out_dir),
        Command::Bench => cmd_bench(&config, seed, cli.jobs.unwrap_or(0), &out_dir),
    }
}

fn resolve(base_dir: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base_dir.join(path)
    }
}

fn missing(section: &str) -> DammError {
    DammError::Config(format!("missing [{section}] section"))
}

fn missing_key(key: &str) -> DammError {
    DammError::Config(format!("missing required key {key}"))
}

fn cmd_simulate(
    config: &RunConfig,
    seed: u64,
    base_dir: &Path,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let section = config.simulate.as_ref().ok_or_else(|| missing("simulate"))?;
    let data_path = out_dir.join(section.data_out.as_deref().unwrap_or("data.csv"));
    let truth_path = out_dir.join(section.truth_out.as_deref().unwrap_or("truth.csv"));
    let t_len = section.t_len;

    let rows = match section.kind {
        SimulateKind::Model => {
            let spec = config.require_model()?;
            let coeffs = config
                .coefficients
                .as_ref()
                .ok_or_else(|| missing("coefficients"))?
                .resolve(&spec, base_dir)?;
            let mut rng = replication_rng(seed, 0);
            let (data, trace) = simulate_damm(&spec, &coeffs, t_len, &mut rng)?;
            io::write_dataset(&data_path, &data)?;
            io::write_filter_trace(&truth_path, &trace)?;
            data.len()
        }
        SimulateKind::Sdmm => {
            let (data, path) = simulate_sdmm(t_len, seed);
            let rows: Vec<Vec<f64>> = data.iter().map(|y| vec![*y]).collect();
            io::write_dataset(&data_path, &rows)?;
            io::write_columns(
                &truth_path,
                &[
                    ("omega", &path.omega[..]),
                    ("mean1", &path.mean1[..]),
                    ("var1", &path.var1[..]),
                    ("mean2", &path.mean2[..]),
                    ("var2", &path.var2[..]),
                    ("cond_mean", &path.cond_mean[..]),
                    ("cond_var", &path.cond_var[..]),
                ],
            )?;
            rows.len()
        }
        SimulateKind::CorrPattern => {
            let pattern = section.pattern.ok_or_else(|| missing_key("simulate.pattern"))?;
            let mut rng = replication_rng(seed, 0);
            let (data, rho) = simulate_corr_series(pattern, t_len, &mut rng);
            io::write_dataset(&data_path, &data)?;
            io::write_columns(&truth_path, &[("rho", &rho[..])])?;
            data.len()
        }
        SimulateKind::WeightPattern => {
            let pattern = section.pattern.ok_or_else(|| missing_key("simulate.pattern"))?;
            let mut pattern_rng = replication_rng(seed, 0);
            let omega = weight_pattern_series(pattern, t_len, 0, &mut pattern_rng);
            let mut obs_rng = replication_rng(seed, 1);
            let data: Vec<Vec<f64>> =
                simulate_mixfix(&omega, &mut obs_rng).into_iter().map(|y| vec![y]).collect();
            io::write_dataset(&data_path, &data)?;
            io::write_columns(&truth_path, &[("omega", &omega[..])])?;
            data.len()
        }
        SimulateKind::Dgp => {
            let which = section.dgp.ok_or_else(|| missing_key("simulate.dgp"))?;
            let mut rng = replication_rng(seed, 0);
            let sample = simulate_dgp(which, t_len, &mut rng)?;
            io::write_dataset(&data_path, &sample.data)?;
            let d = sample.truth_corr[0].nrows();
            let mut columns: Vec<(String, Vec<f64>)> =
                vec![("omega".into(), sample.truth_weight.clone())];
            for c in 0..d {
                for r in c + 1..d {
                    let series = sample.truth_corr.iter().map(|m| m[(c, r)]).collect();
                    columns.push((format!("corr[{c}][{r}]"), series));
                }
            }
            let refs: Vec<(&str, &[f64])> =
                columns.iter().map(|(n, v)| (n.as_str(), &v[..])).collect();
            io::write_columns(&truth_path, &refs)?;
            sample.data.len()
        }
    };

    println!(
        "simulate: seed {seed}, {rows} rows -> {}, {}",
        data_path.display(),
        truth_path.display()
    );
    Ok(vec![data_path, truth_path])
}

fn cmd_fit(
    config: &RunConfig,
    seed: u64,
    base_dir: &Path,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let section = config.fit.as_ref().ok_or_else(|| missing("fit"))?;
    let template = config.build_template()?;
    let data = io::read_dataset(&resolve(base_dir, &section.data))?;
    let est = config.estimation_config(seed)?;
    let result_path = out_dir.join(section.result_out.as_deref().unwrap_or("fit.json"));

    let fit = match fit_ml(&template, &data, &est) {
        Ok(fit) => fit,
        Err(e) => {
            let diagnostic = serde_json::json!({
                "error": e.to_string(),
                "data": section.data.display().to_string(),
                "rows": data.len(),
                "seed": seed,
            });
            let path = out_dir.join("fit_diagnostic.json");
            std::fs::write(&path, format!("{diagnostic:#}\n"))?;
            eprintln!("fit failed, diagnostic in {}", path.display());
            return Err(e);
        }
    };

    io::write_fit_json(&result_path, &fit)?;
    let mut outputs = vec![result_path.clone()];
    if section.trace {
        let trace = filter_pass(&template.spec, &fit.coefficients, &data, None)?;
        let trace_path = result_path.with_extension("trace.csv");
        io::write_filter_trace(&trace_path, &trace)?;
        outputs.push(trace_path);
    }
    println!(
        "fit: seed {seed}, loglik {:.6}, np {}, converged {} -> {}",
        fit.loglik,
        fit.np,
        fit.converged,
        result_path.display()
    );
    Ok(outputs)
}

fn cmd_filter(
    config: &RunConfig,
    seed: u64,
    base_dir: &Path,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let section = config.filter.as_ref().ok_or_else(|| missing("filter"))?;
    let spec = config.require_model()?;
    let coeffs = config
        .coefficients
        .as_ref()
        .ok_or_else(|| missing("coefficients"))?
        .resolve(&spec, base_dir)?;
    let data = io::read_dataset(&resolve(base_dir, &section.data))?;
    let trace = filter_pass(&spec, &coeffs, &data, None)?;
    let trace_path = out_dir.join(section.trace_out.as_deref().unwrap_or("trace.csv"));
    io::write_filter_trace(&trace_path, &trace)?;
    println!(
        "filter: seed {seed}, {} rows, total loglik {:.6} -> {}",
        trace.steps.len(),
        trace.total_loglik,
        trace_path.display()
    );
    Ok(vec![trace_path])
}

fn cmd_forecast(
    config: &RunConfig,
    seed: u64,
    base_dir: &Path,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let section = config.forecast.as_ref().ok_or_else(|| missing("forecast"))?;
    let spec = config.require_model()?;
    let coeffs = config
        .coefficients
        .as_ref()
        .ok_or_else(|| missing("coefficients"))?
        .resolve(&spec, base_dir)?;
    let data = io::read_dataset(&resolve(base_dir, &section.data))?;
    let trace = filter_pass(&spec, &coeffs, &data, None)?;

    // Predictive draws: each substream simulates one continuation from the
    // one-step-ahead state the filter left behind.
    let horizon = section.horizon;
    let d = spec.d;
    let mut draws: Vec<Vec<Vec<f64>>> = Vec::with_capacity(section.draws);
    for rep in 0..section.draws {
        let mut rng = replication_rng(seed, rep as u64);
        draws.push(forecast_path(&spec, &coeffs, &trace.final_state, horizon, &mut rng)?);
    }

    const QS: [(&str, f64); 5] =
        [("p05", 0.05), ("p25", 0.25), ("p50", 0.50), ("p75", 0.75), ("p95", 0.95)];
    let mut columns: Vec<(String, Vec<f64>)> =
        vec![("h".into(), (1..=horizon).map(|h| h as f64).collect())];
    for k in 0..d {
        let mut mean = Vec::with_capacity(horizon);
        let mut quantiles: Vec<Vec<f64>> = vec![Vec::with_capacity(horizon); QS.len()];
        for h in 0..horizon {
            let mut values: Vec<f64> = draws.iter().map(|path| path[h][k]).collect();
            values.sort_by(f64::total_cmp);
            mean.push(values.iter().sum::<f64>() / values.len() as f64);
            for (slot, (_, p)) in quantiles.iter_mut().zip(QS) {
                slot.push(quantile(&values, p));
            }
        }
        columns.push((format!("y{}_mean", k + 1), mean));
        for (slot, (name, _)) in quantiles.into_iter().zip(QS) {
            columns.push((format!("y{}_{name}", k + 1), slot));
        }
    }
    let refs: Vec<(&str, &[f64])> = columns.iter().map(|(n, v)| (n.as_str(), &v[..])).collect();
    let out_path = out_dir.join(section.out.as_deref().unwrap_or("forecast.csv"));
    io::write_columns(&out_path, &refs)?;
    println!(
        "forecast: seed {seed}, {} draws over horizon {horizon} -> {}",
        section.draws,
        out_path.display()
    );
    Ok(vec![out_path])
}

/// Linear-interpolation quantile of a sorted sample.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

fn cmd_bench(
    config: &RunConfig,
    seed: u64,
    jobs: usize,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let section = config.bench.as_ref().ok_or_else(|| missing("bench"))?;
    let mut bench = BenchConfig::for_study(section.study, seed);
    if let Some(t_len) = section.t_len {
        bench.t_len = t_len;
    }
    if let Some(replications) = section.replications {
        bench.replications = replications;
    }
    bench.jobs = jobs;
    if let Some(e) = &config.estimation {
        if let Some(v) = e.max_iterations {
            bench.estimation.max_iterations = v;
        }
        if let Some(v) = e.gradient_tolerance {
            bench.estimation.gradient_tolerance = v;
        }
        if let Some(v) = e.restarts {
            bench.estimation.restarts = v;
        }
    }

    let report = run_study(&bench)?;
    for note in &report.notes {
        warn!("{note}");
    }

    let stem = section.out.as_deref().unwrap_or(section.study.name());
    let metrics_path = out_dir.join(format!("{stem}_metrics.csv"));
    let reps_path = out_dir.join(format!("{stem}_replications.csv"));
    io::write_metric_table(&metrics_path, &report)?;
    io::write_replication_table(&reps_path, &report)?;
    println!(
        "bench {}: seed {seed}, {} replications ({} failed) -> {}, {}",
        report.study.name(),
        report.replications,
        report.failures,
        metrics_path.display(),
        reps_path.display()
    );
    Ok(vec![metrics_path, reps_path])
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
        let path = dir.join(name);
        std::fs::write(&path, text).unwrap();
        path
    }

    fn run_args(config: &Path, out: &Path, command: &str) -> Result<Vec<PathBuf>> {
        run_from([
            "damm",
            command,
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
    }

    #[test]
    fn missing_config_flag_is_an_error() {
        let err = run_from(["damm", "simulate"]).unwrap_err().to_string();
        assert!(err.contains("--config"), "got: {err}");
    }

    #[test]
    fn simulate_sdmm_is_byte_identical_across_reruns() {
        let dir = tempdir().unwrap();
        let config = write_config(
            dir.path(),
            "run.toml",
            "schema_version = 1\nseed = 7\n[simulate]\nkind = \"sdmm\"\nt_len = 100\n",
        );
        let out1 = dir.path().join("a");
        let out2 = dir.path().join("b");
        let files1 = run_args(&config, &out1, "simulate").unwrap();
        let files2 = run_args(&config, &out2, "simulate").unwrap();
        assert_eq!(files1.len(), 2);
        for (f1, f2) in files1.iter().zip(&files2) {
            let b1 = std::fs::read(f1).unwrap();
            let b2 = std::fs::read(f2).unwrap();
            assert!(!b1.is_empty());
            assert_eq!(b1, b2);
        }
        let data = std::fs::read_to_string(&files1[0]).unwrap();
        assert_eq!(data.lines().count(), 101, "header plus one row per step");
    }

    #[test]
    fn simulate_model_writes_trace_truth() {
        let dir = tempdir().unwrap();
        let config = write_config(
            dir.path(),
            "run.toml",
            r#"
            schema_version = 1
            [model]
            family = "uni-gaussian"
            components = 2
            [coefficients]
            kappa = [0.0, -1.0, 0.1, 1.0, 0.1]
            b = [0.0, 0.0, 0.0, 0.0, 0.0]
            [simulate]
            kind = "model"
            t_len = 30
            "#,
        );
        let out = dir.path().join("out");
        let files = run_args(&config, &out, "simulate").unwrap();
        let truth = std::fs::read_to_string(&files[1]).unwrap();
        let header = truth.lines().next().unwrap();
        assert!(header.contains("weight1"), "got header: {header}");
        assert!(header.contains("comp2.variance"), "got header: {header}");
    }

    #[test]
    fn filter_and_forecast_run_from_simulated_data() {
        let dir = tempdir().unwrap();
        let config = write_config(
            dir.path(),
            "run.toml",
            r#"
            schema_version = 1
            seed = 3
            [model]
            family = "uni-gaussian"
            components = 2
            [coefficients]
            kappa = [0.05, -0.9, 0.02, 1.1, 0.02]
            a = [0.02, 0.03, 0.01, 0.03, 0.01]
            b = [0.9, 0.95, 0.9, 0.95, 0.9]
            [simulate]
            kind = "model"
            t_len = 40
            [filter]
            data = "out/data.csv"
            [forecast]
            data = "out/data.csv"
            horizon = 5
            draws = 50
            "#,
        );
        let out = dir.path().join("out");
        run_args(&config, &out, "simulate").unwrap();
        let trace = run_args(&config, &out, "filter").unwrap();
        let text = std::fs::read_to_string(&trace[0]).unwrap();
        assert_eq!(text.lines().count(), 41);

        let forecast = run_args(&config, &out, "forecast").unwrap();
        let text = std::fs::read_to_string(&forecast[0]).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header.split(',').count(), 7, "h plus mean and five quantiles");
        assert_eq!(text.lines().count(), 6);
        // Quantiles are ordered at every horizon.
        for line in text.lines().skip(1) {
            let v: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
            assert!(v[2] <= v[3] && v[3] <= v[4] && v[4] <= v[5] && v[5] <= v[6]);
        }
    }

    #[test]
    fn fit_failure_writes_a_diagnostic() {
        let dir = tempdir().unwrap();
        std::fs::write(dir.path().join("bad.csv"), "y1\nNaN\nNaN\nNaN\n").unwrap();
        let config = write_config(
            dir.path(),
            "run.toml",
            r#"
            schema_version = 1
            [model]
            family = "uni-gaussian"
            components = 1
            [estimation]
            max_iterations = 5
            restarts = 1
            [fit]
            data = "bad.csv"
            "#,
        );
        let out = dir.path().join("out");
        let err = run_args(&config, &out, "fit");
        assert!(err.is_err());
        let diag = std::fs::read_to_string(out.join("fit_diagnostic.json")).unwrap();
        assert!(diag.contains("error"), "got: {diag}");
    }

    #[test]
    fn bench_smoke_emits_metric_and_replication_tables() {
        let dir = tempdir().unwrap();
        let config = write_config(
            dir.path(),
            "run.toml",
            r#"
            schema_version = 1
            seed = 5
            [estimation]
            max_iterations = 30
            gradient_tolerance = 1e-3
            [bench]
            study = "corr"
            t_len = 60
            replications = 2
            "#,
        );
        let out = dir.path().join("out");
        let files = run_args(&config, &out, "bench").unwrap();
        let metrics = std::fs::read_to_string(&files[0]).unwrap();
        let header = metrics.lines().next().unwrap();
        assert_eq!(header, "study,metric,median,relative_to,ratio,replications,failures");
        assert!(metrics.lines().count() > 7, "one row per pattern metric");
        let reps = std::fs::read_to_string(&files[1]).unwrap();
        assert!(reps.lines().any(|l| l.starts_with("corr,") && l.contains(",1,")));
    }
}
