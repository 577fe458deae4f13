//! The Monte Carlo studies behind the `bench` command.
//!
//! Each study simulates its own data, runs the dynamic mixture fit next to
//! the study's baseline, and reduces every replication to one row of each
//! metric. Replications fan out over a worker pool; results are merged by
//! replication index, so the report does not depend on scheduling. A failed
//! replication is excluded from the medians and counted in the report.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::GaussianParams;
use crate::error::{DammError, Result};
use crate::estimate::{fit_ml, CoefficientTemplate, EstimationConfig};
use crate::evaluate::baselines::{ewma_corr, mmr_rolling, ms_two_state_filter, EWMA_LAMBDA};
use crate::evaluate::{avg_frobenius, log_score, mae_mse, MetricReport};
use crate::filter::filter_pass;
use crate::model::{Block, Family, ModelSpec};
use crate::simulate::{
    dgp_model, implied_mixture_corr, replication_rng, sdmm_observations, sdmm_path,
    simulate_corr_series, simulate_mixfix, weight_pattern_series, Dgp, PatternKind,
    MIXFIX_MEANS, MIXFIX_VARS,
};

/// Which Monte Carlo study to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    Sdmm,
    Corr,
    Weights,
    Misspec,
    Logscore,
}

impl Study {
    pub const ALL: [Study; 5] =
        [Study::Sdmm, Study::Corr, Study::Weights, Study::Misspec, Study::Logscore];

    pub fn name(self) -> &'static str {
        match self {
            Study::Sdmm => "sdmm",
            Study::Corr => "corr",
            Study::Weights => "weights",
            Study::Misspec => "misspec",
            Study::Logscore => "logscore",
        }
    }
}

impl std::str::FromStr for Study {
    type Err = DammError;
    fn from_str(s: &str) -> Result<Self> {
        Study::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| DammError::domain("study", format!("unknown study '{s}'")))
    }
}

/// Scale and reproducibility knobs of one study run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchConfig {
    pub study: Study,
    pub t_len: usize,
    pub replications: usize,
    pub seed: u64,
    /// Worker threads; 0 uses one per processor.
    pub jobs: usize,
    pub estimation: EstimationConfig,
}

impl BenchConfig {
    /// Desk-scale defaults per study, with a bench-tuned optimizer budget
    /// (single start, relaxed gradient tolerance).
    pub fn for_study(study: Study, seed: u64) -> Self {
        let (t_len, replications) = match study {
            Study::Sdmm => (2000, 50),
            Study::Corr => (1000, 20),
            Study::Weights => (1000, 20),
            Study::Misspec => (2000, 20),
            Study::Logscore => (1200, 3),
        };
        BenchConfig {
            study,
            t_len,
            replications,
            seed,
            jobs: 0,
            estimation: bench_estimation(seed),
        }
    }
}

fn bench_estimation(seed: u64) -> EstimationConfig {
    EstimationConfig {
        max_iterations: 120,
        gradient_tolerance: 1e-4,
        restarts: 1,
        seed,
        ..EstimationConfig::default()
    }
}

/// A finished study: metric columns plus failure accounting.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StudyReport {
    pub study: Study,
    pub t_len: usize,
    pub replications: usize,
    pub failures: usize,
    pub metrics: Vec<MetricReport>,
    pub notes: Vec<String>,
}

impl StudyReport {
    /// Median of a named metric column.
    pub fn median_of(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|m| m.name == name).map(|m| m.median)
    }
}

/// Run one study on a worker pool sized by `config.jobs`.
pub fn run_study(config: &BenchConfig) -> Result<StudyReport> {
    let body = || match config.study {
        Study::Sdmm => sdmm_study(config),
        Study::Corr => corr_study(config),
        Study::Weights => weights_study(config),
        Study::Misspec => misspec_study(config),
        Study::Logscore => logscore_study(config),
    };
    if config.jobs == 0 {
        body()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| DammError::Estimation(format!("worker pool: {e}")))?;
        pool.install(body)
    }
}

/// Columns produced by one replication: (metric name, value) pairs.
type RepRow = Vec<(&'static str, f64)>;

/// Run the replication closure over 0..B in parallel, merge by index, and
/// collapse the survivors into metric columns.
fn replicate(
    config: &BenchConfig,
    rep_fn: impl Fn(u64) -> Result<RepRow> + Sync,
) -> (Vec<MetricReport>, usize, Vec<String>) {
    let outcomes: Vec<Result<RepRow>> =
        (0..config.replications as u64).into_par_iter().map(&rep_fn).collect();
    collect_rows(outcomes)
}

fn collect_rows(outcomes: Vec<Result<RepRow>>) -> (Vec<MetricReport>, usize, Vec<String>) {
    let mut columns: Vec<(&'static str, Vec<f64>)> = Vec::new();
    let mut failures = 0;
    let mut notes = Vec::new();
    for (rep, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(row) => {
                for (name, value) in row {
                    match columns.iter_mut().find(|(n, _)| *n == name) {
                        Some((_, vals)) => vals.push(value),
                        None => columns.push((name, vec![value])),
                    }
                }
            }
            Err(e) => {
                failures += 1;
                notes.push(format!("replication {rep} failed: {e}"));
            }
        }
    }
    let metrics =
        columns.into_iter().map(|(name, vals)| MetricReport::new(name, vals)).collect();
    (metrics, failures, notes)
}

fn tag_relative(metrics: &mut [MetricReport], pairs: &[(&str, &str)]) {
    for m in metrics.iter_mut() {
        if let Some((_, base)) = pairs.iter().find(|(name, _)| *name == m.name) {
            m.relative_to = Some((*base).to_string());
        }
    }
}

/// Observations that both the dynamic fit and the rolling window can score:
/// the first `window - 1` steps carry no rolling estimate.
const MMR_WINDOW: usize = 100;

/// Weight tracking on the stochastic two-component location-scale model:
/// one latent parameter path shared by every replication, fresh measurement
/// noise per replication, rolling-window EM as the baseline.
fn sdmm_study(config: &BenchConfig) -> Result<StudyReport> {
    let mut path_rng = replication_rng(config.seed, 0);
    let path = sdmm_path(config.t_len, &mut path_rng);
    let spec = ModelSpec::new(Family::UniGaussian, 2, 1)?;

    let (mut metrics, failures, notes) = replicate(config, |rep| {
        let mut rng = replication_rng(config.seed, 1 + rep);
        let obs = sdmm_observations(&path, &mut rng);
        let data: Vec<Vec<f64>> = obs.iter().map(|y| vec![*y]).collect();

        let template = CoefficientTemplate::new(spec.clone())?;
        let mut est = config.estimation.clone();
        est.seed = config.seed.wrapping_add(rep);
        let fit = fit_ml(&template, &data, &est)?;
        let trace = filter_pass(&spec, &fit.coefficients, &data, None)?;

        // Match fitted labels to the truth by mean level: the first truth
        // component sits at the higher location.
        let avg_mean = |comp: usize| -> f64 {
            trace
                .steps
                .iter()
                .map(|s| match &s.comps[comp] {
                    crate::density::ComponentParams::Gaussian(p) => p.mean,
                    _ => f64::NAN,
                })
                .sum::<f64>()
                / trace.steps.len() as f64
        };
        let hi = if avg_mean(0) >= avg_mean(1) { 0 } else { 1 };
        let damm_w: Vec<f64> = trace.steps.iter().map(|s| s.weights[hi]).collect();

        let mmr = mmr_rolling(&data, 2, MMR_WINDOW, config.seed.wrapping_add(rep))?;
        let mut mmr_w = Vec::with_capacity(config.t_len);
        for fit in mmr.fits.iter().flatten() {
            let hi = if mean_of(&fit.comps[0]) >= mean_of(&fit.comps[1]) { 0 } else { 1 };
            mmr_w.push(fit.weights[hi]);
        }

        let lo = MMR_WINDOW - 1;
        let truth = &path.omega[lo..];
        let (damm_mae, damm_mse) = mae_mse(&damm_w[lo..], truth)?;
        let (mmr_mae, mmr_mse) = mae_mse(&mmr_w, truth)?;
        Ok(vec![
            ("damm_weight_mae", damm_mae),
            ("damm_weight_mse", damm_mse),
            ("mmr_weight_mae", mmr_mae),
            ("mmr_weight_mse", mmr_mse),
        ])
    });
    tag_relative(
        &mut metrics,
        &[("damm_weight_mae", "mmr_weight_mae"), ("damm_weight_mse", "mmr_weight_mse")],
    );
    Ok(StudyReport {
        study: config.study,
        t_len: config.t_len,
        replications: config.replications,
        failures,
        metrics,
        notes,
    })
}

fn mean_of(comp: &crate::density::ComponentParams) -> f64 {
    match comp {
        crate::density::ComponentParams::Gaussian(p) => p.mean,
        _ => f64::NAN,
    }
}

/// Correlation tracking on bivariate Gaussian data across the seven target
/// patterns, against the exponentially weighted baseline.
fn corr_study(config: &BenchConfig) -> Result<StudyReport> {
    let patterns = PatternKind::ALL;
    let b = config.replications as u64;
    let spec = ModelSpec::new(Family::MvGaussian, 1, 2)?;

    let jobs: Vec<(usize, u64)> = (0..patterns.len())
        .flat_map(|p| (0..b).map(move |r| (p, r)))
        .collect();
    let outcomes: Vec<Result<RepRow>> = jobs
        .par_iter()
        .map(|(p, rep)| {
            let kind = patterns[*p];
            let mut rng = replication_rng(config.seed, (*p as u64) * b + rep + 1);
            let (data, rho) = simulate_corr_series(kind, config.t_len, &mut rng);

            let mut template = CoefficientTemplate::new(spec.clone())?;
            template.pin_block(Block::Means, &[0.0, 0.0])?;
            template.pin_block(Block::Scales, &[0.0, 0.0])?;
            let mut est = config.estimation.clone();
            est.seed = config.seed.wrapping_add(*rep);
            let fit = fit_ml(&template, &data, &est)?;
            let trace = filter_pass(&spec, &fit.coefficients, &data, None)?;
            let damm_rho: Vec<f64> = trace
                .steps
                .iter()
                .map(|s| match &s.comps[0] {
                    crate::density::ComponentParams::MvGaussian(p) => p.corr[(0, 1)],
                    _ => f64::NAN,
                })
                .collect();
            let ewma = ewma_corr(&data, EWMA_LAMBDA)?;

            let (damm_mae, damm_mse) = mae_mse(&damm_rho, &rho)?;
            let (ewma_mae, ewma_mse) = mae_mse(&ewma, &rho)?;
            Ok(vec![
                (metric_name(kind, "damm_corr_mae"), damm_mae),
                (metric_name(kind, "damm_corr_mse"), damm_mse),
                (metric_name(kind, "ewma_corr_mae"), ewma_mae),
                (metric_name(kind, "ewma_corr_mse"), ewma_mse),
            ])
        })
        .collect();
    let (mut metrics, failures, notes) = collect_rows(outcomes);
    for kind in patterns {
        let damm = metric_name(kind, "damm_corr_mae");
        let base = metric_name(kind, "ewma_corr_mae");
        let damm2 = metric_name(kind, "damm_corr_mse");
        let base2 = metric_name(kind, "ewma_corr_mse");
        tag_relative(&mut metrics, &[(damm, base), (damm2, base2)]);
    }
    Ok(StudyReport {
        study: config.study,
        t_len: config.t_len,
        replications: config.replications,
        failures,
        metrics,
        notes,
    })
}

/// Stable `pattern/metric` names; the leak-free &'static str comes from a
/// fixed table so replication rows stay allocation-light.
fn metric_name(kind: PatternKind, metric: &str) -> &'static str {
    const TABLE: &[(&str, &str)] = &[
        ("constant/damm_corr_mae", "constant"),
        ("constant/damm_corr_mse", "constant"),
        ("constant/ewma_corr_mae", "constant"),
        ("constant/ewma_corr_mse", "constant"),
        ("constant/damm_weight_mae", "constant"),
        ("constant/damm_weight_mse", "constant"),
        ("constant/ms_weight_mae", "constant"),
        ("constant/ms_weight_mse", "constant"),
        ("sine/damm_corr_mae", "sine"),
        ("sine/damm_corr_mse", "sine"),
        ("sine/ewma_corr_mae", "sine"),
        ("sine/ewma_corr_mse", "sine"),
        ("sine/damm_weight_mae", "sine"),
        ("sine/damm_weight_mse", "sine"),
        ("sine/ms_weight_mae", "sine"),
        ("sine/ms_weight_mse", "sine"),
        ("fast-sine/damm_corr_mae", "fast-sine"),
        ("fast-sine/damm_corr_mse", "fast-sine"),
        ("fast-sine/ewma_corr_mae", "fast-sine"),
        ("fast-sine/ewma_corr_mse", "fast-sine"),
        ("fast-sine/damm_weight_mae", "fast-sine"),
        ("fast-sine/damm_weight_mse", "fast-sine"),
        ("fast-sine/ms_weight_mae", "fast-sine"),
        ("fast-sine/ms_weight_mse", "fast-sine"),
        ("step/damm_corr_mae", "step"),
        ("step/damm_corr_mse", "step"),
        ("step/ewma_corr_mae", "step"),
        ("step/ewma_corr_mse", "step"),
        ("step/damm_weight_mae", "step"),
        ("step/damm_weight_mse", "step"),
        ("step/ms_weight_mae", "step"),
        ("step/ms_weight_mse", "step"),
        ("ramp/damm_corr_mae", "ramp"),
        ("ramp/damm_corr_mse", "ramp"),
        ("ramp/ewma_corr_mae", "ramp"),
        ("ramp/ewma_corr_mse", "ramp"),
        ("ramp/damm_weight_mae", "ramp"),
        ("ramp/damm_weight_mse", "ramp"),
        ("ramp/ms_weight_mae", "ramp"),
        ("ramp/ms_weight_mse", "ramp"),
        ("model1/damm_corr_mae", "model1"),
        ("model1/damm_corr_mse", "model1"),
        ("model1/ewma_corr_mae", "model1"),
        ("model1/ewma_corr_mse", "model1"),
        ("model1/damm_weight_mae", "model1"),
        ("model1/damm_weight_mse", "model1"),
        ("model1/ms_weight_mae", "model1"),
        ("model1/ms_weight_mse", "model1"),
        ("model2/damm_corr_mae", "model2"),
        ("model2/damm_corr_mse", "model2"),
        ("model2/ewma_corr_mae", "model2"),
        ("model2/ewma_corr_mse", "model2"),
        ("model2/damm_weight_mae", "model2"),
        ("model2/damm_weight_mse", "model2"),
        ("model2/ms_weight_mae", "model2"),
        ("model2/ms_weight_mse", "model2"),
    ];
    let want_prefix = kind.name();
    for (full, prefix) in TABLE {
        if *prefix == want_prefix && full[prefix.len() + 1..] == *metric {
            return full;
        }
    }
    unreachable!("metric {metric} not registered for pattern {want_prefix}")
}

/// Weight tracking on the fixed-component mixture across the seven target
/// patterns, against the two-state Markov switching baseline.
fn weights_study(config: &BenchConfig) -> Result<StudyReport> {
    let patterns = PatternKind::ALL;
    let b = config.replications as u64;
    let spec = ModelSpec::new(Family::UniGaussian, 2, 1)?;
    let ms_comps = [
        GaussianParams { mean: MIXFIX_MEANS[0], variance: MIXFIX_VARS[0] },
        GaussianParams { mean: MIXFIX_MEANS[1], variance: MIXFIX_VARS[1] },
    ];

    let jobs: Vec<(usize, u64)> = (0..patterns.len())
        .flat_map(|p| (0..b).map(move |r| (p, r)))
        .collect();
    let outcomes: Vec<Result<RepRow>> = jobs
        .par_iter()
        .map(|(p, rep)| {
            let kind = patterns[*p];
            let mut rng = replication_rng(config.seed, (*p as u64) * b + rep + 1);
            let omega = weight_pattern_series(kind, config.t_len, 0, &mut rng);
            let data: Vec<Vec<f64>> =
                simulate_mixfix(&omega, &mut rng).into_iter().map(|y| vec![y]).collect();

            // Components pinned at the known densities; only the weight
            // path is estimated, so the labels are fixed by construction.
            let mut template = CoefficientTemplate::new(spec.clone())?;
            template.pin_block(Block::Means, &MIXFIX_MEANS)?;
            template
                .pin_block(Block::Scales, &[MIXFIX_VARS[0].ln(), MIXFIX_VARS[1].ln()])?;
            let mut est = config.estimation.clone();
            est.seed = config.seed.wrapping_add(*rep);
            let fit = fit_ml(&template, &data, &est)?;
            let trace = filter_pass(&spec, &fit.coefficients, &data, None)?;
            let damm_w: Vec<f64> = trace.steps.iter().map(|s| s.weights[0]).collect();

            let ms = ms_two_state_filter(&data, &ms_comps)?;

            let (damm_mae, damm_mse) = mae_mse(&damm_w, &omega)?;
            let (ms_mae, ms_mse) = mae_mse(&ms.predicted, &omega)?;
            Ok(vec![
                (metric_name(kind, "damm_weight_mae"), damm_mae),
                (metric_name(kind, "damm_weight_mse"), damm_mse),
                (metric_name(kind, "ms_weight_mae"), ms_mae),
                (metric_name(kind, "ms_weight_mse"), ms_mse),
            ])
        })
        .collect();
    let (mut metrics, failures, notes) = collect_rows(outcomes);
    for kind in patterns {
        tag_relative(
            &mut metrics,
            &[
                (metric_name(kind, "damm_weight_mae"), metric_name(kind, "ms_weight_mae")),
                (metric_name(kind, "damm_weight_mse"), metric_name(kind, "ms_weight_mse")),
            ],
        );
    }
    Ok(StudyReport {
        study: config.study,
        t_len: config.t_len,
        replications: config.replications,
        failures,
        metrics,
        notes,
    })
}

/// Misspecification robustness: data from the fully static four-dimensional
/// design, estimated both by the fully dynamic model and by the true static
/// one; the Frobenius ratio prices the overparametrization.
fn misspec_study(config: &BenchConfig) -> Result<StudyReport> {
    let (mut metrics, failures, notes) = replicate(config, |rep| {
        let mut rng = replication_rng(config.seed, 1 + rep);
        let sample = crate::simulate::simulate_dgp(Dgp::Dgp4, config.t_len, &mut rng)?;

        let frob = |which: Dgp| -> Result<f64> {
            let (spec, _) = dgp_model(which)?;
            let mut template = CoefficientTemplate::new(spec.clone())?;
            template.pin_block(Block::Means, &[0.0; 4])?;
            template.pin_block(Block::Scales, &[0.0; 4])?;
            let mut est = config.estimation.clone();
            est.seed = config.seed.wrapping_add(rep);
            let fit = fit_ml(&template, &sample.data, &est)?;
            let trace = filter_pass(&spec, &fit.coefficients, &sample.data, None)?;
            let fitted: Result<Vec<_>> = trace
                .steps
                .iter()
                .map(|s| implied_mixture_corr(&s.weights, &s.comps))
                .collect();
            avg_frobenius(&fitted?, &sample.truth_corr)
        };
        let f1 = frob(Dgp::Dgp1)?;
        let f4 = frob(Dgp::Dgp4)?;
        Ok(vec![
            ("frob_dgp1", f1),
            ("frob_dgp4", f4),
            ("frob_ratio", f1 / f4),
        ])
    });
    tag_relative(&mut metrics, &[("frob_dgp1", "frob_dgp4")]);
    Ok(StudyReport {
        study: config.study,
        t_len: config.t_len,
        replications: config.replications,
        failures,
        metrics,
        notes,
    })
}

/// Out-of-sample predictive comparison on the stochastic-path generator:
/// rolling log scores of the dynamic mixture against a static mixture.
fn logscore_study(config: &BenchConfig) -> Result<StudyReport> {
    let mut path_rng = replication_rng(config.seed, 0);
    let path = sdmm_path(config.t_len, &mut path_rng);
    let window = config.t_len / 2;
    let refit_every = 40;
    let spec = ModelSpec::new(Family::UniGaussian, 2, 1)?;
    let static_spec = ModelSpec::new(Family::UniGaussian, 2, 1)?
        .with_frozen([Block::Weights, Block::Means, Block::Scales]);

    let (mut metrics, failures, notes) = replicate(config, |rep| {
        let mut rng = replication_rng(config.seed, 1 + rep);
        let obs = sdmm_observations(&path, &mut rng);
        let data: Vec<Vec<f64>> = obs.iter().map(|y| vec![*y]).collect();
        let horizon = (config.t_len - window) as f64;

        let mut est = config.estimation.clone();
        est.seed = config.seed.wrapping_add(rep);
        let dynamic = CoefficientTemplate::new(spec.clone())?;
        let damm = log_score(&dynamic, &data, window, refit_every, &est)?;
        let fixed = CoefficientTemplate::new(static_spec.clone())?;
        let stat = log_score(&fixed, &data, window, refit_every, &est)?;
        Ok(vec![
            ("damm_avg_logscore", damm.total / horizon),
            ("static_avg_logscore", stat.total / horizon),
            ("carried_refits", (damm.carried + stat.carried) as f64),
        ])
    });
    tag_relative(&mut metrics, &[("damm_avg_logscore", "static_avg_logscore")]);
    Ok(StudyReport {
        study: config.study,
        t_len: config.t_len,
        replications: config.replications,
        failures,
        metrics,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smoke_config(study: Study, t_len: usize, reps: usize) -> BenchConfig {
        let mut config = BenchConfig::for_study(study, 99);
        config.t_len = t_len;
        config.replications = reps;
        config.estimation.max_iterations = 40;
        config.estimation.gradient_tolerance = 1e-3;
        config
    }

    #[test]
    fn study_names_round_trip() {
        for study in Study::ALL {
            assert_eq!(study.name().parse::<Study>().unwrap(), study);
        }
        assert!("nope".parse::<Study>().is_err());
    }

    #[test]
    fn sdmm_smoke_run_emits_all_columns() {
        let report = run_study(&smoke_config(Study::Sdmm, 220, 2)).unwrap();
        assert_eq!(report.failures, 0, "notes: {:?}", report.notes);
        for name in
            ["damm_weight_mae", "damm_weight_mse", "mmr_weight_mae", "mmr_weight_mse"]
        {
            let m = report.metrics.iter().find(|m| m.name == name).unwrap();
            assert_eq!(m.per_replication.len(), 2);
            assert!(m.median.is_finite() && m.median >= 0.0);
        }
        let damm =
            report.metrics.iter().find(|m| m.name == "damm_weight_mae").unwrap();
        assert_eq!(damm.relative_to.as_deref(), Some("mmr_weight_mae"));
    }

    #[test]
    fn weights_smoke_run_covers_every_pattern() {
        let report = run_study(&smoke_config(Study::Weights, 150, 1)).unwrap();
        assert_eq!(report.failures, 0, "notes: {:?}", report.notes);
        for kind in PatternKind::ALL {
            assert!(
                report.median_of(metric_name(kind, "damm_weight_mae")).is_some(),
                "missing column for {kind:?}"
            );
        }
    }

    #[test]
    fn corr_smoke_run_is_deterministic() {
        let config = smoke_config(Study::Corr, 120, 1);
        let a = run_study(&config).unwrap();
        let b = run_study(&config).unwrap();
        assert_eq!(a.failures, 0, "notes: {:?}", a.notes);
        assert_eq!(a.metrics.len(), b.metrics.len());
        for (x, y) in a.metrics.iter().zip(&b.metrics) {
            assert_eq!(x.name, y.name);
            assert_eq!(x.per_replication, y.per_replication);
        }
    }

    #[test]
    fn misspec_smoke_run_reports_the_ratio() {
        let report = run_study(&smoke_config(Study::Misspec, 160, 1)).unwrap();
        assert_eq!(report.failures, 0, "notes: {:?}", report.notes);
        let ratio = report.median_of("frob_ratio").unwrap();
        assert!(ratio.is_finite() && ratio > 0.0);
    }

    #[test]
    fn logscore_smoke_run_scores_both_models() {
        let report = run_study(&smoke_config(Study::Logscore, 260, 1)).unwrap();
        assert_eq!(report.failures, 0, "notes: {:?}", report.notes);
        assert!(report.median_of("damm_avg_logscore").unwrap().is_finite());
        assert!(report.median_of("static_avg_logscore").unwrap().is_finite());
    }

    #[test]
    fn failed_replications_are_counted_not_fatal() {
        let outcomes: Vec<Result<RepRow>> = vec![
            Ok(vec![("m", 1.0)]),
            Err(DammError::Estimation("boom".into())),
            Ok(vec![("m", 3.0)]),
        ];
        let (metrics, failures, notes) = collect_rows(outcomes);
        assert_eq!(failures, 1);
        assert_eq!(notes.len(), 1);
        assert!(notes[0].contains("replication 1"));
        assert_eq!(metrics[0].per_replication, vec![1.0, 3.0]);
        assert_eq!(metrics[0].median, 2.0);
    }
}
