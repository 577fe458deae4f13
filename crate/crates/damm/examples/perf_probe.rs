//! Rough single-core timings of the estimation hot paths. Not a benchmark
//! harness; just enough to budget the Monte Carlo studies.

use std::time::Instant;

use damm::bench::{run_study, BenchConfig, Study};
use damm::estimate::{fit_ml, CoefficientTemplate};
use damm::filter::filter_loglik;
use damm::model::{Block, Family, ModelSpec};
use damm::simulate::{dgp_model, replication_rng, simulate_dgp, simulate_sdmm, Dgp};

fn main() {
    let (obs, _) = simulate_sdmm(5000, 11);
    let uni: Vec<Vec<f64>> = obs.into_iter().map(|y| vec![y]).collect();
    let spec = ModelSpec::new(Family::UniGaussian, 2, 1).unwrap();
    let template = CoefficientTemplate::new(spec.clone()).unwrap();
    let est = damm::estimate::EstimationConfig {
        max_iterations: 120,
        gradient_tolerance: 1e-4,
        restarts: 1,
        ..Default::default()
    };
    let start = Instant::now();
    let fit = fit_ml(&template, &uni, &est).unwrap();
    println!(
        "uni J=2 T=5000 fit: {:.2?} ({} iters, {} evals, converged {})",
        start.elapsed(),
        fit.iterations,
        fit.evaluations,
        fit.converged
    );
    let start = Instant::now();
    let passes = 100;
    for _ in 0..passes {
        filter_loglik(&spec, &fit.coefficients, &uni, None).unwrap();
    }
    let per = start.elapsed().as_secs_f64() / (passes as f64 * uni.len() as f64);
    println!("uni J=2 filter: {:.3} us/step", per * 1e6);

    let mut rng = replication_rng(7, 1);
    let sample = simulate_dgp(Dgp::Dgp4, 2000, &mut rng).unwrap();
    for which in [Dgp::Dgp4, Dgp::Dgp1] {
        let (spec, _) = dgp_model(which).unwrap();
        let mut template = CoefficientTemplate::new(spec.clone()).unwrap();
        template.pin_block(Block::Means, &[0.0; 4]).unwrap();
        template.pin_block(Block::Scales, &[0.0; 4]).unwrap();
        let start = Instant::now();
        let fit = fit_ml(&template, &sample.data, &est).unwrap();
        println!(
            "{} fit ({} params, T=2000 d=4): {:.2?} ({} iters, {} evals, converged {}, ll {:.2})",
            which.name(),
            template.n_free(),
            start.elapsed(),
            fit.iterations,
            fit.evaluations,
            fit.converged,
            fit.loglik
        );
    }

    let mut config = BenchConfig::for_study(Study::Misspec, 7);
    config.replications = 1;
    let start = Instant::now();
    let report = run_study(&config).unwrap();
    println!(
        "misspec 1 rep at defaults: {:.2?}, ratio {:?}, failures {}",
        start.elapsed(),
        report.median_of("frob_ratio"),
        report.failures
    );
}
