//! How far the big misspecification fit moves with a generous iteration
//! budget, and what that does to the Frobenius ratio.

use std::time::Instant;

use damm::estimate::{fit_ml, CoefficientTemplate, EstimationConfig};
use damm::evaluate::avg_frobenius;
use damm::filter::filter_pass;
use damm::model::Block;
use damm::simulate::{dgp_model, implied_mixture_corr, replication_rng, simulate_dgp, Dgp};

fn main() {
    let mut rng = replication_rng(7, 1);
    let sample = simulate_dgp(Dgp::Dgp4, 2000, &mut rng).unwrap();
    for (which, iters) in [(Dgp::Dgp4, 200), (Dgp::Dgp1, 500)] {
        let (spec, _) = dgp_model(which).unwrap();
        let mut template = CoefficientTemplate::new(spec.clone()).unwrap();
        template.pin_block(Block::Means, &[0.0; 4]).unwrap();
        template.pin_block(Block::Scales, &[0.0; 4]).unwrap();
        let est = EstimationConfig {
            max_iterations: iters,
            gradient_tolerance: 1e-4,
            restarts: 1,
            ..Default::default()
        };
        let start = Instant::now();
        let fit = fit_ml(&template, &sample.data, &est).unwrap();
        let trace = filter_pass(&spec, &fit.coefficients, &sample.data, None).unwrap();
        let fitted: Vec<_> = trace
            .steps
            .iter()
            .map(|s| implied_mixture_corr(&s.weights, &s.comps).unwrap())
            .collect();
        let frob = avg_frobenius(&fitted, &sample.truth_corr).unwrap();
        println!(
            "{}: {:.1?} iters={} evals={} converged={} ll={:.3} frob={:.5}",
            which.name(),
            start.elapsed(),
            fit.iterations,
            fit.evaluations,
            fit.converged,
            fit.loglik,
            frob
        );
        let labels = template.labels();
        let packed = template.pack(&fit.coefficients, est.stationarity_bound).unwrap();
        for (l, v) in labels.iter().zip(&packed) {
            if l.starts_with("a[") && v.abs() > 0.02 {
                println!("   {l} = {v:.4}");
            }
        }
    }
}
