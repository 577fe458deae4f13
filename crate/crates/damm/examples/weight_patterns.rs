//! Track a time-varying mixing weight between two fixed Gaussian components,
//! against a two-state Markov-switching filter that knows the true component
//! densities.

use damm::density::GaussianParams;
use damm::estimate::{fit_ml, CoefficientTemplate, EstimationConfig};
use damm::evaluate::baselines::ms_two_state_filter;
use damm::evaluate::mae_mse;
use damm::filter::filter_pass;
use damm::model::{Block, Family, ModelSpec};
use damm::simulate::{
    replication_rng, simulate_mixfix, weight_pattern_series, PatternKind, MIXFIX_MEANS,
    MIXFIX_VARS,
};

fn main() -> damm::Result<()> {
    let t_len = 500;
    for pattern in [PatternKind::Step, PatternKind::Sine, PatternKind::Model1] {
        let mut pattern_rng = replication_rng(31, 0);
        let omega = weight_pattern_series(pattern, t_len, 0, &mut pattern_rng);
        let mut obs_rng = replication_rng(31, 1);
        let data: Vec<Vec<f64>> =
            simulate_mixfix(&omega, &mut obs_rng).into_iter().map(|y| vec![y]).collect();

        // Pin both components at the generating values (the study isolates
        // the weight recursion), leaving three free coefficients.
        let spec = ModelSpec::new(Family::UniGaussian, 2, 1)?;
        let mut template = CoefficientTemplate::new(spec.clone())?;
        template.pin_block(Block::Means, &MIXFIX_MEANS)?;
        template.pin_block(Block::Scales, &[MIXFIX_VARS[0].ln(), MIXFIX_VARS[1].ln()])?;

        let config = EstimationConfig {
            max_iterations: 150,
            restarts: 1,
            gradient_tolerance: 1e-4,
            ..EstimationConfig::default()
        };
        let fit = fit_ml(&template, &data, &config)?;
        let trace = filter_pass(&spec, &fit.coefficients, &data, None)?;
        let w_damm: Vec<f64> = trace.steps.iter().map(|s| s.weights[0]).collect();

        let regimes = [
            GaussianParams { mean: MIXFIX_MEANS[0], variance: MIXFIX_VARS[0] },
            GaussianParams { mean: MIXFIX_MEANS[1], variance: MIXFIX_VARS[1] },
        ];
        let ms = ms_two_state_filter(&data, &regimes)?;

        let (mae_damm, _) = mae_mse(&w_damm, &omega)?;
        let (mae_ms, _) = mae_mse(&ms.predicted, &omega)?;
        println!(
            "{:<10} score-driven MAE {mae_damm:.4}   Markov-switching MAE {mae_ms:.4}   ratio {:.3}",
            pattern.name(),
            mae_damm / mae_ms
        );
    }
    Ok(())
}
