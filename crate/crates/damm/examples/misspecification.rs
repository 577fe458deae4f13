//! Cost of estimating dynamics that are not there: data come from a
//! four-dimensional two-component design whose weight and correlations are
//! constant. Refit it once with the matching static spec and once with both
//! recursions live; the live recursions chase sampling noise, and the
//! Frobenius distance between each fit's implied observation correlation
//! and the generating one quantifies the damage.

use damm::estimate::{fit_ml, CoefficientTemplate, EstimationConfig};
use damm::evaluate::avg_frobenius;
use damm::filter::filter_pass;
use damm::model::Block;
use damm::simulate::{dgp_model, implied_mixture_corr, replication_rng, simulate_dgp, Dgp};

fn main() -> damm::Result<()> {
    let t_len = 800;
    let mut rng = replication_rng(3, 0);
    let sample = simulate_dgp(Dgp::Dgp4, t_len, &mut rng)?;

    let config = EstimationConfig {
        max_iterations: 120,
        restarts: 1,
        gradient_tolerance: 1e-4,
        ..EstimationConfig::default()
    };

    let mut distances = Vec::new();
    for which in [Dgp::Dgp4, Dgp::Dgp1] {
        let (spec, _) = dgp_model(which)?;
        let mut template = CoefficientTemplate::new(spec.clone())?;
        // The generating margins are standard; estimating them too would
        // confound the comparison, so pin means and log-scales at 0.
        template.pin_block(Block::Means, &vec![0.0; spec.d])?;
        template.pin_block(Block::Scales, &vec![0.0; spec.d])?;

        let fit = fit_ml(&template, &sample.data, &config)?;
        let trace = filter_pass(&spec, &fit.coefficients, &sample.data, None)?;
        let implied = trace
            .steps
            .iter()
            .map(|s| implied_mixture_corr(&s.weights, &s.comps))
            .collect::<damm::Result<Vec<_>>>()?;
        let frob = avg_frobenius(&implied, &sample.truth_corr)?;
        let label = if which.dynamic_correlations() {
            "dynamic weight and correlations"
        } else {
            "static weight and correlations"
        };
        println!("{label:<33} loglik {:>10.3}  avg Frobenius distance {frob:.4}", fit.loglik);
        distances.push(frob);
    }
    println!(
        "\nestimating the needless dynamics multiplies the distance by {:.2}",
        distances[1] / distances[0]
    );
    Ok(())
}
