//! Recover the coefficients of a dynamic two-component Gaussian mixture by
//! maximum likelihood and compare them against the generating values.

use damm::estimate::{fit_ml, CoefficientTemplate, EstimationConfig};
use damm::filter::filter_loglik;
use damm::model::{Family, GasCoefficients, ModelSpec};
use damm::simulate::{replication_rng, simulate_damm};

fn main() -> damm::Result<()> {
    let spec = ModelSpec::new(Family::UniGaussian, 2, 1)?;

    // Dynamic component means, static weights and variances.
    let mut truth = GasCoefficients::zeros(&spec);
    truth.kappa = vec![0.0, -0.10, 0.0, 0.075, -0.6];
    truth.a = vec![0.0, 0.05, 0.0, 0.05, 0.0];
    truth.b = vec![0.0, 0.95, 0.0, 0.95, 0.0];

    let mut rng = replication_rng(7, 0);
    let (data, _) = simulate_damm(&spec, &truth, 2000, &mut rng)?;

    let template = CoefficientTemplate::new(spec.clone())?;
    let config =
        EstimationConfig { max_iterations: 200, restarts: 1, ..EstimationConfig::default() };
    let fit = fit_ml(&template, &data, &config)?;

    println!(
        "loglik {:.3}  aic {:.1}  bic {:.1}  np {}  converged {} ({} iterations)",
        fit.loglik, fit.aic, fit.bic, fit.np, fit.converged, fit.iterations
    );
    println!(
        "loglik at the generating coefficients: {:.3}",
        filter_loglik(&spec, &truth, &data, None)?
    );

    println!("\n{:<18} {:>16} {:>16} {:>16}", "coordinate", "kappa", "a", "b");
    for k in 0..spec.state_len() {
        println!(
            "{:<18} {:>7.3} > {:>6.3} {:>7.3} > {:>6.3} {:>7.3} > {:>6.3}",
            spec.coord_label(k),
            truth.kappa[k],
            fit.coefficients.kappa[k],
            truth.a[k],
            fit.coefficients.a[k],
            truth.b[k],
            fit.coefficients.b[k],
        );
    }
    println!("\n(each cell is generating value > fitted value)");
    Ok(())
}
