//! Where a multivariate filter step spends its time.

use std::time::Instant;

use damm::filter::{filter_loglik, gas_step};
use damm::model::ModelSpec;
use damm::simulate::{dgp_model, replication_rng, simulate_dgp, Dgp};

fn time<F: FnMut()>(label: &str, reps: usize, mut f: F) {
    let start = Instant::now();
    for _ in 0..reps {
        f();
    }
    let per = start.elapsed().as_secs_f64() / reps as f64;
    println!("{label}: {:.3} us", per * 1e6);
}

fn main() {
    let mut rng = replication_rng(7, 1);
    let sample = simulate_dgp(Dgp::Dgp4, 2000, &mut rng).unwrap();
    let (spec, coeffs): (ModelSpec, _) = dgp_model(Dgp::Dgp1).unwrap();
    let state = coeffs.unconditional_state(&spec);
    let y = &sample.data[0];

    time("gas_step mv d=4 J=2", 20000, || {
        let _ = gas_step(&spec, &coeffs, &state, y, 1).unwrap();
    });
    time("map_component (one comp)", 20000, || {
        let _ = spec.map_component(&state.comps[0]).unwrap();
    });
    time("map_weights", 20000, || {
        let _ = spec.map_weights(&state.weights);
    });

    let comps: Vec<_> = state
        .comps
        .iter()
        .map(|cx| spec.map_component(cx).map(|(p, _)| p))
        .collect::<Result<Vec<_>, _>>()
        .unwrap();
    time("logpdf (one comp)", 20000, || {
        let _ = comps[0].logpdf(y).unwrap();
    });
    time("score_and_loglik (one comp)", 20000, || {
        let _ = damm::filter::component_score(&comps[0], y).unwrap();
    });

    time("filter_loglik T=2000", 5, || {
        let _ = filter_loglik(&spec, &coeffs, &sample.data, None).unwrap();
    });
}
