//! Finer split of the multivariate step cost.

use std::time::Instant;

use damm::density::CorrChol;
use damm::mapping::{corr_map_jacobian, corr_unmap};
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
    let comps: Vec<_> = state
        .comps
        .iter()
        .map(|cx| spec.map_component(cx).map(|(p, _)| p))
        .collect::<Result<Vec<_>, _>>()
        .unwrap();
    let corr = match &comps[0] {
        damm::density::ComponentParams::MvGaussian(p) => p.corr.clone(),
        _ => unreachable!(),
    };
    let angles = corr_unmap(&corr).unwrap();
    let y = &sample.data[0];
    let _ = y;

    time("corr_map_jacobian d=4", 50000, || {
        let _ = corr_map_jacobian(&angles, 4).unwrap();
    });
    time("CorrChol::new d=4", 50000, || {
        let _ = CorrChol::new(&corr).unwrap();
    });
    let chol = CorrChol::new(&corr).unwrap();
    let v = nalgebra::DVector::from_vec(vec![0.3, -0.2, 0.5, 0.1]);
    time("chol.solve", 50000, || {
        let _ = chol.solve(&v);
    });
    time("chol.inverse", 50000, || {
        let _ = chol.inverse();
    });
}
