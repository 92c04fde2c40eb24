use lieflow::algebra::{build_basis, AlgebraDescriptor, BiInvariantMetric};
use lieflow::group::{rbm_step, GroupElement};
use lieflow::rng::RngStream;
use rayon::prelude::*;
use std::time::Instant;

fn main() {
    let basis = build_basis(
        AlgebraDescriptor::special_orthogonal(3).unwrap(),
        BiInvariantMetric::frobenius(1.0).unwrap(),
    )
    .unwrap();
    let start = Instant::now();
    let n_traj = 200usize;
    let steps = 10_000usize;
    let traces: Vec<f64> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(7, i as u64);
            let mut g = GroupElement::identity(basis.descriptor());
            for _ in 0..steps {
                g = rbm_step(&g, 1e-3, &mut rng, &basis).unwrap();
            }
            g.trace_re()
        })
        .collect();
    let elapsed = start.elapsed().as_secs_f64();
    let mean: f64 = traces.iter().sum::<f64>() / n_traj as f64;
    println!("{} trajectories x {} steps in {:.2}s -> mean tr {:.3}", n_traj, steps, elapsed, mean);
    println!("projected for 1e4 trajectories: {:.0}s", elapsed * 50.0);
}
