//! Fixtures shared by the benchmarks.

use lpreach::{
    build_sigma_net, Catalog, DiscretizationPlan, DynamicsSpec, ProblemInstance, SigmaNet,
    DEFAULT_NET_CAP,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Setup {
    pub spec: DynamicsSpec,
    pub instance: ProblemInstance,
    pub plan: DiscretizationPlan,
    pub net: SigmaNet,
}

/// Planar rotator on `[0, 1]` with an L2 budget of 1.
pub fn rotator(beta: f64, n_steps: usize, q: usize, sigma: f64) -> Setup {
    let spec = DynamicsSpec::catalog(Catalog::Rotator);
    let instance = ProblemInstance::new(0.0, 1.0, vec![1.0, 0.0], 2.0, 1.0).unwrap();
    let plan = DiscretizationPlan::direct(&instance, beta, n_steps, q, sigma).unwrap();
    let net = build_sigma_net(2, sigma, DEFAULT_NET_CAP).unwrap();
    Setup {
        spec,
        instance,
        plan,
        net,
    }
}

/// Uniform points in `[-1, 1]^dim`.
pub fn cloud(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}
