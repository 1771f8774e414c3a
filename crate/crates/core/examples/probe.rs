// Probe distance-estimate quality across regimes.
use tensorcf::bfs::expansion_radius;
use tensorcf::distance::{all_pairs_distances, DistanceParams};
use tensorcf::graph::build_bipartite_graph;
use tensorcf::metrics::distance_concentration_report;
use tensorcf::model::{sample_latent_model, sample_observations, Basis};
use tensorcf::rng;
use tensorcf::split::{lower_half_len, split_observations};

fn run(n: usize, p: f64, lambdas: &[f64], sigma: f64, seed: u64) {
    let model = sample_latent_model(n, lambdas.len(), lambdas, Basis::Legendre, rng::subseed(seed, "model")).unwrap();
    let obs = sample_observations(&model, p, sigma, rng::subseed(seed, "obs")).unwrap();
    let split = split_observations(&obs, rng::subseed(seed, "split")).unwrap();
    let g = build_bipartite_graph(&split.omega1, lower_half_len(n), n);
    let t = expansion_radius(n, p).unwrap_or(1).min(3);
    let params = DistanceParams { t, p_eff: split.omega1.p, phi: None };
    let dm = all_pairs_distances(&g, &split.omega1, &params, rng::subseed(seed, "trees"));
    let vf = dm.valid_pair_fraction();
    let rep = distance_concentration_report(&dm, &model, t, 400.min((n*(n-1)/2) / 3), 0.01, seed);
    println!("n={n:4} p={p:.5} t={t} lam={lambdas:?} sigma={sigma}: valid={vf:.3} pairs={} rho={:.3}", rep.pairs, rep.spearman);
}

fn main() {
    for seed in [1u64, 2] {
        run(200, 1.5 / 200.0 / 0.5, &[1.0, 1.0], 0.0, seed); // p_eff ~ 1.5/n
        run(200, 3.0 / 200.0 / 0.5, &[1.0, 1.0], 0.0, seed);
        run(200, 0.8 / 200.0 / 0.5, &[1.0, 1.0], 0.0, seed);
        run(120, 2.0 / 120.0 / 0.5, &[1.0, 1.0], 0.0, seed);
        run(400, 1.5 / 400.0 / 0.5, &[1.0, 1.0], 0.0, seed);
        run(200, 1.5 / 200.0 / 0.5, &[1.0, 0.6], 0.05, seed);
        run(400, 3.0 / 400.0 / 0.5, &[1.0, 1.0], 0.0, seed);
    }
}
