use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use txrate_core::gmm::{fit_gmm, membership, run_em, GmmOptions, Point2};

fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point2> {
    let centers: Vec<Point2> = (0..rng.gen_range(1..5)).map(|_| [rng.gen(), rng.gen()]).collect();
    (0..n)
        .map(|i| {
            let c = centers[i % centers.len()];
            [c[0] + 0.05 * rng.gen::<f64>(), c[1] + 0.05 * rng.gen::<f64>()]
        })
        .collect()
}

#[test]
fn em_log_likelihood_never_decreases() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let opts = GmmOptions::default();
    for seed in 0..100u64 {
        let pts = cloud(&mut rng, 60);
        let k = 2 + (seed % 4) as usize;
        let run = run_em(&pts, k, seed, &opts).unwrap();
        for w in run.log_likelihoods.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "seed {seed}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn responsibilities_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let opts = GmmOptions { n_init: 1, ..GmmOptions::default() };
    for model_seed in 0..10u64 {
        let pts = cloud(&mut rng, 40);
        let model = fit_gmm(&pts, 3, model_seed, &opts).unwrap();
        for _ in 0..100 {
            let x = [rng.gen_range(-1.0..2.0), rng.gen_range(-1.0..2.0)];
            let m = membership(&model, x);
            let total: f64 = m.probabilities.iter().sum();
            assert!((total - 1.0).abs() <= 1e-9);
            assert!(m.probabilities.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }
}
