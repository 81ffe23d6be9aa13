use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rmnet::datagen::{all_actions, ObservationalDataset, OracleTable};
use rmnet::eval::nmcg;
use rmnet::models::{fit_g, Scorer};
use rmnet::train::{train_rmnet, TrainConfig};

// Outlier-contaminated dataset where a bounded-gradient loss (soft-XE)
// should outrank MSE: y = a_ups - x1 + noise, 10% of train rows get +-8.
fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let (d, m, n_tr, n_val, n_te) = (5usize, 5usize, 1000usize, 100usize, 200usize);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w_a: Array1<f64> = Array1::from_shape_fn(m, |_| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * 0.5
    });
    let actions = all_actions(m);
    let mut gen = |n: usize, outliers: bool| -> (ObservationalDataset, OracleTable) {
        let x = Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng));
        let mut a_obs = Array2::zeros((n, m));
        let mut y = Array1::zeros(n);
        let mut table = Array2::zeros((n, actions.nrows()));
        for i in 0..n {
            let j = rng.gen_range(0..actions.nrows());
            a_obs.row_mut(i).assign(&actions.row(j));
            for (k, a) in actions.rows().into_iter().enumerate() {
                table[[i, k]] = w_a.dot(&a) - x[[i, 0]];
            }
            let noise: f64 = StandardNormal.sample(&mut rng);
            y[i] = table[[i, j]] + 0.1 * noise;
            if outliers && rng.gen::<f64>() < 0.10 {
                y[i] += if rng.gen::<bool>() { 8.0 } else { -8.0 };
            }
        }
        (
            ObservationalDataset { x, a_obs, y, y_mean: 0.0, y_std: 1.0 },
            OracleTable { y_all: table },
        )
    };
    let (train, _) = gen(n_tr, true);
    let (val, val_oracle) = gen(n_val, false);
    let (test, test_oracle) = gen(n_te, false);
    let g = fit_g(&train, &val, seed).unwrap();
    for beta in [0.0, 0.5, 1.0] {
        let mut cfg = TrainConfig::default();
        cfg.seed = seed;
        cfg.beta = beta;
        cfg.restarts = 1;
        let gref = if beta > 0.0 { Some(&g) } else { None };
        let (model, rep) = train_rmnet(&train, &val, &val_oracle, gref, 0.0, &cfg).unwrap();
        let scores = model.score_all(&test.x, &actions);
        let nm = nmcg(&scores, &test_oracle, 1).unwrap().unwrap();
        println!(
            "seed {seed} beta {beta}: val {:.3} -> test {:.3} (best epoch {})",
            rep.best_val_nmcg, nm, rep.best_epoch
        );
    }
}
