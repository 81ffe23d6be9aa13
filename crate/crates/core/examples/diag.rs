use rmnet::datagen::{all_actions, gen_synthetic, Benchmark};
use rmnet::eval::nmcg;
use rmnet::models::{fit_g, RMNetModel, Scorer};
use rmnet::train::{train_rmnet, TrainConfig};

fn main() {
    let bench = std::env::args().nth(1).unwrap_or_else(|| "quadratic-a".into());
    let seed: u64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(7);
    let spec = Benchmark::parse(&bench).unwrap().synthetic_spec(seed).unwrap();
    let data = gen_synthetic(&spec).unwrap();
    let actions = all_actions(data.test.a_obs.ncols());
    let test_score = |m: &RMNetModel| {
        let s = m.score_all(&data.test.x, &actions);
        nmcg(&s, &data.test_oracle, 1).unwrap().unwrap()
    };
    let g = fit_g(&data.train, &data.val, seed).unwrap();
    let gv = g.predict(&data.val.x).unwrap();
    let val_mse: f64 = data.val.y.iter().zip(gv.iter()).map(|(y, p)| (y - p).powi(2)).sum::<f64>() / gv.len() as f64;
    // residual spread on train
    let gt = g.predict(&data.train.x).unwrap();
    let res_std = {
        let r: Vec<f64> = data.train.y.iter().zip(gt.iter()).map(|(y, p)| y - p).collect();
        let m = r.iter().sum::<f64>() / r.len() as f64;
        (r.iter().map(|v| (v - m).powi(2)).sum::<f64>() / r.len() as f64).sqrt()
    };
    println!("{bench} seed {seed}: g val mse {val_mse:.4}, train residual std {res_std:.4}");
    for (beta, alpha) in [(0.5, 0.1), (0.5, 0.0), (0.0, 0.1), (0.0, 0.0)] {
        let mut cfg = TrainConfig::default();
        cfg.seed = seed;
        cfg.beta = beta;
        cfg.restarts = 1;
        if let Ok(v) = std::env::var("MAX_EPOCHS") {
            cfg.max_epochs = v.parse().unwrap();
        }
        if let Ok(v) = std::env::var("MIN_EPOCHS") {
            cfg.min_epochs = v.parse().unwrap();
        }
        if let Ok(v) = std::env::var("PATIENCE") {
            cfg.patience = v.parse().unwrap();
        }
        if let Ok(v) = std::env::var("RESTARTS") {
            cfg.restarts = v.parse().unwrap();
        }
        if let Ok(v) = std::env::var("LR") {
            cfg.lr = v.parse().unwrap();
        }
        let gref = if beta > 0.0 { Some(&g) } else { None };
        let (model, rep) = train_rmnet(&data.train, &data.val, &data.val_oracle, gref, alpha, &cfg).unwrap();
        println!(
            "beta {beta} alpha {alpha}: best epoch {} val {:.3} -> test {:.3} ({} epochs)",
            rep.best_epoch, rep.best_val_nmcg, test_score(&model), rep.epochs_run
        );
    }
}
