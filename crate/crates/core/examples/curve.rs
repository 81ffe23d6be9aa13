use rmnet::datagen::{all_actions, gen_synthetic, Benchmark};
use rmnet::eval::MetricsReport;
use rmnet::models::{fit_g, RMNetModel, Scorer};
use rmnet::train::{train_rmnet, TrainConfig};

// Budget scan: train to a fixed epoch cap (no early stop) and report the
// best-val checkpoint's test nmCG and uniform MSE, for the XE-led blend
// (beta 0.5) and the MSE-only ablation (beta 0).
fn main() {
    let bench = std::env::args().nth(1).unwrap_or_else(|| "quadratic-b".into());
    let seed: u64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let spec = Benchmark::parse(&bench).unwrap().synthetic_spec(seed).unwrap();
    let data = gen_synthetic(&spec).unwrap();
    let actions = all_actions(data.test.a_obs.ncols());
    let test_eval = |m: &RMNetModel| {
        let s = m.score_all(&data.test.x, &actions);
        let rep = MetricsReport::compute(&s, &data.test_oracle, 1).unwrap();
        (rep.nmcg.unwrap(), rep.mse_u)
    };
    let g = fit_g(&data.train, &data.val, seed).unwrap();
    for epochs in [25usize, 50, 100, 200, 300] {
        for beta in [0.5, 0.0] {
            let mut cfg = TrainConfig::default();
            cfg.seed = seed;
            cfg.beta = beta;
            cfg.restarts = 1;
            cfg.max_epochs = epochs;
            cfg.patience = epochs - 1;
            cfg.min_epochs = epochs;
            if let Ok(v) = std::env::var("LR") {
                cfg.lr = v.parse().unwrap();
            }
            let gref = if beta > 0.0 { Some(&g) } else { None };
            let (model, rep) =
                train_rmnet(&data.train, &data.val, &data.val_oracle, gref, 0.1, &cfg).unwrap();
            let (nm, mse) = test_eval(&model);
            println!(
                "{bench} seed {seed} epochs {epochs:3} beta {beta}: best {:3} val {:.3} test nmcg {:.3} mse_u {:.2}",
                rep.best_epoch, rep.best_val_nmcg, nm, mse
            );
        }
    }
}
