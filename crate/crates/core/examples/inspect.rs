use rmnet::datagen::{all_actions, gen_synthetic, Benchmark};
use rmnet::models::action_index;
use std::collections::BTreeMap;

fn main() {
    let bench = std::env::args().nth(1).unwrap_or_else(|| "quadratic-a".into());
    for seed in [0u64, 7] {
        let spec = Benchmark::parse(&bench).unwrap().synthetic_spec(seed).unwrap();
        let data = gen_synthetic(&spec).unwrap();
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for i in 0..data.train.len() {
            *counts.entry(action_index(data.train.a_obs.row(i))).or_default() += 1;
        }
        let distinct = counts.len();
        let maxc = counts.values().max().unwrap();
        // oracle spread on test: mean over rows of (best - mean) and (best - worst)
        let o = &data.test_oracle.y_all;
        let n = o.nrows() as f64;
        let (mut gap_mean, mut gap_worst) = (0.0, 0.0);
        for r in o.rows() {
            let best = r.iter().cloned().fold(f64::MIN, f64::max);
            let worst = r.iter().cloned().fold(f64::MAX, f64::min);
            let mean = r.sum() / r.len() as f64;
            gap_mean += (best - mean) / n;
            gap_worst += (best - worst) / n;
        }
        // is the oracle argmax constant across rows?
        let mut argmaxes: BTreeMap<usize, usize> = BTreeMap::new();
        for r in o.rows() {
            let am = r.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
            *argmaxes.entry(am).or_default() += 1;
        }
        println!(
            "{bench} seed {seed}: distinct actions {distinct}/{}, max count {maxc}, gap best-mean {gap_mean:.3}, best-worst {gap_worst:.3}, distinct argmax {} {:?}",
            all_actions(data.train.a_obs.ncols()).nrows(), argmaxes.len(),
            argmaxes.iter().take(4).collect::<Vec<_>>()
        );
    }
}
