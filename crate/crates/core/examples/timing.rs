use rmnet::bench::{prepare_data, train_method, ExperimentConfig, Method};
use rmnet::datagen::all_actions;
use rmnet::eval::MetricsReport;
use rmnet::train::TrainConfig;

fn main() {
    let bench = std::env::args().nth(1).unwrap_or_else(|| "linear-a".into());
    let method = std::env::args().nth(2).unwrap_or_else(|| "rmnet".into());
    let spec = std::env::args().nth(3).unwrap_or_else(|| "3".into());
    let seeds: Vec<u64> = if spec.contains(',') {
        spec.split(',').map(|s| s.parse().unwrap()).collect()
    } else {
        (0..spec.parse().unwrap()).collect()
    };
    let mut cfg = ExperimentConfig::default();
    cfg.benchmark = bench.clone();
    let method = Method::parse(&method).unwrap();
    let mut vals = Vec::new();
    for seed in seeds {
        let data = prepare_data(&cfg, seed).unwrap();
        let mut tc = TrainConfig::default();
        tc.seed = seed;
        if let Ok(r) = std::env::var("RESTARTS") {
            tc.restarts = r.parse().unwrap();
        }
        if let Ok(r) = std::env::var("MIN_EPOCHS") {
            tc.min_epochs = r.parse().unwrap();
        }
        if let Ok(r) = std::env::var("PATIENCE") {
            tc.patience = r.parse().unwrap();
        }
        let t0 = std::time::Instant::now();
        let (scorer, report, _) = train_method(method, &data, &tc).unwrap();
        let scores = scorer.score_all(&data.test.x, &all_actions(data.test.a_obs.ncols()));
        let rep = MetricsReport::compute(&scores, &data.test_oracle, 1).unwrap();
        let nm = rep.nmcg.unwrap();
        vals.push(nm);
        println!(
            "{bench} {} seed {seed}: test nmcg {:.3} (alpha {:?}, {:.0}s)",
            method.name(), nm,
            report.as_ref().map(|r| r.selected_alpha),
            t0.elapsed().as_secs_f64()
        );
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    println!("{bench} {} mean: {:.3}", method.name(), mean);
}
