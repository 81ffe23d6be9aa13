//! Config-driven experiment runner: regenerate data per replication, train
//! every requested method, evaluate with the decision metrics, and
//! aggregate mean ± standard error across replications into CSV and
//! markdown tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::{
    all_actions, gen_synthetic, sgemm, Benchmark, DataError, ObservationalDataset, OracleTable,
};
use crate::eval::{EvalError, MetricsReport};
use crate::io::{
    config_hash, write_epoch_log, write_metrics_csv, Checkpoint, DatasetMetadata, IoError,
    MetricsRow,
};
use crate::models::{fit_g, ridge_fit, Scorer};
use crate::train::{
    select_alpha, select_alpha_multihead, train_multihead, train_rmnet, TrainConfig, TrainError,
    TrainReport,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("bad experiment configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    File(#[from] std::io::Error),
}

/// The trained methods the runner knows about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    Ridge,
    SDnn,
    MDnn,
    CfrNet,
    Rmnet,
    RmnetNoEr,
    RmnetNoMse,
    RmnetNoIpm,
}

impl Method {
    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "ridge" => Some(Method::Ridge),
            "sdnn" => Some(Method::SDnn),
            "mdnn" => Some(Method::MDnn),
            "cfrnet" => Some(Method::CfrNet),
            "rmnet" => Some(Method::Rmnet),
            "rmnet_no_er" => Some(Method::RmnetNoEr),
            "rmnet_no_mse" => Some(Method::RmnetNoMse),
            "rmnet_no_ipm" => Some(Method::RmnetNoIpm),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Ridge => "ridge",
            Method::SDnn => "sdnn",
            Method::MDnn => "mdnn",
            Method::CfrNet => "cfrnet",
            Method::Rmnet => "rmnet",
            Method::RmnetNoEr => "rmnet_no_er",
            Method::RmnetNoMse => "rmnet_no_mse",
            Method::RmnetNoIpm => "rmnet_no_ipm",
        }
    }
}

/// Overrides for the synthetic generator; None keeps the default.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct SyntheticOverrides {
    pub d: Option<usize>,
    pub m: Option<usize>,
    pub n_train: Option<usize>,
    pub n_val: Option<usize>,
    pub n_test: Option<usize>,
    pub noise_std: Option<f64>,
    pub bias_strength: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub benchmark: String,
    pub methods: Vec<Method>,
    pub replications: usize,
    pub base_seed: u64,
    pub ks: Vec<usize>,
    pub out_dir: PathBuf,
    pub sgemm_path: Option<PathBuf>,
    pub train: TrainConfig,
    pub synth: SyntheticOverrides,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            benchmark: "linear-a".into(),
            methods: vec![Method::Rmnet],
            replications: 10,
            base_seed: 0,
            ks: vec![1],
            out_dir: PathBuf::from("out"),
            sgemm_path: None,
            train: TrainConfig::default(),
            synth: SyntheticOverrides::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn benchmark(&self) -> Result<Benchmark, BenchError> {
        Benchmark::parse(&self.benchmark)
            .ok_or_else(|| BenchError::Config(format!("unknown benchmark {:?}", self.benchmark)))
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bench = self.benchmark()?;
        if self.replications == 0 {
            return Err(BenchError::Config("replications must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(BenchError::Config("method list is empty".into()));
        }
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(BenchError::Config("k list must be non-empty, all ≥ 1".into()));
        }
        if let Benchmark::SemiSynthetic { .. } = bench {
            match &self.sgemm_path {
                Some(p) if p.exists() => {}
                Some(p) => {
                    return Err(BenchError::Config(format!(
                        "sgemm_path {} does not exist",
                        p.display()
                    )))
                }
                None => {
                    return Err(BenchError::Config(
                        "semi-synthetic benchmark needs sgemm_path".into(),
                    ))
                }
            }
        }
        self.train.validate()?;
        Ok(())
    }

    /// Apply one flat `key=value` setting; unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), BenchError> {
        let bad = |what: &str| BenchError::Config(format!("bad value {value:?} for {what}"));
        match key {
            "benchmark" => self.benchmark = value.to_string(),
            "methods" => {
                self.methods = value
                    .split(',')
                    .map(|s| {
                        Method::parse(s.trim())
                            .ok_or_else(|| BenchError::Config(format!("unknown method {s:?}")))
                    })
                    .collect::<Result<_, _>>()?;
            }
            "reps" => self.replications = value.parse().map_err(|_| bad("reps"))?,
            "seed" => self.base_seed = value.parse().map_err(|_| bad("seed"))?,
            "k" => {
                self.ks = value
                    .split(',')
                    .map(|s| s.trim().parse().map_err(|_| bad("k")))
                    .collect::<Result<_, _>>()?;
            }
            "out" => self.out_dir = PathBuf::from(value),
            "sgemm_path" => self.sgemm_path = Some(PathBuf::from(value)),
            "alpha_grid" => {
                self.train.alpha_grid = value
                    .split(',')
                    .map(|s| s.trim().parse().map_err(|_| bad("alpha_grid")))
                    .collect::<Result<_, _>>()?;
            }
            "beta" => self.train.beta = value.parse().map_err(|_| bad("beta"))?,
            "lr" => self.train.lr = value.parse().map_err(|_| bad("lr"))?,
            "batch" => self.train.batch_size = value.parse().map_err(|_| bad("batch"))?,
            "ipm_batch" => self.train.ipm_batch_size = value.parse().map_err(|_| bad("ipm_batch"))?,
            "l2" => self.train.l2 = value.parse().map_err(|_| bad("l2"))?,
            "max_epochs" => self.train.max_epochs = value.parse().map_err(|_| bad("max_epochs"))?,
            "patience" => self.train.patience = value.parse().map_err(|_| bad("patience"))?,
            "min_epochs" => self.train.min_epochs = value.parse().map_err(|_| bad("min_epochs"))?,
            "restarts" => self.train.restarts = value.parse().map_err(|_| bad("restarts"))?,
            "d" => self.synth.d = Some(value.parse().map_err(|_| bad("d"))?),
            "m" => self.synth.m = Some(value.parse().map_err(|_| bad("m"))?),
            "n_train" => self.synth.n_train = Some(value.parse().map_err(|_| bad("n_train"))?),
            "n_val" => self.synth.n_val = Some(value.parse().map_err(|_| bad("n_val"))?),
            "n_test" => self.synth.n_test = Some(value.parse().map_err(|_| bad("n_test"))?),
            "noise_std" => self.synth.noise_std = Some(value.parse().map_err(|_| bad("noise_std"))?),
            "bias_strength" => {
                self.synth.bias_strength = Some(value.parse().map_err(|_| bad("bias_strength"))?)
            }
            other => return Err(BenchError::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Parse a flat key=value config file (`#` starts a comment line).
    pub fn from_text(text: &str) -> Result<ExperimentConfig, BenchError> {
        let mut cfg = ExperimentConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                BenchError::Config(format!("line {}: expected key=value", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn hash(&self) -> String {
        config_hash(&serde_json::to_string(self).expect("config serializes"))
    }
}

/// One replication's dataset, synthetic or semi-synthetic.
pub struct PreparedData {
    pub train: ObservationalDataset,
    pub val: ObservationalDataset,
    pub test: ObservationalDataset,
    pub val_oracle: OracleTable,
    pub test_oracle: OracleTable,
}

pub fn prepare_data(cfg: &ExperimentConfig, seed: u64) -> Result<PreparedData, BenchError> {
    match cfg.benchmark()? {
        Benchmark::SemiSynthetic { m } => {
            let path = cfg
                .sgemm_path
                .as_ref()
                .ok_or_else(|| BenchError::Config("semi-synthetic needs sgemm_path".into()))?;
            let table = sgemm::load_sgemm(path)?;
            let data = sgemm::build_semi_synthetic(&table, m, seed)?;
            Ok(PreparedData {
                train: data.train,
                val: data.val,
                test: data.test,
                val_oracle: data.val_oracle,
                test_oracle: data.test_oracle,
            })
        }
        bench => {
            let mut spec = bench.synthetic_spec(seed).expect("synthetic benchmark");
            let o = &cfg.synth;
            if let Some(v) = o.d {
                spec.d = v;
            }
            if let Some(v) = o.m {
                spec.m = v;
            }
            if let Some(v) = o.n_train {
                spec.n_train = v;
            }
            if let Some(v) = o.n_val {
                spec.n_val = v;
            }
            if let Some(v) = o.n_test {
                spec.n_test = v;
            }
            if let Some(v) = o.noise_std {
                spec.noise_std = v;
            }
            if let Some(v) = o.bias_strength {
                spec.bias_strength = v;
            }
            let data = gen_synthetic(&spec)?;
            Ok(PreparedData {
                train: data.train,
                val: data.val,
                test: data.test,
                val_oracle: data.val_oracle,
                test_oracle: data.test_oracle,
            })
        }
    }
}

/// Train one method on a prepared replication.
pub fn train_method(
    method: Method,
    data: &PreparedData,
    train_cfg: &TrainConfig,
) -> Result<(Box<dyn Scorer>, Option<TrainReport>, Checkpoint), BenchError> {
    let (train, val, oracle) = (&data.train, &data.val, &data.val_oracle);
    match method {
        Method::Ridge => {
            let model = ridge_fit(train, 1e-3);
            Ok((
                Box::new(model.clone()),
                None,
                Checkpoint::Ridge(model),
            ))
        }
        Method::SDnn => {
            let mut cfg = train_cfg.clone();
            cfg.beta = 0.0;
            let (model, report) = train_rmnet(train, val, oracle, None, 0.0, &cfg)?;
            Ok((
                Box::new(model.clone()),
                Some(report),
                Checkpoint::Rmnet(model),
            ))
        }
        Method::MDnn => {
            let (model, report) = train_multihead(train, val, oracle, 0.0, train_cfg)?;
            Ok((
                Box::new(model.clone()),
                Some(report),
                Checkpoint::MultiHead(model),
            ))
        }
        Method::CfrNet => {
            let (model, report) = select_alpha_multihead(train, val, oracle, train_cfg)?;
            Ok((
                Box::new(model.clone()),
                Some(report),
                Checkpoint::MultiHead(model),
            ))
        }
        Method::Rmnet | Method::RmnetNoEr | Method::RmnetNoMse | Method::RmnetNoIpm => {
            let mut cfg = train_cfg.clone();
            match method {
                Method::RmnetNoEr => cfg.beta = 0.0,
                Method::RmnetNoMse => cfg.beta = 1.0,
                _ => {}
            }
            let (model, report) = if method == Method::RmnetNoIpm {
                let g = fit_g(train, val, cfg.seed).map_err(TrainError::from)?;
                train_rmnet(train, val, oracle, Some(&g), 0.0, &cfg)?
            } else {
                select_alpha(train, val, oracle, &cfg)?
            };
            Ok((
                Box::new(model.clone()),
                Some(report),
                Checkpoint::Rmnet(model),
            ))
        }
    }
}

pub fn evaluate_method(
    scorer: &dyn Scorer,
    data: &PreparedData,
    method: Method,
    dataset: &str,
    seed: u64,
    ks: &[usize],
) -> Result<Vec<MetricsRow>, BenchError> {
    let actions = all_actions(data.test.a_obs.ncols());
    let scores = scorer.score_all(&data.test.x, &actions);
    let mut rows = Vec::new();
    for &k in ks {
        let report = MetricsReport::compute(&scores, &data.test_oracle, k)?;
        rows.push(MetricsRow {
            method: method.name().to_string(),
            dataset: dataset.to_string(),
            seed,
            k,
            nmcg: report.nmcg,
            regret: report.regret,
            mse_u: report.mse_u,
            er_u: report.er_u,
            bound_rhs: report.bound_rhs,
            bound_ok: report.bound_satisfied,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: String,
    pub k: usize,
    /// Replications with a defined nmCG that went into the mean.
    pub n_runs: usize,
    pub nmcg_mean: f64,
    pub nmcg_se: f64,
    pub regret_mean: f64,
    pub mse_u_mean: f64,
    pub er_u_mean: f64,
    pub all_bounds_ok: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub dataset: String,
    pub rows: Vec<MetricsRow>,
    pub aggregates: Vec<AggregateRow>,
    pub failures: Vec<String>,
    pub all_bounds_ok: bool,
}

/// Mean and standard error (sample std over sqrt(n)) of defined values.
fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt() / (n as f64).sqrt())
}

pub fn aggregate(rows: &[MetricsRow]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(String, usize), Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.method.clone(), r.k)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((method, k), rs)| {
            let nmcgs: Vec<f64> = rs.iter().filter_map(|r| r.nmcg).collect();
            let (nmcg_mean, nmcg_se) = mean_se(&nmcgs);
            let mean_of = |f: fn(&MetricsRow) -> f64| {
                rs.iter().map(|r| f(r)).sum::<f64>() / rs.len() as f64
            };
            AggregateRow {
                method,
                k,
                n_runs: nmcgs.len(),
                nmcg_mean,
                nmcg_se,
                regret_mean: mean_of(|r| r.regret),
                mse_u_mean: mean_of(|r| r.mse_u),
                er_u_mean: mean_of(|r| r.er_u),
                all_bounds_ok: rs.iter().all(|r| r.bound_ok),
            }
        })
        .collect()
}

pub fn write_aggregate_csv(path: &Path, aggs: &[AggregateRow]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "method",
        "k",
        "n_runs",
        "nmcg_mean",
        "nmcg_se",
        "regret_mean",
        "mse_u_mean",
        "er_u_mean",
        "all_bounds_ok",
    ])?;
    for a in aggs {
        w.write_record([
            a.method.clone(),
            a.k.to_string(),
            a.n_runs.to_string(),
            a.nmcg_mean.to_string(),
            a.nmcg_se.to_string(),
            a.regret_mean.to_string(),
            a.mse_u_mean.to_string(),
            a.er_u_mean.to_string(),
            a.all_bounds_ok.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn aggregate_markdown(dataset: &str, aggs: &[AggregateRow]) -> String {
    let mut out = String::new();
    writeln!(out, "# Results: {dataset}\n").unwrap();
    writeln!(
        out,
        "| method | k | nmCG@k (mean ± SE) | regret | MSE^u | ER^u | bounds |"
    )
    .unwrap();
    writeln!(out, "|---|---|---|---|---|---|---|").unwrap();
    for a in aggs {
        writeln!(
            out,
            "| {} | {} | {:.3} ± {:.3} | {:.3} | {:.3} | {:.3} | {} |",
            a.method,
            a.k,
            a.nmcg_mean,
            a.nmcg_se,
            a.regret_mean,
            a.mse_u_mean,
            a.er_u_mean,
            if a.all_bounds_ok { "ok" } else { "VIOLATED" }
        )
        .unwrap();
    }
    out
}

/// Run the whole experiment: replications × methods, per-run artifacts and
/// the aggregate tables under the configured output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary, BenchError> {
    cfg.validate()?;
    let dataset = cfg.benchmark()?.name();
    fs::create_dir_all(&cfg.out_dir)?;
    fs::write(
        cfg.out_dir.join("config.txt"),
        serde_json::to_string_pretty(cfg).expect("config serializes"),
    )?;

    let mut all_rows = Vec::new();
    let mut failures = Vec::new();
    for r in 0..cfg.replications {
        let seed = cfg.base_seed + r as u64;
        let run_dir = cfg.out_dir.join(format!("run_{seed}"));
        fs::create_dir_all(&run_dir)?;
        let data = match prepare_data(cfg, seed) {
            Ok(d) => d,
            Err(e) => {
                failures.push(format!("seed {seed}: data generation failed: {e}"));
                continue;
            }
        };
        crate::io::write_metadata(
            &run_dir.join("metadata.json"),
            &DatasetMetadata {
                benchmark: dataset.clone(),
                seed,
                d: data.train.x.ncols(),
                m: data.train.a_obs.ncols(),
                y_mean: data.train.y_mean,
                y_std: data.train.y_std,
                config_hash: cfg.hash(),
            },
        )?;
        let mut run_rows = Vec::new();
        for &method in &cfg.methods {
            let mut train_cfg = cfg.train.clone();
            train_cfg.seed = seed;
            match train_method(method, &data, &train_cfg) {
                Ok((scorer, report, checkpoint)) => {
                    checkpoint.save(&run_dir.join(format!("{}.ckpt", method.name())))?;
                    if let Some(report) = &report {
                        write_epoch_log(
                            &run_dir.join(format!("{}_epochs.csv", method.name())),
                            &report.log,
                        )?;
                    }
                    match evaluate_method(scorer.as_ref(), &data, method, &dataset, seed, &cfg.ks) {
                        Ok(rows) => run_rows.extend(rows),
                        Err(e) => {
                            failures.push(format!("seed {seed}, {}: eval failed: {e}", method.name()))
                        }
                    }
                }
                Err(e) => {
                    failures.push(format!("seed {seed}, {}: training failed: {e}", method.name()))
                }
            }
        }
        write_metrics_csv(&run_dir.join("metrics.csv"), &run_rows)?;
        all_rows.extend(run_rows);
    }

    let aggregates = aggregate(&all_rows);
    write_aggregate_csv(&cfg.out_dir.join("aggregate.csv"), &aggregates)?;
    fs::write(
        cfg.out_dir.join("aggregate.md"),
        aggregate_markdown(&dataset, &aggregates),
    )?;
    let all_bounds_ok = all_rows.iter().all(|r| r.bound_ok);
    Ok(ExperimentSummary {
        dataset,
        rows: all_rows,
        aggregates,
        failures,
        all_bounds_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn method_name_round_trip() {
        for m in [
            Method::Ridge,
            Method::SDnn,
            Method::MDnn,
            Method::CfrNet,
            Method::Rmnet,
            Method::RmnetNoEr,
            Method::RmnetNoMse,
            Method::RmnetNoIpm,
        ] {
            assert_eq!(Method::parse(m.name()), Some(m));
        }
        assert_eq!(Method::parse("nope"), None);
    }

    #[test]
    fn config_text_parsing() {
        let cfg = ExperimentConfig::from_text(
            "# comment\nbenchmark = quadratic-b\nmethods = ridge, rmnet\nreps = 3\nseed = 11\nk = 1,2\nbeta = 0.25\nn_train = 64\n",
        )
        .unwrap();
        assert_eq!(cfg.benchmark, "quadratic-b");
        assert_eq!(cfg.methods, vec![Method::Ridge, Method::Rmnet]);
        assert_eq!(cfg.replications, 3);
        assert_eq!(cfg.base_seed, 11);
        assert_eq!(cfg.ks, vec![1, 2]);
        assert_eq!(cfg.train.beta, 0.25);
        assert_eq!(cfg.synth.n_train, Some(64));
    }

    #[test]
    fn config_rejects_unknown_keys_and_bad_lines() {
        assert!(ExperimentConfig::from_text("whatever = 1\n").is_err());
        assert!(ExperimentConfig::from_text("not a kv line\n").is_err());
        assert!(ExperimentConfig::from_text("methods = ridge, nope\n").is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.replications = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.methods.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.benchmark = "sgemm-3".into();
        assert!(cfg.validate().is_err(), "needs sgemm_path");
        let mut cfg = ExperimentConfig::default();
        cfg.benchmark = "no-such".into();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_hash_changes_with_settings() {
        let a = ExperimentConfig::default();
        let mut b = ExperimentConfig::default();
        b.set("seed", "99").unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), ExperimentConfig::default().hash());
    }

    #[test]
    fn aggregation_matches_independent_recompute() {
        let rows: Vec<MetricsRow> = (0..4)
            .map(|i| MetricsRow {
                method: "ridge".into(),
                dataset: "linear-a".into(),
                seed: i,
                k: 1,
                nmcg: Some(0.9 + 0.02 * i as f64),
                regret: 0.1 * i as f64,
                mse_u: 0.5,
                er_u: 0.25,
                bound_rhs: 1.0,
                bound_ok: true,
            })
            .collect();
        let aggs = aggregate(&rows);
        assert_eq!(aggs.len(), 1);
        let a = &aggs[0];
        let vals = [0.9, 0.92, 0.94, 0.96];
        let mean = vals.iter().sum::<f64>() / 4.0;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
        assert!((a.nmcg_mean - mean).abs() < 1e-12);
        assert!((a.nmcg_se - sd / 2.0).abs() < 1e-12);
        assert_eq!(a.n_runs, 4);
        assert!((a.regret_mean - 0.15).abs() < 1e-12);
        assert!(a.all_bounds_ok);
    }

    #[test]
    fn aggregation_skips_undefined_nmcg() {
        let mut rows = vec![MetricsRow {
            method: "ridge".into(),
            dataset: "d".into(),
            seed: 0,
            k: 1,
            nmcg: Some(0.8),
            regret: 0.0,
            mse_u: 0.0,
            er_u: 0.0,
            bound_rhs: 0.0,
            bound_ok: true,
        }];
        rows.push(MetricsRow {
            nmcg: None,
            seed: 1,
            ..rows[0].clone()
        });
        let aggs = aggregate(&rows);
        assert_eq!(aggs[0].n_runs, 1);
        assert!((aggs[0].nmcg_mean - 0.8).abs() < 1e-12);
    }

    fn fast_ridge_config(out: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.benchmark = "linear-a".into();
        cfg.methods = vec![Method::Ridge];
        cfg.replications = 2;
        cfg.base_seed = 3;
        cfg.out_dir = out.to_path_buf();
        cfg.synth = SyntheticOverrides {
            n_train: Some(200),
            n_val: Some(20),
            n_test: Some(30),
            m: Some(3),
            ..Default::default()
        };
        cfg
    }

    #[test]
    fn ridge_experiment_end_to_end() {
        let dir = tempdir().unwrap();
        let cfg = fast_ridge_config(&dir.path().join("out"));
        let summary = run_experiment(&cfg).unwrap();
        assert!(summary.failures.is_empty(), "{:?}", summary.failures);
        assert!(summary.all_bounds_ok);
        assert_eq!(summary.rows.len(), 2);
        assert_eq!(summary.aggregates.len(), 1);
        assert!(summary.aggregates[0].nmcg_mean > 0.8);
        for seed in [3u64, 4] {
            let run = cfg.out_dir.join(format!("run_{seed}"));
            assert!(run.join("metrics.csv").exists());
            assert!(run.join("ridge.ckpt").exists());
            assert!(run.join("metadata.json").exists());
        }
        assert!(cfg.out_dir.join("aggregate.csv").exists());
        let md = std::fs::read_to_string(cfg.out_dir.join("aggregate.md")).unwrap();
        assert!(md.contains("| ridge |"));
    }

    #[test]
    fn experiment_is_deterministic() {
        let dir = tempdir().unwrap();
        let cfg1 = fast_ridge_config(&dir.path().join("a"));
        let cfg2 = fast_ridge_config(&dir.path().join("b"));
        run_experiment(&cfg1).unwrap();
        run_experiment(&cfg2).unwrap();
        for name in ["aggregate.csv", "run_3/metrics.csv", "run_4/metrics.csv"] {
            let a = std::fs::read_to_string(cfg1.out_dir.join(name)).unwrap();
            let b = std::fs::read_to_string(cfg2.out_dir.join(name)).unwrap();
            assert_eq!(a, b, "file {name} differs");
        }
    }
}
