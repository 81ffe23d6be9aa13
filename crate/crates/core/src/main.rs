use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use rmnet::bench::{
    self, prepare_data, run_experiment, train_method, ExperimentConfig, Method, PreparedData,
};
use rmnet::datagen::{all_actions, sgemm, Benchmark};
use rmnet::eval::MetricsReport;
use rmnet::io::{
    self, read_dataset, read_metadata, read_oracle, write_dataset, write_metadata, write_oracle,
    Checkpoint, DatasetMetadata, MetricsRow,
};
use rmnet::models::Scorer;

#[derive(Parser)]
#[command(name = "rmnet", about = "Counterfactual learning benchmarks on combinatorial action spaces", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark dataset: partition CSVs, oracle tables, metadata.
    Gen(GenArgs),
    /// Train one method on a generated dataset directory.
    Train(TrainArgs),
    /// Score a checkpoint against a dataset directory's test oracle.
    Eval(EvalArgs),
    /// Run a full experiment: replications x methods with aggregation.
    Bench(BenchArgs),
    /// Build the semi-synthetic benchmark files from the SGEMM CSV.
    SgemmPrepare(SgemmArgs),
}

#[derive(Args)]
struct GenArgs {
    /// linear-a|linear-b|linear-c|quadratic-a|quadratic-b|bilinear|sgemm-{3..6}
    #[arg(long)]
    benchmark: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "data")]
    out: PathBuf,
    /// Required for sgemm-* benchmarks.
    #[arg(long)]
    sgemm_path: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory produced by `gen`.
    #[arg(long)]
    data: PathBuf,
    /// ridge|sdnn|mdnn|cfrnet|rmnet|rmnet_no_er|rmnet_no_mse|rmnet_no_ipm
    #[arg(long)]
    method: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated alpha grid for model selection.
    #[arg(long)]
    alpha_grid: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value = "model")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated top-k list.
    #[arg(long, default_value = "1")]
    k: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Flat key=value config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    benchmark: Option<String>,
    /// Comma-separated method list.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha_grid: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    /// Comma-separated top-k list.
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sgemm_path: Option<PathBuf>,
    /// Action bits override (synthetic) / selection (sgemm).
    #[arg(long)]
    m: Option<usize>,
}

#[derive(Args)]
struct SgemmArgs {
    #[arg(long)]
    sgemm_path: PathBuf,
    /// Number of action bits, 3..=6.
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "data")]
    out: PathBuf,
}

fn write_prepared(out: &Path, data: &PreparedData, benchmark: &str, seed: u64, hash: String) -> Result<()> {
    std::fs::create_dir_all(out)?;
    write_dataset(&out.join("train.csv"), &data.train)?;
    write_dataset(&out.join("val.csv"), &data.val)?;
    write_dataset(&out.join("test.csv"), &data.test)?;
    write_oracle(&out.join("val_oracle.csv"), &data.val_oracle)?;
    write_oracle(&out.join("test_oracle.csv"), &data.test_oracle)?;
    write_metadata(
        &out.join("metadata.json"),
        &DatasetMetadata {
            benchmark: benchmark.to_string(),
            seed,
            d: data.train.x.ncols(),
            m: data.train.a_obs.ncols(),
            y_mean: data.train.y_mean,
            y_std: data.train.y_std,
            config_hash: hash,
        },
    )?;
    Ok(())
}

fn read_prepared(dir: &Path) -> Result<(PreparedData, DatasetMetadata)> {
    let meta = read_metadata(&dir.join("metadata.json"))
        .with_context(|| format!("reading {}/metadata.json", dir.display()))?;
    let (d, m) = (meta.d, meta.m);
    let data = PreparedData {
        train: read_dataset(&dir.join("train.csv"), d, m)?,
        val: read_dataset(&dir.join("val.csv"), d, m)?,
        test: read_dataset(&dir.join("test.csv"), d, m)?,
        val_oracle: read_oracle(&dir.join("val_oracle.csv"))?,
        test_oracle: read_oracle(&dir.join("test_oracle.csv"))?,
    };
    Ok((data, meta))
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse()
                .map_err(|_| anyhow::anyhow!("bad {what} entry {tok:?}"))
        })
        .collect()
}

fn checkpoint_scorer(ckpt: Checkpoint) -> Result<(Box<dyn Scorer>, &'static str)> {
    Ok(match ckpt {
        Checkpoint::Rmnet(m) => (Box::new(m), "rmnet"),
        Checkpoint::MultiHead(m) => (Box::new(m), "multihead"),
        Checkpoint::Ridge(m) => (Box::new(m), "ridge"),
        Checkpoint::G(_) => bail!("a g checkpoint has no action input and cannot be scored"),
    })
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let bench = Benchmark::parse(&args.benchmark)
        .with_context(|| format!("unknown benchmark {:?}", args.benchmark))?;
    let mut cfg = ExperimentConfig::default();
    cfg.benchmark = bench.name();
    cfg.sgemm_path = args.sgemm_path;
    let data = prepare_data(&cfg, args.seed)?;
    write_prepared(&args.out, &data, &bench.name(), args.seed, cfg.hash())?;
    println!(
        "wrote {} (train {} rows, val {}, test {})",
        args.out.display(),
        data.train.len(),
        data.val.len(),
        data.test.len()
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let method = Method::parse(&args.method)
        .with_context(|| format!("unknown method {:?}", args.method))?;
    let (data, meta) = read_prepared(&args.data)?;
    let mut train_cfg = rmnet::TrainConfig::default();
    train_cfg.seed = args.seed;
    if let Some(grid) = &args.alpha_grid {
        train_cfg.alpha_grid = parse_list(grid, "alpha-grid")?;
    }
    if let Some(beta) = args.beta {
        train_cfg.beta = beta;
    }
    let (_, report, checkpoint) = train_method(method, &data, &train_cfg)?;
    std::fs::create_dir_all(&args.out)?;
    let ckpt_path = args.out.join(format!("{}.ckpt", method.name()));
    checkpoint.save(&ckpt_path)?;
    if let Some(report) = &report {
        io::write_epoch_log(&args.out.join(format!("{}_epochs.csv", method.name())), &report.log)?;
        println!(
            "trained {} on {} ({} epochs, best val nmCG@1 {:.4}, alpha {}) -> {}",
            method.name(),
            meta.benchmark,
            report.epochs_run,
            report.best_val_nmcg,
            report.selected_alpha,
            ckpt_path.display()
        );
    } else {
        println!("fitted {} on {} -> {}", method.name(), meta.benchmark, ckpt_path.display());
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let ks: Vec<usize> = parse_list(&args.k, "k")?;
    if ks.is_empty() || ks.contains(&0) {
        bail!("k list must be non-empty, all >= 1");
    }
    let (data, meta) = read_prepared(&args.data)?;
    let (scorer, kind) = checkpoint_scorer(Checkpoint::load(&args.checkpoint)?)?;
    let actions = all_actions(meta.m);
    let scores = scorer.score_all(&data.test.x, &actions);
    let mut rows = Vec::new();
    for &k in &ks {
        let report = MetricsReport::compute(&scores, &data.test_oracle, k)?;
        println!(
            "k={k}: nmcg={} regret={:.6} mse_u={:.6} er_u={:.6} bound_ok={}",
            report
                .nmcg
                .map_or_else(|| "NA".to_string(), |v| format!("{v:.6}")),
            report.regret,
            report.mse_u,
            report.er_u,
            report.bound_satisfied
        );
        rows.push(MetricsRow {
            method: kind.to_string(),
            dataset: meta.benchmark.clone(),
            seed: meta.seed,
            k,
            nmcg: report.nmcg,
            regret: report.regret,
            mse_u: report.mse_u,
            er_u: report.er_u,
            bound_rhs: report.bound_rhs,
            bound_ok: report.bound_satisfied,
        });
    }
    if let Some(out) = &args.out {
        if let Some(parent) = out.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        io::write_metrics_csv(out, &rows)?;
    }
    if rows.iter().any(|r| !r.bound_ok) {
        bail!("regret bound violated");
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_text(
            &std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?,
        )?,
        None => ExperimentConfig::default(),
    };
    let set = |cfg: &mut ExperimentConfig, key: &str, val: String| -> Result<()> {
        cfg.set(key, &val).map_err(Into::into)
    };
    if let Some(v) = &args.benchmark {
        set(&mut cfg, "benchmark", v.clone())?;
    }
    if let Some(v) = &args.methods {
        set(&mut cfg, "methods", v.clone())?;
    }
    if let Some(v) = args.reps {
        set(&mut cfg, "reps", v.to_string())?;
    }
    if let Some(v) = args.seed {
        set(&mut cfg, "seed", v.to_string())?;
    }
    if let Some(v) = &args.alpha_grid {
        set(&mut cfg, "alpha_grid", v.clone())?;
    }
    if let Some(v) = args.beta {
        set(&mut cfg, "beta", v.to_string())?;
    }
    if let Some(v) = &args.k {
        set(&mut cfg, "k", v.clone())?;
    }
    if let Some(v) = &args.out {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = &args.sgemm_path {
        cfg.sgemm_path = Some(v.clone());
    }
    if let Some(v) = args.m {
        set(&mut cfg, "m", v.to_string())?;
    }
    let summary = run_experiment(&cfg)?;
    print!("{}", bench::aggregate_markdown(&summary.dataset, &summary.aggregates));
    for f in &summary.failures {
        eprintln!("failure: {f}");
    }
    if !summary.failures.is_empty() {
        bail!("{} run(s) failed", summary.failures.len());
    }
    if !summary.all_bounds_ok {
        bail!("regret bound violated in at least one run");
    }
    Ok(())
}

fn cmd_sgemm_prepare(args: SgemmArgs) -> Result<()> {
    let table = sgemm::load_sgemm(&args.sgemm_path)
        .with_context(|| format!("loading {}", args.sgemm_path.display()))?;
    let data = sgemm::build_semi_synthetic(&table, args.m, args.seed)?;
    let prepared = PreparedData {
        train: data.train,
        val: data.val,
        test: data.test,
        val_oracle: data.val_oracle,
        test_oracle: data.test_oracle,
    };
    let name = format!("sgemm-{}", args.m);
    write_prepared(&args.out, &prepared, &name, args.seed, io::config_hash(&name))?;
    println!(
        "wrote {} (train {} rows, val {}, test {})",
        args.out.display(),
        prepared.train.len(),
        prepared.val.len(),
        prepared.test.len()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Bench(args) => cmd_bench(args),
        Command::SgemmPrepare(args) => cmd_sgemm_prepare(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
