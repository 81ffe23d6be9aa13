//! File plumbing: dataset and oracle CSVs, metadata sidecars, the text
//! checkpoint format (bit-exact f64 round trip via hex bit patterns), the
//! per-epoch training log, and the per-run metrics CSV.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::{ObservationalDataset, OracleTable};
use crate::models::{GModel, MultiHeadModel, RMNetModel, RidgeModel};
use crate::nn::{Activation, Layer, NetworkParams};
use crate::train::EpochRecord;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("bad file format: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_err(msg: impl Into<String>) -> IoError {
    IoError::Format(msg.into())
}

/// Dataset CSV: header `x0..x{d-1},a0..a{m-1},y`, one observational row
/// per line.
pub fn write_dataset(path: &Path, ds: &ObservationalDataset) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path)?;
    let d = ds.x.ncols();
    let m = ds.a_obs.ncols();
    let mut header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    header.extend((0..m).map(|j| format!("a{j}")));
    header.push("y".into());
    w.write_record(&header)?;
    for i in 0..ds.len() {
        let mut rec: Vec<String> = Vec::with_capacity(d + m + 1);
        for j in 0..d {
            rec.push(ds.x[[i, j]].to_string());
        }
        for j in 0..m {
            rec.push((ds.a_obs[[i, j]] as i64).to_string());
        }
        rec.push(ds.y[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path, d: usize, m: usize) -> Result<ObservationalDataset, IoError> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    if headers.len() != d + m + 1 {
        return Err(format_err(format!(
            "expected {} columns (d={d}, m={m}), found {}",
            d + m + 1,
            headers.len()
        )));
    }
    let mut xs = Vec::new();
    let mut aas = Vec::new();
    let mut ys = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |s: &str| -> Result<f64, IoError> {
            s.parse()
                .map_err(|_| format_err(format!("row {row}: bad number {s:?}")))
        };
        for j in 0..d {
            xs.push(parse(&rec[j])?);
        }
        for j in 0..m {
            aas.push(parse(&rec[d + j])?);
        }
        ys.push(parse(&rec[d + m])?);
    }
    let n = ys.len();
    Ok(ObservationalDataset {
        x: Array2::from_shape_vec((n, d), xs).map_err(|e| format_err(e.to_string()))?,
        a_obs: Array2::from_shape_vec((n, m), aas).map_err(|e| format_err(e.to_string()))?,
        y: Array1::from_vec(ys),
        y_mean: 0.0,
        y_std: 1.0,
    })
}

/// Oracle CSV: header `x_row,action_index,y`, one line per (row, action).
pub fn write_oracle(path: &Path, oracle: &OracleTable) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x_row", "action_index", "y"])?;
    for i in 0..oracle.y_all.nrows() {
        for a in 0..oracle.y_all.ncols() {
            w.write_record([i.to_string(), a.to_string(), oracle.y_all[[i, a]].to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_oracle(path: &Path) -> Result<OracleTable, IoError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(format_err("oracle rows must have 3 columns"));
        }
        let i: usize = rec[0].parse().map_err(|_| format_err("bad x_row"))?;
        let a: usize = rec[1].parse().map_err(|_| format_err("bad action_index"))?;
        let y: f64 = rec[2].parse().map_err(|_| format_err("bad outcome"))?;
        entries.push((i, a, y));
    }
    let n = entries.iter().map(|e| e.0 + 1).max().unwrap_or(0);
    let na = entries.iter().map(|e| e.1 + 1).max().unwrap_or(0);
    if entries.len() != n * na {
        return Err(format_err(format!(
            "oracle table is not dense: {} entries for {n}×{na}",
            entries.len()
        )));
    }
    let mut y_all = Array2::from_elem((n, na), f64::NAN);
    for (i, a, y) in entries {
        y_all[[i, a]] = y;
    }
    if y_all.iter().any(|v| v.is_nan()) {
        return Err(format_err("oracle table has missing (x_row, action) cells"));
    }
    Ok(OracleTable { y_all })
}

/// Sidecar metadata recording how a dataset was produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub benchmark: String,
    pub seed: u64,
    pub d: usize,
    pub m: usize,
    pub y_mean: f64,
    pub y_std: f64,
    pub config_hash: String,
}

pub fn write_metadata(path: &Path, meta: &DatasetMetadata) -> Result<(), IoError> {
    Ok(fs::write(path, serde_json::to_string_pretty(meta)?)?)
}

pub fn read_metadata(path: &Path) -> Result<DatasetMetadata, IoError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Stable FNV-1a hash of a config's serialized form, for the seed ledger.
pub fn config_hash(serialized: &str) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in serialized.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

const CHECKPOINT_MAGIC: &str = "checkpoint v1";

fn write_network(out: &mut String, name: &str, params: &NetworkParams) {
    writeln!(out, "network {name} {}", params.layers.len()).unwrap();
    for layer in &params.layers {
        writeln!(
            out,
            "layer {} {} {}",
            layer.w.nrows(),
            layer.w.ncols(),
            layer.act.name()
        )
        .unwrap();
        let mut line = String::with_capacity(layer.w.len() * 17);
        for v in layer.w.iter() {
            write!(line, "{:016x} ", v.to_bits()).unwrap();
        }
        writeln!(out, "{}", line.trim_end()).unwrap();
        line.clear();
        for v in layer.b.iter() {
            write!(line, "{:016x} ", v.to_bits()).unwrap();
        }
        writeln!(out, "{}", line.trim_end()).unwrap();
    }
}

fn parse_hex_line(line: &str, expected: usize) -> Result<Vec<f64>, IoError> {
    let vals: Result<Vec<f64>, IoError> = line
        .split_whitespace()
        .map(|tok| {
            u64::from_str_radix(tok, 16)
                .map(f64::from_bits)
                .map_err(|_| format_err(format!("bad hex value {tok:?}")))
        })
        .collect();
    let vals = vals?;
    if vals.len() != expected {
        return Err(format_err(format!(
            "expected {expected} values, found {}",
            vals.len()
        )));
    }
    Ok(vals)
}

fn read_network(lines: &mut impl Iterator<Item = String>, expected_name: &str) -> Result<NetworkParams, IoError> {
    let head = lines
        .next()
        .ok_or_else(|| format_err("missing network header"))?;
    let parts: Vec<&str> = head.split_whitespace().collect();
    if parts.len() != 3 || parts[0] != "network" || parts[1] != expected_name {
        return Err(format_err(format!("bad network header {head:?}")));
    }
    let n_layers: usize = parts[2]
        .parse()
        .map_err(|_| format_err("bad layer count"))?;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let head = lines.next().ok_or_else(|| format_err("missing layer header"))?;
        let parts: Vec<&str> = head.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "layer" {
            return Err(format_err(format!("bad layer header {head:?}")));
        }
        let rows: usize = parts[1].parse().map_err(|_| format_err("bad layer rows"))?;
        let cols: usize = parts[2].parse().map_err(|_| format_err("bad layer cols"))?;
        let act = Activation::parse(parts[3])
            .ok_or_else(|| format_err(format!("unknown activation {:?}", parts[3])))?;
        let w_line = lines.next().ok_or_else(|| format_err("missing weights"))?;
        let b_line = lines.next().ok_or_else(|| format_err("missing biases"))?;
        let w = Array2::from_shape_vec((rows, cols), parse_hex_line(&w_line, rows * cols)?)
            .map_err(|e| format_err(e.to_string()))?;
        let b = Array1::from_vec(parse_hex_line(&b_line, rows)?);
        layers.push(Layer { w, b, act });
    }
    Ok(NetworkParams { layers })
}

/// A trained model of any supported kind, serialized to one text file.
#[derive(Debug, Clone)]
pub enum Checkpoint {
    Rmnet(RMNetModel),
    MultiHead(MultiHeadModel),
    Ridge(RidgeModel),
    G(GModel),
}

impl Checkpoint {
    pub fn kind(&self) -> &'static str {
        match self {
            Checkpoint::Rmnet(_) => "rmnet",
            Checkpoint::MultiHead(_) => "multihead",
            Checkpoint::Ridge(_) => "ridge",
            Checkpoint::G(_) => "g",
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        let mut out = String::new();
        writeln!(out, "{CHECKPOINT_MAGIC}").unwrap();
        writeln!(out, "kind {}", self.kind()).unwrap();
        match self {
            Checkpoint::Rmnet(m) => {
                write_network(&mut out, "extractor", &m.extractor);
                write_network(&mut out, "hypothesis", &m.hypothesis);
            }
            Checkpoint::MultiHead(m) => {
                writeln!(out, "heads {}", m.heads.len()).unwrap();
                write_network(&mut out, "extractor", &m.extractor);
                for head in &m.heads {
                    write_network(&mut out, "head", head);
                }
            }
            Checkpoint::Ridge(m) => {
                writeln!(out, "weights {}", m.weights.len()).unwrap();
                let mut line = String::new();
                for v in m.weights.iter() {
                    write!(line, "{:016x} ", v.to_bits()).unwrap();
                }
                writeln!(out, "{}", line.trim_end()).unwrap();
            }
            Checkpoint::G(m) => {
                write_network(&mut out, "net", &m.net);
            }
        }
        let mut f = fs::File::create(path)?;
        f.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint, IoError> {
        let file = fs::File::open(path)?;
        let mut lines = BufReader::new(file)
            .lines()
            .collect::<Result<Vec<_>, _>>()?
            .into_iter();
        let magic = lines.next().ok_or_else(|| format_err("empty checkpoint"))?;
        if magic != CHECKPOINT_MAGIC {
            return Err(format_err(format!("bad checkpoint magic {magic:?}")));
        }
        let kind_line = lines.next().ok_or_else(|| format_err("missing kind"))?;
        let kind = kind_line
            .strip_prefix("kind ")
            .ok_or_else(|| format_err(format!("bad kind line {kind_line:?}")))?;
        match kind {
            "rmnet" => {
                let extractor = read_network(&mut lines, "extractor")?;
                let hypothesis = read_network(&mut lines, "hypothesis")?;
                Ok(Checkpoint::Rmnet(RMNetModel {
                    extractor,
                    hypothesis,
                }))
            }
            "multihead" => {
                let head_line = lines.next().ok_or_else(|| format_err("missing heads count"))?;
                let n_heads: usize = head_line
                    .strip_prefix("heads ")
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| format_err(format!("bad heads line {head_line:?}")))?;
                let extractor = read_network(&mut lines, "extractor")?;
                let heads = (0..n_heads)
                    .map(|_| read_network(&mut lines, "head"))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Checkpoint::MultiHead(MultiHeadModel { extractor, heads }))
            }
            "ridge" => {
                let w_line = lines.next().ok_or_else(|| format_err("missing weights count"))?;
                let n: usize = w_line
                    .strip_prefix("weights ")
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| format_err(format!("bad weights line {w_line:?}")))?;
                let vals = lines.next().ok_or_else(|| format_err("missing weights"))?;
                Ok(Checkpoint::Ridge(RidgeModel {
                    weights: Array1::from_vec(parse_hex_line(&vals, n)?),
                }))
            }
            "g" => Ok(Checkpoint::G(GModel {
                net: read_network(&mut lines, "net")?,
            })),
            other => Err(format_err(format!("unknown checkpoint kind {other:?}"))),
        }
    }
}

/// Per-epoch training log: `epoch,loss,xe,mse,ipm,val_nmcg`.
pub fn write_epoch_log(path: &Path, log: &[EpochRecord]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "loss", "xe", "mse", "ipm", "val_nmcg"])?;
    for rec in log {
        w.write_record([
            rec.epoch.to_string(),
            rec.loss.to_string(),
            rec.xe.to_string(),
            rec.mse.to_string(),
            rec.ipm.to_string(),
            rec.val_nmcg.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One line of the per-run metrics CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: String,
    pub dataset: String,
    pub seed: u64,
    pub k: usize,
    pub nmcg: Option<f64>,
    pub regret: f64,
    pub mse_u: f64,
    pub er_u: f64,
    pub bound_rhs: f64,
    pub bound_ok: bool,
}

/// Metrics CSV: `method,dataset,seed,k,nmcg,regret,mse_u,er_u,bound_rhs,bound_ok`.
/// An undefined nmCG (zero oracle denominator) is written as `NA`.
pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "method", "dataset", "seed", "k", "nmcg", "regret", "mse_u", "er_u", "bound_rhs",
        "bound_ok",
    ])?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.dataset.clone(),
            r.seed.to_string(),
            r.k.to_string(),
            r.nmcg.map_or_else(|| "NA".into(), |v| v.to_string()),
            r.regret.to_string(),
            r.mse_u.to_string(),
            r.er_u.to_string(),
            r.bound_rhs.to_string(),
            r.bound_ok.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>, IoError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 10 {
            return Err(format_err("metrics rows must have 10 columns"));
        }
        let parse = |s: &str| -> Result<f64, IoError> {
            s.parse().map_err(|_| format_err(format!("bad number {s:?}")))
        };
        rows.push(MetricsRow {
            method: rec[0].to_string(),
            dataset: rec[1].to_string(),
            seed: rec[2].parse().map_err(|_| format_err("bad seed"))?,
            k: rec[3].parse().map_err(|_| format_err("bad k"))?,
            nmcg: if &rec[4] == "NA" {
                None
            } else {
                Some(parse(&rec[4])?)
            },
            regret: parse(&rec[5])?,
            mse_u: parse(&rec[6])?,
            er_u: parse(&rec[7])?,
            bound_rhs: parse(&rec[8])?,
            bound_ok: rec[9]
                .parse()
                .map_err(|_| format_err("bad bound_ok flag"))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_synthetic, Benchmark};
    use tempfile::tempdir;

    fn sample_data() -> crate::datagen::SyntheticData {
        let mut spec = Benchmark::parse("linear-a").unwrap().synthetic_spec(5).unwrap();
        spec.n_train = 50;
        spec.n_val = 10;
        spec.n_test = 10;
        spec.m = 3;
        gen_synthetic(&spec).unwrap()
    }

    #[test]
    fn dataset_round_trip() {
        let data = sample_data();
        let dir = tempdir().unwrap();
        let path = dir.path().join("train.csv");
        write_dataset(&path, &data.train).unwrap();
        let header = std::fs::read_to_string(&path).unwrap();
        assert!(header.starts_with("x0,x1,x2,x3,x4,a0,a1,a2,y\n"));
        let back = read_dataset(&path, 5, 3).unwrap();
        assert_eq!(back.len(), data.train.len());
        for i in 0..back.len() {
            assert_eq!(back.y[i], data.train.y[i]);
            for j in 0..5 {
                assert_eq!(back.x[[i, j]], data.train.x[[i, j]]);
            }
            for j in 0..3 {
                assert_eq!(back.a_obs[[i, j]], data.train.a_obs[[i, j]]);
            }
        }
    }

    #[test]
    fn dataset_read_rejects_wrong_width() {
        let data = sample_data();
        let dir = tempdir().unwrap();
        let path = dir.path().join("train.csv");
        write_dataset(&path, &data.train).unwrap();
        assert!(read_dataset(&path, 4, 3).is_err());
    }

    #[test]
    fn oracle_round_trip() {
        let data = sample_data();
        let dir = tempdir().unwrap();
        let path = dir.path().join("oracle.csv");
        write_oracle(&path, &data.val_oracle).unwrap();
        let header = std::fs::read_to_string(&path).unwrap();
        assert!(header.starts_with("x_row,action_index,y\n"));
        let back = read_oracle(&path).unwrap();
        assert_eq!(back.y_all, data.val_oracle.y_all);
    }

    #[test]
    fn oracle_read_rejects_sparse_table() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("oracle.csv");
        std::fs::write(&path, "x_row,action_index,y\n0,0,1.0\n0,2,2.0\n").unwrap();
        assert!(read_oracle(&path).is_err());
    }

    #[test]
    fn metadata_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("meta.json");
        let meta = DatasetMetadata {
            benchmark: "linear-a".into(),
            seed: 7,
            d: 5,
            m: 5,
            y_mean: 0.25,
            y_std: 1.5,
            config_hash: config_hash("x=1"),
        };
        write_metadata(&path, &meta).unwrap();
        let back = read_metadata(&path).unwrap();
        assert_eq!(back.benchmark, meta.benchmark);
        assert_eq!(back.seed, meta.seed);
        assert_eq!(back.y_mean, meta.y_mean);
        assert_eq!(back.config_hash, meta.config_hash);
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        assert_eq!(config_hash("abc"), config_hash("abc"));
        assert_ne!(config_hash("abc"), config_hash("abd"));
    }

    #[test]
    fn rmnet_checkpoint_is_bit_exact() {
        let model = RMNetModel::new(5, 5, 3);
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        Checkpoint::Rmnet(model.clone()).save(&path).unwrap();
        let back = match Checkpoint::load(&path).unwrap() {
            Checkpoint::Rmnet(m) => m,
            other => panic!("wrong kind {}", other.kind()),
        };
        for (a, b) in model
            .extractor
            .iter_values()
            .zip(back.extractor.iter_values())
        {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in model
            .hypothesis
            .iter_values()
            .zip(back.hypothesis.iter_values())
        {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn checkpoint_preserves_non_round_values() {
        // Values with no short decimal representation survive exactly.
        let mut model = RMNetModel::new(2, 1, 0);
        model.extractor.layers[0].w[[0, 0]] = 1.0 / 3.0;
        model.extractor.layers[0].b[0] = f64::MIN_POSITIVE;
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        Checkpoint::Rmnet(model.clone()).save(&path).unwrap();
        let back = match Checkpoint::load(&path).unwrap() {
            Checkpoint::Rmnet(m) => m,
            _ => unreachable!(),
        };
        assert_eq!(back.extractor.layers[0].w[[0, 0]].to_bits(), (1.0f64 / 3.0).to_bits());
        assert_eq!(back.extractor.layers[0].b[0], f64::MIN_POSITIVE);
    }

    #[test]
    fn multihead_and_ridge_and_g_checkpoints_round_trip() {
        let dir = tempdir().unwrap();
        let mh = MultiHeadModel::new(3, 2, 1);
        let path = dir.path().join("mh.ckpt");
        Checkpoint::MultiHead(mh.clone()).save(&path).unwrap();
        match Checkpoint::load(&path).unwrap() {
            Checkpoint::MultiHead(back) => {
                assert_eq!(back.heads.len(), 4);
                for (a, b) in mh.heads[3].iter_values().zip(back.heads[3].iter_values()) {
                    assert_eq!(a, b);
                }
            }
            _ => unreachable!(),
        }

        let ridge = RidgeModel {
            weights: Array1::from_vec(vec![0.1, -0.2, 1.0 / 7.0]),
        };
        let path = dir.path().join("ridge.ckpt");
        Checkpoint::Ridge(ridge.clone()).save(&path).unwrap();
        match Checkpoint::load(&path).unwrap() {
            Checkpoint::Ridge(back) => assert_eq!(back.weights, ridge.weights),
            _ => unreachable!(),
        }

        let g = GModel {
            net: NetworkParams::init(&[3, 4, 1], &[Activation::Elu, Activation::Identity], 9)
                .unwrap(),
        };
        let path = dir.path().join("g.ckpt");
        Checkpoint::G(g.clone()).save(&path).unwrap();
        match Checkpoint::load(&path).unwrap() {
            Checkpoint::G(back) => {
                for (a, b) in g.net.iter_values().zip(back.net.iter_values()) {
                    assert_eq!(a, b);
                }
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn checkpoint_load_rejects_garbage() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, "not a checkpoint\n").unwrap();
        assert!(Checkpoint::load(&path).is_err());
        std::fs::write(&path, "checkpoint v1\nkind unknown-kind\n").unwrap();
        assert!(Checkpoint::load(&path).is_err());
    }

    #[test]
    fn epoch_log_format() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("log.csv");
        let log = vec![EpochRecord {
            epoch: 0,
            loss: 1.5,
            xe: 0.7,
            mse: 0.8,
            ipm: 0.25,
            val_nmcg: 0.4,
        }];
        write_epoch_log(&path, &log).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("epoch,loss,xe,mse,ipm,val_nmcg\n"));
        assert!(text.contains("0,1.5,0.7,0.8,0.25,0.4"));
    }

    #[test]
    fn metrics_csv_round_trip_with_missing_nmcg() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        let rows = vec![
            MetricsRow {
                method: "rmnet".into(),
                dataset: "linear-a".into(),
                seed: 42,
                k: 1,
                nmcg: Some(0.93),
                regret: 0.05,
                mse_u: 0.2,
                er_u: 0.1,
                bound_rhs: 4.5,
                bound_ok: true,
            },
            MetricsRow {
                method: "ridge".into(),
                dataset: "linear-a".into(),
                seed: 42,
                k: 1,
                nmcg: None,
                regret: 0.0,
                mse_u: 0.0,
                er_u: 0.0,
                bound_rhs: 0.0,
                bound_ok: true,
            },
        ];
        write_metrics_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("method,dataset,seed,k,nmcg,regret,mse_u,er_u,bound_rhs,bound_ok\n"));
        assert!(text.contains(",NA,"));
        let back = read_metrics_csv(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].nmcg, Some(0.93));
        assert_eq!(back[1].nmcg, None);
        assert!(back[0].bound_ok);
    }
}
