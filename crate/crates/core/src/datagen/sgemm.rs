//! Semi-synthetic benchmark built from the SGEMM GPU-kernel performance
//! CSV: 14 integer parameter columns and 4 runtime columns. Some parameter
//! columns are reinterpreted as action bits, the rest become features, and
//! only feature groups that carry every action are kept so the recorded
//! outcomes form a complete potential-outcome table.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{DataError, ObservationalDataset, OracleTable};

pub const N_PARAM_COLS: usize = 14;
pub const N_RUN_COLS: usize = 4;

/// 1-indexed original columns taken as action bits, "from the head in
/// order": m=3 uses the first three entries and so on.
pub const ACTION_COLUMNS: [usize; 6] = [8, 11, 12, 13, 14, 3];

#[derive(Debug, Clone)]
pub struct SgemmTable {
    /// All 14 parameter columns, row-major, as f64.
    pub params: Array2<f64>,
    /// Inverse mean elapsed time per row.
    pub outcome: Array1<f64>,
}

/// Parse the SGEMM CSV (header row, then 14 parameter columns followed by
/// 4 runtimes). The outcome is 4 / sum(runtimes).
pub fn load_sgemm(path: &Path) -> Result<SgemmTable, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| DataError::MalformedRow {
            row: 0,
            message: e.to_string(),
        })?;
    let mut params = Vec::new();
    let mut outcome = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| DataError::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        if record.len() != N_PARAM_COLS + N_RUN_COLS {
            return Err(DataError::WrongColumnCount {
                expected: N_PARAM_COLS + N_RUN_COLS,
                got: record.len(),
            });
        }
        let mut vals = [0.0f64; N_PARAM_COLS + N_RUN_COLS];
        for (j, field) in record.iter().enumerate() {
            vals[j] = field.trim().parse().map_err(|_| DataError::MalformedRow {
                row,
                message: format!("field {} is not numeric: {field:?}", j + 1),
            })?;
        }
        params.extend_from_slice(&vals[..N_PARAM_COLS]);
        let total: f64 = vals[N_PARAM_COLS..].iter().sum();
        outcome.push(4.0 / total);
    }
    let n = outcome.len();
    Ok(SgemmTable {
        params: Array2::from_shape_vec((n, N_PARAM_COLS), params).unwrap(),
        outcome: Array1::from_vec(outcome),
    })
}

#[derive(Debug, Clone)]
pub struct SemiSyntheticData {
    pub train: ObservationalDataset,
    pub val: ObservationalDataset,
    pub test: ObservationalDataset,
    pub val_oracle: OracleTable,
    pub test_oracle: OracleTable,
}

struct Group {
    /// Standardized feature vector shared by the whole group.
    features: Vec<f64>,
    /// Standardized outcome per action index; length 2^m.
    outcomes: Vec<f64>,
}

/// Build the semi-synthetic benchmark: pick action columns, group rows by
/// the remaining features, keep complete groups, split groups 80/5/15, and
/// subsample one biased factual action per training group.
pub fn build_semi_synthetic(
    table: &SgemmTable,
    m: usize,
    seed: u64,
) -> Result<SemiSyntheticData, DataError> {
    build_semi_synthetic_with_bias(table, m, seed, 10.0)
}

pub fn build_semi_synthetic_with_bias(
    table: &SgemmTable,
    m: usize,
    seed: u64,
    bias_strength: f64,
) -> Result<SemiSyntheticData, DataError> {
    if !(3..=6).contains(&m) {
        return Err(DataError::BadActionDim(m));
    }
    let action_cols: Vec<usize> = ACTION_COLUMNS[..m].iter().map(|c| c - 1).collect();
    let feature_cols: Vec<usize> =
        (0..N_PARAM_COLS).filter(|c| !action_cols.contains(c)).collect();
    let d = feature_cols.len();
    let n_actions = 1usize << m;

    // Each selected action column must be binary; map ascending -> {0,1}.
    let mut col_low = vec![0.0f64; m];
    for (bit, &c) in action_cols.iter().enumerate() {
        let mut distinct: Vec<f64> = Vec::new();
        for &v in table.params.column(c).iter() {
            if !distinct.iter().any(|&x| x == v) {
                distinct.push(v);
            }
        }
        if distinct.len() != 2 {
            return Err(DataError::NonBinaryActionColumn {
                column: c + 1,
                distinct: distinct.len(),
            });
        }
        col_low[bit] = distinct.iter().cloned().fold(f64::INFINITY, f64::min);
    }

    // Group rows by the feature combination; record the outcome per action.
    let mut groups: BTreeMap<Vec<u64>, Vec<Option<(f64, usize)>>> = BTreeMap::new();
    for i in 0..table.params.nrows() {
        let key: Vec<u64> = feature_cols
            .iter()
            .map(|&c| table.params[[i, c]].to_bits())
            .collect();
        let mut action_index = 0usize;
        for (bit, &c) in action_cols.iter().enumerate() {
            if table.params[[i, c]] != col_low[bit] {
                action_index |= 1 << bit;
            }
        }
        groups
            .entry(key)
            .or_insert_with(|| vec![None; n_actions])[action_index] =
            Some((table.outcome[i], i));
    }
    let complete: Vec<(Vec<u64>, Vec<f64>)> = groups
        .into_iter()
        .filter_map(|(key, slots)| {
            let outcomes: Option<Vec<f64>> =
                slots.into_iter().map(|s| s.map(|(y, _)| y)).collect();
            outcomes.map(|o| (key, o))
        })
        .collect();
    if complete.is_empty() {
        return Err(DataError::NoCompleteGroup { m });
    }

    // Standardize features and outcomes over the kept rows.
    let n_groups = complete.len();
    let mut feat_raw: Vec<Vec<f64>> = complete
        .iter()
        .map(|(key, _)| key.iter().map(|&b| f64::from_bits(b)).collect())
        .collect();
    for j in 0..d {
        let mean = feat_raw.iter().map(|f| f[j]).sum::<f64>() / n_groups as f64;
        let var = feat_raw.iter().map(|f| (f[j] - mean).powi(2)).sum::<f64>() / n_groups as f64;
        let std = var.sqrt().max(1e-12);
        for f in feat_raw.iter_mut() {
            f[j] = (f[j] - mean) / std;
        }
    }
    let all_y: Vec<f64> = complete.iter().flat_map(|(_, o)| o.iter().copied()).collect();
    let y_mean0 = all_y.iter().sum::<f64>() / all_y.len() as f64;
    let y_var0 = all_y.iter().map(|v| (v - y_mean0).powi(2)).sum::<f64>() / all_y.len() as f64;
    let y_std0 = y_var0.sqrt();
    if !(y_std0 > 0.0) {
        return Err(DataError::DegenerateOutcomes);
    }
    let mut groups: Vec<Group> = complete
        .into_iter()
        .zip(feat_raw)
        .map(|((_, outcomes), features)| Group {
            features,
            outcomes: outcomes.iter().map(|v| (v - y_mean0) / y_std0).collect(),
        })
        .collect();

    // Split over feature groups, not raw rows, so a group never leaks
    // across partitions.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    groups.shuffle(&mut rng);
    let n_train = (0.8 * n_groups as f64).floor() as usize;
    let n_val = (0.05 * n_groups as f64).floor() as usize;
    let (train_groups, rest) = groups.split_at(n_train);
    let (val_groups, test_groups) = rest.split_at(n_val.min(rest.len()));

    // Biased sampling policy over the recorded outcomes.
    let w: Vec<f64> = (0..d + m).map(|_| StandardNormal.sample(&mut rng)).collect();
    let action_bits = |j: usize| -> Vec<f64> { (0..m).map(|b| ((j >> b) & 1) as f64).collect() };
    let mut pick_factual = |g: &Group, rng: &mut ChaCha8Rng| -> (usize, f64) {
        let logits: Vec<f64> = (0..n_actions)
            .map(|j| {
                let bits = action_bits(j);
                let proj: f64 = g
                    .features
                    .iter()
                    .chain(bits.iter())
                    .zip(w.iter())
                    .map(|(v, w)| v * w)
                    .sum();
                -bias_strength * (g.outcomes[j] - proj).abs()
            })
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let u: f64 = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        for (j, e) in exps.iter().enumerate() {
            acc += e;
            if u < acc {
                return (j, g.outcomes[j]);
            }
        }
        (n_actions - 1, g.outcomes[n_actions - 1])
    };

    let sample_partition = |gs: &[Group], rng: &mut ChaCha8Rng,
                            pick: &mut dyn FnMut(&Group, &mut ChaCha8Rng) -> (usize, f64)|
     -> (Array2<f64>, Array2<f64>, Array1<f64>) {
        let n = gs.len();
        let mut x = Array2::zeros((n, d));
        let mut a = Array2::zeros((n, m));
        let mut y = Array1::zeros(n);
        for (i, g) in gs.iter().enumerate() {
            for (j, &v) in g.features.iter().enumerate() {
                x[[i, j]] = v;
            }
            let (ai, yi) = pick(g, rng);
            for b in 0..m {
                a[[i, b]] = ((ai >> b) & 1) as f64;
            }
            y[i] = yi;
        }
        (x, a, y)
    };

    let (x_tr, a_tr, y_tr) = sample_partition(train_groups, &mut rng, &mut pick_factual);
    let (x_val, a_val, y_val) = sample_partition(val_groups, &mut rng, &mut pick_factual);
    let (x_te, a_te, y_te) = sample_partition(test_groups, &mut rng, &mut pick_factual);

    if y_tr.len() < 2 {
        return Err(DataError::TooFewTrainRows(y_tr.len()));
    }
    // Final standardization by training factual statistics; oracle tables
    // share the transform.
    let mean2 = y_tr.mean().unwrap();
    let var2 = y_tr.iter().map(|v| (v - mean2).powi(2)).sum::<f64>() / y_tr.len() as f64;
    let std2 = var2.sqrt();
    if !(std2 > 0.0) {
        return Err(DataError::DegenerateOutcomes);
    }
    // Composed transform back to raw outcome units.
    let y_mean = y_mean0 + y_std0 * mean2;
    let y_std = y_std0 * std2;

    let oracle_for = |gs: &[Group]| -> OracleTable {
        OracleTable {
            y_all: Array2::from_shape_fn((gs.len(), n_actions), |(i, j)| {
                (gs[i].outcomes[j] - mean2) / std2
            }),
        }
    };
    let build = |x, a, y: Array1<f64>| ObservationalDataset {
        x,
        a_obs: a,
        y: y.mapv(|v| (v - mean2) / std2),
        y_mean,
        y_std,
    };
    Ok(SemiSyntheticData {
        val_oracle: oracle_for(val_groups),
        test_oracle: oracle_for(test_groups),
        train: build(x_tr, a_tr, y_tr),
        val: build(x_val, a_val, y_val),
        test: build(x_te, a_te, y_te),
    })
}
