//! Decision metrics over full potential-outcome tables: rank, top-k policy,
//! mean cumulative gain and regret, normalized mean CG, uniform MSE, the
//! top-k classification error rate (directly and through its 0-1 loss
//! recast), and the regret bound check.

use ndarray::{Array2, ArrayView1};
use serde::Serialize;
use thiserror::Error;

use crate::datagen::OracleTable;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("shape mismatch: scores are {scores:?}, oracle is {oracle:?}")]
    ShapeMismatch {
        scores: (usize, usize),
        oracle: (usize, usize),
    },
    #[error("k = {k} out of range for {actions} actions")]
    BadK { k: usize, actions: usize },
    #[error("index {index} out of range for {len} values")]
    BadIndex { index: usize, len: usize },
}

/// Number of entries >= the indexed entry; ties inflate the rank of every
/// tied member.
pub fn rank(values: ArrayView1<f64>, index: usize) -> Result<usize, EvalError> {
    let v = *values.get(index).ok_or(EvalError::BadIndex {
        index,
        len: values.len(),
    })?;
    Ok(values.iter().filter(|&&x| x >= v).count())
}

/// Indices of the k largest values; ties broken by ascending action index.
pub fn topk_actions(values: ArrayView1<f64>, k: usize) -> Result<Vec<usize>, EvalError> {
    if k == 0 || k > values.len() {
        return Err(EvalError::BadK {
            k,
            actions: values.len(),
        });
    }
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    Ok(idx)
}

fn check_shapes(scores: &Array2<f64>, oracle: &OracleTable) -> Result<(), EvalError> {
    let o = &oracle.y_all;
    if scores.nrows() != o.nrows() || scores.ncols() != o.ncols() {
        return Err(EvalError::ShapeMismatch {
            scores: (scores.nrows(), scores.ncols()),
            oracle: (o.nrows(), o.ncols()),
        });
    }
    Ok(())
}

/// Mean cumulative gain at k and its regret against the oracle's own top-k.
pub fn mcg_regret(
    scores: &Array2<f64>,
    oracle: &OracleTable,
    k: usize,
) -> Result<(f64, f64), EvalError> {
    check_shapes(scores, oracle)?;
    let n = scores.nrows();
    let mut mcg = 0.0;
    let mut best = 0.0;
    for i in 0..n {
        let srow = scores.row(i);
        let orow = oracle.y_all.row(i);
        let picked = topk_actions(srow, k)?;
        let ideal = topk_actions(orow, k)?;
        mcg += picked.iter().map(|&j| orow[j]).sum::<f64>() / k as f64;
        best += ideal.iter().map(|&j| orow[j]).sum::<f64>() / k as f64;
    }
    mcg /= n as f64;
    best /= n as f64;
    Ok((mcg, best - mcg))
}

/// Normalized mean CG: predicted-top-k outcome gain over the per-row action
/// mean, summed over all rows, divided by the oracle-top-k gain. Centering by
/// the row mean makes the value scale- and shift-invariant, so a random
/// scorer sits at 0 (the chance rate) and the oracle at 1 regardless of the
/// outcome units. None when the denominator is ~0, i.e. the oracle rows are
/// essentially constant (flagged undefined, excluded from aggregation by
/// callers). k = |A| is always degenerate: every policy selects all actions
/// and gains exactly the mean, so the value comes back None.
pub fn nmcg(scores: &Array2<f64>, oracle: &OracleTable, k: usize) -> Result<Option<f64>, EvalError> {
    check_shapes(scores, oracle)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..scores.nrows() {
        let srow = scores.row(i);
        let orow = oracle.y_all.row(i);
        let row_mean = orow.sum() / orow.len() as f64;
        num += topk_actions(srow, k)?
            .iter()
            .map(|&j| orow[j] - row_mean)
            .sum::<f64>();
        den += topk_actions(orow, k)?
            .iter()
            .map(|&j| orow[j] - row_mean)
            .sum::<f64>();
    }
    if den.abs() < 1e-12 {
        return Ok(None);
    }
    Ok(Some(num / den))
}

/// Squared error averaged uniformly over rows and all actions.
pub fn uniform_mse(scores: &Array2<f64>, oracle: &OracleTable) -> Result<f64, EvalError> {
    check_shapes(scores, oracle)?;
    let diff = scores - &oracle.y_all;
    Ok(diff.mapv(|v| v * v).mean().unwrap())
}

/// Top-k classification error rate: fraction of actions whose membership in
/// the true top-k and the predicted top-k disagree.
pub fn er_ku(scores: &Array2<f64>, oracle: &OracleTable, k: usize) -> Result<f64, EvalError> {
    check_shapes(scores, oracle)?;
    let (n, na) = (scores.nrows(), scores.ncols());
    let mut errors = 0usize;
    for i in 0..n {
        let srow = scores.row(i);
        let orow = oracle.y_all.row(i);
        for a in 0..na {
            let in_true = rank(orow, a)? <= k;
            let in_pred = rank(srow, a)? <= k;
            if in_true != in_pred {
                errors += 1;
            }
        }
    }
    Ok(errors as f64 / (n * na) as f64)
}

/// The same error rate computed through the 0-1 classification recast:
/// l01(y_a - y_k*, f'(x,a) - y_k*) with f'(x,a) = f(x,a) - f(x,a_k_pred) + y_k*.
/// Equals `er_ku` exactly on rows without ties at the k-th position.
pub fn er_via_01loss(scores: &Array2<f64>, oracle: &OracleTable, k: usize) -> Result<f64, EvalError> {
    check_shapes(scores, oracle)?;
    let (n, na) = (scores.nrows(), scores.ncols());
    let mut total = 0.0;
    for i in 0..n {
        let srow = scores.row(i);
        let orow = oracle.y_all.row(i);
        let y_kstar = orow[*topk_actions(orow, k)?.last().unwrap()];
        let f_kstar = srow[*topk_actions(srow, k)?.last().unwrap()];
        for a in 0..na {
            let t = orow[a] - y_kstar;
            // f'(x,a) - y_k* = f(x,a) - f(x, a_k_pred)
            let that = srow[a] - f_kstar;
            let l01 = (t >= 0.0) != (that >= 0.0);
            if l01 {
                total += 1.0;
            }
        }
    }
    Ok(total / (n * na) as f64)
}

/// Regret bound: Regret@k <= (|A|/k) * sqrt(ER * MSE).
pub fn bound_check(regret: f64, er_u: f64, mse_u: f64, n_actions: usize, k: usize) -> (f64, bool) {
    let rhs = (n_actions as f64 / k as f64) * (er_u * mse_u).sqrt();
    (rhs, regret <= rhs + 1e-9)
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub k: usize,
    pub nmcg: Option<f64>,
    pub mcg: f64,
    pub regret: f64,
    pub mse_u: f64,
    pub er_u: f64,
    pub bound_rhs: f64,
    pub bound_satisfied: bool,
}

impl MetricsReport {
    pub fn compute(scores: &Array2<f64>, oracle: &OracleTable, k: usize) -> Result<Self, EvalError> {
        let (mcg, regret) = mcg_regret(scores, oracle, k)?;
        let nmcg = nmcg(scores, oracle, k)?;
        let mse_u = uniform_mse(scores, oracle)?;
        let er_u = er_ku(scores, oracle, k)?;
        let (bound_rhs, bound_satisfied) = bound_check(regret, er_u, mse_u, scores.ncols(), k);
        Ok(MetricsReport {
            k,
            nmcg,
            mcg,
            regret,
            mse_u,
            er_u,
            bound_rhs,
            bound_satisfied,
        })
    }
}
