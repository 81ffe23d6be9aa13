//! Entropy-regularized Wasserstein distance between two point batches with
//! uniform marginals, plus envelope-style gradients with respect to both
//! point sets. Used as the representation balancing regularizer.

use ndarray::{Array1, Array2, Axis};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SinkhornError {
    #[error("dimension mismatch: source has {source_dim} columns, target has {target_dim}")]
    DimMismatch { source_dim: usize, target_dim: usize },
    #[error("empty point batch")]
    EmptyBatch,
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("iterations produced non-finite values; try a larger epsilon")]
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct TransportProblem<'a> {
    pub source: &'a Array2<f64>,
    pub target: &'a Array2<f64>,
    pub epsilon: f64,
    pub max_iters: usize,
    pub tolerance: f64,
}

impl<'a> TransportProblem<'a> {
    /// Scale-adaptive default: epsilon = 0.1 * mean(C), 200 iterations,
    /// marginal tolerance 1e-6.
    pub fn new(source: &'a Array2<f64>, target: &'a Array2<f64>) -> Result<Self, SinkhornError> {
        let cost = cost_matrix(source, target)?;
        let eps = 0.1 * cost.mean().unwrap_or(0.0);
        Ok(TransportProblem {
            source,
            target,
            epsilon: if eps > 0.0 { eps } else { 1e-3 },
            max_iters: 200,
            tolerance: 1e-6,
        })
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }
}

/// Pairwise squared Euclidean distances, n × n'.
pub fn cost_matrix(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>, SinkhornError> {
    if a.ncols() != b.ncols() {
        return Err(SinkhornError::DimMismatch {
            source_dim: a.ncols(),
            target_dim: b.ncols(),
        });
    }
    let mut c = Array2::zeros((a.nrows(), b.nrows()));
    for (i, ai) in a.rows().into_iter().enumerate() {
        for (j, bj) in b.rows().into_iter().enumerate() {
            let d = ai
                .iter()
                .zip(bj.iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>();
            c[[i, j]] = d;
        }
    }
    Ok(c)
}

pub struct SinkhornResult {
    /// Transport cost <P, C> under the regularized plan. The entropy term is
    /// excluded from the reported value.
    pub distance: f64,
    pub plan: Array2<f64>,
    pub iterations: usize,
}

/// Sinkhorn scaling with uniform marginals 1/n and 1/n'. Switches to
/// log-domain iterations when exp(-C/eps) would underflow.
pub fn sinkhorn_distance(problem: &TransportProblem) -> Result<SinkhornResult, SinkhornError> {
    let (n, np) = (problem.source.nrows(), problem.target.nrows());
    if n == 0 || np == 0 {
        return Err(SinkhornError::EmptyBatch);
    }
    if !(problem.epsilon > 0.0) {
        return Err(SinkhornError::BadEpsilon(problem.epsilon));
    }
    let cost = cost_matrix(problem.source, problem.target)?;
    let eps = problem.epsilon;

    // Underflow test: the kernel must keep at least one representable entry
    // per row at double precision.
    let max_c = cost.iter().cloned().fold(0.0f64, f64::max);
    let plan = if max_c / eps > 500.0 {
        log_domain_plan(&cost, eps, n, np, problem.max_iters, problem.tolerance)?
    } else {
        scaling_plan(&cost, eps, n, np, problem.max_iters, problem.tolerance)?
    };
    let distance = (&plan.0 * &cost).sum();
    if !distance.is_finite() {
        return Err(SinkhornError::NumericalFailure);
    }
    Ok(SinkhornResult {
        distance,
        plan: plan.0,
        iterations: plan.1,
    })
}

fn scaling_plan(
    cost: &Array2<f64>,
    eps: f64,
    n: usize,
    np: usize,
    max_iters: usize,
    tol: f64,
) -> Result<(Array2<f64>, usize), SinkhornError> {
    let kernel = cost.mapv(|c| (-c / eps).exp());
    let a = 1.0 / n as f64;
    let b = 1.0 / np as f64;
    let mut u = Array1::from_elem(n, a);
    let mut v = Array1::from_elem(np, b);
    let mut iters = 0;
    for it in 0..max_iters {
        iters = it + 1;
        let kv = kernel.dot(&v);
        if kv.iter().any(|&x| x <= 0.0 || !x.is_finite()) {
            // Fall back rather than erroring: log-domain handles small eps.
            return log_domain_plan(cost, eps, n, np, max_iters, tol);
        }
        u = kv.mapv(|x| a / x);
        let ktu = kernel.t().dot(&u);
        if ktu.iter().any(|&x| x <= 0.0 || !x.is_finite()) {
            return log_domain_plan(cost, eps, n, np, max_iters, tol);
        }
        v = ktu.mapv(|x| b / x);
        // Row marginal residual; column marginals are exact right after the
        // v-update.
        let row_res: f64 = kernel
            .dot(&v)
            .iter()
            .zip(u.iter())
            .map(|(kv, u)| (kv * u - a).abs())
            .sum();
        if row_res < tol {
            break;
        }
    }
    let plan = Array2::from_shape_fn((n, np), |(i, j)| u[i] * kernel[[i, j]] * v[j]);
    Ok((plan, iters))
}

fn log_domain_plan(
    cost: &Array2<f64>,
    eps: f64,
    n: usize,
    np: usize,
    max_iters: usize,
    tol: f64,
) -> Result<(Array2<f64>, usize), SinkhornError> {
    let log_a = (1.0 / n as f64).ln();
    let log_b = (1.0 / np as f64).ln();
    let mut f = Array1::<f64>::zeros(n);
    let mut g = Array1::<f64>::zeros(np);
    let mut iters = 0;
    for it in 0..max_iters {
        iters = it + 1;
        // f_i = eps * (log a - logsumexp_j (g_j - C_ij)/eps)
        for i in 0..n {
            let lse = logsumexp((0..np).map(|j| (g[j] - cost[[i, j]]) / eps));
            f[i] = eps * (log_a - lse);
        }
        for j in 0..np {
            let lse = logsumexp((0..n).map(|i| (f[i] - cost[[i, j]]) / eps));
            g[j] = eps * (log_b - lse);
        }
        if !f.iter().chain(g.iter()).all(|x| x.is_finite()) {
            return Err(SinkhornError::NumericalFailure);
        }
        // Row marginal residual of the implied plan.
        let mut res = 0.0;
        for i in 0..n {
            let row: f64 = (0..np)
                .map(|j| ((f[i] + g[j] - cost[[i, j]]) / eps).exp())
                .sum();
            res += (row - (1.0 / n as f64)).abs();
        }
        if res < tol {
            break;
        }
    }
    let plan = Array2::from_shape_fn((n, np), |(i, j)| ((f[i] + g[j] - cost[[i, j]]) / eps).exp());
    Ok((plan, iters))
}

fn logsumexp(vals: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = vals.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + vals.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Envelope gradient of <P, C> with the plan held fixed:
/// d/dA_i = sum_j P_ij * 2 (A_i - B_j), and symmetrically for B.
pub fn sinkhorn_grad(
    problem: &TransportProblem,
    plan: &Array2<f64>,
) -> Result<(Array2<f64>, Array2<f64>), SinkhornError> {
    let (a, b) = (problem.source, problem.target);
    if a.ncols() != b.ncols() {
        return Err(SinkhornError::DimMismatch {
            source_dim: a.ncols(),
            target_dim: b.ncols(),
        });
    }
    if plan.nrows() != a.nrows() || plan.ncols() != b.nrows() {
        return Err(SinkhornError::DimMismatch {
            source_dim: plan.nrows(),
            target_dim: a.nrows(),
        });
    }
    // grad_A_i = 2 * (rowsum_i * A_i - sum_j P_ij B_j)
    let row_sums = plan.sum_axis(Axis(1));
    let col_sums = plan.sum_axis(Axis(0));
    let pb = plan.dot(b); // n × r
    let pta = plan.t().dot(a); // n' × r
    let mut grad_a = a.clone();
    for (i, mut row) in grad_a.rows_mut().into_iter().enumerate() {
        for (k, v) in row.iter_mut().enumerate() {
            *v = 2.0 * (row_sums[i] * a[[i, k]] - pb[[i, k]]);
        }
    }
    let mut grad_b = b.clone();
    for (j, mut row) in grad_b.rows_mut().into_iter().enumerate() {
        for (k, v) in row.iter_mut().enumerate() {
            *v = 2.0 * (col_sums[j] * b[[j, k]] - pta[[j, k]]);
        }
    }
    Ok((grad_a, grad_b))
}
