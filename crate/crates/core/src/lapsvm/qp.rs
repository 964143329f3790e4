//! Dual QP assembly and solver.
//!
//! The dual maximizes -1/2 b'Qb + sum(b) subject to sum(b_i y_i) = 0 and
//! 0 <= b_i <= C_l. The solver is a maximal-violating-pair SMO; the Q matrix
//! comes from the manifold-regularized system Q = Y J K (I + C_r L K)^-1 J' Y.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lapsvm::{KernelSpec, TrainSet};

/// Condition-estimate cutoff for the (I + C_r L K) solve.
pub const MAX_CONDITION: f64 = 1e14;
/// PSD jitter applied when Q's smallest eigenvalue drops below -1e-8.
pub const PSD_JITTER: f64 = 1e-8;
/// KKT tolerance for the SMO stop rule.
pub const KKT_TOL: f64 = 1e-6;
/// Pair-update cap.
pub const MAX_UPDATES: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct QpProblem {
    pub q: DMatrix<f64>,
    pub y: Vec<f64>,
    pub c_l: f64,
    /// Whether PSD jitter was added to Q.
    pub jittered: bool,
}

#[derive(Debug, Clone)]
pub struct SolveStats {
    pub updates: usize,
    pub kkt_violation: f64,
    /// Dual objective after each pair update (non-decreasing).
    pub objective_trace: Vec<f64>,
}

/// Gram matrix over `points` with the given kernel.
pub fn gram(points: &[Vec<f64>], kernel: &KernelSpec) -> DMatrix<f64> {
    let n = points.len();
    DMatrix::from_fn(n, n, |i, j| kernel.eval(&points[i], &points[j]))
}

/// Solve M X = B by LU with a cheap condition estimate from the U diagonal.
fn lu_solve(m: DMatrix<f64>, b: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let lu = m.lu();
    let u_diag: Vec<f64> = (0..lu.u().nrows()).map(|i| lu.u()[(i, i)].abs()).collect();
    let dmax = u_diag.iter().cloned().fold(0.0f64, f64::max);
    let dmin = u_diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let cond = if dmin == 0.0 { f64::INFINITY } else { dmax / dmin };
    if cond > MAX_CONDITION {
        return Err(Error::IllConditioned { cond });
    }
    lu.solve(&b)
        .ok_or(Error::IllConditioned { cond: f64::INFINITY })
}

/// M = I + C_r L K.
fn regularized_system(k: &DMatrix<f64>, l: &DMatrix<f64>, c_r: f64) -> DMatrix<f64> {
    let n = k.nrows();
    DMatrix::<f64>::identity(n, n) + (l * k).scale(c_r)
}

/// Assemble the dual matrix Q = Y J K (I + C_r L K)^-1 J' Y over the
/// training points as stored (labeled first, then unlabeled). Points are
/// expected to be standardized already. Q is symmetrized and, if needed,
/// jittered back to PSD.
pub fn assemble_qp(
    train: &TrainSet,
    kernel: &KernelSpec,
    laplacian: &DMatrix<f64>,
    c_l: f64,
    c_r: f64,
) -> Result<QpProblem> {
    if !(c_l > 0.0) {
        return Err(Error::InvalidArgument("c_l must be > 0".into()));
    }
    if c_r < 0.0 {
        return Err(Error::InvalidArgument("c_r must be >= 0".into()));
    }
    let points = train.all_points();
    let l = train.labeled.len();
    let n = points.len();
    if laplacian.nrows() != n {
        return Err(Error::InvalidArgument(
            "Laplacian size does not match point count".into(),
        ));
    }
    let k = gram(&points, kernel);
    let m = regularized_system(&k, laplacian, c_r);
    // S = M^-1 J', an n x l block.
    let mut jt = DMatrix::<f64>::zeros(n, l);
    for i in 0..l {
        jt[(i, i)] = 1.0;
    }
    let s = lu_solve(m, jt)?;
    let k_l = k.rows(0, l); // J K
    let core = k_l * &s; // l x l
    let y: Vec<f64> = train.labeled.iter().map(|&(_, lab)| lab as f64).collect();
    let mut q = DMatrix::from_fn(l, l, |a, b| y[a] * core[(a, b)] * y[b]);
    // Symmetrize; the asymmetric product can lose symmetry to rounding.
    q = (&q + q.transpose()).scale(0.5);
    let min_eig = q.symmetric_eigenvalues().min();
    let mut jittered = false;
    if min_eig < -PSD_JITTER {
        for i in 0..l {
            q[(i, i)] += PSD_JITTER;
        }
        jittered = true;
    }
    Ok(QpProblem {
        q,
        y,
        c_l,
        jittered,
    })
}

/// Recover the expansion coefficients: solve (I + C_r L K) alpha = J' Y beta.
pub fn recover_alpha(
    train: &TrainSet,
    kernel: &KernelSpec,
    laplacian: &DMatrix<f64>,
    c_r: f64,
    beta: &[f64],
) -> Result<Vec<f64>> {
    let points = train.all_points();
    let l = train.labeled.len();
    let n = points.len();
    if beta.len() != l {
        return Err(Error::InvalidArgument("beta length must equal l".into()));
    }
    let k = gram(&points, kernel);
    let m = regularized_system(&k, laplacian, c_r);
    let mut rhs = DMatrix::<f64>::zeros(n, 1);
    for i in 0..l {
        rhs[(i, 0)] = train.labeled[i].1 as f64 * beta[i];
    }
    let alpha = lu_solve(m, rhs)?;
    Ok(alpha.column(0).iter().cloned().collect())
}

pub fn solve_qp(qp: &QpProblem) -> Result<Vec<f64>> {
    solve_qp_with_stats(qp).map(|(beta, _)| beta)
}

/// SMO over maximal violating pairs. Feasibility (equality and box) holds
/// by construction; convergence is declared when the KKT gap falls
/// below [`KKT_TOL`].
pub fn solve_qp_with_stats(qp: &QpProblem) -> Result<(Vec<f64>, SolveStats)> {
    solve_qp_tol(qp, KKT_TOL)
}

pub fn solve_qp_tol(qp: &QpProblem, tol: f64) -> Result<(Vec<f64>, SolveStats)> {
    let l = qp.y.len();
    let c = qp.c_l;
    let q = &qp.q;
    let y = &qp.y;
    let mut beta = vec![0.0f64; l];
    // grad of f(beta) = 1/2 b'Qb - sum(b)
    let mut grad: Vec<f64> = vec![-1.0; l];
    let mut obj = 0.0f64; // -f(beta)
    let mut trace = Vec::new();
    let mut updates = 0usize;
    let mut last_gap = f64::INFINITY;

    loop {
        // Maximal violating pair over F_i = -y_i grad_i.
        let mut up: Option<(usize, f64)> = None;
        let mut low: Option<(usize, f64)> = None;
        for i in 0..l {
            let fi = -y[i] * grad[i];
            let in_up = (y[i] > 0.0 && beta[i] < c) || (y[i] < 0.0 && beta[i] > 0.0);
            let in_low = (y[i] > 0.0 && beta[i] > 0.0) || (y[i] < 0.0 && beta[i] < c);
            if in_up && up.map_or(true, |(_, v)| fi > v) {
                up = Some((i, fi));
            }
            if in_low && low.map_or(true, |(_, v)| fi < v) {
                low = Some((i, fi));
            }
        }
        let (Some((i, fi)), Some((j, fj))) = (up, low) else {
            break;
        };
        last_gap = fi - fj;
        if last_gap <= tol {
            break;
        }
        if updates >= MAX_UPDATES {
            return Err(Error::NonConvergence {
                iterations: updates,
                residual: last_gap,
                best: beta,
            });
        }

        // Direction d_i = y_i, d_j = -y_j preserves the equality constraint.
        let a = q[(i, i)] + q[(j, j)] - 2.0 * y[i] * y[j] * q[(i, j)];
        let b_lin = y[i] * grad[i] - y[j] * grad[j]; // d' grad, negative here
        let t_max_i = if y[i] > 0.0 { c - beta[i] } else { beta[i] };
        let t_max_j = if y[j] > 0.0 { beta[j] } else { c - beta[j] };
        let t_box = t_max_i.min(t_max_j);
        let t = if a > 0.0 {
            (-b_lin / a).min(t_box)
        } else {
            t_box
        };
        if !(t > 0.0) {
            break; // no progress possible
        }

        beta[i] += t * y[i];
        beta[j] -= t * y[j];
        beta[i] = beta[i].clamp(0.0, c);
        beta[j] = beta[j].clamp(0.0, c);
        obj -= t * b_lin + 0.5 * t * t * a;
        for r in 0..l {
            grad[r] += t * (y[i] * q[(r, i)] - y[j] * q[(r, j)]);
        }
        updates += 1;
        trace.push(obj);
        // Periodic full gradient refresh to bound drift.
        if updates % 4096 == 0 {
            for r in 0..l {
                let mut g = -1.0;
                for s in 0..l {
                    g += q[(r, s)] * beta[s];
                }
                grad[r] = g;
            }
        }
    }

    Ok((
        beta,
        SolveStats {
            updates,
            kkt_violation: if last_gap.is_finite() { last_gap.max(0.0) } else { 0.0 },
            objective_trace: trace,
        },
    ))
}

/// KKT bias estimate: median of y_i - f0(x_i) over strictly-interior
/// support vectors; falls back to a 1-D sweep maximizing training F1.
pub fn recover_bias(
    points: &[Vec<f64>],
    labels: &[f64],
    kernel: &KernelSpec,
    alpha: &[f64],
    beta: &[f64],
    c_l: f64,
) -> f64 {
    let l = labels.len();
    let f0 = |x: &[f64]| -> f64 {
        alpha
            .iter()
            .zip(points)
            .map(|(&a, p)| a * kernel.eval(x, p))
            .sum()
    };
    let margin_eps = 1e-8 * c_l;
    let mut residuals: Vec<f64> = (0..l)
        .filter(|&i| beta[i] > margin_eps && beta[i] < c_l - margin_eps)
        .map(|i| labels[i] - f0(&points[i]))
        .collect();
    if !residuals.is_empty() {
        residuals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = residuals.len();
        return if n % 2 == 1 {
            residuals[n / 2]
        } else {
            0.5 * (residuals[n / 2 - 1] + residuals[n / 2])
        };
    }

    // Fallback: sweep candidate biases at midpoints between sorted decision
    // values, picking the best training F1 on the labeled points.
    let mut scores: Vec<f64> = (0..l).map(|i| f0(&points[i])).collect();
    let raw = scores.clone();
    scores.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut candidates = vec![0.0];
    candidates.push(-scores[0] + 1e-9);
    candidates.push(-scores[l - 1] - 1e-9);
    for w in scores.windows(2) {
        candidates.push(-0.5 * (w[0] + w[1]));
    }
    let f1_at = |b: f64| -> f64 {
        let mut tp = 0.0;
        let mut fp = 0.0;
        let mut fnn = 0.0;
        for i in 0..l {
            let pred = if raw[i] + b > 0.0 { 1.0 } else { -1.0 };
            if pred > 0.0 && labels[i] > 0.0 {
                tp += 1.0;
            } else if pred > 0.0 {
                fp += 1.0;
            } else if labels[i] > 0.0 {
                fnn += 1.0;
            }
        }
        if tp == 0.0 {
            0.0
        } else {
            2.0 * tp / (2.0 * tp + fp + fnn)
        }
    };
    let mut best = candidates[0];
    let mut best_f1 = f1_at(best);
    for &cand in &candidates[1..] {
        let f1 = f1_at(cand);
        if f1 > best_f1 || (f1 == best_f1 && cand.abs() < best.abs()) {
            best = cand;
            best_f1 = f1;
        }
    }
    best
}
