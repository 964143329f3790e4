//! Independent oracles used by the acceptance suite: a direct set-builder
//! evaluation of the causality metrics, an exhaustive active-set QP
//! enumerator, and a textbook soft-margin dual SVM.
//!
//! Nothing here shares code with the library's computation paths.

#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use psmdetect::action_log::ActionRecord;

// ---------------------------------------------------------------------------
// Brute-force causality metrics
// ---------------------------------------------------------------------------

/// A window-restricted corpus built directly from the raw records:
/// per message, each user's earliest action time, filtered to [start, end].
pub struct BruteCorpus {
    pub theta: usize,
    pub phi: f64,
    /// message -> (user -> time)
    pub msgs: BTreeMap<String, BTreeMap<String, i64>>,
}

impl BruteCorpus {
    pub fn new(records: &[ActionRecord], start: i64, end: i64, theta: usize, phi: f64) -> Self {
        let mut earliest: BTreeMap<String, BTreeMap<String, i64>> = BTreeMap::new();
        for r in records {
            let per = earliest.entry(r.message.clone()).or_default();
            per.entry(r.user.clone())
                .and_modify(|t| *t = (*t).min(r.time))
                .or_insert(r.time);
        }
        let mut msgs = BTreeMap::new();
        for (m, users) in earliest {
            let filtered: BTreeMap<String, i64> = users
                .into_iter()
                .filter(|&(_, t)| t >= start && t <= end)
                .collect();
            if !filtered.is_empty() {
                msgs.insert(m, filtered);
            }
        }
        BruteCorpus { theta, phi, msgs }
    }

    pub fn users(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .msgs
            .values()
            .flat_map(|u| u.keys().cloned())
            .collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn viral(&self, m: &str) -> bool {
        self.msgs[m].len() >= self.theta
    }

    pub fn rho(&self) -> f64 {
        let total = self.msgs.len();
        let viral = self.msgs.keys().filter(|m| self.viral(m)).count();
        viral as f64 / total as f64
    }

    pub fn is_key(&self, user: &str, m: &str) -> bool {
        let users = &self.msgs[m];
        let Some(&t) = users.get(user) else {
            return false;
        };
        let after = users.values().filter(|&&tv| tv > t).count();
        after as f64 >= self.phi * users.len() as f64
    }

    pub fn rho_user(&self, user: &str) -> f64 {
        let mut den = 0usize;
        let mut num = 0usize;
        for m in self.msgs.keys() {
            if self.is_key(user, m) {
                den += 1;
                if self.viral(m) {
                    num += 1;
                }
            }
        }
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    pub fn p_ij(&self, i: &str, j: &str) -> f64 {
        let mut den = 0usize;
        let mut num = 0usize;
        for (m, users) in &self.msgs {
            if let (Some(&ti), Some(&tj)) = (users.get(i), users.get(j)) {
                if ti < tj {
                    den += 1;
                    if self.viral(m) {
                        num += 1;
                    }
                }
            }
        }
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    pub fn p_not_ij(&self, i: &str, j: &str) -> f64 {
        let mut den = 0usize;
        let mut num = 0usize;
        for (m, users) in &self.msgs {
            let Some(&tj) = users.get(j) else { continue };
            let preceded = users.get(i).is_some_and(|&ti| ti < tj);
            if !preceded {
                den += 1;
                if self.viral(m) {
                    num += 1;
                }
            }
        }
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    pub fn prima_facie(&self, user: &str, m: &str) -> bool {
        self.viral(m) && self.is_key(user, m) && self.rho_user(user) > self.rho()
    }

    /// R(i), ascending by user id.
    pub fn related(&self, i: &str) -> Vec<String> {
        let mut out = Vec::new();
        for j in self.users() {
            if j == i {
                continue;
            }
            let mut rel = false;
            for (m, users) in &self.msgs {
                if !self.viral(m) {
                    continue;
                }
                if let (Some(&ti), Some(&tj)) = (users.get(i), users.get(j.as_str())) {
                    if ti < tj && self.prima_facie(i, m) && self.prima_facie(&j, m) {
                        rel = true;
                        break;
                    }
                }
            }
            if rel {
                out.push(j);
            }
        }
        out
    }

    pub fn e_km(&self, i: &str) -> f64 {
        let r = self.related(i);
        if r.is_empty() {
            return 0.0;
        }
        let mut sum = 0.0;
        for j in &r {
            sum += self.p_ij(i, j) - self.p_not_ij(i, j);
        }
        sum / r.len() as f64
    }

    pub fn e_rel(&self, i: &str, alpha: f64) -> f64 {
        let r = self.related(i);
        if r.is_empty() {
            return 0.0;
        }
        let mut sum = 0.0;
        for j in &r {
            let p = self.p_ij(i, j);
            let pn = self.p_not_ij(i, j);
            sum += if p > pn {
                p / (pn + alpha) - 1.0
            } else if p == 0.0 {
                1.0 - pn / alpha
            } else {
                1.0 - pn / p
            };
        }
        sum / r.len() as f64
    }

    /// Q(j), ascending by user id.
    pub fn q_set(&self, j: &str) -> Vec<String> {
        self.users()
            .into_iter()
            .filter(|i| i != j && self.related(i).contains(&j.to_string()))
            .collect()
    }

    pub fn e_nb(&self, j: &str) -> f64 {
        let q = self.q_set(j);
        if q.is_empty() {
            return 0.0;
        }
        let mut sum = 0.0;
        for i in &q {
            sum += self.e_km(i);
        }
        sum / q.len() as f64
    }

    /// Weighted variant with w_i = |R(i)|.
    pub fn e_wnb(&self, j: &str) -> f64 {
        let q = self.q_set(j);
        if q.is_empty() {
            return 0.0;
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for i in &q {
            let w = self.related(i).len() as f64;
            num += w * self.e_km(i);
            den += w;
        }
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }
}

// ---------------------------------------------------------------------------
// Exhaustive active-set QP oracle (l <= ~8)
// ---------------------------------------------------------------------------

/// Maximize -1/2 b'Qb + sum(b) s.t. y'b = 0, 0 <= b <= c by enumerating all
/// 3^l bound patterns (each variable at 0, at C, or free) and solving the
/// equality-constrained stationarity system on the free block.
pub fn active_set_qp_oracle(q: &DMatrix<f64>, y: &[f64], c: f64) -> Option<(Vec<f64>, f64)> {
    let l = y.len();
    let objective = |beta: &[f64]| -> f64 {
        let mut quad = 0.0;
        for a in 0..l {
            for b in 0..l {
                quad += beta[a] * q[(a, b)] * beta[b];
            }
        }
        -0.5 * quad + beta.iter().sum::<f64>()
    };
    let feas_tol = 1e-9;
    let mut best: Option<(Vec<f64>, f64)> = None;
    let patterns = 3usize.pow(l as u32);
    for code in 0..patterns {
        let mut state = code;
        let mut beta = vec![0.0; l];
        let mut free = Vec::new();
        for i in 0..l {
            match state % 3 {
                0 => beta[i] = 0.0,
                1 => beta[i] = c,
                _ => free.push(i),
            }
            state /= 3;
        }
        let bound_dot: f64 = (0..l)
            .filter(|i| !free.contains(i))
            .map(|i| y[i] * beta[i])
            .sum();
        if free.is_empty() {
            if bound_dot.abs() > feas_tol {
                continue;
            }
        } else {
            let nf = free.len();
            let mut kkt = DMatrix::<f64>::zeros(nf + 1, nf + 1);
            let mut rhs = DMatrix::<f64>::zeros(nf + 1, 1);
            for (a, &fa) in free.iter().enumerate() {
                for (b, &fb) in free.iter().enumerate() {
                    kkt[(a, b)] = q[(fa, fb)];
                }
                kkt[(a, nf)] = y[fa];
                kkt[(nf, a)] = y[fa];
                let fixed_term: f64 = (0..l)
                    .filter(|i| !free.contains(i))
                    .map(|i| q[(fa, i)] * beta[i])
                    .sum();
                rhs[(a, 0)] = 1.0 - fixed_term;
            }
            rhs[(nf, 0)] = -bound_dot;
            let Some(sol) = kkt.lu().solve(&rhs) else {
                continue;
            };
            let mut ok = true;
            for (a, &fa) in free.iter().enumerate() {
                let v = sol[(a, 0)];
                if !(-feas_tol..=c + feas_tol).contains(&v) {
                    ok = false;
                    break;
                }
                beta[fa] = v.clamp(0.0, c);
            }
            if !ok {
                continue;
            }
            let eq: f64 = (0..l).map(|i| y[i] * beta[i]).sum();
            if eq.abs() > 1e-7 {
                continue;
            }
        }
        let obj = objective(&beta);
        if best.as_ref().map_or(true, |(_, b)| obj > *b) {
            best = Some((beta, obj));
        }
    }
    best
}

pub fn dual_objective(q: &DMatrix<f64>, beta: &[f64]) -> f64 {
    let l = beta.len();
    let mut quad = 0.0;
    for a in 0..l {
        for b in 0..l {
            quad += beta[a] * q[(a, b)] * beta[b];
        }
    }
    -0.5 * quad + beta.iter().sum::<f64>()
}

// ---------------------------------------------------------------------------
// Textbook soft-margin dual SVM (reference implementation)
// ---------------------------------------------------------------------------

pub struct ReferenceSvm {
    points: Vec<Vec<f64>>,
    labels: Vec<f64>,
    alpha: Vec<f64>,
    bias: f64,
    kernel: fn(&[f64], &[f64]) -> f64,
}

pub fn linear_kernel(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ReferenceSvm {
    /// Train the standard soft-margin dual by maximal-violating-pair ascent
    /// on alpha directly over the kernel matrix y_i y_j k(x_i, x_j).
    pub fn train(
        points: Vec<Vec<f64>>,
        labels: Vec<f64>,
        c: f64,
        kernel: fn(&[f64], &[f64]) -> f64,
        tol: f64,
    ) -> ReferenceSvm {
        let n = points.len();
        let k: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| kernel(&points[i], &points[j])).collect())
            .collect();
        let mut alpha = vec![0.0f64; n];
        // grad_i of W(a) = sum(a) - 1/2 sum a_i a_j y_i y_j K_ij
        let mut grad: Vec<f64> = vec![1.0; n];
        for _ in 0..5_000_000usize {
            let mut i_best: Option<(usize, f64)> = None;
            let mut j_best: Option<(usize, f64)> = None;
            for i in 0..n {
                let fi = labels[i] * grad[i];
                if ((labels[i] > 0.0 && alpha[i] < c) || (labels[i] < 0.0 && alpha[i] > 0.0))
                    && i_best.map_or(true, |(_, v)| fi > v)
                {
                    i_best = Some((i, fi));
                }
                if ((labels[i] > 0.0 && alpha[i] > 0.0) || (labels[i] < 0.0 && alpha[i] < c))
                    && j_best.map_or(true, |(_, v)| fi < v)
                {
                    j_best = Some((i, fi));
                }
            }
            let (Some((i, fi)), Some((j, fj))) = (i_best, j_best) else {
                break;
            };
            if fi - fj <= tol {
                break;
            }
            let a_coef = k[i][i] + k[j][j] - 2.0 * k[i][j];
            let t_max_i = if labels[i] > 0.0 { c - alpha[i] } else { alpha[i] };
            let t_max_j = if labels[j] > 0.0 { alpha[j] } else { c - alpha[j] };
            let t_box = t_max_i.min(t_max_j);
            let t = if a_coef > 0.0 {
                ((fi - fj) / a_coef).min(t_box)
            } else {
                t_box
            };
            if !(t > 0.0) {
                break;
            }
            alpha[i] += t * labels[i];
            alpha[j] -= t * labels[j];
            alpha[i] = alpha[i].clamp(0.0, c);
            alpha[j] = alpha[j].clamp(0.0, c);
            // direction is (y_i, -y_j) in (alpha_i, alpha_j)
            for r in 0..n {
                grad[r] -= t * labels[r] * (k[r][i] - k[r][j]);
            }
        }
        // bias: median over interior support vectors of y_i - f0(x_i)
        let f0 = |x: &[f64]| -> f64 {
            (0..n)
                .map(|i| alpha[i] * labels[i] * kernel(&points[i], x))
                .sum()
        };
        let eps = 1e-8 * c;
        let mut residuals: Vec<f64> = (0..n)
            .filter(|&i| alpha[i] > eps && alpha[i] < c - eps)
            .map(|i| labels[i] - f0(&points[i]))
            .collect();
        let bias = if residuals.is_empty() {
            0.0
        } else {
            residuals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let m = residuals.len();
            if m % 2 == 1 {
                residuals[m / 2]
            } else {
                0.5 * (residuals[m / 2 - 1] + residuals[m / 2])
            }
        };
        ReferenceSvm {
            points,
            labels,
            alpha,
            bias,
            kernel,
        }
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        (0..self.points.len())
            .map(|i| self.alpha[i] * self.labels[i] * (self.kernel)(&self.points[i], x))
            .sum::<f64>()
            + self.bias
    }
}

// ---------------------------------------------------------------------------
// Random corpus helper for metric tests
// ---------------------------------------------------------------------------

use rand::Rng;

pub fn random_records<R: Rng>(
    rng: &mut R,
    max_users: usize,
    max_msgs: usize,
    max_actions: usize,
) -> Vec<ActionRecord> {
    let n_users = rng.gen_range(2..=max_users);
    let n_msgs = rng.gen_range(1..=max_msgs);
    let n_actions = rng.gen_range(1..=max_actions);
    (0..n_actions)
        .map(|_| ActionRecord {
            user: format!("u{:02}", rng.gen_range(0..n_users)),
            message: format!("m{:02}", rng.gen_range(0..n_msgs)),
            time: rng.gen_range(0..100),
        })
        .collect()
}
