//! Similarity graph and Laplacian over labeled + unlabeled points.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphWeighting {
    /// exp(-||xi - xj||^2 / (2 b^2)), the standard manifold-smoothing weight.
    HeatKernel,
    /// F_ij = ||xi - xj||_2, kept for fidelity with the raw-distance variant.
    RawDistance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpec {
    pub weighting: GraphWeighting,
    /// Heat-kernel bandwidth; `None` selects the median pairwise distance.
    pub bandwidth: Option<f64>,
    /// Optional symmetrized kNN sparsification.
    pub knn: Option<usize>,
}

impl Default for GraphSpec {
    fn default() -> Self {
        GraphSpec {
            weighting: GraphWeighting::HeatKernel,
            bandwidth: None,
            knn: Some(10),
        }
    }
}

impl GraphSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some(b) = self.bandwidth {
            if !(b > 0.0) || !b.is_finite() {
                return Err(Error::InvalidArgument("bandwidth must be > 0".into()));
            }
        }
        if let Some(k) = self.knn {
            if k < 1 {
                return Err(Error::InvalidArgument("knn must be >= 1".into()));
            }
        }
        Ok(())
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Median of the strictly-positive pairwise distances; 1.0 when all points
/// coincide.
pub fn median_pairwise_distance(points: &[Vec<f64>]) -> f64 {
    let mut dists = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = euclidean(&points[i], &points[j]);
            if d > 0.0 {
                dists.push(d);
            }
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    dists[dists.len() / 2]
}

/// Build the graph Laplacian L = D - F over `points` per `spec`.
/// L is symmetric with zero row sums and is positive semidefinite.
pub fn build_graph(points: &[Vec<f64>], spec: &GraphSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let n = points.len();
    if n < 2 {
        return Err(Error::InvalidArgument("graph needs at least 2 points".into()));
    }
    for p in points {
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite feature entry".into()));
        }
    }

    let mut dist = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let d = euclidean(&points[i], &points[j]);
            dist[(i, j)] = d;
            dist[(j, i)] = d;
        }
    }

    let mut f = match spec.weighting {
        GraphWeighting::HeatKernel => {
            let b = spec
                .bandwidth
                .unwrap_or_else(|| median_pairwise_distance(points));
            let denom = 2.0 * b * b;
            DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    0.0
                } else {
                    (-dist[(i, j)] * dist[(i, j)] / denom).exp()
                }
            })
        }
        GraphWeighting::RawDistance => {
            DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { dist[(i, j)] })
        }
    };

    if let Some(k) = spec.knn {
        let k = k.min(n - 1);
        let mut keep = vec![vec![false; n]; n];
        for i in 0..n {
            let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            order.sort_by(|&a, &b| dist[(i, a)].partial_cmp(&dist[(i, b)]).unwrap());
            for &j in order.iter().take(k) {
                keep[i][j] = true;
                keep[j][i] = true;
            }
        }
        for i in 0..n {
            for j in 0..n {
                if !keep[i][j] {
                    f[(i, j)] = 0.0;
                }
            }
        }
    }

    let mut l = -f;
    for i in 0..n {
        let degree: f64 = -l.row(i).sum();
        l[(i, i)] = degree;
    }
    Ok(l)
}
