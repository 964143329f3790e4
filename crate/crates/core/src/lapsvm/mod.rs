//! Laplacian SVM: manifold-regularized training over labeled + unlabeled
//! feature vectors, and prediction.

mod graph;
mod qp;

pub use graph::{build_graph, euclidean, median_pairwise_distance, GraphSpec, GraphWeighting};
pub use qp::{
    assemble_qp, gram, recover_alpha, recover_bias, solve_qp, solve_qp_tol, solve_qp_with_stats,
    QpProblem, SolveStats, KKT_TOL, MAX_CONDITION, MAX_UPDATES, PSD_JITTER,
};

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "lapsvm-v1";

/// Paper-default hyperparameters.
pub const DEFAULT_C_L: f64 = 0.6;
pub const DEFAULT_C_R: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Linear,
    Gaussian { gamma: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        if let KernelSpec::Gaussian { gamma } = self {
            if !(*gamma > 0.0) {
                return Err(Error::InvalidArgument("gamma must be > 0".into()));
            }
        }
        Ok(())
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            KernelSpec::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            KernelSpec::Gaussian { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

/// l labeled points (labels in {+1, -1}) followed by u unlabeled points.
#[derive(Debug, Clone)]
pub struct TrainSet {
    pub labeled: Vec<(Vec<f64>, i8)>,
    pub unlabeled: Vec<Vec<f64>>,
}

impl TrainSet {
    pub fn new(labeled: Vec<(Vec<f64>, i8)>, unlabeled: Vec<Vec<f64>>) -> Result<Self> {
        if labeled.len() < 2 {
            return Err(Error::InvalidArgument(
                "need at least 2 labeled points".into(),
            ));
        }
        if !labeled.iter().any(|&(_, y)| y == 1) || !labeled.iter().any(|&(_, y)| y == -1) {
            return Err(Error::InvalidArgument(
                "labeled set must contain both classes".into(),
            ));
        }
        if labeled.iter().any(|&(_, y)| y != 1 && y != -1) {
            return Err(Error::InvalidArgument("labels must be +1 or -1".into()));
        }
        let dim = labeled[0].0.len();
        if labeled.iter().any(|(x, _)| x.len() != dim)
            || unlabeled.iter().any(|x| x.len() != dim)
        {
            return Err(Error::InvalidArgument(
                "inconsistent feature dimensions".into(),
            ));
        }
        Ok(TrainSet { labeled, unlabeled })
    }

    pub fn l(&self) -> usize {
        self.labeled.len()
    }

    pub fn u(&self) -> usize {
        self.unlabeled.len()
    }

    /// All points, labeled first.
    pub fn all_points(&self) -> Vec<Vec<f64>> {
        self.labeled
            .iter()
            .map(|(x, _)| x.clone())
            .chain(self.unlabeled.iter().cloned())
            .collect()
    }

    pub fn labels(&self) -> Vec<f64> {
        self.labeled.iter().map(|&(_, y)| y as f64).collect()
    }
}

/// Per-dimension standardization fitted on all l+u points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardization {
    pub fn fit(points: &[Vec<f64>]) -> Self {
        let dim = points.first().map_or(0, |p| p.len());
        let n = points.len() as f64;
        let mut mean = vec![0.0; dim];
        for p in points {
            for (m, v) in mean.iter_mut().zip(p) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; dim];
        for p in points {
            for (k, v) in p.iter().enumerate() {
                let d = v - mean[k];
                var[k] += d * d;
            }
        }
        let scale = var
            .iter()
            .map(|&v| {
                let s = (v / n).sqrt();
                if s < 1e-12 {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        Standardization { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Trained model: expansion coefficients over all l+u standardized training
/// points, bias, kernel and standardization parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LapSvmModel {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub train_points: Vec<Vec<f64>>,
    pub kernel: KernelSpec,
    pub standardization: Standardization,
    pub c_l: f64,
    pub c_r: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    #[serde(flatten)]
    model: LapSvmModel,
}

impl LapSvmModel {
    /// Decision value and label for a raw (unstandardized) point. A score
    /// of exactly 0 maps to -1.
    pub fn predict(&self, x: &[f64]) -> (f64, i8) {
        let xs = self.standardization.apply(x);
        let score: f64 = self
            .alpha
            .iter()
            .zip(&self.train_points)
            .map(|(&a, p)| a * self.kernel.eval(&xs, p))
            .sum::<f64>()
            + self.bias;
        (score, if score > 0.0 { 1 } else { -1 })
    }

    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            model: self.clone(),
        };
        serde_json::to_writer(out, &file)?;
        Ok(())
    }

    pub fn load<R: Read>(source: R) -> Result<Self> {
        let file: ModelFile = serde_json::from_reader(source)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!(
                "unsupported format tag `{}`, expected `{MODEL_FORMAT}`",
                file.format
            )));
        }
        Ok(file.model)
    }
}

/// Full training pass: standardize, build the graph Laplacian, assemble and
/// solve the dual QP, recover alpha and the bias.
pub fn train(
    train_set: &TrainSet,
    kernel: &KernelSpec,
    graph: &GraphSpec,
    c_l: f64,
    c_r: f64,
) -> Result<LapSvmModel> {
    kernel.validate()?;
    graph.validate()?;
    let std = Standardization::fit(&train_set.all_points());
    let std_set = TrainSet {
        labeled: train_set
            .labeled
            .iter()
            .map(|(x, y)| (std.apply(x), *y))
            .collect(),
        unlabeled: train_set.unlabeled.iter().map(|x| std.apply(x)).collect(),
    };
    let points = std_set.all_points();
    let laplacian = build_graph(&points, graph)?;
    let problem = assemble_qp(&std_set, kernel, &laplacian, c_l, c_r)?;
    let beta = solve_qp(&problem)?;
    let alpha = recover_alpha(&std_set, kernel, &laplacian, c_r, &beta)?;
    let labels = std_set.labels();
    let bias = recover_bias(&points, &labels, kernel, &alpha, &beta, c_l);
    Ok(LapSvmModel {
        alpha,
        bias,
        train_points: points,
        kernel: kernel.clone(),
        standardization: std,
        c_l,
        c_r,
    })
}
