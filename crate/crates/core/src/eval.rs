//! Train/test evaluation: splits, unlabeled masking, F1 reporting and the
//! unlabeled-fraction sweep.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lapsvm::{self, GraphSpec, KernelSpec, LapSvmModel, TrainSet};
use crate::timedecay::FeatureVector;

/// Precision/recall/F1 on the positive (PSM) class. F1 is 0 when
/// precision + recall is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Metrics {
    pub fn from_predictions(pairs: &[(i8, i8)]) -> Metrics {
        let mut m = Metrics {
            tp: 0,
            fp: 0,
            fn_: 0,
            tn: 0,
        };
        for &(actual, predicted) in pairs {
            match (actual > 0, predicted > 0) {
                (true, true) => m.tp += 1,
                (false, true) => m.fp += 1,
                (true, false) => m.fn_ += 1,
                (false, false) => m.tn += 1,
            }
        }
        m
    }

    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.tp + self.fn_ == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        }
    }

    pub fn f1(&self) -> f64 {
        let p = self.precision();
        let r = self.recall();
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

/// One labeled example: feature vector plus ground-truth PSM flag.
#[derive(Debug, Clone)]
pub struct LabeledExample {
    pub user: String,
    pub xi: Vec<f64>,
    pub psm: bool,
}

pub fn join_features_with_truth(
    features: &[FeatureVector],
    truth: &crate::synth::TruthMap,
) -> Result<Vec<LabeledExample>> {
    features
        .iter()
        .map(|f| {
            let psm = truth.get(&f.user).copied().ok_or_else(|| {
                Error::InvalidArgument(format!("user {} missing from truth file", f.user))
            })?;
            Ok(LabeledExample {
                user: f.user.clone(),
                xi: f.xi.to_vec(),
                psm,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct EvalParams {
    pub kernel: KernelSpec,
    pub graph: GraphSpec,
    pub c_l: f64,
    pub c_r: f64,
    /// Fraction of examples placed in the training split.
    pub train_fraction: f64,
    /// Fraction of the training split masked as unlabeled.
    pub unlabeled_fraction: f64,
    pub seed: u64,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            kernel: KernelSpec::Linear,
            graph: GraphSpec::default(),
            c_l: lapsvm::DEFAULT_C_L,
            c_r: lapsvm::DEFAULT_C_R,
            train_fraction: 0.5,
            unlabeled_fraction: 0.1,
            seed: 0,
        }
    }
}

/// A deterministic shuffled split plus prefix masking of unlabeled points.
/// Masking larger fractions extends the masked set (prefix rule), so sweep
/// points are nested.
pub struct Split {
    pub train_set: TrainSet,
    pub test: Vec<LabeledExample>,
}

pub fn split_and_mask(examples: &[LabeledExample], params: &EvalParams) -> Result<Split> {
    if !(params.train_fraction > 0.0 && params.train_fraction <= 1.0) {
        return Err(Error::InvalidArgument(
            "train fraction must lie in (0,1]".into(),
        ));
    }
    if !(0.0..=1.0).contains(&params.unlabeled_fraction) {
        return Err(Error::InvalidArgument(
            "unlabeled fraction must lie in [0,1]".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    // Domain separation from other seeded components (notably the corpus
    // generator): with the same seed both would otherwise emit the same
    // stream, and the first shuffle here would replay the generator's
    // PSM-planting permutation, masking exactly the positive class.
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut rng);
    let n_train = ((examples.len() as f64) * params.train_fraction).round() as usize;
    let n_train = n_train.clamp(1, examples.len());
    let (train_idx, test_idx) = order.split_at(n_train);
    let n_masked = ((n_train as f64) * params.unlabeled_fraction).floor() as usize;

    let mut labeled = Vec::new();
    let mut unlabeled = Vec::new();
    for (pos, &i) in train_idx.iter().enumerate() {
        let ex = &examples[i];
        if pos < n_masked {
            unlabeled.push(ex.xi.clone());
        } else {
            labeled.push((ex.xi.clone(), if ex.psm { 1 } else { -1 }));
        }
    }
    let test = test_idx.iter().map(|&i| examples[i].clone()).collect();
    Ok(Split {
        train_set: TrainSet::new(labeled, unlabeled)?,
        test,
    })
}

pub struct Evaluation {
    pub metrics: Metrics,
    pub model: LapSvmModel,
    pub l: usize,
    pub u: usize,
    pub n_test: usize,
}

/// Split, mask, train and score the test split.
pub fn evaluate(examples: &[LabeledExample], params: &EvalParams) -> Result<Evaluation> {
    let split = split_and_mask(examples, params)?;
    if split.test.is_empty() {
        return Err(Error::InvalidArgument("empty test set".into()));
    }
    let model = lapsvm::train(
        &split.train_set,
        &params.kernel,
        &params.graph,
        params.c_l,
        params.c_r,
    )?;
    let pairs: Vec<(i8, i8)> = split
        .test
        .iter()
        .map(|ex| {
            let (_, label) = model.predict(&ex.xi);
            (if ex.psm { 1 } else { -1 }, label)
        })
        .collect();
    Ok(Evaluation {
        metrics: Metrics::from_predictions(&pairs),
        l: split.train_set.l(),
        u: split.train_set.u(),
        n_test: split.test.len(),
        model,
    })
}

/// Repeat `evaluate` per unlabeled fraction with the same master seed.
pub fn sweep(
    examples: &[LabeledExample],
    params: &EvalParams,
    fractions: &[f64],
) -> Result<Vec<(f64, Metrics)>> {
    let mut out = Vec::with_capacity(fractions.len());
    for &frac in fractions {
        let p = EvalParams {
            unlabeled_fraction: frac,
            ..params.clone()
        };
        let ev = evaluate(examples, &p)?;
        out.push((frac, ev.metrics));
    }
    Ok(out)
}

/// Default sweep grid: 10%..50% unlabeled.
pub const DEFAULT_SWEEP: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
