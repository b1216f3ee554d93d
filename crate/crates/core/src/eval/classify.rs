//! Node classification over fixed embeddings.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

use super::EvalError;

/// Strength of the L2 penalty on the weights (the bias is not penalized).
pub const L2_PENALTY: f64 = 0.1;
const NEWTON_ITERATIONS: usize = 50;
const NEWTON_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Scores {
    pub macro_f1: f64,
    pub micro_f1: f64,
}

/// Binary L2-regularized logistic regression.
#[derive(Debug, Clone)]
pub struct LogisticRegression {
    weights: DVector<f64>,
    bias: f64,
}

impl LogisticRegression {
    pub fn fit(x: &DMatrix<f64>, y: &[bool], penalty: f64) -> Self {
        let (n, d) = x.shape();
        // augmented design with a trailing bias column
        let mut design = DMatrix::from_element(n, d + 1, 1.0);
        design.view_mut((0, 0), (n, d)).copy_from(x);
        let target = DVector::from_iterator(n, y.iter().map(|&b| if b { 1.0 } else { 0.0 }));
        let mut reg = DVector::from_element(d + 1, penalty);
        reg[d] = 0.0;
        let mut w = DVector::zeros(d + 1);
        for _ in 0..NEWTON_ITERATIONS {
            let prob = (&design * &w).map(sigmoid);
            let grad = design.transpose() * (&prob - &target) + reg.component_mul(&w);
            let curvature = prob.map(|p| (p * (1.0 - p)).max(1e-12));
            let mut hessian = design.transpose() * DMatrix::from_diagonal(&curvature) * &design;
            for i in 0..=d {
                hessian[(i, i)] += reg[i].max(1e-9);
            }
            let Some(chol) = hessian.cholesky() else {
                break;
            };
            let step = chol.solve(&grad);
            w -= &step;
            if step.amax() < NEWTON_TOLERANCE {
                break;
            }
        }
        LogisticRegression {
            weights: w.rows(0, d).into_owned(),
            bias: w[d],
        }
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias)
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One-vs-rest classifier over standardized features.
#[derive(Debug, Clone)]
pub struct OneVsRest {
    mean: Vec<f64>,
    scale: Vec<f64>,
    models: Vec<LogisticRegression>,
    single_label: bool,
}

impl OneVsRest {
    /// `labels[i]` is the label set of sample `i`, classes `0..num_classes`.
    pub fn fit(features: &[&[f64]], labels: &[&[usize]], num_classes: usize) -> Self {
        let n = features.len();
        let d = features.first().map_or(0, |f| f.len());
        let mut mean = vec![0.0; d];
        for f in features {
            for (m, v) in mean.iter_mut().zip(*f) {
                *m += v / n as f64;
            }
        }
        let mut scale = vec![0.0; d];
        for f in features {
            for ((s, v), m) in scale.iter_mut().zip(*f).zip(&mean) {
                *s += (v - m).powi(2) / n as f64;
            }
        }
        for s in &mut scale {
            *s = if *s > 1e-24 { 1.0 / s.sqrt() } else { 1.0 };
        }
        let x = DMatrix::from_fn(n, d, |i, j| (features[i][j] - mean[j]) * scale[j]);
        let models = (0..num_classes)
            .map(|c| {
                let y: Vec<bool> = labels.iter().map(|l| l.contains(&c)).collect();
                LogisticRegression::fit(&x, &y, L2_PENALTY)
            })
            .collect();
        OneVsRest {
            mean,
            scale,
            models,
            single_label: labels.iter().all(|l| l.len() == 1),
        }
    }

    /// Argmax class for single-label training data, otherwise every class
    /// whose probability reaches 0.5.
    pub fn predict(&self, features: &[f64]) -> Vec<usize> {
        let z: Vec<f64> = features
            .iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) * s)
            .collect();
        let probs: Vec<f64> = self.models.iter().map(|m| m.probability(&z)).collect();
        if self.single_label {
            let best = (0..probs.len()).fold(0, |b, c| if probs[c] > probs[b] { c } else { b });
            vec![best]
        } else {
            (0..probs.len()).filter(|&c| probs[c] >= 0.5).collect()
        }
    }
}

/// Macro and micro F1 of predicted against true label sets.
pub fn f1_scores(truth: &[&[usize]], predicted: &[Vec<usize>], num_classes: usize) -> F1Scores {
    let mut tp = vec![0usize; num_classes];
    let mut fp = vec![0usize; num_classes];
    let mut fn_ = vec![0usize; num_classes];
    for (t, p) in truth.iter().zip(predicted) {
        for c in 0..num_classes {
            match (t.contains(&c), p.contains(&c)) {
                (true, true) => tp[c] += 1,
                (false, true) => fp[c] += 1,
                (true, false) => fn_[c] += 1,
                (false, false) => {}
            }
        }
    }
    let f1 = |tp: usize, fp: usize, fn_: usize| {
        let denom = 2 * tp + fp + fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    };
    let macro_f1 = (0..num_classes)
        .map(|c| f1(tp[c], fp[c], fn_[c]))
        .sum::<f64>()
        / num_classes.max(1) as f64;
    let micro_f1 = f1(tp.iter().sum(), fp.iter().sum(), fn_.iter().sum());
    F1Scores { macro_f1, micro_f1 }
}

/// Mean F1 over `repetitions` random train/test splits at `ratio`.
pub fn classify<R: Rng + ?Sized>(
    features: &[Vec<f64>],
    labels: &[Vec<usize>],
    num_classes: usize,
    ratio: f64,
    repetitions: usize,
    rng: &mut R,
) -> Result<F1Scores, EvalError> {
    if features.len() != labels.len() {
        return Err(EvalError::Mismatch(format!(
            "{} feature rows for {} labels",
            features.len(),
            labels.len()
        )));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(EvalError::InvalidRatio(ratio));
    }
    if repetitions == 0 {
        return Err(EvalError::Mismatch(
            "at least one repetition is required".into(),
        ));
    }
    let n = features.len();
    let n_train = ((n as f64 * ratio).round() as usize).clamp(1, n.saturating_sub(1));
    if n < 2 || n_train == 0 {
        return Err(EvalError::TooFewSamples(n));
    }
    let present: Vec<usize> = (0..num_classes)
        .filter(|c| labels.iter().any(|l| l.contains(c)))
        .collect();
    let mut total = F1Scores {
        macro_f1: 0.0,
        micro_f1: 0.0,
    };
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..repetitions {
        let mut attempt = 0;
        loop {
            order.shuffle(rng);
            let missing = present
                .iter()
                .find(|&&c| !order[..n_train].iter().any(|&i| labels[i].contains(&c)));
            match missing {
                None => break,
                Some(&c) if attempt == 1 => return Err(EvalError::LabelMissing(c)),
                Some(_) => attempt += 1,
            }
        }
        let (train, test) = order.split_at(n_train);
        let xs: Vec<&[f64]> = train.iter().map(|&i| features[i].as_slice()).collect();
        let ys: Vec<&[usize]> = train.iter().map(|&i| labels[i].as_slice()).collect();
        let model = OneVsRest::fit(&xs, &ys, num_classes);
        let predicted: Vec<Vec<usize>> =
            test.iter().map(|&i| model.predict(&features[i])).collect();
        let truth: Vec<&[usize]> = test.iter().map(|&i| labels[i].as_slice()).collect();
        let s = f1_scores(&truth, &predicted, num_classes);
        total.macro_f1 += s.macro_f1;
        total.micro_f1 += s.micro_f1;
    }
    Ok(F1Scores {
        macro_f1: total.macro_f1 / repetitions as f64,
        micro_f1: total.micro_f1 / repetitions as f64,
    })
}
