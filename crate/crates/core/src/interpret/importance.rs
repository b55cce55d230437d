//! Per-state feature relevance from a multinomial logistic fit.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::numeric::substream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImportanceOptions {
    /// L2 penalty on the non-intercept coefficients.
    pub l2: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    /// Seed of the label permutation used as the no-signal baseline.
    pub seed: u64,
}

impl Default for ImportanceOptions {
    fn default() -> Self {
        ImportanceOptions {
            l2: 1e-3,
            iterations: 400,
            learning_rate: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceReport {
    /// Class labels in row order of `scores`.
    pub states: Vec<usize>,
    /// `classes x features`, coefficients on standardized features.
    pub scores: Array2<f64>,
    /// Largest `|score|` of the same fit on shuffled labels.
    pub permuted_max: f64,
    /// The real fit is not clearly stronger than the shuffled one.
    pub low_confidence: bool,
}

impl ImportanceReport {
    fn row(&self, state: usize) -> Option<usize> {
        self.states.iter().position(|&s| s == state)
    }

    pub fn n_features(&self) -> usize {
        self.scores.ncols()
    }

    pub fn max_abs(&self) -> f64 {
        self.scores.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Feature indices by descending signed score.
    pub fn ranking(&self, state: usize) -> Option<Vec<usize>> {
        let r = self.scores.row(self.row(state)?);
        Some(sorted_desc(|f| r[f], r.len()))
    }

    /// Feature indices by descending `|score|`.
    pub fn ranking_abs(&self, state: usize) -> Option<Vec<usize>> {
        let r = self.scores.row(self.row(state)?);
        Some(sorted_desc(|f| r[f].abs(), r.len()))
    }

    pub fn to_csv(&self, feature_names: &[String]) -> String {
        let mut out = String::from("state,feature,score,rank\n");
        for (row, &state) in self.states.iter().enumerate() {
            let ranking = self.ranking(state).expect("known state");
            for (rank, &f) in ranking.iter().enumerate() {
                let name = feature_names
                    .get(f)
                    .cloned()
                    .unwrap_or_else(|| format!("feature_{}", f + 1));
                writeln!(out, "{state},{name},{:?},{}", self.scores[[row, f]], rank + 1).unwrap();
            }
        }
        out
    }
}

fn sorted_desc(key: impl Fn(usize) -> f64, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
    idx
}

/// Fits `P(state | features)` and reads each state's coefficients as
/// feature relevance.
pub fn feature_importance(
    labels: &[usize],
    features: ArrayView2<f64>,
    opts: &ImportanceOptions,
) -> Result<ImportanceReport> {
    if labels.len() != features.nrows() {
        return Err(Error::dim("label count", features.nrows(), labels.len()));
    }
    let states: Vec<usize> = labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if states.len() < 2 {
        return Err(Error::InvalidArgument(
            "feature importance needs at least two distinct states".into(),
        ));
    }
    let x = standardized(features);
    let class_of = |l: usize| states.binary_search(&l).expect("collected");
    let y: Vec<usize> = labels.iter().map(|&l| class_of(l)).collect();
    let (scores, _) = fit_softmax(&x, &y, states.len(), opts);

    let mut shuffled = y.clone();
    shuffled.shuffle(&mut substream(opts.seed, "importance-permutation"));
    let (perm_scores, _) = fit_softmax(&x, &shuffled, states.len(), opts);
    let permuted_max = perm_scores.iter().fold(0.0, |m: f64, v| m.max(v.abs()));

    let mut report = ImportanceReport {
        states,
        scores,
        permuted_max,
        low_confidence: false,
    };
    report.low_confidence = report.max_abs() < 2.0 * permuted_max;
    if !report.scores.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("importance scores".into()));
    }
    Ok(report)
}

/// Zero-mean unit-variance columns; constant columns become zero.
fn standardized(features: ArrayView2<f64>) -> Array2<f64> {
    let mean = features
        .mean_axis(Axis(0))
        .unwrap_or_else(|| Array1::zeros(features.ncols()));
    let std = features.std_axis(Axis(0), 0.0);
    let mut x = features.to_owned();
    for (f, mut col) in x.axis_iter_mut(Axis(1)).enumerate() {
        if std[f] > 1e-12 {
            col.mapv_inplace(|v| (v - mean[f]) / std[f]);
        } else {
            col.fill(0.0);
        }
    }
    x
}

/// Full-batch Adam on the penalized mean negative log-likelihood. Returns
/// coefficients (`k x p`) and intercepts.
fn fit_softmax(x: &Array2<f64>, y: &[usize], k: usize, opts: &ImportanceOptions) -> (Array2<f64>, Array1<f64>) {
    let (n, p) = x.dim();
    let mut w = Array2::<f64>::zeros((k, p));
    let mut b = Array1::<f64>::zeros(k);
    let (mut mw, mut vw) = (w.clone(), w.clone());
    let (mut mb, mut vb) = (b.clone(), b.clone());
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut onehot = Array2::<f64>::zeros((n, k));
    for (i, &c) in y.iter().enumerate() {
        onehot[[i, c]] = 1.0;
    }
    for it in 1..=opts.iterations {
        let mut probs = x.dot(&w.t()) + &b;
        for mut row in probs.axis_iter_mut(Axis(0)) {
            let m = row.fold(f64::NEG_INFINITY, |a, &v| a.max(v));
            row.mapv_inplace(|v| (v - m).exp());
            let s = row.sum();
            row /= s;
        }
        let err = probs - &onehot;
        let gw = err.t().dot(x) / n as f64 + opts.l2 * &w;
        let gb = err.sum_axis(Axis(0)) / n as f64;
        let (c1, c2) = (1.0 - b1.powi(it as i32), 1.0 - b2.powi(it as i32));
        let lr = opts.learning_rate;
        ndarray::Zip::from(&mut w).and(&gw).and(&mut mw).and(&mut vw).for_each(|w, &g, m, v| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        });
        ndarray::Zip::from(&mut b).and(&gb).and(&mut mb).and(&mut vb).for_each(|w, &g, m, v| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        });
    }
    (w, b)
}
