//! Brute-force oracles and random model builders shared by the integration
//! tests and the acceptance suite.
#![allow(dead_code)]

use std::f64::consts::PI;

use ndarray::{Array1, Array2, Array3, ArrayView1, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use srla_core::{HmmModel, IohmmModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_simplex(n: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    let raw: Array1<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s = raw.sum();
    raw / s
}

pub fn random_hmm(n: usize, m: usize, rng: &mut ChaCha8Rng) -> HmmModel {
    let initial = random_simplex(n, rng);
    let mut transition = Array2::zeros((n, n));
    for i in 0..n {
        transition.row_mut(i).assign(&random_simplex(n, rng));
    }
    let means = Array2::from_shape_fn((n, m), |_| rng.random_range(-2.0..2.0));
    let variances = Array2::from_shape_fn((n, m), |_| rng.random_range(0.3..2.0));
    HmmModel::new(initial, transition, means, variances).unwrap()
}

pub fn random_iohmm(n: usize, s: usize, m: usize, rng: &mut ChaCha8Rng) -> IohmmModel {
    let model = IohmmModel {
        initial: random_simplex(n, rng),
        transition_weights: Array3::from_shape_fn((n, n, s + 1), |_| rng.random_range(-1.5..1.5)),
        emission_weights: Array3::from_shape_fn((n, m, s + 1), |_| rng.random_range(-2.0..2.0)),
        variances: Array2::from_shape_fn((n, m), |_| rng.random_range(0.3..2.0)),
        input_center: Array1::from_shape_fn(s, |_| rng.random_range(-0.5..0.5)),
        input_scale: Array1::from_shape_fn(s, |_| rng.random_range(0.5..2.0)),
    };
    model.validate().unwrap();
    model
}

pub fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-scale..scale))
}

pub fn gauss(y: ArrayView1<f64>, mean: ArrayView1<f64>, var: ArrayView1<f64>) -> f64 {
    (0..y.len())
        .map(|d| -0.5 * ((2.0 * PI * var[d]).ln() + (y[d] - mean[d]).powi(2) / var[d]))
        .sum()
}

/// Visits every state path of length `t_len` over `n` states.
pub fn for_each_path(n: usize, t_len: usize, mut f: impl FnMut(&[usize])) {
    let mut path = vec![0usize; t_len];
    loop {
        f(&path);
        let mut i = t_len;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            path[i] += 1;
            if path[i] < n {
                break;
            }
            path[i] = 0;
        }
    }
}

pub fn hmm_log_joint(model: &HmmModel, y: ArrayView2<f64>, path: &[usize]) -> f64 {
    let mut lp = model.initial[path[0]].ln();
    for (t, &k) in path.iter().enumerate() {
        if t > 0 {
            lp += model.transition[[path[t - 1], k]].ln();
        }
        lp += gauss(y.row(t), model.means.row(k), model.variances.row(k));
    }
    lp
}

fn io_design(model: &IohmmModel, u: ArrayView1<f64>) -> Array1<f64> {
    let s = model.input_center.len();
    let mut x = Array1::ones(s + 1);
    for f in 0..s {
        x[f + 1] = (u[f] - model.input_center[f]) / model.input_scale[f];
    }
    x
}

fn io_log_trans(model: &IohmmModel, u: ArrayView1<f64>, from: usize, to: usize) -> f64 {
    let x = io_design(model, u);
    let n = model.initial.len();
    let logits: Vec<f64> = (0..n)
        .map(|j| (0..x.len()).map(|f| model.transition_weights[[from, j, f]] * x[f]).sum())
        .collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let norm = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits[to] - norm
}

pub fn iohmm_log_joint(model: &IohmmModel, u: ArrayView2<f64>, y: ArrayView2<f64>, path: &[usize]) -> f64 {
    let m = y.ncols();
    let mut lp = model.initial[path[0]].ln();
    for (t, &k) in path.iter().enumerate() {
        if t > 0 {
            lp += io_log_trans(model, u.row(t), path[t - 1], k);
        }
        let x = io_design(model, u.row(t));
        let mean: Array1<f64> = (0..m)
            .map(|o| (0..x.len()).map(|f| model.emission_weights[[k, o, f]] * x[f]).sum())
            .collect();
        lp += gauss(y.row(t), mean.view(), model.variances.row(k));
    }
    lp
}

/// Best path (first in lexicographic order on ties), its log joint, the
/// log evidence and the exact marginal posteriors.
pub struct Enumerated {
    pub best_path: Vec<usize>,
    pub best_log_prob: f64,
    pub log_evidence: f64,
    pub posteriors: Array2<f64>,
}

pub fn enumerate(n: usize, t_len: usize, log_joint: impl Fn(&[usize]) -> f64) -> Enumerated {
    let mut joints = Vec::new();
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for_each_path(n, t_len, |p| {
        let lp = log_joint(p);
        if lp > best.0 {
            best = (lp, p.to_vec());
        }
        joints.push((lp, p.to_vec()));
    });
    let max = best.0;
    let z: f64 = joints.iter().map(|(lp, _)| (lp - max).exp()).sum();
    let log_evidence = max + z.ln();
    let mut posteriors = Array2::zeros((t_len, n));
    for (lp, p) in &joints {
        let w = (lp - log_evidence).exp();
        for (t, &k) in p.iter().enumerate() {
            posteriors[[t, k]] += w;
        }
    }
    Enumerated {
        best_path: best.1,
        best_log_prob: best.0,
        log_evidence,
        posteriors,
    }
}

/// Optimal action values of the deterministic replacement chain with one
/// state per cycle `t = 1..=lifetime`, by backward value iteration.
/// Returns `[hold, replace]` per cycle.
pub fn replacement_values(lifetime: usize, replace: f64, failure: f64, gamma: f64) -> Vec<[f64; 2]> {
    let mut q = vec![[0.0; 2]; lifetime];
    let end = -(replace + failure) / lifetime as f64;
    q[lifetime - 1] = [end, end];
    for t in (1..lifetime).rev() {
        let next = q[t][0].max(q[t][1]);
        q[t - 1] = [gamma * next, -replace / t as f64];
    }
    q
}
