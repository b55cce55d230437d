//! Input-output HMM: transitions and emission means conditioned on an
//! operating-condition input vector.
//!
//! Transitions out of each state are a multinomial logistic map of
//! `[1; z_t]`, emissions are linear-Gaussian in `[1; z_t]` with a diagonal,
//! input-independent covariance. `z_t` is the input standardised by
//! statistics stored in the model, which keeps the logistic M-step well
//! conditioned whatever the raw scale of the settings.

use std::collections::HashMap;

use nalgebra::DMatrix;
use ndarray::{s, Array1, Array2, Array3, ArrayView1, ArrayView2, Axis};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::Persist;
use crate::error::{Error, Result};
use crate::markov::{
    self, check_distribution, check_training_set, cluster_moments, jittered_uniform,
    best_of, FitOptions, Fitted, HmmModel, LatentModel, PosteriorTrack, VARIANCE_FLOOR,
};
use crate::numeric::{diag_gaussian_log_pdf, log_sum_exp, softmax_in_place, substream};

/// Gradient-ascent budget of the logistic M-step.
pub const LOGISTIC_STEPS: usize = 50;
pub const LOGISTIC_STEP_SIZE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IohmmModel {
    pub initial: Array1<f64>,
    /// `[[from, to, feature]]` logistic weights; feature 0 is the bias.
    pub transition_weights: Array3<f64>,
    /// `[[state, output, feature]]` emission-mean regression weights;
    /// feature 0 is the intercept.
    pub emission_weights: Array3<f64>,
    /// `N x M` emission variances.
    pub variances: Array2<f64>,
    pub input_center: Array1<f64>,
    pub input_scale: Array1<f64>,
}

impl Persist for IohmmModel {
    const KIND: &'static str = "iohmm";
}

impl IohmmModel {
    pub fn validate(&self) -> Result<()> {
        let n = self.initial.len();
        let s = self.input_center.len();
        if n == 0 {
            return Err(Error::InvalidArgument("model has no states".into()));
        }
        check_distribution(self.initial.view(), "initial distribution")?;
        if self.transition_weights.dim() != (n, n, s + 1) {
            return Err(Error::dim("transition weights", n, self.transition_weights.dim().0));
        }
        let (en, m, ef) = self.emission_weights.dim();
        if en != n || ef != s + 1 || self.variances.dim() != (n, m) || self.input_scale.len() != s {
            return Err(Error::InvalidArgument("emission shapes disagree".into()));
        }
        if self.variances.iter().any(|v| !(*v >= VARIANCE_FLOOR * (1.0 - 1e-12))) {
            return Err(Error::InvalidArgument(format!(
                "emission variance below floor {VARIANCE_FLOOR}"
            )));
        }
        if self.input_scale.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidArgument("input scale must be positive".into()));
        }
        Ok(())
    }

    /// The plain HMM embedded with zero input weights; it behaves
    /// identically to `hmm` for any input sequence.
    pub fn from_hmm(hmm: &HmmModel, n_inputs: usize) -> IohmmModel {
        let n = hmm.n_states();
        let m = hmm.n_outputs();
        let mut transition_weights = Array3::zeros((n, n, n_inputs + 1));
        let mut emission_weights = Array3::zeros((n, m, n_inputs + 1));
        for i in 0..n {
            for j in 0..n {
                transition_weights[[i, j, 0]] = hmm.transition[[i, j]].ln();
            }
            for o in 0..m {
                emission_weights[[i, o, 0]] = hmm.means[[i, o]];
            }
        }
        IohmmModel {
            initial: hmm.initial.clone(),
            transition_weights,
            emission_weights,
            variances: hmm.variances.clone(),
            input_center: Array1::zeros(n_inputs),
            input_scale: Array1::ones(n_inputs),
        }
    }

    /// `[1; (u - center) / scale]`.
    pub fn design(&self, input: ArrayView1<f64>) -> Array1<f64> {
        let s = self.input_center.len();
        let mut x = Array1::ones(s + 1);
        for f in 0..s {
            x[f + 1] = (input[f] - self.input_center[f]) / self.input_scale[f];
        }
        x
    }

    /// Emission mean of `state` under `input`.
    pub fn emission_mean(&self, state: usize, input: ArrayView1<f64>) -> Array1<f64> {
        self.emission_weights
            .index_axis(Axis(0), state)
            .dot(&self.design(input))
    }

    /// Row-stochastic transition matrix under `input`.
    pub fn transition_matrix(&self, input: ArrayView1<f64>) -> Array2<f64> {
        self.log_transition(input).mapv(f64::exp)
    }
}

fn log_softmax_rows(weights: &Array3<f64>, x: &Array1<f64>) -> Array2<f64> {
    let n = weights.dim().0;
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        let logits: Vec<f64> = (0..n)
            .map(|j| weights.slice(s![i, j, ..]).dot(x))
            .collect();
        let norm = log_sum_exp(&logits);
        for j in 0..n {
            out[[i, j]] = logits[j] - norm;
        }
    }
    out
}

impl LatentModel for IohmmModel {
    fn n_states(&self) -> usize {
        self.initial.len()
    }

    fn n_inputs(&self) -> usize {
        self.input_center.len()
    }

    fn n_outputs(&self) -> usize {
        self.variances.ncols()
    }

    fn log_initial(&self) -> Array1<f64> {
        self.initial.mapv(f64::ln)
    }

    fn log_transition(&self, input: ArrayView1<f64>) -> Array2<f64> {
        log_softmax_rows(&self.transition_weights, &self.design(input))
    }

    fn input_dependent(&self) -> bool {
        true
    }

    fn emission_log_pdf(&self, state: usize, input: ArrayView1<f64>, output: ArrayView1<f64>) -> f64 {
        let mean = self.emission_mean(state, input);
        diag_gaussian_log_pdf(output, mean.view(), self.variances.row(state))
    }

    fn sample_output(&self, state: usize, input: ArrayView1<f64>, rng: &mut dyn RngCore) -> Vec<f64> {
        let mean = self.emission_mean(state, input);
        mean.iter()
            .zip(self.variances.row(state))
            .map(|(mu, v)| {
                let z: f64 = StandardNormal.sample(rng);
                mu + v.sqrt() * z
            })
            .collect()
    }
}

/// `gamma_t(i) = P(x_t = i | U, Y, lambda)`.
pub fn io_posterior(
    model: &IohmmModel,
    inputs: ArrayView2<f64>,
    outputs: ArrayView2<f64>,
) -> Result<PosteriorTrack> {
    markov::smooth(model, inputs, outputs)
}

/// Jointly most probable path given inputs and outputs, with its log probability.
pub fn io_viterbi(
    model: &IohmmModel,
    inputs: ArrayView2<f64>,
    outputs: ArrayView2<f64>,
) -> Result<(Vec<usize>, f64)> {
    markov::decode(model, inputs, outputs)
}

fn check_pairs(inputs: &[ArrayView2<f64>], outputs: &[ArrayView2<f64>], n_states: usize) -> Result<usize> {
    if inputs.len() != outputs.len() {
        return Err(Error::dim("paired sequence count", outputs.len(), inputs.len()));
    }
    check_training_set(outputs, n_states)?;
    let s = inputs.first().map_or(0, |u| u.ncols());
    for (u, y) in inputs.iter().zip(outputs) {
        if u.nrows() != y.nrows() {
            return Err(Error::dim("paired sequence length", y.nrows(), u.nrows()));
        }
        if u.ncols() != s {
            return Err(Error::dim("input width", s, u.ncols()));
        }
    }
    Ok(s)
}

/// Minimum-norm solution of the normal equations `a x = b`.
fn solve_normal(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (p, q) = (a.nrows(), b.ncols());
    let am = DMatrix::from_fn(p, p, |i, j| a[[i, j]]);
    let bm = DMatrix::from_fn(p, q, |i, j| b[[i, j]]);
    let svd = am.svd(true, true);
    let eps = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    let x = svd.solve(&bm, eps).expect("u and v were computed");
    Array2::from_shape_fn((p, q), |(i, j)| x[(i, j)])
}

fn input_standardisation(inputs: &[ArrayView2<f64>], s: usize) -> (Array1<f64>, Array1<f64>) {
    if s == 0 {
        return (Array1::zeros(0), Array1::ones(0));
    }
    let pooled = ndarray::concatenate(Axis(0), inputs).expect("shared width");
    let center = pooled.mean_axis(Axis(0)).expect("non-empty");
    let scale = pooled
        .std_axis(Axis(0), 0.0)
        .mapv(|v| if v > 1e-12 { v } else { 1.0 });
    (center, scale)
}

/// Weighted least squares of outputs on designs; returns `(weights M x P, variances M)`.
fn weighted_regression(designs: &Array2<f64>, outputs: ArrayView2<f64>, weights: &[f64]) -> (Array2<f64>, Array1<f64>) {
    let p = designs.ncols();
    let m = outputs.ncols();
    let mut xtx = Array2::<f64>::zeros((p, p));
    let mut xty = Array2::<f64>::zeros((p, m));
    let mut wsum = 0.0;
    for (t, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let x = designs.row(t);
        let y = outputs.row(t);
        for a in 0..p {
            for b in 0..p {
                xtx[[a, b]] += w * x[a] * x[b];
            }
            for o in 0..m {
                xty[[a, o]] += w * x[a] * y[o];
            }
        }
        wsum += w;
    }
    let beta = solve_normal(&xtx, &xty);
    let mut var = Array1::<f64>::zeros(m);
    for (t, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let pred = designs.row(t).dot(&beta);
        for o in 0..m {
            let r = outputs[[t, o]] - pred[o];
            var[o] += w * r * r;
        }
    }
    var.mapv_inplace(|v| (v / wsum.max(f64::MIN_POSITIVE)).max(VARIANCE_FLOOR));
    (beta.reversed_axes().as_standard_layout().to_owned(), var)
}

fn initial_iohmm(
    inputs: &[ArrayView2<f64>],
    outputs: &[ArrayView2<f64>],
    n_states: usize,
    seed: u64,
) -> IohmmModel {
    let s = inputs.first().map_or(0, |u| u.ncols());
    let (input_center, input_scale) = input_standardisation(inputs, s);
    let mut shell = IohmmModel {
        initial: Array1::from_elem(n_states, 1.0 / n_states as f64),
        transition_weights: Array3::zeros((n_states, n_states, s + 1)),
        emission_weights: Array3::zeros((n_states, 1, s + 1)),
        variances: Array2::ones((n_states, 1)),
        input_center,
        input_scale,
    };
    let pooled_u = ndarray::concatenate(Axis(0), inputs).expect("shared width");
    let pooled_y = ndarray::concatenate(Axis(0), outputs).expect("shared width");
    let designs = Array2::from_shape_fn((pooled_u.nrows(), s + 1), |(t, f)| {
        if f == 0 { 1.0 } else { (pooled_u[[t, f - 1]] - shell.input_center[f - 1]) / shell.input_scale[f - 1] }
    });
    let m = pooled_y.ncols();

    // cluster what the inputs cannot explain, so states track health rather
    // than operating condition
    let ones = vec![1.0; pooled_y.nrows()];
    let (global_beta, global_var) = weighted_regression(&designs, pooled_y.view(), &ones);
    let residuals = &pooled_y - &designs.dot(&global_beta.t());
    let mut rng = substream(seed, "iohmm-init");
    let labels = crate::markov::kmeans_labels(residuals.view(), n_states, &mut rng);
    let (res_means, _) = cluster_moments(residuals.view(), &labels, n_states);

    let mut emission_weights = Array3::zeros((n_states, m, s + 1));
    let mut variances = Array2::zeros((n_states, m));
    for k in 0..n_states {
        let w: Vec<f64> = labels.iter().map(|&l| if l == k { 1.0 } else { 0.0 }).collect();
        let count = w.iter().sum::<f64>();
        if count > (s + 2) as f64 {
            let (beta, var) = weighted_regression(&designs, pooled_y.view(), &w);
            emission_weights.index_axis_mut(Axis(0), k).assign(&beta);
            variances.row_mut(k).assign(&var);
        } else {
            let mut beta = global_beta.clone();
            for o in 0..m {
                beta[[o, 0]] += res_means[[k, o]];
            }
            emission_weights.index_axis_mut(Axis(0), k).assign(&beta);
            variances.row_mut(k).assign(&global_var);
        }
    }
    shell.emission_weights = emission_weights;
    shell.variances = variances;
    shell.initial = jittered_uniform(n_states, &mut rng);
    for i in 0..n_states {
        let row = jittered_uniform(n_states, &mut rng);
        for j in 0..n_states {
            shell.transition_weights[[i, j, 0]] = row[j].ln();
        }
    }
    shell
}

/// Expected transition counts grouped by distinct design vector.
#[derive(Default)]
struct TransitionCounts {
    index: HashMap<Vec<u64>, usize>,
    designs: Vec<Array1<f64>>,
    counts: Vec<Array2<f64>>,
}

impl TransitionCounts {
    fn add(&mut self, x: Array1<f64>, xi: &Array2<f64>) {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        match self.index.get(&key) {
            Some(&i) => self.counts[i] += xi,
            None => {
                self.index.insert(key, self.designs.len());
                self.designs.push(x);
                self.counts.push(xi.clone());
            }
        }
    }

    fn merge(&mut self, other: TransitionCounts) {
        for (x, c) in other.designs.into_iter().zip(other.counts) {
            self.add(x, &c);
        }
    }
}

struct IoStats {
    init: Array1<f64>,
    trans: TransitionCounts,
    /// Per-state `X' G X`.
    xtx: Array3<f64>,
    /// Per-state `X' G Y`, `[[state, feature, output]]`.
    xty: Array3<f64>,
    /// Per-state `sum g y^2`.
    yy: Array2<f64>,
    occupancy: Array1<f64>,
    log_likelihood: f64,
}

impl IoStats {
    fn zeros(n: usize, p: usize, m: usize) -> IoStats {
        IoStats {
            init: Array1::zeros(n),
            trans: TransitionCounts::default(),
            xtx: Array3::zeros((n, p, p)),
            xty: Array3::zeros((n, p, m)),
            yy: Array2::zeros((n, m)),
            occupancy: Array1::zeros(n),
            log_likelihood: 0.0,
        }
    }

    fn merge(&mut self, o: IoStats) {
        self.init += &o.init;
        self.trans.merge(o.trans);
        self.xtx += &o.xtx;
        self.xty += &o.xty;
        self.yy += &o.yy;
        self.occupancy += &o.occupancy;
        self.log_likelihood += o.log_likelihood;
    }
}

fn io_expected_stats(model: &IohmmModel, u: ArrayView2<f64>, y: ArrayView2<f64>) -> IoStats {
    let n = model.n_states();
    let p = model.n_inputs() + 1;
    let m = model.n_outputs();
    let lattice = model.lattice(u, y).expect("training sequences were validated");
    let fb = lattice.smooth();
    let mut st = IoStats::zeros(n, p, m);
    st.log_likelihood = fb.log_likelihood;
    st.init.assign(&fb.gamma.row(0));
    let mut xi = Array2::zeros((n, n));
    for t in 0..y.nrows() {
        let x = model.design(u.row(t));
        if t > 0 {
            lattice.xi_at(&fb, t, &mut xi);
            st.trans.add(x.clone(), &xi);
        }
        for k in 0..n {
            let g = fb.gamma[[t, k]];
            if g == 0.0 {
                continue;
            }
            st.occupancy[k] += g;
            for a in 0..p {
                for b in 0..p {
                    st.xtx[[k, a, b]] += g * x[a] * x[b];
                }
                for o in 0..m {
                    st.xty[[k, a, o]] += g * x[a] * y[[t, o]];
                }
            }
            for o in 0..m {
                st.yy[[k, o]] += g * y[[t, o]] * y[[t, o]];
            }
        }
    }
    st
}

/// Mean expected log-likelihood of origin `from`'s transition model.
fn logistic_objective(w: &Array2<f64>, designs: &[Array1<f64>], counts: &[Array2<f64>], from: usize, total: f64) -> f64 {
    let n = w.nrows();
    let mut acc = 0.0;
    for (x, c) in designs.iter().zip(counts) {
        let logits: Vec<f64> = (0..n).map(|j| w.row(j).dot(x)).collect();
        let norm = log_sum_exp(&logits);
        for j in 0..n {
            let cij = c[[from, j]];
            if cij > 0.0 {
                acc += cij * (logits[j] - norm);
            }
        }
    }
    acc / total
}

/// Fixed-budget gradient ascent on one origin state's logistic model, with
/// step halving whenever a step would lower the objective.
fn fit_transition_row(w: &mut Array2<f64>, designs: &[Array1<f64>], counts: &[Array2<f64>], from: usize) {
    let n = w.nrows();
    let total: f64 = counts.iter().map(|c| c.row(from).sum()).sum();
    if total <= 1e-10 {
        return;
    }
    let mut current = logistic_objective(w, designs, counts, from, total);
    let mut step = LOGISTIC_STEP_SIZE;
    let mut probs = vec![0.0; n];
    for _ in 0..LOGISTIC_STEPS {
        let mut grad = Array2::<f64>::zeros(w.dim());
        for (x, c) in designs.iter().zip(counts) {
            for j in 0..n {
                probs[j] = w.row(j).dot(x);
            }
            softmax_in_place(&mut probs);
            let row_total = c.row(from).sum();
            for j in 0..n {
                let r = c[[from, j]] - row_total * probs[j];
                if r != 0.0 {
                    grad.row_mut(j).scaled_add(r / total, x);
                }
            }
        }
        loop {
            let candidate = &*w + &(&grad * step);
            let value = logistic_objective(&candidate, designs, counts, from, total);
            if value >= current {
                *w = candidate;
                current = value;
                break;
            }
            step *= 0.5;
            if step < 1e-8 {
                return;
            }
        }
    }
}

fn io_maximise(prev: &IohmmModel, st: &IoStats, n_sequences: usize) -> IohmmModel {
    let n = prev.n_states();
    let m = prev.n_outputs();
    let mut next = prev.clone();
    next.initial = &st.init / n_sequences as f64;

    for k in 0..n {
        let occ = st.occupancy[k];
        if occ <= 1e-10 {
            continue;
        }
        let xtx = st.xtx.index_axis(Axis(0), k).to_owned();
        let xty = st.xty.index_axis(Axis(0), k).to_owned();
        let beta = solve_normal(&xtx, &xty); // P x M
        for o in 0..m {
            let b = beta.column(o);
            let fitted = b.dot(&xty.column(o));
            let quad = b.dot(&xtx.dot(&b));
            // sum g (y - b.x)^2 = yy - 2 b.xty + b' xtx b
            let rss = st.yy[[k, o]] - 2.0 * fitted + quad;
            next.variances[[k, o]] = (rss / occ).max(VARIANCE_FLOOR);
            for f in 0..beta.nrows() {
                next.emission_weights[[k, o, f]] = b[f];
            }
        }
    }

    let designs = &st.trans.designs;
    let counts = &st.trans.counts;
    let rows: Vec<(usize, Array2<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut w = prev.transition_weights.index_axis(Axis(0), i).to_owned();
            // rows pinned at -inf (from an embedded HMM) stay there
            w.mapv_inplace(|v| if v.is_finite() { v } else { -1e300 });
            fit_transition_row(&mut w, designs, counts, i);
            (i, w)
        })
        .collect();
    for (i, w) in rows {
        next.transition_weights.index_axis_mut(Axis(0), i).assign(&w);
    }
    next
}

/// EM for the input-output HMM over paired input/output sequences.
pub fn fit_iohmm(
    inputs: &[ArrayView2<f64>],
    outputs: &[ArrayView2<f64>],
    n_states: usize,
    opts: &FitOptions,
) -> Result<Fitted<IohmmModel>> {
    check_pairs(inputs, outputs, n_states)?;
    best_of(opts, |seed| {
        fit_iohmm_from(initial_iohmm(inputs, outputs, n_states, seed), inputs, outputs, opts)
    })
}

/// EM starting from a given model.
pub fn fit_iohmm_from(
    start: IohmmModel,
    inputs: &[ArrayView2<f64>],
    outputs: &[ArrayView2<f64>],
    opts: &FitOptions,
) -> Result<Fitted<IohmmModel>> {
    let s = check_pairs(inputs, outputs, start.n_states())?;
    if s != start.n_inputs() {
        return Err(Error::dim("input width", start.n_inputs(), s));
    }
    let m = outputs[0].ncols();
    if m != start.n_outputs() {
        return Err(Error::dim("observation width", start.n_outputs(), m));
    }
    let (n, p) = (start.n_states(), s + 1);
    let mut model = start;
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iter.max(1) {
        let per_seq: Vec<IoStats> = inputs
            .par_iter()
            .zip(outputs.par_iter())
            .map(|(u, y)| io_expected_stats(&model, *u, *y))
            .collect();
        let mut st = IoStats::zeros(n, p, m);
        for x in per_seq {
            st.merge(x);
        }
        if !st.log_likelihood.is_finite() {
            return Err(Error::NonFinite("IOHMM log-likelihood".into()));
        }
        if let Some(&prev) = history.last() {
            if st.log_likelihood - prev < opts.tol {
                history.push(st.log_likelihood);
                converged = true;
                break;
            }
        }
        history.push(st.log_likelihood);
        model = io_maximise(&model, &st, inputs.len());
    }
    Ok(Fitted {
        model,
        log_likelihoods: history,
        converged,
    })
}
