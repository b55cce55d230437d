//! Gaussian hidden Markov models: Baum-Welch training, smoothed posteriors,
//! pointwise most-probable states and Viterbi decoding.
//!
//! Inference is shared with the input-output variant through
//! [`LatentModel`], which reduces a model and one observed sequence to a
//! [`Lattice`] of log-space local scores.

mod init;
pub mod lattice;

pub use lattice::{viterbi_step, ForwardBackward, Lattice, Transitions};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::Persist;
use crate::error::{Error, Result};
use crate::numeric::{argmax, diag_gaussian_log_pdf, substream};

/// Smallest emission variance any fitted state may have.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Behaviour shared by plain and input-conditioned hidden-state models.
pub trait LatentModel {
    fn n_states(&self) -> usize;

    /// Input width the model conditions on (0 when it ignores inputs).
    fn n_inputs(&self) -> usize;

    fn n_outputs(&self) -> usize;

    fn log_initial(&self) -> Array1<f64>;

    /// `ln P(x_t = j | x_{t-1} = i, u_t)` for the step whose input is `input`.
    fn log_transition(&self, input: ArrayView1<f64>) -> Array2<f64>;

    fn input_dependent(&self) -> bool;

    fn emission_log_pdf(&self, state: usize, input: ArrayView1<f64>, output: ArrayView1<f64>)
        -> f64;

    fn sample_output(&self, state: usize, input: ArrayView1<f64>, rng: &mut dyn RngCore)
        -> Vec<f64>;

    /// Next-state distribution out of `from` under `input`.
    fn transition_probs(&self, from: usize, input: ArrayView1<f64>) -> Vec<f64> {
        self.log_transition(input)
            .row(from)
            .iter()
            .map(|v| v.exp())
            .collect()
    }

    /// Local log scores for one sequence. `inputs` may have zero columns
    /// when the model ignores inputs.
    fn lattice(&self, inputs: ArrayView2<f64>, outputs: ArrayView2<f64>) -> Result<Lattice> {
        check_sequence(self, inputs, outputs)?;
        let (t_len, n) = (outputs.nrows(), self.n_states());
        let input_at = |t: usize| {
            if inputs.ncols() == 0 {
                ArrayView1::from(&[][..])
            } else {
                inputs.row(t)
            }
        };
        let mut log_emit = Array2::zeros((t_len, n));
        for t in 0..t_len {
            for k in 0..n {
                log_emit[[t, k]] = self.emission_log_pdf(k, input_at(t), outputs.row(t));
            }
        }
        let transitions = if self.input_dependent() {
            Transitions::PerStep((1..t_len).map(|t| self.log_transition(input_at(t))).collect())
        } else {
            Transitions::Shared(self.log_transition(ArrayView1::from(&[][..])))
        };
        Ok(Lattice {
            log_init: self.log_initial(),
            transitions,
            log_emit,
        })
    }
}

fn check_sequence<M: LatentModel + ?Sized>(
    model: &M,
    inputs: ArrayView2<f64>,
    outputs: ArrayView2<f64>,
) -> Result<()> {
    if outputs.ncols() != model.n_outputs() {
        return Err(Error::dim("observation width", model.n_outputs(), outputs.ncols()));
    }
    if model.n_inputs() > 0 {
        if inputs.ncols() != model.n_inputs() {
            return Err(Error::dim("input width", model.n_inputs(), inputs.ncols()));
        }
        if inputs.nrows() != outputs.nrows() {
            return Err(Error::dim("input length", outputs.nrows(), inputs.nrows()));
        }
    }
    Ok(())
}

/// Zero-width input matrix for models that ignore inputs.
pub fn no_inputs(len: usize) -> Array2<f64> {
    Array2::zeros((len, 0))
}

/// One unit's paired model inputs and outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    /// `T x S`, or `T x 0` for models without inputs.
    pub inputs: Array2<f64>,
    pub outputs: Array2<f64>,
}

impl Sequence {
    pub fn new(inputs: Array2<f64>, outputs: Array2<f64>) -> Result<Sequence> {
        if inputs.nrows() != outputs.nrows() {
            return Err(Error::dim("input length", outputs.nrows(), inputs.nrows()));
        }
        Ok(Sequence { inputs, outputs })
    }

    pub fn outputs_only(outputs: Array2<f64>) -> Sequence {
        Sequence {
            inputs: no_inputs(outputs.nrows()),
            outputs,
        }
    }

    pub fn len(&self) -> usize {
        self.outputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.nrows() == 0
    }

    /// First `len` steps.
    pub fn prefix(&self, len: usize) -> Sequence {
        Sequence {
            inputs: self.inputs.slice(ndarray::s![..len, ..]).to_owned(),
            outputs: self.outputs.slice(ndarray::s![..len, ..]).to_owned(),
        }
    }
}

/// Per-step state posteriors of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorTrack {
    /// `T x N`, each row a distribution over states.
    pub gamma: Array2<f64>,
    pub log_likelihood: f64,
}

/// Smoothed posteriors under any [`LatentModel`].
pub fn smooth<M: LatentModel + ?Sized>(
    model: &M,
    inputs: ArrayView2<f64>,
    outputs: ArrayView2<f64>,
) -> Result<PosteriorTrack> {
    let fb = model.lattice(inputs, outputs)?.smooth();
    Ok(PosteriorTrack {
        gamma: fb.gamma,
        log_likelihood: fb.log_likelihood,
    })
}

/// Viterbi path under any [`LatentModel`].
pub fn decode<M: LatentModel + ?Sized>(
    model: &M,
    inputs: ArrayView2<f64>,
    outputs: ArrayView2<f64>,
) -> Result<(Vec<usize>, f64)> {
    Ok(model.lattice(inputs, outputs)?.viterbi())
}

/// Causal posteriors `P(x_t | y_1..y_t)`: row `t` equals the last row of
/// [`smooth`] applied to the prefix ending at `t`.
pub fn filter<M: LatentModel + ?Sized>(
    model: &M,
    inputs: ArrayView2<f64>,
    outputs: ArrayView2<f64>,
) -> Result<Array2<f64>> {
    Ok(model.lattice(inputs, outputs)?.filter())
}

/// Row `t` is the last state of [`decode`] applied to the prefix ending at `t`.
pub fn online_decode<M: LatentModel + ?Sized>(
    model: &M,
    inputs: ArrayView2<f64>,
    outputs: ArrayView2<f64>,
) -> Result<Vec<usize>> {
    Ok(model.lattice(inputs, outputs)?.online_decode())
}

/// Gaussian HMM with diagonal covariances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmModel {
    pub initial: Array1<f64>,
    /// Row-stochastic, `transition[[i, j]] = P(j | i)`.
    pub transition: Array2<f64>,
    /// `N x M` emission means.
    pub means: Array2<f64>,
    /// `N x M` emission variances.
    pub variances: Array2<f64>,
}

impl Persist for HmmModel {
    const KIND: &'static str = "hmm";
}

pub(crate) fn check_distribution(row: ArrayView1<f64>, what: &str) -> Result<()> {
    if row.iter().any(|p| !(*p >= 0.0)) || (row.sum() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("{what} is not a distribution")));
    }
    Ok(())
}

impl HmmModel {
    pub fn new(
        initial: Array1<f64>,
        transition: Array2<f64>,
        means: Array2<f64>,
        variances: Array2<f64>,
    ) -> Result<HmmModel> {
        let m = HmmModel {
            initial,
            transition,
            means,
            variances,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.initial.len();
        if n == 0 {
            return Err(Error::InvalidArgument("model has no states".into()));
        }
        if self.transition.dim() != (n, n) {
            return Err(Error::dim("transition rows", n, self.transition.nrows()));
        }
        if self.means.nrows() != n || self.variances.dim() != self.means.dim() {
            return Err(Error::dim("emission rows", n, self.means.nrows()));
        }
        check_distribution(self.initial.view(), "initial distribution")?;
        for (i, row) in self.transition.axis_iter(Axis(0)).enumerate() {
            check_distribution(row, &format!("transition row {i}"))?;
        }
        if self.variances.iter().any(|v| !(*v >= VARIANCE_FLOOR * (1.0 - 1e-12))) {
            return Err(Error::InvalidArgument(format!(
                "emission variance below floor {VARIANCE_FLOOR}"
            )));
        }
        Ok(())
    }

    /// Draws a state path and observations of length `len`.
    pub fn sample<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> (Vec<usize>, Array2<f64>) {
        let mut states = Vec::with_capacity(len);
        let mut out = Array2::zeros((len, self.n_outputs()));
        for t in 0..len {
            let dist = if t == 0 {
                self.initial.view()
            } else {
                self.transition.row(states[t - 1])
            };
            let s = sample_index(dist, rng);
            states.push(s);
            for m in 0..self.n_outputs() {
                let z: f64 = StandardNormal.sample(rng);
                out[[t, m]] = self.means[[s, m]] + self.variances[[s, m]].sqrt() * z;
            }
        }
        (states, out)
    }

    /// Relabels states so that new state `k` is old state `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> HmmModel {
        let n = self.n_states();
        assert_eq!(perm.len(), n);
        HmmModel {
            initial: Array1::from_shape_fn(n, |k| self.initial[perm[k]]),
            transition: Array2::from_shape_fn((n, n), |(i, j)| {
                self.transition[[perm[i], perm[j]]]
            }),
            means: self.means.select(Axis(0), perm),
            variances: self.variances.select(Axis(0), perm),
        }
    }
}

pub(crate) fn sample_index<R: Rng + ?Sized>(dist: ArrayView1<f64>, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left a sliver of mass: take the last state with support
    dist.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

impl LatentModel for HmmModel {
    fn n_states(&self) -> usize {
        self.initial.len()
    }

    fn n_inputs(&self) -> usize {
        0
    }

    fn n_outputs(&self) -> usize {
        self.means.ncols()
    }

    fn log_initial(&self) -> Array1<f64> {
        self.initial.mapv(f64::ln)
    }

    fn log_transition(&self, _input: ArrayView1<f64>) -> Array2<f64> {
        self.transition.mapv(f64::ln)
    }

    fn input_dependent(&self) -> bool {
        false
    }

    fn emission_log_pdf(&self, state: usize, _input: ArrayView1<f64>, output: ArrayView1<f64>) -> f64 {
        diag_gaussian_log_pdf(output, self.means.row(state), self.variances.row(state))
    }

    fn sample_output(&self, state: usize, _input: ArrayView1<f64>, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..self.n_outputs())
            .map(|m| {
                let z: f64 = StandardNormal.sample(rng);
                self.means[[state, m]] + self.variances[[state, m]].sqrt() * z
            })
            .collect()
    }
}

/// Smoothed posteriors `gamma_t(i) = P(x_t = i | Y, lambda)`.
pub fn posterior(model: &HmmModel, sequence: ArrayView2<f64>) -> Result<PosteriorTrack> {
    smooth(model, no_inputs(sequence.nrows()).view(), sequence)
}

/// Per-step argmax of the posterior; ties go to the lowest state index.
pub fn most_probable_states(track: &PosteriorTrack) -> Vec<usize> {
    track
        .gamma
        .axis_iter(Axis(0))
        .map(|row| argmax(&row.to_vec()))
        .collect()
}

/// Jointly most probable state path and its log probability.
pub fn viterbi(model: &HmmModel, sequence: ArrayView2<f64>) -> Result<(Vec<usize>, f64)> {
    decode(model, no_inputs(sequence.nrows()).view(), sequence)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub seed: u64,
    pub max_iter: usize,
    /// Stop once the total log-likelihood improves by less than this.
    pub tol: f64,
    /// Independent initialisations; the fit ending on the highest
    /// log-likelihood is kept. Restart `r` seeds its start from `seed + r`.
    #[serde(default = "one")]
    pub restarts: usize,
}

fn one() -> usize {
    1
}

impl FitOptions {
    pub(crate) fn restart_seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.restarts.max(1) as u64).map(|r| self.seed.wrapping_add(r))
    }
}

/// Runs `fit` once per restart seed and keeps the best final log-likelihood.
/// Ties go to the earliest restart.
pub(crate) fn best_of<M>(opts: &FitOptions, mut fit: impl FnMut(u64) -> Result<Fitted<M>>) -> Result<Fitted<M>> {
    let mut best: Option<Fitted<M>> = None;
    for seed in opts.restart_seeds() {
        let f = fit(seed)?;
        let better = match &best {
            None => true,
            Some(b) => f.final_log_likelihood() > b.final_log_likelihood(),
        };
        if better {
            best = Some(f);
        }
    }
    Ok(best.expect("at least one restart"))
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            seed: 0,
            max_iter: 100,
            tol: 1e-2,
            restarts: 1,
        }
    }
}

/// Result of an EM run: the model plus the total log-likelihood of every
/// parameter set the E-step evaluated, in order.
#[derive(Debug, Clone)]
pub struct Fitted<M> {
    pub model: M,
    pub log_likelihoods: Vec<f64>,
    pub converged: bool,
}

impl<M> Fitted<M> {
    pub fn final_log_likelihood(&self) -> f64 {
        self.log_likelihoods.last().copied().unwrap_or(f64::NEG_INFINITY)
    }
}

pub(crate) fn check_training_set(sequences: &[ArrayView2<f64>], n_states: usize) -> Result<usize> {
    if n_states < 1 {
        return Err(Error::InvalidArgument("n_states must be at least 1".into()));
    }
    let first = sequences.first().ok_or(Error::Empty("training sequences"))?;
    let width = first.ncols();
    for s in sequences {
        if s.nrows() < 2 {
            return Err(Error::InvalidArgument(
                "every training sequence needs at least 2 steps".into(),
            ));
        }
        if s.ncols() != width {
            return Err(Error::dim("observation width", width, s.ncols()));
        }
    }
    Ok(width)
}

/// Uniform distribution perturbed by normalised exponential draws.
pub(crate) fn jittered_uniform<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Array1<f64> {
    let mut v = Array1::from_shape_fn(n, |_| {
        let e: f64 = Exp1.sample(rng);
        1.0 + 0.25 * e
    });
    let s = v.sum();
    v /= s;
    v
}

/// Emission means and floored variances of hard clusters; empty clusters
/// fall back to the pooled moments.
pub(crate) fn cluster_moments(rows: ArrayView2<f64>, labels: &[usize], k: usize) -> (Array2<f64>, Array2<f64>) {
    let d = rows.ncols();
    let pooled_mean = rows.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(d));
    let pooled_var = rows.var_axis(Axis(0), 0.0);
    let mut means = Array2::zeros((k, d));
    let mut vars = Array2::zeros((k, d));
    for c in 0..k {
        let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if idx.len() < 2 {
            means.row_mut(c).assign(&pooled_mean);
            vars.row_mut(c).assign(&pooled_var);
        } else {
            let sub = rows.select(Axis(0), &idx);
            means.row_mut(c).assign(&sub.mean_axis(Axis(0)).expect("non-empty"));
            vars.row_mut(c).assign(&sub.var_axis(Axis(0), 0.0));
        }
    }
    vars.mapv_inplace(|v| v.max(VARIANCE_FLOOR));
    (means, vars)
}

pub(crate) fn kmeans_labels<R: Rng + ?Sized>(rows: ArrayView2<f64>, k: usize, rng: &mut R) -> Vec<usize> {
    init::kmeans(rows, k, rng)
}

fn pooled_rows(sequences: &[ArrayView2<f64>]) -> Array2<f64> {
    ndarray::concatenate(Axis(0), sequences).expect("shared width")
}

fn initial_hmm(sequences: &[ArrayView2<f64>], n_states: usize, seed: u64) -> HmmModel {
    let mut rng = substream(seed, "hmm-init");
    let rows = pooled_rows(sequences);
    let labels = init::kmeans(rows.view(), n_states, &mut rng);
    let (means, variances) = cluster_moments(rows.view(), &labels, n_states);
    let initial = jittered_uniform(n_states, &mut rng);
    let mut transition = Array2::zeros((n_states, n_states));
    for i in 0..n_states {
        transition.row_mut(i).assign(&jittered_uniform(n_states, &mut rng));
    }
    HmmModel {
        initial,
        transition,
        means,
        variances,
    }
}

struct Stats {
    init: Array1<f64>,
    trans: Array2<f64>,
    occupancy: Array1<f64>,
    sum_x: Array2<f64>,
    sum_x2: Array2<f64>,
    log_likelihood: f64,
}

impl Stats {
    fn zeros(n: usize, d: usize) -> Stats {
        Stats {
            init: Array1::zeros(n),
            trans: Array2::zeros((n, n)),
            occupancy: Array1::zeros(n),
            sum_x: Array2::zeros((n, d)),
            sum_x2: Array2::zeros((n, d)),
            log_likelihood: 0.0,
        }
    }

    fn add(&mut self, o: &Stats) {
        self.init += &o.init;
        self.trans += &o.trans;
        self.occupancy += &o.occupancy;
        self.sum_x += &o.sum_x;
        self.sum_x2 += &o.sum_x2;
        self.log_likelihood += o.log_likelihood;
    }
}

fn expected_stats(model: &HmmModel, seq: ArrayView2<f64>) -> Stats {
    let (n, d) = (model.n_states(), seq.ncols());
    let lattice = model
        .lattice(no_inputs(seq.nrows()).view(), seq)
        .expect("training sequences were validated");
    let fb = lattice.smooth();
    let mut st = Stats::zeros(n, d);
    st.log_likelihood = fb.log_likelihood;
    st.init.assign(&fb.gamma.row(0));
    let mut xi = Array2::zeros((n, n));
    for t in 1..seq.nrows() {
        lattice.xi_at(&fb, t, &mut xi);
        st.trans += &xi;
    }
    for t in 0..seq.nrows() {
        let x = seq.row(t);
        for k in 0..n {
            let g = fb.gamma[[t, k]];
            if g == 0.0 {
                continue;
            }
            st.occupancy[k] += g;
            for m in 0..d {
                st.sum_x[[k, m]] += g * x[m];
                st.sum_x2[[k, m]] += g * x[m] * x[m];
            }
        }
    }
    st
}

fn maximise(prev: &HmmModel, st: &Stats, n_sequences: usize) -> HmmModel {
    let n = prev.n_states();
    let d = prev.n_outputs();
    let initial = &st.init / n_sequences as f64;
    let mut transition = prev.transition.clone();
    for i in 0..n {
        let row_sum = st.trans.row(i).sum();
        if row_sum > 1e-300 {
            transition.row_mut(i).assign(&(&st.trans.row(i) / row_sum));
        }
    }
    let mut means = prev.means.clone();
    let mut variances = prev.variances.clone();
    for k in 0..n {
        let occ = st.occupancy[k];
        if occ <= 1e-10 {
            continue;
        }
        for m in 0..d {
            let mu = st.sum_x[[k, m]] / occ;
            let var = st.sum_x2[[k, m]] / occ - mu * mu;
            means[[k, m]] = mu;
            variances[[k, m]] = var.max(VARIANCE_FLOOR);
        }
    }
    HmmModel {
        initial,
        transition,
        means,
        variances,
    }
}

/// Baum-Welch over several independent sequences, summing sufficient
/// statistics across them.
pub fn fit_hmm(sequences: &[ArrayView2<f64>], n_states: usize, opts: &FitOptions) -> Result<Fitted<HmmModel>> {
    check_training_set(sequences, n_states)?;
    best_of(opts, |seed| fit_hmm_from(initial_hmm(sequences, n_states, seed), sequences, opts))
}

/// EM starting from a given model.
pub fn fit_hmm_from(
    start: HmmModel,
    sequences: &[ArrayView2<f64>],
    opts: &FitOptions,
) -> Result<Fitted<HmmModel>> {
    let d = check_training_set(sequences, start.n_states())?;
    if d != start.n_outputs() {
        return Err(Error::dim("observation width", start.n_outputs(), d));
    }
    let n = start.n_states();
    let mut model = start;
    let mut history: Vec<f64> = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iter.max(1) {
        let per_seq: Vec<Stats> = sequences
            .par_iter()
            .map(|s| expected_stats(&model, *s))
            .collect();
        let mut st = Stats::zeros(n, d);
        for s in &per_seq {
            st.add(s);
        }
        if !st.log_likelihood.is_finite() {
            return Err(Error::NonFinite("HMM log-likelihood".into()));
        }
        if let Some(&prev) = history.last() {
            if st.log_likelihood - prev < opts.tol {
                history.push(st.log_likelihood);
                converged = true;
                break;
            }
        }
        history.push(st.log_likelihood);
        model = maximise(&model, &st, sequences.len());
    }
    Ok(Fitted {
        model,
        log_likelihoods: history,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn two_state() -> HmmModel {
        HmmModel::new(
            array![0.6, 0.4],
            array![[0.7, 0.3], [0.2, 0.8]],
            array![[0.0], [2.0]],
            array![[1.0], [0.5]],
        )
        .unwrap()
    }

    #[test]
    fn argmax_rule_and_ties() {
        let track = PosteriorTrack {
            gamma: array![[0.2, 0.8], [0.5, 0.5]],
            log_likelihood: 0.0,
        };
        assert_eq!(most_probable_states(&track), vec![1, 0]);
    }

    #[test]
    fn single_state_fit_recovers_global_moments() {
        let a = array![[1.0, 2.0], [3.0, 2.0], [5.0, 8.0]];
        let b = array![[7.0, 0.0], [9.0, 3.0]];
        let fit = fit_hmm(&[a.view(), b.view()], 1, &FitOptions::default()).unwrap();
        let m = fit.model;
        assert_eq!(m.transition, array![[1.0]]);
        assert!((m.means[[0, 0]] - 5.0).abs() < 1e-12);
        assert!((m.means[[0, 1]] - 3.0).abs() < 1e-12);
        assert!((m.variances[[0, 0]] - 8.0).abs() < 1e-9);
        assert!((m.variances[[0, 1]] - 7.2).abs() < 1e-9);
    }

    #[test]
    fn single_state_viterbi_is_all_zero_with_sequence_likelihood() {
        let m = HmmModel::new(array![1.0], array![[1.0]], array![[0.5]], array![[2.0]]).unwrap();
        let y = array![[0.1], [1.3], [-0.4]];
        let (path, lp) = viterbi(&m, y.view()).unwrap();
        assert_eq!(path, vec![0, 0, 0]);
        let ll = posterior(&m, y.view()).unwrap().log_likelihood;
        assert!((lp - ll).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_training_input() {
        let y = array![[0.0], [1.0]];
        assert!(fit_hmm(&[y.view()], 0, &FitOptions::default()).is_err());
        assert!(fit_hmm(&[], 2, &FitOptions::default()).is_err());
        let short = array![[0.0]];
        assert!(fit_hmm(&[short.view()], 1, &FitOptions::default()).is_err());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let y = array![[0.0, 1.0]];
        assert!(matches!(posterior(&two_state(), y.view()), Err(Error::Dimension { .. })));
        assert!(viterbi(&two_state(), y.view()).is_err());
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(HmmModel::new(array![0.5, 0.4], array![[1.0, 0.0], [0.0, 1.0]], array![[0.0], [1.0]], array![[1.0], [1.0]]).is_err());
        assert!(HmmModel::new(array![1.0], array![[1.0]], array![[0.0]], array![[1e-9]]).is_err());
    }

    #[test]
    fn deterministic_chain_posterior_is_one_hot() {
        let m = HmmModel::new(
            array![1.0, 0.0, 0.0],
            array![[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0]],
            array![[0.0], [5.0], [10.0]],
            array![[1e-6], [1e-6], [1e-6]],
        )
        .unwrap();
        let y = array![[0.0], [5.0], [10.0], [10.0]];
        let track = posterior(&m, y.view()).unwrap();
        for (t, expect) in [0, 1, 2, 2].iter().enumerate() {
            assert!((track.gamma[[t, *expect]] - 1.0).abs() < 1e-6);
        }
        assert_eq!(viterbi(&m, y.view()).unwrap().0, vec![0, 1, 2, 2]);
    }

    #[test]
    fn filter_rows_match_prefix_smoothing() {
        let m = two_state();
        let y = array![[0.3], [1.9], [2.2], [-0.1], [0.4]];
        let f = filter(&m, no_inputs(5).view(), y.view()).unwrap();
        let online = online_decode(&m, no_inputs(5).view(), y.view()).unwrap();
        for t in 0..5 {
            let prefix = y.slice(ndarray::s![..=t, ..]);
            let track = posterior(&m, prefix).unwrap();
            for k in 0..2 {
                assert!((f[[t, k]] - track.gamma[[t, k]]).abs() < 1e-12);
            }
            assert_eq!(online[t], *viterbi(&m, prefix).unwrap().0.last().unwrap());
        }
    }

    #[test]
    fn fit_is_deterministic_per_seed() {
        let mut rng = substream(3, "data");
        let seqs: Vec<Array2<f64>> = (0..5).map(|_| two_state().sample(40, &mut rng).1).collect();
        let views: Vec<_> = seqs.iter().map(|s| s.view()).collect();
        let opts = FitOptions { seed: 9, max_iter: 15, tol: 0.0, restarts: 1 };
        let a = fit_hmm(&views, 2, &opts).unwrap();
        let b = fit_hmm(&views, 2, &opts).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.log_likelihoods, b.log_likelihoods);
    }
}
