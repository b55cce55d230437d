//! Log-space recursions over a chain of local scores.
//!
//! A [`Lattice`] holds, for one observed sequence, the log initial
//! distribution, the log transition matrix entering each step and the log
//! emission score of every state at every step. Plain and input-conditioned
//! models both reduce to this form.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::numeric::{argmax, log_sum_exp};

#[derive(Debug, Clone)]
pub enum Transitions {
    /// One matrix used for every step.
    Shared(Array2<f64>),
    /// `steps[t - 1]` is the matrix entering step `t`, for `t >= 1`.
    PerStep(Vec<Array2<f64>>),
}

#[derive(Debug, Clone)]
pub struct Lattice {
    pub log_init: Array1<f64>,
    pub transitions: Transitions,
    /// `T x N` log emission scores.
    pub log_emit: Array2<f64>,
}

impl Lattice {
    pub fn len(&self) -> usize {
        self.log_emit.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_states(&self) -> usize {
        self.log_emit.ncols()
    }

    /// Log transition matrix entering step `t` (`t >= 1`).
    pub fn log_trans(&self, t: usize) -> ArrayView2<'_, f64> {
        match &self.transitions {
            Transitions::Shared(a) => a.view(),
            Transitions::PerStep(steps) => steps[t - 1].view(),
        }
    }

    /// Log forward variables, `alpha[t][j] = ln P(y_1..y_t, x_t = j)`.
    pub fn forward(&self) -> Array2<f64> {
        let (t_len, n) = (self.len(), self.n_states());
        let mut alpha = Array2::from_elem((t_len, n), f64::NEG_INFINITY);
        if t_len == 0 {
            return alpha;
        }
        for j in 0..n {
            alpha[[0, j]] = self.log_init[j] + self.log_emit[[0, j]];
        }
        let mut terms = vec![0.0; n];
        for t in 1..t_len {
            let a = self.log_trans(t);
            for j in 0..n {
                for i in 0..n {
                    terms[i] = alpha[[t - 1, i]] + a[[i, j]];
                }
                alpha[[t, j]] = log_sum_exp(&terms) + self.log_emit[[t, j]];
            }
        }
        alpha
    }

    /// Log backward variables, `beta[t][i] = ln P(y_{t+1}..y_T | x_t = i)`.
    pub fn backward(&self) -> Array2<f64> {
        let (t_len, n) = (self.len(), self.n_states());
        let mut beta = Array2::zeros((t_len, n));
        let mut terms = vec![0.0; n];
        for t in (0..t_len.saturating_sub(1)).rev() {
            let a = self.log_trans(t + 1);
            for i in 0..n {
                for j in 0..n {
                    terms[j] = a[[i, j]] + self.log_emit[[t + 1, j]] + beta[[t + 1, j]];
                }
                beta[[t, i]] = log_sum_exp(&terms);
            }
        }
        beta
    }

    pub fn log_likelihood_from(alpha: &Array2<f64>) -> f64 {
        match alpha.nrows() {
            0 => 0.0,
            t => log_sum_exp(alpha.row(t - 1).as_slice().expect("standard layout")),
        }
    }

    /// Smoothed state posteriors and the sequence log-likelihood.
    pub fn smooth(&self) -> ForwardBackward {
        let alpha = self.forward();
        let beta = self.backward();
        let ll = Lattice::log_likelihood_from(&alpha);
        let mut gamma = &alpha + &beta;
        for mut row in gamma.axis_iter_mut(Axis(0)) {
            let norm = log_sum_exp(row.as_slice().expect("standard layout"));
            row.mapv_inplace(|v| (v - norm).exp());
            // renormalise away rounding so rows sum to one
            let s = row.sum();
            row.mapv_inplace(|v| v / s);
        }
        ForwardBackward {
            alpha,
            beta,
            gamma,
            log_likelihood: ll,
        }
    }

    /// Expected transition counts entering step `t`, `xi[i][j]`.
    pub fn xi_at(&self, fb: &ForwardBackward, t: usize, out: &mut Array2<f64>) {
        let n = self.n_states();
        let a = self.log_trans(t);
        for i in 0..n {
            for j in 0..n {
                let v = fb.alpha[[t - 1, i]]
                    + a[[i, j]]
                    + self.log_emit[[t, j]]
                    + fb.beta[[t, j]]
                    - fb.log_likelihood;
                out[[i, j]] = if v.is_finite() { v.exp() } else { 0.0 };
            }
        }
    }

    /// Filtered posteriors `P(x_t | y_1..y_t)`, one row per step.
    pub fn filter(&self) -> Array2<f64> {
        let mut f = self.forward();
        for mut row in f.axis_iter_mut(Axis(0)) {
            let norm = log_sum_exp(row.as_slice().expect("standard layout"));
            row.mapv_inplace(|v| (v - norm).exp());
        }
        f
    }

    fn viterbi_scores(&self) -> (Array2<f64>, Array2<usize>) {
        let (t_len, n) = (self.len(), self.n_states());
        let mut delta = Array2::from_elem((t_len, n), f64::NEG_INFINITY);
        let mut back = Array2::zeros((t_len, n));
        if t_len == 0 {
            return (delta, back);
        }
        for j in 0..n {
            delta[[0, j]] = self.log_init[j] + self.log_emit[[0, j]];
        }
        for t in 1..t_len {
            let a = self.log_trans(t);
            for j in 0..n {
                let mut best = 0;
                let mut best_score = delta[[t - 1, 0]] + a[[0, j]];
                for i in 1..n {
                    let s = delta[[t - 1, i]] + a[[i, j]];
                    if s > best_score {
                        best = i;
                        best_score = s;
                    }
                }
                delta[[t, j]] = best_score + self.log_emit[[t, j]];
                back[[t, j]] = best;
            }
        }
        (delta, back)
    }

    /// Viterbi scores `delta[t][j]`, the best log joint probability of any
    /// path over `y_1..y_t` ending in `j`.
    pub fn viterbi_deltas(&self) -> Array2<f64> {
        self.viterbi_scores().0
    }

    /// Jointly most probable path and its log probability. Ties go to the
    /// lowest state index, both for the final state and for predecessors.
    pub fn viterbi(&self) -> (Vec<usize>, f64) {
        let t_len = self.len();
        if t_len == 0 {
            return (Vec::new(), 0.0);
        }
        let (delta, back) = self.viterbi_scores();
        let last = delta.row(t_len - 1);
        let mut state = argmax(last.as_slice().expect("standard layout"));
        let log_prob = last[state];
        let mut path = vec![0; t_len];
        path[t_len - 1] = state;
        for t in (1..t_len).rev() {
            state = back[[t, state]];
            path[t - 1] = state;
        }
        (path, log_prob)
    }

    /// For each step `t`, the final state of the Viterbi path over the
    /// prefix `y_1..y_t` (i.e. `argmax_i delta_t(i)`).
    pub fn online_decode(&self) -> Vec<usize> {
        let (delta, _) = self.viterbi_scores();
        delta
            .axis_iter(Axis(0))
            .map(|row| argmax(row.as_slice().expect("standard layout")))
            .collect()
    }
}

/// Extends `delta` by one step.
pub fn viterbi_step(delta: ArrayView1<f64>, log_trans: ArrayView2<f64>, log_emit: ArrayView1<f64>) -> Array1<f64> {
    let n = delta.len();
    Array1::from_shape_fn(n, |j| {
        (0..n).map(|i| delta[i] + log_trans[[i, j]]).fold(f64::NEG_INFINITY, f64::max) + log_emit[j]
    })
}

#[derive(Debug, Clone)]
pub struct ForwardBackward {
    pub alpha: Array2<f64>,
    pub beta: Array2<f64>,
    pub gamma: Array2<f64>,
    pub log_likelihood: f64,
}
