//! Monte-Carlo remaining-life estimates from the decoded current state.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::markov::{sample_index, viterbi_step, LatentModel};
use crate::numeric::{argmax, substream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RulOptions {
    pub rollouts: usize,
    pub horizon_cap: usize,
    pub seed: u64,
    /// Sample emissions too and stop when the re-decoded state (rather than
    /// the sampled one) enters the failure set.
    pub resample_observations: bool,
}

impl Default for RulOptions {
    fn default() -> Self {
        RulOptions {
            rollouts: 100,
            horizon_cap: 1000,
            seed: 0,
            resample_observations: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RulEstimate {
    /// Mean rollout length in cycles.
    pub mean: f64,
    pub std_error: f64,
    pub rollouts: usize,
    pub horizon_cap: usize,
    /// Rollouts stopped by the cap.
    pub capped: usize,
    pub start_state: usize,
}

fn check<M: LatentModel + ?Sized>(model: &M, failure: &[usize], opts: &RulOptions) -> Result<()> {
    if failure.is_empty() {
        return Err(Error::Empty("failure state set"));
    }
    if let Some(&bad) = failure.iter().find(|&&s| s >= model.n_states()) {
        return Err(Error::InvalidArgument(format!("failure state {bad} out of range")));
    }
    if opts.rollouts == 0 || opts.horizon_cap == 0 {
        return Err(Error::InvalidArgument("rollouts and horizon cap must be positive".into()));
    }
    Ok(())
}

fn summarize(lengths: &[(usize, bool)], opts: &RulOptions, start_state: usize) -> Result<RulEstimate> {
    let n = lengths.len() as f64;
    let mean = lengths.iter().map(|&(l, _)| l as f64).sum::<f64>() / n;
    let var = if lengths.len() > 1 {
        lengths.iter().map(|&(l, _)| (l as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let capped = lengths.iter().filter(|&&(_, c)| c).count();
    if 2 * capped > lengths.len() {
        return Err(Error::HorizonCap {
            capped,
            total: lengths.len(),
        });
    }
    Ok(RulEstimate {
        mean,
        std_error: (var / n).sqrt(),
        rollouts: lengths.len(),
        horizon_cap: opts.horizon_cap,
        capped,
        start_state,
    })
}

fn rollout_rng(seed: u64, i: usize) -> ChaCha8Rng {
    substream(seed.wrapping_add(i as u64), "rul-rollout")
}

/// Rollouts of the hidden chain from `state`, transitions conditioned on
/// `input` throughout.
pub fn rollout_from_state<M: LatentModel + Sync + ?Sized>(
    model: &M,
    state: usize,
    input: ArrayView1<f64>,
    failure: &[usize],
    opts: &RulOptions,
) -> Result<RulEstimate> {
    check(model, failure, opts)?;
    if state >= model.n_states() {
        return Err(Error::InvalidArgument(format!("state {state} out of range")));
    }
    let trans = model.log_transition(input).mapv(f64::exp);
    let lengths: Vec<(usize, bool)> = (0..opts.rollouts)
        .into_par_iter()
        .map(|i| {
            let mut rng = rollout_rng(opts.seed, i);
            let mut s = state;
            let mut steps = 0;
            while !failure.contains(&s) {
                if steps == opts.horizon_cap {
                    return (steps, true);
                }
                s = sample_index(trans.row(s), &mut rng);
                steps += 1;
            }
            (steps, false)
        })
        .collect();
    summarize(&lengths, opts, state)
}

fn last_input(inputs: ArrayView2<f64>, len: usize) -> Array1<f64> {
    if inputs.ncols() == 0 {
        Array1::zeros(0)
    } else {
        inputs.row(len - 1).to_owned()
    }
}

/// RUL after observing the whole of `inputs`/`outputs`.
pub fn estimate_rul<M: LatentModel + Sync + ?Sized>(
    model: &M,
    inputs: ArrayView2<f64>,
    outputs: ArrayView2<f64>,
    failure: &[usize],
    opts: &RulOptions,
) -> Result<RulEstimate> {
    check(model, failure, opts)?;
    if outputs.nrows() == 0 {
        return Err(Error::Empty("observed prefix"));
    }
    let deltas = model.lattice(inputs, outputs)?.viterbi_deltas();
    let delta = deltas.row(deltas.nrows() - 1).to_owned();
    let input = last_input(inputs, outputs.nrows());
    from_delta(model, delta, input.view(), failure, opts)
}

fn from_delta<M: LatentModel + Sync + ?Sized>(
    model: &M,
    delta: Array1<f64>,
    input: ArrayView1<f64>,
    failure: &[usize],
    opts: &RulOptions,
) -> Result<RulEstimate> {
    let state = argmax(delta.as_slice().expect("contiguous"));
    if !opts.resample_observations {
        return rollout_from_state(model, state, input, failure, opts);
    }
    let log_trans = model.log_transition(input);
    let trans = log_trans.mapv(f64::exp);
    let n = model.n_states();
    let lengths: Vec<(usize, bool)> = (0..opts.rollouts)
        .into_par_iter()
        .map(|i| {
            let mut rng = rollout_rng(opts.seed, i);
            let mut hidden = state;
            let mut decoded = state;
            let mut d = delta.clone();
            let mut steps = 0;
            while !failure.contains(&decoded) {
                if steps == opts.horizon_cap {
                    return (steps, true);
                }
                hidden = sample_index(trans.row(hidden), &mut rng);
                let y = Array1::from(model.sample_output(hidden, input, &mut rng));
                let emit = Array1::from_shape_fn(n, |k| model.emission_log_pdf(k, input, y.view()));
                d = viterbi_step(d.view(), log_trans.view(), emit.view());
                let norm = d.fold(f64::NEG_INFINITY, |a, &v| a.max(v));
                d.mapv_inplace(|v| v - norm);
                decoded = argmax(d.as_slice().expect("contiguous"));
                steps += 1;
            }
            (steps, false)
        })
        .collect();
    summarize(&lengths, opts, state)
}

/// Estimate after each cycle `t`, using only cycles `1..=t`.
pub fn rul_curve<M: LatentModel + Sync + ?Sized>(
    model: &M,
    inputs: ArrayView2<f64>,
    outputs: ArrayView2<f64>,
    failure: &[usize],
    opts: &RulOptions,
) -> Result<Vec<RulEstimate>> {
    check(model, failure, opts)?;
    if outputs.nrows() == 0 {
        return Err(Error::Empty("observed prefix"));
    }
    let deltas: Array2<f64> = model.lattice(inputs, outputs)?.viterbi_deltas();
    deltas
        .axis_iter(Axis(0))
        .enumerate()
        .map(|(t, d)| {
            let input = last_input(inputs, t + 1);
            from_delta(model, d.to_owned(), input.view(), failure, opts)
        })
        .collect()
}
