use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::markov::{decode, LatentModel, Sequence};

pub const DEFAULT_SUPPORT_THRESHOLD: f64 = 0.05;

/// States the fleet's units end their lives in.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureStateSet {
    /// Ascending.
    pub states: Vec<usize>,
    /// Units whose final decoded state is `i`, for every state `i`.
    pub support: Vec<usize>,
    pub n_units: usize,
}

impl FailureStateSet {
    pub fn contains(&self, state: usize) -> bool {
        self.states.binary_search(&state).is_ok()
    }
}

/// Viterbi paths of every sequence.
pub fn decode_all<M: LatentModel + Sync + ?Sized>(model: &M, seqs: &[Sequence]) -> Result<Vec<Vec<usize>>> {
    seqs.par_iter()
        .map(|s| decode(model, s.inputs.view(), s.outputs.view()).map(|(p, _)| p))
        .collect()
}

/// Final decoded state of each unit, kept when at least
/// `threshold * n_units` units end in it.
pub fn identify_failure_states<M: LatentModel + Sync + ?Sized>(
    model: &M,
    seqs: &[Sequence],
    threshold: f64,
) -> Result<FailureStateSet> {
    if seqs.is_empty() {
        return Err(Error::Empty("fleet"));
    }
    if seqs.iter().any(Sequence::is_empty) {
        return Err(Error::Empty("unit sequence"));
    }
    let paths = decode_all(model, seqs)?;
    let mut support = vec![0; model.n_states()];
    for p in &paths {
        support[*p.last().expect("non-empty")] += 1;
    }
    let needed = threshold * seqs.len() as f64;
    let states = (0..support.len())
        .filter(|&k| support[k] > 0 && support[k] as f64 >= needed)
        .collect();
    Ok(FailureStateSet {
        states,
        support,
        n_units: seqs.len(),
    })
}
