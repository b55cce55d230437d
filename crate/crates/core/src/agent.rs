//! Feedforward Q-function over two actions, trained by online one-step
//! Q-learning with epsilon-greedy exploration.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::Persist;
use crate::error::{Error, Result};
use crate::numeric::substream;

pub use crate::env::Action;
use crate::env::MaintenanceEnv;

pub const DEFAULT_HIDDEN: [usize; 2] = [128, 256];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Dense {
    weights: Array2<f64>,
    bias: Array1<f64>,
}

#[derive(Debug, Clone, Default)]
struct AdamState {
    step: i32,
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Parameter gradient, one entry per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradient {
    /// Same order as [`QFunction::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Transition<'a> {
    pub state: &'a [f64],
    pub action: Action,
    pub reward: f64,
    pub next_state: &'a [f64],
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
}

/// ReLU hidden layers, linear output with one unit per action.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QFunction {
    layers: Vec<Dense>,
    #[serde(skip)]
    adam: Option<AdamState>,
}

impl PartialEq for QFunction {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

impl Persist for QFunction {
    const KIND: &'static str = "qfunction";
}

impl QFunction {
    /// Layers drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new(input_dim: usize, hidden: &[usize], seed: u64) -> Result<QFunction> {
        if input_dim == 0 || hidden.contains(&0) {
            return Err(Error::InvalidArgument(
                "layer widths must be positive".into(),
            ));
        }
        let mut rng = substream(seed, "q-init");
        let mut widths = vec![input_dim];
        widths.extend_from_slice(hidden);
        widths.push(Action::ALL.len());
        let layers = widths
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                let mut draw = || rng.random_range(-bound..bound);
                let weights = Array2::from_shape_fn((w[1], w[0]), |_| draw());
                let bias = Array1::from_shape_fn(w[1], |_| draw());
                Dense { weights, bias }
            })
            .collect();
        Ok(QFunction { layers, adam: None })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    pub fn hidden(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.bias.len())
            .collect()
    }

    pub fn n_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Every weight and bias, layer by layer, weights row-major before
    /// biases.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    /// Overwrites the parameters from the layout of [`Self::parameters`] and
    /// drops optimizer state.
    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.n_parameters() {
            return Err(Error::dim("parameter vector", self.n_parameters(), values.len()));
        }
        let mut it = values.iter().copied();
        for l in &mut self.layers {
            for v in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *v = it.next().expect("length checked");
            }
        }
        self.adam = None;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let mut width = self.input_dim();
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.ncols() != width || l.bias.len() != l.weights.nrows() {
                return Err(Error::InvalidArgument(format!("layer {i} has inconsistent shape")));
            }
            width = l.weights.nrows();
        }
        if width != Action::ALL.len() {
            return Err(Error::dim("q-function outputs", Action::ALL.len(), width));
        }
        Ok(())
    }

    fn check_input(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.input_dim() {
            return Err(Error::dim("q-function input", self.input_dim(), state.len()));
        }
        if !state.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("q-function input".into()));
        }
        Ok(())
    }

    /// Activations of every layer, input first, output last.
    fn forward(&self, state: &[f64]) -> Vec<Array1<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(Array1::from(state.to_vec()));
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = l.weights.dot(acts.last().unwrap()) + &l.bias;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    pub fn q_values(&self, state: &[f64]) -> Result<[f64; 2]> {
        self.check_input(state)?;
        let out = self.forward(state).pop().unwrap();
        let q = [out[0], out[1]];
        if !q.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("q-values".into()));
        }
        Ok(q)
    }

    /// Ties go to `Hold`.
    pub fn greedy(&self, state: &[f64]) -> Result<Action> {
        let q = self.q_values(state)?;
        Ok(if q[1] > q[0] { Action::Replace } else { Action::Hold })
    }

    pub fn select_action<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        epsilon: f64,
        rng: &mut R,
    ) -> Result<Action> {
        if rng.random::<f64>() < epsilon {
            self.check_input(state)?;
            Ok(Action::from_index(rng.random_range(0..Action::ALL.len())))
        } else {
            self.greedy(state)
        }
    }

    /// Loss `0.5 (Q(s, a) - target)^2` and its gradient.
    pub fn gradient(&self, state: &[f64], action: Action, target: f64) -> Result<(f64, Gradient)> {
        self.check_input(state)?;
        let acts = self.forward(state);
        let q = acts.last().unwrap()[action.index()];
        let err = q - target;
        if !err.is_finite() {
            return Err(Error::NonFinite("temporal-difference error".into()));
        }
        let n = self.layers.len();
        let mut delta = Array1::zeros(Action::ALL.len());
        delta[action.index()] = err;
        let mut weights = Vec::with_capacity(n);
        let mut biases = Vec::with_capacity(n);
        for i in (0..n).rev() {
            let input = &acts[i];
            let gw = delta
                .view()
                .insert_axis(ndarray::Axis(1))
                .dot(&input.view().insert_axis(ndarray::Axis(0)));
            let next = if i > 0 {
                let mut d = self.layers[i].weights.t().dot(&delta);
                d.zip_mut_with(input, |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0
                    }
                });
                Some(d)
            } else {
                None
            };
            weights.push(gw);
            biases.push(delta);
            match next {
                Some(d) => delta = d,
                None => break,
            }
        }
        weights.reverse();
        biases.reverse();
        Ok((0.5 * err * err, Gradient { weights, biases }))
    }

    /// One-step Q-learning update; returns the TD error before the step.
    pub fn td_update(&mut self, tr: &Transition<'_>, cfg: &UpdateConfig) -> Result<f64> {
        self.check_input(tr.next_state)?;
        let target = if tr.terminal {
            tr.reward
        } else {
            let q = self.q_values(tr.next_state)?;
            tr.reward + cfg.gamma * q[0].max(q[1])
        };
        if !target.is_finite() {
            return Err(Error::NonFinite("td target".into()));
        }
        let q = self.q_values(tr.state)?[tr.action.index()];
        let (_, grad) = self.gradient(tr.state, tr.action, target)?;
        self.apply(&grad, cfg);
        Ok(target - q)
    }

    fn apply(&mut self, grad: &Gradient, cfg: &UpdateConfig) {
        let lr = cfg.learning_rate;
        match cfg.optimizer {
            OptimizerKind::Sgd => {
                for (l, (gw, gb)) in self.layers.iter_mut().zip(grad.weights.iter().zip(&grad.biases)) {
                    l.weights.scaled_add(-lr, gw);
                    l.bias.scaled_add(-lr, gb);
                }
            }
            OptimizerKind::Adam => {
                let layers = &mut self.layers;
                let st = self.adam.get_or_insert_with(|| AdamState {
                    step: 0,
                    m_w: layers.iter().map(|l| Array2::zeros(l.weights.raw_dim())).collect(),
                    v_w: layers.iter().map(|l| Array2::zeros(l.weights.raw_dim())).collect(),
                    m_b: layers.iter().map(|l| Array1::zeros(l.bias.len())).collect(),
                    v_b: layers.iter().map(|l| Array1::zeros(l.bias.len())).collect(),
                });
                st.step += 1;
                let c1 = 1.0 - ADAM_BETA1.powi(st.step);
                let c2 = 1.0 - ADAM_BETA2.powi(st.step);
                let adam = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
                };
                for (i, l) in layers.iter_mut().enumerate() {
                    ndarray::Zip::from(&mut l.weights)
                        .and(&grad.weights[i])
                        .and(&mut st.m_w[i])
                        .and(&mut st.v_w[i])
                        .for_each(|p, &g, m, v| adam(p, g, m, v));
                    ndarray::Zip::from(&mut l.bias)
                        .and(&grad.biases[i])
                        .and(&mut st.m_b[i])
                        .and(&mut st.v_b[i])
                        .for_each(|p, &g, m, v| adam(p, g, m, v));
                }
            }
        }
    }

    /// Forgets optimizer moments.
    pub fn reset_optimizer(&mut self) {
        self.adam = None;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub episodes: usize,
    pub gamma: f64,
    pub learning_rate: f64,
    pub epsilon0: f64,
    pub epsilon_decay: f64,
    pub hidden: Vec<usize>,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes: 1000,
            gamma: 0.95,
            learning_rate: 1e-4,
            epsilon0: 0.5,
            epsilon_decay: 0.99,
            hidden: DEFAULT_HIDDEN.to_vec(),
            optimizer: OptimizerKind::Adam,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(0.0..=1.0).contains(&self.epsilon0) || !(0.0..=1.0).contains(&self.epsilon_decay) {
            return bad("epsilon and its decay must lie in [0, 1]");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        Ok(())
    }

    pub fn epsilon(&self, episode: usize) -> f64 {
        self.epsilon0 * self.epsilon_decay.powi(episode as i32)
    }

    pub fn update(&self) -> UpdateConfig {
        UpdateConfig {
            gamma: self.gamma,
            learning_rate: self.learning_rate,
            optimizer: self.optimizer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub unit_id: u32,
    pub steps: usize,
    pub total_reward: f64,
    pub epsilon: f64,
    pub failed: bool,
}

pub fn episode_log_csv(log: &[EpisodeLog]) -> String {
    let mut out = String::from("episode,unit,steps,total_reward,epsilon,failed\n");
    for e in log {
        writeln!(
            out,
            "{},{},{},{:?},{:?},{}",
            e.episode, e.unit_id, e.steps, e.total_reward, e.epsilon, e.failed
        )
        .unwrap();
    }
    out
}

pub fn write_episode_log(log: &[EpisodeLog], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, episode_log_csv(log)).map_err(|e| Error::io(path, e))
}

/// Fresh network trained on `env`.
pub fn train(env: &mut MaintenanceEnv, cfg: &TrainConfig) -> Result<(QFunction, Vec<EpisodeLog>)> {
    cfg.validate()?;
    let mut q = QFunction::new(env.observation_dim(), &cfg.hidden, cfg.seed)?;
    let log = train_from(&mut q, env, cfg)?;
    Ok((q, log))
}

pub fn train_from(
    q: &mut QFunction,
    env: &mut MaintenanceEnv,
    cfg: &TrainConfig,
) -> Result<Vec<EpisodeLog>> {
    cfg.validate()?;
    if q.input_dim() != env.observation_dim() {
        return Err(Error::dim("q-function input", q.input_dim(), env.observation_dim()));
    }
    let mut rng: ChaCha8Rng = substream(cfg.seed, "explore");
    env.reseed(cfg.seed);
    let update = cfg.update();
    let mut log = Vec::with_capacity(cfg.episodes);
    for episode in 0..cfg.episodes {
        let epsilon = cfg.epsilon(episode);
        let start = env.reset();
        let mut state = start.observation;
        let mut total = 0.0;
        let mut steps = 0;
        loop {
            let action = q.select_action(&state, epsilon, &mut rng)?;
            let step = env.step(action)?;
            q.td_update(
                &Transition {
                    state: &state,
                    action,
                    reward: step.reward,
                    next_state: &step.next_observation,
                    terminal: step.episode_ended,
                },
                &update,
            )?;
            total += step.reward;
            steps += 1;
            if step.episode_ended {
                log.push(EpisodeLog {
                    episode,
                    unit_id: start.unit_id,
                    steps,
                    total_reward: total,
                    epsilon,
                    failed: step.info.failed,
                });
                break;
            }
            state = step.next_observation;
        }
        if episode % 100 == 99 {
            tracing::debug!(episode, epsilon, total, "training");
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{CostSpec, EpisodeUnit};

    fn perturbed(q: &QFunction, layer: usize, bias: bool, idx: usize, h: f64) -> QFunction {
        let mut p = q.clone();
        let l = &mut p.layers[layer];
        if bias {
            l.bias[idx] += h;
        } else {
            let n = l.weights.ncols();
            l.weights[(idx / n, idx % n)] += h;
        }
        p
    }

    #[test]
    fn gradient_matches_central_differences() {
        let q = QFunction::new(4, &[6, 5], 11).unwrap();
        let s = [0.3, -0.7, 1.1, 0.2];
        let target = 0.4;
        for action in Action::ALL {
            let (_, g) = q.gradient(&s, action, target).unwrap();
            let h = 1e-6;
            let loss = |p: &QFunction| p.gradient(&s, action, target).unwrap().0;
            for layer in 0..3 {
                for bias in [false, true] {
                    let n = if bias {
                        q.layers[layer].bias.len()
                    } else {
                        q.layers[layer].weights.len()
                    };
                    for idx in 0..n {
                        let fd = (loss(&perturbed(&q, layer, bias, idx, h))
                            - loss(&perturbed(&q, layer, bias, idx, -h)))
                            / (2.0 * h);
                        let an = if bias {
                            g.biases[layer][idx]
                        } else {
                            {
                            let n = q.layers[layer].weights.ncols();
                            g.weights[layer][(idx / n, idx % n)]
                        }
                        };
                        let scale = fd.abs().max(an.abs()).max(1e-6);
                        assert!(
                            (fd - an).abs() / scale <= 1e-4 || (fd - an).abs() < 1e-9,
                            "layer {layer} bias {bias} idx {idx}: {fd} vs {an}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn parameters_round_trip() {
        let q = QFunction::new(3, &[4, 2], 1).unwrap();
        let mut r = QFunction::new(3, &[4, 2], 2).unwrap();
        assert_ne!(q, r);
        r.set_parameters(&q.parameters()).unwrap();
        assert_eq!(q, r);
        assert!(r.set_parameters(&[0.0; 3]).is_err());
        let (_, g) = q.gradient(&[0.1, 0.2, 0.3], Action::Hold, 1.0).unwrap();
        assert_eq!(g.flatten().len(), q.n_parameters());
    }

    #[test]
    fn default_shape() {
        let q = QFunction::new(10, &DEFAULT_HIDDEN, 0).unwrap();
        assert_eq!(q.hidden(), vec![128, 256]);
        assert_eq!(q.n_parameters(), 10 * 128 + 128 + 128 * 256 + 256 + 256 * 2 + 2);
        q.validate().unwrap();
    }

    #[test]
    fn input_width_checked() {
        let q = QFunction::new(3, &[4], 0).unwrap();
        assert!(matches!(q.q_values(&[1.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn non_finite_input_rejected() {
        let q = QFunction::new(2, &[4], 0).unwrap();
        assert!(matches!(q.q_values(&[f64::NAN, 0.0]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn terminal_update_moves_toward_reward() {
        for optimizer in [OptimizerKind::Adam, OptimizerKind::Sgd] {
            let mut q = QFunction::new(2, &[8], 3).unwrap();
            let s = [1.0, 0.0];
            let cfg = UpdateConfig {
                gamma: 0.95,
                learning_rate: 1e-2,
                optimizer,
            };
            let before = (q.q_values(&s).unwrap()[1] + 5.0).abs();
            for _ in 0..200 {
                q.td_update(
                    &Transition {
                        state: &s,
                        action: Action::Replace,
                        reward: -5.0,
                        next_state: &s,
                        terminal: true,
                    },
                    &cfg,
                )
                .unwrap();
            }
            let after = (q.q_values(&s).unwrap()[1] + 5.0).abs();
            assert!(after < 0.1 * before, "{optimizer:?}: {before} -> {after}");
        }
    }

    #[test]
    fn full_exploration_is_uniform() {
        let q = QFunction::new(2, &[4], 0).unwrap();
        let mut rng = substream(5, "test");
        let n = 20_000;
        let replaces = (0..n)
            .filter(|_| q.select_action(&[0.1, 0.2], 1.0, &mut rng).unwrap() == Action::Replace)
            .count();
        let p = replaces as f64 / n as f64;
        assert!((p - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt() + 1e-3, "{p}");
    }

    #[test]
    fn epsilon_schedule() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.epsilon(0), 0.5);
        assert!((cfg.epsilon(100) - 0.5 * 0.99f64.powi(100)).abs() < 1e-15);
    }

    fn one_hot_env(lifetime: usize) -> MaintenanceEnv {
        let obs = Array2::from_shape_fn((lifetime, lifetime), |(r, c)| (r == c) as u8 as f64);
        MaintenanceEnv::new(
            vec![EpisodeUnit {
                unit_id: 1,
                start: 1,
                observations: obs,
            }],
            CostSpec::default(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = TrainConfig {
            episodes: 30,
            hidden: vec![8, 8],
            seed: 4,
            ..TrainConfig::default()
        };
        let (a, la) = train(&mut one_hot_env(6), &cfg).unwrap();
        let (b, lb) = train(&mut one_hot_env(6), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
    }
}
