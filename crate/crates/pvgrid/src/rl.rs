//! Reinforcement-learning SVC voltage controller.
//!
//! The plant is a linearized voltage-VAR sensitivity: the controller's
//! reactive output moves the bus voltage by `k_v` per MVAR around nominal,
//! with disturbances entering as persistent voltage offsets. The learner is
//! one-step tabular Q-learning over a discretized voltage state; with the
//! default grid (81 quantization points, 2.5 mpu apart) one action step of
//! 100 MVAR moves the voltage exactly 20 points, so the discretized
//! process is an exact finite MDP and a dynamic-programming solution of it
//! serves as a ground-truth oracle for the learned policy.
//!
//! Everything is deterministic given the seed: training twice with the
//! same configuration produces bit-identical agents.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum DisturbanceModel {
    None,
    /// Persistent voltage offset applied from `at_step` onward.
    StepAtTime { delta_pu: f64, at_step: usize },
    /// Lattice-sized random offset increment of +/- `step_pu` each step.
    RandomWalk { step_pu: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvConfig {
    pub nominal_voltage_pu: f64,
    pub band_low_pu: f64,
    pub band_high_pu: f64,
    /// Voltage sensitivity to injected reactive power, pu per MVAR.
    pub sensitivity_pu_per_mvar: f64,
    /// Reactive increment of one control action, MVAR.
    pub q_step_mvar: f64,
    pub q_limit_mvar: f64,
    pub disturbance: DisturbanceModel,
    pub episode_length: usize,
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            nominal_voltage_pu: 1.0,
            band_low_pu: 0.95,
            band_high_pu: 1.05,
            sensitivity_pu_per_mvar: 0.0005,
            q_step_mvar: 100.0,
            q_limit_mvar: 400.0,
            disturbance: DisturbanceModel::None,
            episode_length: 40,
            seed: 42,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.band_low_pu < self.nominal_voltage_pu
            && self.nominal_voltage_pu < self.band_high_pu
            && self.sensitivity_pu_per_mvar > 0.0
            && self.q_step_mvar > 0.0
            && self.q_limit_mvar > 0.0
            && self.episode_length > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput {
                what: "environment config",
                detail: "band must straddle nominal and sensitivities must be positive"
                    .to_string(),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnvState {
    pub voltage_pu: f64,
    pub svc_q_mvar: f64,
    pub step_index: usize,
}

/// Pure one-step dynamics: clamp the reactive command, move the voltage,
/// score the result. `offset_pu` is the accumulated disturbance.
pub fn env_step(
    state: &EnvState,
    action_mvar: f64,
    offset_pu: f64,
    config: &EnvConfig,
) -> (EnvState, f64) {
    let q = (state.svc_q_mvar + action_mvar).clamp(-config.q_limit_mvar, config.q_limit_mvar);
    let voltage = config.nominal_voltage_pu + config.sensitivity_pu_per_mvar * q + offset_pu;
    let reward = reward_for(voltage, config);
    (
        EnvState {
            voltage_pu: voltage,
            svc_q_mvar: q,
            step_index: state.step_index + 1,
        },
        reward,
    )
}

/// Deviation penalty plus an in-band bonus.
pub fn reward_for(voltage_pu: f64, config: &EnvConfig) -> f64 {
    let deviation = (voltage_pu - config.nominal_voltage_pu).abs();
    let bonus = if voltage_pu >= config.band_low_pu && voltage_pu <= config.band_high_pu {
        0.5
    } else {
        0.0
    };
    -deviation + bonus
}

/// The simulated plant: dynamics, disturbance schedule, and episode state.
pub struct Environment {
    pub config: EnvConfig,
    state: EnvState,
    offset_pu: f64,
    scripted: Vec<ScriptedDisturbance>,
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptedDisturbance {
    pub at_step: usize,
    pub delta_pu: f64,
}

impl Environment {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let seed = config.seed;
        Ok(Self {
            config,
            state: EnvState {
                voltage_pu: 0.0,
                svc_q_mvar: 0.0,
                step_index: 0,
            },
            offset_pu: 0.0,
            scripted: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn with_script(mut self, script: &[ScriptedDisturbance]) -> Self {
        self.scripted = script.to_vec();
        self
    }

    /// Starts an episode with the voltage displaced by `start_offset_pu`
    /// (a persistent disturbance) and the compensator at zero output.
    pub fn reset(&mut self, start_offset_pu: f64) -> EnvState {
        self.offset_pu = start_offset_pu;
        self.state = EnvState {
            voltage_pu: self.config.nominal_voltage_pu + start_offset_pu,
            svc_q_mvar: 0.0,
            step_index: 0,
        };
        self.state
    }

    pub fn state(&self) -> EnvState {
        self.state
    }

    pub fn step(&mut self, action_mvar: f64) -> (EnvState, f64) {
        let next_index = self.state.step_index + 1;
        match self.config.disturbance {
            DisturbanceModel::StepAtTime { delta_pu, at_step } if at_step == next_index => {
                self.offset_pu += delta_pu;
            }
            DisturbanceModel::RandomWalk { step_pu } => {
                let sign = if self.rng.random::<bool>() { 1.0 } else { -1.0 };
                self.offset_pu += sign * step_pu;
            }
            _ => {}
        }
        for d in &self.scripted {
            if d.at_step == next_index {
                self.offset_pu += d.delta_pu;
            }
        }
        let (state, reward) = env_step(&self.state, action_mvar, self.offset_pu, &self.config);
        self.state = state;
        (state, reward)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon_initial: f64,
    pub epsilon_final: f64,
    /// Multiplicative per-episode decay of the exploration rate.
    pub epsilon_decay: f64,
    pub episodes: usize,
    /// Symmetric action levels including "hold": 3 gives {-dQ, 0, +dQ}.
    pub action_levels: usize,
    /// Voltage quantization points spanning [grid_low, grid_high].
    pub grid_points: usize,
    pub grid_low_pu: f64,
    pub grid_high_pu: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            discount: 0.9,
            epsilon_initial: 1.0,
            epsilon_final: 0.1,
            epsilon_decay: 0.995,
            episodes: 500,
            action_levels: 3,
            grid_points: 81,
            grid_low_pu: 0.90,
            grid_high_pu: 1.10,
        }
    }
}

/// A trained controller: the value table plus everything needed to rerun it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Agent {
    pub env: EnvConfig,
    pub hyper: Hyperparameters,
    pub actions_mvar: Vec<f64>,
    /// `values[state_bin][action_index]`, the expected discounted return.
    pub values: Vec<Vec<f64>>,
}

impl Agent {
    pub fn untrained(env: EnvConfig, hyper: Hyperparameters) -> Result<Self> {
        env.validate()?;
        if hyper.action_levels < 3 || hyper.action_levels % 2 == 0 {
            return Err(Error::InvalidInput {
                what: "action levels",
                detail: format!("{} must be an odd count of at least 3", hyper.action_levels),
            });
        }
        if hyper.grid_points < 2 || hyper.grid_low_pu >= hyper.grid_high_pu {
            return Err(Error::InvalidInput {
                what: "state grid",
                detail: "need at least two points with low < high".to_string(),
            });
        }
        let half = (hyper.action_levels / 2) as i64;
        let actions_mvar = (-half..=half)
            .map(|k| k as f64 * env.q_step_mvar)
            .collect::<Vec<_>>();
        let values = vec![vec![0.0; actions_mvar.len()]; hyper.grid_points];
        Ok(Self {
            env,
            hyper,
            actions_mvar,
            values,
        })
    }

    pub fn bin_width(&self) -> f64 {
        (self.hyper.grid_high_pu - self.hyper.grid_low_pu) / (self.hyper.grid_points - 1) as f64
    }

    pub fn bin_of(&self, voltage_pu: f64) -> usize {
        let raw = (voltage_pu - self.hyper.grid_low_pu) / self.bin_width();
        (raw.round().max(0.0) as usize).min(self.hyper.grid_points - 1)
    }

    pub fn bin_center(&self, bin: usize) -> f64 {
        self.hyper.grid_low_pu + bin as f64 * self.bin_width()
    }

    /// Greedy action index; exact value ties prefer the smallest move.
    pub fn greedy_action(&self, bin: usize) -> usize {
        argmax_preferring_small_moves(&self.values[bin], &self.actions_mvar)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn argmax_preferring_small_moves(values: &[f64], actions: &[f64]) -> usize {
    let mut best = 0usize;
    for i in 1..values.len() {
        let better = values[i] > values[best]
            || (values[i] == values[best]
                && (actions[i].abs() < actions[best].abs()
                    || (actions[i].abs() == actions[best].abs()
                        && actions[i] > actions[best])));
        if better {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingLog {
    /// Cumulative reward per episode.
    pub episode_returns: Vec<f64>,
    pub final_epsilon: f64,
}

/// One-step Q-learning with epsilon-greedy exploration and exploring
/// starts drawn uniformly over the state grid.
pub fn train_agent(config: &EnvConfig, hyper: &Hyperparameters) -> Result<(Agent, TrainingLog)> {
    let mut agent = Agent::untrained(config.clone(), hyper.clone())?;
    let mut env = Environment::new(config.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut epsilon = hyper.epsilon_initial;
    let mut episode_returns = Vec::with_capacity(hyper.episodes);

    for _ in 0..hyper.episodes {
        let start_bin = rng.random_range(0..hyper.grid_points);
        let start_offset = agent.bin_center(start_bin) - config.nominal_voltage_pu;
        let mut state = env.reset(start_offset);
        let mut bin = agent.bin_of(state.voltage_pu);
        let mut episode_return = 0.0;
        for _ in 0..config.episode_length {
            let action_index = if rng.random::<f64>() < epsilon {
                rng.random_range(0..agent.actions_mvar.len())
            } else {
                agent.greedy_action(bin)
            };
            let (next, reward) = env.step(agent.actions_mvar[action_index]);
            let next_bin = agent.bin_of(next.voltage_pu);
            let target = reward
                + hyper.discount
                    * agent.values[next_bin]
                        .iter()
                        .copied()
                        .fold(f64::NEG_INFINITY, f64::max);
            let value = &mut agent.values[bin][action_index];
            *value += hyper.learning_rate * (target - *value);
            if !value.is_finite() {
                return Err(Error::InvalidInput {
                    what: "training",
                    detail: format!(
                        "value update diverged at bin {bin} (learning rate {})",
                        hyper.learning_rate
                    ),
                });
            }
            episode_return += reward;
            state = next;
            bin = next_bin;
        }
        let _ = state;
        episode_returns.push(episode_return);
        epsilon = (epsilon * hyper.epsilon_decay).max(hyper.epsilon_final);
    }

    Ok((
        agent,
        TrainingLog {
            episode_returns,
            final_epsilon: epsilon,
        },
    ))
}

/// Exact dynamic-programming solution of the discretized environment:
/// value iteration over the finite bin/action MDP with grid-clamped
/// deterministic transitions. Returns the optimal value table.
pub fn dp_optimal_values(agent_shape: &Agent) -> Vec<Vec<f64>> {
    let config = &agent_shape.env;
    let hyper = &agent_shape.hyper;
    let n = hyper.grid_points;
    let actions = &agent_shape.actions_mvar;
    let mut values = vec![vec![0.0; actions.len()]; n];
    let mut next_state = vec![vec![0usize; actions.len()]; n];
    let mut rewards = vec![vec![0.0; actions.len()]; n];
    for bin in 0..n {
        for (ai, a) in actions.iter().enumerate() {
            let v = (agent_shape.bin_center(bin) + config.sensitivity_pu_per_mvar * a)
                .clamp(hyper.grid_low_pu, hyper.grid_high_pu);
            next_state[bin][ai] = agent_shape.bin_of(v);
            rewards[bin][ai] = reward_for(v, config);
        }
    }
    for _ in 0..20_000 {
        let mut delta = 0.0f64;
        for bin in 0..n {
            for ai in 0..actions.len() {
                let ns = next_state[bin][ai];
                let best_next = values[ns]
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max);
                let updated = rewards[bin][ai] + hyper.discount * best_next;
                delta = delta.max((updated - values[bin][ai]).abs());
                values[bin][ai] = updated;
            }
        }
        if delta < 1e-13 {
            break;
        }
    }
    values
}

/// Fraction of state bins where the learned greedy action is DP-optimal;
/// exact value ties in the DP table count as agreement.
pub fn policy_agreement(agent: &Agent, dp_values: &[Vec<f64>]) -> f64 {
    let n = agent.hyper.grid_points;
    let mut matches = 0usize;
    for bin in 0..n {
        let learned = agent.greedy_action(bin);
        let optimal = argmax_preferring_small_moves(&dp_values[bin], &agent.actions_mvar);
        let tied = (dp_values[bin][learned] - dp_values[bin][optimal]).abs() < 1e-9;
        if learned == optimal || tied {
            matches += 1;
        }
    }
    matches as f64 / n as f64
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub voltage_pu: f64,
    pub action_mvar: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub steps: Vec<TraceStep>,
}

impl EpisodeTrace {
    pub fn cumulative_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }
}

/// Greedy rollout from nominal with scripted disturbances; no exploration.
pub fn evaluate_episode(
    agent: &Agent,
    config: &EnvConfig,
    disturbances: &[ScriptedDisturbance],
) -> Result<EpisodeTrace> {
    let mut env = Environment::new(config.clone())?.with_script(disturbances);
    let mut state = env.reset(0.0);
    let mut steps = Vec::with_capacity(config.episode_length);
    for _ in 0..config.episode_length {
        let bin = agent.bin_of(state.voltage_pu);
        let action = agent.actions_mvar[agent.greedy_action(bin)];
        let (next, reward) = env.step(action);
        steps.push(TraceStep {
            step: next.step_index,
            voltage_pu: next.voltage_pu,
            action_mvar: action,
            reward,
        });
        state = next;
    }
    Ok(EpisodeTrace { steps })
}

/// Parses a disturbance script like `step:-0.07@10` or `none`.
pub fn parse_disturbance(text: &str) -> Result<Vec<ScriptedDisturbance>> {
    let text = text.trim();
    if text.is_empty() || text == "none" {
        return Ok(Vec::new());
    }
    let mut script = Vec::new();
    for part in text.split(',') {
        let rest = part.strip_prefix("step:").ok_or_else(|| Error::InvalidInput {
            what: "disturbance script",
            detail: format!("`{part}` does not start with `step:`"),
        })?;
        let (delta, at) = rest.split_once('@').ok_or_else(|| Error::InvalidInput {
            what: "disturbance script",
            detail: format!("`{part}` is missing `@step`"),
        })?;
        let delta_pu: f64 = delta.parse().map_err(|_| Error::InvalidInput {
            what: "disturbance script",
            detail: format!("`{delta}` is not a number"),
        })?;
        let at_step: usize = at.parse().map_err(|_| Error::InvalidInput {
            what: "disturbance script",
            detail: format!("`{at}` is not a step index"),
        })?;
        script.push(ScriptedDisturbance { at_step, delta_pu });
    }
    Ok(script)
}
