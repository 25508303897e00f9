//! Decision-makers: planning oracle, tabular Q-learning, the linear
//! approximation agent, and the myopic popularity baseline, behind one
//! trait the experiment loop can drive.

pub mod mpcc;
pub mod qlearning;
pub mod snapshot;
pub mod value_iteration;
pub mod vfa;

use rand_chacha::ChaCha12Rng;

use crate::actions::{Lattice, UniformActionSampler};
use crate::env::CacheEnv;
use crate::error::{Error, Result};
use crate::model::{CachingAction, EnvObservation, PopularityProfile, SystemParams};

pub use mpcc::mpcc_select;
pub use qlearning::{LambdaMode, QLearningAgent, QTable};
pub use value_iteration::{value_iteration, TabularMdp, ValueIterationResult};
pub use vfa::{vfa_qhat, vfa_select, vfa_update, VfaParams};

/// Everything an agent may learn from one slot.
#[derive(Debug, Clone)]
pub struct TransitionSample {
    pub candidate: Option<usize>,
    pub next_candidate: Option<usize>,
    pub theta: PopularityProfile,
    pub next_theta: PopularityProfile,
    pub prev_action: CachingAction,
    pub action: CachingAction,
    pub reward: f64,
}

pub trait Agent {
    /// Epsilon-greedy action for the current observation.
    fn select(
        &mut self,
        obs: &EnvObservation,
        epsilon: f64,
        rng: &mut ChaCha12Rng,
    ) -> Result<CachingAction>;

    /// Purely greedy action (no exploration, no learning).
    fn greedy(&self, obs: &EnvObservation) -> Result<CachingAction>;

    /// Consume one transition; no-op for non-learning agents.
    fn observe(&mut self, sample: &TransitionSample) -> Result<()>;

    fn name(&self) -> &'static str;
}

fn require_candidate(obs: &EnvObservation) -> Result<usize> {
    obs.candidate_index.ok_or(Error::ModelHidden)
}

impl Agent for QLearningAgent {
    fn select(
        &mut self,
        obs: &EnvObservation,
        epsilon: f64,
        rng: &mut ChaCha12Rng,
    ) -> Result<CachingAction> {
        QLearningAgent::select(
            self,
            require_candidate(obs)?,
            &obs.prev_action,
            epsilon,
            rng,
        )
    }

    fn greedy(&self, obs: &EnvObservation) -> Result<CachingAction> {
        QLearningAgent::greedy(self, require_candidate(obs)?, &obs.prev_action)
    }

    fn observe(&mut self, sample: &TransitionSample) -> Result<()> {
        let candidate = sample.candidate.ok_or(Error::ModelHidden)?;
        let next_candidate = sample.next_candidate.ok_or(Error::ModelHidden)?;
        let state = self.state_ordinal(candidate, &sample.prev_action)?;
        let next_state = self.state_ordinal(next_candidate, &sample.action)?;
        let action = self
            .space()
            .ordinal(&sample.action)
            .ok_or_else(|| Error::InvalidAction("action not in the enumerated space".into()))?;
        self.update(state, action, sample.reward, next_state);
        Ok(())
    }

    fn name(&self) -> &'static str {
        "qlearning"
    }
}

/// Linear-approximation learner: analytic selector for exploitation,
/// uniform constrained actions for exploration, SGD on observe.
pub struct VfaAgent {
    sys: SystemParams,
    params: VfaParams,
    sampler: UniformActionSampler,
    gamma: f64,
    delta: f64,
}

impl VfaAgent {
    pub fn new(
        sys: SystemParams,
        lattice: Lattice,
        omega1: f64,
        omega2: f64,
        gamma: f64,
        delta: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidParams("gamma must be in [0,1]".into()));
        }
        if delta.is_nan() || delta <= 0.0 {
            return Err(Error::InvalidParams("delta must be positive".into()));
        }
        let params = VfaParams::new(sys.c, omega1, omega2)?;
        let sampler = UniformActionSampler::new(&sys, lattice)?;
        Ok(Self {
            sys,
            params,
            sampler,
            gamma,
            delta,
        })
    }

    pub fn params(&self) -> &VfaParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut VfaParams {
        &mut self.params
    }
}

impl Agent for VfaAgent {
    fn select(
        &mut self,
        obs: &EnvObservation,
        epsilon: f64,
        rng: &mut ChaCha12Rng,
    ) -> Result<CachingAction> {
        use rand::Rng as _;
        if epsilon > 0.0 && rng.random::<f64>() < epsilon {
            Ok(self.sampler.sample(rng))
        } else {
            vfa_select(&self.params, &obs.theta, &self.sys)
        }
    }

    fn greedy(&self, obs: &EnvObservation) -> Result<CachingAction> {
        vfa_select(&self.params, &obs.theta, &self.sys)
    }

    fn observe(&mut self, sample: &TransitionSample) -> Result<()> {
        vfa_update(
            &mut self.params,
            &sample.theta,
            &sample.prev_action,
            &sample.action,
            sample.reward,
            &sample.next_theta,
            &self.sys,
            self.gamma,
            self.delta,
        )
    }

    fn name(&self) -> &'static str {
        "vfa"
    }
}

/// Most-popular baseline: no learning, no exploration.
pub struct MpccAgent {
    sys: SystemParams,
}

impl MpccAgent {
    pub fn new(sys: SystemParams) -> Self {
        Self { sys }
    }
}

impl Agent for MpccAgent {
    fn select(
        &mut self,
        obs: &EnvObservation,
        _epsilon: f64,
        _rng: &mut ChaCha12Rng,
    ) -> Result<CachingAction> {
        mpcc_select(&obs.theta, &self.sys)
    }

    fn greedy(&self, obs: &EnvObservation) -> Result<CachingAction> {
        mpcc_select(&obs.theta, &self.sys)
    }

    fn observe(&mut self, _sample: &TransitionSample) -> Result<()> {
        Ok(())
    }

    fn name(&self) -> &'static str {
        "mpcc"
    }
}

/// Fixed optimal policy computed by value iteration on the exact model of
/// a white-box environment.
pub struct ValueIterationAgent {
    policy: Vec<usize>,
    space_len: usize,
    env_actions: Vec<CachingAction>,
}

impl ValueIterationAgent {
    pub fn from_env(env: &CacheEnv, gamma: f64, tol: f64) -> Result<Self> {
        let mdp = env.exact_model()?;
        let result = value_iteration(&mdp, gamma, tol)?;
        let space = env
            .action_space()
            .ok_or_else(|| Error::Infeasible("action space not enumerable".into()))?;
        Ok(Self {
            policy: result.policy,
            space_len: space.len(),
            env_actions: space.actions().to_vec(),
        })
    }

    pub fn policy(&self) -> &[usize] {
        &self.policy
    }

    fn act(&self, obs: &EnvObservation) -> Result<CachingAction> {
        let candidate = require_candidate(obs)?;
        let prev = self
            .env_actions
            .iter()
            .position(|a| a == &obs.prev_action)
            .ok_or_else(|| Error::InvalidAction("previous action not in space".into()))?;
        let state = candidate * self.space_len + prev;
        Ok(self.env_actions[self.policy[state]].clone())
    }
}

impl Agent for ValueIterationAgent {
    fn select(
        &mut self,
        obs: &EnvObservation,
        _epsilon: f64,
        _rng: &mut ChaCha12Rng,
    ) -> Result<CachingAction> {
        self.act(obs)
    }

    fn greedy(&self, obs: &EnvObservation) -> Result<CachingAction> {
        self.act(obs)
    }

    fn observe(&mut self, _sample: &TransitionSample) -> Result<()> {
        Ok(())
    }

    fn name(&self) -> &'static str {
        "value_iteration"
    }
}
