//! Tabular Q-learning over the joint (popularity candidate, previous
//! action) state space.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::actions::ActionSpace;
use crate::error::{Error, Result};
use crate::model::CachingAction;

/// Q-value table indexed `[state-ordinal, action-ordinal]` with
/// `state-ordinal = candidate * |A| + prev-action-ordinal`.
///
/// Rows are allocated on first write; unallocated entries read as the
/// initialization value (zero by default, or a constant chosen for
/// optimistic initialization).
#[derive(Debug, Clone)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    fill: f64,
    rows: Vec<Option<Box<[f64]>>>,
}

impl QTable {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self::with_fill(n_states, n_actions, 0.0)
    }

    /// Table whose every entry starts at `fill` instead of zero.
    pub fn with_fill(n_states: usize, n_actions: usize, fill: f64) -> Self {
        Self {
            n_states,
            n_actions,
            fill,
            rows: vec![None; n_states],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        match &self.rows[state] {
            Some(row) => row[action],
            None => self.fill,
        }
    }

    pub fn set(&mut self, state: usize, action: usize, value: f64) {
        self.row_mut(state)[action] = value;
    }

    fn row_mut(&mut self, state: usize) -> &mut [f64] {
        let fill = self.fill;
        self.rows[state].get_or_insert_with(|| vec![fill; self.n_actions].into_boxed_slice())
    }

    /// Greedy action ordinal at a state; ties break toward the lowest
    /// ordinal, so an untouched state yields ordinal 0.
    pub fn argmax(&self, state: usize) -> usize {
        match &self.rows[state] {
            Some(row) => {
                let mut best = 0usize;
                let mut best_v = row[0];
                for (a, &v) in row.iter().enumerate().skip(1) {
                    if v > best_v {
                        best_v = v;
                        best = a;
                    }
                }
                best
            }
            None => 0,
        }
    }

    pub fn max(&self, state: usize) -> f64 {
        match &self.rows[state] {
            Some(row) => row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)),
            None => self.fill,
        }
    }

    /// Number of materialized rows (diagnostic).
    pub fn allocated_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.is_some()).count()
    }
}

/// How the temporal-difference step size evolves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaMode {
    /// Constant step size.
    Fixed,
    /// Robbins-Monro `1/n(x,a)` visit-count decay.
    VisitDecay,
}

/// Tabular Q-learning agent.
#[derive(Debug)]
pub struct QLearningAgent {
    space: ActionSpace,
    n_candidates: usize,
    table: QTable,
    gamma: f64,
    lambda: f64,
    lambda_mode: LambdaMode,
    visits: Vec<Option<Box<[u32]>>>,
}

impl QLearningAgent {
    pub fn new(
        space: ActionSpace,
        n_candidates: usize,
        gamma: f64,
        lambda: f64,
        lambda_mode: LambdaMode,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidParams("gamma must be in [0,1]".into()));
        }
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::InvalidParams("lambda must be in (0,1]".into()));
        }
        let n_states = n_candidates * space.len();
        let visits = match lambda_mode {
            LambdaMode::Fixed => Vec::new(),
            LambdaMode::VisitDecay => vec![None; n_states],
        };
        Ok(Self {
            n_candidates,
            table: QTable::new(n_states, space.len()),
            space,
            gamma,
            lambda,
            lambda_mode,
            visits,
        })
    }

    /// Replaces the all-zero initialization with a constant (optimistic
    /// initialization). Must be called before any update has materialized
    /// a row.
    pub fn set_initial_value(&mut self, value: f64) -> Result<()> {
        if self.table.allocated_rows() > 0 {
            return Err(Error::InvalidParams(
                "initial value must be set before learning starts".into(),
            ));
        }
        self.table = QTable::with_fill(self.table.n_states(), self.table.n_actions(), value);
        Ok(())
    }

    pub fn space(&self) -> &ActionSpace {
        &self.space
    }

    pub fn table(&self) -> &QTable {
        &self.table
    }

    pub fn table_mut(&mut self) -> &mut QTable {
        &mut self.table
    }

    pub fn n_candidates(&self) -> usize {
        self.n_candidates
    }

    pub fn state_ordinal(&self, candidate: usize, prev_action: &CachingAction) -> Result<usize> {
        if candidate >= self.n_candidates {
            return Err(Error::InvalidParams(format!(
                "candidate {candidate} out of range"
            )));
        }
        let ord = self
            .space
            .ordinal(prev_action)
            .ok_or_else(|| Error::InvalidAction("previous action not in space".into()))?;
        Ok(candidate * self.space.len() + ord)
    }

    /// Epsilon-greedy selection: greedy argmax with probability `1-eps`,
    /// uniform over the enumerated space otherwise.
    pub fn select(
        &self,
        candidate: usize,
        prev_action: &CachingAction,
        epsilon: f64,
        rng: &mut ChaCha12Rng,
    ) -> Result<CachingAction> {
        let state = self.state_ordinal(candidate, prev_action)?;
        if epsilon > 0.0 && rng.random::<f64>() < epsilon {
            Ok(self.space.sample(rng).clone())
        } else {
            Ok(self.space.action(self.table.argmax(state)).clone())
        }
    }

    pub fn greedy(&self, candidate: usize, prev_action: &CachingAction) -> Result<CachingAction> {
        let state = self.state_ordinal(candidate, prev_action)?;
        Ok(self.space.action(self.table.argmax(state)).clone())
    }

    /// Temporal-difference update of a single entry; everything else is
    /// left untouched.
    pub fn update(&mut self, state: usize, action: usize, reward: f64, next_state: usize) {
        let lambda = match self.lambda_mode {
            LambdaMode::Fixed => self.lambda,
            LambdaMode::VisitDecay => {
                let row = self.visits[state]
                    .get_or_insert_with(|| vec![0u32; self.table.n_actions].into_boxed_slice());
                row[action] += 1;
                1.0 / row[action] as f64
            }
        };
        let target = reward + self.gamma * self.table.max(next_state);
        let old = self.table.get(state, action);
        self.table.set(state, action, old + lambda * (target - old));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::{enumerate, Lattice};
    use crate::model::SystemParams;
    use rand::SeedableRng;

    fn agent(gamma: f64, lambda: f64) -> QLearningAgent {
        let sys = SystemParams::new(2, 3, 1, 2, 2, 1.0, 10).unwrap();
        let space = enumerate(&sys, Lattice::Fractional, 1 << 20).unwrap();
        QLearningAgent::new(space, 2, gamma, lambda, LambdaMode::Fixed).unwrap()
    }

    #[test]
    fn td_update_from_zero_table() {
        // Q=0 everywhere, lambda=0.6, R=9, gamma=0.9 -> Q[x,a] = 5.4
        let mut ag = agent(0.9, 0.6);
        ag.update(0, 1, 9.0, 3);
        assert!((ag.table().get(0, 1) - 5.4).abs() < 1e-12);
        // all other entries unchanged
        assert_eq!(ag.table().get(0, 0), 0.0);
        assert_eq!(ag.table().get(1, 1), 0.0);
    }

    #[test]
    fn zero_is_fixed_point() {
        let mut ag = agent(0.9, 0.6);
        ag.update(2, 0, 0.0, 4);
        assert_eq!(ag.table().get(2, 0), 0.0);
    }

    #[test]
    fn pure_sample_replacement() {
        let mut ag = agent(0.0, 1.0);
        ag.update(1, 2, 3.25, 0);
        assert_eq!(ag.table().get(1, 2), 3.25);
    }

    #[test]
    fn greedy_tie_breaks_to_first_action() {
        let ag = agent(0.9, 0.6);
        let first = ag.space().action(0).clone();
        let g = ag.greedy(0, &first).unwrap();
        assert_eq!(g.levels(), ag.space().action(0).levels());
    }

    #[test]
    fn greedy_picks_unique_max() {
        let mut ag = agent(0.9, 0.6);
        let prev = ag.space().action(0).clone();
        let state = ag.state_ordinal(1, &prev).unwrap();
        ag.table_mut().set(state, 2, 5.0);
        let g = ag.greedy(1, &prev).unwrap();
        assert_eq!(g.levels(), ag.space().action(2).levels());
    }

    #[test]
    fn epsilon_one_is_uniform() {
        let ag = agent(0.9, 0.6);
        let prev = ag.space().action(0).clone();
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let n = 10_000;
        let mut freq = vec![0usize; ag.space().len()];
        for _ in 0..n {
            let a = ag.select(0, &prev, 1.0, &mut rng).unwrap();
            freq[ag.space().ordinal(&a).unwrap()] += 1;
        }
        // chi-square over the 3-action space, df = 2, crit(0.999) ~ 13.8
        let expect = n as f64 / 3.0;
        let chi2: f64 = freq
            .iter()
            .map(|&f| (f as f64 - expect).powi(2) / expect)
            .sum();
        assert!(chi2 < 13.8, "chi2 = {chi2}");
    }

    #[test]
    fn visit_decay_averages_samples() {
        let sys = SystemParams::new(2, 3, 1, 2, 2, 1.0, 10).unwrap();
        let space = enumerate(&sys, Lattice::Fractional, 1 << 20).unwrap();
        let mut ag = QLearningAgent::new(space, 2, 0.0, 0.6, LambdaMode::VisitDecay).unwrap();
        ag.update(0, 0, 2.0, 1);
        ag.update(0, 0, 4.0, 1);
        ag.update(0, 0, 6.0, 1);
        assert!((ag.table().get(0, 0) - 4.0).abs() < 1e-12);
    }
}
