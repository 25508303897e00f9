//! Enumeration, indexing, validation, and uniform sampling of the
//! constrained caching action space.
//!
//! An action is an integer composition of `K*L` over `C` contents with each
//! part capped at `ceil(L/d)`. The RL-NC configuration restricts parts to
//! `{0, L}` (full contents only).

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{level_cap, CachingAction, SystemParams};

/// Default enumeration cap; callers above this fall back to sampling plus
/// the analytic VFA selector.
pub const DEFAULT_ENUMERATION_CAP: u128 = 5_000_000;

/// `ceil(L/d)`, the cap on every action entry.
pub fn lmax(l: u32, d: u32) -> u32 {
    level_cap(l, d)
}

/// Which lattice the actions live on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lattice {
    /// Integer levels in `[0, ceil(L/d)]`.
    Fractional,
    /// Levels in `{0, L}`: whole contents only (RL-NC).
    FullContent,
}

impl Lattice {
    fn allowed_max(&self, params: &SystemParams) -> u32 {
        match self {
            Lattice::Fractional => params.level_cap(),
            Lattice::FullContent => params.l,
        }
    }
}

/// The enumerated action space: lexicographically ordered, duplicate-free,
/// with an exact level-vector -> ordinal index.
#[derive(Debug, Clone)]
pub struct ActionSpace {
    params: SystemParams,
    lattice: Lattice,
    actions: Vec<CachingAction>,
    index: HashMap<Vec<u32>, usize>,
}

impl ActionSpace {
    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn actions(&self) -> &[CachingAction] {
        &self.actions
    }

    pub fn action(&self, ordinal: usize) -> &CachingAction {
        &self.actions[ordinal]
    }

    /// Ordinal of an action, if it belongs to the space.
    pub fn ordinal(&self, action: &CachingAction) -> Option<usize> {
        self.index.get(action.levels()).copied()
    }

    /// Uniform draw over the enumerated space.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &CachingAction {
        &self.actions[rng.random_range(0..self.actions.len())]
    }
}

/// Exact number of valid actions, or an error when the count exceeds `cap`.
pub fn count_actions(params: &SystemParams, lattice: Lattice) -> u128 {
    let budget = params.level_budget();
    match lattice {
        Lattice::Fractional => {
            count_bounded_compositions(params.c, budget as u64, params.level_cap() as u64)
        }
        Lattice::FullContent => {
            if !budget.is_multiple_of(params.l) {
                0
            } else {
                binomial(params.c as u128, params.k as u128)
            }
        }
    }
}

/// Number of compositions of `sum` into `parts` parts, each in `[0, cap]`.
/// Saturates at `u128::MAX`.
pub fn count_bounded_compositions(parts: usize, sum: u64, cap: u64) -> u128 {
    // DP over suffix lengths; row[s] = #ways to fill `i` parts summing to s.
    let sum = sum as usize;
    let cap = cap as usize;
    let mut row = vec![0u128; sum + 1];
    row[0] = 1;
    for _ in 0..parts {
        let mut next = vec![0u128; sum + 1];
        for s in 0..=sum {
            if row[s] == 0 {
                continue;
            }
            for v in 0..=cap.min(sum - s) {
                next[s + v] = next[s + v].saturating_add(row[s]);
            }
        }
        row = next;
    }
    row[sum]
}

/// Inclusion-exclusion count of bounded compositions, as a float.
/// Used as an independent cross-check of the enumerator.
pub fn inclusion_exclusion_count(parts: usize, sum: u64, cap: u64) -> f64 {
    let n = parts as i64;
    let s = sum as i64;
    let c1 = cap as i64 + 1;
    let mut total = 0.0;
    let mut sign = 1.0;
    for j in 0..=parts as i64 {
        let rem = s - j * c1;
        if rem < 0 {
            break;
        }
        total += sign * binomial_f64(n, j) * binomial_f64(rem + n - 1, n - 1);
        sign = -sign;
    }
    total
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

fn binomial_f64(n: i64, k: i64) -> f64 {
    if k < 0 || k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Enumerates the full action space in lexicographic order.
///
/// Refuses when the exact count exceeds `cap` (see
/// [`DEFAULT_ENUMERATION_CAP`]); large-scale callers sample instead.
pub fn enumerate(params: &SystemParams, lattice: Lattice, cap: u128) -> Result<ActionSpace> {
    params.validate()?;
    let count = count_actions(params, lattice);
    if count == 0 {
        return Err(Error::EmptyActionSpace);
    }
    if count > cap {
        return Err(Error::ActionSpaceTooLarge { size: count, cap });
    }

    let budget = params.level_budget();
    let mut actions = Vec::with_capacity(count as usize);
    let mut current = vec![0u32; params.c];
    enumerate_rec(params, lattice, 0, budget, &mut current, &mut actions);

    let index = actions
        .iter()
        .enumerate()
        .map(|(i, a): (usize, &CachingAction)| (a.levels().to_vec(), i))
        .collect();
    Ok(ActionSpace {
        params: *params,
        lattice,
        actions,
        index,
    })
}

fn enumerate_rec(
    params: &SystemParams,
    lattice: Lattice,
    pos: usize,
    remaining: u32,
    current: &mut Vec<u32>,
    out: &mut Vec<CachingAction>,
) {
    if pos == params.c {
        if remaining == 0 {
            out.push(CachingAction::from_levels(current.clone()));
        }
        return;
    }
    let slots_left = (params.c - pos - 1) as u64;
    let max_entry = lattice.allowed_max(params);
    let tail_cap = slots_left * max_entry as u64;
    match lattice {
        Lattice::Fractional => {
            let hi = max_entry.min(remaining);
            for v in 0..=hi {
                if (remaining - v) as u64 > tail_cap {
                    continue;
                }
                current[pos] = v;
                enumerate_rec(params, lattice, pos + 1, remaining - v, current, out);
            }
        }
        Lattice::FullContent => {
            for v in [0, params.l] {
                if v > remaining || (remaining - v) as u64 > tail_cap {
                    continue;
                }
                current[pos] = v;
                enumerate_rec(params, lattice, pos + 1, remaining - v, current, out);
            }
        }
    }
    current[pos] = 0;
}

/// True iff `a` satisfies both the budget and the per-entry cap constraint.
pub fn validate(a: &CachingAction, params: &SystemParams) -> bool {
    validate_on(a, params, Lattice::Fractional)
}

pub fn validate_on(a: &CachingAction, params: &SystemParams, lattice: Lattice) -> bool {
    if a.levels().len() != params.c {
        return false;
    }
    let max_entry = lattice.allowed_max(params);
    if a.levels().iter().any(|&v| v > max_entry) {
        return false;
    }
    if lattice == Lattice::FullContent && a.levels().iter().any(|&v| v != 0 && v != params.l) {
        return false;
    }
    let sum: u64 = a.levels().iter().map(|&v| v as u64).sum();
    sum == params.level_budget() as u64
}

/// The lexicographically smallest valid action.
pub fn lex_first_action(params: &SystemParams, lattice: Lattice) -> Result<CachingAction> {
    params.validate()?;
    let max_entry = lattice.allowed_max(params) as u64;
    let mut levels = vec![0u32; params.c];
    let mut remaining = params.level_budget() as u64;
    // fill from the tail so leading entries stay minimal
    for i in (0..params.c).rev() {
        let v = match lattice {
            Lattice::Fractional => remaining.min(max_entry),
            Lattice::FullContent => {
                if remaining >= params.l as u64 {
                    params.l as u64
                } else {
                    0
                }
            }
        };
        levels[i] = v as u32;
        remaining -= v;
        if remaining == 0 {
            break;
        }
    }
    if remaining != 0 {
        return Err(Error::EmptyActionSpace);
    }
    Ok(CachingAction::from_levels(levels))
}

/// Exact uniform sampler over the valid-action lattice that never
/// materializes the space: each entry is drawn conditionally on the
/// remaining budget using bounded-composition counts.
#[derive(Debug, Clone)]
pub struct UniformActionSampler {
    params: SystemParams,
    lattice: Lattice,
    // suffix_ways[i][s]: #compositions of s over entries i..C (as f64)
    suffix_ways: Vec<Vec<f64>>,
}

impl UniformActionSampler {
    pub fn new(params: &SystemParams, lattice: Lattice) -> Result<Self> {
        params.validate()?;
        if count_actions(params, lattice) == 0 {
            return Err(Error::EmptyActionSpace);
        }
        let budget = params.level_budget() as usize;
        let mut suffix_ways = vec![vec![0.0f64; budget + 1]; params.c + 1];
        suffix_ways[params.c][0] = 1.0;
        for i in (0..params.c).rev() {
            for s in 0..=budget {
                let mut ways = 0.0;
                match lattice {
                    Lattice::Fractional => {
                        let cap = params.level_cap() as usize;
                        for v in 0..=cap.min(s) {
                            ways += suffix_ways[i + 1][s - v];
                        }
                    }
                    Lattice::FullContent => {
                        ways += suffix_ways[i + 1][s];
                        let l = params.l as usize;
                        if s >= l {
                            ways += suffix_ways[i + 1][s - l];
                        }
                    }
                }
                suffix_ways[i][s] = ways;
            }
        }
        Ok(Self {
            params: *params,
            lattice,
            suffix_ways,
        })
    }

    #[allow(clippy::needless_range_loop)] // `i` also indexes `suffix_ways`
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CachingAction {
        let mut levels = vec![0u32; self.params.c];
        let mut remaining = self.params.level_budget() as usize;
        for i in 0..self.params.c {
            let total = self.suffix_ways[i][remaining];
            let mut target = rng.random::<f64>() * total;
            let choices: Vec<usize> = match self.lattice {
                Lattice::Fractional => {
                    (0..=(self.params.level_cap() as usize).min(remaining)).collect()
                }
                Lattice::FullContent => {
                    let l = self.params.l as usize;
                    if remaining >= l {
                        vec![0, l]
                    } else {
                        vec![0]
                    }
                }
            };
            let mut picked = *choices.last().unwrap();
            for &v in &choices {
                let w = self.suffix_ways[i + 1][remaining - v];
                if target < w {
                    picked = v;
                    break;
                }
                target -= w;
            }
            levels[i] = picked as u32;
            remaining -= picked;
        }
        debug_assert_eq!(remaining, 0);
        CachingAction::from_levels(levels)
    }
}
