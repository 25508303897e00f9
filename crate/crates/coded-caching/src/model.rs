//! Domain types, popularity math, MDS traffic accounting, and the reward
//! function shared by every other module.
//!
//! Caching decisions are kept as integer level vectors so the cache-budget
//! constraint stays exact; fractions only appear when traffic is accounted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scenario constants of one caching system.
///
/// `p` SBSs, a catalog of `c` contents, per-SBS cache capacity `k` whole
/// contents, `d`-fold cooperative serving, action discretization `l` levels
/// per unit fraction, content size `b`, and `m` requests generated per slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub p: u32,
    pub c: usize,
    pub k: u32,
    pub d: u32,
    pub l: u32,
    pub b: f64,
    pub m: u64,
}

/// `ceil(l / d)`: the largest useful cache level per content.
pub fn level_cap(l: u32, d: u32) -> u32 {
    l.div_ceil(d)
}

impl SystemParams {
    pub fn new(p: u32, c: usize, k: u32, d: u32, l: u32, b: f64, m: u64) -> Result<Self> {
        let params = Self {
            p,
            c,
            k,
            d,
            l,
            b,
            m,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 1 {
            return Err(Error::InvalidParams("p must be >= 1".into()));
        }
        if self.c < 1 {
            return Err(Error::InvalidParams("C must be >= 1".into()));
        }
        if self.l < 1 {
            return Err(Error::InvalidParams("L must be >= 1".into()));
        }
        if self.b.is_nan() || self.b <= 0.0 {
            return Err(Error::InvalidParams("B must be > 0".into()));
        }
        if self.m < 1 {
            return Err(Error::InvalidParams("M must be >= 1".into()));
        }
        if self.d < 1 || self.d > self.p {
            return Err(Error::InvalidParams(format!(
                "d must satisfy 1 <= d <= p, got d={} p={}",
                self.d, self.p
            )));
        }
        if self.k < 1 {
            return Err(Error::InvalidParams("K must be >= 1".into()));
        }
        let budget = self.k as u64 * self.l as u64;
        let capacity = self.c as u64 * self.level_cap() as u64;
        if budget > capacity {
            return Err(Error::Infeasible(format!(
                "no valid action: K*L = {} exceeds C*ceil(L/d) = {}",
                budget, capacity
            )));
        }
        Ok(())
    }

    /// Per-content level cap `ceil(L/d)`.
    pub fn level_cap(&self) -> u32 {
        level_cap(self.l, self.d)
    }

    /// Total cache budget in levels, `K*L`.
    pub fn level_budget(&self) -> u32 {
        self.k * self.l
    }
}

/// Integer-level caching decision vector, one entry per content.
///
/// Entry `i` means a fraction `levels[i] / L` of content `i` is cached at
/// every SBS. A valid action has `sum(levels) = K*L` and every entry at most
/// `ceil(L/d)` (or in `{0, L}` in the full-content lattice).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CachingAction {
    levels: Vec<u32>,
}

impl CachingAction {
    /// Builds an action and checks it against `params` (fractional lattice).
    pub fn new(levels: Vec<u32>, params: &SystemParams) -> Result<Self> {
        let action = Self { levels };
        action.check(params)?;
        Ok(action)
    }

    /// Builds an action without constraint checks.
    pub fn from_levels(levels: Vec<u32>) -> Self {
        Self { levels }
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn level(&self, i: usize) -> u32 {
        self.levels[i]
    }

    /// Cached fraction of content `i`.
    pub fn fraction(&self, i: usize, l: u32) -> f64 {
        self.levels[i] as f64 / l as f64
    }

    /// All cached fractions, `levels / L` elementwise.
    pub fn fractions(&self, l: u32) -> Vec<f64> {
        self.levels.iter().map(|&v| v as f64 / l as f64).collect()
    }

    pub fn check(&self, params: &SystemParams) -> Result<()> {
        if self.levels.len() != params.c {
            return Err(Error::DimensionMismatch {
                expected: params.c,
                got: self.levels.len(),
            });
        }
        let cap = params.level_cap();
        if let Some(&v) = self.levels.iter().find(|&&v| v > cap) {
            return Err(Error::InvalidAction(format!(
                "level {} exceeds cap {}",
                v, cap
            )));
        }
        let sum: u64 = self.levels.iter().map(|&v| v as u64).sum();
        if sum != params.level_budget() as u64 {
            return Err(Error::InvalidAction(format!(
                "levels sum to {}, expected K*L = {}",
                sum,
                params.level_budget()
            )));
        }
        Ok(())
    }
}

/// Normalized content-popularity vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PopularityProfile {
    theta: Vec<f64>,
}

impl PopularityProfile {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::InvalidParams("empty popularity vector".into()));
        }
        if theta.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidParams(
                "popularity entries must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = theta.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParams(format!(
                "popularity must sum to 1, got {sum}"
            )));
        }
        Ok(Self { theta })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

/// Per-content request counts for one slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestBatch {
    counts: Vec<u64>,
}

impl RequestBatch {
    pub fn new(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// What the agent sees after a slot: the observed popularity, the previous
/// caching decision, the raw counts, and (white-box mode only) the index of
/// the popularity candidate that generated the counts.
#[derive(Debug, Clone)]
pub struct EnvObservation {
    pub theta: PopularityProfile,
    pub prev_action: CachingAction,
    pub counts: RequestBatch,
    pub candidate_index: Option<usize>,
}

/// Normalizes request counts into a popularity profile.
pub fn compute_popularity(counts: &RequestBatch) -> Result<PopularityProfile> {
    let total = counts.total();
    if total == 0 {
        return Err(Error::EmptySlot);
    }
    let total = total as f64;
    Ok(PopularityProfile {
        theta: counts.counts().iter().map(|&n| n as f64 / total).collect(),
    })
}

/// Parity bits produced per content by the MDS encoder, `(p+1)*B`.
pub fn mds_parity_bits(params: &SystemParams) -> f64 {
    (params.p as f64 + 1.0) * params.b
}

/// Fraction of a content the MBS must still deliver when `d` SBSs each hold
/// a coded fraction `a_c`: `max(1 - d*a_c, 0)`.
pub fn complementary_fraction(a_c: f64, d: u32) -> f64 {
    (1.0 - d as f64 * a_c).max(0.0)
}

/// Fraction vector of an action, `levels / L`.
pub fn action_to_fractions(action: &CachingAction, l: u32) -> Vec<f64> {
    action.fractions(l)
}

/// Per-slot reward: total traffic minus cache-update traffic minus
/// complementary traffic, all in content-size units.
///
/// The popularity used in the complementary term is computed from
/// `counts_next` itself.
pub fn compute_reward(
    counts_next: &RequestBatch,
    a_t: &CachingAction,
    a_prev: &CachingAction,
    params: &SystemParams,
) -> Result<f64> {
    if counts_next.len() != params.c {
        return Err(Error::DimensionMismatch {
            expected: params.c,
            got: counts_next.len(),
        });
    }
    a_t.check(params)?;
    a_prev.check(params)?;
    let theta = compute_popularity(counts_next)?;
    let total = counts_next.total() as f64;
    let l = params.l as f64;
    let mut update = 0.0;
    let mut complement = 0.0;
    for i in 0..params.c {
        let fa = a_t.level(i) as f64 / l;
        let fp = a_prev.level(i) as f64 / l;
        update += (fa - fp).max(0.0);
        complement += theta.theta()[i] * complementary_fraction(fa, params.d);
    }
    Ok(total - params.p as f64 * update - total * complement)
}
