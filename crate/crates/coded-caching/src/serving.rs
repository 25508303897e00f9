//! Traffic accounting for the two fragment-caching disciplines: MDS coded
//! packets (disjoint across SBSs by construction) and uncoded random
//! fragments, plus the direct SBS-serving ratio.

use rand::seq::index::sample as sample_indices;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{
    complementary_fraction, compute_popularity, CachingAction, RequestBatch, SystemParams,
};

/// Traffic-load breakdown of one slot, in content-size units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotTraffic {
    /// Requests served (total traffic).
    pub total: f64,
    /// Traffic served without touching the MBS, `total - complement_cost`.
    pub sbs_direct: f64,
    /// Off-peak cache-update traffic.
    pub update_cost: f64,
    /// Peak complementary traffic fetched from the MBS.
    pub complement_cost: f64,
}

/// MDS coded accounting: packets held by different SBSs never overlap, so a
/// request for content `j` is covered by a `min(d*a_j, 1)` fraction.
pub fn account_mds(
    counts: &RequestBatch,
    a_t: &CachingAction,
    a_prev: &CachingAction,
    params: &SystemParams,
) -> Result<SlotTraffic> {
    if counts.len() != params.c
        || a_t.levels().len() != params.c
        || a_prev.levels().len() != params.c
    {
        return Err(Error::DimensionMismatch {
            expected: params.c,
            got: counts.len(),
        });
    }
    let theta = compute_popularity(counts)?;
    let total = counts.total() as f64;
    let l = params.l as f64;
    let mut update = 0.0;
    let mut complement_per_request = 0.0;
    for i in 0..params.c {
        let fa = a_t.level(i) as f64 / l;
        let fp = a_prev.level(i) as f64 / l;
        update += (fa - fp).max(0.0);
        complement_per_request += theta.theta()[i] * complementary_fraction(fa, params.d);
    }
    let complement_cost = total * complement_per_request;
    Ok(SlotTraffic {
        total,
        sbs_direct: total - complement_cost,
        update_cost: params.p as f64 * update,
        complement_cost,
    })
}

/// Uncoded random-fragment accounting (RL-UCC).
///
/// Each content is split into `L` equal fragments. Every SBS holds an
/// independent uniform subset of `levels_i` fragments, redrawn only when its
/// cached level for that content changes. Each request draws a uniform
/// `d`-subset of SBSs; the served fraction is the union of their fragments
/// over `L`.
#[derive(Debug, Clone)]
pub struct UncodedCache {
    params: SystemParams,
    /// Fragment bitmask per (sbs, content); L <= 64 fragments.
    held: Vec<u64>,
    levels: Vec<u32>,
}

impl UncodedCache {
    pub fn new(params: &SystemParams) -> Result<Self> {
        params.validate()?;
        if params.l > 64 {
            return Err(Error::InvalidParams(
                "uncoded accounting supports at most 64 fragments per content".into(),
            ));
        }
        Ok(Self {
            params: *params,
            held: vec![0; params.p as usize * params.c],
            levels: vec![0; params.c],
        })
    }

    fn redraw_content<R: Rng + ?Sized>(&mut self, content: usize, level: u32, rng: &mut R) {
        let l = self.params.l as usize;
        for sbs in 0..self.params.p as usize {
            let mut mask = 0u64;
            for frag in sample_indices(rng, l, level as usize) {
                mask |= 1 << frag;
            }
            self.held[sbs * self.params.c + content] = mask;
        }
    }

    pub fn account<R: Rng + ?Sized>(
        &mut self,
        counts: &RequestBatch,
        a_t: &CachingAction,
        a_prev: &CachingAction,
        rng: &mut R,
    ) -> Result<SlotTraffic> {
        let params = self.params;
        if counts.len() != params.c
            || a_t.levels().len() != params.c
            || a_prev.levels().len() != params.c
        {
            return Err(Error::DimensionMismatch {
                expected: params.c,
                got: counts.len(),
            });
        }
        let l = params.l as f64;
        let mut update = 0.0;
        for i in 0..params.c {
            let fa = a_t.level(i) as f64 / l;
            let fp = a_prev.level(i) as f64 / l;
            update += (fa - fp).max(0.0);
            if a_t.level(i) != self.levels[i] {
                self.redraw_content(i, a_t.level(i), rng);
                self.levels[i] = a_t.level(i);
            }
        }

        let total = counts.total() as f64;
        let p = params.p as usize;
        let d = params.d as usize;
        let mut complement_cost = 0.0;
        for (content, &n) in counts.counts().iter().enumerate() {
            if n == 0 {
                continue;
            }
            let level = a_t.level(content);
            if level == 0 {
                complement_cost += n as f64;
                continue;
            }
            if level == params.l {
                continue; // every SBS holds all fragments
            }
            for _ in 0..n {
                let mut union = 0u64;
                for sbs in sample_indices(rng, p, d) {
                    union |= self.held[sbs * params.c + content];
                }
                let served = union.count_ones() as f64 / l;
                complement_cost += 1.0 - served;
            }
        }

        Ok(SlotTraffic {
            total,
            sbs_direct: total - complement_cost,
            update_cost: params.p as f64 * update,
            complement_cost,
        })
    }
}

/// Direct SBS-serving ratio over a run history.
pub fn direct_ratio(history: &[SlotTraffic]) -> Result<f64> {
    let total: f64 = history.iter().map(|t| t.total).sum();
    if history.is_empty() || total <= 0.0 {
        return Err(Error::EmptyHistory);
    }
    let direct: f64 = history.iter().map(|t| t.sbs_direct).sum();
    Ok(direct / total)
}
