//! Value-function approximation: linear approximator of the state-action
//! value, an analytic action selector (coarse allocation plus fine-tune),
//! and the SGD parameter updates.

use crate::error::{Error, Result};
use crate::model::{CachingAction, PopularityProfile, SystemParams};

/// Learnable parameters of the approximated value function.
///
/// `omega1 >> omega2`: the coverage term refers to reduplicative peak-hour
/// requests while the update term counts each SBS once.
#[derive(Debug, Clone, PartialEq)]
pub struct VfaParams {
    pub beta: f64,
    pub eta: Vec<f64>,
    pub xi: Vec<f64>,
    pub omega1: f64,
    pub omega2: f64,
}

impl VfaParams {
    pub fn new(c: usize, omega1: f64, omega2: f64) -> Result<Self> {
        if !(omega1 > omega2 && omega2 > 0.0) {
            return Err(Error::InvalidParams(
                "weights must satisfy omega1 > omega2 > 0".into(),
            ));
        }
        Ok(Self {
            beta: 0.0,
            eta: vec![0.0; c],
            xi: vec![0.0; c],
            omega1,
            omega2,
        })
    }
}

/// Unit step: 1 when the argument is >= 0, else 0.
#[inline]
pub fn unit_step(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Approximated state-action value for state `[theta, a_prev]` and action
/// `a`.
pub fn vfa_qhat(
    params: &VfaParams,
    theta: &PopularityProfile,
    a: &CachingAction,
    a_prev: &CachingAction,
    d: u32,
    l: u32,
) -> f64 {
    let lf = l as f64;
    let df = d as f64;
    let mut coverage = 0.0;
    let mut update = 0.0;
    for i in 0..theta.len() {
        let fa = a.level(i) as f64 / lf;
        let fp = a_prev.level(i) as f64 / lf;
        let gap = 1.0 - df * fa;
        coverage += params.eta[i] * theta.theta()[i] * gap * unit_step(gap);
        let delta = fa - fp;
        update += params.xi[i] * delta * unit_step(delta);
    }
    params.beta - params.omega1 * coverage - params.omega2 * update
}

/// The coverage penalty the analytic selector minimizes:
/// `sum_i coef_i * (1 - d*a_i) * u(1 - d*a_i)` on the fraction lattice.
pub fn coverage_penalty(coef: &[f64], levels: &[u32], sys: &SystemParams) -> f64 {
    let lf = sys.l as f64;
    let df = sys.d as f64;
    coef.iter()
        .zip(levels)
        .map(|(&c, &v)| {
            let gap = 1.0 - df * (v as f64 / lf);
            c * gap * unit_step(gap)
        })
        .sum()
}

/// Block sizes `z_i`: how many contents receive cache level `i`, for
/// `i = 1..=l_max`. Returned with index `i-1 -> z_i`.
///
/// Blocks are clamped to the catalog size with leftover budget pushed to
/// the next lower level.
pub fn level_blocks(sys: &SystemParams) -> Vec<u64> {
    let lmax = sys.level_cap() as u64;
    let budget = sys.level_budget() as u64;
    let c = sys.c as u64;
    let mut z = vec![0u64; lmax as usize];
    let mut used_levels = 0u64;
    let mut used_contents = 0u64;
    for i in (1..=lmax).rev() {
        let remaining = budget - used_levels;
        let mut zi = remaining / i;
        zi = zi.min(c - used_contents);
        z[(i - 1) as usize] = zi;
        used_levels += i * zi;
        used_contents += zi;
    }
    z
}

/// Coarse allocation: sort coefficients descending (stable, index
/// ascending on ties) and assign levels `l_max, l_max-1, ..., 1` in blocks
/// of `z_i`, zero elsewhere.
pub fn coarse_assign(coef: &[f64], sys: &SystemParams) -> CachingAction {
    let order = sorted_indices(coef);
    let z = level_blocks(sys);
    let mut levels = vec![0u32; sys.c];
    let mut pos = 0usize;
    for i in (1..=z.len()).rev() {
        for _ in 0..z[i - 1] {
            levels[order[pos]] = i as u32;
            pos += 1;
        }
    }
    CachingAction::from_levels(levels)
}

fn sorted_indices(coef: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..coef.len()).collect();
    order.sort_by(|&a, &b| coef[b].partial_cmp(&coef[a]).unwrap().then(a.cmp(&b)));
    order
}

/// Analytic near-optimal action for the coverage objective with
/// coefficients `eta_i * theta_i`: coarse allocation plus the fine-tune
/// pass that trades a wasted top level for extra coverage elsewhere.
///
/// Each candidate move is applied only when it strictly decreases the
/// coverage penalty and respects the level cap.
pub fn vfa_select(
    params: &VfaParams,
    theta: &PopularityProfile,
    sys: &SystemParams,
) -> Result<CachingAction> {
    sys.validate()?;
    if theta.len() != sys.c || params.eta.len() != sys.c {
        return Err(Error::DimensionMismatch {
            expected: sys.c,
            got: theta.len(),
        });
    }
    let coef: Vec<f64> = params
        .eta
        .iter()
        .zip(theta.theta())
        .map(|(&e, &t)| e * t)
        .collect();
    Ok(select_by_coefficients(&coef, sys))
}

/// Selector core shared by VFA (coef = eta*theta) and MPCC (coef = theta).
pub fn select_by_coefficients(coef: &[f64], sys: &SystemParams) -> CachingAction {
    let order = sorted_indices(coef);
    let z = level_blocks(sys);
    let lmax = sys.level_cap();
    let mut action = coarse_assign(coef, sys);
    let lf = sys.l as f64;
    let df = sys.d as f64;

    // fine-tune only applies when the top level overshoots full coverage
    if 1.0 - df * lmax as f64 / lf >= 0.0 {
        return action;
    }
    let z_top = z[lmax as usize - 1] as usize;
    let z_second = if lmax >= 2 {
        z[lmax as usize - 2] as usize
    } else {
        0
    };
    let search_start = z_top + z_second; // zero-based start of candidates
    let lhs_gain = 1.0 - df * (lmax as f64 - 1.0) / lf;
    let mut levels = action.levels().to_vec();
    for j in (0..z_top).rev() {
        let src = order[j];
        let mut chosen = None;
        for &dst_pos in order.iter().skip(search_start) {
            if lhs_gain * coef[src] < (df / lf) * coef[dst_pos] {
                chosen = Some(dst_pos);
                break;
            }
        }
        let Some(dst) = chosen else { continue };
        if levels[dst] + 1 > lmax || levels[src] == 0 {
            continue;
        }
        // apply only if the move strictly lowers the penalty
        let before = pair_penalty(coef, &levels, src, dst, sys);
        levels[src] -= 1;
        levels[dst] += 1;
        let after = pair_penalty(coef, &levels, src, dst, sys);
        if after >= before {
            levels[src] += 1;
            levels[dst] -= 1;
        }
    }
    action = CachingAction::from_levels(levels);
    action
}

fn pair_penalty(coef: &[f64], levels: &[u32], i: usize, j: usize, sys: &SystemParams) -> f64 {
    let lf = sys.l as f64;
    let df = sys.d as f64;
    let term = |idx: usize| {
        let gap = 1.0 - df * (levels[idx] as f64 / lf);
        coef[idx] * gap * unit_step(gap)
    };
    term(i) + term(j)
}

/// One SGD step on the squared TD error with the bootstrapped target
/// `r + gamma * Qhat(x', a~)` where `a~` is the analytic selection at `x'`.
#[allow(clippy::too_many_arguments)]
pub fn vfa_update(
    params: &mut VfaParams,
    theta: &PopularityProfile,
    a_prev: &CachingAction,
    action: &CachingAction,
    reward: f64,
    next_theta: &PopularityProfile,
    sys: &SystemParams,
    gamma: f64,
    delta: f64,
) -> Result<()> {
    let next_action = vfa_select(params, next_theta, sys)?;
    // x' = [theta', a(t)]: the previous action at the next state is a(t)
    let target = reward + gamma * vfa_qhat(params, next_theta, &next_action, action, sys.d, sys.l);
    let error = target - vfa_qhat(params, theta, action, a_prev, sys.d, sys.l);
    apply_gradient(params, theta, a_prev, action, error, sys, delta);
    Ok(())
}

/// Gradient step for a fixed TD error (target frozen).
pub fn apply_gradient(
    params: &mut VfaParams,
    theta: &PopularityProfile,
    a_prev: &CachingAction,
    action: &CachingAction,
    error: f64,
    sys: &SystemParams,
    delta: f64,
) {
    let lf = sys.l as f64;
    let df = sys.d as f64;
    params.beta += 2.0 * delta * error;
    for i in 0..sys.c {
        let fa = action.level(i) as f64 / lf;
        let fp = a_prev.level(i) as f64 / lf;
        let gap = 1.0 - df * fa;
        params.eta[i] -=
            2.0 * delta * params.omega1 * theta.theta()[i] * error * gap * unit_step(gap);
        let diff = fa - fp;
        params.xi[i] -= 2.0 * delta * params.omega2 * error * diff * unit_step(diff);
    }
}
