//! C ABI for the coded-caching simulator.
//!
//! Handles are opaque; every function returns a `CcStatus` code and writes
//! results through out-pointers. Handles are not thread-safe — callers must
//! serialize access to a given handle.

use std::ffi::CStr;
use std::os::raw::c_char;
use std::path::Path;

use coded_caching::actions::{self, Lattice};
use coded_caching::env::{self, CacheEnv};
use coded_caching::harness::ExperimentConfig;
use coded_caching::model::{
    compute_reward, CachingAction, EnvObservation, RequestBatch, SystemParams,
};
use coded_caching::Error;

/// Status codes returned by every FFI entry point.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Malformed input: bad config, bad UTF-8, wrong buffer length, or an
    /// action outside the feasible lattice.
    InvalidArgument = 2,
    /// Structurally valid input describing an infeasible scenario
    /// (cache budget exceeds what the level cap allows).
    Infeasible = 3,
    /// Operation requires a reset environment or a hidden model.
    InvalidState = 4,
    /// Config file could not be read.
    Io = 5,
}

fn status_of(err: &Error) -> CcStatus {
    match err {
        Error::Infeasible(_) | Error::ActionSpaceTooLarge { .. } => CcStatus::Infeasible,
        Error::NotReset | Error::ModelHidden => CcStatus::InvalidState,
        Error::Io(_) => CcStatus::Io,
        _ => CcStatus::InvalidArgument,
    }
}

/// Opaque simulation environment plus its most recent observation.
pub struct CcEnv {
    inner: CacheEnv,
    last: Option<EnvObservation>,
}

/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be valid for
/// writes. On success `*out` owns the environment and must be released
/// with [`cc_env_free`].
#[no_mangle]
pub unsafe extern "C" fn cc_env_new(path: *const c_char, out: *mut *mut CcEnv) -> CcStatus {
    if path.is_null() || out.is_null() {
        return CcStatus::NullPointer;
    }
    let Ok(path) = CStr::from_ptr(path).to_str() else {
        return CcStatus::InvalidArgument;
    };
    let cfg = match ExperimentConfig::from_path(Path::new(path)) {
        Ok(cfg) => cfg,
        Err(e) => return status_of(&e),
    };
    match env::build(cfg.env.to_env_config()) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(CcEnv { inner, last: None }));
            CcStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Releases an environment created by [`cc_env_new`]. Accepts null.
///
/// # Safety
/// `env` must be a pointer previously returned by [`cc_env_new`] and not
/// already freed.
#[no_mangle]
pub unsafe extern "C" fn cc_env_free(env: *mut CcEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Number of contents in the catalog.
///
/// # Safety
/// `env` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cc_env_n_contents(env: *const CcEnv, out: *mut usize) -> CcStatus {
    if env.is_null() || out.is_null() {
        return CcStatus::NullPointer;
    }
    *out = (*env).inner.params().c;
    CcStatus::Ok
}

/// Reseeds and restarts the episode.
///
/// # Safety
/// `env` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cc_env_reset(env: *mut CcEnv, seed: u64) -> CcStatus {
    if env.is_null() {
        return CcStatus::NullPointer;
    }
    let e = &mut *env;
    e.last = Some(e.inner.reset(seed));
    CcStatus::Ok
}

/// Applies a caching decision given as per-content levels (`len` must equal
/// the catalog size) and writes the slot reward.
///
/// # Safety
/// `env` must be valid; `levels` must point to `len` readable values;
/// `reward` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cc_env_step(
    env: *mut CcEnv,
    levels: *const u32,
    len: usize,
    reward: *mut f64,
) -> CcStatus {
    if env.is_null() || levels.is_null() || reward.is_null() {
        return CcStatus::NullPointer;
    }
    let e = &mut *env;
    if e.last.is_none() {
        return CcStatus::InvalidState;
    }
    let levels = std::slice::from_raw_parts(levels, len);
    let action = match CachingAction::new(levels.to_vec(), e.inner.params()) {
        Ok(a) => a,
        Err(err) => return status_of(&err),
    };
    match e.inner.step(&action) {
        Ok((obs, r)) => {
            e.last = Some(obs);
            *reward = r;
            CcStatus::Ok
        }
        Err(err) => status_of(&err),
    }
}

/// Copies the current popularity profile into `buf` (`len` must equal the
/// catalog size). Requires a prior reset.
///
/// # Safety
/// `env` must be valid; `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn cc_env_theta(env: *const CcEnv, buf: *mut f64, len: usize) -> CcStatus {
    if env.is_null() || buf.is_null() {
        return CcStatus::NullPointer;
    }
    let e = &*env;
    let Some(last) = &e.last else {
        return CcStatus::InvalidState;
    };
    if len != last.theta.len() {
        return CcStatus::InvalidArgument;
    }
    std::slice::from_raw_parts_mut(buf, len).copy_from_slice(last.theta.theta());
    CcStatus::Ok
}

/// Copies the most recent per-content request counts into `buf`.
/// Requires a prior reset.
///
/// # Safety
/// `env` must be valid; `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn cc_env_counts(env: *const CcEnv, buf: *mut u64, len: usize) -> CcStatus {
    if env.is_null() || buf.is_null() {
        return CcStatus::NullPointer;
    }
    let e = &*env;
    let Some(last) = &e.last else {
        return CcStatus::InvalidState;
    };
    let counts = last.counts.counts();
    if len != counts.len() {
        return CcStatus::InvalidArgument;
    }
    std::slice::from_raw_parts_mut(buf, len).copy_from_slice(counts);
    CcStatus::Ok
}

/// Number of feasible caching decisions on the fractional level lattice
/// for the given system shape; see the config documentation for the
/// parameter roles.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cc_action_space_len(
    price: u32,
    n_contents: usize,
    k_stations: u32,
    d_cooperation: u32,
    l_fragments: u32,
    out: *mut u64,
) -> CcStatus {
    if out.is_null() {
        return CcStatus::NullPointer;
    }
    let sys = match SystemParams::new(
        price,
        n_contents,
        k_stations,
        d_cooperation,
        l_fragments,
        1.0,
        1,
    ) {
        Ok(s) => s,
        Err(e) => return status_of(&e),
    };
    let n = actions::count_actions(&sys, Lattice::Fractional);
    if n > u64::MAX as u128 {
        return CcStatus::InvalidArgument;
    }
    *out = n as u64;
    CcStatus::Ok
}

/// Slot reward for given request counts, current and previous levels, under
/// the standard pricing: direct traffic minus update cost minus uncovered
/// complementary traffic.
///
/// # Safety
/// `counts`, `levels_now`, `levels_prev` must each point to `n_contents`
/// readable values; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cc_compute_reward(
    price: u32,
    n_contents: usize,
    k_stations: u32,
    d_cooperation: u32,
    l_fragments: u32,
    counts: *const u64,
    levels_now: *const u32,
    levels_prev: *const u32,
    out: *mut f64,
) -> CcStatus {
    if counts.is_null() || levels_now.is_null() || levels_prev.is_null() || out.is_null() {
        return CcStatus::NullPointer;
    }
    let sys = match SystemParams::new(
        price,
        n_contents,
        k_stations,
        d_cooperation,
        l_fragments,
        1.0,
        1,
    ) {
        Ok(s) => s,
        Err(e) => return status_of(&e),
    };
    let counts = RequestBatch::new(std::slice::from_raw_parts(counts, n_contents).to_vec());
    let now = std::slice::from_raw_parts(levels_now, n_contents).to_vec();
    let prev = std::slice::from_raw_parts(levels_prev, n_contents).to_vec();
    let (now, prev) = match (
        CachingAction::new(now, &sys),
        CachingAction::new(prev, &sys),
    ) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return status_of(&e),
    };
    match compute_reward(&counts, &now, &prev, &sys) {
        Ok(r) => {
            *out = r;
            CcStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Writes the normalized Zipf popularity profile with skewness `alpha` into
/// `buf` (`len` entries, most popular first).
///
/// # Safety
/// `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn cc_zipf_profile(len: usize, alpha: f64, buf: *mut f64) -> CcStatus {
    if buf.is_null() {
        return CcStatus::NullPointer;
    }
    if len == 0 || !alpha.is_finite() || alpha < 0.0 {
        return CcStatus::InvalidArgument;
    }
    let profile = env::zipf_profile(len, alpha);
    std::slice::from_raw_parts_mut(buf, len).copy_from_slice(profile.theta());
    CcStatus::Ok
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;
    use std::io::Write;

    fn write_config() -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(
            f,
            r#"
[env]
p = 2
c = 4
k = 1
d = 2
l = 2
b = 1.0
m = 100
skewness = [1.36, 2.3]
transition_seed = 7

[agent]
kind = "qlearning"

[schedule]
horizon = 100
switch_slot = 50
seeds = [1]
"#
        )
        .unwrap();
        f
    }

    #[test]
    fn env_round_trip_through_the_c_surface() {
        let file = write_config();
        let path = CString::new(file.path().to_str().unwrap()).unwrap();
        let mut env: *mut CcEnv = std::ptr::null_mut();
        unsafe {
            assert_eq!(cc_env_new(path.as_ptr(), &mut env), CcStatus::Ok);
            let mut c = 0usize;
            assert_eq!(cc_env_n_contents(env, &mut c), CcStatus::Ok);
            assert_eq!(c, 4);

            // stepping before reset is a state error
            let levels = [1u32, 1, 0, 0];
            let mut reward = 0.0;
            assert_eq!(
                cc_env_step(env, levels.as_ptr(), 4, &mut reward),
                CcStatus::InvalidState
            );

            assert_eq!(cc_env_reset(env, 1), CcStatus::Ok);
            let mut theta = [0.0f64; 4];
            assert_eq!(cc_env_theta(env, theta.as_mut_ptr(), 4), CcStatus::Ok);
            assert!((theta.iter().sum::<f64>() - 1.0).abs() < 1e-12);

            assert_eq!(
                cc_env_step(env, levels.as_ptr(), 4, &mut reward),
                CcStatus::Ok
            );
            let mut counts = [0u64; 4];
            assert_eq!(cc_env_counts(env, counts.as_mut_ptr(), 4), CcStatus::Ok);
            assert_eq!(counts.iter().sum::<u64>(), 100);

            // over-budget action is rejected
            let bad = [1u32, 1, 1, 1];
            assert_eq!(
                cc_env_step(env, bad.as_ptr(), 4, &mut reward),
                CcStatus::InvalidArgument
            );

            cc_env_free(env);
        }
    }

    #[test]
    fn deterministic_across_handles() {
        let file = write_config();
        let path = CString::new(file.path().to_str().unwrap()).unwrap();
        let run = || unsafe {
            let mut env: *mut CcEnv = std::ptr::null_mut();
            assert_eq!(cc_env_new(path.as_ptr(), &mut env), CcStatus::Ok);
            assert_eq!(cc_env_reset(env, 9), CcStatus::Ok);
            let levels = [1u32, 0, 1, 0];
            let mut rewards = Vec::new();
            for _ in 0..20 {
                let mut r = 0.0;
                assert_eq!(cc_env_step(env, levels.as_ptr(), 4, &mut r), CcStatus::Ok);
                rewards.push(r);
            }
            cc_env_free(env);
            rewards
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn scalar_helpers() {
        unsafe {
            let mut n = 0u64;
            assert_eq!(cc_action_space_len(2, 10, 1, 2, 3, &mut n), CcStatus::Ok);
            assert_eq!(n, 210);
            // budget beyond the level cap: infeasible, not invalid
            assert_eq!(
                cc_action_space_len(2, 4, 5, 2, 2, &mut n),
                CcStatus::Infeasible
            );

            let mut buf = [0.0f64; 4];
            assert_eq!(cc_zipf_profile(4, 1.36, buf.as_mut_ptr()), CcStatus::Ok);
            assert!(buf[0] > buf[1] && buf[1] > buf[2] && buf[2] > buf[3]);

            let counts = [10u64, 5, 0, 0];
            let now = [1u32, 1, 0, 0];
            let prev = [1u32, 0, 1, 0];
            let mut r = 0.0;
            assert_eq!(
                cc_compute_reward(
                    2,
                    4,
                    1,
                    2,
                    2,
                    counts.as_ptr(),
                    now.as_ptr(),
                    prev.as_ptr(),
                    &mut r
                ),
                CcStatus::Ok
            );
            assert!(r <= 15.0);
        }
    }

    #[test]
    fn null_pointers_are_rejected() {
        unsafe {
            let mut env: *mut CcEnv = std::ptr::null_mut();
            assert_eq!(
                cc_env_new(std::ptr::null(), &mut env),
                CcStatus::NullPointer
            );
            assert_eq!(cc_env_reset(std::ptr::null_mut(), 0), CcStatus::NullPointer);
            let mut n = 0u64;
            assert_eq!(
                cc_action_space_len(2, 0, 1, 2, 2, &mut n),
                CcStatus::InvalidArgument
            );
            cc_env_free(std::ptr::null_mut());
        }
    }
}
