//! Experiment orchestration: seeded runs of the select/step/learn loop,
//! metric collection, cache-size sweeps, policy comparison against the
//! planning oracle, and CSV emission.

pub mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::agents::{
    Agent, LambdaMode, MpccAgent, QLearningAgent, TransitionSample, ValueIterationAgent, VfaAgent,
};
use crate::env::{self, CacheEnv, EnvConfig};
use crate::error::{Error, Result};
use crate::model::CachingAction;
use crate::serving::{account_mds, direct_ratio, SlotTraffic, UncodedCache};

pub use config::{
    AgentKind, AgentSection, Discipline, EnvSection, ExperimentConfig, OutputSection, Schedule,
    Scheme, SweepSection,
};

/// One emitted metrics sample.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    /// 1-based count of completed slots.
    pub slot: u64,
    /// Running direct SBS-serving ratio over all completed slots.
    pub rho: f64,
    pub cumulative_reward: f64,
    /// Greedy-vs-oracle action similarity; only in compare mode.
    pub cosine_similarity: Option<f64>,
    pub epsilon: f64,
}

/// Everything a single seeded run produces.
#[derive(Debug)]
pub struct RunOutcome {
    pub rows: Vec<MetricRow>,
    pub history: Vec<SlotTraffic>,
    /// Direct ratio over the final 20% of the exploitation stage.
    pub converged_rho: f64,
    pub cumulative_reward: f64,
}

/// Cosine similarity of two caching vectors on the fraction lattice.
pub fn cosine_similarity(a: &CachingAction, a_opt: &CachingAction, l: u32) -> Result<f64> {
    if a.levels().len() != a_opt.levels().len() {
        return Err(Error::DimensionMismatch {
            expected: a_opt.levels().len(),
            got: a.levels().len(),
        });
    }
    let x = a.fractions(l);
    let y = a_opt.fractions(l);
    let dot: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
    let nx: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ny: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::InvalidAction("zero caching vector".into()));
    }
    Ok(dot / (nx * ny))
}

/// Fully resolved inputs of one run; sweeps build these per scheme.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub env: EnvConfig,
    pub agent_kind: AgentKind,
    pub agent: AgentSection,
    pub discipline: Discipline,
    pub schedule: Schedule,
    pub metrics_window: u64,
}

impl RunSpec {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self {
            env: cfg.env.to_env_config(),
            agent_kind: cfg.agent.kind,
            agent: cfg.agent.clone(),
            discipline: cfg.agent.discipline,
            schedule: cfg.schedule.clone(),
            metrics_window: cfg.output.metrics_window,
        }
    }
}

fn build_agent(spec: &RunSpec, env: &CacheEnv) -> Result<Box<dyn Agent>> {
    match spec.agent_kind {
        AgentKind::Qlearning => {
            let space = env.action_space().cloned().ok_or_else(|| {
                Error::Infeasible(
                    "action space too large for a tabular agent; use the vfa agent".into(),
                )
            })?;
            let mode = if spec.agent.lambda_visit_decay {
                LambdaMode::VisitDecay
            } else {
                LambdaMode::Fixed
            };
            Ok(Box::new(QLearningAgent::new(
                space,
                env.profiles().len(),
                spec.agent.gamma,
                spec.agent.lambda,
                mode,
            )?))
        }
        AgentKind::Vfa => Ok(Box::new(VfaAgent::new(
            *env.params(),
            env.config().lattice(),
            spec.agent.omega1,
            spec.agent.omega2,
            spec.agent.gamma,
            spec.agent.delta,
        )?)),
        AgentKind::Mpcc => Ok(Box::new(MpccAgent::new(*env.params()))),
        AgentKind::ValueIteration => Ok(Box::new(ValueIterationAgent::from_env(
            env,
            spec.agent.gamma,
            spec.agent.tol,
        )?)),
    }
}

/// Runs the select/step/learn loop for one seed. When `oracle` is given,
/// each row also carries the cosine similarity between the agent's greedy
/// action and the oracle's action at the visited state.
pub fn run_single(
    spec: &RunSpec,
    seed: u64,
    oracle: Option<&ValueIterationAgent>,
) -> Result<RunOutcome> {
    let mut env = env::build(spec.env.clone())?;
    let mut agent = build_agent(spec, &env)?;

    // independent deterministic streams: env uses stream 0 (its default),
    // the agent's exploration and uncoded serving get their own
    let mut agent_rng = ChaCha12Rng::seed_from_u64(seed);
    agent_rng.set_stream(1);
    let mut serve_rng = ChaCha12Rng::seed_from_u64(seed);
    serve_rng.set_stream(2);
    let mut uncoded = match spec.discipline {
        Discipline::Uncoded => Some(UncodedCache::new(env.params())?),
        Discipline::Mds => None,
    };

    let mut obs = env.reset(seed);
    let horizon = spec.schedule.horizon;
    let mut rows = Vec::new();
    let mut history = Vec::with_capacity(horizon as usize);
    let mut cumulative_reward = 0.0;
    let mut total_sum = 0.0;
    let mut direct_sum = 0.0;

    for t in 0..horizon {
        let epsilon = spec.schedule.epsilon_at(t);
        let action = agent.select(&obs, epsilon, &mut agent_rng)?;
        let (next_obs, _) = env.step(&action)?;
        let traffic = match &mut uncoded {
            Some(cache) => {
                cache.account(&next_obs.counts, &action, &obs.prev_action, &mut serve_rng)?
            }
            None => account_mds(&next_obs.counts, &action, &obs.prev_action, env.params())?,
        };
        let reward = traffic.sbs_direct - traffic.update_cost;
        agent.observe(&TransitionSample {
            candidate: obs.candidate_index,
            next_candidate: next_obs.candidate_index,
            theta: obs.theta.clone(),
            next_theta: next_obs.theta.clone(),
            prev_action: obs.prev_action.clone(),
            action: action.clone(),
            reward,
        })?;

        cumulative_reward += reward;
        total_sum += traffic.total;
        direct_sum += traffic.sbs_direct;
        history.push(traffic);

        let slot = t + 1;
        if slot % spec.metrics_window == 0 || slot == horizon {
            let similarity = match oracle {
                Some(vi) => Some(cosine_similarity(
                    &agent.greedy(&obs)?,
                    &vi.greedy(&obs)?,
                    spec.env.params.l,
                )?),
                None => None,
            };
            rows.push(MetricRow {
                slot,
                rho: direct_sum / total_sum,
                cumulative_reward,
                cosine_similarity: similarity,
                epsilon,
            });
        }
        obs = next_obs;
    }

    let converged_rho = converged_window_rho(&history, &spec.schedule)?;
    Ok(RunOutcome {
        rows,
        history,
        converged_rho,
        cumulative_reward,
    })
}

/// Direct ratio over the last 20% of the exploitation stage.
fn converged_window_rho(history: &[SlotTraffic], schedule: &Schedule) -> Result<f64> {
    let exploit = history.len() as u64 - schedule.switch_slot.min(history.len() as u64);
    let start = history.len() - (exploit as f64 * 0.2).ceil().max(1.0) as usize;
    direct_ratio(&history[start..])
}

/// Runs every configured seed and writes one CSV per seed plus a manifest.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<(u64, RunOutcome)>> {
    let spec = RunSpec::from_config(cfg);
    std::fs::create_dir_all(out_dir)?;
    let mut outcomes = Vec::new();
    for &seed in &cfg.schedule.seeds {
        let outcome = run_single(&spec, seed, None)?;
        let path = out_dir.join(format!("{}_seed{seed}.csv", cfg.agent.kind.name()));
        std::fs::write(&path, metrics_csv(&outcome.rows))?;
        outcomes.push((seed, outcome));
    }
    write_manifest(cfg, out_dir, &outcomes)?;
    Ok(outcomes)
}

/// One sweep result; `converged_rho` is absent on skipped combinations.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub scheme: String,
    pub k: u32,
    pub seed: Option<u64>,
    pub converged_rho: Option<f64>,
    pub status: String,
}

/// Runs every (scheme, K, seed) combination; infeasible combinations are
/// recorded as skipped rows instead of aborting the sweep.
pub fn sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let section = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("config has no [sweep] section".into()))?;
    let mut rows = Vec::new();
    for name in &section.schemes {
        let scheme = Scheme::parse(name)?;
        for &k in &section.k_values {
            let env = match scheme.env_config(&cfg.env, k) {
                Ok(env) => env,
                Err(e) => {
                    rows.push(SweepRow {
                        scheme: name.clone(),
                        k,
                        seed: None,
                        converged_rho: None,
                        status: format!("skipped: {e}"),
                    });
                    continue;
                }
            };
            let spec = RunSpec {
                env,
                agent_kind: scheme.agent,
                agent: cfg.agent.clone(),
                discipline: scheme.discipline,
                schedule: cfg.schedule.clone(),
                metrics_window: cfg.output.metrics_window,
            };
            for &seed in &cfg.schedule.seeds {
                match run_single(&spec, seed, None) {
                    Ok(outcome) => rows.push(SweepRow {
                        scheme: name.clone(),
                        k,
                        seed: Some(seed),
                        converged_rho: Some(outcome.converged_rho),
                        status: "ok".into(),
                    }),
                    Err(e) => rows.push(SweepRow {
                        scheme: name.clone(),
                        k,
                        seed: Some(seed),
                        converged_rho: None,
                        status: format!("skipped: {e}"),
                    }),
                }
            }
        }
    }
    Ok(rows)
}

/// Writes the long-format sweep table plus a per-(scheme, K) mean/stddev
/// summary.
pub fn write_sweep(cfg: &ExperimentConfig, rows: &[SweepRow], out_dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    let mut long = String::from("scheme,k,seed,converged_rho,status\n");
    for r in rows {
        let _ = writeln!(
            long,
            "{},{},{},{},{}",
            r.scheme,
            r.k,
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
            r.converged_rho
                .map(|v| format!("{v:?}"))
                .unwrap_or_default(),
            r.status
        );
    }
    let path = out_dir.join("sweep.csv");
    std::fs::write(&path, long)?;

    let mut summary = String::from("scheme,k,mean_rho,stddev_rho,seeds\n");
    let mut seen: Vec<(String, u32)> = Vec::new();
    for r in rows {
        let key = (r.scheme.clone(), r.k);
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        let vals: Vec<f64> = rows
            .iter()
            .filter(|x| x.scheme == r.scheme && x.k == r.k)
            .filter_map(|x| x.converged_rho)
            .collect();
        if vals.is_empty() {
            let _ = writeln!(summary, "{},{},,,0", r.scheme, r.k);
            continue;
        }
        let mean: f64 = vals.iter().sum::<f64>() / vals.len() as f64;
        let var: f64 =
            vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
        let _ = writeln!(
            summary,
            "{},{},{:?},{:?},{}",
            r.scheme,
            r.k,
            mean,
            var.sqrt(),
            vals.len()
        );
    }
    std::fs::write(out_dir.join("sweep_summary.csv"), summary)?;
    write_manifest(cfg, out_dir, &[])?;
    Ok(path)
}

/// One seeded run with the per-slot similarity trace against the
/// value-iteration policy; white-box enumerable environments only.
pub fn compare(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutcome> {
    let spec = RunSpec::from_config(cfg);
    let env = env::build(spec.env.clone())?;
    let oracle = ValueIterationAgent::from_env(&env, cfg.agent.gamma, cfg.agent.tol)?;
    run_single(&spec, seed, Some(&oracle))
}

/// Renders metric rows as CSV; the header names the row fields exactly.
pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let mut out = String::from("slot,rho,cumulative_reward,cosine_similarity,epsilon\n");
    for r in rows {
        let sim = r
            .cosine_similarity
            .map(|v| format!("{v:?}"))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{:?},{:?},{},{:?}",
            r.slot, r.rho, r.cumulative_reward, sim, r.epsilon
        );
    }
    out
}

fn write_manifest(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    outcomes: &[(u64, RunOutcome)],
) -> Result<()> {
    let mut text = String::from("# resolved experiment configuration\n");
    text.push_str(
        &toml::to_string(cfg).map_err(|e| Error::Config(format!("serialize config: {e}")))?,
    );
    if !outcomes.is_empty() {
        text.push_str("\n# converged direct-serving ratio per seed\n");
        for (seed, o) in outcomes {
            let _ = writeln!(text, "seed {seed}: rho {:?}", o.converged_rho);
        }
    }
    std::fs::write(out_dir.join("manifest.txt"), text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::RequestMode;
    use crate::model::SystemParams;

    fn small_cfg(kind: AgentKind, horizon: u64) -> ExperimentConfig {
        ExperimentConfig {
            env: EnvSection {
                params: SystemParams::new(4, 4, 1, 2, 2, 1.0, 50).unwrap(),
                skewness: vec![1.36, 2.3],
                profiles: None,
                transition_seed: 11,
                request_mode: RequestMode::ZipfMultinomial,
                snm: None,
                white_box: true,
                full_content_only: false,
                candidate_transitions_only: false,
                enumeration_cap: 1 << 20,
            },
            agent: AgentSection {
                kind,
                gamma: 0.9,
                lambda: 0.6,
                lambda_visit_decay: false,
                omega1: 1.0,
                omega2: 0.01,
                delta: 0.005,
                tol: 1e-9,
                discipline: Discipline::Mds,
            },
            schedule: Schedule {
                horizon,
                switch_slot: horizon / 2,
                epsilon: 0.1,
                seeds: vec![1],
            },
            output: OutputSection::default(),
            sweep: None,
        }
    }

    #[test]
    fn cosine_similarity_cases() {
        let l = 3;
        let a = CachingAction::from_levels(vec![2, 1, 0]);
        let b = CachingAction::from_levels(vec![1, 1, 1]);
        assert_eq!(cosine_similarity(&a, &a, l).unwrap(), 1.0);
        let got = cosine_similarity(&a, &b, l).unwrap();
        let expect = 3.0 / (5.0f64.sqrt() * 3.0f64.sqrt());
        assert!((got - expect).abs() < 1e-12);

        let x = CachingAction::from_levels(vec![1, 0, 0]);
        let y = CachingAction::from_levels(vec![0, 1, 0]);
        assert_eq!(cosine_similarity(&x, &y, l).unwrap(), 0.0);

        let z = CachingAction::from_levels(vec![0, 0, 0]);
        assert!(cosine_similarity(&x, &z, l).is_err());
    }

    #[test]
    fn identical_seeds_identical_bytes() {
        let cfg = small_cfg(AgentKind::Qlearning, 200);
        let spec = RunSpec::from_config(&cfg);
        let a = run_single(&spec, 7, None).unwrap();
        let b = run_single(&spec, 7, None).unwrap();
        assert_eq!(metrics_csv(&a.rows), metrics_csv(&b.rows));
        let c = run_single(&spec, 8, None).unwrap();
        assert_ne!(metrics_csv(&a.rows), metrics_csv(&c.rows));
    }

    #[test]
    fn reward_and_rho_conservation() {
        let cfg = small_cfg(AgentKind::Qlearning, 150);
        let spec = RunSpec::from_config(&cfg);
        let out = run_single(&spec, 3, None).unwrap();
        let direct: f64 = out.history.iter().map(|t| t.sbs_direct).sum();
        let update: f64 = out.history.iter().map(|t| t.update_cost).sum();
        assert!((out.cumulative_reward - (direct - update)).abs() < 1e-9);
        let last = out.rows.last().unwrap();
        assert!((last.rho - direct_ratio(&out.history).unwrap()).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&last.rho));
        // slots strictly increase
        assert!(out.rows.windows(2).all(|w| w[0].slot < w[1].slot));
    }

    #[test]
    fn value_iteration_agent_runs_flat() {
        let cfg = small_cfg(AgentKind::ValueIteration, 120);
        let out = run_single(&RunSpec::from_config(&cfg), 5, None).unwrap();
        assert_eq!(out.rows.len(), 120);
    }

    #[test]
    fn uncoded_discipline_runs_and_trails_mds() {
        let mut cfg = small_cfg(AgentKind::Mpcc, 150);
        let mds = run_single(&RunSpec::from_config(&cfg), 2, None).unwrap();
        cfg.agent.discipline = Discipline::Uncoded;
        let unc = run_single(&RunSpec::from_config(&cfg), 2, None).unwrap();
        assert!(unc.converged_rho <= mds.converged_rho + 1e-12);
    }

    #[test]
    fn tabular_agent_rejects_unenumerable_space() {
        let mut cfg = small_cfg(AgentKind::Qlearning, 50);
        cfg.env.enumeration_cap = 2; // force large-scale mode
        let err = run_single(&RunSpec::from_config(&cfg), 1, None).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)), "{err}");
        assert!(err.to_string().contains("vfa"));
    }

    #[test]
    fn compare_trace_bounded() {
        let cfg = small_cfg(AgentKind::Qlearning, 300);
        let out = compare(&cfg, 1).unwrap();
        for row in &out.rows {
            let s = row.cosine_similarity.unwrap();
            assert!((0.0..=1.0 + 1e-12).contains(&s));
        }
    }

    #[test]
    fn sweep_rows_and_skips() {
        let mut cfg = small_cfg(AgentKind::Qlearning, 80);
        cfg.schedule.seeds = vec![1, 2];
        cfg.sweep = Some(SweepSection {
            // K=3 violates the cache bound (K*L > C*l_max) and must be
            // skipped, not abort
            k_values: vec![1, 2, 3],
            schemes: vec!["qlearning".into(), "mpcc".into()],
        });
        let rows = sweep(&cfg).unwrap();
        let ok = rows.iter().filter(|r| r.status == "ok").count();
        let skipped = rows
            .iter()
            .filter(|r| r.status.starts_with("skipped"))
            .count();
        assert_eq!(ok, 2 * 2 * 2);
        assert_eq!(skipped, 2);
    }

    #[test]
    fn experiment_writes_expected_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_cfg(AgentKind::Mpcc, 60);
        cfg.schedule.seeds = vec![1, 2];
        run_experiment(&cfg, dir.path()).unwrap();
        assert!(dir.path().join("mpcc_seed1.csv").exists());
        assert!(dir.path().join("mpcc_seed2.csv").exists());
        let manifest = std::fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
        assert!(manifest.contains("[env]"));
        assert!(manifest.contains("seed 2"));
        let csv = std::fs::read_to_string(dir.path().join("mpcc_seed1.csv")).unwrap();
        assert!(csv.starts_with("slot,rho,cumulative_reward,cosine_similarity,epsilon\n"));
    }
}
