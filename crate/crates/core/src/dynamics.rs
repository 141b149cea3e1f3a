//! Finite-population mean-field dynamics.
//!
//! Each round runs four phases: every agent picks an arm from its own
//! history, the fractions `f_m = N_m / N` are counted, every agent draws its
//! reward at this round's fractions and updates its counts, and every agent
//! independently regenerates with probability `1 - alpha`.
//!
//! All randomness an agent consumes comes from its own stream, and the
//! cross-agent reductions are done sequentially in agent order, so a run is a
//! pure function of `(seed, config)` whatever the size of the rayon pool.

use rayon::prelude::*;

use crate::model::{
    AgentState, DeviceType, NetworkConfig, PopulationProfile, RewardMode, RoundMetrics, TypeMode,
};
use crate::physics::{achievable_rate, power_threshold, success_from_min_power, LinkParams};
use crate::policy::PolicyKind;
use crate::stochastics::{
    redraw_gains, sample_device_type, sample_half_normal, streams, RngStream,
};

#[derive(Debug, Clone)]
struct Agent {
    ty: DeviceType,
    state: AgentState,
    rng: RngStream,
    class: usize,
    choice: usize,
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    success: bool,
    rate: f64,
    /// Age at regeneration, or zero if the agent survived.
    lifetime: u32,
}

/// Completed-lifetime statistics, in rounds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LifetimeStats {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl LifetimeStats {
    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    pub fn std_error(&self) -> f64 {
        let n = self.count as f64;
        let var = (self.sum_sq - self.sum * self.sum / n) / (n - 1.0);
        (var / n).sqrt()
    }
}

/// The population: one type, state and stream per device.
#[derive(Debug, Clone)]
pub struct World {
    cfg: NetworkConfig,
    policy: PolicyKind,
    agents: Vec<Agent>,
    links: Vec<LinkParams>,
    round: usize,
    regenerate: bool,
    lifetimes: LifetimeStats,
}

impl World {
    /// Fresh population: types sampled from each agent's stream, states at
    /// zero (or small random counts when `random_init` is set).
    pub fn new(cfg: &NetworkConfig, policy: PolicyKind) -> Self {
        let agents = (0..cfg.num_devices)
            .into_par_iter()
            .map(|n| {
                let mut rng = RngStream::new(cfg.seed, streams::id(streams::AGENTS, n as u64));
                let ty = sample_device_type(&mut rng, cfg);
                let state = initial_state(cfg, &mut rng);
                Agent {
                    ty,
                    state,
                    rng,
                    class: cfg.class_of(n),
                    choice: 0,
                }
            })
            .collect();
        Self::assemble(cfg, policy, agents)
    }

    /// Population with the given types, one per device.
    pub fn from_types(cfg: &NetworkConfig, policy: PolicyKind, types: Vec<DeviceType>) -> Self {
        assert_eq!(types.len(), cfg.num_devices, "one type per device");
        let agents = types
            .into_iter()
            .enumerate()
            .map(|(n, ty)| {
                let mut rng = RngStream::new(cfg.seed, streams::id(streams::AGENTS, n as u64));
                let state = initial_state(cfg, &mut rng);
                Agent {
                    ty,
                    state,
                    rng,
                    class: cfg.class_of(n),
                    choice: 0,
                }
            })
            .collect();
        Self::assemble(cfg, policy, agents)
    }

    fn assemble(cfg: &NetworkConfig, policy: PolicyKind, agents: Vec<Agent>) -> Self {
        World {
            cfg: cfg.clone(),
            policy,
            agents,
            links: cfg.link_table(),
            round: 0,
            regenerate: true,
            lifetimes: LifetimeStats::default(),
        }
    }

    /// Turns regeneration off (fixed population) or back on.
    pub fn set_regeneration(&mut self, on: bool) {
        self.regenerate = on;
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn states(&self) -> impl Iterator<Item = &AgentState> {
        self.agents.iter().map(|a| &a.state)
    }

    pub fn types(&self) -> impl Iterator<Item = &DeviceType> {
        self.agents.iter().map(|a| &a.ty)
    }

    pub fn lifetimes(&self) -> LifetimeStats {
        self.lifetimes
    }

    /// Advances one round and returns its metrics.
    pub fn step(&mut self) -> RoundMetrics {
        let cfg = &self.cfg;
        let m = cfg.num_sbs;
        let n = cfg.num_devices;
        let policy = self.policy;

        // Phase 1: simultaneous selection.
        self.agents.par_iter_mut().for_each(|a| {
            if cfg.type_mode == TypeMode::PerRound {
                redraw_gains(&mut a.rng, &mut a.ty, cfg);
            }
            a.choice = policy.select(&a.state, &a.ty, &mut a.rng);
        });

        // Phase 2: fractions from this round's selections.
        let mut counts = vec![0usize; m];
        for a in &self.agents {
            counts[a.choice] += 1;
        }
        let profile = PopulationProfile::from_counts(&counts, n);

        // Unit-gain power thresholds per (class, sbs). Unchosen SBSs are never queried.
        let thresholds: Vec<f64> = self
            .links
            .iter()
            .enumerate()
            .map(|(i, lp)| {
                let f = profile.fractions[i % m];
                if f > 0.0 {
                    // Overflow means the rate target is unreachable: P_min is infinite.
                    power_threshold(f, lp).unwrap_or(f64::INFINITY)
                } else {
                    f64::NAN
                }
            })
            .collect();

        // Phases 3 and 4: rewards, state updates, regeneration.
        let links = &self.links;
        let fractions = &profile.fractions;
        let regenerate = self.regenerate;
        let outcomes: Vec<Outcome> = self
            .agents
            .par_iter_mut()
            .map(|a| {
                let arm = a.choice;
                let slot = a.class * m + arm;
                let lp = &links[slot];
                let gain = a.ty.gains[arm];
                let (success, rate) = match cfg.reward_mode {
                    RewardMode::Bernoulli => {
                        let p = success_from_min_power(thresholds[slot] / gain, lp.sigma);
                        (a.rng.bernoulli(p), f64::NAN)
                    }
                    RewardMode::Physical => {
                        let power = sample_half_normal(&mut a.rng, lp.sigma);
                        let rate = achievable_rate(power, gain, fractions[arm], lp)
                            .expect("chosen SBS has f > 0");
                        (rate >= lp.min_rate, rate)
                    }
                };
                a.state.record(arm, success);

                let mut lifetime = 0;
                if regenerate && !a.rng.bernoulli(cfg.continue_prob) {
                    lifetime = a.state.age;
                    a.ty = sample_device_type(&mut a.rng, cfg);
                    a.state.reset();
                }
                Outcome {
                    success,
                    rate,
                    lifetime,
                }
            })
            .collect();

        self.round += 1;
        let mut successes = 0;
        let mut regenerations = 0;
        let mut rate_sum = 0.0;
        let mut successful_sum = 0.0;
        for o in &outcomes {
            if o.success {
                successes += 1;
                successful_sum += o.rate;
            }
            rate_sum += o.rate;
            if o.lifetime > 0 {
                regenerations += 1;
                let l = f64::from(o.lifetime);
                self.lifetimes.count += 1;
                self.lifetimes.sum += l;
                self.lifetimes.sum_sq += l * l;
            }
        }
        let physical = cfg.reward_mode == RewardMode::Physical;
        RoundMetrics {
            round: self.round,
            profile,
            successes,
            aggregate_throughput: physical.then_some(rate_sum),
            successful_throughput: physical.then_some(successful_sum),
            regenerations,
        }
    }
}

fn initial_state(cfg: &NetworkConfig, rng: &mut RngStream) -> AgentState {
    let mut state = AgentState::new(cfg.num_sbs);
    if cfg.random_init {
        for arm in 0..cfg.num_sbs {
            state.wins[arm] = rng.index(3) as u32;
            state.losses[arm] = rng.index(3) as u32;
        }
        state.age = state.wins.iter().chain(&state.losses).sum();
    }
    state
}

/// The metrics of a whole run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub cfg: NetworkConfig,
    pub rounds: Vec<RoundMetrics>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn final_profile(&self) -> Option<&PopulationProfile> {
        self.rounds.last().map(|r| &r.profile)
    }

    /// Average fraction vector over rounds strictly after `burn_in`.
    pub fn mean_profile_after(&self, burn_in: usize) -> PopulationProfile {
        let m = self.cfg.num_sbs;
        let tail: Vec<_> = self.rounds.iter().filter(|r| r.round > burn_in).collect();
        let mut acc = vec![0.0; m];
        for r in &tail {
            for (a, f) in acc.iter_mut().zip(&r.profile.fractions) {
                *a += f;
            }
        }
        let k = tail.len() as f64;
        PopulationProfile {
            fractions: acc.into_iter().map(|a| a / k).collect(),
        }
    }
}

/// Runs `cfg.horizon` rounds from a fresh population.
pub fn run(cfg: &NetworkConfig, policy: PolicyKind) -> Trajectory {
    let mut world = World::new(cfg, policy);
    run_world(&mut world, cfg.horizon)
}

/// Steps an existing world `rounds` times.
pub fn run_world(world: &mut World, rounds: usize) -> Trajectory {
    let rounds = (0..rounds).map(|_| world.step()).collect();
    Trajectory {
        cfg: world.config().clone(),
        rounds,
    }
}

/// First round `t` whose window `[t, t + window)` keeps every fraction within
/// `tol` (sup norm) of the window mean. `None` if no full window qualifies.
pub fn detect_stationarity(traj: &Trajectory, window: usize, tol: f64) -> Option<usize> {
    assert!(window >= 2, "window must be at least 2");
    let t_len = traj.rounds.len();
    if t_len < window {
        return None;
    }
    let m = traj.cfg.num_sbs;
    let series: Vec<&[f64]> = traj
        .rounds
        .iter()
        .map(|r| r.profile.fractions.as_slice())
        .collect();
    let mut sums = vec![0.0; m];
    for row in &series[..window] {
        for (s, f) in sums.iter_mut().zip(row.iter()) {
            *s += f;
        }
    }
    for start in 0..=t_len - window {
        if start > 0 {
            for j in 0..m {
                sums[j] += series[start + window - 1][j] - series[start - 1][j];
            }
        }
        let stationary = series[start..start + window].iter().all(|row| {
            row.iter()
                .zip(&sums)
                .all(|(f, s)| (f - s / window as f64).abs() <= tol)
        });
        if stationary {
            return Some(traj.rounds[start].round);
        }
    }
    None
}
