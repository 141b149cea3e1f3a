//! Static reference assignments and the throughput comparison against the
//! learning population.

use rayon::prelude::*;

use crate::dynamics::{run_world, World};
use crate::model::{DeviceType, NetworkConfig, PopulationProfile, RewardMode};
use crate::physics::achievable_rate;
use crate::policy::{informed_greedy_select, uniform_select, PolicyKind};
use crate::stochastics::{sample_device_type, sample_half_normal, streams, RngStream};

/// One SBS index per device.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub choice: Vec<usize>,
}

impl Assignment {
    pub fn counts(&self, num_sbs: usize) -> Vec<usize> {
        let mut counts = vec![0; num_sbs];
        for &c in &self.choice {
            counts[c] += 1;
        }
        counts
    }
}

/// Every device goes to its strongest channel.
pub fn centralized_assignment(types: &[DeviceType]) -> Assignment {
    Assignment {
        choice: types.iter().map(informed_greedy_select).collect(),
    }
}

pub fn random_assignment(rng: &mut RngStream, num_devices: usize, num_sbs: usize) -> Assignment {
    Assignment {
        choice: (0..num_devices).map(|_| uniform_select(num_sbs, rng)).collect(),
    }
}

/// Per-round aggregate throughput.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ThroughputTrace {
    /// Sum of every device's realized rate.
    pub rate_sum: Vec<f64>,
    /// Sum of realized rates that met `r_min`.
    pub successful_rate_sum: Vec<f64>,
}

impl ThroughputTrace {
    pub fn mean(&self) -> f64 {
        mean(&self.rate_sum)
    }

    pub fn successful_mean(&self) -> f64 {
        mean(&self.successful_rate_sum)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// One reward stream per device under the given stream namespace.
pub fn device_streams(seed: u64, tag: u64, num_devices: usize) -> Vec<RngStream> {
    (0..num_devices)
        .map(|n| RngStream::new(seed, streams::id(tag, n as u64)))
        .collect()
}

/// Holds the assignment fixed for `rounds` rounds. Each round every device
/// transmits with fresh half-normal power; device `n` draws from `streams[n]`.
pub fn evaluate_assignment_trace(
    assign: &Assignment,
    types: &[DeviceType],
    cfg: &NetworkConfig,
    rounds: usize,
    streams: &mut [RngStream],
) -> ThroughputTrace {
    assert!(rounds >= 1, "rounds must be >= 1");
    assert_eq!(assign.choice.len(), types.len());
    assert_eq!(streams.len(), types.len());
    let n = cfg.num_devices;
    let profile = PopulationProfile::from_counts(&assign.counts(cfg.num_sbs), n);

    let per_device: Vec<Vec<f64>> = streams
        .par_iter_mut()
        .enumerate()
        .map(|(d, rng)| {
            let arm = assign.choice[d];
            let lp = cfg.link_params(cfg.class_of(d), arm);
            let f = profile.fractions[arm];
            let gain = types[d].gains[arm];
            (0..rounds)
                .map(|_| {
                    let power = sample_half_normal(rng, lp.sigma);
                    achievable_rate(power, gain, f, &lp).expect("assigned SBS has f > 0")
                })
                .collect()
        })
        .collect();

    let mut trace = ThroughputTrace {
        rate_sum: vec![0.0; rounds],
        successful_rate_sum: vec![0.0; rounds],
    };
    for (d, rates) in per_device.iter().enumerate() {
        let r_min = cfg.min_rate_of(cfg.class_of(d));
        for (t, &rate) in rates.iter().enumerate() {
            trace.rate_sum[t] += rate;
            if rate >= r_min {
                trace.successful_rate_sum[t] += rate;
            }
        }
    }
    trace
}

/// Mean over rounds of the per-round aggregate throughput.
pub fn evaluate_assignment(
    assign: &Assignment,
    types: &[DeviceType],
    cfg: &NetworkConfig,
    rounds: usize,
    streams: &mut [RngStream],
) -> f64 {
    evaluate_assignment_trace(assign, types, cfg, rounds, streams).mean()
}

/// Throughput traces of the three strategies on one type snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub mf_bandit: ThroughputTrace,
    pub centralized: ThroughputTrace,
    pub random: ThroughputTrace,
}

impl Comparison {
    pub fn rounds(&self) -> usize {
        self.mf_bandit.rate_sum.len()
    }
}

/// Types shared by every strategy in a comparison.
pub fn type_snapshot(cfg: &NetworkConfig) -> Vec<DeviceType> {
    (0..cfg.num_devices)
        .map(|n| {
            let mut rng = RngStream::new(cfg.seed, streams::id(streams::TYPE_SNAPSHOT, n as u64));
            sample_device_type(&mut rng, cfg)
        })
        .collect()
}

/// Runs UCB dynamics (physical rewards, no regeneration) and both static
/// baselines for `rounds` rounds on the same types.
pub fn compare(cfg: &NetworkConfig, rounds: usize) -> Comparison {
    compare_with_churn(cfg, rounds, false)
}

/// As [`compare`]; with `churn` the learning population keeps regenerating.
pub fn compare_with_churn(cfg: &NetworkConfig, rounds: usize, churn: bool) -> Comparison {
    let types = type_snapshot(cfg);
    let dyn_cfg = NetworkConfig {
        reward_mode: RewardMode::Physical,
        horizon: rounds,
        ..cfg.clone()
    };
    let mut world = World::from_types(&dyn_cfg, PolicyKind::ucb(), types.clone());
    world.set_regeneration(churn);
    let traj = run_world(&mut world, rounds);
    let mf_bandit = ThroughputTrace {
        rate_sum: traj
            .rounds
            .iter()
            .map(|r| r.aggregate_throughput.unwrap_or(0.0))
            .collect(),
        successful_rate_sum: traj
            .rounds
            .iter()
            .map(|r| r.successful_throughput.unwrap_or(0.0))
            .collect(),
    };

    let n = cfg.num_devices;
    let central = centralized_assignment(&types);
    let mut central_streams = device_streams(cfg.seed, streams::CENTRALIZED_REWARDS, n);
    let centralized = evaluate_assignment_trace(&central, &types, cfg, rounds, &mut central_streams);

    let mut assign_rng = RngStream::new(cfg.seed, streams::id(streams::RANDOM_ASSIGNMENT, 0));
    let random_assign = random_assignment(&mut assign_rng, n, cfg.num_sbs);
    let mut random_streams = device_streams(cfg.seed, streams::RANDOM_REWARDS, n);
    let random = evaluate_assignment_trace(&random_assign, &types, cfg, rounds, &mut random_streams);

    Comparison {
        mf_bandit,
        centralized,
        random,
    }
}
