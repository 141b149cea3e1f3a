//! Mean-field equilibrium analysis.
//!
//! Three pieces:
//!
//! * the closed-form uniqueness bound on the continue probability,
//!   `alpha <= 1 / (1 + a_nm exp(b_nm))` for every device-SBS pair, with
//!   `a_nm = sqrt(2/pi) N r_min (I + N0) / (W_m h'_nm sigma)` and
//!   `b_nm = (I + N0)^2 / (2 h'_nm sigma^2)`;
//! * a finite-difference estimate of the Lipschitz constant of the success
//!   probability in the fraction `f`, the hypothesis behind uniqueness;
//! * a Monte-Carlo fixed-point solver. The map holds `f` fixed, simulates
//!   independent regenerating single-agent lifetimes, and returns the pooled
//!   share of pulls per arm. By renewal-reward this is the long-run arm share
//!   a regenerating population produces when it faces `f`.

use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::dynamics::Trajectory;
use crate::model::{AgentState, DeviceType, NetworkConfig, PopulationProfile, TypeMode};
use crate::physics::{power_threshold, success_from_min_power, success_probability, LinkParams};
use crate::policy::PolicyKind;
use crate::stochastics::{
    redraw_gains, sample_device_type, sample_exponential, streams, RngStream,
};

/// Type draws used for the network-level bound when none are supplied.
pub const DEFAULT_BOUND_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquilibriumError {
    #[error("gain of device {device} toward SBS {sbs} must be > 0, got {gain}")]
    NonPositiveGain { device: usize, sbs: usize, gain: f64 },
    #[error("no types to evaluate")]
    NoTypes,
    #[error("type {device} has {got} gains, expected {expected}")]
    ShapeMismatch { device: usize, got: usize, expected: usize },
    #[error("grid_step must be in (0, 1e-3], got {0}")]
    GridStep(f64),
    #[error("tol below MC noise floor ({tol} <= {floor})")]
    TolBelowNoiseFloor { tol: f64, floor: f64 },
    #[error("damping must be in (0, 1], got {0}")]
    Damping(f64),
    #[error("max_iter must be >= 1")]
    MaxIter,
    #[error("lifetimes must be >= 1")]
    Lifetimes,
}

/// Per-pair uniqueness bounds. Matrices are indexed `[device][sbs]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    pub a: Vec<Vec<f64>>,
    /// `b_nm` with `h'` in the denominator, as the bound is stated.
    pub b: Vec<Vec<f64>>,
    /// Dimensionally consistent variant with `h'^2` in the denominator.
    pub b_gain_squared: Vec<Vec<f64>>,
    pub alpha_max: Vec<Vec<f64>>,
    pub network_alpha_max: f64,
    /// Network bound using `b_gain_squared`.
    pub network_alpha_max_gain_squared: f64,
    /// Network bound `1 / (1 + L)` with the derivative bound `L = a + exp(b)`.
    pub network_alpha_max_sum_bound: f64,
    /// `(device, sbs)` attaining `network_alpha_max`.
    pub binding_pair: (usize, usize),
    pub continue_prob: f64,
    pub satisfied: bool,
    pub samples: usize,
}

/// `1 / (1 + exp(z))` without overflow.
fn logistic_complement(z: f64) -> f64 {
    if z > 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// `1 / (1 + a exp(b))`, computed in log space.
pub fn alpha_bound(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        return 1.0;
    }
    logistic_complement(a.ln() + b)
}

/// Evaluates the uniqueness bound for every `(type, SBS)` pair. Type `n`
/// belongs to device class `n mod K`.
pub fn uniqueness_alpha_bound(
    types: &[DeviceType],
    cfg: &NetworkConfig,
) -> Result<UniquenessReport, EquilibriumError> {
    if types.is_empty() {
        return Err(EquilibriumError::NoTypes);
    }
    let n_total = cfg.num_devices as f64;
    let coef = (2.0 / PI).sqrt();
    let rows = types.len();
    let mut a = vec![vec![0.0; cfg.num_sbs]; rows];
    let mut b = a.clone();
    let mut b2 = a.clone();
    let mut alpha = a.clone();
    let mut network = f64::INFINITY;
    let mut network_sq = f64::INFINITY;
    let mut network_sum = f64::INFINITY;
    let mut binding = (0, 0);

    for (n, ty) in types.iter().enumerate() {
        let class = cfg.class_of(n);
        let r_min = cfg.min_rate_of(class);
        let sigma = cfg.energy_scale_of(class);
        if ty.gains.len() != cfg.num_sbs {
            return Err(EquilibriumError::ShapeMismatch {
                device: n,
                got: ty.gains.len(),
                expected: cfg.num_sbs,
            });
        }
        for m in 0..cfg.num_sbs {
            let h = ty.gains[m];
            if h.is_nan() || h <= 0.0 {
                return Err(EquilibriumError::NonPositiveGain {
                    device: n,
                    sbs: m,
                    gain: h,
                });
            }
            let ipn = cfg.ipn_of(class, m);
            let w = cfg.bandwidth(m);
            a[n][m] = coef * n_total * r_min * ipn / (w * h * sigma);
            b[n][m] = ipn * ipn / (2.0 * h * sigma * sigma);
            b2[n][m] = ipn * ipn / (2.0 * h * h * sigma * sigma);
            alpha[n][m] = alpha_bound(a[n][m], b[n][m]);

            if alpha[n][m] < network {
                network = alpha[n][m];
                binding = (n, m);
            }
            network_sq = network_sq.min(alpha_bound(a[n][m], b2[n][m]));
            network_sum = network_sum.min(1.0 / (1.0 + a[n][m] + b[n][m].exp()));
        }
    }

    Ok(UniquenessReport {
        a,
        b,
        b_gain_squared: b2,
        alpha_max: alpha,
        network_alpha_max: network,
        network_alpha_max_gain_squared: network_sq,
        network_alpha_max_sum_bound: network_sum,
        binding_pair: binding,
        continue_prob: cfg.continue_prob,
        satisfied: cfg.continue_prob <= network,
        samples: rows,
    })
}

/// Representative types for the network-level bound.
pub fn sample_bound_types(cfg: &NetworkConfig, samples: usize) -> Vec<DeviceType> {
    (0..samples)
        .map(|i| {
            let mut rng = RngStream::new(cfg.seed, streams::id(streams::BOUND_TYPES, i as u64));
            sample_device_type(&mut rng, cfg)
        })
        .collect()
}

/// Largest absolute finite-difference slope of the success probability in `f`
/// over the uniform grid `step, 2 step, ..., 1`.
pub fn lipschitz_estimate(gain: f64, lp: &LinkParams, grid_step: f64) -> Result<f64, EquilibriumError> {
    if !(grid_step > 0.0 && grid_step <= 1e-3) {
        return Err(EquilibriumError::GridStep(grid_step));
    }
    let points = (1.0 / grid_step).round() as usize;
    // Past the overflow point the target rate is unreachable and p is 0.
    let p = |k: usize| success_probability(k as f64 / points as f64, gain, lp).unwrap_or(0.0);
    let mut prev = p(1);
    let mut best = 0.0f64;
    for k in 2..=points {
        let cur = p(k);
        best = best.max((cur - prev).abs() * points as f64);
        prev = cur;
    }
    Ok(best)
}

/// Monte-Carlo budget for one evaluation of [`mfe_map`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarlo {
    pub lifetimes: usize,
    pub horizon_cap: usize,
}

impl MonteCarlo {
    pub const DEFAULT_LIFETIMES: usize = 20_000;

    /// `horizon_cap` defaults to `ceil(10 / (1 - alpha))`.
    pub fn for_config(cfg: &NetworkConfig, lifetimes: usize) -> Self {
        MonteCarlo {
            lifetimes,
            horizon_cap: (10.0 * cfg.mean_lifetime()).ceil() as usize,
        }
    }

    /// Standard-error scale of an arm share estimated from `lifetimes`
    /// independent lifetimes, `sqrt(1/4 / lifetimes)`.
    pub fn noise_floor(&self) -> f64 {
        0.5 / (self.lifetimes as f64).sqrt()
    }
}

/// Population best-response map: the pooled arm-pull distribution of
/// independent regenerating agents facing the fixed fractions `f`.
///
/// Lifetime `i` always uses the same stream, so repeated evaluations share
/// their random numbers and the map is a deterministic function of `f`.
pub fn mfe_map(
    f: &PopulationProfile,
    cfg: &NetworkConfig,
    policy: PolicyKind,
    mc: MonteCarlo,
) -> PopulationProfile {
    let m = cfg.num_sbs;
    let floor = 1.0 / cfg.num_devices as f64;
    let fractions: Vec<f64> = f
        .fractions
        .iter()
        .map(|&x| if x > 0.0 { x } else { floor })
        .collect();
    let links = cfg.link_table();
    let thresholds: Vec<f64> = links
        .iter()
        .enumerate()
        .map(|(i, lp)| power_threshold(fractions[i % m], lp).unwrap_or(f64::INFINITY))
        .collect();
    let cap = mc.horizon_cap.max(1);

    let counts = (0..mc.lifetimes)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(cfg.seed, streams::id(streams::LIFETIMES, i as u64));
            let mut ty = sample_device_type(&mut rng, cfg);
            let class = cfg.class_of(i);
            let mut state = AgentState::new(m);
            let mut pulls = vec![0u64; m];
            loop {
                if cfg.type_mode == TypeMode::PerRound {
                    redraw_gains(&mut rng, &mut ty, cfg);
                }
                let arm = policy.select(&state, &ty, &mut rng);
                pulls[arm] += 1;
                let slot = class * m + arm;
                let p = success_from_min_power(thresholds[slot] / ty.gains[arm], links[slot].sigma);
                let win = rng.bernoulli(p);
                state.record(arm, win);
                if state.age as usize >= cap || !rng.bernoulli(cfg.continue_prob) {
                    break;
                }
            }
            pulls
        })
        .reduce(
            || vec![0u64; m],
            |mut acc, x| {
                acc.iter_mut().zip(x).for_each(|(a, b)| *a += b);
                acc
            },
        );
    PopulationProfile::normalized(counts.into_iter().map(|c| c as f64).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub damping: f64,
    pub max_iter: usize,
    pub mc: MonteCarlo,
    /// Starting profile; uniform when absent.
    pub initial: Option<PopulationProfile>,
}

impl SolveOptions {
    pub fn new(cfg: &NetworkConfig, tol: f64) -> Self {
        SolveOptions {
            tol,
            damping: 0.5,
            max_iter: 200,
            mc: MonteCarlo::for_config(cfg, MonteCarlo::DEFAULT_LIFETIMES),
            initial: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MfeSolution {
    pub profile: PopulationProfile,
    /// `max |map(f) - f|` at the returned profile.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Damped fixed-point iteration `f <- (1 - d) f + d map(f)` until the
/// residual drops to `tol` or `max_iter` evaluations of the map are spent.
pub fn solve_mfe(
    cfg: &NetworkConfig,
    policy: PolicyKind,
    opts: &SolveOptions,
) -> Result<MfeSolution, EquilibriumError> {
    if opts.mc.lifetimes == 0 {
        return Err(EquilibriumError::Lifetimes);
    }
    let floor = opts.mc.noise_floor();
    if opts.tol.is_nan() || opts.tol <= floor {
        return Err(EquilibriumError::TolBelowNoiseFloor {
            tol: opts.tol,
            floor,
        });
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(EquilibriumError::Damping(opts.damping));
    }
    if opts.max_iter == 0 {
        return Err(EquilibriumError::MaxIter);
    }

    let mut f = opts
        .initial
        .clone()
        .unwrap_or_else(|| PopulationProfile::uniform(cfg.num_sbs));
    let mut residual = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        let image = mfe_map(&f, cfg, policy, opts.mc);
        residual = image.max_gap(&f);
        if residual <= opts.tol {
            return Ok(MfeSolution {
                profile: f,
                residual,
                iterations: iter,
                converged: true,
            });
        }
        let d = opts.damping;
        f = PopulationProfile::normalized(
            f.fractions
                .iter()
                .zip(&image.fractions)
                .map(|(old, new)| (1.0 - d) * old + d * new)
                .collect(),
        );
    }
    Ok(MfeSolution {
        profile: f,
        residual,
        iterations: opts.max_iter,
        converged: false,
    })
}

/// Uniformly random point of the probability simplex (flat Dirichlet).
pub fn random_profile(rng: &mut RngStream, num_sbs: usize) -> PopulationProfile {
    PopulationProfile::normalized((0..num_sbs).map(|_| sample_exponential(rng, 1.0)).collect())
}

/// Sup-norm gap between the trajectory's post-burn-in mean profile and `fstar`.
pub fn check_consistency(traj: &Trajectory, fstar: &PopulationProfile, burn_in: usize) -> f64 {
    assert!(burn_in < traj.len(), "burn_in must be shorter than the trajectory");
    traj.mean_profile_after(burn_in).max_gap(fstar)
}
