//! Scenario configuration and the domain records shared by every module.
//!
//! The configuration document is plain UTF-8 text with one `key = value`
//! pair per line and `#` comments. Keys that are absent take the reference
//! defaults (`W_m = N`, `r_min = 0.75`, `I + N0 = 1`, `sigma = 1`).

use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::physics::LinkParams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{field} {message}")]
    Invalid { field: &'static str, message: String },
}

impl ConfigError {
    fn invalid(field: &'static str, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field,
            message: message.into(),
        }
    }

    fn parse(line: usize, message: impl Into<String>) -> Self {
        ConfigError::Parse {
            line,
            message: message.into(),
        }
    }
}

/// How a device's reward is drawn once the round's fractions are known.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardMode {
    /// Bernoulli draw with the closed-form success probability.
    Bernoulli,
    /// Draw the harvested power, compute the realized rate, compare to `r_min`.
    Physical,
}

/// When a device's channel gains are redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TypeMode {
    /// Gains stay fixed for the device's whole lifetime.
    FixedUntilRegen,
    /// Gains are redrawn every round from the device's own exponential rates
    /// (block fading).
    PerRound,
}

/// Per-SBS bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub enum Bandwidth {
    /// `W_m = N` for every SBS, tracking `num_devices`.
    MatchDevices,
    /// One value for all SBSs, or one per SBS.
    Values(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub num_sbs: usize,
    pub num_devices: usize,
    pub bandwidth_per_sbs: Bandwidth,
    /// One value per device class (a single entry applies to every device).
    pub min_rate: Vec<f64>,
    /// `I_nm + N0`, one row per device class; each row holds one value or one per SBS.
    pub interference_plus_noise: Vec<Vec<f64>>,
    /// Half-normal scale of the harvested energy, one value per device class.
    pub energy_scale: Vec<f64>,
    /// `[beta_lo, beta_hi]` for the exponential rate of each device-SBS gain.
    pub channel_rate_range: (f64, f64),
    /// Probability that an agent survives a round; regeneration has probability `1 - alpha`.
    pub continue_prob: f64,
    pub horizon: usize,
    pub seed: u64,
    pub reward_mode: RewardMode,
    pub type_mode: TypeMode,
    /// Clamp sampled gains into `(0, 1]`.
    pub clamp_gains: bool,
    /// Start agents from small random win/loss counts instead of zero.
    pub random_init: bool,
    /// Replace every sampled gain by this constant (analysis scenarios).
    pub forced_gain: Option<f64>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            num_sbs: 5,
            num_devices: 1000,
            bandwidth_per_sbs: Bandwidth::MatchDevices,
            min_rate: vec![0.75],
            interference_plus_noise: vec![vec![1.0]],
            energy_scale: vec![1.0],
            channel_rate_range: (0.5, 2.0),
            continue_prob: 0.95,
            horizon: 2000,
            seed: 0,
            reward_mode: RewardMode::Bernoulli,
            type_mode: TypeMode::FixedUntilRegen,
            clamp_gains: false,
            random_init: false,
            forced_gain: None,
        }
    }
}

impl NetworkConfig {
    /// Number of device classes implied by the per-class parameter lists.
    pub fn num_classes(&self) -> usize {
        self.min_rate
            .len()
            .max(self.interference_plus_noise.len())
            .max(self.energy_scale.len())
            .max(1)
    }

    /// Devices are assigned to classes round-robin by index.
    pub fn class_of(&self, device: usize) -> usize {
        device % self.num_classes()
    }

    pub fn bandwidth(&self, sbs: usize) -> f64 {
        match &self.bandwidth_per_sbs {
            Bandwidth::MatchDevices => self.num_devices as f64,
            Bandwidth::Values(v) => pick(v, sbs),
        }
    }

    pub fn min_rate_of(&self, class: usize) -> f64 {
        pick(&self.min_rate, class)
    }

    pub fn energy_scale_of(&self, class: usize) -> f64 {
        pick(&self.energy_scale, class)
    }

    pub fn ipn_of(&self, class: usize, sbs: usize) -> f64 {
        let row = if self.interference_plus_noise.len() == 1 {
            &self.interference_plus_noise[0]
        } else {
            &self.interference_plus_noise[class]
        };
        pick(row, sbs)
    }

    pub fn link_params(&self, class: usize, sbs: usize) -> LinkParams {
        LinkParams {
            bandwidth: self.bandwidth(sbs),
            population: self.num_devices,
            min_rate: self.min_rate_of(class),
            ipn: self.ipn_of(class, sbs),
            sigma: self.energy_scale_of(class),
        }
    }

    /// Link parameters for every `(class, sbs)` pair, row-major by class.
    pub fn link_table(&self) -> Vec<LinkParams> {
        let mut out = Vec::with_capacity(self.num_classes() * self.num_sbs);
        for c in 0..self.num_classes() {
            for m in 0..self.num_sbs {
                out.push(self.link_params(c, m));
            }
        }
        out
    }

    /// Mean lifetime in rounds under geometric regeneration.
    pub fn mean_lifetime(&self) -> f64 {
        1.0 / (1.0 - self.continue_prob)
    }
}

fn pick(values: &[f64], index: usize) -> f64 {
    if values.len() == 1 {
        values[0]
    } else {
        values[index]
    }
}

fn check_positive(field: &'static str, values: &[f64]) -> Result<(), ConfigError> {
    if values.is_empty() {
        return Err(ConfigError::invalid(field, "must not be empty"));
    }
    if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(ConfigError::invalid(field, "must be > 0"));
    }
    Ok(())
}

fn check_class_len(field: &'static str, len: usize, classes: usize) -> Result<(), ConfigError> {
    if len != 1 && len != classes {
        return Err(ConfigError::invalid(
            field,
            format!("must list 1 or {classes} per-class values, got {len}"),
        ));
    }
    Ok(())
}

/// Checks every invariant of [`NetworkConfig`] in field order and returns the
/// config unchanged, or the first violation.
pub fn validate_config(raw: NetworkConfig) -> Result<NetworkConfig, ConfigError> {
    let c = &raw;
    if c.num_sbs < 1 {
        return Err(ConfigError::invalid("num_sbs", "must be >= 1"));
    }
    if c.num_devices < 1 {
        return Err(ConfigError::invalid("num_devices", "must be >= 1"));
    }
    if let Bandwidth::Values(v) = &c.bandwidth_per_sbs {
        check_positive("bandwidth_per_sbs", v)?;
        if v.len() != 1 && v.len() != c.num_sbs {
            return Err(ConfigError::invalid(
                "bandwidth_per_sbs",
                format!("must list 1 or {} values, got {}", c.num_sbs, v.len()),
            ));
        }
    }
    let classes = c.num_classes();
    check_positive("min_rate", &c.min_rate)?;
    check_class_len("min_rate", c.min_rate.len(), classes)?;
    if c.interference_plus_noise.is_empty() {
        return Err(ConfigError::invalid(
            "interference_plus_noise",
            "must not be empty",
        ));
    }
    check_class_len(
        "interference_plus_noise",
        c.interference_plus_noise.len(),
        classes,
    )?;
    for row in &c.interference_plus_noise {
        check_positive("interference_plus_noise", row)?;
        if row.len() != 1 && row.len() != c.num_sbs {
            return Err(ConfigError::invalid(
                "interference_plus_noise",
                format!("rows must hold 1 or {} values, got {}", c.num_sbs, row.len()),
            ));
        }
    }
    check_positive("energy_scale", &c.energy_scale)?;
    check_class_len("energy_scale", c.energy_scale.len(), classes)?;
    let (lo, hi) = c.channel_rate_range;
    check_positive("channel_rate_range", &[lo, hi])?;
    if lo > hi {
        return Err(ConfigError::invalid(
            "channel_rate_range",
            "lower bound must be <= upper bound",
        ));
    }
    if c.continue_prob.is_nan() || c.continue_prob < 0.0 {
        return Err(ConfigError::invalid("continue_prob", "must be >= 0"));
    }
    if c.continue_prob >= 1.0 {
        return Err(ConfigError::invalid("continue_prob", "must be < 1"));
    }
    if c.horizon < 1 {
        return Err(ConfigError::invalid("horizon", "must be >= 1"));
    }
    if let Some(g) = c.forced_gain {
        check_positive("forced_gain", &[g])?;
    }
    Ok(raw)
}

/// Parses a configuration document. Unspecified keys keep their defaults.
pub fn load_config(text: &str) -> Result<NetworkConfig, ConfigError> {
    let mut cfg = NetworkConfig::default();
    let mut seen: Vec<&'static str> = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::parse(line_no, "expected `key = value`"))?;
        let key = canonical_key(key.trim())
            .ok_or_else(|| ConfigError::parse(line_no, format!("unknown key `{}`", key.trim())))?;
        if seen.contains(&key) {
            return Err(ConfigError::parse(line_no, format!("duplicate key `{key}`")));
        }
        seen.push(key);
        apply(&mut cfg, key, value.trim()).map_err(|m| ConfigError::parse(line_no, m))?;
    }
    validate_config(cfg)
}

fn canonical_key(key: &str) -> Option<&'static str> {
    Some(match key {
        "num_sbs" => "num_sbs",
        "num_devices" => "num_devices",
        "bandwidth_per_sbs" => "bandwidth_per_sbs",
        "min_rate" => "min_rate",
        "interference_plus_noise" | "ipn" => "interference_plus_noise",
        "energy_scale" | "sigma" => "energy_scale",
        "channel_rate_range" => "channel_rate_range",
        "continue_prob" | "alpha" => "continue_prob",
        "horizon" => "horizon",
        "seed" => "seed",
        "reward_mode" => "reward_mode",
        "type_mode" => "type_mode",
        "clamp_gains" => "clamp_gains",
        "random_init" => "random_init",
        "forced_gain" => "forced_gain",
        _ => return None,
    })
}

fn apply(cfg: &mut NetworkConfig, key: &str, value: &str) -> Result<(), String> {
    match key {
        "num_sbs" => cfg.num_sbs = parse_int(value)?,
        "num_devices" => cfg.num_devices = parse_int(value)?,
        "bandwidth_per_sbs" => {
            cfg.bandwidth_per_sbs = if value == "N" {
                Bandwidth::MatchDevices
            } else {
                Bandwidth::Values(parse_list(value)?)
            }
        }
        "min_rate" => cfg.min_rate = parse_list(value)?,
        "interference_plus_noise" => {
            cfg.interference_plus_noise = value
                .split(';')
                .map(parse_list)
                .collect::<Result<_, _>>()?
        }
        "energy_scale" => cfg.energy_scale = parse_list(value)?,
        "channel_rate_range" => {
            let v = parse_list(value)?;
            if v.len() != 2 {
                return Err(format!("channel_rate_range needs 2 values, got {}", v.len()));
            }
            cfg.channel_rate_range = (v[0], v[1]);
        }
        "continue_prob" => cfg.continue_prob = parse_real(value)?,
        "horizon" => cfg.horizon = parse_int(value)?,
        "seed" => {
            cfg.seed = value
                .parse()
                .map_err(|_| format!("invalid seed `{value}`"))?
        }
        "reward_mode" => {
            cfg.reward_mode = match value {
                "bernoulli" => RewardMode::Bernoulli,
                "physical" => RewardMode::Physical,
                _ => return Err(format!("unknown reward_mode `{value}`")),
            }
        }
        "type_mode" => {
            cfg.type_mode = match value {
                "fixed_until_regen" => TypeMode::FixedUntilRegen,
                "per_round" => TypeMode::PerRound,
                _ => return Err(format!("unknown type_mode `{value}`")),
            }
        }
        "clamp_gains" => cfg.clamp_gains = parse_bool(value)?,
        "random_init" => cfg.random_init = parse_bool(value)?,
        "forced_gain" => {
            cfg.forced_gain = if value == "none" {
                None
            } else {
                Some(parse_real(value)?)
            }
        }
        _ => unreachable!("canonical_key covers every key"),
    }
    Ok(())
}

fn parse_int(value: &str) -> Result<usize, String> {
    if let Ok(v) = value.parse::<usize>() {
        return Ok(v);
    }
    // Accept integral scientific notation such as `5e4`.
    match value.parse::<f64>() {
        Ok(v) if v.fract() == 0.0 && (0.0..1e15).contains(&v) => Ok(v as usize),
        _ => Err(format!("expected a nonnegative integer, got `{value}`")),
    }
}

fn parse_real(value: &str) -> Result<f64, String> {
    value
        .parse::<f64>()
        .map_err(|_| format!("expected a number, got `{value}`"))
}

fn parse_list(value: &str) -> Result<Vec<f64>, String> {
    value.split(',').map(|s| parse_real(s.trim())).collect()
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got `{value}`")),
    }
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Renders a config as a document that [`load_config`] parses back to an equal value.
pub fn dump_config(cfg: &NetworkConfig) -> String {
    let mut out = String::new();
    for (key, value) in config_entries(cfg) {
        let _ = writeln!(out, "{key} = {value}");
    }
    out
}

/// Canonical `(key, value)` pairs, in document order.
pub fn config_entries(cfg: &NetworkConfig) -> Vec<(&'static str, String)> {
    let bandwidth = match &cfg.bandwidth_per_sbs {
        Bandwidth::MatchDevices => "N".to_string(),
        Bandwidth::Values(v) => join(v),
    };
    let ipn = cfg
        .interference_plus_noise
        .iter()
        .map(|row| join(row))
        .collect::<Vec<_>>()
        .join("; ");
    vec![
        ("num_sbs", cfg.num_sbs.to_string()),
        ("num_devices", cfg.num_devices.to_string()),
        ("bandwidth_per_sbs", bandwidth),
        ("min_rate", join(&cfg.min_rate)),
        ("interference_plus_noise", ipn),
        ("energy_scale", join(&cfg.energy_scale)),
        (
            "channel_rate_range",
            join(&[cfg.channel_rate_range.0, cfg.channel_rate_range.1]),
        ),
        ("continue_prob", format!("{:?}", cfg.continue_prob)),
        ("horizon", cfg.horizon.to_string()),
        ("seed", cfg.seed.to_string()),
        ("reward_mode", cfg.reward_mode.to_string()),
        ("type_mode", cfg.type_mode.to_string()),
        ("clamp_gains", cfg.clamp_gains.to_string()),
        ("random_init", cfg.random_init.to_string()),
        (
            "forced_gain",
            cfg.forced_gain
                .map_or_else(|| "none".to_string(), |g| format!("{g:?}")),
        ),
    ]
}

impl fmt::Display for RewardMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RewardMode::Bernoulli => "bernoulli",
            RewardMode::Physical => "physical",
        })
    }
}

impl fmt::Display for TypeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TypeMode::FixedUntilRegen => "fixed_until_regen",
            TypeMode::PerRound => "per_round",
        })
    }
}

/// A device's channel gains toward every SBS (its bandit type) and the
/// exponential rates they were drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceType {
    pub gains: Vec<f64>,
    pub rates: Vec<f64>,
}

impl DeviceType {
    pub fn num_sbs(&self) -> usize {
        self.gains.len()
    }
}

/// Per-arm win/loss counts since the last regeneration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentState {
    pub wins: Vec<u32>,
    pub losses: Vec<u32>,
    pub age: u32,
}

impl AgentState {
    pub fn new(num_sbs: usize) -> Self {
        AgentState {
            wins: vec![0; num_sbs],
            losses: vec![0; num_sbs],
            age: 0,
        }
    }

    pub fn num_sbs(&self) -> usize {
        self.wins.len()
    }

    pub fn pulls(&self, arm: usize) -> u32 {
        self.wins[arm] + self.losses[arm]
    }

    pub fn record(&mut self, arm: usize, success: bool) {
        if success {
            self.wins[arm] += 1;
        } else {
            self.losses[arm] += 1;
        }
        self.age += 1;
    }

    pub fn reset(&mut self) {
        self.wins.iter_mut().for_each(|w| *w = 0);
        self.losses.iter_mut().for_each(|l| *l = 0);
        self.age = 0;
    }

    /// `sum(wins + losses) == age`.
    pub fn is_consistent(&self) -> bool {
        let total: u64 = self
            .wins
            .iter()
            .zip(&self.losses)
            .map(|(w, l)| u64::from(*w) + u64::from(*l))
            .sum();
        total == u64::from(self.age)
    }
}

/// Fraction of devices associated with each SBS.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationProfile {
    pub fractions: Vec<f64>,
}

impl PopulationProfile {
    pub fn uniform(num_sbs: usize) -> Self {
        PopulationProfile {
            fractions: vec![1.0 / num_sbs as f64; num_sbs],
        }
    }

    pub fn from_counts(counts: &[usize], total: usize) -> Self {
        let n = total as f64;
        PopulationProfile {
            fractions: counts.iter().map(|&c| c as f64 / n).collect(),
        }
    }

    /// Rescales nonnegative weights to sum to one.
    pub fn normalized(weights: Vec<f64>) -> Self {
        let sum: f64 = weights.iter().sum();
        PopulationProfile {
            fractions: weights.into_iter().map(|w| w / sum).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.fractions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fractions.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.fractions.iter().sum()
    }

    /// Sup-norm distance.
    pub fn max_gap(&self, other: &PopulationProfile) -> f64 {
        self.fractions
            .iter()
            .zip(&other.fractions)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundMetrics {
    pub round: usize,
    pub profile: PopulationProfile,
    pub successes: usize,
    /// Sum of realized rates; absent when rewards are drawn in Bernoulli mode.
    pub aggregate_throughput: Option<f64>,
    /// Sum of realized rates over successful transmissions only.
    pub successful_throughput: Option<f64>,
    pub regenerations: usize,
}
