//! Reproducible random streams and the handful of samplers the model needs.
//!
//! Every stream is a ChaCha8 keystream selected by `(seed, stream_id)`. ChaCha
//! is counter based, so a stream's output depends only on its key and its own
//! position, never on how many other streams exist or which thread drives them.

mod erf;

pub use erf::{erf, erfc};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::model::{DeviceType, NetworkConfig};

/// Stream-id namespaces. The top byte of a stream id names the subsystem,
/// the low 56 bits index within it.
pub mod streams {
    pub const AGENTS: u64 = 0;
    pub const BOOKKEEPING: u64 = 1;
    pub const LIFETIMES: u64 = 2;
    pub const TYPE_SNAPSHOT: u64 = 3;
    pub const CENTRALIZED_REWARDS: u64 = 4;
    pub const RANDOM_REWARDS: u64 = 5;
    pub const RANDOM_ASSIGNMENT: u64 = 6;
    pub const BOUND_TYPES: u64 = 7;
    pub const INITIAL_PROFILES: u64 = 8;

    pub fn id(tag: u64, index: u64) -> u64 {
        debug_assert!(index < 1 << 56);
        (tag << 56) | index
    }
}

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Position in the keystream, in 32-bit words.
    pub fn counter(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

pub fn make_stream(seed: u64, stream_id: u64) -> RngStream {
    RngStream::new(seed, stream_id)
}

/// `|X|` with `X ~ Normal(0, sigma^2)`.
pub fn sample_half_normal(rng: &mut RngStream, sigma: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    sigma * z.abs()
}

/// Exponential with rate `beta` (mean `1 / beta`), strictly positive.
pub fn sample_exponential(rng: &mut RngStream, beta: f64) -> f64 {
    let dist = Exp::new(beta).expect("exponential rate must be positive");
    loop {
        let x = dist.sample(rng);
        if x > 0.0 {
            return x;
        }
    }
}

/// Draws a fresh type: per-SBS rates uniform on the configured range, then
/// one exponential gain per SBS.
pub fn sample_device_type(rng: &mut RngStream, cfg: &NetworkConfig) -> DeviceType {
    let (lo, hi) = cfg.channel_rate_range;
    let rates: Vec<f64> = (0..cfg.num_sbs)
        .map(|_| lo + (hi - lo) * rng.uniform())
        .collect();
    let mut ty = DeviceType {
        gains: vec![0.0; cfg.num_sbs],
        rates,
    };
    redraw_gains(rng, &mut ty, cfg);
    ty
}

/// Redraws every gain from the type's own rates, keeping the rates.
pub fn redraw_gains(rng: &mut RngStream, ty: &mut DeviceType, cfg: &NetworkConfig) {
    for (gain, &rate) in ty.gains.iter_mut().zip(&ty.rates) {
        *gain = match cfg.forced_gain {
            Some(g) => g,
            None => {
                let g = sample_exponential(rng, rate);
                if cfg.clamp_gains {
                    g.min(1.0)
                } else {
                    g
                }
            }
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_keys_give_equal_streams() {
        let mut a = make_stream(42, 7);
        let mut b = make_stream(42, 7);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        assert_eq!(a.counter(), b.counter());
        assert_eq!((a.seed(), a.stream_id()), (42, 7));
    }

    #[test]
    fn seed_changes_the_stream() {
        let mut a = make_stream(42, 7);
        let mut b = make_stream(43, 7);
        let same = (0..1000).filter(|_| a.uniform() == b.uniform()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn half_normal_is_nonnegative() {
        let mut rng = make_stream(1, 0);
        assert!((0..100_000).all(|_| sample_half_normal(&mut rng, 1.0) >= 0.0));
    }

    #[test]
    fn exponential_is_positive() {
        let mut rng = make_stream(1, 1);
        assert!((0..100_000).all(|_| sample_exponential(&mut rng, 2.0) > 0.0));
    }

    #[test]
    fn device_type_shape() {
        let cfg = NetworkConfig {
            num_sbs: 7,
            ..NetworkConfig::default()
        };
        let mut rng = make_stream(3, 3);
        let ty = sample_device_type(&mut rng, &cfg);
        assert_eq!(ty.gains.len(), 7);
        assert_eq!(ty.rates.len(), 7);
        assert!(ty.gains.iter().all(|g| *g > 0.0));
        assert!(ty.rates.iter().all(|r| (0.5..=2.0).contains(r)));
    }

    #[test]
    fn clamp_and_forced_gain() {
        let mut cfg = NetworkConfig {
            clamp_gains: true,
            channel_rate_range: (0.1, 0.1),
            ..NetworkConfig::default()
        };
        let mut rng = make_stream(5, 5);
        for _ in 0..1000 {
            let ty = sample_device_type(&mut rng, &cfg);
            assert!(ty.gains.iter().all(|g| *g > 0.0 && *g <= 1.0));
        }
        cfg.forced_gain = Some(1.0);
        let ty = sample_device_type(&mut rng, &cfg);
        assert!(ty.gains.iter().all(|g| *g == 1.0));
    }

    #[test]
    fn erf_basics() {
        assert_eq!(erf(0.0), 0.0);
        assert!((erf(std::f64::consts::FRAC_1_SQRT_2) - 0.682_689_492_137_085_9).abs() < 1e-15);
        for &x in &[0.1, 0.5, 0.9, 1.3, 2.0, 3.5, 7.0] {
            assert_eq!(erf(-x), -erf(x));
            assert!((erf(x) + erfc(x) - 1.0).abs() < 1e-15);
        }
        assert_eq!(erf(f64::INFINITY), 1.0);
        assert_eq!(erfc(f64::INFINITY), 0.0);
        assert!(erf(f64::NAN).is_nan());
    }
}
