//! Closed-form link quantities: orthogonal-share rate, the minimum harvested
//! power that meets the rate target, and the resulting success probability
//! under half-normal harvesting.
//!
//! Rates are in nats (natural logarithm), so the minimum-power expression is
//! the exact inverse of the rate expression.

use std::f64::consts::SQRT_2;

use thiserror::Error;

use crate::stochastics::{erfc, sample_half_normal, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum PhysicsError {
    #[error("fraction must be > 0, got {0}")]
    Domain(f64),
    #[error("minimum power overflows: exponent {0} is not representable")]
    Overflow(f64),
}

/// Parameters of one device-class/SBS link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    /// `W_m`.
    pub bandwidth: f64,
    /// `N`, the total device count.
    pub population: usize,
    pub min_rate: f64,
    /// Interference plus noise, `I_nm + N0`.
    pub ipn: f64,
    /// Half-normal scale of the harvested energy.
    pub sigma: f64,
}

impl LinkParams {
    pub fn is_valid(&self) -> bool {
        [self.bandwidth, self.min_rate, self.ipn, self.sigma]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
            && self.population > 0
    }

    /// Bandwidth share of one device when a fraction `f` shares the SBS.
    fn share(&self, f: f64) -> f64 {
        self.bandwidth / (self.population as f64 * f)
    }

    /// Exponent `N f r_min / W` of the minimum-power expression.
    fn exponent(&self, f: f64) -> f64 {
        self.population as f64 * f * self.min_rate / self.bandwidth
    }
}

fn check_fraction(f: f64) -> Result<(), PhysicsError> {
    if f > 0.0 && f.is_finite() {
        Ok(())
    } else {
        Err(PhysicsError::Domain(f))
    }
}

/// `W / (N f) * ln(1 + P h / (I + N0))`.
pub fn achievable_rate(power: f64, gain: f64, f: f64, lp: &LinkParams) -> Result<f64, PhysicsError> {
    check_fraction(f)?;
    Ok(lp.share(f) * (power * gain / lp.ipn).ln_1p())
}

/// Minimum transmit power at unit gain, `(I + N0) (exp(N f r_min / W) - 1)`.
/// Dividing by the gain gives [`min_power`].
pub fn power_threshold(f: f64, lp: &LinkParams) -> Result<f64, PhysicsError> {
    check_fraction(f)?;
    let exponent = lp.exponent(f);
    let p = lp.ipn * exponent.exp_m1();
    if p.is_finite() {
        Ok(p)
    } else {
        Err(PhysicsError::Overflow(exponent))
    }
}

/// Smallest harvested power for which the achievable rate reaches `r_min`.
pub fn min_power(f: f64, gain: f64, lp: &LinkParams) -> Result<f64, PhysicsError> {
    let p = power_threshold(f, lp)? / gain;
    if p.is_finite() {
        Ok(p)
    } else {
        Err(PhysicsError::Overflow(lp.exponent(f)))
    }
}

/// Probability that half-normal harvested power reaches the minimum power:
/// `1 - erf(P_min / (sqrt(2) sigma))`, evaluated through `erfc`.
pub fn success_probability(f: f64, gain: f64, lp: &LinkParams) -> Result<f64, PhysicsError> {
    let p_min = min_power(f, gain, lp)?;
    Ok(success_from_min_power(p_min, lp.sigma))
}

pub(crate) fn success_from_min_power(p_min: f64, sigma: f64) -> f64 {
    erfc(p_min / (SQRT_2 * sigma))
}

/// One physically drawn transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalDraw {
    pub reward: bool,
    pub power: f64,
    pub rate: f64,
}

/// Draws the harvested power, evaluates the realized rate and rewards the
/// device iff the rate meets `r_min`.
pub fn draw_reward_physical(
    rng: &mut RngStream,
    f: f64,
    gain: f64,
    lp: &LinkParams,
) -> Result<PhysicalDraw, PhysicsError> {
    check_fraction(f)?;
    let power = sample_half_normal(rng, lp.sigma);
    let rate = achievable_rate(power, gain, f, lp)?;
    Ok(PhysicalDraw {
        reward: rate >= lp.min_rate,
        power,
        rate,
    })
}

/// Bernoulli reward with the closed-form success probability.
pub fn draw_reward_bernoulli(
    rng: &mut RngStream,
    f: f64,
    gain: f64,
    lp: &LinkParams,
) -> Result<bool, PhysicsError> {
    let p = success_probability(f, gain, lp)?;
    Ok(rng.bernoulli(p))
}
