//! Arm-selection rules mapping an agent's history to an SBS.

use crate::model::{AgentState, DeviceType};
use crate::stochastics::RngStream;

/// Default UCB1 exploration weight, the `2` in `sqrt(2 ln t / n)`.
pub const DEFAULT_EXPLORATION: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyKind {
    /// UCB1 with index `mean + sqrt(c ln t / n)`.
    Ucb { exploration: f64 },
    UniformRandom,
    /// Knows the device type and picks the strongest channel.
    InformedGreedy,
}

impl PolicyKind {
    pub fn ucb() -> Self {
        PolicyKind::Ucb {
            exploration: DEFAULT_EXPLORATION,
        }
    }

    pub fn select(&self, state: &AgentState, ty: &DeviceType, rng: &mut RngStream) -> usize {
        match *self {
            PolicyKind::Ucb { exploration } => ucb_select(state, exploration, rng),
            PolicyKind::UniformRandom => uniform_select(state.num_sbs(), rng),
            PolicyKind::InformedGreedy => informed_greedy_select(ty),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Ucb { .. } => "ucb",
            PolicyKind::UniformRandom => "uniform_random",
            PolicyKind::InformedGreedy => "informed_greedy",
        }
    }
}

/// UCB1 over the agent's own lifetime.
///
/// Unplayed arms are forced first (uniformly among them). Otherwise the
/// clock `t` is the agent's age, i.e. its total number of pulls, and ties in
/// the index are broken uniformly at random.
pub fn ucb_select(state: &AgentState, exploration: f64, rng: &mut RngStream) -> usize {
    let m = state.num_sbs();
    debug_assert!(m >= 1);

    let mut unplayed = 0usize;
    let mut pick = 0usize;
    for arm in 0..m {
        if state.pulls(arm) == 0 {
            unplayed += 1;
            if unplayed == 1 || rng.index(unplayed) == 0 {
                pick = arm;
            }
        }
    }
    if unplayed > 0 {
        return pick;
    }

    let log_t = f64::from(state.age).ln();
    let mut best = f64::NEG_INFINITY;
    let mut ties = 0usize;
    for arm in 0..m {
        let n = f64::from(state.pulls(arm));
        let index = f64::from(state.wins[arm]) / n + (exploration * log_t / n).sqrt();
        if index > best {
            best = index;
            ties = 1;
            pick = arm;
        } else if index == best {
            ties += 1;
            if rng.index(ties) == 0 {
                pick = arm;
            }
        }
    }
    pick
}

pub fn uniform_select(num_sbs: usize, rng: &mut RngStream) -> usize {
    rng.index(num_sbs)
}

/// Arm with the largest gain; ties go to the lowest index.
pub fn informed_greedy_select(ty: &DeviceType) -> usize {
    let mut pick = 0;
    for (arm, &g) in ty.gains.iter().enumerate().skip(1) {
        if g > ty.gains[pick] {
            pick = arm;
        }
    }
    pick
}
