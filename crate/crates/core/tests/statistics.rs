//! Distributional checks against closed-form or independently computed
//! oracles. Tolerances are several standard errors wide.

mod common;

use std::f64::consts::{LN_2, PI};

use cellbandit::baselines::{
    device_streams, evaluate_assignment, random_assignment, Assignment,
};
use cellbandit::dynamics::run;
use cellbandit::model::{DeviceType, NetworkConfig};
use cellbandit::physics::{
    draw_reward_bernoulli, draw_reward_physical, min_power, success_probability, LinkParams,
};
use cellbandit::policy::{ucb_select, PolicyKind};
use cellbandit::model::AgentState;
use cellbandit::stochastics::{
    make_stream, sample_device_type, sample_exponential, sample_half_normal, RngStream,
};
use common::{correlation, ks_critical, ks_statistic, mean, phi, two_proportion_z, Z_999};

fn defaults_link() -> LinkParams {
    NetworkConfig::default().link_params(0, 0)
}

#[test]
fn distinct_streams_pass_ks() {
    let mut a = make_stream(42, 7);
    let mut b = make_stream(42, 8);
    let xs: Vec<f64> = (0..1000).map(|_| a.uniform()).collect();
    let ys: Vec<f64> = (0..1000).map(|_| b.uniform()).collect();
    assert_ne!(xs, ys);
    assert!(ks_statistic(&xs, &ys) < ks_critical(1000, 1000, 0.001));
}

#[test]
fn uniform_draws_fill_the_unit_interval() {
    let mut rng = make_stream(5, 0);
    let xs: Vec<f64> = (0..100_000).map(|_| rng.uniform()).collect();
    assert!(xs.iter().all(|x| (0.0..1.0).contains(x)));
    // KS against the exact uniform CDF.
    let mut sorted = xs.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max);
    assert!(d < 1.95 / n.sqrt(), "D = {d}");
}

#[test]
fn half_normal_moments() {
    let mut rng = make_stream(1, 1);
    let xs: Vec<f64> = (0..1_000_000).map(|_| sample_half_normal(&mut rng, 1.0)).collect();
    assert!(xs.iter().all(|&x| x >= 0.0));
    let m = mean(&xs);
    assert!((m - (2.0 / PI).sqrt()).abs() < 0.003, "mean {m}");
    assert!((m - 0.7979).abs() < 0.003);
    let tail = xs.iter().filter(|&&x| x >= 1.0).count() as f64 / xs.len() as f64;
    let oracle = 2.0 * (1.0 - phi(1.0));
    assert!((oracle - 0.3173).abs() < 1e-4);
    assert!((tail - oracle).abs() < 0.002, "tail {tail}");
}

#[test]
fn half_normal_is_a_scale_family() {
    // Same stream: exact scaling.
    let mut a = make_stream(9, 3);
    let mut b = make_stream(9, 3);
    for _ in 0..1000 {
        let x = sample_half_normal(&mut a, 2.5);
        let y = sample_half_normal(&mut b, 1.0);
        assert!((x - 2.5 * y).abs() <= 1e-12 * x.max(1.0));
    }
    // Different streams: equal in distribution.
    let mut a = make_stream(9, 4);
    let mut b = make_stream(9, 5);
    let xs: Vec<f64> = (0..20_000).map(|_| sample_half_normal(&mut a, 2.5)).collect();
    let ys: Vec<f64> = (0..20_000).map(|_| 2.5 * sample_half_normal(&mut b, 1.0)).collect();
    assert!(ks_statistic(&xs, &ys) < ks_critical(20_000, 20_000, 0.001));
}

#[test]
fn exponential_mean_and_median() {
    let mut rng = make_stream(2, 2);
    let xs: Vec<f64> = (0..1_000_000).map(|_| sample_exponential(&mut rng, 2.0)).collect();
    assert!(xs.iter().all(|&x| x > 0.0));
    assert!((mean(&xs) - 0.5).abs() < 0.002);
    let above = xs.iter().filter(|&&x| x >= LN_2 / 2.0).count() as f64 / xs.len() as f64;
    assert!((above - 0.5).abs() < 0.002);
}

#[test]
fn device_type_gain_mean() {
    let cfg = NetworkConfig {
        num_sbs: 1,
        channel_rate_range: (1.0, 1.0),
        ..NetworkConfig::default()
    };
    let mut rng = make_stream(3, 0);
    let gains: Vec<f64> = (0..100_000)
        .map(|_| sample_device_type(&mut rng, &cfg).gains[0])
        .collect();
    assert!((mean(&gains) - 1.0).abs() < 0.01);
}

#[test]
fn device_type_gains_are_uncorrelated_across_sbs() {
    let cfg = NetworkConfig {
        num_sbs: 2,
        ..NetworkConfig::default()
    };
    let mut rng = make_stream(4, 0);
    let (mut g0, mut g1) = (Vec::new(), Vec::new());
    for _ in 0..100_000 {
        let t = sample_device_type(&mut rng, &cfg);
        g0.push(t.gains[0]);
        g1.push(t.gains[1]);
    }
    assert!(correlation(&g0, &g1).abs() < 0.01);
}

#[test]
fn device_type_rates_are_uniform_and_drive_the_gains() {
    let cfg = NetworkConfig {
        num_sbs: 1,
        ..NetworkConfig::default()
    };
    let (lo, hi) = cfg.channel_rate_range;
    let mut rng = make_stream(6, 0);
    let (mut rates, mut gains) = (Vec::new(), Vec::new());
    for _ in 0..200_000 {
        let t = sample_device_type(&mut rng, &cfg);
        rates.push(t.rates[0]);
        gains.push(t.gains[0]);
    }
    assert!(rates.iter().all(|&b| (lo..=hi).contains(&b)));
    assert!((mean(&rates) - (lo + hi) / 2.0).abs() < 0.01);
    // E[h] = E[1/beta] = ln(hi/lo) / (hi - lo).
    let want = (hi / lo).ln() / (hi - lo);
    assert!((mean(&gains) - want).abs() < 0.01, "{} vs {want}", mean(&gains));
    // h given beta is Exp(beta), so beta * h is Exp(1) whatever beta is.
    let scaled: Vec<f64> = rates.iter().zip(&gains).map(|(b, h)| b * h).collect();
    assert!((mean(&scaled) - 1.0).abs() < 0.01);
    assert!(correlation(&rates, &scaled).abs() < 0.01);
}

#[test]
fn success_probability_matches_monte_carlo() {
    let lp = defaults_link();
    let p_min = min_power(0.5, 1.0, &lp).unwrap();
    assert!((p_min - 0.454_991).abs() < 1e-6);
    let mut rng = make_stream(11, 0);
    let n = 1_000_000;
    let hits = (0..n)
        .filter(|_| sample_half_normal(&mut rng, 1.0) >= p_min)
        .count() as f64
        / n as f64;
    assert!((hits - 0.6493).abs() < 0.002, "MC {hits}");
    let p = success_probability(0.5, 1.0, &lp).unwrap();
    assert!((p - hits).abs() < 0.002);
    assert!((p - 0.6493).abs() < 0.002);
}

#[test]
fn both_reward_modes_hit_the_closed_form() {
    let lp = defaults_link();
    let n = 1_000_000u64;
    let mut rng = make_stream(12, 0);
    let physical = (0..n)
        .filter(|_| {
            let d = draw_reward_physical(&mut rng, 0.5, 1.0, &lp).unwrap();
            assert_eq!(d.reward, d.rate >= lp.min_rate);
            d.reward
        })
        .count() as f64
        / n as f64;
    let mut rng = make_stream(12, 1);
    let bernoulli = (0..n)
        .filter(|_| draw_reward_bernoulli(&mut rng, 0.5, 1.0, &lp).unwrap())
        .count() as f64
        / n as f64;
    assert!((physical - 0.6493).abs() < 0.002, "physical {physical}");
    assert!((bernoulli - 0.6493).abs() < 0.002, "bernoulli {bernoulli}");
}

#[test]
fn reward_modes_are_equal_in_distribution() {
    let base = defaults_link();
    let points = [(0.1, 1.0), (0.5, 0.5), (0.9, 2.0), (0.3, 0.2), (1.0, 1.0)];
    for (i, &(f, g)) in points.iter().enumerate() {
        let n = 200_000u64;
        let mut a = make_stream(13, 2 * i as u64);
        let mut b = make_stream(13, 2 * i as u64 + 1);
        let k1 = (0..n)
            .filter(|_| draw_reward_physical(&mut a, f, g, &base).unwrap().reward)
            .count() as u64;
        let k2 = (0..n)
            .filter(|_| draw_reward_bernoulli(&mut b, f, g, &base).unwrap())
            .count() as u64;
        let z = two_proportion_z(k1, n, k2, n);
        assert!(z.abs() < Z_999, "f={f} g={g}: z={z}");
    }
}

/// `E[ln(1 + |Z|)]` by composite Simpson quadrature.
fn expected_log_rate() -> f64 {
    let density = |z: f64| 2.0 / (2.0 * PI).sqrt() * (-z * z / 2.0).exp();
    let (a, b, n) = (0.0, 12.0, 20_000);
    let h = (b - a) / n as f64;
    let g = |z: f64| (1.0 + z).ln() * density(z);
    let mut s = g(a) + g(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * g(a + k as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn single_device_throughput_is_the_expected_log_rate() {
    let oracle = expected_log_rate();
    assert!((oracle - 0.534_822_295_717_895).abs() < 1e-9, "oracle {oracle}");
    let cfg = NetworkConfig {
        num_sbs: 1,
        num_devices: 1,
        ..NetworkConfig::default()
    };
    let types = vec![DeviceType {
        gains: vec![1.0],
        rates: vec![1.0],
    }];
    let assign = Assignment { choice: vec![0] };
    let mut streams = device_streams(7, 0, 1);
    let got = evaluate_assignment(&assign, &types, &cfg, 100_000, &mut streams);
    assert!((got - oracle).abs() < 0.01, "{got} vs {oracle}");
}

#[test]
fn evaluation_is_equivariant_in_device_order() {
    let cfg = NetworkConfig {
        num_sbs: 3,
        num_devices: 40,
        ..NetworkConfig::default()
    };
    let mut rng = make_stream(8, 0);
    let types: Vec<DeviceType> = (0..40).map(|_| sample_device_type(&mut rng, &cfg)).collect();
    let assign = random_assignment(&mut make_stream(8, 1), 40, 3);
    let streams = device_streams(8, 2, 40);
    let before = evaluate_assignment(&assign, &types, &cfg, 50, &mut streams.clone());

    let order: Vec<usize> = (0..40).rev().collect();
    let types_p: Vec<DeviceType> = order.iter().map(|&i| types[i].clone()).collect();
    let assign_p = Assignment {
        choice: order.iter().map(|&i| assign.choice[i]).collect(),
    };
    let mut streams_p: Vec<RngStream> = order.iter().map(|&i| streams[i].clone()).collect();
    let after = evaluate_assignment(&assign_p, &types_p, &cfg, 50, &mut streams_p);
    assert!((before - after).abs() <= 1e-9 * before.abs());
}

#[test]
fn random_assignment_counts_are_binomial() {
    let (n, m) = (100_000, 4);
    let counts = random_assignment(&mut make_stream(14, 0), n, m).counts(m);
    let expected = n as f64 / m as f64;
    let sd = (n as f64 * 0.25 * 0.75).sqrt();
    for c in &counts {
        assert!((*c as f64 - expected).abs() < 3.0 * sd, "{counts:?}");
    }
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    // 0.999 quantile of chi-square with 3 degrees of freedom.
    assert!(chi2 < 16.266, "chi2 {chi2}");
}

fn ucb_histogram(state: &AgentState, stream: u64, trials: usize) -> Vec<f64> {
    let mut rng = make_stream(15, stream);
    let mut h = vec![0.0; state.num_sbs()];
    for _ in 0..trials {
        h[ucb_select(state, 2.0, &mut rng)] += 1.0;
    }
    h.iter().map(|c| c / trials as f64).collect()
}

fn permuted(state: &AgentState, perm: &[usize]) -> AgentState {
    // New arm j holds old arm perm[j].
    AgentState {
        wins: perm.iter().map(|&j| state.wins[j]).collect(),
        losses: perm.iter().map(|&j| state.losses[j]).collect(),
        age: state.age,
    }
}

#[test]
fn ucb_distribution_is_permutation_symmetric() {
    let histories = [
        // Two tied leaders.
        AgentState {
            wins: vec![1, 1, 0],
            losses: vec![0, 0, 2],
            age: 4,
        },
        // Forced exploration among three unplayed arms.
        AgentState {
            wins: vec![1, 0, 0, 0],
            losses: vec![0, 0, 0, 0],
            age: 1,
        },
        // Fully tied.
        AgentState {
            wins: vec![2, 2, 2],
            losses: vec![1, 1, 1],
            age: 9,
        },
    ];
    let trials = 30_000;
    for (k, st) in histories.iter().enumerate() {
        let m = st.num_sbs();
        let perm: Vec<usize> = (0..m).map(|j| (j + 1) % m).collect();
        let base = ucb_histogram(st, 2 * k as u64, trials);
        let moved = ucb_histogram(&permuted(st, &perm), 2 * k as u64 + 1, trials);
        for j in 0..m {
            let (p, q) = (base[perm[j]], moved[j]);
            let z = two_proportion_z(
                (p * trials as f64) as u64,
                trials as u64,
                (q * trials as f64) as u64,
                trials as u64,
            );
            assert!(z.abs() < Z_999, "history {k} arm {j}: {p} vs {q}");
        }
    }
}

#[test]
fn symmetric_two_arm_population_splits_evenly() {
    let cfg = NetworkConfig {
        num_sbs: 2,
        num_devices: 10_000,
        horizon: 600,
        channel_rate_range: (1.0, 1.0),
        ..NetworkConfig::default()
    };
    let traj = run(&cfg, PolicyKind::ucb());
    let f = traj.mean_profile_after(200);
    for x in &f.fractions {
        assert!((x - 0.5).abs() < 0.02, "{:?}", f.fractions);
    }
}

#[test]
fn single_arm_strategies_agree_in_expectation() {
    let cfg = NetworkConfig {
        num_sbs: 1,
        num_devices: 300,
        ..NetworkConfig::default()
    };
    let cmp = cellbandit::baselines::compare(&cfg, 400);
    let (a, b, c) = (cmp.mf_bandit.mean(), cmp.centralized.mean(), cmp.random.mean());
    // Per-round sums are iid; compare the means with a generous normal band.
    let sd = |xs: &[f64]| {
        let m = mean(xs);
        (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
    };
    let se = sd(&cmp.centralized.rate_sum) / (400f64).sqrt();
    assert!((a - b).abs() < 5.0 * se * 2f64.sqrt(), "{a} vs {b}");
    assert!((c - b).abs() < 5.0 * se * 2f64.sqrt(), "{c} vs {b}");
}

#[test]
fn centralized_beats_random() {
    let cfg = NetworkConfig {
        num_sbs: 4,
        num_devices: 400,
        ..NetworkConfig::default()
    };
    let cmp = cellbandit::baselines::compare(&cfg, 300);
    let diff: Vec<f64> = cmp
        .centralized
        .rate_sum
        .iter()
        .zip(&cmp.random.rate_sum)
        .map(|(c, r)| c - r)
        .collect();
    let m = mean(&diff);
    let sd = (diff.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (diff.len() - 1) as f64).sqrt();
    assert!(m > 3.0 * sd / (diff.len() as f64).sqrt(), "mean diff {m}");
}
