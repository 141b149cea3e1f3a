//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage/config/IO error, 2 a requested check failed.

use std::ffi::OsString;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::baselines::compare;
use crate::dynamics::{detect_stationarity, run};
use crate::equilibrium::{
    check_consistency, sample_bound_types, solve_mfe, uniqueness_alpha_bound, MonteCarlo,
    SolveOptions, DEFAULT_BOUND_SAMPLES,
};
use crate::model::{load_config, validate_config, NetworkConfig};
use crate::policy::PolicyKind;
use crate::report::{
    format_vector, push_config, write_comparison_csv, write_successful_comparison_csv,
    write_trajectory_csv, KvReport,
};

/// Window and tolerance used to report the stationarity round.
pub const STATIONARITY_WINDOW: usize = 200;
pub const STATIONARITY_TOL: f64 = 0.02;

const EXIT_OK: i32 = 0;
const EXIT_USAGE: i32 = 1;
const EXIT_CHECK_FAILED: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum ScenarioPreset {
    Fig2Small,
    Fig2Large,
    Fig3M3,
    Fig3M7,
    Fig4Compare,
}

impl ScenarioPreset {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioPreset::Fig2Small => "fig2_small",
            ScenarioPreset::Fig2Large => "fig2_large",
            ScenarioPreset::Fig3M3 => "fig3_m3",
            ScenarioPreset::Fig3M7 => "fig3_m7",
            ScenarioPreset::Fig4Compare => "fig4_compare",
        }
    }

    /// Reference defaults with the preset's population, SBS count and horizon.
    pub fn config(self) -> NetworkConfig {
        let (num_devices, num_sbs, horizon) = match self {
            ScenarioPreset::Fig2Small => (1_000, 5, 2000),
            ScenarioPreset::Fig2Large => (50_000, 5, 2000),
            ScenarioPreset::Fig3M3 => (50_000, 3, 2000),
            ScenarioPreset::Fig3M7 => (50_000, 7, 2000),
            ScenarioPreset::Fig4Compare => (1_000, 3, 1000),
        };
        NetworkConfig {
            num_devices,
            num_sbs,
            horizon,
            ..NetworkConfig::default()
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cellbandit", version, about = "Mean-field bandit cell association simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the population dynamics and write the trajectory.
    Run(RunArgs),
    /// Compare the learning population against centralized and random assignment.
    Compare(CompareArgs),
    /// Evaluate the uniqueness bound on the continue probability.
    Bound(BoundArgs),
    /// Solve for the mean-field equilibrium and check it against a simulation.
    Solve(SolveArgs),
}

#[derive(Debug, Args)]
struct Scenario {
    /// Named scenario.
    #[arg(long, value_enum, conflicts_with = "config")]
    preset: Option<ScenarioPreset>,
    /// Configuration document (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: Scenario,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    scenario: Scenario,
    #[arg(long, default_value_t = 1000)]
    rounds: usize,
    /// Exit with status 2 unless random < mf_bandit in mean throughput.
    #[arg(long)]
    check_ordering: bool,
}

#[derive(Debug, Args)]
struct BoundArgs {
    #[command(flatten)]
    scenario: Scenario,
    /// Number of sampled types.
    #[arg(long, default_value_t = DEFAULT_BOUND_SAMPLES)]
    samples: usize,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    scenario: Scenario,
    #[arg(long, default_value_t = 0.02)]
    tol: f64,
    #[arg(long, default_value_t = 0.5)]
    damping: f64,
    /// Simulated lifetimes per evaluation of the equilibrium map.
    #[arg(long, default_value_t = MonteCarlo::DEFAULT_LIFETIMES)]
    samples: usize,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

type CmdResult = Result<(), Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let workers = match &cli.command {
        Command::Run(a) => a.scenario.workers,
        Command::Compare(a) => a.scenario.workers,
        Command::Bound(a) => a.scenario.workers,
        Command::Solve(a) => a.scenario.workers,
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start workers: {e}");
            return EXIT_USAGE;
        }
    };
    let result = pool.install(|| match cli.command {
        Command::Run(a) => cmd_run(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Bound(a) => cmd_bound(&a),
        Command::Solve(a) => cmd_solve(&a),
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn resolve(scenario: &Scenario, default: Option<ScenarioPreset>) -> Result<NetworkConfig, Failure> {
    let mut cfg = if let Some(path) = &scenario.config {
        let text = fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Failure::usage(format!("config not found: {}", path.display()))
            } else {
                Failure::usage(format!("cannot read {}: {e}", path.display()))
            }
        })?;
        load_config(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?
    } else if let Some(p) = scenario.preset.or(default) {
        p.config()
    } else {
        NetworkConfig::default()
    };
    if let Some(seed) = scenario.seed {
        cfg.seed = seed;
    }
    validate_config(cfg).map_err(|e| Failure::usage(e.to_string()))
}

fn scenario_label(scenario: &Scenario, default: Option<ScenarioPreset>) -> String {
    match (&scenario.config, scenario.preset.or(default)) {
        (Some(path), _) => path.display().to_string(),
        (None, Some(p)) => p.name().to_string(),
        (None, None) => "defaults".to_string(),
    }
}

fn output_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .map_err(|e| Failure::usage(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, contents: &str) -> CmdResult {
    fs::write(path, contents).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}

fn write_with<F>(path: &Path, body: F) -> CmdResult
where
    F: FnOnce(BufWriter<fs::File>) -> std::io::Result<()>,
{
    let file = fs::File::create(path)
        .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
    body(BufWriter::new(file)).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}

fn cmd_run(args: &RunArgs) -> CmdResult {
    let cfg = resolve(&args.scenario, None)?;
    output_dir(&args.scenario.out)?;
    let traj = run(&cfg, PolicyKind::ucb());
    write_with(&args.scenario.out.join("trajectory.csv"), |w| {
        write_trajectory_csv(&traj, w)
    })?;

    let mut r = KvReport::new("run_summary");
    r.push("scenario", scenario_label(&args.scenario, None));
    r.push("policy", "ucb");
    push_config(&mut r, &cfg);
    r.push("rounds", traj.len());
    r.push("stationarity_window", STATIONARITY_WINDOW);
    r.push("stationarity_tol", STATIONARITY_TOL);
    let stationary = if traj.len() >= STATIONARITY_WINDOW {
        detect_stationarity(&traj, STATIONARITY_WINDOW, STATIONARITY_TOL)
    } else {
        None
    };
    r.push(
        "stationarity_round",
        stationary.map_or_else(|| "none".to_string(), |t| t.to_string()),
    );
    if let Some(last) = traj.final_profile() {
        r.push("final_f", format_vector(&last.fractions));
    }
    r.push(
        "mean_f_second_half",
        format_vector(&traj.mean_profile_after(traj.len() / 2).fractions),
    );
    write_file(&args.scenario.out.join("run_summary.txt"), &r.render())
}

fn cmd_compare(args: &CompareArgs) -> CmdResult {
    if args.rounds == 0 {
        return Err(Failure::usage("--rounds must be >= 1"));
    }
    let default = Some(ScenarioPreset::Fig4Compare);
    let cfg = resolve(&args.scenario, default)?;
    output_dir(&args.scenario.out)?;
    let cmp = compare(&cfg, args.rounds);
    let out = &args.scenario.out;
    write_with(&out.join("comparison.csv"), |w| write_comparison_csv(&cmp, w))?;
    write_with(&out.join("comparison_successful.csv"), |w| {
        write_successful_comparison_csv(&cmp, w)
    })?;

    let (mf, central, random) = (
        cmp.mf_bandit.mean(),
        cmp.centralized.mean(),
        cmp.random.mean(),
    );
    let mut r = KvReport::new("comparison_summary");
    r.push("scenario", scenario_label(&args.scenario, default));
    push_config(&mut r, &cfg);
    r.push("rounds", args.rounds);
    r.push("mean_mf_bandit", mf);
    r.push("mean_centralized", central);
    r.push("mean_random", random);
    r.push("mean_successful_mf_bandit", cmp.mf_bandit.successful_mean());
    r.push("mean_successful_centralized", cmp.centralized.successful_mean());
    r.push("mean_successful_random", cmp.random.successful_mean());
    let ordered = random < mf;
    r.push("random_below_mf_bandit", ordered);
    write_file(&out.join("comparison_summary.txt"), &r.render())?;

    if args.check_ordering && !ordered {
        return Err(Failure {
            code: EXIT_CHECK_FAILED,
            message: format!("ordering check failed: random {random} >= mf_bandit {mf}"),
        });
    }
    Ok(())
}

fn cmd_bound(args: &BoundArgs) -> CmdResult {
    if args.samples == 0 {
        return Err(Failure::usage("--samples must be >= 1"));
    }
    let cfg = resolve(&args.scenario, None)?;
    output_dir(&args.scenario.out)?;
    let types = sample_bound_types(&cfg, args.samples);
    let report = uniqueness_alpha_bound(&types, &cfg).map_err(|e| Failure::usage(e.to_string()))?;
    let (n, m) = report.binding_pair;

    let mut r = KvReport::new("uniqueness_bound");
    r.push("scenario", scenario_label(&args.scenario, None));
    push_config(&mut r, &cfg);
    r.push("samples", report.samples);
    r.push("continue_prob", report.continue_prob);
    r.push("network_alpha_max", report.network_alpha_max);
    r.push("satisfied", report.satisfied);
    r.push("binding_sample", n);
    r.push("binding_sbs", m + 1);
    r.push("binding_gain", types[n].gains[m]);
    r.push("binding_a", report.a[n][m]);
    r.push("binding_b", report.b[n][m]);
    r.push(
        "network_alpha_max_gain_squared",
        report.network_alpha_max_gain_squared,
    );
    r.push(
        "network_alpha_max_sum_bound",
        report.network_alpha_max_sum_bound,
    );
    r.push(
        "note",
        "b uses h' in the denominator; network_alpha_max_gain_squared uses h'^2; \
         network_alpha_max_sum_bound uses 1/(1 + a + exp(b))",
    );
    let text = r.render();
    print!("{text}");
    write_file(&args.scenario.out.join("bound_report.txt"), &text)
}

fn cmd_solve(args: &SolveArgs) -> CmdResult {
    let cfg = resolve(&args.scenario, None)?;
    let mut opts = SolveOptions::new(&cfg, args.tol);
    opts.damping = args.damping;
    opts.mc = MonteCarlo::for_config(&cfg, args.samples);
    let policy = PolicyKind::ucb();
    let sol = solve_mfe(&cfg, policy, &opts).map_err(|e| Failure::usage(e.to_string()))?;
    output_dir(&args.scenario.out)?;

    let traj = run(&cfg, policy);
    let burn_in = traj.len() / 2;
    let gap = check_consistency(&traj, &sol.profile, burn_in);

    let mut r = KvReport::new("equilibrium");
    r.push("scenario", scenario_label(&args.scenario, None));
    push_config(&mut r, &cfg);
    r.push("tol", args.tol);
    r.push("damping", args.damping);
    r.push("lifetimes", opts.mc.lifetimes);
    r.push("horizon_cap", opts.mc.horizon_cap);
    r.push("f_star", format_vector(&sol.profile.fractions));
    r.push("residual", sol.residual);
    r.push("iterations", sol.iterations);
    r.push("converged", sol.converged);
    r.push("consistency_burn_in", burn_in);
    r.push("consistency_gap", gap);
    let text = r.render();
    print!("{text}");
    write_file(&args.scenario.out.join("solve_report.txt"), &text)
}
