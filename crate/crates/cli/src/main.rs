//! `igl`: run interaction-grounded learning experiments from the command line.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use igl_core::decoder::{derive_constants, save_tuples};
use igl_core::harness::{
    emit_metrics, run_decoder_only, run_seeds, verify_dirichlet, verify_lipschitz, verify_logloss, verify_posterior,
    GammaMode, RunReport, SuiteOutcome,
};
use igl_core::online::compute_theory_params;
use igl_core::{build_synthetic_env, ExperimentConfig, FiniteHypothesisClass, IglError, SeedStream};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_IO: u8 = 4;

/// Online length used when no config file is given.
const DEFAULT_ONLINE_EPISODES: usize = 40_000;

#[derive(Parser)]
#[command(
    name = "igl",
    version,
    about = "Interaction-grounded learning for contextual episodic MDPs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline for every configured seed.
    Run(ConfigArgs),
    /// Run homing, reachability, collection and ERM only and report the fitted posteriors.
    Decode(ConfigArgs),
    /// Check the library against its brute-force oracles.
    Verify(VerifyArgs),
    /// Print the closed-form (gamma, N0, epsilon) for an environment and episode count.
    TheoryParams(TheoryArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment TOML. Without it the synthetic preset is used.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Master seed; repeat for several runs.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Online episodes.
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_enum)]
    gamma_mode: Option<GammaArg>,
    /// Barrier weight for `--gamma-mode constant`.
    #[arg(long)]
    gamma: Option<f64>,
    /// Output directory; one `seed-<n>` subdirectory per seed.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GammaArg {
    Schedule,
    Constant,
    Theory,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    All,
    Dirichlet,
    Lipschitz,
    Posterior,
    Logloss,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    suite: Suite,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Shrink every suite for a fast smoke check.
    #[arg(long)]
    quick: bool,
}

#[derive(Args)]
struct TheoryArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Total episodes T.
    #[arg(long = "total")]
    total: Option<f64>,
    /// Squared-loss regret bound of the oracle; defaults to 2 ln |F|.
    #[arg(long)]
    reg: Option<f64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(&args),
        Command::Decode(args) => decode(&args),
        Command::Verify(args) => verify(&args),
        Command::TheoryParams(args) => theory(&args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &IglError) -> u8 {
    match e.root() {
        IglError::InvalidConfig(_)
        | IglError::InvalidArgument(_)
        | IglError::InvalidModel(_)
        | IglError::Identifiability(_) => EXIT_CONFIG,
        IglError::Numerical { .. } => EXIT_NUMERICAL,
        IglError::Io { .. } => EXIT_IO,
        _ => EXIT_FAILURE,
    }
}

fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig, IglError> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::synthetic(DEFAULT_ONLINE_EPISODES),
    };
    if !args.seeds.is_empty() {
        config.seeds = args.seeds.clone();
    }
    if let Some(n) = args.episodes {
        config.online.episodes = Some(n);
        config.total_episodes = None;
    }
    if let Some(eps) = args.epsilon {
        config.decoder.epsilon = eps;
    }
    if let Some(mode) = args.gamma_mode {
        config.online.gamma = match mode {
            GammaArg::Schedule => GammaMode::Schedule,
            GammaArg::Constant => GammaMode::Constant,
            GammaArg::Theory => GammaMode::Theory,
        };
    }
    if let Some(g) = args.gamma {
        config.online.gamma_value = Some(g);
    }
    if let Some(out) = &args.out {
        config.output = Some(out.clone());
    }
    Ok(config)
}

fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}

fn run(args: &ConfigArgs) -> Result<u8, IglError> {
    let config = load_config(args)?;
    let env = config.build_env()?;
    let resolved = config.resolve(&env)?;
    let runs: Vec<_> = resolved.seeds.iter().copied().zip(run_seeds(&config)?).collect();
    let mut reports: Vec<&RunReport> = Vec::new();
    let mut first_error = None;
    for (seed, outcome) in &runs {
        let report = match outcome {
            Ok(r) => r,
            Err(f) => {
                eprintln!("seed {seed}: {}", f.error);
                first_error.get_or_insert(&f.error);
                &f.partial
            }
        };
        if let Some(out) = &config.output {
            emit_metrics(report, &seed_dir(out, *seed))?;
        }
        if outcome.is_ok() {
            reports.push(report);
        }
    }
    let mut stdout = std::io::stdout().lock();
    let table = summary_table(&reports);
    stdout.write_all(table.as_bytes()).map_err(|e| IglError::Io {
        path: "<stdout>".into(),
        source: e,
    })?;
    if let Some(out) = &config.output {
        let path = out.join("summary.csv");
        std::fs::write(&path, &table).map_err(|e| IglError::Io { path, source: e })?;
    }
    match first_error {
        Some(e) => Ok(exit_code(e)),
        None => Ok(0),
    }
}

fn summary_table(reports: &[&RunReport]) -> String {
    let mut s = String::from(
        "seed,online_episodes,total_episodes,final_mean_true_reward,final_mean_decoded_reward,cumulative_regret,optimal_value\n",
    );
    for r in reports {
        let m = &r.summary;
        s.push_str(&format!(
            "{},{},{},{:.4},{:.4},{:.3},{:.6}\n",
            m.seed,
            m.online_episodes,
            m.total_episodes,
            m.final_mean_true_reward,
            m.final_mean_decoded_reward,
            m.cumulative_regret,
            m.optimal_value
        ));
    }
    s
}

fn decode(args: &ConfigArgs) -> Result<u8, IglError> {
    let config = load_config(args)?;
    let env = config.build_env()?;
    let resolved = config.resolve(&env)?;
    for &seed in &resolved.seeds {
        let (report, stage) = run_decoder_only(&env, &resolved, seed).map_err(|f| f.error)?;
        println!(
            "seed {seed}: reachable {:?}",
            report.reachable.iter().map(|&s| env.mdp().label(s)).collect::<Vec<_>>()
        );
        for v in &report.visitation {
            println!(
                "  visit {:<8} p_hat {:.4} beta {:.4}",
                env.mdp().label(v.state),
                v.p_hat,
                v.beta
            );
        }
        for h in &report.hypotheses {
            println!(
                "  {:<8} hypothesis {} (f {}, phi {}) empirical risk {:.4} held-out risk {:.3e} gap {:.3e}",
                h.label, h.index, h.reward_index, h.decoder_index, h.empirical_risk, h.posterior_risk, h.posterior_gap
            );
        }
        if let Some(out) = &config.output {
            let dir = seed_dir(out, seed);
            std::fs::create_dir_all(&dir).map_err(|e| IglError::Io {
                path: dir.clone(),
                source: e,
            })?;
            save_tuples(&dir.join("tuples.csv"), &stage.datasets)?;
            let path = dir.join("decoder.json");
            let json = serde_json::to_string_pretty(&report).expect("report serializes");
            std::fs::write(&path, json + "\n").map_err(|e| IglError::Io { path, source: e })?;
        }
    }
    Ok(0)
}

fn verify(args: &VerifyArgs) -> Result<u8, IglError> {
    let seeds = SeedStream::new(args.seed);
    let scale = |full: usize, quick: usize| if args.quick { quick } else { full };
    let wants = |s: Suite| args.suite == Suite::All || args.suite == s;
    let mut outcomes: Vec<SuiteOutcome> = Vec::new();
    if wants(Suite::Dirichlet) {
        outcomes.push(verify_dirichlet(scale(10_000, 500), &seeds.child("dirichlet")));
    }
    if wants(Suite::Lipschitz) {
        for (k, m, c, theta) in [(5, 1.3, 0.0, 0.9), (3, 1.0, 0.0, 0.6)] {
            let constants = derive_constants(k, m, c, theta)?;
            outcomes.push(verify_lipschitz(
                &constants,
                scale(100_000, 2000),
                &seeds.child("lipschitz"),
            ));
        }
    }
    if wants(Suite::Posterior) {
        let env = build_synthetic_env(0.1, 0.1)?;
        outcomes.push(verify_posterior(
            &env,
            scale(1_000_000, 200_000),
            &seeds.child("posterior"),
        )?);
    }
    if wants(Suite::Logloss) {
        outcomes.push(verify_logloss(
            scale(20, 3),
            scale(10_000, 1000),
            &seeds.child("logloss"),
        )?);
    }
    for o in &outcomes {
        println!("{o}");
    }
    Ok(if outcomes.iter().all(|o| o.passed) {
        0
    } else {
        EXIT_FAILURE
    })
}

fn theory(args: &TheoryArgs) -> Result<u8, IglError> {
    let config = load_config(&args.config)?;
    let env = config.build_env()?;
    let mdp = env.mdp();
    let constants = igl_core::IdentifiabilityConstants::try_from((env.num_actions(), env.params()))?;
    let class = FiniteHypothesisClass::default_for(&env)?;
    let total = match args.total {
        Some(t) => t,
        None => config
            .total_episodes
            .map(|t| t as f64)
            .or(config.online.episodes.map(|n| n as f64))
            .ok_or_else(|| IglError::InvalidConfig("pass --total or set an episode budget".into()))?,
    };
    let reg = args.reg.unwrap_or(2.0 * (class.rewards().len() as f64).ln());
    if !(total > 0.0 && reg > 0.0) {
        return Err(IglError::InvalidConfig(
            "T and the regret bound must be positive".into(),
        ));
    }
    let p = compute_theory_params(
        total,
        mdp.num_states() as f64,
        env.num_actions() as f64,
        mdp.horizon() as f64,
        constants.lipschitz,
        reg,
    );
    println!(
        "T = {total}, S = {}, K = {}, H = {}, L = {}, Reg = {reg}",
        mdp.num_states(),
        env.num_actions(),
        mdp.horizon(),
        constants.lipschitz
    );
    println!("gamma = {}", p.gamma);
    println!("n0 = {}", p.n0);
    println!("epsilon = {}", p.epsilon);
    if p.epsilon >= 0.25 {
        println!("note: epsilon is outside (0, 1/4); only gamma is usable at this T");
    }
    Ok(0)
}
