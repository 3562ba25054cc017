use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use collider_core::batch::Estimator;
use collider_core::harness::recipes::{run_recipe, Recipe, Scale};
use collider_core::harness::{
    parse_sweep_toml, run_experiment, sweep_to_path, write_summaries, Algorithm, ExperimentConfig,
    ExperimentOutput, RecordWriter, Summary,
};
use collider_core::ldp_channel::audit_privacy;
use collider_core::private_sequential::{run_doubling, DoublingConfig};
use collider_core::rng::rng_from_seed;
use collider_core::{Centering, DistSpec, PrivacyParams};

#[derive(Parser)]
#[command(
    name = "collider",
    version,
    about = "Estimate and test collision probability, privately or not"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Empirical privacy audit of the salted hash channel.
    Audit(AuditArgs),
    /// Private grouped estimator.
    Estimate(EstimateArgs),
    /// Non-private sequential test of C(p) = c0.
    Seqtest(SeqtestArgs),
    /// Private sequential test on hashed reports.
    Psq(PsqArgs),
    /// Doubling private tester.
    Doubling(DoublingArgs),
    /// Batch tester with formula-prescribed sample size.
    Batch(BatchArgs),
    /// Run a predefined figure sweep or a TOML sweep file.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct Privacy {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    beta: f64,
}

#[derive(Args)]
struct Runs {
    #[arg(long, default_value_t = 1)]
    trials: u64,
    /// Base seed; trial t uses split(seed, t).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write one CSV row per trial here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    privacy: Privacy,
    /// Number of independent hash keys.
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    x: usize,
    #[arg(long, default_value_t = 2)]
    x_prime: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EstimateArgs {
    /// e.g. `uniform:k=100`, `powerlaw:k=50`, `twopoint:k=10,tau=0.3,side=0`.
    #[arg(long)]
    dist: DistSpec,
    #[command(flatten)]
    privacy: Privacy,
    /// Target relative error.
    #[arg(long, alias = "eps", default_value_t = 1.0)]
    eps_rel: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Number of users. Defaults to the sufficient size for `--c-lower`.
    #[arg(long)]
    n: Option<u64>,
    /// Lower bound on C(p) used to size the run when `--n` is absent.
    #[arg(long)]
    c_lower: Option<f64>,
    /// Clamp estimates into [0, 1].
    #[arg(long)]
    clamp: bool,
    #[command(flatten)]
    runs: Runs,
}

#[derive(Clone, Copy, ValueEnum)]
enum CenteringArg {
    Unbiased,
    Literal,
}

#[derive(Args)]
struct TestArgs {
    #[arg(long)]
    dist: DistSpec,
    #[arg(long)]
    c0: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
}

#[derive(Args)]
struct SeqtestArgs {
    #[command(flatten)]
    test: TestArgs,
    #[arg(long, default_value_t = 1_000_000)]
    budget: u64,
    #[arg(long, value_enum, default_value_t = CenteringArg::Unbiased)]
    centering: CenteringArg,
    #[command(flatten)]
    runs: Runs,
}

#[derive(Args)]
struct PsqArgs {
    #[command(flatten)]
    test: TestArgs,
    #[command(flatten)]
    privacy: Privacy,
    #[arg(long, default_value_t = 1_000_000)]
    budget: u64,
    #[command(flatten)]
    runs: Runs,
}

#[derive(Args)]
struct DoublingArgs {
    #[command(flatten)]
    test: TestArgs,
    #[command(flatten)]
    privacy: Privacy,
    #[arg(long, default_value_t = 8192)]
    n0: u64,
    #[arg(long, default_value_t = 10)]
    max_rounds: u32,
    /// Lower bound on C(p); defaults to max(c0, 1e-3).
    #[arg(long)]
    c_lower: Option<f64>,
    /// Print the per-round table of the first trial.
    #[arg(long)]
    history: bool,
    #[command(flatten)]
    runs: Runs,
}

#[derive(Args)]
struct BatchArgs {
    #[command(flatten)]
    test: TestArgs,
    /// Tolerance: reject when |estimate − c0| > epsilon/2.
    #[arg(long, alias = "eps")]
    epsilon: f64,
    #[arg(long, default_value = "ustat")]
    estimator: Estimator,
    /// Upper bound on F_{3/2}(p) (plug-in sizing).
    #[arg(long)]
    f32_bound: Option<f64>,
    /// Upper bound on F_3(p) − F_2(p)² (U-statistic sizing).
    #[arg(long)]
    variance_bound: Option<f64>,
    #[command(flatten)]
    runs: Runs,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, value_parser = ["fig1", "fig2", "fig3", "fig4", "fig5"], conflicts_with = "config")]
    recipe: Option<String>,
    /// TOML file with `[[experiment]]` tables.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "desk", value_parser = ["desk", "smoke"])]
    scale: String,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Also write a gnuplot script stub next to the CSVs.
    #[arg(long)]
    plot_stub: bool,
}

fn test_config(algorithm: Algorithm, t: &TestArgs, runs: &Runs) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(algorithm, t.dist.to_string());
    cfg.c0 = Some(t.c0);
    cfg.delta = Some(t.delta);
    cfg.trials = runs.trials;
    cfg.base_seed = runs.seed;
    cfg
}

fn set_privacy(cfg: &mut ExperimentConfig, p: &Privacy) {
    cfg.alpha = Some(p.alpha);
    cfg.beta = Some(p.beta);
}

/// Runs the config, writes `--out` if given, and prints per-trial lines plus
/// an aggregate.
fn run_and_report(cfg: &ExperimentConfig, runs: &Runs) -> Result<ExperimentOutput> {
    let out = run_experiment(cfg)?;
    if let Some(path) = &runs.out {
        let mut w = RecordWriter::create(path)?;
        w.write_all(&out.records)?;
        w.flush()?;
    }
    let prepared = cfg.prepare()?;
    println!("true C(p): {}", prepared.truth);
    for r in out.records.iter().take(20) {
        let mut line = format!("trial {}: n={}", r.trial, r.n_samples);
        if let Some(e) = r.estimate {
            line.push_str(&format!(" estimate={e}"));
        }
        if let Some(v) = &r.verdict {
            line.push_str(&format!(" verdict={v}"));
        }
        println!("{line}");
    }
    if out.records.len() > 20 {
        println!("… {} more trials", out.records.len() - 20);
    }
    let s = &out.summary;
    if let Some(rate) = s.reject_rate {
        println!("reject rate: {rate:.3} over {} trials", s.trials);
    }
    println!("median samples: {}", s.n_samples.q50);
    if let Some(e) = s.abs_error {
        println!("mean |error|: {:.6} (se {:.6})", e.mean, e.stderr);
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Audit(a) => {
            let params = PrivacyParams::new(a.privacy.alpha, a.privacy.beta)?;
            let mut rng = rng_from_seed(a.seed);
            let frac = audit_privacy(params, a.trials, a.x, a.x_prime, &mut rng)?;
            println!("salts: {}", params.required_salts()?);
            println!("violation fraction: {frac:.6}");
            let status = if frac <= params.beta() {
                "PASS"
            } else {
                "FAIL"
            };
            println!("{status} (beta = {})", params.beta());
        }
        Command::Estimate(a) => {
            let mut cfg = ExperimentConfig::new(Algorithm::Mechanism, a.dist.to_string());
            set_privacy(&mut cfg, &a.privacy);
            cfg.eps = Some(a.eps_rel);
            cfg.delta = Some(a.delta);
            cfg.n = a.n;
            cfg.c_lower = a.c_lower;
            if a.n.is_none() && a.c_lower.is_none() {
                bail!("pass --n or --c-lower");
            }
            cfg.clamp = a.clamp;
            cfg.trials = a.runs.trials;
            cfg.base_seed = a.runs.seed;
            run_and_report(&cfg, &a.runs)?;
        }
        Command::Seqtest(a) => {
            let mut cfg = test_config(Algorithm::Seqtest, &a.test, &a.runs);
            cfg.budget = Some(a.budget);
            cfg.centering = Some(match a.centering {
                CenteringArg::Unbiased => Centering::Unbiased,
                CenteringArg::Literal => Centering::Literal,
            });
            run_and_report(&cfg, &a.runs)?;
        }
        Command::Psq(a) => {
            let mut cfg = test_config(Algorithm::Psq, &a.test, &a.runs);
            set_privacy(&mut cfg, &a.privacy);
            cfg.budget = Some(a.budget);
            run_and_report(&cfg, &a.runs)?;
        }
        Command::Doubling(a) => {
            let mut cfg = test_config(Algorithm::Doubling, &a.test, &a.runs);
            set_privacy(&mut cfg, &a.privacy);
            cfg.n0 = Some(a.n0);
            cfg.max_rounds = Some(a.max_rounds);
            cfg.c_lower = Some(a.c_lower.unwrap_or(a.test.c0.max(1e-3)));
            run_and_report(&cfg, &a.runs)?;
            if a.history {
                // Same stream as trial 0 of the run above.
                let prepared = cfg.prepare()?;
                let mut rng = rng_from_seed(prepared.trial_seed(0));
                let params = PrivacyParams::new(a.privacy.alpha, a.privacy.beta)?;
                let config = DoublingConfig {
                    n0: a.n0,
                    max_rounds: a.max_rounds,
                    c_lower: cfg.c_lower.unwrap(),
                };
                let out = run_doubling(
                    &prepared.dist,
                    a.test.c0,
                    a.test.delta,
                    params,
                    config,
                    &mut rng,
                )?;
                println!("round,n_t,delta_t,c_hat,eps_t,half_width,users");
                for r in &out.history {
                    println!(
                        "{},{},{:.6e},{:.6},{:.6},{:.6},{}",
                        r.round, r.n_t, r.delta_t, r.c_hat, r.eps_t, r.half_width, r.users_consumed
                    );
                }
            }
        }
        Command::Batch(a) => {
            let mut cfg = test_config(Algorithm::Batch, &a.test, &a.runs);
            cfg.eps = Some(a.epsilon);
            cfg.estimator = Some(a.estimator);
            cfg.f32_bound = a.f32_bound;
            cfg.variance_bound = a.variance_bound;
            run_and_report(&cfg, &a.runs)?;
        }
        Command::Experiment(a) => experiment(a)?,
    }
    Ok(())
}

const PLOT_STUB: &str = r#"# Starting point for plotting; adjust columns to taste.
set datafile separator ','
set key autotitle columnhead
set logscale xy
# summary.csv columns: 9 = median samples, 11 = mean |error|
plot 'summary.csv' using 0:9 with linespoints title 'median samples'
"#;

fn experiment(a: ExperimentArgs) -> Result<()> {
    let scale: Scale = a.scale.parse()?;
    match (&a.recipe, &a.config) {
        (Some(recipe), None) => {
            let recipe: Recipe = recipe.parse()?;
            let report = run_recipe(recipe, scale, &a.out)?;
            println!("wrote {}", report.records_path.display());
            println!("wrote {}", report.summary_path.display());
            for r in &report.ratios {
                let rate = r.reject_rate.map(|x| format!("{x:.2}")).unwrap_or_default();
                println!(
                    "{} / seqtest on {} (c0={}): median ratio {:.2}, reject rate {rate}",
                    r.algorithm, r.distribution, r.c0, r.ratio
                );
            }
            for r in &report.rmse {
                println!(
                    "{} on {} at n={}: rmse {:.6}",
                    r.algorithm, r.distribution, r.n, r.rmse
                );
            }
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let configs = parse_sweep_toml(&text)?;
            std::fs::create_dir_all(&a.out)
                .with_context(|| format!("creating {}", a.out.display()))?;
            let records = a.out.join("records.csv");
            let summary = a.out.join("summary.csv");
            let sweep = sweep_to_path(&configs, &records)?;
            let summaries: Vec<Summary> = sweep.summaries().cloned().collect();
            write_summaries(&summary, &summaries)?;
            println!("wrote {} ({} configs)", records.display(), configs.len());
            println!("wrote {}", summary.display());
        }
        _ => bail!("pass exactly one of --recipe or --config"),
    }
    if a.plot_stub {
        write_plot_stub(&a.out)?;
    }
    Ok(())
}

fn write_plot_stub(dir: &Path) -> Result<()> {
    let path = dir.join("plot.gp");
    std::fs::write(&path, PLOT_STUB).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
