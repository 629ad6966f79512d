use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use hjprox::config::{Config, ConfigError, Origin};
use hjprox::exec::with_thread_cap;
use hjprox::experiments::{
    run_envelope_cases, run_envelope_sweep, run_lasso_experiment, run_noisy_lmm_experiment,
    ExperimentConfig, Family, SweepCase,
};
use hjprox::oracle::{make_noisy, BuiltinParams};
use hjprox::{builtin, hj_prox, NoiseSpec, ProxParams, Vector};

/// Proximal operators and Moreau envelopes from function values only.
#[derive(Parser, Debug)]
#[command(name = "hjprox", version = hjprox::version_string(), arg_required_else_help = true)]
struct Cli {
    /// More log output (-v info, -vv debug, -vvv trace).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate prox_{tf}(x) and print it with diagnostics.
    Prox(Flags),
    /// Envelope and prox of one function over a 1-D grid.
    Envelope(Flags),
    /// LASSO by ISTA with exact, sampled and no prox.
    Lasso(Flags),
    /// Noisy weighted-l1 problem by the linearized method of multipliers.
    Lmm(Flags),
    /// Envelope sweep over the builtin test functions.
    Sweep(Flags),
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// Builtin function (l1, quadratic_linear, log_barrier, neg_l1,
    /// neg_quadratic, quad_minus_log).
    #[arg(long = "fn", value_name = "NAME")]
    function: Option<String>,
    /// Query point, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    delta2: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    /// Relative oracle noise level.
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    iters: Option<String>,
    /// desk or paper
    #[arg(long)]
    scale: Option<String>,
    /// Grid lo:hi:count.
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    /// Configuration file of key=value lines.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Extra key=value override; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Flags {
    /// File values first, then flags and `--set` pairs on top.
    fn config(&self) -> Result<Config, ConfigError> {
        let mut c = Config::new();
        if let Some(path) = &self.config {
            c.merge_file(path)?;
        }
        let pairs = [
            ("prox.fn", &self.function),
            ("prox.x", &self.x),
            ("prox.t", &self.t),
            ("prox.delta", &self.delta),
            ("prox.delta2", &self.delta2),
            ("prox.alpha", &self.alpha),
            ("prox.eps", &self.eps),
            ("prox.samples", &self.samples),
            ("noise.sigma", &self.sigma),
            ("run.seed", &self.seed),
            ("run.trials", &self.trials),
            ("run.iters", &self.iters),
            ("run.scale", &self.scale),
            ("sweep.grid", &self.grid),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                c.set(k, v, Origin::Override)?;
            }
        }
        if let Some(out) = &self.out {
            c.set("run.out", &out.to_string_lossy(), Origin::Override)?;
        }
        for s in &self.set {
            c.set_pair(s)?;
        }
        Ok(c)
    }
}

type Failure = Box<dyn std::error::Error>;
type Runner = fn(&Config) -> Result<(), Failure>;

fn experiment_config(c: &Config, family: Family) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::new(family, c.scale()?);
    if c.raw("problem.n").is_some() && family == Family::NoisyLmm {
        // sample-count sweep defaults follow n
        let n: usize = c.get("problem.n", "an integer")?.unwrap_or(cfg.n);
        cfg.samples = 10 * n;
        cfg.sweep_samples = vec![(n / 10).max(1), n, 10 * n];
    }
    c.apply(&mut cfg)?;
    Ok(cfg)
}

fn function_name(c: &Config, default: &str) -> String {
    c.raw("prox.fn").unwrap_or(default).to_string()
}

fn builtin_params(c: &Config, dim: usize) -> Result<BuiltinParams, Failure> {
    Ok(BuiltinParams {
        dim,
        a: c.get("prox.a", "a real number")?,
        ..Default::default()
    })
}

fn run_prox(c: &Config) -> Result<(), Failure> {
    let name = function_name(c, "l1");
    let x: Vec<f64> = c
        .get_list("prox.x", "comma-separated reals")?
        .ok_or("prox needs a query point (--x)")?;
    if x.is_empty() {
        return Err("the query point is empty".into());
    }
    let x = Vector::from_vec(x);
    let defaults = ProxParams::default();
    let p = ProxParams {
        t: c.get("prox.t", "a real number")?.unwrap_or(defaults.t),
        delta: c.get("prox.delta", "a real number")?.unwrap_or(defaults.delta),
        num_samples: c.get("prox.samples", "an integer")?.unwrap_or(defaults.num_samples),
        alpha: c.get("prox.alpha", "a real number")?.unwrap_or(defaults.alpha),
        eps_underflow: c.get("prox.eps", "a real number")?.unwrap_or(defaults.eps_underflow),
        seed: c.get("run.seed", "an integer")?.unwrap_or(defaults.seed),
        ..defaults
    };
    let oracle = builtin(&name, &builtin_params(c, x.len())?)?;
    let sigma: f64 = c.get("noise.sigma", "a real number")?.unwrap_or(0.0);
    let oracle = if sigma > 0.0 {
        make_noisy(
            Arc::new(oracle),
            NoiseSpec {
                sigma,
                seed: hjprox::exec::mix_seed(p.seed, 1),
            },
        )?
    } else {
        oracle
    };
    let r = hj_prox(&x, &oracle, &p)?;
    let est: Vec<String> = r.estimate.iter().map(|v| format!("{v}")).collect();
    println!("{}", est.join(","));
    println!("effective_alpha={}", r.effective_alpha);
    println!("applied_shift={}", r.applied_shift);
    println!("recursions={}", r.recursion_count);
    println!("ess={}", r.ess);
    println!("weights_max={}", r.weights_max);
    println!(
        "oracle_calls={}",
        p.num_samples as u64 * (u64::from(r.recursion_count) + 1)
    );
    Ok(())
}

fn print_manifest(path: &Path) {
    println!("{}", path.display());
}

fn run_envelope(c: &Config) -> Result<(), Failure> {
    let mut cfg = experiment_config(c, Family::EnvelopeSweep)?;
    if c.raw("prox.samples").is_none() {
        cfg.samples = ProxParams::default().num_samples * 10;
    }
    let case = SweepCase {
        function: function_name(c, "l1"),
        t: c.get("prox.t", "a real number")?.unwrap_or(0.1),
        a: c.get("prox.a", "a real number")?,
    };
    let out = run_envelope_cases(&cfg, &[case])?;
    if !out.errors.is_empty() {
        eprintln!("{} grid points had errors; see the manifest", out.errors.len());
    }
    print_manifest(&out.manifest_path);
    Ok(())
}

fn run_sweep(c: &Config) -> Result<(), Failure> {
    let mut cfg = experiment_config(c, Family::EnvelopeSweep)?;
    if let Some(f) = c.raw("prox.fn") {
        cfg.functions = vec![f.to_string()];
    }
    let out = run_envelope_sweep(&cfg)?;
    if !out.errors.is_empty() {
        eprintln!("{} grid points had errors; see the manifest", out.errors.len());
    }
    print_manifest(&out.manifest_path);
    Ok(())
}

fn run_lasso(c: &Config) -> Result<(), Failure> {
    let cfg = experiment_config(c, Family::Lasso)?;
    let out = run_lasso_experiment(&cfg)?;
    print_manifest(&out.manifest_path);
    Ok(())
}

fn run_lmm(c: &Config) -> Result<(), Failure> {
    let cfg = experiment_config(c, Family::NoisyLmm)?;
    let out = run_noisy_lmm_experiment(&cfg)?;
    print_manifest(&out.manifest_path);
    Ok(())
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();
}

fn thread_cap() -> Result<Option<usize>, String> {
    match std::env::var("HJPROX_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!("HJPROX_THREADS must be a positive integer, got {v:?}")),
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            if code == 0 {
                let _ = e.print();
            } else {
                eprint!("{}", e.render());
            }
            return ExitCode::from(code);
        }
    };
    init_logging(cli.verbose);
    let (flags, run): (&Flags, Runner) = match &cli.command {
        Command::Prox(f) => (f, run_prox),
        Command::Envelope(f) => (f, run_envelope),
        Command::Lasso(f) => (f, run_lasso),
        Command::Lmm(f) => (f, run_lmm),
        Command::Sweep(f) => (f, run_sweep),
    };
    let config = match flags.config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let threads = match thread_cap() {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match with_thread_cap(threads, || run(&config).map_err(|e| e.to_string())) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
