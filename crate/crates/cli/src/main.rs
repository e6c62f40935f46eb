use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use agg_splitter::benchmark::{generate_benchmark, run_comparison, BenchmarkParams, ComparisonConfig, Method};
use agg_splitter::engine::{ConfigDocument, RunOutcome, RunTrace};
use agg_splitter::game::{validate_game, ValidationReport};
use agg_splitter::operators::{kkt_residual, ExtendedPoint, KktResidual};
use agg_splitter::verify::{run_suites, VerifyOptions, SUITES};
use agg_splitter::{Error, GameSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NO_CONVERGENCE: u8 = 3;
const EXIT_USAGE: u8 = 64;
const THREADS_ENV: &str = "AGG_SPLITTER_THREADS";

#[derive(Parser)]
#[command(name = "agg-splitter", version, about = "Equilibrium seeking for aggregative games with coupling constraints")]
struct Cli {
    /// Worker threads; falls back to AGG_SPLITTER_THREADS, then to all cores.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a benchmark game and write it as JSON.
    Generate {
        #[command(flatten)]
        params: ParamArgs,
        /// Output file; stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run one solver on a game.
    Solve {
        #[command(flatten)]
        source: GameSource,
        #[arg(long, value_enum, default_value_t = MethodArg::Dr)]
        method: MethodArg,
        #[command(flatten)]
        run: RunArgs,
        /// Record wall-clock time per iteration (makes traces non-reproducible).
        #[arg(long)]
        timing: bool,
        #[arg(short, long, default_value = "agg-splitter-out")]
        out: PathBuf,
    },
    /// DR against forward-backward over several generated games.
    Compare {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
        seeds: u64,
        /// Target normalized distance to the reference equilibrium.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 20_000)]
        max_iters: usize,
        #[arg(long)]
        timing: bool,
        #[arg(short, long, default_value = "agg-splitter-out")]
        out: PathBuf,
    },
    /// Run the property suites on a game and print a pass/fail table.
    Verify {
        #[command(flatten)]
        source: GameSource,
        /// Only run these suites.
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(SUITES))]
        suite: Vec<String>,
        #[command(flatten)]
        run: RunArgs,
        /// Random points per property.
        #[arg(long, default_value_t = 50)]
        samples: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Paper,
    Desk,
    Toy,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Dr,
    Pfb,
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Number of agents.
    #[arg(long = "N", value_parser = clap::value_parser!(u64).range(1..))]
    agents: Option<u64>,
    /// Strategy dimension.
    #[arg(long = "n", value_parser = clap::value_parser!(u64).range(1..))]
    n: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ParamArgs {
    fn params(&self, default: Preset) -> BenchmarkParams {
        let mut p = match self.preset.unwrap_or(default) {
            Preset::Paper => BenchmarkParams::paper(),
            Preset::Desk => BenchmarkParams::desk(),
            Preset::Toy => BenchmarkParams::toy(),
        };
        if let Some(agents) = self.agents {
            p.agents = agents as usize;
        }
        if let Some(n) = self.n {
            p.n = n as usize;
        }
        if let Some(seed) = self.seed {
            p.seed = seed;
        }
        p
    }
}

#[derive(Args)]
struct GameSource {
    /// Game JSON file.
    #[arg(long, conflicts_with_all = ["preset", "agents", "n", "seed"])]
    game: Option<PathBuf>,
    #[command(flatten)]
    params: ParamArgs,
}

impl GameSource {
    fn load(&self) -> Result<GameSpec, Error> {
        let game = match &self.game {
            Some(path) => GameSpec::from_json(&fs::read_to_string(path)?)?,
            None => return generate_benchmark(&self.params.params(Preset::Toy)),
        };
        let report = validate_game(&game)?;
        for w in &report.warnings {
            log::warn!("{w}");
        }
        Ok(game)
    }
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    delta_c: Option<f64>,
    #[arg(long)]
    beta_c: Option<f64>,
    #[arg(long)]
    relaxation: Option<f64>,
    #[arg(long)]
    record_every: Option<usize>,
}

impl RunArgs {
    fn document(&self) -> Result<ConfigDocument, Error> {
        let mut doc = match &self.config {
            Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
            None => ConfigDocument::default(),
        };
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut doc.stop_tol, self.tol);
        set(&mut doc.gamma, self.gamma);
        set(&mut doc.alpha, self.alpha);
        set(&mut doc.delta_c, self.delta_c);
        set(&mut doc.beta_c, self.beta_c);
        set(&mut doc.relaxation, self.relaxation);
        if let Some(k) = self.max_iters {
            doc.max_iters = k;
        }
        if let Some(k) = self.record_every {
            doc.record_every = k;
        }
        Ok(doc)
    }
}

#[derive(Serialize)]
struct SolveReport<'a> {
    method: &'static str,
    converged: bool,
    iterations: usize,
    kkt: KktResidual,
    kkt_max: f64,
    config: &'a ConfigDocument,
    point: &'a ExtendedPoint,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let threads = cli.threads.map(|t| t as usize).or_else(|| {
        let v = std::env::var(THREADS_ENV).ok()?;
        match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Some(t),
            _ => {
                log::warn!("ignoring {THREADS_ENV}={v}");
                None
            }
        }
    });
    if let Some(t) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            log::warn!("could not size thread pool: {e}");
        }
    }

    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::MaxItersExceeded { .. } | Error::NoConvergence { .. } | Error::NotCertified(_) => EXIT_NO_CONVERGENCE,
        _ => EXIT_INPUT,
    }
}

fn run(command: Command) -> Result<u8, Error> {
    match command {
        Command::Generate { params, output } => generate(&params, output.as_deref()),
        Command::Solve {
            source,
            method,
            run,
            timing,
            out,
        } => solve(&source, method, &run, timing, &out),
        Command::Compare {
            params,
            seeds,
            tol,
            max_iters,
            timing,
            out,
        } => {
            let mut cfg = ComparisonConfig::new(params.params(Preset::Desk), seeds as usize);
            cfg.tol = tol;
            cfg.max_iters = max_iters;
            cfg.timing = timing;
            compare(&cfg, &out)
        }
        Command::Verify {
            source,
            suite,
            run,
            samples,
        } => {
            let game = source.load()?;
            let doc = run.document()?;
            let opts = VerifyOptions {
                samples,
                seed: doc.rng_seed,
                suites: suite,
                ..VerifyOptions::default()
            };
            let report = run_suites(&game, &doc, &opts)?;
            print!("{}", report.table());
            if report.passed() {
                println!("OK");
                Ok(0)
            } else {
                println!("FAILED");
                Ok(EXIT_VERIFY_FAILED)
            }
        }
    }
}

fn print_validation(report: &ValidationReport, to_stdout: bool) {
    let mut lines = vec![
        format!("agents checked: {}", report.agents.len()),
        format!("gradient oracles: {}", if report.gradients_ok() { "ok" } else { "mismatch" }),
        format!("max coupling violation at feasible point: {:e}", report.max_violation),
        format!("strictly feasible: {}", report.strictly_feasible),
    ];
    lines.extend(report.warnings.iter().map(|w| format!("warning: {w}")));
    lines.push("OK".into());
    for l in lines {
        if to_stdout {
            println!("{l}");
        } else {
            eprintln!("{l}");
        }
    }
}

fn generate(args: &ParamArgs, output: Option<&Path>) -> Result<u8, Error> {
    let params = args.params(Preset::Toy);
    let game = generate_benchmark(&params)?;
    let report = validate_game(&game)?;
    let json = game.to_json()?;
    match output {
        Some(path) => fs::write(path, json + "\n")?,
        None => println!("{json}"),
    }
    print_validation(&report, output.is_some());
    Ok(0)
}

fn write_outputs(out: &Path, method: Method, game: &GameSpec, doc: &ConfigDocument, trace: &RunTrace, point: &ExtendedPoint) -> Result<(), Error> {
    fs::create_dir_all(out)?;
    fs::write(out.join("trace.csv"), trace.to_csv())?;
    fs::write(out.join("trace.json"), trace.to_json()?)?;
    let kkt = kkt_residual(game, point)?;
    let report = SolveReport {
        method: method.name(),
        converged: trace.converged,
        iterations: trace.iterations(),
        kkt_max: kkt.max(),
        kkt,
        config: doc,
        point,
    };
    fs::write(out.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(())
}

fn solve(source: &GameSource, method: MethodArg, run: &RunArgs, timing: bool, out: &Path) -> Result<u8, Error> {
    let game = source.load()?;
    let doc = run.document()?;
    let mut config = doc.to_config(game.dims().agents)?;
    config.timing = timing;
    let method = match method {
        MethodArg::Dr => Method::Dr,
        MethodArg::Pfb => Method::Pfb,
    };
    match method.run(&game, &config, None) {
        Ok(RunOutcome { trace, point }) => {
            write_outputs(out, method, &game, &doc, &trace, &point)?;
            let kkt = kkt_residual(&game, &point)?;
            println!(
                "{} converged in {} iterations, KKT residual {:e}",
                method.name(),
                trace.iterations(),
                kkt.max()
            );
            Ok(0)
        }
        Err(Error::MaxItersExceeded { iters, trace, point }) => {
            write_outputs(out, method, &game, &doc, &trace, &point)?;
            eprintln!("{} stopped after {iters} iterations without converging", method.name());
            Ok(EXIT_NO_CONVERGENCE)
        }
        Err(e) => Err(e),
    }
}

fn compare(cfg: &ComparisonConfig, out: &Path) -> Result<u8, Error> {
    let report = run_comparison(cfg)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("summary.csv"), report.summary_csv())?;
    for &m in &cfg.methods {
        fs::write(out.join(format!("mean_curve_{}.csv", m.name())), report.mean_curve_csv(m))?;
    }
    fs::write(out.join("report.json"), report.to_json()?)?;

    let failed = report.seeds.iter().filter(|s| s.error.is_some()).count();
    println!("seeds: {} ({failed} failed)", report.seeds.len());
    for &m in &cfg.methods {
        match report.median_iters(m) {
            Some(k) => println!("{}: median iterations to {:e}: {k}", m.name(), cfg.tol),
            None => println!("{}: no runs", m.name()),
        }
    }
    let (wins, compared) = report.dr_wins();
    println!("dr faster on {wins} of {compared} seeds");
    if let Some(r) = report.speed_ratio {
        println!("mean iteration ratio pfb/dr: {r:.3}");
    }
    Ok(0)
}
