use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use connected_ef1::coloring::EmptyBundleRule;
use connected_ef1::generate::random_additive;
use connected_ef1::instance::Instance;
use connected_ef1::pipeline::{self, PipelineError};
use connected_ef1::rounding::Division;
use connected_ef1::simplex::{HalfGrid, KnifeVector};
use connected_ef1::solver::{search, Engine, SearchOptions, SolveError, TraceEvent};
use connected_ef1::verify::{certify, oracle, Assignment, Mode, VerifyError};

#[derive(Parser)]
#[command(name = "connected-ef1", version, about = "Connected EF1 divisions of a path of goods")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded random additive instance.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short = 'n', long)]
        agents: usize,
        #[arg(short = 'm', long)]
        items: usize,
        #[arg(long, default_value_t = 10)]
        max_value: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search, round and certify a division.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[command(flatten)]
        mode: ModeArgs,
        #[arg(long, value_enum, default_value_t = EngineArg::Exhaustive)]
        engine: EngineArg,
        /// Worker threads; 1 runs the scan on the main thread.
        #[arg(long)]
        threads: Option<usize>,
        /// Round this simplex instead of searching: a JSON list of doubled
        /// knife vectors, given inline or as a file path.
        #[arg(long)]
        force_simplex: Option<String>,
        /// JSON lines on stderr for every simplex examined.
        #[arg(long)]
        trace_simplices: bool,
        /// JSON lines on stderr for every vertex coloring.
        #[arg(long)]
        trace_colors: bool,
        #[command(flatten)]
        rule: RuleArg,
    },
    /// Check a division; exit status 1 if it does not qualify.
    Verify {
        #[arg(long)]
        instance: PathBuf,
        /// A division (list of bundles) or the output of `solve`.
        #[arg(long)]
        division: PathBuf,
        #[command(flatten)]
        mode: ModeArgs,
    },
    /// Check every division of the instance.
    Oracle {
        #[arg(long)]
        instance: PathBuf,
        #[command(flatten)]
        mode: ModeArgs,
    },
    /// Sweep a grid of sizes and print CSV.
    Bench {
        #[arg(long, default_value_t = 4)]
        max_parts: usize,
        #[arg(long, default_value_t = 8)]
        max_items: usize,
        #[arg(long, value_delimiter = ',', default_value = "plain,secretive,extra")]
        modes: Vec<ModeArg>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        max_value: u64,
        #[arg(long)]
        threads: Option<usize>,
        #[command(flatten)]
        rule: RuleArg,
    },
}

#[derive(Args)]
struct ModeArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Plain)]
    mode: ModeArg,
    /// One-based; defaults to the last agent.
    #[arg(long)]
    secretive_agent: Option<usize>,
}

#[derive(Args)]
struct RuleArg {
    /// Valuation of interior bundles emptied by two adjacent hidden items.
    #[arg(long, value_enum, default_value_t = RuleChoice::HiddenPair)]
    empty_bundle: RuleChoice,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Plain,
    Secretive,
    Extra,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Exhaustive,
    Pathfollow,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleChoice {
    HiddenPair,
    Zero,
}

impl RuleArg {
    fn rule(&self) -> EmptyBundleRule {
        match self.empty_bundle {
            RuleChoice::HiddenPair => EmptyBundleRule::HiddenPair,
            RuleChoice::Zero => EmptyBundleRule::Zero,
        }
    }
}

/// Message plus exit status.
struct Failure(i32, String);

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Failure {
        let mut msg = e.to_string();
        if let PipelineError::Solve(SolveError::TheoremViolation { dump, .. }) = &e {
            msg.push_str("\ndiagnostic dump: ");
            msg.push_str(dump);
        }
        Failure(e.exit_code(), msg)
    }
}

fn bad_input(msg: impl ToString) -> Failure {
    Failure(2, msg.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code as u8)
        }
    }
}

fn read_instance(path: &PathBuf) -> Result<Instance, Failure> {
    let text = fs::read_to_string(path).map_err(|e| bad_input(format!("{}: {e}", path.display())))?;
    Instance::from_json(&text).map_err(|e| bad_input(format!("{}: {e}", path.display())))
}

fn resolve_mode(args: &ModeArgs, inst: &Instance) -> Result<Mode, Failure> {
    Ok(match args.mode {
        ModeArg::Plain => Mode::Plain,
        ModeArg::Extra => Mode::Extra,
        ModeArg::Secretive => {
            let k = args.secretive_agent.unwrap_or(inst.agents());
            if k == 0 || k > inst.agents() {
                return Err(bad_input(format!("secretive agent {k} is not in 1..={}", inst.agents())));
            }
            Mode::Secretive(k - 1)
        }
    })
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string(value).expect("output serializes"));
}

fn stderr_tracer() -> Arc<dyn Fn(&TraceEvent) + Send + Sync> {
    Arc::new(|event: &TraceEvent| eprintln!("{}", serde_json::to_string(event).expect("trace serializes")))
}

fn run(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Gen { seed, agents, items, max_value, out } => {
            let inst = random_additive(seed, agents, items, max_value).map_err(bad_input)?;
            let text = inst.to_json() + "\n";
            match out {
                Some(path) => fs::write(&path, text).map_err(|e| bad_input(format!("{}: {e}", path.display())))?,
                None => print!("{text}"),
            }
            Ok(0)
        }
        Command::Solve { instance, mode, engine, threads, force_simplex, trace_simplices, trace_colors, rule } => {
            let inst = read_instance(&instance)?;
            let mode = resolve_mode(&mode, &inst)?;
            let forced = force_simplex.map(|arg| parse_simplex(&arg)).transpose()?;
            let opts = SearchOptions {
                engine: match engine {
                    EngineArg::Exhaustive => Engine::Exhaustive,
                    EngineArg::Pathfollow => Engine::Pathfollow,
                },
                threads,
                rule: rule.rule(),
                trace_simplices: trace_simplices.then(stderr_tracer),
                trace_colors: trace_colors.then(stderr_tracer),
            };
            let report = pipeline::solve(&inst, mode, &opts, forced)?;
            print_json(&report);
            Ok(0)
        }
        Command::Verify { instance, division, mode } => {
            let inst = read_instance(&instance)?;
            let mode = resolve_mode(&mode, &inst)?;
            let text = fs::read_to_string(&division).map_err(|e| bad_input(format!("{}: {e}", division.display())))?;
            let mut value: serde_json::Value = serde_json::from_str(&text).map_err(bad_input)?;
            if let Some(inner) = value.get_mut("division") {
                value = inner.take();
            }
            let div = Division::from_json_value(value, inst.items(), mode.parts(inst.agents())).map_err(bad_input)?;
            let witness = certify(&inst, &div, mode).map_err(bad_input)?;
            #[derive(Serialize)]
            struct Report<'a> {
                mode: &'static str,
                valid: bool,
                division: &'a Division,
                witness: Option<Vec<Assignment>>,
            }
            let valid = witness.is_some();
            print_json(&Report { mode: mode.name(), valid, division: &div, witness });
            Ok(if valid { 0 } else { 1 })
        }
        Command::Oracle { instance, mode } => {
            let inst = read_instance(&instance)?;
            pipeline::validate(&inst)?;
            let mode = resolve_mode(&mode, &inst)?;
            let summary = oracle(&inst, mode).map_err(|e| match e {
                VerifyError::NoFeasibleDivision { .. } => {
                    Failure(3, format!("no division satisfies {mode}; instance: {}", inst.to_json()))
                }
                e => Failure::from(PipelineError::from(e)),
            })?;
            print_json(&summary);
            Ok(0)
        }
        Command::Bench { max_parts, max_items, modes, seed, max_value, threads, rule } => {
            println!("n,m,mode,simplices,accepted_index,millis");
            for parts in 2..=max_parts {
                for items in 1..=max_items {
                    for &m in &modes {
                        let (mode, agents) = match m {
                            ModeArg::Plain => (Mode::Plain, parts),
                            ModeArg::Secretive => (Mode::Secretive(parts - 1), parts),
                            ModeArg::Extra => (Mode::Extra, parts + 1),
                        };
                        let inst = random_additive(seed, agents, items, max_value).map_err(bad_input)?;
                        let simplices = HalfGrid::new(items, parts).map_err(bad_input)?.simplex_count();
                        let started = Instant::now();
                        let accepted = if items < parts {
                            String::new()
                        } else {
                            let opts = SearchOptions { threads, rule: rule.rule(), ..SearchOptions::default() };
                            let out = search(&inst, mode, &opts).map_err(|e| Failure::from(PipelineError::from(e)))?;
                            out.index.map(|i| i.to_string()).unwrap_or_default()
                        };
                        let millis = started.elapsed().as_millis();
                        println!("{parts},{items},{},{simplices},{accepted},{millis}", mode.name());
                    }
                }
            }
            Ok(0)
        }
    }
}

fn parse_simplex(arg: &str) -> Result<Vec<KnifeVector>, Failure> {
    let text = if arg.trim_start().starts_with('[') {
        arg.to_string()
    } else {
        fs::read_to_string(arg).map_err(|e| bad_input(format!("{arg}: {e}")))?
    };
    let rows: Vec<Vec<u32>> = serde_json::from_str(&text).map_err(|e| bad_input(format!("--force-simplex: {e}")))?;
    Ok(rows.into_iter().map(KnifeVector::from_doubled).collect())
}
