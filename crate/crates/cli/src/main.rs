//! `bad` — command-line front end: DDL inspection, end-to-end channel runs
//! over NDJSON data, a standalone HTTP broker, and the benchmark suite.

use std::collections::BTreeSet;
use std::io::Read;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use bad_bench::{run_experiment, write_csv, write_csv_file, WorkloadSpec, EXPERIMENTS};
use bad_core::broker::CountingSink;
use bad_core::dsl::print_channel_ddl;
use bad_core::system::BadSystem;
use bad_core::{classify_predicates, parse_channel_ddl, parse_subscribe, Endpoint, PlanMode};

#[derive(Parser)]
#[command(name = "bad", version, about = "Embedded continuous-channel engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse channel DDL and print its normalized form.
    Parse(ParseArgs),
    /// Define a channel, ingest NDJSON data, run executions, deliver.
    Run(RunArgs),
    /// Broker utilities.
    #[command(subcommand)]
    Broker(BrokerCommand),
    /// Benchmark experiments.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Args)]
struct ParseArgs {
    /// DDL file; `-` reads standard input.
    file: PathBuf,
    /// Emit the parsed definition and predicate classes as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Channel DDL file.
    #[arg(long)]
    ddl: PathBuf,
    /// NDJSON data file, either `dataset=path` or a bare path when the
    /// channel reads a single dataset. Repeatable.
    #[arg(long)]
    data: Vec<String>,
    /// File of SUBSCRIBE statements, one per line.
    #[arg(long)]
    subs: PathBuf,
    /// Register an HTTP broker as `name=url`. Brokers named only in
    /// subscriptions get an in-process counter. Repeatable.
    #[arg(long)]
    broker: Vec<String>,
    #[arg(long, default_value = "fully-optimized")]
    mode: PlanMode,
    #[arg(long, default_value_t = 4)]
    partitions: usize,
    #[arg(long, default_value_t = 1)]
    executions: usize,
}

#[derive(Subcommand)]
enum BrokerCommand {
    /// Serve an HTTP broker that prints each notification it receives.
    Serve(ServeArgs),
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:7480")]
    addr: String,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// List available experiments.
    List,
    /// Run one experiment and write its CSV rows.
    Run(BenchRunArgs),
}

#[derive(Args)]
struct BenchRunArgs {
    /// Experiment name; see `bad bench list`.
    experiment: String,
    /// Workload TOML; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Parse(args) => cmd_parse(args),
        Command::Run(args) => cmd_run(args),
        Command::Broker(BrokerCommand::Serve(args)) => cmd_serve(args),
        Command::Bench(BenchCommand::List) => {
            for name in EXPERIMENTS {
                println!("{name}");
            }
            Ok(())
        }
        Command::Bench(BenchCommand::Run(args)) => cmd_bench_run(args),
    }
}

fn read_input(path: &PathBuf) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut text = String::new();
        std::io::stdin().read_to_string(&mut text).context("reading standard input")?;
        Ok(text)
    } else {
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    }
}

fn cmd_parse(args: ParseArgs) -> Result<()> {
    let text = read_input(&args.file)?;
    let def = parse_channel_ddl(&text)?;
    let classified = classify_predicates(&def)?;
    if args.json {
        let doc = serde_json::json!({ "definition": def, "predicates": classified });
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        println!("{}", print_channel_ddl(&def));
        for (alias, preds) in &classified.per_alias {
            println!(
                "-- {alias}: {} fixed, {} parameterized, {} join, freshness: {}",
                preds.fixed.len(),
                preds.parameterized.len(),
                preds.join.len(),
                preds.freshness,
            );
        }
    }
    Ok(())
}

fn split_kv(spec: &str, what: &str) -> Result<(String, String)> {
    match spec.split_once('=') {
        Some((k, v)) if !k.is_empty() && !v.is_empty() => Ok((k.to_string(), v.to_string())),
        _ => bail!("{what} must be written as name=value, got {spec:?}"),
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let ddl = read_input(&args.ddl)?;
    let def = parse_channel_ddl(&ddl)?;

    let mut sys = BadSystem::with_policy(*BadSystem::new().policy(), args.partitions);
    for ds in &def.datasets {
        sys.create_dataset(&ds.name)?;
    }

    // Map NDJSON files to datasets.
    for spec in &args.data {
        let (dataset, path) = if spec.contains('=') {
            split_kv(spec, "--data")?
        } else if def.datasets.len() == 1 {
            (def.datasets[0].name.clone(), spec.clone())
        } else {
            bail!("--data needs dataset=path form when the channel reads several datasets");
        };
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {path}"))?;
        let inserted = sys.ingest_ndjson(&dataset, &text)?;
        eprintln!("ingested {inserted} records into {dataset}");
    }

    // Brokers: explicit HTTP endpoints first, then counters for the rest.
    let subs_text = read_input(&args.subs)?;
    let statements: Vec<&str> =
        subs_text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let mut named = BTreeSet::new();
    for spec in &args.broker {
        let (name, url) = split_kv(spec, "--broker")?;
        sys.register_broker(&name, Endpoint::Http { url })?;
        named.insert(name);
    }
    let sink = CountingSink::default();
    for stmt in &statements {
        let parsed = parse_subscribe(stmt)?;
        if named.insert(parsed.broker_name.clone()) {
            sys.register_broker(&parsed.broker_name, Endpoint::InProcess(Box::new(sink.clone())))?;
        }
    }

    sys.define_channel(&ddl, args.mode)?;
    for stmt in &statements {
        sys.subscribe(stmt)?;
    }

    let report = sys.run_channel(&def.name, args.executions)?;
    for (i, (stats, delivery)) in report.stats.iter().zip(&report.deliveries).enumerate() {
        println!(
            "execution {i}: wall {:.3} ms, scanned {}, results {}, messages {}, bytes {}",
            stats.wall_time_ms,
            stats.records_scanned,
            stats.results_count,
            delivery.messages,
            delivery.payload_bytes,
        );
    }
    for warn in &report.overruns {
        eprintln!(
            "warning: execution {} took {:.1} ms, over the {:.1} ms period",
            warn.execution_index, warn.elapsed_ms, warn.period_ms
        );
    }
    let counted = sink.state();
    if counted.messages > 0 {
        println!(
            "in-process brokers: {} messages, {} subscriber notifications, {} bytes",
            counted.messages, counted.subscribers_notified, counted.bytes
        );
    }
    Ok(())
}

fn cmd_serve(args: ServeArgs) -> Result<()> {
    let broker = bad_core::broker::HttpBroker::start(&args.addr)?;
    eprintln!("broker listening on {}", broker.url());
    let mut seen = 0;
    loop {
        std::thread::sleep(std::time::Duration::from_millis(100));
        let received = broker.received();
        for msg in &received[seen..] {
            println!("{}", String::from_utf8_lossy(&msg.to_bytes()));
        }
        seen = received.len();
    }
}

fn cmd_bench_run(args: BenchRunArgs) -> Result<()> {
    if !EXPERIMENTS.contains(&args.experiment.as_str()) {
        bail!("unknown experiment {:?}; expected one of {EXPERIMENTS:?}", args.experiment);
    }
    let mut spec = match &args.config {
        Some(path) => WorkloadSpec::load(path)?,
        None => WorkloadSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let rows = run_experiment(&args.experiment, &spec)?;
    match &args.out {
        Some(path) => {
            write_csv_file(path, &rows)?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => write_csv(std::io::stdout().lock(), &rows)?,
    }
    Ok(())
}
