use std::fs;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use evochain::ledger::total_supply;
use evochain::market::fill_normalizer;
use evochain::morphogen::{mutation_fan, phenotype_svg};
use evochain::simkernel::{export_tree_dot, export_tree_newick};
use evochain::{Genome, ScenarioConfig, Simulation};
use serde_json::json;

use crate::api::{router, Service};

/// Exit status for bad configs and genomes.
pub const EXIT_INPUT: u8 = 2;
/// Exit status for I/O and runtime failures.
pub const EXIT_FAILURE: u8 = 1;

#[derive(Debug, Parser)]
#[command(name = "evochain", version, about = "Self-replicating biomorph agents on a simulated ledger")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Headless run; writes snapshot, lineage exports, stats and phenotypes.
    Run(RunArgs),
    /// Render one genome, or its whole one-step mutation fan.
    Render(RenderArgs),
    /// Serve a live world over HTTP/JSON.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config tick count.
    #[arg(long)]
    pub ticks: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Genome JSON text, or a path to a file holding it.
    #[arg(long)]
    pub genome: String,
    /// Output SVG file; a directory with `--fan`.
    #[arg(short = 'o', long = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub fan: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Runtime(String),
}

impl Failure {
    fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::Runtime(format!("{}: {e}", path.display()))
    }
}

pub fn execute(cli: Cli) -> u8 {
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::Render(args) => render(args),
        Command::Serve(args) => serve(args),
    };
    match outcome {
        Ok(()) => 0,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            EXIT_INPUT
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            EXIT_FAILURE
        }
    }
}

fn load_config(path: &Path) -> Result<ScenarioConfig, Failure> {
    ScenarioConfig::from_path(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn start(config: ScenarioConfig) -> Result<Simulation, Failure> {
    let warnings = config.validate().map_err(|e| Failure::Input(e.to_string()))?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Simulation::new(config).map_err(|e| Failure::Input(e.to_string()))
}

fn write(path: PathBuf, contents: &str) -> Result<(), Failure> {
    fs::write(&path, contents).map_err(|e| Failure::io(&path, e))
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let mut config = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(ticks) = args.ticks {
        config.ticks = ticks;
    }
    let ticks = config.ticks;
    let mut sim = start(config)?;
    sim.run_until(ticks);

    let out = args.out;
    let phenotypes = out.join("phenotypes");
    fs::create_dir_all(&phenotypes).map_err(|e| Failure::io(&phenotypes, e))?;
    let tree = sim.tree();
    let newick = export_tree_newick(&tree).map_err(|e| Failure::Runtime(e.to_string()))?;
    write(out.join("snapshot.json"), &sim.snapshot())?;
    write(out.join("tree.dot"), &export_tree_dot(&tree))?;
    write(out.join("tree.nwk"), &format!("{newick}\n"))?;
    write(out.join("stats.csv"), &sim.stats().to_csv())?;
    for (address, svg) in sim.agent_svgs() {
        write(phenotypes.join(format!("{address}.svg")), svg.as_str())?;
    }
    let world = sim.world();
    let meta = json!({
        "seed": sim.config().seed,
        "ticks": world.tick,
        "population": world.agents.len(),
        "nfts_sold": world.tokens.len(),
        "max_generation": tree.max_generation(),
        "total_supply": total_supply(world),
        "fill_normalizer": fill_normalizer(),
        "state_hash": world.state_hash(),
        "snapshot_hash": sim.snapshot_hash(),
    });
    write(
        out.join("run.json"),
        &format!("{}\n", serde_json::to_string_pretty(&meta).expect("metadata serializes")),
    )?;
    eprintln!(
        "ran {} ticks: {} agents, {} NFTs sold, outputs in {}",
        world.tick,
        world.agents.len(),
        world.tokens.len(),
        out.display()
    );
    Ok(())
}

fn read_genome(arg: &str) -> Result<Genome, Failure> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_owned()
    } else {
        fs::read_to_string(arg).map_err(|e| Failure::Input(format!("{arg}: {e}")))?
    };
    Genome::from_json(&text).map_err(|e| Failure::Input(e.to_string()))
}

fn render(args: RenderArgs) -> Result<(), Failure> {
    let genome = read_genome(&args.genome)?;
    if !args.fan {
        if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
        }
        return write(args.out, phenotype_svg(&genome).as_str());
    }
    fs::create_dir_all(&args.out).map_err(|e| Failure::io(&args.out, e))?;
    write(args.out.join("parent.svg"), phenotype_svg(&genome).as_str())?;
    let fan = mutation_fan(&genome);
    for (i, (gene, up, child)) in fan.iter().enumerate() {
        let name = format!("mutant_{i:02}_{}_{}.svg", gene.name(), if *up { "up" } else { "down" });
        write(args.out.join(name), phenotype_svg(child).as_str())?;
    }
    eprintln!("wrote parent and {} mutants to {}", fan.len(), args.out.display());
    Ok(())
}

fn serve(args: ServeArgs) -> Result<(), Failure> {
    let config = load_config(&args.config)?;
    let interval = config.interactive.tick_interval_ms;
    let sim = start(config)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Runtime(e.to_string()))?;
    runtime.block_on(async move {
        let service = Service::start(sim);
        if let Some(ms) = interval.filter(|ms| *ms > 0) {
            service.spawn_timer(Duration::from_millis(ms));
        }
        let addr = SocketAddr::new(args.host, args.port);
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Failure::Runtime(format!("cannot bind {addr}: {e}")))?;
        eprintln!("listening on http://{addr}/api");
        axum::serve(listener, router(service))
            .await
            .map_err(|e| Failure::Runtime(e.to_string()))
    })
}
