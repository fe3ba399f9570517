use std::fs::File;
use std::io::{self, BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sslc::alloc::PeakAlloc;
use sslc::bench::{bench, write_csv};
use sslc::costmodel::{cost_model, table, Approach, CostParams, Scenario};
use sslc::matrix::run_matrix;
use sslc::wire::{read_chain, write_chain};
use sslc::{
    run_protocol, setup_backend, BackendChoice, ClientConfig, FullNode, Http, NodeBehavior, Oracle, OracleBehavior,
    Service, SharedBackend, Transport,
};
use sslc_core::params::HashParams;
use sslc_core::proof::CircuitShape;
use sslc_core::{generate_chain, AccountId, Chain, QuerySpec, Verdict};

#[global_allocator]
static GLOBAL: PeakAlloc = PeakAlloc;

#[derive(Parser)]
#[command(name = "sslc", version, about = "Stateless superlight client: fixtures, services, client and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthetic chain fixtures.
    Chain {
        #[command(subcommand)]
        command: ChainCommand,
    },
    /// Run a full node or the oracle over HTTP.
    Serve {
        #[command(subcommand)]
        role: ServeRole,
    },
    /// Query an oracle and check its answer against full nodes.
    Run(RunArgs),
    /// Download cost of one query under the three client designs.
    Costmodel(CostArgs),
    /// Prover and verifier measurements, as CSV.
    Bench(BenchArgs),
    /// Every oracle behaviour against every node configuration, as JSON.
    Matrix(MatrixArgs),
    /// Print the hash parameter file for this build.
    Params {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ChainCommand {
    Gen(GenArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    blocks: usize,
    #[arg(long, default_value_t = 64)]
    txs_per_block: usize,
    #[arg(long, default_value_t = 4)]
    relevant_per_block: usize,
    /// Hex account the relevant transactions touch.
    #[arg(long, default_value = DEFAULT_ACCOUNT, value_parser = parse_account)]
    account: AccountId,
    #[arg(long)]
    out: Option<PathBuf>,
}

const DEFAULT_ACCOUNT: &str = "1111111111111111111111111111111111111111111111111111111111111111";

fn parse_account(s: &str) -> Result<AccountId, String> {
    s.parse().map_err(|e| format!("{e:?}"))
}

#[derive(Args, Clone)]
struct BackendArgs {
    /// native or plonky2
    #[arg(long, default_value = "native")]
    backend: BackendChoice,
    #[arg(long, default_value_t = 100)]
    batch_capacity: usize,
    #[arg(long, default_value_t = 12)]
    tree_depth: usize,
}

impl BackendArgs {
    fn setup(&self) -> Result<SharedBackend> {
        let shape = CircuitShape::new(self.batch_capacity, self.tree_depth);
        eprintln!("setting up {} backend ({shape})", self.backend);
        Ok(setup_backend(self.backend, shape)?)
    }
}

#[derive(Subcommand)]
enum ServeRole {
    Fullnode {
        #[arg(long)]
        chain: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8081")]
        addr: SocketAddr,
        /// HONEST, WRONG_COUNT:d, WRONG_ROOT:i, UNAVAILABLE or STALE_VIEW:h
        #[arg(long, default_value = "HONEST")]
        behavior: NodeBehavior,
    },
    Oracle {
        #[arg(long)]
        chain: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// HONEST, OMIT_TX:n, DUPLICATE_TX, TAMPER_RESULT:d, TAMPER_ROOT:i, TAMPER_K:d or FOREIGN_TX
        #[arg(long, default_value = "HONEST")]
        behavior: OracleBehavior,
        #[command(flatten)]
        backend: BackendArgs,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON query spec.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    oracle: String,
    /// Comma-separated full node URLs.
    #[arg(long, value_delimiter = ',', required = true)]
    nodes: Vec<String>,
    /// Fractional digits in the rendered result.
    #[arg(long, default_value_t = 6)]
    precision: usize,
    #[arg(long, default_value_t = 600)]
    timeout_s: u64,
    #[command(flatten)]
    backend: BackendArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CostArgs {
    /// bitcoin or eth; with no scenario and approach the whole table is printed.
    #[arg(long)]
    scenario: Option<Scenario>,
    /// onlc, slc or sslc
    #[arg(long)]
    approach: Option<Approach>,
    /// TOML file overriding the shipped constants.
    #[arg(long)]
    params: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "10,100,1000,10000")]
    workloads: Vec<u64>,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    backend: BackendArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MatrixArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    blocks: usize,
    #[arg(long, default_value_t = 16)]
    txs_per_block: usize,
    #[arg(long, default_value_t = 2)]
    relevant_per_block: usize,
    #[arg(long, value_delimiter = ',', default_value = "2,3,5")]
    nodes: Vec<usize>,
    #[command(flatten)]
    backend: BackendArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: serde::Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn load_chain(path: &Path) -> Result<Arc<Chain>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(Arc::new(read_chain(BufReader::new(f))?))
}

fn run(args: RunArgs) -> Result<Verdict> {
    let spec: QuerySpec = serde_json::from_reader(File::open(&args.spec)?).context("parsing query spec")?;
    let timeout = Duration::from_secs(args.timeout_s);
    let http = |u: &String| Arc::new(Http::new(u, timeout)) as Arc<dyn Transport>;
    let config = ClientConfig {
        oracle: http(&args.oracle),
        nodes: args.nodes.iter().map(http).collect(),
        backend: args.backend.setup()?,
        spec,
    };
    let outcome = run_protocol(&config)?;
    let report = serde_json::json!({
        "verdict": outcome.verdict,
        "reason": outcome.reason,
        "value": outcome.result.to_decimal(args.precision),
        "result": outcome.result,
        "view": outcome.view,
        "bandwidth": {
            "bytes_down": outcome.bandwidth.bytes_down(),
            "bytes_up": outcome.bandwidth.bytes_up,
            "bytes_down_per_peer": outcome.bandwidth.bytes_down_per_peer,
        },
    });
    write_json(&report, args.out.as_deref())?;
    Ok(outcome.verdict)
}

fn broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<io::Error>().map(io::Error::kind) == Some(io::ErrorKind::BrokenPipe)
            || c.downcast_ref::<serde_json::Error>().and_then(serde_json::Error::io_error_kind)
                == Some(io::ErrorKind::BrokenPipe)
    })
}

fn main() -> Result<()> {
    match dispatch(Cli::parse().command) {
        Err(e) if broken_pipe(&e) => Ok(()),
        other => other,
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Chain { command: ChainCommand::Gen(a) } => {
            let chain = generate_chain(a.seed, a.blocks, a.txs_per_block, a.relevant_per_block, a.account)?;
            write_chain(&chain, output(a.out.as_deref())?)?;
        }
        Command::Serve { role } => {
            let (addr, service): (SocketAddr, Arc<dyn Service>) = match role {
                ServeRole::Fullnode { chain, addr, behavior } => {
                    (addr, Arc::new(FullNode::new(load_chain(&chain)?, behavior)))
                }
                ServeRole::Oracle { chain, addr, behavior, backend } => {
                    let chain = load_chain(&chain)?;
                    (addr, Arc::new(Oracle::new(chain, backend.setup()?, behavior)))
                }
            };
            sslc::transport::serve(addr, service)?;
        }
        Command::Run(args) => match run(args)? {
            Verdict::Accept => {}
            Verdict::Reject => std::process::exit(1),
            Verdict::Abort => std::process::exit(2),
        },
        Command::Costmodel(a) => {
            let params = match &a.params {
                Some(p) => CostParams::parse(&std::fs::read_to_string(p)?)?,
                None => CostParams::shipped(),
            };
            match (a.scenario, a.approach) {
                (Some(s), Some(ap)) => println!("{}", cost_model(s, ap, &params)),
                (None, None) => write_json(&table(&params), None)?,
                _ => bail!("give both --scenario and --approach, or neither"),
            }
        }
        Command::Bench(a) => {
            let backend = a.backend.setup()?;
            let records = bench(backend.as_ref(), &a.workloads, a.reps, a.seed)?;
            write_csv(&records, output(a.out.as_deref())?)?;
        }
        Command::Matrix(a) => {
            let account = AccountId([0x22; 32]);
            let chain = Arc::new(generate_chain(a.seed, a.blocks, a.txs_per_block, a.relevant_per_block, account)?);
            let report = run_matrix(chain, a.backend.setup()?, QuerySpec::average_amount(account), &a.nodes);
            write_json(&report, a.out.as_deref())?;
            let bad = report.violations().len();
            if bad > 0 {
                bail!("{bad} cells deviate from the rejection taxonomy");
            }
        }
        Command::Params { out } => {
            output(out.as_deref())?.write_all(HashParams::current().to_text().as_bytes())?;
        }
    }
    Ok(())
}
