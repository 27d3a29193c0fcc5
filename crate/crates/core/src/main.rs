use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nilcalc::cli::*;
use nilcalc::Result;

#[derive(Parser, Debug)]
#[command(name = "nilcalc", version, about = "Spectral multipliers of sub-Laplacians on 2-step stratified groups")]
struct Cli {
    /// builtin group name (H1, H2, N32, G37D, HTYPE3, 37A-graph) or group JSON file
    #[arg(long, global = true)]
    group: Option<String>,
    /// run configuration JSON; flags override its fields
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// central frequency, comma separated
    #[arg(long, global = true, allow_hyphen_values = true)]
    eta: Option<String>,
    /// bump:A,B | heat:T | zero | table.csv
    #[arg(long, global = true)]
    multiplier: Option<String>,
    /// COUNTxSPACING:COUNTxSPACING for the x and u axes
    #[arg(long, global = true)]
    grid: Option<String>,
    /// output directory for grids, reports and tables
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// worker threads (results do not depend on it)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// validate the configuration, print it with defaults filled in, and stop
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// built-in groups
    Groups {
        #[command(subcommand)]
        what: GroupsCmd,
    },
    /// classify the Pfaffian form of a group with d1 = 4, d2 = 3
    Classify,
    /// spectral data of J_η as JSON
    Spectrum,
    /// synthesize a kernel grid (NKG1)
    Kernel,
    /// run one of the built-in checks
    Check { which: CheckArg },
    /// run a probe and emit a report
    Probe { which: ProbeArg },
    /// homogeneous partitions of unity
    Partition {
        #[command(subcommand)]
        what: PartitionCmd,
    },
}

#[derive(Subcommand, Debug)]
enum GroupsCmd {
    List,
}

#[derive(Subcommand, Debug)]
enum PartitionCmd {
    /// centres of the ε-partition of S^{n−1}
    Dump {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum CheckArg {
    Laguerre,
    Plancherel,
    Weight,
    Partition,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ProbeArg {
    ScalingCone,
    ScalingP,
    Mh,
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(g) = &cli.group {
        cfg.group = g.clone();
    }
    if let Some(m) = &cli.multiplier {
        cfg.multiplier = MultiplierSpec::parse(m)?;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    if let Some(gr) = &cli.grid {
        cfg.grid = Some(parse_grid(gr, &load_group(&cfg.group)?)?);
    }
    Ok(cfg)
}

/// Write to stdout; a closed pipe (`| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn run(cli: &Cli) -> Result<i32> {
    let cfg = resolve(cli)?;
    if cli.dry_run {
        cfg.validate()?;
        emit(&format!("{}\n", serde_json::to_string_pretty(&cfg)?))?;
        return Ok(EXIT_OK);
    }
    let out = match &cli.cmd {
        Cmd::Groups { what: GroupsCmd::List } => cmd_groups_list()?,
        Cmd::Classify => cmd_classify(&cfg.group)?,
        Cmd::Spectrum => {
            let Some(eta) = &cli.eta else {
                eprintln!("spectrum needs --eta");
                return Ok(EXIT_USAGE);
            };
            cmd_spectrum(&cfg.group, &parse_list(eta)?)?
        }
        Cmd::Kernel => cmd_kernel(&cfg)?,
        Cmd::Check { which } => {
            let k = match which {
                CheckArg::Laguerre => CheckKind::Laguerre,
                CheckArg::Plancherel => CheckKind::Plancherel,
                CheckArg::Weight => CheckKind::Weight,
                CheckArg::Partition => CheckKind::Partition,
            };
            cmd_check(k, &cfg)?
        }
        Cmd::Probe { which } => {
            let k = match which {
                ProbeArg::ScalingCone => ProbeKind::ScalingCone,
                ProbeArg::ScalingP => ProbeKind::ScalingP,
                ProbeArg::Mh => ProbeKind::Mh,
            };
            cmd_probe(k, &cfg)?
        }
        Cmd::Partition { what: PartitionCmd::Dump { n, eps } } => cmd_partition_dump(*n, *eps)?,
    };
    emit(&out.stdout)?;
    // kernels always land on disk; reports only when asked for
    let dir = cfg.out.clone().or_else(|| matches!(cli.cmd, Cmd::Kernel).then(|| PathBuf::from("nilcalc-out")));
    if let Some(dir) = dir {
        out.persist(&dir)?;
    }
    Ok(if out.pass { EXIT_OK } else { EXIT_NUMERICAL })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    }
    let code = match run(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
