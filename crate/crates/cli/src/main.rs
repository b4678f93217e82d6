//! `mercurius`: refine, project, check and simulate `.mpp` protocols.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mercurius_ast::{Channel, Party};
use mercurius_cli::{parse_syncs, resolve_bounds, run, Command, Format, RunConfig, BOUNDS_ENV};

#[derive(Parser)]
#[command(name = "mercurius", version, about = "Race-freedom verification for multiparty asynchronous protocols")]
struct Cli {
    /// Report format.
    #[arg(long, value_enum, global = true, default_value = "text")]
    format: FormatArg,
    /// Write the report to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Json,
}

#[derive(Args)]
struct Input {
    /// The `.mpp` protocol file.
    file: PathBuf,
    /// Unrolling depth for recursive definitions (overrides the bounds).
    #[arg(long)]
    unroll: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the protocol refined with ordering assumptions and guards.
    Refine(Input),
    /// Print local projections.
    Project {
        #[command(flatten)]
        input: Input,
        /// Project onto this party only.
        #[arg(long, conflicts_with = "all")]
        party: Option<String>,
        /// Project further onto this channel (endpoint specification).
        #[arg(long)]
        channel: Option<String>,
        /// Print every party, every endpoint and the shared assumptions.
        #[arg(long)]
        all: bool,
    },
    /// Static checks.
    #[command(subcommand)]
    Check(CheckCmd),
    /// Explore all interleavings of the `impl` blocks.
    Simulate {
        #[command(flatten)]
        input: Input,
        /// Bounds such as `steps=2000,states=200000,unroll=2`.
        #[arg(long)]
        bounds: Option<String>,
        /// Simulate programs synthesised from the projections instead.
        #[arg(long)]
        synthesize: bool,
    },
    /// Print the derivation of an ordering, e.g. `"A^1 <HB C^3"` or `"1 <HB 3"`.
    Explain {
        #[command(flatten)]
        input: Input,
        fact: String,
        /// Extra synchronisation edges `A^1<B^2`.
        #[arg(long)]
        sync: Vec<String>,
    },
}

#[derive(Subcommand)]
enum CheckCmd {
    /// Well-formedness of choices and parallel compositions.
    Wf(Input),
    /// Race freedom of the refined protocol.
    Race {
        #[command(flatten)]
        input: Input,
        /// Extra synchronisation edges `A^1<B^2`.
        #[arg(long)]
        sync: Vec<String>,
    },
    /// The transmission graph.
    Graph {
        #[command(flatten)]
        input: Input,
        /// Emit Graphviz DOT.
        #[arg(long)]
        dot: bool,
    },
    /// Modular checks of parameterised definitions.
    Modular {
        #[command(flatten)]
        input: Input,
        /// Print the pre-context condition of this definition.
        #[arg(long)]
        def: Option<String>,
        /// Check the invocations inside this definition.
        #[arg(long)]
        usage: Option<String>,
    },
}

fn config(cli: Cli) -> Result<RunConfig, String> {
    let env = std::env::var(BOUNDS_ENV).ok();
    let (input, command, sync, bounds) = match cli.command {
        Cmd::Refine(i) => (i, Command::Refine, vec![], None),
        Cmd::Project { input, party, channel, all } => (
            input,
            Command::Project { party: party.map(Party::new), channel: channel.map(Channel::new), all },
            vec![],
            None,
        ),
        Cmd::Check(CheckCmd::Wf(i)) => (i, Command::CheckWf, vec![], None),
        Cmd::Check(CheckCmd::Race { input, sync }) => (input, Command::CheckRace, sync, None),
        Cmd::Check(CheckCmd::Graph { input, dot }) => (input, Command::CheckGraph { dot }, vec![], None),
        Cmd::Check(CheckCmd::Modular { input, def, usage }) => {
            (input, Command::CheckModular { def, usage }, vec![], None)
        }
        Cmd::Simulate { input, bounds, synthesize } => (input, Command::Simulate { synthesize }, vec![], bounds),
        Cmd::Explain { input, fact, sync } => (input, Command::Explain { fact }, sync, None),
    };
    let mut bounds = resolve_bounds(bounds.as_deref(), env.as_deref())?;
    if let Some(u) = input.unroll {
        bounds.unroll = u;
    }
    Ok(RunConfig {
        input: input.file,
        command,
        sync: parse_syncs(&sync)?,
        bounds,
        format: match cli.format {
            FormatArg::Text => Format::Text,
            FormatArg::Json => Format::Json,
        },
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let out = cli.out.clone();
    let cfg = match config(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = run(&cfg);
    if result.code == 2 {
        eprint!("{}", result.output);
        return ExitCode::from(2);
    }
    let written = match &out {
        Some(path) => std::fs::write(path, &result.output),
        None => std::io::stdout().write_all(result.output.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write report: {e}");
        return ExitCode::from(2);
    }
    ExitCode::from(result.code as u8)
}
