//! Front end for the `g2f` binary.

pub mod commands;
pub mod config;
pub mod emit;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::{Command, Identity};
use config::{load_config, Params, ParseError, RawConfig};

#[derive(Debug)]
pub enum CliError {
    Parse(ParseError),
    Usage(String),
    Numeric(g2fermion::Error),
    Io(String),
}

impl CliError {
    /// 2 for bad input or a point outside the sewing domain, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        use g2fermion::Error as E;
        match self {
            CliError::Parse(_) | CliError::Usage(_) => 2,
            CliError::Numeric(e) => match e {
                E::NonConvergent { .. } | E::LinearSolveFailure(_) | E::BranchAmbiguity(_) | E::LimitUnstable(_) => 3,
                _ => 2,
            },
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse(e) => write!(f, "parse error: {e}"),
            CliError::Usage(s) => write!(f, "usage: {s}"),
            CliError::Numeric(e) => write!(f, "{e}"),
            CliError::Io(s) => write!(f, "i/o: {s}"),
        }
    }
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        CliError::Parse(e)
    }
}

impl From<g2fermion::Error> for CliError {
    fn from(e: g2fermion::Error) -> Self {
        CliError::Numeric(e)
    }
}

#[derive(Debug, Parser)]
#[command(name = "g2f", version, about = "Genus-two free fermion partition functions and identities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
    /// key=value file; flags take precedence over its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub params: Flags,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum IdentityArg {
    PartitionOracle,
    GenformOracle,
    QfDet,
    JacobiProduct,
    Bosonization,
    RankOne,
    Modular,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Torus partition function of the torus chosen by --torus.
    Z1,
    /// Genus-two partition function.
    Z2,
    /// Rank-one genus-two partition function (real characteristics).
    #[command(name = "z2-rank1")]
    Z2Rank1,
    /// Heisenberg genus-two partition function.
    #[command(name = "z2-heisenberg")]
    Z2Heisenberg,
    /// Genus-two Szegő kernel at x = first --w point, y = first --z point.
    Szego,
    /// Generating form det of the Szegő kernel times the partition function.
    Genform,
    /// Virasoro one-point function at the first --w point.
    Virasoro,
    /// Check an identity and report the agreement.
    Check {
        #[arg(value_enum)]
        identity: IdentityArg,
    },
    /// Evaluate the partition function on an ε grid.
    Scan,
}

macro_rules! flags {
    ($( $field:ident : $key:literal $(, short = $s:literal)? ; )*) => {
        #[derive(Debug, Default, Args)]
        pub struct Flags {
            $(
                #[arg(long, global = true, allow_hyphen_values = true $(, short = $s)?)]
                pub $field: Option<String>,
            )*
        }

        impl Flags {
            pub fn raw(&self) -> Result<RawConfig, ParseError> {
                let mut r = RawConfig::default();
                $( if let Some(v) = &self.$field { r.set($key, v)?; } )*
                Ok(r)
            }
        }
    };
}

flags! {
    tau1: "tau1";
    tau2: "tau2";
    eps: "eps";
    alpha1: "alpha1";
    beta1: "beta1";
    alpha2: "alpha2";
    beta2: "beta2";
    xi: "xi";
    truncation: "M", short = 'M';
    weight: "W", short = 'W';
    tol: "tol";
    max_terms: "max_terms";
    torus: "torus";
    w: "w";
    z: "z";
    order: "order";
    word: "word";
    check_tol: "check_tol";
    eps_grid: "eps_grid";
    scan_extent: "scan_extent";
    format: "format";
    output: "output", short = 'o';
}

fn command(c: &Cmd) -> Command {
    match c {
        Cmd::Z1 => Command::Z1,
        Cmd::Z2 => Command::Z2,
        Cmd::Z2Rank1 => Command::Z2Rank1,
        Cmd::Z2Heisenberg => Command::Z2Heisenberg,
        Cmd::Szego => Command::Szego,
        Cmd::Genform => Command::Genform,
        Cmd::Virasoro => Command::Virasoro,
        Cmd::Scan => Command::Scan,
        Cmd::Check { identity } => Command::Check(match identity {
            IdentityArg::PartitionOracle => Identity::PartitionOracle,
            IdentityArg::GenformOracle => Identity::GenformOracle,
            IdentityArg::QfDet => Identity::QfDet,
            IdentityArg::JacobiProduct => Identity::JacobiProduct,
            IdentityArg::Bosonization => Identity::Bosonization,
            IdentityArg::RankOne => Identity::RankOne,
            IdentityArg::Modular => Identity::Modular,
        }),
    }
}

/// Effective parameters: defaults, then the config file, then flags.
pub fn resolve(cli: &Cli) -> Result<(Command, Params), CliError> {
    let file = match &cli.config {
        Some(path) => load_config(path)?,
        None => RawConfig::default(),
    };
    let raw = file.overridden_by(&cli.params.raw()?);
    Ok((command(&cli.command), Params::from_raw(&raw)?))
}

/// Run and write the artifact; returns the process exit code.
pub fn execute(cli: &Cli) -> i32 {
    let res = resolve(cli).and_then(|(cmd, p)| {
        let text = commands::run(&cmd, &p)?;
        if p.output == "-" {
            print!("{text}");
            Ok(())
        } else {
            std::fs::write(&p.output, text).map_err(|e| CliError::Io(format!("{}: {e}", p.output)))
        }
    });
    match res {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("g2f: {e}");
            e.exit_code()
        }
    }
}
