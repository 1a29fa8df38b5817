use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use quasilin::commands::{
    cmd_demo, cmd_example31, cmd_fig1, cmd_scan, cmd_solve, cmd_table1, Common, DemoArgs, Format, TABLE1_SIGMAS,
};
use quasilin::instances::DEFAULT_SEED;
use quasilin::CliError;
use quasilin_core::fixpoint::{IterationMode, PsiKind};
use quasilin_core::mech::Scheme;
use quasilin_core::scalarnl::ScalarFn;

#[derive(Parser, Debug)]
#[command(name = "quasilin", version, about = "Solve AX + XB + f(X)C = D and reproduce the experiments")]
struct Cli {
    #[command(flatten)]
    global: GlobalFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalFlags {
    /// Iteration tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Iteration cap.
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    /// Fixed-point iteration frame.
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: FormatArg,
    /// Seed for manufactured instances (QUASILIN_SEED overrides).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Diag,
    Direct,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PsiArg {
    Sqrt,
    Exp,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SchemeArg {
    Aho,
    Nt,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GArg {
    ExpNeg,
    Log,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the problem described by a JSON file.
    Solve { problem: PathBuf },
    /// Exp fixed-point iteration over manufactured contraction factors.
    Table1 {
        /// Comma-separated target contraction factors (may be empty).
        #[arg(long)]
        sigma: Option<String>,
        #[arg(long, default_value_t = 10)]
        n: usize,
    },
    /// Trajectory of one diagonal entry of the diagonalized iterates.
    Fig1 {
        #[arg(long, value_enum)]
        psi: PsiArg,
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Scale of N (0 gives N = 0).
        #[arg(long)]
        n_scale: Option<f64>,
    },
    /// trace(X^-1) with rank-one M or N: verification residuals.
    Example31 {
        #[arg(long, default_value_t = 10)]
        n: usize,
    },
    /// Interior-point projection steps with AHO or NT step equations.
    Demo {
        #[arg(long, value_enum, default_value = "aho")]
        scheme: SchemeArg,
        #[arg(long, default_value_t = 10)]
        steps: usize,
        #[arg(long, default_value_t = 1.0)]
        young: f64,
        #[arg(long, default_value_t = 0.2)]
        poisson: f64,
        #[arg(long, default_value_t = 1.0)]
        mu0: f64,
        #[arg(long, default_value_t = 0.5)]
        mu_factor: f64,
        /// Matrix Market file with the symmetric target Ybar.
        #[arg(long)]
        ybar: Option<PathBuf>,
        /// Size of the random Ybar when no file is given.
        #[arg(long, default_value_t = 3)]
        n: usize,
    },
    /// Roots of gamma1 + g(y) gamma2 - y on [lo, hi].
    Scan {
        #[arg(long, value_enum)]
        g: GArg,
        #[arg(long, allow_hyphen_values = true)]
        gamma1: f64,
        #[arg(long, allow_hyphen_values = true)]
        gamma2: f64,
        #[arg(long, allow_hyphen_values = true)]
        lo: f64,
        #[arg(long, allow_hyphen_values = true)]
        hi: f64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = cli.global;
    let seed = match std::env::var("QUASILIN_SEED") {
        Ok(v) => match v.trim().parse() {
            Ok(s) => s,
            Err(_) => {
                eprintln!("quasilin: QUASILIN_SEED must be an unsigned integer");
                return ExitCode::from(1);
            }
        },
        Err(_) => g.seed.unwrap_or(DEFAULT_SEED),
    };
    let common = Common {
        tol: g.tol,
        max_iter: g.max_iter,
        mode: g.mode.map(|m| match m {
            ModeArg::Diag => IterationMode::Diagonalized,
            ModeArg::Direct => IterationMode::Direct,
        }),
        out: g.out,
        format: match g.format {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        },
        seed,
    };
    let result = match cli.command {
        Command::Solve { problem } => cmd_solve(&problem, &common),
        Command::Table1 { sigma, n } => match sigma.as_deref().map(parse_sigmas).transpose() {
            Ok(s) => cmd_table1(s.as_deref().unwrap_or(&TABLE1_SIGMAS), n, &common),
            Err(e) => Err(e),
        },
        Command::Fig1 { psi, n, n_scale } => {
            let psi = match psi {
                PsiArg::Sqrt => PsiKind::Sqrt,
                PsiArg::Exp => PsiKind::ExpNeg,
            };
            cmd_fig1(psi, n, n_scale, &common)
        }
        Command::Example31 { n } => cmd_example31(n, &common),
        Command::Demo { scheme, steps, young, poisson, mu0, mu_factor, ybar, n } => {
            let scheme = match scheme {
                SchemeArg::Aho => Scheme::Aho,
                SchemeArg::Nt => Scheme::Nt,
            };
            cmd_demo(&DemoArgs { scheme, steps, young, poisson, mu0, mu_factor, ybar, n }, &common)
        }
        Command::Scan { g, gamma1, gamma2, lo, hi, samples } => {
            let g = match g {
                GArg::ExpNeg => ScalarFn::ExpNeg,
                GArg::Log => ScalarFn::Log,
            };
            cmd_scan(&g, gamma1, gamma2, lo, hi, samples, &common)
        }
    };
    match result {
        Ok(out) => {
            print!("{}", out.stdout);
            ExitCode::from(out.exit_code as u8)
        }
        Err(e) => {
            eprintln!("quasilin: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn parse_sigmas(list: &str) -> Result<Vec<f64>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse().map_err(|_| CliError::Input(format!("bad sigma value {v:?}"))))
        .collect()
}
