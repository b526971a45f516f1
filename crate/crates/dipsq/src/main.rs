use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dipsq::config::{ConfigError, Scenario};
use dipsq::harness::{self, AnalyzeOptions, HarnessError, RunResult, Table};
use dipsq_core::couplings::{coupling_scan, family_maxima, AngularMomentumSpec, DipolarPrefactor};
use dipsq_core::observables::DEFAULT_WINDOW;

#[derive(Parser)]
#[command(name = "dipsq", version, about = "Spin squeezing in dipolar lattice gases")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exchange couplings of every Er-167 clock-like hyperfine qubit.
    Couplings {
        #[arg(long, default_value_t = 266.0)]
        spacing_nm: f64,
        /// Only the largest coupling of each F family.
        #[arg(long)]
        maxima: bool,
    },
    /// Runs a scenario file.
    Simulate { scenario: PathBuf },
    /// DTWA against exact diagonalization (and the Dicke solution for
    /// uniform couplings) on the first filling of a small scenario.
    OracleCompare { scenario: PathBuf },
    /// Squeezing, contrast and correlations of measured snapshots.
    Analyze {
        shots: PathBuf,
        /// Sites with x below this column form cloud A, the rest cloud B.
        #[arg(long)]
        split_column: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
        /// Skip the occupation mask and atom-number filter.
        #[arg(long)]
        no_filter: bool,
    },
}

fn load(path: &Path, seed: Option<u64>) -> Result<Scenario, HarnessError> {
    let mut s = Scenario::load(path)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    Ok(s)
}

fn couplings_table(spacing_nm: f64, maxima: bool) -> Result<Table, HarnessError> {
    let spec = AngularMomentumSpec::erbium_167();
    let spacing = spacing_nm * 1e-9;
    let rows = coupling_scan(&spec, spacing)?;
    let rows = if maxima { family_maxima(&rows) } else { rows };
    let prefactor = DipolarPrefactor::new(spec.lande_gj, spacing)?.value_hz;
    let mut t = Table::new("couplings.csv", &["f_lower", "f_upper", "m_f", "c_g", "j_perp_hz", "prefactor_hz"]);
    for r in rows {
        t.rows.push(vec![
            r.qubit.f_lower.to_string(),
            r.qubit.f_upper().to_string(),
            r.qubit.m_f.to_string(),
            r.c_g.to_string(),
            r.j_perp_hz.to_string(),
            prefactor.to_string(),
        ]);
    }
    Ok(t)
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let threads = rayon::current_num_threads();
    let result: RunResult = match cli.command {
        Command::Couplings { spacing_nm, maxima } => {
            let t = couplings_table(spacing_nm, maxima)?;
            print!("{}", t.header.join(","));
            println!();
            for r in &t.rows {
                println!("{}", r.join(","));
            }
            return Ok(());
        }
        Command::Simulate { scenario } => harness::run_scenario(&load(&scenario, cli.seed)?)?,
        Command::OracleCompare { scenario } => harness::run_oracle_compare(&load(&scenario, cli.seed)?)?,
        Command::Analyze {
            shots,
            split_column,
            window,
            no_filter,
        } => {
            let text = std::fs::read_to_string(&shots).map_err(|source| ConfigError::Io { path: shots.clone(), source })?;
            harness::analyze_snapshots(
                &text,
                &AnalyzeOptions {
                    split_column,
                    window,
                    seed: cli.seed.unwrap_or(1),
                    filter: !no_filter,
                },
            )?
        }
    };
    result.write(&cli.out_dir, threads)?;
    eprintln!(
        "wrote {} tables to {} in {:.1} s",
        result.tables.len(),
        cli.out_dir.display(),
        result.wall_s
    );
    for n in &result.notes {
        eprintln!("note: {n}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
