//! Command-line front end: parameter exploration, database tooling, the
//! server/client pair, and the verification suites.
//!
//! Exit codes: 0 success/pass, 1 validation error, 2 runtime failure,
//! 3 verification failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use tpir::field::PrimeField;
use tpir::net::{client_retrieve, read_db, write_db, Server};
use tpir::params::{
    capacity, comparison_table, default_grid, derive_params, render_machine, render_table,
    SchemeConfig,
};
use tpir::scheme::{build_schedule, generate_queries, subsets_of_size, Database};
use tpir::verify::{
    audit_ranks, check_mds, measure_rate, privacy_exhaustive, privacy_statistical_suite,
};
use tpir::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_VERIFICATION: u8 = 3;

#[derive(Parser)]
#[command(
    name = "tpir",
    about = "T-private information retrieval with optimal sub-packetization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Ranks,
    Privacy,
    Rate,
    Mds,
}

#[derive(Clone, Copy, ValueEnum)]
enum PrivacyModeArg {
    /// enumerate the full randomness space where feasible, else error
    Exhaustive,
    /// seeded sampling against the heuristic TV threshold
    Statistical,
    /// exhaustive when the space fits, statistical otherwise
    Auto,
}

#[derive(Subcommand)]
enum Command {
    /// Derived scheme parameters and the baseline comparison table
    Params {
        #[arg(long = "N")]
        servers: Option<usize>,
        #[arg(long = "T")]
        collusion: Option<usize>,
        #[arg(long = "M")]
        records: Option<usize>,
        /// use the default config grid instead of one (N, T, M)
        #[arg(long)]
        grid: bool,
        /// line-oriented CSV output
        #[arg(long)]
        machine: bool,
    },
    /// Generate a random database file
    Gendb {
        #[arg(long = "N")]
        servers: usize,
        #[arg(long = "T")]
        collusion: usize,
        #[arg(long = "M")]
        records: usize,
        /// field size; defaults to the smallest admissible prime
        #[arg(long)]
        q: Option<u64>,
        /// stripes per record (record length = L * stripes symbols)
        #[arg(long, default_value_t = 1)]
        stripes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve one database replica
    Serve {
        #[arg(long = "N")]
        servers: usize,
        #[arg(long = "T")]
        collusion: usize,
        #[arg(long = "M")]
        records: usize,
        #[arg(long)]
        db: PathBuf,
        #[arg(long, default_value = "127.0.0.1:0")]
        listen: String,
        /// this replica's server index, 0-based
        #[arg(long)]
        index: usize,
    },
    /// Retrieve one record from N live servers
    Retrieve {
        #[arg(long = "N")]
        servers: usize,
        #[arg(long = "T")]
        collusion: usize,
        #[arg(long = "M")]
        records: usize,
        #[arg(long)]
        q: u64,
        #[arg(long, default_value_t = 1)]
        stripes: usize,
        /// record index, 0-based
        #[arg(long)]
        theta: usize,
        /// comma-separated server addresses, index order
        #[arg(long, value_delimiter = ',')]
        addresses: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// write the record here (8-byte LE symbols, row-major); else print
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite
    Verify {
        suite: Suite,
        #[arg(long = "N")]
        servers: Option<usize>,
        #[arg(long = "T")]
        collusion: Option<usize>,
        #[arg(long = "M")]
        records: Option<usize>,
        /// run over the default config grid
        #[arg(long)]
        grid: bool,
        /// field size; defaults per config to the smallest admissible prime
        #[arg(long)]
        q: Option<u64>,
        #[arg(long, value_enum, default_value_t = PrivacyModeArg::Auto)]
        mode: PrivacyModeArg,
        /// query sets per theta (statistical privacy) or per config (ranks)
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// comma-separated colluding servers; default: all coalitions of size <= T
        #[arg(long, value_delimiter = ',')]
        coalition: Option<Vec<usize>>,
        /// line-oriented CSV output
        #[arg(long)]
        machine: bool,
    },
}

fn exit_for(err: &Error) -> ExitCode {
    match err {
        Error::InvalidConfig(_) | Error::FieldTooSmall { .. } => ExitCode::from(EXIT_VALIDATION),
        _ => ExitCode::from(EXIT_RUNTIME),
    }
}

fn config_selection(
    servers: Option<usize>,
    collusion: Option<usize>,
    records: Option<usize>,
    grid: bool,
) -> Result<Vec<SchemeConfig>, Error> {
    match (servers, collusion, records) {
        (Some(n), Some(t), Some(m)) if !grid => Ok(vec![SchemeConfig::new(n, t, m)?]),
        (None, None, None) => Ok(default_grid()),
        _ if grid => Ok(default_grid()),
        _ => Err(Error::InvalidConfig(
            "give all of --N, --T, --M, or --grid".into(),
        )),
    }
}

fn cmd_params(configs: &[SchemeConfig], machine: bool) -> Result<(), Error> {
    if !machine {
        for &config in configs {
            let p = derive_params(config)?;
            println!(
                "(N={}, T={}, M={}): d={} n={} t={} alpha={:?} beta={:?} L={} D={} ell={} \
                 per-server downloads=({}, {}) capacity={}",
                config.servers,
                config.collusion,
                config.records,
                p.d,
                p.n,
                p.t,
                p.alpha,
                p.beta,
                p.sub_packetization,
                p.download,
                p.mixing_width,
                p.gamma_a,
                p.gamma_b,
                capacity(config)?,
            );
        }
        println!();
    }
    let rows = comparison_table(configs)?;
    if machine {
        print!("{}", render_machine(&rows));
    } else {
        print!("{}", render_table(&rows));
    }
    Ok(())
}

fn cmd_gendb(
    config: SchemeConfig,
    q: Option<u64>,
    stripes: usize,
    seed: u64,
    out: &PathBuf,
) -> Result<(), Error> {
    let params = derive_params(config)?;
    let q = q.unwrap_or(params.q_min);
    params.check_field(q)?;
    let field = PrimeField::new(q)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let db = Database::random(
        field,
        config.records,
        params.sub_packetization,
        stripes,
        &mut rng,
    )?;
    write_db(out, &db)?;
    println!(
        "wrote {} records of {} x {} symbols over GF({}) to {}",
        config.records,
        params.sub_packetization,
        stripes,
        q,
        out.display()
    );
    Ok(())
}

fn cmd_serve(
    config: SchemeConfig,
    db_path: &PathBuf,
    listen: &str,
    index: usize,
) -> Result<(), Error> {
    let params = derive_params(config)?;
    let db = read_db(db_path)?;
    params.check_field(db.field().order())?;
    let server = Server::bind(db, params, listen, index)?;
    println!("server {index} listening on {}", server.local_addr()?);
    server.run()
}

#[allow(clippy::too_many_arguments)]
fn cmd_retrieve(
    config: SchemeConfig,
    q: u64,
    stripes: usize,
    theta: usize,
    addresses: &[String],
    seed: u64,
    out: Option<&PathBuf>,
) -> Result<(), Error> {
    let params = derive_params(config)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let outcome = client_retrieve(addresses, &params, q, stripes, theta, &mut rng)?;
    let schedule = build_schedule(&params)?;
    println!(
        "downloaded {} symbols; rate {} (capacity {})",
        outcome.downloaded_symbols,
        measure_rate(&params, &schedule),
        capacity(config)?,
    );
    match out {
        Some(path) => {
            let rec = &outcome.record;
            let mut bytes = Vec::with_capacity(8 * rec.rows() * rec.cols());
            for i in 0..rec.rows() {
                for j in 0..rec.cols() {
                    bytes.extend_from_slice(&rec[(i, j)].to_le_bytes());
                }
            }
            std::fs::write(path, bytes)?;
            println!("record {theta} written to {}", path.display());
        }
        None => {
            let rec = &outcome.record;
            for i in 0..rec.rows() {
                let row: Vec<String> = (0..rec.cols()).map(|j| rec[(i, j)].to_string()).collect();
                println!("{}", row.join(" "));
            }
        }
    }
    Ok(())
}

/// true iff every check passed
#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    suite: Suite,
    configs: &[SchemeConfig],
    q: Option<u64>,
    mode: PrivacyModeArg,
    trials: Option<usize>,
    seed: u64,
    coalition: Option<&Vec<usize>>,
    machine: bool,
) -> Result<bool, Error> {
    let mut all_pass = true;
    for &config in configs {
        let params = derive_params(config)?;
        let q = q.unwrap_or(params.q_min);
        let label = format!("({},{},{}) q={q}", config.servers, config.collusion, config.records);
        match suite {
            Suite::Rate => {
                let schedule = build_schedule(&params)?;
                let rate = measure_rate(&params, &schedule);
                let cap = capacity(config)?;
                let pass = rate == cap;
                all_pass &= pass;
                if machine {
                    println!(
                        "{},{},{},{rate},{cap},{pass}",
                        config.servers, config.collusion, config.records
                    );
                } else {
                    println!(
                        "rate {label}: L/D = {rate}, capacity = {cap} -> {}",
                        if pass { "pass" } else { "FAIL" }
                    );
                }
            }
            Suite::Mds => {
                let check = check_mds(config, q)?;
                all_pass &= check.pass;
                if machine {
                    println!(
                        "{},{},{},{q},{},{}",
                        config.servers,
                        config.collusion,
                        config.records,
                        check.codes.len(),
                        check.pass
                    );
                } else {
                    let desc: Vec<String> = check
                        .codes
                        .iter()
                        .map(|(k, len, dim, subs)| format!("k={k} [{len},{dim}] ({subs} subsets)"))
                        .collect();
                    println!(
                        "mds {label}: {} -> {}",
                        desc.join(", "),
                        if check.pass { "pass" } else { "FAIL" }
                    );
                }
            }
            Suite::Ranks => {
                let count = trials.unwrap_or(50);
                let field = PrimeField::new(q)?;
                params.check_field(q)?;
                let schedule = build_schedule(&params)?;
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                let mut pass = true;
                for i in 0..count {
                    let theta = i % config.records;
                    let qs = generate_queries(&schedule, field, theta, &mut rng)?;
                    pass &= audit_ranks(&qs, &params)?.pass;
                }
                all_pass &= pass;
                if machine {
                    println!(
                        "{},{},{},{q},{count},{pass}",
                        config.servers, config.collusion, config.records
                    );
                } else {
                    println!(
                        "ranks {label}: {count} seeded query sets -> {}",
                        if pass { "pass" } else { "FAIL" }
                    );
                }
            }
            Suite::Privacy => {
                let coalitions: Vec<Vec<usize>> = match coalition {
                    Some(c) => vec![c.clone()],
                    None => (1..=config.collusion)
                        .flat_map(|size| subsets_of_size(config.servers, size))
                        .collect(),
                };
                let trials = trials.unwrap_or(10_000);
                let reports = match mode {
                    PrivacyModeArg::Statistical => {
                        privacy_statistical_suite(config, q, &coalitions, trials, seed, false)?
                    }
                    PrivacyModeArg::Exhaustive => coalitions
                        .iter()
                        .map(|c| privacy_exhaustive(config, q, c))
                        .collect::<Result<Vec<_>, _>>()?,
                    PrivacyModeArg::Auto => {
                        let exhaustive: Result<Vec<_>, Error> = coalitions
                            .iter()
                            .map(|c| privacy_exhaustive(config, q, c))
                            .collect();
                        match exhaustive {
                            Ok(r) => r,
                            Err(Error::TooLargeForExhaustive { .. }) => {
                                privacy_statistical_suite(
                                    config, q, &coalitions, trials, seed, false,
                                )?
                            }
                            Err(e) => return Err(e),
                        }
                    }
                };
                for report in reports {
                    all_pass &= report.pass;
                    if machine {
                        println!("{}", report.render_machine());
                    } else {
                        println!("{}", report.render_text());
                    }
                }
            }
        }
    }
    Ok(all_pass)
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Params {
            servers,
            collusion,
            records,
            grid,
            machine,
        } => {
            let configs = config_selection(servers, collusion, records, grid)?;
            cmd_params(&configs, machine)?;
            Ok(true)
        }
        Command::Gendb {
            servers,
            collusion,
            records,
            q,
            stripes,
            seed,
            out,
        } => {
            cmd_gendb(SchemeConfig::new(servers, collusion, records)?, q, stripes, seed, &out)?;
            Ok(true)
        }
        Command::Serve {
            servers,
            collusion,
            records,
            db,
            listen,
            index,
        } => {
            cmd_serve(SchemeConfig::new(servers, collusion, records)?, &db, &listen, index)?;
            Ok(true)
        }
        Command::Retrieve {
            servers,
            collusion,
            records,
            q,
            stripes,
            theta,
            addresses,
            seed,
            out,
        } => {
            cmd_retrieve(
                SchemeConfig::new(servers, collusion, records)?,
                q,
                stripes,
                theta,
                &addresses,
                seed,
                out.as_ref(),
            )?;
            Ok(true)
        }
        Command::Verify {
            suite,
            servers,
            collusion,
            records,
            grid,
            q,
            mode,
            trials,
            seed,
            coalition,
            machine,
        } => {
            let configs = config_selection(servers, collusion, records, grid)?;
            cmd_verify(
                suite,
                &configs,
                q,
                mode,
                trials,
                seed,
                coalition.as_ref(),
                machine,
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VERIFICATION),
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    }
}
