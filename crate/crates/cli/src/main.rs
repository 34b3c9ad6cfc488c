use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgMatches, Command as Cli};
use transfold_cli::{run, CliError, Command, RecordSink, RunConfig, KEYS};

fn cli() -> Cli {
    let mut args: Vec<Arg> = KEYS
        .iter()
        .map(|(key, help)| {
            // flags use dashes where file keys use underscores
            let long: &'static str = Box::leak(key.replace('_', "-").into_boxed_str());
            Arg::new(*key).long(long).value_name("VALUE").allow_negative_numbers(true).help(*help)
        })
        .collect();
    args.push(Arg::new("config").long("config").short('c').value_name("FILE").help("flat key = value file; flags override it"));
    Cli::new("transfold")
        .about("Transverse and folded tensor network contraction for infinite Ising chains")
        .subcommand_required(true)
        .subcommands(Command::ALL.iter().map(|c| Cli::new(c.name()).about(c.about()).args(args.clone())))
}

fn configure(name: &str, m: &ArgMatches) -> Result<RunConfig, CliError> {
    let command = Command::parse(name).ok_or_else(|| CliError::Config(format!("unknown subcommand {name}")))?;
    let mut cfg = RunConfig::defaults(command);
    if let Some(path) = m.get_one::<String>("config") {
        cfg.apply_file(&PathBuf::from(path))?;
    }
    for (key, _) in KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(name: &str, m: &ArgMatches) -> Result<(), CliError> {
    let cfg = configure(name, m)?;
    let out: Box<dyn Write> = match &cfg.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| CliError::Config(format!("cannot create {}: {e}", path.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    let mut sink = RecordSink::new(cfg.format, out)?;
    run(&cfg, &mut |r| sink.write(&r))
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    let (name, sub) = matches.subcommand().expect("subcommand required");
    match execute(name, sub) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("transfold: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
